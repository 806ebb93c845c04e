//! Acceptance criteria 1–10. Prints one PASS/FAIL line per criterion and
//! exits nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use infolock::cli::format_sig;
use infolock::experiments::{
    chernoff_check, decode_check, expectation_check, lipschitz_check, locking_scan, mub_benchmark,
    qkd_demo, twirl_check, ChernoffParams, DecodeParams, ExpectationParams, LipschitzParams,
    LockingScanParams, Outcome, QkdParams, TwirlParams,
};
use infolock::locking::{decode_threshold, key_threshold, ThresholdInput, ThresholdKind};
use infolock::qkd::qkd_security_bounds;
use infolock::{Result, RngSpec};

const SEED: u64 = 20_240_611;
const MINUTE: Duration = Duration::from_secs(60);

type Criterion = (u32, &'static str, fn() -> Check, Option<Duration>);

struct Check {
    passed: bool,
    detail: String,
}

impl Check {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Check {
            passed,
            detail: detail.into(),
        }
    }
}

fn verdicts(out: Result<Outcome>, ids: &[&str]) -> Check {
    let out = match out {
        Ok(o) => o,
        Err(e) => return Check::new(false, format!("error: {e}")),
    };
    let mut passed = true;
    let mut detail = Vec::new();
    for id in ids {
        let vs: Vec<_> = out.verdicts.iter().filter(|v| v.id == *id).collect();
        if vs.is_empty() {
            passed = false;
            detail.push(format!("{id} missing"));
        }
        for v in vs {
            passed &= v.passed;
            detail.push(format!(
                "{id} {} vs {}",
                format_sig(v.observed),
                format_sig(v.threshold)
            ));
        }
    }
    Check::new(passed, detail.join("; "))
}

fn twirl() -> Check {
    let p = TwirlParams {
        d_a: vec![2, 3],
        d_r: 2,
        inputs: 20,
        samples: 100_000,
    };
    verdicts(
        twirl_check(&p, &RngSpec::new(SEED, 1)),
        &["haar.twirl_matches_monte_carlo"],
    )
}

fn expectation() -> Check {
    let p = ExpectationParams {
        c: 4,
        k: vec![4, 16],
        samples: 200,
    };
    let out = expectation_check(&p, &RngSpec::new(SEED, 2));
    let bounds = out.as_ref().map(|o| {
        (
            o.bounds.get("expectation_bound_k4").copied(),
            o.bounds.get("expectation_bound_k16").copied(),
        )
    });
    let mut c = verdicts(out.clone(), &["locking.expectation_bound_dominates_mean"]);
    match bounds {
        Ok((Some(b4), Some(b16))) => {
            let exact = (b4 - 1.0).abs() <= 1e-12 && (b16 - 0.5).abs() <= 1e-12;
            c.passed &= exact;
            c.detail += &format!("; bounds {b4} and {b16} (expected 1 and 0.5)");
        }
        _ => c.passed = false,
    }
    c
}

fn lipschitz() -> Check {
    let p = LipschitzParams {
        c: 2,
        k: 2,
        pairs: 500,
        s: 8,
    };
    verdicts(
        lipschitz_check(&p, &RngSpec::new(SEED, 3)),
        &[
            "locking.lipschitz_unitary_zero_violations",
            "locking.lipschitz_measurement_zero_violations",
        ],
    )
}

fn chernoff() -> Check {
    let p = ChernoffParams {
        d: vec![2, 3, 4],
        s: vec![16, 64, 256],
        eta: vec![1.5, 2.0],
        trials: 2000,
    };
    verdicts(
        chernoff_check(&p, &RngSpec::new(SEED, 4)),
        &["measure.chernoff_failure_within_bound"],
    )
}

/// Hand-computed table, `k = 20`, `c = e = (c+e)/2`.
fn threshold_table() -> Check {
    use ThresholdKind::*;
    let eps = [1.0, 0.5, 0.25];
    let mut mismatches = Vec::new();
    let mut rows = 0;
    let mut expect = |t: &ThresholdInput, kind: ThresholdKind, want: f64| {
        rows += 1;
        match key_threshold(t, kind) {
            Ok(v) if v.value == want => {}
            Ok(v) => mismatches.push(format!(
                "{} eps={} c+e={}: {} != {want}",
                kind.name(),
                t.eps,
                t.c + t.e,
                v.value
            )),
            Err(e) => mismatches.push(format!("{} eps={}: {e}", kind.name(), t.eps)),
        }
    };
    let plain: [(f64, [f64; 3], [f64; 3]); 2] = [
        (8.0, [10.5, 12.5, 14.5], [14.0, 16.0, 18.0]),
        (16.0, [11.0, 13.0, 15.0], [15.0, 17.0, 19.0]),
    ];
    for (ce, unihigh, povm) in plain {
        for i in 0..3 {
            let t = ThresholdInput::uniform(ce / 2.0, 20.0, ce / 2.0, eps[i], 0.01);
            expect(&t, CorUnihigh, unihigh[i]);
            expect(&t, CorModmod, unihigh[i]);
            expect(&t, CorUnihighPovm, povm[i]);
            expect(&t, CorModmodPovm, povm[i]);
            expect(&t, ThmLocking, povm[i]);
            expect(&t, ThmDecode, [-4.0, -6.0, -8.0][i]);
        }
    }
    // message min-entropy 2 bits short, entanglement 1 bit short: δ = 1.5
    let deficit: [(f64, [f64; 3], [f64; 3]); 2] = [
        (8.0, [12.0, 14.0, 16.0], [15.5, 17.5, 19.5]),
        (16.0, [12.5, 14.5, 16.5], [16.5, 18.5, 20.5]),
    ];
    for (ce, modmod, povm) in deficit {
        for i in 0..3 {
            let mut t = ThresholdInput::uniform(ce / 2.0, 20.0, ce / 2.0, eps[i], 0.01);
            t.hmin_m -= 2.0;
            t.hmin_e -= 1.0;
            expect(&t, CorModmod, modmod[i]);
            expect(&t, CorModmodPovm, povm[i]);
            expect(&t, ThmLocking, povm[i]);
            expect(&t, ThmDecode, [-4.0, -6.0, -8.0][i]);
        }
    }
    let mut t = ThresholdInput::uniform(4.0, 20.0, 4.0, 0.25, 0.01);
    t.hmax_m -= 4.0;
    t.h2_e -= 2.0;
    rows += 1;
    if decode_threshold(&t) != Ok(-7.0) {
        mismatches.push(format!(
            "decode with entropy gaps: {:?} != -7",
            decode_threshold(&t)
        ));
    }
    Check::new(
        mismatches.is_empty(),
        format!("{rows} rows exact; {}", mismatches.join("; ")),
    )
}

fn decoder() -> Check {
    let p = DecodeParams {
        n: 2,
        messages: 2,
        e: 32,
        c: vec![32],
        samples: 50,
    };
    verdicts(
        decode_check(&p, &RngSpec::new(SEED, 6)),
        &[
            "decode.isometry",
            "decode.mean_trace_distance",
            "decode.mean_message_error",
        ],
    )
}

fn trend() -> Check {
    let p = LockingScanParams {
        total_dim: 64,
        k_bits: vec![0, 2, 4],
        samples: 50,
        restarts: 8,
    };
    verdicts(
        locking_scan(&p, &RngSpec::new(SEED, 7)),
        &["locking.trend_halves"],
    )
}

fn mub() -> Check {
    match mub_benchmark(8, &RngSpec::new(SEED, 8)) {
        Ok(v) => Check::new(
            (v - 0.5).abs() <= 0.02,
            format!("accessible information {v:.6} bits (0.5 ± 0.02)"),
        ),
        Err(e) => Check::new(false, format!("error: {e}")),
    }
}

fn qkd() -> Check {
    let p = QkdParams {
        n: 6,
        k_bits: 3,
        trials: 64,
        restarts: 8,
        runs: 4,
    };
    let mut c = verdicts(
        qkd_demo(&p, &RngSpec::new(SEED, 9)),
        &["qkd.recovery_exact", "qkd.without_key_below_with_key"],
    );
    match qkd_security_bounds(0.25, 2) {
        Ok((t, i)) => {
            c.passed &= t == 0.5 && i == 6.0;
            c.detail += &format!("; bounds ({t}, {i})");
        }
        Err(e) => {
            c.passed = false;
            c.detail += &format!("; bounds error: {e}");
        }
    }
    c
}

fn invariants() -> Check {
    let failures: Vec<String> = common::SUITES
        .iter()
        .filter_map(|(name, suite)| suite().err().map(|e| format!("{name}: {e}")))
        .collect();
    Check::new(
        failures.is_empty(),
        format!(
            "{} suites, {} failed {}",
            common::SUITES.len(),
            failures.len(),
            failures.join("; ")
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        (1, "twirl exactness", twirl, Some(MINUTE)),
        (2, "expectation bound", expectation, Some(5 * MINUTE)),
        (3, "lipschitz audits", lipschitz, None),
        (4, "chernoff sampling", chernoff, None),
        (5, "threshold tables", threshold_table, None),
        (6, "decoder performance", decoder, Some(10 * MINUTE)),
        (7, "locking trend", trend, Some(30 * MINUTE)),
        (8, "mub benchmark", mub, None),
        (9, "qkd demo", qkd, None),
        (10, "invariant suites", invariants, Some(30 * MINUTE)),
    ];
    let mut all = true;
    for (n, name, run, limit) in criteria {
        let start = Instant::now();
        let mut c = run();
        let elapsed = start.elapsed();
        if let Some(limit) = limit {
            if elapsed > limit {
                c.passed = false;
                c.detail += &format!("; over the {}s limit", limit.as_secs());
            }
        }
        all &= c.passed;
        println!(
            "criterion {n:>2} {} {name} [{:.1}s] {}",
            if c.passed { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            c.detail
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
