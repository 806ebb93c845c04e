//! Invariant suites shared by the property-test targets and the acceptance
//! runner. Each suite drives a deterministic proptest runner and returns the
//! first counterexample as an error string.

#![allow(dead_code)]

use infolock::decode::{
    build_decoder, decoder_distance_bound, evaluate_decoder, sample_decoder_performance,
    DecodingSetup,
};
use infolock::entropy::{
    alicki_fannes_bound, mutual_information, spectrum_delta, spectrum_entropy, DeltaOrder,
    EntropyKind,
};
use infolock::haar::{ginibre, mc_twirl, sample_haar_matrix, schur_twirl};
use infolock::locking::{distinguishability, message_marginal_defect, uniform, LockingScheme};
use infolock::measure::{
    quasi_metric, random_povm, random_unit_vector, validate_quasi, QuasiMeasurement,
};
use infolock::qcore::{
    kron, max_abs, one_norm_entropy_bound, partial_trace, purify, trace_distance, vec_to_op,
    CMatrix, DensityOperator, PureState, SubsystemLayout, C64,
};
use infolock::qkd::{qkd_security_bounds, run_protocol_demo_with};
use infolock::RngSpec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestRng, TestRunner};
use rand_chacha::ChaCha8Rng;

pub const DEFAULT_CASES: u32 = 1000;

pub type Suite = (&'static str, fn() -> Result<(), String>);

fn run<S: Strategy>(
    cases: u32,
    strategy: S,
    test: impl Fn(S::Value) -> Result<(), TestCaseError>,
) -> Result<(), String>
where
    S::Value: std::fmt::Debug,
{
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let rng = TestRng::deterministic_rng(RngAlgorithm::ChaCha);
    let mut runner = TestRunner::new_with_rng(config, rng);
    runner.run(&strategy, test).map_err(|e| e.to_string())
}

fn rng(seed: u64) -> ChaCha8Rng {
    RngSpec::new(seed, 0).rng()
}

fn random_state(layout: SubsystemLayout, rank: usize, r: &mut ChaCha8Rng) -> DensityOperator {
    let d = layout.total_dim();
    let g = ginibre(d, rank.clamp(1, d), r);
    let m = &g * g.adjoint();
    let t = m.trace();
    DensityOperator::new(m / t, layout).expect("valid state")
}

fn single(d: usize) -> SubsystemLayout {
    SubsystemLayout::single("A", d).unwrap()
}

fn bipartite(da: usize, db: usize) -> SubsystemLayout {
    SubsystemLayout::new([("A", da), ("B", db)]).unwrap()
}

fn fail(msg: String) -> TestCaseError {
    TestCaseError::fail(msg)
}

// ------------------------------------------------------------------ qcore

pub fn trace_distance_metric() -> Result<(), String> {
    run(
        DEFAULT_CASES,
        (1usize..=8, 1usize..=8, any::<u64>()),
        |(d, rank, seed)| {
            let mut r = rng(seed);
            let [a, b, c] = [0, 1, 2].map(|_| random_state(single(d), rank, &mut r));
            let ab = trace_distance(&a, &b).unwrap();
            let ba = trace_distance(&b, &a).unwrap();
            let bc = trace_distance(&b, &c).unwrap();
            let ac = trace_distance(&a, &c).unwrap();
            prop_assert!((ab - ba).abs() <= 1e-12, "asymmetric: {ab} vs {ba}");
            prop_assert!(ac <= ab + bc + 1e-12, "triangle: {ac} > {ab} + {bc}");
            Ok(())
        },
    )?;
    run(
        DEFAULT_CASES,
        (1usize..=4, 1usize..=2, any::<u64>()),
        |(da, db, seed)| {
            let mut r = rng(seed);
            let l = bipartite(da, db);
            let a = random_state(l.clone(), da * db, &mut r);
            let b = random_state(l, 1 + (seed % 3) as usize, &mut r);
            let full = trace_distance(&a, &b).unwrap();
            for keep in ["A", "B"] {
                let part = trace_distance(
                    &partial_trace(&a, &[keep]).unwrap(),
                    &partial_trace(&b, &[keep]).unwrap(),
                )
                .unwrap();
                prop_assert!(
                    part <= full + 1e-12,
                    "not monotone on {keep}: {part} > {full}"
                );
            }
            Ok(())
        },
    )
}

pub fn one_norm_entropy_bound_holds() -> Result<(), String> {
    run(DEFAULT_CASES, (1usize..=6, any::<u64>()), |(d, seed)| {
        let mut r = rng(seed);
        let h = ginibre(d, d, &mut r);
        let rho = (&h + h.adjoint()).scale(0.5);
        let gamma = random_state(single(d), d, &mut r).into_matrix();
        match one_norm_entropy_bound(&rho, &gamma) {
            Ok((lhs, rhs)) => prop_assert!(lhs <= rhs + 1e-9, "{lhs} > {rhs}"),
            Err(infolock::Error::IllConditioned(_)) => {}
            Err(e) => return Err(fail(e.to_string())),
        }
        Ok(())
    })
}

pub fn vec_to_op_isometric() -> Result<(), String> {
    let dims = (1usize..=3, 1usize..=3, 1usize..=3);
    run(
        DEFAULT_CASES,
        (dims, 0usize..6, any::<u64>()),
        |((a, b, c), perm, seed)| {
            let mut r = rng(seed);
            let layout = SubsystemLayout::new([("A", a), ("B", b), ("C", c)]).unwrap();
            let v = random_unit_vector(a * b * c, &mut r);
            let psi = PureState::new(v, layout).unwrap();
            let orders = [
                ["A", "B", "C"],
                ["A", "C", "B"],
                ["B", "A", "C"],
                ["B", "C", "A"],
                ["C", "A", "B"],
                ["C", "B", "A"],
            ];
            let o = orders[perm];
            let split = 1 + (seed % 2) as usize;
            let op = vec_to_op(&psi, &o[..split], &o[split..]).unwrap();
            prop_assert!((op.norm() - 1.0).abs() <= 1e-12, "norm {}", op.norm());
            Ok(())
        },
    )
}

pub fn purification_marginal() -> Result<(), String> {
    run(
        DEFAULT_CASES,
        (1usize..=8, 1usize..=8, any::<u64>()),
        |(d, rank, seed)| {
            let mut r = rng(seed);
            let rho = random_state(single(d), rank, &mut r);
            let psi = purify(&rho, "R").unwrap();
            let back = psi.reduced(&["A"]).unwrap();
            prop_assert!(max_abs(&(back.matrix() - rho.matrix())) <= 1e-10);
            Ok(())
        },
    )
}

// ------------------------------------------------------------------- haar

/// Moments of `Tr[AU]` and `Tr[AVU]` agree within 5 standard errors.
pub fn haar_left_invariance() -> Result<(), String> {
    let d = 3;
    let n = 10_000;
    let a = ginibre(d, d, &mut rng(1));
    let v = sample_haar_matrix(d, &mut rng(2));
    let stats = |shift: bool, stream: u64| {
        let mut r = RngSpec::new(3, stream).rng();
        let xs: Vec<C64> = (0..n)
            .map(|_| {
                let u = sample_haar_matrix(d, &mut r);
                if shift {
                    (&a * &v * u).trace()
                } else {
                    (&a * u).trace()
                }
            })
            .collect();
        let mean = xs.iter().sum::<C64>() / n as f64;
        let second: Vec<f64> = xs.iter().map(|x| x.norm_sqr()).collect();
        let m2 = second.iter().sum::<f64>() / n as f64;
        let var_re = xs.iter().map(|x| (x.re - mean.re).powi(2)).sum::<f64>() / (n - 1) as f64;
        let var_im = xs.iter().map(|x| (x.im - mean.im).powi(2)).sum::<f64>() / (n - 1) as f64;
        let var2 = second.iter().map(|x| (x - m2).powi(2)).sum::<f64>() / (n - 1) as f64;
        (
            mean,
            m2,
            (var_re / n as f64).sqrt(),
            (var_im / n as f64).sqrt(),
            (var2 / n as f64).sqrt(),
        )
    };
    let (m0, s0, re0, im0, se0) = stats(false, 0);
    let (m1, s1, re1, im1, se1) = stats(true, 1);
    let checks = [
        (
            "mean re",
            (m0.re - m1.re).abs(),
            (re0 * re0 + re1 * re1).sqrt(),
        ),
        (
            "mean im",
            (m0.im - m1.im).abs(),
            (im0 * im0 + im1 * im1).sqrt(),
        ),
        (
            "second moment",
            (s0 - s1).abs(),
            (se0 * se0 + se1 * se1).sqrt(),
        ),
    ];
    for (what, diff, se) in checks {
        if diff > 5.0 * se {
            return Err(format!("{what}: difference {diff} exceeds 5 x {se}"));
        }
    }
    Ok(())
}

pub fn twirl_commutes() -> Result<(), String> {
    run(
        DEFAULT_CASES,
        (1usize..=3, 1usize..=2, any::<u64>()),
        |(da, dr, seed)| {
            let mut r = rng(seed);
            let n = da * da * dr;
            let x = ginibre(n, n, &mut r);
            let t = schur_twirl(&x, da, dr).unwrap().assembled;
            let w = sample_haar_matrix(da, &mut r);
            let ww = kron(&kron(&w, &w), &CMatrix::identity(dr, dr));
            let comm = &t * &ww - &ww * &t;
            let norm = infolock::qcore::schatten_norm(&comm, infolock::qcore::SchattenP::Infinity)
                .unwrap();
            prop_assert!(norm <= 1e-9, "commutator norm {norm}");
            Ok(())
        },
    )
}

/// Quadrupling the sample count halves the Monte Carlo error.
pub fn mc_twirl_converges() -> Result<(), String> {
    let (da, dr) = (2, 2);
    let n = da * da * dr;
    let inputs = 8;
    let mut small = 0.0;
    let mut large = 0.0;
    for i in 0..inputs {
        let x = ginibre(n, n, &mut rng(100 + i));
        let exact = schur_twirl(&x, da, dr).unwrap().assembled;
        let e1 = mc_twirl(&x, da, dr, 4000, &RngSpec::new(200 + i, 0)).unwrap();
        let e4 = mc_twirl(&x, da, dr, 16000, &RngSpec::new(300 + i, 0)).unwrap();
        small += (&e1.estimate - &exact).norm_squared();
        large += (&e4.estimate - &exact).norm_squared();
    }
    let ratio = (small / large).sqrt();
    if !(1.5..=2.7).contains(&ratio) {
        return Err(format!(
            "error ratio {ratio} for 4x samples, expected about 2"
        ));
    }
    Ok(())
}

// ---------------------------------------------------------------- entropy

pub fn entropy_ordering() -> Result<(), String> {
    run(
        DEFAULT_CASES,
        (1usize..=8, 1usize..=8, any::<u64>()),
        |(d, rank, seed)| {
            let rho = random_state(single(d), rank, &mut rng(seed));
            let ev = rho.eigenvalues();
            let hmin = spectrum_entropy(&ev, EntropyKind::Min);
            let h2 = spectrum_entropy(&ev, EntropyKind::Renyi2);
            let hmax = spectrum_entropy(&ev, EntropyKind::Max);
            prop_assert!(hmin <= h2 + 1e-9 && h2 <= hmax + 1e-9, "{hmin} {h2} {hmax}");
            Ok(())
        },
    )
}

pub fn delta_range() -> Result<(), String> {
    run(
        DEFAULT_CASES,
        (1usize..=8, 0usize..=8, any::<u64>()),
        |(d, extra, seed)| {
            let rank = 1 + (seed as usize % d);
            let ev = random_state(single(d), rank, &mut rng(seed)).eigenvalues();
            let ambient = d + extra;
            for order in [DeltaOrder::Inf, DeltaOrder::Two] {
                let delta = spectrum_delta(&ev, ambient, order).unwrap();
                prop_assert!(
                    delta >= 1.0 - 1e-9 && delta <= ambient as f64 + 1e-9,
                    "delta {delta} for ambient {ambient}"
                );
            }
            Ok(())
        },
    )
}

pub fn mutual_information_range() -> Result<(), String> {
    run(
        DEFAULT_CASES,
        (1usize..=4, 1usize..=4, any::<u64>()),
        |(da, db, seed)| {
            let rank = 1 + (seed as usize % (da * db));
            let rho = random_state(bipartite(da, db), rank, &mut rng(seed));
            let mi = mutual_information(&rho, &["A"]).unwrap_or(0.0);
            let cap = 2.0 * (da as f64).log2().min((db as f64).log2());
            prop_assert!(mi >= 0.0 && mi <= cap + 1e-9, "I = {mi}, cap {cap}");
            Ok(())
        },
    )
}

pub fn alicki_fannes_monotone() -> Result<(), String> {
    run(
        DEFAULT_CASES,
        (1usize..=1 << 20, 0.0f64..=0.5, 0.0f64..=0.5),
        |(m, a, b)| {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let fl = alicki_fannes_bound(lo, m).unwrap();
            let fh = alicki_fannes_bound(hi, m).unwrap();
            prop_assert!(fl <= fh + 1e-12, "f({lo}) = {fl} > f({hi}) = {fh}");
            Ok(())
        },
    )
}

// ---------------------------------------------------------------- measure

/// Accepted quasi-measurements re-checked with singular values.
pub fn quasi_validation_recheck() -> Result<(), String> {
    run(
        DEFAULT_CASES,
        (1usize..=4, 1usize..=12, 1.0f64..3.0, any::<u64>()),
        |(d, s, eta, seed)| {
            let mut r = rng(seed);
            let chi: Vec<_> = (0..s).map(|_| random_unit_vector(d, &mut r)).collect();
            let report = validate_quasi(&chi, s, eta).unwrap();
            let mut frame = CMatrix::zeros(d, d);
            for c in &chi {
                frame += c * c.adjoint();
            }
            let top = frame.svd(false, false).singular_values.max() * d as f64 / s as f64;
            if report.valid {
                prop_assert!(
                    top <= eta + 1e-8,
                    "accepted but top eigenvalue {top} > {eta}"
                );
            } else {
                prop_assert!(
                    top > eta - 1e-8,
                    "rejected but top eigenvalue {top} <= {eta}"
                );
            }
            Ok(())
        },
    )
}

pub fn quasi_metric_triangle() -> Result<(), String> {
    run(
        DEFAULT_CASES,
        (1usize..=4, 1usize..=6, any::<u64>()),
        |(d, s, seed)| {
            let mut r = rng(seed);
            let mut q = || {
                QuasiMeasurement::tight((0..s).map(|_| random_unit_vector(d, &mut r)).collect())
                    .unwrap()
            };
            let (a, b, c) = (q(), q(), q());
            let ab = quasi_metric(&a, &b).unwrap();
            let bc = quasi_metric(&b, &c).unwrap();
            let ac = quasi_metric(&a, &c).unwrap();
            prop_assert!(ac <= ab + bc + 1e-9, "{ac} > {ab} + {bc}");
            Ok(())
        },
    )
}

// ---------------------------------------------------------------- locking

pub fn message_marginal_is_unitary_independent() -> Result<(), String> {
    run(
        DEFAULT_CASES,
        (1usize..=4, 1usize..=4, 1usize..=2, any::<u64>()),
        |(c, k, e, seed)| {
            let mut r = rng(seed);
            let m = c * k;
            let w: Vec<f64> = (0..m)
                .map(|_| 0.05 + rand::Rng::random::<f64>(&mut r))
                .collect();
            let total: f64 = w.iter().sum();
            let p: Vec<f64> = w.iter().map(|x| x / total).collect();
            let schmidt = if e == 1 { vec![1.0] } else { vec![0.7, 0.3] };
            let s = LockingScheme::haar((c, k, e), p, &schmidt, &RngSpec::new(seed, 1)).unwrap();
            let defect = message_marginal_defect(&s);
            prop_assert!(defect <= 1e-10, "marginal defect {defect}");
            Ok(())
        },
    )
}

pub fn trivial_output_is_indistinguishable() -> Result<(), String> {
    run(
        DEFAULT_CASES,
        (1usize..=8, 1usize..=5, any::<u64>()),
        |(k, outcomes, seed)| {
            let s =
                LockingScheme::haar((1, k, 1), uniform(k), &[1.0], &RngSpec::new(seed, 0)).unwrap();
            let m = random_povm(1, outcomes, &mut rng(seed));
            let g = distinguishability(&s, &m).unwrap();
            prop_assert!(g.abs() <= 1e-12, "g = {g}");
            Ok(())
        },
    )
}

// ----------------------------------------------------------------- decode

pub fn decoder_is_isometric() -> Result<(), String> {
    let dims = prop_oneof![
        Just((2usize, 1usize)),
        Just((2, 2)),
        Just((3, 1)),
        Just((2, 4)),
        Just((4, 2)),
        Just((3, 3))
    ];
    run(DEFAULT_CASES, (dims, any::<u64>()), |((n, e), seed)| {
        let total = n * e;
        let divisors: Vec<usize> = (1..=total).filter(|c| total % c == 0).collect();
        let c = divisors[seed as usize % divisors.len()];
        let m = 1 + (seed >> 8) as usize % n;
        let schmidt: Vec<f64> = {
            let mut r = rng(seed ^ 0x5eed);
            let w: Vec<f64> = (0..e)
                .map(|_| 0.1 + rand::Rng::random::<f64>(&mut r))
                .collect();
            let t: f64 = w.iter().sum();
            w.iter().map(|x| x / t).collect()
        };
        let setup =
            DecodingSetup::haar(n, c, uniform(m), &schmidt, &RngSpec::new(seed, 0)).unwrap();
        let dec = build_decoder(&setup).unwrap();
        let defect = dec.isometry_defect();
        prop_assert!(defect <= 1e-9, "V†V defect {defect}");
        let ev = evaluate_decoder(&dec, &setup).unwrap();
        prop_assert!(
            (-1e-12..=2.0 + 1e-12).contains(&ev.trace_distance),
            "trace distance {}",
            ev.trace_distance
        );
        Ok(())
    })
}

/// Per-sample trace distance against the fourth-root bound for `N = 2`,
/// `E = C`, uniform messages and maximal entanglement.
pub fn decoder_fourth_root_bound() -> Result<(), String> {
    for (i, c) in [16usize, 32, 64].into_iter().enumerate() {
        let samples = sample_decoder_performance(
            2,
            c,
            &uniform(2),
            &uniform(c),
            10,
            &RngSpec::new(7, i as u64),
        )
        .map_err(|e| e.to_string())?;
        let bound =
            decoder_distance_bound(1.0, (c as f64).log2(), 2, c).map_err(|e| e.to_string())?;
        for s in samples {
            if s.trace_distance > bound {
                return Err(format!(
                    "C = {c}: trace distance {} above bound {bound}",
                    s.trace_distance
                ));
            }
        }
    }
    Ok(())
}

// -------------------------------------------------------------------- qkd

pub fn qkd_bounds_match_alicki_fannes() -> Result<(), String> {
    run(DEFAULT_CASES, (0.0f64..=0.5, 1usize..=40), |(eps, n)| {
        let (t, i) = qkd_security_bounds(eps, n).unwrap();
        prop_assert_eq!(t, 2.0 * eps);
        prop_assert_eq!(i, alicki_fannes_bound(2.0 * eps, 1usize << n).unwrap());
        Ok(())
    })
}

pub fn qkd_recovery_is_exact() -> Result<(), String> {
    run(DEFAULT_CASES, (2usize..=5, any::<u64>()), |(n, seed)| {
        let k_bits = 1 + (seed as usize % (n - 1));
        let run = run_protocol_demo_with(n, k_bits, 4, 1, &RngSpec::new(seed, 0)).unwrap();
        prop_assert_eq!(run.report.recovery_rate, 1.0);
        prop_assert!(run.report.without_key <= 2.0 + 1e-12);
        Ok(())
    })
}

pub const SUITES: &[Suite] = &[
    ("qcore.trace_distance_metric", trace_distance_metric),
    ("qcore.one_norm_entropy_bound", one_norm_entropy_bound_holds),
    ("qcore.vec_to_op_isometric", vec_to_op_isometric),
    ("qcore.purification_marginal", purification_marginal),
    ("haar.left_invariance", haar_left_invariance),
    ("haar.twirl_commutes", twirl_commutes),
    ("haar.mc_twirl_converges", mc_twirl_converges),
    ("entropy.ordering", entropy_ordering),
    ("entropy.delta_range", delta_range),
    ("entropy.mutual_information_range", mutual_information_range),
    ("entropy.alicki_fannes_monotone", alicki_fannes_monotone),
    ("measure.quasi_validation_recheck", quasi_validation_recheck),
    ("measure.quasi_metric_triangle", quasi_metric_triangle),
    (
        "locking.message_marginal_invariant",
        message_marginal_is_unitary_independent,
    ),
    (
        "locking.trivial_output_indistinguishable",
        trivial_output_is_indistinguishable,
    ),
    ("decode.isometry", decoder_is_isometric),
    ("decode.fourth_root_bound", decoder_fourth_root_bound),
    (
        "qkd.bounds_match_alicki_fannes",
        qkd_bounds_match_alicki_fannes,
    ),
    ("qkd.recovery_exact", qkd_recovery_is_exact),
];
