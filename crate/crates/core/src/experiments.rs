//! Seeded experiments shared by the command line runner and the acceptance
//! suite. Each experiment returns per-sample records, aggregates, bound
//! values and verdicts; verdicts are recomputable from the records.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::decode::{
    decoder_distance_bound, decoupling_bound, guessing_error_bound, sample_decoder_performance,
};
use crate::error::{Error, Result};
use crate::haar::{ginibre, mc_twirl, sample_haar_matrix, schur_twirl, RngSpec};
use crate::locking::{
    cke_layout, cq_state, distinguishability, estimate_accessible_info, expectation_bound,
    key_threshold, lipschitz_constant, optimize_distinguishability, LipschitzSide, LockingScheme,
    Strategy, ThresholdInput, ThresholdKind,
};
use crate::measure::{
    audit_net, build_net, chernoff_bound, chernoff_sample, net_size_bound, quasi_metric,
    random_unit_vector, MeasurementSuperoperator, QuasiMeasurement,
};
use crate::qcore::{hermitian_eigen, max_abs, projector, CMatrix, CVector, UnitaryOperator, C64};
use crate::qkd::{qkd_security_bounds, run_protocol_demo_with};

/// Largest Hilbert space dimension an experiment may allocate.
pub const MAX_TOTAL_DIM: usize = 4096;
/// Largest net an experiment may enumerate.
pub const MAX_NET_SIZE: usize = 1_000_000;

pub type Record = BTreeMap<String, Value>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub count: usize,
    pub mean: f64,
    pub stderr: f64,
    pub min: f64,
    pub max: f64,
    pub median: f64,
}

impl Aggregate {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len();
        if n == 0 {
            return Aggregate {
                count: 0,
                mean: f64::NAN,
                stderr: f64::NAN,
                min: f64::NAN,
                max: f64::NAN,
                median: f64::NAN,
            };
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            0.0
        };
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Aggregate {
            count: n,
            mean,
            stderr,
            min: sorted[0],
            max: sorted[n - 1],
            median,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    /// Stable identifier of the invariant being checked.
    pub id: String,
    pub passed: bool,
    pub observed: f64,
    pub threshold: f64,
    pub detail: String,
}

impl Verdict {
    fn at_most(id: &str, observed: f64, threshold: f64, detail: impl Into<String>) -> Self {
        Verdict {
            id: id.into(),
            passed: observed <= threshold,
            observed,
            threshold,
            detail: detail.into(),
        }
    }

    fn exact(id: &str, observed: f64, expected: f64, detail: impl Into<String>) -> Self {
        Verdict {
            id: id.into(),
            passed: observed == expected,
            observed,
            threshold: expected,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub records: Vec<Record>,
    pub aggregates: BTreeMap<String, Aggregate>,
    pub bounds: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn verdict(&self, id: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.id == id)
    }

    fn column(&self, key: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| r.get(key).and_then(Value::as_f64))
            .collect()
    }
}

fn record(pairs: &[(&str, Value)]) -> Record {
    pairs
        .iter()
        .map(|(k, v)| (k.to_string(), v.clone()))
        .collect()
}

fn check_dim(what: &str, dim: usize) -> Result<()> {
    if dim == 0 || dim > MAX_TOTAL_DIM {
        return Err(Error::InvalidParameter(format!(
            "{what} = {dim} outside 1..={MAX_TOTAL_DIM}"
        )));
    }
    Ok(())
}

fn check_positive(what: &str, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter(format!("{what} must be positive")));
    }
    Ok(())
}

// ---------------------------------------------------------------- twirl

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TwirlParams {
    pub d_a: Vec<usize>,
    pub d_r: usize,
    pub inputs: usize,
    pub samples: usize,
}

impl TwirlParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("inputs", self.inputs)?;
        check_positive("samples", self.samples)?;
        for &d in &self.d_a {
            check_dim("d_a^2 * d_r", d * d * self.d_r)?;
        }
        Ok(())
    }
}

pub fn twirl_check(p: &TwirlParams, rng: &RngSpec) -> Result<Outcome> {
    p.validate()?;
    let mut cases = Vec::new();
    for (i, &d) in p.d_a.iter().enumerate() {
        for j in 0..p.inputs {
            cases.push((d, rng.child(i as u64).child(j as u64)));
        }
    }
    let rows: Vec<(usize, usize, f64, f64, f64)> = cases
        .par_iter()
        .enumerate()
        .map(|(idx, (d, r))| {
            let n = d * d * p.d_r;
            let x = ginibre(n, n, &mut r.child(0).rng());
            let exact = schur_twirl(&x, *d, p.d_r)?;
            let mc = mc_twirl(&x, *d, p.d_r, p.samples, &r.child(1))?;
            Ok((
                idx,
                *d,
                max_abs(&(&mc.estimate - &exact.assembled)),
                mc.total_stderr,
                mc.max_stderr,
            ))
        })
        .collect::<Result<_>>()?;
    let mut out = Outcome::default();
    let mut worst: f64 = 0.0;
    for (idx, d, dev, se, entry_se) in rows {
        worst = worst.max(dev / se);
        out.records.push(record(&[
            ("input", json!(idx)),
            ("d_a", json!(d)),
            ("max_deviation", json!(dev)),
            ("total_stderr", json!(se)),
            ("max_entry_stderr", json!(entry_se)),
            ("ratio", json!(dev / se)),
        ]));
    }
    out.aggregates
        .insert("ratio".into(), Aggregate::of(&out.column("ratio")));
    out.verdicts.push(Verdict::at_most(
        "haar.twirl_matches_monte_carlo",
        worst,
        3.0,
        "max entrywise |mc - exact| in units of the standard error of the estimate",
    ));
    Ok(out)
}

// ---------------------------------------------------------- expectation

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectationParams {
    pub c: usize,
    pub k: Vec<usize>,
    pub samples: usize,
}

impl ExpectationParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("samples", self.samples)?;
        for &k in &self.k {
            check_dim("c * k", self.c * k)?;
        }
        Ok(())
    }
}

pub fn expectation_check(p: &ExpectationParams, rng: &RngSpec) -> Result<Outcome> {
    p.validate()?;
    let mut out = Outcome::default();
    let m = MeasurementSuperoperator::computational(p.c);
    for (ki, &k) in p.k.iter().enumerate() {
        let base = rng.child(ki as u64);
        let rows: Vec<(f64, f64)> = (0..p.samples)
            .into_par_iter()
            .map(|i| {
                let s = LockingScheme::uniform_haar(p.c, k, &base.child(i as u64))?;
                Ok((distinguishability(&s, &m)?, expectation_bound(&s)))
            })
            .collect::<Result<_>>()?;
        let gs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let bound = rows[0].1;
        for (i, g) in gs.iter().enumerate() {
            out.records.push(record(&[
                ("k", json!(k)),
                ("sample", json!(i)),
                ("g", json!(g)),
            ]));
        }
        let agg = Aggregate::of(&gs);
        out.bounds.insert(format!("expectation_bound_k{k}"), bound);
        out.verdicts.push(Verdict::at_most(
            "locking.expectation_bound_dominates_mean",
            agg.mean,
            bound + 3.0 * agg.stderr,
            format!(
                "C={}, K={k}, E=1, computational measurement; 3 sigma slack",
                p.c
            ),
        ));
        out.aggregates.insert(format!("g_k{k}"), agg);
    }
    Ok(out)
}

// ------------------------------------------------------------ lipschitz

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LipschitzParams {
    pub c: usize,
    pub k: usize,
    pub pairs: usize,
    /// Outcomes of the sampled quasi-measurements.
    pub s: usize,
}

impl LipschitzParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("pairs", self.pairs)?;
        check_positive("s", self.s)?;
        check_dim("c * k", self.c * self.k)
    }
}

const LIPSCHITZ_SLACK: f64 = 1e-9;

fn random_quasi(d: usize, s: usize, rng: &mut impl rand::Rng) -> Result<QuasiMeasurement> {
    QuasiMeasurement::tight((0..s).map(|_| random_unit_vector(d, rng)).collect())
}

fn perturb(v: &CVector, scale: f64, rng: &mut impl rand::Rng) -> CVector {
    let w = v + random_unit_vector(v.len(), rng).scale(scale);
    let n = w.norm();
    w.unscale(n)
}

/// Log-uniform scale in `[10⁻³, 1]`.
fn log_scale(rng: &mut impl rand::Rng) -> f64 {
    10f64.powf(-3.0 + 3.0 * rand::Rng::random::<f64>(rng))
}

pub fn lipschitz_check(p: &LipschitzParams, rng: &RngSpec) -> Result<Outcome> {
    p.validate()?;
    let d = p.c * p.k;
    let layout = cke_layout(p.c, p.k, 1)?;
    let rows: Vec<Record> = (0..p.pairs)
        .into_par_iter()
        .map(|i| {
            let mut r = rng.child(i as u64).rng();
            let u = sample_haar_matrix(d, &mut r);
            let v = if i % 2 == 0 {
                sample_haar_matrix(d, &mut r)
            } else {
                let h = ginibre(d, d, &mut r);
                let h = (&h + h.adjoint()).scale(0.5);
                let h = h.unscale(h.norm());
                let (vals, vecs) = hermitian_eigen(&h);
                let t = log_scale(&mut r);
                let ph =
                    CVector::from_iterator(d, vals.iter().map(|&l| C64::from_polar(1.0, t * l)));
                &u * (&vecs * CMatrix::from_diagonal(&ph) * vecs.adjoint())
            };
            let su = LockingScheme::uniform_haar(p.c, p.k, &RngSpec::new(0, 0))?
                .with_unitary(UnitaryOperator::new(u, layout.clone())?)?;
            let sv = su.with_unitary(UnitaryOperator::new(v.clone(), layout.clone())?)?;
            let meas = random_quasi(p.c, p.s, &mut r)?;
            let lu = lipschitz_constant(&su, LipschitzSide::Unitary, p.s, meas.eta())?;
            let du = (su.unitary() - &v).norm();
            let gu = distinguishability(&su, &meas)?;
            let gv = distinguishability(&sv, &meas)?;
            let unitary_slack = lu * du * (1.0 + LIPSCHITZ_SLACK) + 1e-12 - (gu - gv).abs();

            let other = if i % 2 == 0 {
                random_quasi(p.c, p.s, &mut r)?
            } else {
                let t = log_scale(&mut r);
                QuasiMeasurement::tight(meas.chi().iter().map(|x| perturb(x, t, &mut r)).collect())?
            };
            let lm = lipschitz_constant(&su, LipschitzSide::Measurement, p.s, meas.eta())?;
            let dm = quasi_metric(&meas, &other)?;
            let hm = distinguishability(&su, &other)?;
            let measurement_slack = lm * dm * (1.0 + LIPSCHITZ_SLACK) + 1e-12 - (gu - hm).abs();
            Ok(record(&[
                ("pair", json!(i)),
                ("unitary_distance", json!(du)),
                ("unitary_difference", json!((gu - gv).abs())),
                ("unitary_constant", json!(lu)),
                ("unitary_slack", json!(unitary_slack)),
                ("measurement_distance", json!(dm)),
                ("measurement_difference", json!((gu - hm).abs())),
                ("measurement_constant", json!(lm)),
                ("measurement_slack", json!(measurement_slack)),
            ]))
        })
        .collect::<Result<_>>()?;
    let mut out = Outcome {
        records: rows,
        ..Default::default()
    };
    for side in ["unitary", "measurement"] {
        let slack = out.column(&format!("{side}_slack"));
        let violations = slack.iter().filter(|&&s| s < 0.0).count();
        let ratios: Vec<f64> = out
            .records
            .iter()
            .map(|r| {
                let f = |k: &str| r[&format!("{side}_{k}")].as_f64().unwrap_or(f64::NAN);
                let dist = f("distance");
                if dist > 0.0 {
                    f("difference") / (f("constant") * dist)
                } else {
                    0.0
                }
            })
            .collect();
        out.aggregates
            .insert(format!("{side}_ratio"), Aggregate::of(&ratios));
        out.verdicts.push(Verdict::at_most(
            &format!("locking.lipschitz_{side}_zero_violations"),
            violations as f64,
            0.0,
            format!(
                "pairs with |difference| > constant * distance, C={}, K={}, E=1",
                p.c, p.k
            ),
        ));
    }
    Ok(out)
}

// ------------------------------------------------------------- chernoff

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChernoffParams {
    pub d: Vec<usize>,
    pub s: Vec<usize>,
    pub eta: Vec<f64>,
    pub trials: usize,
}

impl ChernoffParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("trials", self.trials)?;
        for &d in &self.d {
            check_dim("d", d)?;
        }
        for &s in &self.s {
            check_positive("s", s)?;
        }
        for &e in &self.eta {
            if !(e > 1.0) {
                return Err(Error::InvalidParameter(format!(
                    "eta must exceed 1, got {e}"
                )));
            }
        }
        Ok(())
    }
}

pub fn chernoff_check(p: &ChernoffParams, rng: &RngSpec) -> Result<Outcome> {
    p.validate()?;
    let mut cells = Vec::new();
    for &d in &p.d {
        for &s in &p.s {
            for &eta in &p.eta {
                cells.push((d, s, eta));
            }
        }
    }
    let rows: Vec<(usize, usize, f64, usize, f64)> = cells
        .par_iter()
        .enumerate()
        .map(|(ci, &(d, s, eta))| {
            let cell = rng.child(ci as u64);
            let m = MeasurementSuperoperator::from_basis(&sample_haar_matrix(
                d,
                &mut cell.child(0).rng(),
            ))?;
            let trial_rng = cell.child(1);
            let mut fails = 0;
            for t in 0..p.trials {
                if !chernoff_sample(&m, s, eta, &trial_rng.child(t as u64))?
                    .report
                    .valid
                {
                    fails += 1;
                }
            }
            Ok((d, s, eta, fails, chernoff_bound(d, s, eta)?))
        })
        .collect::<Result<_>>()?;
    let mut out = Outcome::default();
    let mut worst = f64::NEG_INFINITY;
    for (d, s, eta, fails, bound) in rows {
        let freq = fails as f64 / p.trials as f64;
        let sigma = (bound * (1.0 - bound) / p.trials as f64).sqrt();
        worst = worst.max(freq - (bound + 3.0 * sigma));
        out.records.push(record(&[
            ("d", json!(d)),
            ("s", json!(s)),
            ("eta", json!(eta)),
            ("failures", json!(fails)),
            ("frequency", json!(freq)),
            ("bound", json!(bound)),
            ("sigma", json!(sigma)),
        ]));
    }
    out.verdicts.push(Verdict::at_most(
        "measure.chernoff_failure_within_bound",
        worst,
        0.0,
        "max over the grid of frequency - (bound + 3 binomial sigma)",
    ));
    Ok(out)
}

// ------------------------------------------------------------ net audit

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetAuditParams {
    pub d: usize,
    pub s: usize,
    pub eps: f64,
    pub budget: usize,
    pub samples: usize,
}

impl NetAuditParams {
    pub fn validate(&self) -> Result<()> {
        check_dim("d", self.d)?;
        check_positive("s", self.s)?;
        check_positive("samples", self.samples)?;
        if self.budget == 0 || self.budget > MAX_NET_SIZE {
            return Err(Error::InvalidParameter(format!(
                "budget = {} outside 1..={MAX_NET_SIZE}",
                self.budget
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter("eps must be positive".into()));
        }
        Ok(())
    }
}

pub fn net_audit(p: &NetAuditParams, rng: &RngSpec) -> Result<Outcome> {
    p.validate()?;
    let net = build_net(p.d, p.s, p.eps, p.budget, &rng.child(0))?;
    let chunks = 16usize.min(p.samples);
    let per = p.samples.div_ceil(chunks);
    let audits: Vec<_> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let n = per.min(p.samples - (c * per).min(p.samples));
            if n == 0 {
                return Ok(None);
            }
            audit_net(&net, p.eps, n, &rng.child(1).child(c as u64)).map(Some)
        })
        .collect::<Result<_>>()?;
    let mut out = Outcome::default();
    let mut violations = 0;
    for (c, a) in audits.into_iter().flatten().enumerate() {
        violations += a.violations;
        out.records.push(record(&[
            ("chunk", json!(c)),
            ("samples", json!(a.samples)),
            ("violations", json!(a.violations)),
            ("max_distance", json!(a.max_distance)),
        ]));
    }
    out.bounds.insert("net_size".into(), net.len() as f64);
    out.bounds.insert(
        "log2_net_size_bound".into(),
        net_size_bound(p.d, p.s, p.eps)?,
    );
    out.verdicts.push(Verdict::at_most(
        "measure.net_covers_samples",
        violations as f64,
        0.0,
        format!("samples farther than eps = {} from the net", p.eps),
    ));
    out.verdicts.push(Verdict::at_most(
        "measure.net_within_size_bound",
        (net.len() as f64).log2(),
        net_size_bound(p.d, p.s, p.eps)?,
        "log2 of the constructed net size",
    ));
    Ok(out)
}

// --------------------------------------------------------- locking scan

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LockingScanParams {
    /// `C·K`, held fixed.
    pub total_dim: usize,
    pub k_bits: Vec<u32>,
    pub samples: usize,
    pub restarts: usize,
}

impl LockingScanParams {
    pub fn validate(&self) -> Result<()> {
        check_dim("total_dim", self.total_dim)?;
        check_positive("samples", self.samples)?;
        check_positive("restarts", self.restarts)?;
        for &k in &self.k_bits {
            let kd = 1usize.checked_shl(k).unwrap_or(0);
            if kd == 0 || !self.total_dim.is_multiple_of(kd) {
                return Err(Error::InvalidParameter(format!(
                    "2^{k} does not divide total_dim = {}",
                    self.total_dim
                )));
            }
        }
        Ok(())
    }
}

pub fn locking_scan(p: &LockingScanParams, rng: &RngSpec) -> Result<Outcome> {
    p.validate()?;
    let mut out = Outcome::default();
    let mut medians = Vec::new();
    for (ki, &kb) in p.k_bits.iter().enumerate() {
        let k = 1usize << kb;
        let c = p.total_dim / k;
        let base = rng.child(ki as u64);
        let gs: Vec<f64> = (0..p.samples)
            .into_par_iter()
            .map(|i| {
                let r = base.child(i as u64);
                let s = LockingScheme::uniform_haar(c, k, &r.child(0))?;
                Ok(optimize_distinguishability(
                    &s,
                    Strategy::ProjectiveGradient,
                    p.restarts,
                    &r.child(1),
                )?
                .best_value)
            })
            .collect::<Result<_>>()?;
        for (i, g) in gs.iter().enumerate() {
            out.records.push(record(&[
                ("k_bits", json!(kb)),
                ("sample", json!(i)),
                ("g_optimized", json!(g)),
            ]));
        }
        let agg = Aggregate::of(&gs);
        medians.push((kb, agg.median));
        out.aggregates.insert(format!("g_k{kb}"), agg);
    }
    let increases = medians.windows(2).filter(|w| w[1].1 > w[0].1).count();
    out.verdicts.push(Verdict::at_most(
        "locking.trend_nonincreasing",
        increases as f64,
        0.0,
        "number of increases of the median optimized g along k",
    ));
    if let (Some(first), Some(last)) = (medians.first(), medians.last()) {
        if medians.len() > 1 {
            out.verdicts.push(Verdict::at_most(
                "locking.trend_halves",
                last.1,
                0.5 * first.1,
                format!(
                    "median at k={} against half the median at k={}",
                    last.0, first.0
                ),
            ));
        }
    }
    Ok(out)
}

// --------------------------------------------------------------- decode

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecodeParams {
    /// `|N|`.
    pub n: usize,
    /// Number of messages, at most `|N|`.
    pub messages: usize,
    /// `|E|`, maximally entangled with `E′`.
    pub e: usize,
    /// Values of `|C|`; each must divide `|N||E|`.
    pub c: Vec<usize>,
    pub samples: usize,
}

impl DecodeParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("samples", self.samples)?;
        check_positive("messages", self.messages)?;
        check_dim("n * e", self.n * self.e)?;
        if self.messages > self.n {
            return Err(Error::InvalidParameter("messages must not exceed n".into()));
        }
        for &c in &self.c {
            if c == 0 || !(self.n * self.e).is_multiple_of(c) {
                return Err(Error::InvalidParameter(format!(
                    "c = {c} does not divide n * e"
                )));
            }
            check_dim("c * e", c * self.e)?;
        }
        Ok(())
    }
}

pub fn decode_check(p: &DecodeParams, rng: &RngSpec) -> Result<Outcome> {
    p.validate()?;
    let mut out = Outcome::default();
    let probs = vec![1.0 / p.messages as f64; p.messages];
    let schmidt = vec![1.0 / p.e as f64; p.e];
    let hmax = (p.messages as f64).log2();
    let h2 = (p.e as f64).log2();
    for (ci, &c) in p.c.iter().enumerate() {
        let d = p.n * p.e / c;
        let samples =
            sample_decoder_performance(p.n, c, &probs, &schmidt, p.samples, &rng.child(ci as u64))?;
        for (i, s) in samples.iter().enumerate() {
            out.records.push(record(&[
                ("c", json!(c)),
                ("sample", json!(i)),
                ("trace_distance", json!(s.trace_distance)),
                ("message_error", json!(s.message_error)),
                ("decoupling_distance", json!(s.decoupling_distance)),
                ("isometry_defect", json!(s.isometry_defect)),
            ]));
        }
        let col =
            |f: fn(&crate::decode::DecoderSample) -> f64| samples.iter().map(f).collect::<Vec<_>>();
        let td = Aggregate::of(&col(|s| s.trace_distance));
        let err = Aggregate::of(&col(|s| s.message_error));
        let dec = Aggregate::of(&col(|s| s.decoupling_distance));
        let defect = col(|s| s.isometry_defect).into_iter().fold(0.0, f64::max);
        let guess = guessing_error_bound(p.messages, c)?;
        let fourth = decoder_distance_bound(hmax, h2, d, c)?;
        let decoupling = decoupling_bound(hmax, h2, d, c)?;
        let exceed = samples
            .iter()
            .filter(|s| s.decoupling_distance > 2.0 * decoupling)
            .count();
        out.bounds
            .insert(format!("purified_decoding_c{c}"), 2.0 * guess);
        out.bounds.insert(format!("guessing_error_c{c}"), guess);
        out.bounds.insert(format!("fourth_root_c{c}"), fourth);
        out.bounds.insert(format!("decoupling_c{c}"), decoupling);
        out.bounds.insert(
            format!("twice_decoupling_exceedance_c{c}"),
            exceed as f64 / p.samples as f64,
        );
        out.verdicts.push(Verdict::at_most(
            "decode.isometry",
            defect,
            1e-9,
            format!("C={c}: max probe defect of V†V - I"),
        ));
        out.verdicts.push(Verdict::at_most(
            "decode.mean_trace_distance",
            td.mean,
            2.0 * guess + 0.1,
            format!("C={c}: mean decoder trace distance against 2√(M/C) + 0.1"),
        ));
        out.verdicts.push(Verdict::at_most(
            "decode.mean_message_error",
            err.mean,
            guess + 0.1,
            format!("C={c}: mean message error against √(M/C) + 0.1"),
        ));
        out.verdicts.push(Verdict::at_most(
            "decode.fourth_root_bound",
            td.mean,
            fourth + 3.0 * td.stderr,
            format!("C={c}: mean trace distance against the fourth-root bound, 3 sigma slack"),
        ));
        out.verdicts.push(Verdict::at_most(
            "decode.decoupling_mean",
            dec.mean,
            decoupling + 3.0 * dec.stderr,
            format!("C={c}: mean decoupling distance against its expectation bound, 3 sigma slack"),
        ));
        out.aggregates.insert(format!("trace_distance_c{c}"), td);
        out.aggregates.insert(format!("message_error_c{c}"), err);
        out.aggregates
            .insert(format!("decoupling_distance_c{c}"), dec);
    }
    Ok(out)
}

// ----------------------------------------------------------- thresholds

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdParams {
    pub eps: Vec<f64>,
    /// Values of `c + e`, split evenly between `c` and `e`.
    pub c_plus_e: Vec<f64>,
    pub k: f64,
    pub p_fail: f64,
    /// `n − H_min(M)`; `H₂` and `H_max` of the message stay at `n`.
    #[serde(default)]
    pub message_deficit: f64,
    /// `e − H_min(E)`; `H₂(E)` stays at `e`.
    #[serde(default)]
    pub entanglement_deficit: f64,
}

impl ThresholdParams {
    pub fn validate(&self) -> Result<()> {
        if self.eps.iter().any(|&e| !(e > 0.0 && e <= 2.0)) {
            return Err(Error::InvalidParameter(
                "eps values must lie in (0, 2]".into(),
            ));
        }
        if self.c_plus_e.iter().any(|&x| !(x > 0.0)) {
            return Err(Error::InvalidParameter(
                "c_plus_e values must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn input(&self, eps: f64, c_plus_e: f64) -> ThresholdInput {
        let mut t =
            ThresholdInput::uniform(c_plus_e / 2.0, self.k, c_plus_e / 2.0, eps, self.p_fail);
        t.hmin_m -= self.message_deficit;
        t.hmin_e -= self.entanglement_deficit;
        t
    }
}

/// Closed forms with `L = log(1/ε)`, `l = log(c+e)`, `δ = ½(δ_M + δ_E)`.
pub fn closed_form_threshold(kind: ThresholdKind, t: &ThresholdInput) -> f64 {
    let big_l = -t.eps.log2();
    let l = (t.c + t.e).log2();
    let delta = 0.5 * (t.n - t.hmin_m) + 0.5 * (t.e - t.hmin_e);
    match kind {
        ThresholdKind::ThmLocking => 11.0 + 2.0 * big_l + l + delta,
        ThresholdKind::CorUnihigh => 9.0 + 2.0 * big_l + 0.5 * l,
        ThresholdKind::CorModmod => 9.0 + 2.0 * big_l + 0.5 * l + delta,
        ThresholdKind::CorUnihighPovm => 11.0 + 2.0 * big_l + l,
        ThresholdKind::CorModmodPovm => 11.0 + 2.0 * big_l + l + delta,
        ThresholdKind::ThmDecode => {
            0.5 * (t.n - t.hmax_m) - 0.5 * (t.e - t.h2_e) - 2.0 * big_l - 4.0
        }
    }
}

pub fn thresholds(p: &ThresholdParams) -> Result<Outcome> {
    p.validate()?;
    let mut out = Outcome::default();
    let mut mismatches = 0usize;
    for &eps in &p.eps {
        for &ce in &p.c_plus_e {
            let t = p.input(eps, ce);
            for kind in ThresholdKind::ALL {
                let mut r = record(&[
                    ("eps", json!(eps)),
                    ("c_plus_e", json!(ce)),
                    ("kind", json!(kind.name())),
                ]);
                match key_threshold(&t, kind) {
                    Ok(v) => {
                        let expected = closed_form_threshold(kind, &t);
                        if v.value != expected {
                            mismatches += 1;
                        }
                        r.insert("value".into(), json!(v.value));
                        r.insert("qubits".into(), json!(v.qubits));
                        r.insert("closed_form".into(), json!(expected));
                        r.insert("status".into(), json!("ok"));
                        r.insert("warnings".into(), json!(v.warnings.join("; ")));
                    }
                    Err(e) => {
                        r.insert("status".into(), json!(format!("side condition: {e}")));
                    }
                }
                out.records.push(r);
            }
        }
    }
    out.verdicts.push(Verdict::exact(
        "locking.threshold_closed_forms",
        mismatches as f64,
        0.0,
        "rows whose calculator value differs from the closed form",
    ));
    Ok(out)
}

// ------------------------------------------------------------------ qkd

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QkdParams {
    pub n: usize,
    pub k_bits: usize,
    pub trials: usize,
    pub restarts: usize,
    /// Independent codebooks.
    pub runs: usize,
}

impl QkdParams {
    pub fn validate(&self) -> Result<()> {
        check_positive("runs", self.runs)?;
        check_positive("trials", self.trials)?;
        Ok(())
    }
}

pub fn qkd_demo(p: &QkdParams, rng: &RngSpec) -> Result<Outcome> {
    p.validate()?;
    let reports: Vec<_> = (0..p.runs)
        .into_par_iter()
        .map(|i| {
            run_protocol_demo_with(p.n, p.k_bits, p.trials, p.restarts, &rng.child(i as u64))
                .map(|r| r.report)
        })
        .collect::<Result<_>>()?;
    let mut out = Outcome::default();
    let mut not_below = 0;
    let mut min_rate: f64 = 1.0;
    for (i, r) in reports.iter().enumerate() {
        if !(r.without_key < r.with_key) {
            not_below += 1;
        }
        min_rate = min_rate.min(r.recovery_rate);
        out.records.push(record(&[
            ("run", json!(i)),
            ("without_key", json!(r.without_key)),
            ("with_key", json!(r.with_key)),
            ("recovery_rate", json!(r.recovery_rate)),
            ("min_success_probability", json!(r.min_success_probability)),
        ]));
    }
    out.aggregates.insert(
        "without_key".into(),
        Aggregate::of(&out.column("without_key")),
    );
    out.verdicts.push(Verdict::exact(
        "qkd.recovery_exact",
        min_rate,
        1.0,
        "smallest recovery rate with the sub-key",
    ));
    out.verdicts.push(Verdict::at_most(
        "qkd.without_key_below_with_key",
        not_below as f64,
        0.0,
        "runs whose optimized correlation is not strictly below the with-key value",
    ));
    let (t, i) = qkd_security_bounds(0.25, 2)?;
    out.bounds.insert("trace_bound_eps_quarter_n2".into(), t);
    out.bounds.insert("iacc_bound_eps_quarter_n2".into(), i);
    out.verdicts.push(Verdict::exact(
        "qkd.security_bounds_example",
        i,
        6.0,
        "accessible information bound at eps = 1/4, n = 2",
    ));
    Ok(out)
}

// ------------------------------------------------------------------ mub

/// Accessible information of one uniform bit encoded in one of two
/// mutually unbiased qubit bases, with the basis choice unknown.
pub fn mub_benchmark(restarts: usize, rng: &RngSpec) -> Result<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let ket = |a: f64, b: f64| CVector::from_vec(vec![C64::new(a, 0.0), C64::new(b, 0.0)]);
    let states = [ket(1.0, 0.0), ket(0.0, 1.0), ket(h, h), ket(h, -h)].map(|v| projector(&v));
    let rho = cq_state(&[0.25; 4], &states, "Q")?;
    Ok(estimate_accessible_info(&rho, "M", restarts, 1, None, rng)?.lower_bound)
}

// --------------------------------------------------------------- driver

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "subcommand", content = "params", rename_all = "kebab-case")]
pub enum Experiment {
    TwirlCheck(TwirlParams),
    ExpectationCheck(ExpectationParams),
    LipschitzCheck(LipschitzParams),
    ChernoffCheck(ChernoffParams),
    NetAudit(NetAuditParams),
    LockingScan(LockingScanParams),
    DecodeCheck(DecodeParams),
    Thresholds(ThresholdParams),
    QkdDemo(QkdParams),
}

pub const SUBCOMMANDS: [&str; 9] = [
    "twirl-check",
    "expectation-check",
    "lipschitz-check",
    "chernoff-check",
    "net-audit",
    "locking-scan",
    "decode-check",
    "thresholds",
    "qkd-demo",
];

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::TwirlCheck(_) => "twirl-check",
            Experiment::ExpectationCheck(_) => "expectation-check",
            Experiment::LipschitzCheck(_) => "lipschitz-check",
            Experiment::ChernoffCheck(_) => "chernoff-check",
            Experiment::NetAudit(_) => "net-audit",
            Experiment::LockingScan(_) => "locking-scan",
            Experiment::DecodeCheck(_) => "decode-check",
            Experiment::Thresholds(_) => "thresholds",
            Experiment::QkdDemo(_) => "qkd-demo",
        }
    }

    /// Parses the parameters of `subcommand` from a TOML table.
    pub fn from_params(subcommand: &str, params: toml::Table) -> std::result::Result<Self, String> {
        let v = toml::Value::Table(params);
        let parsed = match subcommand {
            "twirl-check" => v.try_into().map(Experiment::TwirlCheck),
            "expectation-check" => v.try_into().map(Experiment::ExpectationCheck),
            "lipschitz-check" => v.try_into().map(Experiment::LipschitzCheck),
            "chernoff-check" => v.try_into().map(Experiment::ChernoffCheck),
            "net-audit" => v.try_into().map(Experiment::NetAudit),
            "locking-scan" => v.try_into().map(Experiment::LockingScan),
            "decode-check" => v.try_into().map(Experiment::DecodeCheck),
            "thresholds" => v.try_into().map(Experiment::Thresholds),
            "qkd-demo" => v.try_into().map(Experiment::QkdDemo),
            other => return Err(format!("unknown subcommand `{other}`")),
        };
        parsed.map_err(|e| format!("[params] for {subcommand}: {}", e.message()))
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Experiment::TwirlCheck(p) => p.validate(),
            Experiment::ExpectationCheck(p) => p.validate(),
            Experiment::LipschitzCheck(p) => p.validate(),
            Experiment::ChernoffCheck(p) => p.validate(),
            Experiment::NetAudit(p) => p.validate(),
            Experiment::LockingScan(p) => p.validate(),
            Experiment::DecodeCheck(p) => p.validate(),
            Experiment::Thresholds(p) => p.validate(),
            Experiment::QkdDemo(p) => p.validate(),
        }
    }

    pub fn run(&self, rng: &RngSpec) -> Result<Outcome> {
        match self {
            Experiment::TwirlCheck(p) => twirl_check(p, rng),
            Experiment::ExpectationCheck(p) => expectation_check(p, rng),
            Experiment::LipschitzCheck(p) => lipschitz_check(p, rng),
            Experiment::ChernoffCheck(p) => chernoff_check(p, rng),
            Experiment::NetAudit(p) => net_audit(p, rng),
            Experiment::LockingScan(p) => locking_scan(p, rng),
            Experiment::DecodeCheck(p) => decode_check(p, rng),
            Experiment::Thresholds(p) => thresholds(p),
            Experiment::QkdDemo(p) => qkd_demo(p, rng),
        }
    }
}
