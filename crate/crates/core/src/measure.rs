//! POVMs, quasi-measurements, the quasi-measurement metric, random ε-nets,
//! operator-Chernoff sampling and the POVM/quasi gap bound.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;

use crate::error::{Error, Result};
use crate::haar::{ginibre, sample_haar_matrix, RngSpec};
use crate::qcore::{
    hermitian_eigen, hermitian_eigenvalues, identity, is_finite, max_abs, projector, CMatrix,
    CVector, DensityOperator, C64, SPECTRAL_ZERO, STATE_TOL,
};

/// Anything that maps a state to a list of nonnegative outcome weights.
pub trait Measurement {
    fn dim(&self) -> usize;
    fn n_outcomes(&self) -> usize;
    fn weights(&self, rho: &CMatrix) -> Vec<f64>;
}

/// `Tr[A B]` for square matrices, without forming the product.
fn trace_product(a: &CMatrix, b: &CMatrix) -> C64 {
    let n = a.nrows();
    let mut s = C64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            s += a[(i, j)] * b[(j, i)];
        }
    }
    s
}

#[derive(Debug, Clone)]
pub struct MeasurementSuperoperator {
    elements: Vec<CMatrix>,
    outcome_labels: Vec<String>,
}

impl MeasurementSuperoperator {
    pub fn new(elements: Vec<CMatrix>, outcome_labels: Vec<String>) -> Result<Self> {
        let Some(first) = elements.first() else {
            return Err(Error::InvalidParameter(
                "a measurement needs at least one element".into(),
            ));
        };
        let d = first.nrows();
        if outcome_labels.len() != elements.len() {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} elements",
                outcome_labels.len(),
                elements.len()
            )));
        }
        let mut sum = CMatrix::zeros(d, d);
        for (i, e) in elements.iter().enumerate() {
            if e.nrows() != d || e.ncols() != d {
                return Err(Error::DimensionMismatch(format!(
                    "element {i} is {}x{}, expected {d}x{d}",
                    e.nrows(),
                    e.ncols()
                )));
            }
            if !is_finite(e) {
                return Err(Error::NonFinite);
            }
            if max_abs(&(e - e.adjoint())) > STATE_TOL {
                return Err(Error::InvalidParameter(format!(
                    "element {i} is not Hermitian"
                )));
            }
            let min = hermitian_eigenvalues(e)
                .into_iter()
                .fold(f64::INFINITY, f64::min);
            if min < -STATE_TOL {
                return Err(Error::InvalidParameter(format!(
                    "element {i} has negative eigenvalue {min:e}"
                )));
            }
            sum += e;
        }
        let defect = max_abs(&(sum - identity(d)));
        if defect > STATE_TOL {
            return Err(Error::IncompleteMeasurement(defect));
        }
        Ok(Self {
            elements,
            outcome_labels,
        })
    }

    pub fn with_default_labels(elements: Vec<CMatrix>) -> Result<Self> {
        let labels = (0..elements.len()).map(|i| i.to_string()).collect();
        Self::new(elements, labels)
    }

    /// Projective measurement onto the columns of a unitary.
    pub fn from_basis(w: &CMatrix) -> Result<Self> {
        let elements = (0..w.ncols())
            .map(|j| projector(&w.column(j).into_owned()))
            .collect();
        Self::with_default_labels(elements)
    }

    pub fn computational(d: usize) -> Self {
        Self::from_basis(&identity(d)).expect("computational basis is complete")
    }

    /// The single-outcome measurement `{I}`.
    pub fn trivial(d: usize) -> Self {
        Self::with_default_labels(vec![identity(d)]).expect("identity is complete")
    }

    pub fn elements(&self) -> &[CMatrix] {
        &self.elements
    }

    pub fn outcome_labels(&self) -> &[String] {
        &self.outcome_labels
    }

    /// Spectral split into weighted rank-one pieces `{(α, χ)}` with
    /// `Σ α χχ† = I`; eigenvalues below [`SPECTRAL_ZERO`] are dropped.
    pub fn rank_one_form(&self) -> Vec<(f64, CVector)> {
        let mut out = Vec::new();
        for e in &self.elements {
            let (vals, vecs) = hermitian_eigen(e);
            for (j, &v) in vals.iter().enumerate() {
                if v > SPECTRAL_ZERO {
                    out.push((v, vecs.column(j).into_owned()));
                }
            }
        }
        out
    }
}

impl Measurement for MeasurementSuperoperator {
    fn dim(&self) -> usize {
        self.elements[0].nrows()
    }

    fn n_outcomes(&self) -> usize {
        self.elements.len()
    }

    fn weights(&self, rho: &CMatrix) -> Vec<f64> {
        self.elements
            .iter()
            .map(|e| trace_product(e, rho).re.max(0.0))
            .collect()
    }
}

/// `(d/s)·λ_max(Σ χχ†)` against the bound `eta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiReport {
    pub valid: bool,
    pub max_eigenvalue: f64,
    pub eta: f64,
}

const UNIT_TOL: f64 = 1e-9;

/// Largest eigenvalue of `(d/s) Σ χᵢχᵢ†`, through the smaller of the d×d
/// frame operator and the s×s Gram matrix.
fn frame_max_eigenvalue(chi: &[CVector], d: usize) -> f64 {
    let s = chi.len();
    let lam = if s < d {
        let gram = CMatrix::from_fn(s, s, |i, j| chi[i].dotc(&chi[j]));
        hermitian_eigenvalues(&gram)
    } else {
        let mut frame = CMatrix::zeros(d, d);
        for c in chi {
            frame += projector(c);
        }
        hermitian_eigenvalues(&frame)
    };
    lam.into_iter().fold(0.0, f64::max) * d as f64 / s as f64
}

pub fn validate_quasi(chi: &[CVector], s: usize, eta: f64) -> Result<QuasiReport> {
    if s == 0 {
        return Err(Error::InvalidParameter("s must be positive".into()));
    }
    if chi.len() != s {
        return Err(Error::InvalidParameter(format!(
            "{} vectors for s = {s}",
            chi.len()
        )));
    }
    let d = chi[0].len();
    for (i, c) in chi.iter().enumerate() {
        if c.len() != d {
            return Err(Error::DimensionMismatch(format!(
                "vector {i} has length {}",
                c.len()
            )));
        }
        if (c.norm() - 1.0).abs() > UNIT_TOL {
            return Err(Error::InvalidParameter(format!(
                "vector {i} is not a unit vector"
            )));
        }
    }
    let max_eigenvalue = frame_max_eigenvalue(chi, d);
    Ok(QuasiReport {
        valid: max_eigenvalue <= eta + STATE_TOL,
        max_eigenvalue,
        eta,
    })
}

/// `s` unit vectors with `(d/s) Σ χχ† ≤ η I`.
#[derive(Debug, Clone)]
pub struct QuasiMeasurement {
    chi: Vec<CVector>,
    eta: f64,
}

impl QuasiMeasurement {
    pub fn new(chi: Vec<CVector>, eta: f64) -> Result<Self> {
        if !(eta >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "eta must be at least 1, got {eta}"
            )));
        }
        let report = validate_quasi(&chi, chi.len(), eta)?;
        if !report.valid {
            return Err(Error::InvalidParameter(format!(
                "max eigenvalue {} exceeds eta = {eta}",
                report.max_eigenvalue
            )));
        }
        Ok(Self { chi, eta })
    }

    /// Wraps the vectors with the smallest admissible η.
    pub fn tight(chi: Vec<CVector>) -> Result<Self> {
        let s = chi.len();
        let report = validate_quasi(&chi, s, f64::INFINITY)?;
        Self::new(chi, report.max_eigenvalue.max(1.0))
    }

    pub fn chi(&self) -> &[CVector] {
        &self.chi
    }

    pub fn s(&self) -> usize {
        self.chi.len()
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }
}

impl Measurement for QuasiMeasurement {
    fn dim(&self) -> usize {
        self.chi[0].len()
    }

    fn n_outcomes(&self) -> usize {
        self.chi.len()
    }

    fn weights(&self, rho: &CMatrix) -> Vec<f64> {
        let scale = self.dim() as f64 / self.s() as f64;
        self.chi
            .iter()
            .map(|c| scale * c.dotc(&(rho * c)).re.max(0.0))
            .collect()
    }
}

/// Either kind of measurement, for reports.
#[derive(Debug, Clone)]
pub enum AnyMeasurement {
    Povm(MeasurementSuperoperator),
    Quasi(QuasiMeasurement),
}

impl Measurement for AnyMeasurement {
    fn dim(&self) -> usize {
        match self {
            Self::Povm(m) => m.dim(),
            Self::Quasi(m) => m.dim(),
        }
    }

    fn n_outcomes(&self) -> usize {
        match self {
            Self::Povm(m) => m.n_outcomes(),
            Self::Quasi(m) => m.n_outcomes(),
        }
    }

    fn weights(&self, rho: &CMatrix) -> Vec<f64> {
        match self {
            Self::Povm(m) => m.weights(rho),
            Self::Quasi(m) => m.weights(rho),
        }
    }
}

/// Diagonal outcome-register operator `Σᵢ wᵢ |i⟩⟨i|`; subnormalized for
/// quasi-measurements.
pub fn apply_measurement(m: &impl Measurement, rho: &DensityOperator) -> Result<CMatrix> {
    if m.dim() != rho.dim() {
        return Err(Error::DimensionMismatch(format!(
            "measurement acts on dimension {}, state has dimension {}",
            m.dim(),
            rho.dim()
        )));
    }
    let w = m.weights(rho.matrix());
    Ok(CMatrix::from_diagonal(&CVector::from_iterator(
        w.len(),
        w.iter().map(|&x| C64::new(x, 0.0)),
    )))
}

/// POVM with `n_outcomes` elements from a Haar isometry `C^d → C^{n·d}`.
pub fn random_povm(d: usize, n_outcomes: usize, rng: &mut impl Rng) -> MeasurementSuperoperator {
    let big = sample_haar_matrix(d * n_outcomes, rng);
    let v = big.columns(0, d);
    let elements = (0..n_outcomes)
        .map(|j| {
            let block = v.rows(j * d, d);
            block.adjoint() * block
        })
        .collect();
    MeasurementSuperoperator::with_default_labels(elements).expect("isometry blocks are complete")
}

pub fn random_unit_vector(d: usize, rng: &mut impl Rng) -> CVector {
    let g = ginibre(d, 1, rng).column(0).into_owned();
    let n = g.norm();
    g.unscale(n)
}

#[derive(Debug, Clone)]
pub struct ChernoffSample {
    pub candidate: Vec<CVector>,
    pub report: QuasiReport,
}

/// Draws `s` rank-one pieces of `m` i.i.d. with probability `α/d`.
pub fn chernoff_sample(
    m: &MeasurementSuperoperator,
    s: usize,
    eta: f64,
    rng: &RngSpec,
) -> Result<ChernoffSample> {
    if s == 0 {
        return Err(Error::InvalidParameter("s must be positive".into()));
    }
    let pieces = m.rank_one_form();
    let dist = WeightedIndex::new(pieces.iter().map(|(a, _)| *a))
        .map_err(|e| Error::InvalidParameter(format!("rank-one weights: {e}")))?;
    let mut r = rng.rng();
    let candidate: Vec<CVector> = (0..s)
        .map(|_| pieces[dist.sample(&mut r)].1.clone())
        .collect();
    let report = validate_quasi(&candidate, s, eta)?;
    Ok(ChernoffSample { candidate, report })
}

fn check_eta(eta: f64) -> Result<()> {
    if !(eta > 1.0) || !eta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "eta must exceed 1, got {eta}"
        )));
    }
    Ok(())
}

/// `min(1, 2d·exp(−s(η−1)²/(2d ln 2)))`.
pub fn chernoff_bound(d: usize, s: usize, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    let d = d as f64;
    let b =
        2.0 * d * (-(s as f64) * (eta - 1.0).powi(2) / (d * 2.0 * std::f64::consts::LN_2)).exp();
    Ok(b.min(1.0))
}

/// `4d²·exp(−s(η−1)²/(2d ln 2))`; `s` is real so the closed-form choice
/// `s = 6 ln 2 · d ln d` can be evaluated exactly.
pub fn povm_gap_bound(d_ce: usize, s: f64, eta: f64) -> Result<f64> {
    check_eta(eta)?;
    if !(s > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "s must be positive, got {s}"
        )));
    }
    let d = d_ce as f64;
    Ok(4.0 * d * d * (-s * (eta - 1.0).powi(2) / (d * 2.0 * std::f64::consts::LN_2)).exp())
}

/// `‖χχ† − νν†‖₂ = √(2(1 − |⟨χ|ν⟩|²))` for unit vectors, evaluated as
/// `√2 ‖ν − χ⟨χ|ν⟩‖` to avoid cancellation near parallel vectors.
pub fn projector_distance(chi: &CVector, nu: &CVector) -> f64 {
    let overlap = chi.dotc(nu);
    std::f64::consts::SQRT_2 * (nu - chi * overlap).norm()
}

/// `Σᵢ ‖χᵢχᵢ† − νᵢνᵢ†‖₂`, paired by index.
pub fn quasi_metric(m: &QuasiMeasurement, n: &QuasiMeasurement) -> Result<f64> {
    if m.s() != n.s() {
        return Err(Error::InvalidParameter(format!(
            "s mismatch: {} vs {}",
            m.s(),
            n.s()
        )));
    }
    if m.dim() != n.dim() {
        return Err(Error::DimensionMismatch(format!(
            "{} vs {}",
            m.dim(),
            n.dim()
        )));
    }
    Ok(m.chi()
        .iter()
        .zip(n.chi())
        .map(|(a, b)| projector_distance(a, b))
        .sum())
}

/// `log₂` of `(10s/ε)^{2sd}`, clamped at zero.
pub fn net_size_bound(d: usize, s: usize, eps: f64) -> Result<f64> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must be positive, got {eps}"
        )));
    }
    let s_f = s as f64;
    Ok((2.0 * s_f * d as f64 * (10.0 * s_f / eps).log2()).max(0.0))
}

/// Consecutive covered draws after which a sphere net is accepted.
const NET_PATIENCE: usize = 4000;
/// Sphere points are placed at this fraction of the per-slot radius.
const NET_MARGIN: f64 = 0.9;

/// Random greedy ε-net of `(s, η)`-quasi-measurements on `C^d`, built as the
/// s-fold product of one projector net of radius `ε/s`. Each element carries
/// the smallest η it satisfies.
pub fn build_net(
    d: usize,
    s: usize,
    eps: f64,
    budget: usize,
    rng: &RngSpec,
) -> Result<Vec<QuasiMeasurement>> {
    if d == 0 || s == 0 {
        return Err(Error::InvalidParameter("d and s must be positive".into()));
    }
    let log2_bound = net_size_bound(d, s, eps)?;
    let radius = NET_MARGIN * eps / s as f64;
    let exceeded = |points: usize| Error::BudgetExceeded {
        required: (points as f64).powi(s as i32),
        budget,
        log2_bound,
    };
    let mut r = rng.rng();
    let mut points = vec![random_unit_vector(d, &mut r)];
    let mut streak = 0;
    while streak < NET_PATIENCE {
        let v = random_unit_vector(d, &mut r);
        if points.iter().any(|p| projector_distance(p, &v) <= radius) {
            streak += 1;
            continue;
        }
        points.push(v);
        streak = 0;
        if (points.len() as f64).powi(s as i32) > budget as f64 {
            return Err(exceeded(points.len()));
        }
    }
    let size = points.len().pow(s as u32);
    if size > budget {
        return Err(exceeded(points.len()));
    }
    let mut net = Vec::with_capacity(size);
    for idx in 0..size {
        let mut rem = idx;
        let mut chi = Vec::with_capacity(s);
        for _ in 0..s {
            chi.push(points[rem % points.len()].clone());
            rem /= points.len();
        }
        net.push(QuasiMeasurement::tight(chi)?);
    }
    Ok(net)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NetAudit {
    pub samples: usize,
    pub violations: usize,
    pub max_distance: f64,
}

/// Distance from random tuples of unit vectors to the nearest net element,
/// by brute force over the net.
pub fn audit_net(
    net: &[QuasiMeasurement],
    eps: f64,
    samples: usize,
    rng: &RngSpec,
) -> Result<NetAudit> {
    let Some(first) = net.first() else {
        return Err(Error::InvalidParameter("empty net".into()));
    };
    let (d, s) = (first.dim(), first.s());
    let mut r = rng.rng();
    let mut violations = 0;
    let mut max_distance: f64 = 0.0;
    for _ in 0..samples {
        let chi: Vec<CVector> = (0..s).map(|_| random_unit_vector(d, &mut r)).collect();
        let probe = QuasiMeasurement::tight(chi)?;
        let mut best = f64::INFINITY;
        for n in net {
            best = best.min(quasi_metric(&probe, n)?);
        }
        if best > eps {
            violations += 1;
        }
        max_distance = max_distance.max(best);
    }
    Ok(NetAudit {
        samples,
        violations,
        max_distance,
    })
}
