use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scheme::{distinguishability, ell1_from_weights, LockingScheme};
use crate::entropy::{alicki_fannes_bound, classical_mutual_information};
use crate::error::{Error, Result};
use crate::haar::{sample_haar_matrix, RngSpec};
use crate::measure::{
    build_net, random_povm, AnyMeasurement, Measurement, MeasurementSuperoperator,
};
use crate::qcore::{
    hermitian_eigen, identity, max_abs, CMatrix, CVector, DensityOperator, SubsystemLayout, C64,
    SPECTRAL_ZERO,
};

/// States `ρ_m = F_m F_m†` with prior `p`, all on one space of dimension `dim`.
#[derive(Debug, Clone)]
pub(crate) struct Family {
    pub p: Vec<f64>,
    pub factors: Vec<CMatrix>,
    pub dim: usize,
}

impl Family {
    /// `v[m][j] = ⟨w_j|ρ_m|w_j⟩` together with `T_m = W†F_m`.
    fn values(&self, w: &CMatrix) -> (Vec<CMatrix>, Vec<Vec<f64>>) {
        let wd = w.adjoint();
        let mut ts = Vec::with_capacity(self.factors.len());
        let mut vs = Vec::with_capacity(self.factors.len());
        for f in &self.factors {
            let t = &wd * f;
            let v = (0..t.nrows()).map(|j| t.row(j).norm_squared()).collect();
            ts.push(t);
            vs.push(v);
        }
        (ts, vs)
    }

    fn with_ancilla(&self, a: usize) -> Family {
        if a <= 1 {
            return self.clone();
        }
        let factors = self
            .factors
            .iter()
            .map(|f| {
                let mut g = CMatrix::zeros(f.nrows() * a, f.ncols());
                for i in 0..f.nrows() {
                    g.row_mut(i * a).copy_from(&f.row(i));
                }
                g
            })
            .collect();
        Family {
            p: self.p.clone(),
            factors,
            dim: self.dim * a,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Objective {
    /// `Σ_m p_m Σ_j |v_mj − v̄_j|`.
    Distinguishability,
    /// `I(M; X)` in bits.
    MutualInformation,
}

impl Objective {
    fn value(self, p: &[f64], v: &[Vec<f64>]) -> f64 {
        let nj = v[0].len();
        let bar: Vec<f64> = (0..nj)
            .map(|j| p.iter().zip(v).map(|(pm, vm)| pm * vm[j]).sum())
            .collect();
        match self {
            Objective::Distinguishability => ell1_from_weights(p, v, &bar),
            Objective::MutualInformation => {
                let joint: Vec<Vec<f64>> = p
                    .iter()
                    .zip(v)
                    .map(|(pm, vm)| vm.iter().map(|x| pm * x).collect())
                    .collect();
                classical_mutual_information(&joint)
            }
        }
    }

    /// `∂f/∂v_mj`.
    fn coefficients(self, p: &[f64], v: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let nj = v[0].len();
        let bar: Vec<f64> = (0..nj)
            .map(|j| p.iter().zip(v).map(|(pm, vm)| pm * vm[j]).sum())
            .collect();
        match self {
            Objective::Distinguishability => {
                let sign = |x: f64| {
                    if x > 0.0 {
                        1.0
                    } else if x < 0.0 {
                        -1.0
                    } else {
                        0.0
                    }
                };
                let s: Vec<Vec<f64>> = v
                    .iter()
                    .map(|vm| vm.iter().zip(&bar).map(|(a, b)| sign(a - b)).collect())
                    .collect();
                let mean: Vec<f64> = (0..nj)
                    .map(|j| p.iter().zip(&s).map(|(pm, sm)| pm * sm[j]).sum())
                    .collect();
                p.iter()
                    .zip(&s)
                    .map(|(pm, sm)| sm.iter().zip(&mean).map(|(a, b)| pm * (a - b)).collect())
                    .collect()
            }
            Objective::MutualInformation => p
                .iter()
                .zip(v)
                .map(|(pm, vm)| {
                    vm.iter()
                        .zip(&bar)
                        .map(|(&x, &q)| {
                            if x > SPECTRAL_ZERO && q > 0.0 {
                                pm * (x / q).log2()
                            } else {
                                0.0
                            }
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Value and ascent direction `G = i(R − R†)` for the flow `W e^{iτG}`,
/// where row j of R is row j of `Σ_m c_mj W†ρ_mW`.
pub(crate) fn value_and_gradient(fam: &Family, obj: Objective, w: &CMatrix) -> (f64, CMatrix) {
    let (ts, vs) = fam.values(w);
    let f = obj.value(&fam.p, &vs);
    let coeff = obj.coefficients(&fam.p, &vs);
    let d = fam.dim;
    let mut r = CMatrix::zeros(d, d);
    for (t, cm) in ts.iter().zip(&coeff) {
        // (T T†)[j, l] = ⟨T[l,:], T[j,:]⟩
        let gram = t * t.adjoint();
        for j in 0..d {
            if cm[j] == 0.0 {
                continue;
            }
            for l in 0..d {
                r[(j, l)] += gram[(j, l)] * cm[j];
            }
        }
    }
    let i = C64::new(0.0, 1.0);
    let g = (&r - r.adjoint()) * i;
    (f, g)
}

pub(crate) fn objective_value(fam: &Family, obj: Objective, w: &CMatrix) -> f64 {
    obj.value(&fam.p, &fam.values(w).1)
}

/// `W e^{iτG}` through the spectral decomposition of Hermitian `G`.
fn rotate(w: &CMatrix, eig: &(Vec<f64>, CMatrix), tau: f64) -> CMatrix {
    let (vals, vecs) = eig;
    let phases = CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| C64::from_polar(1.0, tau * l)),
    );
    w * (vecs * CMatrix::from_diagonal(&phases) * vecs.adjoint())
}

const MAX_ITERS: usize = 300;
const MAX_HALVINGS: usize = 30;
const MIN_GAIN: f64 = 1e-13;

/// Ascent over unitaries with backtracking on the rotation angle. Returns
/// the final basis and the per-iteration values.
pub(crate) fn ascend(fam: &Family, obj: Objective, mut w: CMatrix) -> (CMatrix, Vec<f64>) {
    let mut angle = 0.5;
    let mut trace = Vec::new();
    let (mut f, mut g) = value_and_gradient(fam, obj, &w);
    trace.push(f);
    for _ in 0..MAX_ITERS {
        let gnorm = g.norm();
        if gnorm < 1e-12 {
            break;
        }
        let eig = hermitian_eigen(&g);
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let cand = rotate(&w, &eig, angle / gnorm);
            let fc = objective_value(fam, obj, &cand);
            if fc > f + MIN_GAIN {
                w = cand;
                accepted = true;
                break;
            }
            angle *= 0.5;
        }
        if !accepted {
            break;
        }
        angle = (angle * 1.5).min(std::f64::consts::PI);
        let (nf, ng) = value_and_gradient(fam, obj, &w);
        f = nf;
        g = ng;
        trace.push(f);
    }
    // re-orthonormalize away accumulated rounding
    let w = w.qr().q();
    (w, trace)
}

/// Modified Gram-Schmidt over `vectors`, padded with computational basis
/// vectors, into a `d × d` unitary.
pub fn complete_basis(vectors: &[CVector], d: usize) -> CMatrix {
    let mut cols: Vec<CVector> = Vec::with_capacity(d);
    let basis = identity(d);
    let candidates = vectors
        .iter()
        .cloned()
        .chain((0..d).map(|i| basis.column(i).into_owned()));
    for mut v in candidates {
        if cols.len() == d {
            break;
        }
        for q in &cols {
            let proj = q.dotc(&v);
            v -= q * proj;
        }
        let n = v.norm();
        if n > 1e-8 {
            cols.push(v.unscale(n));
        }
    }
    CMatrix::from_columns(&cols)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum Strategy {
    ProjectiveGradient,
    QuasiRandom,
    NetExhaustive { eps: f64, budget: usize },
}

#[derive(Debug, Clone)]
pub struct OptimizerReport {
    pub best_value: f64,
    pub best_measurement: AnyMeasurement,
    pub restarts: usize,
    /// Per-iteration values of the best restart.
    pub trace: Vec<f64>,
}

fn scheme_family(scheme: &LockingScheme) -> Family {
    let enc = scheme.encoded();
    Family {
        p: scheme.p().to_vec(),
        factors: enc.factors.clone(),
        dim: scheme.measured_dim(),
    }
}

/// Starting basis for restart `r`: the computational basis first, Haar
/// bases afterwards.
fn start_basis(d: usize, r: usize, rng: &RngSpec) -> CMatrix {
    if r == 0 {
        identity(d)
    } else {
        sample_haar_matrix(d, &mut rng.child(r as u64).rng())
    }
}

/// Ordered merge: highest value wins, ties go to the lowest restart.
fn best_of<T>(results: Vec<(f64, T)>) -> (f64, T) {
    let mut it = results.into_iter();
    let mut best = it.next().expect("at least one restart");
    for cand in it {
        if cand.0 > best.0 {
            best = cand;
        }
    }
    best
}

/// Lower bound on `sup_M g_M(U)` over measurements on `C ⊗ E″`, where `E″`
/// is the support of `ω^{E′}`. The reported measurement acts on `C ⊗ E″`.
pub fn optimize_distinguishability(
    scheme: &LockingScheme,
    strategy: Strategy,
    restarts: usize,
    rng: &RngSpec,
) -> Result<OptimizerReport> {
    let restarts = restarts.max(1);
    let scheme = scheme.truncated()?;
    let d = scheme.measured_dim();
    let report = match strategy {
        Strategy::ProjectiveGradient => {
            let fam = scheme_family(&scheme);
            let runs: Vec<(f64, (CMatrix, Vec<f64>))> = (0..restarts)
                .into_par_iter()
                .map(|r| {
                    let (w, trace) =
                        ascend(&fam, Objective::Distinguishability, start_basis(d, r, rng));
                    (
                        objective_value(&fam, Objective::Distinguishability, &w),
                        (w, trace),
                    )
                })
                .collect();
            let (_, (w, trace)) = best_of(runs);
            let m = MeasurementSuperoperator::from_basis(&w)?;
            OptimizerReport {
                best_value: distinguishability(&scheme, &m)?,
                best_measurement: AnyMeasurement::Povm(m),
                restarts,
                trace,
            }
        }
        Strategy::QuasiRandom => {
            let runs: Vec<(f64, MeasurementSuperoperator)> = (0..restarts)
                .into_par_iter()
                .map(|r| {
                    let m = if r == 0 {
                        MeasurementSuperoperator::computational(d)
                    } else {
                        random_povm(d, d, &mut rng.child(r as u64).rng())
                    };
                    let g = distinguishability(&scheme, &m).expect("dimensions match");
                    (g, m)
                })
                .collect();
            let trace = runs.iter().map(|(g, _)| *g).collect();
            let (best, m) = best_of(runs);
            OptimizerReport {
                best_value: best,
                best_measurement: AnyMeasurement::Povm(m),
                restarts,
                trace,
            }
        }
        Strategy::NetExhaustive { eps, budget } => {
            let net = build_net(d, d, eps, budget, rng)?;
            let mut bases = vec![identity(d)];
            bases.extend(net.iter().map(|q| complete_basis(q.chi(), d)));
            let runs: Vec<(f64, usize)> = bases
                .par_iter()
                .enumerate()
                .map(|(i, w)| {
                    let m = MeasurementSuperoperator::from_basis(w).expect("unitary basis");
                    (
                        distinguishability(&scheme, &m).expect("dimensions match"),
                        i,
                    )
                })
                .collect();
            let trace = runs.iter().map(|(g, _)| *g).collect();
            let (best, i) = best_of(runs);
            OptimizerReport {
                best_value: best,
                best_measurement: AnyMeasurement::Povm(MeasurementSuperoperator::from_basis(
                    &bases[i],
                )?),
                restarts: bases.len(),
                trace,
            }
        }
    };
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct AccessibleInfoReport {
    /// Best `I(M; X)` found, in bits.
    pub lower_bound: f64,
    /// Alicki-Fannes bound from a supplied distinguishability value.
    pub alicki_fannes_upper: Option<f64>,
    pub best_measurement: MeasurementSuperoperator,
    pub restarts: usize,
}

const CLASSICAL_TOL: f64 = 1e-9;

/// Splits a state classical on `classical` into a prior and conditional
/// states on the remaining systems.
pub fn classical_decomposition(
    rho: &DensityOperator,
    classical: &str,
) -> Result<(Vec<f64>, Vec<CMatrix>)> {
    let layout = rho.layout();
    let pos = layout.position(classical)?;
    if pos != 0 {
        return Err(Error::InvalidParameter(format!(
            "classical register `{classical}` must be the first subsystem"
        )));
    }
    let m = layout.dims()[0];
    let q = layout.total_dim() / m;
    let mat = rho.matrix();
    for a in 0..m {
        for b in 0..m {
            if a != b && max_abs(&mat.view((a * q, b * q), (q, q)).into_owned()) > CLASSICAL_TOL {
                return Err(Error::NotClassical(classical.to_string()));
            }
        }
    }
    let mut p = Vec::with_capacity(m);
    let mut states = Vec::with_capacity(m);
    for a in 0..m {
        let block = mat.view((a * q, a * q), (q, q)).into_owned();
        let pa = block.trace().re.max(0.0);
        p.push(pa);
        states.push(if pa > 0.0 { block.unscale(pa) } else { block });
    }
    Ok((p, states))
}

/// Lower bound on the accessible information of a cq-state, by ascent over
/// projective measurements on the quantum part, optionally extended with an
/// ancilla of dimension `ancilla` (rank-one POVMs with up to `d·ancilla`
/// outcomes).
pub fn estimate_accessible_info(
    rho: &DensityOperator,
    classical: &str,
    restarts: usize,
    ancilla: usize,
    distinguishability: Option<f64>,
    rng: &RngSpec,
) -> Result<AccessibleInfoReport> {
    let (p, states) = classical_decomposition(rho, classical)?;
    let d = states[0].nrows();
    let factors = states
        .iter()
        .map(|s| {
            let (vals, vecs) = hermitian_eigen(s);
            let sq = CVector::from_iterator(
                vals.len(),
                vals.iter().map(|&v| C64::new(v.max(0.0).sqrt(), 0.0)),
            );
            vecs * CMatrix::from_diagonal(&sq)
        })
        .collect();
    let base = Family {
        p: p.clone(),
        factors,
        dim: d,
    };
    let a = ancilla.max(1);
    let fam = base.with_ancilla(a);
    let restarts = restarts.max(1);
    let runs: Vec<(f64, CMatrix)> = (0..restarts)
        .into_par_iter()
        .map(|r| {
            let (w, _) = ascend(
                &fam,
                Objective::MutualInformation,
                start_basis(fam.dim, r, rng),
            );
            (objective_value(&fam, Objective::MutualInformation, &w), w)
        })
        .collect();
    let (_, w) = best_of(runs);
    // induced POVM on the system: E_j = ⟨0|w_j⟩⟨w_j|0⟩
    let elements: Vec<CMatrix> = (0..fam.dim)
        .map(|j| {
            let v = CVector::from_fn(d, |x, _| w[(x * a, j)]);
            &v * v.adjoint()
        })
        .collect();
    let m = MeasurementSuperoperator::with_default_labels(elements)?;
    let joint: Vec<Vec<f64>> = p
        .iter()
        .zip(&states)
        .map(|(pm, s)| m.weights(s).iter().map(|x| pm * x).collect())
        .collect();
    let lower_bound = classical_mutual_information(&joint);
    let alicki_fannes_upper = match distinguishability {
        Some(g) => Some(alicki_fannes_bound(g.clamp(0.0, 1.0), p.len())?),
        None => None,
    };
    Ok(AccessibleInfoReport {
        lower_bound,
        alicki_fannes_upper,
        best_measurement: m,
        restarts,
    })
}

/// cq-state `Σ_m p_m |m⟩⟨m| ⊗ ρ_m` with classical register `M` first.
pub fn cq_state(p: &[f64], states: &[CMatrix], quantum_label: &str) -> Result<DensityOperator> {
    if p.len() != states.len() || states.is_empty() {
        return Err(Error::DimensionMismatch("one state per probability".into()));
    }
    let q = states[0].nrows();
    let m = p.len();
    let mut mat = CMatrix::zeros(m * q, m * q);
    for (a, (pa, s)) in p.iter().zip(states).enumerate() {
        if s.nrows() != q {
            return Err(Error::DimensionMismatch(
                "conditional states differ in size".into(),
            ));
        }
        mat.view_mut((a * q, a * q), (q, q))
            .copy_from(&s.scale(*pa));
    }
    DensityOperator::new(mat, SubsystemLayout::new([("M", m), (quantum_label, q)])?)
}
