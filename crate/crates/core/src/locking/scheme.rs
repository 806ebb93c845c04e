use std::sync::OnceLock;

use crate::entropy::{spectrum_delta, DeltaOrder};
use crate::error::{Error, Result};
use crate::haar::{sample_haar_matrix, RngSpec};
use crate::measure::Measurement;
use crate::qcore::{
    identity, kron, max_abs, projector, unitarity_defect, CMatrix, CVector, DensityOperator,
    PureState, SubsystemLayout, UnitaryOperator, C64, SPECTRAL_ZERO,
};

pub const LABEL_M: &str = "M";
pub const LABEL_C: &str = "C";
pub const LABEL_K: &str = "K";
pub const LABEL_E: &str = "E";
pub const LABEL_EP: &str = "Ep";

const BASIS_TOL: f64 = 1e-10;
const PROB_TOL: f64 = 1e-9;

/// Per-message encoded states `ρ_m^{CE′} = F_m F_m†`.
#[derive(Debug, Clone)]
pub(crate) struct Encoded {
    /// `(C·E′) × (K·E)` reshapes of `(U ⊗ I)(ψ_m ⊗ ω)`.
    pub factors: Vec<CMatrix>,
    pub rho_m: Vec<CMatrix>,
    pub rho_bar: CMatrix,
}

/// Dimensions, message distribution, message basis, encoding unitary on
/// `C ⊗ K ⊗ E` and the resource state `|ω⟩` on `E ⊗ E′`.
#[derive(Debug, Clone)]
pub struct LockingScheme {
    c: usize,
    k: usize,
    e: usize,
    e_prime: usize,
    p: Vec<f64>,
    basis: CMatrix,
    u: CMatrix,
    omega: PureState,
    encoded: OnceLock<Encoded>,
}

impl LockingScheme {
    pub fn new(
        (c, k, e): (usize, usize, usize),
        p: Vec<f64>,
        basis: CMatrix,
        u: UnitaryOperator,
        omega: PureState,
    ) -> Result<Self> {
        if c == 0 || k == 0 || e == 0 {
            return Err(Error::InvalidParameter(
                "dimensions must be positive".into(),
            ));
        }
        let m = c * k;
        if p.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "{} probabilities for {m} messages",
                p.len()
            )));
        }
        if p.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "probabilities must be nonnegative".into(),
            ));
        }
        let total: f64 = p.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(Error::InvalidParameter(format!(
                "probabilities sum to {total}"
            )));
        }
        if basis.nrows() != m || basis.ncols() != m {
            return Err(Error::DimensionMismatch(format!(
                "message basis is {}x{}, expected {m}x{m}",
                basis.nrows(),
                basis.ncols()
            )));
        }
        let defect = unitarity_defect(&basis);
        if defect > BASIS_TOL {
            return Err(Error::InvalidParameter(format!(
                "message basis is not orthonormal (defect {defect:e})"
            )));
        }
        if u.dim() != m * e {
            return Err(Error::DimensionMismatch(format!(
                "unitary has dimension {}, expected {}",
                u.dim(),
                m * e
            )));
        }
        let ol = omega.layout();
        if ol.len() != 2 || ol.dims()[0] != e {
            return Err(Error::DimensionMismatch(format!(
                "resource state must live on E ⊗ E′ with |E| = {e}, got dims {:?}",
                ol.dims()
            )));
        }
        let e_prime = ol.dims()[1];
        Ok(Self {
            c,
            k,
            e,
            e_prime,
            p,
            basis,
            u: u.into_matrix(),
            omega,
            encoded: OnceLock::new(),
        })
    }

    /// Computational message basis, Haar encoding unitary, and a resource
    /// state with the given Schmidt coefficients (length `e`).
    pub fn haar(
        (c, k, e): (usize, usize, usize),
        p: Vec<f64>,
        schmidt: &[f64],
        rng: &RngSpec,
    ) -> Result<Self> {
        let omega = schmidt_state(e, schmidt)?;
        let u = sample_haar_matrix(c * k * e, &mut rng.rng());
        let u = UnitaryOperator::new(u, cke_layout(c, k, e)?)?;
        Self::new((c, k, e), p, identity(c * k), u, omega)
    }

    /// Uniform message, no entanglement (`E = E′ = 1`).
    pub fn uniform_haar(c: usize, k: usize, rng: &RngSpec) -> Result<Self> {
        Self::haar((c, k, 1), uniform(c * k), &[1.0], rng)
    }

    /// Same scheme with a different encoding unitary.
    pub fn with_unitary(&self, u: UnitaryOperator) -> Result<Self> {
        Self::new(
            (self.c, self.k, self.e),
            self.p.clone(),
            self.basis.clone(),
            u,
            self.omega.clone(),
        )
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.c, self.k, self.e)
    }

    pub fn e_prime(&self) -> usize {
        self.e_prime
    }

    pub fn n_messages(&self) -> usize {
        self.c * self.k
    }

    /// Dimension of the measured system `C ⊗ E′`.
    pub fn measured_dim(&self) -> usize {
        self.c * self.e_prime
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    pub fn basis(&self) -> &CMatrix {
        &self.basis
    }

    pub fn unitary(&self) -> &CMatrix {
        &self.u
    }

    pub fn omega(&self) -> &PureState {
        &self.omega
    }

    /// `E × E′` amplitude matrix of `|ω⟩`.
    pub fn omega_matrix(&self) -> CMatrix {
        CMatrix::from_fn(self.e, self.e_prime, |i, j| {
            self.omega.vector()[i * self.e_prime + j]
        })
    }

    /// Squared Schmidt coefficients of `|ω⟩`, i.e. the spectrum of `ω^E`.
    pub fn omega_spectrum(&self) -> Vec<f64> {
        self.omega_matrix()
            .singular_values()
            .iter()
            .map(|s| s * s)
            .collect()
    }

    /// Scheme with `E′` cut down to the support of `ω^{E′}`.
    pub fn truncated(&self) -> Result<Self> {
        let w = self.omega_matrix();
        let svd = w.svd(true, false);
        let u = svd.u.expect("requested u");
        let kept: Vec<usize> = (0..svd.singular_values.len())
            .filter(|&i| svd.singular_values[i].powi(2) > SPECTRAL_ZERO)
            .collect();
        if kept.len() == self.e_prime {
            return Ok(self.clone());
        }
        let r = kept.len();
        let mut v = CVector::zeros(self.e * r);
        for (col, &i) in kept.iter().enumerate() {
            let s = svd.singular_values[i];
            for x in 0..self.e {
                v[x * r + col] = u[(x, i)] * s;
            }
        }
        let layout = SubsystemLayout::new([(LABEL_E, self.e), (LABEL_EP, r)])?;
        let omega = PureState::normalized(v, layout)?;
        let uo = UnitaryOperator::new(self.u.clone(), cke_layout(self.c, self.k, self.e)?)?;
        Self::new(
            (self.c, self.k, self.e),
            self.p.clone(),
            self.basis.clone(),
            uo,
            omega,
        )
    }

    pub(crate) fn encoded(&self) -> &Encoded {
        self.encoded.get_or_init(|| self.encode())
    }

    fn encode(&self) -> Encoded {
        let (c, k, e, ep) = (self.c, self.k, self.e, self.e_prime);
        let n = c * k;
        let w = self.omega_matrix();
        let mut factors = Vec::with_capacity(n);
        let mut rho_m = Vec::with_capacity(n);
        let mut rho_bar = CMatrix::zeros(c * ep, c * ep);
        for m in 0..n {
            let psi = self.basis.column(m).into_owned();
            // (CKE) × E′ matrix of ψ_m ⊗ ω, then U on the row index
            let x = kron(&CMatrix::from_column_slice(n, 1, psi.as_slice()), &w);
            let y = &self.u * x;
            let mut f = CMatrix::zeros(c * ep, k * e);
            for ci in 0..c {
                for ki in 0..k {
                    for ei in 0..e {
                        let row = (ci * k + ki) * e + ei;
                        for epi in 0..ep {
                            f[(ci * ep + epi, ki * e + ei)] = y[(row, epi)];
                        }
                    }
                }
            }
            let r = &f * f.adjoint();
            rho_bar += r.scale(self.p[m]);
            factors.push(f);
            rho_m.push(r);
        }
        Encoded {
            factors,
            rho_m,
            rho_bar,
        }
    }

    pub fn delta_m(&self, order: DeltaOrder) -> f64 {
        spectrum_delta(&self.p, self.n_messages(), order).expect("p has M entries")
    }

    pub fn delta_e(&self, order: DeltaOrder) -> f64 {
        spectrum_delta(&self.omega_spectrum(), self.e, order).expect("ω^E lives on E")
    }
}

pub fn uniform(m: usize) -> Vec<f64> {
    vec![1.0 / m as f64; m]
}

pub fn cke_layout(c: usize, k: usize, e: usize) -> Result<SubsystemLayout> {
    SubsystemLayout::new([(LABEL_C, c), (LABEL_K, k), (LABEL_E, e)])
}

/// `Σᵢ √λᵢ |i⟩|i⟩` on `E ⊗ E′` with `|E′| = |E|`.
pub fn schmidt_state(e: usize, schmidt: &[f64]) -> Result<PureState> {
    if schmidt.len() != e {
        return Err(Error::DimensionMismatch(format!(
            "{} Schmidt coefficients for |E| = {e}",
            schmidt.len()
        )));
    }
    if schmidt.iter().any(|&x| !(x >= 0.0)) {
        return Err(Error::InvalidParameter(
            "Schmidt coefficients must be nonnegative".into(),
        ));
    }
    let mut v = CVector::zeros(e * e);
    for (i, &l) in schmidt.iter().enumerate() {
        v[i * e + i] = C64::new(l.sqrt(), 0.0);
    }
    let layout = SubsystemLayout::new([(LABEL_E, e), (LABEL_EP, e)])?;
    PureState::new(v, layout)
}

pub fn maximally_entangled(e: usize) -> Result<PureState> {
    schmidt_state(e, &uniform(e))
}

/// `σ = Σ p_m |m⟩⟨m| ⊗ |ψ_m⟩⟨ψ_m|` on `M ⊗ C ⊗ K`.
pub fn build_sigma(scheme: &LockingScheme) -> Result<DensityOperator> {
    let (c, k, _) = scheme.dims();
    let n = c * k;
    let mut sigma = CMatrix::zeros(n * n, n * n);
    for m in 0..n {
        let block = projector(&scheme.basis().column(m).into_owned()).scale(scheme.p()[m]);
        sigma.view_mut((m * n, m * n), (n, n)).copy_from(&block);
    }
    let layout = SubsystemLayout::new([(LABEL_M, n), (LABEL_C, c), (LABEL_K, k)])?;
    DensityOperator::new(sigma, layout)
}

/// `ρ = Σ p_m |m⟩⟨m| ⊗ (U ⊗ I)(ψ_m ⊗ ω)(U ⊗ I)†` on `M ⊗ C ⊗ K ⊗ E ⊗ E′`.
pub fn build_rho(scheme: &LockingScheme) -> Result<DensityOperator> {
    let (c, k, e) = scheme.dims();
    let ep = scheme.e_prime();
    let n = c * k;
    let block_dim = n * e * ep;
    let w = scheme.omega().vector();
    let mut rho = CMatrix::zeros(n * block_dim, n * block_dim);
    let u_full = kron(scheme.unitary(), &identity(ep));
    for m in 0..n {
        let psi = scheme.basis().column(m).into_owned();
        let phi = &u_full * psi.kronecker(w);
        let block = projector(&phi).scale(scheme.p()[m]);
        rho.view_mut((m * block_dim, m * block_dim), (block_dim, block_dim))
            .copy_from(&block);
    }
    let layout = SubsystemLayout::new([
        (LABEL_M, n),
        (LABEL_C, c),
        (LABEL_K, k),
        (LABEL_E, e),
        (LABEL_EP, ep),
    ])?;
    DensityOperator::new(rho, layout)
}

/// `Σ_m p_m Σᵢ |wᵢ(ρ_m) − wᵢ(ρ̄)|` from per-message outcome weights.
pub(crate) fn ell1_from_weights(p: &[f64], per_message: &[Vec<f64>], bar: &[f64]) -> f64 {
    let mut g = 0.0;
    for (pm, w) in p.iter().zip(per_message) {
        if *pm == 0.0 {
            continue;
        }
        let d: f64 = w.iter().zip(bar).map(|(a, b)| (a - b).abs()).sum();
        g += pm * d;
    }
    g
}

/// `‖M(ρ^{MCE′}) − M(ρ^M ⊗ ρ^{CE′})‖₁` for a measurement on `C ⊗ E′`.
pub fn distinguishability(scheme: &LockingScheme, m: &impl Measurement) -> Result<f64> {
    if m.dim() != scheme.measured_dim() {
        return Err(Error::DimensionMismatch(format!(
            "measurement acts on dimension {}, C ⊗ E′ has dimension {}",
            m.dim(),
            scheme.measured_dim()
        )));
    }
    let enc = scheme.encoded();
    let per: Vec<Vec<f64>> = enc.rho_m.iter().map(|r| m.weights(r)).collect();
    let bar = m.weights(&enc.rho_bar);
    Ok(ell1_from_weights(scheme.p(), &per, &bar))
}

/// Largest entrywise deviation of `ρ^M` from `diag(p)`.
pub fn message_marginal_defect(scheme: &LockingScheme) -> f64 {
    let enc = scheme.encoded();
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(
        scheme.n_messages(),
        scheme
            .p()
            .iter()
            .zip(&enc.rho_m)
            .map(|(pm, r)| C64::new(pm * r.trace().re, 0.0)),
    ));
    let target = CMatrix::from_diagonal(&CVector::from_iterator(
        scheme.n_messages(),
        scheme.p().iter().map(|&x| C64::new(x, 0.0)),
    ));
    max_abs(&(diag - target))
}
