//! Decoding side of the scenario `N ⊗ E → C ⊗ D`: decoupling bounds, an
//! explicit Uhlmann decoder on `C ⊗ E′` and its exact evaluation.
//!
//! The reference `R` and the classical register `M` of the purified message
//! are perfect copies, so they are carried as a single register of dimension
//! `|M|` spanned by `|m⟩^R|m⟩^M`. Trace distances are unaffected.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::haar::{sample_haar_matrix, RngSpec};
use crate::locking::schmidt_state;
use crate::qcore::{
    hermitian_eigen, hermitian_one_norm, identity, unitarity_defect, vec_to_op, CMatrix, CVector,
    PureState, SubsystemLayout, UnitaryOperator, C64, STATE_TOL,
};

pub use crate::locking::decode_threshold;

/// `√(M/C)`: average guessing error of the best measurement after decoding.
pub fn guessing_error_bound(m: usize, c: usize) -> Result<f64> {
    if m == 0 || c == 0 {
        return Err(Error::InvalidParameter("M and C must be positive".into()));
    }
    Ok((m as f64 / c as f64).sqrt())
}

/// `2^{H_max(M)/2 − H₂(E)/2} √(D/C)`.
pub fn decoupling_bound(hmax_m: f64, h2_e: f64, d: usize, c: usize) -> Result<f64> {
    if d == 0 || c == 0 {
        return Err(Error::InvalidParameter("C and D must be positive".into()));
    }
    Ok((0.5 * hmax_m - 0.5 * h2_e).exp2() * (d as f64 / c as f64).sqrt())
}

/// `4 (2^{H_max(M) − H₂(E)} D/C)^{1/4}`, the distance achieved by the
/// Uhlmann decoder once decoupling holds within twice its mean.
pub fn decoder_distance_bound(hmax_m: f64, h2_e: f64, d: usize, c: usize) -> Result<f64> {
    if d == 0 || c == 0 {
        return Err(Error::InvalidParameter("C and D must be positive".into()));
    }
    Ok(4.0 * ((hmax_m - h2_e).exp2() * d as f64 / c as f64).powf(0.25))
}

/// Message distribution, encoding basis of `N`, the unitary `N ⊗ E → C ⊗ D`
/// and shared entanglement `|ω⟩^{EE′}`.
#[derive(Debug, Clone)]
pub struct DecodingSetup {
    p: Vec<f64>,
    basis: CMatrix,
    u: CMatrix,
    omega: CMatrix,
    n: usize,
    e: usize,
    c: usize,
    d: usize,
}

impl DecodingSetup {
    /// `omega` is a pure state on two subsystems, read as `E ⊗ E′`. Messages
    /// use the first `p.len()` columns of `basis`.
    pub fn new(
        p: Vec<f64>,
        basis: CMatrix,
        u: &UnitaryOperator,
        omega: &PureState,
        c: usize,
    ) -> Result<Self> {
        let n = basis.nrows();
        if basis.ncols() != n {
            return Err(Error::DimensionMismatch(
                "message basis must be square".into(),
            ));
        }
        if unitarity_defect(&basis) > 1e-10 {
            return Err(Error::InvalidParameter(
                "message basis is not orthonormal".into(),
            ));
        }
        if p.is_empty() || p.len() > n {
            return Err(Error::DimensionMismatch(format!(
                "{} messages do not fit in |N| = {n}",
                p.len()
            )));
        }
        if p.iter().any(|&x| !(x >= 0.0)) || (p.iter().sum::<f64>() - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidParameter(
                "p must be a probability vector".into(),
            ));
        }
        let labels = omega.layout().labels();
        if labels.len() != 2 {
            return Err(Error::LayoutMismatch("ω must live on E ⊗ E′".into()));
        }
        let omega = vec_to_op(omega, &[labels[1].as_str()], &[labels[0].as_str()])?;
        let e = omega.nrows();
        let total = n * e;
        if u.dim() != total {
            return Err(Error::DimensionMismatch(format!(
                "unitary has dimension {}, expected |N||E| = {total}",
                u.dim()
            )));
        }
        if c == 0 || !total.is_multiple_of(c) {
            return Err(Error::DimensionMismatch(format!(
                "|C| = {c} does not divide |N||E| = {total}"
            )));
        }
        Ok(DecodingSetup {
            p,
            basis,
            u: u.matrix().clone(),
            omega,
            n,
            e,
            c,
            d: total / c,
        })
    }

    /// Haar unitary, computational message basis, `ω` with the given
    /// Schmidt coefficients.
    pub fn haar(n: usize, c: usize, p: Vec<f64>, schmidt: &[f64], rng: &RngSpec) -> Result<Self> {
        let omega = schmidt_state(schmidt.len(), schmidt)?;
        let total = n * schmidt.len();
        let layout = SubsystemLayout::new([("N", n), ("E", schmidt.len())])?;
        let u = UnitaryOperator::new(sample_haar_matrix(total, &mut rng.rng()), layout)?;
        Self::new(p, identity(n), &u, &omega, c)
    }

    /// `(|N|, |E|, |C|, |D|, |E′|)`.
    pub fn dims(&self) -> (usize, usize, usize, usize, usize) {
        (self.n, self.e, self.c, self.d, self.omega.ncols())
    }

    pub fn p(&self) -> &[f64] {
        &self.p
    }

    /// Coefficients of the global pure state after `U`, rows `(m, d)` and
    /// columns `(c, e′)`.
    fn output_coefficients(&self) -> CMatrix {
        let (n, e, c, d, ep) = self.dims();
        let m_count = self.p.len();
        let mut a = CMatrix::zeros(m_count * d, c * ep);
        for (m, &pm) in self.p.iter().enumerate() {
            if pm == 0.0 {
                continue;
            }
            let psi = self.basis.column(m);
            // (U (ψ_m ⊗ I_E)) Ω : (C D) × E′
            let mut um = CMatrix::zeros(c * d, e);
            for nn in 0..n {
                if psi[nn] == C64::new(0.0, 0.0) {
                    continue;
                }
                um += self.u.columns(nn * e, e) * psi[nn];
            }
            let x = (um * &self.omega) * C64::new(pm.sqrt(), 0.0);
            for cc in 0..c {
                for dd in 0..d {
                    for j in 0..ep {
                        a[(m * d + dd, cc * ep + j)] = x[(cc * d + dd, j)];
                    }
                }
            }
        }
        a
    }

    /// `ρ^D` of the output.
    fn rho_d(a: &CMatrix, m_count: usize, d: usize) -> CMatrix {
        let mut rho = CMatrix::zeros(d, d);
        for m in 0..m_count {
            let rows = a.rows(m * d, d);
            rho += rows * rows.adjoint();
        }
        rho
    }

    /// `‖Tr_{CE′}[Φ] − σ^{RM} ⊗ ρ^D‖₁` for the output purification `Φ`.
    pub fn decoupling_distance(&self) -> f64 {
        let a = self.output_coefficients();
        let m_count = self.p.len();
        let rho_d = Self::rho_d(&a, m_count, self.d);
        let mut diff = &a * a.adjoint();
        for (m, &pm) in self.p.iter().enumerate() {
            let mut block = diff.view_mut((m * self.d, m * self.d), (self.d, self.d));
            block -= rho_d.scale(pm);
        }
        hermitian_one_norm(&diff)
    }
}

/// `𝒟(ξ) = Tr_G[V ξ V†]` with `V : C ⊗ E′ → N ⊗ G`.
#[derive(Debug, Clone)]
pub struct DecoderChannel {
    isometry: CMatrix,
    input: SubsystemLayout,
    output: SubsystemLayout,
}

impl DecoderChannel {
    pub fn isometry(&self) -> &CMatrix {
        &self.isometry
    }

    /// Layout `C ⊗ Ep` of the decoder input.
    pub fn input_layout(&self) -> &SubsystemLayout {
        &self.input
    }

    /// Layout `N ⊗ G`; `G` is discarded.
    pub fn output_layout(&self) -> &SubsystemLayout {
        &self.output
    }

    pub fn discard(&self) -> &str {
        "G"
    }

    /// `‖V†V − I‖_max`.
    pub fn isometry_defect(&self) -> f64 {
        let g = self.isometry.adjoint() * &self.isometry;
        crate::qcore::max_abs(&(g - identity(self.isometry.ncols())))
    }

    /// `max_x ‖V†V x − x‖ / ‖x‖` over `probes` Gaussian vectors; `O(probes·n²)`
    /// against the `O(n³)` of [`Self::isometry_defect`].
    pub fn isometry_probe_defect(&self, probes: usize, rng: &RngSpec) -> f64 {
        let mut r = rng.rng();
        let x = crate::haar::ginibre(self.isometry.ncols(), probes, &mut r);
        let back = self.isometry.adjoint() * (&self.isometry * &x);
        (0..probes)
            .map(|j| (back.column(j) - x.column(j)).norm() / x.column(j).norm())
            .fold(0.0, f64::max)
    }
}

struct Reflectors {
    vs: Vec<Option<CVector>>,
}

impl Reflectors {
    /// Householder reduction `a = H [R; 0]` of a tall matrix.
    fn factor(mut a: CMatrix) -> (Self, CMatrix) {
        let (rows, cols) = a.shape();
        let mut vs = Vec::with_capacity(cols);
        for j in 0..cols {
            let x = a.view((j, j), (rows - j, 1)).into_owned();
            let norm = x.norm();
            if norm < 1e-300 {
                vs.push(None);
                continue;
            }
            let x0 = x[0];
            let phase = if x0.norm() > 0.0 {
                x0 / x0.norm()
            } else {
                C64::new(1.0, 0.0)
            };
            let mut v = CVector::zeros(rows);
            v.rows_mut(j, rows - j).copy_from(&x.column(0));
            v[j] += phase * norm;
            let vn = v.norm();
            let v = v.unscale(vn);
            let block = a.columns(j, cols - j).into_owned();
            let proj = v.adjoint() * &block;
            let update = &v * proj * C64::new(2.0, 0.0);
            a.columns_mut(j, cols - j).copy_from(&(block - update));
            vs.push(Some(v));
        }
        let r = a.rows(0, cols).into_owned();
        (Reflectors { vs }, r)
    }

    /// `H X`.
    fn apply_left(&self, x: &mut CMatrix) {
        for v in self.vs.iter().rev().flatten() {
            let proj = v.adjoint() * &*x;
            *x -= v * proj * C64::new(2.0, 0.0);
        }
    }

    /// `X H†`; each reflector is Hermitian.
    fn apply_right_adjoint(&self, x: &mut CMatrix) {
        for v in self.vs.iter().rev().flatten() {
            let proj = &*x * v;
            *x -= proj * v.adjoint() * C64::new(2.0, 0.0);
        }
    }
}

/// Co-isometry `Z : N ⊗ G → C ⊗ E′` maximizing `Re Tr(Z Q)` with
/// `Q = B†A`, where the rows of `A` and `B` share one reference space.
fn uhlmann_coisometry(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (r, dom) = a.shape();
    let codom = b.ncols();
    if dom <= r {
        let q = b.adjoint() * a;
        let svd = q.svd(true, true);
        let (u, v_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
        return (u * v_t).adjoint();
    }
    let (ha, ra) = Reflectors::factor(a.adjoint());
    let (hb, rb) = Reflectors::factor(b.adjoint());
    let s = &rb * ra.adjoint();
    let svd = s.svd(true, true);
    let (x, y_t) = (svd.u.expect("u"), svd.v_t.expect("v_t"));
    let block = y_t.adjoint() * x.adjoint();
    let mut z = CMatrix::zeros(dom, codom);
    for i in 0..dom {
        z[(i, i)] = C64::new(1.0, 0.0);
    }
    z.view_mut((0, 0), (r, r)).copy_from(&block);
    hb.apply_right_adjoint(&mut z);
    ha.apply_left(&mut z);
    z
}

/// Uhlmann decoder matching the output purification `Φ` on `(RM D)(C E′)`
/// with `|σ⟩^{RMN}|θ⟩^{DG}`, where `θ` is the eigenbasis purification of
/// `ρ^D` and `|G| = max(|D|, ⌈|C||E′|/|N|⌉)`.
pub fn build_decoder(setup: &DecodingSetup) -> Result<DecoderChannel> {
    let (n, _, c, d, ep) = setup.dims();
    let m_count = setup.p.len();
    let g = d.max((c * ep).div_ceil(n));
    let a = setup.output_coefficients();
    let rho_d = DecodingSetup::rho_d(&a, m_count, d);
    let (vals, vecs) = hermitian_eigen(&rho_d);
    let mut b = CMatrix::zeros(m_count * d, n * g);
    for (m, &pm) in setup.p.iter().enumerate() {
        let psi = setup.basis.column(m);
        for nn in 0..n {
            let amp = psi[nn] * pm.sqrt();
            if amp == C64::new(0.0, 0.0) {
                continue;
            }
            for dd in 0..d {
                for (gg, &lam) in vals.iter().enumerate() {
                    b[(m * d + dd, nn * g + gg)] = amp * vecs[(dd, gg)] * lam.max(0.0).sqrt();
                }
            }
        }
    }
    let z = uhlmann_coisometry(&a, &b);
    Ok(DecoderChannel {
        isometry: z.transpose(),
        input: SubsystemLayout::new([("C", c), ("Ep", ep)])?,
        output: SubsystemLayout::new([("N", n), ("G", g)])?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderEvaluation {
    /// `‖𝒟(Tr_D[U(σ^{RMN} ⊗ ω)U†]) − σ^{RMN}‖₁`.
    pub trace_distance: f64,
    /// `Σ_m Σ_{m′≠m} p_m p(m′|m)` after measuring `N` in the message basis.
    pub message_error: f64,
}

pub fn evaluate_decoder(dec: &DecoderChannel, setup: &DecodingSetup) -> Result<DecoderEvaluation> {
    let (n, _, c, d, ep) = setup.dims();
    if dec.input.dims() != [c, ep] || dec.output.dims()[0] != n {
        return Err(Error::DimensionMismatch(
            "decoder does not match the setup".into(),
        ));
    }
    let g = dec.output.dims()[1];
    let m_count = setup.p.len();
    let a = setup.output_coefficients();
    let y = a * dec.isometry.transpose();
    // regroup rows (m, d) × cols (n, g) into rows (m, n) × cols (d, g)
    let mut w = CMatrix::zeros(m_count * n, d * g);
    for m in 0..m_count {
        for dd in 0..d {
            for nn in 0..n {
                for gg in 0..g {
                    w[(m * n + nn, dd * g + gg)] = y[(m * d + dd, nn * g + gg)];
                }
            }
        }
    }
    let rho = &w * w.adjoint();
    let mut target = CVector::zeros(m_count * n);
    for (m, &pm) in setup.p.iter().enumerate() {
        let psi = setup.basis.column(m);
        for nn in 0..n {
            target[m * n + nn] = psi[nn] * pm.sqrt();
        }
    }
    let trace_distance = hermitian_one_norm(&(&rho - &target * target.adjoint()));
    let mut message_error = 0.0;
    for m in 0..m_count {
        let block = rho.view((m * n, m * n), (n, n));
        for mp in 0..m_count {
            if mp != m {
                let psi = setup.basis.column(mp);
                message_error += (psi.adjoint() * block * psi)[(0, 0)].re;
            }
        }
    }
    Ok(DecoderEvaluation {
        trace_distance,
        message_error: message_error.max(0.0),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderSample {
    pub trace_distance: f64,
    pub message_error: f64,
    pub decoupling_distance: f64,
    /// Probe estimate of `‖V†V − I‖`.
    pub isometry_defect: f64,
}

/// Builds and evaluates the decoder on `samples` independent Haar unitaries.
pub fn sample_decoder_performance(
    n: usize,
    c: usize,
    p: &[f64],
    schmidt: &[f64],
    samples: usize,
    rng: &RngSpec,
) -> Result<Vec<DecoderSample>> {
    (0..samples)
        .into_par_iter()
        .map(|i| {
            let setup = DecodingSetup::haar(n, c, p.to_vec(), schmidt, &rng.child(i as u64))?;
            let dec = build_decoder(&setup)?;
            let ev = evaluate_decoder(&dec, &setup)?;
            Ok(DecoderSample {
                trace_distance: ev.trace_distance,
                message_error: ev.message_error,
                decoupling_distance: setup.decoupling_distance(),
                isometry_defect: dec.isometry_probe_defect(4, &rng.child(i as u64).child(1)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::locking::{maximally_entangled, uniform};

    #[test]
    fn bound_examples() {
        assert_eq!(guessing_error_bound(4, 4).unwrap(), 1.0);
        assert_eq!(guessing_error_bound(2, 8).unwrap(), 0.5);
        assert_eq!(guessing_error_bound(4, 4096).unwrap(), 1.0 / 32.0);
        assert_eq!(decoupling_bound(2.0, 2.0, 4, 64).unwrap(), 0.25);
        assert_eq!(decoupling_bound(1.5, 1.5, 8, 8).unwrap(), 1.0);
        let r =
            decoupling_bound(1.0, 0.0, 2, 16).unwrap() / decoupling_bound(1.0, 0.0, 2, 32).unwrap();
        assert!((r - 2f64.sqrt()).abs() < 1e-12);
        assert!(guessing_error_bound(1, 0).is_err());
    }

    #[test]
    fn identity_pipeline_decodes_exactly() {
        for (n, m) in [(2, 2), (4, 3)] {
            let layout = SubsystemLayout::new([("N", n), ("E", 1)]).unwrap();
            let u = UnitaryOperator::identity(layout);
            let setup = DecodingSetup::new(
                uniform(m),
                identity(n),
                &u,
                &maximally_entangled(1).unwrap(),
                n,
            )
            .unwrap();
            let dec = build_decoder(&setup).unwrap();
            assert!(dec.isometry_defect() < 1e-9);
            let ev = evaluate_decoder(&dec, &setup).unwrap();
            assert!(ev.trace_distance < 1e-9);
            assert!(ev.message_error < 1e-12);
            assert!(setup.decoupling_distance() < 1e-12);
        }
    }

    #[test]
    fn both_uhlmann_paths_agree() {
        // C E′ small relative to M D forces the dense path
        let rng = RngSpec::new(61, 0);
        let s = DecodingSetup::haar(4, 2, uniform(4), &uniform(2), &rng).unwrap();
        let dec = build_decoder(&s).unwrap();
        assert!(dec.isometry_defect() < 1e-9);
        let a = s.output_coefficients();
        let b = {
            // any target with the right shape
            let mut r = RngSpec::new(61, 1).rng();
            crate::haar::ginibre(a.nrows(), a.ncols() + 3, &mut r)
        };
        let z1 = uhlmann_coisometry(&a, &b);
        let q = b.adjoint() * &a;
        let svd = q.clone().svd(false, false);
        let best: f64 = svd.singular_values.iter().sum();
        assert!(((&z1 * &q).trace().re - best).abs() < 1e-9);
        let tall = crate::haar::ginibre(3, 10, &mut RngSpec::new(61, 2).rng());
        let tall_b = crate::haar::ginibre(3, 12, &mut RngSpec::new(61, 3).rng());
        let z2 = uhlmann_coisometry(&tall, &tall_b);
        let q2 = tall_b.adjoint() * &tall;
        let best2: f64 = q2.clone().svd(false, false).singular_values.iter().sum();
        assert!(((&z2 * &q2).trace().re - best2).abs() < 1e-9);
        assert!(crate::qcore::max_abs(&(&z2 * z2.adjoint() - identity(10))) < 1e-9);
    }

    #[test]
    fn haar_ensemble_decodes_within_bounds() {
        let samples =
            sample_decoder_performance(2, 32, &uniform(2), &uniform(32), 50, &RngSpec::new(62, 0))
                .unwrap();
        let mean_td = samples.iter().map(|s| s.trace_distance).sum::<f64>() / 50.0;
        let mean_err = samples.iter().map(|s| s.message_error).sum::<f64>() / 50.0;
        assert!(mean_td <= 2.0 * (2.0f64 / 32.0).sqrt() + 0.1, "{mean_td}");
        assert!(mean_err <= (2.0f64 / 32.0).sqrt() + 0.1, "{mean_err}");
        let fourth = decoder_distance_bound(1.0, 5.0, 2, 32).unwrap();
        for s in &samples {
            assert!(s.isometry_defect < 1e-9);
            assert!((0.0..=2.0 + 1e-12).contains(&s.trace_distance));
            assert!(s.trace_distance <= fourth);
        }
    }

    #[test]
    fn mismatched_setups_are_rejected() {
        let layout = SubsystemLayout::new([("N", 2), ("E", 2)]).unwrap();
        let u = UnitaryOperator::identity(layout);
        let omega = maximally_entangled(2).unwrap();
        assert!(DecodingSetup::new(uniform(2), identity(2), &u, &omega, 3).is_err());
        assert!(DecodingSetup::new(uniform(3), identity(2), &u, &omega, 2).is_err());
        let s = DecodingSetup::new(uniform(2), identity(2), &u, &omega, 2).unwrap();
        let other = DecodingSetup::new(uniform(2), identity(2), &u, &omega, 4).unwrap();
        let dec = build_decoder(&other).unwrap();
        assert!(evaluate_decoder(&dec, &s).is_err());
    }
}
