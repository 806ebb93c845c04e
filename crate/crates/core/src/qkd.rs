//! A toy key distribution protocol whose output is locked: an ideal `n`-bit
//! secret `s = (s_k, s_c)` is followed by a cyphertext `U_{s_k}|s_c⟩` handed
//! to the adversary.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entropy::alicki_fannes_bound;
use crate::error::{Error, Result};
use crate::haar::{sample_haar_matrix, RngSpec};
use crate::locking::{
    cke_layout, maximally_entangled, optimize_distinguishability, uniform, LockingScheme, Strategy,
};
use crate::qcore::{
    identity, max_abs, CMatrix, CVector, DensityOperator, PureState, SubsystemLayout,
    UnitaryOperator,
};

/// Largest cyphertext dimension `2^{n − k_bits}` accepted by the demo.
pub const MAX_CYPHERTEXT_DIM: usize = 64;
pub const DEFAULT_RESTARTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    /// Optimized `g_M` of the cyphertext against the secret; a lower bound
    /// on the best achievable correlation.
    pub without_key: f64,
    /// Correlation reached by decrypting with the revealed sub-key.
    pub with_key: f64,
    /// Fraction of trials where `s_c` was recovered from `s_k`.
    pub recovery_rate: f64,
    /// Smallest Born probability of the correct outcome across trials.
    pub min_success_probability: f64,
    pub trials: usize,
    pub restarts: usize,
}

#[derive(Debug, Clone)]
pub struct ProtocolRun {
    pub n: usize,
    pub k_bits: usize,
    /// One public unitary on `C` per sub-key value.
    pub codebook: Vec<CMatrix>,
    /// Secret of the first trial, most significant bit first; the leading
    /// `k_bits` bits form `s_k`.
    pub secret: Vec<bool>,
    /// Cyphertext of the first trial.
    pub cyphertext: DensityOperator,
    pub report: ProtocolReport,
}

/// `(2ε, 8εn + 2η(1−2ε) + 2η(2ε))`: trace distance and accessible
/// information guarantees after an `ε`-secure run.
pub fn qkd_security_bounds(eps: f64, n: usize) -> Result<(f64, f64)> {
    if !(0.0..=0.5).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in [0, 1/2], got {eps}"
        )));
    }
    if n == 0 {
        return Err(Error::InvalidParameter("n must be positive".into()));
    }
    let t = 2.0 * eps;
    let iacc = if n < usize::BITS as usize {
        alicki_fannes_bound(t, 1usize << n)?
    } else {
        // same expression with log₂ 2ⁿ = n
        4.0 * t * n as f64 + 2.0 * crate::entropy::eta(1.0 - t) + 2.0 * crate::entropy::eta(t)
    };
    Ok((t, iacc))
}

/// Locking scheme on `C ⊗ K` equivalent to the cyphertext: message
/// `(s_c, s_k)` with index `s_c·K + s_k` and unitary `Σ_k U_k ⊗ |k⟩⟨k|`.
pub fn equivalent_scheme(codebook: &[CMatrix]) -> Result<LockingScheme> {
    let k = codebook.len();
    let c = codebook.first().map_or(0, CMatrix::nrows);
    let mut u = CMatrix::zeros(c * k, c * k);
    for (kk, uk) in codebook.iter().enumerate() {
        for i in 0..c {
            for j in 0..c {
                u[(i * k + kk, j * k + kk)] = uk[(i, j)];
            }
        }
    }
    let u = UnitaryOperator::new(u, cke_layout(c, k, 1)?)?;
    LockingScheme::new(
        (c, k, 1),
        uniform(c * k),
        identity(c * k),
        u,
        maximally_entangled(1)?,
    )
}

fn bits(value: usize, width: usize) -> Vec<bool> {
    (0..width).rev().map(|i| value >> i & 1 == 1).collect()
}

/// `Σ_{m,x} |P(m,x) − P(m)P(x)|`.
fn joint_l1(joint: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let ncols = joint.first().map_or(0, Vec::len);
    let cols: Vec<f64> = (0..ncols)
        .map(|j| joint.iter().map(|r| r[j]).sum())
        .collect();
    joint
        .iter()
        .zip(&rows)
        .map(|(r, pm)| {
            r.iter()
                .zip(&cols)
                .map(|(pmx, px)| (pmx - pm * px).abs())
                .sum::<f64>()
        })
        .sum()
}

pub fn run_protocol_demo(
    n: usize,
    k_bits: usize,
    trials: usize,
    rng: &RngSpec,
) -> Result<ProtocolRun> {
    run_protocol_demo_with(n, k_bits, trials, DEFAULT_RESTARTS, rng)
}

pub fn run_protocol_demo_with(
    n: usize,
    k_bits: usize,
    trials: usize,
    restarts: usize,
    rng: &RngSpec,
) -> Result<ProtocolRun> {
    if k_bits == 0 || k_bits >= n {
        return Err(Error::InvalidParameter(format!(
            "need 0 < k_bits < n, got k_bits = {k_bits}, n = {n}"
        )));
    }
    if trials == 0 {
        return Err(Error::InvalidParameter("trials must be positive".into()));
    }
    let c_bits = n - k_bits;
    if c_bits > MAX_CYPHERTEXT_DIM.trailing_zeros() as usize || k_bits > 16 {
        let required = (c_bits as f64).exp2();
        return Err(Error::BudgetExceeded {
            required,
            budget: MAX_CYPHERTEXT_DIM,
            log2_bound: c_bits as f64,
        });
    }
    let c = 1usize << c_bits;
    let k = 1usize << k_bits;
    let book_rng = rng.child(0);
    let codebook: Vec<CMatrix> = (0..k)
        .map(|i| sample_haar_matrix(c, &mut book_rng.child(i as u64).rng()))
        .collect();
    for i in 0..k {
        for j in 0..i {
            if max_abs(&(&codebook[i] - &codebook[j])) < 1e-9 {
                return Err(Error::InvalidState("codebook unitaries coincide".into()));
            }
        }
    }

    let scheme = equivalent_scheme(&codebook)?;
    let without_key = optimize_distinguishability(
        &scheme,
        Strategy::ProjectiveGradient,
        restarts,
        &rng.child(1),
    )?
    .best_value;

    // decrypt with U_k† and measure in the computational basis; outcome (k, x)
    let mut joint = vec![vec![0.0; c * k]; c * k];
    for kk in 0..k {
        for sc in 0..c {
            let out = codebook[kk].adjoint() * (&codebook[kk] * CMatrix::identity(c, c).column(sc));
            for x in 0..c {
                joint[sc * k + kk][x * k + kk] = out[x].norm_sqr() / (c * k) as f64;
            }
        }
    }
    let with_key = joint_l1(&joint);

    let trial_rng = rng.child(2);
    let outcomes: Vec<(bool, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = rand::Rng::random_range(&mut trial_rng.child(t as u64).rng(), 0..c * k);
            let (sk, sc) = (s / c, s % c);
            let cypher = codebook[sk].column(sc).into_owned();
            let probs: Vec<f64> = (codebook[sk].adjoint() * cypher)
                .iter()
                .map(|z| z.norm_sqr())
                .collect();
            let guess = probs
                .iter()
                .enumerate()
                .fold(0, |best, (i, &q)| if q > probs[best] { i } else { best });
            (guess == sc, probs[sc])
        })
        .collect();
    let recovery_rate = outcomes.iter().filter(|o| o.0).count() as f64 / trials as f64;
    let min_success_probability = outcomes.iter().map(|o| o.1).fold(1.0, f64::min);

    let s0 = rand::Rng::random_range(&mut trial_rng.child(0).rng(), 0..c * k);
    let (sk, sc) = (s0 / c, s0 % c);
    let psi: CVector = codebook[sk].column(sc).into_owned();
    let cyphertext = PureState::normalized(psi, SubsystemLayout::single("C", c)?)?.density();

    Ok(ProtocolRun {
        n,
        k_bits,
        codebook,
        secret: bits(s0, n),
        cyphertext,
        report: ProtocolReport {
            without_key,
            with_key,
            recovery_rate,
            min_success_probability,
            trials,
            restarts,
        },
    })
}
