//! Haar-random unitaries, the swap operator, exact and Monte Carlo
//! second-moment twirls, and Lévy's concentration bound.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{identity, kron, CMatrix, SubsystemLayout, UnitaryOperator, C64};

/// Reproducible random stream: `(master_seed, stream_index)` selects one
/// ChaCha stream, so every sample index is derivable independently of
/// execution order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSpec {
    pub master_seed: u64,
    pub stream_index: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngSpec {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        Self {
            master_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    /// Independent sub-stream `i` of this stream.
    pub fn child(&self, i: u64) -> RngSpec {
        RngSpec {
            master_seed: splitmix64(self.master_seed ^ splitmix64(self.stream_index)),
            stream_index: i,
        }
    }
}

/// Standard complex Gaussian entries with E|z|² = 1.
pub fn ginibre(rows: usize, cols: usize, rng: &mut impl Rng) -> CMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re * s, im * s)
    })
}

/// Ginibre QR with the phases of diag(R) moved into Q.
pub fn sample_haar_matrix(d: usize, rng: &mut impl Rng) -> CMatrix {
    let qr = ginibre(d, d, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let n = rjj.norm();
        let phase = if n > 0.0 { rjj / n } else { C64::new(1.0, 0.0) };
        for i in 0..d {
            q[(i, j)] *= phase;
        }
    }
    q
}

pub fn sample_haar(d: usize, rng: &RngSpec) -> Result<UnitaryOperator> {
    if d == 0 {
        return Err(Error::InvalidParameter("dimension must be positive".into()));
    }
    let m = sample_haar_matrix(d, &mut rng.rng());
    UnitaryOperator::new(m, SubsystemLayout::single("A", d)?)
}

/// Haar unitary tagged with an arbitrary layout.
pub fn sample_haar_on(layout: SubsystemLayout, rng: &mut impl Rng) -> Result<UnitaryOperator> {
    let m = sample_haar_matrix(layout.total_dim(), rng);
    UnitaryOperator::new(m, layout)
}

/// F on `A ⊗ Ā`, `F|i⟩|j⟩ = |j⟩|i⟩`.
pub fn swap_operator(d: usize) -> CMatrix {
    let mut f = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            f[(j * d + i, i * d + j)] = C64::new(1.0, 0.0);
        }
    }
    f
}

/// `(Π₊, Π₋) = ((I + F)/2, (I − F)/2)`.
pub fn sym_projectors(d: usize) -> (CMatrix, CMatrix) {
    let f = swap_operator(d);
    let i = identity(d * d);
    ((&i + &f).scale(0.5), (&i - &f).scale(0.5))
}

#[derive(Debug, Clone)]
pub struct TwirlResult {
    pub alpha_plus: CMatrix,
    pub alpha_minus: CMatrix,
    /// `Π₊ ⊗ α₊ + Π₋ ⊗ α₋` in `A Ā R` order.
    pub assembled: CMatrix,
}

fn trace_out_leading(y: &CMatrix, lead: usize, d_r: usize) -> CMatrix {
    let mut out = CMatrix::zeros(d_r, d_r);
    for u in 0..lead {
        for r in 0..d_r {
            for r2 in 0..d_r {
                out[(r, r2)] += y[(u * d_r + r, u * d_r + r2)];
            }
        }
    }
    out
}

fn check_twirl_dims(x: &CMatrix, d_a: usize, d_r: usize) -> Result<()> {
    let n = d_a * d_a * d_r;
    if d_a == 0 || d_r == 0 || x.nrows() != n || x.ncols() != n {
        return Err(Error::DimensionMismatch(format!(
            "matrix is {}x{}, expected {n}x{n} for dA={d_a}, dR={d_r}",
            x.nrows(),
            x.ncols()
        )));
    }
    Ok(())
}

/// Exact `∫ (U⊗U⊗I) X (U⊗U⊗I)† dU` over the Haar measure on A.
pub fn schur_twirl(x: &CMatrix, d_a: usize, d_r: usize) -> Result<TwirlResult> {
    check_twirl_dims(x, d_a, d_r)?;
    let (pp, pm) = sym_projectors(d_a);
    let id_r = identity(d_r);
    let rank_p = (d_a * (d_a + 1) / 2) as f64;
    let rank_m = (d_a * (d_a - 1) / 2) as f64;
    let alpha_plus = trace_out_leading(&(x * kron(&pp, &id_r)), d_a * d_a, d_r).unscale(rank_p);
    let alpha_minus = if rank_m > 0.0 {
        trace_out_leading(&(x * kron(&pm, &id_r)), d_a * d_a, d_r).unscale(rank_m)
    } else {
        CMatrix::zeros(d_r, d_r)
    };
    let assembled = kron(&pp, &alpha_plus) + kron(&pm, &alpha_minus);
    Ok(TwirlResult {
        alpha_plus,
        alpha_minus,
        assembled,
    })
}

#[derive(Debug, Clone)]
pub struct McTwirl {
    pub estimate: CMatrix,
    /// Entrywise standard error of the complex mean, `√((Var re + Var im)/n)`.
    pub stderr: DMatrix<f64>,
    pub max_stderr: f64,
    /// Standard error of the whole estimate, `√(Σᵢⱼ stderrᵢⱼ²)`.
    pub total_stderr: f64,
}

const TWIRL_CHUNK: usize = 2048;

/// `(U⊗U⊗I) X` with `U` applied factor by factor, on column-major storage.
fn left_local(u: &CMatrix, x: &CMatrix, d_a: usize, d_r: usize) -> CMatrix {
    let n = x.nrows();
    let block = d_a * d_r;
    let zero = C64::new(0.0, 0.0);
    let mut out = CMatrix::zeros(n, x.ncols());
    let mut t = vec![zero; n];
    for (xc, oc) in x
        .as_slice()
        .chunks_exact(n)
        .zip(out.as_mut_slice().chunks_exact_mut(n))
    {
        for (i, tb) in t.chunks_exact_mut(block).enumerate() {
            tb.fill(zero);
            for (j, xb) in xc.chunks_exact(block).enumerate() {
                let uij = u[(i, j)];
                for (a, b) in tb.iter_mut().zip(xb) {
                    *a += uij * b;
                }
            }
        }
        for (ob, tb) in oc.chunks_exact_mut(block).zip(t.chunks_exact(block)) {
            for (i, orow) in ob.chunks_exact_mut(d_r).enumerate() {
                for (j, trow) in tb.chunks_exact(d_r).enumerate() {
                    let uij = u[(i, j)];
                    for (a, b) in orow.iter_mut().zip(trow) {
                        *a += uij * b;
                    }
                }
            }
        }
    }
    out
}

/// `(U⊗U⊗I) X (U⊗U⊗I)†`.
fn conjugate_local(u: &CMatrix, x: &CMatrix, d_a: usize, d_r: usize) -> CMatrix {
    left_local(u, &left_local(u, x, d_a, d_r).adjoint(), d_a, d_r).adjoint()
}

/// Empirical twirl over `n_samples` Haar draws. Samples are split into fixed
/// chunks with their own child streams and merged in chunk order, so the
/// result does not depend on the thread count.
pub fn mc_twirl(
    x: &CMatrix,
    d_a: usize,
    d_r: usize,
    n_samples: usize,
    rng: &RngSpec,
) -> Result<McTwirl> {
    check_twirl_dims(x, d_a, d_r)?;
    if n_samples == 0 {
        return Err(Error::InvalidParameter("n_samples must be positive".into()));
    }
    let n = x.nrows();
    let n_chunks = n_samples.div_ceil(TWIRL_CHUNK);
    let partials: Vec<(CMatrix, DMatrix<f64>)> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut r = rng.child(c as u64).rng();
            let count = TWIRL_CHUNK.min(n_samples - c * TWIRL_CHUNK);
            let mut sum = CMatrix::zeros(n, n);
            let mut sq = DMatrix::<f64>::zeros(n, n);
            for _ in 0..count {
                let u = sample_haar_matrix(d_a, &mut r);
                let y = conjugate_local(&u, x, d_a, d_r);
                for (s, (q, z)) in sum.iter_mut().zip(sq.iter_mut().zip(y.iter())) {
                    *s += z;
                    *q += z.norm_sqr();
                }
            }
            (sum, sq)
        })
        .collect();
    let mut sum = CMatrix::zeros(n, n);
    let mut sq = DMatrix::<f64>::zeros(n, n);
    for (s, q) in partials {
        sum += s;
        sq += q;
    }
    let nf = n_samples as f64;
    let estimate = sum.unscale(nf);
    let stderr = DMatrix::from_fn(n, n, |i, j| {
        if n_samples < 2 {
            return 0.0;
        }
        let var = ((sq[(i, j)] - nf * estimate[(i, j)].norm_sqr()) / (nf - 1.0)).max(0.0);
        (var / nf).sqrt()
    });
    let max_stderr = stderr.iter().copied().fold(0.0, f64::max);
    let total_stderr = stderr.norm();
    Ok(McTwirl {
        estimate,
        stderr,
        max_stderr,
        total_stderr,
    })
}

/// `min(1, exp(−d ε² / (4θ²)))`.
pub fn levy_bound(theta: f64, d: usize, eps: f64) -> Result<f64> {
    if !(theta > 0.0) || !theta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "theta must be positive, got {theta}"
        )));
    }
    if !(eps >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "eps must be nonnegative, got {eps}"
        )));
    }
    Ok((-(d as f64) * eps * eps / (4.0 * theta * theta))
        .exp()
        .min(1.0))
}
