//! Entropies in bits, the Δ deficit quantities, mutual information and the
//! Alicki-Fannes bound on accessible information.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{partial_trace, DensityOperator, SPECTRAL_ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntropyKind {
    Min,
    Renyi2,
    Max,
    VonNeumann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaOrder {
    Inf,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSystem {
    Message,
    Entanglement,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeltaKind {
    pub order: DeltaOrder,
    pub system: DeltaSystem,
}

/// `η(x) = −x log₂ x`, with `η(0) = 0`.
pub fn eta(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -x * x.log2()
    }
}

/// Entropy of a spectrum (or probability vector). Values at or below
/// [`SPECTRAL_ZERO`] are dropped; the rest are renormalized.
pub fn spectrum_entropy(values: &[f64], kind: EntropyKind) -> f64 {
    let kept: Vec<f64> = values
        .iter()
        .copied()
        .filter(|&v| v > SPECTRAL_ZERO)
        .collect();
    let total: f64 = kept.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let h = match kind {
        EntropyKind::Min => -(kept.iter().copied().fold(0.0, f64::max) / total).log2(),
        EntropyKind::Renyi2 => -kept.iter().map(|v| (v / total).powi(2)).sum::<f64>().log2(),
        EntropyKind::Max => 2.0 * kept.iter().map(|v| (v / total).sqrt()).sum::<f64>().log2(),
        EntropyKind::VonNeumann => kept.iter().map(|v| eta(v / total)).sum(),
    };
    // −log 1 may come out as −0.0 or a few ulps below zero
    h.max(0.0)
}

pub fn entropy(rho: &DensityOperator, kind: EntropyKind) -> f64 {
    spectrum_entropy(&rho.eigenvalues(), kind)
}

fn entropy_for(order: DeltaOrder) -> EntropyKind {
    match order {
        DeltaOrder::Inf => EntropyKind::Min,
        DeltaOrder::Two => EntropyKind::Renyi2,
    }
}

/// `Δ = 2^{log ambient_dim − H}` from a spectrum.
pub fn spectrum_delta(values: &[f64], ambient_dim: usize, order: DeltaOrder) -> Result<f64> {
    if ambient_dim == 0 {
        return Err(Error::InvalidParameter(
            "ambient dimension must be positive".into(),
        ));
    }
    let rank = values.iter().filter(|&&v| v > SPECTRAL_ZERO).count();
    if rank > ambient_dim {
        return Err(Error::InvalidParameter(format!(
            "support of rank {rank} exceeds ambient dimension {ambient_dim}"
        )));
    }
    let h = spectrum_entropy(values, entropy_for(order));
    Ok(((ambient_dim as f64).log2() - h).exp2())
}

pub fn delta(rho: &DensityOperator, ambient_dim: usize, kind: DeltaKind) -> Result<f64> {
    spectrum_delta(&rho.eigenvalues(), ambient_dim, kind.order)
}

/// `H(A) + H(B) − H(AB)` for the cut `A = cut`, `B` = everything else.
pub fn mutual_information(rho: &DensityOperator, cut: &[&str]) -> Result<f64> {
    let labels = rho.layout().labels();
    for l in cut {
        rho.layout().position(l)?;
    }
    let rest: Vec<&str> = labels
        .iter()
        .map(String::as_str)
        .filter(|l| !cut.contains(l))
        .collect();
    if cut.is_empty() || rest.is_empty() {
        return Err(Error::InvalidPartition(
            "mutual information needs a nontrivial bipartition".into(),
        ));
    }
    let ha = entropy(&partial_trace(rho, cut)?, EntropyKind::VonNeumann);
    let hb = entropy(&partial_trace(rho, &rest)?, EntropyKind::VonNeumann);
    let hab = entropy(rho, EntropyKind::VonNeumann);
    Ok((ha + hb - hab).max(0.0))
}

/// Mutual information of a joint distribution given as rows × columns.
pub fn classical_mutual_information(joint: &[Vec<f64>]) -> f64 {
    let rows: Vec<f64> = joint.iter().map(|r| r.iter().sum()).collect();
    let ncols = joint.first().map_or(0, Vec::len);
    let cols: Vec<f64> = (0..ncols)
        .map(|j| joint.iter().map(|r| r[j]).sum())
        .collect();
    let mut mi = 0.0;
    for (i, row) in joint.iter().enumerate() {
        for (j, &pij) in row.iter().enumerate() {
            if pij > SPECTRAL_ZERO {
                mi += pij * (pij / (rows[i] * cols[j])).log2();
            }
        }
    }
    mi.max(0.0)
}

/// `4ε log₂ M + 2η(1−ε) + 2η(ε)`.
pub fn alicki_fannes_bound(eps: f64, m: usize) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::InvalidParameter(format!(
            "eps must lie in [0, 1], got {eps}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("M must be positive".into()));
    }
    Ok(4.0 * eps * (m as f64).log2() + 2.0 * eta(1.0 - eps) + 2.0 * eta(eps))
}
