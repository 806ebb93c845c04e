//! Multipartite state types and the linear algebra they need: partial traces,
//! Schatten norms, purification and the vector/operator correspondence.
//!
//! Subsystems are laid out row-major: the first label of a [`SubsystemLayout`]
//! is the most significant digit of the composite computational index.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance for Hermiticity, trace and negative-eigenvalue checks.
pub const STATE_TOL: f64 = 1e-9;
/// Eigenvalues below this are treated as exact zeros in spectral functions.
pub const SPECTRAL_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubsystemLayout {
    labels: Vec<String>,
    dims: Vec<usize>,
}

impl SubsystemLayout {
    pub fn new<S: Into<String>>(parts: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let mut labels = Vec::new();
        let mut dims = Vec::new();
        for (label, dim) in parts {
            let label = label.into();
            if dim == 0 {
                return Err(Error::InvalidParameter(format!(
                    "subsystem `{label}` has dimension 0"
                )));
            }
            if labels.contains(&label) {
                return Err(Error::DuplicateLabel(label));
            }
            labels.push(label);
            dims.push(dim);
        }
        Ok(Self { labels, dims })
    }

    pub fn single(label: &str, dim: usize) -> Result<Self> {
        Self::new([(label, dim)])
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.dims[self.position(label)?])
    }

    /// Sub-layout made of the selected labels, kept in layout order, together
    /// with their positions.
    pub fn restrict(&self, keep: &[&str]) -> Result<(SubsystemLayout, Vec<usize>)> {
        if keep.is_empty() {
            return Err(Error::EmptySelection);
        }
        let mut positions = Vec::with_capacity(keep.len());
        for label in keep {
            let p = self.position(label)?;
            if positions.contains(&p) {
                return Err(Error::DuplicateLabel(label.to_string()));
            }
            positions.push(p);
        }
        positions.sort_unstable();
        let layout = SubsystemLayout {
            labels: positions.iter().map(|&p| self.labels[p].clone()).collect(),
            dims: positions.iter().map(|&p| self.dims[p]).collect(),
        };
        Ok((layout, positions))
    }

    /// Layout of `self ⊗ other`.
    pub fn tensor(&self, other: &SubsystemLayout) -> Result<SubsystemLayout> {
        Self::new(
            self.labels
                .iter()
                .cloned()
                .zip(self.dims.iter().copied())
                .chain(other.labels.iter().cloned().zip(other.dims.iter().copied())),
        )
    }

    /// For every composite index, the composite index of each group of
    /// subsystem positions (each group read in the order given).
    pub(crate) fn group_indices(&self, groups: &[&[usize]]) -> Vec<Vec<usize>> {
        let total = self.total_dim();
        let n = self.dims.len();
        let mut out = vec![Vec::with_capacity(total); groups.len()];
        let mut digits = vec![0usize; n];
        for _ in 0..total {
            for (g, group) in groups.iter().enumerate() {
                let mut idx = 0;
                for &p in group.iter() {
                    idx = idx * self.dims[p] + digits[p];
                }
                out[g].push(idx);
            }
            // increment the mixed-radix counter, last subsystem fastest
            for p in (0..n).rev() {
                digits[p] += 1;
                if digits[p] < self.dims[p] {
                    break;
                }
                digits[p] = 0;
            }
        }
        out
    }

    fn complement(&self, positions: &[usize]) -> Vec<usize> {
        (0..self.len()).filter(|p| !positions.contains(p)).collect()
    }
}

/// Hermitian eigendecomposition; eigenvalues are returned unsorted, matched
/// with the columns of the eigenvector matrix.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let sym = (m + m.adjoint()).scale(0.5);
    let eig = sym.symmetric_eigen();
    (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let sym = (m + m.adjoint()).scale(0.5);
    sym.symmetric_eigenvalues().iter().copied().collect()
}

/// Apply a real function to the spectrum of a Hermitian matrix.
pub fn hermitian_fn(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let d = DVector::from_iterator(vals.len(), vals.iter().map(|&v| C64::new(f(v), 0.0)));
    &vecs * CMatrix::from_diagonal(&d) * vecs.adjoint()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.trace()
}

/// Largest entrywise modulus.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn is_finite(m: &CMatrix) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Outer product |v⟩⟨v|.
pub fn projector(v: &CVector) -> CMatrix {
    v * v.adjoint()
}

#[derive(Debug, Clone)]
pub struct DensityOperator {
    matrix: CMatrix,
    layout: SubsystemLayout,
}

impl DensityOperator {
    /// Validates Hermiticity, unit trace and positivity. Eigenvalues in
    /// `[-STATE_TOL, 0)` are clipped to zero.
    pub fn new(matrix: CMatrix, layout: SubsystemLayout) -> Result<Self> {
        let d = layout.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, layout dimension is {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let herm = hermiticity_defect(&matrix);
        if herm > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "not Hermitian (defect {herm:e})"
            )));
        }
        let tr = matrix.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}")));
        }
        let (vals, vecs) = hermitian_eigen(&matrix);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if min < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min:e}")));
        }
        let matrix = if min < 0.0 {
            let clipped =
                DVector::from_iterator(vals.len(), vals.iter().map(|&v| C64::new(v.max(0.0), 0.0)));
            &vecs * CMatrix::from_diagonal(&clipped) * vecs.adjoint()
        } else {
            (&matrix + matrix.adjoint()).scale(0.5)
        };
        Ok(Self { matrix, layout })
    }

    /// Skips validation; for matrices produced by trusted pipelines.
    pub fn new_unchecked(matrix: CMatrix, layout: SubsystemLayout) -> Self {
        debug_assert_eq!(matrix.nrows(), layout.total_dim());
        Self { matrix, layout }
    }

    pub fn from_pure(psi: &PureState) -> Self {
        Self {
            matrix: projector(&psi.vector),
            layout: psi.layout.clone(),
        }
    }

    pub fn maximally_mixed(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        Self {
            matrix: identity(d).scale(1.0 / d as f64),
            layout,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Spectrum with tiny negative values clipped to zero.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(&self.matrix)
            .into_iter()
            .map(|v| v.max(0.0))
            .collect()
    }

    pub fn tensor(&self, other: &DensityOperator) -> Result<DensityOperator> {
        Ok(Self {
            matrix: kron(&self.matrix, &other.matrix),
            layout: self.layout.tensor(&other.layout)?,
        })
    }
}

#[derive(Debug, Clone)]
pub struct PureState {
    vector: CVector,
    layout: SubsystemLayout,
}

impl PureState {
    pub fn new(vector: CVector, layout: SubsystemLayout) -> Result<Self> {
        if vector.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch(format!(
                "vector has length {}, layout dimension is {}",
                vector.len(),
                layout.total_dim()
            )));
        }
        if !vector.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = vector.norm();
        if (norm - 1.0).abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("vector norm is {norm}")));
        }
        Ok(Self { vector, layout })
    }

    /// Normalizes `vector` before wrapping it.
    pub fn normalized(vector: CVector, layout: SubsystemLayout) -> Result<Self> {
        let norm = vector.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidState("cannot normalize a zero vector".into()));
        }
        Self::new(vector.unscale(norm), layout)
    }

    pub fn basis(layout: SubsystemLayout, index: usize) -> Result<Self> {
        let d = layout.total_dim();
        if index >= d {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} >= {d}"
            )));
        }
        let mut v = CVector::zeros(d);
        v[index] = C64::new(1.0, 0.0);
        Ok(Self { vector: v, layout })
    }

    pub fn vector(&self) -> &CVector {
        &self.vector
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn density(&self) -> DensityOperator {
        DensityOperator::from_pure(self)
    }

    pub fn tensor(&self, other: &PureState) -> Result<PureState> {
        Ok(Self {
            vector: self.vector.kronecker(&other.vector),
            layout: self.layout.tensor(&other.layout)?,
        })
    }

    /// Reduced state on `keep`, computed from the reshaped amplitude matrix.
    pub fn reduced(&self, keep: &[&str]) -> Result<DensityOperator> {
        let (kept_layout, positions) = self.layout.restrict(keep)?;
        let rest = self.layout.complement(&positions);
        let idx = self.layout.group_indices(&[&positions, &rest]);
        let dk = kept_layout.total_dim();
        let dr = self.layout.total_dim() / dk;
        let mut amp = CMatrix::zeros(dk, dr);
        for (f, z) in self.vector.iter().enumerate() {
            amp[(idx[0][f], idx[1][f])] = *z;
        }
        Ok(DensityOperator::new_unchecked(
            &amp * amp.adjoint(),
            kept_layout,
        ))
    }
}

#[derive(Debug, Clone)]
pub struct UnitaryOperator {
    matrix: CMatrix,
    layout: SubsystemLayout,
}

/// Tolerance for the unitarity certificate.
pub const UNITARY_TOL: f64 = 1e-9;

impl UnitaryOperator {
    pub fn new(matrix: CMatrix, layout: SubsystemLayout) -> Result<Self> {
        let d = layout.total_dim();
        if matrix.nrows() != d || matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "matrix is {}x{}, layout dimension is {d}",
                matrix.nrows(),
                matrix.ncols()
            )));
        }
        if !is_finite(&matrix) {
            return Err(Error::NonFinite);
        }
        let defect = unitarity_defect(&matrix);
        if defect > UNITARY_TOL {
            return Err(Error::NotUnitary(defect));
        }
        Ok(Self { matrix, layout })
    }

    pub fn identity(layout: SubsystemLayout) -> Self {
        let d = layout.total_dim();
        Self {
            matrix: identity(d),
            layout,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn layout(&self) -> &SubsystemLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// Same matrix, relabelled with a layout of equal total dimension.
    pub fn with_layout(self, layout: SubsystemLayout) -> Result<Self> {
        if layout.total_dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "layout dimension {} does not match unitary dimension {}",
                layout.total_dim(),
                self.dim()
            )));
        }
        Ok(Self {
            matrix: self.matrix,
            layout,
        })
    }
}

/// max |(U†U − I)_ij|
pub fn unitarity_defect(u: &CMatrix) -> f64 {
    let n = u.ncols();
    max_abs(&(u.adjoint() * u - identity(n)))
}

pub fn partial_trace(rho: &DensityOperator, keep: &[&str]) -> Result<DensityOperator> {
    let layout = rho.layout();
    let (kept_layout, positions) = layout.restrict(keep)?;
    let rest = layout.complement(&positions);
    let idx = layout.group_indices(&[&positions, &rest]);
    let dk = kept_layout.total_dim();
    let dr = layout.total_dim() / dk;
    // bucket full indices by their traced-out part
    let mut buckets: Vec<Vec<(usize, usize)>> = vec![Vec::with_capacity(dk); dr];
    for f in 0..layout.total_dim() {
        buckets[idx[1][f]].push((idx[0][f], f));
    }
    let m = rho.matrix();
    let mut out = CMatrix::zeros(dk, dk);
    for bucket in &buckets {
        for &(ka, fa) in bucket {
            for &(kb, fb) in bucket {
                out[(ka, kb)] += m[(fa, fb)];
            }
        }
    }
    Ok(DensityOperator::new_unchecked(out, kept_layout))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchattenP {
    One,
    Two,
    Infinity,
}

pub fn schatten_norm(x: &CMatrix, p: SchattenP) -> Result<f64> {
    if !is_finite(x) {
        return Err(Error::NonFinite);
    }
    Ok(match p {
        SchattenP::Two => x.norm(),
        SchattenP::One => x.clone().singular_values().iter().sum(),
        SchattenP::Infinity => x
            .clone()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max),
    })
}

/// ‖X‖₁ of a Hermitian matrix via its spectrum.
pub fn hermitian_one_norm(x: &CMatrix) -> f64 {
    hermitian_eigenvalues(x).iter().map(|v| v.abs()).sum()
}

/// ‖ρ − σ‖₁, in `[0, 2]`.
pub fn trace_distance(rho: &DensityOperator, sigma: &DensityOperator) -> Result<f64> {
    if rho.layout() != sigma.layout() {
        return Err(Error::LayoutMismatch(format!(
            "{:?} vs {:?}",
            rho.layout().labels(),
            sigma.layout().labels()
        )));
    }
    Ok(hermitian_one_norm(&(rho.matrix() - sigma.matrix())))
}

/// `op(|a_i⟩|b_j⟩) = |b_j⟩⟨a_i|` in the computational product bases of the
/// `from` and `to` groups, each read in the order the labels are given.
pub fn vec_to_op(v: &PureState, from: &[&str], to: &[&str]) -> Result<CMatrix> {
    let layout = v.layout();
    let mut from_pos = Vec::with_capacity(from.len());
    let mut to_pos = Vec::with_capacity(to.len());
    for l in from {
        from_pos.push(layout.position(l)?);
    }
    for l in to {
        to_pos.push(layout.position(l)?);
    }
    let mut all: Vec<usize> = from_pos.iter().chain(to_pos.iter()).copied().collect();
    all.sort_unstable();
    let n_all = all.len();
    all.dedup();
    if all.len() != n_all || all.len() != layout.len() {
        return Err(Error::InvalidPartition(format!(
            "from {from:?} and to {to:?} must partition {:?}",
            layout.labels()
        )));
    }
    let idx = layout.group_indices(&[&from_pos, &to_pos]);
    let da: usize = from_pos.iter().map(|&p| layout.dims()[p]).product();
    let db: usize = to_pos.iter().map(|&p| layout.dims()[p]).product();
    let mut op = CMatrix::zeros(db, da);
    for (f, z) in v.vector().iter().enumerate() {
        op[(idx[1][f], idx[0][f])] = *z;
    }
    Ok(op)
}

/// Purification on `layout ⊗ ancilla` with an ancilla as large as the system,
/// zero-padded beyond the rank.
pub fn purify(rho: &DensityOperator, ancilla_label: &str) -> Result<PureState> {
    let d = rho.dim();
    let ancilla = SubsystemLayout::single(ancilla_label, d)?;
    let layout = rho.layout().tensor(&ancilla)?;
    let (vals, vecs) = hermitian_eigen(rho.matrix());
    let mut psi = CVector::zeros(d * d);
    for (i, &lam) in vals.iter().enumerate() {
        if lam <= 0.0 {
            continue;
        }
        let w = lam.sqrt();
        for x in 0..d {
            psi[x * d + i] += vecs[(x, i)] * w;
        }
    }
    // renormalize away the clipped negative mass
    PureState::normalized(psi, layout)
}

/// Condition-number cap for the positive-definite weight in
/// [`one_norm_entropy_bound`].
pub const MAX_CONDITION: f64 = 1e12;

/// Returns `(‖ρ‖₁, √(Tr γ · Tr[(γ^{-1/4} ρ γ^{-1/4})²]))`.
pub fn one_norm_entropy_bound(rho: &CMatrix, gamma: &CMatrix) -> Result<(f64, f64)> {
    if rho.shape() != gamma.shape() || rho.nrows() != rho.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "rho {:?}, gamma {:?}",
            rho.shape(),
            gamma.shape()
        )));
    }
    if !is_finite(rho) || !is_finite(gamma) {
        return Err(Error::NonFinite);
    }
    if hermiticity_defect(rho) > STATE_TOL || hermiticity_defect(gamma) > STATE_TOL {
        return Err(Error::InvalidParameter("inputs must be Hermitian".into()));
    }
    let (vals, vecs) = hermitian_eigen(gamma);
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if min <= 0.0 || max / min > MAX_CONDITION {
        let cond = if min <= 0.0 { f64::INFINITY } else { max / min };
        return Err(Error::IllConditioned(cond));
    }
    let quarter = DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| C64::new(v.powf(-0.25), 0.0)),
    );
    let g = &vecs * CMatrix::from_diagonal(&quarter) * vecs.adjoint();
    let z = &g * rho * &g;
    let rhs = (gamma.trace().re * z.norm_squared()).sqrt();
    Ok((hermitian_one_norm(rho), rhs))
}

/// Returns `(‖φφ† − ψψ†‖₁, 2‖φ − ψ‖₂)`.
pub fn pure_one_two_bound(phi: &PureState, psi: &PureState) -> Result<(f64, f64)> {
    if phi.layout() != psi.layout() {
        return Err(Error::LayoutMismatch(format!(
            "{:?} vs {:?}",
            phi.layout().labels(),
            psi.layout().labels()
        )));
    }
    // rank-2 difference with eigenvalues ±√(1 − |⟨φ|ψ⟩|²)
    let overlap = phi.vector().dotc(psi.vector()).norm_sqr();
    let lhs = 2.0 * (1.0 - overlap).max(0.0).sqrt();
    let rhs = 2.0 * (phi.vector() - psi.vector()).norm();
    Ok((lhs, rhs))
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    pub fn gaussian_vector(d: usize, rng: &mut impl Rng) -> CVector {
        CVector::from_fn(d, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    pub fn random_unit(d: usize, rng: &mut impl Rng) -> CVector {
        let v = gaussian_vector(d, rng);
        let n = v.norm();
        v.unscale(n)
    }

    pub fn gaussian_matrix(r: usize, c: usize, rng: &mut impl Rng) -> CMatrix {
        CMatrix::from_fn(r, c, |_, _| {
            C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
        })
    }

    /// Random density matrix of the given rank (Wishart-style).
    pub fn random_density(d: usize, rank: usize, rng: &mut impl Rng) -> CMatrix {
        let g = gaussian_matrix(d, rank, rng);
        let m = &g * g.adjoint();
        let t = m.trace().re;
        m.unscale(t)
    }

    pub fn random_hermitian(d: usize, rng: &mut impl Rng) -> CMatrix {
        let g = gaussian_matrix(d, d, rng);
        (&g + g.adjoint()).scale(0.5)
    }

    pub fn layout(parts: &[(&str, usize)]) -> SubsystemLayout {
        SubsystemLayout::new(parts.iter().map(|&(l, d)| (l, d))).unwrap()
    }
}
