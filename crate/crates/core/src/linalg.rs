//! Dense complex linear algebra on tensor-factorized Hilbert spaces.
//!
//! Everything here is exact (up to f64) and dense. Operators and states
//! carry the ordered list of tensor-factor dimensions of the space they
//! act on, so partial traces and tensor lifts never need out-of-band
//! bookkeeping. Factor 0 is the most significant index (leftmost Kronecker
//! factor), matching the row-major convention of `kronecker`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

/// Entrywise Hermiticity tolerance used when tagging operators.
pub const HERMITIAN_TOL: f64 = 1e-12;

const STATE_NORM_TOL: f64 = 1e-12;
const DENSITY_TRACE_TOL: f64 = 1e-10;
const DENSITY_EIG_TOL: f64 = 1e-10;

pub(crate) fn cr(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Largest entrywise deviation from Hermiticity, max |A - A†|.
pub fn hermiticity_defect(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            let d = (m[(i, j)] - m[(j, i)].conj()).norm();
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Spectral norm (largest singular value), via the Hermitian
/// eigendecomposition of M†M.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    let gram = m.adjoint() * m;
    let eig = nalgebra::SymmetricEigen::new(gram);
    eig.eigenvalues
        .iter()
        .fold(0.0f64, |a, &x| a.max(x.max(0.0)))
        .sqrt()
}

pub fn max_abs_entry(m: &DMatrix<C64>) -> f64 {
    m.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

fn check_factor_dims(dim: usize, factor_dims: &[usize]) -> Result<()> {
    if factor_dims.is_empty() || factor_dims.iter().any(|&d| d == 0) {
        return Err(Error::InvalidInput(
            "factor_dims must be a nonempty list of positive integers".into(),
        ));
    }
    let prod: usize = factor_dims.iter().product();
    if prod != dim {
        return Err(Error::DimensionMismatch(format!(
            "product of factor_dims {factor_dims:?} is {prod}, expected {dim}"
        )));
    }
    Ok(())
}

/// Row-major strides of the tensor factors: factor 0 is most significant.
fn factor_strides(factor_dims: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; factor_dims.len()];
    for k in (0..factor_dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * factor_dims[k + 1];
    }
    strides
}

/// A dense complex square matrix tagged with the tensor-factor dimensions
/// of the Hilbert space it acts on.
#[derive(Debug, Clone)]
pub struct Operator {
    entries: DMatrix<C64>,
    factor_dims: Vec<usize>,
    hermitian: bool,
}

impl Operator {
    pub fn new(entries: DMatrix<C64>, factor_dims: Vec<usize>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch(format!(
                "operator must be square, got {}x{}",
                entries.nrows(),
                entries.ncols()
            )));
        }
        check_factor_dims(entries.nrows(), &factor_dims)?;
        let hermitian = hermiticity_defect(&entries) <= HERMITIAN_TOL;
        Ok(Self {
            entries,
            factor_dims,
            hermitian,
        })
    }

    /// Single-factor operator.
    pub fn from_matrix(entries: DMatrix<C64>) -> Result<Self> {
        let n = entries.nrows();
        Self::new(entries, vec![n])
    }

    pub fn identity(factor_dims: Vec<usize>) -> Self {
        let dim: usize = factor_dims.iter().product();
        Self {
            entries: DMatrix::identity(dim, dim),
            factor_dims,
            hermitian: true,
        }
    }

    pub fn zeros(factor_dims: Vec<usize>) -> Self {
        let dim: usize = factor_dims.iter().product();
        Self {
            entries: DMatrix::zeros(dim, dim),
            factor_dims,
            hermitian: true,
        }
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.entries
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn spectral_norm(&self) -> f64 {
        spectral_norm(&self.entries)
    }

    /// Kronecker product; factor_dims is the concatenation of both lists.
    pub fn tensor(&self, other: &Operator) -> Operator {
        let entries = self.entries.kronecker(&other.entries);
        let mut factor_dims = self.factor_dims.clone();
        factor_dims.extend_from_slice(&other.factor_dims);
        let hermitian = self.hermitian && other.hermitian;
        Operator {
            entries,
            factor_dims,
            hermitian,
        }
    }

    /// Reinterpret the same matrix with a different factorization.
    pub fn with_factor_dims(&self, factor_dims: Vec<usize>) -> Result<Operator> {
        check_factor_dims(self.dim(), &factor_dims)?;
        Ok(Operator {
            entries: self.entries.clone(),
            factor_dims,
            hermitian: self.hermitian,
        })
    }

    fn require_hermitian(&self) -> Result<()> {
        if !self.hermitian {
            Err(Error::NotHermitian(hermiticity_defect(&self.entries)))
        } else {
            Ok(())
        }
    }

    /// Raw (ungrouped) Hermitian eigendecomposition, eigenvalues ascending.
    pub(crate) fn eigh(&self) -> Result<(DVector<f64>, DMatrix<C64>)> {
        self.require_hermitian()?;
        let eig = nalgebra::SymmetricEigen::new(self.entries.clone());
        let n = self.dim();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
        let mut vectors = DMatrix::zeros(n, n);
        for (col, &k) in order.iter().enumerate() {
            vectors.set_column(col, &eig.eigenvectors.column(k));
        }
        Ok((values, vectors))
    }

    /// Spectral decomposition with eigenvalues closer than `group_tol`
    /// (absolute) merged into one degenerate eigenspace.
    pub fn spectral(&self, group_tol: f64) -> Result<SpectralDecomposition> {
        let (values, vectors) = self.eigh()?;
        let n = self.dim();
        let mut eigenvalues = Vec::new();
        let mut projectors = Vec::new();
        let mut multiplicities = Vec::new();
        let mut start = 0usize;
        while start < n {
            let mut end = start + 1;
            while end < n && values[end] - values[end - 1] <= group_tol {
                end += 1;
            }
            let mult = end - start;
            let mean = values.rows(start, mult).iter().sum::<f64>() / mult as f64;
            let mut proj = DMatrix::zeros(n, n);
            for k in start..end {
                let v = vectors.column(k);
                // proj += v v†
                for i in 0..n {
                    for j in 0..n {
                        proj[(i, j)] += v[i] * v[j].conj();
                    }
                }
            }
            eigenvalues.push(mean);
            projectors.push(proj);
            multiplicities.push(mult);
            start = end;
        }
        Ok(SpectralDecomposition {
            eigenvalues,
            projectors,
            multiplicities,
            group_tol,
            dim: n,
        })
    }

    /// Grouping tolerance relative to the spectral scale; used when callers
    /// don't have a better-informed absolute tolerance.
    pub fn default_group_tol(&self) -> Result<f64> {
        let (values, _) = self.eigh()?;
        let lo = values[0];
        let hi = values[values.len() - 1];
        let scale = (hi - lo).max(lo.abs().max(hi.abs()));
        Ok(1e-9 * scale.max(1.0))
    }

    /// U = exp(-iHt) via the eigendecomposition of H.
    pub fn evolve_unitary(&self, t: f64) -> Result<Operator> {
        let (values, vectors) = self.eigh()?;
        let n = self.dim();
        let phases: Vec<C64> = values.iter().map(|&w| (-C64::i() * w * t).exp()).collect();
        // V diag(phases) V†
        let mut scaled = vectors.clone();
        for k in 0..n {
            let mut col = scaled.column_mut(k);
            col *= phases[k];
        }
        let u = scaled * vectors.adjoint();
        Ok(Operator {
            entries: u,
            factor_dims: self.factor_dims.clone(),
            hermitian: false,
        })
    }
}

/// Kronecker product of two operators.
pub fn tensor(a: &Operator, b: &Operator) -> Operator {
    a.tensor(b)
}

/// Spectral norm of the commutator AB - BA.
pub fn commutator_norm(a: &Operator, b: &Operator) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "commutator of {}x{} with {}x{}",
            a.dim(),
            a.dim(),
            b.dim(),
            b.dim()
        )));
    }
    let comm = a.matrix() * b.matrix() - b.matrix() * a.matrix();
    Ok(spectral_norm(&comm))
}

/// Distinct eigenvalues of a Hermitian operator with their eigenprojectors.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// Distinct eigenvalues, ascending (group means).
    pub eigenvalues: Vec<f64>,
    /// Orthogonal projectors onto the corresponding eigenspaces.
    pub projectors: Vec<DMatrix<C64>>,
    pub multiplicities: Vec<usize>,
    /// Absolute grouping tolerance that produced this decomposition.
    pub group_tol: f64,
    dim: usize,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Σ_k ω_k Π_k.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        self.apply(|w| cr(w))
    }

    /// Σ_k f(ω_k) Π_k.
    pub fn apply<F: Fn(f64) -> C64>(&self, f: F) -> DMatrix<C64> {
        let mut out = DMatrix::zeros(self.dim, self.dim);
        for (w, p) in self.eigenvalues.iter().zip(&self.projectors) {
            out += p * f(*w);
        }
        out
    }
}

/// A normalized state vector on a factorized space.
#[derive(Debug, Clone)]
pub struct PureState {
    amplitudes: DVector<C64>,
    factor_dims: Vec<usize>,
}

impl PureState {
    pub fn new(amplitudes: DVector<C64>, factor_dims: Vec<usize>) -> Result<Self> {
        check_factor_dims(amplitudes.len(), &factor_dims)?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > STATE_NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "state norm {norm} deviates from 1 beyond {STATE_NORM_TOL:.0e}"
            )));
        }
        Ok(Self {
            amplitudes,
            factor_dims,
        })
    }

    /// Skips the norm check; for states produced by verified-unitary steps.
    pub(crate) fn new_unchecked(amplitudes: DVector<C64>, factor_dims: Vec<usize>) -> Self {
        Self {
            amplitudes,
            factor_dims,
        }
    }

    /// Standard basis vector |index⟩.
    pub fn basis_state(factor_dims: Vec<usize>, index: usize) -> Result<Self> {
        let dim: usize = factor_dims.iter().product();
        if index >= dim {
            return Err(Error::InvalidInput(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut v = DVector::zeros(dim);
        v[index] = cr(1.0);
        Self::new(v, factor_dims)
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    /// ⟨self|other⟩.
    pub fn inner(&self, other: &PureState) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(
                "inner product of states with different dimensions".into(),
            ));
        }
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    pub fn tensor(&self, other: &PureState) -> PureState {
        let entries = self.amplitudes.kronecker(&other.amplitudes);
        let mut dims = self.factor_dims.clone();
        dims.extend_from_slice(&other.factor_dims);
        PureState {
            amplitudes: DVector::from_column_slice(entries.as_slice()),
            factor_dims: dims,
        }
    }

    /// |ψ⟩⟨ψ| as a density operator.
    pub fn to_density(&self) -> DensityOperator {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        DensityOperator {
            entries: m,
            factor_dims: self.factor_dims.clone(),
        }
    }
}

/// Unit-trace positive Hermitian matrix on a factorized space.
#[derive(Debug, Clone)]
pub struct DensityOperator {
    entries: DMatrix<C64>,
    factor_dims: Vec<usize>,
}

impl DensityOperator {
    /// Full validation: Hermiticity, unit trace, positivity (smallest
    /// eigenvalue ≥ -1e-10).
    pub fn new(entries: DMatrix<C64>, factor_dims: Vec<usize>) -> Result<Self> {
        let rho = Self::new_light(entries, factor_dims)?;
        let eig = nalgebra::SymmetricEigen::new(rho.entries.clone());
        let min = eig.eigenvalues.iter().fold(f64::INFINITY, |a, &x| a.min(x));
        if min < -DENSITY_EIG_TOL {
            return Err(Error::InvalidInput(format!(
                "density operator has negative eigenvalue {min:.3e}"
            )));
        }
        Ok(rho)
    }

    /// Hermiticity and trace checks only; for results positive by
    /// construction (partial traces of valid states).
    pub(crate) fn new_light(entries: DMatrix<C64>, factor_dims: Vec<usize>) -> Result<Self> {
        if entries.nrows() != entries.ncols() {
            return Err(Error::DimensionMismatch("density operator must be square".into()));
        }
        check_factor_dims(entries.nrows(), &factor_dims)?;
        let defect = hermiticity_defect(&entries);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let tr = entries.trace();
        if (tr.re - 1.0).abs() > DENSITY_TRACE_TOL || tr.im.abs() > DENSITY_TRACE_TOL {
            return Err(Error::InvariantBreach(format!(
                "density operator trace {tr} deviates from 1"
            )));
        }
        Ok(Self {
            entries,
            factor_dims,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn trace(&self) -> C64 {
        self.entries.trace()
    }

    /// Tr(ρ²); equals the squared Frobenius norm for Hermitian ρ.
    pub fn purity(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum()
    }

    /// Eigenvalues, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let eig = nalgebra::SymmetricEigen::new(self.entries.clone());
        let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Trace over the factors not in `keep`. `keep` must be a nonempty
    /// proper subset of factor indices (0-based).
    pub fn partial_trace(&self, keep: &[usize]) -> Result<DensityOperator> {
        partial_trace(self, keep)
    }
}

/// Trace a density operator over the discarded tensor factors.
pub fn partial_trace(rho: &DensityOperator, keep: &[usize]) -> Result<DensityOperator> {
    let (out, kept_dims) = partial_trace_matrix(rho.matrix(), rho.factor_dims(), keep)?;
    DensityOperator::new_light(out, kept_dims)
}

/// Partial trace of a raw square matrix over the discarded factors.
/// Returns the reduced matrix and the kept factor dimensions.
pub(crate) fn partial_trace_matrix(
    m: &DMatrix<C64>,
    dims: &[usize],
    keep: &[usize],
) -> Result<(DMatrix<C64>, Vec<usize>)> {
    let nf = dims.len();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() || keep.len() == nf {
        return Err(Error::InvalidPartition(
            "keep set must be a nonempty proper subset of factor indices".into(),
        ));
    }
    if keep.iter().any(|&k| k >= nf) {
        return Err(Error::InvalidPartition(format!(
            "factor index out of range (have {nf} factors)"
        )));
    }
    let traced: Vec<usize> = (0..nf).filter(|k| !keep.contains(k)).collect();
    let strides = factor_strides(dims);

    // Offsets into the flat index for every kept / traced multi-index.
    let offsets = |factors: &[usize]| -> Vec<usize> {
        let mut out = vec![0usize];
        for &f in factors {
            let mut next = Vec::with_capacity(out.len() * dims[f]);
            for &base in &out {
                for d in 0..dims[f] {
                    next.push(base + d * strides[f]);
                }
            }
            out = next;
        }
        out
    };
    let kept_offsets = offsets(&keep);
    let traced_offsets = offsets(&traced);

    let kd = kept_offsets.len();
    let mut out = DMatrix::zeros(kd, kd);
    for (a, &oa) in kept_offsets.iter().enumerate() {
        for (b, &ob) in kept_offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &ot in &traced_offsets {
                acc += m[(oa + ot, ob + ot)];
            }
            out[(a, b)] = acc;
        }
    }
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    Ok((out, kept_dims))
}

/// Reduced density operator of a pure state, computed directly from the
/// amplitudes without materializing |ψ⟩⟨ψ|.
pub fn partial_trace_state(psi: &PureState, keep: &[usize]) -> Result<DensityOperator> {
    let dims = psi.factor_dims();
    let nf = dims.len();
    let mut keep: Vec<usize> = keep.to_vec();
    keep.sort_unstable();
    keep.dedup();
    if keep.is_empty() || keep.len() == nf {
        return Err(Error::InvalidPartition(
            "keep set must be a nonempty proper subset of factor indices".into(),
        ));
    }
    if keep.iter().any(|&k| k >= nf) {
        return Err(Error::InvalidPartition(format!(
            "factor index out of range (have {nf} factors)"
        )));
    }
    let traced: Vec<usize> = (0..nf).filter(|k| !keep.contains(k)).collect();
    let strides = factor_strides(dims);
    let offsets = |factors: &[usize]| -> Vec<usize> {
        let mut out = vec![0usize];
        for &f in factors {
            let mut next = Vec::with_capacity(out.len() * dims[f]);
            for &base in &out {
                for d in 0..dims[f] {
                    next.push(base + d * strides[f]);
                }
            }
            out = next;
        }
        out
    };
    let kept_offsets = offsets(&keep);
    let traced_offsets = offsets(&traced);
    let v = psi.amplitudes();
    let kd = kept_offsets.len();
    let mut out = DMatrix::zeros(kd, kd);
    for (a, &oa) in kept_offsets.iter().enumerate() {
        for (b, &ob) in kept_offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &ot in &traced_offsets {
                acc += v[oa + ot] * v[ob + ot].conj();
            }
            out[(a, b)] = acc;
        }
    }
    let kept_dims: Vec<usize> = keep.iter().map(|&k| dims[k]).collect();
    DensityOperator::new_light(out, kept_dims)
}

/// Single-qubit building blocks.
pub mod qubit {
    use super::*;

    pub fn identity() -> DMatrix<C64> {
        DMatrix::identity(2, 2)
    }

    pub fn sigma_x() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[cr(0.0), cr(1.0), cr(1.0), cr(0.0)])
    }

    pub fn sigma_y() -> DMatrix<C64> {
        DMatrix::from_row_slice(
            2,
            2,
            &[
                cr(0.0),
                C64::new(0.0, -1.0),
                C64::new(0.0, 1.0),
                cr(0.0),
            ],
        )
    }

    pub fn sigma_z() -> DMatrix<C64> {
        DMatrix::from_row_slice(2, 2, &[cr(1.0), cr(0.0), cr(0.0), cr(-1.0)])
    }

    /// (|0⟩ + |1⟩)/√2.
    pub fn plus_state() -> DVector<C64> {
        DVector::from_column_slice(&[cr(std::f64::consts::FRAC_1_SQRT_2); 2])
    }
}
