//! Truncated multi-mode Hilbert-space machinery: tensor-product spaces,
//! operators, states, Kronecker embeddings and partial traces.
//!
//! Mode ordering is row-major: the first mode varies slowest, so the basis
//! index of a level tuple `(n_0, ..., n_{M-1})` is `Σ n_m · stride_m` with
//! `stride_m = Π_{k>m} dim_k`.

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex;
use thiserror::Error;

use crate::linalg;
use crate::scalar::Real;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("mode {mode} has dimension {dim}, need at least 2")]
    DimTooSmall { mode: usize, dim: usize },
    #[error("duplicate mode label {0:?}")]
    DuplicateLabel(String),
    #[error("{labels} labels for {dims} mode dimensions")]
    LabelCountMismatch { labels: usize, dims: usize },
    #[error("space has no modes")]
    Empty,
    #[error("operator dimension {got} does not match expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("mode index {mode} out of range for {n_modes} modes")]
    ModeOutOfRange { mode: usize, n_modes: usize },
    #[error("level {level} out of range for mode {mode} with dimension {dim}")]
    LevelOutOfRange { mode: usize, level: usize, dim: usize },
    #[error("keep set for partial trace is empty or repeats modes")]
    BadKeepSet,
    #[error("operands live on different spaces")]
    SpaceMismatch,
    #[error("unknown mode label {0:?}")]
    UnknownLabel(String),
}

#[derive(Debug)]
struct SpaceInner {
    dims: Vec<usize>,
    labels: Vec<String>,
    strides: Vec<usize>,
    total: usize,
    /// levels[mode][basis_index] — per-mode occupation of each basis state.
    levels: Vec<Vec<u16>>,
}

/// A tensor product of truncated bosonic/transmon modes.
///
/// Cheap to clone; the layout tables are shared.
#[derive(Debug, Clone)]
pub struct TensorSpace {
    inner: Arc<SpaceInner>,
}

impl PartialEq for TensorSpace {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dims == other.inner.dims && self.inner.labels == other.inner.labels)
    }
}

impl TensorSpace {
    /// Build a space from per-mode truncation dimensions and unique labels.
    pub fn new<S: Into<String>>(
        dims: Vec<usize>,
        labels: Vec<S>,
    ) -> Result<Self, SpaceError> {
        if dims.is_empty() {
            return Err(SpaceError::Empty);
        }
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() != dims.len() {
            return Err(SpaceError::LabelCountMismatch {
                labels: labels.len(),
                dims: dims.len(),
            });
        }
        for (mode, &dim) in dims.iter().enumerate() {
            if dim < 2 {
                return Err(SpaceError::DimTooSmall { mode, dim });
            }
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(SpaceError::DuplicateLabel(l.clone()));
            }
        }
        let total: usize = dims.iter().product();
        let mut strides = vec![1usize; dims.len()];
        for m in (0..dims.len().saturating_sub(1)).rev() {
            strides[m] = strides[m + 1] * dims[m + 1];
        }
        let levels = dims
            .iter()
            .enumerate()
            .map(|(m, &d)| {
                (0..total)
                    .map(|i| ((i / strides[m]) % d) as u16)
                    .collect()
            })
            .collect();
        Ok(Self {
            inner: Arc::new(SpaceInner {
                dims,
                labels,
                strides,
                total,
                levels,
            }),
        })
    }

    pub fn total_dim(&self) -> usize {
        self.inner.total
    }

    pub fn n_modes(&self) -> usize {
        self.inner.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.inner.dims
    }

    pub fn dim(&self, mode: usize) -> usize {
        self.inner.dims[mode]
    }

    pub fn labels(&self) -> &[String] {
        &self.inner.labels
    }

    pub fn label(&self, mode: usize) -> &str {
        &self.inner.labels[mode]
    }

    pub fn stride(&self, mode: usize) -> usize {
        self.inner.strides[mode]
    }

    /// Occupation of `mode` in basis state `index`.
    pub fn level_of(&self, index: usize, mode: usize) -> usize {
        self.inner.levels[mode][index] as usize
    }

    /// Per-mode occupation table for `mode` over all basis indices.
    pub fn level_table(&self, mode: usize) -> &[u16] {
        &self.inner.levels[mode]
    }

    pub fn mode_index(&self, label: &str) -> Result<usize, SpaceError> {
        self.inner
            .labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| SpaceError::UnknownLabel(label.to_string()))
    }

    /// Basis index of a full level tuple.
    pub fn index_of(&self, levels: &[usize]) -> Result<usize, SpaceError> {
        if levels.len() != self.n_modes() {
            return Err(SpaceError::LabelCountMismatch {
                labels: levels.len(),
                dims: self.n_modes(),
            });
        }
        let mut idx = 0;
        for (m, &l) in levels.iter().enumerate() {
            if l >= self.dim(m) {
                return Err(SpaceError::LevelOutOfRange {
                    mode: m,
                    level: l,
                    dim: self.dim(m),
                });
            }
            idx += l * self.stride(m);
        }
        Ok(idx)
    }

    fn check_mode(&self, mode: usize) -> Result<(), SpaceError> {
        if mode >= self.n_modes() {
            return Err(SpaceError::ModeOutOfRange {
                mode,
                n_modes: self.n_modes(),
            });
        }
        Ok(())
    }
}

/// Convenience constructor mirroring the library-wide naming.
pub fn make_space<S: Into<String>>(
    dims: Vec<usize>,
    labels: Vec<S>,
) -> Result<TensorSpace, SpaceError> {
    TensorSpace::new(dims, labels)
}

/// Local truncated annihilation operator: entries `a[n-1, n] = √n`.
pub fn lowering_matrix<T: Real>(dim: usize) -> Result<Array2<Complex<T>>, SpaceError> {
    if dim < 2 {
        return Err(SpaceError::DimTooSmall { mode: 0, dim });
    }
    let mut a = Array2::zeros((dim, dim));
    for n in 1..dim {
        a[[n - 1, n]] = Complex::new(T::of(n as f64).sqrt(), T::zero());
    }
    Ok(a)
}

/// Local number operator diag(0, 1, ..., dim-1).
pub fn number_matrix<T: Real>(dim: usize) -> Array2<Complex<T>> {
    let mut n = Array2::zeros((dim, dim));
    for k in 0..dim {
        n[[k, k]] = Complex::new(T::of(k as f64), T::zero());
    }
    n
}

/// An operator on a [`TensorSpace`], stored dense.
#[derive(Debug, Clone)]
pub struct Operator<T: Real> {
    space: TensorSpace,
    matrix: Array2<Complex<T>>,
}

impl<T: Real> Operator<T> {
    pub fn new(space: TensorSpace, matrix: Array2<Complex<T>>) -> Result<Self, SpaceError> {
        if matrix.nrows() != space.total_dim() || matrix.ncols() != space.total_dim() {
            return Err(SpaceError::DimensionMismatch {
                expected: space.total_dim(),
                got: matrix.nrows(),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn identity(space: TensorSpace) -> Self {
        let d = space.total_dim();
        Self {
            space,
            matrix: Array2::eye(d),
        }
    }

    pub fn zeros(space: TensorSpace) -> Self {
        let d = space.total_dim();
        Self {
            space,
            matrix: Array2::zeros((d, d)),
        }
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn matrix(&self) -> &Array2<Complex<T>> {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<Complex<T>> {
        &mut self.matrix
    }

    pub fn dagger(&self) -> Self {
        let mut m = self.matrix.t().to_owned();
        m.mapv_inplace(|z| z.conj());
        Self {
            space: self.space.clone(),
            matrix: m,
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self, SpaceError> {
        if self.space != other.space {
            return Err(SpaceError::SpaceMismatch);
        }
        Ok(Self {
            space: self.space.clone(),
            matrix: self.matrix.dot(&other.matrix),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self, SpaceError> {
        if self.space != other.space {
            return Err(SpaceError::SpaceMismatch);
        }
        Ok(Self {
            space: self.space.clone(),
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn scale(&self, factor: Complex<T>) -> Self {
        Self {
            space: self.space.clone(),
            matrix: self.matrix.mapv(|z| z * factor),
        }
    }

    pub fn commutator(&self, other: &Self) -> Result<Self, SpaceError> {
        let ab = self.matmul(other)?;
        let ba = other.matmul(self)?;
        Ok(Self {
            space: self.space.clone(),
            matrix: &ab.matrix - &ba.matrix,
        })
    }

    pub fn apply(&self, state: &StateVector<T>) -> Result<StateVector<T>, SpaceError> {
        if self.space != state.space {
            return Err(SpaceError::SpaceMismatch);
        }
        Ok(StateVector {
            space: state.space.clone(),
            amplitudes: self.matrix.dot(&state.amplitudes),
        })
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        let mut max = T::zero();
        for (a, b) in self.matrix.iter().zip(other.matrix.iter()) {
            let d = (a - b).norm();
            if d > max {
                max = d;
            }
        }
        max
    }
}

/// Kronecker embedding of a single-mode operator, identities elsewhere.
pub fn embed<T: Real>(
    space: &TensorSpace,
    mode: usize,
    local: &Array2<Complex<T>>,
) -> Result<Operator<T>, SpaceError> {
    space.check_mode(mode)?;
    let d = space.dim(mode);
    if local.nrows() != d || local.ncols() != d {
        return Err(SpaceError::DimensionMismatch {
            expected: d,
            got: local.nrows(),
        });
    }
    let total = space.total_dim();
    let stride = space.stride(mode);
    let mut out = Array2::zeros((total, total));
    for col in 0..total {
        let n_col = space.level_of(col, mode);
        let base = col - n_col * stride;
        for n_row in 0..d {
            let v = local[[n_row, n_col]];
            if v != Complex::new(T::zero(), T::zero()) {
                out[[base + n_row * stride, col]] = v;
            }
        }
    }
    Operator::new(space.clone(), out)
}

/// A pure state on a [`TensorSpace`].
#[derive(Debug, Clone)]
pub struct StateVector<T: Real> {
    space: TensorSpace,
    amplitudes: Array1<Complex<T>>,
}

impl<T: Real> StateVector<T> {
    pub fn new(space: TensorSpace, amplitudes: Array1<Complex<T>>) -> Result<Self, SpaceError> {
        if amplitudes.len() != space.total_dim() {
            return Err(SpaceError::DimensionMismatch {
                expected: space.total_dim(),
                got: amplitudes.len(),
            });
        }
        Ok(Self { space, amplitudes })
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn amplitudes(&self) -> &Array1<Complex<T>> {
        &self.amplitudes
    }

    pub fn amplitudes_mut(&mut self) -> &mut Array1<Complex<T>> {
        &mut self.amplitudes
    }

    pub fn norm(&self) -> T {
        self.amplitudes
            .iter()
            .map(|z| z.norm_sqr())
            .sum::<T>()
            .sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > T::zero() {
            let inv = T::one() / n;
            self.amplitudes.mapv_inplace(|z| z * inv);
        }
    }

    pub fn inner(&self, other: &Self) -> Result<Complex<T>, SpaceError> {
        if self.space != other.space {
            return Err(SpaceError::SpaceMismatch);
        }
        let mut acc = Complex::new(T::zero(), T::zero());
        for (a, b) in self.amplitudes.iter().zip(other.amplitudes.iter()) {
            acc += a.conj() * b;
        }
        Ok(acc)
    }

    /// Population of `level` on `mode`.
    pub fn population(&self, mode: usize, level: usize) -> Result<T, SpaceError> {
        self.space.check_mode(mode)?;
        if level >= self.space.dim(mode) {
            return Err(SpaceError::LevelOutOfRange {
                mode,
                level,
                dim: self.space.dim(mode),
            });
        }
        let table = self.space.level_table(mode);
        let mut acc = T::zero();
        for (i, amp) in self.amplitudes.iter().enumerate() {
            if table[i] as usize == level {
                acc += amp.norm_sqr();
            }
        }
        Ok(acc)
    }

    pub fn to_density(&self) -> DensityMatrix<T> {
        let d = self.space.total_dim();
        let mut rho = Array2::zeros((d, d));
        for i in 0..d {
            for j in 0..d {
                rho[[i, j]] = self.amplitudes[i] * self.amplitudes[j].conj();
            }
        }
        DensityMatrix {
            space: self.space.clone(),
            matrix: rho,
        }
    }
}

/// Computational basis vector for a full level tuple, e.g. `|f, g, 0⟩`.
pub fn basis_state<T: Real>(
    space: &TensorSpace,
    levels: &[usize],
) -> Result<StateVector<T>, SpaceError> {
    let idx = space.index_of(levels)?;
    let mut amp = Array1::zeros(space.total_dim());
    amp[idx] = Complex::new(T::one(), T::zero());
    Ok(StateVector {
        space: space.clone(),
        amplitudes: amp,
    })
}

/// A density matrix on a [`TensorSpace`].
#[derive(Debug, Clone)]
pub struct DensityMatrix<T: Real> {
    space: TensorSpace,
    matrix: Array2<Complex<T>>,
}

impl<T: Real> DensityMatrix<T> {
    pub fn new(space: TensorSpace, matrix: Array2<Complex<T>>) -> Result<Self, SpaceError> {
        if matrix.nrows() != space.total_dim() || matrix.ncols() != space.total_dim() {
            return Err(SpaceError::DimensionMismatch {
                expected: space.total_dim(),
                got: matrix.nrows(),
            });
        }
        Ok(Self { space, matrix })
    }

    pub fn space(&self) -> &TensorSpace {
        &self.space
    }

    pub fn matrix(&self) -> &Array2<Complex<T>> {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut Array2<Complex<T>> {
        &mut self.matrix
    }

    pub fn trace(&self) -> Complex<T> {
        let mut acc = Complex::new(T::zero(), T::zero());
        for i in 0..self.matrix.nrows() {
            acc += self.matrix[[i, i]];
        }
        acc
    }

    /// Maximum element-wise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> T {
        let n = self.matrix.nrows();
        let mut max = T::zero();
        for i in 0..n {
            for j in i..n {
                let d = (self.matrix[[i, j]] - self.matrix[[j, i]].conj()).norm();
                if d > max {
                    max = d;
                }
            }
        }
        max
    }

    pub fn min_eigenvalue(&self) -> Result<T, linalg::LinalgError> {
        let vals = linalg::eigvals_hermitian(&self.matrix)?;
        Ok(vals[0])
    }

    /// Population of `level` on `mode` (diagonal of the reduced state).
    pub fn population(&self, mode: usize, level: usize) -> Result<T, SpaceError> {
        self.space.check_mode(mode)?;
        if level >= self.space.dim(mode) {
            return Err(SpaceError::LevelOutOfRange {
                mode,
                level,
                dim: self.space.dim(mode),
            });
        }
        let table = self.space.level_table(mode);
        let mut acc = T::zero();
        for i in 0..self.matrix.nrows() {
            if table[i] as usize == level {
                acc += self.matrix[[i, i]].re;
            }
        }
        Ok(acc)
    }
}

/// Partial trace keeping the listed modes (in their original order).
pub fn partial_trace<T: Real>(
    rho: &DensityMatrix<T>,
    keep_modes: &[usize],
) -> Result<DensityMatrix<T>, SpaceError> {
    let space = rho.space();
    if keep_modes.is_empty() {
        return Err(SpaceError::BadKeepSet);
    }
    let mut sorted = keep_modes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != keep_modes.len() {
        return Err(SpaceError::BadKeepSet);
    }
    for &m in &sorted {
        space.check_mode(m)?;
    }
    let traced: Vec<usize> = (0..space.n_modes())
        .filter(|m| !sorted.contains(m))
        .collect();

    let kept_dims: Vec<usize> = sorted.iter().map(|&m| space.dim(m)).collect();
    let kept_labels: Vec<String> = sorted.iter().map(|&m| space.label(m).to_string()).collect();
    let reduced_space = if traced.is_empty() {
        return Ok(rho.clone());
    } else {
        TensorSpace::new(kept_dims.clone(), kept_labels)?
    };

    let d_red = reduced_space.total_dim();
    let d_tr: usize = traced.iter().map(|&m| space.dim(m)).product();
    let mut out = Array2::zeros((d_red, d_red));

    // Map reduced index + traced tuple to full index.
    let full_index = |red: usize, tr: usize| -> usize {
        let mut idx = 0;
        for (k, &m) in sorted.iter().enumerate() {
            idx += reduced_space.level_of(red, k) * space.stride(m);
        }
        let mut rem = tr;
        for &m in traced.iter().rev() {
            idx += (rem % space.dim(m)) * space.stride(m);
            rem /= space.dim(m);
        }
        idx
    };

    for ri in 0..d_red {
        for rj in 0..d_red {
            let mut acc = Complex::new(T::zero(), T::zero());
            for t in 0..d_tr {
                acc += rho.matrix()[[full_index(ri, t), full_index(rj, t)]];
            }
            out[[ri, rj]] = acc;
        }
    }
    DensityMatrix::new(reduced_space, out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn space_dimensions_multiply() {
        let s = make_space(vec![4, 4, 3], vec!["q", "c", "r"]).unwrap();
        assert_eq!(s.total_dim(), 48);
        let s = make_space(vec![2], vec!["q"]).unwrap();
        assert_eq!(s.total_dim(), 2);
        let s = make_space(vec![4, 3, 3, 3], vec!["q", "c1", "c2", "c3"]).unwrap();
        assert_eq!(s.total_dim(), 108);
    }

    #[test]
    fn space_rejects_bad_input() {
        assert!(make_space(vec![1, 3], vec!["a", "b"]).is_err());
        assert!(make_space(vec![2, 2], vec!["a", "a"]).is_err());
        assert!(make_space(vec![2, 2], vec!["a"]).is_err());
    }

    #[test]
    fn lowering_acts_as_sqrt_n() {
        let a = lowering_matrix::<f64>(2).unwrap();
        assert_eq!(a[[0, 1]], c(1.0, 0.0));
        let a = lowering_matrix::<f64>(3).unwrap();
        assert_abs_diff_eq!(a[[1, 2]].re, 2.0_f64.sqrt(), epsilon = 1e-15);
        assert!(lowering_matrix::<f64>(1).is_err());
    }

    #[test]
    fn number_operator_from_lowering() {
        for dim in 2..6 {
            let a = lowering_matrix::<f64>(dim).unwrap();
            let ad = a.t().mapv(|z| z.conj());
            let n = ad.dot(&a);
            for k in 0..dim {
                assert_abs_diff_eq!(n[[k, k]].re, k as f64, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn embed_identity_is_identity() {
        let s = make_space(vec![2, 3], vec!["a", "b"]).unwrap();
        let id2 = Array2::<Complex<f64>>::eye(2);
        let op = embed(&s, 0, &id2).unwrap();
        assert_eq!(op.max_abs_diff(&Operator::identity(s)), 0.0);
    }

    #[test]
    fn embed_lowering_moves_excitation() {
        let s = make_space(vec![2, 2], vec!["a", "b"]).unwrap();
        let a = lowering_matrix::<f64>(2).unwrap();
        let op = embed(&s, 0, &a).unwrap();
        let ten = basis_state::<f64>(&s, &[1, 0]).unwrap();
        let moved = op.apply(&ten).unwrap();
        let zero_zero = basis_state::<f64>(&s, &[0, 0]).unwrap();
        assert_abs_diff_eq!(moved.inner(&zero_zero).unwrap().re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn disjoint_mode_embeddings_commute_exactly() {
        let s = make_space(vec![3, 3], vec!["a", "b"]).unwrap();
        let a = lowering_matrix::<f64>(3).unwrap();
        let op0 = embed(&s, 0, &a).unwrap();
        let op1 = embed(&s, 1, &a).unwrap();
        let comm = op0.commutator(&op1).unwrap();
        let zero = Operator::zeros(s);
        assert_eq!(comm.max_abs_diff(&zero), 0.0);
    }

    #[test]
    fn truncated_commutator_identity_except_top_level() {
        // [a, a†] = I - d |d-1⟩⟨d-1| exactly on the truncated ladder.
        let s = make_space(vec![3, 2], vec!["a", "b"]).unwrap();
        for mode in 0..2 {
            let d = s.dim(mode);
            let a = embed(&s, mode, &lowering_matrix::<f64>(d).unwrap()).unwrap();
            let ad = a.dagger();
            let comm = a.commutator(&ad).unwrap();
            let mut expected = Operator::identity(s.clone());
            for i in 0..s.total_dim() {
                if s.level_of(i, mode) == d - 1 {
                    expected.matrix_mut()[[i, i]] = c(1.0 - d as f64, 0.0);
                }
            }
            // √n·√n rounds at one ulp; everything else is exactly zero.
            assert!(comm.max_abs_diff(&expected) <= 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn basis_state_layout_and_norm() {
        let s = make_space(vec![4, 4, 3], vec!["q", "c", "r"]).unwrap();
        let ggz = basis_state::<f64>(&s, &[0, 0, 0]).unwrap();
        assert_eq!(ggz.amplitudes()[0], c(1.0, 0.0));
        assert_abs_diff_eq!(ggz.norm(), 1.0, epsilon = 1e-15);
        let fg0 = basis_state::<f64>(&s, &[2, 0, 0]).unwrap();
        let ee0 = basis_state::<f64>(&s, &[1, 1, 0]).unwrap();
        assert_eq!(fg0.inner(&ee0).unwrap(), c(0.0, 0.0));
        assert!(basis_state::<f64>(&s, &[0, 0, 3]).is_err());
    }

    #[test]
    fn partial_trace_of_product_state() {
        let sa = make_space(vec![2], vec!["a"]).unwrap();
        let s = make_space(vec![2, 3], vec!["a", "b"]).unwrap();
        // |ψ⟩ = (|0⟩+|1⟩)/√2 ⊗ |2⟩
        let mut amp = Array1::zeros(6);
        let r = 1.0 / 2.0_f64.sqrt();
        amp[2] = c(r, 0.0);
        amp[5] = c(r, 0.0);
        let psi = StateVector::new(s, amp).unwrap();
        let rho = psi.to_density();
        let red = partial_trace(&rho, &[0]).unwrap();
        assert_eq!(red.space().labels(), &["a".to_string()]);
        assert_eq!(red.space().total_dim(), sa.total_dim());
        for i in 0..2 {
            for j in 0..2 {
                assert_abs_diff_eq!(red.matrix()[[i, j]].re, 0.5, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn partial_trace_of_bell_state_is_maximally_mixed() {
        let s = make_space(vec![2, 2], vec!["a", "b"]).unwrap();
        let mut amp = Array1::zeros(4);
        let r = 1.0 / 2.0_f64.sqrt();
        amp[0] = c(r, 0.0);
        amp[3] = c(r, 0.0);
        let bell = StateVector::new(s, amp).unwrap();
        let red = partial_trace(&bell.to_density(), &[0]).unwrap();
        assert_abs_diff_eq!(red.matrix()[[0, 0]].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(red.matrix()[[1, 1]].re, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(red.matrix()[[0, 1]].norm(), 0.0, epsilon = 1e-14);
    }

    #[test]
    fn partial_trace_preserves_trace() {
        let s = make_space(vec![2, 2, 3], vec!["a", "b", "c"]).unwrap();
        let mut amp = Array1::zeros(12);
        for (i, v) in amp.iter_mut().enumerate() {
            *v = c(0.1 + i as f64 * 0.05, -0.02 * i as f64);
        }
        let mut psi = StateVector::new(s, amp).unwrap();
        psi.normalize();
        let rho = psi.to_density();
        let red = partial_trace(&rho, &[1]).unwrap();
        assert_abs_diff_eq!(red.trace().re, rho.trace().re, epsilon = 1e-12);
        assert!(red.trace().im.abs() < 1e-14);
    }

    #[test]
    fn partial_trace_composes() {
        // Tracing b then c equals tracing {b, c} in one shot.
        let s = make_space(vec![2, 2, 2], vec!["a", "b", "c"]).unwrap();
        let mut amp = Array1::zeros(8);
        for (i, v) in amp.iter_mut().enumerate() {
            *v = c((i as f64 * 0.37).sin(), (i as f64 * 0.21).cos());
        }
        let mut psi = StateVector::new(s, amp).unwrap();
        psi.normalize();
        let rho = psi.to_density();
        let via_two = {
            let keep_ab = partial_trace(&rho, &[0, 1]).unwrap();
            partial_trace(&keep_ab, &[0]).unwrap()
        };
        let direct = partial_trace(&rho, &[0]).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let d = (via_two.matrix()[[i, j]] - direct.matrix()[[i, j]]).norm();
                assert!(d < 1e-12, "deviation {d}");
            }
        }
    }

    #[test]
    fn density_checks() {
        let s = make_space(vec![2], vec!["a"]).unwrap();
        let psi = basis_state::<f64>(&s, &[1]).unwrap();
        let rho = psi.to_density();
        assert_abs_diff_eq!(rho.trace().re, 1.0, epsilon = 1e-15);
        assert_eq!(rho.hermiticity_defect(), 0.0);
        assert!(rho.min_eigenvalue().unwrap() > -1e-12);
        assert_abs_diff_eq!(rho.population(0, 1).unwrap(), 1.0, epsilon = 1e-15);
    }
}
