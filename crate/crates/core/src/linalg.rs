//! Dense symmetric linear algebra shared by the estimators.
//!
//! Everything here works on small-to-moderate dense matrices (the experiments
//! run at d = 250). Regression features of tabular models are block sparse,
//! so the rank-1 paths only touch the support of the update vector and the
//! factorizations split the matrix into its connected blocks first.

use nalgebra::{Cholesky, DMatrix, SymmetricEigen};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not square ({rows} rows, row {row} has {cols} entries)")]
    NotSquare {
        rows: usize,
        row: usize,
        cols: usize,
    },

    #[error("matrix is not symmetric at ({row}, {col})")]
    NotSymmetric { row: usize, col: usize },

    #[error("matrix must have dimension >= 1")]
    Empty,

    #[error("ridge coefficient must be positive, got {0}")]
    NonPositiveRegularizer(f64),

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("quadratic form is negative ({value:e}); inverse is corrupted")]
    NegativeQuadraticForm { value: f64 },
}

/// Numeric knobs used across the crate.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericSettings {
    /// Full re-factorization period of a [`DesignAccumulator`]. `None` means `2 * dim`.
    pub refresh_every: Option<usize>,
    /// Relative tolerance of the iterative eigen-extreme solver.
    pub eig_rel_tol: f64,
    /// Iteration cap of the eigen solvers.
    pub eig_max_iter: usize,
    /// Largest block dimension handled by a full symmetric eigendecomposition.
    pub dense_eig_max_dim: usize,
    /// Quadratic forms below `-neg_quad_tol` are reported as corruption.
    pub neg_quad_tol: f64,
}

impl Default for NumericSettings {
    fn default() -> Self {
        Self {
            refresh_every: None,
            eig_rel_tol: 1e-9,
            eig_max_iter: 100_000,
            dense_eig_max_dim: 512,
            neg_quad_tol: 1e-10,
        }
    }
}

/// Symmetric dense matrix. Symmetry is exact: every mutation writes both triangles
/// with the same value.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    inner: DMatrix<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self {
            inner: DMatrix::zeros(dim, dim),
        }
    }

    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self {
            inner: DMatrix::identity(dim, dim) * scale,
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m.inner[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from rows, rejecting anything that is not exactly symmetric.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinalgError> {
        let n = rows.len();
        if n == 0 {
            return Err(LinalgError::Empty);
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(LinalgError::NotSquare {
                    rows: n,
                    row: r,
                    cols: row.len(),
                });
            }
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if rows[i][j] != rows[j][i] {
                    return Err(LinalgError::NotSymmetric { row: i, col: j });
                }
            }
        }
        Ok(Self {
            inner: DMatrix::from_fn(n, n, |i, j| rows[i][j]),
        })
    }

    /// Symmetrizes `m` as `(m + mᵀ) / 2`.
    pub fn from_matrix_symmetrized(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        Self {
            inner: DMatrix::from_fn(n, n, |i, j| 0.5 * (m[(i, j)] + m[(j, i)])),
        }
    }

    pub fn dim(&self) -> usize {
        self.inner.nrows()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.inner[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.inner
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim())
            .map(|i| (0..self.dim()).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn diagonal_entries(&self) -> Vec<f64> {
        (0..self.dim()).map(|i| self.get(i, i)).collect()
    }

    pub fn trace(&self) -> f64 {
        self.inner.trace()
    }

    /// `self += scale * x xᵀ`, touching only the support of `x`.
    pub fn add_outer(&mut self, x: &[f64], scale: f64) -> Result<(), LinalgError> {
        self.check_len(x.len())?;
        let support = support(x);
        for &i in &support {
            for &j in &support {
                self.inner[(i, j)] += scale * (x[i] * x[j]);
            }
        }
        Ok(())
    }

    pub fn add_scaled_identity(&mut self, scale: f64) {
        for i in 0..self.dim() {
            self.inner[(i, i)] += scale;
        }
    }

    pub fn add_assign(&mut self, other: &SymMatrix) -> Result<(), LinalgError> {
        self.check_len(other.dim())?;
        self.inner += &other.inner;
        Ok(())
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>, LinalgError> {
        self.check_len(x.len())?;
        let n = self.dim();
        let mut out = vec![0.0; n];
        for j in support(x) {
            let xj = x[j];
            let col = self.inner.column(j);
            for i in 0..n {
                out[i] += col[i] * xj;
            }
        }
        Ok(out)
    }

    /// `xᵀ M x` over the support of `x`.
    pub fn quad_form(&self, x: &[f64]) -> Result<f64, LinalgError> {
        self.check_len(x.len())?;
        let s = support(x);
        let mut acc = 0.0;
        for &i in &s {
            let mut row = 0.0;
            for &j in &s {
                row += self.inner[(i, j)] * x[j];
            }
            acc += x[i] * row;
        }
        Ok(acc)
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.inner
            .iter()
            .zip(other.inner.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Index sets of the connected blocks of the sparsity graph (an edge for every
    /// nonzero off-diagonal entry). A block-diagonal matrix yields its blocks.
    pub fn blocks(&self) -> Vec<Vec<usize>> {
        let n = self.dim();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut i: usize) -> usize {
            while parent[i] != i {
                parent[i] = parent[parent[i]];
                i = parent[i];
            }
            i
        }
        for j in 0..n {
            let col = self.inner.column(j);
            for i in (j + 1)..n {
                if col[i] != 0.0 {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    if a != b {
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
        let mut groups: Vec<Vec<usize>> = Vec::new();
        let mut slot = vec![usize::MAX; n];
        for i in 0..n {
            let root = find(&mut parent, i);
            if slot[root] == usize::MAX {
                slot[root] = groups.len();
                groups.push(Vec::new());
            }
            groups[slot[root]].push(i);
        }
        groups
    }

    fn sub_block(&self, idx: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.inner[(idx[a], idx[b])])
    }

    fn check_len(&self, len: usize) -> Result<(), LinalgError> {
        if len != self.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                actual: len,
            });
        }
        Ok(())
    }
}

/// Indices of the nonzero entries of `x`.
pub fn support(x: &[f64]) -> Vec<usize> {
    x.iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, _)| i)
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inverse and log-determinant of a symmetric positive definite matrix, computed
/// block by block through Cholesky factorizations.
pub fn spd_inverse_logdet(m: &SymMatrix) -> Result<(SymMatrix, f64), LinalgError> {
    let n = m.dim();
    if n == 0 {
        return Err(LinalgError::Empty);
    }
    let mut inv = DMatrix::zeros(n, n);
    let mut log_det = 0.0;
    for block in m.blocks() {
        let sub = m.sub_block(&block);
        let chol = Cholesky::new(sub).ok_or(LinalgError::NotPositiveDefinite)?;
        let l = chol.l_dirty();
        for k in 0..block.len() {
            log_det += 2.0 * l[(k, k)].ln();
        }
        let sub_inv = chol.inverse();
        for (a, &i) in block.iter().enumerate() {
            for (b, &j) in block.iter().enumerate() {
                inv[(i, j)] = 0.5 * (sub_inv[(a, b)] + sub_inv[(b, a)]);
            }
        }
    }
    Ok((SymMatrix { inner: inv }, log_det))
}

/// Smallest and largest eigenvalue of `m`.
pub fn eigen_extremes(m: &SymMatrix) -> Result<(f64, f64), LinalgError> {
    eigen_extremes_with(m, &NumericSettings::default())
}

pub fn eigen_extremes_with(
    m: &SymMatrix,
    settings: &NumericSettings,
) -> Result<(f64, f64), LinalgError> {
    if m.dim() == 0 {
        return Err(LinalgError::Empty);
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for block in m.blocks() {
        let sub = m.sub_block(&block);
        let (bl, bh) = if block.len() <= settings.dense_eig_max_dim {
            dense_extremes(sub, settings)?
        } else {
            (
                power_extreme(&sub, Extreme::Min, settings)?,
                power_extreme(&sub, Extreme::Max, settings)?,
            )
        };
        lo = lo.min(bl);
        hi = hi.max(bh);
    }
    Ok((lo, hi))
}

pub fn min_eigenvalue(m: &SymMatrix) -> Result<f64, LinalgError> {
    eigen_extremes(m).map(|(lo, _)| lo)
}

pub fn max_eigenvalue(m: &SymMatrix) -> Result<f64, LinalgError> {
    eigen_extremes(m).map(|(_, hi)| hi)
}

fn dense_extremes(
    sub: DMatrix<f64>,
    settings: &NumericSettings,
) -> Result<(f64, f64), LinalgError> {
    if sub.nrows() == 1 {
        return Ok((sub[(0, 0)], sub[(0, 0)]));
    }
    let eig = SymmetricEigen::try_new(sub, f64::EPSILON, settings.eig_max_iter).ok_or(
        LinalgError::NonConvergence {
            iterations: settings.eig_max_iter,
        },
    )?;
    let lo = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    let hi = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((lo, hi))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Extreme {
    Min,
    Max,
}

/// Shifted power iteration for one extreme eigenvalue. The Gershgorin bounds give a
/// shift that makes the wanted eigenvalue the dominant one of a PSD operator.
pub fn power_extreme(
    m: &DMatrix<f64>,
    which: Extreme,
    settings: &NumericSettings,
) -> Result<f64, LinalgError> {
    let n = m.nrows();
    let (g_lo, g_hi) = gershgorin(m);
    // operator = sign * (m - shift I), PSD by construction
    let (sign, shift) = match which {
        Extreme::Max => (1.0, g_lo),
        Extreme::Min => (-1.0, g_hi),
    };
    let scale = g_hi.abs().max(g_lo.abs()).max(f64::MIN_POSITIVE);
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * ((i % 7) as f64)).collect();
    normalize(&mut v);
    let mut prev = f64::NAN;
    for it in 0..settings.eig_max_iter {
        let mv = m * nalgebra::DVector::from_column_slice(&v);
        let mut w: Vec<f64> = (0..n).map(|i| sign * (mv[i] - shift * v[i])).collect();
        let rayleigh = dot(&v, &w);
        let norm = normalize(&mut w);
        if norm == 0.0 {
            // operator annihilates v: the extreme eigenvalue equals the shift
            return Ok(shift);
        }
        let value = shift + sign * rayleigh;
        if it > 2 && (value - prev).abs() <= settings.eig_rel_tol * value.abs().max(scale) * 1e-3 {
            return Ok(value);
        }
        prev = value;
        v = w;
    }
    Err(LinalgError::NonConvergence {
        iterations: settings.eig_max_iter,
    })
}

fn gershgorin(m: &DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let radius: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)].abs()).sum();
        lo = lo.min(m[(i, i)] - radius);
        hi = hi.max(m[(i, i)] + radius);
    }
    (lo, hi)
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Ridge design `λI + Σ x xᵀ` with its response vector, a maintained inverse and
/// log-determinant.
///
/// Rank-1 updates use the Sherman–Morrison identity; every `refresh_every`
/// nonzero updates the inverse and log-determinant are recomputed from the Gram
/// matrix to bound floating-point drift.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignAccumulator {
    base_reg: f64,
    gram: SymMatrix,
    inv: SymMatrix,
    log_det: f64,
    response: Vec<f64>,
    n_updates: u64,
    since_refresh: usize,
    refresh_every: usize,
}

impl DesignAccumulator {
    pub fn new(dim: usize, base_reg: f64) -> Result<Self, LinalgError> {
        if dim == 0 {
            return Err(LinalgError::Empty);
        }
        if !(base_reg > 0.0) || !base_reg.is_finite() {
            return Err(LinalgError::NonPositiveRegularizer(base_reg));
        }
        Ok(Self {
            base_reg,
            gram: SymMatrix::scaled_identity(dim, base_reg),
            inv: SymMatrix::scaled_identity(dim, 1.0 / base_reg),
            log_det: dim as f64 * base_reg.ln(),
            response: vec![0.0; dim],
            n_updates: 0,
            since_refresh: 0,
            refresh_every: 2 * dim,
        })
    }

    /// Accumulator whose Gram matrix starts at `λI + prior_gram` and response at
    /// `prior_response`. `prior_updates` is the number of observations behind the prior.
    ///
    /// An all-zero prior yields exactly the state of [`DesignAccumulator::new`].
    pub fn with_prior(
        base_reg: f64,
        prior_gram: &SymMatrix,
        prior_response: &[f64],
        prior_updates: u64,
    ) -> Result<Self, LinalgError> {
        let dim = prior_gram.dim();
        let mut acc = Self::new(dim, base_reg)?;
        if prior_response.len() != dim {
            return Err(LinalgError::DimensionMismatch {
                expected: dim,
                actual: prior_response.len(),
            });
        }
        acc.n_updates = prior_updates;
        let gram_zero = prior_gram.as_matrix().iter().all(|v| *v == 0.0);
        if !gram_zero {
            acc.gram.add_assign(prior_gram)?;
            acc.refresh()?;
        }
        acc.response.copy_from_slice(prior_response);
        Ok(acc)
    }

    pub fn with_refresh_every(mut self, every: usize) -> Self {
        self.refresh_every = every.max(1);
        self
    }

    pub fn with_settings(self, settings: &NumericSettings) -> Self {
        match settings.refresh_every {
            Some(r) => self.with_refresh_every(r),
            None => self,
        }
    }

    pub fn dim(&self) -> usize {
        self.response.len()
    }

    pub fn base_reg(&self) -> f64 {
        self.base_reg
    }

    pub fn gram(&self) -> &SymMatrix {
        &self.gram
    }

    pub fn inverse(&self) -> &SymMatrix {
        &self.inv
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// `log det(gram) - log det(λI)`.
    pub fn log_det_ratio(&self) -> f64 {
        self.log_det - self.dim() as f64 * self.base_reg.ln()
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn n_updates(&self) -> u64 {
        self.n_updates
    }

    pub fn refresh_every(&self) -> usize {
        self.refresh_every
    }

    /// Adds the observation `(x, y)`: `gram += x xᵀ`, `response += y x`.
    pub fn rank1_update(&mut self, x: &[f64], y: f64) -> Result<(), LinalgError> {
        if x.len() != self.dim() {
            return Err(LinalgError::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        self.n_updates += 1;
        let sx = support(x);
        if sx.is_empty() {
            return Ok(());
        }
        let n = self.dim();
        let mut u = vec![0.0; n];
        for &j in &sx {
            let col = self.inv.inner.column(j);
            let xj = x[j];
            for i in 0..n {
                u[i] += col[i] * xj;
            }
        }
        let q: f64 = sx.iter().map(|&i| x[i] * u[i]).sum();
        let denom = 1.0 + q;
        let su = support(&u);
        for &i in &su {
            for &j in &su {
                self.inv.inner[(i, j)] -= u[i] * u[j] / denom;
            }
        }
        for &i in &sx {
            for &j in &sx {
                self.gram.inner[(i, j)] += x[i] * x[j];
            }
            self.response[i] += y * x[i];
        }
        self.log_det += q.ln_1p();
        self.since_refresh += 1;
        if self.since_refresh >= self.refresh_every {
            self.refresh()?;
        }
        Ok(())
    }

    /// Recomputes the inverse and log-determinant from the Gram matrix.
    pub fn refresh(&mut self) -> Result<(), LinalgError> {
        let (inv, log_det) = spd_inverse_logdet(&self.gram)?;
        self.inv = inv;
        self.log_det = log_det;
        self.since_refresh = 0;
        Ok(())
    }

    /// Ridge estimate `gram⁻¹ · response`.
    pub fn ridge_solve(&self) -> Vec<f64> {
        self.inv
            .mul_vec(&self.response)
            .expect("response has the accumulator dimension")
    }

    /// `sqrt(xᵀ gram⁻¹ x)`.
    pub fn weighted_norm(&self, x: &[f64]) -> Result<f64, LinalgError> {
        self.weighted_norm_with_tol(x, NumericSettings::default().neg_quad_tol)
    }

    pub fn weighted_norm_with_tol(&self, x: &[f64], neg_tol: f64) -> Result<f64, LinalgError> {
        let q = self.inv.quad_form(x)?;
        if q < -neg_tol {
            return Err(LinalgError::NegativeQuadraticForm { value: q });
        }
        Ok(q.max(0.0).sqrt())
    }

    /// `sqrt(vᵀ gram v)`, the norm defining the confidence ellipsoid around an estimate.
    pub fn gram_norm(&self, v: &[f64]) -> Result<f64, LinalgError> {
        let mv = self.gram.mul_vec(v)?;
        Ok(dot(v, &mv).max(0.0).sqrt())
    }
}
