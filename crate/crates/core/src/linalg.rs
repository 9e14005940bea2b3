//! Small dense/sparse matrix helpers: symmetrization, positive-definite
//! shrinkage and a sparse LU determinant with reusable symbolic structure.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Shrinkage intensities tried in order by [`shrink_to_pd`].
pub const SHRINK_LADDER: [f64; 6] = [0.0, 1e-4, 1e-3, 1e-2, 1e-1, 1.0];

/// Relative eigenvalue floor used by [`shrink_to_pd`].
pub const PD_RELATIVE_FLOOR: f64 = 1e-10;

/// Eigenvalue floor applied when repairing a slightly indefinite covariance.
pub const EIGEN_FLOOR: f64 = 1e-10;

pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Result of a shrinkage pass.
#[derive(Debug, Clone)]
pub struct Shrunk {
    pub matrix: DMatrix<f64>,
    /// Intensity used; `None` when the ladder was exhausted and a ridge was added.
    pub gamma: Option<f64>,
    pub min_eigenvalue: f64,
}

/// Shrink a symmetric matrix toward its non-negative diagonal until it is
/// numerically positive definite.
///
/// Picks the smallest γ from [`SHRINK_LADDER`] with
/// `λ_min((1−γ)M + γ·diag(M)⁺) ≥ 1e−10·|tr M|/p`. An all-zero matrix maps to
/// `1e−10·I`.
pub fn shrink_to_pd(m: &DMatrix<f64>) -> Shrunk {
    let p = m.nrows();
    if p == 0 {
        return Shrunk {
            matrix: m.clone(),
            gamma: Some(0.0),
            min_eigenvalue: f64::INFINITY,
        };
    }
    let trace: f64 = (0..p).map(|i| m[(i, i)]).sum();
    if m.iter().all(|v| *v == 0.0) {
        return Shrunk {
            matrix: DMatrix::identity(p, p) * PD_RELATIVE_FLOOR,
            gamma: None,
            min_eigenvalue: PD_RELATIVE_FLOOR,
        };
    }
    let threshold = PD_RELATIVE_FLOOR * trace.abs() / p as f64;
    let diag_plus = DMatrix::from_diagonal(&m.diagonal().map(|v| v.max(0.0)));
    for &gamma in &SHRINK_LADDER {
        let candidate = if gamma == 0.0 {
            m.clone()
        } else {
            m * (1.0 - gamma) + &diag_plus * gamma
        };
        let lmin = min_eigenvalue(&candidate);
        if lmin >= threshold && lmin > 0.0 {
            return Shrunk {
                matrix: candidate,
                gamma: Some(gamma),
                min_eigenvalue: lmin,
            };
        }
    }
    // diagonal has zero or negative entries: ridge the fully shrunk matrix
    let ridge = threshold.max(PD_RELATIVE_FLOOR);
    let mut out = diag_plus;
    for i in 0..p {
        if out[(i, i)] < ridge {
            out[(i, i)] = ridge;
        }
    }
    let lmin = min_eigenvalue(&out);
    Shrunk {
        matrix: out,
        gamma: None,
        min_eigenvalue: lmin,
    }
}

/// Clamp eigenvalues of a symmetric matrix at [`EIGEN_FLOOR`] when any of
/// them is negative. Returns the minimum eigenvalue seen before repair.
pub fn repair_psd(m: &mut DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    let eig = SymmetricEigen::new(m.clone());
    let lmin = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if lmin < 0.0 {
        let vals = eig.eigenvalues.map(|v| v.max(EIGEN_FLOOR));
        *m = &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose();
        symmetrize(m);
    }
    lmin
}

/// Lower Cholesky factor after shrinking to positive definite.
pub fn robust_cholesky(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(c) = m.clone().cholesky() {
        return Ok(c.l());
    }
    let shrunk = shrink_to_pd(m);
    shrunk
        .matrix
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Numerical("cholesky failed after shrinkage".into()))
}

/// Factor `L` with `L Lᵀ = M` for a symmetric PSD matrix: Cholesky when it
/// succeeds, otherwise an eigen square root with negative eigenvalues
/// clamped to zero. Singular inputs keep their null space exactly.
pub fn psd_factor(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite entry in scale matrix".into()));
    }
    if let Some(c) = m.clone().cholesky() {
        return Ok(c.l());
    }
    let eig = SymmetricEigen::new(m.clone());
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

/// Inverse of a symmetric matrix via shrinkage and Cholesky.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let shrunk = shrink_to_pd(m);
    shrunk
        .matrix
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Numerical("singular matrix after shrinkage".into()))
}

/// Symbolic structure of an LU factorization without pivoting.
///
/// Rows are eliminated in natural order; `lower[i]` lists the columns `k < i`
/// of L in row i and `upper[i]` the columns `j ≥ i` of U (diagonal first),
/// both including fill-in.
#[derive(Debug, Clone)]
pub struct SparseLuPattern {
    n: usize,
    lower: Vec<Vec<usize>>,
    upper: Vec<Vec<usize>>,
}

impl SparseLuPattern {
    /// Build the fill pattern for a matrix whose off-diagonal nonzeros in row
    /// `i` are `rows[i]`. The diagonal is always structurally present.
    pub fn new(n: usize, rows: &[Vec<usize>]) -> Self {
        assert_eq!(rows.len(), n);
        let mut lower = Vec::with_capacity(n);
        let mut upper: Vec<Vec<usize>> = Vec::with_capacity(n);
        let mut mark = vec![usize::MAX; n];
        for i in 0..n {
            let mut cols: Vec<usize> = Vec::new();
            let push = |c: usize, cols: &mut Vec<usize>, mark: &mut Vec<usize>| {
                if mark[c] != i {
                    mark[c] = i;
                    cols.push(c);
                }
            };
            push(i, &mut cols, &mut mark);
            for &c in &rows[i] {
                push(c, &mut cols, &mut mark);
            }
            // up-looking elimination: every L entry k pulls in U's row k
            let mut li: Vec<usize> = Vec::new();
            let mut frontier: Vec<usize> = cols.iter().copied().filter(|&c| c < i).collect();
            while let Some(k) = frontier.pop() {
                li.push(k);
                for &j in &upper[k] {
                    if mark[j] != i {
                        mark[j] = i;
                        cols.push(j);
                        if j < i {
                            frontier.push(j);
                        }
                    }
                }
            }
            li.sort_unstable();
            let mut ui: Vec<usize> = cols.into_iter().filter(|&c| c >= i).collect();
            ui.sort_unstable();
            lower.push(li);
            upper.push(ui);
        }
        SparseLuPattern { n, lower, upper }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Number of structural nonzeros in L + U.
    pub fn nnz(&self) -> usize {
        self.lower.iter().map(Vec::len).sum::<usize>() + self.upper.iter().map(Vec::len).sum::<usize>()
    }

    /// Determinant of the matrix with the given row-wise entries.
    ///
    /// `entry(i, visit)` must call `visit(col, value)` for every structural
    /// nonzero of row `i` (diagonal included). Returns `None` when a pivot
    /// collapses below `1e−12` relative to its row, in which case the caller
    /// should fall back to a pivoting factorization.
    pub fn determinant<F>(&self, work: &mut SparseLuWork, entry: F) -> Option<f64>
    where
        F: FnMut(usize, &mut dyn FnMut(usize, f64)),
    {
        let det = self.factor(work, entry);
        work.clear();
        det
    }

    /// Solve `A x = b` in place; same contract as [`Self::determinant`].
    pub fn solve<F>(&self, work: &mut SparseLuWork, entry: F, b: &mut [f64]) -> Option<()>
    where
        F: FnMut(usize, &mut dyn FnMut(usize, f64)),
    {
        assert_eq!(b.len(), self.n);
        if self.factor(work, entry).is_none() {
            work.clear();
            return None;
        }
        for i in 0..self.n {
            let start = work.l_start[i];
            let mut acc = b[i];
            for (off, &k) in self.lower[i].iter().enumerate() {
                acc -= work.l_val[start + off] * b[k];
            }
            b[i] = acc;
        }
        for i in (0..self.n).rev() {
            let start = work.u_start[i];
            let mut acc = b[i];
            for (off, &j) in self.upper[i].iter().enumerate().skip(1) {
                acc -= work.u_val[start + off] * b[j];
            }
            b[i] = acc / work.u_val[start];
        }
        work.clear();
        Some(())
    }

    fn factor<F>(&self, work: &mut SparseLuWork, mut entry: F) -> Option<f64>
    where
        F: FnMut(usize, &mut dyn FnMut(usize, f64)),
    {
        let n = self.n;
        work.resize(n);
        let mut det = 1.0;
        for i in 0..n {
            let mut row_scale = 0.0f64;
            {
                let w = &mut work.w;
                entry(i, &mut |c, v| {
                    w[c] += v;
                });
            }
            for &c in self.upper[i].iter().chain(self.lower[i].iter()) {
                row_scale = row_scale.max(work.w[c].abs());
            }
            work.l_start[i] = work.l_val.len();
            for &k in &self.lower[i] {
                let start = work.u_start[k];
                let pivot = work.u_val[start];
                let lik = work.w[k] / pivot;
                work.w[k] = 0.0;
                work.l_val.push(lik);
                if lik != 0.0 {
                    for (off, &j) in self.upper[k].iter().enumerate().skip(1) {
                        work.w[j] -= lik * work.u_val[start + off];
                    }
                }
            }
            let start = work.u_val.len();
            work.u_start[i] = start;
            for &j in &self.upper[i] {
                work.u_val.push(work.w[j]);
                work.w[j] = 0.0;
            }
            let pivot = work.u_val[start];
            if pivot.abs() <= 1e-12 * row_scale.max(1e-300) {
                return None;
            }
            det *= pivot;
        }
        Some(det)
    }
}

/// Scratch space reused across numeric factorizations.
#[derive(Debug, Default, Clone)]
pub struct SparseLuWork {
    w: Vec<f64>,
    u_start: Vec<usize>,
    u_val: Vec<f64>,
    l_start: Vec<usize>,
    l_val: Vec<f64>,
}

impl SparseLuWork {
    fn resize(&mut self, n: usize) {
        if self.w.len() != n {
            self.w = vec![0.0; n];
            self.u_start = vec![0; n];
            self.l_start = vec![0; n];
        }
        self.u_val.clear();
        self.l_val.clear();
    }

    fn clear(&mut self) {
        self.w.iter_mut().for_each(|v| *v = 0.0);
        self.u_val.clear();
        self.l_val.clear();
    }
}

/// Dense partial-pivoting determinant, used as the fallback path.
pub fn dense_determinant(m: DMatrix<f64>) -> f64 {
    m.lu().determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn shrink_identity_is_noop() {
        let m = DMatrix::<f64>::identity(4, 4);
        let s = shrink_to_pd(&m);
        assert_eq!(s.gamma, Some(0.0));
        assert_eq!(s.matrix, m);
    }

    #[test]
    fn shrink_indefinite_reaches_floor() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let s = shrink_to_pd(&m);
        let threshold = PD_RELATIVE_FLOOR * 2.0 / 2.0;
        let eig = SymmetricEigen::new(s.matrix.clone()).eigenvalues;
        assert!(eig.iter().all(|&v| v >= threshold));
        assert!(s.gamma.unwrap() > 0.0);
    }

    #[test]
    fn shrink_zero_matrix_gives_scaled_identity() {
        let m = DMatrix::<f64>::zeros(3, 3);
        let s = shrink_to_pd(&m);
        assert_eq!(s.matrix, DMatrix::identity(3, 3) * PD_RELATIVE_FLOOR);
    }

    #[test]
    fn shrink_keeps_pd_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let a = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>() - 0.5);
            let m = &a * a.transpose() + DMatrix::identity(5, 5) * 0.1;
            assert_eq!(shrink_to_pd(&m).matrix, m);
        }
    }

    #[test]
    fn repair_floors_negative_eigenvalues() {
        let mut m = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1e-12]);
        let before = repair_psd(&mut m);
        assert!(before < 0.0);
        assert!(min_eigenvalue(&m) >= EIGEN_FLOOR * 0.999);
    }

    #[test]
    fn sparse_lu_matches_dense_on_chain() {
        // I − Γ with a cycle forces fill-in
        let n = 6;
        let mut rows = vec![Vec::new(); n];
        let mut dense = DMatrix::<f64>::identity(n, n);
        let gamma = [0.3, -0.4, 0.2, 0.5, -0.1, 0.25];
        for i in 0..n {
            let j = (i + 1) % n;
            rows[i].push(j);
            dense[(i, j)] = -gamma[i];
        }
        let pat = SparseLuPattern::new(n, &rows);
        let mut work = SparseLuWork::default();
        let det = pat
            .determinant(&mut work, |i, visit| {
                visit(i, 1.0);
                visit((i + 1) % n, -gamma[i]);
            })
            .unwrap();
        let oracle = dense.lu().determinant();
        assert!((det - oracle).abs() < 1e-12 * oracle.abs().max(1.0));
    }

    #[test]
    fn sparse_lu_reports_zero_pivot() {
        // [[1, 1],[1, 1]] is singular without pivoting
        let pat = SparseLuPattern::new(2, &[vec![1], vec![0]]);
        let mut work = SparseLuWork::default();
        let det = pat.determinant(&mut work, |i, visit| {
            visit(i, 1.0);
            visit(1 - i, 1.0);
        });
        assert!(det.is_none());
    }

    #[test]
    fn psd_factor_reconstructs() {
        let z = DMatrix::<f64>::zeros(3, 3);
        assert_eq!(psd_factor(&z).unwrap(), z);
        let v = DVector::from_vec(vec![1.0, 2.0, -1.0]);
        let rank1 = &v * v.transpose();
        let l = psd_factor(&rank1).unwrap();
        assert!((&l * l.transpose() - &rank1).amax() < 1e-12);
    }

    #[test]
    fn sparse_solve_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let n = 12;
            let mut rows = vec![Vec::new(); n];
            let mut dense = DMatrix::<f64>::identity(n, n);
            for i in 0..n {
                for j in 0..n {
                    if i != j && rng.random::<f64>() < 0.2 {
                        rows[i].push(j);
                        dense[(i, j)] = rng.random::<f64>() * 0.6 - 0.3;
                    }
                }
            }
            let pat = SparseLuPattern::new(n, &rows);
            let mut work = SparseLuWork::default();
            let b: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut x = b.clone();
            let entry = |i: usize, visit: &mut dyn FnMut(usize, f64)| {
                visit(i, 1.0);
                for &j in &rows[i] {
                    visit(j, dense[(i, j)]);
                }
            };
            pat.solve(&mut work, entry, &mut x).unwrap();
            let oracle = dense.clone().lu().solve(&DVector::from_vec(b)).unwrap();
            for i in 0..n {
                assert!((x[i] - oracle[i]).abs() < 1e-10);
            }
            let det = pat.determinant(&mut work, entry).unwrap();
            let want = dense.lu().determinant();
            assert!((det - want).abs() < 1e-10 * want.abs());
        }
    }
}
