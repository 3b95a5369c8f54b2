use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Col;

use crate::error::{Error, Result};

/// Relative residual above which a direct solve is reported as ill conditioned.
pub const ILL_CONDITIONED_TOL: f64 = 1e-8;

/// Square sparse system assembled from triplets. Duplicate entries are summed.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    n: usize,
    entries: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    boundary_rows: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct LinearSolution {
    pub x: Vec<f64>,
    pub rel_residual: f64,
    pub ill_conditioned: bool,
}

impl LinearSystem {
    pub fn new(n: usize) -> Self {
        Self { n, entries: Vec::new(), rhs: vec![0.0; n], boundary_rows: vec![false; n] }
    }

    pub fn with_capacity(n: usize, nnz: usize) -> Self {
        let mut s = Self::new(n);
        s.entries.reserve(nnz);
        s
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn add(&mut self, row: usize, col: usize, v: f64) {
        if v != 0.0 {
            self.entries.push((row, col, v));
        }
    }

    /// Identity row fixing unknown `row` to `value`.
    pub fn set_dirichlet(&mut self, row: usize, value: f64) {
        self.entries.push((row, row, 1.0));
        self.rhs[row] = value;
        self.boundary_rows[row] = true;
    }

    pub fn is_boundary_row(&self, row: usize) -> bool {
        self.boundary_rows[row]
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for &(r, c, v) in &self.entries {
            y[r] += v * x[c];
        }
        y
    }

    fn check_rows(&self) -> Result<()> {
        let mut seen = vec![false; self.n];
        for &(r, _, _) in &self.entries {
            seen[r] = true;
        }
        if let Some(r) = seen.iter().position(|s| !s) {
            return Err(Error::SingularSystem(format!("row {r} is empty")));
        }
        Ok(())
    }
}

/// Direct sparse LU solve.
pub fn solve_linear(sys: &LinearSystem) -> Result<LinearSolution> {
    let x = solve_sparse(sys.n, &sys.entries, &sys.rhs)?;
    let ax = sys.matvec(&x);
    let rnorm = ax.iter().zip(&sys.rhs).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let bnorm = sys.rhs.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let rel = if bnorm > 0.0 { rnorm / bnorm } else { rnorm };
    let ill = rel > ILL_CONDITIONED_TOL;
    if ill {
        log::warn!("ILL_CONDITIONED: relative residual {rel:e} after direct solve");
    }
    Ok(LinearSolution { x, rel_residual: rel, ill_conditioned: ill })
}

pub fn solve_sparse(n: usize, entries: &[(usize, usize, f64)], rhs: &[f64]) -> Result<Vec<f64>> {
    let tmp = LinearSystem {
        n,
        entries: entries.to_vec(),
        rhs: rhs.to_vec(),
        boundary_rows: vec![false; n],
    };
    tmp.check_rows()?;
    let trip: Vec<Triplet<usize, usize, f64>> =
        entries.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trip)
        .map_err(|e| Error::SingularSystem(format!("assembly failed: {e:?}")))?;
    let lu = a.sp_lu().map_err(|e| Error::SingularSystem(format!("factorization failed: {e:?}")))?;
    let b = Col::<f64>::from_fn(n, |i| rhs[i]);
    let x = lu.solve(&b);
    let out: Vec<f64> = (0..n).map(|i| x[i]).collect();
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite solution from LU".into()));
    }
    Ok(out)
}

/// Thomas algorithm; `a` is the sub-diagonal (a[0] unused), `c` the super-diagonal.
pub fn tridiag_solve(a: &[f64], b: &[f64], c: &[f64], r: &[f64]) -> Result<Vec<f64>> {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut den = b[0];
    if den == 0.0 {
        return Err(Error::SingularSystem("zero pivot in tridiagonal solve".into()));
    }
    cp[0] = c[0] / den;
    dp[0] = r[0] / den;
    for k in 1..n {
        den = b[k] - a[k] * cp[k - 1];
        if den == 0.0 || !den.is_finite() {
            return Err(Error::SingularSystem("zero pivot in tridiagonal solve".into()));
        }
        cp[k] = if k + 1 < n { c[k] / den } else { 0.0 };
        dp[k] = (r[k] - a[k] * dp[k - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for k in (0..n - 1).rev() {
        x[k] = dp[k] - cp[k] * x[k + 1];
    }
    Ok(x)
}

/// Banded matrix with `kl` sub- and `ku` super-diagonals, LU with partial pivoting.
#[derive(Debug, Clone)]
pub struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major storage of width `2*kl + ku + 1` (extra room for pivoting fill).
    data: Vec<f64>,
}

impl Banded {
    pub fn new(n: usize, kl: usize, ku: usize) -> Self {
        let w = 2 * kl + ku + 1;
        Self { n, kl, ku, data: vec![0.0; n * w] }
    }

    fn width(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn pos(&self, r: usize, c: usize) -> usize {
        // column offset kl shifts so row r covers columns r-kl .. r+kl+ku
        r * self.width() + (c + self.kl - r)
    }

    pub fn add(&mut self, r: usize, c: usize, v: f64) {
        debug_assert!(c + self.kl >= r && c <= r + self.ku, "entry ({r},{c}) outside band");
        let p = self.pos(r, c);
        self.data[p] += v;
    }

    pub fn clear(&mut self) {
        self.data.iter_mut().for_each(|v| *v = 0.0);
    }

    /// Solves in place (destroys the matrix). Returns `None` on a zero pivot.
    pub fn solve(&mut self, rhs: &mut [f64]) -> Option<()> {
        let n = self.n;
        let (kl, ku) = (self.kl, self.ku);
        let upper = kl + ku;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = self.data[self.pos(k, k)].abs();
            for r in k + 1..=last {
                let v = self.data[self.pos(r, k)].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return None;
            }
            let cmax = (k + upper).min(n - 1);
            if piv != k {
                for c in k..=cmax {
                    let (a, b) = (self.pos(k, c), self.pos(piv, c));
                    self.data.swap(a, b);
                }
                rhs.swap(k, piv);
            }
            let d = self.data[self.pos(k, k)];
            for r in k + 1..=last {
                let pr = self.pos(r, k);
                let l = self.data[pr] / d;
                if l == 0.0 {
                    continue;
                }
                self.data[pr] = 0.0;
                for c in k + 1..=cmax {
                    let pk = self.pos(k, c);
                    let prc = self.pos(r, c);
                    self.data[prc] -= l * self.data[pk];
                }
                rhs[r] -= l * rhs[k];
            }
        }
        for k in (0..n).rev() {
            let cmax = (k + upper).min(n - 1);
            let mut s = rhs[k];
            for c in k + 1..=cmax {
                s -= self.data[self.pos(k, c)] * rhs[c];
            }
            rhs[k] = s / self.data[self.pos(k, k)];
        }
        Some(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_lu_solves_poisson_1d() {
        let n = 50;
        let mut s = LinearSystem::new(n);
        s.set_dirichlet(0, 0.0);
        s.set_dirichlet(n - 1, 0.0);
        let h = 1.0 / (n - 1) as f64;
        for i in 1..n - 1 {
            s.add(i, i - 1, -1.0 / (h * h));
            s.add(i, i, 2.0 / (h * h));
            s.add(i, i + 1, -1.0 / (h * h));
            s.rhs[i] = 2.0;
        }
        let sol = solve_linear(&s).unwrap();
        for i in 0..n {
            let x = i as f64 * h;
            assert!((sol.x[i] - x * (1.0 - x)).abs() < 1e-10);
        }
        assert!(!sol.ill_conditioned);
    }

    #[test]
    fn empty_row_is_singular() {
        let mut s = LinearSystem::new(3);
        s.add(0, 0, 1.0);
        s.add(2, 2, 1.0);
        assert!(matches!(solve_linear(&s), Err(Error::SingularSystem(_))));
    }

    #[test]
    fn banded_matches_dense_with_pivoting() {
        let n = 12;
        let mut b = Banded::new(n, 2, 2);
        let mut dense = vec![vec![0.0; n]; n];
        for r in 0..n {
            for c in r.saturating_sub(2)..=(r + 2).min(n - 1) {
                let v = ((r * 7 + c * 3) % 5) as f64 - 2.0 + if r == c { 0.1 } else { 0.0 };
                b.add(r, c, v);
                dense[r][c] = v;
            }
        }
        let xs: Vec<f64> = (0..n).map(|k| (k as f64).sin()).collect();
        let mut rhs: Vec<f64> =
            (0..n).map(|r| (0..n).map(|c| dense[r][c] * xs[c]).sum()).collect();
        b.solve(&mut rhs).unwrap();
        for k in 0..n {
            assert!((rhs[k] - xs[k]).abs() < 1e-9, "{k}: {} vs {}", rhs[k], xs[k]);
        }
    }
}
