//! Dense LU with partial pivoting and bordered (Lagrange-multiplier) systems.

use nalgebra::{DMatrix, DVector, LU, Dyn};

use crate::error::{Error, Result};

/// A factored square matrix, reusable for many right-hand sides.
pub struct LuFactor {
    lu: LU<f64, Dyn, Dyn>,
    pivot_ratio: f64,
}

impl std::fmt::Debug for LuFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LuFactor")
            .field("n", &self.dim())
            .field("pivot_ratio", &self.pivot_ratio)
            .finish()
    }
}

impl LuFactor {
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "LU of a {}x{} matrix",
                a.nrows(),
                a.ncols()
            )));
        }
        let n = a.nrows();
        if n == 0 {
            return Err(Error::DimensionMismatch("empty matrix".into()));
        }
        let lu = a.lu();
        let u = lu.u();
        let diag = u.diagonal();
        let max = diag.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        let min = diag.iter().fold(f64::INFINITY, |m, d| m.min(d.abs()));
        let pivot_ratio = if max > 0.0 { min / max } else { 0.0 };
        if !(pivot_ratio > n as f64 * f64::EPSILON) {
            return Err(Error::Singular { pivot_ratio });
        }
        Ok(Self { lu, pivot_ratio })
    }

    pub fn dim(&self) -> usize {
        self.lu.l().nrows()
    }

    /// Smallest over largest pivot magnitude; a cheap conditioning indicator.
    pub fn pivot_ratio(&self) -> f64 {
        self.pivot_ratio
    }

    pub fn solve(&self, b: &DVector<f64>) -> Result<DVector<f64>> {
        self.lu
            .solve(b)
            .ok_or(Error::Singular { pivot_ratio: self.pivot_ratio })
    }

    pub fn solve_many(&self, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.lu
            .solve(b)
            .ok_or(Error::Singular { pivot_ratio: self.pivot_ratio })
    }
}

/// Solves `A x = b` by LU with partial pivoting.
pub fn lu_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, rhs has {}",
            a.nrows(),
            b.len()
        )));
    }
    LuFactor::new(a.clone())?.solve(b)
}

/// `[[A, B], [C, 0]] [x; m] = [rhs; crhs]` with `B: n x k` multiplier columns and
/// `C: k x n` constraint rows.
#[derive(Debug, Clone)]
pub struct BorderedSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub crhs: DVector<f64>,
}

impl BorderedSystem {
    /// The symmetric bordering `C = B^T`.
    pub fn symmetric(a: DMatrix<f64>, b: DMatrix<f64>, rhs: DVector<f64>, crhs: DVector<f64>) -> Self {
        let c = b.transpose();
        Self { a, b, c, rhs, crhs }
    }

    fn check(&self) -> Result<()> {
        let n = self.a.nrows();
        let k = self.b.ncols();
        let ok = self.a.is_square()
            && self.b.nrows() == n
            && self.c.nrows() == k
            && self.c.ncols() == n
            && self.rhs.len() == n
            && self.crhs.len() == k
            && k <= 6 * 64;
        if ok {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(format!(
                "bordered system: A {}x{}, B {}x{}, C {}x{}, rhs {}, crhs {}",
                self.a.nrows(),
                self.a.ncols(),
                self.b.nrows(),
                self.b.ncols(),
                self.c.nrows(),
                self.c.ncols(),
                self.rhs.len(),
                self.crhs.len()
            )))
        }
    }
}

/// Assembles the augmented matrix of a bordered system.
pub fn augment(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let k = b.ncols();
    let mut m = DMatrix::zeros(n + k, n + k);
    m.view_mut((0, 0), (n, n)).copy_from(a);
    m.view_mut((0, n), (n, k)).copy_from(b);
    m.view_mut((n, 0), (k, n)).copy_from(c);
    m
}

/// Returns `(x, multipliers)`.
pub fn solve_bordered(sys: &BorderedSystem) -> Result<(DVector<f64>, DVector<f64>)> {
    sys.check()?;
    let n = sys.a.nrows();
    let k = sys.b.ncols();
    let factor = LuFactor::new(augment(&sys.a, &sys.b, &sys.c))?;
    let mut rhs = DVector::zeros(n + k);
    rhs.rows_mut(0, n).copy_from(&sys.rhs);
    rhs.rows_mut(n, k).copy_from(&sys.crhs);
    let sol = factor.solve(&rhs)?;
    Ok((sol.rows(0, n).into_owned(), sol.rows(n, k).into_owned()))
}

/// A factored bordered matrix reused across right-hand sides.
#[derive(Debug)]
pub struct BorderedFactor {
    lu: LuFactor,
    n: usize,
    k: usize,
}

impl BorderedFactor {
    pub fn new(a: &DMatrix<f64>, b: &DMatrix<f64>, c: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = (a.nrows(), b.ncols());
        if !a.is_square() || b.nrows() != n || c.nrows() != k || c.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "bordered factor: A {}x{}, B {}x{}, C {}x{}",
                a.nrows(),
                a.ncols(),
                b.nrows(),
                b.ncols(),
                c.nrows(),
                c.ncols()
            )));
        }
        Ok(Self {
            lu: LuFactor::new(augment(a, b, c))?,
            n,
            k,
        })
    }

    pub fn pivot_ratio(&self) -> f64 {
        self.lu.pivot_ratio()
    }

    pub fn solve(&self, rhs: &DVector<f64>, crhs: &DVector<f64>) -> Result<(DVector<f64>, DVector<f64>)> {
        if rhs.len() != self.n || crhs.len() != self.k {
            return Err(Error::DimensionMismatch(format!(
                "rhs {} / crhs {} for bordered size {} + {}",
                rhs.len(),
                crhs.len(),
                self.n,
                self.k
            )));
        }
        let mut full = DVector::zeros(self.n + self.k);
        full.rows_mut(0, self.n).copy_from(rhs);
        full.rows_mut(self.n, self.k).copy_from(crhs);
        let sol = self.lu.solve(&full)?;
        Ok((sol.rows(0, self.n).into_owned(), sol.rows(self.n, self.k).into_owned()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn examples() {
        let b = DVector::from_vec(vec![3.0, -1.0, 2.0]);
        assert_eq!(lu_solve(&DMatrix::identity(3, 3), &b).unwrap(), b);
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let x = lu_solve(&a, &DVector::from_vec(vec![2.0, 8.0])).unwrap();
        assert_relative_eq!(x, DVector::from_vec(vec![1.0, 2.0]));
        assert!(matches!(
            lu_solve(&DMatrix::zeros(3, 3), &b),
            Err(Error::Singular { .. })
        ));
        assert!(lu_solve(&DMatrix::identity(2, 2), &b).is_err());
    }

    #[test]
    fn bordered_examples() {
        // k = 0 reduces to a plain solve.
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let rhs = DVector::from_vec(vec![1.0, 2.0]);
        let sys = BorderedSystem::symmetric(a.clone(), DMatrix::zeros(2, 0), rhs.clone(), DVector::zeros(0));
        let (x, m) = solve_bordered(&sys).unwrap();
        assert_relative_eq!(x, lu_solve(&a, &rhs).unwrap(), epsilon = 1e-14);
        assert_eq!(m.len(), 0);

        // x + m e1 = e1 with x_1 = 0  =>  m = 1, x = 0.
        let e1 = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let sys = BorderedSystem::symmetric(
            DMatrix::identity(2, 2),
            e1,
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::zeros(1),
        );
        let (x, m) = solve_bordered(&sys).unwrap();
        assert_relative_eq!(x, DVector::zeros(2), epsilon = 1e-15);
        assert_relative_eq!(m[0], 1.0, epsilon = 1e-15);

        let bad = BorderedSystem::symmetric(
            DMatrix::identity(2, 2),
            DMatrix::zeros(3, 1),
            DVector::zeros(2),
            DVector::zeros(1),
        );
        assert!(matches!(solve_bordered(&bad), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn random_systems() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100;
        let mut a = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        for i in 0..n {
            a[(i, i)] += 10.0;
        }
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let x = lu_solve(&a, &b).unwrap();
        let backward = (&a * &x - &b).norm() / (a.norm() * x.norm());
        assert!(backward <= 1e-12, "{backward:e}");

        let k = 4;
        let bb = DMatrix::from_fn(n, k, |_, _| rng.random_range(-1.0..1.0));
        let crhs = DVector::from_fn(k, |_, _| rng.random_range(-1.0..1.0));
        let sys = BorderedSystem::symmetric(a.clone(), bb.clone(), b.clone(), crhs.clone());
        let (x, m) = solve_bordered(&sys).unwrap();
        assert!((bb.transpose() * &x - &crhs).norm() <= 1e-10 * (1.0 + crhs.norm()));
        assert!((&a * &x + &bb * &m - &b).norm() <= 1e-10 * b.norm());
    }

    #[test]
    fn ill_conditioned_residual() {
        // Graded diagonal with cond ~ 1e8 plus a random perturbation.
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 60;
        let a = DMatrix::from_fn(n, n, |i, j| {
            let d = if i == j { 10f64.powf(-8.0 * i as f64 / (n - 1) as f64) } else { 0.0 };
            d + 1e-10 * rng.random_range(-1.0..1.0)
        });
        let b = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
        let x = lu_solve(&a, &b).unwrap();
        assert!((&a * &x - &b).norm() / b.norm() <= 1e-10);
    }
}
