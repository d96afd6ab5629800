//! Small dense/tridiagonal kernels shared by the analysis modules.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Angle between the lines spanned by `a` and `b`, in `[0, π/2]`.
pub fn line_angle(a: &[f64], b: &[f64]) -> f64 {
    let na = norm2(a);
    let nb = norm2(b);
    if na == 0.0 || nb == 0.0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let c = (dot(a, b).abs() / (na * nb)).min(1.0);
    // acos loses precision near 1; use the sine of the residual instead
    let mut r2 = 0.0;
    let s = dot(a, b).signum();
    for (x, y) in a.iter().zip(b) {
        let d = x / na - s * y / nb;
        r2 += d * d;
    }
    let half = 0.5 * r2.sqrt();
    if c > 0.9 {
        2.0 * half.min(1.0).asin()
    } else {
        c.acos()
    }
}

/// Tridiagonal matrix stored by diagonals: `sub[i] = A[i+1][i]`, `sup[i] = A[i][i+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiag {
    pub sub: Vec<f64>,
    pub diag: Vec<f64>,
    pub sup: Vec<f64>,
}

impl Tridiag {
    pub fn new(sub: Vec<f64>, diag: Vec<f64>, sup: Vec<f64>) -> Self {
        let n = diag.len();
        assert!(n >= 1 && sub.len() + 1 == n && sup.len() + 1 == n);
        Self { sub, diag, sup }
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.sub[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.sup[i] * x[i + 1];
            }
            y[i] = s;
        }
        y
    }

    pub fn mul_t(&self, x: &[f64]) -> Vec<f64> {
        self.transpose().mul(x)
    }

    pub fn transpose(&self) -> Tridiag {
        Tridiag {
            sub: self.sup.clone(),
            diag: self.diag.clone(),
            sup: self.sub.clone(),
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = self.diag[i];
            if i + 1 < n {
                m[(i + 1, i)] = self.sub[i];
                m[(i, i + 1)] = self.sup[i];
            }
        }
        m
    }

    pub fn lu(&self) -> Result<TridiagLu> {
        TridiagLu::factor(self)
    }
}

/// LU factorisation with partial pivoting of a tridiagonal matrix, in the
/// layout of LAPACK `dgttrf` (second superdiagonal fill-in in `du2`).
#[derive(Debug, Clone)]
pub struct TridiagLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    pub fn factor(a: &Tridiag) -> Result<Self> {
        let n = a.dim();
        let mut dl = a.sub.clone();
        let mut d = a.diag.clone();
        let mut du = a.sup.clone();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut swapped = vec![false; n.saturating_sub(1)];
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] == 0.0 {
                    return Err(Error::Singular(format!("zero pivot at row {i}")));
                }
                let fact = dl[i] / d[i];
                dl[i] = fact;
                d[i + 1] -= fact * du[i];
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] = -fact * du[i + 1];
                }
                swapped[i] = true;
            }
        }
        if d[n - 1] == 0.0 || !d.iter().all(|x| x.is_finite()) {
            return Err(Error::Singular("zero or non-finite pivot".into()));
        }
        Ok(Self {
            dl,
            d,
            du,
            du2,
            swapped,
        })
    }

    pub fn dim(&self) -> usize {
        self.d.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = b.to_vec();
        for i in 0..n - 1 {
            if !self.swapped[i] {
                x[i + 1] -= self.dl[i] * x[i];
            } else {
                let temp = x[i];
                x[i] = x[i + 1];
                x[i + 1] = temp - self.dl[i] * x[i];
            }
        }
        x[n - 1] /= self.d[n - 1];
        if n > 1 {
            x[n - 2] = (x[n - 2] - self.du[n - 2] * x[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            x[i] = (x[i] - self.du[i] * x[i + 1] - self.du2[i] * x[i + 2]) / self.d[i];
        }
        x
    }

    /// Solves `Aᵀ x = b`.
    pub fn solve_t(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut x = b.to_vec();
        x[0] /= self.d[0];
        if n > 1 {
            x[1] = (x[1] - self.du[0] * x[0]) / self.d[1];
        }
        for i in 2..n {
            x[i] = (x[i] - self.du[i - 1] * x[i - 1] - self.du2[i - 2] * x[i - 2]) / self.d[i];
        }
        for i in (0..n - 1).rev() {
            if !self.swapped[i] {
                x[i] -= self.dl[i] * x[i + 1];
            } else {
                let temp = x[i + 1];
                x[i + 1] = x[i] - self.dl[i] * temp;
                x[i] = temp;
            }
        }
        x
    }
}

/// Square operator with cheap products and solves, used by the inverse
/// subspace iteration.
pub trait SquareOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64]) -> Vec<f64>;
    fn solve(&self, b: &[f64]) -> Vec<f64>;
    fn solve_t(&self, b: &[f64]) -> Vec<f64>;
}

pub struct TridiagOperator {
    pub matrix: Tridiag,
    lu: TridiagLu,
}

impl TridiagOperator {
    pub fn new(matrix: Tridiag) -> Result<Self> {
        let lu = matrix.lu()?;
        Ok(Self { matrix, lu })
    }
}

impl SquareOperator for TridiagOperator {
    fn dim(&self) -> usize {
        self.matrix.dim()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul(x)
    }
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.lu.solve(b)
    }
    fn solve_t(&self, b: &[f64]) -> Vec<f64> {
        self.lu.solve_t(b)
    }
}

/// Bordered matrix `[[A, c], [dᵀ, 0]]` with tridiagonal `A`, solved through
/// the scalar Schur complement `dᵀ A⁻¹ c`.
#[derive(Debug, Clone)]
pub struct BorderedTridiag {
    pub core: Tridiag,
    pub column: Vec<f64>,
    pub row: Vec<f64>,
    lu: TridiagLu,
    z: Vec<f64>,
    schur: f64,
    zt: Vec<f64>,
    schur_t: f64,
}

impl BorderedTridiag {
    pub fn new(core: Tridiag, column: Vec<f64>, row: Vec<f64>) -> Result<Self> {
        let n = core.dim();
        if column.len() != n || row.len() != n {
            return Err(Error::DimensionMismatch("border length".into()));
        }
        let lu = core.lu()?;
        let z = lu.solve(&column);
        let schur = dot(&row, &z);
        let zt = lu.solve_t(&row);
        let schur_t = dot(&column, &zt);
        if schur == 0.0 || !schur.is_finite() || schur_t == 0.0 || !schur_t.is_finite() {
            return Err(Error::Singular("bordered Schur complement vanishes".into()));
        }
        Ok(Self {
            core,
            column,
            row,
            lu,
            z,
            schur,
            zt,
            schur_t,
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.core.dim();
        let mut m = DMatrix::zeros(n + 1, n + 1);
        m.view_mut((0, 0), (n, n)).copy_from(&self.core.to_dense());
        for i in 0..n {
            m[(i, n)] = self.column[i];
            m[(n, i)] = self.row[i];
        }
        m
    }
}

impl SquareOperator for BorderedTridiag {
    fn dim(&self) -> usize {
        self.core.dim() + 1
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let n = self.core.dim();
        let mut y = self.core.mul(&x[..n]);
        for i in 0..n {
            y[i] += self.column[i] * x[n];
        }
        y.push(dot(&self.row, &x[..n]));
        y
    }
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.core.dim();
        let y = self.lu.solve(&b[..n]);
        let mu = (dot(&self.row, &y) - b[n]) / self.schur;
        let mut x: Vec<f64> = y.iter().zip(&self.z).map(|(yi, zi)| yi - mu * zi).collect();
        x.push(mu);
        x
    }
    fn solve_t(&self, b: &[f64]) -> Vec<f64> {
        let n = self.core.dim();
        let y = self.lu.solve_t(&b[..n]);
        let mu = (dot(&self.column, &y) - b[n]) / self.schur_t;
        let mut x: Vec<f64> = y
            .iter()
            .zip(&self.zt)
            .map(|(yi, zi)| yi - mu * zi)
            .collect();
        x.push(mu);
        x
    }
}

#[derive(Debug, Clone)]
pub struct SingularTriplet {
    pub value: f64,
    /// Right singular vector (unit Euclidean norm).
    pub right: Vec<f64>,
    /// Left singular vector (unit Euclidean norm).
    pub left: Vec<f64>,
}

fn orthonormalize(cols: &mut [Vec<f64>]) {
    for _pass in 0..2 {
        for j in 0..cols.len() {
            for i in 0..j {
                let (head, tail) = cols.split_at_mut(j);
                let p = dot(&head[i], &tail[0]);
                for (t, h) in tail[0].iter_mut().zip(&head[i]) {
                    *t -= p * h;
                }
            }
            let nrm = norm2(&cols[j]);
            if nrm > 0.0 {
                cols[j].iter_mut().for_each(|x| *x /= nrm);
            }
        }
    }
}

/// The `k` smallest singular triplets of `op`, by block inverse iteration
/// on `(AᵀA)⁻¹` followed by a Rayleigh–Ritz step on `A Y`.
/// Deterministic: the start block comes from a fixed-seed generator.
pub fn smallest_singular<O: SquareOperator>(op: &O, k: usize) -> Result<Vec<SingularTriplet>> {
    let n = op.dim();
    if k == 0 || k > n {
        return Err(Error::DimensionMismatch(format!(
            "cannot take {k} triplets of dim {n}"
        )));
    }
    let m = (k + 2).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut block: Vec<Vec<f64>> = (0..m)
        .map(|_| (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    orthonormalize(&mut block);
    let mut prev = vec![f64::INFINITY; k];
    let mut result = Vec::new();
    for it in 0..500 {
        for col in block.iter_mut() {
            let y = op.solve_t(col);
            *col = op.solve(&y);
        }
        if block.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Singular("inverse iteration diverged".into()));
        }
        orthonormalize(&mut block);
        // Rayleigh–Ritz: thin SVD of A·Y
        let mut ay = DMatrix::zeros(n, m);
        for (j, col) in block.iter().enumerate() {
            let v = op.apply(col);
            ay.set_column(j, &DVector::from_vec(v));
        }
        let svd = ay.svd(true, true);
        let u = svd.u.as_ref().unwrap();
        let vt = svd.v_t.as_ref().unwrap();
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]));
        let mut rotated = Vec::with_capacity(m);
        for &c in &order {
            let mut x = vec![0.0; n];
            for (j, col) in block.iter().enumerate() {
                let coef = vt[(c, j)];
                for (xi, bi) in x.iter_mut().zip(col) {
                    *xi += coef * bi;
                }
            }
            rotated.push(x);
        }
        let values: Vec<f64> = order.iter().map(|&c| svd.singular_values[c]).collect();
        let converged =
            (0..k).all(|i| (values[i] - prev[i]).abs() <= 1e-13 * values[i].max(1e-300));
        prev.copy_from_slice(&values[..k]);
        result = order
            .iter()
            .take(k)
            .enumerate()
            .map(|(i, &c)| SingularTriplet {
                value: values[i],
                right: rotated[i].clone(),
                left: u.column(c).iter().copied().collect(),
            })
            .collect();
        block = rotated;
        if converged && it > 2 {
            break;
        }
    }
    Ok(result)
}

/// Dense reference route for small problems.
pub fn smallest_singular_dense(a: &DMatrix<f64>, k: usize) -> Vec<SingularTriplet> {
    let svd = a.clone().svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&x, &y| svd.singular_values[x].total_cmp(&svd.singular_values[y]));
    order
        .into_iter()
        .take(k)
        .map(|c| SingularTriplet {
            value: svd.singular_values[c],
            right: vt.row(c).iter().copied().collect(),
            left: u.column(c).iter().copied().collect(),
        })
        .collect()
}

/// Least-squares slope of `y` against `x`.
pub fn fit_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, prop_assume, proptest};

    fn random_tridiag(n: usize, seed: u64) -> Tridiag {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut g = || rng.gen_range(-1.0..1.0);
        Tridiag::new(
            (0..n - 1).map(|_| g()).collect(),
            (0..n).map(|_| g()).collect(),
            (0..n - 1).map(|_| g()).collect(),
        )
    }

    #[test]
    fn pivoting_handles_zero_diagonal() {
        let a = Tridiag::new(vec![1.0, 1.0], vec![0.0, 0.0, 1.0], vec![1.0, 1.0]);
        let lu = a.lu().unwrap();
        let x = lu.solve(&[1.0, 2.0, 3.0]);
        let r = a.mul(&x);
        for (ri, bi) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((ri - bi).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Tridiag::new(vec![1.0], vec![1.0, 1.0], vec![1.0]);
        assert!(a.lu().is_err());
    }

    #[test]
    fn smallest_triplets_match_dense_svd() {
        let a = random_tridiag(40, 3);
        let op = TridiagOperator::new(a.clone()).unwrap();
        let it = smallest_singular(&op, 2).unwrap();
        let dense = smallest_singular_dense(&a.to_dense(), 2);
        for (x, y) in it.iter().zip(&dense) {
            assert!((x.value - y.value).abs() < 1e-10 * y.value.max(1e-3));
            assert!(line_angle(&x.right, &y.right) < 1e-6);
            assert!(line_angle(&x.left, &y.left) < 1e-6);
        }
    }

    #[test]
    fn bordered_matches_dense() {
        let a = random_tridiag(12, 9);
        let c: Vec<f64> = (0..12).map(|i| (i as f64 * 0.3).sin()).collect();
        let d: Vec<f64> = (0..12).map(|i| (i as f64 * 0.7).cos()).collect();
        let b = BorderedTridiag::new(a, c, d).unwrap();
        let dense = b.to_dense();
        let rhs: Vec<f64> = (0..13).map(|i| i as f64 - 4.0).collect();
        let x = b.solve(&rhs);
        let r = &dense * DVector::from_vec(x.clone());
        for i in 0..13 {
            assert!((r[i] - rhs[i]).abs() < 1e-9);
        }
        let xt = b.solve_t(&rhs);
        let rt = dense.transpose() * DVector::from_vec(xt);
        for i in 0..13 {
            assert!((rt[i] - rhs[i]).abs() < 1e-9);
        }
        let ax = b.apply(&x);
        for i in 0..13 {
            assert!((ax[i] - rhs[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn angle_of_parallel_and_orthogonal() {
        assert_eq!(line_angle(&[1.0, 0.0], &[-2.0, 0.0]), 0.0);
        assert!((line_angle(&[1.0, 0.0], &[0.0, 3.0]) - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let a = [1.0, 1e-9];
        assert!((line_angle(&a, &[1.0, 0.0]) - 1e-9).abs() < 1e-20);
    }

    #[test]
    fn slope_of_line() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 3.0, 5.0];
        assert!((fit_slope(&x, &y) - 2.0).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn lu_solves_random_systems(n in 2usize..30, seed in 0u64..1000) {
            let a = random_tridiag(n, seed);
            let lu = match a.lu() { Ok(lu) => lu, Err(_) => return Ok(()) };
            let b: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.5).collect();
            let dense = a.to_dense();
            let cond = {
                let s = dense.clone().svd(false, false).singular_values;
                s.max() / s.min()
            };
            prop_assume!(cond < 1e8);
            let x = lu.solve(&b);
            let r = a.mul(&x);
            let xt = lu.solve_t(&b);
            let rt = a.mul_t(&xt);
            for i in 0..n {
                prop_assert!((r[i] - b[i]).abs() < 1e-12 * cond);
                prop_assert!((rt[i] - b[i]).abs() < 1e-12 * cond);
            }
        }
    }
}
