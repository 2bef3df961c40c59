//! Dense numerical kernels: spectral radius, linear solves, assignment,
//! scalar root finding, simplex projection and the inverse Gaussian tail.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Row-major dense matrix of finite reals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Dimension("matrix must have positive dimensions".into()));
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries given for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `I - self`, for square matrices.
    pub fn identity_minus(&self) -> Matrix {
        let mut m = self.clone();
        for v in &mut m.data {
            *v = -*v;
        }
        for i in 0..self.rows.min(self.cols) {
            m[(i, i)] += 1.0;
        }
        m
    }

    fn check_finite(&self) -> Result<()> {
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("matrix"));
        }
        Ok(())
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

const POWER_ITER_MAX: usize = 10_000;

/// Spectral radius of a square non-negative matrix.
///
/// Runs power iteration on `m + I` and brackets the Perron root with the
/// Collatz-Wielandt bounds; if the bracket does not close within 10,000
/// steps the largest eigenvalue modulus of a dense decomposition is used.
pub fn spectral_radius(m: &Matrix, tol: f64) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension(format!("{}x{} is not square", m.rows, m.cols)));
    }
    m.check_finite()?;
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    if m.data.iter().any(|&v| v < 0.0) {
        return Err(invalid("spectral_radius expects a non-negative matrix"));
    }
    let n = m.rows;
    if m.data.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let mut x = vec![1.0; n];
    for _ in 0..POWER_ITER_MAX {
        let mut y = m.mul_vec(&x);
        for (yi, xi) in y.iter_mut().zip(&x) {
            *yi += xi;
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (yi, xi) in y.iter().zip(&x) {
            let r = yi / xi;
            lo = lo.min(r);
            hi = hi.max(r);
        }
        if hi - lo <= tol {
            return Ok(0.5 * (lo + hi) - 1.0);
        }
        let scale = y.iter().cloned().fold(0.0, f64::max);
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / scale;
        }
        if x.iter().any(|&v| v < 1e-250) {
            break;
        }
    }
    Ok(dense_spectral_radius(m))
}

fn dense_spectral_radius(m: &Matrix) -> f64 {
    let dm = nalgebra::DMatrix::from_row_slice(m.rows, m.cols, &m.data);
    dm.complex_eigenvalues()
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// A pivot smaller than `1e-12` times the largest magnitude of its original
/// row is reported as singular. One step of iterative refinement is applied.
pub fn solve_linear(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::Dimension("coefficient matrix must be square".into()));
    }
    if b.len() != a.rows {
        return Err(Error::Dimension(format!("rhs has {} entries, expected {}", b.len(), a.rows)));
    }
    a.check_finite()?;
    if b.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("right-hand side"));
    }
    let lu = Lu::factor(a)?;
    let mut x = lu.solve(b);
    let ax = a.mul_vec(&x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    let dx = lu.solve(&r);
    for (xi, di) in x.iter_mut().zip(&dx) {
        *xi += di;
    }
    Ok(x)
}

struct Lu {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl Lu {
    fn factor(a: &Matrix) -> Result<Self> {
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut scale: Vec<f64> = (0..n)
            .map(|i| a.row(i).iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect();
        let mut perm: Vec<usize> = (0..n).collect();
        for col in 0..n {
            let mut piv = col;
            let mut best = lu[col * n + col].abs();
            for r in col + 1..n {
                let v = lu[r * n + col].abs();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best <= 1e-12 * scale[piv] || best == 0.0 {
                return Err(Error::Singular { col, pivot: best });
            }
            if piv != col {
                for j in 0..n {
                    lu.swap(col * n + j, piv * n + j);
                }
                perm.swap(col, piv);
                scale.swap(col, piv);
            }
            let d = lu[col * n + col];
            for r in col + 1..n {
                let f = lu[r * n + col] / d;
                lu[r * n + col] = f;
                if f != 0.0 {
                    for j in col + 1..n {
                        lu[r * n + j] -= f * lu[col * n + j];
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            for j in 0..i {
                y[i] -= self.lu[i * n + j] * y[j];
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                y[i] -= self.lu[i * n + j] * y[j];
            }
            y[i] /= self.lu[i * n + i];
        }
        y
    }
}

/// Result of a minimum-cost assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    /// `tasks[a]` is the task matched to agent `a`.
    pub tasks: Vec<usize>,
    pub cost: f64,
}

/// Minimum-cost assignment of every agent (row) to a distinct task (column).
///
/// Among all optimal assignments the lexicographically smallest task vector is
/// returned.
pub fn hungarian_min_assign(cost: &Matrix) -> Result<Assignment> {
    cost.check_finite()?;
    if cost.rows > cost.cols {
        return Err(invalid(format!(
            "{} agents exceed {} tasks",
            cost.rows, cost.cols
        )));
    }
    if cost.data.iter().any(|&v| v < 0.0) {
        return Err(invalid("assignment weights must be non-negative"));
    }
    let n = cost.rows;
    let opt = hungarian_core(cost, &[], &[]).1;
    let tol = 1e-10 * (1.0 + opt.abs());
    let mut fixed_agents: Vec<usize> = Vec::with_capacity(n);
    let mut fixed_tasks: Vec<usize> = Vec::with_capacity(n);
    let mut fixed_cost = 0.0;
    for agent in 0..n {
        let incumbent = hungarian_core(cost, &fixed_agents, &fixed_tasks).0[agent];
        let mut chosen = incumbent;
        for task in 0..incumbent {
            if fixed_tasks.contains(&task) {
                continue;
            }
            fixed_agents.push(agent);
            fixed_tasks.push(task);
            let rest = hungarian_core(cost, &fixed_agents, &fixed_tasks).1;
            fixed_agents.pop();
            fixed_tasks.pop();
            if fixed_cost + cost[(agent, task)] + rest <= opt + tol {
                chosen = task;
                break;
            }
        }
        fixed_agents.push(agent);
        fixed_tasks.push(chosen);
        fixed_cost += cost[(agent, chosen)];
    }
    Ok(Assignment { tasks: fixed_tasks, cost: fixed_cost })
}

/// Shortest-augmenting-path Hungarian method on the rows and columns not in
/// the excluded lists. Returns the task of every free agent (excluded agents
/// keep `usize::MAX`) and the optimal cost of the reduced problem.
fn hungarian_core(cost: &Matrix, skip_agents: &[usize], skip_tasks: &[usize]) -> (Vec<usize>, f64) {
    let agents: Vec<usize> = (0..cost.rows).filter(|a| !skip_agents.contains(a)).collect();
    let tasks: Vec<usize> = (0..cost.cols).filter(|t| !skip_tasks.contains(t)).collect();
    let n = agents.len();
    let m = tasks.len();
    let mut out = vec![usize::MAX; cost.rows];
    if n == 0 {
        return (out, 0.0);
    }
    let c = |i: usize, j: usize| cost[(agents[i - 1], tasks[j - 1])];
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; m + 1];
    let mut p = vec![0usize; m + 1];
    let mut way = vec![0usize; m + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; m + 1];
        let mut used = vec![false; m + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=m {
                if !used[j] {
                    let cur = c(i0, j) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=m {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut total = 0.0;
    for j in 1..=m {
        if p[j] != 0 {
            out[agents[p[j] - 1]] = tasks[j - 1];
            total += c(p[j], j);
        }
    }
    (out, total)
}

/// Gaussian tail probability `Q(x) = P(Z > x)`.
pub fn gaussian_q(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(x / std::f64::consts::SQRT_2)
}

/// Inverse of the Gaussian tail function on `(0, 0.5)`.
pub fn inverse_q(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 0.5) {
        return Err(invalid(format!("inverse_q needs 0 < p < 0.5, got {p}")));
    }
    let (mut lo, mut hi) = (0.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if gaussian_q(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-13 {
            break;
        }
    }
    let mut x = 0.5 * (lo + hi);
    for _ in 0..3 {
        let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if pdf <= 0.0 {
            break;
        }
        let step = (gaussian_q(x) - p) / pdf;
        if !step.is_finite() || step.abs() > hi - lo + 1e-12 {
            break;
        }
        x += step;
    }
    Ok(x)
}

/// Euclidean projection onto `{y : y >= 0, sum(y) <= cap}`.
pub fn project_capped_simplex(x: &[f64], cap: f64) -> Result<Vec<f64>> {
    if !(cap >= 0.0) {
        return Err(invalid(format!("capacity must be non-negative, got {cap}")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("projection input"));
    }
    let clamped: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    if clamped.iter().sum::<f64>() <= cap {
        return Ok(clamped);
    }
    let mut sorted = clamped.clone();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut acc = 0.0;
    let mut theta = 0.0;
    for (k, &v) in sorted.iter().enumerate() {
        acc += v;
        let t = (acc - cap) / (k + 1) as f64;
        if k + 1 == sorted.len() || sorted[k + 1] <= t {
            theta = t;
            break;
        }
    }
    Ok(clamped.iter().map(|&v| (v - theta).max(0.0)).collect())
}

/// Bisection for a root of a monotone function on `[lo, hi]`.
pub fn bisect_root<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    if !(lo <= hi) || !(tol > 0.0) {
        return Err(invalid("bisect_root needs lo <= hi and tol > 0"));
    }
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NoSignChange { lo, hi });
    }
    let rising = fb > fa;
    for _ in 0..2000 {
        let mid = 0.5 * (a + b);
        let fm = f(mid);
        if fm.abs() <= tol || b - a <= tol {
            return Ok(mid);
        }
        if (fm > 0.0) == rising {
            b = mid;
        } else {
            a = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Illinois regula falsi on a bracket whose end values `fa`, `fb` have
/// opposite signs. Stops when the bracket is narrower than `xtol` or a zero
/// is hit.
pub fn illinois_root<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut fa: f64, mut b: f64, mut fb: f64, xtol: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut side = 0i8;
    for _ in 0..200 {
        if (b - a).abs() <= xtol {
            break;
        }
        let mut c = (a * fb - b * fa) / (fb - fa);
        if !c.is_finite() || c <= a.min(b) || c >= a.max(b) {
            c = 0.5 * (a + b);
        }
        let fc = f(c);
        if fc == 0.0 {
            return c;
        }
        if fc.signum() == fb.signum() {
            b = c;
            fb = fc;
            if side == -1 {
                fa *= 0.5;
            }
            side = -1;
        } else {
            a = c;
            fa = fc;
            if side == 1 {
                fb *= 0.5;
            }
            side = 1;
        }
    }
    if fa.abs() < fb.abs() {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn radius_of_small_matrices() {
        let m = Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        assert_abs_diff_eq!(spectral_radius(&m, 1e-12).unwrap(), 0.5, epsilon = 1e-10);
        let z = Matrix::from_rows(&[vec![0.0]]).unwrap();
        assert_eq!(spectral_radius(&z, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn radius_rejects_bad_input() {
        let m = Matrix::new(1, 2, vec![1.0, 2.0]).unwrap();
        assert!(matches!(spectral_radius(&m, 1e-9), Err(Error::Dimension(_))));
        assert!(Matrix::new(1, 1, vec![f64::NAN]).is_err());
    }

    #[test]
    fn reducible_matrix_falls_back() {
        // Upper triangular: eigenvalues are the diagonal.
        let m = Matrix::from_rows(&[
            vec![0.3, 1.0, 0.0],
            vec![0.0, 0.7, 1.0],
            vec![0.0, 0.0, 0.7],
        ])
        .unwrap();
        assert_abs_diff_eq!(spectral_radius(&m, 1e-10).unwrap(), 0.7, epsilon = 1e-6);
    }

    #[test]
    fn solves_small_systems() {
        let gh = Matrix::from_rows(&[vec![0.0, 0.5], vec![0.5, 0.0]]).unwrap();
        let x = solve_linear(&gh.identity_minus(), &[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(x[0], 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(x[1], 2.0, epsilon = 1e-12);
        let x = solve_linear(&Matrix::identity(3), &[1.5, -2.0, 7.0]).unwrap();
        assert_eq!(x, vec![1.5, -2.0, 7.0]);
        let x = solve_linear(&Matrix::from_rows(&[vec![2.0]]).unwrap(), &[6.0]).unwrap();
        assert_abs_diff_eq!(x[0], 3.0, epsilon = 1e-15);
    }

    #[test]
    fn singular_is_reported() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(solve_linear(&a, &[1.0, 1.0]), Err(Error::Singular { .. })));
    }

    #[test]
    fn hungarian_examples() {
        let a = hungarian_min_assign(&Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap()).unwrap();
        assert_eq!(a.tasks, vec![0, 1]);
        assert_eq!(a.cost, 2.0);
        let a = hungarian_min_assign(&Matrix::from_rows(&[vec![4.0, 1.0], vec![2.0, 3.0]]).unwrap()).unwrap();
        assert_eq!(a.tasks, vec![1, 0]);
        assert_eq!(a.cost, 3.0);
    }

    #[test]
    fn hungarian_ties_are_lexicographic() {
        let all_equal = Matrix::new(3, 4, vec![1.0; 12]).unwrap();
        assert_eq!(hungarian_min_assign(&all_equal).unwrap().tasks, vec![0, 1, 2]);
        let m = Matrix::from_rows(&[vec![5.0, 1.0, 1.0], vec![1.0, 1.0, 5.0]]).unwrap();
        assert_eq!(hungarian_min_assign(&m).unwrap().tasks, vec![1, 0]);
    }

    #[test]
    fn hungarian_rejects_more_agents() {
        let m = Matrix::new(3, 2, vec![0.0; 6]).unwrap();
        assert!(hungarian_min_assign(&m).is_err());
    }

    #[test]
    fn inverse_q_values() {
        assert_abs_diff_eq!(inverse_q(1e-3).unwrap(), 3.0902, epsilon = 1e-4);
        assert_abs_diff_eq!(inverse_q(0.002).unwrap(), 2.8782, epsilon = 1e-4);
        assert!(inverse_q(0.5 - 1e-12).unwrap().abs() < 1e-9);
        assert!(inverse_q(0.5).is_err());
        assert!(inverse_q(0.0).is_err());
    }

    #[test]
    fn projection_examples() {
        assert_eq!(project_capped_simplex(&[1.0, 1.0], 4.0).unwrap(), vec![1.0, 1.0]);
        assert_eq!(project_capped_simplex(&[3.0, 1.0], 2.0).unwrap(), vec![2.0, 0.0]);
        assert_eq!(project_capped_simplex(&[-1.0, 1.0], 5.0).unwrap(), vec![0.0, 1.0]);
        assert!(project_capped_simplex(&[1.0], -1.0).is_err());
    }

    #[test]
    fn bisection_examples() {
        assert_abs_diff_eq!(bisect_root(|x| x - 1.0, 0.0, 2.0, 1e-12).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(
            bisect_root(|x| x * x - 2.0, 0.0, 2.0, 1e-10).unwrap(),
            1.41421356,
            epsilon = 1e-8
        );
        assert_abs_diff_eq!(bisect_root(|x| x.log2() - 1.0, 1.0, 4.0, 1e-12).unwrap(), 2.0, epsilon = 1e-10);
        assert!(matches!(bisect_root(|x| x + 1.0, 0.0, 1.0, 1e-9), Err(Error::NoSignChange { .. })));
    }

    #[test]
    fn illinois_examples() {
        let f = |x: f64| x * x * x - 2.0;
        assert_abs_diff_eq!(illinois_root(f, 0.0, f(0.0), 2.0, f(2.0), 1e-13), 2f64.cbrt(), epsilon = 1e-12);
        let g = |x: f64| (-x).exp() - 0.5;
        assert_abs_diff_eq!(illinois_root(g, 5.0, g(5.0), 0.0, g(0.0), 1e-13), 2f64.ln(), epsilon = 1e-12);
    }
}
