//! Nonnegative quadratic sub-problem solver.
//!
//! Each row `b` of the right-hand side defines
//! `min_x 1/2 x^T (G + ridge I) x - b^T x  s.t.  x >= 0`,
//! solved by a primal active-set method on the normal equations.

use ndarray::{Array1, Array2, ArrayView1};

use crate::error::{dim_err, Error, Result};
use crate::scalar::Scalar;

/// Tolerances for [`nnls_solve`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NnlsConfig {
    /// Required KKT residual at exit.
    pub kkt_tol: f64,
    /// Cap on outer active-set iterations, as a multiple of the problem size.
    pub max_iter_factor: usize,
}

impl Default for NnlsConfig {
    fn default() -> Self {
        Self { kkt_tol: 1e-10, max_iter_factor: 5 }
    }
}

/// Solution rows plus the worst KKT residual over all rows.
#[derive(Debug, Clone)]
pub struct NnlsSolution<T> {
    pub x: Array2<T>,
    pub kkt_residual: T,
}

/// KKT residual of `x` for `min 1/2 x^T A x - b^T x, x >= 0`:
/// `|grad_j|` on the support and `max(0, -grad_j)` off it.
pub fn kkt_residual<T: Scalar>(a: &Array2<T>, b: ArrayView1<'_, T>, x: ArrayView1<'_, T>) -> T {
    let grad = a.dot(&x) - &b;
    grad.iter()
        .zip(x.iter())
        .map(|(&g, &xj)| if xj > T::zero() { g.abs() } else { (-g).max(T::zero()) })
        .fold(T::zero(), T::max)
}

/// Cholesky solve of the principal sub-system `A[P, P] z = b[P]`.
fn solve_passive<T: Scalar>(a: &Array2<T>, b: ArrayView1<'_, T>, passive: &[usize]) -> Option<Vec<T>> {
    let k = passive.len();
    let mut l = vec![T::zero(); k * k];
    for i in 0..k {
        for j in 0..=i {
            let mut sum = a[[passive[i], passive[j]]];
            for p in 0..j {
                sum -= l[i * k + p] * l[j * k + p];
            }
            if i == j {
                if !(sum > T::zero()) {
                    return None;
                }
                l[i * k + i] = sum.sqrt();
            } else {
                l[i * k + j] = sum / l[j * k + j];
            }
        }
    }
    let mut y = vec![T::zero(); k];
    for i in 0..k {
        let mut sum = b[passive[i]];
        for p in 0..i {
            sum -= l[i * k + p] * y[p];
        }
        y[i] = sum / l[i * k + i];
    }
    for i in (0..k).rev() {
        let mut sum = y[i];
        for p in i + 1..k {
            sum -= l[p * k + i] * y[p];
        }
        y[i] = sum / l[i * k + i];
    }
    Some(y)
}

fn solve_one<T: Scalar>(a: &Array2<T>, b: ArrayView1<'_, T>, warm: Option<ArrayView1<'_, T>>, cfg: &NnlsConfig) -> Result<Array1<T>> {
    let n = b.len();
    let mut x = Array1::zeros(n);
    let mut passive: Vec<usize> = Vec::with_capacity(n);

    // Warm start: accept the previous support if its unconstrained solve is positive.
    if let Some(w) = warm {
        let support: Vec<usize> = (0..n).filter(|&j| w[j] > T::zero()).collect();
        if !support.is_empty() {
            if let Some(z) = solve_passive(a, b, &support) {
                if z.iter().all(|&v| v > T::zero()) {
                    for (&j, &v) in support.iter().zip(&z) {
                        x[j] = v;
                    }
                    passive = support;
                }
            }
        }
    }

    let add_tol = T::lit(cfg.kkt_tol * 0.25);
    let max_outer = cfg.max_iter_factor.max(1) * n + 10;
    let mut excluded = vec![false; n];
    for _ in 0..max_outer {
        let grad = a.dot(&x) - &b;
        let candidate = (0..n)
            .filter(|&j| !passive.contains(&j) && !excluded[j])
            .map(|j| (j, -grad[j]))
            .filter(|&(_, w)| w > add_tol)
            .fold(None, |best: Option<(usize, T)>, (j, w)| match best {
                Some((_, bw)) if bw >= w => best,
                _ => Some((j, w)),
            });
        let Some((enter, _)) = candidate else {
            return Ok(x);
        };
        passive.push(enter);
        excluded.iter_mut().for_each(|e| *e = false);
        loop {
            let z = solve_passive(a, b, &passive)
                .ok_or_else(|| Error::SubProblem("passive sub-system is not positive definite".into()))?;
            if z.iter().all(|&v| v > T::zero()) {
                for (&j, &v) in passive.iter().zip(&z) {
                    x[j] = v;
                }
                break;
            }
            // Step toward z until the first passive coordinate hits zero.
            let mut alpha = T::one();
            for (&j, &zj) in passive.iter().zip(&z) {
                if zj <= T::zero() {
                    let denom = x[j] - zj;
                    if denom > T::zero() {
                        alpha = alpha.min(x[j] / denom);
                    } else {
                        alpha = T::zero();
                    }
                }
            }
            for (&j, &zj) in passive.iter().zip(&z) {
                x[j] = x[j] + alpha * (zj - x[j]);
            }
            let before = passive.len();
            passive.retain(|&j| x[j] > T::zero());
            for j in 0..n {
                if !passive.contains(&j) {
                    x[j] = T::zero();
                }
            }
            if passive.len() == before {
                // Rounding kept every coordinate positive; drop the most negative target.
                let (pos, _) = z
                    .iter()
                    .enumerate()
                    .fold((0, T::infinity()), |best, (i, &v)| if v < best.1 { (i, v) } else { best });
                x[passive[pos]] = T::zero();
                passive.remove(pos);
            }
            if !passive.contains(&enter) {
                // The entering coordinate bounced straight back; skip it next round.
                excluded[enter] = true;
            }
            if passive.is_empty() {
                break;
            }
        }
    }
    Err(Error::Convergence(format!("nnls did not converge within {max_outer} iterations")))
}

/// Solves one nonnegative quadratic per row of `rhs`, sharing `gram + ridge I`.
///
/// Every returned row satisfies the KKT conditions to `cfg.kkt_tol`; otherwise
/// a convergence error is returned.
pub fn nnls_solve<T: Scalar>(gram: &Array2<T>, rhs: &Array2<T>, ridge: T, cfg: &NnlsConfig) -> Result<NnlsSolution<T>> {
    nnls_solve_warm(gram, rhs, ridge, None, cfg)
}

/// [`nnls_solve`] with an optional previous solution used to seed the active set.
pub fn nnls_solve_warm<T: Scalar>(
    gram: &Array2<T>,
    rhs: &Array2<T>,
    ridge: T,
    warm: Option<&Array2<T>>,
    cfg: &NnlsConfig,
) -> Result<NnlsSolution<T>> {
    let n = gram.nrows();
    if gram.ncols() != n || rhs.ncols() != n {
        return dim_err(format!("gram {:?} incompatible with rhs {:?}", gram.dim(), rhs.dim()));
    }
    if let Some(w) = warm {
        if w.dim() != rhs.dim() {
            return dim_err(format!("warm start {:?} does not match rhs {:?}", w.dim(), rhs.dim()));
        }
    }
    if ridge < T::zero() {
        return Err(Error::Domain(format!("ridge must be nonnegative, got {ridge}")));
    }
    let mut a = gram.clone();
    for j in 0..n {
        a[[j, j]] += ridge;
    }
    let tol = T::lit(cfg.kkt_tol);
    let mut x = Array2::zeros(rhs.dim());
    let mut worst = T::zero();
    for (i, b) in rhs.outer_iter().enumerate() {
        let row = solve_one(&a, b, warm.map(|w| w.row(i)), cfg)?;
        let r = kkt_residual(&a, b, row.view());
        if !(r <= tol) {
            return Err(Error::Convergence(format!("nnls row {i} exits with KKT residual {r}")));
        }
        worst = worst.max(r);
        x.row_mut(i).assign(&row);
    }
    Ok(NnlsSolution { x, kkt_residual: worst })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn objective(a: &Array2<f64>, b: &[f64], x: &[f64]) -> f64 {
        let mut v = 0.0;
        for i in 0..x.len() {
            for j in 0..x.len() {
                v += 0.5 * x[i] * a[[i, j]] * x[j];
            }
            v -= b[i] * x[i];
        }
        v
    }

    #[test]
    fn interior_optimum_equals_linear_solve() {
        let g = array![[2.0f64, 0.5], [0.5, 1.0]];
        let b = array![[1.0, 1.0]];
        let sol = nnls_solve(&g, &b, 0.0, &NnlsConfig::default()).unwrap();
        // (G)^{-1} b by Cramer's rule.
        let det = 2.0 * 1.0 - 0.25;
        let want = [(1.0 * 1.0 - 0.5 * 1.0) / det, (2.0 * 1.0 - 0.5 * 1.0) / det];
        assert!((sol.x[[0, 0]] - want[0]).abs() < 1e-14);
        assert!((sol.x[[0, 1]] - want[1]).abs() < 1e-14);
    }

    #[test]
    fn one_active_constraint_matches_grid() {
        let g = array![[1.0, 0.9], [0.9, 1.0]];
        let b = [1.0, -0.5];
        let sol = nnls_solve(&g, &array![[b[0], b[1]]], 0.1, &NnlsConfig::default()).unwrap();
        assert_eq!(sol.x[[0, 1]], 0.0);
        let mut a = g.clone();
        a[[0, 0]] += 0.1;
        a[[1, 1]] += 0.1;
        let steps = 2000;
        let mut best = f64::INFINITY;
        for i in 0..=steps {
            for j in 0..=steps / 10 {
                let x = [2.0 * i as f64 / steps as f64, 0.2 * j as f64 / (steps / 10) as f64];
                best = best.min(objective(&a, &b, &x));
            }
        }
        let got = objective(&a, &b, &[sol.x[[0, 0]], sol.x[[0, 1]]]);
        assert!(got <= best + 1e-6 && best - got <= 1e-6, "got {got} grid {best}");
    }

    #[test]
    fn zero_rhs_gives_zero() {
        let g = array![[1.0, 0.2], [0.2, 1.0]];
        let sol = nnls_solve(&g, &Array2::zeros((3, 2)), 0.5, &NnlsConfig::default()).unwrap();
        assert!(sol.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn warm_start_gives_same_answer() {
        let g = array![[3.0f64, 1.0, 0.5], [1.0, 2.0, 0.3], [0.5, 0.3, 1.0]];
        let rhs = array![[1.0, -1.0, 0.5], [0.2, 0.4, -0.9]];
        let cold = nnls_solve(&g, &rhs, 0.01, &NnlsConfig::default()).unwrap();
        let warm = nnls_solve_warm(&g, &rhs, 0.01, Some(&cold.x), &NnlsConfig::default()).unwrap();
        assert!((&cold.x - &warm.x).iter().all(|d| d.abs() < 1e-14));
        let stale = array![[1.0, 1.0, 1.0], [1.0, 1.0, 1.0]];
        let other = nnls_solve_warm(&g, &rhs, 0.01, Some(&stale), &NnlsConfig::default()).unwrap();
        assert!((&cold.x - &other.x).iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn shape_and_ridge_errors() {
        let g = array![[1.0, 0.0], [0.0, 1.0]];
        assert!(nnls_solve(&g, &Array2::zeros((1, 3)), 0.0, &NnlsConfig::default()).is_err());
        assert!(nnls_solve(&g, &Array2::zeros((1, 2)), -1.0, &NnlsConfig::default()).is_err());
    }
}
