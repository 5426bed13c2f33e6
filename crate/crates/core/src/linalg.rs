//! Dense least-squares helpers shared by the relaxations, rounding and the
//! oracle.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SVD};

/// Relative singular-value cutoff used for numerical rank.
const RANK_TOL: f64 = 1e-11;

fn rank_cutoff(svd: &SVD<f64, nalgebra::Dyn, nalgebra::Dyn>) -> f64 {
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    smax * RANK_TOL
}

/// `||(I - P) b||^2` where `P` projects onto the span of the columns of `a`.
pub fn projection_residual_sq(a: &DMatrix<f64>, b: &DVector<f64>) -> f64 {
    if a.ncols() == 0 {
        return b.norm_squared();
    }
    let svd = SVD::new(a.clone(), true, false);
    let cut = rank_cutoff(&svd);
    let u = svd.u.as_ref().expect("u requested");
    let mut r = b.clone();
    for (j, s) in svd.singular_values.iter().enumerate() {
        if *s > cut {
            let col = u.column(j);
            let c = col.dot(b);
            r.axpy(-c, &col, 1.0);
        }
    }
    r.norm_squared()
}

/// Least-squares residual of `b` on the columns listed in `columns`.
pub fn subset_residual_sq(a: &DMatrix<f64>, b: &DVector<f64>, columns: &[usize]) -> f64 {
    if columns.is_empty() {
        return b.norm_squared();
    }
    projection_residual_sq(&a.select_columns(columns), b)
}

/// Moore-Penrose pseudo-inverse via SVD.
pub fn pseudo_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return DMatrix::zeros(c, r);
    }
    let svd = SVD::new(m.clone(), true, true);
    let cut = rank_cutoff(&svd).max(f64::MIN_POSITIVE);
    svd.pseudo_inverse(cut).expect("u and v requested")
}

/// The ridge path `x(t) = (B^T B + t I)^{-1} B^T b` of a fixed design,
/// evaluated in the SVD basis so that every point costs `O(k^2)` and every
/// residual `O(k)`.
#[derive(Debug, Clone)]
pub struct RidgePath {
    v: DMatrix<f64>,
    sigma: Vec<f64>,
    beta: Vec<f64>,
    perp_sq: f64,
    b_norm_sq: f64,
}

impl RidgePath {
    pub fn new(design: &DMatrix<f64>, b: &DVector<f64>) -> Self {
        let k = design.ncols();
        if k == 0 {
            return Self {
                v: DMatrix::zeros(0, 0),
                sigma: Vec::new(),
                beta: Vec::new(),
                perp_sq: b.norm_squared(),
                b_norm_sq: b.norm_squared(),
            };
        }
        let svd = SVD::new(design.clone(), true, true);
        let cut = rank_cutoff(&svd);
        let u = svd.u.as_ref().expect("u requested");
        let v_t = svd.v_t.as_ref().expect("v requested");
        let mut sigma = Vec::new();
        let mut beta = Vec::new();
        let mut cols = Vec::new();
        let mut r = b.clone();
        for (j, s) in svd.singular_values.iter().enumerate() {
            if *s > cut {
                let uj = u.column(j);
                let c = uj.dot(b);
                r.axpy(-c, &uj, 1.0);
                sigma.push(*s);
                beta.push(c);
                cols.push(j);
            }
        }
        let v = DMatrix::from_fn(k, cols.len(), |i, c| v_t[(cols[c], i)]);
        Self {
            v,
            sigma,
            beta,
            perp_sq: r.norm_squared(),
            b_norm_sq: b.norm_squared(),
        }
    }

    /// `||B x(t) - b||^2`, nondecreasing in `t`; `t = 0` is least squares.
    pub fn residual_sq(&self, t: f64) -> f64 {
        let fit: f64 = self
            .sigma
            .iter()
            .zip(&self.beta)
            .map(|(s, b)| {
                let r = b * t / (t + s * s);
                r * r
            })
            .sum();
        fit + self.perp_sq
    }

    /// Least-squares residual (the `t -> 0` limit).
    pub fn least_squares_residual_sq(&self) -> f64 {
        self.perp_sq
    }

    pub fn b_norm_sq(&self) -> f64 {
        self.b_norm_sq
    }

    pub fn point(&self, t: f64) -> DVector<f64> {
        let coef = DVector::from_iterator(
            self.sigma.len(),
            self.sigma
                .iter()
                .zip(&self.beta)
                .map(|(s, b)| s * b / (s * s + t)),
        );
        if coef.is_empty() {
            return DVector::zeros(self.v.nrows());
        }
        &self.v * coef
    }

    /// Smallest `t` found by bisection with `residual_sq(t) <= target`
    /// approaching equality; `None` when even least squares misses it.
    /// Returns `Some(inf)` when `||b||^2 <= target` (the zero point).
    pub fn shrinkage_for(&self, target: f64) -> Option<f64> {
        if self.b_norm_sq <= target {
            return Some(f64::INFINITY);
        }
        if self.perp_sq > target {
            return None;
        }
        let mut hi = 1.0;
        while self.residual_sq(hi) <= target {
            hi *= 1e3;
        }
        let mut lo = 1.0;
        while self.residual_sq(lo) > target {
            lo *= 1e-3;
            if lo < 1e-300 {
                return Some(0.0);
            }
        }
        // geometric bisection keeping residual(lo) <= target < residual(hi)
        for _ in 0..200 {
            let mid = libm::sqrt(lo * hi);
            if !(mid > lo && mid < hi) {
                break;
            }
            if self.residual_sq(mid) <= target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi / lo - 1.0 < 1e-15 {
                break;
            }
        }
        Some(lo)
    }
}

/// Minimizes `sum_i w_i^2 x_i^2` over `x` with `||A_S x - b||^2 <= epsilon`,
/// where `A_S` is `a` restricted to `columns`. Returns the coefficients in
/// the order of `columns`, or `None` when the restricted residual set is
/// empty. Coordinates with zero weight are free and fitted by least squares.
pub fn min_weighted_norm_fit(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    weights: &DVector<f64>,
    columns: &[usize],
    epsilon: f64,
) -> Option<DVector<f64>> {
    let k = columns.len();
    let (weighted, free): (Vec<usize>, Vec<usize>) =
        (0..k).partition(|&j| weights[columns[j]] > 0.0);

    // Eliminate the free coordinates: project their span out of the design.
    let (design, target, free_pinv) = if free.is_empty() {
        let cols: Vec<usize> = weighted.iter().map(|&j| columns[j]).collect();
        let mut d = a.select_columns(&cols);
        for (c, &j) in weighted.iter().enumerate() {
            let w = weights[columns[j]];
            d.column_mut(c).scale_mut(1.0 / w);
        }
        (d, b.clone(), None)
    } else {
        let fcols: Vec<usize> = free.iter().map(|&j| columns[j]).collect();
        let af = a.select_columns(&fcols);
        let pinv = pseudo_inverse(&af);
        let project = |v: &DVector<f64>| v - &af * (&pinv * v);
        let cols: Vec<usize> = weighted.iter().map(|&j| columns[j]).collect();
        let mut d = DMatrix::zeros(a.nrows(), cols.len());
        for (c, &col) in cols.iter().enumerate() {
            let w = weights[col];
            let pc = project(&a.column(col).into_owned()) / w;
            d.set_column(c, &pc);
        }
        (d, project(b), Some(pinv))
    };

    let path = RidgePath::new(&design, &target);
    // same arithmetic as the instance's own residual on the scattered point
    let residual_sq = |x: &DVector<f64>| (a * scatter(a.ncols(), columns, x) - b).norm_squared();
    // The path residual and the recomputed one differ by rounding; aim
    // slightly inside the ball until the recomputed point is feasible.
    let mut margin = 0.0;
    for _ in 0..8 {
        let goal = epsilon * (1.0 - margin);
        let t = match path.shrinkage_for(goal) {
            Some(t) => t,
            None if margin > 0.0 => 0.0,
            None => return None,
        };
        let y = if t.is_infinite() {
            DVector::zeros(design.ncols())
        } else {
            path.point(t)
        };
        let mut x = DVector::zeros(k);
        for (c, &j) in weighted.iter().enumerate() {
            x[j] = y[c] / weights[columns[j]];
        }
        if let Some(pinv) = &free_pinv {
            let mut partial = b.clone();
            for &j in &weighted {
                partial.axpy(-x[j], &a.column(columns[j]), 1.0);
            }
            let xf = pinv * partial;
            for (c, &j) in free.iter().enumerate() {
                x[j] = xf[c];
            }
        }
        if residual_sq(&x) <= epsilon {
            return Some(x);
        }
        margin = if margin == 0.0 { 1e-13 } else { margin * 10.0 };
    }
    None
}

/// Scatters coefficients on `columns` into a length-`n` vector.
pub fn scatter(n: usize, columns: &[usize], values: &DVector<f64>) -> DVector<f64> {
    let mut x = DVector::zeros(n);
    for (c, &i) in columns.iter().enumerate() {
        x[i] = values[c];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn projection_residual_of_identity_is_zero() {
        let a = DMatrix::<f64>::identity(3, 3);
        let b = dvector![1.0, 2.0, 3.0];
        assert!(projection_residual_sq(&a, &b) < 1e-24);
        assert_eq!(subset_residual_sq(&a, &b, &[]), 14.0);
        assert!((subset_residual_sq(&a, &b, &[1]) - 10.0).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_min_norm() {
        // minimize x^2 s.t. (x - 2)^2 <= 1  ->  x = 1
        let a = dmatrix![1.0];
        let b = dvector![2.0];
        let x = min_weighted_norm_fit(&a, &b, &dvector![1.0], &[0], 1.0).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!(min_weighted_norm_fit(&a, &b, &dvector![1.0], &[], 1.0).is_none());
    }

    #[test]
    fn zero_weight_coordinates_are_free() {
        // column 1 has zero weight, so it absorbs b completely
        let a = DMatrix::<f64>::identity(2, 2);
        let b = dvector![0.0, 3.0];
        let x = min_weighted_norm_fit(&a, &b, &dvector![1.0, 0.0], &[0, 1], 0.5).unwrap();
        assert!(x[0].abs() < 1e-12);
        assert!((x[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn pseudo_inverse_of_rank_one() {
        let m = dmatrix![1.0, 1.0; 1.0, 1.0];
        let p = pseudo_inverse(&m);
        assert!((&m * &p * &m - &m).abs().max() < 1e-12);
    }
}
