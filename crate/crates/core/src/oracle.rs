//! Exhaustive support enumeration for small instances.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::{linalg, Error, ProblemInstance, Result, SolutionVector};

pub const DEFAULT_MAX_N: usize = 15;

/// Best point supported on `support`: minimizes `||W x||^2` over
/// `{x : supp(x) ⊆ support, ||A x - b||^2 <= epsilon}`. Returns the full
/// vector and its objective, or `None` if the support cannot fit `b`.
pub fn support_optimum(inst: &ProblemInstance, support: &[usize]) -> Option<(DVector<f64>, f64)> {
    let coef = linalg::min_weighted_norm_fit(inst.a(), inst.b(), inst.weights(), support, inst.epsilon())?;
    let x = linalg::scatter(inst.n(), support, &coef);
    let obj = inst.objective(&x);
    Some((x, obj))
}

/// Calls `f` on every `k`-subset of `0..n` in lexicographic order.
fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > n {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // rightmost position that can still advance
        let mut i = k;
        while i > 0 && idx[i - 1] == n - k + i - 1 {
            i -= 1;
        }
        if i == 0 {
            return;
        }
        idx[i - 1] += 1;
        for j in i..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Global optimum of `||x||_0 + (1/gamma) ||W x||^2` subject to the
/// residual budget, by enumerating supports in increasing size. Since
/// every point on a `k`-support costs at least `k`, enumeration stops once
/// `k` reaches the best objective found.
pub fn brute_force_oracle(inst: &ProblemInstance, max_n: usize) -> Result<(SolutionVector, f64)> {
    let n = inst.n();
    if n > max_n {
        return Err(Error::ProblemTooLarge { n, limit: max_n });
    }
    if inst.zero_is_feasible() {
        return Ok((SolutionVector::zeros(n), 0.0));
    }
    let all: Vec<usize> = (0..n).collect();
    if linalg::subset_residual_sq(inst.a(), inst.b(), &all) > inst.epsilon() {
        return Err(Error::InfeasibleInstance);
    }
    let mut best: Option<(DVector<f64>, f64)> = None;
    for k in 1..=n {
        if let Some((_, obj)) = &best {
            if k as f64 >= *obj {
                break;
            }
        }
        for_each_subset(n, k, |s| {
            if let Some((x, obj)) = support_optimum(inst, s) {
                if best.as_ref().is_none_or(|(_, b)| obj < *b) {
                    best = Some((x, obj));
                }
            }
        });
    }
    let (x, obj) = best.ok_or(Error::InfeasibleInstance)?;
    Ok((SolutionVector::new(x), obj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dvector, DMatrix};

    #[test]
    fn subsets_are_enumerated_once() {
        let mut seen = Vec::new();
        for_each_subset(5, 3, |s| seen.push(s.to_vec()));
        assert_eq!(seen.len(), 10);
        assert_eq!(seen[0], vec![0, 1, 2]);
        assert_eq!(seen[9], vec![2, 3, 4]);
        let mut count = 0;
        for_each_subset(4, 0, |_| count += 1);
        assert_eq!(count, 1);
        for_each_subset(4, 4, |s| assert_eq!(s, &[0, 1, 2, 3]));
    }

    #[test]
    fn one_coordinate_closed_form() {
        let gamma = 1e3;
        let inst = ProblemInstance::new(DMatrix::identity(2, 2), dvector![2.0, 0.0], 1.0, gamma, dvector![1.0, 1.0])
            .unwrap();
        let (x, obj) = brute_force_oracle(&inst, 15).unwrap();
        assert_eq!(x.support(), vec![0]);
        assert!((x.x[0] - 1.0).abs() < 1e-9);
        assert!((obj - (1.0 + 1.0 / gamma)).abs() < 1e-9);
    }

    #[test]
    fn trivial_and_guarded() {
        let inst = ProblemInstance::with_defaults(DMatrix::identity(2, 2), dvector![0.1, 0.1], 1.0).unwrap();
        assert_eq!(brute_force_oracle(&inst, 15).unwrap().1, 0.0);
        let big = ProblemInstance::with_defaults(DMatrix::identity(3, 3), dvector![1.0, 1.0, 1.0], 0.1).unwrap();
        assert!(matches!(brute_force_oracle(&big, 2), Err(Error::ProblemTooLarge { .. })));
    }
}
