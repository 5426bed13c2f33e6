//! Benchmark heuristics: orthogonal matching pursuit, iteratively reweighted
//! L1, and rounding of convex solutions.

use alloc::vec::Vec;

use nalgebra::DVector;

use crate::conic::ConicSolver;
use crate::relaxations::solve_weighted_bpd;
use crate::rounding::{greedy_round, ProjectionState};
use crate::{linalg, Error, IndexSet, ProblemInstance, Result, SolutionVector};

pub const DEFAULT_STABILITY_DELTA: f64 = 1e-4;
pub const DEFAULT_IRWL1_ITERS: usize = 50;
/// IRWL1 stops once successive iterates are this close in the 2-norm.
pub const IRWL1_STEP_TOL: f64 = 1e-6;

/// Orthogonal matching pursuit: repeatedly add the column most correlated
/// with the residual and refit by least squares, until
/// `||r||^2 <= epsilon`.
pub fn omp(inst: &ProblemInstance) -> Result<SolutionVector> {
    let n = inst.n();
    let eps = inst.epsilon();
    if inst.zero_is_feasible() {
        return Ok(SolutionVector::zeros(n));
    }
    let all: Vec<usize> = (0..n).collect();
    if linalg::subset_residual_sq(inst.a(), inst.b(), &all) > eps {
        return Err(Error::NoFeasibleCompletion);
    }
    let a = inst.a();
    let mut state = ProjectionState::new(inst.b());
    let mut used = IndexSet::new(n);
    while state.residual_sq > eps && used.len() < n {
        let corr = a.tr_mul(&state.residual);
        let mut best = None;
        for i in 0..n {
            if used.contains(i) {
                continue;
            }
            match best {
                Some((_, c)) if corr[i].abs() <= c => {}
                _ => best = Some((i, corr[i].abs())),
            }
        }
        let (i, _) = best.expect("free column exists");
        used.insert(i);
        state = state.push(i, &a.column(i).into_owned());
    }
    if state.residual_sq > eps {
        return Err(Error::NoFeasibleCompletion);
    }
    Ok(SolutionVector::new(linalg::scatter(n, &state.selected, &state.coefficients)))
}

/// Iteratively reweighted L1: weighted BPD solves from unit weights with the
/// update `w_i <- 1 / (|x_i| + delta)`, stopping after `max_iters` solves or
/// when `||x_t - x_{t-1}|| <= 1e-6`.
pub fn irwl1<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
    stability_delta: f64,
    max_iters: usize,
) -> Result<SolutionVector> {
    if !(stability_delta > 0.0) {
        return Err(Error::NonPositiveParameter("stability_delta"));
    }
    let n = inst.n();
    let mut weights = DVector::from_element(n, 1.0);
    let mut prev: Option<DVector<f64>> = None;
    let mut x = SolutionVector::zeros(n);
    for _ in 0..max_iters.max(1) {
        x = solve_weighted_bpd(solver, inst, &weights)?;
        if let Some(p) = &prev {
            if (&x.x - p).norm() <= IRWL1_STEP_TOL {
                break;
            }
        }
        weights = x.x.map(|v| 1.0 / (v.abs() + stability_delta));
        prev = Some(x.x.clone());
    }
    Ok(x)
}

/// Greedy rounding with score `|x|`.
pub fn sparsify(inst: &ProblemInstance, x: &DVector<f64>) -> Result<SolutionVector> {
    greedy_round(inst, &x.map(f64::abs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector, DMatrix};

    #[test]
    fn omp_identity_hand_value() {
        let inst = ProblemInstance::with_defaults(DMatrix::identity(2, 2), dvector![3.0, 0.0], 0.5).unwrap();
        let x = omp(&inst).unwrap();
        assert_eq!(x.support(), vec![0]);
        assert!((&x.x - dvector![3.0, 0.0]).amax() < 1e-15);
    }

    #[test]
    fn omp_returns_zero_when_feasible() {
        let inst = ProblemInstance::with_defaults(dmatrix![1.0, 1.0], dvector![0.1], 0.5).unwrap();
        assert_eq!(omp(&inst).unwrap().sparsity(), 0);
    }

    #[test]
    fn omp_orthogonal_picks_by_correlation() {
        // columns are scaled unit vectors, so correlation is |a_i' b|
        let a = DMatrix::from_diagonal(&dvector![1.0, 2.0, 0.5]);
        let b = dvector![1.0, 1.0, 3.0];
        // |a_i'b| = 1, 2, 1.5; residual parts 1, 1, 9
        let inst = ProblemInstance::with_defaults(a, b, 1.5).unwrap();
        let x = omp(&inst).unwrap();
        assert_eq!(x.support(), vec![1, 2]);
    }
}
