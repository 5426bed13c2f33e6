use nalgebra::{dvector, DMatrix, DVector};
use sparsecs::core::heuristics::{irwl1, omp, sparsify, DEFAULT_IRWL1_ITERS, DEFAULT_STABILITY_DELTA};
use sparsecs::core::relaxations::solve_bpd;
use sparsecs::core::{Error, ProblemInstance};
use sparsecs::experiments::{generate, SyntheticSpec};
use sparsecs::ClarabelSolver;

#[test]
fn omp_identity_example() {
    let inst = ProblemInstance::with_defaults(DMatrix::identity(2, 2), dvector![3.0, 0.0], 0.5).unwrap();
    let x = omp(&inst).unwrap();
    assert_eq!(x.x, dvector![3.0, 0.0]);
}

#[test]
fn omp_trivial_and_infeasible() {
    let inst = ProblemInstance::with_defaults(DMatrix::identity(2, 2), dvector![0.1, 0.2], 1.0).unwrap();
    assert_eq!(omp(&inst).unwrap().sparsity(), 0);
    let a = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let inst = ProblemInstance::with_defaults(a, dvector![0.0, 3.0], 1.0).unwrap();
    assert!(matches!(omp(&inst), Err(Error::NoFeasibleCompletion)));
}

#[test]
fn omp_picks_largest_correlations_on_orthogonal_columns() {
    // orthogonal columns: OMP adds coordinates by decreasing |b_i|
    let inst =
        ProblemInstance::with_defaults(DMatrix::identity(4, 4), dvector![0.5, -4.0, 2.0, 1.0], 1.3).unwrap();
    let x = omp(&inst).unwrap();
    assert_eq!(x.support(), vec![1, 2]);
    assert!((inst.residual_sq(&x.x) - 1.25).abs() < 1e-12);
}

#[test]
fn irwl1_trivial_and_feasible() {
    let s = ClarabelSolver::new();
    let inst = ProblemInstance::with_defaults(DMatrix::identity(2, 2), dvector![0.1, 0.2], 1.0).unwrap();
    assert_eq!(irwl1(&s, &inst, DEFAULT_STABILITY_DELTA, 5).unwrap().sparsity(), 0);
    assert!(irwl1(&s, &inst, 0.0, 5).is_err());
    for seed in 0..5 {
        let (inst, _) = generate(&SyntheticSpec::new(20, 10, 3, 0.1, 600 + seed)).unwrap();
        let x = irwl1(&s, &inst, DEFAULT_STABILITY_DELTA, DEFAULT_IRWL1_ITERS).unwrap();
        assert!(inst.is_feasible(&x.x, 1e-6));
    }
}

#[test]
fn irwl1_is_usually_sparser_than_bpd() {
    let s = ClarabelSolver::new();
    let mut wins = 0;
    let total = 10;
    for seed in 0..total {
        let (inst, _) = generate(&SyntheticSpec::new(30, 15, 4, 0.1, 700 + seed)).unwrap();
        let reweighted = sparsify(&inst, &irwl1(&s, &inst, DEFAULT_STABILITY_DELTA, DEFAULT_IRWL1_ITERS).unwrap().x);
        let plain = sparsify(&inst, &solve_bpd(&s, &inst).unwrap().x);
        if reweighted.unwrap().sparsity() <= plain.unwrap().sparsity() {
            wins += 1;
        }
    }
    assert!(wins * 2 > total, "{wins} of {total}");
}

#[test]
fn sparsify_keeps_feasibility() {
    let (inst, _) = generate(&SyntheticSpec::new(15, 10, 3, 0.2, 42)).unwrap();
    let x = DVector::from_fn(15, |i, _| i as f64);
    let r = sparsify(&inst, &x).unwrap();
    assert!(inst.is_feasible(&r.x, 1e-9));
}
