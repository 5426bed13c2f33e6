use approx::assert_abs_diff_eq;
use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use proptest::prelude::*;
use sparsecs_core::{Error, IndexSet, ProblemInstance, SolutionVector};

fn identity2(b: DVector<f64>, eps: f64, gamma: f64, w: DVector<f64>) -> ProblemInstance {
    ProblemInstance::new(DMatrix::identity(2, 2), b, eps, gamma, w).unwrap()
}

#[test]
fn well_formed_instance_is_accepted() {
    let inst = identity2(dvector![1.0, 1.0], 0.1, 1.0, dvector![1.0, 1.0]);
    assert_eq!((inst.m(), inst.n()), (2, 2));
}

#[test]
fn shape_and_parameter_errors() {
    let err = ProblemInstance::new(DMatrix::identity(2, 2), dvector![1.0, 2.0, 3.0], 0.1, 1.0, dvector![1.0, 1.0]);
    assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    let err = ProblemInstance::new(DMatrix::identity(2, 2), dvector![1.0, 2.0], 0.0, 1.0, dvector![1.0, 1.0]);
    assert!(matches!(err, Err(Error::NonPositiveParameter(_))));
    let err = ProblemInstance::new(DMatrix::identity(2, 2), dvector![1.0, 2.0], 0.1, -1.0, dvector![1.0, 1.0]);
    assert!(matches!(err, Err(Error::NonPositiveParameter(_))));
    let err = ProblemInstance::new(DMatrix::identity(2, 2), dvector![1.0, 2.0], 0.1, 1.0, dvector![1.0, -1.0]);
    assert!(matches!(err, Err(Error::NegativeWeight(1))));
    let err = ProblemInstance::new(DMatrix::identity(2, 2), dvector![1.0, f64::NAN], 0.1, 1.0, dvector![1.0, 1.0]);
    assert!(matches!(err, Err(Error::NonFiniteData(_))));
}

#[test]
fn defaults_are_sqrt_n_and_unit_weights() {
    let inst = ProblemInstance::with_defaults(DMatrix::zeros(3, 9), DVector::from_element(3, 1.0), 1.0).unwrap();
    assert_eq!(inst.gamma(), 3.0);
    assert_eq!(inst.weights(), &DVector::from_element(9, 1.0));
}

#[test]
fn objective_hand_values() {
    let inst = identity2(dvector![1.0, 0.0], 0.1, 4.0, dvector![1.0, 1.0]);
    assert_eq!(inst.objective(&dvector![0.0, 0.0]), 0.0);
    assert_eq!(inst.objective(&dvector![2.0, 0.0]), 2.0);

    let inst = ProblemInstance::new(DMatrix::identity(3, 3), dvector![1.0, 0.0, 0.0], 0.1, 2.0, dvector![1.0, 3.0, 1.0])
        .unwrap();
    assert_eq!(inst.objective(&dvector![1.0, 1.0, 0.0]), 7.0);
}

#[test]
fn entries_below_threshold_are_not_counted() {
    let inst = identity2(dvector![1.0, 0.0], 0.1, 4.0, dvector![1.0, 1.0]);
    let x = dvector![1e-5, 2.0];
    assert_abs_diff_eq!(inst.objective(&x), 1.0 + (1e-10 + 4.0) / 4.0, epsilon = 1e-15);
    assert_eq!(SolutionVector::new(x).sparsity(), 1);
}

#[test]
fn residual_hand_values() {
    let inst = identity2(dvector![1.0, 0.0], 0.1, 1.0, dvector![1.0, 1.0]);
    assert_eq!(inst.residual_sq(&dvector![1.0, 0.0]), 0.0);
    assert_eq!(inst.residual_sq(&dvector![0.0, 0.0]), 1.0);
    let inst = ProblemInstance::new(dmatrix![1.0, 2.0; 0.0, 1.0], dvector![1.0, 1.0], 0.1, 1.0, dvector![1.0, 1.0])
        .unwrap();
    assert_eq!(inst.residual_sq(&dvector![1.0, 0.0]), 1.0);
}

#[test]
fn restriction_keeps_selected_columns() {
    let inst = ProblemInstance::new(
        dmatrix![1.0, 2.0, 3.0; 4.0, 5.0, 6.0],
        dvector![1.0, 1.0],
        0.5,
        2.0,
        dvector![1.0, 2.0, 3.0],
    )
    .unwrap();
    let r = inst.restrict_columns(&[2, 0]).unwrap();
    assert_eq!(r.a(), &dmatrix![3.0, 1.0; 6.0, 4.0]);
    assert_eq!(r.weights(), &dvector![3.0, 1.0]);
    assert_eq!(r.gamma(), 2.0);
}

#[test]
fn index_set_basics() {
    let mut s = IndexSet::new(6);
    assert!(s.insert(4));
    assert!(!s.insert(4));
    s.insert(1);
    assert_eq!(s.to_vec(), vec![1, 4]);
    assert_eq!(s.complement(), vec![0, 2, 3, 5]);
    let t = IndexSet::from_indices(6, [1, 4, 5]);
    assert!(s.is_subset(&t));
    assert!(!t.is_subset(&s));
    assert!(s.remove(1));
    assert_eq!(s.len(), 1);
}

proptest! {
    #[test]
    fn objective_is_permutation_equivariant(
        vals in prop::collection::vec(-3.0f64..3.0, 5),
        ws in prop::collection::vec(0.0f64..2.0, 5),
        perm_seed in 0usize..120,
        gamma in 0.1f64..10.0,
    ) {
        let n = 5;
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = perm_seed;
        for i in (1..n).rev() {
            perm.swap(i, s % (i + 1));
            s /= i + 1;
        }
        let a = DMatrix::from_fn(2, n, |r, c| (r + 2 * c) as f64);
        let b = dvector![1.0, 2.0];
        let inst = ProblemInstance::new(a.clone(), b.clone(), 0.5, gamma, DVector::from_vec(ws.clone())).unwrap();
        let pw = DVector::from_fn(n, |i, _| ws[perm[i]]);
        let pa = DMatrix::from_fn(2, n, |r, c| a[(r, perm[c])]);
        let pinst = ProblemInstance::new(pa, b, 0.5, gamma, pw).unwrap();
        let x = DVector::from_vec(vals.clone());
        let px = DVector::from_fn(n, |i, _| vals[perm[i]]);
        prop_assert!((inst.objective(&x) - pinst.objective(&px)).abs() <= 1e-12);
        prop_assert!((inst.residual_sq(&x) - pinst.residual_sq(&px)).abs() <= 1e-9);
    }
}
