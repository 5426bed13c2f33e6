use nalgebra::{dmatrix, dvector, DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use sparsecs::core::oracle::brute_force_oracle;
use sparsecs::core::relaxations::{
    compute_gamma0, dual_objective, solve_bigm_relaxation, solve_bpd, solve_node_dual, solve_node_primal,
    solve_perspective_relaxation, solve_weighted_bpd,
};
use sparsecs::core::{Error, IndexSet, ProblemInstance};
use sparsecs::ClarabelSolver;

fn solver() -> ClarabelSolver {
    ClarabelSolver::new()
}

fn random_instance(seed: u64, m: usize, n: usize, alpha: f64) -> ProblemInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = DMatrix::from_fn(m, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let b = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
    // epsilon sits a fraction `alpha` of the way from the least-squares
    // residual to ||b||^2, so the instance is feasible and nontrivial
    let ls = a.clone().svd(true, true).solve(&b, 1e-12).unwrap();
    let floor = (&a * ls - &b).norm_squared();
    let eps = floor + alpha * (b.norm_squared() - floor);
    ProblemInstance::with_defaults(a, b, eps).unwrap()
}

fn l1(x: &DVector<f64>, w: &DVector<f64>) -> f64 {
    x.iter().zip(w.iter()).map(|(x, w)| w * x.abs()).sum()
}

/// Minimum of `|x1| + |x2|` over `||a1 x1 + a2 x2 - b||^2 <= eps` by a fine
/// scan over `x1`; for each `x1` the feasible `x2` form an interval.
fn scan_l1_two_columns(a: &DMatrix<f64>, b: &DVector<f64>, eps: f64, range: f64, steps: usize) -> f64 {
    let (a1, a2) = (a.column(0), a.column(1));
    let qa = a2.norm_squared();
    let mut best = f64::INFINITY;
    for s in 0..=steps {
        let x1 = -range + 2.0 * range * s as f64 / steps as f64;
        let r = b - a1 * x1;
        // qa x2^2 - 2 (a2'r) x2 + |r|^2 - eps <= 0
        let p = a2.dot(&r);
        let disc = p * p - qa * (r.norm_squared() - eps);
        if disc < 0.0 {
            continue;
        }
        let (lo, hi) = ((p - disc.sqrt()) / qa, (p + disc.sqrt()) / qa);
        let x2 = if lo <= 0.0 && hi >= 0.0 { 0.0 } else { lo.abs().min(hi.abs()) };
        best = best.min(x1.abs() + x2);
    }
    best
}

#[test]
fn bpd_trivial_and_one_dimensional() {
    let inst = ProblemInstance::with_defaults(dmatrix![1.0], dvector![0.5], 1.0).unwrap();
    assert_eq!(solve_bpd(&solver(), &inst).unwrap().x, dvector![0.0]);
    let inst = ProblemInstance::with_defaults(dmatrix![1.0], dvector![2.0], 1.0).unwrap();
    assert!((solve_bpd(&solver(), &inst).unwrap().x[0] - 1.0).abs() < 1e-6);
}

#[test]
fn bpd_matches_scan_on_two_columns() {
    for seed in 0..5 {
        let inst = random_instance(seed, 3, 2, 0.2);
        let x = solve_bpd(&solver(), &inst).unwrap();
        let reference = scan_l1_two_columns(inst.a(), inst.b(), inst.epsilon(), 20.0, 400_000);
        assert!((l1(&x.x, inst.weights()) - reference).abs() < 1e-3, "seed {seed}");
        assert!(inst.is_feasible(&x.x, 1e-6));
    }
}

#[test]
fn bpd_infeasible_instance_is_reported() {
    let inst = ProblemInstance::with_defaults(dmatrix![1.0; 0.0], dvector![0.0, 2.0], 1.0).unwrap();
    assert!(matches!(solve_bpd(&solver(), &inst), Err(Error::InfeasibleInstance)));
}

#[test]
fn weighted_bpd_examples() {
    let inst = random_instance(4, 5, 8, 0.2);
    let plain = solve_bpd(&solver(), &inst).unwrap();
    let ones = solve_weighted_bpd(&solver(), &inst, &DVector::from_element(8, 1.0)).unwrap();
    assert!((l1(&plain.x, inst.weights()) - l1(&ones.x, inst.weights())).abs() < 1e-6);

    // both single columns fit; the heavy weight pushes mass to the other
    let inst = ProblemInstance::with_defaults(dmatrix![1.0, 1.0; 1.0, 1.1], dvector![1.0, 1.0], 0.05).unwrap();
    let x = solve_weighted_bpd(&solver(), &inst, &dvector![1e6, 1.0]).unwrap();
    assert!(x.x[0].abs() < 1e-5 && x.x[1].abs() > 0.5);

    let inst = ProblemInstance::with_defaults(dmatrix![1.0, 1.0], dvector![2.0], 1e-4).unwrap();
    let x = solve_weighted_bpd(&solver(), &inst, &dvector![1.0, 2.0]).unwrap();
    assert!((x.x[0] - (2.0 - 1e-2)).abs() < 1e-5 && x.x[1].abs() < 1e-6);

    assert!(matches!(
        solve_weighted_bpd(&solver(), &inst, &dvector![1.0, -1.0]),
        Err(Error::NegativeWeight(1))
    ));
}

#[test]
fn perspective_trivial_instance() {
    let inst = ProblemInstance::with_defaults(DMatrix::identity(2, 2), dvector![0.1, 0.1], 1.0).unwrap();
    let r = solve_perspective_relaxation(&solver(), &inst).unwrap();
    assert_eq!(r.objective, 0.0);
    assert!(r.x.iter().chain(r.z.iter()).chain(r.theta.iter()).all(|v| *v == 0.0));
}

#[test]
fn perspective_is_a_lower_bound() {
    for seed in 0..12 {
        let inst = random_instance(100 + seed, 4, 6 + (seed as usize % 4), 0.2);
        let r = solve_perspective_relaxation(&solver(), &inst).unwrap();
        let (_, opt) = brute_force_oracle(&inst, 15).unwrap();
        assert!(r.objective <= opt + 1e-8, "seed {seed}: {} > {opt}", r.objective);
    }
}

#[test]
fn perspective_equals_scaled_bpd_above_gamma0() {
    for seed in 0..5 {
        // m > n keeps gamma0 finite
        let inst = random_instance(200 + seed, 8, 4, 0.6);
        let g0 = compute_gamma0(&solver(), &inst).unwrap();
        assert!(g0.is_finite());
        let inst = inst.with_gamma(g0 * 1.5).unwrap();
        let p = solve_perspective_relaxation(&solver(), &inst).unwrap().objective;
        let x = solve_bpd(&solver(), &inst).unwrap();
        let scaled = 2.0 / inst.gamma().sqrt() * l1(&x.x, inst.weights());
        assert!((p - scaled).abs() < 1e-6, "seed {seed}: {p} vs {scaled}");
    }
}

#[test]
fn bigm_relaxation_examples() {
    let inst = random_instance(7, 8, 4, 0.6);
    let p = solve_perspective_relaxation(&solver(), &inst).unwrap().objective;
    let loose = solve_bigm_relaxation(&solver(), &inst, 1e9).unwrap().objective;
    assert!((loose - p).abs() < 1e-5);
    let g0 = compute_gamma0(&solver(), &inst).unwrap();
    let valid = solve_bigm_relaxation(&solver(), &inst, g0.sqrt().max(g0)).unwrap().objective;
    assert!(valid >= p - 1e-8);

    // one coordinate at x = 1.9: perspective gives 2 * 1.9 / 10, while
    // |x| <= 2.5 z forces z >= 0.76 and value 0.76 + 1.9^2 / (100 * 0.76)
    let inst = ProblemInstance::new(dmatrix![1.0], dvector![2.0], 0.01, 100.0, dvector![1.0]).unwrap();
    let p = solve_perspective_relaxation(&solver(), &inst).unwrap().objective;
    let m = solve_bigm_relaxation(&solver(), &inst, 2.5).unwrap().objective;
    assert!((p - 0.38).abs() < 1e-6);
    assert!((m - (0.76 + 3.61 / 76.0)).abs() < 1e-5);
    assert!(m > p + 0.1);
}

#[test]
fn gamma0_closed_forms() {
    let inst = ProblemInstance::with_defaults(DMatrix::identity(2, 2), dvector![3.0, 0.0], 1.0).unwrap();
    assert!((compute_gamma0(&solver(), &inst).unwrap() - 16.0).abs() < 1e-5);

    let inst = ProblemInstance::with_defaults(DMatrix::identity(2, 2), dvector![1.0, 0.5], 4.0).unwrap();
    assert!((compute_gamma0(&solver(), &inst).unwrap() - 9.0).abs() < 1e-5);

    let inst = ProblemInstance::new(DMatrix::identity(2, 2), dvector![3.0, 0.0], 1.0, 1.0, DVector::zeros(2)).unwrap();
    assert_eq!(compute_gamma0(&solver(), &inst).unwrap(), 0.0);

    let inst = random_instance(1, 3, 5, 0.3);
    assert_eq!(compute_gamma0(&solver(), &inst).unwrap(), f64::INFINITY);
}

#[test]
fn node_primal_examples() {
    let s = solver();
    let inst = random_instance(300, 8, 4, 0.6);
    let g0 = compute_gamma0(&s, &inst).unwrap();
    let inst = inst.with_gamma(2.0 * g0).unwrap();
    let (e0, e1) = (IndexSet::new(4), IndexSet::new(4));
    let (_, v) = solve_node_primal(&s, &inst, &e0, &e1, None).unwrap();
    let x = solve_bpd(&s, &inst).unwrap();
    assert!((v - 2.0 / inst.gamma().sqrt() * l1(&x.x, inst.weights())).abs() < 1e-6);

    // complete pattern: |I1| + min-norm on the support, by direct bisection
    let inst = random_instance(301, 5, 6, 0.7);
    let support = [0, 2, 5];
    let i1 = IndexSet::from_indices(6, support);
    let i0 = IndexSet::from_indices(6, [1, 3, 4]);
    let (_, v) = solve_node_primal(&s, &inst, &i0, &i1, None).unwrap();
    let bm = inst.a().select_columns(&support);
    let y = |mu: f64| (bm.tr_mul(&bm) + DMatrix::identity(3, 3) * mu).lu().solve(&bm.tr_mul(inst.b())).unwrap();
    let (mut lo, mut hi) = (1e-12f64, 1e12f64);
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if (&bm * y(mid) - inst.b()).norm_squared() <= inst.epsilon() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let expected = 3.0 + y(lo).norm_squared() / inst.gamma();
    assert!((v - expected).abs() < 1e-6, "{v} vs {expected}");

    // zero set leaving b out of reach
    let inst = ProblemInstance::with_defaults(DMatrix::identity(3, 3), dvector![1.0, 1.0, 1.0], 0.5).unwrap();
    let i0 = IndexSet::from_indices(3, [0]);
    assert!(matches!(
        solve_node_primal(&s, &inst, &i0, &IndexSet::new(3), None),
        Err(Error::NodeInfeasible)
    ));
    let both = IndexSet::from_indices(3, [0]);
    assert!(solve_node_primal(&s, &inst, &both, &both, None).is_err());
}

#[test]
fn node_bounds_grow_with_fixings_and_infeasibility_is_inherited() {
    let s = solver();
    for seed in 0..6 {
        let n = 7;
        let inst = random_instance(400 + seed, 5, n, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut i0 = IndexSet::new(n);
        let mut i1 = IndexSet::new(n);
        let mut last = solve_node_primal(&s, &inst, &i0, &i1, None).unwrap().1;
        for _ in 0..n {
            let free: Vec<usize> = (0..n).filter(|&i| !i0.contains(i) && !i1.contains(i)).collect();
            let j = free[rng.random_range(0..free.len())];
            let grow_zero = rng.random_bool(0.5);
            let (c0, c1) = if grow_zero { (i0.with(j), i1.clone()) } else { (i0.clone(), i1.with(j)) };
            match solve_node_primal(&s, &inst, &c0, &c1, None) {
                Ok((_, v)) => {
                    assert!(v >= last - 1e-7, "seed {seed}: {v} < {last}");
                    last = v;
                    i0 = c0;
                    i1 = c1;
                }
                Err(Error::NodeInfeasible) => {
                    for k in (0..n).filter(|&k| !c0.contains(k) && !c1.contains(k)) {
                        assert!(matches!(
                            solve_node_primal(&s, &inst, &c0.with(k), &c1, None),
                            Err(Error::NodeInfeasible)
                        ));
                    }
                    break;
                }
                Err(e) => panic!("{e}"),
            }
        }
    }
}

#[test]
fn node_dual_examples() {
    let s = solver();
    let inst = random_instance(500, 5, 8, 0.2);
    let (e0, e1) = (IndexSet::new(8), IndexSet::new(8));
    assert_eq!(dual_objective(&inst, &e0, &IndexSet::from_indices(8, [2]), &DVector::zeros(5), 0.0), 1.0);

    let d = solve_node_dual(&s, &inst, &e0, &e1, None).unwrap();
    let (_, p) = solve_node_primal(&s, &inst, &e0, &e1, None).unwrap();
    assert!((d.objective - p).abs() < 1e-5, "{} vs {p}", d.objective);

    let i1 = IndexSet::from_indices(8, [0, 3]);
    let (_, p) = solve_node_primal(&s, &inst, &e0, &i1, None).unwrap();
    let d = solve_node_dual(&s, &inst, &e0, &i1, None).unwrap();
    assert!((d.objective - p).abs() < 1e-5);

    // weak duality on random feasible multipliers
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let sg = inst.gamma().sqrt();
    for _ in 0..100 {
        let mut nu = DVector::from_fn(5, |_, _| rng.sample::<f64, _>(StandardNormal));
        let worst = (0..8)
            .filter(|i| !i1.contains(*i))
            .map(|i| inst.a().column(i).dot(&nu).abs() / (2.0 / sg))
            .fold(0.0, f64::max);
        if worst > 1.0 {
            nu /= worst;
        }
        let v = dual_objective(&inst, &e0, &i1, &nu, 1e-12);
        assert!(v.is_finite() && v <= p + 1e-9);
    }
}
