//! Second-order-cone relaxations and bounds.
//!
//! Every program is built as a [`ConicProgram`] and handed to the caller's
//! backend. Residual constraints are modeled as the cone
//! `(sqrt(epsilon), A x - b)`, squares `x^2 <= z theta` as rotated cones.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use crate::conic::{solve_conic, AffineExpr, Cone, ConicProgram, ConicSolution, ConicSolver, SolverStatus};
use crate::linalg::{self, RidgePath};
use crate::{Error, IndexSet, ProblemInstance, Result, SolutionVector};

/// Optimal `(x, z, theta)` of a perspective-type relaxation.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationSolution {
    pub x: DVector<f64>,
    pub z: DVector<f64>,
    pub theta: DVector<f64>,
    pub objective: f64,
    pub status: SolverStatus,
}

impl RelaxationSolution {
    fn zeros(n: usize) -> Self {
        Self {
            x: DVector::zeros(n),
            z: DVector::zeros(n),
            theta: DVector::zeros(n),
            objective: 0.0,
            status: SolverStatus::Optimal,
        }
    }
}

/// A dual multiplier for the node relaxation together with its objective.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub nu: DVector<f64>,
    pub objective: f64,
}

/// Adds `(sqrt(epsilon), A_cols x - b)` as a second-order cone, where
/// `vars[k]` is the variable holding the coefficient of column `cols[k]`.
fn add_residual_ball(prog: &mut ConicProgram, inst: &ProblemInstance, cols: &[usize], vars: &[usize]) {
    let a = inst.a();
    let mut rows = Vec::with_capacity(inst.m() + 1);
    rows.push(AffineExpr::constant(libm::sqrt(inst.epsilon())));
    for j in 0..inst.m() {
        let mut e = AffineExpr::constant(-inst.b()[j]);
        for (&c, &v) in cols.iter().zip(vars) {
            e = e.plus(v, a[(j, c)]);
        }
        rows.push(e);
    }
    prog.add_constraint(Cone::SecondOrder, rows);
}

/// `u >= |x|` as two nonnegative rows.
fn add_abs(prog: &mut ConicProgram, u: usize, x: usize) {
    prog.add_constraint(
        Cone::Nonnegative,
        vec![AffineExpr::var(u).plus(x, -1.0), AffineExpr::var(u).plus(x, 1.0)],
    );
}

/// `2 * scale * u * v >= x^2`, i.e. rotated cone `(scale u, v, x)`.
fn add_rotated(prog: &mut ConicProgram, u: AffineExpr, v: AffineExpr, x: AffineExpr) {
    prog.add_constraint(Cone::RotatedSecondOrder, vec![u, v, x]);
}

fn run<S: ConicSolver + ?Sized>(
    solver: &S,
    prog: &ConicProgram,
    time_limit: Option<f64>,
    infeasible: Error,
) -> Result<ConicSolution> {
    let sol = solve_conic(solver, prog, time_limit)?;
    match sol.status {
        SolverStatus::Optimal => Ok(sol),
        SolverStatus::Infeasible => Err(infeasible),
        s => Err(Error::Solver(s)),
    }
}

pub(crate) fn check_feasible(inst: &ProblemInstance) -> Result<()> {
    let all: Vec<usize> = (0..inst.n()).collect();
    if linalg::subset_residual_sq(inst.a(), inst.b(), &all) > inst.epsilon() {
        return Err(Error::InfeasibleInstance);
    }
    Ok(())
}

/// Minimizes `||x||_1` subject to `||A x - b||^2 <= epsilon`; weights are
/// ignored.
pub fn solve_bpd<S: ConicSolver + ?Sized>(solver: &S, inst: &ProblemInstance) -> Result<SolutionVector> {
    solve_weighted_bpd(solver, inst, &DVector::from_element(inst.n(), 1.0))
}

/// Minimizes `sum_i w_i |x_i|` subject to the residual constraint.
pub fn solve_weighted_bpd<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
    weights: &DVector<f64>,
) -> Result<SolutionVector> {
    let n = inst.n();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            what: "length of weights",
            expected: n,
            found: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|&w| !(w >= 0.0)) {
        return Err(Error::NegativeWeight(i));
    }
    check_feasible(inst)?;
    if inst.zero_is_feasible() {
        return Ok(SolutionVector::zeros(n));
    }
    let mut prog = ConicProgram::new();
    let x0 = prog.add_variables(n);
    let u0 = prog.add_variables(n);
    for i in 0..n {
        prog.objective[u0 + i] = weights[i];
        add_abs(&mut prog, u0 + i, x0 + i);
    }
    let cols: Vec<usize> = (0..n).collect();
    let vars: Vec<usize> = (x0..x0 + n).collect();
    add_residual_ball(&mut prog, inst, &cols, &vars);
    let sol = run(solver, &prog, None, Error::InfeasibleInstance)?;
    Ok(SolutionVector::new(DVector::from_column_slice(&sol.x[x0..x0 + n])))
}

/// Shared builder for the root perspective relaxation, optionally with the
/// box `-M z <= w x <= M z`.
fn perspective<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
    big_m: Option<f64>,
) -> Result<RelaxationSolution> {
    let n = inst.n();
    check_feasible(inst)?;
    if inst.zero_is_feasible() {
        return Ok(RelaxationSolution::zeros(n));
    }
    let w = inst.weights();
    let g = inst.gamma();
    let mut prog = ConicProgram::new();
    let x0 = prog.add_variables(n);
    let z0 = prog.add_variables(n);
    let t0 = prog.add_variables(n);
    for i in 0..n {
        prog.set_bounds(z0 + i, 0.0, 1.0);
        prog.set_bounds(t0 + i, 0.0, f64::INFINITY);
        if w[i] > 0.0 {
            prog.objective[z0 + i] = 1.0;
            prog.objective[t0 + i] = w[i] * w[i] / g;
            add_rotated(
                &mut prog,
                AffineExpr::term(z0 + i, 0.5),
                AffineExpr::var(t0 + i),
                AffineExpr::var(x0 + i),
            );
            if let Some(m) = big_m {
                prog.add_constraint(
                    Cone::Nonnegative,
                    vec![
                        AffineExpr::term(z0 + i, m).plus(x0 + i, -w[i]),
                        AffineExpr::term(z0 + i, m).plus(x0 + i, w[i]),
                    ],
                );
            }
        } else {
            // unpenalized coordinate: the infimum drives z to 0
            prog.set_bounds(z0 + i, 0.0, 0.0);
            prog.set_bounds(t0 + i, 0.0, 0.0);
        }
    }
    let cols: Vec<usize> = (0..n).collect();
    let vars: Vec<usize> = (x0..x0 + n).collect();
    add_residual_ball(&mut prog, inst, &cols, &vars);
    let sol = run(solver, &prog, None, Error::InfeasibleInstance)?;
    let objective = sol.objective.unwrap_or_else(|| prog.objective_value(&sol.x));
    Ok(RelaxationSolution {
        x: DVector::from_column_slice(&sol.x[x0..x0 + n]),
        z: DVector::from_iterator(n, sol.x[z0..z0 + n].iter().map(|v| v.clamp(0.0, 1.0))),
        theta: DVector::from_iterator(n, sol.x[t0..t0 + n].iter().map(|v| v.max(0.0))),
        objective,
        status: sol.status,
    })
}

/// The perspective relaxation: binaries relaxed to `z in [0, 1]` with
/// `x_i^2 <= z_i theta_i`. Coordinates with zero weight are unpenalized and
/// reported with `z_i = theta_i = 0`.
pub fn solve_perspective_relaxation<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
) -> Result<RelaxationSolution> {
    perspective(solver, inst, None)
}

/// The perspective relaxation strengthened by `|w_i x_i| <= M z_i`.
///
/// Valid as a relaxation when `M >= max ||W x||_inf` over the residual set,
/// i.e. `M >= sqrt(gamma0)` with `gamma0` from [`compute_gamma0`].
pub fn solve_bigm_relaxation<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
    big_m: f64,
) -> Result<RelaxationSolution> {
    if !(big_m > 0.0) {
        return Err(Error::NonPositiveParameter("M"));
    }
    perspective(solver, inst, Some(big_m))
}

fn check_node(inst: &ProblemInstance, i0: &IndexSet, i1: &IndexSet) -> Result<Vec<usize>> {
    let n = inst.n();
    for (what, s) in [("universe of I0", i0), ("universe of I1", i1)] {
        if s.universe() != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: s.universe(),
            });
        }
    }
    if !i0.is_disjoint(i1) {
        return Err(Error::InvalidProgram("I0 and I1 overlap".into()));
    }
    let cols = i0.complement();
    if linalg::subset_residual_sq(inst.a(), inst.b(), &cols) > inst.epsilon() {
        return Err(Error::NodeInfeasible);
    }
    Ok(cols)
}

/// Node relaxation in which every free coordinate costs `(2 w_i / sqrt(gamma)) |x_i|`
/// and every coordinate in `I1` costs `1 + (w_i^2 / gamma) x_i^2`.
///
/// The value never exceeds the perspective node relaxation, so it is a valid
/// lower bound for every completion of `(I0, I1)`; the two coincide when
/// `gamma >= gamma0`.
pub fn solve_node_primal<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
    i0: &IndexSet,
    i1: &IndexSet,
    time_limit: Option<f64>,
) -> Result<(SolutionVector, f64)> {
    node_program(solver, inst, i0, i1, time_limit, false)
}

/// Node relaxation keeping the perspective terms `z_i + (w_i^2/gamma) theta_i`
/// for free coordinates; at least as tight as [`solve_node_primal`] for
/// every `gamma`.
pub fn solve_node_perspective<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
    i0: &IndexSet,
    i1: &IndexSet,
    time_limit: Option<f64>,
) -> Result<(SolutionVector, f64)> {
    node_program(solver, inst, i0, i1, time_limit, true)
}

fn node_program<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
    i0: &IndexSet,
    i1: &IndexSet,
    time_limit: Option<f64>,
    perspective_terms: bool,
) -> Result<(SolutionVector, f64)> {
    let cols = check_node(inst, i0, i1)?;
    let n = inst.n();
    let fixed = i1.len() as f64;
    if inst.zero_is_feasible() {
        return Ok((SolutionVector::zeros(n), fixed));
    }
    let w = inst.weights();
    let g = inst.gamma();
    let sg = libm::sqrt(g);
    let mut prog = ConicProgram::new();
    let x0 = prog.add_variables(cols.len());
    for (k, &i) in cols.iter().enumerate() {
        let x = x0 + k;
        if w[i] == 0.0 {
            continue;
        }
        if i1.contains(i) {
            let t = prog.add_variables(1);
            prog.set_bounds(t, 0.0, f64::INFINITY);
            prog.objective[t] = w[i] * w[i] / g;
            add_rotated(&mut prog, AffineExpr::constant(0.5), AffineExpr::var(t), AffineExpr::var(x));
        } else if perspective_terms {
            let z = prog.add_variables(2);
            let t = z + 1;
            prog.set_bounds(z, 0.0, 1.0);
            prog.set_bounds(t, 0.0, f64::INFINITY);
            prog.objective[z] = 1.0;
            prog.objective[t] = w[i] * w[i] / g;
            add_rotated(&mut prog, AffineExpr::term(z, 0.5), AffineExpr::var(t), AffineExpr::var(x));
        } else {
            let u = prog.add_variables(1);
            prog.set_bounds(u, 0.0, f64::INFINITY);
            prog.objective[u] = 2.0 * w[i] / sg;
            add_abs(&mut prog, u, x);
        }
    }
    let vars: Vec<usize> = (x0..x0 + cols.len()).collect();
    add_residual_ball(&mut prog, inst, &cols, &vars);
    let sol = run(solver, &prog, time_limit, Error::NodeInfeasible)?;
    let value = sol.objective.unwrap_or_else(|| prog.objective_value(&sol.x)) + fixed;
    let xs = DVector::from_column_slice(&sol.x[x0..x0 + cols.len()]);
    Ok((SolutionVector::new(linalg::scatter(n, &cols, &xs)), value))
}

/// Objective of the node dual at `nu`:
/// `|I1| + b'nu - sqrt(epsilon) ||nu|| - sum_{i in I1} gamma (A_i'nu)^2 / (4 w_i^2)`.
///
/// Returns `-inf` when `nu` violates a dual constraint by more than `tol`.
pub fn dual_objective(
    inst: &ProblemInstance,
    i0: &IndexSet,
    i1: &IndexSet,
    nu: &DVector<f64>,
    tol: f64,
) -> f64 {
    let w = inst.weights();
    let g = inst.gamma();
    let sg = libm::sqrt(g);
    let atnu = inst.a().tr_mul(nu);
    let mut value = i1.len() as f64 + inst.b().dot(nu) - libm::sqrt(inst.epsilon()) * nu.norm();
    for i in 0..inst.n() {
        if i0.contains(i) {
            continue;
        }
        let y = atnu[i];
        if i1.contains(i) {
            if w[i] > 0.0 {
                value -= g * y * y / (4.0 * w[i] * w[i]);
            } else if y.abs() > tol {
                return f64::NEG_INFINITY;
            }
        } else if y.abs() > 2.0 * w[i] / sg + tol {
            return f64::NEG_INFINITY;
        }
    }
    value
}

/// Maximizes the node dual. Any feasible `nu` bounds the node from below;
/// at the optimum the value matches [`solve_node_primal`].
pub fn solve_node_dual<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
    i0: &IndexSet,
    i1: &IndexSet,
    time_limit: Option<f64>,
) -> Result<DualPoint> {
    let n = inst.n();
    let m = inst.m();
    for s in [i0, i1] {
        if s.universe() != n {
            return Err(Error::DimensionMismatch {
                what: "universe of index set",
                expected: n,
                found: s.universe(),
            });
        }
    }
    let a = inst.a();
    let w = inst.weights();
    let g = inst.gamma();
    let sg = libm::sqrt(g);
    let mut prog = ConicProgram::new();
    let nu0 = prog.add_variables(m);
    let s = prog.add_variables(1);
    // minimize -b'nu + sqrt(eps) s + sum gamma/(4 w^2) q_i
    for j in 0..m {
        prog.objective[nu0 + j] = -inst.b()[j];
    }
    prog.objective[s] = libm::sqrt(inst.epsilon());
    let mut norm_rows = vec![AffineExpr::var(s)];
    norm_rows.extend((0..m).map(|j| AffineExpr::var(nu0 + j)));
    prog.add_constraint(Cone::SecondOrder, norm_rows);
    let column = |i: usize| {
        let mut e = AffineExpr::default();
        for j in 0..m {
            e = e.plus(nu0 + j, a[(j, i)]);
        }
        e
    };
    let mut bounds = Vec::new();
    let mut equalities = Vec::new();
    for i in 0..n {
        if i0.contains(i) {
            continue;
        }
        if i1.contains(i) {
            if w[i] > 0.0 {
                let q = prog.add_variables(1);
                prog.set_bounds(q, 0.0, f64::INFINITY);
                prog.objective[q] = g / (4.0 * w[i] * w[i]);
                add_rotated(&mut prog, AffineExpr::constant(0.5), AffineExpr::var(q), column(i));
            } else {
                equalities.push(column(i));
            }
        } else {
            let c = 2.0 * w[i] / sg;
            bounds.push(column(i).scaled(-1.0).plus_constant(c));
            bounds.push(column(i).plus_constant(c));
        }
    }
    if !bounds.is_empty() {
        prog.add_constraint(Cone::Nonnegative, bounds);
    }
    if !equalities.is_empty() {
        prog.add_constraint(Cone::Zero, equalities);
    }
    let sol = solve_conic(solver, &prog, time_limit)?;
    let nu = match sol.status {
        SolverStatus::Optimal => DVector::from_column_slice(&sol.x[nu0..nu0 + m]),
        // nu = 0 is always feasible
        _ => DVector::zeros(m),
    };
    let mut objective = dual_objective(inst, i0, i1, &nu, 1e-7);
    let mut nu = nu;
    if !objective.is_finite() {
        nu = DVector::zeros(m);
        objective = i1.len() as f64;
    }
    Ok(DualPoint { nu, objective })
}

/// Relative tolerance for deciding that `e_i` leaves the row space of `A`.
const NULL_SPACE_TOL: f64 = 1e-9;

/// `max_i w_i^2 max_{x in X} x_i^2` over the residual set `X`, from `2n`
/// conic solves. Returns `+inf` when some weighted coordinate is unbounded
/// on `X` (the null space of `A` touches it).
pub fn compute_gamma0<S: ConicSolver + ?Sized>(solver: &S, inst: &ProblemInstance) -> Result<f64> {
    check_feasible(inst)?;
    let n = inst.n();
    let w = inst.weights();
    let a = inst.a();
    // (I - A^+ A) e_i: nonzero iff coordinate i is unbounded over X
    let pinv = linalg::pseudo_inverse(a);
    let proj = &pinv * a;
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        let mut col = -proj.column(i).into_owned();
        col[i] += 1.0;
        if col.norm() > NULL_SPACE_TOL {
            return Ok(f64::INFINITY);
        }
    }
    let cols: Vec<usize> = (0..n).collect();
    let mut best: f64 = 0.0;
    for i in 0..n {
        if w[i] == 0.0 {
            continue;
        }
        for sign in [1.0, -1.0] {
            let mut prog = ConicProgram::new();
            let x0 = prog.add_variables(n);
            prog.objective[x0 + i] = -sign;
            let vars: Vec<usize> = (x0..x0 + n).collect();
            add_residual_ball(&mut prog, inst, &cols, &vars);
            let sol = solve_conic(solver, &prog, None)?;
            match sol.status {
                SolverStatus::Optimal => {
                    let v = w[i] * sol.x[x0 + i];
                    best = best.max(v * v);
                }
                SolverStatus::Unbounded => return Ok(f64::INFINITY),
                SolverStatus::Infeasible => return Err(Error::InfeasibleInstance),
                s => return Err(Error::Solver(s)),
            }
        }
    }
    Ok(best)
}

/// Ridge point on the residual boundary and the resulting sparsity slack.
#[derive(Debug, Clone, PartialEq)]
pub struct RidgeBound {
    /// `lambda` with `||A x(lambda) - b||^2 = epsilon`, where
    /// `x(lambda) = (I / lambda + A'A)^{-1} A'b`.
    pub lambda: f64,
    pub x: DVector<f64>,
    pub residual_sq: f64,
    /// `(1/gamma) (||x_tilde||^2 - ||x(lambda)||^2)`.
    pub slack: f64,
}

pub const RIDGE_LAMBDA_MIN: f64 = 1e-10;
pub const RIDGE_LAMBDA_MAX: f64 = 1e10;
pub const RIDGE_MAX_ITER: usize = 200;
pub const RIDGE_TOL: f64 = 1e-8;

/// Finds `lambda` in `[1e-10, 1e10]` by bisection so the ridge point sits on
/// the residual boundary, then returns the additive slack of the sparsity
/// bound for a caller-supplied `||x_tilde||^2`.
pub fn ridge_bound(inst: &ProblemInstance, x_tilde_norm_sq: f64) -> Result<RidgeBound> {
    if inst.zero_is_feasible() {
        return Err(Error::DegenerateInstance);
    }
    let path = RidgePath::new(inst.a(), inst.b());
    let eps = inst.epsilon();
    let res = |lambda: f64| path.residual_sq(1.0 / lambda);
    if res(RIDGE_LAMBDA_MAX) > eps + RIDGE_TOL {
        return Err(Error::InfeasibleInstance);
    }
    // residual decreases in lambda
    let (mut lo, mut hi) = (RIDGE_LAMBDA_MIN, RIDGE_LAMBDA_MAX);
    let mut lambda = hi;
    if res(lo) > eps {
        for _ in 0..RIDGE_MAX_ITER {
            let mid = libm::sqrt(lo * hi);
            let r = res(mid);
            lambda = mid;
            if (r - eps).abs() <= RIDGE_TOL {
                break;
            }
            if r > eps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
    } else {
        lambda = lo;
    }
    let x = path.point(1.0 / lambda);
    let residual_sq = res(lambda);
    let slack = (x_tilde_norm_sq - x.norm_squared()) / inst.gamma();
    Ok(RidgeBound {
        lambda,
        x,
        residual_sq,
        slack,
    })
}
