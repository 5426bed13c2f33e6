//! Clarabel interior-point backend.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus as ClStatus, SupportedConeT,
};
use sparsecs_core::conic::{
    svec_len, AffineExpr, Cone, ConicProgram, ConicSolution, ConicSolver, SolverStatus, REQUESTED_TOLERANCE,
};

/// Stateless handle; every call builds and solves a fresh problem.
#[derive(Debug, Clone, Copy, Default)]
pub struct ClarabelSolver {
    pub verbose: bool,
}

impl ClarabelSolver {
    pub fn new() -> Self {
        Self::default()
    }
}

/// Row-wise data of `A x + s = b` in triplet form.
struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    /// Appends `s = expr(x)`, i.e. `-coef' x + s = constant`.
    fn push(&mut self, e: &AffineExpr) {
        let r = self.b.len();
        for &(j, c) in &e.terms {
            if c != 0.0 {
                self.i.push(r);
                self.j.push(j);
                self.v.push(-c);
            }
        }
        self.b.push(e.constant);
    }
}

fn map_status(s: ClStatus) -> SolverStatus {
    match s {
        ClStatus::Solved | ClStatus::AlmostSolved => SolverStatus::Optimal,
        ClStatus::PrimalInfeasible | ClStatus::AlmostPrimalInfeasible => SolverStatus::Infeasible,
        ClStatus::DualInfeasible | ClStatus::AlmostDualInfeasible => SolverStatus::Unbounded,
        ClStatus::MaxTime => SolverStatus::TimeLimit,
        _ => SolverStatus::NumericLimit,
    }
}

impl ConicSolver for ClarabelSolver {
    fn solve(&self, program: &ConicProgram, time_limit: Option<f64>) -> ConicSolution {
        let n = program.num_vars();
        let mut rows = Rows {
            i: Vec::new(),
            j: Vec::new(),
            v: Vec::new(),
            b: Vec::new(),
        };
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

        let mut bounds = 0;
        for k in 0..n {
            if program.lower[k].is_finite() {
                rows.push(&AffineExpr::var(k).plus_constant(-program.lower[k]));
                bounds += 1;
            }
            if program.upper[k].is_finite() {
                rows.push(&AffineExpr::term(k, -1.0).plus_constant(program.upper[k]));
                bounds += 1;
            }
        }
        if bounds > 0 {
            cones.push(SupportedConeT::NonnegativeConeT(bounds));
        }

        let sqrt2 = std::f64::consts::SQRT_2;
        for c in &program.constraints {
            match c.cone {
                Cone::Zero => {
                    c.rows.iter().for_each(|e| rows.push(e));
                    cones.push(SupportedConeT::ZeroConeT(c.rows.len()));
                }
                Cone::Nonnegative => {
                    c.rows.iter().for_each(|e| rows.push(e));
                    cones.push(SupportedConeT::NonnegativeConeT(c.rows.len()));
                }
                Cone::SecondOrder if c.rows.len() == 1 => {
                    rows.push(&c.rows[0]);
                    cones.push(SupportedConeT::NonnegativeConeT(1));
                }
                Cone::SecondOrder => {
                    c.rows.iter().for_each(|e| rows.push(e));
                    cones.push(SupportedConeT::SecondOrderConeT(c.rows.len()));
                }
                Cone::RotatedSecondOrder => {
                    // 2uv >= |w|^2  <=>  (u + v, u - v, sqrt(2) w) in the cone
                    let (u, v) = (&c.rows[0], &c.rows[1]);
                    let mut sum = u.clone();
                    sum.terms.extend(v.terms.iter().copied());
                    sum.constant += v.constant;
                    let mut diff = u.clone();
                    diff.terms.extend(v.terms.iter().map(|&(j, x)| (j, -x)));
                    diff.constant -= v.constant;
                    rows.push(&sum);
                    rows.push(&diff);
                    for w in &c.rows[2..] {
                        rows.push(&w.clone().scaled(sqrt2));
                    }
                    cones.push(SupportedConeT::SecondOrderConeT(c.rows.len()));
                }
                Cone::PsdTriangle(d) => {
                    debug_assert_eq!(c.rows.len(), svec_len(d));
                    c.rows.iter().for_each(|e| rows.push(e));
                    cones.push(SupportedConeT::PSDTriangleConeT(d));
                }
            }
        }

        let m = rows.b.len();
        let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
        let p = CscMatrix::zeros((n, n));
        let mut builder = DefaultSettingsBuilder::default();
        builder
            .verbose(self.verbose)
            .tol_feas(REQUESTED_TOLERANCE)
            .tol_gap_abs(REQUESTED_TOLERANCE)
            .tol_gap_rel(REQUESTED_TOLERANCE);
        if let Some(t) = time_limit {
            builder.time_limit(t.max(1e-3));
        }
        let settings = match builder.build() {
            Ok(s) => s,
            Err(_) => return ConicSolution::failed(SolverStatus::NumericLimit, n),
        };
        let mut solver = match DefaultSolver::new(&p, &program.objective, &a, &rows.b, &cones, settings) {
            Ok(s) => s,
            Err(_) => return ConicSolution::failed(SolverStatus::NumericLimit, n),
        };
        solver.solve();
        let sol = &solver.solution;
        let status = map_status(sol.status);
        ConicSolution {
            x: sol.x.clone(),
            status,
            objective: (status == SolverStatus::Optimal).then_some(sol.obj_val),
            primal_residual: sol.r_prim,
            dual_residual: sol.r_dual,
        }
    }
}
