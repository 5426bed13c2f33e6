//! Backend-neutral conic programs and the solver contract.
//!
//! A [`ConicProgram`] minimizes a linear objective over box-bounded variables
//! subject to blocks of affine expressions constrained to lie in a cone. The
//! supported cones are exactly the ones this crate emits:
//!
//! * `Zero`: every row equals zero (equalities),
//! * `Nonnegative`: every row is `>= 0`,
//! * `SecondOrder`: `(t, v)` with `t >= ||v||_2`,
//! * `RotatedSecondOrder`: `(u, v, w)` with `2 u v >= ||w||_2^2`, `u, v >= 0`,
//! * `PsdTriangle(d)`: the scaled upper triangle of a symmetric `d x d`
//!   matrix, column by column (`(0,0), (0,1), (1,1), (0,2), ...`), with
//!   off-diagonal rows multiplied by `sqrt(2)`. See [`svec_index`].

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::{Error, Result};

/// Feasibility tolerance requested from backends.
pub const REQUESTED_TOLERANCE: f64 = 1e-8;
/// Largest (scaled) constraint violation accepted for an `Optimal` status.
pub const ACCEPTED_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(i: usize) -> Self {
        Self::term(i, 1.0)
    }

    pub fn term(i: usize, coef: f64) -> Self {
        Self {
            terms: vec![(i, coef)],
            constant: 0.0,
        }
    }

    pub fn plus(mut self, i: usize, coef: f64) -> Self {
        if coef != 0.0 {
            self.terms.push((i, coef));
        }
        self
    }

    pub fn plus_constant(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(i, c)| c * x[i]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    Zero,
    Nonnegative,
    SecondOrder,
    RotatedSecondOrder,
    PsdTriangle(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeConstraint {
    pub cone: Cone,
    pub rows: Vec<AffineExpr>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub objective: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub constraints: Vec<ConeConstraint>,
}

/// Length of the scaled triangle of a `d x d` symmetric matrix.
pub fn svec_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Row of entry `(i, j)` in the scaled triangle (order of `i`, `j` irrelevant).
pub fn svec_index(i: usize, j: usize) -> usize {
    let (r, c) = if i <= j { (i, j) } else { (j, i) };
    c * (c + 1) / 2 + r
}

/// Unpacks a scaled triangle into a dense symmetric matrix.
pub fn smat(d: usize, values: &[f64]) -> DMatrix<f64> {
    let inv_sqrt2 = core::f64::consts::FRAC_1_SQRT_2;
    DMatrix::from_fn(d, d, |i, j| {
        let v = values[svec_index(i, j)];
        if i == j {
            v
        } else {
            v * inv_sqrt2
        }
    })
}

impl ConicProgram {
    pub fn new() -> Self {
        Self {
            objective: Vec::new(),
            lower: Vec::new(),
            upper: Vec::new(),
            constraints: Vec::new(),
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    /// Appends `count` free variables with zero cost; returns the first index.
    pub fn add_variables(&mut self, count: usize) -> usize {
        let start = self.objective.len();
        self.objective.resize(start + count, 0.0);
        self.lower.resize(start + count, f64::NEG_INFINITY);
        self.upper.resize(start + count, f64::INFINITY);
        start
    }

    pub fn set_bounds(&mut self, i: usize, lower: f64, upper: f64) {
        self.lower[i] = lower;
        self.upper[i] = upper;
    }

    pub fn add_constraint(&mut self, cone: Cone, rows: Vec<AffineExpr>) {
        self.constraints.push(ConeConstraint { cone, rows });
    }

    /// Number of rows bounds expand to when a backend has no native bounds.
    pub fn finite_bound_count(&self) -> usize {
        self.lower.iter().filter(|v| v.is_finite()).count()
            + self.upper.iter().filter(|v| v.is_finite()).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_vars();
        if self.lower.len() != n || self.upper.len() != n {
            return Err(Error::InvalidProgram(format!(
                "bounds have lengths {}/{} for {} variables",
                self.lower.len(),
                self.upper.len(),
                n
            )));
        }
        if !self.objective.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidProgram("non-finite objective".into()));
        }
        for (i, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if lo.is_nan() || hi.is_nan() || *lo == f64::INFINITY || *hi == f64::NEG_INFINITY {
                return Err(Error::InvalidProgram(format!("bad bounds on variable {i}")));
            }
        }
        for (k, c) in self.constraints.iter().enumerate() {
            let rows = c.rows.len();
            let ok = match c.cone {
                Cone::Zero | Cone::Nonnegative => rows >= 1,
                Cone::SecondOrder => rows >= 1,
                Cone::RotatedSecondOrder => rows >= 2,
                Cone::PsdTriangle(d) => d >= 1 && rows == svec_len(d),
            };
            if !ok {
                return Err(Error::InvalidProgram(format!(
                    "constraint {k}: {rows} rows do not fit cone {:?}",
                    c.cone
                )));
            }
            for row in &c.rows {
                if !row.constant.is_finite() {
                    return Err(Error::InvalidProgram(format!("constraint {k}: non-finite constant")));
                }
                for &(i, coef) in &row.terms {
                    if i >= n {
                        return Err(Error::InvalidProgram(format!(
                            "constraint {k}: variable {i} out of range ({n})"
                        )));
                    }
                    if !coef.is_finite() {
                        return Err(Error::InvalidProgram(format!(
                            "constraint {k}: non-finite coefficient"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest violation of any bound or cone membership at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, v) in x.iter().enumerate() {
            worst = worst.max(self.lower[i] - v).max(v - self.upper[i]);
        }
        for c in &self.constraints {
            let vals: Vec<f64> = c.rows.iter().map(|r| r.eval(x)).collect();
            worst = worst.max(cone_violation(c.cone, &vals));
        }
        worst
    }

    /// Magnitude used to scale violations: the largest constant or bound.
    pub fn data_scale(&self) -> f64 {
        let consts = self
            .constraints
            .iter()
            .flat_map(|c| c.rows.iter().map(|r| r.constant.abs()));
        let bounds = self
            .lower
            .iter()
            .chain(&self.upper)
            .filter(|v| v.is_finite())
            .map(|v| v.abs());
        consts.chain(bounds).fold(1.0, f64::max)
    }
}

impl Default for ConicProgram {
    fn default() -> Self {
        Self::new()
    }
}

fn cone_violation(cone: Cone, v: &[f64]) -> f64 {
    match cone {
        Cone::Zero => v.iter().fold(0.0, |w, r| w.max(r.abs())),
        Cone::Nonnegative => v.iter().fold(0.0, |w, r| w.max(-r)),
        Cone::SecondOrder => {
            let tail = libm::sqrt(v[1..].iter().map(|r| r * r).sum());
            (tail - v[0]).max(0.0)
        }
        Cone::RotatedSecondOrder => {
            // 2uv >= |w|^2  <=>  u + v >= ||(u - v, sqrt(2) w)||
            let (u, w0) = (v[0], v[1]);
            let w2: f64 = v[2..].iter().map(|r| r * r).sum();
            let norm = libm::sqrt((u - w0) * (u - w0) + 2.0 * w2);
            (norm - (u + w0)).max(0.0)
        }
        Cone::PsdTriangle(d) => {
            let m = smat(d, v);
            let eig = SymmetricEigen::new(m);
            (-eig.eigenvalues.min()).max(0.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericLimit,
    TimeLimit,
}

/// What a backend returns for one solve.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub x: Vec<f64>,
    pub status: SolverStatus,
    /// Objective at `x`; meaningful when `status` is `Optimal`.
    pub objective: Option<f64>,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

impl ConicSolution {
    pub fn failed(status: SolverStatus, num_vars: usize) -> Self {
        Self {
            x: vec![0.0; num_vars],
            status,
            objective: None,
            primal_residual: f64::INFINITY,
            dual_residual: f64::INFINITY,
        }
    }
}

/// A conic optimization backend. One call is one independent solve.
pub trait ConicSolver {
    fn solve(&self, program: &ConicProgram, time_limit: Option<f64>) -> ConicSolution;
}

impl<S: ConicSolver + ?Sized> ConicSolver for &S {
    fn solve(&self, program: &ConicProgram, time_limit: Option<f64>) -> ConicSolution {
        (**self).solve(program, time_limit)
    }
}

/// Validates `program`, solves it, and re-checks an `Optimal` answer
/// against [`ACCEPTED_TOLERANCE`]; looser points are reported as
/// `NumericLimit`.
pub fn solve_conic<S: ConicSolver + ?Sized>(
    solver: &S,
    program: &ConicProgram,
    time_limit: Option<f64>,
) -> Result<ConicSolution> {
    program.validate()?;
    let mut sol = solver.solve(program, time_limit);
    if sol.status == SolverStatus::Optimal {
        if sol.x.len() != program.num_vars() {
            sol.status = SolverStatus::NumericLimit;
            return Ok(sol);
        }
        let violation = program.max_violation(&sol.x);
        sol.primal_residual = sol.primal_residual.max(violation);
        if violation > ACCEPTED_TOLERANCE * program.data_scale() {
            sol.status = SolverStatus::NumericLimit;
        } else {
            sol.objective = Some(program.objective_value(&sol.x));
        }
    }
    Ok(sol)
}
