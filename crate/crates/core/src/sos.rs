//! Degree-1 sum-of-squares lower bound.
//!
//! With `f(z, x) = sum z_i + (1/gamma) sum w_i^2 x_i^2` the bound is the
//! largest `lambda` such that
//!
//! ```text
//! f - lambda = v' S v + tau (epsilon - ||A x - b||^2)
//!              + sum t_i (x_i z_i - x_i) + sum r_i (z_i^2 - z_i)
//! ```
//!
//! with `S` positive semidefinite, `tau >= 0` and `v = (x_1..x_n, z_1..z_n, 1)`.
//! The basis keeps the constant monomial last.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::conic::{solve_conic, svec_index, svec_len, AffineExpr, Cone, ConicProgram, ConicSolver, SolverStatus};
use crate::{Error, ProblemInstance, Result};

/// Default cap on `n`; the semidefinite block has side `2n + 1`.
pub const DEFAULT_MAX_N: usize = 200;
/// Smallest eigenvalue of `S` accepted as positive semidefinite.
pub const PSD_TOLERANCE: f64 = -1e-7;
/// Largest accepted mismatch between monomial coefficients.
pub const IDENTITY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct SosCertificate {
    pub lambda: f64,
    /// Gram matrix over the basis `(x, z, 1)`.
    pub s: DMatrix<f64>,
    pub tau: f64,
    pub t: DVector<f64>,
    pub r: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SosBound {
    pub bound: f64,
    pub certificate: SosCertificate,
    pub status: SolverStatus,
}

/// Index of `x_i`, `z_i` and the constant in the basis.
fn xi(i: usize) -> usize {
    i
}
fn zi(n: usize, i: usize) -> usize {
    n + i
}
fn ci(n: usize) -> usize {
    2 * n
}

/// The Gram matrix implied by the multipliers, exactly.
pub fn gram_from_multipliers(
    inst: &ProblemInstance,
    lambda: f64,
    tau: f64,
    t: &DVector<f64>,
    r: &DVector<f64>,
) -> DMatrix<f64> {
    let n = inst.n();
    let d = 2 * n + 1;
    let a = inst.a();
    let ata = a.tr_mul(a);
    let atb = a.tr_mul(inst.b());
    let w = inst.weights();
    let g = inst.gamma();
    let mut s = DMatrix::zeros(d, d);
    for i in 0..n {
        for j in 0..n {
            s[(xi(i), xi(j))] = tau * ata[(i, j)];
        }
        s[(xi(i), xi(i))] += w[i] * w[i] / g;
        s[(zi(n, i), zi(n, i))] = -r[i];
        s[(xi(i), zi(n, i))] = -0.5 * t[i];
        s[(zi(n, i), xi(i))] = -0.5 * t[i];
        let xc = 0.5 * t[i] - tau * atb[i];
        s[(xi(i), ci(n))] = xc;
        s[(ci(n), xi(i))] = xc;
        let zc = 0.5 * (1.0 + r[i]);
        s[(zi(n, i), ci(n))] = zc;
        s[(ci(n), zi(n, i))] = zc;
    }
    s[(ci(n), ci(n))] = -lambda + tau * (inst.b().norm_squared() - inst.epsilon());
    s
}

/// Solves the degree-1 relaxation. `max_n` guards the SDP size.
///
/// The returned certificate is rebuilt from the multipliers, and `lambda`
/// is lowered (or raised) to the largest value keeping `S` positive
/// semidefinite whenever the leading block of `S` is positive definite, so
/// the bound is valid whatever the backend tolerance. When the backend
/// stops early the certificate is repaired the same way and the status is
/// passed through.
pub fn solve_sos_d1<S: ConicSolver + ?Sized>(
    solver: &S,
    inst: &ProblemInstance,
    time_limit: Option<f64>,
    max_n: usize,
) -> Result<SosBound> {
    let n = inst.n();
    if n > max_n {
        return Err(Error::ProblemTooLarge { n, limit: max_n });
    }
    crate::relaxations::check_feasible(inst)?;
    let d = 2 * n + 1;
    let mut prog = ConicProgram::new();
    let lam = prog.add_variables(1);
    let tau = prog.add_variables(1);
    let t0 = prog.add_variables(n);
    let r0 = prog.add_variables(n);
    prog.objective[lam] = -1.0;
    prog.set_bounds(tau, 0.0, f64::INFINITY);

    let a = inst.a();
    let ata = a.tr_mul(a);
    let atb = a.tr_mul(inst.b());
    let w = inst.weights();
    let g = inst.gamma();
    let sqrt2 = core::f64::consts::SQRT_2;
    let mut rows: Vec<AffineExpr> = (0..svec_len(d)).map(|_| AffineExpr::default()).collect();
    let mut set = |i: usize, j: usize, e: AffineExpr| {
        rows[svec_index(i, j)] = if i == j { e } else { e.scaled(sqrt2) };
    };
    for i in 0..n {
        for j in i..n {
            let mut e = AffineExpr::term(tau, ata[(i, j)]);
            if i == j {
                e = e.plus_constant(w[i] * w[i] / g);
            }
            set(xi(i), xi(j), e);
        }
        set(zi(n, i), zi(n, i), AffineExpr::term(r0 + i, -1.0));
        set(xi(i), zi(n, i), AffineExpr::term(t0 + i, -0.5));
        set(xi(i), ci(n), AffineExpr::term(t0 + i, 0.5).plus(tau, -atb[i]));
        set(zi(n, i), ci(n), AffineExpr::term(r0 + i, 0.5).plus_constant(0.5));
    }
    set(
        ci(n),
        ci(n),
        AffineExpr::term(lam, -1.0).plus(tau, inst.b().norm_squared() - inst.epsilon()),
    );
    prog.add_constraint(Cone::PsdTriangle(d), rows);

    let sol = solve_conic(solver, &prog, time_limit)?;
    if sol.status == SolverStatus::Infeasible || sol.status == SolverStatus::Unbounded {
        return Err(Error::Solver(sol.status));
    }
    if sol.x.iter().any(|v| !v.is_finite()) || sol.x.len() != prog.num_vars() {
        return Err(Error::Solver(sol.status));
    }
    let tau_v = sol.x[tau].max(0.0);
    let t = DVector::from_column_slice(&sol.x[t0..t0 + n]);
    let r = DVector::from_column_slice(&sol.x[r0..r0 + n]);
    let lambda = match repaired_lambda(inst, tau_v, &t, &r) {
        Some(l) => l,
        None if sol.status == SolverStatus::Optimal => sol.x[lam],
        None => return Err(Error::Solver(sol.status)),
    };
    let s = gram_from_multipliers(inst, lambda, tau_v, &t, &r);
    Ok(SosBound {
        bound: lambda,
        certificate: SosCertificate {
            lambda,
            s,
            tau: tau_v,
            t,
            r,
        },
        status: sol.status,
    })
}

/// Largest `lambda` with `S` PSD for fixed multipliers, via the Schur
/// complement of the constant entry. `None` when the leading block is not
/// safely positive definite.
fn repaired_lambda(inst: &ProblemInstance, tau: f64, t: &DVector<f64>, r: &DVector<f64>) -> Option<f64> {
    let n = inst.n();
    let s = gram_from_multipliers(inst, 0.0, tau, t, r);
    let k = 2 * n;
    let s11 = s.view((0, 0), (k, k)).into_owned();
    let s12 = s.view((0, k), (k, 1)).into_owned();
    let scale = s11.amax().max(1.0);
    let eig = SymmetricEigen::new(s11.clone());
    if eig.eigenvalues.min() <= 1e-10 * scale {
        return None;
    }
    let chol = s11.cholesky()?;
    let y = chol.solve(&s12);
    let q = s12.dot(&y);
    // S_cc(lambda) = s_cc(0) - lambda must be >= q
    let s_cc0 = s[(k, k)];
    let margin = 1e-9 * (1.0 + q.abs() + s_cc0.abs());
    Some(s_cc0 - q - margin)
}

/// A quadratic polynomial in `y = (x, z)` stored as monomial coefficients.
#[derive(Debug, Clone, PartialEq)]
struct Quadratic {
    constant: f64,
    linear: DVector<f64>,
    /// Coefficient of `y_i y_j` at `(min, max)`; lower triangle unused.
    quad: DMatrix<f64>,
}

impl Quadratic {
    fn zero(k: usize) -> Self {
        Self {
            constant: 0.0,
            linear: DVector::zeros(k),
            quad: DMatrix::zeros(k, k),
        }
    }

    fn add_mono(&mut self, i: usize, j: usize, c: f64) {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.quad[(a, b)] += c;
    }

    fn max_abs_diff(&self, other: &Quadratic) -> f64 {
        let mut d = (self.constant - other.constant).abs();
        d = d.max((&self.linear - &other.linear).amax());
        d.max((&self.quad - &other.quad).amax())
    }
}

/// Left side `f - lambda`.
fn lhs(inst: &ProblemInstance, lambda: f64) -> Quadratic {
    let n = inst.n();
    let mut p = Quadratic::zero(2 * n);
    p.constant = -lambda;
    for i in 0..n {
        p.linear[zi(n, i)] += 1.0;
        let w = inst.weights()[i];
        p.add_mono(xi(i), xi(i), w * w / inst.gamma());
    }
    p
}

/// Right side `v' S v + tau g + sum t_i (x_i z_i - x_i) + sum r_i (z_i^2 - z_i)`.
fn rhs(inst: &ProblemInstance, cert: &SosCertificate) -> Quadratic {
    let n = inst.n();
    let k = 2 * n;
    let s = &cert.s;
    let mut p = Quadratic::zero(k);
    for i in 0..k {
        for j in 0..k {
            p.add_mono(i, j, s[(i, j)]);
        }
        p.linear[i] += s[(i, k)] + s[(k, i)];
    }
    p.constant += s[(k, k)];

    // tau (epsilon - ||A x - b||^2)
    let a = inst.a();
    let b = inst.b();
    let tau = cert.tau;
    p.constant += tau * (inst.epsilon() - b.norm_squared());
    for row in 0..inst.m() {
        for i in 0..n {
            let ai = a[(row, i)];
            if ai == 0.0 {
                continue;
            }
            p.linear[xi(i)] += 2.0 * tau * ai * b[row];
            for j in 0..n {
                p.add_mono(xi(i), xi(j), -tau * ai * a[(row, j)]);
            }
        }
    }
    for i in 0..n {
        p.add_mono(xi(i), zi(n, i), cert.t[i]);
        p.linear[xi(i)] -= cert.t[i];
        p.add_mono(zi(n, i), zi(n, i), cert.r[i]);
        p.linear[zi(n, i)] -= cert.r[i];
    }
    p
}

/// Checks a certificate with plain linear algebra: `S` symmetric and PSD
/// (smallest eigenvalue `>= -1e-7`), `tau >= 0`, and every monomial
/// coefficient of the identity matching within `1e-6`.
pub fn verify_certificate(inst: &ProblemInstance, cert: &SosCertificate) -> Result<bool> {
    let n = inst.n();
    let d = 2 * n + 1;
    if cert.s.shape() != (d, d) {
        return Err(Error::DimensionMismatch {
            what: "side of S",
            expected: d,
            found: cert.s.nrows(),
        });
    }
    for (what, v) in [("length of t", &cert.t), ("length of r", &cert.r)] {
        if v.len() != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: v.len(),
            });
        }
    }
    let finite = cert.lambda.is_finite()
        && cert.tau.is_finite()
        && cert.s.iter().all(|v| v.is_finite())
        && cert.t.iter().chain(cert.r.iter()).all(|v| v.is_finite());
    if !finite || cert.tau < 0.0 {
        return Ok(false);
    }
    if (&cert.s - cert.s.transpose()).amax() > IDENTITY_TOLERANCE {
        return Ok(false);
    }
    let eig = SymmetricEigen::new(cert.s.clone());
    if eig.eigenvalues.min() < PSD_TOLERANCE {
        return Ok(false);
    }
    Ok(lhs(inst, cert.lambda).max_abs_diff(&rhs(inst, cert)) <= IDENTITY_TOLERANCE)
}
