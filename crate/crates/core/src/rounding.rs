//! Greedy rounding of a relaxation point into a feasible sparse vector.
//!
//! Columns are added in decreasing `|score|` order until the least-squares
//! residual meets the budget. The inverse Gram matrix of the selected
//! columns is grown by block inversion, so each step costs
//! `O(k^2 + m k)` for `k` selected columns.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::linalg;
use crate::{Error, ProblemInstance, Result, SolutionVector};

/// Schur complements below this fraction of `a'a` count as singular.
pub const SCHUR_RELATIVE_TOL: f64 = 1e-12;

/// Least-squares fit of `b` on a growing set of columns.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionState {
    pub selected: Vec<usize>,
    /// Inverse (pseudo-inverse once degenerate) of `A_I' A_I`.
    pub gram_inverse: DMatrix<f64>,
    pub coefficients: DVector<f64>,
    pub residual: DVector<f64>,
    pub residual_sq: f64,
    columns: DMatrix<f64>,
    atb: DVector<f64>,
    b: DVector<f64>,
}

impl ProjectionState {
    /// The empty selection: residual `b`.
    pub fn new(b: &DVector<f64>) -> Self {
        Self {
            selected: Vec::new(),
            gram_inverse: DMatrix::zeros(0, 0),
            coefficients: DVector::zeros(0),
            residual: b.clone(),
            residual_sq: b.norm_squared(),
            columns: DMatrix::zeros(b.len(), 0),
            atb: DVector::zeros(0),
            b: b.clone(),
        }
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    /// Columns of the current selection, in selection order.
    pub fn columns(&self) -> &DMatrix<f64> {
        &self.columns
    }

    fn refresh(&mut self) {
        self.coefficients = &self.gram_inverse * &self.atb;
        self.residual = &self.b - &self.columns * &self.coefficients;
        self.residual_sq = self.residual.norm_squared();
    }

    fn appended(&self, index: usize, column: &DVector<f64>) -> (Vec<usize>, DMatrix<f64>, DVector<f64>) {
        let k = self.len();
        let mut selected = self.selected.clone();
        selected.push(index);
        let columns = self.columns.clone().insert_column(k, 0.0);
        let mut columns = columns;
        columns.set_column(k, column);
        let mut atb = self.atb.clone().insert_row(k, 0.0);
        atb[k] = column.dot(&self.b);
        (selected, columns, atb)
    }

    /// Adds `column` (labelled `index`) by block inversion:
    /// with `g = G^{-1} A_I' a` and `s = a'a - a'A_I g`,
    /// the new inverse is `[[G^{-1} + g g'/s, -g/s], [-g'/s, 1/s]]`.
    pub fn extend_gram_inverse(&self, index: usize, column: &DVector<f64>) -> Result<ProjectionState> {
        let k = self.len();
        let d = column.norm_squared();
        let u = self.columns.tr_mul(column);
        let g = &self.gram_inverse * &u;
        let s = d - u.dot(&g);
        if !(s > SCHUR_RELATIVE_TOL * d) {
            return Err(Error::SingularSchurComplement(s));
        }
        let mut inv = DMatrix::zeros(k + 1, k + 1);
        let top = &self.gram_inverse + (&g * g.transpose()) / s;
        inv.view_mut((0, 0), (k, k)).copy_from(&top);
        for i in 0..k {
            inv[(i, k)] = -g[i] / s;
            inv[(k, i)] = -g[i] / s;
        }
        inv[(k, k)] = 1.0 / s;
        let (selected, columns, atb) = self.appended(index, column);
        let mut next = ProjectionState {
            selected,
            gram_inverse: inv,
            coefficients: DVector::zeros(0),
            residual: DVector::zeros(0),
            residual_sq: 0.0,
            columns,
            atb,
            b: self.b.clone(),
        };
        next.refresh();
        Ok(next)
    }

    /// Adds `column` recomputing the Gram pseudo-inverse from scratch.
    pub fn extend_direct(&self, index: usize, column: &DVector<f64>) -> ProjectionState {
        let (selected, columns, atb) = self.appended(index, column);
        let gram = columns.tr_mul(&columns);
        let mut next = ProjectionState {
            selected,
            gram_inverse: linalg::pseudo_inverse(&gram),
            coefficients: DVector::zeros(0),
            residual: DVector::zeros(0),
            residual_sq: 0.0,
            columns,
            atb,
            b: self.b.clone(),
        };
        next.refresh();
        next
    }

    /// Block update, falling back to a fresh pseudo-inverse when the new
    /// column is (numerically) in the span of the selected ones.
    pub fn push(&self, index: usize, column: &DVector<f64>) -> ProjectionState {
        self.extend_gram_inverse(index, column)
            .unwrap_or_else(|_| self.extend_direct(index, column))
    }
}

/// Column order by decreasing `|score|`, ties to the lower index.
pub fn score_order(score: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&i, &j| score[j].abs().total_cmp(&score[i].abs()).then(i.cmp(&j)));
    order
}

/// Adds columns in score order until `||A x - b||^2 <= epsilon` and returns
/// the least-squares coefficients on that prefix.
pub fn greedy_round(inst: &ProblemInstance, score: &DVector<f64>) -> Result<SolutionVector> {
    let n = inst.n();
    if score.len() != n {
        return Err(Error::DimensionMismatch {
            what: "length of score",
            expected: n,
            found: score.len(),
        });
    }
    let eps = inst.epsilon();
    if inst.zero_is_feasible() {
        return Ok(SolutionVector::zeros(n));
    }
    let all: Vec<usize> = (0..n).collect();
    if linalg::subset_residual_sq(inst.a(), inst.b(), &all) > eps {
        return Err(Error::NoFeasibleCompletion);
    }
    let mut state = ProjectionState::new(inst.b());
    for i in score_order(score) {
        let col = inst.a().column(i).into_owned();
        state = state.push(i, &col);
        if state.residual_sq <= eps {
            break;
        }
    }
    if state.residual_sq > eps {
        // rounding drift in the incremental updates; refit directly
        let direct = linalg::subset_residual_sq(inst.a(), inst.b(), &state.selected);
        if direct > eps {
            return Err(Error::NoFeasibleCompletion);
        }
        let a_s = inst.a().select_columns(&state.selected);
        let coef = linalg::pseudo_inverse(&a_s) * inst.b();
        return Ok(SolutionVector::new(linalg::scatter(n, &state.selected, &coef)));
    }
    Ok(SolutionVector::new(linalg::scatter(n, &state.selected, &state.coefficients)))
}
