//! Problem data, validation and objective evaluation.

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Magnitude above which a coordinate counts towards `||x||_0`.
pub const DEFAULT_SUPPORT_THRESHOLD: f64 = 1e-4;

/// Sensing matrix `A` (m x n), measurements `b`, squared-residual budget
/// `epsilon`, regularization weight `gamma` and coordinate weights `w`
/// (the diagonal of `W`).
///
/// Instances are validated on construction and immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    a: DMatrix<f64>,
    b: DVector<f64>,
    epsilon: f64,
    gamma: f64,
    weights: DVector<f64>,
}

/// Checks every instance invariant on raw parts.
pub fn validate(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    epsilon: f64,
    gamma: f64,
    weights: &DVector<f64>,
) -> Result<()> {
    let (m, n) = a.shape();
    if m == 0 {
        return Err(Error::DimensionMismatch {
            what: "rows of A",
            expected: 1,
            found: 0,
        });
    }
    if n == 0 {
        return Err(Error::DimensionMismatch {
            what: "columns of A",
            expected: 1,
            found: 0,
        });
    }
    if b.len() != m {
        return Err(Error::DimensionMismatch {
            what: "length of b",
            expected: m,
            found: b.len(),
        });
    }
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            what: "length of weights",
            expected: n,
            found: weights.len(),
        });
    }
    if !a.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteData("A"));
    }
    if !b.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteData("b"));
    }
    if !epsilon.is_finite() || !gamma.is_finite() {
        return Err(Error::NonFiniteData("parameters"));
    }
    if !weights.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteData("weights"));
    }
    if epsilon <= 0.0 {
        return Err(Error::NonPositiveParameter("epsilon"));
    }
    if gamma <= 0.0 {
        return Err(Error::NonPositiveParameter("gamma"));
    }
    if let Some(i) = weights.iter().position(|&w| w < 0.0) {
        return Err(Error::NegativeWeight(i));
    }
    Ok(())
}

impl ProblemInstance {
    pub fn new(
        a: DMatrix<f64>,
        b: DVector<f64>,
        epsilon: f64,
        gamma: f64,
        weights: DVector<f64>,
    ) -> Result<Self> {
        validate(&a, &b, epsilon, gamma, &weights)?;
        Ok(Self {
            a,
            b,
            epsilon,
            gamma,
            weights,
        })
    }

    /// Unit weights and `gamma = sqrt(n)`.
    pub fn with_defaults(a: DMatrix<f64>, b: DVector<f64>, epsilon: f64) -> Result<Self> {
        let n = a.ncols();
        let gamma = libm::sqrt(n as f64);
        Self::new(a, b, epsilon, gamma, DVector::from_element(n, 1.0))
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn weights(&self) -> &DVector<f64> {
        &self.weights
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn validate(&self) -> Result<()> {
        validate(&self.a, &self.b, self.epsilon, self.gamma, &self.weights)
    }

    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        Self::new(
            self.a.clone(),
            self.b.clone(),
            self.epsilon,
            gamma,
            self.weights.clone(),
        )
    }

    pub fn with_weights(&self, weights: DVector<f64>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.epsilon, self.gamma, weights)
    }

    /// The instance over the listed columns only (in the given order).
    pub fn restrict_columns(&self, columns: &[usize]) -> Result<Self> {
        let a = self.a.select_columns(columns);
        let w = DVector::from_iterator(columns.len(), columns.iter().map(|&i| self.weights[i]));
        Self::new(a, self.b.clone(), self.epsilon, self.gamma, w)
    }

    /// `||A x - b||^2`.
    pub fn residual_sq(&self, x: &DVector<f64>) -> f64 {
        (&self.a * x - &self.b).norm_squared()
    }

    /// `||x||_0 + (1/gamma) ||W x||^2` with the default support threshold.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.objective_with_threshold(x, DEFAULT_SUPPORT_THRESHOLD)
    }

    pub fn objective_with_threshold(&self, x: &DVector<f64>, threshold: f64) -> f64 {
        let nnz = x.iter().filter(|v| v.abs() > threshold).count() as f64;
        let reg: f64 = x
            .iter()
            .zip(self.weights.iter())
            .map(|(xi, wi)| (wi * xi) * (wi * xi))
            .sum();
        nnz + reg / self.gamma
    }

    /// True when `||b||^2 <= epsilon`, i.e. the zero vector is feasible.
    pub fn zero_is_feasible(&self) -> bool {
        self.b.norm_squared() <= self.epsilon
    }

    pub fn is_feasible(&self, x: &DVector<f64>, slack: f64) -> bool {
        self.residual_sq(x) <= self.epsilon + slack
    }
}

/// A candidate vector together with the threshold used to count its support.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionVector {
    pub x: DVector<f64>,
    pub support_threshold: f64,
}

impl SolutionVector {
    pub fn new(x: DVector<f64>) -> Self {
        Self {
            x,
            support_threshold: DEFAULT_SUPPORT_THRESHOLD,
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self::new(DVector::zeros(n))
    }

    pub fn sparsity(&self) -> usize {
        self.x
            .iter()
            .filter(|v| v.abs() > self.support_threshold)
            .count()
    }

    /// Indices with `|x_i| > support_threshold`, ascending.
    pub fn support(&self) -> alloc::vec::Vec<usize> {
        self.x
            .iter()
            .enumerate()
            .filter(|(_, v)| v.abs() > self.support_threshold)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn objective(&self, instance: &ProblemInstance) -> f64 {
        instance.objective_with_threshold(&self.x, self.support_threshold)
    }

    pub fn residual_sq(&self, instance: &ProblemInstance) -> f64 {
        instance.residual_sq(&self.x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{dmatrix, dvector};

    fn identity2(b: DVector<f64>) -> ProblemInstance {
        ProblemInstance::new(DMatrix::identity(2, 2), b, 0.1, 1.0, dvector![1.0, 1.0]).unwrap()
    }

    #[test]
    fn validate_accepts_well_formed() {
        assert!(validate(
            &DMatrix::identity(2, 2),
            &dvector![1.0, 1.0],
            0.1,
            1.0,
            &dvector![1.0, 1.0]
        )
        .is_ok());
    }

    #[test]
    fn validate_rejects_bad_shapes_and_parameters() {
        let a = DMatrix::identity(2, 2);
        let w = dvector![1.0, 1.0];
        assert!(matches!(
            validate(&a, &dvector![1.0, 1.0, 1.0], 0.1, 1.0, &w),
            Err(Error::DimensionMismatch { .. })
        ));
        assert_eq!(
            validate(&a, &dvector![1.0, 1.0], 0.0, 1.0, &w),
            Err(Error::NonPositiveParameter("epsilon"))
        );
        assert_eq!(
            validate(&a, &dvector![1.0, 1.0], 0.1, -1.0, &w),
            Err(Error::NonPositiveParameter("gamma"))
        );
        let mut bad = a.clone();
        bad[(0, 1)] = f64::NAN;
        assert_eq!(
            validate(&bad, &dvector![1.0, 1.0], 0.1, 1.0, &w),
            Err(Error::NonFiniteData("A"))
        );
        assert_eq!(
            validate(&a, &dvector![1.0, 1.0], 0.1, 1.0, &dvector![1.0, -2.0]),
            Err(Error::NegativeWeight(1))
        );
    }

    #[test]
    fn objective_hand_values() {
        let inst = identity2(dvector![1.0, 1.0]);
        assert_eq!(inst.objective(&DVector::zeros(2)), 0.0);

        let inst = inst.with_gamma(4.0).unwrap();
        assert_eq!(inst.objective(&dvector![2.0, 0.0]), 2.0);

        let inst = ProblemInstance::new(
            DMatrix::identity(3, 3),
            dvector![1.0, 1.0, 1.0],
            0.1,
            2.0,
            dvector![1.0, 3.0, 1.0],
        )
        .unwrap();
        assert_eq!(inst.objective(&dvector![1.0, 1.0, 0.0]), 7.0);
    }

    #[test]
    fn residual_hand_values() {
        let inst = identity2(dvector![1.0, 0.0]);
        assert_eq!(inst.residual_sq(&dvector![1.0, 0.0]), 0.0);
        assert_eq!(inst.residual_sq(&DVector::zeros(2)), 1.0);

        let inst = ProblemInstance::new(
            dmatrix![1.0, 2.0; 0.0, 1.0],
            dvector![1.0, 1.0],
            0.1,
            1.0,
            dvector![1.0, 1.0],
        )
        .unwrap();
        assert_eq!(inst.residual_sq(&dvector![1.0, 0.0]), 1.0);
    }

    #[test]
    fn sparsity_respects_threshold() {
        let mut s = SolutionVector::new(dvector![1.0, 5e-5, -2e-4, 0.0]);
        assert_eq!(s.sparsity(), 2);
        assert_eq!(s.support(), vec![0, 2]);
        s.support_threshold = 1e-6;
        assert_eq!(s.sparsity(), 3);
    }
}
