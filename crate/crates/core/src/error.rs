use alloc::string::String;

use crate::conic::SolverStatus;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("parameter `{0}` must be strictly positive")]
    NonPositiveParameter(&'static str),
    #[error("weight {0} is negative")]
    NegativeWeight(usize),
    #[error("{0} contains non-finite values")]
    NonFiniteData(&'static str),
    #[error("no x satisfies ||Ax - b||^2 <= epsilon")]
    InfeasibleInstance,
    #[error("the node's restricted residual set is empty")]
    NodeInfeasible,
    #[error("||b||^2 <= epsilon, the zero vector is feasible")]
    DegenerateInstance,
    #[error("even all columns cannot bring the residual below epsilon")]
    NoFeasibleCompletion,
    #[error("Schur complement is numerically singular ({0:e})")]
    SingularSchurComplement(f64),
    #[error("problem with n = {n} exceeds the limit {limit}")]
    ProblemTooLarge { n: usize, limit: usize },
    #[error("all indices are already fixed")]
    CompletePattern,
    #[error("the node pool is empty")]
    EmptyPool,
    #[error("invalid conic program: {0}")]
    InvalidProgram(String),
    #[error("conic solve did not reach optimality: {0:?}")]
    Solver(SolverStatus),
}
