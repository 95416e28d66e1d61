//! Symbolic scalar expressions over state variables `x1..xn`: parsing,
//! differentiation, simplification and evaluation.

mod diff;
mod expr;
mod number;
mod parse;
mod simplify;

pub use diff::differentiate;
pub use expr::{EvalPoint, Expr, Func};
pub use number::Number;
pub use parse::parse;
pub use simplify::simplify;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SymError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("unknown identifier '{name}' at position {position}")]
    UnknownIdentifier { name: String, position: usize },
    #[error("variable x{index} at position {position} is out of range for dimension {dim}")]
    VariableOutOfRange { index: usize, dim: usize, position: usize },
    #[error("denominator is the literal constant 0")]
    ZeroDenominator,
    #[error("domain error ({what}) in `{subexpr}`")]
    Domain { what: &'static str, subexpr: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Value of `e` at `p`.
pub fn evaluate(e: &Expr, p: &EvalPoint) -> Result<f64, SymError> {
    e.eval(p.coords())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn evaluate_examples() {
        let e = parse("x1*x2", 2).unwrap();
        assert_eq!(evaluate(&e, &EvalPoint::new(vec![3.0, 4.0])).unwrap(), 12.0);
        let inv = parse("1/x1", 2).unwrap();
        assert!(matches!(
            evaluate(&inv, &EvalPoint::new(vec![0.0, 1.0])),
            Err(SymError::Domain { .. })
        ));
        let s = parse("sin(x1)", 1).unwrap();
        assert_eq!(evaluate(&s, &EvalPoint::new(vec![0.0])).unwrap(), 0.0);
    }

    #[test]
    fn eval_point_dimension_is_checked() {
        assert!(EvalPoint::with_dim(vec![1.0, 2.0], 3).is_err());
        assert_eq!(EvalPoint::with_dim(vec![3.0, 4.0], 2).unwrap().norm(), 5.0);
    }
}
