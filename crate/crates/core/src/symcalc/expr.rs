use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use super::number::Number;
use super::SymError;

/// Elementary functions admitted by the grammar.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        match name {
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "ln" => Some(Func::Ln),
            _ => None,
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
        }
    }
}

/// Immutable scalar expression over the state variables `x1..xn`.
///
/// Variables are stored zero-based (`Var(0)` prints as `x1`). Subtrees are
/// reference counted so derived expressions share structure with their
/// sources and can be evaluated from several threads at once.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Const(Number),
    Var(usize),
    Neg(Arc<Expr>),
    Unary(Func, Arc<Expr>),
    Add(Arc<Expr>, Arc<Expr>),
    Sub(Arc<Expr>, Arc<Expr>),
    Mul(Arc<Expr>, Arc<Expr>),
    Div(Arc<Expr>, Arc<Expr>),
    Pow(Arc<Expr>, i32),
}

impl Expr {
    pub fn zero() -> Expr {
        Expr::Const(Number::ZERO)
    }

    pub fn one() -> Expr {
        Expr::Const(Number::ONE)
    }

    pub fn int(v: i64) -> Expr {
        Expr::Const(Number::int(v))
    }

    pub fn float(v: f64) -> Expr {
        Expr::Const(Number::Float(v))
    }

    /// Variable `x_{index}` with a one-based index as written in text.
    pub fn var(index: usize) -> Expr {
        assert!(index >= 1, "variables are numbered from 1");
        Expr::Var(index - 1)
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Arc::new(a), Arc::new(b))
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::Sub(Arc::new(a), Arc::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Arc::new(a), Arc::new(b))
    }

    /// Quotient node. Fails if the denominator is the literal constant zero.
    pub fn div(a: Expr, b: Expr) -> Result<Expr, SymError> {
        if b.is_zero() {
            return Err(SymError::ZeroDenominator);
        }
        Ok(Expr::Div(Arc::new(a), Arc::new(b)))
    }

    pub fn pow(a: Expr, n: i32) -> Expr {
        Expr::Pow(Arc::new(a), n)
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::Neg(Arc::new(a))
    }

    pub fn func(f: Func, a: Expr) -> Expr {
        Expr::Unary(f, Arc::new(a))
    }

    pub fn as_const(&self) -> Option<Number> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Literal zero (not "evaluates to zero").
    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Expr::Const(c) if c.is_one())
    }

    /// Largest zero-based variable index appearing in the tree.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Unary(_, a) | Expr::Pow(a, _) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    /// Whether the zero-based variable `var` occurs in the tree.
    pub fn depends_on(&self, var: usize) -> bool {
        match self {
            Expr::Const(_) => false,
            Expr::Var(i) => *i == var,
            Expr::Neg(a) | Expr::Unary(_, a) | Expr::Pow(a, _) => a.depends_on(var),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.depends_on(var) || b.depends_on(var)
            }
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Neg(a) | Expr::Unary(_, a) | Expr::Pow(a, _) => 1 + a.size(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                1 + a.size() + b.size()
            }
        }
    }

    /// Numeric value at `point` (zero-based coordinates).
    ///
    /// Division by zero, a negative power of zero and `ln` of a nonpositive
    /// argument are reported with the offending subexpression.
    pub fn eval(&self, point: &[f64]) -> Result<f64, SymError> {
        Ok(match self {
            Expr::Const(c) => c.to_f64(),
            Expr::Var(i) => *point.get(*i).ok_or(SymError::DimensionMismatch {
                expected: i + 1,
                found: point.len(),
            })?,
            Expr::Neg(a) => -a.eval(point)?,
            Expr::Unary(f, a) => {
                let v = a.eval(point)?;
                if *f == Func::Ln && v <= 0.0 {
                    return Err(SymError::Domain {
                        what: "logarithm of a nonpositive value",
                        subexpr: self.to_string(),
                    });
                }
                f.apply(v)
            }
            Expr::Add(a, b) => a.eval(point)? + b.eval(point)?,
            Expr::Sub(a, b) => a.eval(point)? - b.eval(point)?,
            Expr::Mul(a, b) => a.eval(point)? * b.eval(point)?,
            Expr::Div(a, b) => {
                let den = b.eval(point)?;
                if den == 0.0 {
                    return Err(SymError::Domain {
                        what: "division by zero",
                        subexpr: self.to_string(),
                    });
                }
                a.eval(point)? / den
            }
            Expr::Pow(a, n) => {
                let base = a.eval(point)?;
                if *n < 0 && base == 0.0 {
                    return Err(SymError::Domain {
                        what: "negative power of zero",
                        subexpr: self.to_string(),
                    });
                }
                base.powi(*n)
            }
        })
    }

    fn rank(&self) -> u8 {
        match self {
            Expr::Const(_) => 0,
            Expr::Var(_) => 1,
            Expr::Pow(..) => 2,
            Expr::Mul(..) => 3,
            Expr::Div(..) => 4,
            Expr::Unary(..) => 5,
            Expr::Add(..) => 6,
            Expr::Sub(..) => 7,
            Expr::Neg(_) => 8,
        }
    }

    /// Structural total order used to sort operands during simplification.
    pub fn structural_cmp(&self, other: &Expr) -> Ordering {
        match (self, other) {
            (Expr::Const(a), Expr::Const(b)) => a.total_cmp(b),
            (Expr::Var(a), Expr::Var(b)) => a.cmp(b),
            (Expr::Neg(a), Expr::Neg(b)) => a.structural_cmp(b),
            (Expr::Unary(f, a), Expr::Unary(g, b)) => f.cmp(g).then_with(|| a.structural_cmp(b)),
            (Expr::Pow(a, n), Expr::Pow(b, m)) => a.structural_cmp(b).then_with(|| n.cmp(m)),
            (Expr::Add(a1, a2), Expr::Add(b1, b2))
            | (Expr::Sub(a1, a2), Expr::Sub(b1, b2))
            | (Expr::Mul(a1, a2), Expr::Mul(b1, b2))
            | (Expr::Div(a1, a2), Expr::Div(b1, b2)) => {
                a1.structural_cmp(b1).then_with(|| a2.structural_cmp(b2))
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if c.is_negative() => 3,
            Expr::Const(Number::Rational(r)) if !r.is_integer() => 2,
            Expr::Const(_) | Expr::Var(_) | Expr::Unary(..) => 5,
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, min_prec: u8) -> fmt::Result {
        if self.precedence() < min_prec {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(a) => {
                f.write_str("-")?;
                a.fmt_child(f, 4)
            }
            Expr::Unary(func, a) => write!(f, "{}({a})", func.name()),
            Expr::Add(a, b) => {
                a.fmt_child(f, 1)?;
                f.write_str(" + ")?;
                b.fmt_child(f, 2)
            }
            Expr::Sub(a, b) => {
                a.fmt_child(f, 1)?;
                f.write_str(" - ")?;
                b.fmt_child(f, 2)
            }
            Expr::Mul(a, b) => {
                a.fmt_child(f, 2)?;
                f.write_str("*")?;
                b.fmt_child(f, 4)
            }
            Expr::Div(a, b) => {
                a.fmt_child(f, 2)?;
                f.write_str("/")?;
                b.fmt_child(f, 4)
            }
            Expr::Pow(a, n) => {
                a.fmt_child(f, 5)?;
                if *n < 0 {
                    write!(f, "^({n})")
                } else {
                    write!(f, "^{n}")
                }
            }
        }
    }
}

/// A point at which expressions are evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoint(Vec<f64>);

impl EvalPoint {
    pub fn new(coords: Vec<f64>) -> Self {
        EvalPoint(coords)
    }

    /// Checks the coordinate count against the declared dimension.
    pub fn with_dim(coords: Vec<f64>, dim: usize) -> Result<Self, SymError> {
        if coords.len() != dim {
            return Err(SymError::DimensionMismatch {
                expected: dim,
                found: coords.len(),
            });
        }
        Ok(EvalPoint(coords))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

impl From<Vec<f64>> for EvalPoint {
    fn from(v: Vec<f64>) -> Self {
        EvalPoint(v)
    }
}

impl From<&[f64]> for EvalPoint {
    fn from(v: &[f64]) -> Self {
        EvalPoint(v.to_vec())
    }
}
