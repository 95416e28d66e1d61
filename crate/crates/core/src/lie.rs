//! Vector-field calculus: directional derivatives, Lie brackets, iterated
//! adjoints and the bookkeeping of Lie monomials in `f` and `g`.
//!
//! Conventions: for a field `X` and a function `V`, `XV := (DV)X`, and the
//! bracket is `[X,Y] = XY - YX`, i.e. component-wise `(DY)X - (DX)Y`.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use thiserror::Error;

use crate::symcalc::{differentiate, parse, simplify, Expr, Number, SymError};

/// Largest total order accepted by [`enumerate_monomial_products`] unless
/// the caller raises it.
pub const DEFAULT_N_MAX: usize = 4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LieError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("vector field needs {expected} components, got {found}")]
    ComponentCount { expected: usize, found: usize },
    #[error("order {requested} exceeds the configured maximum {max}")]
    OrderTooLarge { requested: usize, max: usize },
    #[error(transparent)]
    Sym(#[from] SymError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    body: Expr,
    dim: usize,
}

impl ScalarField {
    pub fn new(body: Expr, dim: usize) -> Result<Self, LieError> {
        check_vars(&body, dim)?;
        Ok(ScalarField { body, dim })
    }

    pub fn parse(text: &str, dim: usize) -> Result<Self, LieError> {
        Ok(ScalarField {
            body: parse(text, dim)?,
            dim,
        })
    }

    pub fn zero(dim: usize) -> Self {
        ScalarField { body: Expr::zero(), dim }
    }

    pub fn body(&self) -> &Expr {
        &self.body
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64, LieError> {
        if x.len() != self.dim {
            return Err(LieError::DimensionMismatch(self.dim, x.len()));
        }
        Ok(self.body.eval(x)?)
    }

    pub fn scaled(&self, c: Number) -> ScalarField {
        ScalarField {
            body: simplify(&Expr::mul(Expr::Const(c), self.body.clone())),
            dim: self.dim,
        }
    }
}

impl fmt::Display for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.body)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    components: Vec<Expr>,
}

impl VectorField {
    pub fn new(components: Vec<Expr>, dim: usize) -> Result<Self, LieError> {
        if components.len() != dim {
            return Err(LieError::ComponentCount {
                expected: dim,
                found: components.len(),
            });
        }
        for c in &components {
            check_vars(c, dim)?;
        }
        Ok(VectorField { components })
    }

    pub fn parse(texts: &[&str], dim: usize) -> Result<Self, LieError> {
        let comps = texts
            .iter()
            .map(|t| parse(t, dim))
            .collect::<Result<Vec<_>, _>>()?;
        VectorField::new(comps, dim)
    }

    pub fn zero(dim: usize) -> Self {
        VectorField {
            components: vec![Expr::zero(); dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// Literal zero in every component.
    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Expr::is_zero)
    }

    pub fn eval(&self, x: &[f64]) -> Result<Vec<f64>, LieError> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out)?;
        Ok(out)
    }

    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) -> Result<(), LieError> {
        if x.len() != self.dim() {
            return Err(LieError::DimensionMismatch(self.dim(), x.len()));
        }
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.eval(x)?;
        }
        Ok(())
    }

    /// `a*self + b*other`, simplified.
    pub fn combine(&self, a: f64, other: &VectorField, b: f64) -> Result<VectorField, LieError> {
        same_dim(self.dim(), other.dim())?;
        let comps = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(p, q)| {
                simplify(&Expr::add(
                    Expr::mul(constant(a), p.clone()),
                    Expr::mul(constant(b), q.clone()),
                ))
            })
            .collect();
        Ok(VectorField { components: comps })
    }

    pub fn scaled(&self, a: f64) -> VectorField {
        VectorField {
            components: self
                .components
                .iter()
                .map(|p| simplify(&Expr::mul(constant(a), p.clone())))
                .collect(),
        }
    }

    /// `(De)X = sum_i X_i * de/dx_i` for a scalar expression `e`.
    pub fn apply(&self, e: &Expr) -> Expr {
        let mut acc = Expr::zero();
        for (i, xi) in self.components.iter().enumerate() {
            if xi.is_zero() || !e.depends_on(i) {
                continue;
            }
            acc = Expr::add(acc, Expr::mul(xi.clone(), differentiate(e, i)));
        }
        simplify(&acc)
    }
}

impl fmt::Display for VectorField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("(")?;
        for (i, c) in self.components.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{c}")?;
        }
        f.write_str(")")
    }
}

/// Integral-valued floats become exact integers so that bracket algebra on
/// polynomial fields keeps folding to literal zeros.
fn constant(a: f64) -> Expr {
    if a.fract() == 0.0 && a.abs() < 1e15 {
        Expr::int(a as i64)
    } else {
        Expr::float(a)
    }
}

fn check_vars(e: &Expr, dim: usize) -> Result<(), LieError> {
    match e.max_var() {
        Some(i) if i >= dim => Err(SymError::VariableOutOfRange {
            index: i + 1,
            dim,
            position: 0,
        }
        .into()),
        _ => Ok(()),
    }
}

fn same_dim(a: usize, b: usize) -> Result<(), LieError> {
    if a == b {
        Ok(())
    } else {
        Err(LieError::DimensionMismatch(a, b))
    }
}

/// `XV = (DV)X`.
pub fn directional_derivative(x: &VectorField, v: &ScalarField) -> Result<ScalarField, LieError> {
    same_dim(x.dim(), v.dim())?;
    Ok(ScalarField {
        body: x.apply(&v.body),
        dim: v.dim,
    })
}

/// `[X,Y] = (DY)X - (DX)Y`.
pub fn lie_bracket(x: &VectorField, y: &VectorField) -> Result<VectorField, LieError> {
    same_dim(x.dim(), y.dim())?;
    let components = x
        .components
        .iter()
        .zip(&y.components)
        .map(|(xj, yj)| simplify(&Expr::sub(x.apply(yj), y.apply(xj))))
        .collect();
    Ok(VectorField { components })
}

/// `[...[[Y,X],X],...,X]` with `k` brackets.
pub fn iterated_adjoint(y: &VectorField, x: &VectorField, k: usize) -> Result<VectorField, LieError> {
    same_dim(x.dim(), y.dim())?;
    let mut acc = y.clone();
    for _ in 0..k {
        acc = lie_bracket(&acc, x)?;
    }
    Ok(acc)
}

/// `f^i V := f(f^{i-1} V)`, `f^0 V = V`.
pub fn power_derivative(f: &VectorField, v: &ScalarField, i: usize) -> Result<ScalarField, LieError> {
    same_dim(f.dim(), v.dim())?;
    let mut acc = v.clone();
    for _ in 0..i {
        acc = directional_derivative(f, &acc)?;
    }
    Ok(acc)
}

/// A Lie monomial in the generators `f` and `g`.
///
/// The order of a word is its leaf count. For a monomial that degenerates
/// into a lower span layer this over-estimates the true bracket order, which
/// can only make the vanishing conditions checked against it stricter.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum LieWord {
    F,
    G,
    Bracket {
        left: Arc<LieWord>,
        right: Arc<LieWord>,
        order: usize,
    },
}

impl LieWord {
    pub fn bracket(left: LieWord, right: LieWord) -> LieWord {
        let order = left.order() + right.order();
        LieWord::Bracket {
            left: Arc::new(left),
            right: Arc::new(right),
            order,
        }
    }

    pub fn order(&self) -> usize {
        match self {
            LieWord::F | LieWord::G => 1,
            LieWord::Bracket { order, .. } => *order,
        }
    }

    /// `[[...[f,g],g],...,g]` with `n` copies of `g`.
    pub fn f_ad_g(n: usize) -> LieWord {
        (0..n).fold(LieWord::F, |acc, _| LieWord::bracket(acc, LieWord::G))
    }

    /// `[[...[g,f],f],...,f]` with `n` copies of `f`.
    pub fn g_ad_f(n: usize) -> LieWord {
        (0..n).fold(LieWord::G, |acc, _| LieWord::bracket(acc, LieWord::F))
    }

    /// All words of exactly `order` leaves, skipping brackets of a word with
    /// itself (identically zero) and any word containing one.
    pub fn of_order(order: usize) -> Vec<LieWord> {
        let mut table: Vec<Vec<LieWord>> = vec![Vec::new(), vec![LieWord::F, LieWord::G]];
        for k in 2..=order {
            let mut words = Vec::new();
            for left_order in 1..k {
                for l in &table[left_order] {
                    for r in &table[k - left_order] {
                        if l != r {
                            words.push(LieWord::bracket(l.clone(), r.clone()));
                        }
                    }
                }
            }
            table.push(words);
        }
        if order == 0 {
            return Vec::new();
        }
        table.swap_remove(order)
    }
}

impl fmt::Display for LieWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LieWord::F => f.write_str("f"),
            LieWord::G => f.write_str("g"),
            LieWord::Bracket { left, right, .. } => write!(f, "[{left},{right}]"),
        }
    }
}

/// Writes a product `Δ1 Δ2 ... Δk V` in operator notation.
pub fn product_name(tuple: &[LieWord]) -> String {
    let mut s = String::new();
    for w in tuple {
        s.push_str(&w.to_string());
    }
    s.push('V');
    s
}

/// All tuples `(Δ1,...,Δk)`, `k >= 1`, of words other than the bare `g`,
/// with total order at most `n`. Tuples come out grouped by total order.
pub fn enumerate_monomial_products(n: usize, n_max: usize) -> Result<Vec<Vec<LieWord>>, LieError> {
    if n > n_max {
        return Err(LieError::OrderTooLarge {
            requested: n,
            max: n_max,
        });
    }
    let mut out = Vec::new();
    for total in 1..=n {
        out.extend(products_of_total(total));
    }
    Ok(out)
}

/// Tuples whose orders sum to exactly `total`.
pub fn products_of_total(total: usize) -> Vec<Vec<LieWord>> {
    let words: Vec<Vec<LieWord>> = (0..=total)
        .map(|k| {
            LieWord::of_order(k)
                .into_iter()
                .filter(|w| *w != LieWord::G)
                .collect()
        })
        .collect();
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    fill(total, &words, &mut prefix, &mut out);
    out
}

fn fill(remaining: usize, words: &[Vec<LieWord>], prefix: &mut Vec<LieWord>, out: &mut Vec<Vec<LieWord>>) {
    if remaining == 0 {
        out.push(prefix.clone());
        return;
    }
    for o in 1..=remaining {
        for w in &words[o] {
            prefix.push(w.clone());
            fill(remaining - o, words, prefix, out);
            prefix.pop();
        }
    }
}

/// Realizes Lie words as vector fields for a fixed pair `(f, g)`, caching
/// every bracket computed.
#[derive(Debug)]
pub struct WordRealizer {
    f: VectorField,
    g: VectorField,
    cache: HashMap<LieWord, VectorField>,
}

impl WordRealizer {
    pub fn new(f: VectorField, g: VectorField) -> Result<Self, LieError> {
        same_dim(f.dim(), g.dim())?;
        Ok(WordRealizer {
            f,
            g,
            cache: HashMap::new(),
        })
    }

    pub fn field(&mut self, word: &LieWord) -> Result<VectorField, LieError> {
        match word {
            LieWord::F => Ok(self.f.clone()),
            LieWord::G => Ok(self.g.clone()),
            LieWord::Bracket { left, right, .. } => {
                if let Some(v) = self.cache.get(word) {
                    return Ok(v.clone());
                }
                let l = self.field(left)?;
                let r = self.field(right)?;
                let v = lie_bracket(&l, &r)?;
                self.cache.insert(word.clone(), v.clone());
                Ok(v)
            }
        }
    }
}
