//! Value-preserving local rewriting.
//!
//! Sums are flattened into `(coefficient, term)` lists and products into
//! `(base, exponent)` lists; equal terms and equal bases are merged, exact
//! constants are folded, and the result is rebuilt in a sorted order. There
//! is no canonical-form guarantee beyond that.

use std::cmp::Ordering;

use super::expr::{Expr, Func};
use super::number::Number;

pub fn simplify(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Neg(a) => {
            let s = simplify(a);
            let mut terms = Vec::new();
            collect_terms(&s, Number::ONE.neg(), &mut terms);
            rebuild_sum(terms)
        }
        Expr::Unary(f, a) => fold_unary(*f, simplify(a)),
        Expr::Add(a, b) | Expr::Sub(a, b) => {
            let sign = if matches!(e, Expr::Sub(..)) {
                Number::ONE.neg()
            } else {
                Number::ONE
            };
            let mut terms = Vec::new();
            collect_terms(&simplify(a), Number::ONE, &mut terms);
            collect_terms(&simplify(b), sign, &mut terms);
            rebuild_sum(terms)
        }
        Expr::Mul(a, b) => {
            let mut prod = Product::default();
            prod.absorb(&simplify(a), 1);
            prod.absorb(&simplify(b), 1);
            prod.rebuild()
        }
        Expr::Div(a, b) => {
            let den = simplify(b);
            // Never produce a literal-zero denominator; keep the original
            // so evaluation reports the domain error.
            let den = if den.is_zero() { (**b).clone() } else { den };
            let mut prod = Product::default();
            prod.absorb(&simplify(a), 1);
            prod.absorb(&den, -1);
            prod.rebuild()
        }
        Expr::Pow(a, n) => match *n {
            0 => Expr::one(),
            1 => simplify(a),
            n => {
                let mut prod = Product::default();
                prod.absorb(&simplify(a), n);
                prod.rebuild()
            }
        },
    }
}

fn fold_unary(f: Func, arg: Expr) -> Expr {
    if let Some(c) = arg.as_const() {
        match f {
            Func::Sin if c.is_zero() => return Expr::zero(),
            Func::Cos | Func::Exp if c.is_zero() => return Expr::one(),
            Func::Ln if c.is_one() => return Expr::zero(),
            Func::Ln if c.to_f64() <= 0.0 => {}
            _ => {
                let v = c.to_f64();
                let folded = match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                };
                if folded.is_finite() {
                    return Expr::float(folded);
                }
            }
        }
    }
    Expr::func(f, arg)
}

/// Splits a simplified expression into a constant coefficient and the rest.
fn split_coefficient(e: &Expr) -> (Number, Expr) {
    match e {
        Expr::Const(c) => (*c, Expr::one()),
        Expr::Neg(a) => {
            let (c, rest) = split_coefficient(a);
            (c.neg(), rest)
        }
        Expr::Mul(..) => split_leading(e).unwrap_or_else(|| (Number::ONE, e.clone())),
        Expr::Div(a, d) => match &**a {
            Expr::Const(c) => (*c, Expr::Div(std::sync::Arc::new(Expr::one()), d.clone())),
            Expr::Mul(..) => match split_leading(a) {
                Some((c, rest)) => (c, Expr::Div(std::sync::Arc::new(rest), d.clone())),
                None => (Number::ONE, e.clone()),
            },
            _ => (Number::ONE, e.clone()),
        },
        _ => (Number::ONE, e.clone()),
    }
}

/// Leading constant of a left-associated product chain.
fn split_leading(e: &Expr) -> Option<(Number, Expr)> {
    match e {
        Expr::Mul(a, b) => match &**a {
            Expr::Const(c) => Some((*c, (**b).clone())),
            Expr::Mul(..) => split_leading(a).map(|(c, rest)| (c, Expr::mul(rest, (**b).clone()))),
            _ => None,
        },
        _ => None,
    }
}

/// Puts `c` at the head of the left-associated product chain `t`.
fn prepend(c: Number, t: Expr) -> Expr {
    match t {
        Expr::Mul(a, b) => Expr::Mul(std::sync::Arc::new(prepend(c, (*a).clone())), b),
        t => Expr::mul(Expr::Const(c), t),
    }
}

fn collect_terms(e: &Expr, sign: Number, out: &mut Vec<(Number, Expr)>) {
    match e {
        Expr::Add(a, b) => {
            collect_terms(a, sign, out);
            collect_terms(b, sign, out);
        }
        Expr::Sub(a, b) => {
            collect_terms(a, sign, out);
            collect_terms(b, sign.neg(), out);
        }
        Expr::Neg(a) => collect_terms(a, sign.neg(), out),
        _ => {
            let (c, rest) = split_coefficient(e);
            out.push((sign.mul(c), rest));
        }
    }
}

/// `c * t` with the coefficient folded into a leading factor.
fn scale(c: Number, t: Expr) -> Expr {
    if c.is_one() {
        return t;
    }
    if t.is_one() {
        return Expr::Const(c);
    }
    if c.neg().is_one() {
        return Expr::neg(t);
    }
    match t {
        Expr::Div(n, d) => Expr::Div(std::sync::Arc::new(scale(c, (*n).clone())), d),
        t => prepend(c, t),
    }
}

fn rebuild_sum(terms: Vec<(Number, Expr)>) -> Expr {
    let mut merged: Vec<(Number, Expr)> = Vec::with_capacity(terms.len());
    for (c, t) in terms {
        match merged.iter_mut().find(|(_, u)| *u == t) {
            Some(slot) => slot.0 = slot.0.add(c),
            None => merged.push((c, t)),
        }
    }
    merged.retain(|(c, _)| !c.is_zero());
    // Constant term last, everything else in structural order.
    merged.sort_by(|(_, a), (_, b)| match (a.is_one(), b.is_one()) {
        (true, true) => Ordering::Equal,
        (true, false) => Ordering::Greater,
        (false, true) => Ordering::Less,
        (false, false) => a.structural_cmp(b),
    });
    let mut iter = merged.into_iter();
    let Some((c0, t0)) = iter.next() else {
        return Expr::zero();
    };
    let mut acc = scale(c0, t0);
    for (c, t) in iter {
        acc = if c.is_negative() {
            Expr::sub(acc, scale(c.neg(), t))
        } else {
            Expr::add(acc, scale(c, t))
        };
    }
    acc
}

#[derive(Default)]
struct Product {
    coefficient: Option<Number>,
    factors: Vec<(Expr, i32)>,
}

impl Product {
    fn coef(&self) -> Number {
        self.coefficient.unwrap_or(Number::ONE)
    }

    fn push(&mut self, base: Expr, exp: i32) {
        match self.factors.iter_mut().find(|(b, _)| *b == base) {
            Some(slot) => match slot.1.checked_add(exp) {
                Some(v) => slot.1 = v,
                None => self.factors.push((base, exp)),
            },
            None => self.factors.push((base, exp)),
        }
    }

    fn absorb(&mut self, e: &Expr, exp: i32) {
        match e {
            Expr::Mul(a, b) => {
                self.absorb(a, exp);
                self.absorb(b, exp);
            }
            Expr::Div(a, b) => {
                self.absorb(a, exp);
                self.absorb(b, -exp);
            }
            Expr::Pow(a, n) => match n.checked_mul(exp) {
                Some(m) => self.absorb(a, m),
                None => self.push(e.clone(), exp),
            },
            Expr::Neg(a) => {
                if exp % 2 != 0 {
                    self.coefficient = Some(self.coef().neg());
                }
                self.absorb(a, exp);
            }
            Expr::Const(c) => match c.powi(exp) {
                Some(v) => self.coefficient = Some(self.coef().mul(v)),
                None => self.push(e.clone(), exp),
            },
            _ => self.push(e.clone(), exp),
        }
    }

    fn rebuild(mut self) -> Expr {
        let coef = self.coef();
        if coef.is_zero() {
            return Expr::zero();
        }
        self.factors.retain(|(_, n)| *n != 0);
        self.factors.sort_by(|(a, n), (b, m)| a.structural_cmp(b).then_with(|| n.cmp(m)));
        let power = |base: &Expr, n: i32| if n == 1 { base.clone() } else { Expr::pow(base.clone(), n) };
        let num = self
            .factors
            .iter()
            .filter(|(_, n)| *n > 0)
            .map(|(b, n)| power(b, *n))
            .reduce(Expr::mul);
        let den = self
            .factors
            .iter()
            .filter(|(_, n)| *n < 0)
            .map(|(b, n)| power(b, -*n))
            .reduce(Expr::mul);
        let (negate, magnitude) = if coef.neg().is_one() {
            (true, Number::ONE)
        } else {
            (false, coef)
        };
        let numerator = match num {
            Some(n) if magnitude.is_one() => n,
            Some(n) => prepend(magnitude, n),
            None => Expr::Const(magnitude),
        };
        let body = match den {
            Some(d) => Expr::Div(std::sync::Arc::new(numerator), std::sync::Arc::new(d)),
            None => numerator,
        };
        if negate {
            match body {
                Expr::Const(c) => Expr::Const(c.neg()),
                b => Expr::neg(b),
            }
        } else {
            body
        }
    }
}
