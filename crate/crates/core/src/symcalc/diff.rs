use super::expr::{Expr, Func};
use super::number::Number;
use super::simplify::simplify;

/// Partial derivative with respect to the zero-based variable `var`,
/// simplified.
pub fn differentiate(e: &Expr, var: usize) -> Expr {
    simplify(&raw(e, var))
}

fn raw(e: &Expr, var: usize) -> Expr {
    if !e.depends_on(var) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(i) => {
            if *i == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Neg(a) => Expr::neg(raw(a, var)),
        Expr::Add(a, b) => Expr::add(raw(a, var), raw(b, var)),
        Expr::Sub(a, b) => Expr::sub(raw(a, var), raw(b, var)),
        Expr::Mul(a, b) => {
            let da = raw(a, var);
            let db = raw(b, var);
            Expr::add(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db))
        }
        Expr::Div(a, b) => {
            // (a'b - ab') / b^2; b is never the literal zero so neither is b^2.
            let da = raw(a, var);
            let db = raw(b, var);
            let num = Expr::sub(Expr::mul(da, (**b).clone()), Expr::mul((**a).clone(), db));
            Expr::Div(std::sync::Arc::new(num), std::sync::Arc::new(Expr::pow((**b).clone(), 2)))
        }
        Expr::Pow(a, n) => Expr::mul(
            Expr::mul(Expr::Const(Number::int(i64::from(*n))), Expr::pow((**a).clone(), n - 1)),
            raw(a, var),
        ),
        Expr::Unary(f, a) => {
            let inner = raw(a, var);
            let outer = match f {
                Func::Sin => Expr::func(Func::Cos, (**a).clone()),
                Func::Cos => Expr::neg(Expr::func(Func::Sin, (**a).clone())),
                Func::Exp => e.clone(),
                Func::Ln => {
                    return Expr::Div(std::sync::Arc::new(inner), a.clone());
                }
            };
            Expr::mul(outer, inner)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse;
    use super::*;

    #[test]
    fn power_rule() {
        let e = parse("x1^2*x2", 2).unwrap();
        let d = differentiate(&e, 0);
        for p in [[1.0, 2.0], [-0.5, 3.0], [2.0, -1.0]] {
            assert_eq!(d.eval(&p).unwrap(), 2.0 * p[0] * p[1]);
        }
        assert_eq!(d.to_string(), "2*x1*x2");
    }

    #[test]
    fn linear_in_x3() {
        let e = parse("x2*(1+x3)", 3).unwrap();
        assert_eq!(differentiate(&e, 2), Expr::var(2));
    }

    #[test]
    fn transcendental_rules() {
        let e = parse("sin(x1)*exp(x2) + ln(x1) - cos(x2)", 2).unwrap();
        let p = [0.7, -0.3];
        let d1 = differentiate(&e, 0).eval(&p).unwrap();
        let d2 = differentiate(&e, 1).eval(&p).unwrap();
        assert!((d1 - (p[0].cos() * p[1].exp() + 1.0 / p[0])).abs() < 1e-14);
        assert!((d2 - (p[0].sin() * p[1].exp() + p[1].sin())).abs() < 1e-14);
    }

    #[test]
    fn quotient_rule() {
        let e = parse("x1/(1 + x1^2)", 1).unwrap();
        let d = differentiate(&e, 0);
        let x: f64 = 0.4;
        let expected = (1.0 - x * x) / (1.0 + x * x).powi(2);
        assert!((d.eval(&[x]).unwrap() - expected).abs() < 1e-14);
    }

    #[test]
    fn independent_variable_gives_zero() {
        let e = parse("sin(x1)", 2).unwrap();
        assert!(differentiate(&e, 1).is_zero());
    }
}
