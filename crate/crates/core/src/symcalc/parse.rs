//! Recursive-descent parser for the expression grammar
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := factor (('*' | '/') factor)*
//! factor := ('-' | '+') factor | base ('^' exponent)?
//! base   := number | 'x' integer | '(' expr ')' | func '(' expr ')'
//! exponent := ['-'] integer | '(' ['-'] integer ')'
//! func   := 'sin' | 'cos' | 'exp' | 'ln'
//! ```
//!
//! Decimal literals are kept as exact rationals whenever they fit, and a
//! quotient of two literals (`1/3`) folds into a single rational constant.

use super::expr::{Expr, Func};
use super::number::Number;
use super::SymError;

pub fn parse(text: &str, dim: usize) -> Result<Expr, SymError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        dim,
    };
    let e = p.expr()?;
    p.skip_ws();
    if p.pos < p.src.len() {
        return Err(p.error(format!("unexpected character '{}'", p.src[p.pos] as char)));
    }
    Ok(e)
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn error(&self, message: impl Into<String>) -> SymError {
        SymError::Syntax {
            position: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), SymError> {
        if self.eat(c) {
            Ok(())
        } else {
            match self.peek() {
                Some(found) => Err(self.error(format!("expected '{}', found '{}'", c as char, found as char))),
                None => Err(self.error(format!("expected '{}', found end of input", c as char))),
            }
        }
    }

    fn expr(&mut self) -> Result<Expr, SymError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(b'+') {
                acc = Expr::add(acc, self.term()?);
            } else if self.eat(b'-') {
                acc = Expr::sub(acc, self.term()?);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, SymError> {
        let mut acc = self.factor()?;
        loop {
            if self.eat(b'*') {
                acc = Expr::mul(acc, self.factor()?);
            } else if self.peek() == Some(b'/') {
                let at = self.pos;
                self.pos += 1;
                let rhs = self.factor()?;
                acc = match (acc.as_const(), rhs.as_const()) {
                    (Some(a @ Number::Rational(_)), Some(b @ Number::Rational(_))) if !b.is_zero() => {
                        Expr::Const(a.div(b).expect("nonzero divisor"))
                    }
                    _ => Expr::div(acc, rhs).map_err(|_| SymError::Syntax {
                        position: at,
                        message: "division by the literal zero".into(),
                    })?,
                };
            } else {
                return Ok(acc);
            }
        }
    }

    fn factor(&mut self) -> Result<Expr, SymError> {
        if self.eat(b'-') {
            let inner = self.factor()?;
            return Ok(match inner {
                Expr::Const(c) => Expr::Const(c.neg()),
                other => Expr::neg(other),
            });
        }
        if self.eat(b'+') {
            return self.factor();
        }
        let base = self.base()?;
        if self.eat(b'^') {
            let n = self.exponent()?;
            return Ok(Expr::pow(base, n));
        }
        Ok(base)
    }

    fn exponent(&mut self) -> Result<i32, SymError> {
        let paren = self.eat(b'(');
        let negative = if self.eat(b'-') {
            true
        } else {
            self.eat(b'+');
            false
        };
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("exponent must be an integer"));
        }
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'.' | b'e' | b'E') {
            return Err(self.error("exponent must be an integer"));
        }
        let digits = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii digits");
        let mut n: i32 = digits.parse().map_err(|_| SymError::Syntax {
            position: start,
            message: "exponent out of range".into(),
        })?;
        if negative {
            n = -n;
        }
        if paren {
            self.expect(b')')?;
        }
        Ok(n)
    }

    fn base(&mut self) -> Result<Expr, SymError> {
        match self.peek() {
            None => Err(self.error("unexpected end of input")),
            Some(b'(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.identifier(),
            Some(c) => Err(self.error(format!("unexpected character '{}'", c as char))),
        }
    }

    fn identifier(&mut self) -> Result<Expr, SymError> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii identifier");
        if let Some(func) = Func::from_name(name) {
            self.expect(b'(')?;
            let arg = self.expr()?;
            self.expect(b')')?;
            return Ok(Expr::func(func, arg));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.dim {
                    return Err(SymError::VariableOutOfRange {
                        index,
                        dim: self.dim,
                        position: start,
                    });
                }
                return Ok(Expr::var(index));
            }
        }
        Err(SymError::UnknownIdentifier {
            name: name.to_string(),
            position: start,
        })
    }

    fn number(&mut self) -> Result<Expr, SymError> {
        let start = self.pos;
        let mut mantissa = String::new();
        let mut frac_digits = 0i32;
        let mut seen_dot = false;
        while self.pos < self.src.len() {
            let c = self.src[self.pos];
            if c.is_ascii_digit() {
                mantissa.push(c as char);
                if seen_dot {
                    frac_digits += 1;
                }
            } else if c == b'.' && !seen_dot {
                seen_dot = true;
            } else {
                break;
            }
            self.pos += 1;
        }
        if mantissa.is_empty() {
            return Err(SymError::Syntax {
                position: start,
                message: "malformed number".into(),
            });
        }
        let mut exp10 = 0i32;
        if self.pos < self.src.len() && matches!(self.src[self.pos], b'e' | b'E') {
            let save = self.pos;
            self.pos += 1;
            let mut sign = 1;
            if self.pos < self.src.len() && matches!(self.src[self.pos], b'+' | b'-') {
                if self.src[self.pos] == b'-' {
                    sign = -1;
                }
                self.pos += 1;
            }
            let ds = self.pos;
            while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                self.pos += 1;
            }
            if ds == self.pos {
                self.pos = save;
                return Err(self.error("malformed exponent in number"));
            }
            let digits = std::str::from_utf8(&self.src[ds..self.pos]).expect("ascii digits");
            exp10 = sign * digits.parse::<i32>().map_err(|_| self.error("number exponent out of range"))?;
        }
        let text = std::str::from_utf8(&self.src[start..self.pos]).expect("ascii number");
        Ok(Expr::Const(exact_decimal(&mantissa, exp10 - frac_digits).unwrap_or_else(|| {
            Number::Float(text.parse::<f64>().expect("validated float literal"))
        })))
    }
}

/// `mantissa * 10^exp10` as an exact rational when it fits in `i64`.
fn exact_decimal(mantissa: &str, exp10: i32) -> Option<Number> {
    let m: i64 = mantissa.parse().ok()?;
    if exp10.unsigned_abs() > 18 {
        return None;
    }
    let scale = 10i64.checked_pow(exp10.unsigned_abs())?;
    if exp10 >= 0 {
        Some(Number::int(m.checked_mul(scale)?))
    } else {
        Some(Number::ratio(m, scale))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn val(text: &str, dim: usize, at: &[f64]) -> f64 {
        parse(text, dim).unwrap().eval(at).unwrap()
    }

    #[test]
    fn quadratic_form() {
        assert_eq!(val("0.5*(x1^2+x2^2)", 2, &[1.0, 0.0]), 0.5);
    }

    #[test]
    fn product_with_shift() {
        assert_eq!(val("x2*(1+x3)", 3, &[0.0, 2.0, 0.5]), 3.0);
    }

    #[test]
    fn variable_out_of_range() {
        match parse("x4", 3) {
            Err(SymError::VariableOutOfRange { index: 4, dim: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(parse("x0", 3), Err(SymError::VariableOutOfRange { .. })));
    }

    #[test]
    fn decimal_literals_are_exact() {
        assert_eq!(parse("0.5", 1).unwrap(), Expr::Const(Number::ratio(1, 2)));
        assert_eq!(parse("1/3", 1).unwrap(), Expr::Const(Number::ratio(1, 3)));
        assert_eq!(parse("2.5e-3", 1).unwrap(), Expr::Const(Number::ratio(1, 400)));
        assert_eq!(parse("-4", 1).unwrap(), Expr::int(-4));
    }

    #[test]
    fn functions_and_powers() {
        assert_eq!(val("sin(x1)", 1, &[0.0]), 0.0);
        assert!((val("exp(x1) - ln(x2)", 2, &[0.0, 1.0]) - 1.0).abs() < 1e-15);
        assert_eq!(val("x1^(-2)", 1, &[2.0]), 0.25);
        assert_eq!(val("x1^-1", 1, &[4.0]), 0.25);
        assert_eq!(val("-x1^2", 1, &[3.0]), -9.0);
        assert!(parse("2^3^1", 1).is_err());
    }

    #[test]
    fn errors_carry_positions() {
        match parse("x1 + * x2", 2) {
            Err(SymError::Syntax { position, .. }) => assert_eq!(position, 5),
            other => panic!("unexpected {other:?}"),
        }
        match parse("x1 + foo", 2) {
            Err(SymError::UnknownIdentifier { name, position }) => {
                assert_eq!(name, "foo");
                assert_eq!(position, 5);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse("(x1", 1).is_err());
        assert!(parse("x1 x2", 2).is_err());
        assert!(parse("x1^1.5", 1).is_err());
        assert!(parse("x1/0", 1).is_err());
        assert!(parse("", 1).is_err());
    }

    #[test]
    fn display_round_trips_through_parse() {
        for text in ["-(x1 - x2)*x3^(-2) + 1/3", "sin(x1)/(1 + x2^2) - exp(-x3)", "x1 - (x2 - x3)"] {
            let e = parse(text, 3).unwrap();
            let again = parse(&e.to_string(), 3).unwrap();
            let p = [0.3, -1.2, 0.7];
            assert_eq!(e.eval(&p).unwrap(), again.eval(&p).unwrap(), "{text}");
        }
    }
}
