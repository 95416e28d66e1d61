//! Shared generators and finite-difference oracles.
#![allow(dead_code)]

use proptest::prelude::*;
use sdstab::certify::SystemDef;
use sdstab::lie::{ScalarField, VectorField};
use sdstab::symcalc::{parse, Expr};

/// Text of a polynomial in `dim` variables with small integer
/// coefficients and total degree at most 3.
pub fn poly_text(dim: usize) -> impl Strategy<Value = String> {
    let monomial = (-3i64..=3, prop::collection::vec(0u32..=2, dim)).prop_filter("degree <= 3", |(_, e)| e.iter().sum::<u32>() <= 3);
    prop::collection::vec(monomial, 1..5).prop_map(|terms| {
        terms
            .iter()
            .map(|(c, exps)| {
                let mut s = format!("({c})");
                for (i, e) in exps.iter().enumerate() {
                    if *e > 0 {
                        s.push_str(&format!("*x{}^{e}", i + 1));
                    }
                }
                s
            })
            .collect::<Vec<_>>()
            .join(" + ")
    })
}

pub fn poly(dim: usize) -> impl Strategy<Value = Expr> {
    poly_text(dim).prop_map(move |t| parse(&t, dim).unwrap())
}

pub fn field(dim: usize) -> impl Strategy<Value = VectorField> {
    prop::collection::vec(poly(dim), dim).prop_map(move |c| VectorField::new(c, dim).unwrap())
}

pub fn scalar(dim: usize) -> impl Strategy<Value = ScalarField> {
    poly(dim).prop_map(move |e| ScalarField::new(e, dim).unwrap())
}

pub fn point(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0..2.0f64, dim)
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Central-difference Jacobian, `jac[i][j] = d X_i / d x_j`.
pub fn fd_jacobian(x: &VectorField, at: &[f64], h: f64) -> Vec<Vec<f64>> {
    let n = at.len();
    let mut jac = vec![vec![0.0; n]; n];
    for j in 0..n {
        let mut p = at.to_vec();
        let mut m = at.to_vec();
        p[j] += h;
        m[j] -= h;
        let fp = x.eval(&p).unwrap();
        let fm = x.eval(&m).unwrap();
        for i in 0..n {
            jac[i][j] = (fp[i] - fm[i]) / (2.0 * h);
        }
    }
    jac
}

fn mat_vec(a: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(r, x)| r * x).sum()).collect()
}

/// `[X, Y](at) = DY X - DX Y` with finite-difference Jacobians; also
/// returns `|DY X| + |DX Y|` as a scale.
pub fn fd_bracket(x: &VectorField, y: &VectorField, at: &[f64], h: f64) -> (Vec<f64>, f64) {
    let xv = x.eval(at).unwrap();
    let yv = y.eval(at).unwrap();
    let a = mat_vec(&fd_jacobian(y, at, h), &xv);
    let b = mat_vec(&fd_jacobian(x, at, h), &yv);
    let scale = max_abs(&a) + max_abs(&b);
    (a.iter().zip(&b).map(|(p, q)| p - q).collect(), scale)
}

pub fn system(f: &[&str], g: &[&str], v: &str) -> SystemDef {
    let n = f.len();
    SystemDef::new(VectorField::parse(f, n).unwrap(), VectorField::parse(g, n).unwrap(), ScalarField::parse(v, n).unwrap()).unwrap()
}

pub fn dblint() -> SystemDef {
    system(&["x2", "0"], &["0", "1"], "0.5*(x1^2+x2^2)")
}

pub fn example1() -> SystemDef {
    system(&["-x1*x2^2", "0"], &["0", "1"], "0.5*(x1^2+x2^2)")
}

pub fn example2() -> SystemDef {
    system(&["x2*(1+x3)", "-x1", "0"], &["0", "0", "1"], "0.5*(x1^2+x2^2+x3^2)")
}
