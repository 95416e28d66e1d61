//! Pointwise classification of the Lie-algebraic decrease conditions.
//!
//! At a state `x != 0` a [`Certificate`] says which branch applies:
//! `gV != 0` (transversal), `gV = 0` with `fV < 0` (Artstein–Sontag), or one
//! of the bracket branches `P1`..`P4` at the smallest order `N` for which
//! the vanishing conditions hold and a decisive quantity has the right sign.
//! All tests are numerical with the scale-aware tolerance
//! `tau * (1 + |x|^2)`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Mutex, OnceLock};

use thiserror::Error;

use crate::exec::Exec;
use crate::lie::{
    directional_derivative, product_name, products_of_total, LieError, LieWord, ScalarField, VectorField,
    WordRealizer,
};
use crate::symcalc::EvalPoint;

pub const DEFAULT_TAU_ZERO: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CertifyError {
    #[error("state is at the origin (|x| = {norm:e})")]
    AtOrigin { norm: f64 },
    #[error("V(0) = {0:e}, expected 0")]
    VNotZeroAtOrigin(f64),
    #[error("V is not positive at the sample point {point:?} (V = {value:e})")]
    VNotPositive { point: Vec<f64>, value: f64 },
    #[error("empty grid: {0}")]
    EmptyGrid(String),
    #[error(transparent)]
    Lie(#[from] LieError),
}

/// A control-affine system `x' = f(x) + u g(x)` with a candidate `V`.
#[derive(Clone, Debug)]
pub struct SystemDef {
    pub f: VectorField,
    pub g: VectorField,
    pub v: ScalarField,
}

impl SystemDef {
    /// Checks dimensions, `V(0) = 0`, and positivity of `V` on a fixed set
    /// of sample points (a spot check, not a proof).
    pub fn new(f: VectorField, g: VectorField, v: ScalarField) -> Result<Self, CertifyError> {
        let n = f.dim();
        if g.dim() != n {
            return Err(LieError::DimensionMismatch(n, g.dim()).into());
        }
        if v.dim() != n {
            return Err(LieError::DimensionMismatch(n, v.dim()).into());
        }
        let v0 = v.eval(&vec![0.0; n])?;
        if v0.abs() > 1e-12 {
            return Err(CertifyError::VNotZeroAtOrigin(v0));
        }
        for p in positivity_samples(n) {
            match v.eval(&p) {
                Ok(value) if value > 0.0 => {}
                Ok(value) => return Err(CertifyError::VNotPositive { point: p, value }),
                // V may be undefined at isolated sample points; skip those.
                Err(_) => {}
            }
        }
        Ok(SystemDef { f, g, v })
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// `f(x) + u g(x)` written into `out`.
    pub fn rhs(&self, x: &[f64], u: f64, out: &mut [f64]) -> Result<(), LieError> {
        self.f.eval_into(x, out)?;
        if u != 0.0 {
            for (o, gi) in out.iter_mut().zip(self.g.components()) {
                *o += u * gi.eval(x)?;
            }
        }
        Ok(())
    }

    pub fn v_at(&self, x: &[f64]) -> Result<f64, LieError> {
        self.v.eval(x)
    }

    /// The same system with `V` replaced by `c V`.
    pub fn with_scaled_v(&self, c: crate::symcalc::Number) -> SystemDef {
        SystemDef {
            f: self.f.clone(),
            g: self.g.clone(),
            v: self.v.scaled(c),
        }
    }
}

fn positivity_samples(n: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for s in [1.0, -1.0, 0.1, -0.1, 3.0] {
            let mut p = vec![0.0; n];
            p[i] = s;
            out.push(p);
        }
    }
    for s in [0.5, -0.7] {
        out.push((0..n).map(|i| s * (1.0 + 0.37 * i as f64)).collect());
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Case {
    Transversal,
    ArtsteinSontag,
    P1,
    P2,
    P3,
    P4,
    Inconclusive,
}

impl Case {
    pub fn is_bracket(self) -> bool {
        matches!(self, Case::P1 | Case::P2 | Case::P3 | Case::P4)
    }

    pub fn name(self) -> &'static str {
        match self {
            Case::Transversal => "Transversal",
            Case::ArtsteinSontag => "ArtsteinSontag",
            Case::P1 => "P1",
            Case::P2 => "P2",
            Case::P3 => "P3",
            Case::P4 => "P4",
            Case::Inconclusive => "Inconclusive",
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub tau_zero: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tau_zero: DEFAULT_TAU_ZERO,
        }
    }
}

impl Tolerances {
    fn scale(&self, x: &[f64]) -> f64 {
        self.tau_zero * (1.0 + x.iter().map(|v| v * v).sum::<f64>())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub name: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Certificate {
    pub case: Case,
    /// Bracket order; 0 for the transversal and Artstein–Sontag cases.
    pub n: usize,
    /// Evaluated quantities in evaluation order.
    pub witnesses: Vec<Witness>,
    /// Name of the witness that decided the case, if any.
    pub decisive: Option<String>,
    pub tolerances: Tolerances,
    /// Why no branch applied; only set for `Inconclusive`.
    pub reason: Option<String>,
}

impl Certificate {
    pub fn witness(&self, name: &str) -> Option<f64> {
        self.witnesses.iter().find(|w| w.name == name).map(|w| w.value)
    }

    pub fn decisive_value(&self) -> Option<f64> {
        self.decisive.as_deref().and_then(|n| self.witness(n))
    }

    pub fn gv(&self) -> f64 {
        self.witness("gV").unwrap_or(f64::NAN)
    }

    pub fn fv(&self) -> f64 {
        self.witness("fV").unwrap_or(f64::NAN)
    }
}

impl fmt::Display for Certificate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "case={} N={}", self.case, self.n)?;
        if let (Some(name), Some(v)) = (&self.decisive, self.decisive_value()) {
            write!(f, " {name}={v:e}")?;
        }
        if let Some(r) = &self.reason {
            write!(f, " ({r})")?;
        }
        Ok(())
    }
}

/// Name of `f^i V`.
pub fn power_name(i: usize) -> String {
    match i {
        0 => "V".into(),
        1 => "fV".into(),
        _ => format!("f^{i}V"),
    }
}

/// Symbolic quantities needed to decide branch `N`.
#[derive(Debug)]
struct Level {
    /// Products `Δ1...ΔkV` whose word orders sum to exactly `N`.
    products: Vec<(Vec<LieWord>, ScalarField)>,
    /// `f^{N+1} V`.
    f_power_next: ScalarField,
    /// `[..[f,g],g..]V` with `N` copies of `g`.
    f_ad_g: ScalarField,
    /// `[..[g,f],f..]V` with `N` copies of `f`.
    g_ad_f: ScalarField,
}

/// Classifies points for one system, building the symbolic tables for
/// each order the first time a point needs it. Shareable across threads.
#[derive(Debug)]
pub struct Certifier {
    sys: SystemDef,
    n_max: usize,
    tol: Tolerances,
    gv: ScalarField,
    fv: ScalarField,
    realizer: Mutex<WordRealizer>,
    levels: Vec<OnceLock<Result<Level, LieError>>>,
}

impl Certifier {
    pub fn new(sys: &SystemDef, n_max: usize) -> Result<Self, CertifyError> {
        Self::with_tolerances(sys, n_max, Tolerances::default())
    }

    pub fn with_tolerances(sys: &SystemDef, n_max: usize, tol: Tolerances) -> Result<Self, CertifyError> {
        let gv = directional_derivative(&sys.g, &sys.v)?;
        let fv = directional_derivative(&sys.f, &sys.v)?;
        Ok(Certifier {
            realizer: Mutex::new(WordRealizer::new(sys.f.clone(), sys.g.clone())?),
            sys: sys.clone(),
            n_max,
            tol,
            gv,
            fv,
            levels: (0..=n_max).map(|_| OnceLock::new()).collect(),
        })
    }

    pub fn system(&self) -> &SystemDef {
        &self.sys
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    fn level(&self, n: usize) -> Result<&Level, LieError> {
        self.levels[n]
            .get_or_init(|| self.build_level(n))
            .as_ref()
            .map_err(Clone::clone)
    }

    fn build_level(&self, n: usize) -> Result<Level, LieError> {
        let tuples = products_of_total(n);
        let mut products = Vec::with_capacity(tuples.len());
        // Suffix products of lower total were built by earlier levels.
        let lower: Vec<HashMap<&[LieWord], &ScalarField>> = (1..n)
            .map(|k| {
                self.level(k).map(|lv| {
                    lv.products
                        .iter()
                        .map(|(t, s)| (t.as_slice(), s))
                        .collect::<HashMap<_, _>>()
                })
            })
            .collect::<Result<_, _>>()?;
        let f_power_n = if n == 1 {
            self.fv.clone()
        } else {
            self.level(n - 1)?.f_power_next.clone()
        };
        let mut realizer = self.realizer.lock().expect("realizer lock");
        for tuple in tuples {
            let head = realizer.field(&tuple[0])?;
            let tail_total = n - tuple[0].order();
            let inner = if tail_total == 0 {
                self.sys.v.clone()
            } else {
                (*lower[tail_total - 1][&tuple[1..]]).clone()
            };
            let value = directional_derivative(&head, &inner)?;
            products.push((tuple, value));
        }
        let f_ad_g = realizer.field(&LieWord::f_ad_g(n))?;
        let g_ad_f = realizer.field(&LieWord::g_ad_f(n))?;
        Ok(Level {
            products,
            f_power_next: directional_derivative(&self.sys.f, &f_power_n)?,
            f_ad_g: directional_derivative(&f_ad_g, &self.sys.v)?,
            g_ad_f: directional_derivative(&g_ad_f, &self.sys.v)?,
        })
    }

    pub fn certify(&self, x: &EvalPoint) -> Result<Certificate, CertifyError> {
        let xs = x.coords();
        if xs.len() != self.sys.dim() {
            return Err(LieError::DimensionMismatch(self.sys.dim(), xs.len()).into());
        }
        let norm = x.norm();
        if norm <= self.tol.tau_zero {
            return Err(CertifyError::AtOrigin { norm });
        }
        let eps = self.tol.scale(xs);
        let is_zero = |v: f64| v.abs() <= eps;
        let mut witnesses = Vec::new();
        let push = |w: &mut Vec<Witness>, name: String, value: f64| {
            w.push(Witness { name, value });
            value
        };
        let done = |case, n, witnesses, decisive: Option<String>, reason: Option<String>| Certificate {
            case,
            n,
            witnesses,
            decisive,
            tolerances: self.tol,
            reason,
        };

        let gv = push(&mut witnesses, "gV".into(), self.gv.eval(xs)?);
        if !is_zero(gv) {
            return Ok(done(Case::Transversal, 0, witnesses, Some("gV".into()), None));
        }
        let fv = push(&mut witnesses, "fV".into(), self.fv.eval(xs)?);
        if fv < -eps {
            return Ok(done(Case::ArtsteinSontag, 0, witnesses, Some("fV".into()), None));
        }
        if !is_zero(fv) {
            let reason = format!("gV = 0 but fV = {fv:e} > 0");
            return Ok(done(Case::Inconclusive, 0, witnesses, None, Some(reason)));
        }

        for n in 1..=self.n_max {
            let level = self.level(n)?;
            // f^n V = 0 is part of the vanishing conditions; f^{n} V for
            // n >= 2 was the previous level's `f_power_next`.
            if n >= 2 {
                let prev = witnesses
                    .iter()
                    .find(|w| w.name == power_name(n))
                    .map(|w| w.value)
                    .unwrap_or(f64::NAN);
                if !is_zero(prev) {
                    let reason = format!("vanishing condition fails at N={n}: {} = {prev:e}", power_name(n));
                    return Ok(done(Case::Inconclusive, n - 1, witnesses, None, Some(reason)));
                }
            }
            for (tuple, field) in &level.products {
                let value = field.eval(xs)?;
                if !is_zero(value) {
                    let reason = format!("vanishing condition fails at N={n}: {} = {value:e}", product_name(tuple));
                    return Ok(done(Case::Inconclusive, n - 1, witnesses, None, Some(reason)));
                }
            }
            let next_name = power_name(n + 1);
            let f_next = push(&mut witnesses, next_name.clone(), level.f_power_next.eval(xs)?);
            if f_next < -eps {
                return Ok(done(Case::P1, n, witnesses, Some(next_name), None));
            }
            let fg_name = product_name(&[LieWord::f_ad_g(n)]);
            let fg = level.f_ad_g.eval(xs)?;
            if n % 2 == 1 && !is_zero(fg) {
                push(&mut witnesses, fg_name.clone(), fg);
                return Ok(done(Case::P2, n, witnesses, Some(fg_name), None));
            }
            if n % 2 == 0 && fg < -eps {
                push(&mut witnesses, fg_name.clone(), fg);
                return Ok(done(Case::P3, n, witnesses, Some(fg_name), None));
            }
            let gf_name = product_name(&[LieWord::g_ad_f(n)]);
            let gf = level.g_ad_f.eval(xs)?;
            if is_zero(f_next) && !is_zero(gf) {
                push(&mut witnesses, gf_name.clone(), gf);
                return Ok(done(Case::P4, n, witnesses, Some(gf_name), None));
            }
        }
        let reason = format!("no branch applies up to N_max={}", self.n_max);
        Ok(done(Case::Inconclusive, self.n_max, witnesses, None, Some(reason)))
    }
}

/// Classifies a single point. Builds a fresh [`Certifier`]; reuse one for
/// many points.
pub fn certify_point(sys: &SystemDef, x: &EvalPoint, n_max: usize) -> Result<Certificate, CertifyError> {
    Certifier::new(sys, n_max)?.certify(x)
}

/// Axis-aligned box `[lo_i, hi_i]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum GridOutcome {
    Certified(Certificate),
    /// The point lies within `tau_zero` of the origin.
    SkippedOrigin,
    Failed(CertifyError),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridEntry {
    pub point: EvalPoint,
    pub outcome: GridOutcome,
}

/// Points of a tensor grid with `res[i]` evenly spaced values per axis,
/// first axis varying slowest. One value per axis means the midpoint.
pub fn grid_points(bx: &GridBox, res: &[usize]) -> Result<Vec<EvalPoint>, CertifyError> {
    let n = bx.lo.len();
    if bx.hi.len() != n || res.len() != n {
        return Err(CertifyError::EmptyGrid(format!(
            "box has {} lower and {} upper bounds, {} resolutions",
            n,
            bx.hi.len(),
            res.len()
        )));
    }
    if n == 0 || res.contains(&0) {
        return Err(CertifyError::EmptyGrid("zero points along some axis".into()));
    }
    if bx.lo.iter().zip(&bx.hi).any(|(l, h)| !(l <= h)) {
        return Err(CertifyError::EmptyGrid("lower bound above upper bound".into()));
    }
    let axes: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let (lo, hi, k) = (bx.lo[i], bx.hi[i], res[i]);
            if k == 1 {
                vec![0.5 * (lo + hi)]
            } else {
                (0..k).map(|j| lo + (hi - lo) * j as f64 / (k - 1) as f64).collect()
            }
        })
        .collect();
    let total: usize = res.iter().product();
    let mut out = Vec::with_capacity(total);
    for mut idx in 0..total {
        let mut p = vec![0.0; n];
        for i in (0..n).rev() {
            p[i] = axes[i][idx % res[i]];
            idx /= res[i];
        }
        out.push(EvalPoint::new(p));
    }
    Ok(out)
}

pub fn certify_grid(
    sys: &SystemDef,
    bx: &GridBox,
    res: &[usize],
    n_max: usize,
    exec: Exec,
) -> Result<Vec<GridEntry>, CertifyError> {
    if bx.lo.len() != sys.dim() {
        return Err(LieError::DimensionMismatch(sys.dim(), bx.lo.len()).into());
    }
    let points = grid_points(bx, res)?;
    let certifier = Certifier::new(sys, n_max)?;
    Ok(certifier.certify_many(&points, exec))
}

impl Certifier {
    pub fn certify_many(&self, points: &[EvalPoint], exec: Exec) -> Vec<GridEntry> {
        exec.map(points, |p| {
            let outcome = match self.certify(p) {
                Ok(c) => GridOutcome::Certified(c),
                Err(CertifyError::AtOrigin { .. }) => GridOutcome::SkippedOrigin,
                Err(e) => GridOutcome::Failed(e),
            };
            GridEntry {
                point: p.clone(),
                outcome,
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn system(f: &[&str], g: &[&str], v: &str) -> SystemDef {
        let n = f.len();
        SystemDef::new(
            VectorField::parse(f, n).unwrap(),
            VectorField::parse(g, n).unwrap(),
            ScalarField::parse(v, n).unwrap(),
        )
        .unwrap()
    }

    fn dblint() -> SystemDef {
        system(&["x2", "0"], &["0", "1"], "0.5*(x1^2+x2^2)")
    }

    fn example1() -> SystemDef {
        system(&["-x1*x2^2", "0"], &["0", "1"], "0.5*(x1^2+x2^2)")
    }

    fn example2() -> SystemDef {
        system(&["x2*(1+x3)", "-x1", "0"], &["0", "0", "1"], "0.5*(x1^2+x2^2+x3^2)")
    }

    fn at(x: &[f64]) -> EvalPoint {
        EvalPoint::new(x.to_vec())
    }

    #[test]
    fn double_integrator_cases() {
        let c = certify_point(&dblint(), &at(&[1.0, 0.0]), 4).unwrap();
        assert_eq!((c.case, c.n), (Case::P2, 1));
        assert_eq!(c.witness("[f,g]V"), Some(-1.0));
        let c = certify_point(&dblint(), &at(&[0.0, 1.0]), 4).unwrap();
        assert_eq!((c.case, c.n), (Case::Transversal, 0));
        assert_eq!(c.gv(), 1.0);
    }

    #[test]
    fn example1_is_p3_at_order_two() {
        let c = certify_point(&example1(), &at(&[1.0, 0.0]), 4).unwrap();
        assert_eq!((c.case, c.n), (Case::P3, 2));
        assert_eq!(c.decisive.as_deref(), Some("[[f,g],g]V"));
        assert!((c.decisive_value().unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn example2_cases() {
        let c = certify_point(&example2(), &at(&[1.0, 1.0, 0.0]), 4).unwrap();
        assert_eq!((c.case, c.n), (Case::P2, 1));
        assert!((c.decisive_value().unwrap() + 1.0).abs() < 1e-12);
        let c = certify_point(&example2(), &at(&[1.0, 0.0, 0.0]), 4).unwrap();
        assert_eq!((c.case, c.n), (Case::P4, 2));
        assert_eq!(c.decisive.as_deref(), Some("[[g,f],f]V"));
        assert!((c.decisive_value().unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(c.witness("f^3V"), Some(0.0));
    }

    #[test]
    fn origin_is_rejected() {
        assert!(matches!(
            certify_point(&dblint(), &at(&[0.0, 0.0]), 4),
            Err(CertifyError::AtOrigin { .. })
        ));
    }

    #[test]
    fn artstein_sontag_and_inconclusive() {
        let damped = system(&["x2", "-x1-x2"], &["1", "0"], "0.5*(x1^2+x2^2)");
        // gV = x1 = 0, fV = -x2^2 < 0.
        let c = certify_point(&damped, &at(&[0.0, 1.0]), 4).unwrap();
        assert_eq!(c.case, Case::ArtsteinSontag);
        let unstable = system(&["x1", "x2"], &["0", "1"], "0.5*(x1^2+x2^2)");
        let c = certify_point(&unstable, &at(&[1.0, 0.0]), 4).unwrap();
        assert_eq!(c.case, Case::Inconclusive);
        assert!(c.reason.is_some());
    }

    #[test]
    fn system_def_checks_v() {
        let f = VectorField::parse(&["x2", "0"], 2).unwrap();
        let g = VectorField::parse(&["0", "1"], 2).unwrap();
        let shifted = ScalarField::parse("x1^2 + x2^2 + 1", 2).unwrap();
        assert!(matches!(
            SystemDef::new(f.clone(), g.clone(), shifted),
            Err(CertifyError::VNotZeroAtOrigin(_))
        ));
        let indefinite = ScalarField::parse("x1^2 - x2^2", 2).unwrap();
        assert!(matches!(
            SystemDef::new(f.clone(), g.clone(), indefinite),
            Err(CertifyError::VNotPositive { .. })
        ));
        let wrong_dim = ScalarField::parse("x1^2", 1).unwrap();
        assert!(SystemDef::new(f, g, wrong_dim).is_err());
    }

    #[test]
    fn double_integrator_grid() {
        let bx = GridBox {
            lo: vec![-1.0, -1.0],
            hi: vec![1.0, 1.0],
        };
        let entries = certify_grid(&dblint(), &bx, &[5, 5], 4, Exec::default()).unwrap();
        assert_eq!(entries.len(), 25);
        for e in &entries {
            let x = e.point.coords();
            match &e.outcome {
                GridOutcome::SkippedOrigin => assert_eq!(x, &[0.0, 0.0]),
                GridOutcome::Certified(c) if x[1] != 0.0 => assert_eq!(c.case, Case::Transversal),
                GridOutcome::Certified(c) => assert_eq!((c.case, c.n), (Case::P2, 1)),
                GridOutcome::Failed(err) => panic!("{err}"),
            }
        }
    }

    #[test]
    fn degenerate_grids() {
        let single = GridBox {
            lo: vec![1.0, 0.0],
            hi: vec![1.0, 0.0],
        };
        let e = certify_grid(&dblint(), &single, &[1, 1], 4, Exec::Sequential).unwrap();
        assert_eq!(e.len(), 1);
        let origin = GridBox {
            lo: vec![0.0, 0.0],
            hi: vec![0.0, 0.0],
        };
        let e = certify_grid(&dblint(), &origin, &[1, 1], 4, Exec::Sequential).unwrap();
        assert!(e.iter().all(|e| e.outcome == GridOutcome::SkippedOrigin));
        assert!(matches!(
            certify_grid(&dblint(), &origin, &[0, 3], 4, Exec::Sequential),
            Err(CertifyError::EmptyGrid(_))
        ));
    }
}
