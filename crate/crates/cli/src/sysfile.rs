//! System definition files.
//!
//! ```text
//! # comment
//! dim = 3
//! param a = 1
//! f = ["x2*(a+x3)", "-x1", "0"]
//! g = ["0", "0", "1"]
//! V = "0.5*(x1^2+x2^2+x3^2)"
//! ```
//!
//! Parameters are substituted textually (whole identifiers only, wrapped
//! in parentheses) before the expressions are parsed.

use std::fmt;
use std::path::Path;

use sdstab::certify::{CertifyError, SystemDef};
use sdstab::lie::{LieError, ScalarField, VectorField};
use sdstab::symcalc::SymError;

#[derive(Debug)]
pub enum LoadError {
    Io(std::io::Error),
    /// Positions are 1-based.
    Parse { line: usize, column: usize, message: String },
    DimensionMismatch { key: &'static str, expected: usize, found: usize },
    Invalid(String),
}

impl fmt::Display for LoadError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoadError::Io(e) => write!(f, "cannot read system file: {e}"),
            LoadError::Parse { line, column, message } => write!(f, "line {line}, column {column}: {message}"),
            LoadError::DimensionMismatch { key, expected, found } => {
                write!(f, "dimension mismatch: {key} has {found} components, dim is {expected}")
            }
            LoadError::Invalid(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for LoadError {}

/// A string value with the file position of its first character.
#[derive(Clone, Debug)]
struct Located {
    text: String,
    line: usize,
    column: usize,
}

#[derive(Default)]
struct Raw {
    dim: Option<(usize, usize)>,
    f: Option<(Vec<Located>, usize)>,
    g: Option<(Vec<Located>, usize)>,
    v: Option<Located>,
    params: Vec<(String, String)>,
}

fn err(line: usize, column: usize, message: impl Into<String>) -> LoadError {
    LoadError::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Reads one double-quoted string starting at byte `pos` of `line`.
fn quoted(line: &str, pos: usize, lineno: usize) -> Result<(Located, usize), LoadError> {
    let rest = &line[pos..];
    if !rest.starts_with('"') {
        return Err(err(lineno, pos + 1, "expected a double-quoted string"));
    }
    match rest[1..].find('"') {
        Some(end) => Ok((
            Located {
                text: rest[1..1 + end].to_string(),
                line: lineno,
                column: pos + 2,
            },
            pos + end + 2,
        )),
        None => Err(err(lineno, pos + 1, "unterminated string")),
    }
}

fn skip_ws(line: &str, mut pos: usize) -> usize {
    while line[pos..].starts_with([' ', '\t']) {
        pos += 1;
    }
    pos
}

fn string_list(line: &str, pos: usize, lineno: usize) -> Result<Vec<Located>, LoadError> {
    if !line[pos..].starts_with('[') {
        return Err(err(lineno, pos + 1, "expected '[' to start a list"));
    }
    let mut out = Vec::new();
    let mut pos = skip_ws(line, pos + 1);
    if line[pos..].starts_with(']') {
        return finish(line, pos + 1, lineno).map(|_| out);
    }
    loop {
        let (item, next) = quoted(line, pos, lineno)?;
        out.push(item);
        pos = skip_ws(line, next);
        match line[pos..].chars().next() {
            Some(',') => pos = skip_ws(line, pos + 1),
            Some(']') => return finish(line, pos + 1, lineno).map(|_| out),
            _ => return Err(err(lineno, pos + 1, "expected ',' or ']'")),
        }
    }
}

fn finish(line: &str, pos: usize, lineno: usize) -> Result<(), LoadError> {
    let pos = skip_ws(line, pos);
    if pos < line.len() {
        return Err(err(lineno, pos + 1, "unexpected text after value"));
    }
    Ok(())
}

/// Replaces whole-identifier occurrences of each parameter by `(value)`.
pub fn substitute(text: &str, params: &[(String, String)]) -> String {
    let mut out = String::with_capacity(text.len());
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        if is_ident_char(chars[i]) && (i == 0 || !is_ident_char(chars[i - 1])) {
            let start = i;
            while i < chars.len() && is_ident_char(chars[i]) {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            match params.iter().find(|(k, _)| *k == word) {
                Some((_, v)) => {
                    out.push('(');
                    out.push_str(v);
                    out.push(')');
                }
                None => out.push_str(&word),
            }
        } else {
            out.push(chars[i]);
            i += 1;
        }
    }
    out
}

fn scan(source: &str) -> Result<Raw, LoadError> {
    let mut raw = Raw::default();
    for (idx, full) in source.lines().enumerate() {
        let lineno = idx + 1;
        let line = match full.find('#') {
            Some(c) if full[..c].matches('"').count() % 2 == 0 => &full[..c],
            _ => full,
        };
        let line = line.trim_end();
        let start = skip_ws(line, 0);
        if start == line.len() {
            continue;
        }
        let Some(eq) = line.find('=') else {
            return Err(err(lineno, start + 1, "expected 'key = value'"));
        };
        let key = line[start..eq].trim();
        let vpos = skip_ws(line, eq + 1);
        if vpos == line.len() {
            return Err(err(lineno, eq + 2, "missing value"));
        }
        let dup = |present: bool| {
            if present {
                Err(err(lineno, start + 1, format!("duplicate key '{key}'")))
            } else {
                Ok(())
            }
        };
        match key {
            "dim" => {
                dup(raw.dim.is_some())?;
                let text = line[vpos..].trim();
                let n: usize = text
                    .parse()
                    .map_err(|_| err(lineno, vpos + 1, format!("dim must be a positive integer, got '{text}'")))?;
                if n == 0 {
                    return Err(err(lineno, vpos + 1, "dim must be positive"));
                }
                raw.dim = Some((n, lineno));
            }
            "f" => {
                dup(raw.f.is_some())?;
                raw.f = Some((string_list(line, vpos, lineno)?, lineno));
            }
            "g" => {
                dup(raw.g.is_some())?;
                raw.g = Some((string_list(line, vpos, lineno)?, lineno));
            }
            "V" => {
                dup(raw.v.is_some())?;
                let (s, next) = quoted(line, vpos, lineno)?;
                finish(line, next, lineno)?;
                raw.v = Some(s);
            }
            k if k.starts_with("param ") => {
                let name = k["param ".len()..].trim();
                if name.is_empty() || !name.chars().all(is_ident_char) || name.starts_with(|c: char| c.is_ascii_digit()) {
                    return Err(err(lineno, start + 1, format!("invalid parameter name '{name}'")));
                }
                if is_reserved(name) {
                    return Err(err(lineno, start + 1, format!("parameter name '{name}' is reserved")));
                }
                let value = line[vpos..].trim();
                if value.parse::<f64>().map_or(true, |v| !v.is_finite()) {
                    return Err(err(lineno, vpos + 1, format!("parameter value '{value}' is not a number")));
                }
                if raw.params.iter().any(|(k, _)| k == name) {
                    return Err(err(lineno, start + 1, format!("duplicate parameter '{name}'")));
                }
                raw.params.push((name.to_string(), value.to_string()));
            }
            other => return Err(err(lineno, start + 1, format!("unknown key '{other}'"))),
        }
    }
    Ok(raw)
}

fn is_reserved(name: &str) -> bool {
    matches!(name, "sin" | "cos" | "exp" | "ln")
        || (name.len() > 1 && name.starts_with('x') && name[1..].chars().all(|c| c.is_ascii_digit()))
}

fn parse_expr_error(loc: &Located, substituted: bool, e: SymError) -> LoadError {
    let position = match &e {
        SymError::Syntax { position, .. }
        | SymError::UnknownIdentifier { position, .. }
        | SymError::VariableOutOfRange { position, .. } => Some(*position),
        _ => None,
    };
    match (position, substituted) {
        (Some(p), false) => err(loc.line, loc.column + p, e.to_string()),
        _ => err(loc.line, loc.column, format!("{e} (after parameter substitution: \"{}\")", loc.text)),
    }
}

fn field(items: &[Located], dim: usize, params: &[(String, String)]) -> Result<VectorField, LoadError> {
    let mut comps = Vec::with_capacity(items.len());
    for loc in items {
        let text = substitute(&loc.text, params);
        let e = sdstab::symcalc::parse(&text, dim).map_err(|e| parse_expr_error(loc, text != loc.text, e))?;
        comps.push(e);
    }
    VectorField::new(comps, dim).map_err(|e| LoadError::Invalid(e.to_string()))
}

/// Parses a system file held in memory.
pub fn parse_system(source: &str) -> Result<SystemDef, LoadError> {
    let raw = scan(source)?;
    let missing = |k: &str| LoadError::Invalid(format!("missing key '{k}'"));
    let (dim, _) = raw.dim.ok_or_else(|| missing("dim"))?;
    let (f_items, _) = raw.f.as_ref().ok_or_else(|| missing("f"))?;
    let (g_items, _) = raw.g.as_ref().ok_or_else(|| missing("g"))?;
    let v_loc = raw.v.as_ref().ok_or_else(|| missing("V"))?;
    for (key, items) in [("f", f_items), ("g", g_items)] {
        if items.len() != dim {
            return Err(LoadError::DimensionMismatch {
                key,
                expected: dim,
                found: items.len(),
            });
        }
    }
    let f = field(f_items, dim, &raw.params)?;
    let g = field(g_items, dim, &raw.params)?;
    let v_text = substitute(&v_loc.text, &raw.params);
    let v_expr = sdstab::symcalc::parse(&v_text, dim).map_err(|e| parse_expr_error(v_loc, v_text != v_loc.text, e))?;
    let v = ScalarField::new(v_expr, dim).map_err(|e| LoadError::Invalid(e.to_string()))?;
    SystemDef::new(f, g, v).map_err(|e| match e {
        CertifyError::Lie(LieError::DimensionMismatch(a, b)) => LoadError::DimensionMismatch {
            key: "V",
            expected: a,
            found: b,
        },
        other => LoadError::Invalid(other.to_string()),
    })
}

pub fn load_system(path: &Path) -> Result<SystemDef, LoadError> {
    let source = std::fs::read_to_string(path).map_err(LoadError::Io)?;
    parse_system(&source)
}
