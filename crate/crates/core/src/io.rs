//! CSV formats for densities and transform curves.
//!
//! Density files hold `x,value` rows preceded by optional metadata lines:
//!
//! ```text
//! # head <p> <c> <beta>
//! # tail <p> <c> [<beta>]      (beta defaults to 1/2)
//! # signed
//! ```
//!
//! Transform files start with `# kind laplace|bernstein` (and optionally
//! `# signed`) followed by `eta,value` rows. Numbers are written in shortest
//! round-trip exponent form, so output bytes depend only on the values.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::catalog::PowerExp;
use crate::density::GriddedDensity;
use crate::error::{CoagError, Result};
use crate::transforms::{TransformCurve, TransformKind};

const DEFAULT_TAIL_BETA: f64 = 0.5;

fn ext_line(out: &mut String, tag: &str, e: &PowerExp) {
    writeln!(out, "# {tag} {:e} {:e} {:e}", e.p(), e.c, e.theta).unwrap();
}

pub fn density_to_csv(f: &GriddedDensity) -> String {
    let mut out = String::new();
    if let Some(h) = &f.head {
        ext_line(&mut out, "head", h);
    }
    if let Some(t) = &f.tail {
        ext_line(&mut out, "tail", t);
    }
    if f.signed {
        out.push_str("# signed\n");
    }
    for (x, v) in f.grid.iter().zip(&f.values) {
        writeln!(out, "{x:e},{v:e}").unwrap();
    }
    out
}

fn parse_num(tok: &str, line_no: usize) -> Result<f64> {
    tok.trim().parse::<f64>().map_err(|_| CoagError::Parse(format!("line {line_no}: bad number '{tok}'")))
}

fn parse_ext(toks: &[&str], line_no: usize, beta_default: Option<f64>) -> Result<PowerExp> {
    let nums = toks.iter().map(|t| parse_num(t, line_no)).collect::<Result<Vec<_>>>()?;
    match (nums.as_slice(), beta_default) {
        ([p, c, beta], _) => Ok(PowerExp::from_extension(*p, *c, *beta)),
        ([p, c], Some(beta)) => Ok(PowerExp::from_extension(*p, *c, beta)),
        _ => Err(CoagError::Parse(format!("line {line_no}: malformed extension line"))),
    }
}

/// Metadata lines as `(line number, words)`.
type MetaLines = Vec<(usize, Vec<String>)>;

fn rows(text: &str) -> Result<(MetaLines, Vec<(f64, f64)>)> {
    let mut meta = Vec::new();
    let mut data = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('#') {
            meta.push((line_no, rest.split_whitespace().map(str::to_string).collect()));
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 2 {
            return Err(CoagError::Parse(format!("line {line_no}: expected two columns")));
        }
        // tolerate a plain-text column header
        if data.is_empty() && cols[0].trim().parse::<f64>().is_err() {
            continue;
        }
        data.push((parse_num(cols[0], line_no)?, parse_num(cols[1], line_no)?));
    }
    Ok((meta, data))
}

pub fn density_from_csv(text: &str) -> Result<GriddedDensity> {
    let (meta, data) = rows(text)?;
    let mut head = None;
    let mut tail = None;
    let mut signed = false;
    for (line_no, toks) in &meta {
        let refs: Vec<&str> = toks.iter().map(String::as_str).collect();
        match refs.first() {
            Some(&"head") => head = Some(parse_ext(&refs[1..], *line_no, None)?),
            Some(&"tail") => tail = Some(parse_ext(&refs[1..], *line_no, Some(DEFAULT_TAIL_BETA))?),
            Some(&"signed") => signed = true,
            _ => {}
        }
    }
    let (grid, values): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
    let f = if signed { GriddedDensity::new_signed(grid, values)? } else { GriddedDensity::new(grid, values)? };
    Ok(f.with_head(head).with_tail(tail))
}

pub fn read_density(path: impl AsRef<Path>) -> Result<GriddedDensity> {
    density_from_csv(&fs::read_to_string(path)?)
}

pub fn write_density(path: impl AsRef<Path>, f: &GriddedDensity) -> Result<()> {
    fs::write(path, density_to_csv(f))?;
    Ok(())
}

pub fn curve_to_csv(c: &TransformCurve) -> String {
    let mut out = format!("# kind {}\n", c.kind.name());
    if c.signed {
        out.push_str("# signed\n");
    }
    for (e, v) in c.etas.iter().zip(&c.values) {
        writeln!(out, "{e:e},{v:e}").unwrap();
    }
    out
}

pub fn curve_from_csv(text: &str) -> Result<TransformCurve> {
    let (meta, data) = rows(text)?;
    let mut kind = None;
    let mut signed = false;
    for (line_no, toks) in &meta {
        match toks.first().map(String::as_str) {
            Some("kind") => {
                let k = toks.get(1).ok_or_else(|| CoagError::Parse(format!("line {line_no}: missing kind")))?;
                kind = Some(k.parse::<TransformKind>()?);
            }
            Some("signed") => signed = true,
            _ => {}
        }
    }
    let kind = kind.ok_or_else(|| CoagError::Parse("missing '# kind' line".into()))?;
    let (etas, values): (Vec<f64>, Vec<f64>) = data.into_iter().unzip();
    TransformCurve::from_values(etas, values, kind, signed)
}

pub fn read_curve(path: impl AsRef<Path>) -> Result<TransformCurve> {
    curve_from_csv(&fs::read_to_string(path)?)
}

pub fn write_curve(path: impl AsRef<Path>, c: &TransformCurve) -> Result<()> {
    fs::write(path, curve_to_csv(c))?;
    Ok(())
}
