//! Spec-string grammar.
//!
//! ```text
//! kernel     := linear
//!             | gaussian[:sigma=(FLOAT|median)]
//!             | matern:nu=(0.5|1.5|2.5|1/2|3/2|5/2),ell=FLOAT
//!             | induced_kernel:base=SEMIMETRIC[,anchor=(origin|first|FLOAT;FLOAT;...)]
//! semimetric := euclid2
//!             | kernel_induced(KERNEL) | kernel_induced:KERNEL
//!             | explicit:path=FILE
//! ```
//!
//! `gaussian` without a bandwidth uses the median heuristic. The anchor
//! defaults to the origin, or to the first sample point for explicit bases.

use std::str::FromStr;

use super::{
    induced_kernel, Anchor, Bandwidth, ExplicitMatrix, KernelSpec, MaternNu, SemimetricSpec,
};
use crate::error::{Error, Result};

fn parse_err(spec: &str, why: impl std::fmt::Display) -> Error {
    Error::Parse(format!("`{spec}`: {why}"))
}

/// Splits `a=1,b=f(x,y)` on commas outside parentheses.
fn split_top_level(s: &str) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, c) in s.char_indices() {
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                parts.push(&s[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&s[start..]);
    parts
}

fn params<'a>(spec: &str, body: &'a str, allowed: &[&str]) -> Result<Vec<(&'a str, &'a str)>> {
    let mut out: Vec<(&str, &str)> = Vec::new();
    for part in split_top_level(body) {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| parse_err(spec, format!("expected key=value, found `{part}`")))?;
        let key = key.trim();
        if !allowed.contains(&key) {
            return Err(parse_err(spec, format!("unknown parameter `{key}`")));
        }
        if out.iter().any(|(k, _)| *k == key) {
            return Err(parse_err(spec, format!("parameter `{key}` given twice")));
        }
        out.push((key, value.trim()));
    }
    Ok(out)
}

fn lookup<'a>(ps: &[(&str, &'a str)], key: &str) -> Option<&'a str> {
    ps.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

fn float(spec: &str, key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| parse_err(spec, format!("`{key}` must be a number, got `{v}`")))?;
    if !x.is_finite() {
        return Err(parse_err(spec, format!("`{key}` must be finite")));
    }
    Ok(x)
}

fn parse_nu(spec: &str, v: &str) -> Result<MaternNu> {
    let nu = match v {
        "1/2" => 0.5,
        "3/2" => 1.5,
        "5/2" => 2.5,
        other => float(spec, "nu", other)?,
    };
    MaternNu::from_value(nu).map_err(|e| parse_err(spec, e))
}

fn parse_anchor(spec: &str, v: &str) -> Result<Anchor> {
    match v {
        "origin" => Ok(Anchor::Origin),
        "first" => Ok(Anchor::FirstPoint),
        coords => coords
            .split(';')
            .map(|c| float(spec, "anchor", c.trim()))
            .collect::<Result<Vec<_>>>()
            .map(Anchor::Point),
    }
}

impl FromStr for KernelSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        let (name, body) = match spec.split_once(':') {
            Some((n, b)) => (n.trim(), Some(b)),
            None => (spec, None),
        };
        match name {
            "linear" => match body {
                None => Ok(KernelSpec::Linear),
                Some(_) => Err(parse_err(spec, "linear takes no parameters")),
            },
            "gaussian" => {
                let ps = match body {
                    Some(b) => params(spec, b, &["sigma"])?,
                    None => Vec::new(),
                };
                match lookup(&ps, "sigma") {
                    None | Some("median") => Ok(KernelSpec::Gaussian {
                        bandwidth: Bandwidth::MedianHeuristic,
                    }),
                    Some(v) => KernelSpec::gaussian(float(spec, "sigma", v)?)
                        .map_err(|e| parse_err(spec, e)),
                }
            }
            "matern" => {
                let ps = params(spec, body.unwrap_or(""), &["nu", "ell"])?;
                let nu = parse_nu(
                    spec,
                    lookup(&ps, "nu").ok_or_else(|| parse_err(spec, "missing `nu`"))?,
                )?;
                let ell = float(
                    spec,
                    "ell",
                    lookup(&ps, "ell").ok_or_else(|| parse_err(spec, "missing `ell`"))?,
                )?;
                KernelSpec::matern(nu, ell).map_err(|e| parse_err(spec, e))
            }
            "induced_kernel" => {
                let ps = params(spec, body.unwrap_or(""), &["base", "anchor"])?;
                let base: SemimetricSpec = lookup(&ps, "base")
                    .ok_or_else(|| parse_err(spec, "missing `base`"))?
                    .parse()?;
                let anchor = match lookup(&ps, "anchor") {
                    Some(v) => parse_anchor(spec, v)?,
                    None if matches!(base, SemimetricSpec::Explicit(_)) => Anchor::FirstPoint,
                    None => Anchor::Origin,
                };
                induced_kernel(&base, anchor).map_err(|e| parse_err(spec, e))
            }
            other => Err(parse_err(spec, format!("unknown kernel `{other}`"))),
        }
    }
}

impl FromStr for SemimetricSpec {
    type Err = Error;

    fn from_str(spec: &str) -> Result<Self> {
        let spec = spec.trim();
        if spec == "euclid2" {
            return Ok(SemimetricSpec::EuclideanSquared);
        }
        if let Some(inner) = spec.strip_prefix("kernel_induced(") {
            let inner = inner
                .strip_suffix(')')
                .ok_or_else(|| parse_err(spec, "unbalanced parentheses"))?;
            return Ok(SemimetricSpec::KernelInduced(Box::new(inner.parse()?)));
        }
        if let Some(inner) = spec.strip_prefix("kernel_induced:") {
            return Ok(SemimetricSpec::KernelInduced(Box::new(inner.parse()?)));
        }
        if let Some(body) = spec.strip_prefix("explicit:") {
            let ps = params(spec, body, &["path"])?;
            let path = lookup(&ps, "path").ok_or_else(|| parse_err(spec, "missing `path`"))?;
            let file = std::fs::File::open(path)
                .map_err(|e| parse_err(spec, format!("cannot open {path}: {e}")))?;
            let values = crate::io::read_matrix_csv(file)?;
            return Ok(SemimetricSpec::explicit(
                ExplicitMatrix::new(values)?.with_source(path),
            ));
        }
        Err(parse_err(spec, "unknown semimetric"))
    }
}
