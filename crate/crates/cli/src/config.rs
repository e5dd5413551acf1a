//! Study configuration files: `[study]`, `[grid]` and `[sweep]` sections of
//! `key = value` lines. Text after `#` is a comment.
//!
//! ```text
//! [study]
//! kind = noise
//! geometry = line
//! profile = gaussian:a=1
//! variants = CI-A, CI-classical
//! tau = 0.3
//! seed = 20240607
//!
//! [grid]
//! a = -8
//! b = 8
//! n_nodes = 401
//!
//! [sweep]
//! n = 2:40
//! delta = 0, 1e-3
//! beta = 2
//! ```

use std::path::Path;
use std::str::FromStr;

use heat_series::experiments::{StudyConfig, StudyKind};
use heat_series::series::{ConstantsMode, Geometry, Variant};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    Study,
    Grid,
    Sweep,
}

struct Entry {
    line: usize,
    section: Section,
    key: String,
    value: String,
}

fn line_err(line: usize, msg: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("config line {line}: {msg}"))
}

fn parse_value<T: FromStr>(e: &Entry) -> Result<T, CliError>
where
    T::Err: std::fmt::Display,
{
    e.value.parse::<T>().map_err(|err| line_err(e.line, format!("bad value for `{}`: {err}", e.key)))
}

fn parse_list<T: FromStr>(e: &Entry) -> Result<Vec<T>, CliError>
where
    T::Err: std::fmt::Display,
{
    if e.value.trim().is_empty() {
        return Ok(Vec::new());
    }
    e.value
        .split(',')
        .map(|s| s.trim().parse::<T>().map_err(|err| line_err(e.line, format!("bad entry `{}` in `{}`: {err}", s.trim(), e.key))))
        .collect()
}

/// `lo:hi` (inclusive), `lo:hi:step`, or a comma list.
fn parse_orders(e: &Entry) -> Result<Vec<usize>, CliError> {
    if e.value.contains(':') {
        let parts: Vec<&str> = e.value.split(':').map(str::trim).collect();
        let num = |s: &str| s.parse::<usize>().map_err(|err| line_err(e.line, format!("bad order range `{}`: {err}", e.value)));
        let (lo, hi, step) = match parts.as_slice() {
            [lo, hi] => (num(lo)?, num(hi)?, 1),
            [lo, hi, step] => (num(lo)?, num(hi)?, num(step)?),
            _ => return Err(line_err(e.line, format!("bad order range `{}`", e.value))),
        };
        if lo > hi || step == 0 {
            return Err(line_err(e.line, format!("empty order range `{}`", e.value)));
        }
        Ok((lo..=hi).step_by(step).collect())
    } else {
        parse_list(e)
    }
}

fn tokenize(text: &str) -> Result<Vec<Entry>, CliError> {
    let mut section = None;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split_once('#').map_or(raw, |(body, _)| body).trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            section = Some(match name.trim() {
                "study" => Section::Study,
                "grid" => Section::Grid,
                "sweep" => Section::Sweep,
                other => return Err(line_err(line, format!("unknown section `[{other}]`"))),
            });
            continue;
        }
        let Some((key, value)) = s.split_once('=') else {
            return Err(line_err(line, format!("expected `key = value`, got `{s}`")));
        };
        let Some(section) = section else {
            return Err(line_err(line, "entry before any section marker"));
        };
        out.push(Entry { line, section, key: key.trim().to_string(), value: value.trim().to_string() });
    }
    Ok(out)
}

pub fn parse_study_config(text: &str) -> Result<StudyConfig, CliError> {
    let entries = tokenize(text)?;
    let find = |key: &str| entries.iter().find(|e| e.section == Section::Study && e.key == key);
    let kind: StudyKind = match find("kind") {
        Some(e) => parse_value(e)?,
        None => return Err(CliError::Config("config: `[study] kind` is required".into())),
    };
    let geometry: Geometry = match find("geometry") {
        Some(e) => parse_value(e)?,
        None => Geometry::Line,
    };
    let mut cfg = StudyConfig::new(kind, geometry);
    let mut seen: Vec<(Section, &str)> = Vec::new();
    for e in &entries {
        if seen.contains(&(e.section, e.key.as_str())) {
            return Err(line_err(e.line, format!("duplicate key `{}`", e.key)));
        }
        seen.push((e.section, e.key.as_str()));
        match (e.section, e.key.as_str()) {
            (Section::Study, "kind" | "geometry") => {}
            (Section::Study, "profile") => cfg.profile = parse_value(e)?,
            (Section::Study, "variants") => cfg.variants = parse_list::<Variant>(e)?,
            (Section::Study, "tau") => cfg.tau = parse_value(e)?,
            (Section::Study, "seed") => cfg.seed = parse_value(e)?,
            (Section::Study, "constants_mode") => cfg.constants_mode = parse_value::<ConstantsMode>(e)?,
            (Section::Study, "record_runtime") => cfg.record_runtime = parse_value(e)?,
            (Section::Grid, "a") => cfg.grid.a = parse_value(e)?,
            (Section::Grid, "b") => cfg.grid.b = parse_value(e)?,
            (Section::Grid, "n_nodes") => cfg.grid.n_nodes = parse_value(e)?,
            (Section::Sweep, "n") => cfg.n_range = parse_orders(e)?,
            (Section::Sweep, "delta") => cfg.delta_range = parse_list(e)?,
            (Section::Sweep, "beta") => cfg.beta_range = if e.value == "auto" { Vec::new() } else { parse_list(e)? },
            (_, key) => return Err(line_err(e.line, format!("unknown key `{key}` in this section"))),
        }
    }
    cfg.validate().map_err(|err| CliError::Config(format!("config: {err}")))?;
    Ok(cfg)
}

pub fn read_study_config(path: &Path) -> Result<StudyConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_study_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_full_config() {
        let cfg = parse_study_config(
            "# noise demo\n[study]\nkind = noise  # trailing comment\nprofile = gaussian:a=1\nvariants = CI-A, CI-classical\ntau = 0.3\nseed = 7\n\n[grid]\nn_nodes = 201\n[sweep]\nn = 2:10:2\ndelta = 0, 1e-3\nbeta = 2\n",
        )
        .unwrap();
        assert_eq!(cfg.study_kind, StudyKind::Noise);
        assert_eq!(cfg.variants, vec![Variant::CiA, Variant::CiClassical]);
        assert_eq!(cfg.n_range, vec![2, 4, 6, 8, 10]);
        assert_eq!(cfg.delta_range, vec![0.0, 1e-3]);
        assert_eq!(cfg.beta_range, vec![2.0]);
        assert_eq!(cfg.grid.n_nodes, 201);
        assert_eq!(cfg.seed, 7);
    }

    #[test]
    fn errors_name_the_line() {
        let msg = parse_study_config("[study]\nkind = noise\ntau = fast\n").unwrap_err().to_string();
        assert!(msg.contains("line 3"), "{msg}");
        let msg = parse_study_config("[study]\nkind = noise\n[grid]\ncolour = red\n").unwrap_err().to_string();
        assert!(msg.contains("line 4") && msg.contains("colour"), "{msg}");
        let msg = parse_study_config("kind = noise\n").unwrap_err().to_string();
        assert!(msg.contains("line 1"), "{msg}");
        assert!(parse_study_config("[study]\ntau = 1\n").is_err());
    }
}
