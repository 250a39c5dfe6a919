//! Flag syntax: model specs, rows and variable words.

use std::path::PathBuf;

use wick_core::chaos2::rosenblatt::{RosenblattModel, RosenblattSpec};
use wick_core::cumulants::{CumulantModel, GaussianModel, PoissonModel, TableModel};
use wick_core::integrals::FbmModel;
use wick_core::scalar::parse_rational;
use wick_core::{Multiset, Rational, Result, Symbol, WickError};

/// Parsed `--model` value.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelSpec {
    Gaussian(Rational),
    Poisson(Rational),
    Fbm(f64),
    Rosenblatt(f64),
    Table(PathBuf),
}

pub fn parse_model(s: &str) -> std::result::Result<ModelSpec, String> {
    let (kind, arg) = s
        .split_once(':')
        .ok_or_else(|| format!("expected KIND:VALUE, got `{s}`"))?;
    let rational = || parse_rational(arg).ok_or_else(|| format!("`{arg}` is not a number"));
    let real = || arg.parse::<f64>().map_err(|_| format!("`{arg}` is not a number"));
    match kind {
        "gaussian" => Ok(ModelSpec::Gaussian(rational()?)),
        "poisson" => Ok(ModelSpec::Poisson(rational()?)),
        "fbm" => Ok(ModelSpec::Fbm(real()?)),
        "rosenblatt" => Ok(ModelSpec::Rosenblatt(real()?)),
        "table" if !arg.is_empty() => Ok(ModelSpec::Table(PathBuf::from(arg))),
        _ => Err(format!(
            "unknown model `{s}`; use gaussian:σ², poisson:λ, fbm:H, rosenblatt:H or table:<path>"
        )),
    }
}

/// Model over exact rationals or doubles.
pub enum Model {
    Exact(Box<dyn CumulantModel<Rational>>),
    Float(Box<dyn CumulantModel<f64>>),
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        Ok(match self {
            ModelSpec::Gaussian(v) => Model::Exact(Box::new(GaussianModel::scalar(v.clone()))),
            ModelSpec::Poisson(l) => Model::Exact(Box::new(PoissonModel { lambda: l.clone() })),
            ModelSpec::Fbm(h) => Model::Float(Box::new(FbmModel::new(*h)?)),
            ModelSpec::Rosenblatt(h) => Model::Float(Box::new(RosenblattModel::new(RosenblattSpec::new(*h)?))),
            ModelSpec::Table(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| WickError::Invalid(format!("cannot read {}: {e}", path.display())))?;
                let v: serde_json::Value = serde_json::from_str(&text).map_err(|e| WickError::Parse(e.to_string()))?;
                let id = format!("table:{}", path.display());
                Model::Exact(Box::new(TableModel::<Rational>::from_json(id, &v)?))
            }
        })
    }
}

/// Letter of symbol `k` in words: `x, y, z, w`.
const LETTERS: [char; 4] = ['x', 'y', 'z', 'w'];

/// A word such as `xxy`, or a count `3` meaning `xxx`.
pub fn parse_word(s: &str) -> std::result::Result<Multiset, String> {
    let s = s.trim();
    if let Ok(n) = s.parse::<usize>() {
        return Ok(Multiset::repeat(0, n));
    }
    s.chars()
        .map(|c| {
            LETTERS
                .iter()
                .position(|&l| l == c)
                .map(|k| k as Symbol)
                .ok_or_else(|| format!("`{c}` is not one of x, y, z, w"))
        })
        .collect::<std::result::Result<Vec<_>, _>>()
        .map(Multiset::new)
}

/// Comma-separated rows, each a word or a count: `2,2,2` or `xy,xx`.
pub fn parse_rows(s: &str) -> std::result::Result<Vec<Multiset>, String> {
    if s.trim().is_empty() {
        return Err("at least one row is required".into());
    }
    s.split(',').map(parse_word).collect()
}

pub fn names(d: usize) -> Vec<String> {
    if d <= LETTERS.len() {
        LETTERS[..d.max(1)].iter().map(|c| c.to_string()).collect()
    } else {
        (0..d).map(|k| format!("x{k}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn model_specs() {
        assert_eq!(parse_model("poisson:1").unwrap(), ModelSpec::Poisson(Rational::from_integer(1.into())));
        assert_eq!(parse_model("fbm:0.7").unwrap(), ModelSpec::Fbm(0.7));
        assert!(parse_model("gaussian:1/2").is_ok());
        assert!(parse_model("cauchy:1").is_err());
        assert!(parse_model("poisson").is_err());
        assert!(parse_model("fbm:abc").is_err());
    }

    #[test]
    fn rows_and_words() {
        let r = parse_rows("2,2,2").unwrap();
        assert_eq!(r.len(), 3);
        assert!(r.iter().all(|m| m.len() == 2));
        let r = parse_rows("xy,xx").unwrap();
        assert_eq!(r[0], Multiset::new([0, 1]));
        assert_eq!(r[1], Multiset::repeat(0, 2));
        assert!(parse_rows("xq").is_err());
    }
}
