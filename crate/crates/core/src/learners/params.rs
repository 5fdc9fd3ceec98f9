//! Mixed integer / real / categorical hyperparameter spaces.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::LearnerError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ParamKind {
    Integer,
    Real,
    Categorical,
}

/// A numeric bound that may depend on the data a pipeline is fitted to.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Bound {
    Fixed(f64),
    /// `max(N_s, N_t)` (source rows, target train rows), capped at the
    /// feature count because a projection cannot have more dimensions than
    /// its input.
    MaxRowsCappedByFeatures,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Domain {
    Integer { lo: Bound, hi: Bound },
    Real { lo: f64, hi: f64 },
    Categorical(Vec<String>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub domain: Domain,
}

impl ParamSpec {
    pub fn integer(name: &str, lo: i64, hi: i64) -> Self {
        Self::integer_bounds(name, Bound::Fixed(lo as f64), Bound::Fixed(hi as f64))
    }

    pub fn integer_bounds(name: &str, lo: Bound, hi: Bound) -> Self {
        Self { name: name.into(), domain: Domain::Integer { lo, hi } }
    }

    pub fn real(name: &str, lo: f64, hi: f64) -> Self {
        assert!(lo <= hi, "real bounds for {name} are inverted");
        Self { name: name.into(), domain: Domain::Real { lo, hi } }
    }

    pub fn categorical(name: &str, choices: &[&str]) -> Self {
        assert!(!choices.is_empty(), "categorical {name} has no choices");
        Self { name: name.into(), domain: Domain::Categorical(choices.iter().map(|c| c.to_string()).collect()) }
    }

    pub fn kind(&self) -> ParamKind {
        match self.domain {
            Domain::Integer { .. } => ParamKind::Integer,
            Domain::Real { .. } => ParamKind::Real,
            Domain::Categorical(_) => ParamKind::Categorical,
        }
    }
}

/// Sizes needed to resolve data-dependent bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DataShape {
    pub source_rows: usize,
    pub target_rows: usize,
    pub feature_count: usize,
}

impl Bound {
    fn resolve(self, shape: &DataShape) -> f64 {
        match self {
            Bound::Fixed(v) => v,
            Bound::MaxRowsCappedByFeatures => shape.source_rows.max(shape.target_rows).min(shape.feature_count) as f64,
        }
    }
}

/// Ordered list of parameter specs with unique names.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSpace {
    pub specs: Vec<ParamSpec>,
}

impl ParamSpace {
    pub fn new(specs: Vec<ParamSpec>) -> Self {
        let space = Self { specs };
        let mut names: Vec<&str> = space.specs.iter().map(|s| s.name.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        assert_eq!(names.len(), space.specs.len(), "duplicate parameter names");
        space
    }

    pub fn get(&self, name: &str) -> Option<&ParamSpec> {
        self.specs.iter().find(|s| s.name == name)
    }

    /// Copies every spec with `prefix.` prepended to its name.
    pub fn prefixed(&self, prefix: &str) -> ParamSpace {
        ParamSpace {
            specs: self
                .specs
                .iter()
                .map(|s| ParamSpec { name: format!("{prefix}.{}", s.name), domain: s.domain.clone() })
                .collect(),
        }
    }

    pub fn concat(parts: impl IntoIterator<Item = ParamSpace>) -> ParamSpace {
        ParamSpace::new(parts.into_iter().flat_map(|p| p.specs).collect())
    }

    /// Turns every data-dependent bound into a number.
    ///
    /// A lower bound above its upper bound collapses onto the upper bound.
    pub fn resolve(&self, shape: &DataShape) -> SearchSpace {
        let params = self
            .specs
            .iter()
            .map(|s| {
                let domain = match &s.domain {
                    Domain::Integer { lo, hi } => {
                        let hi = hi.resolve(shape).floor() as i64;
                        let lo = (lo.resolve(shape).ceil() as i64).min(hi);
                        ResolvedDomain::Integer { lo, hi }
                    }
                    Domain::Real { lo, hi } => ResolvedDomain::Real { lo: *lo, hi: *hi },
                    Domain::Categorical(c) => ResolvedDomain::Categorical(c.clone()),
                };
                ResolvedParam { name: s.name.clone(), domain }
            })
            .collect();
        SearchSpace { params }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ResolvedDomain {
    Integer { lo: i64, hi: i64 },
    Real { lo: f64, hi: f64 },
    Categorical(Vec<String>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParam {
    pub name: String,
    pub domain: ResolvedDomain,
}

impl ResolvedParam {
    pub fn integer(name: &str, lo: i64, hi: i64) -> Self {
        Self { name: name.into(), domain: ResolvedDomain::Integer { lo, hi } }
    }

    pub fn real(name: &str, lo: f64, hi: f64) -> Self {
        Self { name: name.into(), domain: ResolvedDomain::Real { lo, hi } }
    }

    pub fn categorical(name: &str, choices: &[&str]) -> Self {
        Self { name: name.into(), domain: ResolvedDomain::Categorical(choices.iter().map(|c| c.to_string()).collect()) }
    }

    pub fn contains(&self, value: &ParamValue) -> bool {
        match (&self.domain, value) {
            (ResolvedDomain::Integer { lo, hi }, ParamValue::Int(v)) => lo <= v && v <= hi,
            (ResolvedDomain::Real { lo, hi }, ParamValue::Real(v)) => v.is_finite() && lo <= v && v <= hi,
            (ResolvedDomain::Categorical(c), ParamValue::Choice(v)) => c.contains(v),
            _ => false,
        }
    }
}

/// A parameter space whose bounds are all concrete.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub params: Vec<ResolvedParam>,
}

impl SearchSpace {
    pub fn new(params: Vec<ResolvedParam>) -> Self {
        Self { params }
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// True when `config` has exactly one in-bounds value per parameter.
    pub fn contains(&self, config: &Configuration) -> bool {
        config.values.len() == self.params.len()
            && self.params.iter().all(|p| config.values.get(&p.name).is_some_and(|v| p.contains(v)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Choice(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Choice(v) => f.write_str(v),
        }
    }
}

/// An assignment of one value per parameter name.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Configuration {
    pub values: BTreeMap<String, ParamValue>,
}

impl Configuration {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: &str, value: ParamValue) -> Self {
        self.values.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: ParamValue) {
        self.values.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.values.get(name)
    }

    pub fn int(&self, name: &str) -> Result<i64, LearnerError> {
        match self.values.get(name) {
            Some(ParamValue::Int(v)) => Ok(*v),
            _ => Err(LearnerError::MissingParam(name.to_string())),
        }
    }

    pub fn real(&self, name: &str) -> Result<f64, LearnerError> {
        match self.values.get(name) {
            Some(ParamValue::Real(v)) => Ok(*v),
            Some(ParamValue::Int(v)) => Ok(*v as f64),
            _ => Err(LearnerError::MissingParam(name.to_string())),
        }
    }

    pub fn choice(&self, name: &str) -> Result<&str, LearnerError> {
        match self.values.get(name) {
            Some(ParamValue::Choice(v)) => Ok(v),
            _ => Err(LearnerError::MissingParam(name.to_string())),
        }
    }

    pub fn flag(&self, name: &str) -> Result<bool, LearnerError> {
        match self.choice(name)? {
            "true" => Ok(true),
            "false" => Ok(false),
            other => Err(LearnerError::InvalidParam(name.to_string(), other.to_string())),
        }
    }

    /// The subset of values whose names start with `prefix.`.
    pub fn scoped(&self, prefix: &str) -> Configuration {
        let p = format!("{prefix}.");
        Configuration {
            values: self
                .values
                .iter()
                .filter(|(k, _)| k.starts_with(&p))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
        }
    }

    pub fn merge(mut self, other: &Configuration) -> Configuration {
        self.values.extend(other.values.iter().map(|(k, v)| (k.clone(), v.clone())));
        self
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.values.iter().map(|(k, v)| format!("{k}={v}")).collect();
        write!(f, "{{{}}}", parts.join(", "))
    }
}
