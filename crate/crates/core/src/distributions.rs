//! Block-production (α) and broadcast-delay (β) distributions.
//!
//! Every spec is parameterized by its mean so that the ratio β̅/ᾱ is the
//! controlled variable of an experiment. Gamma uses `scale = mean / shape`;
//! chi-squared carries its degrees of freedom in `shape` and has `mean == shape`.
//!
//! Draw-count contract per [`Sampler::sample`] call:
//!
//! * `constant` and zero-mean specs consume exactly one word (discarded),
//! * `exponential` consumes exactly one word (inverse CDF),
//! * `gamma` and `chi_squared` use Marsaglia-Tsang rejection and consume a
//!   variable number of words.
//!
//! Engines that must stay aligned draw the same sequence of calls from the
//! same substream, so the variable count for gamma does not break alignment.

use std::fmt;
use std::str::FromStr;

use rand_distr::Distribution as _;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Exp, Gamma};

use crate::error::{Error, Result};
use crate::stream::SampleStream;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistKind {
    Exponential,
    Gamma,
    ChiSquared,
    Constant,
}

impl DistKind {
    pub fn name(self) -> &'static str {
        match self {
            DistKind::Exponential => "exponential",
            DistKind::Gamma => "gamma",
            DistKind::ChiSquared => "chi_squared",
            DistKind::Constant => "constant",
        }
    }

    fn flag_name(self) -> &'static str {
        match self {
            DistKind::Exponential => "exp",
            DistKind::Gamma => "gamma",
            DistKind::ChiSquared => "chi2",
            DistKind::Constant => "const",
        }
    }
}

/// What a distribution is used for. α must be strictly positive, β only
/// non-negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Alpha,
    Beta,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct DistributionSpec {
    kind: DistKind,
    mean: f64,
    shape: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    kind: DistKind,
    #[serde(default)]
    mean: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shape: Option<f64>,
}

impl TryFrom<RawSpec> for DistributionSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        match raw.kind {
            DistKind::ChiSquared => match (raw.mean, raw.shape) {
                (Some(mean), Some(dof)) if mean != dof => Err(Error::InvalidDistribution(format!(
                    "chi_squared mean ({mean}) must equal its degrees of freedom ({dof})"
                ))),
                (_, Some(dof)) | (Some(dof), None) => DistributionSpec::chi_squared(dof),
                (None, None) => Err(Error::InvalidDistribution(
                    "chi_squared needs `shape` (degrees of freedom)".into(),
                )),
            },
            kind => {
                let mean = raw
                    .mean
                    .ok_or_else(|| Error::InvalidDistribution(format!("{} needs `mean`", kind.name())))?;
                match kind {
                    DistKind::Exponential => DistributionSpec::exponential(mean),
                    DistKind::Constant => DistributionSpec::constant(mean),
                    DistKind::Gamma => {
                        let shape = raw
                            .shape
                            .ok_or_else(|| Error::InvalidDistribution("gamma needs `shape`".into()))?;
                        DistributionSpec::gamma(shape, mean)
                    }
                    DistKind::ChiSquared => unreachable!(),
                }
            }
        }
    }
}

impl From<DistributionSpec> for RawSpec {
    fn from(spec: DistributionSpec) -> Self {
        RawSpec {
            kind: spec.kind,
            mean: Some(spec.mean),
            shape: spec.shape,
        }
    }
}

fn check_mean(mean: f64) -> Result<()> {
    if mean.is_finite() && mean >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDistribution(format!("mean must be finite and >= 0, got {mean}")))
    }
}

fn check_shape(shape: f64) -> Result<()> {
    if shape.is_finite() && shape > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidDistribution(format!("shape must be finite and > 0, got {shape}")))
    }
}

impl DistributionSpec {
    pub fn exponential(mean: f64) -> Result<Self> {
        check_mean(mean)?;
        Ok(Self { kind: DistKind::Exponential, mean, shape: None })
    }

    pub fn gamma(shape: f64, mean: f64) -> Result<Self> {
        check_mean(mean)?;
        check_shape(shape)?;
        Ok(Self { kind: DistKind::Gamma, mean, shape: Some(shape) })
    }

    /// Chi-squared with `dof` degrees of freedom; its mean is `dof`.
    pub fn chi_squared(dof: f64) -> Result<Self> {
        check_shape(dof)?;
        Ok(Self { kind: DistKind::ChiSquared, mean: dof, shape: Some(dof) })
    }

    pub fn constant(value: f64) -> Result<Self> {
        check_mean(value)?;
        Ok(Self { kind: DistKind::Constant, mean: value, shape: None })
    }

    pub fn kind(&self) -> DistKind {
        self.kind
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn shape(&self) -> Option<f64> {
        self.shape
    }

    pub fn variance(&self) -> f64 {
        match self.kind {
            DistKind::Constant => 0.0,
            DistKind::Exponential => self.mean * self.mean,
            DistKind::Gamma => self.mean * self.mean / self.shape.unwrap_or(1.0),
            DistKind::ChiSquared => 2.0 * self.mean,
        }
    }

    /// Same family and shape, rescaled to a new mean.
    ///
    /// Chi-squared has no free scale, so rescaling it yields a gamma with the
    /// same shape (`dof / 2`).
    pub fn with_mean(&self, mean: f64) -> Result<Self> {
        match self.kind {
            DistKind::Exponential => Self::exponential(mean),
            DistKind::Constant => Self::constant(mean),
            DistKind::Gamma => Self::gamma(self.shape.unwrap_or(1.0), mean),
            DistKind::ChiSquared => Self::gamma(self.mean / 2.0, mean),
        }
    }

    pub fn validate(&self, role: Role) -> Result<()> {
        check_mean(self.mean)?;
        if let Some(shape) = self.shape {
            check_shape(shape)?;
        }
        if role == Role::Alpha && self.mean <= 0.0 {
            return Err(Error::InvalidDistribution(format!(
                "block production time must have a positive mean, got {}",
                self.mean
            )));
        }
        Ok(())
    }

    pub fn sampler(&self) -> Result<Sampler> {
        check_mean(self.mean)?;
        if self.mean == 0.0 {
            return Ok(Sampler::Constant(0.0));
        }
        Ok(match self.kind {
            DistKind::Constant => Sampler::Constant(self.mean),
            DistKind::Exponential => Sampler::Exponential(self.mean),
            DistKind::Gamma => {
                let shape = self.shape.unwrap_or(1.0);
                Sampler::Gamma(gamma_sampler(shape, self.mean / shape)?)
            }
            DistKind::ChiSquared => Sampler::Gamma(gamma_sampler(self.mean / 2.0, 2.0)?),
        })
    }

    /// One draw. Builds a sampler per call; prefer [`DistributionSpec::sampler`]
    /// in loops.
    pub fn sample(&self, stream: &mut SampleStream) -> Result<f64> {
        Ok(self.sampler()?.sample(stream))
    }

    /// Closed-form CDF.
    pub fn cdf(&self, r: f64) -> f64 {
        if r < 0.0 {
            return 0.0;
        }
        if self.mean == 0.0 || self.kind == DistKind::Constant {
            return if r >= self.mean { 1.0 } else { 0.0 };
        }
        match self.kind {
            DistKind::Exponential => Exp::new(1.0 / self.mean).map(|d| d.cdf(r)).unwrap_or(f64::NAN),
            DistKind::Gamma => {
                let shape = self.shape.unwrap_or(1.0);
                Gamma::new(shape, shape / self.mean).map(|d| d.cdf(r)).unwrap_or(f64::NAN)
            }
            DistKind::ChiSquared => ChiSquared::new(self.mean).map(|d| d.cdf(r)).unwrap_or(f64::NAN),
            DistKind::Constant => unreachable!(),
        }
    }
}

fn gamma_sampler(shape: f64, scale: f64) -> Result<rand_distr::Gamma<f64>> {
    rand_distr::Gamma::new(shape, scale)
        .map_err(|e| Error::InvalidDistribution(format!("gamma(shape={shape}, scale={scale}): {e}")))
}

impl fmt::Display for DistributionSpec {
    /// Flag syntax, `kind:mean[:shape]`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            DistKind::ChiSquared => write!(f, "chi2:{}", self.mean),
            DistKind::Gamma => write!(f, "gamma:{}:{}", self.mean, self.shape.unwrap_or(1.0)),
            kind => write!(f, "{}:{}", kind.flag_name(), self.mean),
        }
    }
}

impl FromStr for DistributionSpec {
    type Err = Error;

    /// Parses `exp:1`, `const:1.5`, `gamma:0.5:2` (mean 0.5, shape 2) or
    /// `chi2:3` (3 degrees of freedom).
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let num = |i: usize| -> Result<f64> {
            parts
                .get(i)
                .ok_or_else(|| Error::Parse(format!("`{s}`: missing field {i}")))?
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("`{s}`: {e}")))
        };
        let arity = |n: usize| -> Result<()> {
            if parts.len() == n {
                Ok(())
            } else {
                Err(Error::Parse(format!("`{s}`: expected {n} fields separated by ':'")))
            }
        };
        match parts[0].to_ascii_lowercase().as_str() {
            "exp" | "exponential" => {
                arity(2)?;
                Self::exponential(num(1)?)
            }
            "const" | "constant" => {
                arity(2)?;
                Self::constant(num(1)?)
            }
            "gamma" => {
                arity(3)?;
                Self::gamma(num(2)?, num(1)?)
            }
            "chi2" | "chisq" | "chi_squared" => {
                arity(2)?;
                Self::chi_squared(num(1)?)
            }
            other => Err(Error::Parse(format!("unknown distribution kind `{other}`"))),
        }
    }
}

/// A prepared sampler for one [`DistributionSpec`].
#[derive(Clone, Debug)]
pub enum Sampler {
    Constant(f64),
    Exponential(f64),
    Gamma(rand_distr::Gamma<f64>),
}

impl Sampler {
    #[inline]
    pub fn sample(&self, stream: &mut SampleStream) -> f64 {
        match self {
            Sampler::Constant(c) => {
                let _ = stream.next_open01();
                *c
            }
            Sampler::Exponential(mean) => -mean * stream.next_open01().ln(),
            Sampler::Gamma(g) => g.sample(stream),
        }
    }
}

/// CDF of a uniformly chosen entry of an m-column delay matrix: one zero per
/// row, the other `m - 1` entries drawn from `spec`.
pub fn mixture_cdf(spec: &DistributionSpec, m: usize, r: f64) -> f64 {
    assert!(m >= 1, "mixture_cdf needs m >= 1");
    if r < 0.0 {
        return 0.0;
    }
    let m = m as f64;
    1.0 / m + (m - 1.0) / m * spec.cdf(r)
}

/// Upper bound on `sup_r |mixture_cdf(spec, m, r) - spec.cdf(r)|`.
pub fn sup_gap_bound(m: usize) -> f64 {
    assert!(m >= 1, "sup_gap_bound needs m >= 1");
    2.0 / m as f64
}
