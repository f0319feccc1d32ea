//! TOML model files.
//!
//! ```toml
//! k1 = 0.24
//! k2 = 3.0
//! k3 = 0.4
//! alpha = 0.5
//! lambda = 1.0
//! tau = 1.0
//! horizon = 1.0
//! theta = 0.5          # optional, default 0.5
//! m = 0.25             # optional, default 0.25
//! delta_exponent = 5   # step tau * 2^-5
//!
//! [delay_coeff]
//! kind = "power"       # or "constant"
//! gamma = 1.0
//!
//! [jump_coeff]
//! kind = "linear"      # zero | linear | sine | saturating
//! delta_scale = 2.0
//! lipschitz_L = 1.0    # optional, defaults to the kind's own bound
//! positive = true      # optional, defaults to the kind's own property
//!
//! [initial_segment]
//! kind = "constant"
//! value = 1.0
//! ```

use std::path::{Path, PathBuf};

use jasdm_core::model::{
    DelayCoeff, InitialSegment, JumpCoeff, ModelError, ModelSpec, SchemeConfig,
};
use jasdm_core::DelaySource;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}:{line}:{column}: {message}")]
    Parse {
        origin: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DelayKind {
    Constant,
    Power,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DelayCoeffConfig {
    pub kind: DelayKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpKind {
    Zero,
    Linear,
    Sine,
    Saturating,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpCoeffConfig {
    pub kind: JumpKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_scale: Option<f64>,
    #[serde(
        default,
        rename = "lipschitz_L",
        skip_serializing_if = "Option::is_none"
    )]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive: Option<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SegmentKind {
    Constant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSegmentConfig {
    pub kind: SegmentKind,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DelaySourceName {
    #[default]
    PostJump,
    PreJump,
}

impl From<DelaySourceName> for DelaySource {
    fn from(name: DelaySourceName) -> Self {
        match name {
            DelaySourceName::PostJump => DelaySource::PostJump,
            DelaySourceName::PreJump => DelaySource::PreJump,
        }
    }
}

fn default_theta() -> f64 {
    SchemeConfig::DEFAULT_THETA
}

fn default_m() -> f64 {
    SchemeConfig::DEFAULT_M
}

fn is_default_source(s: &DelaySourceName) -> bool {
    *s == DelaySourceName::PostJump
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub alpha: f64,
    pub lambda: f64,
    pub tau: f64,
    pub horizon: f64,
    #[serde(default = "default_theta")]
    pub theta: f64,
    #[serde(default = "default_m")]
    pub m: f64,
    pub delta_exponent: u32,
    #[serde(default, skip_serializing_if = "is_default_source")]
    pub delay_source: DelaySourceName,
    pub delay_coeff: DelayCoeffConfig,
    pub jump_coeff: JumpCoeffConfig,
    pub initial_segment: InitialSegmentConfig,
}

impl ConfigFile {
    /// The benchmark model with power delay coefficient `x^gamma`.
    pub fn benchmark(alpha: f64, gamma: f64, delta_exponent: u32) -> Self {
        Self {
            k1: 0.24,
            k2: 3.0,
            k3: 0.4,
            alpha,
            lambda: 1.0,
            tau: 1.0,
            horizon: 1.0,
            theta: default_theta(),
            m: default_m(),
            delta_exponent,
            delay_source: DelaySourceName::PostJump,
            delay_coeff: DelayCoeffConfig {
                kind: DelayKind::Power,
                gamma: Some(gamma),
            },
            jump_coeff: JumpCoeffConfig {
                kind: JumpKind::Linear,
                delta_scale: Some(2.0),
                lipschitz: Some(1.0),
                positive: Some(true),
            },
            initial_segment: InitialSegmentConfig {
                kind: SegmentKind::Constant,
                value: 1.0,
            },
        }
    }

    /// Parses TOML text; `origin` names the source in diagnostics.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| {
            let (line, column) = e
                .span()
                .map(|span| line_column(text, span.start))
                .unwrap_or((1, 1));
            ConfigError::Parse {
                origin: origin.to_string(),
                line,
                column,
                message: e.message().to_string(),
            }
        })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn model(&self) -> Result<ModelSpec, ConfigError> {
        let delay = match self.delay_coeff.kind {
            DelayKind::Constant => DelayCoeff::Constant,
            DelayKind::Power => DelayCoeff::Power {
                gamma: self.delay_coeff.gamma.ok_or_else(|| {
                    ConfigError::Invalid("delay_coeff: kind \"power\" needs gamma".into())
                })?,
            },
        };
        let scale = || {
            self.jump_coeff.delta_scale.ok_or_else(|| {
                ConfigError::Invalid("jump_coeff: this kind needs delta_scale".into())
            })
        };
        let jump = match self.jump_coeff.kind {
            JumpKind::Zero => JumpCoeff::Zero,
            JumpKind::Linear => JumpCoeff::Linear { delta: scale()? },
            JumpKind::Sine => JumpCoeff::Sine { delta: scale()? },
            JumpKind::Saturating => JumpCoeff::Saturating { delta: scale()? },
        };
        let mut builder = ModelSpec::builder()
            .k1(self.k1)
            .k2(self.k2)
            .k3(self.k3)
            .alpha(self.alpha)
            .lambda(self.lambda)
            .tau(self.tau)
            .horizon(self.horizon)
            .delay_coeff(delay)
            .jump_coeff(jump)
            .initial_segment(InitialSegment::Constant(self.initial_segment.value));
        if let Some(l) = self.jump_coeff.lipschitz {
            builder = builder.lipschitz(l);
        }
        if let Some(p) = self.jump_coeff.positive {
            builder = builder.jump_positive(p);
        }
        Ok(builder.build()?)
    }

    /// Scheme settings at the file's own step size.
    pub fn scheme(&self) -> Result<SchemeConfig, ConfigError> {
        self.scheme_at(self.delta_exponent)
    }

    /// Scheme settings at step `tau * 2^-exponent`.
    pub fn scheme_at(&self, exponent: u32) -> Result<SchemeConfig, ConfigError> {
        Ok(SchemeConfig::dyadic(self.theta, self.tau, exponent)?
            .with_m(self.m)?
            .with_delay_source(self.delay_source.into()))
    }

    /// Copy with every defaulted declaration spelled out.
    pub fn resolved(&self) -> Result<Self, ConfigError> {
        let model = self.model()?;
        let mut out = self.clone();
        out.jump_coeff.lipschitz = Some(model.lipschitz());
        out.jump_coeff.positive = Some(model.jump_positive());
        Ok(out)
    }
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BENCHMARK: &str = r#"
k1 = 0.24
k2 = 3.0
k3 = 0.4
alpha = 0.5
lambda = 1.0
tau = 1.0
horizon = 1.0
delta_exponent = 5

[delay_coeff]
kind = "power"
gamma = 1.0

[jump_coeff]
kind = "linear"
delta_scale = 2.0
lipschitz_L = 1.0
positive = true

[initial_segment]
kind = "constant"
value = 1.0
"#;

    #[test]
    fn parses_benchmark() {
        let cfg = ConfigFile::parse(BENCHMARK, "bench").unwrap();
        assert_eq!(cfg, ConfigFile::benchmark(0.5, 1.0, 5));
        let model = cfg.model().unwrap();
        assert_eq!(model.lipschitz(), 1.0);
        assert_eq!(cfg.scheme().unwrap().l(), 32);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ConfigFile::benchmark(0.7, 0.5, 7);
        assert_eq!(ConfigFile::parse(&cfg.to_toml(), "x").unwrap(), cfg);
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = BENCHMARK.replace("lambda = 1.0", "lambda = 1.0\nlamda = 2.0");
        match ConfigFile::parse(&text, "bad.toml") {
            Err(ConfigError::Parse { line, message, .. }) => {
                assert_eq!(line, 7);
                assert!(message.contains("lamda"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_type_reports_line() {
        let text = BENCHMARK.replace("k3 = 0.4", "k3 = \"high\"");
        match ConfigFile::parse(&text, "bad.toml") {
            Err(ConfigError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_gamma() {
        let text = BENCHMARK.replace("gamma = 1.0", "");
        let cfg = ConfigFile::parse(&text, "x").unwrap();
        assert!(matches!(cfg.model(), Err(ConfigError::Invalid(_))));
    }

    #[test]
    fn zero_jump_needs_no_scale() {
        let mut cfg = ConfigFile::benchmark(0.5, 1.0, 5);
        cfg.lambda = 0.0;
        cfg.jump_coeff = JumpCoeffConfig {
            kind: JumpKind::Zero,
            delta_scale: None,
            lipschitz: None,
            positive: None,
        };
        let resolved = cfg.resolved().unwrap();
        assert!(resolved.jump_coeff.lipschitz.is_some());
        assert!(resolved.model().unwrap().jump_coeff().is_zero());
    }

    #[test]
    fn invalid_model_values() {
        let mut cfg = ConfigFile::benchmark(0.5, 1.0, 5);
        cfg.alpha = 1.2;
        assert!(matches!(cfg.model(), Err(ConfigError::Model(_))));
    }
}
