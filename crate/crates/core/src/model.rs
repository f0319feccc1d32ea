//! Model family and step-size validation.
//!
//! A [`ModelSpec`] fixes the drift/diffusion constants, the delay coefficient
//! `b`, the jump coefficient `g` and the initial segment `xi` on `[-tau, 0]`.
//! A [`SchemeConfig`] fixes the discretisation: implicitness `theta`, the
//! mollification exponent `m` and the base step `delta = tau / l`.

use alloc::sync::Arc;
use core::fmt;

use thiserror::Error;

/// Scalar function used for user-supplied coefficients and initial segments.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Relative tolerance used when checking `horizon / tau` and `tau / delta`
/// for integrality.
pub const INTEGRALITY_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("parameter `{name}` = {value} is out of range: {reason}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("horizon {horizon} is not an integer multiple of tau {tau}")]
    HorizonNotMultiple { horizon: f64, tau: f64 },
    #[error("step {delta} is not of the form tau / l with integer l >= 2 (tau = {tau})")]
    StepNotDivisor { delta: f64, tau: f64 },
    #[error(
        "jump coefficient needs lipschitz_L <= 1 or a positive jump coefficient (L = {lipschitz})"
    )]
    JumpCondition { lipschitz: f64 },
    #[error("initial segment is not strictly positive at t = {t} (value {value})")]
    NonPositiveSegment { t: f64, value: f64 },
    #[error("delay coefficient evaluated at negative argument {0}")]
    NegativeArgument(f64),
    #[error("missing required parameter `{0}`")]
    Missing(&'static str),
}

/// Delay coefficient `b` acting on the lagged state.
#[derive(Clone)]
pub enum DelayCoeff {
    /// `b(x) = 1`.
    Constant,
    /// `b(x) = x^gamma`.
    Power { gamma: f64 },
    /// User function with its declared Hölder exponent.
    Custom { f: ScalarFn, gamma: f64 },
}

impl DelayCoeff {
    /// Hölder exponent of the coefficient. A constant is Hölder of every
    /// order; 1 is reported since larger values never change a rate bound.
    pub fn holder_exponent(&self) -> f64 {
        match self {
            DelayCoeff::Constant => 1.0,
            DelayCoeff::Power { gamma } | DelayCoeff::Custom { gamma, .. } => *gamma,
        }
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        match self {
            DelayCoeff::Constant => 1.0,
            DelayCoeff::Power { gamma } => {
                if *gamma == 1.0 {
                    x
                } else {
                    libm::pow(x, *gamma)
                }
            }
            DelayCoeff::Custom { f, .. } => f(x),
        }
    }
}

impl fmt::Debug for DelayCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayCoeff::Constant => f.write_str("Constant"),
            DelayCoeff::Power { gamma } => f.debug_struct("Power").field("gamma", gamma).finish(),
            DelayCoeff::Custom { gamma, .. } => f
                .debug_struct("Custom")
                .field("gamma", gamma)
                .finish_non_exhaustive(),
        }
    }
}

/// Jump coefficient `g` multiplying the compensated Poisson increment.
#[derive(Clone)]
pub enum JumpCoeff {
    Zero,
    /// `g(x) = delta * x`.
    Linear {
        delta: f64,
    },
    /// `g(x) = delta * sin(x)`.
    Sine {
        delta: f64,
    },
    /// `g(x) = delta * x / (1 + x)`.
    Saturating {
        delta: f64,
    },
    /// User function with its declared Lipschitz bound.
    Custom {
        f: ScalarFn,
        lipschitz: f64,
    },
}

impl JumpCoeff {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            JumpCoeff::Zero => 0.0,
            JumpCoeff::Linear { delta } => delta * x,
            JumpCoeff::Sine { delta } => delta * libm::sin(x),
            JumpCoeff::Saturating { delta } => delta * x / (1.0 + x),
            JumpCoeff::Custom { f, .. } => f(x),
        }
    }

    /// Bound on `|g'|` over `x > 0` for the built-in kinds.
    pub fn natural_lipschitz(&self) -> f64 {
        match self {
            JumpCoeff::Zero => 1.0,
            JumpCoeff::Linear { delta }
            | JumpCoeff::Sine { delta }
            | JumpCoeff::Saturating { delta } => delta.abs(),
            JumpCoeff::Custom { lipschitz, .. } => *lipschitz,
        }
    }

    /// Whether `g > 0` on `x > 0` is known for the built-in kinds.
    pub fn natural_positivity(&self) -> bool {
        match self {
            JumpCoeff::Linear { delta } | JumpCoeff::Saturating { delta } => *delta > 0.0,
            JumpCoeff::Zero | JumpCoeff::Sine { .. } | JumpCoeff::Custom { .. } => false,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, JumpCoeff::Zero)
    }
}

impl fmt::Debug for JumpCoeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpCoeff::Zero => f.write_str("Zero"),
            JumpCoeff::Linear { delta } => f.debug_struct("Linear").field("delta", delta).finish(),
            JumpCoeff::Sine { delta } => f.debug_struct("Sine").field("delta", delta).finish(),
            JumpCoeff::Saturating { delta } => {
                f.debug_struct("Saturating").field("delta", delta).finish()
            }
            JumpCoeff::Custom { lipschitz, .. } => f
                .debug_struct("Custom")
                .field("lipschitz", lipschitz)
                .finish_non_exhaustive(),
        }
    }
}

/// Initial segment `xi` on `[-tau, 0]`, evaluated on demand.
#[derive(Clone)]
pub enum InitialSegment {
    Constant(f64),
    Function(ScalarFn),
}

impl InitialSegment {
    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            InitialSegment::Constant(v) => *v,
            InitialSegment::Function(f) => f(t),
        }
    }
}

impl fmt::Debug for InitialSegment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InitialSegment::Constant(v) => f.debug_tuple("Constant").field(v).finish(),
            InitialSegment::Function(_) => f.write_str("Function(..)"),
        }
    }
}

/// Fully validated model parameterisation.
#[derive(Debug, Clone)]
pub struct ModelSpec {
    k1: f64,
    k2: f64,
    k3: f64,
    alpha: f64,
    lambda: f64,
    tau: f64,
    horizon: f64,
    periods: u64,
    delay_coeff: DelayCoeff,
    jump_coeff: JumpCoeff,
    lipschitz: f64,
    jump_positive: bool,
    initial_segment: InitialSegment,
}

/// Builder for [`ModelSpec`]. Every scalar is required except the jump
/// declarations, which default to the natural values of the chosen kind.
#[derive(Debug, Clone, Default)]
pub struct ModelSpecBuilder {
    k1: Option<f64>,
    k2: Option<f64>,
    k3: Option<f64>,
    alpha: Option<f64>,
    lambda: Option<f64>,
    tau: Option<f64>,
    horizon: Option<f64>,
    delay_coeff: Option<DelayCoeff>,
    jump_coeff: Option<JumpCoeff>,
    lipschitz: Option<f64>,
    jump_positive: Option<bool>,
    initial_segment: Option<InitialSegment>,
}

macro_rules! setter {
    ($name:ident, $ty:ty) => {
        pub fn $name(mut self, value: $ty) -> Self {
            self.$name = Some(value);
            self
        }
    };
}

impl ModelSpecBuilder {
    setter!(k1, f64);
    setter!(k2, f64);
    setter!(k3, f64);
    setter!(alpha, f64);
    setter!(lambda, f64);
    setter!(tau, f64);
    setter!(horizon, f64);
    setter!(delay_coeff, DelayCoeff);
    setter!(jump_coeff, JumpCoeff);
    setter!(jump_positive, bool);
    setter!(initial_segment, InitialSegment);

    /// Declared bound on `|g'|`.
    pub fn lipschitz(mut self, value: f64) -> Self {
        self.lipschitz = Some(value);
        self
    }

    pub fn build(self) -> Result<ModelSpec, ModelError> {
        let k1 = self.k1.ok_or(ModelError::Missing("k1"))?;
        let k2 = self.k2.ok_or(ModelError::Missing("k2"))?;
        let k3 = self.k3.ok_or(ModelError::Missing("k3"))?;
        let alpha = self.alpha.ok_or(ModelError::Missing("alpha"))?;
        let lambda = self.lambda.ok_or(ModelError::Missing("lambda"))?;
        let tau = self.tau.ok_or(ModelError::Missing("tau"))?;
        let horizon = self.horizon.ok_or(ModelError::Missing("horizon"))?;
        let delay_coeff = self.delay_coeff.unwrap_or(DelayCoeff::Constant);
        let jump_coeff = self.jump_coeff.unwrap_or(JumpCoeff::Zero);
        let initial_segment = self
            .initial_segment
            .ok_or(ModelError::Missing("initial_segment"))?;

        positive("k1", k1)?;
        positive("k2", k2)?;
        // k3 = 0 and lambda = 0 are admitted: they give the deterministic
        // and jump-free reductions of the model.
        non_negative("k3", k3)?;
        non_negative("lambda", lambda)?;
        positive("tau", tau)?;
        positive("horizon", horizon)?;
        if !(0.5..1.0).contains(&alpha) {
            return Err(ModelError::OutOfRange {
                name: "alpha",
                value: alpha,
                reason: "must lie in [1/2, 1)",
            });
        }
        let gamma = delay_coeff.holder_exponent();
        positive("gamma", gamma)?;

        let periods = integer_ratio(horizon, tau)
            .filter(|&n| n >= 1)
            .ok_or(ModelError::HorizonNotMultiple { horizon, tau })?;

        let lipschitz = self
            .lipschitz
            .unwrap_or_else(|| jump_coeff.natural_lipschitz());
        positive("lipschitz_L", lipschitz)?;
        let jump_positive = self
            .jump_positive
            .unwrap_or_else(|| jump_coeff.natural_positivity());
        if lipschitz > 1.0 && !jump_positive {
            return Err(ModelError::JumpCondition { lipschitz });
        }

        // The segment is checked on a fixed probe set; the scheme only ever
        // queries it at grid nodes and lagged jump times.
        for i in 0..=64 {
            let t = -tau * (i as f64) / 64.0;
            let value = initial_segment.eval(t);
            if !value.is_finite() || value <= 0.0 {
                return Err(ModelError::NonPositiveSegment { t, value });
            }
        }

        Ok(ModelSpec {
            k1,
            k2,
            k3,
            alpha,
            lambda,
            tau,
            horizon,
            periods,
            delay_coeff,
            jump_coeff,
            lipschitz,
            jump_positive,
            initial_segment,
        })
    }
}

fn positive(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            name,
            value,
            reason: "must be positive and finite",
        })
    }
}

fn non_negative(name: &'static str, value: f64) -> Result<(), ModelError> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(ModelError::OutOfRange {
            name,
            value,
            reason: "must be non-negative and finite",
        })
    }
}

/// Returns `n` when `numerator / denominator` is within
/// [`INTEGRALITY_TOLERANCE`] (relative) of the integer `n`.
pub(crate) fn integer_ratio(numerator: f64, denominator: f64) -> Option<u64> {
    let ratio = numerator / denominator;
    if !ratio.is_finite() || ratio < 0.5 {
        return None;
    }
    let rounded = libm::round(ratio);
    if libm::fabs(ratio - rounded) <= INTEGRALITY_TOLERANCE * ratio {
        Some(rounded as u64)
    } else {
        None
    }
}

impl ModelSpec {
    pub fn builder() -> ModelSpecBuilder {
        ModelSpecBuilder::default()
    }

    /// Benchmark delay CIR/CEV jump model: `k1 = 0.24`, `k2 = 3`, `k3 = 0.4`, `b(x) = x^gamma`,
    /// `g(x) = 2x` with declared `L = 1`, `lambda = 1`, `tau = T = 1` and
    /// `xi = 1`.
    pub fn benchmark(alpha: f64, gamma: f64) -> Result<Self, ModelError> {
        Self::builder()
            .k1(0.24)
            .k2(3.0)
            .k3(0.4)
            .alpha(alpha)
            .lambda(1.0)
            .tau(1.0)
            .horizon(1.0)
            .delay_coeff(DelayCoeff::Power { gamma })
            .jump_coeff(JumpCoeff::Linear { delta: 2.0 })
            .lipschitz(1.0)
            .jump_positive(true)
            .initial_segment(InitialSegment::Constant(1.0))
            .build()
    }

    pub fn to_builder(&self) -> ModelSpecBuilder {
        ModelSpecBuilder {
            k1: Some(self.k1),
            k2: Some(self.k2),
            k3: Some(self.k3),
            alpha: Some(self.alpha),
            lambda: Some(self.lambda),
            tau: Some(self.tau),
            horizon: Some(self.horizon),
            delay_coeff: Some(self.delay_coeff.clone()),
            jump_coeff: Some(self.jump_coeff.clone()),
            lipschitz: Some(self.lipschitz),
            jump_positive: Some(self.jump_positive),
            initial_segment: Some(self.initial_segment.clone()),
        }
    }

    /// Same model on a different horizon.
    pub fn with_horizon(&self, horizon: f64) -> Result<Self, ModelError> {
        self.to_builder().horizon(horizon).build()
    }

    pub fn k1(&self) -> f64 {
        self.k1
    }
    pub fn k2(&self) -> f64 {
        self.k2
    }
    pub fn k3(&self) -> f64 {
        self.k3
    }
    pub fn alpha(&self) -> f64 {
        self.alpha
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn horizon(&self) -> f64 {
        self.horizon
    }
    /// `horizon / tau`.
    pub fn periods(&self) -> u64 {
        self.periods
    }
    pub fn delay_coeff(&self) -> &DelayCoeff {
        &self.delay_coeff
    }
    pub fn jump_coeff(&self) -> &JumpCoeff {
        &self.jump_coeff
    }
    pub fn holder_gamma(&self) -> f64 {
        self.delay_coeff.holder_exponent()
    }
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }
    pub fn jump_positive(&self) -> bool {
        self.jump_positive
    }
    pub fn initial_segment(&self) -> &InitialSegment {
        &self.initial_segment
    }

    /// `k1 / k2`, the long-run mean of the exact solution.
    pub fn long_run_mean(&self) -> f64 {
        self.k1 / self.k2
    }

    /// Mean of the exact solution at time `t >= 0` for a deterministic
    /// initial value `xi(0)`: `k1/k2 + (xi(0) - k1/k2) e^{-k2 t}`.
    pub fn exact_mean(&self, t: f64) -> f64 {
        let level = self.long_run_mean();
        level + (self.initial_segment.eval(0.0) - level) * libm::exp(-self.k2 * t)
    }

    /// Lower bound on the strong (root-mean-square) convergence order:
    /// `((alpha - 1/2) ∧ gamma) / 2` for `alpha > 1/2` and
    /// `((1/2) ∧ gamma) / 2` for `alpha = 1/2`.
    pub fn rate_lower_bound(&self) -> f64 {
        let gamma = self.holder_gamma();
        let exponent = if self.alpha > 0.5 {
            (self.alpha - 0.5).min(gamma)
        } else {
            0.5f64.min(gamma)
        };
        exponent / 2.0
    }

    /// `b(x)` for `x >= 0`.
    pub fn eval_delay_coeff(&self, x: f64) -> Result<f64, ModelError> {
        if x < 0.0 || x.is_nan() {
            return Err(ModelError::NegativeArgument(x));
        }
        Ok(self.delay_coeff.eval_unchecked(x))
    }

    /// `g(x)`.
    pub fn eval_jump_coeff(&self, x: f64) -> f64 {
        self.jump_coeff.eval(x)
    }

    /// Step-size bound under which the diffusion stage stays non-negative
    /// without clamping. Never fails: an unattainable bound shows up as a
    /// non-positive component and `satisfied == false`.
    pub fn validate_assumption_b(&self, config: &SchemeConfig) -> AssumptionBReport {
        let theta = config.theta();
        let spread = self.k2 * (1.0 - theta) + self.k3 * self.k3 / 4.0;
        let first = 1.0 / (spread * spread);
        let second = first * first;
        let third = if theta >= 1.0 {
            f64::INFINITY
        } else {
            (4.0 - self.k3 * self.k3) / (4.0 * self.k2 * (1.0 - theta))
        };
        let bound = first.min(second).min(third);
        AssumptionBReport {
            components: [first, second, third],
            bound,
            satisfied: config.delta() < bound,
        }
    }

    /// Step-size bound `lambda^{-1} (L^{-1} ∧ 1)` keeping the jump update
    /// positive. Infinite when `lambda = 0`.
    pub fn validate_jump_step(&self, config: &SchemeConfig) -> JumpStepReport {
        let bound = if self.lambda == 0.0 {
            f64::INFINITY
        } else {
            (1.0 / self.lipschitz).min(1.0) / self.lambda
        };
        JumpStepReport {
            bound,
            satisfied: config.delta() < bound,
        }
    }

    /// Both step-size conditions hold, so positivity is guaranteed.
    pub fn in_positivity_regime(&self, config: &SchemeConfig) -> bool {
        self.validate_assumption_b(config).satisfied && self.validate_jump_step(config).satisfied
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionBReport {
    /// `(1/s)^2`, `(1/s)^4` and `(4 - k3^2) / (4 k2 (1 - theta))`, with
    /// `s = k2 (1 - theta) + k3^2 / 4`.
    pub components: [f64; 3],
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpStepReport {
    pub bound: f64,
    pub satisfied: bool,
}

/// Which trajectory value feeds the delay lookup when the lagged time lands
/// exactly on a jump node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DelaySource {
    #[default]
    PostJump,
    PreJump,
}

/// Discretisation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    theta: f64,
    m: f64,
    tau: f64,
    l: u64,
    delay_source: DelaySource,
}

impl SchemeConfig {
    pub const DEFAULT_THETA: f64 = 0.5;
    pub const DEFAULT_M: f64 = 0.25;

    /// `delta = tau / l`.
    pub fn new(theta: f64, tau: f64, l: u64) -> Result<Self, ModelError> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(ModelError::OutOfRange {
                name: "theta",
                value: theta,
                reason: "must lie in [0, 1]",
            });
        }
        positive("tau", tau)?;
        if l < 2 {
            return Err(ModelError::StepNotDivisor {
                delta: tau / l as f64,
                tau,
            });
        }
        Ok(Self {
            theta,
            m: Self::DEFAULT_M,
            tau,
            l,
            delay_source: DelaySource::PostJump,
        })
    }

    /// `delta = tau * 2^{-exponent}`.
    pub fn dyadic(theta: f64, tau: f64, exponent: u32) -> Result<Self, ModelError> {
        if exponent == 0 || exponent > 62 {
            return Err(ModelError::OutOfRange {
                name: "delta_exponent",
                value: exponent as f64,
                reason: "must lie in 1..=62",
            });
        }
        Self::new(theta, tau, 1u64 << exponent)
    }

    /// Accepts `delta` only when `tau / delta` is an integer `>= 2`.
    pub fn from_delta(theta: f64, tau: f64, delta: f64) -> Result<Self, ModelError> {
        let l = integer_ratio(tau, delta)
            .filter(|&l| l >= 2)
            .ok_or(ModelError::StepNotDivisor { delta, tau })?;
        Self::new(theta, tau, l)
    }

    pub fn with_m(mut self, m: f64) -> Result<Self, ModelError> {
        if !(m > 0.0 && m <= 0.25) {
            return Err(ModelError::OutOfRange {
                name: "m",
                value: m,
                reason: "must lie in (0, 1/4]",
            });
        }
        self.m = m;
        Ok(self)
    }

    pub fn with_l(mut self, l: u64) -> Result<Self, ModelError> {
        if l < 2 {
            return Err(ModelError::StepNotDivisor {
                delta: self.tau / l as f64,
                tau: self.tau,
            });
        }
        self.l = l;
        Ok(self)
    }

    pub fn with_delay_source(mut self, source: DelaySource) -> Self {
        self.delay_source = source;
        self
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }
    pub fn m(&self) -> f64 {
        self.m
    }
    pub fn tau(&self) -> f64 {
        self.tau
    }
    pub fn l(&self) -> u64 {
        self.l
    }
    pub fn delta(&self) -> f64 {
        self.tau / self.l as f64
    }
    pub fn delay_source(&self) -> DelaySource {
        self.delay_source
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg(theta: f64, delta: f64) -> SchemeConfig {
        SchemeConfig::from_delta(theta, 1.0, delta).unwrap()
    }

    fn model(k2: f64, k3: f64) -> ModelSpec {
        ModelSpec::builder()
            .k1(0.24)
            .k2(k2)
            .k3(k3)
            .alpha(0.5)
            .lambda(1.0)
            .tau(1.0)
            .horizon(1.0)
            .initial_segment(InitialSegment::Constant(1.0))
            .build()
            .unwrap()
    }

    #[test]
    fn assumption_b_benchmark_numbers() {
        let m = ModelSpec::benchmark(0.5, 1.0).unwrap();
        let r = m.validate_assumption_b(&cfg(0.5, 1.0 / 32.0));
        assert!((r.components[0] - 0.4217).abs() < 5e-4);
        assert!((r.components[1] - 0.1778).abs() < 5e-4);
        assert!((r.components[2] - 0.64).abs() < 1e-12);
        assert_eq!(r.bound, r.components[1]);
        assert!(r.satisfied);
    }

    #[test]
    fn assumption_b_fully_implicit() {
        let m = model(3.0, 0.4);
        let r = m.validate_assumption_b(&cfg(1.0, 0.5));
        assert!((r.components[0] - 625.0).abs() < 1e-9);
        assert!((r.components[1] - 390625.0).abs() < 1e-6);
        assert!(r.components[2].is_infinite());
    }

    #[test]
    fn assumption_b_explicit_fails() {
        let m = model(1.0, 1.0);
        let r = m.validate_assumption_b(&cfg(0.0, 0.5));
        assert!((r.components[0] - 0.64).abs() < 1e-12);
        assert!((r.components[1] - 0.4096).abs() < 1e-12);
        assert!((r.components[2] - 0.75).abs() < 1e-12);
        assert!((r.bound - 0.4096).abs() < 1e-12);
        assert!(!r.satisfied);
    }

    #[test]
    fn assumption_b_large_diffusion_reports_negative_component() {
        let m = model(3.0, 2.1);
        let r = m.validate_assumption_b(&cfg(0.0, 0.5));
        assert!(r.components[2] <= 0.0);
        assert!(!r.satisfied);
    }

    #[test]
    fn jump_step_bounds() {
        let m = ModelSpec::benchmark(0.5, 1.0).unwrap();
        let r = m.validate_jump_step(&cfg(0.5, 1.0 / 32.0));
        assert_eq!(r.bound, 1.0);
        assert!(r.satisfied);

        let m2 = model(3.0, 0.4)
            .to_builder()
            .lambda(2.0)
            .jump_coeff(JumpCoeff::Linear { delta: 0.5 })
            .build()
            .unwrap();
        let r = m2.validate_jump_step(&SchemeConfig::from_delta(0.5, 2.0, 0.4).unwrap());
        assert_eq!(r.bound, 0.5);
        assert!(r.satisfied);

        let m4 = m2.to_builder().lambda(4.0).lipschitz(1.0).build().unwrap();
        let c = SchemeConfig::from_delta(0.5, 0.9, 0.3).unwrap();
        let r = m4.validate_jump_step(&c);
        assert_eq!(r.bound, 0.25);
        assert!(!r.satisfied);
    }

    #[test]
    fn delay_coeff_values() {
        let m = model(3.0, 0.4);
        let pow1 = m
            .to_builder()
            .delay_coeff(DelayCoeff::Power { gamma: 1.0 })
            .build()
            .unwrap();
        assert_eq!(pow1.eval_delay_coeff(2.0).unwrap(), 2.0);
        assert_eq!(m.eval_delay_coeff(7.3).unwrap(), 1.0);
        let half = m
            .to_builder()
            .delay_coeff(DelayCoeff::Power { gamma: 0.5 })
            .build()
            .unwrap();
        assert_eq!(half.eval_delay_coeff(4.0).unwrap(), 2.0);
        assert_eq!(
            half.eval_delay_coeff(-1.0),
            Err(ModelError::NegativeArgument(-1.0))
        );
    }

    #[test]
    fn jump_coeff_values() {
        assert_eq!(JumpCoeff::Linear { delta: 2.0 }.eval(0.5), 1.0);
        assert_eq!(JumpCoeff::Zero.eval(3.0), 0.0);
        assert_eq!(JumpCoeff::Saturating { delta: 1.0 }.eval(1.0), 0.5);
        assert!((JumpCoeff::Sine { delta: 0.5 }.eval(1.0) - 0.5 * 1f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_models() {
        let base = model(3.0, 0.4).to_builder();
        assert!(matches!(
            base.clone().alpha(1.0).build(),
            Err(ModelError::OutOfRange { name: "alpha", .. })
        ));
        assert!(matches!(
            base.clone().horizon(1.5).build(),
            Err(ModelError::HorizonNotMultiple { .. })
        ));
        assert!(base.clone().horizon(3.0 * (1.0 + 1e-14)).build().is_ok());
        assert!(matches!(
            base.clone()
                .jump_coeff(JumpCoeff::Sine { delta: 2.0 })
                .lipschitz(2.0)
                .build(),
            Err(ModelError::JumpCondition { .. })
        ));
        assert!(matches!(
            base.clone()
                .initial_segment(InitialSegment::Function(Arc::new(|t| t + 0.5)))
                .build(),
            Err(ModelError::NonPositiveSegment { .. })
        ));
        assert!(matches!(
            base.clone().k1(0.0).build(),
            Err(ModelError::OutOfRange { .. })
        ));
    }

    #[test]
    fn step_must_divide_tau() {
        assert!(SchemeConfig::from_delta(0.5, 1.0, 0.3).is_err());
        assert!(SchemeConfig::from_delta(0.5, 1.0, 1.0).is_err());
        let c = SchemeConfig::from_delta(0.5, 1.0, 0.25).unwrap();
        assert_eq!(c.l(), 4);
        assert_eq!(c.m(), 0.25);
        assert!(c.with_m(0.3).is_err());
        assert_eq!(
            SchemeConfig::dyadic(0.5, 1.0, 5).unwrap().delta(),
            1.0 / 32.0
        );
    }

    #[test]
    fn rate_bounds() {
        assert_eq!(
            ModelSpec::benchmark(0.5, 1.0).unwrap().rate_lower_bound(),
            0.25
        );
        assert!((ModelSpec::benchmark(0.7, 0.5).unwrap().rate_lower_bound() - 0.1).abs() < 1e-12);
        assert!((ModelSpec::benchmark(0.9, 0.5).unwrap().rate_lower_bound() - 0.2).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn delay_coeff_non_negative(gamma in 0.05f64..2.0, x in 0.0f64..100.0) {
            let m = model(3.0, 0.4).to_builder().delay_coeff(DelayCoeff::Power { gamma }).build().unwrap();
            prop_assert!(m.eval_delay_coeff(x).unwrap() >= 0.0);
            prop_assert!(model(3.0, 0.4).eval_delay_coeff(x).unwrap() >= 0.0);
        }

        #[test]
        fn power_coeff_is_holder(gamma in 0.05f64..=1.0, x in 0.0f64..50.0, z in 0.0f64..50.0) {
            let m = model(3.0, 0.4).to_builder().delay_coeff(DelayCoeff::Power { gamma }).build().unwrap();
            let lhs = (m.eval_delay_coeff(x).unwrap() - m.eval_delay_coeff(z).unwrap()).abs();
            let rhs = libm::pow((x - z).abs(), gamma);
            prop_assert!(lhs <= rhs * (1.0 + 1e-12) + 1e-14);
        }

        #[test]
        fn assumption_b_monotone(theta in 0.0f64..=1.0, k2 in 0.1f64..5.0, k3 in 0.0f64..2.5, l in 2u64..4096, shrink in 1u64..16) {
            let m = model(k2, k3);
            let coarse = SchemeConfig::new(theta, 1.0, l).unwrap();
            let fine = SchemeConfig::new(theta, 1.0, l * shrink + 1).unwrap();
            if m.validate_assumption_b(&coarse).satisfied {
                prop_assert!(m.validate_assumption_b(&fine).satisfied);
            }
        }
    }
}
