//! Steppers.
//!
//! Between nodes `t_k < t_{k+1}` of a jump-adapted grid the semi-discrete
//! step freezes the state and the lagged state at `t_k`, solves the
//! resulting square-root SDE exactly and returns
//!
//! ```text
//! y_{k+1}^- = ( sqrt(inner) + c * dW )^2
//! inner     = y (1 - k2 dt / D) + k1 dt / D - k3^2 / (4 D^2) * B^2 * y^{2 alpha - 1} * dt
//! c         = k3 / (2 D) * B * y^{alpha - 1/2}
//! D         = 1 + k2 theta dt,      B = b(y_del) / (1 + b(y_del) dt^m)
//! ```
//!
//! followed by the compensated jump map
//! `y_{k+1} = y_{k+1}^- + g(y_{k+1}^-) (dN_k - lambda dt)`.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

pub use crate::model::DelaySource;
use crate::model::{ModelError, ModelSpec, SchemeConfig};
use crate::noise::JumpAdaptedGrid;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SchemeError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("jump update left the positive half-line: y- = {y_minus}, dt = {dt}, jump = {jump}")]
    PositivityViolation { y_minus: f64, dt: f64, jump: bool },
    #[error("expected {expected} Wiener increments, got {got}")]
    IncrementCount { expected: usize, got: usize },
    #[error("grid does not match the model or scheme configuration")]
    GridMismatch,
    #[error("delay lookup at t = {t} beyond the simulated frontier {frontier}")]
    BeyondFrontier { t: f64, frontier: f64 },
}

/// Inputs of one diffusion step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInputs {
    /// `y_{t_k}`.
    pub y_current: f64,
    /// Lagged value feeding `b`.
    pub y_delayed: f64,
    /// `t_{k+1} - t_k`.
    pub dt: f64,
    /// Wiener increment over the interval.
    pub dw: f64,
    /// Whether `t_{k+1}` is a jump time.
    pub jump: bool,
}

/// Output of a stage that may clamp a negative radicand to zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamped {
    pub value: f64,
    pub clamped: bool,
}

/// `y^p` with `0^0 = 1`.
#[inline]
fn state_power(y: f64, p: f64) -> f64 {
    if p == 0.0 {
        1.0
    } else {
        libm::pow(y, p)
    }
}

#[inline]
fn step_power(dt: f64, m: f64) -> f64 {
    if m == 0.25 {
        libm::sqrt(libm::sqrt(dt))
    } else {
        libm::pow(dt, m)
    }
}

/// `b / (1 + b dt^m)`.
#[inline]
fn mollified(b: f64, dt: f64, m: f64) -> f64 {
    b / (1.0 + b * step_power(dt, m))
}

#[inline]
fn inner_raw(y: f64, b: f64, dt: f64, model: &ModelSpec, config: &SchemeConfig) -> f64 {
    let d = 1.0 + model.k2() * config.theta() * dt;
    let bm = mollified(b, dt, config.m());
    let k3 = model.k3();
    y * (1.0 - model.k2() * dt / d) + model.k1() * dt / d
        - k3 * k3 / (4.0 * d * d) * bm * bm * state_power(y, 2.0 * model.alpha() - 1.0) * dt
}

#[inline]
fn noise_coefficient(y: f64, b: f64, dt: f64, model: &ModelSpec, config: &SchemeConfig) -> f64 {
    let d = 1.0 + model.k2() * config.theta() * dt;
    model.k3() / (2.0 * d) * mollified(b, dt, config.m()) * state_power(y, model.alpha() - 0.5)
}

#[inline]
fn clamp(raw: f64) -> Clamped {
    if raw < 0.0 {
        Clamped {
            value: 0.0,
            clamped: true,
        }
    } else {
        Clamped {
            value: raw,
            clamped: false,
        }
    }
}

/// The quantity under the square root, clamped below at zero.
pub fn jasdm_inner(
    y: f64,
    y_del: f64,
    dt: f64,
    model: &ModelSpec,
    config: &SchemeConfig,
) -> Result<Clamped, SchemeError> {
    let b = model.eval_delay_coeff(y_del)?;
    Ok(clamp(inner_raw(y, b, dt, model, config)))
}

/// Coefficient multiplying `dW` inside the square.
pub fn jasdm_noise_coefficient(
    y: f64,
    y_del: f64,
    dt: f64,
    model: &ModelSpec,
    config: &SchemeConfig,
) -> Result<f64, SchemeError> {
    let b = model.eval_delay_coeff(y_del)?;
    Ok(noise_coefficient(y, b, dt, model, config))
}

#[inline]
fn diffusion_from_b(
    inputs: &StepInputs,
    b: f64,
    model: &ModelSpec,
    config: &SchemeConfig,
) -> Clamped {
    let inner = clamp(inner_raw(inputs.y_current, b, inputs.dt, model, config));
    let z = libm::sqrt(inner.value)
        + noise_coefficient(inputs.y_current, b, inputs.dt, model, config) * inputs.dw;
    Clamped {
        value: z * z,
        clamped: inner.clamped,
    }
}

/// Left limit `y_{k+1}^-` after one semi-discrete step. Always `>= 0`.
pub fn jasdm_diffusion_step(
    inputs: &StepInputs,
    model: &ModelSpec,
    config: &SchemeConfig,
) -> Result<Clamped, SchemeError> {
    let b = model.eval_delay_coeff(inputs.y_delayed)?;
    Ok(diffusion_from_b(inputs, b, model, config))
}

/// Compensated jump map `y- + g(y-) (dN - lambda dt)`. Errors if the result
/// is not strictly positive.
pub fn jasdm_jump_update(
    y_minus: f64,
    dt: f64,
    jump: bool,
    model: &ModelSpec,
) -> Result<f64, SchemeError> {
    let y = compensated_jump(y_minus, dt, jump, model);
    if y > 0.0 {
        Ok(y)
    } else {
        Err(SchemeError::PositivityViolation { y_minus, dt, jump })
    }
}

#[inline]
fn compensated_jump(y_minus: f64, dt: f64, jump: bool, model: &ModelSpec) -> f64 {
    if model.jump_coeff().is_zero() {
        return y_minus;
    }
    let dn = if jump { 1.0 } else { 0.0 };
    y_minus + model.eval_jump_coeff(y_minus) * (dn - model.lambda() * dt)
}

/// Scheme values on a grid.
///
/// At a jump node `pre` holds the left limit and `post` the value after the
/// jump map. Elsewhere the two coincide: the compensator drift is folded
/// into the node value since the process does not jump there.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<'g> {
    grid: &'g JumpAdaptedGrid,
    pre: Vec<f64>,
    post: Vec<f64>,
    clamp_count: u64,
}

impl<'g> Trajectory<'g> {
    pub fn grid(&self) -> &'g JumpAdaptedGrid {
        self.grid
    }

    /// Left limits at every node of `[-tau, T]`.
    pub fn pre_jump_values(&self) -> &[f64] {
        &self.pre
    }

    /// Node values at every node of `[-tau, T]`.
    pub fn post_jump_values(&self) -> &[f64] {
        &self.post
    }

    /// Values on `[0, T]`.
    pub fn forward_values(&self) -> &[f64] {
        &self.post[self.grid.zero_index()..]
    }

    pub fn clamp_count(&self) -> u64 {
        self.clamp_count
    }

    /// `y_T`.
    pub fn terminal(&self) -> f64 {
        *self.post.last().expect("non-empty trajectory")
    }

    /// Smallest value on `(0, T]`, over both pre- and post-jump values.
    pub fn min_forward(&self) -> f64 {
        let start = self.grid.zero_index() + 1;
        self.post[start..]
            .iter()
            .chain(&self.pre[start..])
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// Value feeding the delay at time `t`: `xi(t)` for `t <= 0`, otherwise
    /// the post-jump value at the last node `<= t`.
    pub fn delay_lookup(&self, t: f64, model: &ModelSpec) -> Result<f64, SchemeError> {
        lookup(self.grid.nodes(), &self.post, self.post.len(), t, model)
    }
}

fn lookup(
    nodes: &[f64],
    values: &[f64],
    filled: usize,
    t: f64,
    model: &ModelSpec,
) -> Result<f64, SchemeError> {
    if t <= 0.0 {
        return Ok(model.initial_segment().eval(t));
    }
    let frontier = nodes[filled - 1];
    if t > frontier {
        return Err(SchemeError::BeyondFrontier { t, frontier });
    }
    let idx = nodes[..filled].partition_point(|&s| s <= t) - 1;
    Ok(values[idx])
}

/// Free-standing form of [`Trajectory::delay_lookup`].
pub fn delay_lookup(traj: &Trajectory<'_>, t: f64, model: &ModelSpec) -> Result<f64, SchemeError> {
    traj.delay_lookup(t, model)
}

fn check_inputs(
    model: &ModelSpec,
    grid: &JumpAdaptedGrid,
    increments: &[f64],
) -> Result<(), SchemeError> {
    if grid.tau() != model.tau() || grid.horizon() != model.horizon() {
        return Err(SchemeError::GridMismatch);
    }
    if increments.len() != grid.intervals() {
        return Err(SchemeError::IncrementCount {
            expected: grid.intervals(),
            got: increments.len(),
        });
    }
    Ok(())
}

/// Runs the stepper over `[0, T]`, starting from `xi` on `[-tau, 0]`.
struct Runner<'a, 'g> {
    model: &'a ModelSpec,
    grid: &'g JumpAdaptedGrid,
    source: DelaySource,
    pre: Vec<f64>,
    post: Vec<f64>,
}

impl<'a, 'g> Runner<'a, 'g> {
    fn new(model: &'a ModelSpec, grid: &'g JumpAdaptedGrid, source: DelaySource) -> Self {
        let mut pre = vec![0.0; grid.len()];
        let zero = grid.zero_index();
        for (k, &t) in grid.nodes()[..=zero].iter().enumerate() {
            pre[k] = model.initial_segment().eval(t);
        }
        let post = pre.clone();
        Self {
            model,
            grid,
            source,
            pre,
            post,
        }
    }

    /// Lagged value for the step leaving node `k`.
    fn delayed(&self, k: usize) -> Result<f64, SchemeError> {
        let values = match self.source {
            DelaySource::PostJump => &self.post,
            DelaySource::PreJump => &self.pre,
        };
        match self.grid.kind(k).det_index() {
            // t_k - tau is again deterministic: index arithmetic avoids
            // rounding in the subtraction.
            Some(n) => Ok(values[self.grid.det_position(n - self.grid.l() as i64)]),
            None => {
                let t = self.grid.nodes()[k] - self.model.tau();
                lookup(self.grid.nodes(), values, k + 1, t, self.model)
            }
        }
    }

    fn finish(self, clamp_count: u64) -> Trajectory<'g> {
        Trajectory {
            grid: self.grid,
            pre: self.pre,
            post: self.post,
            clamp_count,
        }
    }
}

/// Jump-adapted semi-discrete trajectory driven by `increments` (one per
/// interval of `grid` on `[0, T]`); jump flags come from the grid.
pub fn simulate_path<'g>(
    model: &ModelSpec,
    config: &SchemeConfig,
    grid: &'g JumpAdaptedGrid,
    increments: &[f64],
) -> Result<Trajectory<'g>, SchemeError> {
    check_inputs(model, grid, increments)?;
    if grid.l() != config.l() {
        return Err(SchemeError::GridMismatch);
    }
    let mut run = Runner::new(model, grid, config.delay_source());
    let nodes = grid.nodes();
    let zero = grid.zero_index();
    let mut clamp_count = 0;
    for k in zero..grid.len() - 1 {
        let y_delayed = run.delayed(k)?;
        let inputs = StepInputs {
            y_current: run.post[k],
            y_delayed,
            dt: nodes[k + 1] - nodes[k],
            dw: increments[k - zero],
            jump: grid.is_jump(k + 1),
        };
        let b = model.eval_delay_coeff(y_delayed)?;
        let step = diffusion_from_b(&inputs, b, model, config);
        clamp_count += u64::from(step.clamped);
        let y = jasdm_jump_update(step.value, inputs.dt, inputs.jump, model)?;
        run.pre[k + 1] = if inputs.jump { step.value } else { y };
        run.post[k + 1] = y;
    }
    Ok(run.finish(clamp_count))
}

/// Explicit Euler–Maruyama baseline with `|x|`-regularised powers. Values
/// may go negative; nothing is clamped.
pub fn euler_maruyama_path<'g>(
    model: &ModelSpec,
    grid: &'g JumpAdaptedGrid,
    increments: &[f64],
) -> Result<Trajectory<'g>, SchemeError> {
    check_inputs(model, grid, increments)?;
    let mut run = Runner::new(model, grid, DelaySource::PostJump);
    let nodes = grid.nodes();
    let zero = grid.zero_index();
    for k in zero..grid.len() - 1 {
        let x = run.post[k];
        let x_del = libm::fabs(run.delayed(k)?);
        let dt = nodes[k + 1] - nodes[k];
        let b = model.eval_delay_coeff(x_del)?;
        let diffusion = model.k3() * b * libm::pow(libm::fabs(x), model.alpha());
        let x_minus = x + (model.k1() - model.k2() * x) * dt + diffusion * increments[k - zero];
        let jump = grid.is_jump(k + 1);
        let x_plus = compensated_jump(x_minus, dt, jump, model);
        run.pre[k + 1] = if jump { x_minus } else { x_plus };
        run.post[k + 1] = x_plus;
    }
    Ok(run.finish(0))
}
