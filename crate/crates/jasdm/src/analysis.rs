//! Monte Carlo studies.
//!
//! Paths are independent: each one derives its noise from
//! `(master_seed, path_index)`. Work is split into fixed chunks of path
//! indices that run in parallel; every chunk reduces its paths in index
//! order and chunks are merged in chunk order, so results do not depend on
//! the number of worker threads.

use jasdm_core::model::{ModelSpec, SchemeConfig};
use jasdm_core::noise::NoiseBundle;
use jasdm_core::scheme::{euler_maruyama_path, simulate_path, SchemeError};
use jasdm_core::stats::{fit_rate, per_rung_rates, MeanAccumulator, RateFit};
use rayon::prelude::*;

use crate::Error;

/// Paths per reduction chunk in the single-resolution studies.
const CHUNK: u64 = 64;

/// Parameters of a strong-error study against a fine reference run.
#[derive(Debug, Clone, PartialEq)]
pub struct StrongErrorSpec {
    /// Resolutions `l` (step `tau / l`), coarse to fine.
    pub levels: Vec<u64>,
    /// Resolution of the reference run; every level must divide it.
    pub reference_level: u64,
    pub batches: usize,
    pub per_batch: usize,
    pub master_seed: u64,
    /// Also estimate the error as a sup over the coarse nodes.
    pub sup_error: bool,
}

impl StrongErrorSpec {
    /// Dyadic ladder `delta = tau * 2^-e`.
    pub fn dyadic(
        exponents: &[u32],
        reference_exponent: u32,
        batches: usize,
        per_batch: usize,
        master_seed: u64,
    ) -> Self {
        Self {
            levels: exponents.iter().map(|&e| 1u64 << e).collect(),
            reference_level: 1u64 << reference_exponent,
            batches,
            per_batch,
            master_seed,
            sup_error: false,
        }
    }
}

/// Rungs whose error falls below this multiple of the reference floor are
/// left out of the rate fit.
pub const FLOOR_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub levels: Vec<u64>,
    pub deltas: Vec<f64>,
    /// Endpoint L2 error estimate per step size.
    pub errors: Vec<f64>,
    pub error_stderrs: Vec<f64>,
    /// Batch mean squared errors, `[rung][batch]`.
    pub per_batch_errors: Vec<Vec<f64>>,
    /// Sup-over-nodes estimate, when requested.
    pub sup_errors: Option<Vec<f64>>,
    /// Error at twice the reference step, the resolution floor of the study.
    pub floor_error: Option<f64>,
    /// Which rungs entered the rate fit.
    pub fitted_rungs: Vec<bool>,
    /// Fit over the rungs in `fitted_rungs`.
    pub fit: Option<RateFit>,
    /// Fit over every rung, floor or not.
    pub fit_all: Option<RateFit>,
    pub rung_rates: Vec<f64>,
    pub theoretical_slope_lower_bound: f64,
    pub batches: usize,
    pub per_batch: usize,
    pub reference_delta: f64,
    pub master_seed: u64,
    pub clamp_total: u64,
}

impl ConvergenceReport {
    pub fn fitted_slope(&self) -> Option<f64> {
        self.fit.as_ref().map(|f| f.slope)
    }

    pub fn total_paths(&self) -> usize {
        self.batches * self.per_batch
    }
}

#[derive(Debug, Clone, Default)]
struct PathErrors {
    squared: Vec<f64>,
    sup_squared: Vec<f64>,
    floor_squared: f64,
    clamps: u64,
}

fn path_errors(
    model: &ModelSpec,
    base: &SchemeConfig,
    spec: &StrongErrorSpec,
    floor_level: Option<u64>,
    path: u64,
) -> Result<PathErrors, Error> {
    let bundle = NoiseBundle::generate(model, spec.reference_level, spec.master_seed, path)?;
    let fine = bundle.fine_grid();
    let reference = simulate_path(
        model,
        &base.with_l(spec.reference_level)?,
        fine,
        bundle.wiener_fine(),
    )?;
    let reference_values = reference.post_jump_values();
    let mut out = PathErrors {
        clamps: reference.clamp_count(),
        ..Default::default()
    };

    let run = |l: u64| -> Result<(f64, f64, u64), Error> {
        let grid = bundle.grid(l)?;
        let increments = bundle.wiener_increments_for_grid(&grid)?;
        let traj = simulate_path(model, &base.with_l(l)?, &grid, &increments)?;
        let end = traj.terminal() - reference.terminal();
        let mut sup = 0.0f64;
        if spec.sup_error {
            let positions = grid.embed_in(fine)?;
            for (y, &p) in traj.forward_values().iter().zip(&positions) {
                sup = sup.max((y - reference_values[p]).abs());
            }
        }
        Ok((end * end, sup * sup, traj.clamp_count()))
    };

    for &l in &spec.levels {
        let (sq, sup_sq, clamps) = run(l)?;
        out.squared.push(sq);
        out.sup_squared.push(sup_sq);
        out.clamps += clamps;
    }
    if let Some(l) = floor_level {
        out.floor_squared = run(l)?.0;
    }
    Ok(out)
}

#[derive(Debug, Clone)]
struct BatchSums {
    squared: Vec<f64>,
    sup_squared: Vec<f64>,
    floor_squared: f64,
    clamps: u64,
}

/// Endpoint strong error of the scheme at each level against the reference
/// level, with one jump-time list and one Brownian path per Monte Carlo
/// sample shared by every resolution.
pub fn strong_error_study(
    model: &ModelSpec,
    base: &SchemeConfig,
    spec: &StrongErrorSpec,
) -> Result<ConvergenceReport, Error> {
    if spec.batches == 0 || spec.per_batch == 0 {
        return Err(Error::Usage("a study needs at least one path".into()));
    }
    if spec.levels.is_empty() {
        return Err(Error::Usage("no step sizes requested".into()));
    }
    if spec.levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Usage(
            "step sizes must be strictly decreasing".into(),
        ));
    }
    if let Some(&l) = spec
        .levels
        .iter()
        .find(|&&l| l < 2 || !spec.reference_level.is_multiple_of(l))
    {
        return Err(Error::Usage(format!(
            "step tau/{l} is not refined by the reference step tau/{}",
            spec.reference_level
        )));
    }
    let floor_level = Some(spec.reference_level / 2).filter(|&l| l >= 2);

    let rungs = spec.levels.len();
    let batch_sums: Vec<BatchSums> = (0..spec.batches)
        .into_par_iter()
        .map(|j| {
            let mut sums = BatchSums {
                squared: vec![0.0; rungs],
                sup_squared: vec![0.0; rungs],
                floor_squared: 0.0,
                clamps: 0,
            };
            for i in 0..spec.per_batch {
                let path = (j * spec.per_batch + i) as u64;
                let e = path_errors(model, base, spec, floor_level, path)?;
                for r in 0..rungs {
                    sums.squared[r] += e.squared[r];
                    sums.sup_squared[r] += e.sup_squared[r];
                }
                sums.floor_squared += e.floor_squared;
                sums.clamps += e.clamps;
            }
            Ok(sums)
        })
        .collect::<Result<_, Error>>()?;

    let per_batch = spec.per_batch as f64;
    let per_batch_errors: Vec<Vec<f64>> = (0..rungs)
        .map(|r| {
            batch_sums
                .iter()
                .map(|b| b.squared[r] / per_batch)
                .collect()
        })
        .collect();
    let mut errors = Vec::with_capacity(rungs);
    let mut error_stderrs = Vec::with_capacity(rungs);
    for batch_means in &per_batch_errors {
        let mut acc = MeanAccumulator::new();
        batch_means.iter().for_each(|&x| acc.push(x));
        let eps = acc.mean().sqrt();
        errors.push(eps);
        error_stderrs.push(if eps > 0.0 {
            acc.std_error() / (2.0 * eps)
        } else {
            0.0
        });
    }
    let mean_of = |f: &dyn Fn(&BatchSums) -> f64| {
        let mut acc = MeanAccumulator::new();
        batch_sums.iter().for_each(|b| acc.push(f(b) / per_batch));
        acc.mean().sqrt()
    };
    let sup_errors = spec.sup_error.then(|| {
        (0..rungs)
            .map(|r| mean_of(&|b: &BatchSums| b.sup_squared[r]))
            .collect()
    });
    let floor_error = floor_level.map(|_| mean_of(&|b: &BatchSums| b.floor_squared));

    let deltas: Vec<f64> = spec
        .levels
        .iter()
        .map(|&l| model.tau() / l as f64)
        .collect();
    let threshold = floor_error.map_or(0.0, |f| FLOOR_FACTOR * f);
    let fitted_rungs: Vec<bool> = errors.iter().map(|&e| e > 0.0 && e >= threshold).collect();
    let (fit_deltas, fit_errors): (Vec<f64>, Vec<f64>) = deltas
        .iter()
        .zip(&errors)
        .zip(&fitted_rungs)
        .filter(|(_, &keep)| keep)
        .map(|((d, e), _)| (*d, *e))
        .unzip();
    let fit_all = fit_rate(&deltas, &errors).ok();
    let fit = match fit_rate(&fit_deltas, &fit_errors) {
        Ok(fit) => Some(fit),
        Err(e) => {
            log::warn!("no convergence rate fitted: {e}");
            None
        }
    };

    Ok(ConvergenceReport {
        levels: spec.levels.clone(),
        rung_rates: per_rung_rates(&deltas, &errors),
        deltas,
        errors,
        error_stderrs,
        per_batch_errors,
        sup_errors,
        floor_error,
        fitted_rungs,
        fit,
        fit_all,
        theoretical_slope_lower_bound: model.rate_lower_bound(),
        batches: spec.batches,
        per_batch: spec.per_batch,
        reference_delta: model.tau() / spec.reference_level as f64,
        master_seed: spec.master_seed,
        clamp_total: batch_sums.iter().map(|b| b.clamps).sum(),
    })
}

/// Runs `per_path` over `0..paths` in parallel chunks and folds the chunk
/// results in index order.
fn chunked<T, F, M>(paths: u64, per_path: F, mut merge: M, init: T) -> Result<T, Error>
where
    T: Send + Clone + Sync,
    F: Fn(u64, &mut T) -> Result<(), Error> + Sync,
    M: FnMut(&mut T, &T),
{
    let chunks = paths.div_ceil(CHUNK);
    let parts: Vec<T> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut acc = init.clone();
            for path in c * CHUNK..((c + 1) * CHUNK).min(paths) {
                per_path(path, &mut acc)?;
            }
            Ok(acc)
        })
        .collect::<Result<_, Error>>()?;
    let mut total = init;
    for part in &parts {
        merge(&mut total, part);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanReversionReport {
    /// Deterministic node times on `[0, T]`.
    pub times: Vec<f64>,
    pub estimated_means: Vec<f64>,
    pub standard_errors: Vec<f64>,
    pub closed_form_means: Vec<f64>,
    /// `k1 / (k2 theta)`; infinite for `theta = 0`.
    pub theta_bound: f64,
    /// Whether `delta (1 - theta) < 1 / k2` holds.
    pub step_condition: bool,
    pub paths: u64,
}

impl MeanReversionReport {
    pub fn terminal_mean(&self) -> f64 {
        *self.estimated_means.last().expect("non-empty")
    }
    pub fn terminal_stderr(&self) -> f64 {
        *self.standard_errors.last().expect("non-empty")
    }
    pub fn terminal_closed_form(&self) -> f64 {
        *self.closed_form_means.last().expect("non-empty")
    }
}

/// Per-node samples of one path at the deterministic nodes of `[0, T]`.
fn deterministic_values(
    model: &ModelSpec,
    config: &SchemeConfig,
    master_seed: u64,
    path: u64,
) -> Result<(Vec<f64>, Vec<f64>), Error> {
    let bundle = NoiseBundle::generate(model, config.l(), master_seed, path)?;
    let grid = bundle.fine_grid();
    let traj = simulate_path(model, config, grid, bundle.wiener_fine())?;
    let post = traj.post_jump_values();
    let count = grid.det_count();
    let mut times = Vec::with_capacity(count);
    let mut values = Vec::with_capacity(count);
    for n in 0..count as i64 {
        let p = grid.det_position(n);
        times.push(grid.nodes()[p]);
        values.push(post[p]);
    }
    Ok((times, values))
}

/// Monte Carlo mean of the scheme at every deterministic node of
/// `[0, horizon]`, next to the exact-solution mean
/// `k1/k2 + (xi(0) - k1/k2) e^{-k2 t}`.
pub fn mean_reversion_study(
    model: &ModelSpec,
    config: &SchemeConfig,
    horizon: f64,
    paths: u64,
    master_seed: u64,
) -> Result<MeanReversionReport, Error> {
    if paths == 0 {
        return Err(Error::Usage("a study needs at least one path".into()));
    }
    let model = model.with_horizon(horizon)?;
    let step_condition = config.delta() * (1.0 - config.theta()) < 1.0 / model.k2();
    if !step_condition {
        log::warn!(
            "delta (1 - theta) = {} is not below 1/k2 = {}",
            config.delta() * (1.0 - config.theta()),
            1.0 / model.k2()
        );
    }
    let (times, _) = deterministic_values(&model, config, master_seed, 0)?;
    let nodes = times.len();
    let accs = chunked(
        paths,
        |path, acc: &mut Vec<MeanAccumulator>| {
            let (_, values) = deterministic_values(&model, config, master_seed, path)?;
            acc.iter_mut().zip(&values).for_each(|(a, &v)| a.push(v));
            Ok(())
        },
        |total, part| total.iter_mut().zip(part).for_each(|(a, b)| a.merge(b)),
        vec![MeanAccumulator::new(); nodes],
    )?;
    Ok(MeanReversionReport {
        closed_form_means: times.iter().map(|&t| model.exact_mean(t)).collect(),
        times,
        estimated_means: accs.iter().map(|a| a.mean()).collect(),
        standard_errors: accs.iter().map(|a| a.std_error()).collect(),
        theta_bound: if config.theta() > 0.0 {
            model.k1() / (model.k2() * config.theta())
        } else {
            f64::INFINITY
        },
        step_condition,
        paths,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentReport {
    pub powers: Vec<f64>,
    pub times: Vec<f64>,
    /// `E[y_t^p]` per power and deterministic node.
    pub node_moments: Vec<Vec<f64>>,
    pub node_stderrs: Vec<Vec<f64>>,
    /// `sup_t E[y_t^p]` per power, with the standard error at the maximiser.
    pub sup_over_time: Vec<f64>,
    pub sup_over_time_stderr: Vec<f64>,
    /// `E[sup_t y_t^p]` per power.
    pub expected_path_sup: Vec<f64>,
    pub expected_path_sup_stderr: Vec<f64>,
    pub paths: u64,
}

/// Moments `E[y_t^p]` at the deterministic nodes and `E[sup_t y_t^p]`.
pub fn moment_study(
    model: &ModelSpec,
    config: &SchemeConfig,
    powers: &[f64],
    paths: u64,
    master_seed: u64,
) -> Result<MomentReport, Error> {
    if paths == 0 {
        return Err(Error::Usage("a study needs at least one path".into()));
    }
    if powers.is_empty() || powers.iter().any(|&p| p.is_nan() || p <= 0.0) {
        return Err(Error::Usage("moment powers must be positive".into()));
    }
    let (times, _) = deterministic_values(model, config, master_seed, 0)?;
    let nodes = times.len();
    #[derive(Clone)]
    struct Acc {
        node: Vec<Vec<MeanAccumulator>>,
        sup: Vec<MeanAccumulator>,
    }
    let init = Acc {
        node: vec![vec![MeanAccumulator::new(); nodes]; powers.len()],
        sup: vec![MeanAccumulator::new(); powers.len()],
    };
    let acc = chunked(
        paths,
        |path, acc: &mut Acc| {
            let (_, values) = deterministic_values(model, config, master_seed, path)?;
            let peak = values.iter().copied().fold(0.0f64, f64::max);
            for (q, &p) in powers.iter().enumerate() {
                for (a, &v) in acc.node[q].iter_mut().zip(&values) {
                    a.push(v.powf(p));
                }
                acc.sup[q].push(peak.powf(p));
            }
            Ok(())
        },
        |total, part| {
            for (ts, ps) in total.node.iter_mut().zip(&part.node) {
                ts.iter_mut().zip(ps).for_each(|(a, b)| a.merge(b));
            }
            total
                .sup
                .iter_mut()
                .zip(&part.sup)
                .for_each(|(a, b)| a.merge(b));
        },
        init,
    )?;

    let node_moments: Vec<Vec<f64>> = acc
        .node
        .iter()
        .map(|row| row.iter().map(|a| a.mean()).collect())
        .collect();
    let node_stderrs: Vec<Vec<f64>> = acc
        .node
        .iter()
        .map(|row| row.iter().map(|a| a.std_error()).collect())
        .collect();
    let mut sup_over_time = Vec::new();
    let mut sup_over_time_stderr = Vec::new();
    for (means, errs) in node_moments.iter().zip(&node_stderrs) {
        let (idx, &best) = means
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .expect("non-empty");
        sup_over_time.push(best);
        sup_over_time_stderr.push(errs[idx]);
    }
    Ok(MomentReport {
        powers: powers.to_vec(),
        times,
        node_moments,
        node_stderrs,
        sup_over_time,
        sup_over_time_stderr,
        expected_path_sup: acc.sup.iter().map(|a| a.mean()).collect(),
        expected_path_sup_stderr: acc.sup.iter().map(|a| a.std_error()).collect(),
        paths,
    })
}

/// Stepper examined by [`positivity_audit`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stepper {
    Jasdm,
    EulerMaruyama,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PositivityAudit {
    pub paths: u64,
    /// Smallest value seen on `(0, T]` over all paths.
    pub min_value: f64,
    /// Paths with at least one non-positive value.
    pub negative_count: u64,
    pub clamp_total: u64,
    /// Whether both step-size conditions hold for the configuration.
    pub in_guaranteed_regime: bool,
}

/// Scans `paths` trajectories for non-positive values.
pub fn positivity_audit(
    model: &ModelSpec,
    config: &SchemeConfig,
    stepper: Stepper,
    paths: u64,
    master_seed: u64,
) -> Result<PositivityAudit, Error> {
    #[derive(Clone, Copy)]
    struct Acc {
        min: f64,
        negative: u64,
        clamps: u64,
    }
    let acc = chunked(
        paths,
        |path, acc: &mut Acc| {
            let bundle = NoiseBundle::generate(model, config.l(), master_seed, path)?;
            let grid = bundle.fine_grid();
            let traj = match stepper {
                Stepper::Jasdm => simulate_path(model, config, grid, bundle.wiener_fine()),
                Stepper::EulerMaruyama => euler_maruyama_path(model, grid, bundle.wiener_fine()),
            };
            match traj {
                Ok(traj) => {
                    let min = traj.min_forward();
                    acc.min = acc.min.min(min);
                    acc.negative += u64::from(min <= 0.0);
                    acc.clamps += traj.clamp_count();
                }
                Err(SchemeError::PositivityViolation { .. }) => {
                    acc.min = acc.min.min(0.0);
                    acc.negative += 1;
                }
                Err(e) => return Err(e.into()),
            }
            Ok(())
        },
        |total, part| {
            total.min = total.min.min(part.min);
            total.negative += part.negative;
            total.clamps += part.clamps;
        },
        Acc {
            min: f64::INFINITY,
            negative: 0,
            clamps: 0,
        },
    )?;
    Ok(PositivityAudit {
        paths,
        min_value: acc.min,
        negative_count: acc.negative,
        clamp_total: acc.clamps,
        in_guaranteed_regime: model.in_positivity_regime(config),
    })
}
