//! Coupling-ratio searches for the most time-symmetric emitted pulse: dense
//! grid sweeps and a bounded Nelder-Mead refinement.
//!
//! The objective is evaluated on an ideal node with `g = 1` and ratios
//! `(J_12, ..., J_{N-1,N}, kappa)`. The emission window grows with the slowest
//! mode (`16 / min|Im Ω|`, between 20 and 400) at a fixed sample step, and the
//! shape factor is multiplied by the in-window norm when that falls below one.
//! Without the penalty, slow pulses truncated by the window look artificially
//! symmetric.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{evolve_emission, TimeGrid, DEFAULT_SAMPLES, DEFAULT_WINDOW};
use crate::error::{Error, Result};
use crate::linalg::eigenvalues;
use crate::metrics::symmetry_factor;
use crate::model::{build_reduced_hamiltonian, NodeConfig};
use crate::spectral::{pulse_from_modes, reduced_modes};

/// Upper bound on every ratio; the lower bound 0 is exclusive.
pub const MAX_RATIO: f64 = 20.0;
/// Largest grid a sweep accepts.
pub const GRID_LIMIT: u128 = 10_000_000;
/// Longest adaptive emission window, in `1/g`.
pub const MAX_WINDOW: f64 = 400.0;
/// Sample step of objective evaluations (that of the default grid).
pub const SAMPLE_STEP: f64 = DEFAULT_WINDOW / (DEFAULT_SAMPLES - 1) as f64;
/// Long objective windows are sampled more coarsely beyond this count.
pub const MAX_OBJECTIVE_SAMPLES: usize = 16384;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Analytic,
    Ode,
}

/// One objective evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Shape factor times `min(1, in-window norm)`.
    pub beta: f64,
    /// Shape factor alone.
    pub shape_beta: f64,
    pub window_norm: f64,
    pub window: f64,
    pub method: Method,
}

fn ratio_config(ratios: &[f64]) -> Result<NodeConfig> {
    NodeConfig::from_ratios(ratios)
}

/// Adaptive emission grid for a config with slowest amplitude decay `gamma`.
pub fn objective_grid(gamma: f64) -> Result<TimeGrid> {
    let window = if gamma > 0.0 {
        (16.0 / gamma).clamp(DEFAULT_WINDOW, MAX_WINDOW)
    } else {
        MAX_WINDOW
    };
    let grid = TimeGrid::with_step(0.0, window, SAMPLE_STEP)?;
    if grid.n_samples > MAX_OBJECTIVE_SAMPLES {
        TimeGrid::new(0.0, grid.t_end, MAX_OBJECTIVE_SAMPLES)
    } else {
        Ok(grid)
    }
}

/// Evaluates the objective at `ratios`. The closed-form pulse is used unless
/// the spectrum is degenerate or defective, in which case the node is
/// integrated instead.
pub fn evaluate(ratios: &[f64]) -> Result<Evaluation> {
    let config = ratio_config(ratios)?;
    let (pulse, method) = match reduced_modes(&config) {
        Ok(eig) => {
            let grid = objective_grid(eig.slowest_decay())?;
            (pulse_from_modes(&eig, &grid)?, Method::Analytic)
        }
        Err(Error::Defective { .. } | Error::DegenerateSpectrum { .. }) => {
            let h = build_reduced_hamiltonian(&config)?;
            let gamma = eigenvalues(&h.entries)?
                .iter()
                .map(|w| -w.im)
                .fold(f64::INFINITY, f64::min);
            let grid = objective_grid(gamma)?;
            (evolve_emission(&config, &grid)?.outputs.swap_remove(0), Method::Ode)
        }
        Err(e) => return Err(e),
    };
    let shape = symmetry_factor(&pulse)?;
    Ok(Evaluation {
        beta: shape.beta * pulse.norm.min(1.0),
        shape_beta: shape.beta,
        window_norm: pulse.norm,
        window: pulse.grid.duration(),
        method,
    })
}

/// Objective value, or `None` outside `(0, MAX_RATIO]`.
pub fn beta_objective(ratios: &[f64]) -> Option<f64> {
    if ratios.iter().any(|&r| !(r > 0.0 && r <= MAX_RATIO)) {
        return None;
    }
    evaluate(ratios).ok().map(|e| e.beta)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamRange {
    pub min: f64,
    pub max: f64,
    pub steps: usize,
}

impl ParamRange {
    pub fn new(min: f64, max: f64, steps: usize) -> Result<Self> {
        let r = Self { min, max, steps };
        r.validate("range")?;
        Ok(r)
    }

    fn validate(&self, field: &str) -> Result<()> {
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(Error::validation(
                field,
                format!("need 0 < min <= max, got {}:{}", self.min, self.max),
            ));
        }
        if self.steps == 0 {
            return Err(Error::validation(field, "need at least one step"));
        }
        if self.steps == 1 && self.max != self.min {
            return Err(Error::validation(field, "a single step needs min == max"));
        }
        Ok(())
    }

    /// Evenly spaced values including both ends.
    pub fn values(&self) -> Vec<f64> {
        if self.steps == 1 {
            return vec![self.min];
        }
        let span = self.max - self.min;
        (0..self.steps)
            .map(|k| {
                if k + 1 == self.steps {
                    self.max
                } else {
                    self.min + span * k as f64 / (self.steps - 1) as f64
                }
            })
            .collect()
    }
}

/// Grid over `(J_12, ..., J_{N-1,N}, kappa) / g`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub n_rings: usize,
    pub ranges: Vec<ParamRange>,
}

impl SweepSpec {
    pub fn new(n_rings: usize, ranges: Vec<ParamRange>) -> Result<Self> {
        let spec = Self { n_rings, ranges };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_rings == 0 {
            return Err(Error::validation("n_rings", "must be at least 1"));
        }
        if self.ranges.len() != self.n_rings {
            return Err(Error::validation(
                "ranges",
                format!("{} rings need {} ranges, got {}", self.n_rings, self.n_rings, self.ranges.len()),
            ));
        }
        for (name, r) in parameter_names(self.n_rings).iter().zip(&self.ranges) {
            r.validate(name)?;
        }
        let points = self.point_count();
        if points > GRID_LIMIT {
            return Err(Error::GridTooLarge {
                points,
                limit: GRID_LIMIT,
            });
        }
        Ok(())
    }

    pub fn point_count(&self) -> u128 {
        self.ranges.iter().map(|r| r.steps as u128).product()
    }

    /// Parameters of grid point `index`; the last parameter varies fastest.
    pub fn point(&self, index: usize, axes: &[Vec<f64>]) -> Vec<f64> {
        let mut rest = index;
        let mut out = vec![0.0; axes.len()];
        for (slot, axis) in out.iter_mut().zip(axes).rev() {
            *slot = axis[rest % axis.len()];
            rest /= axis.len();
        }
        out
    }
}

/// Column names `J12, J23, ..., kappa`.
pub fn parameter_names(n_rings: usize) -> Vec<String> {
    (1..n_rings)
        .map(|n| format!("J{}{}", n, n + 1))
        .chain(std::iter::once("kappa".to_string()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub params: Vec<f64>,
    /// `NaN` where the objective could not be evaluated.
    pub beta: f64,
}

/// Evaluates every grid point on the current rayon pool. Output order is
/// the grid order regardless of scheduling.
pub fn grid_sweep(spec: &SweepSpec) -> Result<Vec<SweepPoint>> {
    spec.validate()?;
    let axes: Vec<Vec<f64>> = spec.ranges.iter().map(ParamRange::values).collect();
    let count = spec.point_count() as usize;
    Ok((0..count)
        .into_par_iter()
        .map(|i| {
            let params = spec.point(i, &axes);
            let beta = evaluate(&params).map_or(f64::NAN, |e| e.beta);
            SweepPoint { params, beta }
        })
        .collect())
}

/// Point with the largest finite β.
pub fn best_point(points: &[SweepPoint]) -> Option<&SweepPoint> {
    points
        .iter()
        .filter(|p| p.beta.is_finite())
        .max_by(|a, b| a.beta.total_cmp(&b.beta))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RefineOptions {
    pub max_evaluations: usize,
    pub diameter_tolerance: f64,
    pub spread_tolerance: f64,
    /// Relative size of the initial simplex.
    pub initial_step: f64,
    /// Seed of the boundary-restart perturbation.
    pub seed: u64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 2000,
            diameter_tolerance: 1e-4,
            spread_tolerance: 1e-7,
            initial_step: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub evaluation: usize,
    pub params: Vec<f64>,
    /// `None` outside the bounds.
    pub beta: Option<f64>,
    pub best_beta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimumReport {
    pub n_rings: usize,
    pub parameter_names: Vec<String>,
    pub start: Vec<f64>,
    pub best_params: Vec<f64>,
    pub best_beta: f64,
    /// β of the integrated (not closed-form) pulse at the optimum.
    pub ode_beta: f64,
    pub eigenvalues_re: Vec<f64>,
    pub eigenvalues_im: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
    pub restarted: bool,
    pub warning: Option<String>,
    pub trace: Vec<TraceEntry>,
}

struct Counter<'a> {
    trace: &'a mut Vec<TraceEntry>,
    best: f64,
}

impl Counter<'_> {
    /// Negated objective; `+inf` outside the bounds.
    fn cost(&mut self, x: &[f64]) -> f64 {
        let beta = beta_objective(x);
        if let Some(b) = beta {
            self.best = self.best.max(b);
        }
        self.trace.push(TraceEntry {
            evaluation: self.trace.len() + 1,
            params: x.to_vec(),
            beta,
            best_beta: self.best,
        });
        beta.map_or(f64::INFINITY, |b| -b)
    }

    fn count(&self) -> usize {
        self.trace.len()
    }
}

struct SimplexResult {
    x: Vec<f64>,
    cost: f64,
    converged: bool,
}

fn nelder_mead(start: &[f64], opts: &RefineOptions, counter: &mut Counter<'_>) -> SimplexResult {
    let n = start.len();
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut x = start.to_vec();
        x[i] *= if x[i] * (1.0 + opts.initial_step) <= MAX_RATIO {
            1.0 + opts.initial_step
        } else {
            1.0 - opts.initial_step
        };
        simplex.push(x);
    }
    let mut costs: Vec<f64> = simplex.iter().map(|x| counter.cost(x)).collect();
    let combine = |a: &[f64], b: &[f64], t: f64| -> Vec<f64> {
        a.iter().zip(b).map(|(p, q)| p + t * (q - p)).collect()
    };
    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&i, &j| costs[i].total_cmp(&costs[j]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        costs = order.iter().map(|&i| costs[i]).collect();

        let diameter = simplex[1..]
            .iter()
            .map(|x| {
                x.iter()
                    .zip(&simplex[0])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max);
        let spread = costs[n] - costs[0];
        if diameter < opts.diameter_tolerance && spread < opts.spread_tolerance {
            return SimplexResult {
                x: simplex.swap_remove(0),
                cost: costs[0],
                converged: true,
            };
        }
        if counter.count() >= opts.max_evaluations {
            return SimplexResult {
                x: simplex.swap_remove(0),
                cost: costs[0],
                converged: false,
            };
        }

        let mut centroid = vec![0.0; n];
        for x in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let worst = simplex[n].clone();
        let xr = combine(&centroid, &worst, -1.0);
        let fr = counter.cost(&xr);
        if fr < costs[0] {
            let xe = combine(&centroid, &worst, -2.0);
            let fe = counter.cost(&xe);
            if fe < fr {
                simplex[n] = xe;
                costs[n] = fe;
            } else {
                simplex[n] = xr;
                costs[n] = fr;
            }
            continue;
        }
        if fr < costs[n - 1] {
            simplex[n] = xr;
            costs[n] = fr;
            continue;
        }
        let (xc, fc, accept) = if fr < costs[n] {
            let xc = combine(&centroid, &xr, 0.5);
            let fc = counter.cost(&xc);
            let ok = fc <= fr;
            (xc, fc, ok)
        } else {
            let xc = combine(&centroid, &worst, 0.5);
            let fc = counter.cost(&xc);
            let ok = fc < costs[n];
            (xc, fc, ok)
        };
        if accept {
            simplex[n] = xc;
            costs[n] = fc;
            continue;
        }
        for i in 1..=n {
            simplex[i] = combine(&simplex[0], &simplex[i], 0.5);
            costs[i] = counter.cost(&simplex[i]);
        }
    }
}

fn on_boundary(x: &[f64]) -> bool {
    x.iter().any(|&v| !(1e-2..=MAX_RATIO * (1.0 - 1e-3)).contains(&v))
}

/// Nelder-Mead on `-β` from `start` with default options.
pub fn refine(start: &[f64], n_rings: usize) -> Result<OptimumReport> {
    refine_with(start, n_rings, &RefineOptions::default())
}

pub fn refine_with(start: &[f64], n_rings: usize, opts: &RefineOptions) -> Result<OptimumReport> {
    if start.len() != n_rings || n_rings == 0 {
        return Err(Error::validation(
            "start",
            format!("{n_rings} rings need {n_rings} ratios, got {}", start.len()),
        ));
    }
    if start.iter().any(|&r| !(r > 0.0 && r <= MAX_RATIO)) {
        return Err(Error::validation("start", format!("ratios must lie in (0, {MAX_RATIO}]")));
    }
    let mut trace = Vec::new();
    let mut counter = Counter {
        trace: &mut trace,
        best: f64::NEG_INFINITY,
    };
    let mut result = nelder_mead(start, opts, &mut counter);
    let mut restarted = false;
    if result.converged && on_boundary(&result.x) && counter.count() < opts.max_evaluations {
        restarted = true;
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        let perturbed: Vec<f64> = result
            .x
            .iter()
            .map(|&v| (v * (1.0 + 0.05 * rng.random_range(-1.0..=1.0))).clamp(1e-6, MAX_RATIO))
            .collect();
        let second = nelder_mead(&perturbed, opts, &mut counter);
        if second.cost < result.cost {
            result = second;
        } else {
            result.converged &= second.converged;
        }
    }
    let evaluations = counter.count();
    if !result.cost.is_finite() {
        return Err(Error::validation("start", "objective undefined everywhere the simplex went"));
    }
    let warning = (!result.converged).then(|| {
        format!("no convergence after {evaluations} evaluations; returning the best point found")
    });

    let config = ratio_config(&result.x)?;
    let h = build_reduced_hamiltonian(&config)?;
    let (eigen_re, eigen_im, gamma) = match crate::spectral::eigendecompose(&h) {
        Ok(eig) => {
            let gamma = eig.slowest_decay();
            (
                eig.eigenvalues.iter().map(|w| w.re).collect(),
                eig.eigenvalues.iter().map(|w| w.im).collect(),
                gamma,
            )
        }
        Err(_) => {
            let w = eigenvalues(&h.entries)?;
            let gamma = w.iter().map(|w| -w.im).fold(f64::INFINITY, f64::min);
            (w.iter().map(|w| w.re).collect(), w.iter().map(|w| w.im).collect(), gamma)
        }
    };
    let ode_pulse = evolve_emission(&config, &objective_grid(gamma)?)?.outputs.swap_remove(0);
    let ode_beta = symmetry_factor(&ode_pulse)?.beta * ode_pulse.norm.min(1.0);

    Ok(OptimumReport {
        n_rings,
        parameter_names: parameter_names(n_rings),
        start: start.to_vec(),
        best_params: result.x,
        best_beta: -result.cost,
        ode_beta,
        eigenvalues_re: eigen_re,
        eigenvalues_im: eigen_im,
        evaluations,
        converged: result.converged,
        restarted,
        warning,
        trace,
    })
}
