//! Time integration of `dc/dt = -i H c + d` for emission (no drive) and
//! absorption (drive through the last ring) in both models.
//!
//! Besides the amplitudes, the integrated state carries running integrals of
//! every probability flux (outgoing waveguide field, emitter decay, ring
//! radiation, incoming drive), so the probability balance is checked against
//! quantities computed by the same integrator rather than by a quadrature of
//! resampled data.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, TlsPeak};
use crate::model::{build_full_hamiltonian, build_reduced_hamiltonian, EffectiveHamiltonian, ModelKind, NodeConfig};
use crate::ode::{self, Sampling, System, Tolerances};

const I: C64 = C64::new(0.0, 1.0);
const ZERO: C64 = C64::new(0.0, 0.0);

/// Default emission window, in units of `1/g`.
pub const DEFAULT_WINDOW: f64 = 20.0;
/// Default number of output samples over [`DEFAULT_WINDOW`].
pub const DEFAULT_SAMPLES: usize = 4096;
/// Population left in the node at the end of an emission window above which a
/// warning is attached.
pub const RESIDUAL_WARNING: f64 = 1e-6;

/// Uniform output time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t_start: f64,
    pub t_end: f64,
    pub n_samples: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_samples: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_end <= t_start {
            return Err(Error::validation(
                "grid",
                format!("need t_end > t_start, got [{t_start}, {t_end}]"),
            ));
        }
        if n_samples < 2 {
            return Err(Error::validation("grid", format!("need at least 2 samples, got {n_samples}")));
        }
        Ok(Self {
            t_start,
            t_end,
            n_samples,
        })
    }

    /// `[0, 20/g]` with 4096 samples.
    pub fn default_emission() -> Self {
        Self {
            t_start: 0.0,
            t_end: DEFAULT_WINDOW,
            n_samples: DEFAULT_SAMPLES,
        }
    }

    /// Grid starting at `t_start` with a fixed sample spacing covering at
    /// least `duration`.
    pub fn with_step(t_start: f64, duration: f64, step: f64) -> Result<Self> {
        let intervals = (duration / step - 1e-9).ceil().max(1.0) as usize;
        Self::new(t_start, t_start + intervals as f64 * step, intervals + 1)
    }

    pub fn step(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_samples - 1) as f64
    }

    pub fn duration(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn time(&self, k: usize) -> f64 {
        if k + 1 == self.n_samples {
            self.t_end
        } else {
            self.t_start + k as f64 * self.step()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_samples).map(|k| self.time(k)).collect()
    }

    pub fn shifted(&self, delay: f64) -> Self {
        Self {
            t_start: self.t_start + delay,
            t_end: self.t_end + delay,
            n_samples: self.n_samples,
        }
    }

    /// Same sample count and bounds up to rounding.
    pub fn matches(&self, other: &TimeGrid) -> bool {
        let tol = 1e-12 * self.duration().max(self.t_start.abs()).max(1.0);
        self.n_samples == other.n_samples
            && (self.t_start - other.t_start).abs() <= tol
            && (self.t_end - other.t_end).abs() <= tol
    }

    pub fn ensure_matches(&self, other: &TimeGrid) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!("{self:?} vs {other:?}")))
        }
    }
}

/// Uniformly sampled complex waveguide amplitude. `|e(t)|^2 dt` is the
/// probability of finding the photon in `[t, t + dt]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    pub grid: TimeGrid,
    pub samples: Vec<C64>,
    /// Trapezoid `∫|e|² dt`.
    pub norm: f64,
}

impl Pulse {
    pub fn new(grid: TimeGrid, samples: Vec<C64>) -> Result<Self> {
        if samples.len() != grid.n_samples {
            return Err(Error::validation(
                "pulse",
                format!("{} samples for a {}-point grid", samples.len(), grid.n_samples),
            ));
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::validation("pulse", "samples must be finite"));
        }
        let norm = trapezoid(samples.iter().map(|z| z.norm_sqr()), grid.step());
        Ok(Self { grid, samples, norm })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> C64) -> Result<Self> {
        let samples = grid.times().into_iter().map(f).collect();
        Self::new(grid, samples)
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self {
            grid,
            samples: vec![ZERO; grid.n_samples],
            norm: 0.0,
        }
    }

    /// Unit-norm Gaussian with `|e|^2` of standard deviation `width`.
    pub fn gaussian(grid: TimeGrid, center: f64, width: f64) -> Result<Self> {
        if !(width > 0.0) {
            return Err(Error::validation("width", "must be > 0"));
        }
        let amp = (2.0 * std::f64::consts::PI * width * width).powf(-0.25);
        Self::from_fn(grid, |t| {
            C64::new(amp * (-(t - center).powi(2) / (4.0 * width * width)).exp(), 0.0)
        })
    }

    /// `sqrt(rate) exp(-rate t / 2)` for `t >= 0`, zero before.
    pub fn one_sided_exponential(grid: TimeGrid, rate: f64) -> Result<Self> {
        if !(rate > 0.0) {
            return Err(Error::validation("rate", "must be > 0"));
        }
        Self::from_fn(grid, |t| {
            if t >= 0.0 {
                C64::new(rate.sqrt() * (-0.5 * rate * t).exp(), 0.0)
            } else {
                ZERO
            }
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Same samples on a grid moved later by `delay`.
    pub fn shifted(&self, delay: f64) -> Self {
        Self {
            grid: self.grid.shifted(delay),
            samples: self.samples.clone(),
            norm: self.norm,
        }
    }

    pub fn scaled(&self, factor: C64) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().map(|z| z * factor).collect(),
            norm: self.norm * factor.norm_sqr(),
        }
    }

    /// `conj(e(t_start + t_end - t))` on the same grid.
    pub fn time_reversed_conjugate(&self) -> Self {
        Self {
            grid: self.grid,
            samples: self.samples.iter().rev().map(|z| z.conj()).collect(),
            norm: self.norm,
        }
    }

    /// Sample-wise `a p + b q`. Grids must match.
    pub fn combine(a: C64, p: &Pulse, b: C64, q: &Pulse) -> Result<Self> {
        p.grid.ensure_matches(&q.grid)?;
        let samples = p.samples.iter().zip(&q.samples).map(|(x, y)| a * x + b * y).collect();
        Self::new(p.grid, samples)
    }

    /// Catmull-Rom cubic interpolation; zero outside the grid.
    pub fn value_at(&self, t: f64) -> C64 {
        let g = &self.grid;
        let dt = g.step();
        let slack = 1e-9 * dt;
        if t < g.t_start - slack || t > g.t_end + slack {
            return ZERO;
        }
        let n = self.samples.len();
        let x = ((t - g.t_start) / dt).clamp(0.0, (n - 1) as f64);
        let k = (x.floor() as usize).min(n - 2);
        let u = x - k as f64;
        let s = &self.samples;
        let p1 = s[k];
        let p2 = s[k + 1];
        let p0 = if k > 0 { s[k - 1] } else { p1 * 2.0 - p2 };
        let p3 = if k + 2 < n { s[k + 2] } else { p2 * 2.0 - p1 };
        let u2 = u * u;
        let u3 = u2 * u;
        (p1 * 2.0
            + (p2 - p0) * u
            + (p0 * 2.0 - p1 * 5.0 + p2 * 4.0 - p3) * u2
            + (p1 * 3.0 - p0 - p2 * 3.0 + p3) * u3)
            * 0.5
    }

    /// Linear interpolation of the samples; zero outside the grid.
    pub fn linear_at(&self, t: f64) -> C64 {
        interp_linear(&self.samples, &self.grid, t)
    }
}

pub(crate) fn interp_linear<T>(samples: &[T], grid: &TimeGrid, t: f64) -> T
where
    T: Copy + Default + std::ops::Mul<f64, Output = T> + std::ops::Add<Output = T>,
{
    let dt = grid.step();
    let slack = 1e-9 * dt;
    if t < grid.t_start - slack || t > grid.t_end + slack {
        return T::default();
    }
    let n = samples.len();
    let x = ((t - grid.t_start) / dt).clamp(0.0, (n - 1) as f64);
    let k = (x.floor() as usize).min(n - 2);
    let u = x - k as f64;
    samples[k] * (1.0 - u) + samples[k + 1] * u
}

/// Composite trapezoid rule on a uniform grid.
pub fn trapezoid(values: impl IntoIterator<Item = f64>, dt: f64) -> f64 {
    let mut it = values.into_iter();
    let Some(first) = it.next() else {
        return 0.0;
    };
    let mut sum = 0.5 * first;
    let mut last = first;
    let mut count = 1;
    for v in it {
        sum += v;
        last = v;
        count += 1;
    }
    if count == 1 {
        return 0.0;
    }
    (sum - 0.5 * last) * dt
}

/// Running probability integrals, one value per output sample.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LeakIntegrals {
    /// `∫ |outgoing field|^2 dt`, summed over output channels.
    pub waveguide: Vec<f64>,
    /// `∫ Γ0 |c0|^2 dt`.
    pub gamma0: Vec<f64>,
    /// `∫ Γc Σ_rings |c|^2 dt`.
    pub gamma_c: Vec<f64>,
    /// `∫ |drive|^2 dt`, summed over input channels.
    pub incoming: Vec<f64>,
}

/// Direction of a waveguide channel in the full model. `Plus` couples to
/// `b_N`, `Minus` to `a_N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Plus,
    Minus,
}

/// Drive for the full model.
#[derive(Debug, Clone, Copy)]
pub enum FullDrive<'a> {
    /// Emission from an excited emitter, no input field.
    Emission,
    /// One input channel; only the co-propagating last-ring mode is driven.
    Directional(Direction, &'a Pulse),
    /// Both channels driven, e.g. by the two outputs of an identical sender.
    Both { plus: &'a Pulse, minus: &'a Pulse },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: TimeGrid,
    pub model: ModelKind,
    pub basis_labels: Vec<String>,
    /// Emitter amplitude.
    pub c0: Vec<C64>,
    /// Ring amplitudes: `c_1..c_N` (reduced) or `a_1..a_N, b_1..b_N` (full).
    pub rings: Vec<Vec<C64>>,
    /// Outgoing waveguide amplitude(s): `[e]` (reduced) or `[e_plus, e_minus]`
    /// (full). With a drive these are `f - i sqrt(kappa) c_N`.
    pub outputs: Vec<Pulse>,
    pub leaks: LeakIntegrals,
    /// Emitter population maximum, for driven runs.
    pub peak: Option<TlsPeak>,
    pub warnings: Vec<String>,
}

impl Trajectory {
    /// The (first) emitted pulse.
    pub fn emitted(&self) -> &Pulse {
        &self.outputs[0]
    }

    pub fn tls_population(&self) -> Vec<f64> {
        self.c0.iter().map(|z| z.norm_sqr()).collect()
    }

    /// `Σ_j |c_j(t)|^2` over emitter and rings.
    pub fn node_population(&self, k: usize) -> f64 {
        self.c0[k].norm_sqr() + self.rings.iter().map(|r| r[k].norm_sqr()).sum::<f64>()
    }

    /// Node population plus everything that left it, minus everything that
    /// came in. Equals the initial population for exact dynamics.
    pub fn probability_balance(&self, k: usize) -> f64 {
        let l = &self.leaks;
        self.node_population(k) + l.waveguide[k] + l.gamma0[k] + l.gamma_c[k] - l.incoming[k]
    }
}

/// Integrator settings shared by the evolution routines.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EvolveOptions {
    pub tolerances: Tolerances,
}

struct Port<'a> {
    index: usize,
    drive: Option<&'a Pulse>,
}

struct NodeSystem<'a> {
    h: &'a EffectiveHamiltonian,
    sqrt_kappa: f64,
    gamma0: f64,
    gamma_c: f64,
    ports: Vec<Port<'a>>,
}

impl NodeSystem<'_> {
    fn amplitude_dim(&self) -> usize {
        self.h.dim()
    }
}

const EXTRA: usize = 4; // waveguide, gamma0, gamma_c, incoming

impl System for NodeSystem<'_> {
    fn dim(&self) -> usize {
        self.h.dim() + EXTRA
    }

    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]) {
        let d = self.amplitude_dim();
        let (c, acc) = y.split_at(d);
        let (dc, dacc) = dy.split_at_mut(d);
        self.h.entries.apply(c, dc);
        for v in dc.iter_mut() {
            *v *= -I;
        }
        let mut out_flux = 0.0;
        let mut in_flux = 0.0;
        for port in &self.ports {
            let f = port.drive.map_or(ZERO, |p| p.value_at(t));
            dc[port.index] += -I * self.sqrt_kappa * f;
            let out = f - I * self.sqrt_kappa * c[port.index];
            out_flux += out.norm_sqr();
            in_flux += f.norm_sqr();
        }
        let _ = acc;
        dacc[0] = C64::new(out_flux, 0.0);
        dacc[1] = C64::new(self.gamma0 * c[0].norm_sqr(), 0.0);
        dacc[2] = C64::new(self.gamma_c * c[1..].iter().map(|z| z.norm_sqr()).sum::<f64>(), 0.0);
        dacc[3] = C64::new(in_flux, 0.0);
    }
}

fn run(
    config: &NodeConfig,
    h: &EffectiveHamiltonian,
    grid: &TimeGrid,
    drives: Vec<Option<&Pulse>>,
    initial_tls: C64,
    options: &EvolveOptions,
) -> Result<Trajectory> {
    let outputs_idx = h.output_indices();
    debug_assert_eq!(outputs_idx.len(), drives.len());
    let driven = drives.iter().any(Option::is_some);
    let ports = outputs_idx
        .iter()
        .zip(&drives)
        .map(|(&index, &drive)| Port { index, drive })
        .collect();
    let sys = NodeSystem {
        h,
        sqrt_kappa: config.kappa.sqrt(),
        gamma0: config.gamma0,
        gamma_c: config.gamma_c,
        ports,
    };
    let d = h.dim();
    let mut y0 = vec![ZERO; d + EXTRA];
    y0[0] = initial_tls;
    let times = grid.times();
    let sampling = if driven {
        Sampling::LandOnSamples
    } else {
        Sampling::Dense
    };
    let flat = ode::integrate(&sys, &y0, &times, options.tolerances, sampling)?;
    let stride = d + EXTRA;
    let series = |j: usize| -> Vec<C64> { flat.chunks(stride).map(|s| s[j]).collect() };
    let real = |j: usize| -> Vec<f64> { flat.chunks(stride).map(|s| s[j].re).collect() };
    let c0 = series(0);
    let rings: Vec<Vec<C64>> = (1..d).map(series).collect();
    let sqrt_kappa = config.kappa.sqrt();
    let mut outputs = Vec::with_capacity(outputs_idx.len());
    for (&idx, drive) in outputs_idx.iter().zip(&drives) {
        let amp = series(idx);
        let samples = amp
            .iter()
            .enumerate()
            .map(|(k, c)| {
                let f = drive.map_or(ZERO, |p| p.value_at(times[k]));
                f - I * sqrt_kappa * c
            })
            .collect();
        outputs.push(Pulse::new(*grid, samples)?);
    }
    let leaks = LeakIntegrals {
        waveguide: real(d),
        gamma0: real(d + 1),
        gamma_c: real(d + 2),
        incoming: real(d + 3),
    };
    let mut traj = Trajectory {
        grid: *grid,
        model: h.model_kind,
        basis_labels: h.basis_labels.clone(),
        c0,
        rings,
        outputs,
        leaks,
        peak: None,
        warnings: Vec::new(),
    };
    if driven {
        traj.peak = Some(metrics::tls_peak(&traj));
    } else {
        let residual = traj.node_population(grid.n_samples - 1);
        if residual > RESIDUAL_WARNING {
            traj.warnings.push(format!(
                "population {residual:.3e} still in the node at t = {}; window too short",
                grid.t_end
            ));
        }
    }
    Ok(traj)
}

/// Emission with the emitter excited at `grid.t_start` and empty rings.
pub fn evolve_emission(config: &NodeConfig, grid: &TimeGrid) -> Result<Trajectory> {
    evolve_emission_with(config, grid, &EvolveOptions::default())
}

pub fn evolve_emission_with(config: &NodeConfig, grid: &TimeGrid, options: &EvolveOptions) -> Result<Trajectory> {
    let h = build_reduced_hamiltonian(config)?;
    run(config, &h, grid, vec![None], C64::new(1.0, 0.0), options)
}

/// Absorption of `incoming` by an empty node, on the pulse's own grid.
pub fn evolve_driven(config: &NodeConfig, incoming: &Pulse) -> Result<Trajectory> {
    evolve_driven_with(config, incoming, &EvolveOptions::default())
}

pub fn evolve_driven_with(config: &NodeConfig, incoming: &Pulse, options: &EvolveOptions) -> Result<Trajectory> {
    let h = build_reduced_hamiltonian(config)?;
    run(config, &h, &incoming.grid, vec![Some(incoming)], ZERO, options)
}

/// Full clockwise/counterclockwise model. Outputs are `[e_plus, e_minus]`.
pub fn evolve_full(config: &NodeConfig, grid: &TimeGrid, drive: FullDrive<'_>) -> Result<Trajectory> {
    evolve_full_with(config, grid, drive, &EvolveOptions::default())
}

pub fn evolve_full_with(
    config: &NodeConfig,
    grid: &TimeGrid,
    drive: FullDrive<'_>,
    options: &EvolveOptions,
) -> Result<Trajectory> {
    let h = build_full_hamiltonian(config)?;
    let (drives, tls) = match drive {
        FullDrive::Emission => (vec![None, None], C64::new(1.0, 0.0)),
        FullDrive::Directional(dir, pulse) => {
            grid.ensure_matches(&pulse.grid)?;
            match dir {
                Direction::Plus => (vec![Some(pulse), None], ZERO),
                Direction::Minus => (vec![None, Some(pulse)], ZERO),
            }
        }
        FullDrive::Both { plus, minus } => {
            grid.ensure_matches(&plus.grid)?;
            grid.ensure_matches(&minus.grid)?;
            (vec![Some(plus), Some(minus)], ZERO)
        }
    };
    run(config, &h, grid, drives, tls, options)
}
