//! Sender emission, ideal waveguide delay and receiver absorption.
//!
//! Both configs are rescaled by the sender's `g`, so delays, windows and all
//! reported times are in units of `1/g_sender`.

use serde::{Deserialize, Serialize};

use crate::dynamics::{
    evolve_driven_with, evolve_emission_with, evolve_full_with, interp_linear, EvolveOptions, FullDrive, Pulse,
    TimeGrid, Trajectory, DEFAULT_SAMPLES, DEFAULT_WINDOW,
};
use crate::error::{Error, Result};
use crate::metrics::{mirror_mismatch, success_rate, symmetry_factor};
use crate::model::{ModelKind, NodeConfig};

pub const DEFAULT_DELAY: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransferOptions {
    pub delay: f64,
    /// Each node is simulated over `2 * window`.
    pub window: f64,
    /// Samples per `window`; the node grids have `2 * (samples - 1) + 1`.
    pub samples: usize,
    pub model: ModelKind,
    pub evolve: EvolveOptions,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self {
            delay: DEFAULT_DELAY,
            window: DEFAULT_WINDOW,
            samples: DEFAULT_SAMPLES,
            model: ModelKind::Reduced,
            evolve: EvolveOptions::default(),
        }
    }
}

/// Where the excitation is when the receiving emitter peaks. With `F` these
/// add up to one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    pub sender_gamma0: f64,
    pub sender_gamma_c: f64,
    /// Population still in the sender at the end of its window.
    pub sender_residual: f64,
    /// Emitted but not yet absorbed or reflected at the peak time.
    pub not_arrived: f64,
    pub receiver_gamma0: f64,
    pub receiver_gamma_c: f64,
    /// Receiver ring population at the peak.
    pub receiver_rings: f64,
    /// Field leaving the receiver back into the waveguide before the peak.
    pub reflected: f64,
}

impl LossBudget {
    pub fn total(&self) -> f64 {
        self.sender_gamma0
            + self.sender_gamma_c
            + self.sender_residual
            + self.not_arrived
            + self.receiver_gamma0
            + self.receiver_gamma_c
            + self.receiver_rings
            + self.reflected
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransferReport {
    pub sender: NodeConfig,
    pub receiver: NodeConfig,
    pub delay: f64,
    pub model: ModelKind,
    /// Sender output as it leaves the sender (before the delay). For the full
    /// model, the sum of both directions' intensities is in `emitted_total`.
    pub emitted: Vec<Pulse>,
    pub emitted_norm: f64,
    /// Symmetry factor of the (first) emitted pulse.
    pub beta: f64,
    pub success_rate: f64,
    pub t_peak: f64,
    pub sender_trajectory: Trajectory,
    pub receiver_trajectory: Trajectory,
    pub loss_budget: LossBudget,
    /// Largest deviation between the sender decay and the mirrored receiver rise.
    pub mirror_mismatch: f64,
    pub warnings: Vec<String>,
}

/// Serializable summary of a [`TransferReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSummary {
    pub model: ModelKind,
    pub sender: NodeConfig,
    pub receiver: NodeConfig,
    pub delay: f64,
    #[serde(rename = "F")]
    pub success_rate: f64,
    pub t_peak: f64,
    pub beta: f64,
    pub emitted_norm: f64,
    pub loss_budget: LossBudget,
    pub budget_closure: f64,
    pub mirror_mismatch: f64,
    pub warnings: Vec<String>,
}

impl TransferReport {
    pub fn summary(&self) -> TransferSummary {
        TransferSummary {
            model: self.model,
            sender: self.sender.clone(),
            receiver: self.receiver.clone(),
            delay: self.delay,
            success_rate: self.success_rate,
            t_peak: self.t_peak,
            beta: self.beta,
            emitted_norm: self.emitted_norm,
            loss_budget: self.loss_budget,
            budget_closure: self.success_rate + self.loss_budget.total() - 1.0,
            mirror_mismatch: self.mirror_mismatch,
            warnings: self.warnings.clone(),
        }
    }

    /// Sender, pulse in flight and receiver on one time axis `[0, 2 window + delay]`:
    /// `(t, sender_tls, sender_rings, pulse_intensity, receiver_tls, receiver_rings)`.
    /// `pulse_intensity` is the emitted `|e|^2` in flight, i.e. evaluated at
    /// `t - delay / 2` so that it sits between the two nodes.
    pub fn combined_rows(&self) -> Vec<[f64; 6]> {
        let s = &self.sender_trajectory;
        let r = &self.receiver_trajectory;
        let dt = s.grid.step();
        let end = r.grid.t_end.max(s.grid.t_end);
        let grid = TimeGrid::with_step(s.grid.t_start, end - s.grid.t_start, dt).expect("non-empty span");
        let pop = |t: &Trajectory| -> (Vec<f64>, Vec<f64>) {
            let tls = t.tls_population();
            let rings = (0..t.grid.n_samples)
                .map(|k| t.rings.iter().map(|c| c[k].norm_sqr()).sum())
                .collect();
            (tls, rings)
        };
        let (s_tls, s_rings) = pop(s);
        let (r_tls, r_rings) = pop(r);
        let intensity: Vec<f64> = (0..s.grid.n_samples)
            .map(|k| self.emitted.iter().map(|p| p.samples[k].norm_sqr()).sum())
            .collect();
        grid.times()
            .into_iter()
            .map(|t| {
                [
                    t,
                    interp_linear(&s_tls, &s.grid, t),
                    interp_linear(&s_rings, &s.grid, t),
                    interp_linear(&intensity, &s.grid, t - 0.5 * self.delay),
                    interp_linear(&r_tls, &r.grid, t),
                    interp_linear(&r_rings, &r.grid, t),
                ]
            })
            .collect()
    }
}

/// Transfer between two nodes with default options and the given delay.
pub fn run_transfer(sender: &NodeConfig, receiver: &NodeConfig, delay: f64) -> Result<TransferReport> {
    run_transfer_with(
        sender,
        receiver,
        &TransferOptions {
            delay,
            ..TransferOptions::default()
        },
    )
}

pub fn run_transfer_with(sender: &NodeConfig, receiver: &NodeConfig, opts: &TransferOptions) -> Result<TransferReport> {
    sender.validate()?;
    receiver.validate()?;
    if !(opts.delay >= 0.0 && opts.delay.is_finite()) {
        return Err(Error::validation("delay", "must be finite and >= 0"));
    }
    if !(opts.window > 0.0) || opts.samples < 2 {
        return Err(Error::validation("window", "need a positive window and at least 2 samples"));
    }
    let scale = 1.0 / sender.g;
    let s_cfg = sender.scaled(scale);
    let r_cfg = receiver.scaled(scale);
    let grid = TimeGrid::new(0.0, 2.0 * opts.window, 2 * (opts.samples - 1) + 1)?;
    let rgrid = grid.shifted(opts.delay);

    let (sender_traj, receiver_traj, emitted) = match opts.model {
        ModelKind::Reduced => {
            let s = evolve_emission_with(&s_cfg, &grid, &opts.evolve)?;
            let pulse = s.outputs[0].shifted(opts.delay);
            let r = evolve_driven_with(&r_cfg, &pulse, &opts.evolve)?;
            let emitted = s.outputs.clone();
            (s, r, emitted)
        }
        ModelKind::Full => {
            let s = evolve_full_with(&s_cfg, &grid, FullDrive::Emission, &opts.evolve)?;
            let plus = s.outputs[0].shifted(opts.delay);
            let minus = s.outputs[1].shifted(opts.delay);
            let r = evolve_full_with(
                &r_cfg,
                &rgrid,
                FullDrive::Both {
                    plus: &plus,
                    minus: &minus,
                },
                &opts.evolve,
            )?;
            let emitted = s.outputs.clone();
            (s, r, emitted)
        }
    };

    let peak = success_rate(&receiver_traj);
    let k = peak.index;
    let last = grid.n_samples - 1;
    let sl = &sender_traj.leaks;
    let rl = &receiver_traj.leaks;
    let emitted_norm = sl.waveguide[last];
    let budget = LossBudget {
        sender_gamma0: sl.gamma0[last],
        sender_gamma_c: sl.gamma_c[last],
        sender_residual: sender_traj.node_population(last),
        not_arrived: emitted_norm - rl.incoming[k],
        receiver_gamma0: rl.gamma0[k],
        receiver_gamma_c: rl.gamma_c[k],
        receiver_rings: receiver_traj.node_population(k) - receiver_traj.c0[k].norm_sqr(),
        reflected: rl.waveguide[k],
    };
    // shape of the combined pulse for the full model
    let shape = if emitted.len() == 1 {
        symmetry_factor(&emitted[0])?
    } else {
        let samples = (0..grid.n_samples)
            .map(|i| {
                let intensity: f64 = emitted.iter().map(|p| p.samples[i].norm_sqr()).sum();
                num_complex::Complex64::new(intensity.sqrt(), 0.0)
            })
            .collect();
        symmetry_factor(&Pulse::new(grid, samples)?)?
    };
    let mut warnings = sender_traj.warnings.clone();
    if k + 1 == receiver_traj.grid.n_samples {
        warnings.push("receiver population still rising at the end of its window".to_string());
    }

    Ok(TransferReport {
        sender: sender.clone(),
        receiver: receiver.clone(),
        delay: opts.delay,
        model: opts.model,
        mirror_mismatch: mirror_mismatch(&sender_traj, &receiver_traj),
        emitted,
        emitted_norm,
        beta: shape.beta,
        success_rate: peak.population,
        t_peak: peak.time,
        sender_trajectory: sender_traj,
        receiver_trajectory: receiver_traj,
        loss_budget: budget,
        warnings,
    })
}
