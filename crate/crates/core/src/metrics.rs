//! Pulse shape and transfer figures of merit.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64 as C64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use serde::{Deserialize, Serialize};

use crate::dynamics::{interp_linear, Pulse, Trajectory};
use crate::error::{Error, Result};

/// Golden-section tolerance on the reflection center.
pub const T0_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymmetryResult {
    pub beta: f64,
    /// Reflection center maximizing the overlap.
    pub t0_star: f64,
    /// Norm of the pulse as given.
    pub pulse_norm: f64,
    /// Whether the pulse had to be rescaled to unit norm first.
    pub normalized: bool,
}

/// Emitter population maximum of a driven run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TlsPeak {
    pub population: f64,
    pub time: f64,
    /// Sample index nearest the maximum.
    pub index: usize,
}

type FftPair = (Arc<dyn RealToComplex<f64>>, Arc<dyn ComplexToReal<f64>>);

thread_local! {
    static PLANNER: RefCell<RealFftPlanner<f64>> = RefCell::new(RealFftPlanner::new());
}

fn fft_pair(len: usize) -> FftPair {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(len), p.plan_fft_inverse(len))
    })
}

/// Trapezoid overlap `Σ w_j a_j a_{s-j}` for reflection index `s` (that is,
/// `2 t0 = 2 t_start + s dt`).
fn overlap_at_index(a: &[f64], s: usize) -> f64 {
    let n = a.len();
    let lo = s.saturating_sub(n - 1);
    let hi = s.min(n - 1);
    if lo > hi {
        return 0.0;
    }
    let sum: f64 = (lo..=hi).map(|j| a[j] * a[s - j]).sum();
    if lo == hi {
        return 0.0;
    }
    // both trapezoid end weights are a_lo a_hi
    sum - a[lo] * a[hi]
}

/// Exact index sums near the coarse winner, computed once each.
struct OverlapCache<'a> {
    a: &'a [f64],
    first: usize,
    sums: Vec<Option<f64>>,
}

impl<'a> OverlapCache<'a> {
    fn new(a: &'a [f64], first: usize, len: usize) -> Self {
        Self { a, first, sums: vec![None; len] }
    }

    fn index(&mut self, s: usize) -> f64 {
        match s.checked_sub(self.first).filter(|&i| i < self.sums.len()) {
            Some(i) => *self.sums[i].get_or_insert_with(|| overlap_at_index(self.a, s)),
            None => overlap_at_index(self.a, s),
        }
    }

    /// Overlap with the reflection `e(2 t0 - t)` linearly interpolated
    /// between samples; `x = 2 (t0 - t_start) / dt`.
    fn at(&mut self, x: f64) -> f64 {
        let n = self.a.len();
        let x = x.clamp(0.0, (2 * n - 2) as f64);
        let s = (x.floor() as usize).min(2 * n - 3);
        let u = x - s as f64;
        (1.0 - u) * self.index(s) + u * self.index(s + 1)
    }
}

fn self_convolution(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let len = (2 * n - 1).next_power_of_two();
    let (fwd, inv) = fft_pair(len);
    let mut input = fwd.make_input_vec();
    input[..n].copy_from_slice(a);
    let mut spectrum = fwd.make_output_vec();
    fwd.process(&mut input, &mut spectrum).expect("buffer sizes come from the plan");
    for z in spectrum.iter_mut() {
        *z = *z * *z;
    }
    let mut out = inv.make_output_vec();
    inv.process(&mut spectrum, &mut out).expect("buffer sizes come from the plan");
    out.truncate(2 * n - 1);
    out.iter_mut().for_each(|x| *x /= len as f64);
    out
}

/// `β = max_t0 (∫ |e(t) e(2 t0 - t)| dt)^2` on the unit-normalized pulse.
pub fn symmetry_factor(pulse: &Pulse) -> Result<SymmetryResult> {
    if !(pulse.norm > 0.0) {
        return Err(Error::ZeroNorm);
    }
    let dt = pulse.grid.step();
    let scale = (1.0 / pulse.norm).sqrt();
    let a: Vec<f64> = pulse.samples.iter().map(|z| z.norm() * scale).collect();
    let n = a.len();

    // coarse scan: one candidate per half sample step in t0
    let conv = self_convolution(&a);
    let mut best_s = 0;
    let mut best = f64::NEG_INFINITY;
    for (s, &c) in conv.iter().enumerate() {
        let lo = s.saturating_sub(n - 1);
        let corrected = c - a[lo] * a[s - lo];
        if corrected > best {
            best = corrected;
            best_s = s;
        }
    }
    // exact sums around the FFT winner
    let first = best_s.saturating_sub(2);
    let mut cache = OverlapCache::new(&a, first, 5);
    let mut best_x = best_s as f64;
    best = f64::NEG_INFINITY;
    for s in first..=(best_s + 2).min(2 * n - 2) {
        let v = cache.index(s);
        if v > best {
            best = v;
            best_x = s as f64;
        }
    }

    // golden section within half a step of the winner
    let tol = 2.0 * T0_TOLERANCE / dt;
    let (mut lo, mut hi) = ((best_x - 0.5).max(0.0), (best_x + 0.5).min((2 * n - 2) as f64));
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    let mut f1 = cache.at(x1);
    let mut f2 = cache.at(x2);
    while hi - lo > tol {
        if f1 >= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - phi * (hi - lo);
            f1 = cache.at(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + phi * (hi - lo);
            f2 = cache.at(x2);
        }
    }
    let (x_gs, f_gs) = if f1 >= f2 { (x1, f1) } else { (x2, f2) };
    if f_gs > best {
        best = f_gs;
        best_x = x_gs;
    }

    let overlap = best * dt;
    Ok(SymmetryResult {
        beta: overlap * overlap,
        t0_star: pulse.grid.t_start + 0.5 * best_x * dt,
        pulse_norm: pulse.norm,
        normalized: (pulse.norm - 1.0).abs() > 1e-12,
    })
}

/// `∫ conj(p) q dt` by the trapezoid rule.
pub fn pulse_overlap(p: &Pulse, q: &Pulse) -> Result<C64> {
    p.grid.ensure_matches(&q.grid)?;
    let dt = p.grid.step();
    let n = p.samples.len();
    let mut sum = C64::new(0.0, 0.0);
    for (k, (x, y)) in p.samples.iter().zip(&q.samples).enumerate() {
        let w = if k == 0 || k + 1 == n { 0.5 } else { 1.0 };
        sum += x.conj() * y * w;
    }
    Ok(sum * dt)
}

/// Three-point parabolic refinement of a sampled maximum.
pub fn refine_peak(values: &[f64], k: usize, dt: f64) -> (f64, f64) {
    if k == 0 || k + 1 >= values.len() {
        return (values[k], k as f64 * dt);
    }
    let (y0, y1, y2) = (values[k - 1], values[k], values[k + 1]);
    let curvature = y0 - 2.0 * y1 + y2;
    if curvature >= 0.0 {
        return (y1, k as f64 * dt);
    }
    let p = 0.5 * (y0 - y2) / curvature;
    (y1 - 0.25 * (y0 - y2) * p, (k as f64 + p) * dt)
}

pub(crate) fn tls_peak(traj: &Trajectory) -> TlsPeak {
    let pop = traj.tls_population();
    let (k, _) = pop
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &p)| if p > acc.1 { (i, p) } else { acc });
    let (population, offset) = refine_peak(&pop, k, traj.grid.step());
    TlsPeak {
        population,
        time: traj.grid.t_start + offset,
        index: k,
    }
}

/// `F = max_t |c0(t)|^2` of a driven trajectory.
pub fn success_rate(traj: &Trajectory) -> TlsPeak {
    traj.peak.unwrap_or_else(|| tls_peak(traj))
}

/// Largest difference between the sender's emitter decay and the receiver's
/// emitter rise reflected about the midpoint between emission start and
/// absorption peak. Both curves are on the sender time axis.
pub fn mirror_mismatch(sender: &Trajectory, receiver: &Trajectory) -> f64 {
    let peak = success_rate(receiver);
    let t0 = sender.grid.t_start;
    let span = peak.time - t0;
    if span <= 0.0 {
        return 0.0;
    }
    let ps = sender.tls_population();
    let pr = receiver.tls_population();
    let steps = sender.grid.n_samples;
    let mut worst = 0.0_f64;
    for k in 0..steps {
        let tau = t0 + span * k as f64 / (steps - 1) as f64;
        let a = interp_linear(&ps, &sender.grid, tau);
        let b = interp_linear(&pr, &receiver.grid, peak.time - (tau - t0));
        worst = worst.max((a - b).abs());
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::TimeGrid;

    #[test]
    fn gaussian_is_symmetric() {
        let grid = TimeGrid::new(0.0, 20.0, 4096).unwrap();
        let center = grid.time(2000);
        let r = symmetry_factor(&Pulse::gaussian(grid, center, 1.3).unwrap()).unwrap();
        assert!((r.beta - 1.0).abs() < 1e-9, "{}", r.beta);
        assert!((r.t0_star - center).abs() < 1e-6);
        assert!(!r.normalized);
    }

    #[test]
    fn one_sided_exponential() {
        // ∫_0^{2t0} Γ e^{-Γ t0} dt = 2Γ t0 e^{-Γ t0}, maximal at Γ t0 = 1
        let grid = TimeGrid::new(0.0, 40.0, 8192).unwrap();
        let r = symmetry_factor(&Pulse::one_sided_exponential(grid, 1.0).unwrap()).unwrap();
        let exact = 4.0 / std::f64::consts::E.powi(2);
        assert!((r.beta - exact).abs() < 1e-4, "{} vs {exact}", r.beta);
        assert!((r.t0_star - 1.0).abs() < 1e-2);
    }

    #[test]
    fn amplitude_scaling_does_not_change_beta() {
        let grid = TimeGrid::new(0.0, 10.0, 1001).unwrap();
        let p = Pulse::from_fn(grid, |t| C64::new(t * (-t).exp(), 0.0)).unwrap();
        let a = symmetry_factor(&p).unwrap();
        let b = symmetry_factor(&p.scaled(C64::new(0.0, 3.0))).unwrap();
        assert_eq!(a.beta, b.beta);
        assert!(b.normalized);
    }

    #[test]
    fn zero_pulse_rejected() {
        let p = Pulse::zeros(TimeGrid::default_emission());
        assert!(matches!(symmetry_factor(&p), Err(Error::ZeroNorm)));
    }

    #[test]
    fn fft_scan_matches_direct_sums() {
        let grid = TimeGrid::new(0.0, 5.0, 257).unwrap();
        let p = Pulse::from_fn(grid, |t| C64::new((t * 1.7).sin().abs() * (-t).exp(), 0.2 * t)).unwrap();
        let a: Vec<f64> = p.samples.iter().map(|z| z.norm()).collect();
        let conv = self_convolution(&a);
        let mut cache = OverlapCache::new(&a, 99, 3);
        for s in [0usize, 1, 100, 256, 300, 511, 512] {
            let lo = s.saturating_sub(256);
            let fft = conv[s] - a[lo] * a[s - lo];
            assert!((fft - overlap_at_index(&a, s)).abs() < 1e-12, "s={s}");
            assert!((cache.at(s as f64) - overlap_at_index(&a, s)).abs() < 1e-12);
        }
    }

    #[test]
    fn overlap_basics() {
        let grid = TimeGrid::new(0.0, 10.0, 1001).unwrap();
        let p = Pulse::gaussian(grid, 2.0, 0.3).unwrap();
        let q = Pulse::from_fn(grid, |t| if t > 6.0 { C64::new(1.0, 1.0) } else { C64::new(0.0, 0.0) }).unwrap();
        assert!((pulse_overlap(&p, &p).unwrap().re - p.norm).abs() < 1e-15);
        assert!(pulse_overlap(&p, &q).unwrap().norm() < 1e-12);
        let other = Pulse::zeros(TimeGrid::new(0.0, 10.0, 1000).unwrap());
        assert!(pulse_overlap(&p, &other).is_err());
    }

    #[test]
    fn parabolic_peak() {
        let dt = 0.1;
        let values: Vec<f64> = (0..20).map(|k| 1.0 - (k as f64 * dt - 0.93).powi(2)).collect();
        let (v, t) = refine_peak(&values, 9, dt);
        assert!((v - 1.0).abs() < 1e-12);
        assert!((t - 0.93).abs() < 1e-12);
        assert_eq!(refine_peak(&values, 0, dt), (values[0], 0.0));
    }
}
