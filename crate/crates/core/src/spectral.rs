//! Eigenmodes of the effective Hamiltonian and the closed-form emitted pulse
//! `e(t) = Σ_n α_n exp(-i Ω_n t)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Pulse, TimeGrid};
use crate::error::{Error, Result};
use crate::linalg::{schur, schur_eigenvectors, CMatrix};
use crate::model::{build_reduced_hamiltonian, EffectiveHamiltonian, ModelKind, NodeConfig};

/// Eigenvector condition numbers above this are treated as defective.
pub const MAX_CONDITION: f64 = 1e12;
/// Minimum eigenvalue separation, relative to `g`, for the residue formula.
pub const DEGENERACY_THRESHOLD: f64 = 1e-8;

const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Clone, PartialEq)]
pub struct EigenDecomposition {
    /// Sorted by descending real part, then descending imaginary part.
    pub eigenvalues: Vec<C64>,
    /// Right eigenvectors as unit-norm columns, in eigenvalue order.
    pub eigenvectors: CMatrix,
    /// `α_n`; empty until [`modal_amplitudes`] fills it.
    pub modal_amplitudes: Vec<C64>,
    /// `‖V‖_F ‖V⁻¹‖_F`.
    pub condition: f64,
    pub model_kind: ModelKind,
}

impl EigenDecomposition {
    /// `V diag(Ω) V⁻¹`.
    pub fn reconstruct(&self) -> Result<CMatrix> {
        let v = &self.eigenvectors;
        let vinv = v.inverse()?;
        Ok(v.matmul(&CMatrix::from_diagonal(&self.eigenvalues)).matmul(&vinv))
    }

    /// Slowest amplitude decay rate, `min_n |Im Ω_n|`.
    pub fn slowest_decay(&self) -> f64 {
        self.eigenvalues.iter().map(|w| -w.im).fold(f64::INFINITY, f64::min)
    }

    pub fn report(&self) -> EigenReport {
        let alpha = &self.modal_amplitudes;
        EigenReport {
            omega_re: self.eigenvalues.iter().map(|w| w.re).collect(),
            omega_im: self.eigenvalues.iter().map(|w| w.im).collect(),
            alpha_re: alpha.iter().map(|a| a.re).collect(),
            alpha_im: alpha.iter().map(|a| a.im).collect(),
        }
    }
}

/// JSON form of an [`EigenDecomposition`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenReport {
    pub omega_re: Vec<f64>,
    pub omega_im: Vec<f64>,
    pub alpha_re: Vec<f64>,
    pub alpha_im: Vec<f64>,
}

fn sort_key_cmp(a: &C64, b: &C64, scale: f64) -> std::cmp::Ordering {
    let tie = 1e-9 * scale;
    if (a.re - b.re).abs() > tie {
        b.re.total_cmp(&a.re)
    } else {
        b.im.total_cmp(&a.im)
    }
}

pub fn eigendecompose(h: &EffectiveHamiltonian) -> Result<EigenDecomposition> {
    let s = schur(&h.entries)?;
    let vectors = schur_eigenvectors(&s);
    let values = s.t.diagonal();
    let n = values.len();
    let scale = h.entries.frobenius_norm().max(1.0);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sort_key_cmp(&values[i], &values[j], scale));
    let eigenvalues: Vec<C64> = order.iter().map(|&i| values[i]).collect();
    let mut eigenvectors = CMatrix::zeros(n);
    for (col, &i) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors[(r, col)] = vectors[(r, i)];
        }
    }
    let condition = match eigenvectors.inverse() {
        Ok(inv) => eigenvectors.frobenius_norm() * inv.frobenius_norm(),
        Err(_) => f64::INFINITY,
    };
    if !(condition <= MAX_CONDITION) {
        return Err(Error::Defective { condition });
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
        modal_amplitudes: Vec::new(),
        condition,
        model_kind: h.model_kind,
    })
}

/// Eigendecomposition of the reduced model with `α_n` filled in.
pub fn reduced_modes(config: &NodeConfig) -> Result<EigenDecomposition> {
    let h = build_reduced_hamiltonian(config)?;
    let eig = eigendecompose(&h)?;
    modal_amplitudes(config, eig)
}

/// Fills `α_n = -i sqrt(2 κ) g Π J / Π_{m≠n} (Ω_n - Ω_m)`.
///
/// This is the residue expansion of the `(N, 0)` element of `exp(-i H t)` for
/// a tridiagonal `H`, so it also covers detuned, lossy or backscattered
/// reduced models. It needs distinct eigenvalues.
pub fn modal_amplitudes(config: &NodeConfig, mut eig: EigenDecomposition) -> Result<EigenDecomposition> {
    if eig.model_kind != ModelKind::Reduced || eig.eigenvalues.len() != config.n_rings + 1 {
        return Err(Error::validation(
            "eigendecomposition",
            "modal amplitudes need the reduced model of the same config",
        ));
    }
    let w = &eig.eigenvalues;
    let threshold = DEGENERACY_THRESHOLD * config.g;
    for i in 0..w.len() {
        for j in i + 1..w.len() {
            let separation = (w[i] - w[j]).norm();
            if separation <= threshold {
                return Err(Error::DegenerateSpectrum {
                    first: i,
                    second: j,
                    separation,
                });
            }
        }
    }
    let numerator = -I * (2.0 * config.kappa).sqrt() * config.g * config.j_rates.iter().product::<f64>();
    eig.modal_amplitudes = (0..w.len())
        .map(|n| {
            let denom: C64 = (0..w.len()).filter(|&m| m != n).map(|m| w[n] - w[m]).product();
            numerator / denom
        })
        .collect();
    Ok(eig)
}

/// `e(t) = Σ α_n exp(-i Ω_n (t - t_start))`, with the emitter excited at `t_start`.
pub fn analytic_emission(config: &NodeConfig, grid: &TimeGrid) -> Result<Pulse> {
    let eig = reduced_modes(config)?;
    pulse_from_modes(&eig, grid)
}

/// Samples the modal expansion of `eig` (which must carry `α_n`).
pub fn pulse_from_modes(eig: &EigenDecomposition, grid: &TimeGrid) -> Result<Pulse> {
    let mut samples = vec![C64::new(0.0, 0.0); grid.n_samples];
    for (alpha, omega) in eig.modal_amplitudes.iter().zip(&eig.eigenvalues) {
        accumulate_mode(&mut samples, *alpha, *omega, grid);
    }
    Pulse::new(*grid, samples)
}

/// Per-eigenstate components `e_n(t) = α_n exp(-i Ω_n t)`.
pub fn emission_components(config: &NodeConfig, grid: &TimeGrid) -> Result<Vec<Pulse>> {
    let eig = reduced_modes(config)?;
    eig.modal_amplitudes
        .iter()
        .zip(&eig.eigenvalues)
        .map(|(alpha, omega)| {
            let mut samples = vec![C64::new(0.0, 0.0); grid.n_samples];
            accumulate_mode(&mut samples, *alpha, *omega, grid);
            Pulse::new(*grid, samples)
        })
        .collect()
}

// Geometric recurrence, re-anchored periodically to keep rounding bounded.
fn accumulate_mode(samples: &mut [C64], alpha: C64, omega: C64, grid: &TimeGrid) {
    const ANCHOR: usize = 256;
    let dt = grid.step();
    let ratio = (-I * omega * dt).exp();
    let mut z = alpha;
    for (k, s) in samples.iter_mut().enumerate() {
        if k % ANCHOR == 0 {
            z = alpha * (-I * omega * (k as f64 * dt)).exp();
        }
        *s += z;
        z *= ratio;
    }
}

/// `∫_0^∞ |e|^2 dt = Σ_{n,m} α_n conj(α_m) / (i (Ω_n - conj Ω_m))`.
pub fn analytic_emitted_norm(eig: &EigenDecomposition) -> f64 {
    let (a, w) = (&eig.modal_amplitudes, &eig.eigenvalues);
    let mut sum = C64::new(0.0, 0.0);
    for n in 0..a.len() {
        for m in 0..a.len() {
            sum += a[n] * a[m].conj() / (I * (w[n] - w[m].conj()));
        }
    }
    sum.re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve_emission;
    use crate::metrics::symmetry_factor;
    use crate::model::build_full_hamiltonian;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Characteristic polynomial coefficients (monic, highest first) by
    /// Faddeev-LeVerrier, roots by Durand-Kerner. Independent of the QR path.
    fn char_poly_roots(a: &CMatrix) -> Vec<C64> {
        let n = a.dim();
        let mut coeffs = vec![c(1.0, 0.0)];
        let mut m = CMatrix::zeros(n);
        for k in 1..=n {
            let mut next = a.matmul(&m);
            for i in 0..n {
                next[(i, i)] += coeffs[k - 1];
            }
            m = next;
            let am = a.matmul(&m);
            let trace: C64 = (0..n).map(|i| am[(i, i)]).sum();
            coeffs.push(-trace / k as f64);
        }
        let eval = |z: C64| coeffs.iter().fold(c(0.0, 0.0), |acc, &co| acc * z + co);
        let mut roots: Vec<C64> = (0..n).map(|k| c(0.4, 0.9).powu(k as u32)).collect();
        for _ in 0..2000 {
            let prev = roots.clone();
            for i in 0..n {
                let denom: C64 = (0..n).filter(|&j| j != i).map(|j| roots[i] - roots[j]).product();
                let step = eval(roots[i]) / denom;
                roots[i] -= step;
            }
            let change: f64 = roots.iter().zip(&prev).map(|(x, y)| (x - y).norm()).sum();
            if change < 1e-15 {
                break;
            }
        }
        roots
    }

    fn assert_same_multiset(a: &[C64], b: &[C64], tol: f64) {
        assert_eq!(a.len(), b.len());
        let mut used = vec![false; b.len()];
        for x in a {
            let (j, d) = b
                .iter()
                .enumerate()
                .filter(|(j, _)| !used[*j])
                .map(|(j, y)| (j, (x - y).norm()))
                .min_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            assert!(d < tol, "{x} unmatched (closest distance {d})");
            used[j] = true;
        }
    }

    #[test]
    fn optimum_spectrum_matches_characteristic_polynomial() {
        let h = build_reduced_hamiltonian(&NodeConfig::three_ring_optimum()).unwrap();
        let eig = eigendecompose(&h).unwrap();
        assert_same_multiset(&eig.eigenvalues, &char_poly_roots(&h.entries), 1e-10);
        // frozen from the polynomial oracle; imaginary parts sum to -κ/2
        let expected = [
            c(2.730984, -0.868120),
            c(0.932140, -1.111880),
            c(-0.932140, -1.111880),
            c(-2.730984, -0.868120),
        ];
        for (w, e) in eig.eigenvalues.iter().zip(&expected) {
            assert!((w - e).norm() < 1e-5, "{w} vs {e}");
        }
        let im_sum: f64 = eig.eigenvalues.iter().map(|w| w.im).sum();
        assert!((im_sum + 3.96).abs() < 1e-12);
    }

    #[test]
    fn kappa_from_the_reported_damping_reproduces_reported_eigenvalues() {
        // the reported imaginary parts sum to -3.66, i.e. κ = 7.32
        let cfg = NodeConfig::ideal(1.0, &[1.878, 2.933], 7.32).unwrap();
        let eig = reduced_modes(&cfg).unwrap();
        let reported = [c(2.84, -0.88), c(1.02, -0.95), c(-1.02, -0.95), c(-2.84, -0.88)];
        for (w, e) in eig.eigenvalues.iter().zip(&reported) {
            assert!((w - e).norm() < 0.01, "{w} vs {e}");
        }
    }

    #[test]
    fn trivial_spectra() {
        // κ = 0 is not a valid config; build the matrix directly
        let h = EffectiveHamiltonian {
            entries: CMatrix::from_rows(&[
                vec![c(0.0, 0.0), c(2f64.sqrt(), 0.0)],
                vec![c(2f64.sqrt(), 0.0), c(0.0, 0.0)],
            ]),
            basis_labels: vec!["tls".into(), "c1".into()],
            model_kind: ModelKind::Reduced,
            n_rings: 1,
        };
        let eig = eigendecompose(&h).unwrap();
        assert!((eig.eigenvalues[0] - c(2f64.sqrt(), 0.0)).norm() < 1e-14);
        assert!((eig.eigenvalues[1] + c(2f64.sqrt(), 0.0)).norm() < 1e-14);

        // z^2 + i z - 2 = 0  =>  z = -i/2 ± sqrt(2 - 1/4)
        let eig = reduced_modes(&NodeConfig::ideal(1.0, &[], 2.0).unwrap()).unwrap();
        let r = 1.75f64.sqrt();
        assert!((eig.eigenvalues[0] - c(r, -0.5)).norm() < 1e-14);
        assert!((eig.eigenvalues[1] - c(-r, -0.5)).norm() < 1e-14);
        let a = eig.modal_amplitudes[0];
        assert!((a - (-I * 2.0 / (2.0 * r))).norm() < 1e-14);
    }

    #[test]
    fn reconstruction_and_residue_sums() {
        for js in [&[][..], &[1.3][..], &[1.88, 2.94][..], &[0.7, 2.1, 3.3][..]] {
            let cfg = NodeConfig::ideal(1.0, js, 6.5).unwrap();
            let h = build_reduced_hamiltonian(&cfg).unwrap();
            let eig = modal_amplitudes(&cfg, eigendecompose(&h).unwrap()).unwrap();
            let back = eig.reconstruct().unwrap();
            assert!(back.sub(&h.entries).frobenius_norm() <= 1e-9 * h.entries.frobenius_norm());
            let amax = eig.modal_amplitudes.iter().map(|a| a.norm()).fold(0.0, f64::max);
            let wmax = eig.eigenvalues.iter().map(|w| w.norm()).fold(0.0, f64::max);
            for p in 0..cfg.n_rings {
                let s: C64 = eig
                    .modal_amplitudes
                    .iter()
                    .zip(&eig.eigenvalues)
                    .map(|(a, w)| a * w.powu(p as u32))
                    .sum();
                assert!(s.norm() / (amax * wmax.powi(p as i32)) < 1e-8, "p={p}: {s}");
            }
            assert!((analytic_emitted_norm(&eig) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn full_spectrum_contains_reduced_spectrum() {
        let cfg = NodeConfig::three_ring_optimum();
        let red = eigendecompose(&build_reduced_hamiltonian(&cfg).unwrap()).unwrap();
        let full = eigendecompose(&build_full_hamiltonian(&cfg).unwrap()).unwrap();
        assert_eq!(full.eigenvalues.len(), 7);
        for w in &red.eigenvalues {
            assert!(full.eigenvalues.iter().any(|f| (f - w).norm() < 1e-9), "{w} missing");
        }
    }

    #[test]
    fn analytic_pulse_matches_integration() {
        let cfg = NodeConfig::three_ring_optimum();
        let grid = TimeGrid::default_emission();
        let analytic = analytic_emission(&cfg, &grid).unwrap();
        let ode = evolve_emission(&cfg, &grid).unwrap();
        let worst = analytic
            .samples
            .iter()
            .zip(&ode.emitted().samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
        assert!(analytic.samples[0].norm() < 1e-14);
        let beta = symmetry_factor(&analytic).unwrap().beta;
        assert!((beta - 0.993).abs() < 0.002);
        let parts = emission_components(&cfg, &grid).unwrap();
        assert_eq!(parts.len(), 4);
        let k = 700;
        let sum: C64 = parts.iter().map(|p| p.samples[k]).sum();
        assert!((sum - analytic.samples[k]).norm() < 1e-14);
    }

    #[test]
    fn lossy_detuned_modes_still_match_integration() {
        let cfg = NodeConfig::ideal(1.0, &[1.5, 2.5], 7.0)
            .unwrap()
            .with_losses(0.03, 0.05)
            .unwrap()
            .with_deltas(&[0.2, -0.1, 0.3])
            .unwrap();
        let grid = TimeGrid::new(0.0, 40.0, 2001).unwrap();
        let analytic = analytic_emission(&cfg, &grid).unwrap();
        let ode = evolve_emission(&cfg, &grid).unwrap();
        let worst = analytic
            .samples
            .iter()
            .zip(&ode.emitted().samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(worst < 1e-6, "{worst}");
        let eig = reduced_modes(&cfg).unwrap();
        let last = ode.grid.n_samples - 1;
        assert!((analytic_emitted_norm(&eig) - ode.leaks.waveguide[last]).abs() < 1e-8);
    }

    #[test]
    fn defective_matrix_rejected() {
        // critical damping of the single ring: κ = 4 sqrt(2) g merges both modes
        let cfg = NodeConfig::ideal(1.0, &[], 4.0 * 2f64.sqrt()).unwrap();
        let h = build_reduced_hamiltonian(&cfg).unwrap();
        match eigendecompose(&h) {
            Err(Error::Defective { .. }) => {}
            Ok(eig) => assert!(matches!(
                modal_amplitudes(&cfg, eig),
                Err(Error::DegenerateSpectrum { .. })
            )),
            Err(e) => panic!("unexpected error {e}"),
        }
    }

    #[test]
    fn sort_order_and_report() {
        let eig = reduced_modes(&NodeConfig::three_ring_optimum()).unwrap();
        for pair in eig.eigenvalues.windows(2) {
            assert!(pair[0].re >= pair[1].re);
        }
        let report = eig.report();
        let json = serde_json::to_value(&report).unwrap();
        for key in ["omega_re", "omega_im", "alpha_re", "alpha_im"] {
            assert_eq!(json[key].as_array().unwrap().len(), 4);
        }
    }
}
