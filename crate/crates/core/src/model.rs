//! Node configurations and the effective non-Hermitian Hamiltonians of the
//! single-excitation sector.
//!
//! Two models are built from the same [`NodeConfig`]:
//!
//! * the **reduced** model, with basis (TLS, ring 1, ..., ring N), where ring
//!   `n` stands for the symmetric combination of its clockwise and
//!   counterclockwise modes, `c_n = (a_n + b_n) / sqrt(2)`;
//! * the **full** model, with basis (TLS, a_1..a_N, b_1..b_N).
//!
//! A loss rate `G` always enters as `-i G / 2` on the diagonal, so `G` is the
//! population decay rate.

use std::fmt;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;

/// All physical rates of one node.
///
/// Rates share one unit, either absolute angular frequency or normalized to
/// `g`. Time then runs in the reciprocal unit. [`NodeConfig::normalized`]
/// rescales to `g = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNodeConfig")]
pub struct NodeConfig {
    pub n_rings: usize,
    pub g: f64,
    pub j_rates: Vec<f64>,
    pub kappa: f64,
    pub deltas: Vec<f64>,
    pub gamma0: f64,
    pub gamma_c: f64,
    pub backscatter: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNodeConfig {
    n_rings: usize,
    g: f64,
    #[serde(default)]
    j_rates: Vec<f64>,
    kappa: f64,
    #[serde(default)]
    deltas: Vec<f64>,
    #[serde(default)]
    gamma0: f64,
    #[serde(default)]
    gamma_c: f64,
    #[serde(default)]
    backscatter: Vec<f64>,
}

impl TryFrom<RawNodeConfig> for NodeConfig {
    type Error = Error;

    fn try_from(raw: RawNodeConfig) -> Result<Self> {
        let n = raw.n_rings;
        let fill = |v: Vec<f64>| if v.is_empty() { vec![0.0; n] } else { v };
        let config = NodeConfig {
            n_rings: n,
            g: raw.g,
            j_rates: raw.j_rates,
            kappa: raw.kappa,
            deltas: fill(raw.deltas),
            gamma0: raw.gamma0,
            gamma_c: raw.gamma_c,
            backscatter: fill(raw.backscatter),
        };
        config.validate()?;
        Ok(config)
    }
}

impl NodeConfig {
    /// Ideal resonant node: no detuning, loss or backscattering.
    pub fn ideal(g: f64, j_rates: &[f64], kappa: f64) -> Result<Self> {
        let n = j_rates.len() + 1;
        let config = NodeConfig {
            n_rings: n,
            g,
            j_rates: j_rates.to_vec(),
            kappa,
            deltas: vec![0.0; n],
            gamma0: 0.0,
            gamma_c: 0.0,
            backscatter: vec![0.0; n],
        };
        config.validate()?;
        Ok(config)
    }

    /// The node with ratios `(J_12, ..., J_{N-1,N}, kappa) / g` used in the
    /// pulse-shaping optimum for three rings, with `g = 1`.
    pub fn three_ring_optimum() -> Self {
        Self::ideal(1.0, &[1.88, 2.94], 7.92).expect("constant config is valid")
    }

    /// Ideal node from the optimizer's parameter vector `(J..., kappa)`
    /// with `g = 1`.
    pub fn from_ratios(ratios: &[f64]) -> Result<Self> {
        let (kappa, js) = ratios
            .split_last()
            .ok_or_else(|| Error::validation("ratios", "need at least kappa"))?;
        Self::ideal(1.0, js, *kappa)
    }

    pub fn with_losses(mut self, gamma0: f64, gamma_c: f64) -> Result<Self> {
        self.gamma0 = gamma0;
        self.gamma_c = gamma_c;
        self.validate()?;
        Ok(self)
    }

    pub fn with_deltas(mut self, deltas: &[f64]) -> Result<Self> {
        self.deltas = deltas.to_vec();
        self.validate()?;
        Ok(self)
    }

    pub fn with_backscatter(mut self, backscatter: &[f64]) -> Result<Self> {
        self.backscatter = backscatter.to_vec();
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_rings;
        if n == 0 {
            return Err(Error::validation("n_rings", "must be at least 1"));
        }
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::validation(field, format!("must be finite and > 0, got {v}")))
            }
        };
        let non_negative = |field: &str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::validation(field, format!("must be finite and >= 0, got {v}")))
            }
        };
        let length = |field: &str, v: &[f64], want: usize| {
            if v.len() == want {
                Ok(())
            } else {
                Err(Error::validation(
                    field,
                    format!("expected {want} entries for {n} rings, got {}", v.len()),
                ))
            }
        };
        positive("g", self.g)?;
        positive("kappa", self.kappa)?;
        length("j_rates", &self.j_rates, n - 1)?;
        for &j in &self.j_rates {
            positive("j_rates", j)?;
        }
        length("deltas", &self.deltas, n)?;
        if let Some(d) = self.deltas.iter().find(|d| !d.is_finite()) {
            return Err(Error::validation("deltas", format!("must be finite, got {d}")));
        }
        non_negative("gamma0", self.gamma0)?;
        non_negative("gamma_c", self.gamma_c)?;
        length("backscatter", &self.backscatter, n)?;
        if let Some(h) = self.backscatter.iter().find(|h| !h.is_finite()) {
            return Err(Error::validation("backscatter", format!("must be finite, got {h}")));
        }
        Ok(())
    }

    /// True when there is no detuning, loss or backscattering.
    pub fn is_ideal(&self) -> bool {
        self.gamma0 == 0.0
            && self.gamma_c == 0.0
            && self.deltas.iter().all(|&d| d == 0.0)
            && self.backscatter.iter().all(|&h| h == 0.0)
    }

    /// All rates multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| x * factor).collect();
        NodeConfig {
            n_rings: self.n_rings,
            g: self.g * factor,
            j_rates: s(&self.j_rates),
            kappa: self.kappa * factor,
            deltas: s(&self.deltas),
            gamma0: self.gamma0 * factor,
            gamma_c: self.gamma_c * factor,
            backscatter: s(&self.backscatter),
        }
    }

    /// Copy with every rate divided by `g`, so `g = 1` and time runs in `1/g`.
    pub fn normalized(&self) -> Self {
        let mut out = self.scaled(1.0 / self.g);
        out.g = 1.0;
        out
    }

    /// `(J_12, ..., J_{N-1,N}, kappa) / g`.
    pub fn ratios(&self) -> Vec<f64> {
        self.j_rates
            .iter()
            .chain(std::iter::once(&self.kappa))
            .map(|r| r / self.g)
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Reduced,
    Full,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelKind::Reduced => f.write_str("reduced"),
            ModelKind::Full => f.write_str("full"),
        }
    }
}

/// Dense matrix of the single-excitation sector, with the amplitude equation
/// `dc/dt = -i H c + d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHamiltonian {
    pub entries: CMatrix,
    pub basis_labels: Vec<String>,
    pub model_kind: ModelKind,
    pub n_rings: usize,
}

impl EffectiveHamiltonian {
    pub fn dim(&self) -> usize {
        self.entries.dim()
    }

    /// Basis index of the last ring mode(s) coupled to the waveguide:
    /// `[c_N]` for the reduced model, `[b_N, a_N]` (plus, minus) for the full one.
    pub fn output_indices(&self) -> Vec<usize> {
        let n = self.n_rings;
        match self.model_kind {
            ModelKind::Reduced => vec![n],
            ModelKind::Full => vec![2 * n, n],
        }
    }
}

/// Builds the `(N+1) x (N+1)` tridiagonal reduced Hamiltonian.
///
/// Off-diagonal `(sqrt(2) g, J_12, ..., J_{N-1,N})`; diagonal
/// `(-i G0/2, d_1 + h_1 - i Gc/2, ..., d_N + h_N - i Gc/2 - i kappa/2)`.
/// The symmetric combination of the two ring modes sees backscattering as a
/// frequency shift `+h_n`.
pub fn build_reduced_hamiltonian(config: &NodeConfig) -> Result<EffectiveHamiltonian> {
    config.validate()?;
    let n = config.n_rings;
    let mut h = CMatrix::zeros(n + 1);
    let half = |rate: f64| C64::new(0.0, -0.5 * rate);
    h[(0, 0)] = half(config.gamma0);
    let couplings =
        std::iter::once(std::f64::consts::SQRT_2 * config.g).chain(config.j_rates.iter().copied());
    for (i, u) in couplings.enumerate() {
        h[(i, i + 1)] = C64::new(u, 0.0);
        h[(i + 1, i)] = C64::new(u, 0.0);
    }
    for ring in 1..=n {
        h[(ring, ring)] =
            C64::new(config.deltas[ring - 1] + config.backscatter[ring - 1], 0.0) + half(config.gamma_c);
    }
    h[(n, n)] += half(config.kappa);
    let basis_labels = std::iter::once("tls".to_string())
        .chain((1..=n).map(|i| format!("c{i}")))
        .collect();
    Ok(EffectiveHamiltonian {
        entries: h,
        basis_labels,
        model_kind: ModelKind::Reduced,
        n_rings: n,
    })
}

/// Builds the `(2N+1) x (2N+1)` Hamiltonian over (TLS, a_1..a_N, b_1..b_N).
///
/// The TLS couples with `g` to both `a_1` and `b_1`; neighbouring rings couple
/// `a_n <-> b_{n+1}` and `b_n <-> a_{n+1}`; `h_n` couples `a_n <-> b_n`; both
/// `a_N` and `b_N` decay into the waveguide at `kappa`.
pub fn build_full_hamiltonian(config: &NodeConfig) -> Result<EffectiveHamiltonian> {
    config.validate()?;
    let n = config.n_rings;
    let a = |ring: usize| ring; // ring is 1-based
    let b = |ring: usize| n + ring;
    let mut h = CMatrix::zeros(2 * n + 1);
    let mut couple = |i: usize, j: usize, v: f64| {
        h[(i, j)] += C64::new(v, 0.0);
        h[(j, i)] += C64::new(v, 0.0);
    };
    couple(0, a(1), config.g);
    couple(0, b(1), config.g);
    for (k, &j) in config.j_rates.iter().enumerate() {
        let ring = k + 1;
        couple(a(ring), b(ring + 1), j);
        couple(b(ring), a(ring + 1), j);
    }
    for ring in 1..=n {
        let hb = config.backscatter[ring - 1];
        if hb != 0.0 {
            couple(a(ring), b(ring), hb);
        }
    }
    h[(0, 0)] = C64::new(0.0, -0.5 * config.gamma0);
    for ring in 1..=n {
        let diag = C64::new(config.deltas[ring - 1], -0.5 * config.gamma_c);
        h[(a(ring), a(ring))] = diag;
        h[(b(ring), b(ring))] = diag;
    }
    h[(a(n), a(n))] += C64::new(0.0, -0.5 * config.kappa);
    h[(b(n), b(n))] += C64::new(0.0, -0.5 * config.kappa);
    let basis_labels = std::iter::once("tls".to_string())
        .chain((1..=n).map(|i| format!("a{i}")))
        .chain((1..=n).map(|i| format!("b{i}")))
        .collect();
    Ok(EffectiveHamiltonian {
        entries: h,
        basis_labels,
        model_kind: ModelKind::Full,
        n_rings: n,
    })
}
