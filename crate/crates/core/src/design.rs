//! Physical design helpers: the emitter–ring coupling from emitter and mode
//! parameters, and inversion of tabulated gap → coupling-rate curves.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Emitter and cavity-mode parameters, SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmitterModeSpec {
    /// Vacuum wavelength (m).
    pub lambda: f64,
    /// Natural linewidth as an angular decay rate (rad/s).
    pub gamma0: f64,
    pub n_index: f64,
    /// Effective mode volume (m³).
    pub v_eff: f64,
}

impl EmitterModeSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda", self.lambda),
            ("gamma0", self.gamma0),
            ("n_index", self.n_index),
            ("v_eff", self.v_eff),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, format!("must be positive and finite, got {v}")));
            }
        }
        Ok(())
    }
}

/// `g = 0.5 sqrt(3 λ² c Γ0 / (2π n³ V))` in rad/s.
pub fn coupling_g(spec: &EmitterModeSpec) -> Result<f64> {
    spec.validate()?;
    let EmitterModeSpec {
        lambda,
        gamma0,
        n_index,
        v_eff,
    } = *spec;
    Ok(0.5 * (3.0 * lambda * lambda * SPEED_OF_LIGHT * gamma0 / (2.0 * PI * n_index.powi(3) * v_eff)).sqrt())
}

/// Mode volume in m³ from a value in units of `(λ/n)³`.
pub fn mode_volume_from_cubic_wavelengths(v: f64, lambda: f64, n_index: f64) -> f64 {
    v * (lambda / n_index).powi(3)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableKind {
    RingRing,
    RingWaveguide,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interpolation {
    /// Linear in `ln(rate)` against gap.
    #[default]
    LogLinear,
    Linear,
}

/// One table row in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapRate {
    /// m
    pub gap: f64,
    /// rad/s
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRateTable {
    pub kind: TableKind,
    rows: Vec<GapRate>,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    gap_nm: f64,
    rate_ghz: f64,
}

impl GapRateTable {
    /// Checks that gaps increase, rates are positive and decrease.
    pub fn new(kind: TableKind, rows: Vec<GapRate>) -> Result<Self> {
        if rows.len() < 2 {
            return Err(Error::validation("table", "need at least two rows"));
        }
        for (i, r) in rows.iter().enumerate() {
            if !(r.gap.is_finite() && r.rate > 0.0 && r.rate.is_finite()) {
                return Err(Error::validation("table", format!("row {}: rates must be positive", i + 1)));
            }
        }
        for (i, w) in rows.windows(2).enumerate() {
            if !(w[1].gap > w[0].gap) {
                return Err(Error::validation("table", format!("row {}: gaps must increase", i + 2)));
            }
            if !(w[1].rate < w[0].rate) {
                return Err(Error::validation(
                    "table",
                    format!("row {}: rates must decrease with gap", i + 2),
                ));
            }
        }
        Ok(Self { kind, rows })
    }

    /// Reads CSV with header `gap_nm, rate_ghz`. Rates are ordinary
    /// frequencies and are converted to rad/s.
    pub fn from_csv<R: Read>(kind: TableKind, reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["gap_nm", "rate_ghz"] {
            return Err(Error::Parse(format!(
                "expected header `gap_nm, rate_ghz`, got `{}`",
                headers.iter().collect::<Vec<_>>().join(", ")
            )));
        }
        let mut rows = Vec::new();
        for record in rdr.deserialize() {
            let row: CsvRow = record?;
            rows.push(GapRate {
                gap: row.gap_nm * 1e-9,
                rate: row.rate_ghz * 2.0 * PI * 1e9,
            });
        }
        if rows.is_empty() {
            return Err(Error::Parse("table has no rows".to_string()));
        }
        Self::new(kind, rows)
    }

    pub fn rows(&self) -> &[GapRate] {
        &self.rows
    }

    /// Smallest and largest tabulated rate.
    pub fn rate_range(&self) -> (f64, f64) {
        (self.rows.last().unwrap().rate, self.rows[0].rate)
    }

    /// Interpolated rate at `gap`, inside the table.
    pub fn rate_at(&self, gap: f64, interp: Interpolation) -> Result<f64> {
        let (first, last) = (self.rows[0].gap, self.rows.last().unwrap().gap);
        if !(gap >= first && gap <= last) {
            return Err(Error::OutOfRange {
                target: gap,
                min: first,
                max: last,
            });
        }
        let i = self.rows.partition_point(|r| r.gap <= gap).clamp(1, self.rows.len() - 1) - 1;
        let (a, b) = (self.rows[i], self.rows[i + 1]);
        if gap == a.gap {
            return Ok(a.rate);
        }
        if gap == b.gap {
            return Ok(b.rate);
        }
        let u = (gap - a.gap) / (b.gap - a.gap);
        Ok(match interp {
            Interpolation::LogLinear => (a.rate.ln() + u * (b.rate.ln() - a.rate.ln())).exp(),
            Interpolation::Linear => a.rate + u * (b.rate - a.rate),
        })
    }
}

/// Result of inverting a table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapSolution {
    pub gap: f64,
    /// Bracketing rows (equal when the target hits a row).
    pub lower: GapRate,
    pub upper: GapRate,
}

/// Gap giving `target_rate`, interpolated between bracketing rows.
pub fn solve_gap(table: &GapRateTable, target_rate: f64, interp: Interpolation) -> Result<GapSolution> {
    let (min, max) = table.rate_range();
    if !(target_rate >= min && target_rate <= max) {
        return Err(Error::OutOfRange {
            target: target_rate,
            min,
            max,
        });
    }
    let rows = table.rows();
    if let Some(row) = rows.iter().find(|r| r.rate == target_rate) {
        return Ok(GapSolution {
            gap: row.gap,
            lower: *row,
            upper: *row,
        });
    }
    // rates decrease: first row with rate below the target closes the bracket
    let j = rows.partition_point(|r| r.rate > target_rate);
    let (a, b) = (rows[j - 1], rows[j]);
    let u = match interp {
        Interpolation::LogLinear => (a.rate.ln() - target_rate.ln()) / (a.rate.ln() - b.rate.ln()),
        Interpolation::Linear => (a.rate - target_rate) / (a.rate - b.rate),
    };
    Ok(GapSolution {
        gap: a.gap + u * (b.gap - a.gap),
        lower: a,
        upper: b,
    })
}

/// Table rows (in file units) bracketing one planned gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowsUsed {
    pub lower: TableRow,
    pub upper: TableRow,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub gap_nm: f64,
    pub rate_ghz: f64,
}

impl From<GapRate> for TableRow {
    fn from(r: GapRate) -> Self {
        Self {
            gap_nm: r.gap * 1e9,
            rate_ghz: r.rate / (2.0 * PI * 1e9),
        }
    }
}

/// Fabrication targets for one node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePlan {
    /// rad/s
    pub g: f64,
    /// Gaps in nm keyed `j12`, `j23`, ..., `kappa`.
    pub gaps: BTreeMap<String, f64>,
    pub table_rows_used: BTreeMap<String, RowsUsed>,
}

/// Gaps realizing `ratios = (J_12, ..., J_{N-1,N}, kappa) / g` for a given `g`.
pub fn plan_node(
    g: f64,
    ratios: &[f64],
    ring_ring: &GapRateTable,
    ring_waveguide: &GapRateTable,
    interp: Interpolation,
) -> Result<NodePlan> {
    if !(g > 0.0) {
        return Err(Error::validation("g", "must be positive"));
    }
    let (kappa, js) = ratios
        .split_last()
        .ok_or_else(|| Error::validation("ratios", "need at least kappa"))?;
    let mut gaps = BTreeMap::new();
    let mut used = BTreeMap::new();
    let targets = js
        .iter()
        .enumerate()
        .map(|(i, r)| (format!("j{}{}", i + 1, i + 2), *r, ring_ring))
        .chain(std::iter::once(("kappa".to_string(), *kappa, ring_waveguide)));
    for (name, ratio, table) in targets {
        let sol = solve_gap(table, ratio * g, interp)?;
        gaps.insert(name.clone(), sol.gap * 1e9);
        used.insert(
            name,
            RowsUsed {
                lower: sol.lower.into(),
                upper: sol.upper.into(),
            },
        );
    }
    Ok(NodePlan {
        g,
        gaps,
        table_rows_used: used,
    })
}
