//! Deterministic SVG figures drawn straight from the CSV outputs.

use std::fmt::Write as _;

use cascade_node::io::{Table, COMBINED_HEADER};

use crate::{CliError, CliResult};

const WIDTH: f64 = 720.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const PANEL_HEIGHT: f64 = 170.0;
const PANEL_GAP: f64 = 40.0;
const MARGIN_TOP: f64 = 20.0;
const MARGIN_BOTTOM: f64 = 50.0;

const SENDING: &str = "#dbeafe";
const TRANSPORT: &str = "#dcfce7";
const RECEIVING: &str = "#fce7f3";
const LINE_COLORS: [&str; 6] = ["#1f4e9c", "#c2410c", "#15803d", "#7e22ce", "#b91c1c", "#0f766e"];

fn px(x: f64) -> String {
    format!("{x:.2}")
}

fn column(table: &Table, name: &str) -> CliResult<Vec<f64>> {
    table.column(name).map_err(|e| CliError::Malformed(e.to_string()))
}

/// Round tick spacing giving about `target` ticks over `[lo, hi]`.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    if span.is_nan() || span <= 0.0 {
        return vec![lo];
    }
    let raw = span / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".to_string() } else { s.to_string() }
}

struct Panel {
    left: f64,
    top: f64,
    width: f64,
    height: f64,
    x: (f64, f64),
    y: (f64, f64),
}

impl Panel {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let u = (x - self.x.0) / (self.x.1 - self.x.0);
        let v = (y - self.y.0) / (self.y.1 - self.y.0);
        (self.left + u * self.width, self.top + (1.0 - v) * self.height)
    }

    fn frame(&self, svg: &mut String, fill: Option<&str>, x_label: &str, y_label: &str) {
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="{}" height="{}" fill="{}" stroke="black" stroke-width="1"/>"#,
            px(self.left),
            px(self.top),
            px(self.width),
            px(self.height),
            fill.unwrap_or("none")
        );
        for t in ticks(self.x.0, self.x.1, 8) {
            let (x, y) = self.map(t, self.y.0);
            let _ = writeln!(
                svg,
                r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" font-size="11" text-anchor="middle">{4}</text>"#,
                px(x),
                px(y),
                px(y - 5.0),
                px(y + 15.0),
                tick_label(t)
            );
        }
        for t in ticks(self.y.0, self.y.1, 4) {
            let (x, y) = self.map(self.x.0, t);
            let _ = writeln!(
                svg,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/><text x="{3}" y="{4}" font-size="11" text-anchor="end">{5}</text>"#,
                px(x),
                px(y),
                px(x + 5.0),
                px(x - 6.0),
                px(y + 4.0),
                tick_label(t)
            );
        }
        if !x_label.is_empty() {
            let _ = writeln!(
                svg,
                r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{x_label}</text>"#,
                px(self.left + 0.5 * self.width),
                px(self.top + self.height + 34.0)
            );
        }
        let (cx, cy) = (self.left - 48.0, self.top + 0.5 * self.height);
        let _ = writeln!(
            svg,
            r#"<text x="{0}" y="{1}" font-size="13" text-anchor="middle" transform="rotate(-90 {0} {1})">{y_label}</text>"#,
            px(cx),
            px(cy)
        );
    }

    fn polyline(&self, svg: &mut String, xs: &[f64], ys: &[f64], color: &str, dashed: bool) {
        let points: Vec<String> = xs
            .iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let (a, b) = self.map(x, y);
                format!("{},{}", px(a), px(b))
            })
            .collect();
        let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
            points.join(" ")
        );
    }

    fn legend(&self, svg: &mut String, entries: &[(&str, &str)]) {
        for (k, (label, color)) in entries.iter().enumerate() {
            let x = self.left + self.width - 150.0;
            let y = self.top + 16.0 + 16.0 * k as f64;
            let _ = writeln!(
                svg,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="2"/><text x="{3}" y="{4}" font-size="11">{label}</text>"#,
                px(x),
                px(y),
                px(x + 20.0),
                px(x + 26.0),
                px(y + 4.0)
            );
        }
    }
}

fn open_svg(height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
        w = px(WIDTH),
        h = px(height)
    )
}

fn range(values: &[f64]) -> (f64, f64) {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) }
}

fn stacked_panel(k: usize, x: (f64, f64), y: (f64, f64)) -> Panel {
    Panel {
        left: MARGIN_LEFT,
        top: MARGIN_TOP + k as f64 * (PANEL_HEIGHT + PANEL_GAP),
        width: WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        height: PANEL_HEIGHT,
        x,
        y,
    }
}

fn check_rows(t: &[f64]) -> CliResult<()> {
    if t.len() < 2 {
        return Err(CliError::Malformed("need at least two rows to plot".into()));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Malformed("non-finite time value".into()));
    }
    Ok(())
}

/// Sender populations, pulse intensity in flight and receiver populations in
/// three stacked panels shaded blue, green and pink.
pub fn transfer_svg(table: &Table) -> CliResult<String> {
    let cols: Vec<Vec<f64>> = COMBINED_HEADER
        .iter()
        .map(|h| column(table, h))
        .collect::<CliResult<_>>()?;
    let t = &cols[0];
    check_rows(t)?;
    let x = range(t);
    let pop_y = (0.0, 1.05);
    let intensity = (0.0, 1.05 * range(&cols[3]).1.max(1e-12));
    let height = MARGIN_TOP + 3.0 * PANEL_HEIGHT + 2.0 * PANEL_GAP + MARGIN_BOTTOM;
    let mut svg = open_svg(height);

    let sending = stacked_panel(0, x, pop_y);
    sending.frame(&mut svg, Some(SENDING), "", "sender");
    sending.polyline(&mut svg, t, &cols[1], LINE_COLORS[0], false);
    sending.polyline(&mut svg, t, &cols[2], LINE_COLORS[1], true);
    sending.legend(&mut svg, &[("emitter |c0|²", LINE_COLORS[0]), ("rings Σ|cn|²", LINE_COLORS[1])]);

    let transport = stacked_panel(1, x, intensity);
    transport.frame(&mut svg, Some(TRANSPORT), "", "|e(t)|²");
    transport.polyline(&mut svg, t, &cols[3], LINE_COLORS[2], false);

    let receiving = stacked_panel(2, x, pop_y);
    receiving.frame(&mut svg, Some(RECEIVING), "g t", "receiver");
    receiving.polyline(&mut svg, t, &cols[4], LINE_COLORS[0], false);
    receiving.polyline(&mut svg, t, &cols[5], LINE_COLORS[1], true);
    receiving.legend(&mut svg, &[("emitter |c0|²", LINE_COLORS[0]), ("rings Σ|cn|²", LINE_COLORS[1])]);

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Emitted pulse (real and imaginary parts and intensity) above its eigen
/// components.
pub fn pulse_svg(table: &Table) -> CliResult<String> {
    let t = column(table, "t")?;
    check_rows(&t)?;
    let re = column(table, "re_e")?;
    let im = column(table, "im_e")?;
    let abs2 = column(table, "abs2_e")?;
    let mut components = Vec::new();
    for n in 1.. {
        match (table.column(&format!("re_e{n}")), table.column(&format!("im_e{n}"))) {
            (Ok(r), Ok(i)) => components.push((r, i)),
            _ => break,
        }
    }
    let x = range(&t);
    let all: Vec<f64> = re.iter().chain(&im).chain(&abs2).copied().collect();
    let panels = if components.is_empty() { 1.0 } else { 2.0 };
    let height = MARGIN_TOP + panels * PANEL_HEIGHT + (panels - 1.0) * PANEL_GAP + MARGIN_BOTTOM;
    let mut svg = open_svg(height);
    let (lo, hi) = range(&all);
    let top = stacked_panel(0, x, (lo, hi));
    top.frame(&mut svg, None, if components.is_empty() { "g t" } else { "" }, "e(t)");
    top.polyline(&mut svg, &t, &re, LINE_COLORS[0], false);
    top.polyline(&mut svg, &t, &im, LINE_COLORS[0], true);
    top.polyline(&mut svg, &t, &abs2, LINE_COLORS[1], false);
    top.legend(
        &mut svg,
        &[("Re e", LINE_COLORS[0]), ("Im e (dashed)", LINE_COLORS[0]), ("|e|²", LINE_COLORS[1])],
    );
    if !components.is_empty() {
        let values: Vec<f64> = components.iter().flat_map(|(r, i)| r.iter().chain(i)).copied().collect();
        let bottom = stacked_panel(1, x, range(&values));
        bottom.frame(&mut svg, None, "g t", "components");
        for (k, (r, i)) in components.iter().enumerate() {
            let color = LINE_COLORS[k % LINE_COLORS.len()];
            bottom.polyline(&mut svg, &t, r, color, false);
            bottom.polyline(&mut svg, &t, i, color, true);
        }
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

/// β over `(J12, J23)` on the sweep's κ value nearest the requested one.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSlice {
    pub kappa: f64,
    pub xs: Vec<f64>,
    pub ys: Vec<f64>,
    /// `z[i][j]` at `(xs[i], ys[j])`.
    pub z: Vec<Vec<f64>>,
}

fn sorted_unique(values: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut v: Vec<f64> = values.collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl SweepSlice {
    pub fn from_table(table: &Table, kappa: f64) -> CliResult<Self> {
        let j12 = column(table, "J12")?;
        let j23 = column(table, "J23")?;
        let kap = column(table, "kappa")?;
        let beta = column(table, "beta")?;
        if table.headers.len() != 4 {
            return Err(CliError::Malformed("contours need a three-ring sweep (J12, J23, kappa, beta)".into()));
        }
        let nearest = kap
            .iter()
            .copied()
            .min_by(|a, b| (a - kappa).abs().total_cmp(&(b - kappa).abs()))
            .ok_or_else(|| CliError::Malformed("empty sweep".into()))?;
        let rows: Vec<usize> = (0..kap.len()).filter(|&k| kap[k] == nearest).collect();
        let xs = sorted_unique(rows.iter().map(|&k| j12[k]));
        let ys = sorted_unique(rows.iter().map(|&k| j23[k]));
        let mut z = vec![vec![f64::NAN; ys.len()]; xs.len()];
        for &k in &rows {
            let i = xs.binary_search_by(|v| v.total_cmp(&j12[k])).expect("value taken from xs");
            let j = ys.binary_search_by(|v| v.total_cmp(&j23[k])).expect("value taken from ys");
            z[i][j] = beta[k];
        }
        if z.iter().flatten().any(|v| v.is_nan()) {
            return Err(CliError::Malformed(format!("the kappa = {nearest} slice is not a full grid")));
        }
        if xs.len() < 2 || ys.len() < 2 {
            return Err(CliError::Malformed("a contour needs at least a 2x2 slice".into()));
        }
        Ok(Self { kappa: nearest, xs, ys, z })
    }
}

pub type Segment = [(f64, f64); 2];

/// Marching squares at `level`. Saddle cells are split by the cell mean.
pub fn contour_segments(slice: &SweepSlice, level: f64) -> Vec<Segment> {
    let mut out = Vec::new();
    let (xs, ys, z) = (&slice.xs, &slice.ys, &slice.z);
    for i in 0..xs.len() - 1 {
        for j in 0..ys.len() - 1 {
            // corners counterclockwise from (i, j)
            let c = [
                (xs[i], ys[j], z[i][j]),
                (xs[i + 1], ys[j], z[i + 1][j]),
                (xs[i + 1], ys[j + 1], z[i + 1][j + 1]),
                (xs[i], ys[j + 1], z[i][j + 1]),
            ];
            let edge = |a: usize, b: usize| {
                let (p, q) = (c[a], c[b]);
                let u = (level - p.2) / (q.2 - p.2);
                (p.0 + u * (q.0 - p.0), p.1 + u * (q.1 - p.1))
            };
            let above: Vec<bool> = c.iter().map(|p| p.2 > level).collect();
            let crossings: Vec<usize> = (0..4).filter(|&e| above[e] != above[(e + 1) % 4]).collect();
            match crossings.len() {
                2 => out.push([
                    edge(crossings[0], (crossings[0] + 1) % 4),
                    edge(crossings[1], (crossings[1] + 1) % 4),
                ]),
                4 => {
                    let mean = c.iter().map(|p| p.2).sum::<f64>() / 4.0;
                    // pair each crossing with a neighbour so the segments
                    // separate the corners on the mean's side
                    let pairs = if (mean > level) == above[0] { [(0, 1), (2, 3)] } else { [(3, 0), (1, 2)] };
                    for (a, b) in pairs {
                        out.push([edge(a, (a + 1) % 4), edge(b, (b + 1) % 4)]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Whether `point` lies inside the curves formed by `segments` (even-odd rule).
pub fn encloses(segments: &[Segment], point: (f64, f64)) -> bool {
    let (px_, py) = point;
    let mut inside = false;
    for [(x1, y1), (x2, y2)] in segments {
        if (*y1 > py) != (*y2 > py) {
            let x = x1 + (py - y1) / (y2 - y1) * (x2 - x1);
            if x > px_ {
                inside = !inside;
            }
        }
    }
    inside
}

/// Filled β map with contour lines at `levels` and a marker at `mark`.
pub fn contour_svg(slice: &SweepSlice, levels: &[f64], mark: (f64, f64)) -> String {
    let side = WIDTH - MARGIN_LEFT - MARGIN_RIGHT - 120.0;
    let height = MARGIN_TOP + side + MARGIN_BOTTOM;
    let mut svg = open_svg(height);
    let panel = Panel {
        left: MARGIN_LEFT,
        top: MARGIN_TOP,
        width: side,
        height: side,
        x: (slice.xs[0], slice.xs[slice.xs.len() - 1]),
        y: (slice.ys[0], slice.ys[slice.ys.len() - 1]),
    };
    // cell shading: white at β = 0 to dark blue at β = 1
    let half = |v: &[f64], k: usize| {
        let lo = if k == 0 { v[0] } else { 0.5 * (v[k - 1] + v[k]) };
        let hi = if k + 1 == v.len() { v[k] } else { 0.5 * (v[k] + v[k + 1]) };
        (lo, hi)
    };
    for (i, row) in slice.z.iter().enumerate() {
        for (j, &b) in row.iter().enumerate() {
            let (x0, x1) = half(&slice.xs, i);
            let (y0, y1) = half(&slice.ys, j);
            let (a, top) = panel.map(x0, y1);
            let (c, bottom) = panel.map(x1, y0);
            let s = b.clamp(0.0, 1.0);
            let shade = |full: f64| (255.0 - s * (255.0 - full)).round() as u8;
            let _ = writeln!(
                svg,
                r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#{:02x}{:02x}{:02x}" shape-rendering="crispEdges"/>"##,
                px(a),
                px(top),
                px(c - a),
                px(bottom - top),
                shade(30.0),
                shade(64.0),
                shade(175.0)
            );
        }
    }
    panel.frame(&mut svg, None, "J12 / g", "J23 / g");
    let mut legend = Vec::new();
    for (k, &level) in levels.iter().enumerate() {
        let color = LINE_COLORS[(k + 1) % LINE_COLORS.len()];
        let _ = writeln!(svg, r#"<g class="level-{level}" stroke="{color}" stroke-width="2">"#);
        for [(x1, y1), (x2, y2)] in contour_segments(slice, level) {
            let (a, b) = panel.map(x1, y1);
            let (c, d) = panel.map(x2, y2);
            let _ = writeln!(svg, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, px(a), px(b), px(c), px(d));
        }
        svg.push_str("</g>\n");
        legend.push((format!("β = {level}"), color));
    }
    let (mx, my) = panel.map(mark.0, mark.1);
    let _ = writeln!(
        svg,
        r#"<circle cx="{}" cy="{}" r="4" fill="white" stroke="black" stroke-width="1.5"/>"#,
        px(mx),
        px(my)
    );
    let lx = panel.left + side + 16.0;
    for (k, (label, color)) in legend.iter().enumerate() {
        let y = panel.top + 20.0 + 18.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="{color}" stroke-width="2"/><text x="{3}" y="{4}" font-size="12">{label}</text>"#,
            px(lx),
            px(y),
            px(lx + 20.0),
            px(lx + 26.0),
            px(y + 4.0)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="12">κ / g = {}</text>"#,
        px(lx),
        px(panel.top + 20.0 + 18.0 * levels.len() as f64 + 10.0),
        tick_label(slice.kappa)
    );
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cone() -> SweepSlice {
        let xs: Vec<f64> = (0..21).map(|k| k as f64 * 0.1).collect();
        let ys = xs.clone();
        let z = xs
            .iter()
            .map(|x| ys.iter().map(|y| 1.0 - ((x - 1.0).powi(2) + (y - 1.0).powi(2)).sqrt()).collect())
            .collect();
        SweepSlice { kappa: 1.0, xs, ys, z }
    }

    #[test]
    fn circle_contour_encloses_its_center() {
        let s = cone();
        let segs = contour_segments(&s, 0.5);
        assert!(!segs.is_empty());
        for [(a, b), (c, d)] in &segs {
            let r1 = ((a - 1.0).powi(2) + (b - 1.0).powi(2)).sqrt();
            let r2 = ((c - 1.0).powi(2) + (d - 1.0).powi(2)).sqrt();
            assert!((r1 - 0.5).abs() < 0.02 && (r2 - 0.5).abs() < 0.02);
        }
        assert!(encloses(&segs, (1.0, 1.0)));
        assert!(encloses(&segs, (1.3, 0.8)));
        assert!(!encloses(&segs, (0.1, 0.1)));
        assert!(!encloses(&segs, (1.0, 1.8)));
    }

    #[test]
    fn saddle_cells_give_two_segments() {
        let s = SweepSlice {
            kappa: 1.0,
            xs: vec![0.0, 1.0],
            ys: vec![0.0, 1.0],
            z: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
        };
        assert_eq!(contour_segments(&s, 0.5).len(), 2);
    }

    #[test]
    fn tick_values() {
        assert_eq!(ticks(0.0, 1.0, 4), vec![0.0, 0.5, 1.0]);
        assert_eq!(ticks(0.0, 45.0, 8), vec![0.0, 10.0, 20.0, 30.0, 40.0]);
        assert_eq!(tick_label(0.30000000000000004), "0.3");
    }

    #[test]
    fn missing_columns_are_malformed() {
        let table = Table {
            headers: vec!["t".into(), "x".into()],
            rows: vec![vec![0.0, 1.0], vec![1.0, 2.0]],
        };
        assert!(matches!(transfer_svg(&table), Err(CliError::Malformed(_))));
        assert!(matches!(pulse_svg(&table), Err(CliError::Malformed(_))));
    }
}
