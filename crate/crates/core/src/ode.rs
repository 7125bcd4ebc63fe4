//! Dormand-Prince 5(4) with adaptive step size and the standard fourth-order
//! continuous extension, for complex state vectors.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Right-hand side `dy/dt = f(t, y)`.
pub trait System {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, y: &[C64], dy: &mut [C64]);
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
        }
    }
}

impl Tolerances {
    pub fn scaled(self, factor: f64) -> Self {
        Self {
            rtol: self.rtol * factor,
            atol: self.atol * factor,
        }
    }
}

/// How output samples are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sampling {
    /// Free stepping, samples from the continuous extension.
    Dense,
    /// Steps are clipped to land on every output time. Use this when the
    /// right-hand side is only piecewise smooth between output times.
    LandOnSamples,
}

const MAX_STEPS: usize = 50_000_000;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

struct Work {
    k: [Vec<C64>; 7],
    ytmp: Vec<C64>,
    ynew: Vec<C64>,
    cont: [Vec<C64>; 5],
}

impl Work {
    fn new(d: usize) -> Self {
        let v = || vec![C64::new(0.0, 0.0); d];
        Self {
            k: [v(), v(), v(), v(), v(), v(), v()],
            ytmp: v(),
            ynew: v(),
            cont: [v(), v(), v(), v(), v()],
        }
    }
}

/// Integrates from `times[0]` with state `y0` and returns the state at every
/// entry of `times` (strictly increasing), flattened as `times.len() * dim`.
pub fn integrate<S: System>(
    sys: &S,
    y0: &[C64],
    times: &[f64],
    tol: Tolerances,
    sampling: Sampling,
) -> Result<Vec<C64>> {
    let d = sys.dim();
    assert_eq!(y0.len(), d, "integrate: state length mismatch");
    let mut out = Vec::with_capacity(times.len() * d);
    if times.is_empty() {
        return Ok(out);
    }
    out.extend_from_slice(y0);
    if times.len() == 1 {
        return Ok(out);
    }
    let t_end = *times.last().unwrap();
    let span = t_end - times[0];
    let mut w = Work::new(d);
    let mut y = y0.to_vec();
    let mut t = times[0];
    sys.rhs(t, &y, &mut w.k[0]);
    let f0 = w.k[0].clone();
    let mut h = initial_step(sys, t, &y, &f0, tol, span, &mut w);
    let mut next = 1; // index of the next output sample
    let mut steps = 0;
    let mut fac_max = 5.0;
    while next < times.len() {
        steps += 1;
        if steps > MAX_STEPS {
            return Err(Error::TooManySteps { steps: MAX_STEPS, t });
        }
        if h < 16.0 * f64::EPSILON * t.abs().max(span) {
            return Err(Error::StepUnderflow { t });
        }
        let mut lands = false;
        let target = match sampling {
            Sampling::Dense => t_end,
            Sampling::LandOnSamples => times[next],
        };
        if t + h >= target || (target - (t + h)) < 1e-12 * span {
            h = target - t;
            lands = true;
        }
        let err = step(sys, t, &y, h, tol, &mut w);
        if !err.is_finite() {
            h *= 0.1;
            fac_max = 1.0;
            continue;
        }
        let fac = (0.9 * err.powf(-0.2)).clamp(0.2, fac_max);
        if err <= 1.0 {
            let t_new = if lands { target } else { t + h };
            if sampling == Sampling::Dense {
                while next < times.len() && times[next] <= t_new {
                    let theta = (times[next] - t) / h;
                    dense_eval(&w.cont, theta, &mut w.ytmp);
                    out.extend_from_slice(&w.ytmp);
                    next += 1;
                }
            } else if lands {
                out.extend_from_slice(&w.ynew);
                next += 1;
            }
            t = t_new;
            std::mem::swap(&mut y, &mut w.ynew);
            let (head, tail) = w.k.split_at_mut(6);
            head[0].copy_from_slice(&tail[0]);
            fac_max = 5.0;
            // keep the step that the controller asked for, even when the
            // previous step was clipped by a sample
            h *= fac;
        } else {
            h *= fac;
            fac_max = 1.0;
        }
    }
    Ok(out)
}

fn weighted_rms(err: &[C64], y: &[C64], ynew: &[C64], tol: Tolerances) -> f64 {
    let d = err.len() as f64;
    let s: f64 = err
        .iter()
        .zip(y)
        .zip(ynew)
        .map(|((e, a), b)| {
            let sc = tol.atol + tol.rtol * a.norm().max(b.norm());
            (e.norm() / sc).powi(2)
        })
        .sum();
    (s / d).sqrt()
}

fn initial_step<S: System>(
    sys: &S,
    t: f64,
    y: &[C64],
    f0: &[C64],
    tol: Tolerances,
    span: f64,
    w: &mut Work,
) -> f64 {
    let zero = vec![C64::new(0.0, 0.0); y.len()];
    let d0 = weighted_rms(y, &zero, &zero, tol);
    let d1 = weighted_rms(f0, y, y, tol);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    for (yt, (yi, fi)) in w.ytmp.iter_mut().zip(y.iter().zip(f0)) {
        *yt = yi + fi * h0;
    }
    sys.rhs(t + h0, &w.ytmp, &mut w.k[1]);
    let diff: Vec<C64> = w.k[1].iter().zip(f0).map(|(a, b)| (a - b) / h0).collect();
    let d2 = weighted_rms(&diff, y, y, tol);
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(span)
}

/// One trial step. Fills `ynew`, `k[6]` (FSAL) and the dense coefficients;
/// returns the scaled error norm.
fn step<S: System>(sys: &S, t: f64, y: &[C64], h: f64, tol: Tolerances, w: &mut Work) -> f64 {
    let d = y.len();
    macro_rules! stage {
        ($dst:expr, $c:expr, [$($a:expr => $ki:expr),*]) => {{
            for i in 0..d {
                w.ytmp[i] = y[i] $(+ w.k[$ki][i] * (h * $a))*;
            }
            let (ytmp, k) = (&w.ytmp, &mut w.k);
            sys.rhs(t + $c * h, ytmp, &mut k[$dst]);
        }};
    }
    stage!(1, C2, [A21 => 0]);
    stage!(2, C3, [A31 => 0, A32 => 1]);
    stage!(3, C4, [A41 => 0, A42 => 1, A43 => 2]);
    stage!(4, C5, [A51 => 0, A52 => 1, A53 => 2, A54 => 3]);
    stage!(5, 1.0, [A61 => 0, A62 => 1, A63 => 2, A64 => 3, A65 => 4]);
    for i in 0..d {
        w.ynew[i] = y[i]
            + (w.k[0][i] * A71 + w.k[2][i] * A73 + w.k[3][i] * A74 + w.k[4][i] * A75 + w.k[5][i] * A76) * h;
    }
    {
        let (ynew, k) = (&w.ynew, &mut w.k);
        sys.rhs(t + h, ynew, &mut k[6]);
    }
    let mut err = vec![C64::new(0.0, 0.0); d];
    for i in 0..d {
        err[i] = (w.k[0][i] * E1
            + w.k[2][i] * E3
            + w.k[3][i] * E4
            + w.k[4][i] * E5
            + w.k[5][i] * E6
            + w.k[6][i] * E7)
            * h;
    }
    for i in 0..d {
        let ydiff = w.ynew[i] - y[i];
        let bspl = w.k[0][i] * h - ydiff;
        w.cont[0][i] = y[i];
        w.cont[1][i] = ydiff;
        w.cont[2][i] = bspl;
        w.cont[3][i] = ydiff - w.k[6][i] * h - bspl;
        w.cont[4][i] = (w.k[0][i] * D1
            + w.k[2][i] * D3
            + w.k[3][i] * D4
            + w.k[4][i] * D5
            + w.k[5][i] * D6
            + w.k[6][i] * D7)
            * h;
    }
    weighted_rms(&err, y, &w.ynew, tol)
}

fn dense_eval(cont: &[Vec<C64>; 5], theta: f64, out: &mut [C64]) {
    let t1 = 1.0 - theta;
    for i in 0..out.len() {
        out[i] = cont[0][i]
            + (cont[1][i] + (cont[2][i] + (cont[3][i] + cont[4][i] * t1) * theta) * t1) * theta;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rotation {
        omega: C64,
    }

    impl System for Rotation {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = C64::new(0.0, -1.0) * self.omega * y[0];
        }
    }

    fn times(n: usize, t_end: f64) -> Vec<f64> {
        (0..n).map(|k| t_end * k as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn damped_oscillator_matches_exponential() {
        let sys = Rotation {
            omega: C64::new(2.5, -0.4),
        };
        for sampling in [Sampling::Dense, Sampling::LandOnSamples] {
            let ts = times(501, 10.0);
            let y = integrate(&sys, &[C64::new(1.0, 0.0)], &ts, Tolerances::default(), sampling).unwrap();
            for (t, v) in ts.iter().zip(&y) {
                let exact = (C64::new(0.0, -1.0) * sys.omega * t).exp();
                assert!((v - exact).norm() < 1e-9, "{sampling:?} t={t}: {v} vs {exact}");
            }
        }
    }

    #[test]
    fn tighter_tolerance_reduces_error() {
        let sys = Rotation {
            omega: C64::new(4.0, -0.1),
        };
        let ts = times(11, 20.0);
        let err = |tol: Tolerances| {
            let y = integrate(&sys, &[C64::new(1.0, 0.0)], &ts, tol, Sampling::Dense).unwrap();
            let exact = (C64::new(0.0, -1.0) * sys.omega * 20.0).exp();
            (y[10] - exact).norm()
        };
        let loose = err(Tolerances { rtol: 1e-6, atol: 1e-8 });
        let tight = err(Tolerances::default());
        assert!(tight < loose / 100.0, "{tight} vs {loose}");
    }

    struct Blowup;

    impl System for Blowup {
        fn dim(&self) -> usize {
            1
        }
        fn rhs(&self, _t: f64, y: &[C64], dy: &mut [C64]) {
            dy[0] = y[0] * y[0];
        }
    }

    #[test]
    fn finite_time_singularity_reports_underflow() {
        let r = integrate(&Blowup, &[C64::new(1.0, 0.0)], &[0.0, 2.0], Tolerances::default(), Sampling::Dense);
        match r {
            Err(Error::StepUnderflow { t }) => assert!((t - 1.0).abs() < 1e-3, "t = {t}"),
            other => panic!("expected underflow, got {other:?}"),
        }
    }
}
