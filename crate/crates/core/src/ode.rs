//! Dormand–Prince 5(4) with step-size control and continuous (dense) output.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct OdeOptions {
    pub rtol: f64,
    pub atol: f64,
    pub h_init: Option<f64>,
    pub h_max: f64,
    pub max_steps: usize,
}

impl OdeOptions {
    pub fn with_tol(tol: f64) -> Self {
        Self {
            rtol: tol,
            atol: tol,
            ..Default::default()
        }
    }
}

impl Default for OdeOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-9,
            h_init: None,
            h_max: f64::INFINITY,
            max_steps: 50_000_000,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct OdeStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

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

/// Integrates y' = f(t, y) from `t0` to `t_end` and returns the state at each
/// time in `samples` (ascending, within [t0, t_end]). Steps restart at every
/// entry of `breakpoints`, where the right-hand side may have a kink.
///
/// `f` may fail (for example when the trajectory leaves the domain where the
/// model is defined); the error is passed through.
pub fn integrate<F>(
    mut f: F,
    t0: f64,
    y0: &[f64],
    t_end: f64,
    samples: &[f64],
    breakpoints: &[f64],
    opts: &OdeOptions,
) -> Result<(Vec<Vec<f64>>, OdeStats)>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y0.len();
    for w in samples.windows(2) {
        if w[1] < w[0] {
            return Err(Error::validation("ode", "sample times must be ascending"));
        }
    }
    if samples.iter().any(|&s| s < t0 || s > t_end) {
        return Err(Error::validation("ode", "sample times must lie in [t0, t_end]"));
    }
    let mut out: Vec<Vec<f64>> = Vec::with_capacity(samples.len());
    let mut stats = OdeStats::default();
    let mut next_sample = 0;
    while next_sample < samples.len() && samples[next_sample] <= t0 {
        out.push(y0.to_vec());
        next_sample += 1;
    }

    let mut segments: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&b| b > t0 && b < t_end)
        .collect();
    segments.sort_by(f64::total_cmp);
    segments.push(t_end);

    let mut y = y0.to_vec();
    let mut t = t0;
    let mut k1 = vec![0.0; n];
    let mut k2 = vec![0.0; n];
    let mut k3 = vec![0.0; n];
    let mut k4 = vec![0.0; n];
    let mut k5 = vec![0.0; n];
    let mut k6 = vec![0.0; n];
    let mut k7 = vec![0.0; n];
    let mut y1 = vec![0.0; n];
    let mut ys = vec![0.0; n];
    let mut rc = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let mut h_prev: Option<f64> = opts.h_init;

    for &seg_end in &segments {
        if seg_end <= t {
            continue;
        }
        f(t, &y, &mut k1)?;
        stats.evaluations += 1;
        let span = seg_end - t;
        let mut h = match h_prev {
            Some(h) => h.min(span),
            None => initial_step(&mut f, t, &y, &k1, span, opts, &mut stats)?,
        }
        .min(opts.h_max);
        let mut fac_old: f64 = 1e-4;
        let mut last_rejected = false;
        loop {
            if stats.accepted + stats.rejected >= opts.max_steps {
                return Err(Error::Stiffness { t, h });
            }
            let last = t + h >= seg_end - 1e-14 * seg_end.abs().max(1.0);
            if last {
                h = seg_end - t;
            }
            if h.abs() < 1e-14 * t.abs().max(1e-300) || h <= 0.0 {
                return Err(Error::Stiffness { t, h });
            }
            for i in 0..n {
                ys[i] = y[i] + h * A21 * k1[i];
            }
            f(t + C2 * h, &ys, &mut k2)?;
            for i in 0..n {
                ys[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
            }
            f(t + C3 * h, &ys, &mut k3)?;
            for i in 0..n {
                ys[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
            }
            f(t + C4 * h, &ys, &mut k4)?;
            for i in 0..n {
                ys[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
            }
            f(t + C5 * h, &ys, &mut k5)?;
            for i in 0..n {
                ys[i] = y[i]
                    + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
            }
            let t_new = if last { seg_end } else { t + h };
            // stay on the left side of a breakpoint
            let t_stage = if last { t_new - 4.0 * f64::EPSILON * t_new.abs().max(h) } else { t_new };
            f(t_stage, &ys, &mut k6)?;
            for i in 0..n {
                y1[i] = y[i]
                    + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
            }
            f(t_stage, &y1, &mut k7)?;
            stats.evaluations += 6;

            let mut err = 0.0;
            for i in 0..n {
                let e = h
                    * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = opts.atol + opts.rtol * y[i].abs().max(y1[i].abs());
                err += (e / sc) * (e / sc);
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                stats.rejected += 1;
                h *= 0.1;
                last_rejected = true;
                continue;
            }

            // step-size controller with Lund stabilization
            let expo1 = 0.2 - 0.04 * 0.75;
            let fac11 = err.powf(expo1);
            let mut fac = fac11 / fac_old.powf(0.04);
            fac = (fac / 0.9).clamp(0.1, 5.0);
            let h_new = h / fac;

            if err <= 1.0 {
                fac_old = err.max(1e-4);
                stats.accepted += 1;
                // dense output coefficients
                for i in 0..n {
                    let ydiff = y1[i] - y[i];
                    let bspl = h * k1[i] - ydiff;
                    rc[0][i] = y[i];
                    rc[1][i] = ydiff;
                    rc[2][i] = bspl;
                    rc[3][i] = ydiff - h * k7[i] - bspl;
                    rc[4][i] = h
                        * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
                }
                while next_sample < samples.len() && samples[next_sample] <= t_new {
                    let s = samples[next_sample];
                    if s == t_new {
                        out.push(y1.clone());
                    } else {
                        let th = (s - t) / h;
                        let th1 = 1.0 - th;
                        out.push(
                            (0..n)
                                .map(|i| {
                                    rc[0][i]
                                        + th * (rc[1][i]
                                            + th1 * (rc[2][i] + th * (rc[3][i] + th1 * rc[4][i])))
                                })
                                .collect(),
                        );
                    }
                    next_sample += 1;
                }
                std::mem::swap(&mut y, &mut y1);
                std::mem::swap(&mut k1, &mut k7);
                t = t_new;
                let h_next = if last_rejected { h_new.min(h) } else { h_new };
                last_rejected = false;
                h_prev = Some(h_next.min(opts.h_max));
                if last {
                    break;
                }
                h = h_next.min(opts.h_max);
            } else {
                stats.rejected += 1;
                h /= (fac11 / 0.9).min(5.0);
                last_rejected = true;
            }
        }
    }
    while next_sample < samples.len() {
        out.push(y.clone());
        next_sample += 1;
    }
    Ok((out, stats))
}

fn initial_step<F>(
    f: &mut F,
    t: f64,
    y: &[f64],
    k1: &[f64],
    span: f64,
    opts: &OdeOptions,
    stats: &mut OdeStats,
) -> Result<f64>
where
    F: FnMut(f64, &[f64], &mut [f64]) -> Result<()>,
{
    let n = y.len();
    let sc: Vec<f64> = y.iter().map(|v| opts.atol + opts.rtol * v.abs()).collect();
    let d0 = (y.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (k1.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 * span } else { 0.01 * d0 / d1 };
    h0 = h0.min(span);
    let y1: Vec<f64> = y.iter().zip(k1).map(|(v, k)| v + h0 * k).collect();
    let mut k2 = vec![0.0; n];
    f(t + h0, &y1, &mut k2)?;
    stats.evaluations += 1;
    let d2 = (k2
        .iter()
        .zip(k1)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b) / s).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(span))
}
