//! Modulation-frequency and static-q scans with peak analysis.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::schedule::QzeSchedule;
use crate::trapped::{self, TrappedMode, FRACTION_VALIDITY_BOUND};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub index: usize,
    /// modulation frequency (Hz) or static q (Hz)
    pub x: f64,
    pub atom_count: u64,
    pub fraction: f64,
    /// n_j per spin state at the end of the drive
    pub populations: Vec<f64>,
    pub valid: bool,
    pub max_casimir_error: f64,
    pub error: Option<String>,
}

impl ScanPoint {
    pub fn flags(&self) -> String {
        match &self.error {
            Some(e) => format!("error: {e}"),
            None if !self.valid => "nonlinear".into(),
            None => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    /// Mode index, or None for the total fraction.
    pub mode: Option<usize>,
    pub f_peak_hz: f64,
    pub height: f64,
    pub fwhm_hz: Option<f64>,
    /// max over the baseline of the curve
    pub contrast: f64,
}

/// A peak counts as detected when it stands this far above the baseline.
pub const DETECTION_CONTRAST: f64 = 20.0;

impl Peak {
    /// Enough contrast and a half-maximum crossing on both sides, so maxima
    /// sitting on the scan boundary do not count.
    pub fn detected(&self) -> bool {
        self.contrast >= DETECTION_CONTRAST && self.fwhm_hz.is_some()
    }
}

pub fn linspace(a: f64, b: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..steps)
            .map(|i| a + (b - a) * i as f64 / (steps - 1) as f64)
            .collect(),
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(Error::validation("scan", "worker count must be >= 1"));
        }
        b = b.num_threads(w);
    }
    b.build()
        .map_err(|e| Error::validation("scan", format!("cannot start worker pool: {e}")))
}

/// One drive at frequency `f`: populations at the end of the schedule.
pub fn drive_point(
    tmodes: &[TrappedMode],
    template: &QzeSchedule,
    f: f64,
    seeds: &[f64],
    atom_count: u64,
    tol: f64,
    index: usize,
) -> ScanPoint {
    let sched = template.with_frequency(f);
    let t_end = sched.duration;
    let run = || -> Result<(Vec<f64>, f64)> {
        let states = trapped::integrate_trapped(tmodes, &sched, seeds, &[t_end], tol)?;
        let q = sched.q_eval(t_end)?;
        Ok((trapped::mode_populations(&states[0], tmodes, q)?, states[0].max_casimir_error()))
    };
    match run() {
        Ok((populations, cas)) => {
            let fraction = 2.0 * populations.iter().sum::<f64>() / atom_count as f64;
            ScanPoint {
                index,
                x: f,
                atom_count,
                fraction,
                populations,
                valid: fraction <= FRACTION_VALIDITY_BOUND,
                max_casimir_error: cas,
                error: None,
            }
        }
        Err(e) => ScanPoint {
            index,
            x: f,
            atom_count,
            fraction: f64::NAN,
            populations: vec![f64::NAN; tmodes.len()],
            valid: false,
            max_casimir_error: f64::NAN,
            error: Some(e.to_string()),
        },
    }
}

/// Scans the modulation frequency of `template`. Points already present in
/// `done` (by index) are reused; `sink` sees each newly computed point.
/// Output is ordered by index and independent of the worker count.
#[allow(clippy::too_many_arguments)]
pub fn frequency_scan(
    tmodes: &[TrappedMode],
    template: &QzeSchedule,
    freqs: &[f64],
    seeds: &[f64],
    atom_count: u64,
    tol: f64,
    workers: Option<usize>,
    done: &[ScanPoint],
    sink: &(dyn Fn(&ScanPoint) + Sync),
) -> Result<Vec<ScanPoint>> {
    template.validate()?;
    let pool = pool(workers)?;
    let reuse = |i: usize| {
        done.iter()
            .find(|p| p.index == i && p.atom_count == atom_count && p.x == freqs[i])
            .cloned()
    };
    Ok(pool.install(|| {
        freqs
            .par_iter()
            .enumerate()
            .map(|(i, &f)| {
                reuse(i).unwrap_or_else(|| {
                    let p = drive_point(tmodes, template, f, seeds, atom_count, tol, i);
                    sink(&p);
                    p
                })
            })
            .collect()
    }))
}

/// Growth from the bare vacuum while holding each static q.
pub fn static_scan(tmodes: &[TrappedMode], qs: &[f64], hold: f64, atom_count: u64) -> Vec<ScanPoint> {
    trapped::static_instability_spectrum(tmodes, qs, hold, atom_count as f64)
        .into_iter()
        .enumerate()
        .map(|(index, s)| ScanPoint {
            index,
            x: s.q,
            atom_count,
            fraction: s.fraction,
            populations: s.populations,
            valid: s.valid,
            max_casimir_error: 0.0,
            error: None,
        })
        .collect()
}

/// Fraction of the scan used as baseline. A low quantile rather than the
/// median, so a peak filling most of a narrow window still has a floor.
pub const BASELINE_QUANTILE: f64 = 0.1;

fn quantile(v: &[f64], p: f64) -> f64 {
    let mut s: Vec<f64> = v.iter().copied().filter(|x| x.is_finite()).collect();
    if s.is_empty() {
        return f64::NAN;
    }
    s.sort_by(f64::total_cmp);
    let pos = p * (s.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(s.len() - 1);
    s[i] + (pos - i as f64) * (s[j] - s[i])
}

/// Global maximum of `ys` refined by a parabola through its neighbours, with
/// the full width at half height above the baseline.
pub fn find_peak(xs: &[f64], ys: &[f64], mode: Option<usize>) -> Option<Peak> {
    let n = xs.len();
    if n < 3 || ys.len() != n {
        return None;
    }
    let k = (0..n)
        .filter(|&i| ys[i].is_finite())
        .max_by(|&a, &b| ys[a].total_cmp(&ys[b]))?;
    let base = quantile(ys, BASELINE_QUANTILE);
    let (mut xp, mut yp) = (xs[k], ys[k]);
    if k > 0 && k + 1 < n && ys[k - 1].is_finite() && ys[k + 1].is_finite() {
        let (a, b, c) = (ys[k - 1], ys[k], ys[k + 1]);
        let den = a - 2.0 * b + c;
        if den < 0.0 {
            let s = (0.5 * (a - c) / den).clamp(-0.5, 0.5);
            let h = if s >= 0.0 { xs[k + 1] - xs[k] } else { xs[k] - xs[k - 1] };
            xp = xs[k] + s * h;
            yp = b - 0.25 * (a - c) * s;
        }
    }
    let half = base + 0.5 * (yp - base);
    let cross = |i0: usize, i1: usize| xs[i0] + (half - ys[i0]) * (xs[i1] - xs[i0]) / (ys[i1] - ys[i0]);
    let left = (0..k).rev().find(|&i| ys[i] < half).map(|i| cross(i, i + 1));
    let right = (k + 1..n).find(|&i| ys[i] < half).map(|i| cross(i - 1, i));
    let fwhm = match (left, right) {
        (Some(l), Some(r)) => Some(r - l),
        _ => None,
    };
    Some(Peak {
        mode,
        f_peak_hz: xp,
        height: yp,
        fwhm_hz: fwhm,
        contrast: if base > 0.0 { yp / base } else { f64::INFINITY },
    })
}

/// Peak of the total fraction followed by one peak per mode.
pub fn detect_peaks(points: &[ScanPoint]) -> Vec<Peak> {
    let xs: Vec<f64> = points.iter().map(|p| p.x).collect();
    let mut out = Vec::new();
    let total: Vec<f64> = points.iter().map(|p| p.fraction).collect();
    out.extend(find_peak(&xs, &total, None));
    let k = points.first().map_or(0, |p| p.populations.len());
    for j in 0..k {
        let ys: Vec<f64> = points.iter().map(|p| p.populations[j]).collect();
        out.extend(find_peak(&xs, &ys, Some(j)));
    }
    out
}

/// Ω/2π in Hz from n = sinh²(Ωt).
pub fn creation_rate(n: f64, duration: f64) -> f64 {
    n.max(0.0).sqrt().asinh() / duration / TAU
}
