//! Two-mode Gaussian moments, quadrature variances and the inseparability
//! witness V_d(θ) + V_s(θ + π/2), with a homodyne Monte Carlo.
//!
//! Quadratures X(θ) = x cos(θ − π/4) + p sin(θ − π/4) with x = (a + a†)/√2,
//! so the vacuum variance of a single mode is ½ and the separability bound
//! of the witness is 2.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pair::{ModeState, PairMode};

const MODULE: &str = "entanglement";
const PHYSICALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwoModeMoments {
    /// ⟨a₊†a₊⟩ = ⟨a₋†a₋⟩
    pub n: f64,
    /// ⟨a₊a₋⟩
    pub c: Complex64,
}

impl TwoModeMoments {
    pub fn vacuum() -> Self {
        Self {
            n: 0.0,
            c: Complex64::new(0.0, 0.0),
        }
    }

    /// Two-mode squeezed vacuum; c is real and negative.
    pub fn tmsv(r: f64) -> Self {
        Self {
            n: r.sinh().powi(2),
            c: Complex64::new(-r.sinh() * r.cosh(), 0.0),
        }
    }

    /// n(n+1) − |c|², zero for a pure state.
    pub fn purity_gap(&self) -> f64 {
        self.n * (self.n + 1.0) - self.c.norm_sqr()
    }

    pub fn check(&self) -> Result<()> {
        let scale = (self.n * (self.n + 1.0)).max(1.0);
        if !(self.n >= -PHYSICALITY_TOL) || self.purity_gap() < -PHYSICALITY_TOL * scale {
            return Err(Error::Physicality {
                module: MODULE,
                msg: format!(
                    "n = {:.6e}, |c|² = {:.6e} violates |c|² <= n(n+1)",
                    self.n,
                    self.c.norm_sqr()
                ),
            });
        }
        Ok(())
    }

    /// Re(c e^{−2i(θ−π/4)}) = ⟨X₊(θ) X₋(θ)⟩.
    pub fn cross(&self, theta: f64) -> f64 {
        let l = theta - FRAC_PI_4;
        (self.c * Complex64::from_polar(1.0, -2.0 * l)).re
    }

    pub fn v_single(&self) -> f64 {
        self.n + 0.5
    }

    pub fn v_d(&self, theta: f64) -> f64 {
        2.0 * self.n + 1.0 - 2.0 * self.cross(theta)
    }

    pub fn v_s(&self, theta: f64) -> f64 {
        2.0 * self.n + 1.0 + 2.0 * self.cross(theta)
    }

    /// V_d(θ) + V_s(θ + π/2)
    pub fn witness(&self, theta: f64) -> f64 {
        self.v_d(theta) + self.v_s(theta + FRAC_PI_2)
    }

    /// min over θ of the witness, 2(2n+1) − 4|c|.
    pub fn min_witness(&self) -> f64 {
        2.0 * (2.0 * self.n + 1.0) - 4.0 * self.c.norm()
    }

    /// θ in [0, π) where the witness is smallest.
    pub fn argmin_witness(&self) -> f64 {
        // Re(c e^{−2iλ}) = |c| cos(arg c − 2λ) is largest at λ = arg c / 2
        let t = 0.5 * self.c.arg() + FRAC_PI_4;
        t.rem_euclid(std::f64::consts::PI)
    }
}

/// Bare-mode moments of a pair mode in the frame at q.
pub fn moments_from_state(st: &ModeState, pair: &PairMode, q: f64) -> Result<TwoModeMoments> {
    let m = TwoModeMoments {
        n: pair.population(st, q, MODULE)?,
        c: pair.anomalous(st, q, MODULE)?,
    };
    m.check()?;
    Ok(m)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QuadratureCurve {
    pub theta: Vec<f64>,
    pub v_plus: Vec<f64>,
    pub v_minus: Vec<f64>,
    pub v_d: Vec<f64>,
    pub v_s: Vec<f64>,
    /// V_d(θ) + V_s(θ + π/2)
    pub witness: Vec<f64>,
}

pub fn theta_grid(steps: usize) -> Vec<f64> {
    crate::scan::linspace(0.0, 2.0 * std::f64::consts::PI, steps)
}

pub fn variance_curves(m: &TwoModeMoments, thetas: &[f64]) -> QuadratureCurve {
    QuadratureCurve {
        theta: thetas.to_vec(),
        v_plus: thetas.iter().map(|_| m.v_single()).collect(),
        v_minus: thetas.iter().map(|_| m.v_single()).collect(),
        v_d: thetas.iter().map(|&t| m.v_d(t)).collect(),
        v_s: thetas.iter().map(|&t| m.v_s(t)).collect(),
        witness: thetas.iter().map(|&t| m.witness(t)).collect(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Inseparability {
    pub curve: Vec<f64>,
    pub min: f64,
    pub argmin_theta: f64,
    pub entangled: bool,
}

/// Witness on the grid plus its closed-form minimum.
pub fn inseparability(m: &TwoModeMoments, thetas: &[f64]) -> Inseparability {
    let curve: Vec<f64> = thetas.iter().map(|&t| m.witness(t)).collect();
    let min = m.min_witness();
    Inseparability {
        curve,
        min,
        argmin_theta: m.argmin_witness(),
        entangled: min < 2.0,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomodyneOptions {
    pub shots: usize,
    /// Fraction of the local oscillator coupled out; recorded only.
    pub lo_fraction: f64,
    /// Variance of additive Gaussian noise on each quadrature reading.
    pub detection_noise: f64,
    pub seed: u64,
    pub batches: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HomodyneEstimate {
    pub theta: f64,
    pub v_plus: f64,
    pub v_minus: f64,
    pub v_d: f64,
    pub v_s: f64,
    /// V_d(θ) from the θ setting plus V_s(θ + π/2) from an independent setting.
    pub witness: f64,
    pub se_v_d: f64,
    pub se_v_s: f64,
    pub se_witness: f64,
    /// (2 − I)/SE(I)
    pub sigma_violation: f64,
}

struct Readings {
    plus: Vec<f64>,
    minus: Vec<f64>,
}

fn sample_setting(
    m: &TwoModeMoments,
    theta: f64,
    opts: &HomodyneOptions,
    stream: u64,
) -> Result<Readings> {
    let v = m.v_single();
    let r = m.cross(theta);
    let rho = r / v;
    if !(rho.abs() < 1.0) {
        return Err(Error::Physicality {
            module: MODULE,
            msg: format!("quadrature covariance not positive definite (ρ = {rho})"),
        });
    }
    let sv = v.sqrt();
    let sq = (v * (1.0 - rho * rho)).sqrt();
    let noise = opts.detection_noise.sqrt();
    let batches = opts.batches.max(1).min(opts.shots);
    let per = opts.shots / batches;
    let extra = opts.shots % batches;
    let parts: Vec<(Vec<f64>, Vec<f64>)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let count = per + usize::from(b < extra);
            let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
            rng.set_stream((stream << 20) | b as u64);
            let mut p = Vec::with_capacity(count);
            let mut q = Vec::with_capacity(count);
            for _ in 0..count {
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                let mut xp = sv * z1;
                let mut xm = rho * sv * z1 + sq * z2;
                if noise > 0.0 {
                    xp += noise * rng.sample::<f64, _>(StandardNormal);
                    xm += noise * rng.sample::<f64, _>(StandardNormal);
                }
                p.push(xp);
                q.push(xm);
            }
            (p, q)
        })
        .collect();
    let mut plus = Vec::with_capacity(opts.shots);
    let mut minus = Vec::with_capacity(opts.shots);
    for (p, q) in parts {
        plus.extend(p);
        minus.extend(q);
    }
    Ok(Readings { plus, minus })
}

/// Unbiased sample variance and its delete-one jackknife standard error.
pub fn variance_with_jackknife(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let s1: f64 = x.iter().sum();
    let s2: f64 = x.iter().map(|v| v * v).sum();
    let var = (s2 - s1 * s1 / n) / (n - 1.0);
    if x.len() < 3 {
        return (var, f64::NAN);
    }
    let loo = |v: f64| {
        let a = s1 - v;
        (s2 - v * v - a * a / (n - 1.0)) / (n - 2.0)
    };
    let mean_loo = x.iter().map(|&v| loo(v)).sum::<f64>() / n;
    let ss: f64 = x.iter().map(|&v| (loo(v) - mean_loo).powi(2)).sum();
    (var, ((n - 1.0) / n * ss).sqrt())
}

/// Simulated homodyne estimate at one θ. `theta_index` separates the random
/// streams of different angles.
pub fn homodyne_monte_carlo(
    m: &TwoModeMoments,
    theta: f64,
    theta_index: usize,
    opts: &HomodyneOptions,
) -> Result<HomodyneEstimate> {
    if opts.shots < 2 {
        return Err(Error::validation(MODULE, "at least 2 shots are needed"));
    }
    if !(opts.lo_fraction > 0.0 && opts.lo_fraction < 1.0) {
        return Err(Error::validation(MODULE, "lo_fraction must be in (0, 1)"));
    }
    if !(opts.detection_noise >= 0.0) {
        return Err(Error::validation(MODULE, "detection noise variance must be >= 0"));
    }
    m.check()?;
    let base = 2 * theta_index as u64;
    let a = sample_setting(m, theta, opts, base)?;
    let b = sample_setting(m, theta + FRAC_PI_2, opts, base + 1)?;
    let diff: Vec<f64> = a.plus.iter().zip(&a.minus).map(|(p, q)| p - q).collect();
    let sum: Vec<f64> = a.plus.iter().zip(&a.minus).map(|(p, q)| p + q).collect();
    let sum_b: Vec<f64> = b.plus.iter().zip(&b.minus).map(|(p, q)| p + q).collect();
    let (v_d, se_d) = variance_with_jackknife(&diff);
    let (v_s, se_s) = variance_with_jackknife(&sum);
    let (v_s2, se_s2) = variance_with_jackknife(&sum_b);
    let (v_plus, _) = variance_with_jackknife(&a.plus);
    let (v_minus, _) = variance_with_jackknife(&a.minus);
    let witness = v_d + v_s2;
    let se_witness = (se_d * se_d + se_s2 * se_s2).sqrt();
    Ok(HomodyneEstimate {
        theta,
        v_plus,
        v_minus,
        v_d,
        v_s,
        witness,
        se_v_d: se_d,
        se_v_s: se_s,
        se_witness,
        sigma_violation: (2.0 - witness) / se_witness,
    })
}

/// Monte Carlo over a grid of angles; ordered like `thetas`.
pub fn homodyne_scan(m: &TwoModeMoments, thetas: &[f64], opts: &HomodyneOptions) -> Result<Vec<HomodyneEstimate>> {
    thetas
        .iter()
        .enumerate()
        .map(|(i, &t)| homodyne_monte_carlo(m, t, i, opts))
        .collect()
}
