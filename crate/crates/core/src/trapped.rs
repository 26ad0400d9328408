//! Pair dynamics of the trapped modes φ_j in the diagonal approximation.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::modes::{EffectiveMode, OverlapMatrix};
use crate::pair::{ModeState, PairMode};
use crate::schedule::QzeSchedule;

const MODULE: &str = "trapped";

/// Fractions above this are outside the small-depletion regime.
pub const FRACTION_VALIDITY_BOUND: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrappedMode {
    pub j: usize,
    /// E_j/h, Hz
    pub energy: f64,
    pub chi_jj: f64,
    /// U1/h in Hz·μm^dims
    pub u1: f64,
}

impl TrappedMode {
    /// U1χ_jj in Hz.
    pub fn coupling(&self) -> f64 {
        self.u1 * self.chi_jj
    }

    pub fn pair(&self) -> PairMode {
        PairMode::new(self.energy, self.coupling())
    }

    pub fn xi(&self, q: f64) -> Complex64 {
        self.pair().xi(q)
    }

    /// (cosh 2α_j, sinh 2α_j) for the + branch.
    pub fn angles(&self, q: f64) -> Result<(f64, f64)> {
        self.pair().angles(q, MODULE)
    }

    /// q_j = −E_j, centre of the instability window.
    pub fn resonance_q(&self) -> f64 {
        -self.energy
    }

    /// Open interval of q where ξ_j is imaginary.
    pub fn window(&self) -> (f64, f64) {
        let c = self.coupling().abs();
        (-self.energy - c, -self.energy + c)
    }

    /// Exponential rate Im ξ_j in Hz (zero outside the window).
    pub fn instability_rate(&self, q: f64) -> f64 {
        self.xi(q).im
    }
}

pub fn trapped_modes(modes: &[EffectiveMode], chi: &OverlapMatrix, u1: f64) -> Result<Vec<TrappedMode>> {
    if chi.len() != modes.len() {
        return Err(Error::validation(
            MODULE,
            format!("{} modes but a {}x{} overlap matrix", modes.len(), chi.len(), chi.len()),
        ));
    }
    Ok(modes
        .iter()
        .enumerate()
        .map(|(j, m)| TrappedMode {
            j,
            energy: m.energy,
            chi_jj: chi.chi[j][j],
            u1,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrappedModeState {
    pub t: f64,
    pub modes: Vec<ModeState>,
    /// Casimir of each mode at t = 0: (2 seed + 1)².
    pub initial_casimir: Vec<f64>,
}

impl TrappedModeState {
    /// Largest relative drift of the Casimir from its initial value.
    pub fn max_casimir_error(&self) -> f64 {
        self.modes
            .iter()
            .zip(&self.initial_casimir)
            .map(|(m, &d0)| m.casimir_drift(d0))
            .fold(0.0, f64::max)
    }
}

/// Integrates every mode independently. `seeds[j]` is P_j(0) (missing entries
/// are zero), with S_j = A_j = 0.
pub fn integrate_trapped(
    tmodes: &[TrappedMode],
    schedule: &QzeSchedule,
    seeds: &[f64],
    samples: &[f64],
    tol: f64,
) -> Result<Vec<TrappedModeState>> {
    if let Some(s) = seeds.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::validation(MODULE, format!("seed occupations must be >= 0, got {s}")));
    }
    let per_mode: Vec<Vec<ModeState>> = tmodes
        .par_iter()
        .map(|m| {
            let seed = seeds.get(m.j).copied().unwrap_or(0.0);
            m.pair()
                .integrate(schedule, &ModeState::seeded(0.0, seed), samples, tol, MODULE)
        })
        .collect::<Result<_>>()?;
    let initial_casimir: Vec<f64> = tmodes
        .iter()
        .map(|m| ModeState::seeded(0.0, seeds.get(m.j).copied().unwrap_or(0.0)).casimir())
        .collect();
    Ok(samples
        .iter()
        .enumerate()
        .map(|(i, &t)| TrappedModeState {
            t,
            modes: per_mode.iter().map(|traj| traj[i]).collect(),
            initial_casimir: initial_casimir.clone(),
        })
        .collect())
}

/// Bare occupations n_j per spin state.
pub fn mode_populations(state: &TrappedModeState, tmodes: &[TrappedMode], q: f64) -> Result<Vec<f64>> {
    tmodes
        .iter()
        .zip(&state.modes)
        .map(|(m, st)| m.pair().population(st, q, MODULE))
        .collect()
}

/// Σ_j 2 n_j / N.
pub fn transferred_fraction(state: &TrappedModeState, tmodes: &[TrappedMode], q: f64, atom_count: f64) -> Result<f64> {
    Ok(2.0 * mode_populations(state, tmodes, q)?.iter().sum::<f64>() / atom_count)
}

/// Occupation after holding the bare vacuum at fixed q for `hold` seconds:
/// (λ/ξ)² sin²(2πξt), continued to sinh² inside the window.
pub fn static_population(m: &TrappedMode, q: f64, hold: f64) -> f64 {
    let lam = m.coupling();
    let x2 = m.pair().xi_sq(q);
    if x2 > 0.0 {
        let x = x2.sqrt();
        (lam / x).powi(2) * (TAU * x * hold).sin().powi(2)
    } else if x2 < 0.0 {
        let g = (-x2).sqrt();
        (lam / g).powi(2) * (TAU * g * hold).sinh().powi(2)
    } else {
        (TAU * lam * hold).powi(2)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StaticPoint {
    pub q: f64,
    /// Im ξ_j per mode, Hz
    pub rates: Vec<f64>,
    pub populations: Vec<f64>,
    pub fraction: f64,
    pub valid: bool,
}

/// Growth from the bare vacuum at each static q for a hold time.
pub fn static_instability_spectrum(tmodes: &[TrappedMode], qs: &[f64], hold: f64, atom_count: f64) -> Vec<StaticPoint> {
    qs.iter()
        .map(|&q| {
            let populations: Vec<f64> = tmodes.iter().map(|m| static_population(m, q, hold)).collect();
            let fraction = 2.0 * populations.iter().sum::<f64>() / atom_count;
            StaticPoint {
                q,
                rates: tmodes.iter().map(|m| m.instability_rate(q)).collect(),
                populations,
                fraction,
                valid: fraction <= FRACTION_VALIDITY_BOUND,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeedCalibration {
    /// q held during the seed phase, Hz
    pub q: f64,
    pub duration: f64,
    pub mode: usize,
    /// P_mode(0) handed to the modulation phase
    pub occupation: f64,
    pub fraction: f64,
}

/// Seed phase: picks q inside the window of `mode` such that holding for
/// `duration` transfers `fraction` of the atoms, unless `q` is given.
pub fn calibrate_seed(
    tmodes: &[TrappedMode],
    mode: usize,
    fraction: f64,
    duration: f64,
    q: Option<f64>,
    atom_count: f64,
) -> Result<SeedCalibration> {
    let m = tmodes
        .get(mode)
        .ok_or_else(|| Error::validation(MODULE, format!("seed mode {mode} is not among the {} modes", tmodes.len())))?;
    if !(duration > 0.0) {
        return Err(Error::validation(MODULE, "seed duration must be positive"));
    }
    let to_fraction = |n: f64| 2.0 * n / atom_count;
    let q = match q {
        Some(q) => q,
        None => {
            if !(fraction > 0.0 && fraction < FRACTION_VALIDITY_BOUND) {
                return Err(Error::validation(MODULE, format!("seed fraction {fraction} out of (0, 0.5)")));
            }
            let centre = m.resonance_q();
            let half = m.coupling().abs();
            let at = |d: f64| to_fraction(static_population(m, centre + d, duration));
            if at(0.0) < fraction || at(half) > fraction {
                return Err(Error::domain(
                    MODULE,
                    format!(
                        "seed fraction {fraction} unreachable in {duration} s (window gives {:.3e} to {:.3e})",
                        at(half),
                        at(0.0)
                    ),
                ));
            }
            // growth decreases monotonically with detuning from the centre
            let (mut lo, mut hi) = (0.0, half);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if at(mid) > fraction {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            centre + 0.5 * (lo + hi)
        }
    };
    let occupation = static_population(m, q, duration);
    Ok(SeedCalibration {
        q,
        duration,
        mode,
        occupation,
        fraction: to_fraction(occupation),
    })
}
