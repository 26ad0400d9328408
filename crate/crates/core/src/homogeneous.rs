//! Spin excitations of a homogeneous condensate at momentum ±k.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pair::{ModeState, PairMode};
use crate::params::{derive_couplings, PhysicalParams};
use crate::schedule::QzeSchedule;

const MODULE: &str = "homogeneous";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpinDispersion {
    /// 1/μm
    pub k: f64,
    /// ħ²k²/2M in Hz
    pub eps_k: f64,
    pub q: f64,
    /// n U1 in Hz
    pub n_u1: f64,
    /// Hz; imaginary part set inside the instability window
    pub xi: Complex64,
}

impl SpinDispersion {
    pub fn is_stable(&self) -> bool {
        self.xi.im == 0.0 && self.xi.re > 0.0
    }
}

/// The ±k pair at fixed density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousMode {
    pub k: f64,
    pub eps_k: f64,
    pub n_u1: f64,
}

impl HomogeneousMode {
    /// `density` in μm⁻³.
    pub fn new(k: f64, density: f64, p: &PhysicalParams) -> Self {
        Self {
            k,
            eps_k: p.kinetic_coefficient() * k * k,
            n_u1: density * derive_couplings(p).u1_hz(),
        }
    }

    pub fn pair(&self) -> PairMode {
        PairMode::new(self.eps_k + self.n_u1, self.n_u1)
    }

    pub fn dispersion(&self, q: f64) -> SpinDispersion {
        let prod = (self.eps_k + q) * (self.eps_k + q + 2.0 * self.n_u1);
        let xi = if prod >= 0.0 {
            Complex64::new(prod.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-prod).sqrt())
        };
        SpinDispersion {
            k: self.k,
            eps_k: self.eps_k,
            q,
            n_u1: self.n_u1,
            xi,
        }
    }

    /// (cosh 2α, sinh 2α) for the + branch; the − branch flips the sign of sinh 2α.
    pub fn angle(&self, q: f64) -> Result<(f64, f64)> {
        self.pair().angles(q, MODULE)
    }
}

pub fn xi_k(k: f64, q: f64, density: f64, p: &PhysicalParams) -> SpinDispersion {
    HomogeneousMode::new(k, density, p).dispersion(q)
}

fn stable_angles(m: &HomogeneousMode, q: f64) -> Result<(f64, f64)> {
    m.angle(q).map_err(|_| {
        Error::domain(
            MODULE,
            format!("unstable regime: ξ(q = {q} Hz) is not real and positive"),
        )
    })
}

/// Occupation per spin state after a sudden quench q_i → q_f at t = 0.
pub fn quench_population(m: &HomogeneousMode, q_i: f64, q_f: f64, t: f64) -> Result<f64> {
    let (_, s2i) = stable_angles(m, q_i)?;
    let (_, s2f) = stable_angles(m, q_f)?;
    let ai = 0.5 * s2i.asinh();
    let af = 0.5 * s2f.asinh();
    // Δα between the new and old frames
    let d = af - ai;
    let xi_f = m.dispersion(q_f).xi.re;
    Ok(af.cosh().powi(2) * d.sinh().powi(2) + af.sinh().powi(2) * d.cosh().powi(2)
        - 0.5 * (2.0 * TAU * xi_f * t).cos() * (2.0 * af).sinh() * (2.0 * d).sinh())
}

/// Large-q_i limit of [`quench_population`]: ½(nU1/ξ_f)²(1 − cos 2ξ_f t).
pub fn quench_population_large_qi(m: &HomogeneousMode, q_f: f64, t: f64) -> Result<f64> {
    Ok(0.5 * large_qi_amplitude(m, q_f, t)?)
}

/// The same limit without the factor ½: (nU1/ξ_f)²(1 − cos 2ξ_f t). Kept for
/// comparison; the Fock-space evolution agrees with the halved form.
pub fn quench_population_large_qi_unhalved(m: &HomogeneousMode, q_f: f64, t: f64) -> Result<f64> {
    large_qi_amplitude(m, q_f, t)
}

fn large_qi_amplitude(m: &HomogeneousMode, q_f: f64, t: f64) -> Result<f64> {
    stable_angles(m, q_f)?;
    let xi = m.dispersion(q_f).xi.re;
    Ok((m.n_u1 / xi).powi(2) * (1.0 - (2.0 * TAU * xi * t).cos()))
}

/// d(P, S, A)/dt with coefficients at the instantaneous q(t).
pub fn modulation_rhs(st: &ModeState, m: &HomogeneousMode, schedule: &QzeSchedule) -> Result<ModeState> {
    let q = schedule.q_eval(st.t)?;
    let qd = schedule.qdot_eval(st.t)?;
    let mut dy = [0.0; 3];
    m.pair().rhs(st.t, q, qd, &[st.p, st.s, st.a], &mut dy, MODULE)?;
    Ok(ModeState {
        t: st.t,
        p: dy[0],
        s: dy[1],
        a: dy[2],
    })
}

/// Moments at `samples`, starting from the Bogoliubov vacuum at q(0).
pub fn integrate_modulation(
    m: &HomogeneousMode,
    schedule: &QzeSchedule,
    samples: &[f64],
    tol: f64,
) -> Result<Vec<ModeState>> {
    m.pair()
        .integrate(schedule, &ModeState::vacuum(0.0), samples, tol, MODULE)
}

/// Bare-atom occupation n_{k,+1} = n_{k,−1}.
pub fn population_from_psa(st: &ModeState, m: &HomogeneousMode, q: f64) -> Result<f64> {
    m.pair().population(st, q, MODULE)
}

/// Trajectory row for CSV export.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TrajectoryRow {
    pub t_s: f64,
    #[serde(rename = "P")]
    pub p: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "A")]
    pub a: f64,
    pub n_plus: f64,
    pub n_minus: f64,
}

pub fn trajectory_rows(m: &HomogeneousMode, schedule: &QzeSchedule, states: &[ModeState]) -> Result<Vec<TrajectoryRow>> {
    states
        .iter()
        .map(|st| {
            let n = population_from_psa(st, m, schedule.q_eval(st.t)?)?;
            Ok(TrajectoryRow {
                t_s: st.t,
                p: st.p,
                s: st.s,
                a: st.a,
                n_plus: n,
                n_minus: n,
            })
        })
        .collect()
}
