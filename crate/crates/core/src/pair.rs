//! A single (+, −) pair of modes coupled by the quadratic Hamiltonian
//! h/h = a(q)(â₊†â₊ + â₋†â₋) + λ(â₊†â₋† + â₊â₋), with a(q) = offset + q.
//!
//! The homogeneous gas uses offset = ε_k + nU1, λ = nU1; a trapped mode uses
//! offset = E_j, λ = U1χ_jj. Dynamics are written in the instantaneous
//! Bogoliubov frame through the moments P = ⟨b₊†b₊⟩, S = 2Re⟨b₊†b₋†⟩ and
//! A = −2Im⟨b₊†b₋†⟩.

use std::f64::consts::TAU;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::schedule::{QzeSchedule, ScheduleKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeState {
    pub t: f64,
    pub p: f64,
    pub s: f64,
    pub a: f64,
}

impl ModeState {
    pub fn vacuum(t: f64) -> Self {
        Self {
            t,
            p: 0.0,
            s: 0.0,
            a: 0.0,
        }
    }

    /// Incoherent seed: P = seed, S = A = 0.
    pub fn seeded(t: f64, seed: f64) -> Self {
        Self {
            p: seed,
            ..Self::vacuum(t)
        }
    }

    /// (2P+1)² − S² − A²; equals 1 for a pure state reached from vacuum.
    pub fn casimir(&self) -> f64 {
        let x = 2.0 * self.p + 1.0;
        x * x - self.s * self.s - self.a * self.a
    }

    /// |casimir − 1| relative to (2P+1)².
    pub fn casimir_error(&self) -> f64 {
        let x = 2.0 * self.p + 1.0;
        (self.casimir() - 1.0).abs() / (x * x)
    }

    /// |casimir − d0| relative to (2P+1)²; `d0` is the value at t = 0.
    pub fn casimir_drift(&self, d0: f64) -> f64 {
        let x = 2.0 * self.p + 1.0;
        (self.casimir() - d0).abs() / (x * x)
    }

    fn as_array(&self) -> [f64; 3] {
        [self.p, self.s, self.a]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairMode {
    /// Hz
    pub offset: f64,
    /// Hz
    pub lambda: f64,
}

impl PairMode {
    pub fn new(offset: f64, lambda: f64) -> Self {
        Self { offset, lambda }
    }

    pub fn diag(&self, q: f64) -> f64 {
        self.offset + q
    }

    pub fn xi_sq(&self, q: f64) -> f64 {
        let a = self.diag(q);
        a * a - self.lambda * self.lambda
    }

    /// ξ(q) in Hz; purely imaginary inside the instability window.
    pub fn xi(&self, q: f64) -> Complex64 {
        let x2 = self.xi_sq(q);
        if x2 >= 0.0 {
            Complex64::new(x2.sqrt(), 0.0)
        } else {
            Complex64::new(0.0, (-x2).sqrt())
        }
    }

    /// Bogoliubov vacuum is defined (a > |λ|).
    pub fn is_stable(&self, q: f64) -> bool {
        self.diag(q) > self.lambda.abs()
    }

    /// (cosh 2α, sinh 2α) at q.
    pub fn angles(&self, q: f64, module: &'static str) -> Result<(f64, f64)> {
        let a = self.diag(q);
        let x2 = self.xi_sq(q);
        if x2 <= 0.0 {
            return Err(Error::domain(
                module,
                format!("unstable regime: ξ² = {x2:.6e} Hz² at q = {q} Hz"),
            ));
        }
        if a <= 0.0 {
            return Err(Error::domain(
                module,
                format!("negative-energy branch (offset + q = {a} Hz) at q = {q} Hz"),
            ));
        }
        let xi = x2.sqrt();
        Ok((a / xi, -self.lambda / xi))
    }

    /// Occupation ⟨â₊†â₊⟩ = ⟨â₋†â₋⟩ of the bare modes.
    pub fn population(&self, st: &ModeState, q: f64, module: &'static str) -> Result<f64> {
        let (c2, s2) = self.angles(q, module)?;
        Ok(c2 * (st.p + 0.5) - 0.5 + 0.5 * s2 * st.s)
    }

    /// ⟨â₊â₋⟩ of the bare modes.
    pub fn anomalous(&self, st: &ModeState, q: f64, module: &'static str) -> Result<Complex64> {
        let (c2, s2) = self.angles(q, module)?;
        Ok(Complex64::new(0.5 * c2 * st.s + 0.5 * s2 * (2.0 * st.p + 1.0), 0.5 * st.a))
    }

    /// Re-expresses the moments of the frame at `q_from` in the frame at `q_to`
    /// (a sudden change of q).
    pub fn reproject(&self, st: &ModeState, q_from: f64, q_to: f64, module: &'static str) -> Result<ModeState> {
        let n = self.population(st, q_from, module)?;
        let c = self.anomalous(st, q_from, module)?;
        let (c2, s2) = self.angles(q_to, module)?;
        Ok(ModeState {
            t: st.t,
            p: c2 * (n + 0.5) - 0.5 - s2 * c.re,
            s: 2.0 * (c2 * c.re - 0.5 * s2 * (2.0 * n + 1.0)),
            a: 2.0 * c.im,
        })
    }

    /// d(P, S, A)/dt at instantaneous q and q̇ (Hz/s).
    pub fn rhs(&self, t: f64, q: f64, qdot: f64, y: &[f64], dy: &mut [f64], module: &'static str) -> Result<()> {
        let x2 = self.xi_sq(q);
        if x2 <= 0.0 || self.diag(q) <= 0.0 {
            return Err(Error::Unstable {
                module,
                t,
                msg: format!("ξ² = {x2:.6e} Hz² at q = {q:.6} Hz"),
            });
        }
        let f = TAU * x2.sqrt();
        let g = -qdot * self.lambda / (2.0 * x2);
        let (p, s, a) = (y[0], y[1], y[2]);
        dy[0] = g * s;
        dy[1] = 4.0 * g * p + 2.0 * g + 2.0 * f * a;
        dy[2] = -2.0 * f * s;
        Ok(())
    }

    /// Integrates the moments under `schedule` from `init` (given in the frame
    /// at q(0)) and returns the states at `samples`. A sudden quench is applied
    /// as a frame change at t = 0⁺.
    pub fn integrate(
        &self,
        schedule: &QzeSchedule,
        init: &ModeState,
        samples: &[f64],
        tol: f64,
        module: &'static str,
    ) -> Result<Vec<ModeState>> {
        schedule.validate()?;
        let q0 = schedule.q_unchecked(0.0);
        let mut start = *init;
        start.t = 0.0;
        if let ScheduleKind::Quench {
            q_initial,
            q_final,
            ramp_time,
        } = schedule.kind
        {
            if ramp_time == 0.0 {
                self.angles(q_initial, module)?;
                if samples.iter().any(|&t| t > 0.0) {
                    start = self.reproject(&start, q_initial, q_final, module)?;
                }
            }
        }
        if !self.is_stable(q0) {
            return Err(Error::Unstable {
                module,
                t: 0.0,
                msg: format!("initial q = {q0} Hz lies outside the stable region"),
            });
        }
        let opts = OdeOptions::with_tol(tol);
        let sudden = matches!(schedule.kind, ScheduleKind::Quench { ramp_time, .. } if ramp_time == 0.0);
        let (ys, _) = ode::integrate(
            |t, y, dy| {
                // for a sudden quench the evolution after t = 0 is in the final frame
                let tt = if sudden { t.max(f64::MIN_POSITIVE) } else { t };
                self.rhs(t, schedule.q_unchecked(tt), schedule.qdot_unchecked(tt), y, dy, module)
            },
            0.0,
            &start.as_array(),
            schedule.duration,
            samples,
            &schedule.breakpoints(),
            &opts,
        )
        .map_err(|e| match e {
            // the frame coefficients diverge as ξ → 0, so the step size collapses
            // just before the trajectory reaches the window edge
            Error::Stiffness { t, h } => {
                let q = schedule.q_unchecked(t);
                if self.xi_sq(q) < 1e-2 * self.lambda * self.lambda {
                    Error::Unstable {
                        module,
                        t,
                        msg: format!("ξ → 0 at q = {q:.6} Hz (step {h:.3e} s)"),
                    }
                } else {
                    Error::Stiffness { t, h }
                }
            }
            other => other,
        })?;
        Ok(ys
            .into_iter()
            .zip(samples)
            .map(|(y, &t)| {
                if sudden && t <= 0.0 {
                    ModeState { t, ..*init }
                } else {
                    ModeState {
                        t,
                        p: y[0],
                        s: y[1],
                        a: y[2],
                    }
                }
            })
            .collect())
    }
}

/// Evenly spaced sample times covering [0, duration].
pub fn sample_times(duration: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![duration],
        _ => (0..count)
            .map(|i| {
                if i + 1 == count {
                    duration
                } else {
                    duration * i as f64 / (count - 1) as f64
                }
            })
            .collect(),
    }
}
