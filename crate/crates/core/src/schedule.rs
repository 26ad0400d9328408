//! Time-dependent quadratic Zeeman energy q(t)/h.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleKind {
    Static {
        q_initial: f64,
    },
    /// q_initial → q_final. With `ramp_time` = 0 the jump happens at t = 0⁺;
    /// otherwise a smoothstep ramp of that length is used.
    Quench {
        q_initial: f64,
        q_final: f64,
        #[serde(default)]
        ramp_time: f64,
    },
    Sinusoid {
        mean: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    /// A sinusoid about `center` whose amplitude reaches the farther of
    /// `min`/`max`, saturated at both bounds.
    ClippedSinusoid {
        min: f64,
        max: f64,
        center: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QzeSchedule {
    pub kind: ScheduleKind,
    /// s
    pub duration: f64,
}

impl QzeSchedule {
    pub fn constant(q: f64, duration: f64) -> Self {
        Self {
            kind: ScheduleKind::Static { q_initial: q },
            duration,
        }
    }

    pub fn sinusoid(mean: f64, amplitude: f64, frequency: f64, phase: f64, duration: f64) -> Self {
        Self {
            kind: ScheduleKind::Sinusoid {
                mean,
                amplitude,
                frequency,
                phase,
            },
            duration,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::validation("schedule", msg));
        if !(self.duration.is_finite() && self.duration >= 0.0) {
            return bad(format!("duration must be >= 0, got {}", self.duration));
        }
        match self.kind {
            ScheduleKind::Static { q_initial } if !q_initial.is_finite() => {
                bad("q_initial must be finite".into())
            }
            ScheduleKind::Quench { ramp_time, .. } if !(ramp_time >= 0.0) => {
                bad(format!("ramp_time must be >= 0, got {ramp_time}"))
            }
            ScheduleKind::Sinusoid {
                amplitude,
                frequency,
                ..
            } if !(amplitude.is_finite() && frequency.is_finite() && frequency >= 0.0) => {
                bad("sinusoid amplitude and frequency must be finite, frequency >= 0".into())
            }
            ScheduleKind::ClippedSinusoid {
                min,
                max,
                center,
                frequency,
                ..
            } if !(min <= center && center <= max && frequency >= 0.0) => bad(format!(
                "clipped sinusoid needs min <= center <= max and frequency >= 0, got {min}, {center}, {max}"
            )),
            _ => Ok(()),
        }
    }

    fn check_t(&self, t: f64) -> Result<()> {
        if t.is_nan() || t < 0.0 || t > self.duration {
            return Err(Error::domain(
                "schedule",
                format!("t = {t} s outside [0, {}]", self.duration),
            ));
        }
        Ok(())
    }

    /// Mean value of q over a period; the static value for non-periodic kinds
    /// (the final value for a quench).
    pub fn mean(&self) -> f64 {
        match self.kind {
            ScheduleKind::Static { q_initial } => q_initial,
            ScheduleKind::Quench { q_final, .. } => q_final,
            ScheduleKind::Sinusoid { mean, .. } => mean,
            ScheduleKind::ClippedSinusoid { min, max, center, .. } => {
                let a = clipped_amplitude(min, max, center);
                center - excess_mean(a, max - center) + excess_mean(a, center - min)
            }
        }
    }

    /// Shifts every q value by `dq`, e.g. to turn values relative to the
    /// ground-mode resonance into absolute ones.
    pub fn shifted(&self, dq: f64) -> Self {
        let kind = match self.kind {
            ScheduleKind::Static { q_initial } => ScheduleKind::Static {
                q_initial: q_initial + dq,
            },
            ScheduleKind::Quench {
                q_initial,
                q_final,
                ramp_time,
            } => ScheduleKind::Quench {
                q_initial: q_initial + dq,
                q_final: q_final + dq,
                ramp_time,
            },
            ScheduleKind::Sinusoid {
                mean,
                amplitude,
                frequency,
                phase,
            } => ScheduleKind::Sinusoid {
                mean: mean + dq,
                amplitude,
                frequency,
                phase,
            },
            ScheduleKind::ClippedSinusoid {
                min,
                max,
                center,
                frequency,
                phase,
            } => ScheduleKind::ClippedSinusoid {
                min: min + dq,
                max: max + dq,
                center: center + dq,
                frequency,
                phase,
            },
        };
        Self { kind, ..*self }
    }

    /// Returns a copy with the modulation frequency replaced (no-op for
    /// non-periodic kinds).
    pub fn with_frequency(&self, f: f64) -> Self {
        let mut s = *self;
        match &mut s.kind {
            ScheduleKind::Sinusoid { frequency, .. }
            | ScheduleKind::ClippedSinusoid { frequency, .. } => *frequency = f,
            _ => {}
        }
        s
    }

    pub fn with_duration(&self, duration: f64) -> Self {
        Self { duration, ..*self }
    }

    /// Smallest and largest value q takes (over all t).
    pub fn range(&self) -> (f64, f64) {
        match self.kind {
            ScheduleKind::Static { q_initial } => (q_initial, q_initial),
            ScheduleKind::Quench {
                q_initial, q_final, ..
            } => (q_initial.min(q_final), q_initial.max(q_final)),
            ScheduleKind::Sinusoid {
                mean, amplitude, ..
            } => (mean - amplitude.abs(), mean + amplitude.abs()),
            ScheduleKind::ClippedSinusoid { min, max, .. } => (min, max),
        }
    }

    /// q(t)/h in Hz.
    pub fn q_eval(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.q_unchecked(t))
    }

    /// dq/dt in Hz/s.
    pub fn qdot_eval(&self, t: f64) -> Result<f64> {
        self.check_t(t)?;
        Ok(self.qdot_unchecked(t))
    }

    pub(crate) fn q_unchecked(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Static { q_initial } => q_initial,
            ScheduleKind::Quench {
                q_initial,
                q_final,
                ramp_time,
            } => {
                if ramp_time == 0.0 {
                    if t > 0.0 {
                        q_final
                    } else {
                        q_initial
                    }
                } else {
                    q_initial + (q_final - q_initial) * smoothstep(t / ramp_time)
                }
            }
            ScheduleKind::Sinusoid {
                mean,
                amplitude,
                frequency,
                phase,
            } => mean + amplitude * (TAU * frequency * t + phase).sin(),
            ScheduleKind::ClippedSinusoid {
                min,
                max,
                center,
                frequency,
                phase,
            } => {
                let a = clipped_amplitude(min, max, center);
                (center + a * (TAU * frequency * t + phase).sin()).clamp(min, max)
            }
        }
    }

    pub(crate) fn qdot_unchecked(&self, t: f64) -> f64 {
        match self.kind {
            ScheduleKind::Static { .. } => 0.0,
            ScheduleKind::Quench {
                q_initial,
                q_final,
                ramp_time,
            } => {
                if ramp_time == 0.0 || t >= ramp_time {
                    0.0
                } else {
                    (q_final - q_initial) * smoothstep_dx(t / ramp_time) / ramp_time
                }
            }
            ScheduleKind::Sinusoid {
                amplitude,
                frequency,
                phase,
                ..
            } => amplitude * TAU * frequency * (TAU * frequency * t + phase).cos(),
            ScheduleKind::ClippedSinusoid {
                min,
                max,
                center,
                frequency,
                phase,
            } => {
                let a = clipped_amplitude(min, max, center);
                let raw = center + a * (TAU * frequency * t + phase).sin();
                if raw >= max || raw <= min {
                    0.0
                } else {
                    a * TAU * frequency * (TAU * frequency * t + phase).cos()
                }
            }
        }
    }

    /// Times in (0, duration) where q̇ is discontinuous. Integrators restart
    /// at these points.
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut out = Vec::new();
        match self.kind {
            ScheduleKind::Quench { ramp_time, .. } => {
                if ramp_time > 0.0 && ramp_time < self.duration {
                    out.push(ramp_time);
                }
            }
            ScheduleKind::ClippedSinusoid {
                min,
                max,
                center,
                frequency,
                phase,
            } => {
                let a = clipped_amplitude(min, max, center);
                if a <= 0.0 || frequency <= 0.0 {
                    return out;
                }
                let period = 1.0 / frequency;
                for level in [max, min] {
                    let s = (level - center) / a;
                    if s.abs() >= 1.0 {
                        continue;
                    }
                    let base = s.asin();
                    for root in [base, PI - base] {
                        // TAU f t + phase = root + 2πk
                        let t0 = (root - phase) / TAU * period;
                        let k0 = (-t0 / period).ceil();
                        let mut t = t0 + k0 * period;
                        while t < self.duration {
                            if t > 0.0 {
                                out.push(t);
                            }
                            t += period;
                        }
                    }
                }
                out.sort_by(f64::total_cmp);
                out.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
            }
            _ => {}
        }
        out
    }
}

pub(crate) fn clipped_amplitude(min: f64, max: f64, center: f64) -> f64 {
    (max - center).max(center - min)
}

/// Period average of (a sin φ − h)⁺.
fn excess_mean(a: f64, h: f64) -> f64 {
    if a <= 0.0 || h >= a {
        return 0.0;
    }
    let s = h / a;
    let b = s.asin();
    a * (2.0 * b.cos() - s * (PI - 2.0 * b)) / (2.0 * PI)
}

fn smoothstep(x: f64) -> f64 {
    let x = x.clamp(0.0, 1.0);
    x * x * (3.0 - 2.0 * x)
}

fn smoothstep_dx(x: f64) -> f64 {
    if !(0.0..=1.0).contains(&x) {
        return 0.0;
    }
    6.0 * x * (1.0 - x)
}
