//! Atom, trap and interaction parameters.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{self, BOHR_RADIUS, HBAR, RB87_MASS};

/// Default F=1 ⁸⁷Rb scattering lengths (in Bohr radii). These are literature
/// values supplied as configuration defaults and can be overridden.
pub const RB87_A0_BOHR: f64 = 101.8;
pub const RB87_A2_BOHR: f64 = 100.4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    /// kg
    pub atom_mass: f64,
    /// m
    pub scattering_length_f0: f64,
    /// m
    pub scattering_length_f2: f64,
    pub atom_count: u64,
    /// (fx, fy, fz) in Hz
    pub trap_freqs: [f64; 3],
    /// q/h in Hz; its reference (absolute or relative to the ground-mode
    /// resonance) is decided by the configuration.
    pub qze_static: f64,
}

impl PhysicalParams {
    /// ⁸⁷Rb in a (150, 160, 220) Hz trap with 22 000 atoms.
    pub fn rubidium_default() -> Self {
        Self {
            atom_mass: RB87_MASS,
            scattering_length_f0: RB87_A0_BOHR * BOHR_RADIUS,
            scattering_length_f2: RB87_A2_BOHR * BOHR_RADIUS,
            atom_count: 22_000,
            trap_freqs: [150.0, 160.0, 220.0],
            qze_static: 71.0,
        }
    }

    pub fn with_atom_count(mut self, n: u64) -> Self {
        self.atom_count = n;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::validation("config", msg));
        if !(self.atom_mass.is_finite() && self.atom_mass > 0.0) {
            return bad(format!("atom_mass must be > 0, got {}", self.atom_mass));
        }
        if self.atom_count < 1 {
            return bad("atom_count must be >= 1".into());
        }
        for (axis, f) in self.trap_freqs.iter().enumerate() {
            if !(f.is_finite() && *f > 0.0) {
                return bad(format!("trap frequency on axis {axis} must be > 0, got {f}"));
            }
        }
        for (name, a) in [
            ("scattering_length_f0", self.scattering_length_f0),
            ("scattering_length_f2", self.scattering_length_f2),
        ] {
            if !(a.is_finite() && a > 0.0) {
                return bad(format!("{name} must be > 0, got {a}"));
            }
        }
        if !self.qze_static.is_finite() {
            return bad("qze_static must be finite".into());
        }
        Ok(())
    }

    /// Geometric mean trap frequency in Hz.
    pub fn mean_trap_freq(&self) -> f64 {
        self.trap_freqs.iter().product::<f64>().cbrt()
    }

    pub fn kinetic_coefficient(&self) -> f64 {
        units::kinetic_coefficient(self.atom_mass)
    }

    pub fn trap_coefficient(&self) -> f64 {
        units::trap_coefficient(self.atom_mass)
    }
}

/// Contact couplings in J·m³.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub g0: f64,
    pub g2: f64,
    pub u0: f64,
    pub u1: f64,
}

impl Couplings {
    /// U0 in Hz·μm³.
    pub fn u0_hz(&self) -> f64 {
        units::coupling_to_hz_um3(self.u0)
    }

    /// U1 in Hz·μm³.
    pub fn u1_hz(&self) -> f64 {
        units::coupling_to_hz_um3(self.u1)
    }
}

/// g_F = 4πħ²a_F/M, U0 = (g0 + 2g2)/3, U1 = (g2 − g0)/3.
pub fn derive_couplings(p: &PhysicalParams) -> Couplings {
    let g = |a: f64| 4.0 * PI * HBAR * HBAR * a / p.atom_mass;
    let g0 = g(p.scattering_length_f0);
    let g2 = g(p.scattering_length_f2);
    Couplings {
        g0,
        g2,
        u0: (g0 + 2.0 * g2) / 3.0,
        u1: (g2 - g0) / 3.0,
    }
}

/// Closed-form Thomas–Fermi chemical potential μ_TF/h in Hz,
/// μ_TF = (ħω̄/2)(15 N a/ā)^{2/5} with a the scattering length of U0.
pub fn thomas_fermi_mu(p: &PhysicalParams) -> f64 {
    let c = derive_couplings(p);
    let a_eff = c.u0 * p.atom_mass / (4.0 * PI * HBAR * HBAR);
    let fbar = p.mean_trap_freq();
    let abar = units::oscillator_length(p.atom_mass, fbar) * units::MICROMETRE;
    0.5 * fbar * (15.0 * p.atom_count as f64 * a_eff / abar).powf(0.4)
}

/// Thomas–Fermi radii (μm) along the three trap axes.
pub fn thomas_fermi_radii(p: &PhysicalParams) -> [f64; 3] {
    let mu = thomas_fermi_mu(p);
    let c = p.trap_coefficient();
    p.trap_freqs.map(|f| (mu / (c * f * f)).sqrt())
}
