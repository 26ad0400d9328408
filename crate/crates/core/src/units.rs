//! Physical constants and the internal unit system.
//!
//! Internally energies are carried as frequencies (E/h in Hz), lengths in
//! micrometres and times in seconds. SI values only appear at the boundary
//! where scattering lengths and masses are turned into coupling constants.

use std::f64::consts::PI;

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;
/// Reduced Planck constant h/2π, J·s.
pub const HBAR: f64 = PLANCK / (2.0 * PI);
/// Bohr radius, m.
pub const BOHR_RADIUS: f64 = 5.291_772_109_03e-11;
/// Unified atomic mass unit, kg.
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;
/// Mass of ⁸⁷Rb, kg.
pub const RB87_MASS: f64 = 86.909_180_527 * ATOMIC_MASS_UNIT;

/// Metres per micrometre.
pub const MICROMETRE: f64 = 1e-6;

/// Coefficient κ = ħ/(4πM) such that the kinetic energy −ħ²∇²/2M divided by
/// h is −κ∇² with ∇² in μm⁻². Returned in μm²·Hz.
pub fn kinetic_coefficient(mass: f64) -> f64 {
    HBAR / (4.0 * PI * mass) / (MICROMETRE * MICROMETRE)
}

/// Coefficient c such that ½Mω²r²/h = c·f²·r² with f in Hz and r in μm.
pub fn trap_coefficient(mass: f64) -> f64 {
    2.0 * PI * PI * mass / PLANCK * MICROMETRE * MICROMETRE
}

/// Converts a contact coupling in J·m³ into Hz·μm³.
pub fn coupling_to_hz_um3(g: f64) -> f64 {
    g / PLANCK / (MICROMETRE * MICROMETRE * MICROMETRE)
}

/// Harmonic oscillator length √(ħ/Mω) in μm for a trap frequency in Hz.
pub fn oscillator_length(mass: f64, freq_hz: f64) -> f64 {
    (HBAR / (mass * 2.0 * PI * freq_hz)).sqrt() / MICROMETRE
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kinetic_coefficient_matches_direct_si() {
        // ħ²k²/2M / h for k = 1 μm⁻¹
        let k = 1.0 / MICROMETRE;
        let direct = HBAR * HBAR * k * k / (2.0 * RB87_MASS) / PLANCK;
        let via = kinetic_coefficient(RB87_MASS);
        assert!((direct - via).abs() < 1e-12 * direct);
    }

    #[test]
    fn trap_coefficient_matches_direct_si() {
        let f = 150.0;
        let r = 2.0 * MICROMETRE;
        let omega = 2.0 * PI * f;
        let direct = 0.5 * RB87_MASS * omega * omega * r * r / PLANCK;
        let via = trap_coefficient(RB87_MASS) * f * f * 4.0;
        assert!((direct - via).abs() < 1e-12 * direct);
    }
}
