//! Eigenmodes of the effective single-particle Hamiltonian
//! H_eff = −κ∇² + V + (U0 + U1) n0 − μ and their density overlaps.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gpe::CondensateProfile;
use crate::grid::{self, GridSpec};
use crate::lanczos::{self, EigenOptions, LinearOperator};

/// Pairs closer than this (Hz) are excluded from the energy-ratio validity test.
pub const NEAR_DEGENERATE_HZ: f64 = 2.0;
pub const VALIDITY_THRESHOLD: f64 = 0.1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EffectiveMode {
    pub index: usize,
    /// E_j/h in Hz.
    pub energy: f64,
    /// φ_j normalized so that Σ φ² dV = 1.
    pub phi: Vec<f64>,
    pub residual: f64,
}

pub struct EffectiveHamiltonian<'a> {
    pub grid: &'a GridSpec,
    pub kappa: f64,
    /// V + (U0+U1) n0 − μ
    pub diag: Vec<f64>,
}

impl<'a> EffectiveHamiltonian<'a> {
    pub fn from_profile(p: &'a CondensateProfile) -> Self {
        let g = p.u0 + p.u1;
        let diag = p
            .potential
            .par_iter()
            .zip(p.n0.par_iter())
            .map(|(v, n)| v + g * n - p.mu)
            .collect();
        Self {
            grid: &p.grid,
            kappa: p.kappa,
            diag,
        }
    }

    /// −κ∇² + diag on an arbitrary grid.
    pub fn new(grid: &'a GridSpec, kappa: f64, diag: Vec<f64>) -> Self {
        Self { grid, kappa, diag }
    }
}

impl LinearOperator for EffectiveHamiltonian<'_> {
    fn dim(&self) -> usize {
        self.grid.len()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.grid.laplacian(x, y);
        let k = self.kappa;
        y.par_iter_mut()
            .zip(x.par_iter().zip(self.diag.par_iter()))
            .for_each(|(y, (x, d))| *y = -k * *y + d * x);
    }

    fn upper_bound(&self) -> f64 {
        let h = self.grid.spacing();
        let lap: f64 = (0..self.grid.dims).map(|a| 4.0 / (h[a] * h[a])).sum();
        let dmax = self.diag.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        dmax + 2.0 * self.kappa * lap
    }
}

/// The K lowest eigenpairs of H_eff built from `profile`.
pub fn lowest_eigenmodes(profile: &CondensateProfile, k: usize, tol: f64) -> Result<Vec<EffectiveMode>> {
    if !(1..=20).contains(&k) {
        return Err(Error::validation("modes", format!("mode count must be in 1..=20, got {k}")));
    }
    let h = EffectiveHamiltonian::from_profile(profile);
    eigenmodes_of(&h, k, tol)
}

pub fn eigenmodes_of(h: &EffectiveHamiltonian, k: usize, tol: f64) -> Result<Vec<EffectiveMode>> {
    let opts = EigenOptions {
        tol,
        ..Default::default()
    };
    let res = lanczos::lowest_eigenpairs(h, k, &opts).map_err(|e| match e {
        Error::Convergence {
            iterations,
            residual,
            ..
        } => Error::Convergence {
            module: "modes",
            iterations,
            residual,
        },
        other => other,
    })?;
    let s = 1.0 / h.grid.dv().sqrt();
    Ok(res
        .values
        .into_iter()
        .zip(res.vectors)
        .zip(res.residuals)
        .enumerate()
        .map(|(index, ((energy, mut v), residual))| {
            fix_sign(&mut v);
            grid::scale(s, &mut v);
            EffectiveMode {
                index,
                energy,
                phi: v,
                residual,
            }
        })
        .collect())
}

/// Makes the largest-magnitude component positive so outputs are reproducible.
fn fix_sign(v: &mut [f64]) {
    let mut best = 0.0f64;
    for &x in v.iter() {
        if x.abs() > best.abs() * (1.0 + 1e-9) {
            best = x;
        }
    }
    if best < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OverlapMatrix {
    /// χ_ij = Σ n0 φ_i φ_j dV, in μm^(−dims).
    pub chi: Vec<Vec<f64>>,
}

impl OverlapMatrix {
    pub fn len(&self) -> usize {
        self.chi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chi.is_empty()
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.chi[i][i]).collect()
    }

    pub fn as_matrix(&self) -> DMatrix<f64> {
        let k = self.len();
        DMatrix::from_fn(k, k, |i, j| self.chi[i][j])
    }
}

pub fn overlaps(profile: &CondensateProfile, modes: &[EffectiveMode]) -> Result<OverlapMatrix> {
    overlaps_with_density(&profile.grid, &profile.n0, modes)
}

pub fn overlaps_with_density(g: &GridSpec, n0: &[f64], modes: &[EffectiveMode]) -> Result<OverlapMatrix> {
    for m in modes {
        if m.phi.len() != g.len() || n0.len() != g.len() {
            return Err(Error::validation(
                "modes",
                format!(
                    "mode {} has {} points but the profile grid has {}",
                    m.index,
                    m.phi.len(),
                    g.len()
                ),
            ));
        }
    }
    let k = modes.len();
    let dv = g.dv();
    let mut chi = vec![vec![0.0; k]; k];
    for i in 0..k {
        for j in i..k {
            let (a, b) = (&modes[i].phi, &modes[j].phi);
            let v = grid::par_sum(n0.len(), |x| n0[x] * a[x] * b[x]) * dv;
            chi[i][j] = v;
            chi[j][i] = v;
        }
    }
    Ok(OverlapMatrix { chi })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidityReport {
    /// max_{i≠j} |χ_ij| / min(χ_ii, χ_jj)
    pub max_chi_ratio: f64,
    /// max |U1 χ_ij| / |E_i − E_j| over pairs at least `NEAR_DEGENERATE_HZ` apart.
    pub max_energy_ratio: f64,
    /// Pairs closer than `NEAR_DEGENERATE_HZ`, with their |U1 χ_ij| in Hz.
    pub near_degenerate: Vec<(usize, usize, f64)>,
    pub valid: bool,
}

/// Diagonal-approximation check. `u1` is U1/h in Hz·μm^dims.
pub fn validity_check(energies: &[f64], chi: &OverlapMatrix, u1: f64) -> Result<ValidityReport> {
    let k = energies.len();
    if k < 2 || chi.len() != k {
        return Err(Error::validation(
            "modes",
            format!("validity check needs >= 2 modes and a matching overlap matrix (got {k}, {})", chi.len()),
        ));
    }
    let mut max_chi_ratio: f64 = 0.0;
    let mut max_energy_ratio: f64 = 0.0;
    let mut near = Vec::new();
    for i in 0..k {
        for j in (i + 1)..k {
            let c = chi.chi[i][j].abs();
            let d = chi.chi[i][i].abs().min(chi.chi[j][j].abs());
            if d > 0.0 {
                max_chi_ratio = max_chi_ratio.max(c / d);
            } else if c > 0.0 {
                max_chi_ratio = f64::INFINITY;
            }
            let de = (energies[i] - energies[j]).abs();
            let coupling = (u1 * c).abs();
            if de < NEAR_DEGENERATE_HZ {
                near.push((i, j, coupling));
            } else {
                max_energy_ratio = max_energy_ratio.max(coupling / de);
            }
        }
    }
    Ok(ValidityReport {
        max_chi_ratio,
        max_energy_ratio,
        near_degenerate: near,
        valid: max_energy_ratio < VALIDITY_THRESHOLD,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_degenerate_spectrum_invalid() {
        let chi = OverlapMatrix {
            chi: vec![vec![100.0, 30.0], vec![30.0, 90.0]],
        };
        let r = validity_check(&[0.0, 2.5], &chi, -0.036).unwrap();
        assert!(!r.valid, "{r:?}");
        let r = validity_check(&[0.0, 50.0], &chi, -0.036).unwrap();
        assert!(r.valid);
    }

    #[test]
    fn diagonal_chi_is_valid() {
        let chi = OverlapMatrix {
            chi: vec![vec![100.0, 0.0, 0.0], vec![0.0, 90.0, 0.0], vec![0.0, 0.0, 80.0]],
        };
        let r = validity_check(&[0.0, 0.5, 20.0], &chi, -0.036).unwrap();
        assert_eq!(r.max_chi_ratio, 0.0);
        assert_eq!(r.max_energy_ratio, 0.0);
        assert_eq!(r.near_degenerate.len(), 1);
        assert!(r.valid);
    }

    #[test]
    fn validity_needs_two_modes() {
        let chi = OverlapMatrix { chi: vec![vec![1.0]] };
        assert!(validity_check(&[0.0], &chi, -1.0).is_err());
    }
}
