//! Ground state → modes → trapped pair modes, driven by a [`Config`].

use std::path::Path;

use serde::Serialize;

use crate::config::{Config, QReference};
use crate::error::{Error, Result};
use crate::gpe::{self, CondensateProfile, GpeOptions};
use crate::grid::GridSpec;
use crate::modes::{self, EffectiveMode, OverlapMatrix, ValidityReport};
use crate::params::PhysicalParams;
use crate::trapped::{self, TrappedMode};

#[derive(Debug, Clone)]
pub struct SpectrumSettings {
    pub dims: usize,
    pub points: Vec<usize>,
    pub extent_tf: f64,
    pub half_extent_um: Option<Vec<f64>>,
    pub axis: usize,
    pub gpe: GpeOptions,
    pub mode_count: usize,
    pub mode_tol: f64,
}

impl SpectrumSettings {
    pub fn from_config(cfg: &Config) -> Self {
        Self {
            dims: cfg.grid.dims,
            points: cfg.grid.points.clone(),
            extent_tf: cfg.grid.extent_tf,
            half_extent_um: cfg.grid.half_extent_um.clone(),
            axis: cfg.grid.axis,
            gpe: GpeOptions {
                max_iterations: cfg.gpe.max_iterations,
                energy_tol: cfg.gpe.energy_tol,
                residual_tol: cfg.gpe.residual_tol,
                dtau: None,
                check_resolution: !cfg.gpe.allow_coarse,
            },
            mode_count: cfg.modes.count,
            mode_tol: cfg.modes.tol,
        }
    }

    pub fn grid(&self, p: &PhysicalParams) -> Result<GridSpec> {
        match &self.half_extent_um {
            None => gpe::grid_for(p, self.dims, &self.points, self.extent_tf, self.axis),
            Some(h) => {
                if h.len() < self.dims {
                    return Err(Error::config("grid", format!("half_extent_um needs {} entries", self.dims)));
                }
                if self.dims == 3 {
                    GridSpec::new_3d([self.points[0], self.points[1], self.points[2]], [h[0], h[1], h[2]])
                } else {
                    GridSpec::new_1d(self.points[0], h[0], self.axis)
                }
            }
        }
    }
}

/// Everything downstream modules need about one atom number.
#[derive(Debug, Clone, Serialize)]
pub struct TrappedSystem {
    pub atom_count: u64,
    /// Hz
    pub mu: f64,
    pub energies: Vec<f64>,
    pub chi: OverlapMatrix,
    /// U1/h in Hz·μm^dims
    pub u1: f64,
    pub validity: ValidityReport,
    pub tmodes: Vec<TrappedMode>,
    pub gpe_iterations: usize,
    pub gpe_residual: f64,
}

impl TrappedSystem {
    /// q0 = −E_0, the ground-mode resonance.
    pub fn q0(&self) -> f64 {
        -self.energies[0]
    }
}

pub struct SpectrumRun {
    pub system: TrappedSystem,
    pub profile: CondensateProfile,
    pub modes: Vec<EffectiveMode>,
}

pub fn compute_spectrum(p: &PhysicalParams, s: &SpectrumSettings) -> Result<SpectrumRun> {
    let g = s.grid(p)?;
    let profile = gpe::solve_ground_state(p, &g, &s.gpe)?;
    let modes = modes::lowest_eigenmodes(&profile, s.mode_count, s.mode_tol)?;
    let chi = modes::overlaps(&profile, &modes)?;
    let energies: Vec<f64> = modes.iter().map(|m| m.energy).collect();
    let validity = if modes.len() >= 2 {
        modes::validity_check(&energies, &chi, profile.u1)?
    } else {
        ValidityReport {
            max_chi_ratio: 0.0,
            max_energy_ratio: 0.0,
            near_degenerate: Vec::new(),
            valid: true,
        }
    };
    let tmodes = trapped::trapped_modes(&modes, &chi, profile.u1)?;
    let system = TrappedSystem {
        atom_count: p.atom_count,
        mu: profile.mu,
        energies,
        chi,
        u1: profile.u1,
        validity,
        tmodes,
        gpe_iterations: profile.iterations,
        gpe_residual: gpe::gp_residual(&profile),
    };
    Ok(SpectrumRun { system, profile, modes })
}

pub fn build_trapped_system(p: &PhysicalParams, s: &SpectrumSettings) -> Result<TrappedSystem> {
    Ok(compute_spectrum(p, s)?.system)
}

/// Offset that converts configured q values to absolute ones: q0 of the
/// reference atom number for `relative`, zero for `absolute`.
pub fn q_offset(cfg: &Config, settings: &SpectrumSettings, systems: &[TrappedSystem]) -> Result<f64> {
    match cfg.zeeman.reference {
        QReference::Absolute => Ok(0.0),
        QReference::Relative => {
            let n_ref = cfg.zeeman.reference_atom_count.unwrap_or(cfg.atom.atom_count);
            if let Some(s) = systems.iter().find(|s| s.atom_count == n_ref) {
                return Ok(s.q0());
            }
            let p = cfg.physical_params().with_atom_count(n_ref);
            Ok(build_trapped_system(&p, settings)?.q0())
        }
    }
}

pub fn write_density_if_requested(cfg: &Config, profile: &CondensateProfile, out: &Path) -> Result<Option<std::path::PathBuf>> {
    match &cfg.gpe.dump_density {
        None => Ok(None),
        Some(name) => {
            let path = out.join(name);
            gpe::write_density(profile, &path)?;
            Ok(Some(path))
        }
    }
}
