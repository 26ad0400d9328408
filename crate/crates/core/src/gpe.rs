//! Scalar Gross–Pitaevskii ground state on a finite-difference grid.

use std::f64::consts::{PI, TAU};
use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft::FftNd;
use crate::grid::{self, GridSpec};
use crate::params::{derive_couplings, thomas_fermi_radii, PhysicalParams};
use crate::units;

/// Grid spacing must not exceed this many healing lengths.
pub const HEALING_RESOLUTION_FACTOR: f64 = 2.0;
/// Minimum half-extent in Thomas–Fermi radii.
pub const MIN_EXTENT_TF: f64 = 1.5;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CondensateProfile {
    pub grid: GridSpec,
    /// Amplitude in μm^(−dims/2), non-negative.
    pub psi0: Vec<f64>,
    /// Density ψ0², μm^(−dims).
    pub n0: Vec<f64>,
    /// Chemical potential μ/h in Hz.
    pub mu: f64,
    /// Trap potential V/h in Hz on the grid.
    pub potential: Vec<f64>,
    /// Kinetic coefficient κ, μm²·Hz.
    pub kappa: f64,
    /// U0/h and U1/h in Hz·μm^dims (reduced for 1D grids).
    pub u0: f64,
    pub u1: f64,
    pub atom_count: u64,
    /// Final relative residual ‖(H − μ)ψ‖/‖μψ‖; None for the Thomas–Fermi profile.
    pub residual: Option<f64>,
    pub iterations: usize,
}

impl CondensateProfile {
    pub fn peak_density(&self) -> f64 {
        self.n0.iter().copied().fold(0.0, f64::max)
    }

    /// Healing length √(κ/(U0 n_peak)) in μm, i.e. ħ/√(2M U0 n_peak).
    pub fn healing_length(&self) -> f64 {
        (self.kappa / (self.u0 * self.peak_density())).sqrt()
    }

    pub fn norm(&self) -> f64 {
        self.n0.iter().sum::<f64>() * self.grid.dv()
    }
}

#[derive(Debug, Clone)]
pub struct GpeOptions {
    pub max_iterations: usize,
    pub energy_tol: f64,
    pub residual_tol: f64,
    /// Imaginary time step in s; chosen from the chemical potential scale when None.
    pub dtau: Option<f64>,
    pub check_resolution: bool,
}

impl Default for GpeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            energy_tol: 1e-10,
            residual_tol: 1e-8,
            dtau: None,
            check_resolution: true,
        }
    }
}

/// (U0, U1)/h in Hz·μm^dims. For 1D grids the 3D couplings are divided by the
/// transverse area 2π l⊥², l⊥ the oscillator length of the geometric mean of
/// the two discarded trap frequencies.
pub fn effective_couplings(p: &PhysicalParams, g: &GridSpec) -> (f64, f64) {
    let c = derive_couplings(p);
    let (u0, u1) = (c.u0_hz(), c.u1_hz());
    if g.dims == 3 {
        return (u0, u1);
    }
    let area = transverse_area(p, g.axis);
    (u0 / area, u1 / area)
}

fn transverse_area(p: &PhysicalParams, axis: usize) -> f64 {
    let others: Vec<f64> = (0..3).filter(|&a| a != axis).map(|a| p.trap_freqs[a]).collect();
    let f_perp = (others[0] * others[1]).sqrt();
    let l = units::oscillator_length(p.atom_mass, f_perp);
    2.0 * PI * l * l
}

/// Thomas–Fermi half-extents (μm) for the active axes of a grid with the
/// given dimensionality.
pub fn thomas_fermi_extent(p: &PhysicalParams, dims: usize, axis: usize) -> [f64; 3] {
    if dims == 3 {
        return thomas_fermi_radii(p);
    }
    // 1D: N = 4 μ R / (3 g1), R = √(μ/(c f²))
    let g = GridSpec {
        dims: 1,
        points: [4, 1, 1],
        half_extents: [1.0, 0.0, 0.0],
        axis,
    };
    let (g1, _) = effective_couplings(p, &g);
    let c = p.trap_coefficient();
    let f = p.trap_freqs[axis];
    let mu = (0.75 * p.atom_count as f64 * g1 * c.sqrt() * f).powf(2.0 / 3.0);
    [(mu / (c * f * f)).sqrt(), 0.0, 0.0]
}

/// Builds a grid with half-extents `extent_tf` × the Thomas–Fermi radius.
pub fn grid_for(p: &PhysicalParams, dims: usize, points: &[usize], extent_tf: f64, axis: usize) -> Result<GridSpec> {
    let r = thomas_fermi_extent(p, dims, axis);
    if dims == 3 {
        GridSpec::new_3d(
            [points[0], points[1], points[2]],
            [extent_tf * r[0], extent_tf * r[1], extent_tf * r[2]],
        )
    } else {
        GridSpec::new_1d(points[0], extent_tf * r[0], axis)
    }
}

/// Thomas–Fermi density n0 = max(0, (μ − V)/U0) on the grid, with μ fixed
/// so that Σ n0 dV = N.
pub fn thomas_fermi_profile(p: &PhysicalParams, g: &GridSpec) -> Result<CondensateProfile> {
    p.validate()?;
    g.validate()?;
    let (u0, u1) = effective_couplings(p, g);
    let potential = g.harmonic_potential(p.trap_coefficient(), p.trap_freqs);
    let target = p.atom_count as f64 * u0 / g.dv();
    let mu = exact_tf_level(&potential, target);
    let n0: Vec<f64> = potential.iter().map(|v| ((mu - v) / u0).max(0.0)).collect();
    let psi0 = n0.iter().map(|n| n.sqrt()).collect();
    Ok(CondensateProfile {
        grid: g.clone(),
        psi0,
        n0,
        mu,
        potential,
        kappa: p.kinetic_coefficient(),
        u0,
        u1,
        atom_count: p.atom_count,
        residual: None,
        iterations: 0,
    })
}

/// Solves Σ max(0, μ − V_i) = target for μ exactly. The left side is
/// piecewise linear in μ with breakpoints at the sorted V_i.
fn exact_tf_level(v: &[f64], target: f64) -> f64 {
    let mut s: Vec<f64> = v.to_vec();
    s.sort_by(f64::total_cmp);
    let mut prefix = 0.0;
    for m in 0..s.len() {
        prefix += s[m];
        let count = (m + 1) as f64;
        let mu = (target + prefix) / count;
        if m + 1 == s.len() || mu <= s[m + 1] {
            return mu;
        }
    }
    unreachable!()
}

struct GpSystem<'a> {
    g: &'a GridSpec,
    kappa: f64,
    u0: f64,
    v: &'a [f64],
    n: f64,
}

impl GpSystem<'_> {
    /// out = (−κ∇² + V + U0 ψ²) ψ
    fn apply_h(&self, psi: &[f64], out: &mut [f64]) {
        self.g.laplacian(psi, out);
        let (k, u0) = (self.kappa, self.u0);
        out.par_iter_mut()
            .zip(psi.par_iter().zip(self.v.par_iter()))
            .for_each(|(o, (p, v))| *o = -k * *o + (v + u0 * p * p) * p);
    }

    /// GP energy functional E[ψ] (Hz × atoms).
    fn energy(&self, psi: &[f64], scratch: &mut [f64]) -> f64 {
        self.g.laplacian(psi, scratch);
        let (k, u0) = (self.kappa, self.u0);
        let dv = self.g.dv();
        grid::par_sum(psi.len(), |i| {
            let p = psi[i];
            p * (-k * scratch[i] + self.v[i] * p + 0.5 * u0 * p * p * p)
        }) * dv
    }

    fn normalize(&self, psi: &mut [f64]) {
        let s = grid::dot(psi, psi) * self.g.dv();
        grid::scale((self.n / s).sqrt(), psi);
    }
}

/// Ground state of μψ = (−κ∇² + V + U0|ψ|²)ψ with Σ|ψ|²dV = N.
///
/// Imaginary-time split-step propagation (kinetic step through the FFT with
/// the finite-difference symbol) until the energy change per step drops
/// below `energy_tol`, then preconditioned steepest descent on the
/// finite-difference functional to remove the splitting bias.
pub fn solve_ground_state(p: &PhysicalParams, g: &GridSpec, opts: &GpeOptions) -> Result<CondensateProfile> {
    p.validate()?;
    g.validate()?;
    let (u0, u1) = effective_couplings(p, g);
    let kappa = p.kinetic_coefficient();
    let tf_r = thomas_fermi_extent(p, g.dims, g.axis);
    if u0 > 0.0 && opts.check_resolution {
        for a in 0..g.dims {
            if g.half_extents[a] < MIN_EXTENT_TF * tf_r[a] {
                return Err(Error::validation(
                    "gpe",
                    format!(
                        "half extent {:.3} μm on axis {a} is below {MIN_EXTENT_TF} Thomas–Fermi radii ({:.3} μm)",
                        g.half_extents[a], tf_r[a]
                    ),
                ));
            }
        }
    }
    let v = g.harmonic_potential(p.trap_coefficient(), p.trap_freqs);
    let n_atoms = p.atom_count as f64;
    let sys = GpSystem {
        g,
        kappa,
        u0,
        v: &v,
        n: n_atoms,
    };

    // initial guess: Thomas–Fermi plus a small harmonic-oscillator Gaussian
    let c = p.trap_coefficient();
    let f = p.trap_freqs;
    let gauss = if g.dims == 3 {
        g.map_coords(|x, y, z| (-(c * (f[0] * x * x + f[1] * y * y + f[2] * z * z))).exp())
    } else {
        let fa = f[g.axis];
        g.map_coords(|x, _, _| (-(c * fa * x * x)).exp())
    };
    let zero_point = if g.dims == 3 {
        0.5 * f.iter().sum::<f64>()
    } else {
        0.5 * f[g.axis]
    };
    let tf = thomas_fermi_profile(p, g)?;
    let interacting = tf.mu > zero_point;
    let mut psi: Vec<f64> = if interacting {
        let peak = tf.psi0.iter().copied().fold(0.0, f64::max);
        tf.psi0.iter().zip(&gauss).map(|(a, b)| a + 1e-2 * peak * b).collect()
    } else {
        gauss
    };
    sys.normalize(&mut psi);
    let mu_scale = tf.mu.max(zero_point);
    let dtau = opts.dtau.unwrap_or(0.25 / (TAU * mu_scale));

    // split-step imaginary time
    let fft = FftNd::new(g.points);
    let kin: Vec<f64> = g
        .fd_symbol()
        .iter()
        .map(|k2| (-TAU * kappa * k2 * dtau).exp())
        .collect();
    let mut buf = vec![Complex64::default(); g.len()];
    let mut scratch = vec![0.0; g.len()];
    let mut e_prev = sys.energy(&psi, &mut scratch);
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        iterations += 1;
        half_potential_step(&mut psi, &v, u0, dtau);
        buf.par_iter_mut()
            .zip(psi.par_iter())
            .for_each(|(b, p)| *b = Complex64::new(*p, 0.0));
        fft.forward(&mut buf);
        buf.par_iter_mut().zip(kin.par_iter()).for_each(|(b, k)| *b *= k);
        fft.inverse(&mut buf);
        psi.par_iter_mut().zip(buf.par_iter()).for_each(|(p, b)| *p = b.re);
        half_potential_step(&mut psi, &v, u0, dtau);
        sys.normalize(&mut psi);
        let e = sys.energy(&psi, &mut scratch);
        let change = ((e - e_prev) / e).abs();
        e_prev = e;
        if change < opts.energy_tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence {
            module: "gpe",
            iterations,
            residual: residual_of(&sys, &psi).1,
        });
    }

    // preconditioned steepest descent on the discrete functional
    let ksym = g.fd_symbol();
    let mut hpsi = vec![0.0; g.len()];
    let mut step = 1.0;
    let mut rel = f64::INFINITY;
    let mut trial = vec![0.0; g.len()];
    let max_sd = opts.max_iterations.clamp(1, 2000);
    for _ in 0..max_sd {
        sys.apply_h(&psi, &mut hpsi);
        let mu = grid::dot(&psi, &hpsi) / grid::dot(&psi, &psi);
        let r: Vec<f64> = hpsi.par_iter().zip(psi.par_iter()).map(|(h, p)| h - mu * p).collect();
        rel = grid::norm(&r) / (mu.abs() * grid::norm(&psi));
        if rel < opts.residual_tol {
            break;
        }
        iterations += 1;
        let sv: Vec<f64> = psi
            .par_iter()
            .zip(v.par_iter())
            .map(|(p, v)| 1.0 / (mu + v + u0 * p * p).max(1e-300).sqrt())
            .collect();
        buf.par_iter_mut()
            .enumerate()
            .for_each(|(i, b)| *b = Complex64::new(sv[i] * r[i], 0.0));
        fft.forward(&mut buf);
        buf.par_iter_mut()
            .zip(ksym.par_iter())
            .for_each(|(b, k2)| *b *= mu / (mu + kappa * k2));
        fft.inverse(&mut buf);
        let mut d: Vec<f64> = buf.par_iter().zip(sv.par_iter()).map(|(b, s)| b.re * s).collect();
        let proj = grid::dot(&d, &psi) / grid::dot(&psi, &psi);
        grid::axpy(-proj, &psi, &mut d);

        // Newton step along d using the Hessian of the constrained functional,
        // ⟨d, (H − μ + 2U0ψ²) d⟩, evaluated without energy differences
        sys.g.laplacian(&d, &mut scratch);
        let num = grid::dot(&r, &d);
        let den = grid::par_sum(d.len(), |i| {
            let n = psi[i] * psi[i];
            d[i] * (-kappa * scratch[i] + (v[i] + 3.0 * u0 * n - mu) * d[i])
        });
        let th = if den > 0.0 { num / den } else { step };
        trial
            .par_iter_mut()
            .zip(psi.par_iter().zip(d.par_iter()))
            .for_each(|(t, (p, d))| *t = p - th * d);
        sys.normalize(&mut trial);
        std::mem::swap(&mut psi, &mut trial);
        step = th;
    }
    if rel >= opts.residual_tol {
        return Err(Error::Convergence {
            module: "gpe",
            iterations,
            residual: rel,
        });
    }

    // ground state is nodeless; fix the sign convention
    let min = psi.iter().copied().fold(f64::INFINITY, f64::min);
    let max = psi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        psi.iter_mut().for_each(|x| *x = -*x);
    }
    let (lo, hi) = if max <= 0.0 { (-max, -min) } else { (min, max) };
    if lo < -1e-8 * hi {
        return Err(Error::Convergence {
            module: "gpe",
            iterations,
            residual: rel,
        });
    }
    psi.iter_mut().for_each(|x| *x = x.max(0.0));
    sys.normalize(&mut psi);

    sys.apply_h(&psi, &mut hpsi);
    let mu = grid::dot(&psi, &hpsi) * g.dv() / n_atoms;
    let n0: Vec<f64> = psi.iter().map(|x| x * x).collect();
    let profile = CondensateProfile {
        grid: g.clone(),
        psi0: psi,
        n0,
        mu,
        potential: v,
        kappa,
        u0,
        u1,
        atom_count: p.atom_count,
        residual: Some(rel),
        iterations,
    };

    if u0 > 0.0 && opts.check_resolution {
        let heal = profile.healing_length();
        let h = g.max_spacing();
        if h > HEALING_RESOLUTION_FACTOR * heal {
            return Err(Error::validation(
                "gpe",
                format!(
                    "grid spacing {h:.4} μm exceeds {HEALING_RESOLUTION_FACTOR} healing lengths ({heal:.4} μm)"
                ),
            ));
        }
    }
    Ok(profile)
}

fn half_potential_step(psi: &mut [f64], v: &[f64], u0: f64, dtau: f64) {
    psi.par_iter_mut()
        .zip(v.par_iter())
        .for_each(|(p, v)| *p *= (-TAU * (v + u0 * *p * *p) * 0.5 * dtau).exp());
}

fn residual_of(sys: &GpSystem, psi: &[f64]) -> (f64, f64) {
    let mut h = vec![0.0; psi.len()];
    sys.apply_h(psi, &mut h);
    let mu = grid::dot(psi, &h) / grid::dot(psi, psi);
    let r = grid::par_sum(psi.len(), |i| (h[i] - mu * psi[i]).powi(2)).sqrt();
    (mu, r / (mu.abs() * grid::norm(psi)))
}

/// Relative residual ‖(H_GP − μ)ψ0‖/‖μψ0‖ of a profile with H_GP built from
/// its own potential and U0.
pub fn gp_residual(profile: &CondensateProfile) -> f64 {
    let sys = GpSystem {
        g: &profile.grid,
        kappa: profile.kappa,
        u0: profile.u0,
        v: &profile.potential,
        n: profile.atom_count as f64,
    };
    let mut h = vec![0.0; profile.psi0.len()];
    sys.apply_h(&profile.psi0, &mut h);
    let mu = profile.mu;
    let r = grid::par_sum(h.len(), |i| (h[i] - mu * profile.psi0[i]).powi(2)).sqrt();
    r / (mu.abs() * grid::norm(&profile.psi0))
}

/// GP energy functional of a profile's ψ0.
pub fn gp_energy(profile: &CondensateProfile, psi: &[f64]) -> f64 {
    let sys = GpSystem {
        g: &profile.grid,
        kappa: profile.kappa,
        u0: profile.u0,
        v: &profile.potential,
        n: profile.atom_count as f64,
    };
    let mut scratch = vec![0.0; psi.len()];
    let mut q = psi.to_vec();
    sys.normalize(&mut q);
    sys.energy(&q, &mut scratch)
}

const DUMP_MAGIC: &[u8; 8] = b"SPDCEN0\x01";

/// Writes the density as: 8-byte magic, u32 dims, 3×u32 points, 3×f64
/// half-extents, f64 μ, then the row-major f64 density, all little-endian.
pub fn write_density(profile: &CondensateProfile, path: &Path) -> Result<()> {
    let mut out = Vec::with_capacity(64 + 8 * profile.n0.len());
    out.extend_from_slice(DUMP_MAGIC);
    out.extend_from_slice(&(profile.grid.dims as u32).to_le_bytes());
    for n in profile.grid.points {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for l in profile.grid.half_extents {
        out.extend_from_slice(&l.to_le_bytes());
    }
    out.extend_from_slice(&profile.mu.to_le_bytes());
    for x in &profile.n0 {
        out.extend_from_slice(&x.to_le_bytes());
    }
    std::fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Reads a density dump; returns (dims, points, half_extents, μ, n0).
#[allow(clippy::type_complexity)]
pub fn read_density(path: &Path) -> Result<(usize, [usize; 3], [f64; 3], f64, Vec<f64>)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    let bad = || Error::validation("gpe", format!("{} is not a density dump", path.display()));
    if bytes.len() < 8 + 16 + 32 || &bytes[..8] != DUMP_MAGIC {
        return Err(bad());
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let dims = u32_at(8);
    let points = [u32_at(12), u32_at(16), u32_at(20)];
    let half = [f64_at(24), f64_at(32), f64_at(40)];
    let mu = f64_at(48);
    let len: usize = points.iter().product();
    if bytes.len() != 56 + 8 * len {
        return Err(bad());
    }
    let n0 = (0..len).map(|i| f64_at(56 + 8 * i)).collect();
    Ok((dims, points, half, mu, n0))
}
