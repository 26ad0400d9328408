//! Cell-centred Cartesian grids, the finite-difference Laplacian and
//! deterministic parallel reductions.
//!
//! Fields are stored row-major with the last axis fastest:
//! `index = (i * ny + j) * nz + k`. A 1D grid is `[n, 1, 1]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Chunk length for reductions. Fixed so sums do not depend on the thread count.
const REDUCE_CHUNK: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dims: usize,
    pub points: [usize; 3],
    /// Half-extent per axis in μm; the box is [−L, L].
    pub half_extents: [f64; 3],
    /// For 1D grids, the trap axis that is kept.
    pub axis: usize,
}

impl GridSpec {
    pub fn new_3d(points: [usize; 3], half_extents: [f64; 3]) -> Result<Self> {
        let g = Self {
            dims: 3,
            points,
            half_extents,
            axis: 0,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn new_1d(points: usize, half_extent: f64, axis: usize) -> Result<Self> {
        let g = Self {
            dims: 1,
            points: [points, 1, 1],
            half_extents: [half_extent, 0.0, 0.0],
            axis,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::validation("grid", m));
        if self.dims != 1 && self.dims != 3 {
            return bad(format!("dims must be 1 or 3, got {}", self.dims));
        }
        for a in 0..self.dims {
            let n = self.points[a];
            if n < 4 || n % 2 != 0 {
                return bad(format!("points on axis {a} must be even and >= 4, got {n}"));
            }
            let l = self.half_extents[a];
            if !(l.is_finite() && l > 0.0) {
                return bad(format!("half extent on axis {a} must be > 0, got {l}"));
            }
        }
        if self.dims == 1 && (self.points[1] != 1 || self.points[2] != 1) {
            return bad("1D grids must have points [n, 1, 1]".into());
        }
        if self.axis > 2 {
            return bad(format!("axis must be 0..=2, got {}", self.axis));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Spacing per active axis in μm (0 for inactive axes).
    pub fn spacing(&self) -> [f64; 3] {
        let mut h = [0.0; 3];
        for (a, v) in h.iter_mut().enumerate().take(self.dims) {
            *v = 2.0 * self.half_extents[a] / self.points[a] as f64;
        }
        h
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing().into_iter().fold(0.0, f64::max)
    }

    /// Volume element in μm^dims.
    pub fn dv(&self) -> f64 {
        self.spacing()[..self.dims].iter().product()
    }

    /// Coordinate of cell `i` on axis `a`.
    pub fn coord(&self, a: usize, i: usize) -> f64 {
        let h = 2.0 * self.half_extents[a] / self.points[a] as f64;
        -self.half_extents[a] + (i as f64 + 0.5) * h
    }

    pub fn coords(&self, a: usize) -> Vec<f64> {
        if a >= self.dims {
            return vec![0.0];
        }
        (0..self.points[a]).map(|i| self.coord(a, i)).collect()
    }

    /// Evaluates `f(x, y, z)` on the grid. For 1D grids only `x` varies.
    pub fn map_coords<F>(&self, f: F) -> Vec<f64>
    where
        F: Fn(f64, f64, f64) -> f64 + Sync,
    {
        let [_, ny, nz] = self.points;
        let (xs, ys, zs) = (self.coords(0), self.coords(1), self.coords(2));
        let mut out = vec![0.0; self.len()];
        out.par_chunks_mut(ny * nz).enumerate().for_each(|(i, slab)| {
            for j in 0..ny {
                for k in 0..nz {
                    slab[j * nz + k] = f(xs[i], ys[j], zs[k]);
                }
            }
        });
        out
    }

    /// Harmonic potential V/h in Hz for trap frequencies `freqs` (Hz) and the
    /// coefficient `c` of `units::trap_coefficient`.
    pub fn harmonic_potential(&self, c: f64, freqs: [f64; 3]) -> Vec<f64> {
        if self.dims == 1 {
            let f = freqs[self.axis];
            self.map_coords(|x, _, _| c * f * f * x * x)
        } else {
            let [fx, fy, fz] = freqs;
            self.map_coords(|x, y, z| c * (fx * fx * x * x + fy * fy * y * y + fz * fz * z * z))
        }
    }

    /// out = ∇²u with the 7-point (3D) or 3-point (1D) stencil and zero
    /// Dirichlet boundaries.
    pub fn laplacian(&self, u: &[f64], out: &mut [f64]) {
        debug_assert_eq!(u.len(), self.len());
        debug_assert_eq!(out.len(), self.len());
        let [nx, ny, nz] = self.points;
        let h = self.spacing();
        let cx = 1.0 / (h[0] * h[0]);
        let (cy, cz) = if self.dims == 3 {
            (1.0 / (h[1] * h[1]), 1.0 / (h[2] * h[2]))
        } else {
            (0.0, 0.0)
        };
        let diag = -2.0 * (cx + cy + cz);
        let slab = ny * nz;
        out.par_chunks_mut(slab).enumerate().for_each(|(i, o)| {
            let base = i * slab;
            for j in 0..ny {
                for k in 0..nz {
                    let idx = base + j * nz + k;
                    let mut s = diag * u[idx];
                    if i > 0 {
                        s += cx * u[idx - slab];
                    }
                    if i + 1 < nx {
                        s += cx * u[idx + slab];
                    }
                    if self.dims == 3 {
                        if j > 0 {
                            s += cy * u[idx - nz];
                        }
                        if j + 1 < ny {
                            s += cy * u[idx + nz];
                        }
                        if k > 0 {
                            s += cz * u[idx - 1];
                        }
                        if k + 1 < nz {
                            s += cz * u[idx + 1];
                        }
                    }
                    o[j * nz + k] = s;
                }
            }
        });
    }

    /// Eigenvalues of −∇²_FD on a periodic grid, per FFT index (row-major).
    /// Used as the kinetic symbol for spectral propagation and preconditioning.
    pub fn fd_symbol(&self) -> Vec<f64> {
        let h = self.spacing();
        let sym = |a: usize, i: usize| -> f64 {
            if a >= self.dims {
                return 0.0;
            }
            let n = self.points[a] as f64;
            let s = (std::f64::consts::PI * i as f64 / n).sin();
            4.0 * s * s / (h[a] * h[a])
        };
        let [nx, ny, nz] = self.points;
        let sx: Vec<f64> = (0..nx).map(|i| sym(0, i)).collect();
        let sy: Vec<f64> = (0..ny).map(|i| sym(1, i)).collect();
        let sz: Vec<f64> = (0..nz).map(|i| sym(2, i)).collect();
        let mut out = vec![0.0; self.len()];
        out.par_chunks_mut(ny * nz).enumerate().for_each(|(i, slab)| {
            for j in 0..ny {
                for k in 0..nz {
                    slab[j * nz + k] = sx[i] + sy[j] + sz[k];
                }
            }
        });
        out
    }

    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.dims == other.dims
            && self.points == other.points
            && self
                .half_extents
                .iter()
                .zip(other.half_extents.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }
}

/// Σ f(i) for i in 0..len, summed in fixed-size chunks so the result does not
/// depend on how rayon schedules the work.
pub fn par_sum<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let chunks = len.div_ceil(REDUCE_CHUNK);
    let partial: Vec<f64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * REDUCE_CHUNK;
            let hi = (lo + REDUCE_CHUNK).min(len);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    partial.into_iter().sum()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    par_sum(a.len(), |i| a[i] * b[i])
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.par_iter_mut().zip(x.par_iter()).for_each(|(y, x)| *y += alpha * x);
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    x.par_iter_mut().for_each(|v| *v *= alpha);
}
