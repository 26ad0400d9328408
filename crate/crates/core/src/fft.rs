//! Multi-dimensional FFT built from rustfft line transforms.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct FftNd {
    points: [usize; 3],
    fwd: [Arc<dyn Fft<f64>>; 3],
    inv: [Arc<dyn Fft<f64>>; 3],
}

impl FftNd {
    pub fn new(points: [usize; 3]) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = points.map(|n| planner.plan_fft_forward(n));
        let inv = points.map(|n| planner.plan_fft_inverse(n));
        Self { points, fwd, inv }
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, &self.fwd);
    }

    /// Inverse transform including the 1/N normalization.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, &self.inv);
        let s = 1.0 / data.len() as f64;
        data.par_iter_mut().for_each(|v| *v *= s);
    }

    fn transform(&self, data: &mut [Complex64], plans: &[Arc<dyn Fft<f64>>; 3]) {
        let [nx, ny, nz] = self.points;
        assert_eq!(data.len(), nx * ny * nz);
        // last axis: contiguous lines
        if nz > 1 {
            let p = &plans[2];
            data.par_chunks_mut(nz * ny.max(1)).for_each(|slab| {
                let mut scratch = vec![Complex64::default(); p.get_inplace_scratch_len()];
                for line in slab.chunks_mut(nz) {
                    p.process_with_scratch(line, &mut scratch);
                }
            });
        }
        // middle axis: stride nz within each x-slab
        if ny > 1 {
            let p = &plans[1];
            data.par_chunks_mut(ny * nz).for_each(|slab| {
                let mut line = vec![Complex64::default(); ny];
                let mut scratch = vec![Complex64::default(); p.get_inplace_scratch_len()];
                for k in 0..nz {
                    for j in 0..ny {
                        line[j] = slab[j * nz + k];
                    }
                    p.process_with_scratch(&mut line, &mut scratch);
                    for j in 0..ny {
                        slab[j * nz + k] = line[j];
                    }
                }
            });
        }
        // first axis: stride ny*nz; gather columns in parallel blocks
        if nx > 1 {
            let p = &plans[0];
            let stride = ny * nz;
            let mut cols = vec![Complex64::default(); data.len()];
            // transpose so each x-line is contiguous
            cols.par_chunks_mut(nx).enumerate().for_each(|(jk, col)| {
                for i in 0..nx {
                    col[i] = data[i * stride + jk];
                }
            });
            cols.par_chunks_mut(nx).for_each(|col| {
                let mut scratch = vec![Complex64::default(); p.get_inplace_scratch_len()];
                p.process_with_scratch(col, &mut scratch);
            });
            data.par_chunks_mut(stride).enumerate().for_each(|(i, slab)| {
                for (jk, v) in slab.iter_mut().enumerate() {
                    *v = cols[jk * nx + i];
                }
            });
        }
    }
}
