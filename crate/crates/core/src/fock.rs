//! Brute-force evolution of a [`PairMode`] in a truncated number basis.
//!
//! The Hamiltonian conserves â₊†â₊ − â₋†â₋, so starting from a state with
//! equal occupations the dynamics stays in the twin-Fock ladder |n, n⟩:
//! h|n⟩ = 2a n|n⟩ + λ(n+1)|n+1⟩ + λn|n−1⟩.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions};
use crate::pair::PairMode;
use crate::schedule::QzeSchedule;

pub const DEFAULT_CUTOFF: usize = 60;

#[derive(Debug, Clone)]
pub struct FockSample {
    pub t: f64,
    /// ⟨â₊†â₊⟩
    pub n: f64,
    /// ⟨â₊â₋⟩
    pub c: Complex64,
}

fn hamiltonian(pair: &PairMode, q: f64, dim: usize) -> DMatrix<f64> {
    let a = pair.diag(q);
    let mut h = DMatrix::zeros(dim, dim);
    for n in 0..dim {
        h[(n, n)] = 2.0 * a * n as f64;
        if n + 1 < dim {
            h[(n + 1, n)] = pair.lambda * (n + 1) as f64;
            h[(n, n + 1)] = pair.lambda * (n + 1) as f64;
        }
    }
    h
}

fn moments(re: &[f64], im: &[f64]) -> (f64, Complex64) {
    let mut n = 0.0;
    let mut c = Complex64::new(0.0, 0.0);
    for k in 0..re.len() {
        let pk = Complex64::new(re[k], im[k]);
        n += k as f64 * pk.norm_sqr();
        if k > 0 {
            let pm = Complex64::new(re[k - 1], im[k - 1]);
            c += pm.conj() * pk * k as f64;
        }
    }
    (n, c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FockInitial {
    /// Ground state of h(q(0)).
    BogoliubovVacuum,
    /// |0, 0⟩
    BareVacuum,
}

/// Evolves the ground state of h(q(0)) (the Bogoliubov vacuum) under the
/// schedule. Fails with a truncation error once ⟨n⟩ reaches 0.8·cutoff.
pub fn fock_oracle(
    pair: &PairMode,
    schedule: &QzeSchedule,
    samples: &[f64],
    cutoff: usize,
    tol: f64,
) -> Result<Vec<FockSample>> {
    fock_evolve(pair, schedule, samples, cutoff, tol, FockInitial::BogoliubovVacuum)
}

pub fn fock_evolve(
    pair: &PairMode,
    schedule: &QzeSchedule,
    samples: &[f64],
    cutoff: usize,
    tol: f64,
    initial: FockInitial,
) -> Result<Vec<FockSample>> {
    schedule.validate()?;
    if cutoff < 2 {
        return Err(Error::validation("fock", "cutoff must be at least 2"));
    }
    let q0 = schedule.q_unchecked(0.0);
    let dim = cutoff + 1;
    let mut y0 = vec![0.0; 2 * dim];
    match initial {
        FockInitial::BareVacuum => y0[0] = 1.0,
        FockInitial::BogoliubovVacuum => {
            if !pair.is_stable(q0) {
                return Err(Error::domain("fock", format!("no stable vacuum at q = {q0} Hz")));
            }
            let eig = SymmetricEigen::new(hamiltonian(pair, q0, dim));
            let i0 = (0..dim)
                .min_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
                .unwrap();
            for k in 0..dim {
                y0[k] = eig.eigenvectors[(k, i0)];
            }
            if y0[0] < 0.0 {
                y0.iter_mut().for_each(|v| *v = -*v);
            }
        }
    }

    let limit = 0.8 * cutoff as f64;
    let lambda = pair.lambda;
    let (ys, _) = ode::integrate(
        |t, y, dy| {
            // right-hand limit so that a sudden quench acts from t = 0
            let a = pair.diag(schedule.q_unchecked(t.max(f64::MIN_POSITIVE)));
            let (re, im) = y.split_at(dim);
            let (dre, dim_im) = dy.split_at_mut(dim);
            // i ψ' = 2π h ψ
            for k in 0..dim {
                let mut hr = 2.0 * a * k as f64 * re[k];
                let mut hi = 2.0 * a * k as f64 * im[k];
                if k + 1 < dim {
                    hr += lambda * (k + 1) as f64 * re[k + 1];
                    hi += lambda * (k + 1) as f64 * im[k + 1];
                }
                if k > 0 {
                    hr += lambda * k as f64 * re[k - 1];
                    hi += lambda * k as f64 * im[k - 1];
                }
                dre[k] = TAU * hi;
                dim_im[k] = -TAU * hr;
            }
            let tail = re[dim - 1] * re[dim - 1] + im[dim - 1] * im[dim - 1];
            if tail > 1e-6 {
                let (n, _) = moments(re, im);
                if n >= limit || tail > 1e-3 {
                    return Err(Error::Truncation {
                        occupation: n,
                        cutoff,
                    });
                }
            }
            Ok(())
        },
        0.0,
        &y0,
        schedule.duration,
        samples,
        &schedule.breakpoints(),
        &OdeOptions::with_tol(tol),
    )?;
    ys.into_iter()
        .zip(samples)
        .map(|(y, &t)| {
            let (n, c) = moments(&y[..dim], &y[dim..]);
            if n >= limit {
                return Err(Error::Truncation {
                    occupation: n,
                    cutoff,
                });
            }
            Ok(FockSample { t, n, c })
        })
        .collect()
}
