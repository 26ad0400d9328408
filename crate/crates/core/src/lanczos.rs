//! Lowest eigenpairs of large sparse symmetric operators.
//!
//! Krylov–Schur (thick-restart) Lanczos with full reorthogonalization, run on a
//! Chebyshev polynomial of the operator that maps the unwanted upper part of
//! the spectrum into [−1, 1] and amplifies everything below the cut. The cut
//! is estimated from a short unreorthogonalized Lanczos run.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{axpy, dot, norm, scale};

pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// An upper bound on the largest eigenvalue (e.g. Gershgorin).
    fn upper_bound(&self) -> f64;
}

#[derive(Debug, Clone)]
pub struct EigenOptions {
    /// Residual target relative to the spectral scale: ‖Ax − λx‖ < tol·scale.
    pub tol: f64,
    pub max_restarts: usize,
    /// Krylov basis size; 0 chooses from `nev`.
    pub krylov_dim: usize,
    /// Chebyshev filter degree (even).
    pub filter_degree: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_restarts: 200,
            krylov_dim: 0,
            filter_degree: 40,
            seed: 0x5eed_1a2c,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EigenResult {
    pub values: Vec<f64>,
    /// Unit vectors in the Euclidean norm.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub scale: f64,
    pub matvecs: usize,
    pub restarts: usize,
}

struct Chebyshev<'a, A: LinearOperator> {
    a: &'a A,
    center: f64,
    half: f64,
    degree: usize,
}

fn random_unit(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let s = norm(&v);
    scale(1.0 / s, &mut v);
    v
}

/// Ritz values of a plain `steps`-step Lanczos run, sorted ascending.
pub fn lanczos_ritz_values<A: LinearOperator>(a: &A, steps: usize, seed: u64) -> Vec<f64> {
    let n = a.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = random_unit(n, &mut rng);
    let mut v_prev = vec![0.0; n];
    let mut w = vec![0.0; n];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut beta = 0.0;
    for _ in 0..steps.min(n) {
        a.apply(&v, &mut w);
        let alpha = dot(&w, &v);
        w.par_iter_mut()
            .zip(v.par_iter().zip(v_prev.par_iter()))
            .for_each(|(w, (v, vp))| *w -= alpha * v + beta * vp);
        alphas.push(alpha);
        beta = norm(&w);
        if beta < 1e-14 * alpha.abs().max(1.0) {
            break;
        }
        betas.push(beta);
        std::mem::swap(&mut v_prev, &mut v);
        v.par_iter_mut().zip(w.par_iter()).for_each(|(v, w)| *v = w / beta);
    }
    let m = alphas.len();
    let t = DMatrix::from_fn(m, m, |i, j| {
        if i == j {
            alphas[i]
        } else if i + 1 == j || j + 1 == i {
            betas[i.min(j)]
        } else {
            0.0
        }
    });
    let mut vals: Vec<f64> = SymmetricEigen::new(t).eigenvalues.iter().copied().collect();
    vals.sort_by(f64::total_cmp);
    vals
}

/// The `nev` smallest eigenpairs of `a`.
pub fn lowest_eigenpairs<A: LinearOperator>(a: &A, nev: usize, opts: &EigenOptions) -> Result<EigenResult> {
    let n = a.dim();
    if nev == 0 || nev > n {
        return Err(Error::validation("lanczos", format!("cannot compute {nev} eigenpairs of a {n}-dimensional operator")));
    }
    let upper = a.upper_bound();
    let ritz = lanczos_ritz_values(a, 200.min(n), opts.seed ^ 0x9e37_79b9);
    let lower = ritz[0];
    let spread = upper - lower;
    let scale_ = upper.abs().max(lower.abs());
    let target = opts.tol * scale_;

    // distinct Ritz values (ghost copies merged)
    let mut distinct: Vec<f64> = Vec::new();
    for &r in &ritz {
        if distinct.last().is_none_or(|&d| r - d > 1e-7 * spread) {
            distinct.push(r);
        }
    }
    let mut cut_index = (nev + 6).min(distinct.len() - 1);
    let mut attempts = 0;
    let mut matvecs = 0;
    loop {
        attempts += 1;
        let cut = if cut_index < distinct.len() {
            distinct[cut_index]
        } else {
            lower + 0.5 * spread
        };
        let res = filtered_lanczos(a, nev, cut, upper, target, scale_, opts, &mut matvecs)?;
        match res {
            Some(mut r) => {
                r.matvecs = matvecs;
                return Ok(r);
            }
            None if attempts < 6 => {
                cut_index = (cut_index * 2).max(cut_index + 4);
            }
            None => {
                return Err(Error::Convergence {
                    module: "lanczos",
                    iterations: matvecs,
                    residual: f64::NAN,
                })
            }
        }
    }
}

/// Returns Ok(None) if the cut turned out to sit below a wanted eigenvalue.
#[allow(clippy::too_many_arguments)]
fn filtered_lanczos<A: LinearOperator>(
    a: &A,
    nev: usize,
    cut: f64,
    upper: f64,
    target: f64,
    scale_: f64,
    opts: &EigenOptions,
    matvecs: &mut usize,
) -> Result<Option<EigenResult>> {
    let n = a.dim();
    let degree = (opts.filter_degree.max(2) + 1) & !1;
    let filter = Chebyshev {
        a,
        center: 0.5 * (upper + cut),
        half: 0.5 * (upper - cut),
        degree,
    };
    let m = if opts.krylov_dim > 0 {
        opts.krylov_dim.max(nev + 4)
    } else {
        (2 * nev + 10).max(24)
    }
    .min(n);
    let keep = (nev + (m - nev) / 2).min(m - 1);

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut basis: Vec<Vec<f64>> = vec![random_unit(n, &mut rng)];
    // projected matrix (m+1)×m, column j = Vᵀ B v_j
    let mut h = DMatrix::<f64>::zeros(m + 1, m);
    let mut start = 0;
    let (mut t0, mut t1, mut w) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut best_res = f64::INFINITY;

    for restart in 0..opts.max_restarts {
        for j in start..m {
            filter_apply(&filter, &basis[j], &mut w, &mut t0, &mut t1);
            *matvecs += degree;
            let mut coef = vec![0.0; j + 1];
            for _pass in 0..2 {
                for (i, v) in basis.iter().enumerate().take(j + 1) {
                    let c = dot(&w, v);
                    axpy(-c, v, &mut w);
                    coef[i] += c;
                }
            }
            for (i, c) in coef.iter().enumerate() {
                h[(i, j)] = *c;
            }
            let beta = norm(&w);
            h[(j + 1, j)] = beta;
            let next = if beta > 1e-300 {
                let mut v = w.clone();
                scale(1.0 / beta, &mut v);
                v
            } else {
                // invariant subspace: continue with a fresh orthogonal vector
                let mut v = random_unit(n, &mut rng);
                for _pass in 0..2 {
                    for b in basis.iter() {
                        let c = dot(&v, b);
                        axpy(-c, b, &mut v);
                    }
                }
                let s = norm(&v);
                scale(1.0 / s, &mut v);
                h[(j + 1, j)] = 0.0;
                v
            };
            if basis.len() > j + 1 {
                basis[j + 1] = next;
            } else {
                basis.push(next);
            }
        }

        let s = {
            let top = h.view((0, 0), (m, m)).clone_owned();
            (&top + top.transpose()) * 0.5
        };
        let eig = SymmetricEigen::new(s);
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&x, &y| eig.eigenvalues[y].total_cmp(&eig.eigenvalues[x]));
        let beta_m = h[(m, m - 1)];

        // Ritz vectors for the kept pairs
        let kept: Vec<Vec<f64>> = order[..keep]
            .par_iter()
            .map(|&col| {
                let mut x = vec![0.0; n];
                for (i, v) in basis.iter().enumerate().take(m) {
                    axpy(eig.eigenvectors[(i, col)], v, &mut x);
                }
                x
            })
            .collect();

        // convergence on the original operator, after a Rayleigh–Ritz on A
        // within the leading nev+ Ritz vectors
        let probe = (nev + 2).min(keep);
        let rr = rayleigh_ritz(a, &kept[..probe], matvecs);
        let worst = rr.residuals[..nev].iter().copied().fold(0.0, f64::max);
        best_res = best_res.min(worst);
        if worst < target {
            // every wanted pair must lie below the cut (amplified by the filter)
            if rr.values[..nev].iter().any(|&v| v >= cut) {
                return Ok(None);
            }
            return Ok(Some(EigenResult {
                values: rr.values[..nev].to_vec(),
                vectors: rr.vectors.into_iter().take(nev).collect(),
                residuals: rr.residuals[..nev].to_vec(),
                scale: scale_,
                matvecs: 0,
                restarts: restart,
            }));
        }

        // thick restart: B V_k = V_k Θ + v_{k} bᵀ
        let resid = basis[m].clone();
        let mut new_h = DMatrix::<f64>::zeros(m + 1, m);
        for (i, &col) in order[..keep].iter().enumerate() {
            new_h[(i, i)] = eig.eigenvalues[col];
            new_h[(keep, i)] = beta_m * eig.eigenvectors[(m - 1, col)];
        }
        h = new_h;
        basis = kept;
        // re-orthonormalize the kept block against drift
        orthonormalize(&mut basis);
        basis.push(resid);
        start = keep;
    }
    Err(Error::Convergence {
        module: "lanczos",
        iterations: *matvecs,
        residual: best_res / scale_,
    })
}

fn filter_apply<A: LinearOperator>(
    f: &Chebyshev<A>,
    x: &[f64],
    out: &mut Vec<f64>,
    y0: &mut Vec<f64>,
    y1: &mut Vec<f64>,
) {
    let (c, e) = (f.center, f.half);
    y0.copy_from_slice(x);
    f.a.apply(x, y1);
    y1.par_iter_mut().zip(x.par_iter()).for_each(|(y, x)| *y = (*y - c * x) / e);
    for _ in 2..=f.degree {
        f.a.apply(y1, out);
        out.par_iter_mut()
            .zip(y1.par_iter().zip(y0.par_iter()))
            .for_each(|(o, (a1, a0))| *o = 2.0 * (*o - c * a1) / e - a0);
        // rotate: y0 ← y1, y1 ← out
        std::mem::swap(y0, y1);
        std::mem::swap(y1, out);
    }
    out.copy_from_slice(y1);
}

fn orthonormalize(vs: &mut [Vec<f64>]) {
    for j in 0..vs.len() {
        let (done, rest) = vs.split_at_mut(j);
        let v = &mut rest[0];
        for _pass in 0..2 {
            for b in done.iter() {
                let c = dot(v, b);
                axpy(-c, b, v);
            }
        }
        let s = norm(v);
        scale(1.0 / s, v);
    }
}

struct RitzPairs {
    values: Vec<f64>,
    vectors: Vec<Vec<f64>>,
    residuals: Vec<f64>,
}

/// Rayleigh–Ritz for `a` on span(xs); values ascending.
fn rayleigh_ritz<A: LinearOperator>(a: &A, xs: &[Vec<f64>], matvecs: &mut usize) -> RitzPairs {
    let k = xs.len();
    let n = a.dim();
    let mut q: Vec<Vec<f64>> = xs.to_vec();
    orthonormalize(&mut q);
    let aq: Vec<Vec<f64>> = q
        .iter()
        .map(|v| {
            let mut y = vec![0.0; n];
            a.apply(v, &mut y);
            y
        })
        .collect();
    *matvecs += k;
    let g = DMatrix::from_fn(k, k, |i, j| 0.5 * (dot(&q[i], &aq[j]) + dot(&q[j], &aq[i])));
    let eig = SymmetricEigen::new(g);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let mut values = Vec::with_capacity(k);
    let mut vectors = Vec::with_capacity(k);
    let mut residuals = Vec::with_capacity(k);
    for &col in &order {
        let mut x = vec![0.0; n];
        let mut ax = vec![0.0; n];
        for i in 0..k {
            let c = eig.eigenvectors[(i, col)];
            axpy(c, &q[i], &mut x);
            axpy(c, &aq[i], &mut ax);
        }
        let lam = eig.eigenvalues[col];
        axpy(-lam, &x, &mut ax);
        residuals.push(norm(&ax));
        values.push(lam);
        vectors.push(x);
    }
    RitzPairs {
        values,
        vectors,
        residuals,
    }
}

/// Dense symmetric matrix as an operator; used in tests and small problems.
pub struct DenseOperator {
    pub m: DMatrix<f64>,
}

impl LinearOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.m.nrows()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..n {
                s += self.m[(i, j)] * x[j];
            }
            y[i] = s;
        }
    }

    fn upper_bound(&self) -> f64 {
        (0..self.dim())
            .map(|i| self.m[(i, i)] + (0..self.dim()).filter(|&j| j != i).map(|j| self.m[(i, j)].abs()).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Diagonal(Vec<f64>);

    impl LinearOperator for Diagonal {
        fn dim(&self) -> usize {
            self.0.len()
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..x.len() {
                y[i] = self.0[i] * x[i];
            }
        }
        fn upper_bound(&self) -> f64 {
            self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        }
    }

    #[test]
    fn diagonal_operator_lowest_values() {
        let d: Vec<f64> = (0..2000).map(|i| 1.0 + (i as f64) * 0.5 + ((i * 7919) % 13) as f64 * 0.01).collect();
        let mut sorted = d.clone();
        sorted.sort_by(f64::total_cmp);
        let r = lowest_eigenpairs(&Diagonal(d), 6, &EigenOptions::default()).unwrap();
        for (a, b) in r.values.iter().zip(&sorted) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
    }

    #[test]
    fn near_degenerate_pair_resolved() {
        let mut d: Vec<f64> = (0..3000).map(|i| 10.0 + i as f64).collect();
        d[1] = 10.001;
        let r = lowest_eigenpairs(&Diagonal(d), 3, &EigenOptions::default()).unwrap();
        assert!((r.values[0] - 10.0).abs() < 1e-8);
        assert!((r.values[1] - 10.001).abs() < 1e-8);
        assert!((r.values[2] - 12.0).abs() < 1e-8);
    }

    #[test]
    fn dense_matches_full_diagonalization() {
        let n = 120;
        let m = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                (i as f64).sqrt() * 3.0
            } else {
                1.0 / (1.0 + (i as f64 - j as f64).abs())
            }
        });
        let mut all: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
        all.sort_by(f64::total_cmp);
        let r = lowest_eigenpairs(&DenseOperator { m }, 5, &EigenOptions::default()).unwrap();
        for (a, b) in r.values.iter().zip(&all) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
        for i in 0..5 {
            for j in 0..5 {
                let d = dot(&r.vectors[i], &r.vectors[j]);
                let e = if i == j { 1.0 } else { 0.0 };
                assert!((d - e).abs() < 1e-10);
            }
        }
    }
}
