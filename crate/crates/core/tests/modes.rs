use spin_dce::gpe::{self, GpeOptions};
use spin_dce::grid::GridSpec;
use spin_dce::modes::{self, EffectiveHamiltonian, EffectiveMode};
use spin_dce::params::PhysicalParams;
use spin_dce::units;

fn oscillator_levels(f: [f64; 3], count: usize) -> Vec<f64> {
    let mut e = Vec::new();
    for a in 0..6 {
        for b in 0..6 {
            for c in 0..6 {
                e.push((a as f64 + 0.5) * f[0] + (b as f64 + 0.5) * f[1] + (c as f64 + 0.5) * f[2]);
            }
        }
    }
    e.sort_by(f64::total_cmp);
    e.truncate(count);
    e
}

fn oscillator_grid(points: usize) -> GridSpec {
    let p = PhysicalParams::rubidium_default();
    let l: Vec<f64> = p
        .trap_freqs
        .iter()
        .map(|&f| 5.0 * units::oscillator_length(p.atom_mass, f))
        .collect();
    GridSpec::new_3d([points; 3], [l[0], l[1], l[2]]).unwrap()
}

/// Eigenmodes with n0 = 0: kinetic + trap only.
fn oscillator_modes(g: &GridSpec) -> Vec<EffectiveMode> {
    let p = PhysicalParams::rubidium_default();
    let v = g.harmonic_potential(p.trap_coefficient(), p.trap_freqs);
    let h = EffectiveHamiltonian::new(g, p.kinetic_coefficient(), v);
    modes::eigenmodes_of(&h, 6, 1e-8).unwrap()
}

fn energies(m: &[EffectiveMode]) -> Vec<f64> {
    m.iter().map(|m| m.energy).collect()
}

#[test]
fn harmonic_limit_converges_to_oscillator_levels() {
    let exact = oscillator_levels([150.0, 160.0, 220.0], 6);
    let coarse = energies(&oscillator_modes(&oscillator_grid(32)));
    let mid = energies(&oscillator_modes(&oscillator_grid(48)));
    let fine = energies(&oscillator_modes(&oscillator_grid(64)));
    let r = (64.0f64 / 48.0).powi(2);
    for j in 0..6 {
        let err = |e: &[f64]| (e[j] - exact[j]).abs();
        // second-order stencil: the error shrinks under refinement
        assert!(err(&fine) < err(&mid) && err(&mid) < err(&coarse), "mode {j}");
        let extrapolated = (r * fine[j] - mid[j]) / (r - 1.0);
        assert!(
            ((extrapolated - exact[j]) / exact[j]).abs() < 1e-3,
            "mode {j}: {extrapolated} vs {}",
            exact[j]
        );
    }
}

#[test]
fn uniform_density_overlaps_are_diagonal() {
    let g = oscillator_grid(32);
    let m = oscillator_modes(&g);
    let n0 = vec![3.0; g.len()];
    let chi = modes::overlaps_with_density(&g, &n0, &m).unwrap();
    for i in 0..6 {
        assert!((chi.chi[i][i] - 3.0).abs() < 1e-10 * 3.0);
        for j in 0..6 {
            if i != j {
                assert!(chi.chi[i][j].abs() < 1e-10 * 3.0, "χ[{i}][{j}] = {}", chi.chi[i][j]);
            }
        }
    }
}

#[test]
fn oscillator_modes_have_definite_parity() {
    let g = oscillator_grid(32);
    let m = oscillator_modes(&g);
    let [nx, ny, nz] = g.points;
    let idx = |i: usize, j: usize, k: usize| (i * ny + j) * nz + k;
    for mode in &m {
        for axis in 0..3 {
            let mirror = |i: usize, j: usize, k: usize| match axis {
                0 => idx(nx - 1 - i, j, k),
                1 => idx(i, ny - 1 - j, k),
                _ => idx(i, j, nz - 1 - k),
            };
            let mut even = 0.0;
            let mut odd = 0.0;
            for i in 0..nx {
                for j in 0..ny {
                    for k in 0..nz {
                        let (a, b) = (mode.phi[idx(i, j, k)], mode.phi[mirror(i, j, k)]);
                        even += (a - b).powi(2);
                        odd += (a + b).powi(2);
                    }
                }
            }
            assert!(even.min(odd) < 1e-10 * even.max(odd), "mode {} axis {axis}", mode.index);
        }
    }
}

#[test]
fn trapped_spectrum_is_resolved_and_valid() {
    let p = PhysicalParams::rubidium_default();
    let mut runs = Vec::new();
    for pts in [[48, 48, 36], [64, 64, 48]] {
        let g = gpe::grid_for(&p, 3, &pts, 1.8, 0).unwrap();
        let prof = gpe::solve_ground_state(&p, &g, &GpeOptions::default()).unwrap();
        let m = modes::lowest_eigenmodes(&prof, 6, 1e-8).unwrap();
        let dv = prof.grid.dv();
        for a in &m {
            for b in &m {
                let dot: f64 = a.phi.iter().zip(&b.phi).map(|(x, y)| x * y).sum::<f64>() * dv;
                let want = if a.index == b.index { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
        }
        let chi = modes::overlaps(&prof, &m).unwrap();
        let e = energies(&m);
        let report = modes::validity_check(&e, &chi, prof.u1).unwrap();
        assert!(report.valid, "{report:?}");
        // the ground mode sits below zero: E_0 = −q_0
        assert!(e[0] < 0.0 && e[0] > -20.0, "E0 = {}", e[0]);
        let gap = e[1] - e[0];
        assert!((15.0..25.0).contains(&gap), "E1 − E0 = {gap}");
        for w in e.windows(2) {
            assert!(w[1] >= w[0]);
        }
        // U1χ_jj is a few Hz and negative (ferromagnetic U1)
        for c in chi.diag() {
            assert!((-8.0..-1.0).contains(&(prof.u1 * c)), "U1χ = {}", prof.u1 * c);
        }
        runs.push(e);
    }
    for j in 0..6 {
        assert!((runs[0][j] - runs[1][j]).abs() < 1.0, "mode {j} moves under refinement");
    }
}
