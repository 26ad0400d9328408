use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use proptest::prelude::*;
use spin_dce::entanglement::{self, TwoModeMoments};
use spin_dce::homogeneous::{self, HomogeneousMode};
use spin_dce::pair::{ModeState, PairMode};
use spin_dce::{PhysicalParams, QzeSchedule, ScheduleKind};

/// Pure Gaussian state on the (2P+1)² − S² − A² = 1 shell.
fn shell_state(p: f64, phi: f64) -> ModeState {
    let r = ((2.0 * p + 1.0).powi(2) - 1.0).sqrt();
    ModeState {
        t: 0.0,
        p,
        s: r * phi.cos(),
        a: r * phi.sin(),
    }
}

fn schedules() -> impl Strategy<Value = QzeSchedule> {
    prop_oneof![
        (0.0..100.0, 0.0..40.0, 1.0..200.0, 0.0..6.3, 0.01..1.0).prop_map(|(m, a, f, ph, d)| {
            QzeSchedule::sinusoid(m, a, f, ph, d)
        }),
        (0.0..50.0, 0.0..50.0, 0.001..0.2, 0.01..1.0).prop_map(|(qi, qf, r, d)| QzeSchedule {
            kind: ScheduleKind::Quench {
                q_initial: qi,
                q_final: qf,
                ramp_time: r,
            },
            duration: d,
        }),
        (0.0..50.0, 0.0..50.0, 0.0..50.0, 1.0..100.0, 0.0..6.3, 0.01..0.5).prop_map(
            |(lo, w1, w2, f, ph, d)| QzeSchedule {
                kind: ScheduleKind::ClippedSinusoid {
                    min: lo,
                    max: lo + w1 + w2,
                    center: lo + w1,
                    frequency: f,
                    phase: ph,
                },
                duration: d,
            }
        ),
    ]
}

fn moments() -> impl Strategy<Value = TwoModeMoments> {
    // |c|² <= n(n+1): scale a pure-state c by a factor in [0, 1]
    (0.0..20.0, 0.0..1.0, 0.0..(2.0 * PI)).prop_map(|(n, frac, ph): (f64, f64, f64)| TwoModeMoments {
        n,
        c: Complex64::from_polar(frac * (n * (n + 1.0)).sqrt(), ph),
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn qdot_integrates_to_q(s in schedules()) {
        // Simpson per segment; q̇ jumps at the breakpoints
        let mut knots = vec![0.0];
        knots.extend(s.breakpoints());
        knots.push(s.duration);
        let mut acc = 0.0;
        for w in knots.windows(2) {
            let n = 20_000;
            let dt = (w[1] - w[0]) / n as f64;
            for i in 0..n {
                let t0 = w[0] + i as f64 * dt;
                // stay inside the segment so the one-sided derivative is used
                let (a, b) = (t0 + 1e-6 * dt, (t0 + dt - 1e-6 * dt).min(s.duration));
                acc += dt / 6.0 * (s.qdot_eval(a).unwrap() + 4.0 * s.qdot_eval(t0 + 0.5 * dt).unwrap() + s.qdot_eval(b).unwrap());
            }
        }
        let (lo, hi) = s.range();
        let want = s.q_eval(s.duration).unwrap() - s.q_eval(0.0).unwrap();
        prop_assert!((acc - want).abs() < 1e-5 * (hi - lo).max(1.0), "{acc} vs {want}");
        let q = s.q_eval(0.37 * s.duration).unwrap();
        prop_assert!(q >= lo - 1e-9 && q <= hi + 1e-9);
    }

    #[test]
    fn mean_is_the_period_average(s in schedules()) {
        if let ScheduleKind::Quench { .. } = s.kind {
            return Ok(());
        }
        let period = match s.kind {
            ScheduleKind::Sinusoid { frequency, .. } | ScheduleKind::ClippedSinusoid { frequency, .. } => 1.0 / frequency,
            _ => 1.0,
        };
        let long = QzeSchedule { duration: period, ..s };
        let n = 200_000;
        let avg = (0..n).map(|i| long.q_eval((i as f64 + 0.5) * period / n as f64).unwrap()).sum::<f64>() / n as f64;
        let (lo, hi) = s.range();
        prop_assert!((avg - s.mean()).abs() < 1e-6 * (hi - lo).max(1.0), "{avg} vs {}", s.mean());
    }

    #[test]
    fn diff_and_sum_variances_add_to_total_noise(m in moments(), th in 0.0..(2.0 * PI)) {
        let total = 2.0 * (2.0 * m.n + 1.0);
        prop_assert!((m.v_d(th) + m.v_s(th) - total).abs() < 1e-9 * total);
        prop_assert!(m.v_d(th) >= 0.0 && m.v_s(th) >= 0.0);
    }

    #[test]
    fn witness_at_right_angles_sums_to_twice_the_noise(m in moments(), th in 0.0..(2.0 * PI)) {
        let total = 4.0 * (2.0 * m.n + 1.0);
        prop_assert!((m.witness(th) + m.witness(th + FRAC_PI_2) - total).abs() < 1e-9 * total);
    }

    #[test]
    fn min_witness_matches_closed_form(m in moments()) {
        let closed = 2.0 * (2.0 * m.n + 1.0) - 4.0 * m.c.norm();
        prop_assert!((m.min_witness() - closed).abs() < 1e-9 * (1.0 + closed.abs()));
        prop_assert!((m.witness(m.argmin_witness()) - closed).abs() < 1e-9 * (1.0 + m.n));
        let grid = entanglement::theta_grid(721);
        let lowest = grid.iter().map(|&t| m.witness(t)).fold(f64::INFINITY, f64::min);
        prop_assert!(lowest >= closed - 1e-9 * (1.0 + m.n));
        // a physical state never beats the pure-state bound 2e^{−2r}
        prop_assert!(m.min_witness() >= 2.0 * (2.0 * m.n + 1.0 - 2.0 * (m.n * (m.n + 1.0)).sqrt()) - 1e-9 * (1.0 + m.n));
    }

    #[test]
    fn tmsv_is_pure_with_exponential_witness(r in 0.0..2.0f64) {
        let m = TwoModeMoments::tmsv(r);
        prop_assert!(m.purity_gap().abs() < 1e-9 * (1.0 + m.n * m.n));
        prop_assert!((m.min_witness() - 2.0 * (-2.0 * r).exp()).abs() < 1e-9);
    }

    #[test]
    fn bare_population_is_non_negative(
        off in 1.0..200.0, lam in -10.0..10.0, dq in 0.001..100.0, p in 0.0..50.0, phi in 0.0..(2.0 * PI)
    ) {
        let pair = PairMode::new(off, lam);
        // a stable q: offset + q > |λ|
        let q = lam.abs() - off + dq;
        let st = shell_state(p, phi);
        let n = pair.population(&st, q, "prop").unwrap();
        prop_assert!(n >= -1e-9 * (1.0 + p), "n = {n}");
        let c = pair.anomalous(&st, q, "prop").unwrap();
        let m = TwoModeMoments { n, c };
        prop_assert!(m.purity_gap().abs() < 1e-7 * (1.0 + n * n));
    }

    #[test]
    fn frame_change_preserves_the_shell(
        off in 1.0..100.0, lam in -8.0..8.0, d1 in 0.01..50.0, d2 in 0.01..50.0, p in 0.0..20.0, phi in 0.0..(2.0 * PI)
    ) {
        let pair = PairMode::new(off, lam);
        let (q1, q2) = (lam.abs() - off + d1, lam.abs() - off + d2);
        let st = shell_state(p, phi);
        let moved = pair.reproject(&st, q1, q2, "prop").unwrap();
        prop_assert!(moved.casimir_error() < 1e-9);
        let back = pair.reproject(&moved, q2, q1, "prop").unwrap();
        let scale = 1.0 + p;
        prop_assert!((back.p - st.p).abs() < 1e-8 * scale * scale);
        prop_assert!((back.s - st.s).abs() < 1e-8 * scale * scale);
        prop_assert!((back.a - st.a).abs() < 1e-8 * scale * scale);
    }

    #[test]
    fn dispersion_is_even_in_k(k in 0.0..5.0f64, q in -20.0..80.0, n in 1.0..200.0) {
        let p = PhysicalParams::rubidium_default();
        let a = homogeneous::xi_k(k, q, n, &p);
        let b = homogeneous::xi_k(-k, q, n, &p);
        prop_assert_eq!(a.xi, b.xi);
        prop_assert_eq!(a.eps_k, b.eps_k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn driven_mode_stays_on_the_shell(
        qbar in 15.0..60.0, amp in 0.0..10.0, f in 5.0..150.0, k in -1.0..1.0f64
    ) {
        let p = PhysicalParams::rubidium_default();
        let m = HomogeneousMode::new(k, 100.0, &p);
        let mirrored = HomogeneousMode::new(-k, 100.0, &p);
        let sched = QzeSchedule::sinusoid(qbar, amp, f, 0.0, 0.3);
        let ts = [0.1, 0.2, 0.3];
        let a = homogeneous::integrate_modulation(&m, &sched, &ts, 1e-11).unwrap();
        let b = homogeneous::integrate_modulation(&mirrored, &sched, &ts, 1e-11).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!(x.casimir_error() < 1e-7, "{}", x.casimir_error());
            prop_assert_eq!(x, y);
            let n = homogeneous::population_from_psa(x, &m, sched.q_eval(x.t).unwrap()).unwrap();
            prop_assert!(n >= 0.0);
        }
    }
}
