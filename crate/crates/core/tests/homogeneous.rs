use std::f64::consts::{PI, TAU};

use rustfft::{num_complex::Complex64, FftPlanner};
use spin_dce::fock::fock_oracle;
use spin_dce::homogeneous::{self, HomogeneousMode};
use spin_dce::pair::{sample_times, ModeState};
use spin_dce::schedule::ScheduleKind;
use spin_dce::{PhysicalParams, QzeSchedule};

fn mode() -> HomogeneousMode {
    HomogeneousMode::new(0.0, 100.0, &PhysicalParams::rubidium_default())
}

fn xi(m: &HomogeneousMode, q: f64) -> f64 {
    m.dispersion(q).xi.re
}

fn quench(qi: f64, qf: f64, ramp: f64, duration: f64) -> QzeSchedule {
    QzeSchedule {
        kind: ScheduleKind::Quench {
            q_initial: qi,
            q_final: qf,
            ramp_time: ramp,
        },
        duration,
    }
}

#[test]
fn modulation_matches_fock_oracle() {
    let m = mode();
    let qbar = 20.0;
    let f = 2.0 * xi(&m, qbar);
    let sched = QzeSchedule::sinusoid(qbar, 2.0, f, 0.0, 0.5);
    let ts = sample_times(0.5, 201);
    let states = homogeneous::integrate_modulation(&m, &sched, &ts, 1e-11).unwrap();
    let oracle = fock_oracle(&m.pair(), &sched, &ts, 60, 1e-11).unwrap();
    let mut worst: f64 = 0.0;
    for (st, o) in states.iter().zip(&oracle) {
        let q = sched.q_eval(st.t).unwrap();
        let n = homogeneous::population_from_psa(st, &m, q).unwrap();
        worst = worst.max((n - o.n).abs() / o.n);
        let c = m.pair().anomalous(st, q, "test").unwrap();
        assert!((c - o.c).norm() < 1e-4 * o.c.norm().max(o.n));
    }
    assert!(worst < 1e-4, "worst relative deviation {worst:.3e}");
    assert!(oracle.last().unwrap().n > 0.1, "gain too small to be a test");
}

#[test]
fn sudden_quench_matches_closed_form() {
    let m = mode();
    let (qi, qf) = (40.0, 12.0);
    let ts = sample_times(0.3, 301);
    let sched = quench(qi, qf, 0.0, 0.3);
    let states = homogeneous::integrate_modulation(&m, &sched, &ts, 1e-11).unwrap();
    let oracle = fock_oracle(&m.pair(), &sched, &ts, 60, 1e-12).unwrap();
    for ((st, o), &t) in states.iter().zip(&oracle).zip(&ts) {
        let exact = homogeneous::quench_population(&m, qi, qf, t).unwrap();
        let q = sched.q_eval(t).unwrap();
        let n = homogeneous::population_from_psa(st, &m, q).unwrap();
        let n = if t == 0.0 {
            homogeneous::population_from_psa(st, &m, qi).unwrap()
        } else {
            n
        };
        assert!((n - exact).abs() < 1e-6, "t={t}: ode {n} exact {exact}");
        assert!((o.n - exact).abs() < 1e-6, "t={t}: oracle {} exact {exact}", o.n);
        assert!(st.casimir_error() < 1e-7);
    }
}

#[test]
fn fast_ramp_reproduces_sudden_quench() {
    let m = mode();
    let (qi, qf) = (40.0, 12.0);
    let ramp = 1e-3 / xi(&m, qf);
    let ts: Vec<f64> = (1..=50).map(|i| ramp + 0.004 * i as f64).collect();
    let sched = quench(qi, qf, ramp, 0.25);
    let states = homogeneous::integrate_modulation(&m, &sched, &ts, 1e-11).unwrap();
    let amp = (0..200)
        .map(|i| homogeneous::quench_population(&m, qi, qf, i as f64 * 1e-3).unwrap())
        .fold(0.0, f64::max);
    for st in &states {
        let n = homogeneous::population_from_psa(st, &m, qf).unwrap();
        let exact = homogeneous::quench_population(&m, qi, qf, st.t - ramp / 2.0).unwrap();
        assert!((n - exact).abs() < 0.01 * amp, "t={}: {n} vs {exact}", st.t);
    }
}

#[test]
fn oracle_selects_halved_large_qi_form() {
    let m = mode();
    let (qi, qf) = (5000.0, 12.0);
    let ts = sample_times(0.2, 81);
    let oracle = fock_oracle(&m.pair(), &quench(qi, qf, 0.0, 0.2), &ts, 60, 1e-12).unwrap();
    let mut d_half: f64 = 0.0;
    let mut d_full: f64 = 0.0;
    let mut peak: f64 = 0.0;
    for (o, &t) in oracle.iter().zip(&ts).skip(1) {
        let half = homogeneous::quench_population_large_qi(&m, qf, t).unwrap();
        let full = homogeneous::quench_population_large_qi_unhalved(&m, qf, t).unwrap();
        d_half = d_half.max((o.n - half).abs());
        d_full = d_full.max((o.n - full).abs());
        peak = peak.max(o.n);
    }
    assert!(d_half < 0.02 * peak, "halved deviates by {d_half}");
    assert!(d_full > 0.4 * peak, "unhalved deviates by only {d_full}");
}

#[test]
fn quench_oscillates_at_twice_xi() {
    let m = mode();
    let (qi, qf) = (40.0, 12.0);
    let xf = xi(&m, qf);
    let n = 4096;
    let dt = 1e-3;
    let ts: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let sched = quench(qi, qf, 0.0, ts[n - 1]);
    let states = homogeneous::integrate_modulation(&m, &sched, &ts, 1e-10).unwrap();
    let pops: Vec<f64> = states
        .iter()
        .map(|st| homogeneous::population_from_psa(st, &m, qf).unwrap())
        .collect();
    let mean = pops.iter().sum::<f64>() / n as f64;
    // Hann window then FFT
    let mut buf: Vec<Complex64> = pops
        .iter()
        .enumerate()
        .map(|(i, p)| Complex64::new((p - mean) * (0.5 - 0.5 * (TAU * i as f64 / n as f64).cos()), 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mag: Vec<f64> = buf[..n / 2].iter().map(|c| c.norm()).collect();
    let k = (1..n / 2 - 1).max_by(|&a, &b| mag[a].total_cmp(&mag[b])).unwrap();
    let (a, b, c) = (mag[k - 1].ln(), mag[k].ln(), mag[k + 1].ln());
    let shift = 0.5 * (a - c) / (a - 2.0 * b + c);
    let f_peak = (k as f64 + shift) / (n as f64 * dt);
    assert!((f_peak - 2.0 * xf).abs() < 0.005 * 2.0 * xf, "{f_peak} vs {}", 2.0 * xf);

    // minima of the large-q_i form sit at t = j/(2ξ_f) and vanish
    for j in 1..5 {
        let t = j as f64 / (2.0 * xf);
        let v = homogeneous::quench_population_large_qi(&m, qf, t).unwrap();
        assert!(v.abs() < 1e-12);
        let e = homogeneous::quench_population(&m, qi, qf, t).unwrap();
        let e_l = homogeneous::quench_population(&m, qi, qf, t - 1e-3).unwrap();
        let e_r = homogeneous::quench_population(&m, qi, qf, t + 1e-3).unwrap();
        assert!(e < e_l && e < e_r);
    }
}

#[test]
fn resonant_growth_matches_rotating_wave_rate() {
    let m = mode();
    let qbar = 20.0;
    let x = xi(&m, qbar);
    let amp = 1.0;
    let duration = 6.0;
    let sched = QzeSchedule::sinusoid(qbar, amp, 2.0 * x, 0.0, duration);
    let ts = [duration - 1.0, duration];
    let st = homogeneous::integrate_modulation(&m, &sched, &ts, 1e-10).unwrap();
    // P ≈ sinh²(Γt) → d ln P/dt → 2Γ
    let slope = (st[1].p.ln() - st[0].p.ln()) / 1.0;
    let gamma = PI * amp * m.n_u1.abs() / x;
    assert!(st[1].p > 100.0);
    assert!((slope - 2.0 * gamma).abs() < 0.05 * 2.0 * gamma, "slope {slope} vs {}", 2.0 * gamma);
    for s in &st {
        assert!(s.casimir_error() < 1e-7);
    }
}

#[test]
fn off_resonant_drive_stays_bounded() {
    let m = mode();
    let qbar = 20.0;
    let x = xi(&m, qbar);
    let amp = 1.0;
    let f = 1.5 * 2.0 * x;
    let sched = QzeSchedule::sinusoid(qbar, amp, f, 0.0, 2.0);
    let ts = sample_times(2.0, 401);
    let st = homogeneous::integrate_modulation(&m, &sched, &ts, 1e-10).unwrap();
    let max_p = st.iter().map(|s| s.p).fold(0.0, f64::max);
    // peak coupling g0 = A ω |λ| / 2ξ², detuning (ω − 2ξ)·2π
    let g0 = amp * TAU * f * m.n_u1.abs() / (2.0 * x * x);
    let det = TAU * (f - 2.0 * x);
    assert!(max_p < 4.0 * (g0 / det).powi(2), "max P {max_p}, bound {}", (g0 / det).powi(2));
    let oracle = fock_oracle(&m.pair(), &sched, &ts, 30, 1e-11).unwrap();
    for (s, o) in st.iter().zip(&oracle) {
        let n = homogeneous::population_from_psa(s, &m, sched.q_eval(s.t).unwrap()).unwrap();
        assert!((n - o.n).abs() < 1e-6);
    }
}

#[test]
fn zero_amplitude_keeps_vacuum() {
    let m = mode();
    let sched = QzeSchedule::sinusoid(20.0, 0.0, 30.0, 0.0, 0.5);
    let ts = sample_times(0.5, 11);
    for st in homogeneous::integrate_modulation(&m, &sched, &ts, 1e-9).unwrap() {
        assert_eq!((st.p, st.s, st.a), (0.0, 0.0, 0.0));
    }
}

#[test]
fn no_interaction_means_no_dressing() {
    let m = HomogeneousMode {
        k: 0.5,
        eps_k: 3.0,
        n_u1: 0.0,
    };
    let st = ModeState {
        t: 0.0,
        p: 0.3,
        s: 0.1,
        a: 0.2,
    };
    assert!((homogeneous::population_from_psa(&st, &m, 5.0).unwrap() - 0.3).abs() < 1e-15);
}

#[test]
fn instability_aborts_with_time() {
    let m = mode();
    // ramp from a stable q into the window 0 < q < −2nU1
    let sched = quench(40.0, 3.0, 0.1, 0.2);
    let err = homogeneous::integrate_modulation(&m, &sched, &[0.2], 1e-9).unwrap_err();
    match err {
        spin_dce::Error::Unstable { t, .. } => assert!(t > 0.0 && t < 0.1),
        other => panic!("unexpected {other}"),
    }
}
