//! The five subcommands. Each takes a resolved [`Config`] and writes its
//! files through an [`OutputDir`]; [`execute`] adds the manifest.

use std::fs::{self, OpenOptions};
use std::io::Write as _;
use std::path::PathBuf;
use std::sync::Mutex;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use spin_dce::config::Config;
use spin_dce::entanglement::{self, HomodyneOptions, TwoModeMoments};
use spin_dce::fock;
use spin_dce::gpe::{self, CondensateProfile};
use spin_dce::grid::GridSpec;
use spin_dce::homogeneous::{self, HomogeneousMode};
use spin_dce::modes::ValidityReport;
use spin_dce::params::thomas_fermi_mu;
use spin_dce::pipeline::{self, SpectrumSettings, TrappedSystem};
use spin_dce::scan::{self, Peak, ScanPoint};
use spin_dce::trapped::{self, SeedCalibration};
use spin_dce::{Error, Result, ScheduleKind};

use crate::output::{num, sha256_hex, OutputDir, RunManifest};
use crate::svg::{Plot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    GroundState,
    Modes,
    Quench,
    Scan,
    Entangle,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::GroundState => "ground-state",
            Command::Modes => "modes",
            Command::Quench => "quench",
            Command::Scan => "scan",
            Command::Entangle => "entangle",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunContext {
    pub out: PathBuf,
    pub preset: Option<String>,
}

/// Runs `cmd` and writes `manifest.json` last.
pub fn execute(cmd: Command, cfg: &Config, ctx: &RunContext) -> Result<RunManifest> {
    let started_unix_s = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let t0 = Instant::now();
    let mut out = OutputDir::create(&ctx.out)?;
    let mut run = || -> Result<()> {
        match cmd {
            Command::GroundState => ground_state(cfg, &mut out),
            Command::Modes => modes(cfg, &mut out),
            Command::Quench => quench(cfg, &mut out),
            Command::Scan => scan_cmd(cfg, &mut out),
            Command::Entangle => entangle(cfg, &mut out),
        }
    };
    match cfg.run.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w)
            .build()
            .map_err(|e| Error::validation("cli", format!("cannot start {w} workers: {e}")))?
            .install(run)?,
        None => run()?,
    }
    let root = out.root().to_path_buf();
    let (outputs, stages) = out.into_parts();
    let manifest = RunManifest {
        command: cmd.name().into(),
        preset: ctx.preset.clone(),
        code_version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.to_toml_string(),
        rng_seed: cfg.run.seed,
        workers: cfg.run.workers,
        started_unix_s,
        wall_clock_s: t0.elapsed().as_secs_f64(),
        stages,
        outputs,
    };
    let mut s = serde_json::to_string_pretty(&manifest).map_err(json_err)?;
    s.push('\n');
    fs::write(root.join("manifest.json"), s)?;
    Ok(manifest)
}

fn json_err(e: serde_json::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|c| c.to_string()).collect()
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Values along `axis` through the grid centre.
fn centre_cut(g: &GridSpec, field: &[f64], axis: usize) -> Vec<(f64, f64)> {
    let [_, ny, nz] = g.points;
    let mid = [g.points[0] / 2, ny / 2, nz / 2];
    (0..g.points[axis])
        .map(|i| {
            let mut ix = mid;
            ix[axis] = i;
            (g.coord(axis, i), field[(ix[0] * ny + ix[1]) * nz + ix[2]])
        })
        .collect()
}

#[derive(Serialize)]
struct GroundStateSummary {
    atom_count: u64,
    dims: usize,
    points: [usize; 3],
    half_extents_um: [f64; 3],
    spacing_um: [f64; 3],
    mu_hz: f64,
    thomas_fermi_mu_hz: f64,
    u0_hz_um: f64,
    u1_hz_um: f64,
    kappa_um2_hz: f64,
    peak_density: f64,
    healing_length_um: f64,
    norm: f64,
    residual: f64,
    iterations: usize,
}

fn solve_profile(cfg: &Config, out: &mut OutputDir) -> Result<CondensateProfile> {
    let settings = SpectrumSettings::from_config(cfg);
    let p = cfg.physical_params();
    out.stage("gpe", || gpe::solve_ground_state(&p, &settings.grid(&p)?, &settings.gpe))
}

fn ground_state(cfg: &Config, out: &mut OutputDir) -> Result<()> {
    let profile = solve_profile(cfg, out)?;
    let g = &profile.grid;
    let summary = GroundStateSummary {
        atom_count: profile.atom_count,
        dims: g.dims,
        points: g.points,
        half_extents_um: g.half_extents,
        spacing_um: g.spacing(),
        mu_hz: profile.mu,
        thomas_fermi_mu_hz: thomas_fermi_mu(&cfg.physical_params()),
        u0_hz_um: profile.u0,
        u1_hz_um: profile.u1,
        kappa_um2_hz: profile.kappa,
        peak_density: profile.peak_density(),
        healing_length_um: profile.healing_length(),
        norm: profile.norm(),
        residual: gpe::gp_residual(&profile),
        iterations: profile.iterations,
    };
    out.write_json("ground_state.json", &summary)?;
    let mut rows = Vec::new();
    for a in 0..g.dims {
        for (x, n) in centre_cut(g, &profile.n0, a) {
            rows.push(vec![a.to_string(), num(x), num(n)]);
        }
    }
    out.write_csv("density_cuts.csv", &header(&["axis", "coord_um", "n0"]), &rows)?;
    if let Some(path) = pipeline::write_density_if_requested(cfg, &profile, out.root())? {
        let name = path
            .strip_prefix(out.root())
            .unwrap_or(&path)
            .to_string_lossy()
            .into_owned();
        out.register(&name)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ModeRow {
    j: usize,
    energy_hz: f64,
    chi_jj: f64,
    coupling_hz: f64,
    resonance_q_hz: f64,
    eigen_residual: f64,
}

#[derive(Serialize)]
struct ModesReport {
    atom_count: u64,
    mu_hz: f64,
    u1_hz_um: f64,
    gpe_iterations: usize,
    gpe_residual: f64,
    modes: Vec<ModeRow>,
    validity: ValidityReport,
}

fn modes(cfg: &Config, out: &mut OutputDir) -> Result<()> {
    let settings = SpectrumSettings::from_config(cfg);
    let p = cfg.physical_params();
    let run = out.stage("spectrum", || pipeline::compute_spectrum(&p, &settings))?;
    let sys = &run.system;
    let rows: Vec<Vec<String>> = sys
        .tmodes
        .iter()
        .map(|m| vec![m.j.to_string(), num(m.energy), num(m.chi_jj)])
        .collect();
    out.write_csv("spectrum.csv", &header(&["j", "E_j", "chi_jj"]), &rows)?;
    let k = sys.chi.len();
    let mut rows = Vec::new();
    for i in 0..k {
        for j in 0..k {
            rows.push(vec![i.to_string(), j.to_string(), num(sys.chi.chi[i][j])]);
        }
    }
    out.write_csv("overlaps.csv", &header(&["i", "j", "chi_ij"]), &rows)?;

    let g = &run.profile.grid;
    let mut cols = vec!["axis".to_string(), "coord_um".to_string()];
    cols.extend((0..run.modes.len()).map(|j| format!("phi_{j}")));
    let mut rows = Vec::new();
    for a in 0..g.dims {
        let cuts: Vec<Vec<(f64, f64)>> = run.modes.iter().map(|m| centre_cut(g, &m.phi, a)).collect();
        for i in 0..g.points[a] {
            let mut r = vec![a.to_string(), num(g.coord(a, i))];
            r.extend(cuts.iter().map(|c| num(c[i].1)));
            rows.push(r);
        }
    }
    out.write_csv("mode_cuts.csv", &cols, &rows)?;

    let report = ModesReport {
        atom_count: sys.atom_count,
        mu_hz: sys.mu,
        u1_hz_um: sys.u1,
        gpe_iterations: sys.gpe_iterations,
        gpe_residual: sys.gpe_residual,
        modes: sys
            .tmodes
            .iter()
            .zip(&run.modes)
            .map(|(m, e)| ModeRow {
                j: m.j,
                energy_hz: m.energy,
                chi_jj: m.chi_jj,
                coupling_hz: m.coupling(),
                resonance_q_hz: m.resonance_q(),
                eigen_residual: e.residual,
            })
            .collect(),
        validity: sys.validity.clone(),
    };
    out.write_json("validity.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct QuenchReport {
    k_per_um: f64,
    eps_k_hz: f64,
    n_u1_hz: f64,
    q_initial_hz: f64,
    q_final_hz: f64,
    xi_initial_hz: f64,
    xi_final_hz: f64,
    samples: usize,
    max_casimir_error: f64,
    /// max |n_ode − n_oracle| / max(n_oracle, depletion floor)
    oracle_max_rel_error: Option<f64>,
    oracle_error: Option<String>,
    eq3_max_abs_error: Option<f64>,
    oracle_vs_eq3_max_abs: Option<f64>,
    /// RMS distance of the oracle from the halved and unhalved large-q_i forms.
    oracle_rms_to_large_qi_halved: Option<f64>,
    oracle_rms_to_large_qi_unhalved: Option<f64>,
    large_qi_form_selected: Option<String>,
}

fn quench(cfg: &Config, out: &mut OutputDir) -> Result<()> {
    let h = &cfg.homogeneous;
    let m = HomogeneousMode::new(h.k, h.density, &cfg.physical_params());
    let sched = cfg.schedule.to_schedule()?;
    if h.samples < 2 {
        return Err(Error::validation("homogeneous", "homogeneous.samples must be >= 2"));
    }
    let samples = scan::linspace(0.0, sched.duration, h.samples);
    let states = out.stage("ode", || homogeneous::integrate_modulation(&m, &sched, &samples, h.tol))?;
    let traj = homogeneous::trajectory_rows(&m, &sched, &states)?;
    let rows: Vec<Vec<String>> = traj
        .iter()
        .map(|r| vec![num(r.t_s), num(r.p), num(r.s), num(r.a), num(r.n_plus), num(r.n_minus)])
        .collect();
    out.write_csv("quench.csv", &header(&["t_s", "P", "S", "A", "n_plus", "n_minus"]), &rows)?;

    let oracle = out.stage("oracle", || Ok(fock::fock_oracle(&m.pair(), &sched, &samples, h.cutoff, h.tol)))?;
    let (oracle_n, oracle_error) = match oracle {
        Ok(v) => (Some(v.iter().map(|s| s.n).collect::<Vec<f64>>()), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let (q_i, q_f, sudden) = match sched.kind {
        ScheduleKind::Quench {
            q_initial,
            q_final,
            ramp_time,
        } => (q_initial, q_final, ramp_time == 0.0),
        _ => (sched.q_eval(0.0)?, sched.q_eval(sched.duration)?, false),
    };
    let eq3: Option<Vec<f64>> = if sudden {
        Some(
            samples
                .iter()
                .map(|&t| homogeneous::quench_population(&m, q_i, q_f, t))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let large = |f: fn(&HomogeneousMode, f64, f64) -> Result<f64>| -> Option<Vec<f64>> {
        if !sudden {
            return None;
        }
        samples.iter().map(|&t| f(&m, q_f, t)).collect::<Result<_>>().ok()
    };
    let halved = large(homogeneous::quench_population_large_qi);
    let unhalved = large(homogeneous::quench_population_large_qi_unhalved);

    let pick = |v: &Option<Vec<f64>>, i: usize| v.as_ref().map(|v| v[i]);
    let rows: Vec<Vec<String>> = traj
        .iter()
        .enumerate()
        .map(|(i, r)| {
            vec![
                num(r.t_s),
                num(r.n_plus),
                opt_num(pick(&oracle_n, i)),
                opt_num(pick(&eq3, i)),
                opt_num(pick(&halved, i)),
                opt_num(pick(&unhalved, i)),
            ]
        })
        .collect();
    out.write_csv(
        "quench_checks.csv",
        &header(&["t_s", "n_ode", "n_oracle", "n_eq3", "n_large_qi", "n_large_qi_unhalved"]),
        &rows,
    )?;

    let n_ode: Vec<f64> = traj.iter().map(|r| r.n_plus).collect();
    let max_abs = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let rms = |a: &[f64], b: &[f64]| (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt();
    let oracle_max_rel_error = oracle_n.as_ref().map(|o| {
        let floor = o.iter().fold(0.0, |m: f64, v| m.max(*v)) * 1e-3;
        n_ode
            .iter()
            .zip(o)
            .map(|(x, y)| (x - y).abs() / y.max(floor).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    });
    let rms_h = oracle_n.as_ref().zip(halved.as_ref()).map(|(o, v)| rms(o, v));
    let rms_u = oracle_n.as_ref().zip(unhalved.as_ref()).map(|(o, v)| rms(o, v));
    let xi = |q: f64| m.dispersion(q).xi.re;
    let report = QuenchReport {
        k_per_um: m.k,
        eps_k_hz: m.eps_k,
        n_u1_hz: m.n_u1,
        q_initial_hz: q_i,
        q_final_hz: q_f,
        xi_initial_hz: xi(q_i),
        xi_final_hz: xi(q_f),
        samples: samples.len(),
        max_casimir_error: states.iter().map(|s| s.casimir_error()).fold(0.0, f64::max),
        oracle_max_rel_error,
        oracle_error,
        eq3_max_abs_error: eq3.as_ref().map(|e| max_abs(&n_ode, e)),
        oracle_vs_eq3_max_abs: oracle_n.as_ref().zip(eq3.as_ref()).map(|(o, e)| max_abs(o, e)),
        oracle_rms_to_large_qi_halved: rms_h,
        oracle_rms_to_large_qi_unhalved: rms_u,
        large_qi_form_selected: rms_h
            .zip(rms_u)
            .map(|(a, b)| if a <= b { "halved" } else { "unhalved" }.to_string()),
    };
    out.write_json("report.json", &report)?;
    Ok(())
}

#[derive(Serialize)]
struct SystemSummary {
    atom_count: u64,
    mu_hz: f64,
    q0_hz: f64,
    energies_hz: Vec<f64>,
    couplings_hz: Vec<f64>,
    validity: ValidityReport,
}

impl From<&TrappedSystem> for SystemSummary {
    fn from(s: &TrappedSystem) -> Self {
        Self {
            atom_count: s.atom_count,
            mu_hz: s.mu,
            q0_hz: s.q0(),
            energies_hz: s.energies.clone(),
            couplings_hz: s.tmodes.iter().map(|m| m.coupling()).collect(),
            validity: s.validity.clone(),
        }
    }
}

#[derive(Serialize)]
struct PeakReport {
    atom_count: u64,
    mode: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_peak_hz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    q_peak_hz: Option<f64>,
    height: f64,
    fwhm_hz: Option<f64>,
    contrast: f64,
    detected: bool,
    /// 2(q̄ − q_j) for frequency scans, q_j for static scans
    predicted_hz: Option<f64>,
    /// Ω/2π inferred from the peak height, frequency scans only
    creation_rate_hz: Option<f64>,
}

#[derive(Serialize)]
struct ScanReport {
    axis: String,
    /// Added to configured q values to get absolute q.
    q_offset_hz: f64,
    duration_s: f64,
    systems: Vec<SystemSummary>,
    seeds: Vec<SeedCalibration>,
    points: usize,
    errors: usize,
    nonlinear: usize,
    max_casimir_error: f64,
    peaks: Vec<PeakReport>,
}

/// Checkpoint lines: a header with the config digest, then one ScanPoint
/// per line in completion order.
struct Checkpoint {
    file: Mutex<fs::File>,
}

fn open_checkpoint(path: &std::path::Path, digest: &str) -> Result<(Checkpoint, Vec<ScanPoint>)> {
    let mut done = Vec::new();
    let mut resume = false;
    let mut torn = false;
    if let Ok(text) = fs::read_to_string(path) {
        let mut lines = text.lines();
        if lines.next() == Some(digest) {
            resume = true;
            // an interrupted write leaves a partial last line; it fails to parse
            done.extend(lines.filter_map(|l| serde_json::from_str::<ScanPoint>(l).ok()));
            torn = !text.ends_with('\n');
        }
    }
    let file = if resume {
        let mut f = OpenOptions::new().append(true).open(path)?;
        if torn {
            writeln!(f)?;
        }
        f
    } else {
        let mut f = fs::File::create(path)?;
        writeln!(f, "{digest}")?;
        f
    };
    Ok((Checkpoint { file: Mutex::new(file) }, done))
}

impl Checkpoint {
    fn push(&self, p: &ScanPoint) {
        if let Ok(line) = serde_json::to_string(p) {
            let mut f = self.file.lock().unwrap_or_else(|e| e.into_inner());
            let _ = writeln!(f, "{line}");
        }
    }
}

fn scan_cmd(cfg: &Config, out: &mut OutputDir) -> Result<()> {
    let settings = SpectrumSettings::from_config(cfg);
    let base = cfg.physical_params();
    let counts = if cfg.scan.atom_counts.is_empty() {
        vec![cfg.atom.atom_count]
    } else {
        cfg.scan.atom_counts.clone()
    };
    let systems: Vec<TrappedSystem> = out.stage("spectrum", || {
        counts
            .iter()
            .map(|&n| pipeline::build_trapped_system(&base.clone().with_atom_count(n), &settings))
            .collect()
    })?;
    let offset = out.stage("reference", || pipeline::q_offset(cfg, &settings, &systems))?;
    let template = cfg.schedule.to_schedule()?.shifted(offset);
    let static_axis = cfg.scan.axis == "static";

    let mut seeds = Vec::new();
    let mut all: Vec<(u64, Vec<ScanPoint>)> = Vec::new();
    if static_axis {
        let qs: Vec<f64> = scan::linspace(cfg.scan.q_min, cfg.scan.q_max, cfg.scan.steps)
            .into_iter()
            .map(|q| q + offset)
            .collect();
        out.stage("scan", || {
            for sys in &systems {
                let mut pts = scan::static_scan(&sys.tmodes, &qs, template.duration, sys.atom_count);
                for p in &mut pts {
                    p.x -= offset;
                }
                all.push((sys.atom_count, pts));
            }
            Ok(())
        })?;
    } else {
        let freqs = scan::linspace(cfg.scan.f_min, cfg.scan.f_max, cfg.scan.steps);
        let digest = sha256_hex(cfg.to_toml_string().as_bytes());
        let (ckpt, done) = match &cfg.scan.checkpoint {
            Some(name) => {
                let (c, d) = open_checkpoint(&out.path(name), &digest)?;
                (Some(c), d)
            }
            None => (None, Vec::new()),
        };
        out.stage("scan", || {
            for sys in &systems {
                let mut init = Vec::new();
                if cfg.seed.fraction > 0.0 {
                    let c = trapped::calibrate_seed(
                        &sys.tmodes,
                        cfg.seed.mode,
                        cfg.seed.fraction,
                        cfg.seed.duration,
                        cfg.seed.q.map(|q| q + offset),
                        sys.atom_count as f64,
                    )?;
                    init = vec![0.0; sys.tmodes.len()];
                    init[c.mode] = c.occupation;
                    seeds.push(c);
                }
                let sink = |p: &ScanPoint| {
                    if let Some(c) = &ckpt {
                        c.push(p);
                    }
                };
                let pts = scan::frequency_scan(
                    &sys.tmodes,
                    &template,
                    &freqs,
                    &init,
                    sys.atom_count,
                    cfg.scan.tol,
                    cfg.run.workers,
                    &done,
                    &sink,
                )?;
                all.push((sys.atom_count, pts));
            }
            Ok(())
        })?;
        if let Some(name) = &cfg.scan.checkpoint {
            out.register(name)?;
        }
    }

    let k = systems.iter().map(|s| s.tmodes.len()).max().unwrap_or(0);
    let mut cols = vec![if static_axis { "q_hz" } else { "f_hz" }.to_string(), "N".into(), "fraction".into()];
    cols.extend((0..k).map(|j| format!("n_mode{j}")));
    cols.push("flags".into());
    let mut rows = Vec::new();
    for (_, pts) in &all {
        for p in pts {
            let mut r = vec![num(p.x), p.atom_count.to_string(), num(p.fraction)];
            r.extend((0..k).map(|j| p.populations.get(j).map(|v| num(*v)).unwrap_or_default()));
            r.push(p.flags());
            rows.push(r);
        }
    }
    out.write_csv("scan.csv", &cols, &rows)?;

    let q_mean = template.mean();
    let mut peaks = Vec::new();
    for ((n, pts), sys) in all.iter().zip(&systems) {
        for pk in scan::detect_peaks(pts) {
            peaks.push(peak_report(*n, &pk, sys, static_axis, q_mean, offset, template.duration));
        }
    }
    let finite_max = |it: &mut dyn Iterator<Item = f64>| it.filter(|v| v.is_finite()).fold(0.0, f64::max);
    let report = ScanReport {
        axis: cfg.scan.axis.clone(),
        q_offset_hz: offset,
        duration_s: template.duration,
        systems: systems.iter().map(SystemSummary::from).collect(),
        seeds,
        points: rows.len(),
        errors: all.iter().flat_map(|(_, p)| p).filter(|p| p.error.is_some()).count(),
        nonlinear: all.iter().flat_map(|(_, p)| p).filter(|p| p.error.is_none() && !p.valid).count(),
        max_casimir_error: finite_max(&mut all.iter().flat_map(|(_, p)| p).map(|p| p.max_casimir_error)),
        peaks,
    };
    out.write_json("peaks.json", &report)?;

    if cfg.scan.svg {
        let mut series: Vec<Series> = all
            .iter()
            .map(|(n, pts)| Series {
                label: format!("N = {n}"),
                points: pts.iter().map(|p| (p.x, p.fraction)).collect(),
            })
            .collect();
        if all.len() == 1 {
            for j in 0..k {
                series.push(Series {
                    label: format!("mode {j}"),
                    points: all[0].1.iter().map(|p| (p.x, 2.0 * p.populations[j] / p.atom_count as f64)).collect(),
                });
            }
        }
        let plot = Plot {
            title: if static_axis { "static q scan" } else { "modulation frequency scan" }.into(),
            x_label: if static_axis { "q (Hz)" } else { "f (Hz)" }.into(),
            y_label: "transferred fraction".into(),
            log_y: true,
            series,
            hlines: vec![trapped::FRACTION_VALIDITY_BOUND],
        };
        out.write_bytes("scan.svg", plot.render().as_bytes())?;
    }
    Ok(())
}

fn peak_report(
    atom_count: u64,
    pk: &Peak,
    sys: &TrappedSystem,
    static_axis: bool,
    q_mean: f64,
    offset: f64,
    duration: f64,
) -> PeakReport {
    let tm = pk.mode.and_then(|j| sys.tmodes.get(j));
    let predicted_hz = tm.map(|m| {
        if static_axis {
            m.resonance_q() - offset
        } else {
            2.0 * (q_mean - m.resonance_q())
        }
    });
    PeakReport {
        atom_count,
        mode: pk.mode,
        f_peak_hz: (!static_axis).then_some(pk.f_peak_hz),
        q_peak_hz: static_axis.then_some(pk.f_peak_hz),
        height: pk.height,
        fwhm_hz: pk.fwhm_hz,
        contrast: pk.contrast,
        detected: pk.detected(),
        predicted_hz,
        creation_rate_hz: (!static_axis && pk.mode.is_some()).then(|| scan::creation_rate(pk.height, duration)),
    }
}

#[allow(non_snake_case)]
#[derive(Serialize)]
struct EntangleSummary {
    source: String,
    mode: Option<usize>,
    drive_frequency_hz: Option<f64>,
    duration_s: Option<f64>,
    n: f64,
    c_re: f64,
    c_im: f64,
    purity_gap: f64,
    single_mode_variance: f64,
    min_I: f64,
    argmin_theta: f64,
    entangled: bool,
    shots: usize,
    mc_I_at_argmin: f64,
    mc_se_I_at_argmin: f64,
    sigma_violation: f64,
    mc_min_I_on_grid: f64,
    mc_argmin_theta_on_grid: f64,
    lo_fraction: f64,
    detection_noise: f64,
    rng_seed: u64,
}

struct DrivenMoments {
    moments: TwoModeMoments,
    mode: usize,
    frequency: f64,
    duration: f64,
}

fn driven_moments(cfg: &Config, out: &mut OutputDir) -> Result<DrivenMoments> {
    let settings = SpectrumSettings::from_config(cfg);
    let sys = out.stage("spectrum", || pipeline::build_trapped_system(&cfg.physical_params(), &settings))?;
    let offset = pipeline::q_offset(cfg, &settings, std::slice::from_ref(&sys))?;
    let mode = cfg.entangle.mode;
    let tm = *sys.tmodes.get(mode).ok_or_else(|| {
        Error::validation("entanglement", format!("mode {mode} is not among the {} modes", sys.tmodes.len()))
    })?;
    let mut sched = cfg.schedule.to_schedule()?.shifted(offset);
    if cfg.entangle.auto_frequency {
        let xi = tm.xi(sched.mean());
        if !(xi.re > 0.0) {
            return Err(Error::domain("entanglement", "auto_frequency needs a stable mode at the schedule mean"));
        }
        sched = sched.with_frequency(2.0 * xi.re);
    }
    let frequency = match sched.kind {
        ScheduleKind::Sinusoid { frequency, .. } | ScheduleKind::ClippedSinusoid { frequency, .. } => frequency,
        _ => 0.0,
    };
    let t_end = sched.duration;
    let states = out.stage("dynamics", || {
        trapped::integrate_trapped(std::slice::from_ref(&tm), &sched, &[], &[t_end], cfg.scan.tol)
    })?;
    let moments = entanglement::moments_from_state(&states[0].modes[0], &tm.pair(), sched.q_eval(t_end)?)?;
    Ok(DrivenMoments {
        moments,
        mode,
        frequency,
        duration: t_end,
    })
}

fn entangle(cfg: &Config, out: &mut OutputDir) -> Result<()> {
    let e = &cfg.entangle;
    let (moments, source, driven) = match e.tmsv_r {
        Some(r) => (TwoModeMoments::tmsv(r), format!("tmsv r = {r}"), None),
        None => {
            let d = driven_moments(cfg, out)?;
            (d.moments, "dynamics".to_string(), Some(d))
        }
    };
    moments.check()?;
    let thetas = entanglement::theta_grid(e.theta_steps);
    let curve = entanglement::variance_curves(&moments, &thetas);
    let rows: Vec<Vec<String>> = (0..thetas.len())
        .map(|i| {
            vec![
                num(curve.theta[i]),
                num(curve.v_plus[i]),
                num(curve.v_minus[i]),
                num(curve.v_d[i]),
                num(curve.v_s[i]),
                num(curve.witness[i]),
            ]
        })
        .collect();
    out.write_csv("entangle.csv", &header(&["theta_rad", "V_plus", "V_minus", "V_d", "V_s", "I"]), &rows)?;
    if let Some(rate) = e.theta_rate {
        let rows: Vec<Vec<String>> = thetas
            .iter()
            .map(|&t| vec![num(t), num((t - e.theta_offset) / rate)])
            .collect();
        out.write_csv("hold_times.csv", &header(&["theta_rad", "hold_s"]), &rows)?;
    }

    let opts = HomodyneOptions {
        shots: e.shots,
        lo_fraction: e.lo_fraction,
        detection_noise: e.detection_noise,
        seed: cfg.run.seed,
        batches: e.batches,
    };
    let mc = out.stage("homodyne", || entanglement::homodyne_scan(&moments, &thetas, &opts))?;
    let rows: Vec<Vec<String>> = mc
        .iter()
        .map(|h| {
            vec![
                num(h.theta),
                num(h.v_plus),
                num(h.v_minus),
                num(h.v_d),
                num(h.v_s),
                num(h.witness),
                num(h.se_v_d),
                num(h.se_v_s),
                num(h.se_witness),
            ]
        })
        .collect();
    out.write_csv(
        "entangle_mc.csv",
        &header(&["theta_rad", "V_plus", "V_minus", "V_d", "V_s", "I", "se_V_d", "se_V_s", "se_I"]),
        &rows,
    )?;
    let argmin = moments.argmin_witness();
    // separate random stream from the grid angles
    let at_min = entanglement::homodyne_monte_carlo(&moments, argmin, thetas.len(), &opts)?;
    let best = mc
        .iter()
        .min_by(|a, b| a.witness.total_cmp(&b.witness))
        .ok_or_else(|| Error::validation("entanglement", "empty θ grid"))?;
    let summary = EntangleSummary {
        source,
        mode: driven.as_ref().map(|d| d.mode),
        drive_frequency_hz: driven.as_ref().map(|d| d.frequency),
        duration_s: driven.as_ref().map(|d| d.duration),
        n: moments.n,
        c_re: moments.c.re,
        c_im: moments.c.im,
        purity_gap: moments.purity_gap(),
        single_mode_variance: moments.v_single(),
        min_I: moments.min_witness(),
        argmin_theta: argmin,
        entangled: moments.min_witness() < 2.0,
        shots: e.shots,
        mc_I_at_argmin: at_min.witness,
        mc_se_I_at_argmin: at_min.se_witness,
        sigma_violation: at_min.sigma_violation,
        mc_min_I_on_grid: best.witness,
        mc_argmin_theta_on_grid: best.theta,
        lo_fraction: e.lo_fraction,
        detection_noise: e.detection_noise,
        rng_seed: cfg.run.seed,
    };
    out.write_json("summary.json", &summary)?;

    let to_pi = |v: &[f64]| -> Vec<(f64, f64)> {
        thetas.iter().zip(v).map(|(t, y)| (t / std::f64::consts::PI, *y)).collect()
    };
    let plot = Plot {
        title: "quadrature variances".into(),
        x_label: "θ/π".into(),
        y_label: "variance".into(),
        log_y: false,
        series: vec![
            Series { label: "V_d".into(), points: to_pi(&curve.v_d) },
            Series { label: "V_s".into(), points: to_pi(&curve.v_s) },
            Series { label: "I".into(), points: to_pi(&curve.witness) },
            Series {
                label: "I (MC)".into(),
                points: mc.iter().map(|h| (h.theta / std::f64::consts::PI, h.witness)).collect(),
            },
        ],
        hlines: vec![2.0],
    };
    out.write_bytes("entangle.svg", plot.render().as_bytes())?;
    Ok(())
}
