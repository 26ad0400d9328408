//! TOML run configuration.
//!
//! Every section rejects unknown keys. Missing sections and keys fall back to
//! the ⁸⁷Rb defaults of [`PhysicalParams::rubidium_default`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{PhysicalParams, RB87_A0_BOHR, RB87_A2_BOHR};
use crate::schedule::{QzeSchedule, ScheduleKind};
use crate::units::{ATOMIC_MASS_UNIT, BOHR_RADIUS, RB87_MASS};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub atom: AtomSection,
    pub trap: TrapSection,
    pub zeeman: ZeemanSection,
    pub schedule: ScheduleSection,
    pub grid: GridSection,
    pub gpe: GpeSection,
    pub modes: ModesSection,
    pub scan: ScanSection,
    pub seed: SeedSection,
    pub entangle: EntangleSection,
    pub homogeneous: HomogeneousSection,
    pub run: RunSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AtomSection {
    pub mass_amu: f64,
    pub a0_bohr: f64,
    pub a2_bohr: f64,
    pub atom_count: u64,
}

impl Default for AtomSection {
    fn default() -> Self {
        Self {
            mass_amu: RB87_MASS / ATOMIC_MASS_UNIT,
            a0_bohr: RB87_A0_BOHR,
            a2_bohr: RB87_A2_BOHR,
            atom_count: 22_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrapSection {
    pub freqs_hz: [f64; 3],
}

impl Default for TrapSection {
    fn default() -> Self {
        Self {
            freqs_hz: [150.0, 160.0, 220.0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QReference {
    /// q values are offsets from the ground-mode resonance q0 = −E0.
    Relative,
    /// q values are the absolute q/h entering the mode energies.
    Absolute,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ZeemanSection {
    pub reference: QReference,
    pub q_static: f64,
    /// Atom number whose q0 anchors relative values. Defaults to
    /// `atom.atom_count`; fixing it keeps the absolute q unchanged when the
    /// atom number is scanned.
    pub reference_atom_count: Option<u64>,
}

impl Default for ZeemanSection {
    fn default() -> Self {
        Self {
            reference: QReference::Relative,
            q_static: 71.0,
            reference_atom_count: None,
        }
    }
}

/// Flat `[schedule]` table; `kind` selects which of the other keys are read.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub kind: String,
    pub duration: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_initial: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_final: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ramp_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phase: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
}

impl Default for ScheduleSection {
    fn default() -> Self {
        Self {
            kind: "sinusoid".into(),
            duration: 0.7,
            q_initial: None,
            q_final: None,
            ramp_time: None,
            mean: Some(71.0),
            amplitude: Some(48.0),
            frequency: Some(145.0),
            phase: None,
            min: None,
            max: None,
            center: None,
        }
    }
}

impl ScheduleSection {
    pub fn to_schedule(&self) -> Result<QzeSchedule> {
        let need = |name: &str, v: Option<f64>| {
            v.ok_or_else(|| {
                Error::config(
                    "config",
                    format!("schedule kind '{}' requires key '{name}'", self.kind),
                )
            })
        };
        let unused = |names: &[(&str, Option<f64>)]| -> Result<()> {
            for (n, v) in names {
                if v.is_some() {
                    return Err(Error::config(
                        "config",
                        format!("key '{n}' is not used by schedule kind '{}'", self.kind),
                    ));
                }
            }
            Ok(())
        };
        let kind = match self.kind.as_str() {
            "static" => {
                unused(&[
                    ("q_final", self.q_final),
                    ("ramp_time", self.ramp_time),
                    ("mean", self.mean),
                    ("amplitude", self.amplitude),
                    ("frequency", self.frequency),
                    ("phase", self.phase),
                    ("min", self.min),
                    ("max", self.max),
                    ("center", self.center),
                ])?;
                ScheduleKind::Static {
                    q_initial: need("q_initial", self.q_initial)?,
                }
            }
            "quench" => {
                unused(&[
                    ("mean", self.mean),
                    ("amplitude", self.amplitude),
                    ("frequency", self.frequency),
                    ("phase", self.phase),
                    ("min", self.min),
                    ("max", self.max),
                    ("center", self.center),
                ])?;
                ScheduleKind::Quench {
                    q_initial: need("q_initial", self.q_initial)?,
                    q_final: need("q_final", self.q_final)?,
                    ramp_time: self.ramp_time.unwrap_or(0.0),
                }
            }
            "sinusoid" => {
                unused(&[
                    ("q_initial", self.q_initial),
                    ("q_final", self.q_final),
                    ("ramp_time", self.ramp_time),
                    ("min", self.min),
                    ("max", self.max),
                    ("center", self.center),
                ])?;
                ScheduleKind::Sinusoid {
                    mean: need("mean", self.mean)?,
                    amplitude: need("amplitude", self.amplitude)?,
                    frequency: need("frequency", self.frequency)?,
                    phase: self.phase.unwrap_or(0.0),
                }
            }
            "clipped_sinusoid" => {
                unused(&[
                    ("q_initial", self.q_initial),
                    ("q_final", self.q_final),
                    ("ramp_time", self.ramp_time),
                    ("mean", self.mean),
                    ("amplitude", self.amplitude),
                ])?;
                ScheduleKind::ClippedSinusoid {
                    min: need("min", self.min)?,
                    max: need("max", self.max)?,
                    center: need("center", self.center)?,
                    frequency: need("frequency", self.frequency)?,
                    phase: self.phase.unwrap_or(0.0),
                }
            }
            other => {
                return Err(Error::config(
                    "config",
                    format!(
                        "unknown schedule kind '{other}' (expected static, quench, sinusoid, clipped_sinusoid)"
                    ),
                ))
            }
        };
        let s = QzeSchedule {
            kind,
            duration: self.duration,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub dims: usize,
    /// Points per axis; the first `dims` entries are used.
    pub points: Vec<usize>,
    /// Half-extent per axis in Thomas–Fermi radii. Ignored when
    /// `half_extent_um` is set.
    pub extent_tf: f64,
    pub half_extent_um: Option<Vec<f64>>,
    /// For dims = 1: which trap axis (0, 1, 2) is kept.
    pub axis: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            dims: 3,
            points: vec![64, 64, 48],
            extent_tf: 1.8,
            half_extent_um: None,
            axis: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpeSection {
    pub max_iterations: usize,
    /// Relative energy change per step at which imaginary-time propagation stops.
    pub energy_tol: f64,
    /// Target relative residual ‖(H − μ)ψ‖/‖μψ‖.
    pub residual_tol: f64,
    /// Writes the density to this path when set.
    pub dump_density: Option<String>,
    /// Skip the healing-length resolution check.
    pub allow_coarse: bool,
}

impl Default for GpeSection {
    fn default() -> Self {
        Self {
            max_iterations: 20_000,
            energy_tol: 1e-10,
            residual_tol: 1e-8,
            dump_density: None,
            allow_coarse: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModesSection {
    pub count: usize,
    pub tol: f64,
}

impl Default for ModesSection {
    fn default() -> Self {
        Self { count: 6, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    /// "frequency" scans the modulation frequency, "static" scans q.
    pub axis: String,
    pub f_min: f64,
    pub f_max: f64,
    pub steps: usize,
    pub q_min: f64,
    pub q_max: f64,
    /// Atom numbers to rerun the GPE/mode pipeline for; empty means just
    /// `atom.atom_count`.
    pub atom_counts: Vec<u64>,
    pub tol: f64,
    pub svg: bool,
    /// Checkpoint file for resuming interrupted scans, relative to --out.
    pub checkpoint: Option<String>,
}

impl Default for ScanSection {
    fn default() -> Self {
        Self {
            axis: "frequency".into(),
            f_min: 130.0,
            f_max: 200.0,
            steps: 281,
            q_min: -40.0,
            q_max: 10.0,
            atom_counts: Vec::new(),
            tol: 1e-11,
            svg: true,
            checkpoint: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SeedSection {
    /// Target transferred fraction after the seeding phase; 0 disables it.
    pub fraction: f64,
    pub duration: f64,
    pub mode: usize,
    /// q during seeding, in the `zeeman.reference` frame. Defaults to the
    /// resonance centre of `mode`.
    pub q: Option<f64>,
}

impl Default for SeedSection {
    fn default() -> Self {
        Self {
            fraction: 0.0,
            duration: 0.15,
            mode: 1,
            q: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EntangleSection {
    pub shots: usize,
    pub theta_steps: usize,
    pub lo_fraction: f64,
    pub detection_noise: f64,
    /// When set, use a two-mode squeezed vacuum with this squeezing parameter
    /// instead of running the dynamics.
    pub tmsv_r: Option<f64>,
    pub mode: usize,
    pub batches: usize,
    /// Replace the schedule frequency by 2ξ of `mode` at the schedule mean.
    pub auto_frequency: bool,
    /// Hold-time calibration θ = theta_offset + theta_rate · t_hold. Without a
    /// rate the outputs are indexed by θ only.
    pub theta_offset: f64,
    /// rad/s
    pub theta_rate: Option<f64>,
}

impl Default for EntangleSection {
    fn default() -> Self {
        Self {
            shots: 100_000,
            theta_steps: 181,
            lo_fraction: 0.15,
            detection_noise: 0.0,
            tmsv_r: None,
            mode: 0,
            batches: 64,
            auto_frequency: false,
            theta_offset: 0.0,
            theta_rate: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HomogeneousSection {
    /// 1/μm
    pub k: f64,
    /// Density in μm⁻³.
    pub density: f64,
    pub samples: usize,
    pub cutoff: usize,
    pub tol: f64,
}

impl Default for HomogeneousSection {
    fn default() -> Self {
        Self {
            k: 0.0,
            density: 100.0,
            samples: 401,
            cutoff: 60,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub workers: Option<usize>,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 20_240_601,
            workers: None,
        }
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let v: toml::Table = s
            .parse()
            .map_err(|e: toml::de::Error| Error::config("config", e.to_string()))?;
        Self::from_table(v)
    }

    pub fn from_table(t: toml::Table) -> Result<Self> {
        let c: Config = toml::Value::Table(t)
            .try_into()
            .map_err(|e: toml::de::Error| Error::config("config", e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    /// Layers a user table over the defaults and then applies `key=value`
    /// overrides. Sections are merged key by key, except `[schedule]`, which
    /// replaces the default schedule wholesale when present.
    pub fn load(user: Option<toml::Table>, overrides: &[String]) -> Result<Self> {
        Self::load_layers(user.into_iter().collect(), overrides)
    }

    /// Like [`Config::load`] with several tables applied in order.
    pub fn load_layers(layers: Vec<toml::Table>, overrides: &[String]) -> Result<Self> {
        let mut base: toml::Table = Config::default()
            .to_toml_string()
            .parse()
            .expect("default config parses");
        for user in layers {
            for (section, value) in user {
                match (base.get_mut(&section), value) {
                    (Some(toml::Value::Table(b)), toml::Value::Table(u)) if section != "schedule" => {
                        b.extend(u);
                    }
                    (_, v) => {
                        base.insert(section, v);
                    }
                }
            }
        }
        for o in overrides {
            apply_override(&mut base, o)?;
        }
        Self::from_table(base)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serializes")
    }

    pub fn physical_params(&self) -> PhysicalParams {
        PhysicalParams {
            atom_mass: self.atom.mass_amu * ATOMIC_MASS_UNIT,
            scattering_length_f0: self.atom.a0_bohr * BOHR_RADIUS,
            scattering_length_f2: self.atom.a2_bohr * BOHR_RADIUS,
            atom_count: self.atom.atom_count,
            trap_freqs: self.trap.freqs_hz,
            qze_static: self.zeeman.q_static,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.physical_params().validate()?;
        self.schedule.to_schedule()?;
        let bad = |msg: String| Err(Error::validation("config", msg));
        if !(self.grid.dims == 1 || self.grid.dims == 3) {
            return bad(format!("grid.dims must be 1 or 3, got {}", self.grid.dims));
        }
        if self.grid.points.len() < self.grid.dims {
            return bad(format!(
                "grid.points needs {} entries, got {}",
                self.grid.dims,
                self.grid.points.len()
            ));
        }
        if self.grid.points[..self.grid.dims]
            .iter()
            .any(|&n| n < 4 || n % 2 != 0)
        {
            return bad("grid.points must be even and >= 4".into());
        }
        if self.grid.axis > 2 {
            return bad("grid.axis must be 0, 1 or 2".into());
        }
        if !(1..=20).contains(&self.modes.count) {
            return bad(format!("modes.count must be in 1..=20, got {}", self.modes.count));
        }
        if self.scan.steps < 1 {
            return bad("scan.steps must be >= 1".into());
        }
        if !(self.scan.f_min <= self.scan.f_max) || !(self.scan.q_min <= self.scan.q_max) {
            return bad("scan range must satisfy min <= max".into());
        }
        if !matches!(self.scan.axis.as_str(), "frequency" | "static") {
            return bad(format!("scan.axis must be 'frequency' or 'static', got '{}'", self.scan.axis));
        }
        if !(0.0..0.5).contains(&self.seed.fraction) {
            return bad("seed.fraction must be in [0, 0.5)".into());
        }
        if self.entangle.shots < 2 {
            return bad("entangle.shots must be >= 2".into());
        }
        if let Some(r) = self.entangle.theta_rate {
            if !(r.is_finite() && r != 0.0) {
                return bad(format!("entangle.theta_rate must be finite and non-zero, got {r}"));
            }
        }
        if !self.entangle.theta_offset.is_finite() {
            return bad("entangle.theta_offset must be finite".into());
        }
        if !(self.entangle.lo_fraction > 0.0 && self.entangle.lo_fraction < 1.0) {
            return bad("entangle.lo_fraction must be in (0, 1)".into());
        }
        if self.entangle.detection_noise < 0.0 {
            return bad("entangle.detection_noise must be >= 0".into());
        }
        if self.entangle.batches < 1 || self.entangle.theta_steps < 1 {
            return bad("entangle.batches and entangle.theta_steps must be >= 1".into());
        }
        Ok(())
    }
}

/// Applies a `section.key=value` override to a parsed TOML table. The value is
/// parsed as a TOML value, falling back to a bare string.
pub fn apply_override(table: &mut toml::Table, spec: &str) -> Result<()> {
    let (path, raw) = spec.split_once('=').ok_or_else(|| {
        Error::config("config", format!("override '{spec}' is not of the form key=value"))
    })?;
    let path = path.trim();
    let raw = raw.trim();
    let value = parse_value(raw);
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config("config", format!("bad override key '{path}'")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry.as_table_mut().ok_or_else(|| {
            Error::config("config", format!("override path '{path}': '{p}' is not a table"))
        })?;
    }
    cur.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}
