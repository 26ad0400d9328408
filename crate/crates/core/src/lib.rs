//! Parametric spin-pair creation in a spinor condensate driven by a modulated
//! quadratic Zeeman energy.
//!
//! Pipeline: scalar ground state ([`gpe`]) → effective-potential modes
//! ([`modes`]) → per-mode pair dynamics ([`trapped`], [`homogeneous`]) →
//! two-mode moments and entanglement witnesses ([`entanglement`]).

pub mod config;
pub mod entanglement;
pub mod error;
pub mod fft;
pub mod fock;
pub mod gpe;
pub mod homogeneous;
pub mod grid;
pub mod lanczos;
pub mod modes;
pub mod ode;
pub mod pair;
pub mod params;
pub mod pipeline;
pub mod scan;
pub mod schedule;
pub mod trapped;
pub mod units;

pub use error::{Error, Result};
pub use params::{derive_couplings, Couplings, PhysicalParams};
pub use schedule::{QzeSchedule, ScheduleKind};
