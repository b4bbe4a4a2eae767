//! Compiler and simulator for networks of well-formed hybrid automata.
//!
//! The pipeline is: [`model::parse_model`] → [`whacheck::check_wha`] →
//! [`shagen::generate_sha`] → [`swa::build_swa`] / [`swa::compose`] →
//! [`swa::Simulator`] or [`codegen::emit_c`].

pub mod cli;
pub mod codegen;
pub mod expr;
pub mod model;
pub mod odesolve;
pub mod shagen;
pub mod swa;
pub mod whacheck;

/// Benchmark models shipped with the crate.
pub mod models {
    pub const WATERTANK: &str = include_str!("../models/watertank.pha");
    pub const WATERTANK_BURNER: &str = include_str!("../models/watertank_burner.pha");
    pub const THERMOSTAT: &str = include_str!("../models/thermostat.pha");
    pub const TRAINGATE: &str = include_str!("../models/traingate.pha");
}
