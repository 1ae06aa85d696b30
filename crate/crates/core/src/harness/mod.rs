//! Experiment configs, the seeded training loop, JSONL traces and
//! side-by-side comparisons.
//!
//! A config is a TOML file with `[problem]`, `[optimizer]`, `[budget]` and
//! `[trace]` tables plus top-level `seed` and `init_scale`. All randomness of
//! a run derives from `seed` through [`crate::rng`].

mod check;
mod compare;
mod config;
mod run;
mod trace;

pub use check::{am_projected_iterates, gmres_check, pam_projected_iterates, GmresCheck};
pub use compare::{compare, format_table, threads_from_env, CompareRow};
pub use config::{
    apply_override, parse_override, Budget, ExperimentConfig, OptimizerSpec, TraceConfig, VrSection,
};
pub use run::{initial_point, run_experiment, RunOutput, Summary};
pub use trace::{read_trace, TraceRecord, TraceWriter};
