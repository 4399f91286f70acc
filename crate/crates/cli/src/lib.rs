//! Library side of the `daa` command: scenario files, batch runs and the
//! reaction-time calculator.

pub mod config;
pub mod reaction;
pub mod run;

pub use config::{parse_scenario_file, ScenarioFile};
pub use reaction::cmd_reaction_time;
pub use run::{cmd_run, RateOverrides, RunConfig, RunOutcome, RunReport};
