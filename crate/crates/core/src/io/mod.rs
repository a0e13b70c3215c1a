//! Scenario files, result tables, presets and parameter sweeps.

mod curve;
mod file;
mod presets;
mod sweep;
mod tables;

use std::path::{Path, PathBuf};

pub use curve::{default_u_grid, emit_teq_curve, log_grid, write_teq_curve};
pub use file::{
    load_scenario, parse_scenario, save_scenario, scenario_to_toml, CoefficientDerivation, LoadedScenario,
};
pub use presets::Preset;
pub use sweep::{run_sweep, write_sweep_table, IntegratorField, ReservoirField, SweepAxis, SweepRow};
pub use tables::{
    round_sig, trajectory_header, write_events_table, write_json, write_run, write_trajectory_table,
    RoundedValues, RunFiles, RunManifest, Summary, SummaryEvent, TOOL_NAME, TOOL_VERSION,
};

use crate::scenario::Scenario;

/// Overrides the default output directory.
pub const OUTPUT_DIR_ENV: &str = "RESDYN_OUTPUT_DIR";
pub const DEFAULT_OUTPUT_DIR: &str = "out";

/// Output directory: an explicit choice, then the scenario's `output.path`,
/// then `$RESDYN_OUTPUT_DIR`, then `out`.
pub fn resolve_output_dir(explicit: Option<&Path>, scenario: &Scenario, env: Option<&str>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| scenario.output.path.clone())
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT_DIR))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reservoir::ReservoirSpec;

    #[test]
    fn output_dir_precedence() {
        let mut s = Scenario::new(1.0, vec![ReservoirSpec::unit(3.0, 1.0, 0.1)]).unwrap();
        assert_eq!(resolve_output_dir(None, &s, None), PathBuf::from("out"));
        assert_eq!(resolve_output_dir(None, &s, Some("")), PathBuf::from("out"));
        assert_eq!(resolve_output_dir(None, &s, Some("env")), PathBuf::from("env"));
        s.output.path = Some("file".into());
        assert_eq!(resolve_output_dir(None, &s, Some("env")), PathBuf::from("file"));
        assert_eq!(
            resolve_output_dir(Some(Path::new("cli")), &s, Some("env")),
            PathBuf::from("cli")
        );
    }
}
