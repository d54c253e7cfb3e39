//! Turns a resolved configuration into a model, runs it, and writes the
//! artifacts: snapshots, `series.csv` and `manifest.json`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::config::{
    ConfigError, DefaultApplied, ForceKind, OutputFormat, Resolved, ScenarioConfig, SourceConfig,
};
use crate::dynamics::{CoefficientSet, Model, ScalarLaw, SimState, Source};
use crate::eoc::manufactured_source;
use crate::forces::ForceSpec;
use crate::integrator::{run, FnObserver, IntegratorError, RunStats};
use crate::output::{write_snapshot_csv, write_snapshot_obj, OutputError, SeriesRow, SeriesWriter};
use crate::par;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerics(String),
    #[error(transparent)]
    Output(#[from] OutputError),
}

impl RunError {
    /// Process exit status: 2 for configuration, 3 for numerics, 4 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerics(_) | Self::Output(OutputError::Geometry(_)) => 3,
            Self::Output(_) => 4,
        }
    }
}

pub fn build_model(cfg: &ScenarioConfig) -> Result<Model, ConfigError> {
    let c = &cfg.coeffs;
    let v = c.v;
    let q = match c.source {
        SourceConfig::Zero => Source::Zero,
        SourceConfig::Constant { value } => Source::Constant(value),
        SourceConfig::NormalizedDensity => Source::NormalizedDensity,
        SourceConfig::Manufactured => Source::function(move |s| manufactured_source(s.u, s.t, v)),
    };
    let force = match (cfg.force.kind, cfg.force.biot_savart) {
        (ForceKind::None, _) => ForceSpec::None,
        (ForceKind::BiotSavart, Some(spec)) => ForceSpec::BiotSavart(spec),
        (ForceKind::BiotSavart, None) => {
            return Err(ConfigError::Missing("force.biot_savart.delta".into()))
        }
    };
    let model = Model {
        coeffs: CoefficientSet {
            a: ScalarLaw::Constant(c.a),
            b: ScalarLaw::Constant(c.b),
            c: ScalarLaw::Constant(c.c),
            v: ScalarLaw::Constant(v),
            q,
            beta_law: c.beta_law,
            gamma_law: c.gamma_law,
            advection: c.advection,
            cubic: c.cubic,
        },
        force,
        redistribution: cfg.redistribution,
        kappa_threshold: cfg.kappa_threshold,
    };
    model.validate().map_err(|e| ConfigError::Invalid {
        key: "coeffs".into(),
        reason: e.to_string(),
    })?;
    Ok(model)
}

pub fn initial_state(cfg: &ScenarioConfig) -> Result<SimState, ConfigError> {
    let curve = cfg
        .initial_curve
        .sample(cfg.m)
        .map_err(|e| ConfigError::Invalid {
            key: "initial_curve".into(),
            reason: e.to_string(),
        })?;
    SimState::new(curve, cfg.initial_rho.sample(cfg.m), 0.0).map_err(|e| ConfigError::Invalid {
        key: "initial_rho".into(),
        reason: e.to_string(),
    })
}

/// Output times of a run: the snapshot times plus `T_final`.
pub fn output_times(cfg: &ScenarioConfig) -> Vec<f64> {
    let mut times = cfg.output.snapshot_times.clone();
    times.push(cfg.t_final);
    times
}

/// Runs a configuration in memory. `on_output` sees the initial state with
/// index 0 and then every output time in order.
pub fn simulate<F>(cfg: &ScenarioConfig, mut on_output: F) -> Result<RunStats, RunError>
where
    F: FnMut(usize, &SimState, &RunStats) -> Result<(), RunError>,
{
    let model = build_model(cfg)?;
    let start = initial_state(cfg)?;
    let rhs = |t: f64, y: &[f64], dy: &mut [f64]| {
        model
            .rhs_flat(t, y, dy)
            .map_err(|e| RunError::Numerics(e.to_string()))
    };
    let mut observer = FnObserver(|i: usize, t: f64, y: &[f64], stats: &RunStats| {
        let state = SimState::unpack(y, t).map_err(|e| RunError::Numerics(e.to_string()))?;
        on_output(i, &state, stats)
    });
    let times = output_times(cfg);
    match run(
        rhs,
        &start.pack(),
        0.0,
        cfg.t_final,
        &times,
        &cfg.integrator,
        &mut observer,
    ) {
        Ok(summary) => Ok(summary.stats),
        Err(IntegratorError::Config(reason)) => Err(ConfigError::Invalid {
            key: "integrator".into(),
            reason,
        }
        .into()),
        Err(IntegratorError::Rhs { t, source }) => Err(match source {
            RunError::Numerics(msg) => RunError::Numerics(format!("at t = {t}: {msg}")),
            other => other,
        }),
        Err(IntegratorError::Observer { source, .. }) => Err(source),
        Err(e @ IntegratorError::StepUnderflow { .. }) => Err(RunError::Numerics(e.to_string())),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SnapshotEntry {
    pub index: usize,
    pub t: f64,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    /// Field name doubles as the marker that `parse_config` looks for.
    pub manifest_version: u32,
    pub program: &'static str,
    pub program_version: &'static str,
    pub scenario: String,
    /// Worker threads; 0 is the serial deterministic mode.
    pub threads: usize,
    pub status: String,
    pub config: ScenarioConfig,
    pub defaults_applied: Vec<DefaultApplied>,
    pub stats: Option<RunStats>,
    pub snapshots: Vec<SnapshotEntry>,
}

impl Manifest {
    fn write(&self, dir: &Path) -> Result<(), OutputError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|source| OutputError::Io { path, source })
    }
}

/// Summary of a completed run.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub directory: PathBuf,
    pub stats: RunStats,
    pub series: Vec<SeriesRow>,
    pub snapshots: Vec<SnapshotEntry>,
    pub final_state: SimState,
}

/// Runs a scenario and writes its artifacts into `out` or the configured directory.
pub fn run_scenario(resolved: &Resolved, out: Option<&Path>) -> Result<RunReport, RunError> {
    let mut config = resolved.config.clone();
    if let Some(dir) = out {
        config.output.directory = dir.to_path_buf();
    }
    let dir = config.output.directory.clone();
    fs::create_dir_all(&dir).map_err(|source| OutputError::Io {
        path: dir.clone(),
        source,
    })?;

    let mut manifest = Manifest {
        manifest_version: 1,
        program: env!("CARGO_PKG_NAME"),
        program_version: env!("CARGO_PKG_VERSION"),
        scenario: config.scenario.to_string(),
        threads: par::thread_count(),
        status: "running".into(),
        config: config.clone(),
        defaults_applied: resolved.defaults.clone(),
        stats: None,
        snapshots: Vec::new(),
    };
    manifest.write(&dir)?;

    let mut writer = SeriesWriter::create(&dir)?;
    let mut series = Vec::new();
    let mut snapshots = Vec::new();
    let mut last = None;
    let formats = config.output.formats.clone();
    let result = simulate(&config, |index, state, stats| {
        let row = SeriesRow::measure(state, stats.last_dt).map_err(OutputError::from)?;
        writer.append(&row)?;
        series.push(row);
        let mut files = Vec::new();
        for f in &formats {
            files.push(match f {
                OutputFormat::Csv => write_snapshot_csv(&dir, index, state)?,
                OutputFormat::Obj => write_snapshot_obj(&dir, index, &state.curve)?,
            });
        }
        snapshots.push(SnapshotEntry {
            index,
            t: state.t,
            files,
        });
        last = Some(state.clone());
        Ok(())
    });
    manifest.snapshots = snapshots.clone();
    match result {
        Ok(stats) => {
            manifest.status = "completed".into();
            manifest.stats = Some(stats);
            manifest.write(&dir)?;
            Ok(RunReport {
                directory: dir,
                stats,
                series,
                snapshots,
                final_state: last.expect("the initial state is always observed"),
            })
        }
        Err(e) => {
            manifest.status = format!("failed: {e}");
            manifest.write(&dir)?;
            Err(e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{parse_config, ScenarioName};
    use crate::output::{parse_series, parse_snapshot};

    #[test]
    fn every_preset_builds_a_valid_model_and_state() {
        for name in ScenarioName::ALL {
            let text = match name {
                ScenarioName::HopfParallel => {
                    r#"{"scenario": "hopf_parallel", "hopf": {"lambda": 5}}"#.into()
                }
                ScenarioName::KnotBiotSavart => {
                    r#"{"scenario": "knot_biot_savart", "force": {"biot_savart": {"delta": 0.1}}}"#
                        .into()
                }
                ScenarioName::Custom => r#"{"scenario": "custom", "M": 16, "T_final": 0.1,
                    "initial_curve": {"kind": "circle", "radius": 1},
                    "initial_rho": {"kind": "constant", "value": 1}}"#
                    .to_string(),
                n => format!(r#"{{"scenario": "{n}"}}"#),
            };
            let cfg = parse_config(&text).unwrap().config;
            let model = build_model(&cfg).unwrap();
            let st = initial_state(&cfg).unwrap();
            assert_eq!(st.len(), cfg.m);
            let rate = model.coupled_rhs(&st).unwrap();
            assert!(rate.rho.iter().all(|r| r.is_finite()), "{name}");
        }
    }

    #[test]
    fn run_writes_artifacts_and_reruns_identically() {
        let dir = tempfile::tempdir().unwrap();
        let text = r#"{"scenario": "shrinking_circle", "M": 24, "T_final": 0.05,
            "output": {"snapshot_times": [0.02], "formats": ["csv", "obj"]}}"#;
        let resolved = parse_config(text).unwrap();
        let first = run_scenario(&resolved, Some(&dir.path().join("a"))).unwrap();
        assert_eq!(first.snapshots.len(), 3);
        assert_eq!(first.snapshots[1].t, 0.02);
        assert_eq!(first.final_state.t, 0.05);
        assert!(dir.path().join("a/snap_2.obj").exists());
        let snap = parse_snapshot(&dir.path().join("a/snap_2.csv")).unwrap();
        assert_eq!(snap.nodes, first.final_state.curve.nodes());

        let manifest = fs::read_to_string(dir.path().join("a").join(MANIFEST_FILE)).unwrap();
        assert!(manifest.contains("\"completed\""));
        assert!(manifest.contains("integrator.dt_init"));
        let again = parse_config(&manifest).unwrap();
        assert!(again.defaults.is_empty());
        run_scenario(&again, Some(&dir.path().join("b"))).unwrap();
        let a = fs::read(dir.path().join("a/series.csv")).unwrap();
        let b = fs::read(dir.path().join("b/series.csv")).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            parse_series(&dir.path().join("a/series.csv"))
                .unwrap()
                .len(),
            3
        );
    }

    #[test]
    fn exit_codes_by_error_class() {
        assert_eq!(
            RunError::from(ConfigError::Missing("M".into())).exit_code(),
            2
        );
        assert_eq!(RunError::Numerics("x".into()).exit_code(), 3);
        let io = OutputError::Io {
            path: "p".into(),
            source: std::io::Error::other("denied"),
        };
        assert_eq!(RunError::from(io).exit_code(), 4);
    }

    #[test]
    fn blow_up_is_a_numerical_failure() {
        let text = r#"{"scenario": "custom", "M": 16, "T_final": 2.0,
            "initial_curve": {"kind": "circle", "radius": 1},
            "initial_rho": {"kind": "constant", "value": 3},
            "coeffs": {"cubic": true}}"#;
        let err = simulate(&parse_config(text).unwrap().config, |_, _, _| Ok(())).unwrap_err();
        assert_eq!(err.exit_code(), 3, "{err}");
    }
}
