//! Scenario configuration: a JSON document with optional fields, resolved
//! against per-scenario defaults. Every default that is filled in is recorded
//! so the run manifest can report it.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::dynamics::{AdvectionScheme, BetaLaw, GammaLaw};
use crate::forces::{BiotSavartSpec, DEFAULT_DELTA};
use crate::geometry::{DEFAULT_KAPPA_THRESHOLD, MIN_NODES};
use crate::initial_data::{CurveInit, RhoInit};
use crate::integrator::{
    ErrorNorm, ErrorScale, IntegratorConfig, DEFAULT_DT_MAX, DEFAULT_DT_MIN, DEFAULT_TOL,
};
use crate::redistribution::{RedistributionMode, RedistributionSpec};

/// Key that marks a run manifest; its `config` member is a resolved config.
pub const MANIFEST_MARKER: &str = "manifest_version";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    ShrinkingCircle,
    Gage,
    Eoc,
    HopfParallel,
    Unknotted,
    KnotBiotSavart,
    KnotFree,
    Custom,
}

impl ScenarioName {
    pub const ALL: [ScenarioName; 8] = [
        Self::ShrinkingCircle,
        Self::Gage,
        Self::Eoc,
        Self::HopfParallel,
        Self::Unknotted,
        Self::KnotBiotSavart,
        Self::KnotFree,
        Self::Custom,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::ShrinkingCircle => "shrinking_circle",
            Self::Gage => "gage",
            Self::Eoc => "eoc",
            Self::HopfParallel => "hopf_parallel",
            Self::Unknotted => "unknotted",
            Self::KnotBiotSavart => "knot_biot_savart",
            Self::KnotFree => "knot_free",
            Self::Custom => "custom",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Scalar source term selectable from a config file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SourceConfig {
    Zero,
    Constant {
        value: f64,
    },
    NormalizedDensity,
    /// Source that makes `cos t (sin 2 pi u + sin 4 pi u)` exact on the shrinking unit circle.
    Manufactured,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceKind {
    None,
    BiotSavart,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Csv,
    Obj,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffConfig {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub v: f64,
    pub source: SourceConfig,
    pub beta_law: BetaLaw,
    pub gamma_law: GammaLaw,
    pub advection: AdvectionScheme,
    pub cubic: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForceConfig {
    pub kind: ForceKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub biot_savart: Option<BiotSavartSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HopfConfig {
    pub lambda: f64,
    pub r0: f64,
    pub a0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: PathBuf,
    pub snapshot_times: Vec<f64>,
    pub formats: Vec<OutputFormat>,
}

/// Fully resolved configuration. Serializing it yields a config file that
/// resolves to itself without applying any defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: ScenarioName,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "T_final")]
    pub t_final: f64,
    pub integrator: IntegratorConfig,
    pub coeffs: CoeffConfig,
    pub force: ForceConfig,
    pub redistribution: RedistributionSpec,
    pub kappa_threshold: f64,
    pub initial_curve: CurveInit,
    pub initial_rho: RhoInit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hopf: Option<HopfConfig>,
    pub output: OutputConfig,
}

/// One default filled in during resolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DefaultApplied {
    pub key: String,
    pub value: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("config parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    fn invalid(key: &str, reason: impl Into<String>) -> Self {
        Self::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegrator {
    tol: Option<f64>,
    dt_init: Option<f64>,
    dt_min: Option<f64>,
    dt_max: Option<f64>,
    safety: Option<f64>,
    min_factor: Option<f64>,
    max_factor: Option<f64>,
    norm: Option<ErrorNorm>,
    error_scale: Option<ErrorScale>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoeffs {
    a: Option<f64>,
    b: Option<f64>,
    c: Option<f64>,
    v: Option<f64>,
    source: Option<SourceConfig>,
    beta_law: Option<BetaLaw>,
    gamma_law: Option<GammaLaw>,
    advection: Option<AdvectionScheme>,
    cubic: Option<bool>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBiotSavart {
    delta: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawForce {
    kind: Option<ForceKind>,
    biot_savart: Option<RawBiotSavart>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRedistribution {
    mode: Option<RedistributionMode>,
    omega: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHopf {
    lambda: Option<f64>,
    r0: Option<f64>,
    a0: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    directory: Option<PathBuf>,
    snapshot_times: Option<Vec<f64>>,
    /// Alternative to `snapshot_times`: a uniform spacing.
    snapshot_every: Option<f64>,
    formats: Option<Vec<OutputFormat>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: ScenarioName,
    #[serde(rename = "M")]
    m: Option<usize>,
    #[serde(rename = "T_final")]
    t_final: Option<f64>,
    integrator: Option<RawIntegrator>,
    coeffs: Option<RawCoeffs>,
    force: Option<RawForce>,
    redistribution: Option<RawRedistribution>,
    kappa_threshold: Option<f64>,
    initial_curve: Option<CurveInit>,
    initial_rho: Option<RhoInit>,
    hopf: Option<RawHopf>,
    output: Option<RawOutput>,
}

/// Resolution result: the config plus the defaults that were applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub config: ScenarioConfig,
    pub defaults: Vec<DefaultApplied>,
}

/// Per-scenario defaults before user overrides.
struct Preset {
    m: Option<usize>,
    t_final: Option<f64>,
    curve: Option<CurveInit>,
    rho: Option<RhoInit>,
    coeffs: CoeffConfig,
    force: ForceKind,
    snapshots: Snapshots,
}

enum Snapshots {
    Times(&'static [f64]),
    Every(f64),
    FinalOnly,
}

const BASE_COEFFS: CoeffConfig = CoeffConfig {
    a: 1.0,
    b: 0.0,
    c: 1.0,
    v: 0.0,
    source: SourceConfig::Zero,
    beta_law: BetaLaw::Kappa,
    gamma_law: GammaLaw::Zero,
    advection: AdvectionScheme::Central,
    cubic: false,
};

pub const EOC_T_FINAL: f64 = 0.45;
pub const EOC_SNAPSHOT_SPACING: f64 = 0.01;
pub const EOC_ADVECTION_VELOCITY: f64 = -10.0;
pub const UNKNOTTED_ADVECTION_VELOCITY: f64 = 20.0;
pub const UNKNOTTED_SNAPSHOTS: [f64; 4] = [0.062, 0.124, 0.19, 0.25];
pub const KNOT_BIOT_SAVART_SNAPSHOTS: [f64; 4] = [0.02, 0.063, 0.124, 0.237];
pub const KNOT_FREE_SNAPSHOTS: [f64; 3] = [0.1225, 0.25, 0.4];
pub const SHRINKING_CIRCLE_SNAPSHOTS: [f64; 3] = [0.1, 0.3, 0.45];
const GAGE_SNAPSHOTS: [f64; 4] = [0.25, 0.5, 0.75, 1.0];
const DEFAULT_M: usize = 200;
const KNOT_RHO: RhoInit = RhoInit::OnePlusSine { frequency: 3 };

fn preset(name: ScenarioName, lambda: Option<f64>) -> Preset {
    let unit_circle = Some(CurveInit::Circle { radius: 1.0 });
    match name {
        ScenarioName::ShrinkingCircle => Preset {
            m: Some(DEFAULT_M),
            t_final: Some(0.45),
            curve: unit_circle,
            rho: Some(KNOT_RHO),
            coeffs: BASE_COEFFS,
            force: ForceKind::None,
            snapshots: Snapshots::Times(&SHRINKING_CIRCLE_SNAPSHOTS),
        },
        ScenarioName::Gage => Preset {
            m: Some(DEFAULT_M),
            t_final: Some(1.0),
            curve: Some(CurveInit::Ellipse {
                semi_x: 2.0,
                semi_y: 1.0,
            }),
            rho: Some(RhoInit::Constant { value: 1.0 }),
            coeffs: CoeffConfig {
                beta_law: BetaLaw::KappaMinusMean,
                ..BASE_COEFFS
            },
            force: ForceKind::None,
            snapshots: Snapshots::Times(&GAGE_SNAPSHOTS),
        },
        ScenarioName::Eoc => Preset {
            m: Some(100),
            t_final: Some(EOC_T_FINAL),
            curve: unit_circle,
            rho: Some(RhoInit::TwoModeSine),
            coeffs: CoeffConfig {
                v: EOC_ADVECTION_VELOCITY,
                source: SourceConfig::Manufactured,
                cubic: true,
                ..BASE_COEFFS
            },
            force: ForceKind::None,
            snapshots: Snapshots::Every(EOC_SNAPSHOT_SPACING),
        },
        ScenarioName::HopfParallel => Preset {
            m: Some(100),
            t_final: Some(20.0),
            curve: None,
            rho: None,
            coeffs: CoeffConfig {
                source: SourceConfig::NormalizedDensity,
                beta_law: BetaLaw::KappaMinusMeanMinusP {
                    lambda: lambda.unwrap_or(f64::NAN),
                },
                gamma_law: GammaLaw::MinusBeta,
                ..BASE_COEFFS
            },
            force: ForceKind::None,
            snapshots: Snapshots::Every(0.5),
        },
        ScenarioName::Unknotted => Preset {
            m: Some(DEFAULT_M),
            t_final: Some(0.25),
            curve: Some(CurveInit::Unknotted),
            rho: Some(RhoInit::Step {
                from: 0.25,
                to: 0.75,
            }),
            coeffs: CoeffConfig {
                v: UNKNOTTED_ADVECTION_VELOCITY,
                ..BASE_COEFFS
            },
            force: ForceKind::None,
            snapshots: Snapshots::Times(&UNKNOTTED_SNAPSHOTS),
        },
        ScenarioName::KnotBiotSavart | ScenarioName::KnotFree => {
            let bs = name == ScenarioName::KnotBiotSavart;
            Preset {
                m: Some(DEFAULT_M),
                t_final: Some(if bs { 0.237 } else { 0.4 }),
                curve: Some(CurveInit::ListingKnot),
                rho: Some(KNOT_RHO),
                coeffs: CoeffConfig {
                    beta_law: BetaLaw::KappaMinusMean,
                    gamma_law: GammaLaw::Rho,
                    ..BASE_COEFFS
                },
                force: if bs {
                    ForceKind::BiotSavart
                } else {
                    ForceKind::None
                },
                snapshots: Snapshots::Times(if bs {
                    &KNOT_BIOT_SAVART_SNAPSHOTS
                } else {
                    &KNOT_FREE_SNAPSHOTS
                }),
            }
        }
        ScenarioName::Custom => Preset {
            m: None,
            t_final: None,
            curve: None,
            rho: None,
            coeffs: BASE_COEFFS,
            force: ForceKind::None,
            snapshots: Snapshots::FinalOnly,
        },
    }
}

struct Log(Vec<DefaultApplied>);

impl Log {
    fn take<T: Serialize>(&mut self, given: Option<T>, key: &str, default: T) -> T {
        self.take_noted(given, key, default, None)
    }

    fn take_noted<T: Serialize>(
        &mut self,
        given: Option<T>,
        key: &str,
        default: T,
        note: Option<&str>,
    ) -> T {
        match given {
            Some(v) => v,
            None => {
                self.0.push(DefaultApplied {
                    key: key.to_string(),
                    value: serde_json::to_value(&default).unwrap_or(Value::Null),
                    note: note.map(str::to_string),
                });
                default
            }
        }
    }

    fn require<T: Serialize>(
        &mut self,
        given: Option<T>,
        key: &str,
        default: Option<T>,
    ) -> Result<T, ConfigError> {
        match (given, default) {
            (Some(v), _) => Ok(v),
            (None, Some(d)) => Ok(self.take(None, key, d)),
            (None, None) => Err(ConfigError::Missing(key.to_string())),
        }
    }
}

fn from_value<T: DeserializeOwned>(value: Value) -> Result<T, ConfigError> {
    serde_path_to_error::deserialize(value).map_err(|e| ConfigError::Parse {
        path: e.path().to_string(),
        message: e.into_inner().to_string(),
    })
}

/// Parses JSON text. A run manifest is accepted too; its stored config is used.
pub fn parse_config(text: &str) -> Result<Resolved, ConfigError> {
    let mut value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        path: ".".into(),
        message: e.to_string(),
    })?;
    if let Some(obj) = value.as_object_mut() {
        if obj.contains_key(MANIFEST_MARKER) {
            value = obj
                .remove("config")
                .ok_or_else(|| ConfigError::Missing("config".into()))?;
        }
    }
    resolve(from_value(value)?)
}

pub fn load_config(path: &Path) -> Result<Resolved, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    parse_config(&text)
}

fn positive(key: &str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::invalid(
            key,
            format!("must be finite and > 0, got {v}"),
        ))
    }
}

fn resolve(raw: RawConfig) -> Result<Resolved, ConfigError> {
    let mut log = Log(Vec::new());
    let name = raw.scenario;
    let raw_hopf = raw.hopf.unwrap_or_default();

    let hopf = if name == ScenarioName::HopfParallel {
        let lambda = raw_hopf
            .lambda
            .ok_or_else(|| ConfigError::Missing("hopf.lambda".into()))?;
        if !(lambda > 1.0 && lambda.is_finite()) {
            return Err(ConfigError::invalid(
                "hopf.lambda",
                format!("must exceed 1, got {lambda}"),
            ));
        }
        let steady_r = 1.0 / (lambda - 1.0).sqrt();
        let r0 = log.take_noted(
            raw_hopf.r0,
            "hopf.r0",
            steady_r + 0.1,
            Some("steady radius + 0.1"),
        );
        let a0 = log.take_noted(
            raw_hopf.a0,
            "hopf.a0",
            steady_r * steady_r,
            Some("steady amplitude"),
        );
        positive("hopf.r0", r0)?;
        if !(a0 >= 0.0 && a0.is_finite()) {
            return Err(ConfigError::invalid(
                "hopf.a0",
                format!("must be finite and >= 0, got {a0}"),
            ));
        }
        Some(HopfConfig { lambda, r0, a0 })
    } else {
        if raw_hopf.lambda.is_some() || raw_hopf.r0.is_some() || raw_hopf.a0.is_some() {
            return Err(ConfigError::invalid(
                "hopf",
                "only used by the hopf_parallel scenario",
            ));
        }
        None
    };
    let preset = preset(name, hopf.map(|h| h.lambda));

    let curve_default = match (hopf, preset.curve) {
        (Some(h), _) => Some(CurveInit::ParallelCircle { radius: h.r0 }),
        (None, c) => c,
    };
    let rho_default = match (hopf, preset.rho) {
        (Some(h), _) => Some(RhoInit::Cosine { amplitude: h.a0 }),
        (None, r) => r,
    };
    let initial_curve = log.require(raw.initial_curve, "initial_curve", curve_default)?;
    let initial_rho = log.require(raw.initial_rho, "initial_rho", rho_default)?;

    let implied_m = initial_curve.fixed_len().or(initial_rho.fixed_len());
    let m = log.require(raw.m, "M", implied_m.or(preset.m))?;
    if m < MIN_NODES {
        return Err(ConfigError::invalid(
            "M",
            format!("need at least {MIN_NODES} nodes, got {m}"),
        ));
    }
    if let Some(n) = initial_curve.fixed_len() {
        if n != m {
            return Err(ConfigError::invalid(
                "initial_curve.nodes",
                format!("has {n} nodes but M = {m}"),
            ));
        }
    }
    if let Some(n) = initial_rho.fixed_len() {
        if n != m {
            return Err(ConfigError::invalid(
                "initial_rho.values",
                format!("has {n} values but M = {m}"),
            ));
        }
    }
    let t_final = positive(
        "T_final",
        log.require(raw.t_final, "T_final", preset.t_final)?,
    )?;

    let ri = raw.integrator.unwrap_or_default();
    let h = 1.0 / m as f64;
    let dt_max = log.take(ri.dt_max, "integrator.dt_max", DEFAULT_DT_MAX);
    let integrator = IntegratorConfig {
        tol: log.take(ri.tol, "integrator.tol", DEFAULT_TOL),
        dt_init: log.take_noted(
            ri.dt_init,
            "integrator.dt_init",
            (4.0 * h * h).min(dt_max),
            Some("4 h^2 with h = 1/M, capped at dt_max"),
        ),
        dt_min: log.take(ri.dt_min, "integrator.dt_min", DEFAULT_DT_MIN),
        dt_max,
        safety: log.take(ri.safety, "integrator.safety", 0.8),
        min_factor: log.take(ri.min_factor, "integrator.min_factor", 0.1),
        max_factor: log.take(ri.max_factor, "integrator.max_factor", 5.0),
        norm: log.take(ri.norm, "integrator.norm", ErrorNorm::Max),
        error_scale: log.take(
            ri.error_scale,
            "integrator.error_scale",
            ErrorScale::UnitTime,
        ),
    };
    integrator
        .validate()
        .map_err(|reason| ConfigError::invalid("integrator", reason))?;

    let rc = raw.coeffs.unwrap_or_default();
    let d = preset.coeffs;
    let v_note = (name == ScenarioName::Unknotted).then_some(
        "advection velocity of this example; set coeffs.v = 0 to drop the advection term",
    );
    let coeffs = CoeffConfig {
        a: positive("coeffs.a", log.take(rc.a, "coeffs.a", d.a))?,
        b: log.take(rc.b, "coeffs.b", d.b),
        c: positive("coeffs.c", log.take(rc.c, "coeffs.c", d.c))?,
        v: log.take_noted(rc.v, "coeffs.v", d.v, v_note),
        source: log.take(rc.source, "coeffs.source", d.source),
        beta_law: log.take(rc.beta_law, "coeffs.beta_law", d.beta_law),
        gamma_law: log.take(rc.gamma_law, "coeffs.gamma_law", d.gamma_law),
        advection: log.take(rc.advection, "coeffs.advection", d.advection),
        cubic: log.take(rc.cubic, "coeffs.cubic", d.cubic),
    };
    if let BetaLaw::KappaMinusMeanMinusP { lambda } = coeffs.beta_law {
        if !lambda.is_finite() {
            return Err(ConfigError::invalid(
                "coeffs.beta_law.lambda",
                "must be finite",
            ));
        }
    }

    let rf = raw.force.unwrap_or_default();
    let kind = log.take(rf.kind, "force.kind", preset.force);
    let force = match kind {
        ForceKind::None => {
            if rf.biot_savart.is_some() {
                return Err(ConfigError::invalid(
                    "force.biot_savart",
                    "given but force.kind is none",
                ));
            }
            ForceConfig {
                kind,
                biot_savart: None,
            }
        }
        ForceKind::BiotSavart => {
            let given = rf.biot_savart.and_then(|b| b.delta);
            let delta = if name == ScenarioName::KnotBiotSavart {
                given.ok_or_else(|| ConfigError::Missing("force.biot_savart.delta".into()))?
            } else {
                log.take(given, "force.biot_savart.delta", DEFAULT_DELTA)
            };
            let spec = BiotSavartSpec::new(delta)
                .map_err(|e| ConfigError::invalid("force.biot_savart.delta", e.to_string()))?;
            ForceConfig {
                kind,
                biot_savart: Some(spec),
            }
        }
    };

    let rr = raw.redistribution.unwrap_or_default();
    let redistribution = RedistributionSpec {
        mode: if name == ScenarioName::Eoc {
            log.take_noted(
                rr.mode,
                "redistribution.mode",
                RedistributionMode::None,
                Some("no force, so the tangential velocity F.T vanishes"),
            )
        } else {
            log.take(rr.mode, "redistribution.mode", RedistributionMode::Uniform)
        },
        omega: log.take(rr.omega, "redistribution.omega", 0.0),
    };
    redistribution
        .validate()
        .map_err(|e| ConfigError::invalid("redistribution.omega", e.to_string()))?;

    let kappa_threshold = log.take(
        raw.kappa_threshold,
        "kappa_threshold",
        DEFAULT_KAPPA_THRESHOLD,
    );
    if !(kappa_threshold >= 0.0 && kappa_threshold.is_finite()) {
        return Err(ConfigError::invalid(
            "kappa_threshold",
            "must be finite and >= 0",
        ));
    }

    let ro = raw.output.unwrap_or_default();
    let directory = log.take(
        ro.directory,
        "output.directory",
        PathBuf::from(format!("out/{name}")),
    );
    let snapshot_times = match (ro.snapshot_times, ro.snapshot_every) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::invalid(
                "output",
                "give either snapshot_times or snapshot_every, not both",
            ))
        }
        (Some(times), None) => times,
        (None, Some(every)) => uniform_times(positive("output.snapshot_every", every)?, t_final),
        (None, None) => {
            let times = match preset.snapshots {
                Snapshots::Times(ts) => ts.iter().copied().filter(|&s| s <= t_final).collect(),
                Snapshots::Every(dt) => uniform_times(dt, t_final),
                Snapshots::FinalOnly => vec![t_final],
            };
            log.take(None, "output.snapshot_times", times)
        }
    };
    for (i, &s) in snapshot_times.iter().enumerate() {
        if !(0.0..=t_final).contains(&s) {
            return Err(ConfigError::invalid(
                &format!("output.snapshot_times[{i}]"),
                format!("{s} outside [0, T_final = {t_final}]"),
            ));
        }
    }
    let formats = log.take(ro.formats, "output.formats", vec![OutputFormat::Csv]);

    Ok(Resolved {
        config: ScenarioConfig {
            scenario: name,
            m,
            t_final,
            integrator,
            coeffs,
            force,
            redistribution,
            kappa_threshold,
            initial_curve,
            initial_rho,
            hopf,
            output: OutputConfig {
                directory,
                snapshot_times,
                formats,
            },
        },
        defaults: log.0,
    })
}

/// `dt, 2 dt, ...` up to `t_final`, with `t_final` itself when the spacing
/// does not divide it.
pub fn uniform_times(dt: f64, t_final: f64) -> Vec<f64> {
    let n = (t_final / dt + 1e-9).floor() as usize;
    let mut times: Vec<f64> = (1..=n).map(|i| (i as f64 * dt).min(t_final)).collect();
    if times.last().is_none_or(|&s| t_final - s > 1e-12 * t_final) {
        times.push(t_final);
    }
    times
}

impl ScenarioConfig {
    /// Minimal config for a scenario, with all defaults applied.
    pub fn preset(name: ScenarioName) -> Result<Resolved, ConfigError> {
        parse_config(&format!(r#"{{"scenario": "{name}"}}"#))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
