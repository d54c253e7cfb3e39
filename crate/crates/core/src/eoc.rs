//! Manufactured-solution convergence study.
//!
//! The unit circle under `dX/dt = kN` stays a circle of radius
//! `r(t) = sqrt(1 - 2t)`, so with `rho = cos t (sin 2 pi u + sin 4 pi u)` the
//! source `g` that makes `rho` exact is available in closed form. The error at
//! each snapshot is the nodal max norm; snapshots are aggregated in time with
//! the trapezoid rule (L1) and the max (Linf).

use std::f64::consts::PI;
use std::fmt;

use serde::Serialize;

use crate::config::{parse_config, ConfigError, ScenarioConfig, EOC_SNAPSHOT_SPACING, EOC_T_FINAL};
use crate::integrator::{ErrorNorm, ErrorScale, DEFAULT_TOL};
use crate::scenario::{simulate, RunError};

const TAU: f64 = 2.0 * PI;

pub const DEFAULT_MESHES: [usize; 5] = [100, 200, 300, 400, 500];

/// Radius of the shrinking unit circle.
pub fn exact_radius(t: f64) -> f64 {
    (1.0 - 2.0 * t).sqrt()
}

pub fn manufactured_rho(u: f64, t: f64) -> f64 {
    t.cos() * ((TAU * u).sin() + (2.0 * TAU * u).sin())
}

/// `g = d_t rho - kappa^2 rho - d_ss rho + v d_s rho - rho^3` on the shrinking circle.
pub fn manufactured_source(u: f64, t: f64, v: f64) -> f64 {
    let r = exact_radius(t);
    let (s1, c1) = (TAU * u).sin_cos();
    let (s2, c2) = (2.0 * TAU * u).sin_cos();
    let rho = t.cos() * (s1 + s2);
    let rho_t = -t.sin() * (s1 + s2);
    let rho_s = t.cos() * (c1 + 2.0 * c2) / r;
    let rho_ss = t.cos() * (-s1 - 4.0 * s2) / (r * r);
    rho_t - rho / (r * r) - rho_ss + v * rho_s - rho.powi(3)
}

/// `log(e1 / e2) / log(m2 / m1)`.
pub fn eoc(e1: f64, e2: f64, m1: usize, m2: usize) -> f64 {
    (e1 / e2).ln() / (m2 as f64 / m1 as f64).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EocSettings {
    pub t_final: f64,
    pub snapshot_spacing: f64,
    pub tol: f64,
    pub norm: ErrorNorm,
    pub error_scale: ErrorScale,
}

impl Default for EocSettings {
    fn default() -> Self {
        Self {
            t_final: EOC_T_FINAL,
            snapshot_spacing: EOC_SNAPSHOT_SPACING,
            tol: DEFAULT_TOL,
            norm: ErrorNorm::Max,
            error_scale: ErrorScale::UnitTime,
        }
    }
}

/// Time-aggregated errors on one mesh.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeshErrors {
    pub m: usize,
    pub l1_linf: f64,
    pub linf_linf: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EocRow {
    pub m: usize,
    pub err_l1_linf: Option<f64>,
    pub eoc_l1_linf: Option<f64>,
    pub err_linf_linf: Option<f64>,
    pub eoc_linf_linf: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EocReport {
    pub settings: EocSettings,
    pub rows: Vec<EocRow>,
}

impl EocReport {
    /// Builds rows from per-mesh results; a failed mesh breaks the EOC chain.
    pub fn from_results(
        settings: EocSettings,
        results: Vec<(usize, Result<MeshErrors, String>)>,
    ) -> Self {
        let mut rows: Vec<EocRow> = Vec::with_capacity(results.len());
        let mut prev: Option<MeshErrors> = None;
        for (m, res) in results {
            let row = match res {
                Ok(e) => {
                    let row = EocRow {
                        m,
                        err_l1_linf: Some(e.l1_linf),
                        eoc_l1_linf: prev.map(|p| eoc(p.l1_linf, e.l1_linf, p.m, m)),
                        err_linf_linf: Some(e.linf_linf),
                        eoc_linf_linf: prev.map(|p| eoc(p.linf_linf, e.linf_linf, p.m, m)),
                        failure: None,
                    };
                    prev = Some(e);
                    row
                }
                Err(msg) => {
                    prev = None;
                    EocRow {
                        m,
                        err_l1_linf: None,
                        eoc_l1_linf: None,
                        err_linf_linf: None,
                        eoc_linf_linf: None,
                        failure: Some(msg),
                    }
                }
            };
            rows.push(row);
        }
        Self { settings, rows }
    }

    /// All computed EOC values for both norms.
    pub fn eocs(&self) -> Vec<f64> {
        self.rows
            .iter()
            .flat_map(|r| [r.eoc_l1_linf, r.eoc_linf_linf])
            .flatten()
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.rows.iter().all(|r| r.failure.is_none())
    }

    pub fn to_csv(&self) -> String {
        let f = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.16e}"));
        let mut s = String::from("M,err_L1Linf,eoc_L1Linf,err_LinfLinf,eoc_LinfLinf,failure\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.m,
                f(r.err_l1_linf),
                f(r.eoc_l1_linf),
                f(r.err_linf_linf),
                f(r.eoc_linf_linf),
                r.failure.as_deref().unwrap_or("").replace(',', ";"),
            ));
        }
        s
    }
}

impl fmt::Display for EocReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let e = |x: Option<f64>| x.map_or("--".to_string(), |v| format!("{v:.4e}"));
        let o = |x: Option<f64>| x.map_or("--".to_string(), |v| format!("{v:.4}"));
        writeln!(
            f,
            "{:>6} {:>12} {:>8} {:>12} {:>8}",
            "M", "L1(Linf)", "EOC", "Linf(Linf)", "EOC"
        )?;
        for r in &self.rows {
            write!(
                f,
                "{:>6} {:>12} {:>8} {:>12} {:>8}",
                r.m,
                e(r.err_l1_linf),
                o(r.eoc_l1_linf),
                e(r.err_linf_linf),
                o(r.eoc_linf_linf)
            )?;
            if let Some(msg) = &r.failure {
                write!(f, "  failed: {msg}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

pub fn eoc_config(m: usize, settings: &EocSettings) -> Result<ScenarioConfig, ConfigError> {
    let norm = serde_json::to_string(&settings.norm).expect("norm serializes");
    let scale = serde_json::to_string(&settings.error_scale).expect("scale serializes");
    let text = format!(
        r#"{{"scenario": "eoc", "M": {m}, "T_final": {t},
            "integrator": {{"tol": {tol}, "norm": {norm}, "error_scale": {scale}}},
            "output": {{"snapshot_every": {dt}}}}}"#,
        t = settings.t_final,
        tol = settings.tol,
        dt = settings.snapshot_spacing,
    );
    Ok(parse_config(&text)?.config)
}

/// Runs the manufactured problem and aggregates the nodal max errors in time.
pub fn mesh_errors(cfg: &ScenarioConfig) -> Result<MeshErrors, RunError> {
    let mut samples: Vec<(f64, f64)> = Vec::new();
    let stats = simulate(cfg, |_, state, _| {
        let m = state.len();
        let err = state
            .rho
            .values()
            .iter()
            .enumerate()
            .map(|(k, r)| (r - manufactured_rho(k as f64 / m as f64, state.t)).abs())
            .fold(0.0, f64::max);
        samples.push((state.t, err));
        Ok(())
    })?;
    let l1 = samples
        .windows(2)
        .map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1))
        .sum();
    let linf = samples.iter().map(|s| s.1).fold(0.0, f64::max);
    Ok(MeshErrors {
        m: cfg.m,
        l1_linf: l1,
        linf_linf: linf,
        steps: stats.steps,
    })
}

/// Runs every mesh concurrently and tabulates errors and EOCs.
pub fn eoc_harness(meshes: &[usize], settings: &EocSettings) -> Result<EocReport, ConfigError> {
    if meshes.len() < 2 {
        return Err(ConfigError::Invalid {
            key: "meshes".into(),
            reason: "need at least two meshes".into(),
        });
    }
    if meshes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ConfigError::Invalid {
            key: "meshes".into(),
            reason: "meshes must be strictly ascending".into(),
        });
    }
    let configs = meshes
        .iter()
        .map(|&m| eoc_config(m, settings))
        .collect::<Result<Vec<_>, _>>()?;
    let results = std::thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|cfg| scope.spawn(move || mesh_errors(cfg).map_err(|e| e.to_string())))
            .collect();
        handles
            .into_iter()
            .zip(meshes)
            .map(|(h, &m)| {
                let res = h
                    .join()
                    .unwrap_or_else(|_| Err("solver thread panicked".into()));
                (m, res)
            })
            .collect()
    });
    Ok(EocReport::from_results(*settings, results))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eoc_formula() {
        assert_eq!(eoc(1e-3, 1e-3, 100, 200), 0.0);
        assert!((eoc(1e-3, 5e-4, 100, 200) - 1.0).abs() < 1e-15);
        assert!((eoc(1e-3, 2.5e-4, 100, 200) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn source_matches_finite_difference_residual() {
        // independent residual of the scalar equation on the exact circle, by differences
        let v = -10.0;
        let h = 1e-4;
        for &(u, t) in &[(0.1, 0.05), (0.37, 0.2), (0.81, 0.41), (0.5, 0.0)] {
            let r = exact_radius(t);
            let ds = TAU * r * h; // arc length of a parameter step h
            let f = |u: f64, t: f64| manufactured_rho(u, t);
            let rho_t = (f(u, t + h) - f(u, t - h)) / (2.0 * h);
            let rho_s = (f(u + h, t) - f(u - h, t)) / (2.0 * ds);
            let rho_ss = (f(u + h, t) - 2.0 * f(u, t) + f(u - h, t)) / (ds * ds);
            let rho = f(u, t);
            let g = rho_t - rho / (r * r) - rho_ss + v * rho_s - rho.powi(3);
            assert!((g - manufactured_source(u, t, v)).abs() < 1e-5, "{u} {t}");
        }
    }

    #[test]
    fn report_rows_and_failures() {
        let ok = |m, a| {
            Ok(MeshErrors {
                m,
                l1_linf: a,
                linf_linf: 2.0 * a,
                steps: 1,
            })
        };
        let r = EocReport::from_results(
            EocSettings::default(),
            vec![
                (100, ok(100, 4e-4)),
                (200, ok(200, 1e-4)),
                (300, Err("boom".into())),
                (400, ok(400, 1e-5)),
            ],
        );
        assert_eq!(r.rows[0].eoc_l1_linf, None);
        assert!((r.rows[1].eoc_l1_linf.unwrap() - 2.0).abs() < 1e-12);
        assert!((r.rows[1].eoc_linf_linf.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(r.rows[2].failure.as_deref(), Some("boom"));
        assert_eq!(r.rows[3].eoc_l1_linf, None);
        assert!(!r.is_complete());
        assert_eq!(r.eocs().len(), 2);
        assert!(r.to_csv().lines().nth(3).unwrap().ends_with("boom"));
        assert!(r.to_string().contains("failed: boom"));
    }

    #[test]
    fn harness_rejects_bad_mesh_lists() {
        let s = EocSettings::default();
        assert!(eoc_harness(&[100], &s).is_err());
        assert!(eoc_harness(&[200, 100], &s).is_err());
    }

    #[test]
    fn small_mesh_error_is_small_and_decreases() {
        let s = EocSettings {
            t_final: 0.1,
            ..EocSettings::default()
        };
        let report = eoc_harness(&[40, 80], &s).unwrap();
        assert!(report.is_complete(), "{report}");
        let e: Vec<f64> = report
            .rows
            .iter()
            .map(|r| r.err_linf_linf.unwrap())
            .collect();
        assert!(e[0] < 0.05 && e[1] < e[0], "{report}");
        for o in report.eocs() {
            assert!(o > 1.5, "{report}");
        }
    }
}
