//! The full curve flow started on a parallel-plane circle follows the
//! reduced (r, a) system with second-order accuracy in the mesh size.
//!
//! While the circle expands, `beta / kappa < 0` and out-of-plane
//! perturbations are amplified at a rate that grows like `M^2`, so the
//! comparison stays inside the window where round-off has not yet grown.

use curveflow::config::parse_config;
use curveflow::reduced_ode::{
    integrate_reduced, reduced_integrator_config, HopfParams, ReducedState,
};
use curveflow::scenario::simulate;

const LAMBDA: f64 = 5.36808;
const T_FINAL: f64 = 0.6;
const SPACING: f64 = 0.05;

/// Largest gaps in radius and in amplitude between the curve flow and the
/// reduced system over the output times. The radius is the mean node
/// distance to the centroid; the amplitude of `a cos 2 pi u` is `sqrt(2) ||rho||_2`.
fn gaps(m: usize) -> (f64, f64) {
    let text = format!(
        r#"{{"scenario": "hopf_parallel", "M": {m}, "T_final": {T_FINAL},
            "hopf": {{"lambda": {LAMBDA}}},
            "integrator": {{"tol": 1e-9}},
            "output": {{"snapshot_every": {SPACING}}}}}"#
    );
    let cfg = parse_config(&text).unwrap().config;
    let h = cfg.hopf.unwrap();
    let ode = integrate_reduced(
        &HopfParams::new(LAMBDA).unwrap(),
        ReducedState { r: h.r0, a: h.a0 },
        T_FINAL,
        SPACING,
        &reduced_integrator_config(),
    )
    .unwrap();

    let mut pde = Vec::new();
    simulate(&cfg, |_, s, _| {
        let c = s.curve.centroid();
        let n = s.len() as f64;
        let r = s.curve.nodes().iter().map(|x| (x - c).norm()).sum::<f64>() / n;
        let a = (2.0 * s.rho.values().iter().map(|v| v * v).sum::<f64>() / n).sqrt();
        pde.push((s.t, r, a));
        Ok(())
    })
    .unwrap();

    assert_eq!(pde.len(), ode.len());
    let mut gap_r: f64 = 0.0;
    let mut gap_a: f64 = 0.0;
    for (i, &(t, r, a)) in pde.iter().enumerate() {
        assert!((t - ode.t[i]).abs() < 1e-12, "{t} vs {}", ode.t[i]);
        gap_r = gap_r.max((r - ode.r[i]).abs());
        gap_a = gap_a.max((a - ode.a[i]).abs());
    }
    (gap_r, gap_a)
}

#[test]
fn curve_flow_tracks_the_reduced_system_at_second_order() {
    let runs: Vec<(f64, f64)> = [25, 50, 100].into_iter().map(gaps).collect();
    assert!(runs[2].0 < 2e-4 && runs[2].1 < 2e-4, "{runs:?}");
    for pair in runs.windows(2) {
        let ratio_r = pair[0].0 / pair[1].0;
        let ratio_a = pair[0].1 / pair[1].1;
        assert!(
            (3.5..=4.5).contains(&ratio_r),
            "radius ratio {ratio_r}: {runs:?}"
        );
        assert!(
            (3.5..=4.5).contains(&ratio_a),
            "amplitude ratio {ratio_a}: {runs:?}"
        );
    }
}
