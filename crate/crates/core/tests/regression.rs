//! Frozen outputs of this implementation. A change here means the numbers
//! moved; regenerate the golden file only for an intended change.

use serde::Deserialize;

use curveflow::forces::{force_field, BiotSavartSpec, ForceSpec};
use curveflow::geometry::Curve;
use curveflow::initial_data::listing_knot_point;

const REL_TOL: f64 = 1e-12;

#[derive(Deserialize)]
struct Golden {
    #[serde(rename = "M")]
    m: usize,
    delta: f64,
    max_magnitude: f64,
    mean_magnitude: f64,
    nodes: Vec<(usize, [f64; 3])>,
}

fn close(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= REL_TOL * scale
}

#[test]
fn biot_savart_field_on_the_listing_knot_is_unchanged() {
    let golden: Golden =
        serde_json::from_str(include_str!("golden/biot_savart_listing_knot.json")).unwrap();
    let curve = Curve::sample(golden.m, listing_knot_point).unwrap();
    let spec = ForceSpec::BiotSavart(BiotSavartSpec::new(golden.delta).unwrap());
    let field = force_field(&curve, &spec, 0.0).unwrap();

    let mags: Vec<f64> = field.iter().map(|f| f.norm()).collect();
    let max = mags.iter().cloned().fold(0.0, f64::max);
    let mean = mags.iter().sum::<f64>() / mags.len() as f64;
    let scale = golden.max_magnitude;
    assert!(close(max, golden.max_magnitude, scale), "max {max}");
    assert!(close(mean, golden.mean_magnitude, scale), "mean {mean}");
    for (k, expected) in &golden.nodes {
        let f = field[*k];
        for (got, want) in [f.x, f.y, f.z].into_iter().zip(expected) {
            assert!(close(got, *want, scale), "node {k}: {got} vs {want}");
        }
    }
}
