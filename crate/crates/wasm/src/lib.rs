//! Browser bindings. Each call takes a preset name and returns JSON.

use evo_tss::{presets, spectral, survival, ModelSpec};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn spec(preset: &str) -> Result<ModelSpec, JsValue> {
    presets::by_name(preset).ok_or_else(|| JsValue::from_str(&format!("unknown preset {preset:?}")))
}

fn js(e: evo_tss::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Equilibrium density of a monomorphic population:
/// `{"x": [..], "g": [..], "h": .., "mass": ..}`.
#[wasm_bindgen]
pub fn equilibrium(preset: &str, u: f64, nodes: usize) -> Result<String, JsValue> {
    let spec = spec(preset)?;
    let eig = spectral::principal_eigen(&spec, u, nodes).map_err(js)?;
    Ok(json!({
        "x": eig.grid().nodes(),
        "g": eig.g.density,
        "h": eig.h,
        "mass": eig.mass(),
    })
    .to_string())
}

/// Probability that a single mutant `v` born at `x` invades resident `u`:
/// `{"x": [..], "phi": [..], "fitness": ..}`.
#[wasm_bindgen]
pub fn invasion(preset: &str, u: f64, v: f64, nodes: usize) -> Result<String, JsValue> {
    let spec = spec(preset)?;
    let eig = spectral::principal_eigen(&spec, u, nodes).map_err(js)?;
    let inv = survival::solve_phi_vu(&spec, v, &eig).map_err(js)?;
    Ok(json!({
        "x": inv.profile.grid.nodes(),
        "phi": inv.profile.phi,
        "fitness": inv.fitness,
    })
    .to_string())
}

/// Invasion fitness of `samples` mutant traits spread over the trait range
/// against resident `u`: `{"v": [..], "fitness": [..]}`.
#[wasm_bindgen]
pub fn fitness_landscape(preset: &str, u: f64, samples: usize, nodes: usize) -> Result<String, JsValue> {
    let spec = spec(preset)?;
    let eig = spectral::principal_eigen(&spec, u, nodes).map_err(js)?;
    let traits: Vec<f64> = spec.trait_space.linspace(samples.max(2)).collect();
    let mut fitness = Vec::with_capacity(traits.len());
    for &v in &traits {
        let h_v = spectral::principal_eigen(&spec, v, nodes).map_err(js)?.h;
        fitness.push(spectral::fitness_from(&spec, h_v, v, &eig).map_err(js)?);
    }
    Ok(json!({ "v": traits, "fitness": fitness }).to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn landscape_vanishes_at_the_resident() {
        let out: serde_json::Value = serde_json::from_str(&fitness_landscape("niche", 0.5, 5, 65).unwrap()).unwrap();
        let v = out["v"].as_array().unwrap();
        let f = out["fitness"].as_array().unwrap();
        assert_eq!(v.len(), 5);
        assert!(f[2].as_f64().unwrap().abs() < 1e-8);
    }

    #[test]
    fn equilibrium_has_one_value_per_node() {
        let out: serde_json::Value = serde_json::from_str(&equilibrium("niche", 0.3, 33).unwrap()).unwrap();
        assert_eq!(out["g"].as_array().unwrap().len(), 33);
        assert!(out["mass"].as_f64().unwrap() > 0.0);
    }
}
