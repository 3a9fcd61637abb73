//! Browser bindings for the closed-form parts of anisofield: classification,
//! exponents and fractional Brownian sheet covariances.

use anisofield::geometry::{classify_scenario, exponents as exponents_of, Exponents, Family, ScalingVector, ScenarioDoc};
use anisofield::limit::{fbs_covariance, fbs_hurst};
use anisofield::model::ModelParams;
use serde::Serialize;
use wasm_bindgen::prelude::*;

fn triple(v: &[f64], name: &str) -> Result<[f64; 3], String> {
    <[f64; 3]>::try_from(v).map_err(|_| format!("{name} needs exactly three entries, got {}", v.len()))
}

fn inputs(q: &[f64], gamma: &[f64]) -> Result<(ModelParams, ScalingVector), String> {
    let params = ModelParams::simple(triple(q, "q")?).map_err(|e| e.to_string())?;
    let gamma = ScalingVector::new(triple(gamma, "gamma")?).map_err(|e| e.to_string())?;
    Ok((params, gamma))
}

pub fn classify_doc(q: &[f64], gamma: &[f64]) -> Result<ScenarioDoc, String> {
    let (p, g) = inputs(q, gamma)?;
    classify_scenario(&p, &g).map(|s| s.document()).map_err(|e| e.to_string())
}

pub fn exponents_doc(q: &[f64], gamma: &[f64]) -> Result<Exponents, String> {
    let (p, g) = inputs(q, gamma)?;
    Ok(exponents_of(&p, &g))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SheetDoc {
    pub family: Family,
    pub hurst: [f64; 3],
    pub covariance: f64,
}

/// Hurst triple of Y1, Y2 or Y3 for q and the unit-variance sheet covariance at (x, y).
pub fn sheet_doc(family: &str, q: &[f64], x: &[f64], y: &[f64]) -> Result<SheetDoc, String> {
    let family = Family::parse(family).map_err(|e| e.to_string())?;
    let q = triple(q, "q")?;
    ModelParams::simple(q).map_err(|e| e.to_string())?;
    family.existence(q).map_err(|e| e.to_string())?;
    let hurst = fbs_hurst(family, q).ok_or_else(|| format!("{family} is not a fractional Brownian sheet"))?;
    Ok(SheetDoc {
        family,
        hurst,
        covariance: fbs_covariance(hurst, triple(x, "x")?, triple(y, "y")?),
    })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsError::new(&e))
}

/// Region, balance cell, permutation, family and H as JSON.
#[wasm_bindgen]
pub fn classify(q: &[f64], gamma: &[f64]) -> Result<String, JsError> {
    to_js(classify_doc(q, gamma))
}

/// All six script-H exponents and normalizations as JSON.
#[wasm_bindgen]
pub fn exponents(q: &[f64], gamma: &[f64]) -> Result<String, JsError> {
    to_js(exponents_doc(q, gamma))
}

/// Hurst triple and sheet covariance as JSON.
#[wasm_bindgen]
pub fn sheet(family: &str, q: &[f64], x: &[f64], y: &[f64]) -> Result<String, JsError> {
    to_js(sheet_doc(family, q, x, y))
}
