//! WebAssembly bindings for the static demo page in `www/`.
//!
//! Every binding trades JSON strings: tensor files in, result files out.
//! The `api` module holds the same operations as plain Rust functions.

use wasm_bindgen::prelude::*;

pub mod api {
    use cptensor::fixtures;
    use cptensor::generate::{cp_random, notcp_random};
    use cptensor::io::{Metadata, ResultFile, TensorFile};
    use cptensor::pipeline::{check_cp, verify_outcome, CpOptions};
    use serde::Deserialize;

    /// Knobs the page exposes; everything else keeps its default.
    #[derive(Debug, Default, Deserialize)]
    #[serde(default)]
    pub struct PageOptions {
        pub seed: u64,
        pub k_max: Option<u32>,
        pub no_fast_path: bool,
    }

    pub fn fixture_ids() -> String {
        serde_json::to_string(&fixtures::ids()).expect("ids serialize")
    }

    pub fn fixture_tensor(id: &str) -> Result<String, String> {
        let fx = fixtures::load(id).map_err(|e| e.to_string())?;
        let t = fx.tensor().map_err(|e| e.to_string())?;
        Ok(TensorFile::from_tensor(&t, Metadata { name: Some(fx.id.clone()), provenance: Some(fx.description.clone()) }).to_json())
    }

    pub fn generate(kind: &str, m: usize, n: usize, r: usize, seed: u64) -> Result<String, String> {
        let t = match kind {
            "cp-random" => cp_random(m, n, r, seed),
            "notcp-random" => notcp_random(m, n, r, seed),
            other => return Err(format!("unknown generator {other:?}")),
        }
        .map_err(|e| e.to_string())?;
        let name = format!("{kind} m={m} n={n} r={r} seed={seed}");
        Ok(TensorFile::from_tensor(&t, Metadata { name: Some(name), provenance: None }).to_json())
    }

    pub fn check(tensor_json: &str, options_json: &str) -> Result<String, String> {
        let a = cptensor::io::read_tensor(tensor_json).map_err(|e| e.to_string())?;
        let page: PageOptions = if options_json.trim().is_empty() {
            PageOptions::default()
        } else {
            serde_json::from_str(options_json).map_err(|e| format!("options: {e}"))?
        };
        let opts = CpOptions { seed: page.seed, k_max: page.k_max, fast_path: !page.no_fast_path, ..CpOptions::default() };
        let out = check_cp(&a, &opts).map_err(|e| e.to_string())?;
        let mut file = ResultFile::from_outcome(&out);
        file.check = Some(verify_outcome(&a, &out));
        Ok(file.to_json())
    }

    pub fn verify(tensor_json: &str, result_json: &str) -> Result<String, String> {
        let a = cptensor::io::read_tensor(tensor_json).map_err(|e| e.to_string())?;
        let res = ResultFile::parse(result_json).map_err(|e| e.to_string())?;
        if (res.order, res.dim) != (a.order(), a.dim()) {
            return Err(format!("result is for order {} dimension {}, tensor has order {} dimension {}", res.order, res.dim, a.order(), a.dim()));
        }
        let outcome = res.to_outcome().map_err(|e| e.to_string())?;
        Ok(serde_json::to_string(&verify_outcome(&a, &outcome)).expect("check serializes"))
    }
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = fixtureIds)]
pub fn fixture_ids() -> String {
    api::fixture_ids()
}

#[wasm_bindgen(js_name = fixtureTensor)]
pub fn fixture_tensor(id: &str) -> Result<String, JsError> {
    js(api::fixture_tensor(id))
}

#[wasm_bindgen]
pub fn generate(kind: &str, m: usize, n: usize, r: usize, seed: u32) -> Result<String, JsError> {
    js(api::generate(kind, m, n, r, seed as u64))
}

#[wasm_bindgen]
pub fn check(tensor_json: &str, options_json: &str) -> Result<String, JsError> {
    js(api::check(tensor_json, options_json))
}

#[wasm_bindgen]
pub fn verify(tensor_json: &str, result_json: &str) -> Result<String, JsError> {
    js(api::verify(tensor_json, result_json))
}
