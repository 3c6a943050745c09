//! Reference tensors bundled with the crate.
//!
//! Each fixture stores the data it was built from (generator columns,
//! an entry list, or matrix slices), printed to four decimals, plus the
//! published answer where one exists.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Decomposition, SymmetricTensor, WeightedAtom};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Expected {
    Cp,
    NotCp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    /// One-based index tuple.
    pub index: Vec<usize>,
    pub value: f64,
}

/// A moment extension of the fixture together with matrices evaluated on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Extension {
    pub degree: u32,
    pub values: Vec<f64>,
    pub printed_precision: f64,
    pub matrices: std::collections::BTreeMap<String, Vec<Vec<f64>>>,
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub id: String,
    pub order: usize,
    pub dim: usize,
    pub description: String,
    pub expected: Expected,
    /// Columns `u^k` with `A = Σ (u^k)^{⊗m}`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<FixtureEntry>>,
    /// Frontal slices `A(:, :, k)` of a cubic tensor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slices: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identifying_vector: Option<Vec<f64>>,
    pub d: u32,
    pub k_start: u32,
    /// Order at which the published run stopped.
    pub terminates_at: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_length: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub published_decomposition: Option<Vec<WeightedAtom>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extension: Option<Extension>,
}

const SOURCES: &[(&str, &str)] = &[
    ("sec2", include_str!("../fixtures/sec2.json")),
    ("ex4.1", include_str!("../fixtures/ex4.1.json")),
    ("ex4.2", include_str!("../fixtures/ex4.2.json")),
    ("ex4.3", include_str!("../fixtures/ex4.3.json")),
    ("ex4.4", include_str!("../fixtures/ex4.4.json")),
    ("ex4.5", include_str!("../fixtures/ex4.5.json")),
    ("ex4.5b", include_str!("../fixtures/ex4.5b.json")),
    ("ex4.6", include_str!("../fixtures/ex4.6.json")),
    ("ex4.7", include_str!("../fixtures/ex4.7.json")),
];

pub fn ids() -> Vec<&'static str> {
    SOURCES.iter().map(|(id, _)| *id).collect()
}

pub fn load(id: &str) -> Result<Fixture> {
    let (_, text) = SOURCES
        .iter()
        .find(|(name, _)| *name == id)
        .ok_or_else(|| Error::Format(format!("unknown fixture id {id:?}; known: {}", ids().join(", "))))?;
    serde_json::from_str(text).map_err(|e| Error::Format(format!("fixture {id}: {e}")))
}

impl Fixture {
    pub fn tensor(&self) -> Result<SymmetricTensor> {
        if let Some(v) = &self.identifying_vector {
            return SymmetricTensor::from_identifying_vector(self.order, self.dim, v.clone());
        }
        if let Some(g) = &self.generators {
            return SymmetricTensor::from_rank_one_sum(self.order, self.dim, g);
        }
        if let Some(e) = &self.entries {
            let pairs: Vec<(Vec<usize>, f64)> = e.iter().map(|x| (x.index.clone(), x.value)).collect();
            return SymmetricTensor::from_entries(self.order, self.dim, &pairs);
        }
        if let Some(s) = &self.slices {
            return slices_tensor(self.dim, s);
        }
        Err(Error::Format(format!("fixture {} has no tensor data", self.id)))
    }
}

/// Cubic tensor from its frontal slices; fails if the slices are not symmetric.
pub fn slices_tensor(dim: usize, slices: &[Vec<Vec<f64>>]) -> Result<SymmetricTensor> {
    let mut pairs = Vec::with_capacity(dim * dim * dim);
    for (k, s) in slices.iter().enumerate() {
        for (i, row) in s.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                pairs.push((vec![i + 1, j + 1, k + 1], v));
            }
        }
    }
    SymmetricTensor::from_entries(3, dim, &pairs)
}

impl Fixture {
    pub fn published(&self) -> Option<Decomposition> {
        self.published_decomposition.clone().map(Decomposition::new)
    }
}
