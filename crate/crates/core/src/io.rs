//! JSON interchange formats for tensors and check results.
//!
//! Index tuples are one-based in every file. Floats are written in shortest
//! round-trip form and parsed back exactly.

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pipeline::{CpOptions, CpOutcome, CpStatus, LevelReport, NotCpCertificate, OutcomeCheck};
use crate::sdp::{InfeasibilityCertificate, InfeasibilityReport};
use crate::tensor::{Decomposition, SymmetricTensor, WeightedAtom};

pub const TOOL_NAME: &str = "cptensor";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

impl Metadata {
    fn is_empty(&self) -> bool {
        self.name.is_none() && self.provenance.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryRecord {
    pub index: Vec<usize>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorFile {
    pub order: usize,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<EntryRecord>>,
    /// Distinct entries in graded-lex order of the exponent classes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub identifying_vector: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Metadata::is_empty")]
    pub metadata: Metadata,
}

impl TensorFile {
    pub fn from_tensor(t: &SymmetricTensor, metadata: Metadata) -> Self {
        Self {
            order: t.order(),
            dim: t.dim(),
            entries: None,
            identifying_vector: Some(t.identifying_vector().to_vec()),
            metadata,
        }
    }

    /// One record per exponent class, keyed by its sorted tuple.
    pub fn from_tensor_entries(t: &SymmetricTensor, metadata: Metadata) -> Self {
        let entries = t
            .index()
            .iter()
            .zip(t.identifying_vector())
            .map(|(alpha, &value)| EntryRecord { index: alpha.to_tuple(), value })
            .collect();
        Self { order: t.order(), dim: t.dim(), entries: Some(entries), identifying_vector: None, metadata }
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("tensor file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tensor file serializes")
    }

    pub fn to_tensor(&self) -> Result<SymmetricTensor> {
        if self.order == 0 {
            return Err(Error::Format("field `order`: must be at least 1".into()));
        }
        if self.dim == 0 {
            return Err(Error::Format("field `dim`: must be at least 1".into()));
        }
        match (&self.entries, &self.identifying_vector) {
            (Some(_), Some(_)) => Err(Error::Format("give exactly one of `entries` and `identifying_vector`, not both".into())),
            (None, None) => Err(Error::Format("missing `entries` or `identifying_vector`".into())),
            (None, Some(v)) => SymmetricTensor::from_identifying_vector(self.order, self.dim, v.clone())
                .map_err(|e| Error::Format(format!("field `identifying_vector`: {e}"))),
            (Some(list), None) => {
                let pairs: Vec<(Vec<usize>, f64)> = list.iter().map(|r| (r.index.clone(), r.value)).collect();
                SymmetricTensor::from_entries(self.order, self.dim, &pairs).map_err(|e| {
                    let at = list
                        .iter()
                        .position(|r| SymmetricTensor::from_entries(self.order, self.dim, &[(r.index.clone(), r.value)]).is_err())
                        .map(|i| format!("[{i}]"))
                        .unwrap_or_default();
                    Error::Format(format!("field `entries{at}`: {e}"))
                })
            }
        }
    }
}

pub fn read_tensor(text: &str) -> Result<SymmetricTensor> {
    TensorFile::parse(text)?.to_tensor()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolInfo {
    pub name: String,
    pub version: String,
}

impl Default for ToolInfo {
    fn default() -> Self {
        Self { name: TOOL_NAME.into(), version: TOOL_VERSION.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermRecord {
    pub weight: f64,
    /// Unit vector in the nonnegative orthant.
    pub atom: Vec<f64>,
    /// `weight^{1/m} · atom`, so that the tensor is `Σ vector^{⊗m}`.
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlatLevel {
    pub k: u32,
    pub t: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CertificateRecord {
    NegativeEntry {
        index: Vec<usize>,
        value: f64,
    },
    DualRay {
        k: u32,
        y: Vec<f64>,
        /// Dual slack blocks, row-major.
        s: Vec<Vec<Vec<f64>>>,
        verification: InfeasibilityReport,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResultFile {
    pub tool: ToolInfo,
    pub status: CpStatus,
    pub order: usize,
    pub dim: usize,
    pub degree: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat_level: Option<FlatLevel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decomposition: Option<Vec<TermRecord>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<OutcomeCheck>,
    pub levels: Vec<LevelReport>,
    pub options: CpOptions,
}

fn mat_rows(m: &Mat<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect()
}

fn rows_mat(rows: &[Vec<f64>]) -> Result<Mat<f64>> {
    let n = rows.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != n) {
        return Err(Error::Format(format!("field `certificate.s`: row {bad} of an {n}x{n} block has {} entries", rows[bad].len())));
    }
    Ok(Mat::from_fn(n, n, |i, j| rows[i][j]))
}

impl ResultFile {
    pub fn from_outcome(outcome: &CpOutcome) -> Self {
        let m = outcome.order as f64;
        let decomposition = outcome.decomposition.as_ref().map(|dec| {
            dec.terms
                .iter()
                .map(|t| {
                    let s = t.weight.max(0.0).powf(1.0 / m);
                    TermRecord { weight: t.weight, atom: t.atom.clone(), vector: t.atom.iter().map(|x| s * x).collect() }
                })
                .collect()
        });
        let certificate = outcome.certificate.as_ref().map(|c| match c {
            NotCpCertificate::NegativeEntry { tuple, value } => CertificateRecord::NegativeEntry { index: tuple.clone(), value: *value },
            NotCpCertificate::DualRay { k, certificate, report } => CertificateRecord::DualRay {
                k: *k,
                y: certificate.y.clone(),
                s: certificate.s.iter().map(mat_rows).collect(),
                verification: report.clone(),
            },
        });
        Self {
            tool: ToolInfo::default(),
            status: outcome.status,
            order: outcome.order,
            dim: outcome.dim,
            degree: outcome.d,
            flat_level: outcome.flat_level.map(|(k, t)| FlatLevel { k, t }),
            residual: outcome.residual,
            reason: outcome.reason.clone(),
            decomposition,
            certificate,
            check: None,
            levels: outcome.levels.clone(),
            options: outcome.options.clone(),
        }
    }

    pub fn to_outcome(&self) -> Result<CpOutcome> {
        let decomposition = self.decomposition.as_ref().map(|terms| {
            Decomposition::new(terms.iter().map(|t| WeightedAtom { weight: t.weight, atom: t.atom.clone() }).collect())
        });
        let certificate = match &self.certificate {
            None => None,
            Some(CertificateRecord::NegativeEntry { index, value }) => {
                Some(NotCpCertificate::NegativeEntry { tuple: index.clone(), value: *value })
            }
            Some(CertificateRecord::DualRay { k, y, s, verification }) => Some(NotCpCertificate::DualRay {
                k: *k,
                certificate: InfeasibilityCertificate { y: y.clone(), s: s.iter().map(|b| rows_mat(b)).collect::<Result<_>>()? },
                report: verification.clone(),
            }),
        };
        Ok(CpOutcome {
            status: self.status,
            decomposition,
            flat_level: self.flat_level.map(|f| (f.k, f.t)),
            residual: self.residual,
            certificate,
            reason: self.reason.clone(),
            levels: self.levels.clone(),
            order: self.order,
            dim: self.dim,
            d: self.degree,
            options: self.options.clone(),
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(format!("result file: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result file serializes")
    }
}
