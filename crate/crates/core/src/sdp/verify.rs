//! Independent checks of solver output, recomputed from the program data.

use std::fmt;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{ConicOutcome, ConicProgram, InfeasibilityCertificate};
use crate::error::{Error, Result};
use crate::linalg::{dot, frob_inner, max_abs, min_eigenvalue, psd_projection, vec_max_abs};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfeasibilityReport {
    /// `bᵀy − Σ⟨C_j, S_j⟩` after projecting each `S_j` onto the PSD cone.
    #[serde(with = "crate::serde_float")]
    pub margin: f64,
    /// `‖Aᵀy + Σ F_j*(S_j)‖_∞` for the ray scaled to unit margin.
    #[serde(with = "crate::serde_float")]
    pub adjoint_residual: f64,
    /// Largest entry of the ray scaled to unit margin.
    #[serde(with = "crate::serde_float")]
    pub normalized_norm: f64,
    /// Largest `max(0, −λ_min(S_j))` before projection, relative to `1 + ‖S_j‖`.
    #[serde(with = "crate::serde_float")]
    pub psd_violation: f64,
    pub tol: f64,
    pub passed: bool,
}

impl fmt::Display for InfeasibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "margin {:.3e}, adjoint residual {:.3e}, normalized norm {:.3e}, psd violation {:.3e} (tol {:.1e}) -> {}",
            self.margin,
            self.adjoint_residual,
            self.normalized_norm,
            self.psd_violation,
            self.tol,
            if self.passed { "pass" } else { "fail" }
        )
    }
}

/// Checks that `(y, S)` is an improving ray: `S_j ⪰ 0`,
/// `Aᵀy + Σ F_j*(S_j) = 0` and `bᵀy − Σ⟨C_j, S_j⟩ > 0`.
///
/// The ray is scaled to unit margin; the adjoint residual must then be at
/// most `tol` and the ray entries below `1/tol`. Any feasible `z` would need
/// `‖z‖₁ ≥ 1/adjoint_residual`.
pub fn verify_infeasibility(
    prog: &ConicProgram,
    cert: &InfeasibilityCertificate,
    tol: f64,
) -> Result<InfeasibilityReport> {
    if cert.y.len() != prog.equalities.len() {
        return Err(Error::CertificateShape(format!(
            "{} equality multipliers for {} rows",
            cert.y.len(),
            prog.equalities.len()
        )));
    }
    if cert.s.len() != prog.blocks.len() {
        return Err(Error::CertificateShape(format!(
            "{} block multipliers for {} blocks",
            cert.s.len(),
            prog.blocks.len()
        )));
    }
    for (j, (s, b)) in cert.s.iter().zip(&prog.blocks).enumerate() {
        if s.nrows() != b.size || s.ncols() != b.size {
            return Err(Error::CertificateShape(format!(
                "block {j} multiplier is {}x{}, block size {}",
                s.nrows(),
                s.ncols(),
                b.size
            )));
        }
    }
    if cert.y.iter().any(|v| !v.is_finite()) || cert.s.iter().any(|s| !max_abs(s.as_ref()).is_finite()) {
        return Ok(InfeasibilityReport {
            margin: f64::NAN,
            adjoint_residual: f64::INFINITY,
            normalized_norm: f64::INFINITY,
            psd_violation: f64::INFINITY,
            tol,
            passed: false,
        });
    }
    let mut psd_violation: f64 = 0.0;
    let projected: Vec<Mat<f64>> = cert
        .s
        .iter()
        .map(|s| {
            let e = min_eigenvalue(s.as_ref());
            psd_violation = psd_violation.max((-e).max(0.0) / (1.0 + max_abs(s.as_ref())));
            psd_projection(s.as_ref())
        })
        .collect();
    let rhs: Vec<f64> = prog.equalities.iter().map(|r| r.rhs).collect();
    let margin = dot(&rhs, &cert.y)
        - prog.blocks.iter().zip(&projected).map(|(b, s)| b.constant_inner(s)).sum::<f64>();
    if !(margin > 0.0) {
        return Ok(InfeasibilityReport {
            margin,
            adjoint_residual: f64::INFINITY,
            normalized_norm: f64::INFINITY,
            psd_violation,
            tol,
            passed: false,
        });
    }
    let adj = prog.adjoint(&cert.y, &projected);
    let adjoint_residual = vec_max_abs(&adj) / margin;
    let norm = vec_max_abs(&cert.y).max(projected.iter().fold(0.0, |m, s| m.max(max_abs(s.as_ref()))));
    let normalized_norm = norm / margin;
    let passed = adjoint_residual <= tol && normalized_norm * tol < 1.0;
    Ok(InfeasibilityReport { margin, adjoint_residual, normalized_norm, psd_violation, tol, passed })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    /// `‖Az − b‖_∞ / (1 + ‖b‖_∞)`.
    #[serde(with = "crate::serde_float")]
    pub primal_residual: f64,
    /// Largest `max(0, −λ_min(F_j(z)))`.
    #[serde(with = "crate::serde_float")]
    pub primal_psd_violation: f64,
    /// `‖c − Aᵀy − Σ F_j*(S_j)‖_∞ / (1 + ‖c‖_∞)`.
    #[serde(with = "crate::serde_float")]
    pub dual_residual: f64,
    /// Largest `max(0, −λ_min(S_j)) / (1 + ‖S_j‖)`.
    #[serde(with = "crate::serde_float")]
    pub dual_psd_violation: f64,
    #[serde(with = "crate::serde_float")]
    pub primal_objective: f64,
    #[serde(with = "crate::serde_float")]
    pub dual_objective: f64,
    /// `|p − d| / (1 + |p| + |d|)`.
    #[serde(with = "crate::serde_float")]
    pub relative_gap: f64,
    /// `|Σ⟨F_j(z), S_j⟩| / (1 + |p| + |d|)`.
    #[serde(with = "crate::serde_float")]
    pub complementarity: f64,
    pub tol: f64,
    pub passed: bool,
}

impl fmt::Display for OptimalityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "pres {:.3e}, psd {:.3e}, dres {:.3e}, dual psd {:.3e}, gap {:.3e}, compl {:.3e} (tol {:.1e}) -> {}",
            self.primal_residual,
            self.primal_psd_violation,
            self.dual_residual,
            self.dual_psd_violation,
            self.relative_gap,
            self.complementarity,
            self.tol,
            if self.passed { "pass" } else { "fail" }
        )
    }
}

/// Recomputes primal feasibility, dual feasibility and complementarity of
/// `(outcome.z, outcome.y, outcome.s)` from the program data.
pub fn verify_optimum(prog: &ConicProgram, outcome: &ConicOutcome, tol: f64) -> OptimalityReport {
    let shapes_ok = outcome.z.len() == prog.num_vars
        && outcome.y.len() == prog.equalities.len()
        && outcome.s.len() == prog.blocks.len()
        && outcome.s.iter().zip(&prog.blocks).all(|(s, b)| s.nrows() == b.size && s.ncols() == b.size);
    if !shapes_ok {
        return OptimalityReport {
            primal_residual: f64::INFINITY,
            primal_psd_violation: f64::INFINITY,
            dual_residual: f64::INFINITY,
            dual_psd_violation: f64::INFINITY,
            primal_objective: f64::NAN,
            dual_objective: f64::NAN,
            relative_gap: f64::INFINITY,
            complementarity: f64::INFINITY,
            tol,
            passed: false,
        };
    }
    let z = &outcome.z;
    let rhs: Vec<f64> = prog.equalities.iter().map(|r| r.rhs).collect();
    let primal_residual = vec_max_abs(&prog.equality_residual(z)) / (1.0 + vec_max_abs(&rhs));

    let mut primal_psd_violation: f64 = 0.0;
    let mut dual_psd_violation: f64 = 0.0;
    let mut compl = 0.0;
    let mut const_inner = 0.0;
    for (b, s) in prog.blocks.iter().zip(&outcome.s) {
        let f = b.eval(z);
        primal_psd_violation = primal_psd_violation.max((-min_eigenvalue(f.as_ref())).max(0.0));
        dual_psd_violation =
            dual_psd_violation.max((-min_eigenvalue(s.as_ref())).max(0.0) / (1.0 + max_abs(s.as_ref())));
        compl += frob_inner(f.as_ref(), s.as_ref());
        const_inner += b.constant_inner(s);
    }
    let adj = prog.adjoint(&outcome.y, &outcome.s);
    let mut dres: f64 = 0.0;
    for (a, c) in adj.iter().zip(&prog.objective) {
        dres = dres.max((c - a).abs());
    }
    let dual_residual = dres / (1.0 + vec_max_abs(&prog.objective));
    let primal_objective = prog.objective_value(z);
    let dual_objective = dot(&rhs, &outcome.y) - const_inner;
    let denom = 1.0 + primal_objective.abs() + dual_objective.abs();
    let relative_gap = (primal_objective - dual_objective).abs() / denom;
    let complementarity = compl.abs() / denom;
    let all = [
        primal_residual,
        primal_psd_violation,
        dual_residual,
        dual_psd_violation,
        relative_gap,
        complementarity,
    ];
    let passed = all.iter().all(|v| *v <= tol);
    OptimalityReport {
        primal_residual,
        primal_psd_violation,
        dual_residual,
        dual_psd_violation,
        primal_objective,
        dual_objective,
        relative_gap,
        complementarity,
        tol,
        passed,
    }
}
