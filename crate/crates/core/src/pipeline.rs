//! The hierarchy driver: solve relaxations of increasing order until one is
//! infeasible (not CP) or yields a flat truncation whose atoms reconstruct
//! the tensor (CP).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extraction::{check_flat, extract_atoms, fit_weights, ExtractOptions, FlatnessReport, RankTolerance};
use crate::multiindex::exact_degree_basis;
use crate::refine::{refine, RefineOptions};
use crate::relaxation::{assemble, default_degree, RelaxationSpec};
use crate::sdp::{self, InfeasibilityCertificate, InfeasibilityReport, SolveStats, SolverOptions, Status};
use crate::tensor::{residual, Decomposition, SymmetricTensor, WeightedAtom, ENTRY_TOL};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpOptions {
    /// Even degree `d > m` of the objective; defaults to the smallest such.
    pub degree: Option<u32>,
    /// Last relaxation order tried; defaults to `d/2 + 3`.
    pub k_max: Option<u32>,
    pub seed: u64,
    pub rank: RankTolerance,
    /// Tolerance on `L_h(w) = 0` and `L_{g_j}(w) ⪰ 0` in the flatness test.
    pub tol_feas: f64,
    /// Nonnegativity and sphere tolerance for the final atoms.
    pub tol_k: f64,
    /// Looser tolerance applied to raw extracted atoms before they are
    /// clamped into `K` and refined.
    pub tol_extract: f64,
    /// Polish extracted decompositions against the tensor entries.
    pub refine: bool,
    /// Accepted reconstruction error, relative to `max(1, max |a_α|)`.
    pub tol_residual: f64,
    /// Answer immediately for tensors with a negative entry.
    pub fast_path: bool,
    pub face_reduction: bool,
    pub solver: SolverOptions,
}

impl Default for CpOptions {
    fn default() -> Self {
        Self {
            degree: None,
            k_max: None,
            seed: 0,
            rank: RankTolerance::default(),
            tol_feas: 1e-6,
            tol_k: 1e-6,
            tol_extract: 1e-3,
            refine: true,
            tol_residual: 1e-6,
            fast_path: true,
            face_reduction: true,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CpStatus {
    CompletelyPositive,
    NotCompletelyPositive,
    Indeterminate,
}

#[derive(Debug, Clone)]
pub enum NotCpCertificate {
    /// An identifying-vector entry below `−1e-12`; CP tensors are entrywise nonnegative.
    NegativeEntry { tuple: Vec<usize>, value: f64 },
    /// A dual ray proving the order-`k` relaxation infeasible.
    DualRay { k: u32, certificate: InfeasibilityCertificate, report: InfeasibilityReport },
}

impl NotCpCertificate {
    pub fn kind(&self) -> &'static str {
        match self {
            NotCpCertificate::NegativeEntry { .. } => "negative-entry",
            NotCpCertificate::DualRay { .. } => "dual-ray",
        }
    }
}

/// What happened at one relaxation order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelReport {
    pub k: u32,
    pub status: Status,
    #[serde(with = "crate::serde_float")]
    pub objective: f64,
    pub stats: SolveStats,
    pub num_vars: usize,
    pub block_sizes: Vec<usize>,
    pub flatness: Vec<FlatnessReport>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CpOutcome {
    pub status: CpStatus,
    pub decomposition: Option<Decomposition>,
    /// `(k, t)` of the flat truncation that produced the decomposition.
    pub flat_level: Option<(u32, u32)>,
    pub residual: Option<f64>,
    pub certificate: Option<NotCpCertificate>,
    pub reason: Option<String>,
    pub levels: Vec<LevelReport>,
    pub order: usize,
    pub dim: usize,
    pub d: u32,
    pub options: CpOptions,
}

impl CpOutcome {
    fn new(a: &SymmetricTensor, d: u32, opts: &CpOptions, status: CpStatus) -> Self {
        Self {
            status,
            decomposition: None,
            flat_level: None,
            residual: None,
            certificate: None,
            reason: None,
            levels: Vec::new(),
            order: a.order(),
            dim: a.dim(),
            d,
            options: opts.clone(),
        }
    }
}

fn resolve_degree(m: u32, opts: &CpOptions) -> Result<(u32, u32, u32)> {
    let d = opts.degree.unwrap_or_else(|| default_degree(m));
    if d % 2 != 0 || d <= m {
        return Err(Error::InvalidOptions(format!("degree {d} must be even and greater than the order {m}")));
    }
    let k_start = d / 2;
    let k_max = opts.k_max.unwrap_or(k_start + 3);
    if k_max < k_start {
        return Err(Error::InvalidOptions(format!("k_max {k_max} below the starting order {k_start}")));
    }
    Ok((d, k_start, k_max))
}

fn check_options(opts: &CpOptions) -> Result<()> {
    for (name, v) in [
        ("rank threshold", opts.rank.threshold),
        ("tol_feas", opts.tol_feas),
        ("tol_k", opts.tol_k),
        ("tol_extract", opts.tol_extract),
        ("tol_residual", opts.tol_residual),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidOptions(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(())
}

/// The relaxation spec used at order `k`; shared with re-verification.
pub fn relaxation_spec(n: usize, m: u32, d: u32, k: u32, opts: &CpOptions) -> Result<RelaxationSpec> {
    let mut spec = RelaxationSpec::generic(n, m, Some(d), k, opts.seed)?;
    spec.face_reduction = opts.face_reduction;
    Ok(spec)
}

fn extraction_seed(seed: u64, k: u32, t: u32) -> u64 {
    seed ^ (u64::from(k) << 32) ^ (u64::from(t) << 48) ^ 0x9e37_79b9_7f4a_7c15
}

/// Decides whether `a` is completely positive.
pub fn check_cp(a: &SymmetricTensor, opts: &CpOptions) -> Result<CpOutcome> {
    check_options(opts)?;
    let m = a.order() as u32;
    let n = a.dim();
    let (d, k_start, k_max) = resolve_degree(m, opts)?;
    let mut out = CpOutcome::new(a, d, opts, CpStatus::Indeterminate);

    if opts.fast_path {
        let (alpha, value) = a.min_entry();
        if value < -ENTRY_TOL {
            out.status = CpStatus::NotCompletelyPositive;
            out.certificate = Some(NotCpCertificate::NegativeEntry { tuple: alpha.to_tuple(), value });
            return Ok(out);
        }
    }
    if a.is_zero() {
        out.status = CpStatus::CompletelyPositive;
        out.decomposition = Some(Decomposition::new(Vec::new()));
        out.residual = Some(0.0);
        return Ok(out);
    }

    let e_index = exact_degree_basis(n, m);
    let scale_ref = a.max_abs().max(1.0);
    let t_min = m.div_ceil(2);
    let mut reasons = Vec::new();
    for k in k_start..=k_max {
        let spec = relaxation_spec(n, m, d, k, opts)?;
        let relax = assemble(a.identifying_vector(), &spec)?;
        let sol = sdp::solve(&relax.program, &opts.solver)?;
        let mut level = LevelReport {
            k,
            status: sol.status,
            objective: sol.objective,
            stats: sol.stats.clone(),
            num_vars: relax.program.num_vars,
            block_sizes: relax.program.blocks.iter().map(|b| b.size).collect(),
            flatness: Vec::new(),
            notes: Vec::new(),
        };
        match sol.status {
            Status::Infeasible => {
                let cert = sol.certificate.expect("infeasible outcome carries a certificate");
                let report = sdp::verify_infeasibility(&relax.program, &cert, opts.solver.tol_accept)?;
                if report.passed {
                    out.levels.push(level);
                    out.status = CpStatus::NotCompletelyPositive;
                    out.certificate = Some(NotCpCertificate::DualRay { k, certificate: cert, report });
                    return Ok(out);
                }
                level.notes.push(format!("infeasibility certificate rejected: {report}"));
                reasons.push(format!("k={k}: certificate rejected"));
            }
            Status::Optimal => {
                let w = relax.moments(&sol.z)?;
                let target: Vec<f64> = a.identifying_vector().iter().map(|v| v / relax.scale).collect();
                for t in t_min..=k {
                    let report = check_flat(&w, t, opts.rank, opts.tol_feas);
                    let flat = report.is_flat;
                    let r = report.rank_hi;
                    level.flatness.push(report);
                    if !flat {
                        continue;
                    }
                    let xopts = ExtractOptions {
                        seed: extraction_seed(opts.seed, k, t),
                        tol_k: opts.tol_extract,
                        ..ExtractOptions::default()
                    };
                    let measure = match extract_atoms(&w, t, r, &xopts) {
                        Ok(mu) => mu,
                        Err(e) => {
                            level.notes.push(format!("t={t}: extraction failed: {e}"));
                            continue;
                        }
                    };
                    let (rho, _) = fit_weights(&measure.atoms, &target, &e_index);
                    let terms: Vec<WeightedAtom> = measure
                        .atoms
                        .iter()
                        .zip(&rho)
                        .filter(|(_, &w)| w > 0.0)
                        .map(|(u, &w)| WeightedAtom { weight: w * relax.scale, atom: u.clone() })
                        .collect();
                    let mut dec = Decomposition::new(terms);
                    if opts.refine {
                        dec = refine(a, &dec, &RefineOptions::default())?.0;
                    }
                    let res = residual(a, &dec)?;
                    if res <= opts.tol_residual * scale_ref && dec.is_valid(opts.tol_k) {
                        out.levels.push(level);
                        out.status = CpStatus::CompletelyPositive;
                        out.decomposition = Some(dec);
                        out.flat_level = Some((k, t));
                        out.residual = Some(res);
                        return Ok(out);
                    }
                    level.notes.push(format!("t={t}: {} atoms reconstruct with residual {res:.3e}", dec.len()));
                }
                reasons.push(format!("k={k}: no certified flat truncation"));
            }
            Status::Unbounded | Status::Indeterminate => {
                reasons.push(format!("k={k}: solver {:?}: {}", sol.status, sol.stats.message));
            }
        }
        out.levels.push(level);
    }
    out.reason = Some(format!("k_max = {k_max} reached; {}", reasons.join("; ")));
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeCheck {
    pub passed: bool,
    pub detail: String,
}

/// Re-checks an outcome against the tensor without trusting pipeline internals.
pub fn verify_outcome(a: &SymmetricTensor, outcome: &CpOutcome) -> OutcomeCheck {
    let ok = |detail: String| OutcomeCheck { passed: true, detail };
    let bad = |detail: String| OutcomeCheck { passed: false, detail };
    let opts = &outcome.options;
    match outcome.status {
        CpStatus::Indeterminate => ok("nothing to verify".into()),
        CpStatus::CompletelyPositive => {
            let Some(dec) = &outcome.decomposition else {
                return bad("no decomposition".into());
            };
            if dec.atoms().iter().any(|u| u.len() != a.dim()) {
                return bad("atom dimension mismatch".into());
            }
            let res = match residual(a, dec) {
                Ok(r) => r,
                Err(e) => return bad(e.to_string()),
            };
            let bound = opts.tol_residual * a.max_abs().max(1.0);
            if dec.weights().iter().any(|&w| !(w > 0.0)) {
                return bad("non-positive weight".into());
            }
            if !dec.is_valid(opts.tol_k) {
                return bad(format!("atom outside K by {:.3e}", dec.k_violation()));
            }
            if res > bound {
                return bad(format!("residual {res:.3e} exceeds {bound:.3e}"));
            }
            ok(format!("residual {res:.3e}, {} atoms in K", dec.len()))
        }
        CpStatus::NotCompletelyPositive => match &outcome.certificate {
            None => bad("no certificate".into()),
            Some(NotCpCertificate::NegativeEntry { tuple, value }) => match a.entry(tuple) {
                Ok(v) if v < -ENTRY_TOL && v == *value => ok(format!("entry {tuple:?} = {v:e}")),
                Ok(v) => bad(format!("entry {tuple:?} = {v:e} is not a negative witness")),
                Err(e) => bad(e.to_string()),
            },
            Some(NotCpCertificate::DualRay { k, certificate, .. }) => {
                let rebuilt = relaxation_spec(a.dim(), a.order() as u32, outcome.d, *k, opts)
                    .and_then(|spec| assemble(a.identifying_vector(), &spec));
                let relax = match rebuilt {
                    Ok(r) => r,
                    Err(e) => return bad(e.to_string()),
                };
                match sdp::verify_infeasibility(&relax.program, certificate, opts.solver.tol_accept) {
                    Ok(rep) if rep.passed => ok(rep.to_string()),
                    Ok(rep) => bad(rep.to_string()),
                    Err(e) => bad(e.to_string()),
                }
            }
        },
    }
}
