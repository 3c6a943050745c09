//! Dense primal-dual interior-point solver for linear objectives under linear
//! equalities and linear matrix inequalities.
//!
//! The program is
//!
//! ```text
//!   minimize    cᵀz
//!   subject to  A z = b
//!               F_j(z) = C_j + Σ_α z_α F_{j,α} ⪰ 0     (j = 1..p)
//! ```
//!
//! with `z` free. Its dual is `maximize bᵀy − Σ⟨C_j, S_j⟩` over `S_j ⪰ 0`
//! with `Aᵀy + Σ F_j*(S_j) = c`. The solver runs on the homogeneous
//! self-dual embedding, so an infeasible program yields a dual ray
//! `(y, S)` with `Aᵀy + Σ F_j*(S_j) = 0` and `bᵀy − Σ⟨C_j, S_j⟩ > 0`.

mod dump;
mod ipm;
mod presolve;
mod verify;

use web_time::Instant;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moment::MapEntry;

pub use dump::{read_dump, write_dump};
pub use verify::{verify_infeasibility, verify_optimum, InfeasibilityReport, OptimalityReport};

/// A sparse equality row `Σ coef·z_var = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct EqualityRow {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// One affine symmetric matrix block. Triplets are stored for the upper
/// triangle (`row <= col`); an off-diagonal triplet fills both mirror cells.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub size: usize,
    pub constant: Vec<(usize, usize, f64)>,
    pub entries: Vec<MapEntry>,
    /// Optional orthonormal basis `B` (size × r) of a subspace known to
    /// contain the range of `F(z)` for every feasible `z`. The solver then
    /// works with `BᵀF(z)B`; duals are mapped back as `B S̃ Bᵀ`.
    pub range_basis: Option<Mat<f64>>,
}

impl LmiBlock {
    pub fn new(size: usize, entries: Vec<MapEntry>) -> Self {
        Self { size, constant: Vec::new(), entries, range_basis: None }
    }

    pub fn with_constant(mut self, constant: Vec<(usize, usize, f64)>) -> Self {
        self.constant = constant;
        self
    }

    /// Evaluates `F(z)` as a dense symmetric matrix.
    pub fn eval(&self, z: &[f64]) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.size, self.size);
        for &(r, c, v) in &self.constant {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        }
        for e in &self.entries {
            let v = e.coef * z[e.var];
            m[(e.row, e.col)] += v;
            if e.row != e.col {
                m[(e.col, e.row)] += v;
            }
        }
        m
    }

    /// Evaluates only the linear part of the map.
    pub fn eval_linear(&self, z: &[f64]) -> Mat<f64> {
        let mut m = Mat::<f64>::zeros(self.size, self.size);
        for e in &self.entries {
            let v = e.coef * z[e.var];
            m[(e.row, e.col)] += v;
            if e.row != e.col {
                m[(e.col, e.row)] += v;
            }
        }
        m
    }

    /// Adds `F*(S)` into `out`, i.e. `out[α] += ⟨F_α, S⟩`.
    pub fn add_adjoint(&self, s: &Mat<f64>, out: &mut [f64]) {
        for e in &self.entries {
            let v = if e.row == e.col { s[(e.row, e.row)] } else { s[(e.row, e.col)] + s[(e.col, e.row)] };
            out[e.var] += e.coef * v;
        }
    }

    /// `⟨C, S⟩`.
    pub fn constant_inner(&self, s: &Mat<f64>) -> f64 {
        self.constant
            .iter()
            .map(|&(r, c, v)| if r == c { v * s[(r, r)] } else { v * (s[(r, c)] + s[(c, r)]) })
            .sum()
    }
}

/// `minimize cᵀz` subject to equalities and LMI blocks.
#[derive(Debug, Clone)]
pub struct ConicProgram {
    pub num_vars: usize,
    pub objective: Vec<f64>,
    pub equalities: Vec<EqualityRow>,
    pub blocks: Vec<LmiBlock>,
}

impl ConicProgram {
    pub fn new(num_vars: usize, objective: Vec<f64>) -> Self {
        Self { num_vars, objective, equalities: Vec::new(), blocks: Vec::new() }
    }

    pub fn add_equality(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.equalities.push(EqualityRow { terms, rhs });
    }

    pub fn add_block(&mut self, block: LmiBlock) {
        self.blocks.push(block);
    }

    /// Checks index ranges, triangle convention and finiteness.
    pub fn validate(&self) -> Result<()> {
        if self.objective.len() != self.num_vars {
            return Err(Error::DimensionMismatch { expected: self.num_vars, found: self.objective.len() });
        }
        let finite = |v: f64, what: &str| -> Result<()> {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Format(format!("non-finite {what} coefficient {v}")))
            }
        };
        for &c in &self.objective {
            finite(c, "objective")?;
        }
        for row in &self.equalities {
            finite(row.rhs, "equality right-hand side")?;
            for &(v, a) in &row.terms {
                if v >= self.num_vars {
                    return Err(Error::IndexOutOfRange { index: v, dim: self.num_vars });
                }
                finite(a, "equality")?;
            }
        }
        for (j, b) in self.blocks.iter().enumerate() {
            for &(r, c, v) in &b.constant {
                if r > c || c >= b.size {
                    return Err(Error::Format(format!("block {j}: bad constant cell ({r},{c})")));
                }
                finite(v, "constant")?;
            }
            for e in &b.entries {
                if e.row > e.col || e.col >= b.size {
                    return Err(Error::Format(format!("block {j}: bad cell ({},{})", e.row, e.col)));
                }
                if e.var >= self.num_vars {
                    return Err(Error::IndexOutOfRange { index: e.var, dim: self.num_vars });
                }
                finite(e.coef, "block")?;
            }
            if let Some(basis) = &b.range_basis {
                if basis.nrows() != b.size {
                    return Err(Error::DimensionMismatch { expected: b.size, found: basis.nrows() });
                }
            }
        }
        Ok(())
    }

    /// `A z − b`.
    pub fn equality_residual(&self, z: &[f64]) -> Vec<f64> {
        self.equalities
            .iter()
            .map(|row| row.terms.iter().map(|&(v, a)| a * z[v]).sum::<f64>() - row.rhs)
            .collect()
    }

    /// `Aᵀy + Σ F_j*(S_j)`.
    pub fn adjoint(&self, y: &[f64], s: &[Mat<f64>]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_vars];
        for (row, &yi) in self.equalities.iter().zip(y) {
            for &(v, a) in &row.terms {
                out[v] += a * yi;
            }
        }
        for (b, sj) in self.blocks.iter().zip(s) {
            b.add_adjoint(sj, &mut out);
        }
        out
    }

    pub fn objective_value(&self, z: &[f64]) -> f64 {
        crate::linalg::dot(&self.objective, z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Target relative primal/dual residual.
    pub tol_feas: f64,
    /// Target relative duality gap.
    pub tol_gap: f64,
    /// Looser level accepted (with `reduced_accuracy` set) when the target stalls.
    pub tol_accept: f64,
    /// Residual bound for declaring infeasibility from a normalized ray.
    pub tol_infeas: f64,
    pub max_iter: usize,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
    pub verbose: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tol_feas: 1e-8,
            tol_gap: 1e-8,
            tol_accept: 1e-7,
            tol_infeas: 1e-8,
            max_iter: 200,
            step_fraction: 0.99,
            verbose: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    Indeterminate,
}

/// Dual improving ray proving primal infeasibility.
#[derive(Debug, Clone)]
pub struct InfeasibilityCertificate {
    pub y: Vec<f64>,
    pub s: Vec<Mat<f64>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub seconds: f64,
    #[serde(with = "crate::serde_float")]
    pub primal_residual: f64,
    #[serde(with = "crate::serde_float")]
    pub dual_residual: f64,
    #[serde(with = "crate::serde_float")]
    pub relative_gap: f64,
    /// Set when the result only met `tol_accept`.
    pub reduced_accuracy: bool,
    pub fixed_vars: usize,
    pub dropped_rows: usize,
    pub message: String,
}

#[derive(Debug, Clone)]
pub struct ConicOutcome {
    pub status: Status,
    pub z: Vec<f64>,
    pub objective: f64,
    pub y: Vec<f64>,
    pub s: Vec<Mat<f64>>,
    pub certificate: Option<InfeasibilityCertificate>,
    pub stats: SolveStats,
}

impl ConicOutcome {
    fn empty(prog: &ConicProgram, status: Status) -> Self {
        Self {
            status,
            z: vec![0.0; prog.num_vars],
            objective: f64::NAN,
            y: vec![0.0; prog.equalities.len()],
            s: prog.blocks.iter().map(|b| Mat::zeros(b.size, b.size)).collect(),
            certificate: None,
            stats: SolveStats::default(),
        }
    }
}

/// Solves the program. Numerical trouble is reported as `Indeterminate`
/// with a message; malformed programs are errors.
pub fn solve(prog: &ConicProgram, opts: &SolverOptions) -> Result<ConicOutcome> {
    prog.validate()?;
    if !(opts.tol_feas > 0.0 && opts.tol_gap > 0.0 && opts.tol_accept > 0.0 && opts.tol_infeas > 0.0) {
        return Err(Error::InvalidOptions("solver tolerances must be positive".into()));
    }
    if !(opts.step_fraction > 0.0 && opts.step_fraction < 1.0) {
        return Err(Error::InvalidOptions("step fraction must lie in (0, 1)".into()));
    }
    let start = Instant::now();
    let pre = presolve::presolve(prog);
    let mut out = match pre {
        presolve::Presolved::Infeasible(cert) => {
            let mut out = ConicOutcome::empty(prog, Status::Infeasible);
            out.certificate = Some(cert);
            out.stats.message = "presolve found contradictory equalities".into();
            out
        }
        presolve::Presolved::Reduced(red) => {
            let mut out = ipm::run(prog, &red, opts);
            out.stats.fixed_vars = red.fixed_count();
            out.stats.dropped_rows = red.dropped_rows;
            out
        }
    };
    out.stats.seconds = start.elapsed().as_secs_f64();
    Ok(out)
}
