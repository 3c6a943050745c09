//! Equality presolve: zero rows, duplicate rows and singleton chains.
//!
//! Singleton rows fix their variable; fixing can expose new singletons, so
//! the pass repeats until nothing changes. Fixed variables move into the
//! LMI constant terms. Duals of eliminated rows are rebuilt afterwards by
//! walking the fixing order backwards.

use std::collections::BTreeMap;
use std::collections::HashMap;

use faer::Mat;

use super::{ConicProgram, InfeasibilityCertificate};

/// Relative size above which an all-fixed or duplicated row is a contradiction;
/// smaller mismatches are treated as roundoff and the row is dropped.
const CONTRADICTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowState {
    Active,
    Fixing,
    Redundant,
}

pub(crate) struct ReducedBlock {
    /// Index in the original program.
    pub orig: usize,
    /// Size of the original block.
    pub full: usize,
    /// Size the solver works with.
    pub dim: usize,
    pub basis: Option<Mat<f64>>,
    /// Reduced constant term, `dim × dim`.
    pub constant: Mat<f64>,
    /// `(row, col, reduced var, coef)` in full coordinates.
    pub entries: Vec<(usize, usize, usize, f64)>,
    /// The same entries grouped by reduced variable, ascending.
    pub by_var: Vec<(usize, Vec<(usize, usize, f64)>)>,
}

pub(crate) struct Reduced {
    pub free: Vec<usize>,
    pub fixed: Vec<Option<f64>>,
    fix_order: Vec<(usize, usize)>,
    merged: Vec<Vec<(usize, f64)>>,
    /// Original indices of rows kept in the reduced problem.
    pub rows: Vec<usize>,
    pub a: Vec<Vec<(usize, f64)>>,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub c_offset: f64,
    pub blocks: Vec<ReducedBlock>,
    pub dropped_rows: usize,
}

pub(crate) enum Presolved {
    Reduced(Reduced),
    Infeasible(InfeasibilityCertificate),
}

fn merge_row(terms: &[(usize, f64)]) -> Vec<(usize, f64)> {
    let mut acc: BTreeMap<usize, f64> = BTreeMap::new();
    for &(v, a) in terms {
        *acc.entry(v).or_insert(0.0) += a;
    }
    acc.into_iter().filter(|&(_, a)| a != 0.0).collect()
}

pub(crate) fn presolve(prog: &ConicProgram) -> Presolved {
    let n = prog.num_vars;
    let m = prog.equalities.len();
    let merged: Vec<Vec<(usize, f64)>> = prog.equalities.iter().map(|r| merge_row(&r.terms)).collect();
    let rhs: Vec<f64> = prog.equalities.iter().map(|r| r.rhs).collect();
    let mut fixed: Vec<Option<f64>> = vec![None; n];
    let mut fix_order = Vec::new();
    let mut state = vec![RowState::Active; m];

    // effective right-hand side after substituting fixed variables, with a scale
    let effective = |r: usize, fixed: &[Option<f64>]| {
        let mut val = rhs[r];
        let mut scale = rhs[r].abs();
        let mut free = Vec::new();
        for &(v, a) in &merged[r] {
            match fixed[v] {
                Some(x) => {
                    val -= a * x;
                    scale += (a * x).abs();
                }
                None => free.push((v, a)),
            }
        }
        (val, scale, free)
    };

    loop {
        let mut changed = false;
        for r in 0..m {
            if state[r] != RowState::Active {
                continue;
            }
            let (val, scale, free) = effective(r, &fixed);
            match free.len() {
                0 => {
                    if val.abs() > CONTRADICTION_TOL * (1.0 + scale) {
                        let t = val.signum();
                        return Presolved::Infeasible(certificate(prog, &merged, &fix_order, &[(r, t)]));
                    }
                    state[r] = RowState::Redundant;
                }
                1 => {
                    let (v, a) = free[0];
                    fixed[v] = Some(val / a);
                    fix_order.push((v, r));
                    state[r] = RowState::Fixing;
                    changed = true;
                }
                _ => {}
            }
        }
        if !changed {
            break;
        }
    }

    // duplicates among the remaining rows, compared after scaling by the lead coefficient
    let mut seen: HashMap<Vec<(usize, u64)>, (usize, f64, f64, f64)> = HashMap::new();
    for r in 0..m {
        if state[r] != RowState::Active {
            continue;
        }
        let (val, scale, free) = effective(r, &fixed);
        let lead = free[0].1;
        let key: Vec<(usize, u64)> = free.iter().map(|&(v, a)| (v, (a / lead).to_bits())).collect();
        match seen.get(&key) {
            None => {
                seen.insert(key, (r, lead, val, scale));
            }
            Some(&(r1, lead1, val1, scale1)) => {
                let lambda = lead / lead1;
                let diff = val - lambda * val1;
                let size = 1.0 + scale + lambda.abs() * scale1;
                if diff.abs() > CONTRADICTION_TOL * size {
                    let t = diff.signum();
                    return Presolved::Infeasible(certificate(
                        prog,
                        &merged,
                        &fix_order,
                        &[(r, t), (r1, -t * lambda)],
                    ));
                }
                state[r] = RowState::Redundant;
            }
        }
    }

    let mut pos = vec![usize::MAX; n];
    let mut free_vars = Vec::new();
    for v in 0..n {
        if fixed[v].is_none() {
            pos[v] = free_vars.len();
            free_vars.push(v);
        }
    }
    let mut rows = Vec::new();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for r in 0..m {
        if state[r] != RowState::Active {
            continue;
        }
        let (val, _, free) = effective(r, &fixed);
        rows.push(r);
        a.push(free.iter().map(|&(v, c)| (pos[v], c)).collect());
        b.push(val);
    }
    let c: Vec<f64> = free_vars.iter().map(|&v| prog.objective[v]).collect();
    let c_offset: f64 = (0..n).filter_map(|v| fixed[v].map(|x| x * prog.objective[v])).sum();

    let mut blocks = Vec::new();
    for (j, blk) in prog.blocks.iter().enumerate() {
        let mut constant = Mat::<f64>::zeros(blk.size, blk.size);
        let put = |m: &mut Mat<f64>, r: usize, c: usize, v: f64| {
            m[(r, c)] += v;
            if r != c {
                m[(c, r)] += v;
            }
        };
        for &(r, c, v) in &blk.constant {
            put(&mut constant, r, c, v);
        }
        let mut entries = Vec::new();
        let mut groups: BTreeMap<usize, Vec<(usize, usize, f64)>> = BTreeMap::new();
        for e in &blk.entries {
            match fixed[e.var] {
                Some(x) => put(&mut constant, e.row, e.col, e.coef * x),
                None => {
                    entries.push((e.row, e.col, pos[e.var], e.coef));
                    groups.entry(pos[e.var]).or_default().push((e.row, e.col, e.coef));
                }
            }
        }
        let (dim, constant) = match &blk.range_basis {
            Some(basis) => (basis.ncols(), basis.transpose() * &constant * basis),
            None => (blk.size, constant),
        };
        if dim == 0 {
            continue;
        }
        blocks.push(ReducedBlock {
            orig: j,
            full: blk.size,
            dim,
            basis: blk.range_basis.clone(),
            constant,
            entries,
            by_var: groups.into_iter().collect(),
        });
    }

    let dropped_rows = state.iter().filter(|&&s| s == RowState::Redundant).count();
    Presolved::Reduced(Reduced {
        free: free_vars,
        fixed,
        fix_order,
        merged,
        rows,
        a,
        b,
        c,
        c_offset,
        blocks,
        dropped_rows,
    })
}

/// Builds `y` from a starting combination of rows so that `Aᵀy` vanishes
/// on every fixed variable. Starting rows must have no free variables left.
fn certificate(
    prog: &ConicProgram,
    merged: &[Vec<(usize, f64)>],
    fix_order: &[(usize, usize)],
    start: &[(usize, f64)],
) -> InfeasibilityCertificate {
    let mut y = vec![0.0; merged.len()];
    for &(r, t) in start {
        y[r] += t;
    }
    let mut g = vec![0.0; prog.num_vars];
    for &(r, t) in start {
        for &(v, a) in &merged[r] {
            g[v] += a * t;
        }
    }
    back_substitute(merged, fix_order, &mut y, &mut g);
    InfeasibilityCertificate {
        y,
        s: prog.blocks.iter().map(|b| Mat::zeros(b.size, b.size)).collect(),
    }
}

fn back_substitute(merged: &[Vec<(usize, f64)>], fix_order: &[(usize, usize)], y: &mut [f64], g: &mut [f64]) {
    for &(v, r) in fix_order.iter().rev() {
        let a = merged[r].iter().find(|&&(w, _)| w == v).map(|&(_, a)| a).unwrap_or(1.0);
        let yr = -g[v] / a;
        y[r] = yr;
        for &(w, aw) in &merged[r] {
            g[w] += aw * yr;
        }
    }
}

impl Reduced {
    pub fn fixed_count(&self) -> usize {
        self.fix_order.len()
    }

    /// Full-length primal vector from the reduced one.
    pub fn expand_primal(&self, x: &[f64]) -> Vec<f64> {
        let mut z: Vec<f64> = self.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        for (i, &v) in self.free.iter().enumerate() {
            z[v] = x[i];
        }
        z
    }

    /// Original-row duals. With `with_objective` the rebuilt rows make
    /// `Aᵀy + F*(S) = c` hold on fixed variables, otherwise `= 0`.
    pub fn expand_dual(&self, prog: &ConicProgram, y_red: &[f64], s: &[Mat<f64>], with_objective: bool) -> Vec<f64> {
        let mut y = vec![0.0; self.merged.len()];
        for (i, &r) in self.rows.iter().enumerate() {
            y[r] = y_red[i];
        }
        let mut g = prog.adjoint(&y, s);
        if with_objective {
            for (gv, cv) in g.iter_mut().zip(&prog.objective) {
                *gv -= cv;
            }
        }
        back_substitute(&self.merged, &self.fix_order, &mut y, &mut g);
        y
    }
}
