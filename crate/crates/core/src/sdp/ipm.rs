//! Homogeneous self-dual interior-point iteration with Nesterov–Todd scaling
//! and a Mehrotra predictor-corrector.
//!
//! Internally the reduced program is written as
//! `min cᵀx  s.t.  Ax = b,  Gx + s = h,  s ⪰ 0` with `G = −F_lin` and `h` the
//! constant term, and the embedding variables are `(x, y, z, s, τ, κ)`.

use faer::linalg::solvers::{Llt, Solve};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, Par, Side};

use super::presolve::Reduced;
use super::verify::{verify_infeasibility, verify_optimum};
use super::{ConicOutcome, ConicProgram, InfeasibilityCertificate, SolveStats, SolverOptions, Status};
use crate::linalg::{dot, frob_inner, max_abs, min_eigenvalue, vec_max_abs};

type Blocks = Vec<Mat<f64>>;

/// Consecutive iterations with a tiny `τ/κ` before the ratio test fires.
const TAU_KAPPA_STREAK: usize = 5;
const TAU_KAPPA_RATIO: f64 = 1e-8;

struct Problem<'a> {
    red: &'a Reduced,
    nx: usize,
    ny: usize,
    c: Vec<f64>,
    b: Vec<f64>,
    h: Blocks,
    c_scale: f64,
}

fn blk_zeros(dims: &[usize]) -> Blocks {
    dims.iter().map(|&d| Mat::zeros(d, d)).collect()
}

fn blk_inner(a: &Blocks, b: &Blocks) -> f64 {
    a.iter().zip(b).map(|(x, y)| frob_inner(x.as_ref(), y.as_ref())).sum()
}

fn blk_max_abs(a: &Blocks) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(max_abs(x.as_ref())))
}

fn mat_axpy(y: &mut Mat<f64>, alpha: f64, x: &Mat<f64>) {
    for j in 0..y.ncols() {
        for i in 0..y.nrows() {
            y[(i, j)] += alpha * x[(i, j)];
        }
    }
}

fn blk_axpy(y: &mut Blocks, alpha: f64, x: &Blocks) {
    for (a, b) in y.iter_mut().zip(x) {
        mat_axpy(a, alpha, b);
    }
}

fn vec_axpy(y: &mut [f64], alpha: f64, x: &[f64]) {
    for (a, b) in y.iter_mut().zip(x) {
        *a += alpha * b;
    }
}

fn sym(a: Mat<f64>) -> Mat<f64> {
    crate::linalg::symmetrize(&a)
}

impl<'a> Problem<'a> {
    fn new(red: &'a Reduced) -> Self {
        let c_norm = vec_max_abs(&red.c);
        let c_scale = if c_norm > 0.0 { c_norm } else { 1.0 };
        Self {
            red,
            nx: red.free.len(),
            ny: red.rows.len(),
            c: red.c.iter().map(|v| v / c_scale).collect(),
            b: red.b.clone(),
            h: red.blocks.iter().map(|b| sym(b.constant.clone())).collect(),
            c_scale,
        }
    }

    fn dims(&self) -> Vec<usize> {
        self.red.blocks.iter().map(|b| b.dim).collect()
    }

    fn a_mul(&self, x: &[f64]) -> Vec<f64> {
        self.red.a.iter().map(|row| row.iter().map(|&(v, a)| a * x[v]).sum()).collect()
    }

    fn at_mul(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nx];
        for (row, &yi) in self.red.a.iter().zip(y) {
            for &(v, a) in row {
                out[v] += a * yi;
            }
        }
        out
    }

    /// `Gx = −BᵀF_lin(x)B` per block.
    fn g_mul(&self, x: &[f64]) -> Blocks {
        self.red
            .blocks
            .iter()
            .map(|blk| {
                let mut f = Mat::<f64>::zeros(blk.full, blk.full);
                for &(r, c, v, coef) in &blk.entries {
                    let val = coef * x[v];
                    f[(r, c)] -= val;
                    if r != c {
                        f[(c, r)] -= val;
                    }
                }
                match &blk.basis {
                    Some(b) => b.transpose() * &f * b,
                    None => f,
                }
            })
            .collect()
    }

    fn gt_mul(&self, z: &Blocks) -> Vec<f64> {
        let mut out = vec![0.0; self.nx];
        for (blk, zj) in self.red.blocks.iter().zip(z) {
            let full;
            let zf = match &blk.basis {
                Some(b) => {
                    full = b * zj * b.transpose();
                    &full
                }
                None => zj,
            };
            for &(r, c, v, coef) in &blk.entries {
                let s = if r == c { zf[(r, r)] } else { zf[(r, c)] + zf[(c, r)] };
                out[v] -= coef * s;
            }
        }
        out
    }

    fn h_dot(&self, z: &Blocks) -> f64 {
        blk_inner(&self.h, z)
    }
}

/// Nesterov–Todd scaling of one block: `W = RRᵀ`, `RᵀZR = R⁻¹SR⁻ᵀ = Λ`.
struct Nt {
    r: Mat<f64>,
    rinv: Mat<f64>,
    lam: Vec<f64>,
}

fn nt_scaling(s: &Mat<f64>, z: &Mat<f64>) -> Option<Nt> {
    let n = s.nrows();
    let ls = s.llt(Side::Lower).ok()?.L().to_owned();
    let lz = z.llt(Side::Lower).ok()?.L().to_owned();
    let m = lz.transpose() * &ls;
    let svd = m.svd().ok()?;
    let sig = svd.S().column_vector();
    let mut isq = vec![0.0; n];
    let mut lam = vec![0.0; n];
    for i in 0..n {
        let v = sig[i];
        if !(v > 0.0) || !v.is_finite() {
            return None;
        }
        lam[i] = v;
        isq[i] = 1.0 / v.sqrt();
    }
    let mut r = &ls * svd.V();
    for j in 0..n {
        for i in 0..n {
            r[(i, j)] *= isq[j];
        }
    }
    // R⁻¹ = Λ^{-1/2} Uᵀ L_zᵀ
    let mut rinv = svd.U().transpose() * lz.transpose();
    for j in 0..n {
        for i in 0..n {
            rinv[(i, j)] *= isq[i];
        }
    }
    Some(Nt { r, rinv, lam })
}

/// Factorization of the reduced KKT system for a fixed scaling. The cone
/// part is handled in scaled coordinates `R⁻¹(·)R⁻ᵀ`, which keeps rounding
/// proportional to `cond(R)` instead of `cond(W)²`.
struct Kkt {
    gm: Llt<f64>,
    schur: Option<Llt<f64>>,
    rho: f64,
    rinv: Blocks,
}

fn llt_regularized(mut m: Mat<f64>) -> Option<Llt<f64>> {
    let n = m.nrows();
    if n == 0 {
        return m.llt(Side::Lower).ok();
    }
    let dmax = (0..n).fold(0.0f64, |a, i| a.max(m[(i, i)].abs())).max(f64::MIN_POSITIVE);
    let mut delta = 1e-14 * dmax;
    for attempt in 0..6 {
        if attempt > 0 {
            for i in 0..n {
                m[(i, i)] += delta;
            }
            delta *= 100.0;
        }
        if let Ok(f) = m.llt(Side::Lower) {
            return Some(f);
        }
    }
    None
}

/// Upper triangle of `Gᵀ H⁻¹ G` accumulated from one block, with
/// `wh = B W⁻¹ Bᵀ` dense in full coordinates.
fn accumulate_gm(gm: &mut Mat<f64>, by_var: &[(usize, Vec<(usize, usize, f64)>)], wh: &Mat<f64>) {
    let n = wh.nrows();
    let whc: Vec<f64> = (0..n * n).map(|k| wh[(k % n, k / n)]).collect();
    let mut u = vec![0.0; n * n];
    for (i, (alpha, ents)) in by_var.iter().enumerate() {
        for j in 0..n {
            u[j * n..j * n + j + 1].fill(0.0);
        }
        for &(p, q, coef) in ents {
            let wp = &whc[p * n..(p + 1) * n];
            let wq = &whc[q * n..(q + 1) * n];
            if p == q {
                for j in 0..n {
                    let bj = coef * wp[j];
                    let col = &mut u[j * n..j * n + j + 1];
                    for (uk, &wk) in col.iter_mut().zip(&wp[..=j]) {
                        *uk += bj * wk;
                    }
                }
            } else {
                for j in 0..n {
                    let aj = coef * wq[j];
                    let bj = coef * wp[j];
                    let col = &mut u[j * n..j * n + j + 1];
                    for ((uk, &pk), &qk) in col.iter_mut().zip(&wp[..=j]).zip(&wq[..=j]) {
                        *uk += aj * pk + bj * qk;
                    }
                }
            }
        }
        for (beta, ents_b) in &by_var[i..] {
            let mut acc = 0.0;
            for &(r, s, coef) in ents_b {
                acc += if r == s { coef * u[s * n + r] } else { 2.0 * coef * u[s * n + r] };
            }
            gm[(*alpha, *beta)] += acc;
        }
    }
}

impl Kkt {
    fn factor(p: &Problem, rinv: Blocks) -> Option<Kkt> {
        let nx = p.nx;
        let mut gm = Mat::<f64>::zeros(nx, nx);
        for (blk, ri) in p.red.blocks.iter().zip(&rinv) {
            let wi = &sym(ri.transpose() * ri);
            let wh = match &blk.basis {
                Some(b) => sym(b * wi * b.transpose()),
                None => wi.clone(),
            };
            accumulate_gm(&mut gm, &blk.by_var, &wh);
        }
        for j in 0..nx {
            for i in (j + 1)..nx {
                gm[(i, j)] = gm[(j, i)];
            }
        }
        let tr_gm: f64 = (0..nx).map(|i| gm[(i, i)]).sum();
        let tr_ata: f64 = p.red.a.iter().flat_map(|r| r.iter().map(|&(_, a)| a * a)).sum();
        let rho = if tr_ata > 0.0 {
            if tr_gm > 0.0 {
                tr_gm / tr_ata
            } else {
                1.0
            }
        } else {
            0.0
        };
        if rho > 0.0 {
            for row in &p.red.a {
                for &(i, ai) in row {
                    for &(j, aj) in row {
                        gm[(i, j)] += rho * ai * aj;
                    }
                }
            }
        }
        let gm = llt_regularized(gm)?;
        let ny = p.ny;
        let mut bt = Mat::<f64>::zeros(nx, ny);
        for (k, row) in p.red.a.iter().enumerate() {
            for &(v, a) in row {
                bt[(v, k)] += a;
            }
        }
        let schur = if ny > 0 {
            solve_lower_triangular_in_place(gm.L(), bt.as_mut(), Par::Seq);
            let s2 = bt.transpose() * &bt;
            Some(llt_regularized(sym(s2))?)
        } else {
            None
        };
        Some(Kkt { gm, schur, rho, rinv })
    }

    /// `R⁻¹ X R⁻ᵀ`.
    fn scale(&self, x: &Blocks) -> Blocks {
        x.iter().zip(&self.rinv).map(|(xj, ri)| sym(ri * xj * ri.transpose())).collect()
    }

    /// `R⁻ᵀ X R⁻¹`.
    fn unscale(&self, x: &Blocks) -> Blocks {
        x.iter().zip(&self.rinv).map(|(xj, ri)| sym(ri.transpose() * xj * ri)).collect()
    }

    fn gm_solve(&self, v: &[f64]) -> Vec<f64> {
        let rhs = Mat::from_fn(v.len(), 1, |i, _| v[i]);
        let sol = self.gm.solve(&rhs);
        (0..v.len()).map(|i| sol[(i, 0)]).collect()
    }

    /// `rzs` and the returned `dzs` are in scaled coordinates.
    fn solve_once(&self, p: &Problem, rx: &[f64], ry: &[f64], rzs: &Blocks) -> (Vec<f64>, Vec<f64>, Blocks) {
        let mut r1 = rx.to_vec();
        vec_axpy(&mut r1, 1.0, &p.gt_mul(&self.unscale(rzs)));
        if self.rho > 0.0 {
            vec_axpy(&mut r1, self.rho, &p.at_mul(ry));
        }
        let dy = match &self.schur {
            Some(s2) => {
                let t = self.gm_solve(&r1);
                let mut w = p.a_mul(&t);
                vec_axpy(&mut w, -1.0, ry);
                let rhs = Mat::from_fn(w.len(), 1, |i, _| w[i]);
                let sol = s2.solve(&rhs);
                (0..w.len()).map(|i| sol[(i, 0)]).collect()
            }
            None => Vec::new(),
        };
        let mut r2 = r1;
        if !dy.is_empty() {
            vec_axpy(&mut r2, -1.0, &p.at_mul(&dy));
        }
        let dx = self.gm_solve(&r2);
        let mut dzs = self.scale(&p.g_mul(&dx));
        blk_axpy(&mut dzs, -1.0, rzs);
        (dx, dy, dzs)
    }

    /// Solves `[0 Aᵀ Gᵀ; A 0 0; G 0 −H] (dx, dy, dz) = (rx, ry, rz)` with
    /// iterative refinement, taking `R⁻¹ rz R⁻ᵀ` and returning `Rᵀ dz R`.
    fn solve(&self, p: &Problem, rx: &[f64], ry: &[f64], rzs: &Blocks) -> (Vec<f64>, Vec<f64>, Blocks) {
        let (mut dx, mut dy, mut dzs) = self.solve_once(p, rx, ry, rzs);
        let scale = 1.0 + vec_max_abs(rx).max(vec_max_abs(ry)).max(blk_max_abs(rzs));
        for _ in 0..3 {
            let mut ex = rx.to_vec();
            vec_axpy(&mut ex, -1.0, &p.at_mul(&dy));
            vec_axpy(&mut ex, -1.0, &p.gt_mul(&self.unscale(&dzs)));
            let mut ey = ry.to_vec();
            vec_axpy(&mut ey, -1.0, &p.a_mul(&dx));
            let mut ez = rzs.clone();
            blk_axpy(&mut ez, -1.0, &self.scale(&p.g_mul(&dx)));
            blk_axpy(&mut ez, 1.0, &dzs);
            let err = vec_max_abs(&ex).max(vec_max_abs(&ey)).max(blk_max_abs(&ez));
            if err <= 1e-14 * scale {
                break;
            }
            let (cx, cy, cz) = self.solve_once(p, &ex, &ey, &ez);
            vec_axpy(&mut dx, 1.0, &cx);
            vec_axpy(&mut dy, 1.0, &cy);
            blk_axpy(&mut dzs, 1.0, &cz);
        }
        (dx, dy, dzs)
    }
}

#[derive(Clone)]
struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Blocks,
    s: Blocks,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Blocks,
    s: Blocks,
    tau: f64,
    kappa: f64,
    /// Scaled `R⁻¹ΔS R⁻ᵀ` and `RᵀΔZ R`.
    ss: Blocks,
    zs: Blocks,
}

struct Residuals {
    rx: Vec<f64>,
    ry: Vec<f64>,
    rz: Blocks,
    rt: f64,
    pres: f64,
    dres: f64,
    gap: f64,
    pcost: f64,
    dcost: f64,
    pinf: f64,
    dinf: f64,
}

fn residuals(p: &Problem, it: &Iterate) -> Residuals {
    let atyg = {
        let mut v = p.at_mul(&it.y);
        vec_axpy(&mut v, 1.0, &p.gt_mul(&it.z));
        v
    };
    let mut rx = atyg.clone();
    vec_axpy(&mut rx, it.tau, &p.c);
    let mut ry = p.a_mul(&it.x);
    let ax = ry.clone();
    vec_axpy(&mut ry, -it.tau, &p.b);
    let gx = p.g_mul(&it.x);
    let mut gxs = gx.clone();
    blk_axpy(&mut gxs, 1.0, &it.s);
    let mut rz = gxs.clone();
    blk_axpy(&mut rz, -it.tau, &p.h);
    let cx = dot(&p.c, &it.x);
    let by = dot(&p.b, &it.y);
    let hz = p.h_dot(&it.z);
    let rt = it.kappa + cx + by + hz;

    // measured in the caller's units so they agree with the independent check
    let g = p.c_scale;
    let nb = 1.0 + vec_max_abs(&p.b);
    let nh = 1.0 + blk_max_abs(&p.h);
    let nc = 1.0 + g * vec_max_abs(&p.c);
    let tau = it.tau;
    let pres = (vec_max_abs(&ry) / nb).max(blk_max_abs(&rz) / nh) / tau;
    let dres = g * vec_max_abs(&rx) / nc / tau;
    let pcost = g * cx / tau + p.red.c_offset;
    let dcost = -g * (by + hz) / tau + p.red.c_offset;
    let sz = g * blk_inner(&it.s, &it.z) / (tau * tau);
    let denom = 1.0 + pcost.abs() + dcost.abs();
    let gap = ((pcost - dcost).abs().max(sz.abs())) / denom;

    let ray_margin = -(by + hz);
    let pinf = if ray_margin > 0.0 { vec_max_abs(&atyg) / ray_margin } else { f64::INFINITY };
    let dinf = if cx < 0.0 {
        (vec_max_abs(&ax).max(blk_max_abs(&gxs))) / (-cx)
    } else {
        f64::INFINITY
    };
    Residuals { rx, ry, rz, rt, pres, dres, gap, pcost, dcost, pinf, dinf }
}

/// Largest `α` with `Λ + αΔ ⪰ 0`, using `λ^{-1/2}` congruence.
fn cone_step(lam: &[f64], d: &Mat<f64>) -> f64 {
    let n = lam.len();
    let isq: Vec<f64> = lam.iter().map(|l| 1.0 / l.sqrt()).collect();
    let m = Mat::from_fn(n, n, |i, j| 0.5 * (d[(i, j)] + d[(j, i)]) * isq[i] * isq[j]);
    let e = min_eigenvalue(m.as_ref());
    if e >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / e
    }
}

fn max_step(nts: &[Nt], it: &Iterate, d: &Direction) -> f64 {
    let mut a = f64::INFINITY;
    for (k, nt) in nts.iter().enumerate() {
        a = a.min(cone_step(&nt.lam, &d.ss[k]));
        a = a.min(cone_step(&nt.lam, &d.zs[k]));
    }
    if d.tau < 0.0 {
        a = a.min(-it.tau / d.tau);
    }
    if d.kappa < 0.0 {
        a = a.min(-it.kappa / d.kappa);
    }
    a
}

/// `U` with `λ∘U = D`, i.e. `U_ij = 2D_ij/(λ_i+λ_j)`.
fn lyap(lam: &[f64], d: &Mat<f64>) -> Mat<f64> {
    let n = lam.len();
    Mat::from_fn(n, n, |i, j| 2.0 * d[(i, j)] / (lam[i] + lam[j]))
}

struct Newton<'a> {
    p: &'a Problem<'a>,
    kkt: &'a Kkt,
    nts: &'a [Nt],
    /// Solution of `K u = (−c, b, h)`, cone part scaled.
    u2: (Vec<f64>, Vec<f64>, Blocks),
    qu2: f64,
    /// `R⁻¹ h R⁻ᵀ`, so that `⟨h, dz⟩ = ⟨hs, Rᵀ dz R⟩`.
    hs: Blocks,
}

impl<'a> Newton<'a> {
    fn new(p: &'a Problem<'a>, kkt: &'a Kkt, nts: &'a [Nt]) -> Self {
        let negc: Vec<f64> = p.c.iter().map(|v| -v).collect();
        let hs = kkt.scale(&p.h);
        let u2 = kkt.solve(p, &negc, &p.b, &hs);
        let qu2 = dot(&p.c, &u2.0) + dot(&p.b, &u2.1) + blk_inner(&hs, &u2.2);
        Self { p, kkt, nts, u2, qu2, hs }
    }

    /// `eta = 1 − σ`; `ds` is the scaled complementarity right-hand side,
    /// `dk` the right-hand side of `κΔτ + τΔκ`.
    fn direction(&self, it: &Iterate, res: &Residuals, eta: f64, ds: &Blocks, dk: f64) -> Direction {
        let p = self.p;
        let dx_rhs: Vec<f64> = res.rx.iter().map(|v| -eta * v).collect();
        let dy_rhs: Vec<f64> = res.ry.iter().map(|v| -eta * v).collect();
        let mut dz_rhs = self.kkt.scale(&res.rz);
        for m in dz_rhs.iter_mut() {
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    m[(i, j)] *= -eta;
                }
            }
        }
        let us: Blocks = self.nts.iter().zip(ds).map(|(nt, d)| lyap(&nt.lam, d)).collect();
        blk_axpy(&mut dz_rhs, -1.0, &us);
        let dtau_rhs = -eta * res.rt - dk / it.tau;
        let u1 = self.kkt.solve(p, &dx_rhs, &dy_rhs, &dz_rhs);
        let qu1 = dot(&p.c, &u1.0) + dot(&p.b, &u1.1) + blk_inner(&self.hs, &u1.2);
        let dtau = (dtau_rhs - qu1) / (self.qu2 - it.kappa / it.tau);
        let mut x = u1.0;
        vec_axpy(&mut x, dtau, &self.u2.0);
        let mut y = u1.1;
        vec_axpy(&mut y, dtau, &self.u2.1);
        let mut zs = u1.2;
        blk_axpy(&mut zs, dtau, &self.u2.2);
        let z = self.kkt.unscale(&zs);
        let dkappa = (dk - it.kappa * dtau) / it.tau;
        let mut ss = Vec::with_capacity(zs.len());
        let mut s = Vec::with_capacity(zs.len());
        for (k, nt) in self.nts.iter().enumerate() {
            let mut st = us[k].clone();
            mat_axpy(&mut st, -1.0, &zs[k]);
            let st = sym(st);
            s.push(sym(&nt.r * &st * nt.r.transpose()));
            ss.push(st);
        }
        Direction { x, y, z, s, tau: dtau, kappa: dkappa, ss, zs }
    }
}

fn shift_into_cone(m: &mut Blocks) {
    let mut worst = f64::NEG_INFINITY;
    let mut norm: f64 = 0.0;
    for b in m.iter() {
        worst = worst.max(-min_eigenvalue(b.as_ref()));
        norm = norm.max(max_abs(b.as_ref()));
    }
    if worst >= -1e-8 * norm.max(1.0) {
        for b in m.iter_mut() {
            for i in 0..b.nrows() {
                b[(i, i)] += 1.0 + worst.max(0.0);
            }
        }
    }
}

fn initial_point(p: &Problem, dims: &[usize]) -> Option<Iterate> {
    let eye: Blocks = dims.iter().map(|&d| Mat::identity(d, d)).collect();
    let kkt = Kkt::factor(p, eye)?;
    let zero_x = vec![0.0; p.nx];
    let zero_y = vec![0.0; p.ny];
    let (x, _, zp) = kkt.solve(p, &zero_x, &p.b, &p.h);
    let mut s: Blocks = zp.iter().map(|m| {
        let mut o = m.clone();
        for j in 0..o.ncols() {
            for i in 0..o.nrows() {
                o[(i, j)] = -o[(i, j)];
            }
        }
        sym(o)
    }).collect();
    let negc: Vec<f64> = p.c.iter().map(|v| -v).collect();
    let (_, y, z) = kkt.solve(p, &negc, &zero_y, &blk_zeros(dims));
    let mut z: Blocks = z.into_iter().map(sym).collect();
    shift_into_cone(&mut s);
    shift_into_cone(&mut z);
    Some(Iterate { x, y, z, s, tau: 1.0, kappa: 1.0 })
}

enum Verdict {
    Optimal { reduced: bool },
    Infeasible { reduced: bool },
    Unbounded,
}

pub(crate) fn run(prog: &ConicProgram, red: &Reduced, opts: &SolverOptions) -> ConicOutcome {
    let p = Problem::new(red);
    let dims = p.dims();
    let nu: usize = dims.iter().sum();
    let mut stats = SolveStats::default();

    let Some(mut it) = initial_point(&p, &dims) else {
        return finish(prog, &p, None, None, stats, "initial KKT factorization failed".into(), opts);
    };

    let mut streak = 0usize;
    let mut message = String::new();
    let mut verdict = None;
    let mut last_res = None;
    // best point so far by max(pres, dres, gap), for breakdowns near the end
    let mut best: Option<(f64, Iterate)> = None;
    for iter in 0..=opts.max_iter {
        stats.iterations = iter;
        let res = residuals(&p, &it);
        stats.primal_residual = res.pres;
        stats.dual_residual = res.dres;
        stats.relative_gap = res.gap;
        if opts.verbose {
            eprintln!(
                "{iter:3} pcost {:+.8e} dcost {:+.8e} gap {:.2e} pres {:.2e} dres {:.2e} tau {:.2e} kappa {:.2e}",
                res.pcost, res.dcost, res.gap, res.pres, res.dres, it.tau, it.kappa
            );
        }
        let score = res.pres.max(res.dres).max(res.gap);
        if best.as_ref().is_none_or(|(b, _)| score < *b) {
            best = Some((score, it.clone()));
        }
        if res.pres <= opts.tol_feas && res.dres <= opts.tol_feas && res.gap <= opts.tol_gap {
            verdict = Some(Verdict::Optimal { reduced: false });
            last_res = Some(res);
            break;
        }
        if res.pinf <= opts.tol_infeas {
            verdict = Some(Verdict::Infeasible { reduced: false });
            last_res = Some(res);
            break;
        }
        if res.dinf <= opts.tol_infeas {
            verdict = Some(Verdict::Unbounded);
            last_res = Some(res);
            break;
        }
        if it.tau / it.kappa < TAU_KAPPA_RATIO {
            streak += 1;
        } else {
            streak = 0;
        }
        if streak >= TAU_KAPPA_STREAK && res.pinf <= opts.tol_accept {
            verdict = Some(Verdict::Infeasible { reduced: true });
            last_res = Some(res);
            break;
        }
        if iter == opts.max_iter {
            message = format!("iteration limit {} reached", opts.max_iter);
            last_res = Some(res);
            break;
        }

        let mut nts = Vec::with_capacity(dims.len());
        for (s, z) in it.s.iter().zip(&it.z) {
            match nt_scaling(s, z) {
                Some(nt) => nts.push(nt),
                None => break,
            }
        }
        if nts.len() != dims.len() {
            message = format!("scaling breakdown at iteration {iter}");
            last_res = Some(res);
            break;
        }
        let rinv = nts.iter().map(|n| n.rinv.clone()).collect();
        let Some(kkt) = Kkt::factor(&p, rinv) else {
            message = format!("KKT factorization failed at iteration {iter}");
            last_res = Some(res);
            break;
        };
        let newton = Newton::new(&p, &kkt, &nts);
        let mu = (blk_inner(&it.s, &it.z) + it.tau * it.kappa) / (nu as f64 + 1.0);

        // predictor
        let ds_aff: Blocks = nts
            .iter()
            .map(|nt| Mat::from_fn(nt.lam.len(), nt.lam.len(), |i, j| if i == j { -nt.lam[i] * nt.lam[i] } else { 0.0 }))
            .collect();
        let aff = newton.direction(&it, &res, 1.0, &ds_aff, -it.tau * it.kappa);
        let alpha_aff = max_step(&nts, &it, &aff).min(1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // corrector
        let ds: Blocks = nts
            .iter()
            .enumerate()
            .map(|(k, nt)| {
                let n = nt.lam.len();
                let cross = &aff.ss[k] * &aff.zs[k];
                Mat::from_fn(n, n, |i, j| {
                    let diag = if i == j { -nt.lam[i] * nt.lam[i] + sigma * mu } else { 0.0 };
                    diag - 0.5 * (cross[(i, j)] + cross[(j, i)])
                })
            })
            .collect();
        let dk = -it.tau * it.kappa + sigma * mu - aff.tau * aff.kappa;
        let dir = newton.direction(&it, &res, 1.0 - sigma, &ds, dk);
        let alpha = (opts.step_fraction * max_step(&nts, &it, &dir)).min(1.0);
        if !(alpha > 1e-12) || !alpha.is_finite() {
            message = format!("step length collapsed at iteration {iter}");
            last_res = Some(res);
            break;
        }
        vec_axpy(&mut it.x, alpha, &dir.x);
        vec_axpy(&mut it.y, alpha, &dir.y);
        blk_axpy(&mut it.z, alpha, &dir.z);
        blk_axpy(&mut it.s, alpha, &dir.s);
        it.z = it.z.drain(..).map(sym).collect();
        it.s = it.s.drain(..).map(sym).collect();
        it.tau += alpha * dir.tau;
        it.kappa += alpha * dir.kappa;
    }

    let res = last_res.expect("loop always records residuals");
    if verdict.is_none() {
        // looser acceptance on stall or iteration limit
        if res.pinf <= opts.tol_accept {
            verdict = Some(Verdict::Infeasible { reduced: true });
        } else if let Some((_, b)) = best.filter(|(score, _)| *score <= opts.tol_accept) {
            let r = residuals(&p, &b);
            stats.primal_residual = r.pres;
            stats.dual_residual = r.dres;
            stats.relative_gap = r.gap;
            it = b;
            verdict = Some(Verdict::Optimal { reduced: true });
        }
    }
    finish(prog, &p, Some(&it), verdict, stats, message, opts)
}

fn finish(
    prog: &ConicProgram,
    p: &Problem,
    it: Option<&Iterate>,
    verdict: Option<Verdict>,
    mut stats: SolveStats,
    message: String,
    opts: &SolverOptions,
) -> ConicOutcome {
    let red = p.red;
    let mut out = ConicOutcome::empty(prog, Status::Indeterminate);
    stats.message = message;
    let Some(it) = it else {
        out.stats = stats;
        return out;
    };
    let expand_blocks = |zs: &Blocks, scale: f64| -> Blocks {
        let mut full: Blocks = prog.blocks.iter().map(|b| Mat::zeros(b.size, b.size)).collect();
        for (blk, zj) in red.blocks.iter().zip(zs) {
            let m = match &blk.basis {
                Some(b) => b * zj * b.transpose(),
                None => zj.clone(),
            };
            let mut m = sym(m);
            for j in 0..m.ncols() {
                for i in 0..m.nrows() {
                    m[(i, j)] *= scale;
                }
            }
            full[blk.orig] = m;
        }
        full
    };
    let x_over_tau: Vec<f64> = it.x.iter().map(|v| v / it.tau).collect();
    out.z = red.expand_primal(&x_over_tau);
    out.objective = prog.objective_value(&out.z);

    match verdict {
        Some(Verdict::Optimal { reduced }) => {
            let g = p.c_scale / it.tau;
            let s_full = expand_blocks(&it.z, g);
            let y_red: Vec<f64> = it.y.iter().map(|v| -v * g).collect();
            out.y = red.expand_dual(prog, &y_red, &s_full, true);
            out.s = s_full;
            out.status = Status::Optimal;
            stats.reduced_accuracy = reduced;
            let report = verify_optimum(prog, &out, opts.tol_accept);
            if !report.passed {
                out.status = Status::Indeterminate;
                stats.message = format!("solver converged but independent optimality check failed: {report}");
            }
        }
        Some(Verdict::Infeasible { reduced }) => {
            let margin = -(dot(&p.b, &it.y) + p.h_dot(&it.z));
            let s_full = expand_blocks(&it.z, 1.0 / margin);
            let y_red: Vec<f64> = it.y.iter().map(|v| -v / margin).collect();
            let y = red.expand_dual(prog, &y_red, &s_full, false);
            let cert = InfeasibilityCertificate { y, s: s_full };
            let report = verify_infeasibility(prog, &cert, opts.tol_accept).expect("certificate built from program");
            stats.reduced_accuracy = reduced;
            if report.passed {
                out.status = Status::Infeasible;
                out.certificate = Some(cert);
            } else {
                stats.message = format!("infeasibility ray failed independent check: {report}");
            }
        }
        Some(Verdict::Unbounded) => {
            let cx = dot(&p.c, &it.x);
            let ray: Vec<f64> = it.x.iter().map(|v| v / -cx).collect();
            let mut z = vec![0.0; prog.num_vars];
            for (i, &v) in red.free.iter().enumerate() {
                z[v] = ray[i];
            }
            out.z = z;
            out.objective = f64::NEG_INFINITY;
            out.status = Status::Unbounded;
        }
        None => {}
    }
    out.stats = stats;
    out
}
