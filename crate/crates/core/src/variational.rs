//! The discrete weighted functional, its constrained gradient, the discrete
//! Cauchy condition and the minimizer.
//!
//! On a rescaled grid the functional is
//! `I_ε(u) = ∬ e^{-t} (|∂_t²u|² + ε²|∇u|²)`, on a physical grid
//! `E_ε(v) = ∬ (e^{-t/ε}/ε) (ε|∂_t²v|² + ε^{-1}|∇v|²)`. Both are evaluated as
//! `V Σ_j Σ_i (α μ_j |D2 u|² + β ω_j Σ_a |D_a u|²)` with `V` the spatial cell
//! volume, `ω_j` the weighted trapezoid weight and `μ_j = dt·w(t_j)` on the
//! interior slices only. `D2` is the centred second difference.
//!
//! Leaving the one-sided rows at the two ends out of the inertia sum keeps the
//! discrete Euler–Lagrange equations next to the fixed slices a consistent
//! fourth difference; a one-sided row at `t = 0` would add an `O(dt)` term
//! that forces `∂_t²u(0) ≈ 0` and a boundary layer.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{comparison_map, CauchyData, GeometryError, TargetManifold};
use crate::mesh::{d2t_row, grad_axis_values, Grid, GridError, SpaceTimeField, TimeScale};
use crate::precond::Preconditioner;

/// Slices 0 and 1 carry the Cauchy data and never move.
pub const FIXED_SLICES: usize = 2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VariationalError {
    #[error("functional is not finite ({0})")]
    NonFiniteEnergy(String),
    #[error("velocity at node {node} is not tangent (defect {defect:.3e})")]
    TangencyViolation { node: usize, defect: f64 },
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("preconditioner factorization failed")]
    Preconditioner,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FunctionalValue {
    pub total: f64,
    /// `∬ w α |∂_t²u|²`.
    pub inertia_part: f64,
    /// `∬ w β |∇u|²`.
    pub dirichlet_part: f64,
    pub eps: f64,
}

/// `(α, β)` multiplying the inertia and Dirichlet densities.
pub fn coefficients(scale: TimeScale, eps: f64) -> (f64, f64) {
    match scale {
        TimeScale::Rescaled => (1.0, eps * eps),
        TimeScale::Physical => (eps, 1.0 / eps),
    }
}

/// Everything needed to evaluate the functional on raw values.
#[derive(Clone, Debug)]
pub(crate) struct Functional {
    pub grid: Grid,
    pub dim: usize,
    pub alpha: f64,
    pub beta: f64,
    /// `μ_j`, weights of the second-difference rows.
    pub mu: Vec<f64>,
    /// `ω_j`, trapezoid times weight.
    pub omega: Vec<f64>,
}

impl Functional {
    pub fn new(grid: &Grid, dim: usize, eps: f64) -> Self {
        let (alpha, beta) = coefficients(grid.time_scale, eps);
        let mu = (0..grid.slices()).map(|j| grid.inertia_weight(j, eps)).collect();
        let omega = (0..grid.slices()).map(|j| grid.quadrature_weight(j, eps)).collect();
        Self {
            grid: *grid,
            dim,
            alpha,
            beta,
            mu,
            omega,
        }
    }

    fn slice_len(&self) -> usize {
        self.grid.points() * self.dim
    }

    /// Centred `D2 x` on interior slice `j`, written into `out`.
    fn d2_slice(&self, x: &[f64], j: usize, out: &mut [f64]) {
        let len = self.slice_len();
        let inv = 1.0 / (self.grid.dt * self.grid.dt);
        let (a, b, c) = (&x[(j - 1) * len..j * len], &x[j * len..(j + 1) * len], &x[(j + 1) * len..(j + 2) * len]);
        for (o, ((p, q), r)) in out.iter_mut().zip(a.iter().zip(b).zip(c)) {
            *o = (p - 2.0 * q + r) * inv;
        }
    }

    /// Per-slice `(Σ ⟨D2 a, D2 b⟩, Σ_a ⟨D_a a, D_a b⟩)`.
    fn slice_pairings(&self, a: &[f64], b: &[f64]) -> Vec<(f64, f64)> {
        let len = self.slice_len();
        let torus = self.grid.torus;
        let same = std::ptr::eq(a, b);
        (0..self.grid.slices())
            .into_par_iter()
            .map(|j| {
                let inert = if j == 0 || j == self.grid.nt {
                    0.0
                } else {
                    let mut da = vec![0.0; len];
                    self.d2_slice(a, j, &mut da);
                    if same {
                        da.iter().map(|v| v * v).sum()
                    } else {
                        let mut db = vec![0.0; len];
                        self.d2_slice(b, j, &mut db);
                        da.iter().zip(&db).map(|(x, y)| x * y).sum()
                    }
                };
                let sa = &a[j * len..(j + 1) * len];
                let sb = &b[j * len..(j + 1) * len];
                let mut dir = 0.0;
                for axis in 0..torus.dim() {
                    let ga = grad_axis_values(&torus, self.dim, sa, axis);
                    if same {
                        dir += ga.iter().map(|v| v * v).sum::<f64>();
                    } else {
                        let gb = grad_axis_values(&torus, self.dim, sb, axis);
                        dir += ga.iter().zip(&gb).map(|(x, y)| x * y).sum::<f64>();
                    }
                }
                (inert, dir)
            })
            .collect()
    }

    /// `(inertia, dirichlet)` of the bilinear form at `(a, b)`.
    fn bilinear(&self, a: &[f64], b: &[f64]) -> (f64, f64) {
        let vol = self.grid.torus.cell_volume();
        let mut inertia = 0.0;
        let mut dirichlet = 0.0;
        for (j, (i, d)) in self.slice_pairings(a, b).into_iter().enumerate() {
            inertia += self.mu[j] * vol * self.alpha * i;
            dirichlet += self.omega[j] * vol * self.beta * d;
        }
        (inertia, dirichlet)
    }

    pub fn value(&self, x: &[f64]) -> (f64, f64) {
        self.bilinear(x, x)
    }

    /// `F(y) − F(x)` computed as `B(y − x, y + x)`, free of cancellation.
    pub fn difference(&self, x: &[f64], y: &[f64]) -> f64 {
        let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let sum: Vec<f64> = y.iter().zip(x).map(|(a, b)| a + b).collect();
        let (i, d) = self.bilinear(&diff, &sum);
        i + d
    }

    /// Gradient of the functional with respect to every ambient nodal value.
    pub fn ambient_gradient(&self, x: &[f64]) -> Vec<f64> {
        let len = self.slice_len();
        let nt = self.grid.nt;
        let vol2 = 2.0 * self.grid.torus.cell_volume();
        let inv_dt2 = 1.0 / (self.grid.dt * self.grid.dt);
        let torus = self.grid.torus;
        // A_r = α μ_r (D2 x)_r on interior rows
        let mut weighted = vec![0.0; x.len()];
        weighted
            .par_chunks_mut(len)
            .enumerate()
            .filter(|(r, _)| *r > 0 && *r < nt)
            .for_each(|(r, out)| {
                self.d2_slice(x, r, out);
                let s = self.alpha * self.mu[r];
                out.iter_mut().for_each(|v| *v *= s);
            });
        let mut grad = vec![0.0; x.len()];
        grad.par_chunks_mut(len).enumerate().for_each(|(j, out)| {
            for r in j.saturating_sub(1).max(1)..=(j + 1).min(nt - 1) {
                let c = if r == j { -2.0 } else { 1.0 } * inv_dt2;
                let src = &weighted[r * len..(r + 1) * len];
                for (o, s) in out.iter_mut().zip(src) {
                    *o += c * s;
                }
            }
            let slice = &x[j * len..(j + 1) * len];
            let s = self.beta * self.omega[j];
            for axis in 0..torus.dim() {
                let g = grad_axis_values(&torus, self.dim, slice, axis);
                let gg = grad_axis_values(&torus, self.dim, &g, axis);
                for (o, v) in out.iter_mut().zip(gg) {
                    *o -= s * v;
                }
            }
            out.iter_mut().for_each(|v| *v *= vol2);
        });
        grad
    }
}

/// Discrete functional of `u`, in `I_ε` or `E_ε` form according to its time scale.
pub fn evaluate(u: &SpaceTimeField, eps: f64) -> Result<FunctionalValue, VariationalError> {
    let f = Functional::new(&u.grid, u.dim(), eps);
    let (inertia, dirichlet) = f.value(&u.values);
    let total = inertia + dirichlet;
    if !total.is_finite() {
        return Err(VariationalError::NonFiniteEnergy(format!(
            "inertia {inertia}, dirichlet {dirichlet}"
        )));
    }
    Ok(FunctionalValue {
        total,
        inertia_part: inertia,
        dirichlet_part: dirichlet,
        eps,
    })
}

/// `evaluate(v) − evaluate(u)` without cancellation.
pub fn functional_difference(u: &SpaceTimeField, v: &SpaceTimeField, eps: f64) -> f64 {
    Functional::new(&u.grid, u.dim(), eps).difference(&u.values, &v.values)
}

/// Gradient of the discrete functional with respect to the ambient nodal values.
pub fn ambient_gradient(u: &SpaceTimeField, eps: f64) -> Vec<f64> {
    Functional::new(&u.grid, u.dim(), eps).ambient_gradient(&u.values)
}

fn project_gradient(target: &TargetManifold, values: &[f64], grad: &mut [f64], fixed_len: usize) {
    let dim = target.ambient_dim();
    grad[..fixed_len].iter_mut().for_each(|v| *v = 0.0);
    grad[fixed_len..]
        .par_chunks_mut(dim * 64)
        .zip(values[fixed_len..].par_chunks(dim * 64))
        .for_each(|(g, p)| {
            for (gn, pn) in g.chunks_exact_mut(dim).zip(p.chunks_exact(dim)) {
                target.tangent_project_in_place(pn, gn);
            }
        });
}

/// Ambient gradient projected onto the tangent space at every node, zero on
/// the two fixed initial slices.
pub fn tangent_gradient(u: &SpaceTimeField, eps: f64) -> Vec<f64> {
    let mut g = ambient_gradient(u, eps);
    project_gradient(&u.target, &u.values, &mut g, FIXED_SLICES * u.slice_len());
    g
}

fn check_data(u: &SpaceTimeField, data: &CauchyData) -> Result<(), VariationalError> {
    if u.grid.nt < 4 {
        return Err(GridError::TooFewSlices(u.grid.nt).into());
    }
    if u.grid.torus != data.torus {
        return Err(VariationalError::GridMismatch(
            "field and data live on different tori".into(),
        ));
    }
    if u.target != data.target {
        return Err(VariationalError::GridMismatch(
            "field and data have different targets".into(),
        ));
    }
    let d = data.dim();
    for i in 0..data.torus.points() {
        let p = data.phi_at(i);
        let defect = data.target.tangency_defect(p, data.psi_at(i));
        if !(defect <= 1e-10) {
            return Err(VariationalError::TangencyViolation { node: i, defect });
        }
        debug_assert_eq!(p.len(), d);
    }
    Ok(())
}

/// Prescribed `∂_t` at `t = 0` in the field's own time units.
fn initial_velocity_scale(grid: &Grid, eps: f64) -> f64 {
    match grid.time_scale {
        TimeScale::Rescaled => eps,
        TimeScale::Physical => 1.0,
    }
}

/// Sets slice 0 to `φ` and slice 1 to `R(φ + dt·v₀)` where `v₀` is `εψ` on a
/// rescaled grid and `ψ` on a physical one.
pub fn enforce_cauchy(u: &SpaceTimeField, data: &CauchyData, eps: f64) -> Result<SpaceTimeField, VariationalError> {
    enforce_cauchy_with_acceleration(u, data, eps, None)
}

/// As [`enforce_cauchy`], with slice 1 set to `R(φ + dt·v₀ + dt²/2·a)` for a
/// tangent acceleration estimate `a` (one ambient vector per spatial node).
/// With the acceleration of the solution this makes the one-sided velocity at
/// `t = 0` second-order accurate.
pub fn enforce_cauchy_with_acceleration(
    u: &SpaceTimeField,
    data: &CauchyData,
    eps: f64,
    accel: Option<&[f64]>,
) -> Result<SpaceTimeField, VariationalError> {
    check_data(u, data)?;
    let mut out = u.clone();
    out.slice_mut(0).copy_from_slice(&data.phi);
    let dt = u.grid.dt;
    let vs = initial_velocity_scale(&u.grid, eps);
    let d = data.dim();
    let mut y = vec![0.0; d];
    let slice1 = out.slice_mut(1);
    for i in 0..data.torus.points() {
        let p = data.phi_at(i);
        let q = data.psi_at(i);
        for c in 0..d {
            y[c] = p[c] + dt * vs * q[c];
            if let Some(a) = accel {
                y[c] += 0.5 * dt * dt * a[i * d + c];
            }
        }
        data.target.project_into(&y, &mut slice1[i * d..(i + 1) * d])?;
    }
    Ok(out)
}

/// Tangent part (at `φ`) of the one-sided `∂_t²` at `t = 0`.
pub fn initial_acceleration(u: &SpaceTimeField) -> Vec<f64> {
    let d = u.dim();
    let len = u.slice_len();
    let dt2 = u.grid.dt * u.grid.dt;
    let mut a = vec![0.0; len];
    let st = d2t_row(0, u.grid.nt);
    for (k, &c) in st.coeffs.iter().enumerate() {
        for (o, v) in a.iter_mut().zip(u.slice(st.first + k)) {
            *o += c * v / dt2;
        }
    }
    let phi = u.slice(0);
    for (an, p) in a.chunks_exact_mut(d).zip(phi.chunks_exact(d)) {
        u.target.tangent_project_in_place(p, an);
    }
    a
}

/// The comparison map sampled on every slice of `grid`.
pub fn comparison_field(data: &CauchyData, grid: &Grid, eps: f64) -> SpaceTimeField {
    let rescale = match grid.time_scale {
        TimeScale::Rescaled => 1.0,
        TimeScale::Physical => 1.0 / eps,
    };
    SpaceTimeField::from_slices(*grid, data.target, |j| comparison_map(data, eps, grid.time(j) * rescale))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeOptions {
    pub max_iter: usize,
    /// Stop once the preconditioned tangent-gradient norm drops below this
    /// fraction of `sqrt(2F)` at the initial field.
    pub grad_tol: f64,
    pub armijo_c1: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Number of stored curvature pairs; 0 gives preconditioned gradient descent.
    pub memory: usize,
    /// Re-solves after refreshing slice 1 with the acceleration of the current
    /// minimizer.
    pub cauchy_corrections: usize,
    /// Amplitude of the random tangent perturbation of the initializer.
    pub perturb: f64,
    pub seed: u64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            grad_tol: 1e-8,
            armijo_c1: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            memory: 8,
            cauchy_corrections: 2,
            perturb: 0.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    GradientTol,
    MaxIter,
    LineSearchFail,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub iteration: usize,
    /// Cauchy correction pass the step belongs to.
    pub pass: usize,
    pub value: FunctionalValue,
    /// Preconditioned tangent-gradient norm relative to `sqrt(2F)` at the initial field.
    pub grad_norm: f64,
    pub max_constraint_defect: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MinimizeReport {
    pub field: SpaceTimeField,
    pub history: Vec<HistoryEntry>,
    pub termination: Termination,
    pub wall_time: f64,
    pub final_value: FunctionalValue,
    pub initial_value: FunctionalValue,
    /// Functional of the comparison map the solve started from.
    pub comparison_value: FunctionalValue,
    pub iterations: usize,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.par_chunks(4096)
        .zip(b.par_chunks(4096))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

struct Solver<'a> {
    f: Functional,
    target: TargetManifold,
    pre: Preconditioner,
    opts: &'a MinimizeOptions,
    fixed_len: usize,
    eps: f64,
}

struct PassOutcome {
    termination: Termination,
    iterations: usize,
}

impl Solver<'_> {
    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.f.ambient_gradient(x);
        project_gradient(&self.target, x, &mut g, self.fixed_len);
        g
    }

    fn precondition(&self, x: &[f64], v: &[f64]) -> Vec<f64> {
        let mut h = self.pre.apply(v);
        project_gradient(&self.target, x, &mut h, self.fixed_len);
        h
    }

    fn retract(&self, x: &[f64], d: &[f64], tau: f64) -> Result<Vec<f64>, GeometryError> {
        let dim = self.target.ambient_dim();
        let mut y = x.to_vec();
        let target = self.target;
        y[self.fixed_len..]
            .par_chunks_mut(dim * 64)
            .zip(d[self.fixed_len..].par_chunks(dim * 64))
            .try_for_each(|(yc, dc)| -> Result<(), GeometryError> {
                let mut tmp = vec![0.0; dim];
                for (yn, dn) in yc.chunks_exact_mut(dim).zip(dc.chunks_exact(dim)) {
                    for c in 0..dim {
                        tmp[c] = yn[c] + tau * dn[c];
                    }
                    target.project_into(&tmp, yn)?;
                }
                Ok(())
            })?;
        Ok(y)
    }

    fn record(&self, history: &mut Vec<HistoryEntry>, x: &[f64], total: f64, iteration: usize, pass: usize, grad_norm: f64) {
        let (inertia, dirichlet) = self.f.value(x);
        let dim = self.target.ambient_dim();
        let defect = x
            .chunks_exact(dim)
            .map(|p| self.target.constraint_defect(p))
            .fold(0.0, f64::max);
        history.push(HistoryEntry {
            iteration,
            pass,
            value: FunctionalValue {
                total,
                inertia_part: inertia,
                dirichlet_part: dirichlet,
                eps: self.eps,
            },
            grad_norm,
            max_constraint_defect: defect,
        });
    }

    /// Riemannian L-BFGS with projection as vector transport.
    fn run_pass(
        &self,
        x: &mut Vec<f64>,
        pass: usize,
        budget: usize,
        first_iteration: usize,
        reference: f64,
        history: &mut Vec<HistoryEntry>,
    ) -> Result<PassOutcome, VariationalError> {
        let opts = self.opts;
        let (i0, d0) = self.f.value(x);
        let mut total = i0 + d0;
        if !total.is_finite() {
            return Err(VariationalError::NonFiniteEnergy(format!("{total}")));
        }
        let mut g = self.gradient(x);
        let mut hg = self.precondition(x, &g);
        let rel = |hgn: f64| if reference > 0.0 { hgn / reference } else { 0.0 };
        self.record(history, x, total, first_iteration, pass, rel(dot(&g, &hg).max(0.0).sqrt()));
        let mut pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
        let mut gamma = 1.0;
        let mut iterations = 0;
        loop {
            let gnorm = dot(&g, &hg).max(0.0).sqrt();
            if rel(gnorm) <= opts.grad_tol {
                return Ok(PassOutcome {
                    termination: Termination::GradientTol,
                    iterations,
                });
            }
            if iterations >= budget {
                return Ok(PassOutcome {
                    termination: Termination::MaxIter,
                    iterations,
                });
            }
            let mut d = self.direction(x, &g, &pairs, gamma);
            let mut slope = dot(&g, &d);
            if !(slope < 0.0) {
                pairs.clear();
                gamma = 1.0;
                d = hg.iter().map(|v| -v).collect();
                slope = dot(&g, &d);
            }
            let mut accepted = None;
            let mut tried_reset = pairs.is_empty();
            loop {
                let mut tau = 1.0;
                for _ in 0..opts.max_backtracks {
                    let y = self.retract(x, &d, tau)?;
                    let delta = self.f.difference(x, &y);
                    if delta.is_finite() && delta <= opts.armijo_c1 * tau * slope && delta < 0.0 {
                        accepted = Some((y, delta));
                        break;
                    }
                    tau *= opts.backtrack;
                }
                if accepted.is_some() || tried_reset {
                    break;
                }
                // retry once along the preconditioned steepest descent direction
                tried_reset = true;
                pairs.clear();
                gamma = 1.0;
                d = hg.iter().map(|v| -v).collect();
                slope = dot(&g, &d);
            }
            let Some((y, delta)) = accepted else {
                return Ok(PassOutcome {
                    termination: Termination::LineSearchFail,
                    iterations,
                });
            };
            iterations += 1;
            total += delta;
            let g_new = self.gradient(&y);
            // transport the previous step and gradient by projection onto the new tangent spaces
            let mut s: Vec<f64> = y.iter().zip(x.iter()).map(|(a, b)| a - b).collect();
            project_gradient(&self.target, &y, &mut s, self.fixed_len);
            let mut g_old = g.clone();
            project_gradient(&self.target, &y, &mut g_old, self.fixed_len);
            let yv: Vec<f64> = g_new.iter().zip(&g_old).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &yv);
            let hg_new = self.precondition(&y, &g_new);
            if opts.memory > 0 && sy > 1e-12 * dot(&s, &s).sqrt() * dot(&yv, &yv).sqrt() {
                let hy = self.precondition(&y, &yv);
                let yhy = dot(&yv, &hy);
                if yhy > 0.0 {
                    gamma = sy / yhy;
                }
                if pairs.len() == opts.memory {
                    pairs.remove(0);
                }
                pairs.push((s, yv, 1.0 / sy));
            }
            *x = y;
            g = g_new;
            hg = hg_new;
            let gnorm = dot(&g, &hg).max(0.0).sqrt();
            self.record(history, x, total, first_iteration + iterations, pass, rel(gnorm));
        }
    }

    fn direction(&self, x: &[f64], g: &[f64], pairs: &[(Vec<f64>, Vec<f64>, f64)], gamma: f64) -> Vec<f64> {
        let mut q = g.to_vec();
        let mut alphas = vec![0.0; pairs.len()];
        for (k, (s, y, rho)) in pairs.iter().enumerate().rev() {
            let a = rho * dot(s, &q);
            alphas[k] = a;
            q.iter_mut().zip(y).for_each(|(qv, yv)| *qv -= a * yv);
        }
        let mut r = self.precondition(x, &q);
        if !pairs.is_empty() {
            r.iter_mut().for_each(|v| *v *= gamma);
        }
        for (k, (s, y, rho)) in pairs.iter().enumerate() {
            let b = rho * dot(y, &r);
            let a = alphas[k];
            r.iter_mut().zip(s).for_each(|(rv, sv)| *rv += (a - b) * sv);
        }
        project_gradient(&self.target, x, &mut r, self.fixed_len);
        r.iter_mut().for_each(|v| *v = -*v);
        r
    }
}

/// Adds a seeded random tangent perturbation of amplitude `amp` to the free slices.
fn perturb(field: &mut SpaceTimeField, amp: f64, seed: u64) -> Result<(), GeometryError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dim = field.dim();
    let start = FIXED_SLICES * field.slice_len();
    let target = field.target;
    let mut w = vec![0.0; dim];
    let mut y = vec![0.0; dim];
    for node in field.values[start..].chunks_exact_mut(dim) {
        w.iter_mut().for_each(|v| *v = rng.gen_range(-1.0..1.0));
        target.tangent_project_in_place(node, &mut w);
        for c in 0..dim {
            y[c] = node[c] + amp * w[c];
        }
        target.project_into(&y, node)?;
    }
    Ok(())
}

/// Minimizes the discrete functional over fields with the given Cauchy data,
/// starting from the comparison map.
pub fn minimize(
    data: &CauchyData,
    eps: f64,
    grid: &Grid,
    opts: &MinimizeOptions,
) -> Result<MinimizeReport, VariationalError> {
    let start = Instant::now();
    if !(eps.is_finite() && eps > 0.0) {
        return Err(GridError::Eps(eps).into());
    }
    let init = comparison_field(data, grid, eps);
    let comparison_value = evaluate(&init, eps)?;
    let mut field = enforce_cauchy(&init, data, eps)?;
    if opts.perturb > 0.0 {
        perturb(&mut field, opts.perturb, opts.seed)?;
    }
    let initial_value = evaluate(&field, eps)?;
    let f = Functional::new(grid, data.dim(), eps);
    let pre = Preconditioner::new(grid, data.dim(), (f.alpha, f.beta), (&f.mu, &f.omega), FIXED_SLICES)
        .ok_or(VariationalError::Preconditioner)?;
    let solver = Solver {
        fixed_len: FIXED_SLICES * field.slice_len(),
        f,
        target: data.target,
        pre,
        opts,
        eps,
    };
    let mut history = Vec::new();
    let mut iterations = 0;
    let mut termination = Termination::GradientTol;
    // For the quadratic part `F = uᵀMu` the preconditioned norm of the full
    // gradient is `sqrt(2F)`; tangent gradients are measured against it.
    let reference = (2.0 * initial_value.total).max(0.0).sqrt();
    for pass in 0..=opts.cauchy_corrections {
        if pass > 0 {
            let accel = initial_acceleration(&field);
            let updated = enforce_cauchy_with_acceleration(&field, data, eps, Some(&accel))?;
            let change = updated
                .slice(1)
                .iter()
                .zip(field.slice(1))
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            field = updated;
            if change == 0.0 {
                break;
            }
        }
        let mut x = std::mem::take(&mut field.values);
        let outcome = solver.run_pass(&mut x, pass, opts.max_iter - iterations, iterations, reference, &mut history);
        field.values = x;
        let outcome = outcome?;
        iterations += outcome.iterations;
        termination = outcome.termination;
        if termination != Termination::GradientTol {
            break;
        }
    }
    let final_value = evaluate(&field, eps)?;
    Ok(MinimizeReport {
        field,
        history,
        termination,
        wall_time: start.elapsed().as_secs_f64(),
        final_value,
        initial_value,
        comparison_value,
        iterations,
    })
}
