//! Space-time grids on the periodic torus `[0, 2π)ⁿ × [0, Tcut]`.
//!
//! Time nodes sit at `t_j = j·dt` for `j = 0..=nt`, so the last node is exactly
//! `Tcut = nt·dt`. Ambient-valued fields share one flat layout:
//! `values[(j * points + i) * dim + c]` with `j` the time slice, `i` the spatial
//! node (row-major over the axes) and `c` the ambient component.
//!
//! All stencils are second order: central differences in the interior and
//! one-sided three/four point formulas at the two time ends. Spatial stencils
//! wrap periodically.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::TargetManifold;

/// Smallest admissible truncation time, measured in rescaled time.
pub const MIN_RESCALED_TCUT: f64 = 10.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GridError {
    #[error("spatial dimension must be 1 or 2, got {0}")]
    Dimension(usize),
    #[error("need at least 4 nodes per spatial axis, got {0}")]
    TooFewPoints(usize),
    #[error("time step must be positive and finite, got {0}")]
    TimeStep(f64),
    #[error("need at least 4 time intervals, got {0}")]
    TooFewSlices(usize),
    #[error("truncation time {0} (rescaled units) is below the minimum of 10")]
    Truncation(f64),
    #[error("eps must be positive and finite, got {0}")]
    Eps(f64),
    #[error("field has {got} values, grid expects {expected}")]
    Length { expected: usize, got: usize },
}

/// The periodic spatial torus `[0, 2π)ⁿ` sampled with `nx` nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Torus {
    n: usize,
    nx: usize,
}

impl Torus {
    pub fn new(n: usize, nx: usize) -> Result<Self, GridError> {
        if !(1..=2).contains(&n) {
            return Err(GridError::Dimension(n));
        }
        if nx < 4 {
            return Err(GridError::TooFewPoints(nx));
        }
        Ok(Self { n, nx })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn points(&self) -> usize {
        self.nx.pow(self.n as u32)
    }

    pub fn dx(&self) -> f64 {
        2.0 * PI / self.nx as f64
    }

    /// Quadrature weight of one spatial cell, `dxⁿ`.
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.n as i32)
    }

    pub fn volume(&self) -> f64 {
        (2.0 * PI).powi(self.n as i32)
    }

    fn stride(&self, axis: usize) -> usize {
        self.nx.pow((self.n - 1 - axis) as u32)
    }

    /// Integer multi-index of spatial node `i` (second entry is 0 when n = 1).
    pub fn multi_index(&self, i: usize) -> [usize; 2] {
        match self.n {
            1 => [i, 0],
            _ => [i / self.nx, i % self.nx],
        }
    }

    /// Coordinates of spatial node `i`.
    pub fn coords(&self, i: usize) -> [f64; 2] {
        let [a, b] = self.multi_index(i);
        [a as f64 * self.dx(), b as f64 * self.dx()]
    }

    /// Periodic neighbour of node `i` shifted by `offset` along `axis`.
    pub fn shift(&self, i: usize, axis: usize, offset: isize) -> usize {
        let stride = self.stride(axis);
        let pos = (i / stride) % self.nx;
        let moved = (pos as isize + offset).rem_euclid(self.nx as isize) as usize;
        i - pos * stride + moved * stride
    }

    /// Samples `f(x)` at every spatial node.
    pub fn sample<F: Fn([f64; 2]) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.points()).map(|i| f(self.coords(i))).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeScale {
    /// Weight `e^{-t}`; the functional is `I_ε`.
    Rescaled,
    /// Weight `e^{-t/ε}/ε`; the functional is `E_ε`.
    Physical,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub torus: Torus,
    /// Number of time intervals; there are `nt + 1` slices.
    pub nt: usize,
    pub dt: f64,
    pub time_scale: TimeScale,
}

impl Grid {
    /// Validates the grid. `eps` is only needed to convert a physical
    /// truncation time to rescaled units.
    pub fn new(
        torus: Torus,
        nt: usize,
        dt: f64,
        time_scale: TimeScale,
        eps: f64,
    ) -> Result<Self, GridError> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(GridError::TimeStep(dt));
        }
        if nt < 4 {
            return Err(GridError::TooFewSlices(nt));
        }
        if !(eps.is_finite() && eps > 0.0) {
            return Err(GridError::Eps(eps));
        }
        let grid = Self {
            torus,
            nt,
            dt,
            time_scale,
        };
        let rescaled = grid.rescaled_tcut(eps);
        if rescaled < MIN_RESCALED_TCUT * (1.0 - 1e-12) {
            return Err(GridError::Truncation(rescaled));
        }
        Ok(grid)
    }

    pub fn rescaled(torus: Torus, nt: usize, dt: f64) -> Result<Self, GridError> {
        Self::new(torus, nt, dt, TimeScale::Rescaled, 1.0)
    }

    pub fn physical(torus: Torus, nt: usize, dt: f64, eps: f64) -> Result<Self, GridError> {
        Self::new(torus, nt, dt, TimeScale::Physical, eps)
    }

    pub fn slices(&self) -> usize {
        self.nt + 1
    }

    pub fn points(&self) -> usize {
        self.torus.points()
    }

    pub fn nodes(&self) -> usize {
        self.slices() * self.points()
    }

    pub fn time(&self, j: usize) -> f64 {
        j as f64 * self.dt
    }

    pub fn tcut(&self) -> f64 {
        self.nt as f64 * self.dt
    }

    pub fn rescaled_tcut(&self, eps: f64) -> f64 {
        match self.time_scale {
            TimeScale::Rescaled => self.tcut(),
            TimeScale::Physical => self.tcut() / eps,
        }
    }

    /// Trapezoid weight of slice `j`.
    pub fn trapezoid(&self, j: usize) -> f64 {
        if j == 0 || j == self.nt {
            0.5 * self.dt
        } else {
            self.dt
        }
    }

    /// Exponential measure density at slice `j`.
    pub fn weight(&self, j: usize, eps: f64) -> f64 {
        let t = self.time(j);
        match self.time_scale {
            TimeScale::Rescaled => (-t).exp(),
            TimeScale::Physical => (-t / eps).exp() / eps,
        }
    }

    /// Trapezoid weight times the exponential density.
    pub fn quadrature_weight(&self, j: usize, eps: f64) -> f64 {
        self.trapezoid(j) * self.weight(j, eps)
    }

    /// Weight of the second-difference row at slice `j`: `dt` times the
    /// density on interior slices, zero at the two ends where only one-sided
    /// second differences exist.
    pub fn inertia_weight(&self, j: usize, eps: f64) -> f64 {
        if j == 0 || j == self.nt {
            0.0
        } else {
            self.dt * self.weight(j, eps)
        }
    }

    /// The same nodes relabelled in physical time `t' = ε t`.
    pub fn to_physical(&self, eps: f64) -> Self {
        match self.time_scale {
            TimeScale::Physical => *self,
            TimeScale::Rescaled => Self {
                dt: self.dt * eps,
                time_scale: TimeScale::Physical,
                ..*self
            },
        }
    }

    /// The same nodes relabelled in rescaled time `t = t'/ε`.
    pub fn to_rescaled(&self, eps: f64) -> Self {
        match self.time_scale {
            TimeScale::Rescaled => *self,
            TimeScale::Physical => Self {
                dt: self.dt / eps,
                time_scale: TimeScale::Rescaled,
                ..*self
            },
        }
    }

    /// Index of the last slice with `t_j <= t` (clamped to the grid).
    pub fn slice_at_or_before(&self, t: f64) -> usize {
        let j = (t / self.dt + 1e-9).floor();
        (j.max(0.0) as usize).min(self.nt)
    }
}

/// Target-valued samples on a space-time grid.
#[derive(Clone, Debug, PartialEq)]
pub struct SpaceTimeField {
    pub grid: Grid,
    pub target: TargetManifold,
    pub values: Vec<f64>,
}

impl SpaceTimeField {
    pub fn new(grid: Grid, target: TargetManifold, values: Vec<f64>) -> Result<Self, GridError> {
        let expected = grid.nodes() * target.ambient_dim();
        if values.len() != expected {
            return Err(GridError::Length {
                expected,
                got: values.len(),
            });
        }
        Ok(Self {
            grid,
            target,
            values,
        })
    }

    /// Builds a field whose slice `j` is `slice(j)`.
    pub fn from_slices<F>(grid: Grid, target: TargetManifold, mut slice: F) -> Self
    where
        F: FnMut(usize) -> Vec<f64>,
    {
        let len = grid.points() * target.ambient_dim();
        let mut values = Vec::with_capacity(grid.slices() * len);
        for j in 0..grid.slices() {
            let s = slice(j);
            assert_eq!(s.len(), len, "slice {j} has the wrong length");
            values.extend_from_slice(&s);
        }
        Self {
            grid,
            target,
            values,
        }
    }

    pub fn dim(&self) -> usize {
        self.target.ambient_dim()
    }

    pub fn slice_len(&self) -> usize {
        self.grid.points() * self.dim()
    }

    pub fn slice(&self, j: usize) -> &[f64] {
        let len = self.slice_len();
        &self.values[j * len..(j + 1) * len]
    }

    pub fn slice_mut(&mut self, j: usize) -> &mut [f64] {
        let len = self.slice_len();
        &mut self.values[j * len..(j + 1) * len]
    }

    pub fn node(&self, j: usize, i: usize) -> &[f64] {
        let d = self.dim();
        let start = (j * self.grid.points() + i) * d;
        &self.values[start..start + d]
    }

    /// Largest target-invariant violation over all nodes.
    pub fn max_constraint_defect(&self) -> f64 {
        self.values
            .chunks_exact(self.dim())
            .map(|p| self.target.constraint_defect(p))
            .fold(0.0, f64::max)
    }

    /// Same samples viewed on the physical time axis.
    pub fn to_physical(&self, eps: f64) -> Self {
        Self {
            grid: self.grid.to_physical(eps),
            ..self.clone()
        }
    }

    /// Same samples viewed on the rescaled time axis.
    pub fn to_rescaled(&self, eps: f64) -> Self {
        Self {
            grid: self.grid.to_rescaled(eps),
            ..self.clone()
        }
    }
}

/// A stencil row: coefficients applied to consecutive slices starting at `first`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct TimeStencil {
    pub first: usize,
    pub coeffs: &'static [f64],
}

const D1_START: [f64; 3] = [-1.5, 2.0, -0.5];
const D1_INTERIOR: [f64; 3] = [-0.5, 0.0, 0.5];
const D1_END: [f64; 3] = [0.5, -2.0, 1.5];
const D2_START: [f64; 4] = [2.0, -5.0, 4.0, -1.0];
const D2_INTERIOR: [f64; 3] = [1.0, -2.0, 1.0];
const D2_END: [f64; 4] = [-1.0, 4.0, -5.0, 2.0];

/// First-derivative row at slice `j` (coefficients still to be divided by dt).
pub(crate) fn d1t_row(j: usize, nt: usize) -> TimeStencil {
    if j == 0 {
        TimeStencil {
            first: 0,
            coeffs: &D1_START,
        }
    } else if j == nt {
        TimeStencil {
            first: nt - 2,
            coeffs: &D1_END,
        }
    } else {
        TimeStencil {
            first: j - 1,
            coeffs: &D1_INTERIOR,
        }
    }
}

/// Second-derivative row at slice `j` (coefficients still to be divided by dt²).
pub(crate) fn d2t_row(j: usize, nt: usize) -> TimeStencil {
    if j == 0 {
        TimeStencil {
            first: 0,
            coeffs: &D2_START,
        }
    } else if j == nt {
        TimeStencil {
            first: nt - 3,
            coeffs: &D2_END,
        }
    } else {
        TimeStencil {
            first: j - 1,
            coeffs: &D2_INTERIOR,
        }
    }
}

fn apply_time_stencil<R>(grid: &Grid, dim: usize, values: &[f64], scale: f64, row: R) -> Vec<f64>
where
    R: Fn(usize, usize) -> TimeStencil,
{
    assert!(grid.nt >= 3, "time stencils need at least 4 slices");
    let len = grid.points() * dim;
    assert_eq!(values.len(), grid.slices() * len);
    let mut out = vec![0.0; values.len()];
    for (j, out_slice) in out.chunks_exact_mut(len).enumerate() {
        let st = row(j, grid.nt);
        for (k, &c) in st.coeffs.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let src = &values[(st.first + k) * len..(st.first + k + 1) * len];
            for (o, s) in out_slice.iter_mut().zip(src) {
                *o += c * s;
            }
        }
        for o in out_slice.iter_mut() {
            *o *= scale;
        }
    }
    out
}

/// `∂_t` of raw ambient samples laid out on `grid`.
pub fn d1t_values(grid: &Grid, dim: usize, values: &[f64]) -> Vec<f64> {
    apply_time_stencil(grid, dim, values, 1.0 / grid.dt, d1t_row)
}

/// `∂_t²` of raw ambient samples laid out on `grid`.
pub fn d2t_values(grid: &Grid, dim: usize, values: &[f64]) -> Vec<f64> {
    apply_time_stencil(grid, dim, values, 1.0 / (grid.dt * grid.dt), d2t_row)
}

pub fn d1t(f: &SpaceTimeField) -> Vec<f64> {
    d1t_values(&f.grid, f.dim(), &f.values)
}

pub fn d2t(f: &SpaceTimeField) -> Vec<f64> {
    d2t_values(&f.grid, f.dim(), &f.values)
}

/// Periodic central difference along `axis`; works on any number of slices.
pub fn grad_axis_values(torus: &Torus, dim: usize, values: &[f64], axis: usize) -> Vec<f64> {
    let points = torus.points();
    let len = points * dim;
    assert_eq!(values.len() % len, 0);
    let inv = 0.5 / torus.dx();
    let mut out = vec![0.0; values.len()];
    for (src, dst) in values.chunks_exact(len).zip(out.chunks_exact_mut(len)) {
        for i in 0..points {
            let ip = torus.shift(i, axis, 1) * dim;
            let im = torus.shift(i, axis, -1) * dim;
            for c in 0..dim {
                dst[i * dim + c] = (src[ip + c] - src[im + c]) * inv;
            }
        }
    }
    out
}

/// One ambient field per spatial axis.
pub fn grad_x_values(torus: &Torus, dim: usize, values: &[f64]) -> Vec<Vec<f64>> {
    (0..torus.dim())
        .map(|a| grad_axis_values(torus, dim, values, a))
        .collect()
}

pub fn grad_x(f: &SpaceTimeField) -> Vec<Vec<f64>> {
    grad_x_values(&f.grid.torus, f.dim(), &f.values)
}

/// Central-difference divergence, the negative adjoint of [`grad_x_values`].
pub fn div_x_values(torus: &Torus, dim: usize, components: &[Vec<f64>]) -> Vec<f64> {
    assert_eq!(components.len(), torus.dim());
    let mut out = vec![0.0; components[0].len()];
    for (axis, comp) in components.iter().enumerate() {
        let d = grad_axis_values(torus, dim, comp, axis);
        for (o, v) in out.iter_mut().zip(d) {
            *o += v;
        }
    }
    out
}

/// `∬ w(t) g dx dt` over the truncated cylinder, trapezoid in time with the
/// weight sampled at the nodes. `g` holds one scalar per space-time node.
pub fn weighted_integral(g: &[f64], grid: &Grid, eps: f64) -> f64 {
    let points = grid.points();
    assert_eq!(g.len(), grid.nodes());
    let vol = grid.torus.cell_volume();
    g.chunks_exact(points)
        .enumerate()
        .map(|(j, s)| grid.quadrature_weight(j, eps) * vol * s.iter().sum::<f64>())
        .sum()
}

/// `∫ g dx` for one spatial slice of scalars.
pub fn slice_integral(g: &[f64], torus: &Torus) -> f64 {
    torus.cell_volume() * g.iter().sum::<f64>()
}

/// Pointwise squared norms of an ambient field, one scalar per node.
pub fn pointwise_sq_norm(values: &[f64], dim: usize) -> Vec<f64> {
    values
        .chunks_exact(dim)
        .map(|v| v.iter().map(|x| x * x).sum())
        .collect()
}

/// Trapezoid integral of node samples `f` with spacing `dt` over slices `[a, b]`.
pub fn trapezoid_range(f: &[f64], dt: f64, a: usize, b: usize) -> f64 {
    if b <= a {
        return 0.0;
    }
    let inner: f64 = f[a + 1..b].iter().sum();
    dt * (0.5 * (f[a] + f[b]) + inner)
}
