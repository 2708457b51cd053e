//! Exact reference wave maps and independent recomputations.
//!
//! A geodesic `γ` composed with a solution `θ` of the scalar linear wave
//! equation is an exact wave map, because along a totally geodesic image the
//! wave map equation reduces to `θ_tt − Δθ = 0`.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{identity, mat_mul, skew_exponential, TargetManifold};
use crate::mesh::{Grid, SpaceTimeField, TimeScale, Torus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OracleError {
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeodesicFamily {
    /// `γ(s) = (cos s, sin s, 0, …)` on the sphere in `R^ambient`.
    SphereCircle { ambient: usize },
    /// `γ(s) = base · exp(s A)` in `SO(order)`, `A` skew.
    SoGroupLine {
        order: usize,
        base: Vec<f64>,
        generator: Vec<f64>,
    },
}

impl GeodesicFamily {
    /// The one-parameter subgroup generated by the rotation in the (1, 2) plane.
    pub fn planar_rotation(order: usize) -> Self {
        let mut generator = vec![0.0; order * order];
        generator[order] = 1.0;
        generator[1] = -1.0;
        Self::SoGroupLine {
            order,
            base: identity(order),
            generator,
        }
    }

    pub fn target(&self) -> TargetManifold {
        match *self {
            Self::SphereCircle { ambient } => TargetManifold::Sphere { ambient },
            Self::SoGroupLine { order, .. } => TargetManifold::SpecialOrthogonal { order },
        }
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        match self {
            Self::SphereCircle { ambient } => {
                let mut v = vec![0.0; *ambient];
                v[0] = s.cos();
                v[1] = s.sin();
                v
            }
            Self::SoGroupLine {
                order,
                base,
                generator,
            } => {
                let a: Vec<f64> = generator.iter().map(|g| g * s).collect();
                mat_mul(base, &skew_exponential(&a, *order), *order)
            }
        }
    }

    /// `γ'(s)`.
    pub fn derivative(&self, s: f64) -> Vec<f64> {
        match self {
            Self::SphereCircle { ambient } => {
                let mut v = vec![0.0; *ambient];
                v[0] = -s.sin();
                v[1] = s.cos();
                v
            }
            Self::SoGroupLine {
                order, generator, ..
            } => mat_mul(&self.eval(s), generator, *order),
        }
    }
}

/// Scalar wave data `θ₀ = w·x₁ + θ₀ᵖ`, `θ₁`, with `θ₀ᵖ` and `θ₁` periodic.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarWaveData {
    pub torus: Torus,
    /// Winding slope along the first axis; `w·x₁` is a static solution.
    pub winding: f64,
    pub theta0: Vec<f64>,
    pub theta1: Vec<f64>,
}

fn wavenumber(q: usize, nx: usize) -> f64 {
    if q <= nx / 2 {
        q as f64
    } else {
        q as f64 - nx as f64
    }
}

fn dft(torus: &Torus, values: &[f64], inverse: bool) -> Vec<Complex64> {
    dft_complex(torus, values.iter().map(|v| Complex64::new(*v, 0.0)).collect(), inverse)
}

fn dft_complex(torus: &Torus, mut buf: Vec<Complex64>, inverse: bool) -> Vec<Complex64> {
    let nx = torus.nx();
    let mut planner = FftPlanner::new();
    let plan = if inverse {
        planner.plan_fft_inverse(nx)
    } else {
        planner.plan_fft_forward(nx)
    };
    for row in buf.chunks_exact_mut(nx) {
        plan.process(row);
    }
    if torus.dim() == 2 {
        let mut col = vec![Complex64::new(0.0, 0.0); nx];
        for c in 0..nx {
            for r in 0..nx {
                col[r] = buf[r * nx + c];
            }
            plan.process(&mut col);
            for r in 0..nx {
                buf[r * nx + c] = col[r];
            }
        }
    }
    if inverse {
        let s = 1.0 / torus.points() as f64;
        buf.iter_mut().for_each(|v| *v *= s);
    }
    buf
}

fn mode_frequency(torus: &Torus, mode: usize) -> f64 {
    let [a, b] = torus.multi_index(mode);
    let ka = wavenumber(a, torus.nx());
    let kb = if torus.dim() == 2 { wavenumber(b, torus.nx()) } else { 0.0 };
    ka.hypot(kb)
}

/// Exact modal evolution of the periodic scalar wave equation; returns
/// `(θ(·, t), θ_t(·, t))` for the periodic parts (the trigonometric
/// interpolant of the samples is evolved exactly).
pub fn linear_wave_evolve(torus: &Torus, theta0: &[f64], theta1: &[f64], t: f64) -> (Vec<f64>, Vec<f64>) {
    let a = dft(torus, theta0, false);
    let b = dft(torus, theta1, false);
    let mut pos = Vec::with_capacity(a.len());
    let mut vel = Vec::with_capacity(a.len());
    for (mode, (a, b)) in a.iter().zip(&b).enumerate() {
        let w = mode_frequency(torus, mode);
        if w == 0.0 {
            pos.push(a + b * t);
            vel.push(*b);
        } else {
            let (s, c) = (w * t).sin_cos();
            pos.push(a * c + b * (s / w));
            vel.push(-a * (w * s) + b * c);
        }
    }
    let pos = dft_complex(torus, pos, true).into_iter().map(|v| v.re).collect();
    let vel = dft_complex(torus, vel, true).into_iter().map(|v| v.re).collect();
    (pos, vel)
}

/// `θ(·, t)` for periodic scalar data.
pub fn linear_wave_solve(torus: &Torus, theta0: &[f64], theta1: &[f64], t: f64) -> Vec<f64> {
    linear_wave_evolve(torus, theta0, theta1, t).0
}

/// Spectral wave energy `∫ θ_t² + |∇θ|²` of periodic samples.
pub fn wave_energy(torus: &Torus, theta: &[f64], theta_t: &[f64]) -> f64 {
    let a = dft(torus, theta, false);
    let b = dft(torus, theta_t, false);
    let scale = torus.volume() / (torus.points() as f64).powi(2);
    a.iter()
        .zip(&b)
        .enumerate()
        .map(|(mode, (a, b))| {
            let w = mode_frequency(torus, mode);
            b.norm_sqr() + w * w * a.norm_sqr()
        })
        .sum::<f64>()
        * scale
}

impl ScalarWaveData {
    /// `θ(·, t)` including the winding part.
    pub fn theta(&self, t: f64) -> Vec<f64> {
        let mut th = linear_wave_solve(&self.torus, &self.theta0, &self.theta1, t);
        for (i, v) in th.iter_mut().enumerate() {
            *v += self.winding * self.torus.coords(i)[0];
        }
        th
    }
}

/// `γ ∘ θ(·, t)` on the spatial grid.
pub fn reference_wave_map(fam: &GeodesicFamily, data: &ScalarWaveData, t: f64) -> Vec<f64> {
    data.theta(t).into_iter().flat_map(|s| fam.eval(s)).collect()
}

/// The exact wave map sampled on every slice of `grid`. On a rescaled grid
/// slice `j` holds physical time `ε t_j`.
pub fn reference_field(fam: &GeodesicFamily, data: &ScalarWaveData, grid: &Grid, eps: f64) -> SpaceTimeField {
    let to_physical = match grid.time_scale {
        TimeScale::Physical => 1.0,
        TimeScale::Rescaled => eps,
    };
    SpaceTimeField::from_slices(*grid, fam.target(), |j| {
        reference_wave_map(fam, data, grid.time(j) * to_physical)
    })
}

/// Double-double accumulator (Knuth two-sum), standing in for extended
/// precision.
#[derive(Clone, Copy, Debug, Default)]
struct Compensated {
    hi: f64,
    lo: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let s = self.hi + x;
        let bp = s - self.hi;
        let err = (self.hi - (s - bp)) + (x - bp);
        self.hi = s;
        self.lo += err;
    }

    fn value(self) -> f64 {
        self.hi + self.lo
    }
}

/// Recomputes the discrete functional with explicit loops and compensated
/// summation, sharing no code with the production evaluation.
pub fn brute_force_functional(u: &SpaceTimeField, eps: f64) -> f64 {
    let g = &u.grid;
    let n = g.torus.dim();
    let nx = g.torus.nx();
    let nt = g.nt;
    let dim = u.target.ambient_dim();
    let dt = g.dt;
    let dx = 2.0 * std::f64::consts::PI / nx as f64;
    let cell = if n == 1 { dx } else { dx * dx };
    let (alpha, beta) = match g.time_scale {
        TimeScale::Rescaled => (1.0, eps * eps),
        TimeScale::Physical => (eps, 1.0 / eps),
    };
    let points = if n == 1 { nx } else { nx * nx };
    let at = |j: usize, i1: usize, i2: usize, c: usize| -> f64 {
        let i = if n == 1 { i1 } else { i1 * nx + i2 };
        u.values[(j * points + i) * dim + c]
    };
    let mut acc = Compensated::default();
    for j in 0..=nt {
        let t = j as f64 * dt;
        let weight = match g.time_scale {
            TimeScale::Rescaled => (-t).exp(),
            TimeScale::Physical => (-t / eps).exp() / eps,
        };
        let trap = if j == 0 || j == nt { dt / 2.0 } else { dt };
        let interior = j > 0 && j < nt;
        for i1 in 0..nx {
            for i2 in 0..(if n == 1 { 1 } else { nx }) {
                for c in 0..dim {
                    if interior {
                        let d2 = (at(j - 1, i1, i2, c) - 2.0 * at(j, i1, i2, c) + at(j + 1, i1, i2, c)) / (dt * dt);
                        acc.add(weight * dt * cell * alpha * d2 * d2);
                    }
                    let w = weight * trap * cell;
                    let gx = (at(j, (i1 + 1) % nx, i2, c) - at(j, (i1 + nx - 1) % nx, i2, c)) / (2.0 * dx);
                    acc.add(w * beta * gx * gx);
                    if n == 2 {
                        let gy = (at(j, i1, (i2 + 1) % nx, c) - at(j, i1, (i2 + nx - 1) % nx, c)) / (2.0 * dx);
                        acc.add(w * beta * gy * gy);
                    }
                }
            }
        }
    }
    acc.value()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorNorms {
    /// `(∫_window ∫ |v − ref|² dx dt)^{1/2}`, trapezoid in time.
    pub l2: f64,
    /// Largest spatial `L²` error over the window's slices.
    pub max_slice: f64,
}

/// Error of `v` against `reference` over the time window `[t0, t1]` (in the
/// grid's own time units, snapped to nodes).
pub fn error_norms(v: &SpaceTimeField, reference: &SpaceTimeField, window: (f64, f64)) -> Result<ErrorNorms, OracleError> {
    if v.grid != reference.grid {
        return Err(OracleError::GridMismatch("fields live on different grids".into()));
    }
    if v.target != reference.target {
        return Err(OracleError::GridMismatch("fields have different targets".into()));
    }
    let g = &v.grid;
    let a = g.slice_at_or_before(window.0 + 0.5 * g.dt);
    let b = g.slice_at_or_before(window.1 + 1e-9 * g.dt);
    let vol = g.torus.cell_volume();
    let per_slice: Vec<f64> = (0..g.slices())
        .map(|j| {
            vol * v
                .slice(j)
                .iter()
                .zip(reference.slice(j))
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
        })
        .collect();
    let l2 = crate::mesh::trapezoid_range(&per_slice, g.dt, a, b).sqrt();
    let max_slice = per_slice[a..=b].iter().copied().fold(0.0, f64::max).sqrt();
    Ok(ErrorNorms { l2, max_slice })
}
