//! Exact inverse of the quadratic part of the discrete functional on the free
//! slices, used as the initial inverse Hessian of the optimizer.
//!
//! Without the target constraint the functional is `uᵀ M u` with the same `M`
//! acting on every ambient component. Periodic central differences are
//! diagonal in the discrete Fourier basis, so `M` splits into one banded
//! matrix in time per spatial mode; each is factored once by a banded
//! Cholesky decomposition.

use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::mesh::Grid;

/// Lower band storage: `rows[j][b]` holds entry `(j, j - b)`.
#[derive(Clone, Debug)]
pub(crate) struct BandCholesky {
    width: usize,
    rows: Vec<Vec<f64>>,
}

impl BandCholesky {
    /// Factors the symmetric positive definite band matrix in place; `None` if
    /// a pivot is not positive.
    pub fn factor(mut rows: Vec<Vec<f64>>, width: usize) -> Option<Self> {
        let n = rows.len();
        for j in 0..n {
            for b in (1..=width.min(j)).rev() {
                let k = j - b;
                // entry (j, k) minus the sum over earlier columns
                let mut s = rows[j][b];
                for c in (b + 1)..=width.min(j) {
                    let col = j - c;
                    if k < col {
                        continue;
                    }
                    s -= rows[j][c] * rows[k][k - col];
                }
                rows[j][b] = s / rows[k][0];
            }
            let mut d = rows[j][0];
            for b in 1..=width.min(j) {
                d -= rows[j][b] * rows[j][b];
            }
            if !(d > 0.0) {
                return None;
            }
            rows[j][0] = d.sqrt();
        }
        Some(Self { width, rows })
    }

    /// Solves `L Lᵀ x = b` for a complex right-hand side in place.
    pub fn solve(&self, x: &mut [Complex64]) {
        let n = self.rows.len();
        for j in 0..n {
            let mut s = x[j];
            for b in 1..=self.width.min(j) {
                s -= x[j - b] * self.rows[j][b];
            }
            x[j] = s / self.rows[j][0];
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for b in 1..=self.width.min(n - 1 - j) {
                s -= x[j + b] * self.rows[j + b][b];
            }
            x[j] = s / self.rows[j][0];
        }
    }
}

/// Eigenvalue of `−Σ_a D_a D_a` for the Fourier mode with integer wavenumbers `q`.
pub(crate) fn laplacian_symbol(q: [usize; 2], n: usize, nx: usize, dx: f64) -> f64 {
    (0..n)
        .map(|a| {
            let s = (2.0 * std::f64::consts::PI * q[a] as f64 / nx as f64).sin() / dx;
            s * s
        })
        .sum()
}

pub(crate) struct Preconditioner {
    grid: Grid,
    dim: usize,
    first_free: usize,
    factors: Vec<BandCholesky>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Preconditioner {
    /// `alpha` and `beta` are the inertia and Dirichlet coefficients, `mu`
    /// and `omega` the weights of the second-difference rows and of the
    /// Dirichlet slices.
    pub fn new(
        grid: &Grid,
        dim: usize,
        (alpha, beta): (f64, f64),
        (mu, omega): (&[f64], &[f64]),
        first_free: usize,
    ) -> Option<Self> {
        let nt = grid.nt;
        let width = 2;
        let vol2 = 2.0 * grid.torus.cell_volume();
        let inv_dt2 = 1.0 / (grid.dt * grid.dt);
        // the time part is shared by every spatial mode
        let stencil = [1.0, -2.0, 1.0];
        let mut time_band = vec![vec![0.0; width + 1]; nt + 1];
        for r in 1..nt {
            for (p, &cp) in stencil.iter().enumerate() {
                for (q, &cq) in stencil.iter().enumerate().take(p + 1) {
                    let (i, k) = (r - 1 + p, r - 1 + q);
                    time_band[i][i - k] += alpha * mu[r] * cp * cq * inv_dt2 * inv_dt2;
                }
            }
        }
        let torus = grid.torus;
        let free = nt + 1 - first_free;
        let mut factors = Vec::with_capacity(torus.points());
        for mode in 0..torus.points() {
            let lambda = laplacian_symbol(torus.multi_index(mode), torus.dim(), torus.nx(), torus.dx());
            let rows: Vec<Vec<f64>> = (0..free)
                .map(|f| {
                    let j = f + first_free;
                    let mut row: Vec<f64> = time_band[j].iter().map(|v| v * vol2).collect();
                    for (b, v) in row.iter_mut().enumerate() {
                        if b > f {
                            *v = 0.0;
                        }
                    }
                    row[0] += vol2 * beta * lambda * omega[j];
                    row
                })
                .collect();
            factors.push(BandCholesky::factor(rows, width)?);
        }
        let mut planner = FftPlanner::new();
        Some(Self {
            grid: *grid,
            dim,
            first_free,
            factors,
            forward: planner.plan_fft_forward(torus.nx()),
            inverse: planner.plan_fft_inverse(torus.nx()),
        })
    }

    fn transform(&self, buf: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inverse } else { &self.forward };
        let nx = self.grid.torus.nx();
        match self.grid.torus.dim() {
            1 => plan.process(buf),
            _ => {
                // rows (axis 1 contiguous), then columns
                for row in buf.chunks_exact_mut(nx) {
                    plan.process(row);
                }
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
        }
    }

    /// Applies the inverse of twice the quadratic form to `v` on the free
    /// slices; fixed slices are left at zero.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let points = self.grid.points();
        let dim = self.dim;
        let slice_len = points * dim;
        let free = self.grid.nt + 1 - self.first_free;
        let mut out = vec![0.0; v.len()];
        let mut spectrum = vec![Complex64::new(0.0, 0.0); free * points];
        let mut column = vec![Complex64::new(0.0, 0.0); free];
        let scale = 1.0 / points as f64;
        for c in 0..dim {
            for f in 0..free {
                let j = f + self.first_free;
                let buf = &mut spectrum[f * points..(f + 1) * points];
                for (i, b) in buf.iter_mut().enumerate() {
                    *b = Complex64::new(v[j * slice_len + i * dim + c], 0.0);
                }
                self.transform(buf, false);
            }
            for (mode, factor) in self.factors.iter().enumerate() {
                for f in 0..free {
                    column[f] = spectrum[f * points + mode];
                }
                factor.solve(&mut column);
                for f in 0..free {
                    spectrum[f * points + mode] = column[f];
                }
            }
            for f in 0..free {
                let j = f + self.first_free;
                let buf = &mut spectrum[f * points..(f + 1) * points];
                self.transform(buf, true);
                for (i, b) in buf.iter().enumerate() {
                    out[j * slice_len + i * dim + c] = b.re * scale;
                }
            }
        }
        out
    }
}
