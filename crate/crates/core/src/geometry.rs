//! Pointwise operations on the targets `S^{L-1}` and `SO(m)`.
//!
//! Target values and ambient vectors are plain `f64` slices. An `SO(m)` value is
//! an `m × m` matrix stored row-major, so `ambient_dim = m²`, and norms are
//! Frobenius norms.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mesh::Torus;

/// Data whose velocity leaves the tangent space by more than this is rejected.
pub const TANGENCY_REJECT_TOL: f64 = 1e-6;
/// Initial positions must lie this close to the target.
pub const ON_TARGET_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("cannot retract a degenerate point ({0})")]
    DegeneratePoint(String),
    #[error("velocity at node {node} is not tangent (defect {defect:.3e})")]
    TangencyViolation { node: usize, defect: f64 },
    #[error("position at node {node} is off the target (defect {defect:.3e})")]
    OffTarget { node: usize, defect: f64 },
    #[error("invalid target: {0}")]
    InvalidTarget(String),
    #[error("expected {expected} values, got {got}")]
    Length { expected: usize, got: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetManifold {
    /// Unit sphere in `R^ambient`.
    Sphere { ambient: usize },
    /// Rotation group of `order × order` matrices.
    SpecialOrthogonal { order: usize },
}

impl TargetManifold {
    pub fn sphere(ambient: usize) -> Result<Self, GeometryError> {
        if ambient < 2 {
            return Err(GeometryError::InvalidTarget(format!(
                "sphere needs ambient dimension >= 2, got {ambient}"
            )));
        }
        Ok(Self::Sphere { ambient })
    }

    pub fn special_orthogonal(order: usize) -> Result<Self, GeometryError> {
        if order < 2 {
            return Err(GeometryError::InvalidTarget(format!(
                "SO(m) needs m >= 2, got {order}"
            )));
        }
        Ok(Self::SpecialOrthogonal { order })
    }

    pub fn ambient_dim(&self) -> usize {
        match *self {
            Self::Sphere { ambient } => ambient,
            Self::SpecialOrthogonal { order } => order * order,
        }
    }

    pub fn is_sphere(&self) -> bool {
        matches!(self, Self::Sphere { .. })
    }

    /// Retraction onto the target. See [`project_to_target`].
    pub fn project(&self, y: &[f64]) -> Result<Vec<f64>, GeometryError> {
        let mut out = vec![0.0; y.len()];
        self.project_into(y, &mut out)?;
        Ok(out)
    }

    pub fn project_into(&self, y: &[f64], out: &mut [f64]) -> Result<(), GeometryError> {
        debug_assert_eq!(y.len(), self.ambient_dim());
        match *self {
            Self::Sphere { .. } => {
                let n = norm(y);
                if !(n > 1e-14) || !n.is_finite() {
                    return Err(GeometryError::DegeneratePoint(format!("|y| = {n:e}")));
                }
                for (o, v) in out.iter_mut().zip(y) {
                    *o = v / n;
                }
                Ok(())
            }
            Self::SpecialOrthogonal { order: 2 } => polar_so2(y, out),
            Self::SpecialOrthogonal { order } => polar_som(y, order, out),
        }
    }

    /// Orthogonal projection of `w` onto the tangent space at `p`.
    pub fn tangent_project(&self, p: &[f64], w: &[f64]) -> Vec<f64> {
        let mut out = w.to_vec();
        self.tangent_project_in_place(p, &mut out);
        out
    }

    pub fn tangent_project_in_place(&self, p: &[f64], w: &mut [f64]) {
        match *self {
            Self::Sphere { .. } => {
                let s = dot(w, p);
                for (x, q) in w.iter_mut().zip(p) {
                    *x -= s * q;
                }
            }
            Self::SpecialOrthogonal { order: m } => {
                // p · skew(pᵀ w)
                let a = mat_tn(p, w, m);
                let mut s = vec![0.0; m * m];
                for i in 0..m {
                    for j in 0..m {
                        s[i * m + j] = 0.5 * (a[i * m + j] - a[j * m + i]);
                    }
                }
                let r = mat_mul(p, &s, m);
                w.copy_from_slice(&r);
            }
        }
    }

    /// Distance of `p` from satisfying the target invariants.
    pub fn constraint_defect(&self, p: &[f64]) -> f64 {
        match *self {
            Self::Sphere { .. } => (norm(p) - 1.0).abs(),
            Self::SpecialOrthogonal { order: m } => {
                let g = mat_tn(p, p, m);
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        let d = g[i * m + j] - if i == j { 1.0 } else { 0.0 };
                        s += d * d;
                    }
                }
                let defect = s.sqrt();
                if determinant(p, m) > 0.0 {
                    defect
                } else {
                    defect.max(1.0)
                }
            }
        }
    }

    /// Size of the normal component of `w` at `p`.
    pub fn tangency_defect(&self, p: &[f64], w: &[f64]) -> f64 {
        match *self {
            Self::Sphere { .. } => dot(p, w).abs(),
            Self::SpecialOrthogonal { order: m } => {
                let a = mat_tn(p, w, m);
                let mut s = 0.0;
                for i in 0..m {
                    for j in 0..m {
                        let d = 0.5 * (a[i * m + j] + a[j * m + i]);
                        s += d * d;
                    }
                }
                s.sqrt()
            }
        }
    }
}

/// Free-function form of [`TargetManifold::project`].
pub fn project_to_target(y: &[f64], target: &TargetManifold) -> Result<Vec<f64>, GeometryError> {
    target.project(y)
}

pub fn tangent_project(p: &[f64], w: &[f64], target: &TargetManifold) -> Vec<f64> {
    target.tangent_project(p, w)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `a bᵀ − b aᵀ`, row-major `L × L`.
pub fn wedge(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "wedge needs equal lengths");
    let l = a.len();
    let mut out = vec![0.0; l * l];
    for i in 0..l {
        for j in 0..l {
            out[i * l + j] = a[i] * b[j] - b[i] * a[j];
        }
    }
    out
}

/// Row-major product of two `m × m` matrices.
pub fn mat_mul(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for k in 0..m {
            let aik = a[i * m + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..m {
                out[i * m + j] += aik * b[k * m + j];
            }
        }
    }
    out
}

/// `aᵀ b` for row-major `m × m` matrices.
pub fn mat_tn(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for k in 0..m {
        for i in 0..m {
            let aki = a[k * m + i];
            for j in 0..m {
                out[i * m + j] += aki * b[k * m + j];
            }
        }
    }
    out
}

pub fn transpose(a: &[f64], m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            out[j * m + i] = a[i * m + j];
        }
    }
    out
}

pub fn identity(m: usize) -> Vec<f64> {
    let mut out = vec![0.0; m * m];
    for i in 0..m {
        out[i * m + i] = 1.0;
    }
    out
}

fn determinant(a: &[f64], m: usize) -> f64 {
    match m {
        2 => a[0] * a[3] - a[1] * a[2],
        3 => {
            a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                + a[2] * (a[3] * a[7] - a[4] * a[6])
        }
        _ => DMatrix::from_row_slice(m, m, a).determinant(),
    }
}

fn polar_so2(y: &[f64], out: &mut [f64]) -> Result<(), GeometryError> {
    let (a, b, c, d) = (y[0], y[1], y[2], y[3]);
    // the nearest rotation maximizes cos θ (a + d) + sin θ (c − b)
    let s = (a + d).hypot(c - b);
    let t = (a - d).hypot(b + c);
    let smax = 0.5 * (s + t);
    let smin = 0.5 * (s - t).abs();
    if !(s > 0.0) || !(smin > 1e-14 * smax) || !smax.is_finite() {
        return Err(GeometryError::DegeneratePoint(format!(
            "singular values {smax:e}, {smin:e}"
        )));
    }
    let (cs, sn) = ((a + d) / s, (c - b) / s);
    out.copy_from_slice(&[cs, -sn, sn, cs]);
    Ok(())
}

fn polar_som(y: &[f64], m: usize, out: &mut [f64]) -> Result<(), GeometryError> {
    if y.iter().any(|v| !v.is_finite()) {
        return Err(GeometryError::DegeneratePoint("non-finite entries".into()));
    }
    if determinant(y, m) > 0.0 {
        if let Some(q) = newton_polar(y, m) {
            out.copy_from_slice(&q);
            return Ok(());
        }
    }
    svd_polar(y, m, out)
}

/// Scaled Newton iteration for the orthogonal polar factor; `None` when it
/// stalls or the matrix is too ill-conditioned, in which case the SVD path decides.
fn newton_polar(y: &[f64], m: usize) -> Option<Vec<f64>> {
    let mut x = DMatrix::from_row_slice(m, m, y);
    for _ in 0..60 {
        let inv = x.clone().try_inverse()?;
        let nx = x.norm();
        let ni = inv.norm();
        if !(nx * ni < 1e13) {
            return None;
        }
        let gamma = (ni / nx).sqrt();
        let next = (&x * gamma + inv.transpose() / gamma) * 0.5;
        let step = (&next - &x).norm();
        x = next;
        if step <= 1e-15 * (m as f64).sqrt() {
            break;
        }
    }
    let q: Vec<f64> = x.transpose().iter().copied().collect();
    let orth = (x.transpose() * &x - DMatrix::identity(m, m)).norm();
    (orth <= 1e-13).then_some(q)
}

fn svd_polar(y: &[f64], m: usize, out: &mut [f64]) -> Result<(), GeometryError> {
    let svd = DMatrix::from_row_slice(m, m, y).svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    let (imin, smin) = sv
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    if !(smin > 1e-14 * smax) {
        return Err(GeometryError::DegeneratePoint(format!(
            "rank deficient, singular values {smax:e} .. {smin:e}"
        )));
    }
    let mut u = svd.u.ok_or_else(|| GeometryError::DegeneratePoint("svd failed".into()))?;
    let vt = svd
        .v_t
        .ok_or_else(|| GeometryError::DegeneratePoint("svd failed".into()))?;
    let mut q = &u * &vt;
    if q.determinant() < 0.0 {
        u.column_mut(imin).neg_mut();
        q = &u * &vt;
    }
    for i in 0..m {
        for j in 0..m {
            out[i * m + j] = q[(i, j)];
        }
    }
    Ok(())
}

/// Matrix exponential of a skew-symmetric `m × m` matrix (row-major), by
/// scaling and squaring of the Taylor series.
pub fn skew_exponential(a: &[f64], m: usize) -> Vec<f64> {
    assert_eq!(a.len(), m * m);
    let asym = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| (a[i * m + j] + a[j * m + i]).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(asym <= 1e-12, "skew_exponential needs a skew matrix (defect {asym:e})");
    let nrm = norm(a);
    let mut squarings = 0;
    let mut scale = 1.0;
    while nrm * scale > 0.25 {
        scale *= 0.5;
        squarings += 1;
    }
    let b: Vec<f64> = a.iter().map(|v| v * scale).collect();
    let mut sum = identity(m);
    let mut term = identity(m);
    for k in 1..=24 {
        term = mat_mul(&term, &b, m);
        let inv_k = 1.0 / k as f64;
        term.iter_mut().for_each(|v| *v *= inv_k);
        for (s, t) in sum.iter_mut().zip(&term) {
            *s += t;
        }
        if norm(&term) < 1e-18 {
            break;
        }
    }
    for _ in 0..squarings {
        sum = mat_mul(&sum, &sum, m);
    }
    sum
}

/// Initial position and velocity sampled on the spatial torus.
#[derive(Clone, Debug, PartialEq)]
pub struct CauchyData {
    pub torus: Torus,
    pub target: TargetManifold,
    /// Target values, `points × ambient_dim`.
    pub phi: Vec<f64>,
    /// Tangent vectors along `phi`, same layout.
    pub psi: Vec<f64>,
}

impl CauchyData {
    /// Validates the data, retracts `phi` and re-projects `psi` onto the tangent
    /// spaces. Velocities off the tangent space by more than
    /// [`TANGENCY_REJECT_TOL`] are rejected.
    pub fn new(
        torus: Torus,
        target: TargetManifold,
        phi: Vec<f64>,
        psi: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let d = target.ambient_dim();
        let expected = torus.points() * d;
        for len in [phi.len(), psi.len()] {
            if len != expected {
                return Err(GeometryError::Length { expected, got: len });
            }
        }
        let mut phi_out = vec![0.0; expected];
        let mut psi_out = psi.clone();
        for (node, ((p, q), (po, qo))) in phi
            .chunks_exact(d)
            .zip(psi.chunks_exact(d))
            .zip(phi_out.chunks_exact_mut(d).zip(psi_out.chunks_exact_mut(d)))
            .enumerate()
        {
            let defect = target.constraint_defect(p);
            if !(defect <= ON_TARGET_TOL) {
                return Err(GeometryError::OffTarget { node, defect });
            }
            if q.iter().any(|v| !v.is_finite()) {
                return Err(GeometryError::TangencyViolation {
                    node,
                    defect: f64::NAN,
                });
            }
            target.project_into(p, po)?;
            let defect = target.tangency_defect(po, q);
            if !(defect <= TANGENCY_REJECT_TOL) {
                return Err(GeometryError::TangencyViolation { node, defect });
            }
            target.tangent_project_in_place(po, qo);
        }
        Ok(Self {
            torus,
            target,
            phi: phi_out,
            psi: psi_out,
        })
    }

    /// Validates stored data without touching its bits: `phi` must be on the
    /// target and `psi` tangent to rounding accuracy.
    pub(crate) fn from_stored(
        torus: Torus,
        target: TargetManifold,
        phi: Vec<f64>,
        psi: Vec<f64>,
    ) -> Result<Self, GeometryError> {
        let checked = Self::new(torus, target, phi.clone(), psi.clone())?;
        let d = target.ambient_dim();
        for (node, (p, q)) in phi.chunks_exact(d).zip(psi.chunks_exact(d)).enumerate() {
            let defect = target.tangency_defect(p, q);
            let scale = 1.0 + q.iter().map(|v| v.abs()).fold(0.0, f64::max);
            if defect > 1e-12 * scale {
                return Err(GeometryError::TangencyViolation { node, defect });
            }
        }
        for (node, (a, b)) in phi.chunks_exact(d).zip(checked.phi.chunks_exact(d)).enumerate() {
            if a.iter().zip(b).any(|(x, y)| (x - y).abs() > 1e-12) {
                return Err(GeometryError::OffTarget { node, defect: target.constraint_defect(a) });
            }
        }
        Ok(Self { torus, target, phi, psi })
    }

    pub fn dim(&self) -> usize {
        self.target.ambient_dim()
    }

    pub fn phi_at(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.phi[i * d..(i + 1) * d]
    }

    pub fn psi_at(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.psi[i * d..(i + 1) * d]
    }

    /// `∫ |ψ|² + |∇φ|² dx` with the central-difference gradient.
    pub fn data_energy(&self) -> f64 {
        let d = self.dim();
        let grads = crate::mesh::grad_x_values(&self.torus, d, &self.phi);
        let mut s = self.psi.iter().map(|v| v * v).sum::<f64>();
        for g in &grads {
            s += g.iter().map(|v| v * v).sum::<f64>();
        }
        s * self.torus.cell_volume()
    }

    /// `∫ |∇φ|² dx`.
    pub fn dirichlet_energy(&self) -> f64 {
        let d = self.dim();
        let grads = crate::mesh::grad_x_values(&self.torus, d, &self.phi);
        grads
            .iter()
            .map(|g| g.iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            * self.torus.cell_volume()
    }

    /// `∫ |ψ|² dx`.
    pub fn kinetic_energy(&self) -> f64 {
        self.psi.iter().map(|v| v * v).sum::<f64>() * self.torus.cell_volume()
    }

    /// Translates the data by `shift` nodes along axis 0.
    pub fn translated(&self, shift: isize) -> Self {
        let d = self.dim();
        let mut phi = vec![0.0; self.phi.len()];
        let mut psi = vec![0.0; self.psi.len()];
        for i in 0..self.torus.points() {
            let src = self.torus.shift(i, 0, -shift);
            phi[i * d..(i + 1) * d].copy_from_slice(self.phi_at(src));
            psi[i * d..(i + 1) * d].copy_from_slice(self.psi_at(src));
        }
        Self { phi, psi, ..*self }
    }
}

/// `(φ + tεψ)/|φ + tεψ|` at every spatial node.
pub fn sphere_comparison_map(data: &CauchyData, eps: f64, t: f64) -> Vec<f64> {
    assert!(data.target.is_sphere(), "sphere comparison map needs a sphere target");
    let mut out = vec![0.0; data.phi.len()];
    let s = t * eps;
    for ((o, p), q) in out.iter_mut().zip(&data.phi).zip(&data.psi) {
        *o = p + s * q;
    }
    let d = data.dim();
    for v in out.chunks_exact_mut(d) {
        let n = norm(v);
        v.iter_mut().for_each(|x| *x /= n);
    }
    out
}

/// `φ · exp(tε φᵀψ)` at every spatial node.
pub fn so_comparison_map(data: &CauchyData, eps: f64, t: f64) -> Vec<f64> {
    let TargetManifold::SpecialOrthogonal { order: m } = data.target else {
        panic!("SO(m) comparison map needs an SO(m) target");
    };
    let mut out = Vec::with_capacity(data.phi.len());
    for i in 0..data.torus.points() {
        let p = data.phi_at(i);
        let mut omega = mat_tn(p, data.psi_at(i), m);
        // exact skew part, so rounding never trips the exponential's check
        for r in 0..m {
            for c in r..m {
                let s = 0.5 * (omega[r * m + c] - omega[c * m + r]);
                omega[r * m + c] = s * t * eps;
                omega[c * m + r] = -s * t * eps;
            }
        }
        out.extend(mat_mul(p, &skew_exponential(&omega, m), m));
    }
    out
}

/// The comparison map matching the data's target.
pub fn comparison_map(data: &CauchyData, eps: f64, t: f64) -> Vec<f64> {
    match data.target {
        TargetManifold::Sphere { .. } => sphere_comparison_map(data, eps, t),
        TargetManifold::SpecialOrthogonal { .. } => so_comparison_map(data, eps, t),
    }
}
