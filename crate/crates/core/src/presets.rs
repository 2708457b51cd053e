//! Ready-made Cauchy data and the exact solutions they launch.

use crate::geometry::{identity, mat_mul, CauchyData, GeometryError, TargetManifold};
use crate::mesh::Torus;
use crate::oracle::{GeodesicFamily, ScalarWaveData};

/// Constant map at a fixed point with zero velocity.
pub fn constant(torus: Torus, target: TargetManifold) -> Result<CauchyData, GeometryError> {
    let point = match target {
        TargetManifold::Sphere { ambient } => {
            let mut p = vec![0.0; ambient];
            p[ambient - 1] = 1.0;
            p
        }
        TargetManifold::SpecialOrthogonal { order } => identity(order),
    };
    let d = target.ambient_dim();
    CauchyData::new(torus, target, point.repeat(torus.points()), vec![0.0; torus.points() * d])
}

/// The geodesic each preset winds along.
pub fn geodesic_family(target: TargetManifold) -> GeodesicFamily {
    match target {
        TargetManifold::Sphere { ambient } => GeodesicFamily::SphereCircle { ambient },
        TargetManifold::SpecialOrthogonal { order } => GeodesicFamily::planar_rotation(order),
    }
}

/// Scalar wave data `θ₀ = k x₁`, `θ₁ = a cos x₁`.
pub fn geodesic_wave_data(torus: Torus, k: f64, speed: f64) -> ScalarWaveData {
    ScalarWaveData {
        torus,
        winding: k,
        theta0: vec![0.0; torus.points()],
        theta1: torus.sample(|x| speed * x[0].cos()),
    }
}

/// `φ = γ(k x₁)`, `ψ = a cos x₁ · γ'(k x₁)` along the family's geodesic; the
/// exact solution is `γ(k x₁ + a cos x₁ sin t)`. With `a = 0` the data is a
/// static harmonic map.
pub fn geodesic(torus: Torus, target: TargetManifold, k: f64, speed: f64) -> Result<CauchyData, GeometryError> {
    let fam = geodesic_family(target);
    let mut phi = Vec::with_capacity(torus.points() * target.ambient_dim());
    let mut psi = Vec::with_capacity(phi.capacity());
    for i in 0..torus.points() {
        let x = torus.coords(i)[0];
        phi.extend(fam.eval(k * x));
        psi.extend(fam.derivative(k * x).into_iter().map(|v| v * speed * x.cos()));
    }
    CauchyData::new(torus, target, phi, psi)
}

/// SO(m) data leaving the geodesic: `φ = exp(k x₁ A₁₂)`, `ψ = a cos x₁ · φ A₁₃`.
pub fn twisted(torus: Torus, order: usize, k: f64, speed: f64) -> Result<CauchyData, GeometryError> {
    let target = TargetManifold::special_orthogonal(order)?;
    if order < 3 {
        return Err(GeometryError::InvalidTarget("twisted data needs SO(m) with m >= 3".into()));
    }
    let fam = GeodesicFamily::planar_rotation(order);
    let mut b = vec![0.0; order * order];
    b[2 * order] = 1.0;
    b[2] = -1.0;
    let mut phi = Vec::new();
    let mut psi = Vec::new();
    for i in 0..torus.points() {
        let x = torus.coords(i)[0];
        let p = fam.eval(k * x);
        psi.extend(mat_mul(&p, &b, order).into_iter().map(|v| v * speed * x.cos()));
        phi.extend(p);
    }
    CauchyData::new(torus, target, phi, psi)
}
