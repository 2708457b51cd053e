use std::f64::consts::PI;

use wavemap_core::oracle::{
    error_norms, linear_wave_evolve, reference_field, reference_wave_map, wave_energy, GeodesicFamily, ScalarWaveData,
};
use wavemap_core::{presets, Grid, SpaceTimeField, TargetManifold, Torus};

#[test]
fn linear_wave_conserves_energy() {
    for n in [1, 2] {
        let torus = Torus::new(n, 32).unwrap();
        let theta0 = torus.sample(|x| (2.0 * x[0]).sin() + 0.3 * (x[0] + x[1]).cos());
        let theta1 = torus.sample(|x| x[0].cos() - 0.2 * (3.0 * x[1]).sin());
        let e0 = wave_energy(&torus, &theta0, &theta1);
        for t in [0.3, 1.7, 10.0] {
            let (p, v) = linear_wave_evolve(&torus, &theta0, &theta1, t);
            let e = wave_energy(&torus, &p, &v);
            assert!((e - e0).abs() <= 1e-10 * e0, "n={n} t={t}: {e} vs {e0}");
        }
    }
}

#[test]
fn wave_energy_of_a_single_mode() {
    let torus = Torus::new(1, 64).unwrap();
    let s = torus.sample(|x| (3.0 * x[0]).sin());
    let zero = vec![0.0; 64];
    // ∫ 9 cos² 3x = 9π
    assert!((wave_energy(&torus, &s, &zero) - 9.0 * PI).abs() < 1e-11);
    assert!((wave_energy(&torus, &zero, &s) - PI).abs() < 1e-12);
}

#[test]
fn reference_stays_on_the_target() {
    let torus = Torus::new(1, 32).unwrap();
    let wave = presets::geodesic_wave_data(torus, 2.0, 0.4);
    for target in [
        TargetManifold::sphere(3).unwrap(),
        TargetManifold::sphere(2).unwrap(),
        TargetManifold::special_orthogonal(2).unwrap(),
        TargetManifold::special_orthogonal(4).unwrap(),
    ] {
        let fam = presets::geodesic_family(target);
        for t in [0.0, 0.25, 3.0] {
            let r = reference_wave_map(&fam, &wave, t);
            for p in r.chunks_exact(target.ambient_dim()) {
                assert!(target.constraint_defect(p) <= 1e-13);
            }
        }
    }
}

#[test]
fn geodesic_has_unit_speed_in_the_circle_metric() {
    let fam = GeodesicFamily::SphereCircle { ambient: 3 };
    for s in [0.0, 1.0, 2.5] {
        let d = fam.derivative(s);
        assert!((d.iter().map(|v| v * v).sum::<f64>() - 1.0).abs() < 1e-14);
    }
    let rot = GeodesicFamily::planar_rotation(3);
    assert!(rot.target().ambient_dim() == 9);
    let d = rot.derivative(0.4);
    assert!((d.iter().map(|v| v * v).sum::<f64>() - 2.0).abs() < 1e-14);
}

#[test]
fn winding_map_is_a_static_solution() {
    let torus = Torus::new(1, 16).unwrap();
    let wave = ScalarWaveData {
        torus,
        winding: 3.0,
        theta0: vec![0.0; 16],
        theta1: vec![0.0; 16],
    };
    let fam = presets::geodesic_family(TargetManifold::sphere(3).unwrap());
    assert_eq!(reference_wave_map(&fam, &wave, 0.0), reference_wave_map(&fam, &wave, 5.0));
}

#[test]
fn error_norms_examples() {
    let torus = Torus::new(1, 16).unwrap();
    let target = TargetManifold::sphere(3).unwrap();
    let grid = Grid::physical(torus, 20, 0.05, 0.1).unwrap();
    let fam = presets::geodesic_family(target);
    let r = reference_field(&fam, &presets::geodesic_wave_data(torus, 1.0, 0.3), &grid, 0.1);
    let same = error_norms(&r, &r, (0.0, 0.8)).unwrap();
    assert_eq!((same.l2, same.max_slice), (0.0, 0.0));

    // shifting one component by δ gives δ·sqrt(2π) per slice and δ·sqrt(2π·0.8) overall
    let delta = 1e-3;
    let mut shifted = r.clone();
    shifted.values.iter_mut().step_by(3).for_each(|v| *v += delta);
    let e = error_norms(&shifted, &r, (0.0, 0.8)).unwrap();
    assert!((e.max_slice - delta * (2.0 * PI).sqrt()).abs() < 1e-15);
    assert!((e.l2 - delta * (2.0 * PI * 0.8).sqrt()).abs() < 1e-14);

    let longer = Grid::physical(torus, 21, 0.05, 0.1).unwrap();
    let mut values = r.values.clone();
    values.extend_from_slice(r.slice(20));
    let other = SpaceTimeField::new(longer, target, values).unwrap();
    assert!(error_norms(&other, &r, (0.0, 0.8)).is_err());
}

#[test]
fn rescaled_reference_holds_physical_time() {
    let torus = Torus::new(1, 16).unwrap();
    let target = TargetManifold::special_orthogonal(3).unwrap();
    let fam = presets::geodesic_family(target);
    let wave = presets::geodesic_wave_data(torus, 1.0, 0.3);
    let eps = 0.25;
    let rescaled = reference_field(&fam, &wave, &Grid::rescaled(torus, 40, 0.25).unwrap(), eps);
    let physical = reference_field(&fam, &wave, &Grid::physical(torus, 40, 0.25 * eps, eps).unwrap(), eps);
    assert_eq!(rescaled.to_physical(eps).values, physical.values);
}
