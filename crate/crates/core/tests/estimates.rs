use wavemap_core::diagnostics::{
    apriori_bounds, calibrate_bounds, dual_pairing, energy_identity_residual, energy_trace, physical_energy,
    plane_generator, weak_wave_residual, SkewTestField, WeakTestFamily,
};
use wavemap_core::oracle::reference_field;
use wavemap_core::variational::{minimize, MinimizeOptions, MinimizeReport};
use wavemap_core::{presets, CauchyData, Grid, SpaceTimeField, TargetManifold, Torus};

fn solve(data: &CauchyData, eps: f64, nt: usize, dt: f64) -> MinimizeReport {
    let grid = Grid::rescaled(data.torus, nt, dt).unwrap();
    let r = minimize(data, eps, &grid, &MinimizeOptions::default()).unwrap();
    assert_eq!(r.termination, wavemap_core::Termination::GradientTol);
    r
}

fn moving(nx: usize, target: TargetManifold) -> CauchyData {
    presets::geodesic(Torus::new(1, nx).unwrap(), target, 1.0, 0.3).unwrap()
}

#[test]
fn initial_tail_energy_is_the_functional() {
    for target in [TargetManifold::sphere(3).unwrap(), TargetManifold::special_orthogonal(3).unwrap()] {
        let r = solve(&moving(32, target), 0.3, 80, 0.15);
        let tr = energy_trace(&r.field, 0.3);
        assert!((tr.h[0] - r.final_value.total).abs() <= 1e-12 * r.final_value.total);
        assert_eq!(tr.len(), 81);
    }
}

#[test]
fn energy_decreases_up_to_the_identity_residual() {
    let r = solve(&moving(64, TargetManifold::sphere(3).unwrap()), 0.2, 160, 0.1);
    let tr = energy_trace(&r.field, 0.2);
    let id = energy_identity_residual(&tr);
    let slack = 2.0 * tr.dt * id.max_abs.max(id.corrected_max_abs) + 1e-15;
    for j in 1..tr.len() / 2 {
        assert!(tr.e[j + 1] <= tr.e[j] + slack, "slice {j}");
    }
    assert!(tr.d.iter().all(|v| *v >= 0.0));
}

#[test]
fn static_data_satisfies_the_identity_exactly() {
    let data = presets::geodesic(Torus::new(1, 64).unwrap(), TargetManifold::sphere(3).unwrap(), 1.0, 0.0).unwrap();
    for eps in [0.4, 0.1] {
        let r = solve(&data, eps, 160, 0.1);
        let tr = energy_trace(&r.field, eps);
        let id = energy_identity_residual(&tr);
        assert!(id.corrected_weighted_l1 <= 1e-6 * eps * eps, "{}", id.corrected_weighted_l1);
        assert!(tr.k.iter().all(|v| v.abs() <= 1e-20));
    }
}

#[test]
fn identity_residual_refines() {
    let eps = 0.2;
    let coarse = solve(&moving(64, TargetManifold::sphere(3).unwrap()), eps, 80, 0.2);
    let fine = solve(&moving(64, TargetManifold::sphere(3).unwrap()), eps, 160, 0.1);
    let a = energy_identity_residual(&energy_trace(&coarse.field, eps)).corrected_weighted_l1;
    let b = energy_identity_residual(&energy_trace(&fine.field, eps)).corrected_weighted_l1;
    assert!(a / b >= 3.0, "{a:.3e} -> {b:.3e}");
}

#[test]
fn lower_bound_excess_shrinks_with_dt() {
    let eps = 0.3;
    let data = moving(32, TargetManifold::sphere(3).unwrap());
    let excess = |nt: usize, dt: f64| {
        let r = solve(&data, eps, nt, dt);
        let tr = energy_trace(&r.field, eps);
        let c = calibrate_bounds(&tr, &data, eps);
        let b = apriori_bounds(&tr, &data, eps, &c);
        let lb = b.iter().find(|x| x.name == "lower_bound").unwrap();
        (lb.lhs - lb.rhs).max(0.0) / lb.rhs
    };
    let a = excess(60, 0.2);
    let b = excess(120, 0.1);
    assert!(a <= 0.05 && b <= a, "{a:.3e} -> {b:.3e}");
}

#[test]
fn initial_energy_scales_like_eps_squared() {
    let data = moving(64, TargetManifold::sphere(3).unwrap());
    let e = |eps: f64| energy_trace(&solve(&data, eps, 160, 0.1).field, eps).e[0];
    let ratio = e(0.1) / e(0.2);
    assert!((0.15..=0.35).contains(&ratio), "{ratio}");
}

#[test]
fn calibrated_bounds_hold_down_the_sweep() {
    let data = moving(64, TargetManifold::special_orthogonal(3).unwrap());
    let r = solve(&data, 0.4, 160, 0.1);
    let c = calibrate_bounds(&energy_trace(&r.field, 0.4), &data, 0.4);
    assert_eq!(c.reference_eps, 0.4);
    for eps in [0.4, 0.2] {
        let r = solve(&data, eps, 160, 0.1);
        let reports = apriori_bounds(&energy_trace(&r.field, eps), &data, eps, &c);
        assert_eq!(reports.len(), 12);
        for b in reports {
            assert!(b.pass, "eps {eps}: {} ratio {}", b.name, b.ratio);
        }
    }
}

#[test]
fn constant_data_passes_everything_trivially() {
    let torus = Torus::new(2, 8).unwrap();
    let data = presets::constant(torus, TargetManifold::sphere(3).unwrap()).unwrap();
    let r = solve(&data, 0.2, 20, 0.6);
    let tr = energy_trace(&r.field, 0.2);
    let c = calibrate_bounds(&tr, &data, 0.2);
    for b in apriori_bounds(&tr, &data, 0.2, &c) {
        assert!(b.pass && b.lhs == 0.0, "{}", b.name);
    }
    let id = energy_identity_residual(&tr);
    assert_eq!(id.weighted_l1, 0.0);
    let h = SkewTestField::from_terms(torus, 3, &[(&|x: [f64; 2]| x[0].cos(), plane_generator(3, 0, 1))]);
    assert_eq!(dual_pairing(&r.field, &h, 1.0, 0.2).unwrap().value, 0.0);
}

#[test]
fn dual_pairing_vanishes_for_zero_test_field() {
    let data = moving(32, TargetManifold::sphere(3).unwrap());
    let r = solve(&data, 0.3, 80, 0.15);
    let zero = SkewTestField::from_terms(data.torus, 3, &[]);
    let p = dual_pairing(&r.field, &zero, 1.0, 0.3).unwrap();
    assert_eq!((p.value, p.ratio), (0.0, 0.0));
    let h = SkewTestField::from_terms(data.torus, 3, &[(&|x: [f64; 2]| x[0].cos(), plane_generator(3, 0, 1))]);
    assert!(dual_pairing(&r.field, &h, 1.0, 0.3).unwrap().value.abs() > 0.0);
    assert!(dual_pairing(&r.field, &h, 100.0, 0.3).is_err());
}

#[test]
fn dual_pairing_shrinks_with_eps() {
    let data = moving(64, TargetManifold::sphere(3).unwrap());
    let h = SkewTestField::from_terms(data.torus, 3, &[(&|x: [f64; 2]| x[0].cos(), plane_generator(3, 0, 1))]);
    let ratio = |eps: f64| dual_pairing(&solve(&data, eps, 160, 0.1).field, &h, 1.0, eps).unwrap().value.abs();
    let (a, b) = (ratio(0.4), ratio(0.1));
    assert!(b < a, "{a:.3e} -> {b:.3e}");
}

fn exact_field(nx: usize, nt: usize, dt: f64, eps: f64, speed: f64, target: TargetManifold) -> SpaceTimeField {
    let torus = Torus::new(1, nx).unwrap();
    let grid = Grid::physical(torus, nt, dt, eps).unwrap();
    reference_field(
        &presets::geodesic_family(target),
        &presets::geodesic_wave_data(torus, 1.0, speed),
        &grid,
        eps,
    )
}

#[test]
fn weak_residual_of_a_static_harmonic_map_is_zero() {
    for target in [TargetManifold::sphere(3).unwrap(), TargetManifold::special_orthogonal(3).unwrap()] {
        let v = exact_field(32, 40, 0.05, 0.1, 0.0, target);
        let w = weak_wave_residual(&v, &WeakTestFamily::standard(0.8), 0.1).unwrap();
        assert!(w.max_residual <= 1e-6, "{}", w.max_residual);
        assert_eq!(w.per_test.len(), 12);
    }
}

#[test]
fn weak_residual_of_the_exact_wave_map_is_second_order() {
    let target = TargetManifold::sphere(3).unwrap();
    let coarse = exact_field(32, 40, 0.05, 0.1, 0.3, target);
    let fine = exact_field(64, 80, 0.025, 0.1, 0.3, target);
    let fam = WeakTestFamily::standard(0.8);
    let a = weak_wave_residual(&coarse, &fam, 0.1).unwrap().max_residual;
    let b = weak_wave_residual(&fine, &fam, 0.1).unwrap().max_residual;
    assert!((3.0..=5.0).contains(&(a / b)), "{a:.3e} -> {b:.3e}");
}

#[test]
fn rotation_group_weak_form_reports_a_remainder() {
    let v = exact_field(32, 40, 0.05, 0.1, 0.3, TargetManifold::special_orthogonal(3).unwrap());
    let w = weak_wave_residual(&v, &WeakTestFamily::standard(0.8), 0.1).unwrap();
    assert_eq!(w.remainder.as_ref().map(Vec::len), Some(12));
    assert!(w.max_remainder.unwrap() > 0.0);
    let s = exact_field(32, 40, 0.05, 0.1, 0.3, TargetManifold::sphere(3).unwrap());
    assert!(weak_wave_residual(&s, &WeakTestFamily::standard(0.8), 0.1).unwrap().remainder.is_none());
    assert!(weak_wave_residual(&s, &WeakTestFamily::standard(5.0), 0.1).is_err());
}

#[test]
fn physical_energy_of_static_data() {
    let data = presets::geodesic(Torus::new(1, 64).unwrap(), TargetManifold::sphere(3).unwrap(), 1.0, 0.0).unwrap();
    let r = solve(&data, 0.1, 160, 0.1);
    let pe = physical_energy(&r.field, &data, 0.1, 0.8, 0.05).unwrap();
    assert!(pe.pass);
    assert!((pe.initial_slice_energy - pe.data_energy).abs() <= 1e-10 * pe.data_energy);
    assert!(pe.energy.iter().all(|e| (e / pe.data_energy - 1.0).abs() <= 0.05));
}

#[test]
fn physical_energy_of_moving_data_stays_below_the_initial_energy() {
    let data = moving(64, TargetManifold::sphere(3).unwrap());
    let r = solve(&data, 0.1, 160, 0.1);
    let pe = physical_energy(&r.field, &data, 0.1, 0.8, 0.05).unwrap();
    assert!(pe.pass, "{}", pe.max_ratio);
    assert!(physical_energy(&r.field, &data, 0.1, 5.0, 0.05).is_err());
}

#[test]
fn still_data_meets_the_sharp_initial_energy_bound() {
    let data = presets::geodesic(Torus::new(1, 64).unwrap(), TargetManifold::sphere(3).unwrap(), 1.0, 0.0).unwrap();
    let r = solve(&data, 0.4, 160, 0.1);
    let c = calibrate_bounds(&energy_trace(&r.field, 0.4), &data, 0.4);
    for eps in [0.4, 0.2, 0.1] {
        let r = solve(&data, eps, 160, 0.1);
        let reports = apriori_bounds(&energy_trace(&r.field, eps), &data, eps, &c);
        let b = reports.iter().find(|x| x.name == "sharp_initial_energy").unwrap();
        assert!(b.pass, "eps {eps}: ratio {}", b.ratio);
    }
}
