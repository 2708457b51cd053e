use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wavemap_core::geometry::dot;
use wavemap_core::oracle::brute_force_functional;
use wavemap_core::variational::{
    comparison_field, enforce_cauchy, evaluate, functional_difference, tangent_gradient, FIXED_SLICES,
};
use wavemap_core::{presets, Grid, SpaceTimeField, TargetManifold, Torus};

fn random_field(grid: Grid, target: TargetManifold, rng: &mut ChaCha8Rng) -> SpaceTimeField {
    let d = target.ambient_dim();
    SpaceTimeField::from_slices(grid, target, |_| {
        let mut s = Vec::with_capacity(grid.points() * d);
        for _ in 0..grid.points() {
            let y: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
            s.extend(target.project(&y).unwrap());
        }
        s
    })
}

fn targets() -> [TargetManifold; 4] {
    [
        TargetManifold::sphere(3).unwrap(),
        TargetManifold::sphere(2).unwrap(),
        TargetManifold::special_orthogonal(2).unwrap(),
        TargetManifold::special_orthogonal(3).unwrap(),
    ]
}

#[test]
fn brute_force_agrees_on_random_fields() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut count = 0;
    for n in [1, 2] {
        for nx in [8, 16] {
            for nt in [8, 16] {
                let torus = Torus::new(n, nx).unwrap();
                let dt = 12.0 / nt as f64;
                for (k, target) in targets().into_iter().enumerate() {
                    let eps = [0.4, 0.2, 0.1, 0.05][k];
                    let grid = if k % 2 == 0 {
                        Grid::rescaled(torus, nt, dt).unwrap()
                    } else {
                        Grid::physical(torus, nt, dt * eps, eps).unwrap()
                    };
                    let u = random_field(grid, target, &mut rng);
                    let fast = evaluate(&u, eps).unwrap().total;
                    let slow = brute_force_functional(&u, eps);
                    assert!(((fast - slow) / slow).abs() <= 1e-10, "{fast} vs {slow}");
                    count += 1;
                }
            }
        }
    }
    assert!(count >= 20);
}

#[test]
fn brute_force_agrees_on_comparison_maps() {
    let torus = Torus::new(1, 32).unwrap();
    for target in targets() {
        let data = presets::geodesic(torus, target, 2.0, 0.4).unwrap();
        let grid = Grid::rescaled(torus, 40, 0.3).unwrap();
        let u = comparison_field(&data, &grid, 0.3);
        let fast = evaluate(&u, 0.3).unwrap().total;
        assert!(((fast - brute_force_functional(&u, 0.3)) / fast).abs() <= 1e-10);
    }
    let c = presets::constant(torus, TargetManifold::sphere(3).unwrap()).unwrap();
    let grid = Grid::rescaled(torus, 16, 1.0).unwrap();
    assert_eq!(brute_force_functional(&comparison_field(&c, &grid, 0.2), 0.2), 0.0);
}

#[test]
fn parts_add_up() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let grid = Grid::rescaled(Torus::new(2, 8).unwrap(), 12, 1.0).unwrap();
    let u = random_field(grid, TargetManifold::special_orthogonal(3).unwrap(), &mut rng);
    let v = evaluate(&u, 0.3).unwrap();
    assert!((v.total - v.inertia_part - v.dirichlet_part).abs() <= 1e-12 * v.total);
    assert!(v.inertia_part > 0.0 && v.dirichlet_part > 0.0);
}

#[test]
fn rescaled_and_physical_functionals_differ_by_eps_cubed() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for eps in [0.4, 0.1] {
        let grid = Grid::rescaled(Torus::new(1, 16).unwrap(), 20, 0.6).unwrap();
        let u = random_field(grid, TargetManifold::sphere(3).unwrap(), &mut rng);
        let v = u.to_physical(eps);
        let i = evaluate(&u, eps).unwrap().total;
        let e = evaluate(&v, eps).unwrap().total;
        assert!((e - i / eps.powi(3)).abs() / e <= 1e-10, "{e} vs {}", i / eps.powi(3));
    }
}

#[test]
fn comparison_map_energy_is_within_the_quadratic_bound() {
    let torus = Torus::new(1, 64).unwrap();
    let data = presets::geodesic(torus, TargetManifold::sphere(3).unwrap(), 1.0, 0.0).unwrap();
    let grid = Grid::rescaled(torus, 160, 0.1).unwrap();
    let eps: f64 = 0.2;
    let u = enforce_cauchy(&comparison_field(&data, &grid, eps), &data, eps).unwrap();
    let total = evaluate(&u, eps).unwrap().total;
    assert!(total <= eps * eps * 2.0 * std::f64::consts::PI * 1.5);
}

/// Random tangent direction, zero on the fixed slices.
fn tangent_direction(u: &SpaceTimeField, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let d = u.dim();
    let fixed = FIXED_SLICES * u.slice_len();
    let mut delta = vec![0.0; u.values.len()];
    for (k, (w, p)) in delta.chunks_exact_mut(d).zip(u.values.chunks_exact(d)).enumerate() {
        if k * d < fixed {
            continue;
        }
        let r: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        w.copy_from_slice(&u.target.tangent_project(p, &r));
    }
    delta
}

fn retract(u: &SpaceTimeField, delta: &[f64], h: f64) -> SpaceTimeField {
    let d = u.dim();
    let mut out = u.clone();
    for (o, (p, w)) in out
        .values
        .chunks_exact_mut(d)
        .zip(u.values.chunks_exact(d).zip(delta.chunks_exact(d)))
    {
        let y: Vec<f64> = p.iter().zip(w).map(|(a, b)| a + h * b).collect();
        u.target.project_into(&y, o).unwrap();
    }
    out
}

#[test]
fn tangent_gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let torus = Torus::new(1, 16).unwrap();
    for target in [TargetManifold::sphere(3).unwrap(), TargetManifold::special_orthogonal(3).unwrap()] {
        let data = presets::geodesic(torus, target, 1.0, 0.3).unwrap();
        let grid = Grid::rescaled(torus, 24, 0.5).unwrap();
        let eps = 0.3;
        let mut u = comparison_field(&data, &grid, eps);
        // roughen the free slices so every term of the gradient is exercised
        let bump = tangent_direction(&u, &mut rng);
        u = retract(&u, &bump, 0.05);
        let grad = tangent_gradient(&u, eps);
        let gnorm = dot(&grad, &grad).sqrt();
        for _ in 0..5 {
            let delta = tangent_direction(&u, &mut rng);
            let dnorm = dot(&delta, &delta).sqrt();
            let exact = dot(&grad, &delta);
            for h in [1e-3, 5e-4] {
                let plus = retract(&u, &delta, h);
                let minus = retract(&u, &delta, -h);
                let fd = functional_difference(&minus, &plus, eps) / (2.0 * h);
                let err = (fd - exact).abs() / (gnorm * dnorm);
                assert!(err <= 1e-5, "{target:?} h={h}: {err:.3e}");
            }
        }
    }
}

#[test]
fn gradient_vanishes_on_fixed_slices_and_is_tangent() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let grid = Grid::rescaled(Torus::new(2, 8).unwrap(), 12, 1.0).unwrap();
    for target in targets() {
        let u = random_field(grid, target, &mut rng);
        let g = tangent_gradient(&u, 0.2);
        let fixed = FIXED_SLICES * u.slice_len();
        assert!(g[..fixed].iter().all(|v| *v == 0.0));
        let d = u.dim();
        for (p, w) in u.values[fixed..].chunks_exact(d).zip(g[fixed..].chunks_exact(d)) {
            let scale = 1.0 + w.iter().map(|v| v.abs()).fold(0.0, f64::max);
            assert!(target.tangency_defect(p, w) <= 1e-12 * scale);
        }
    }
}
