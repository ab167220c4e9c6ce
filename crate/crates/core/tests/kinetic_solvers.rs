use dftfunclab::kinetic::{self, solve_tgc, PeriodicOperator, TgcOptions};
use dftfunclab::model::{Boundary, DiscreteDensity, Grid};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Smooth positive density on a ring: exponential of a few random Fourier modes.
fn smooth_ring(rng: &mut ChaCha8Rng, cells: usize, length: f64, mass: f64) -> DiscreteDensity {
    let grid = Grid::line(cells, length, Boundary::Periodic).unwrap();
    let raw: Vec<f64> = (0..cells)
        .map(|i| {
            let x = (i as f64 + 0.5) * length / cells as f64;
            let f: f64 = (1..=3).map(|j| 0.5 * rng.gen::<f64>() * (2.0 * PI * j as f64 * x / length + 6.0 * rng.gen::<f64>()).cos()).sum();
            f.exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    DiscreteDensity::new(grid, raw.iter().map(|r| r * mass / total).collect()).unwrap()
}

#[test]
fn constant_density_fills_three_modes() {
    let grid = Grid::line(32, 3.0, Boundary::Periodic).unwrap();
    let rho = DiscreteDensity::new(grid, vec![3.0 / 32.0; 32]).unwrap();
    let r = solve_tgc(&rho, &TgcOptions::default()).unwrap();
    println!("{} {} gap {} iters {}", r.value, 4.0 * PI * PI / 9.0, r.report.gap, r.report.iterations);
    assert!((r.value - 4.0 * PI * PI / 9.0).abs() < 1e-6);
}

#[test]
fn single_particle_matches_weizsacker() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let rho = smooth_ring(&mut rng, 24, 4.0, 1.0);
        let r = solve_tgc(&rho, &TgcOptions::default()).unwrap();
        let op = PeriodicOperator::new(&rho.grid).unwrap();
        let w = op.weizsacker(&rho.masses);
        println!("{} {} gap {} conv {}", r.value, w, r.report.gap, r.report.converged);
        assert!((r.value - w).abs() < 1e-6);
        assert!(kinetic::hoffmann_ostenhof_check(&r.gamma, &op) > -1e-9);
    }
}
