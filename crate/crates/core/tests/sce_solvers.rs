use dftfunclab::model::{pair_cost_matrix, Boundary, DiscreteDensity, Grid, InteractionKernel};
use dftfunclab::sce::{self, monge_1d, solve_gc_mmot, solve_mmot, verify_support, MmotOptions, Solver};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_line(rng: &mut ChaCha8Rng, cells: usize, n: usize, cap: f64) -> DiscreteDensity {
    loop {
        let raw: Vec<f64> = (0..cells).map(|_| rng.gen::<f64>() + 0.05).collect();
        let total: f64 = raw.iter().sum();
        let masses: Vec<f64> = raw.iter().map(|x| x * n as f64 / total).collect();
        if masses.iter().all(|&m| m < cap) {
            let grid = Grid::line(cells, cells as f64, Boundary::Open).unwrap();
            return DiscreteDensity::new(grid, masses).unwrap();
        }
    }
}

#[test]
fn lp_matches_monotone_plan_in_one_dimension() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..40 {
        let n = rng.gen_range(2..=3);
        let cells = rng.gen_range(n + 2..=12);
        let s = if rng.gen_bool(0.5) { 0.5 } else { 1.0 };
        let cap = if s >= 1.0 { 1.0 } else { f64::INFINITY };
        let rho = random_line(&mut rng, cells, n, cap);
        let k = InteractionKernel::Riesz { s };
        let lp = solve_mmot(&rho, n, &k, Solver::Lp, &MmotOptions::default()).unwrap();
        let mg = monge_1d(&rho, n, &k).unwrap();
        assert!((lp.value - mg.value).abs() <= 1e-8 * (1.0 + lp.value.abs()), "lp {} monge {}", lp.value, mg.value);
        assert!(lp.gap <= 1e-9);
        let costs = pair_cost_matrix(&rho.grid, &k).unwrap();
        assert!(verify_support(&lp.plan, &lp.potential, &costs, 1e-7).passed);
    }
}

#[test]
fn sinkhorn_approaches_the_lp_value() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..5 {
        let rho = random_line(&mut rng, 6, 2, f64::INFINITY);
        let k = InteractionKernel::Riesz { s: 0.5 };
        let lp = solve_mmot(&rho, 2, &k, Solver::Lp, &MmotOptions::default()).unwrap();
        let sk = solve_mmot(&rho, 2, &k, Solver::Sinkhorn, &MmotOptions::default()).unwrap();
        assert!((sk.value - lp.value).abs() < 2e-2 * lp.value, "sinkhorn {} lp {}", sk.value, lp.value);
    }
}

#[test]
fn grand_canonical_is_below_canonical() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10 {
        let rho = random_line(&mut rng, 7, 2, f64::INFINITY);
        let k = InteractionKernel::Riesz { s: 0.5 };
        let c = solve_mmot(&rho, 2, &k, Solver::Lp, &MmotOptions::default()).unwrap();
        let g = solve_gc_mmot(&rho, 3, &k, &MmotOptions::default()).unwrap();
        assert!(g.value <= c.value + 1e-10);
        assert!(g.gap < 1e-9);
    }
    let _ = sce::sorted_tuples(2, 2);
}
