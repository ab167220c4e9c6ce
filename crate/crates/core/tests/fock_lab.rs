use dftfunclab::fock::{self, DualMode, FockOptions, LatticeSystem};
use dftfunclab::kinetic::{solve_tgc, TgcOptions};
use dftfunclab::model::{Boundary, DiscreteDensity, Grid, InteractionKernel};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SITES: usize = 6;

fn riesz(s: f64) -> InteractionKernel {
    InteractionKernel::Riesz { s }
}

/// Site occupations in (0.15, 0.85) scaled to the requested mass.
fn random_occupations(rng: &mut ChaCha8Rng, sites: usize, mass: f64) -> Vec<f64> {
    loop {
        let raw: Vec<f64> = (0..sites).map(|_| 0.3 + rng.gen::<f64>()).collect();
        let total: f64 = raw.iter().sum();
        let rho: Vec<f64> = raw.iter().map(|r| r * mass / total).collect();
        if rho.iter().all(|&r| r > 0.05 && r < 0.95) {
            return rho;
        }
    }
}

/// Full Fock-space Hamiltonian from Jordan-Wigner strings, restricted to `n` particles.
fn jordan_wigner_sector(sys: &LatticeSystem, v: &[f64], n: usize) -> DMatrix<f64> {
    let m = sys.sites();
    let dim = 1usize << m;
    let z = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
    let id = DMatrix::<f64>::identity(2, 2);
    let lower = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
    // annihilator on site i: Z ⊗ ... ⊗ Z ⊗ a ⊗ I ..., site 0 least significant
    let annihilator = |i: usize| {
        let mut op = DMatrix::<f64>::identity(1, 1);
        for k in (0..m).rev() {
            let f = if k == i { &lower } else if k < i { &z } else { &id };
            op = op.kronecker(f);
        }
        op
    };
    let ops: Vec<DMatrix<f64>> = (0..m).map(annihilator).collect();
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..m {
        let ni = ops[i].transpose() * &ops[i];
        h += &ni * v[i];
        for j in 0..m {
            h += ops[i].transpose() * &ops[j] * sys.kinetic[(i, j)];
            if j > i {
                let nj = ops[j].transpose() * &ops[j];
                h += &ni * &nj * (sys.coupling * sys.interaction[(i, j)]);
            }
        }
    }
    let keep: Vec<usize> = (0..dim).filter(|s| s.count_ones() as usize == n).collect();
    DMatrix::from_fn(keep.len(), keep.len(), |a, b| h[(keep[a], keep[b])])
}

#[test]
fn sector_ground_matches_jordan_wigner() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for &(m, n) in &[(4usize, 2usize), (5, 2), (6, 3)] {
        let sys = LatticeSystem::new(m, m as f64, &riesz(1.0), 1.0).unwrap();
        let v: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() - 0.5).collect();
        let oracle = SymmetricEigen::new(jordan_wigner_sector(&sys, &v, n)).eigenvalues.min();
        let e = fock::sector_ground(&sys, &v, n).unwrap().energy;
        assert!((e - oracle).abs() < 1e-10, "{m} {n}: {e} vs {oracle}");
    }
}

#[test]
fn free_dual_equals_kinetic_solver() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 0..4 {
        let mass = if k % 2 == 0 { 2.0 } else { 2.6 };
        let rho = random_occupations(&mut rng, SITES, mass);
        let sys = LatticeSystem::new(SITES, SITES as f64, &riesz(1.0), 0.0).unwrap();
        let density = DiscreteDensity::new(Grid::line(SITES, SITES as f64, Boundary::Periodic).unwrap(), rho.clone()).unwrap();
        let t = solve_tgc(&density, &TgcOptions::default()).unwrap().value;
        let gc = fock::levy_lieb_dual(&sys, &rho, DualMode::Grand, &FockOptions::default()).unwrap();
        assert!((gc.value - t).abs() < 1e-6, "gc {} vs {t} (gap {})", gc.value, gc.gap);
        if k % 2 == 0 {
            let l = fock::levy_lieb_dual(&sys, &rho, DualMode::Canonical, &FockOptions::default()).unwrap();
            assert!((l.value - t).abs() < 1e-6, "canonical {} vs {t}", l.value);
        }
    }
}

#[test]
fn grand_canonical_below_canonical() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..6 {
        let g = 0.5 + 2.0 * rng.gen::<f64>();
        let sys = LatticeSystem::new(SITES, SITES as f64, &riesz(0.5), g).unwrap();
        let rho = random_occupations(&mut rng, SITES, 2.0);
        let gc = fock::levy_lieb_dual(&sys, &rho, DualMode::Grand, &FockOptions::default()).unwrap();
        let l = fock::levy_lieb_dual(&sys, &rho, DualMode::Canonical, &FockOptions::default()).unwrap();
        assert!(gc.value <= l.value + 1e-9, "{} > {}", gc.value, l.value);
        assert!(gc.gap < 1e-4 && l.gap < 1e-4, "gaps {} {}", gc.gap, l.gap);
        assert!(gc.value <= gc.primal + 1e-10 * (1.0 + gc.primal.abs()), "{} {}", gc.value, gc.primal);
    }
}

#[test]
fn exposed_point_recovers_potential() {
    let sys = LatticeSystem::new(SITES, SITES as f64, &riesz(1.0), 1.0).unwrap();
    let target = [0.4, -0.3, 0.1, 0.0, -0.5, 0.2];
    let ground = fock::sector_ground(&sys, &target, 2).unwrap();
    assert_eq!(ground.degeneracy, 1);
    let expected = ground.energy - target.iter().zip(&ground.density).map(|(a, b)| a * b).sum::<f64>();
    let r = fock::levy_lieb_dual(&sys, &ground.density, DualMode::Canonical, &FockOptions::default()).unwrap();
    assert!((r.value - expected).abs() < 1e-8, "{} vs {expected}", r.value);
    let shift = r.potential[0] - target[0];
    for (a, b) in r.potential.iter().zip(&target) {
        assert!((a - b - shift).abs() < 1e-4, "{:?}", r.potential);
    }
}

#[test]
fn midpoint_concavity_and_convexity() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let sys = LatticeSystem::new(SITES, SITES as f64, &riesz(1.0), 1.5).unwrap();
    for _ in 0..5 {
        let a: Vec<f64> = (0..SITES).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
        let b: Vec<f64> = (0..SITES).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
        let mid: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
        for n in 0..=SITES {
            let e = |v: &[f64]| fock::sector_ground(&sys, v, n).unwrap().energy;
            assert!(e(&mid) >= 0.5 * (e(&a) + e(&b)) - 1e-10);
        }
    }
    for mode in [DualMode::Canonical, DualMode::Grand] {
        let r1 = random_occupations(&mut rng, SITES, 2.0);
        let r2 = random_occupations(&mut rng, SITES, 2.0);
        let mid: Vec<f64> = r1.iter().zip(&r2).map(|(x, y)| 0.5 * (x + y)).collect();
        let f = |r: &[f64]| fock::levy_lieb_dual(&sys, r, mode, &FockOptions::default()).unwrap();
        let (f1, f2, fm) = (f(&r1), f(&r2), f(&mid));
        // lower bound at the midpoint against upper bounds at the ends
        assert!(fm.value <= 0.5 * (f1.primal + f2.primal) + 1e-9);
    }
}

#[test]
fn theta_interpolation_on_convex_spectra() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut convex_seen = 0;
    for k in 0..8 {
        let g = if k == 0 { 0.0 } else { 3.0 * rng.gen::<f64>() };
        let sys = LatticeSystem::new(SITES, SITES as f64, &riesz(1.0), g).unwrap();
        let v: Vec<f64> = (0..SITES).map(|_| rng.gen::<f64>() - 0.5).collect();
        let report = fock::convexity_scan(&sys, &v).unwrap();
        if g == 0.0 {
            assert!(report.convex);
        }
        if report.convex {
            convex_seen += 1;
            assert_eq!(report.hull_vertices.len(), SITES + 1);
            for c in &report.theta_checks {
                assert!((c.mixture - c.interpolation).abs() < 1e-8);
            }
        }
    }
    assert!(convex_seen > 0);
}

#[test]
fn strong_coupling_approaches_lattice_transport() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let rho = random_occupations(&mut rng, SITES, 2.0);
    let table = fock::coupling_limits(SITES, SITES as f64, &riesz(1.0), &rho, &[0.0, 1.0, 1000.0], &FockOptions::default()).unwrap();
    let free = &table.rows[0];
    assert!((free.value - table.kinetic).abs() < 1e-6);
    assert!(table.rows.windows(2).all(|w| w[1].value >= w[0].value - 1e-9));
    let strong = table.rows.last().unwrap();
    let rel = (strong.per_coupling - table.classical).abs() / table.classical;
    assert!(rel < 0.02, "{} vs {} ({rel})", strong.per_coupling, table.classical);
}

#[test]
fn exchange_correlation_of_free_and_single_particle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let free = LatticeSystem::new(SITES, SITES as f64, &riesz(1.0), 0.0).unwrap();
    let rho = random_occupations(&mut rng, SITES, 2.0);
    let xc = fock::exchange_correlation_gc(&free, &rho, &FockOptions::default()).unwrap();
    assert!(xc.value.abs() < 1e-6 && xc.lower <= 1e-9 && xc.upper >= -1e-9);
}
