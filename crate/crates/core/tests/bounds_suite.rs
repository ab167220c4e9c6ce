use dftfunclab::bounds::{self, DensityIntegrals, ErrorMode};
use dftfunclab::model::{density_from_function, Boundary, DiscreteDensity, Grid, InteractionKernel};
use std::f64::consts::PI;

fn decades(lo: i32, hi: i32) -> Vec<f64> {
    (lo..=hi).map(|k| 10f64.powi(k)).collect()
}

#[test]
fn dilation_exponents() {
    let profile = DensityIntegrals::of(&bounds::gaussian_profile(32, 7.0).unwrap()).unwrap();
    let quantum = bounds::exponent_probe(&profile, &decades(3, 9), 1.0, ErrorMode::Quantum).unwrap();
    let classical = bounds::exponent_probe(&profile, &decades(3, 9), 1.0, ErrorMode::Classical).unwrap();
    assert!((quantum.slope - 11.0 / 12.0).abs() < 0.02, "{}", quantum.slope);
    assert!((classical.slope - 5.0 / 6.0).abs() < 0.02, "{}", classical.slope);
    let shifted = bounds::exponent_probe(&profile, &decades(4, 10), 1.0, ErrorMode::Quantum).unwrap();
    assert!((shifted.slope - quantum.slope).abs() < 0.005);
}

#[test]
fn gradient_free_probe_is_linear() {
    let grid = Grid::new(vec![4, 4, 4], vec![1.0; 3], Boundary::Periodic).unwrap();
    let flat = DensityIntegrals::of(&DiscreteDensity::new(grid, vec![1.0 / 64.0; 64]).unwrap()).unwrap();
    assert!(flat.weizsacker.abs() < 1e-20 && flat.sqrt_quartic.abs() < 1e-20);
    let p = bounds::exponent_probe(&flat, &decades(3, 9), 1.0, ErrorMode::Quantum).unwrap();
    assert!((p.slope - 1.0).abs() < 1e-12);
    assert!(p.epsilons.iter().all(|&e| (e - bounds::EPSILON_RANGE.0).abs() < 1e-15));
}

#[test]
fn optimum_is_stationary_and_monotone_in_constant() {
    let rho = bounds::gaussian_profile(24, 6.0).unwrap();
    let mut last = f64::INFINITY;
    for c in [4.0, 1.0, 0.25] {
        for mode in [ErrorMode::Quantum, ErrorMode::Classical] {
            let (best, report) = bounds::optimize_epsilon(&rho, c, mode).unwrap();
            assert!(best.log_slope.abs() < 1e-8 * best.value);
            assert!((report.term_total() - best.value).abs() < 1e-12 * best.value);
            if mode == ErrorMode::Quantum {
                assert!(best.value < last);
                last = best.value;
            }
        }
    }
}

#[test]
fn lower_bound_below_upper_bound() {
    let kernel = InteractionKernel::Coulomb3d;
    for width in [0.7, 1.0, 1.6] {
        let grid = Grid::with_origin(vec![10; 3], vec![8.0; 3], vec![-4.0; 3], Boundary::Open).unwrap();
        let norm = 2.0 * (2.0 * PI * width * width).powf(-1.5);
        let rho = density_from_function(&grid, |x| norm * (-x.iter().map(|c| c * c).sum::<f64>() / (2.0 * width * width)).exp()).unwrap();
        let lower = bounds::tfd_lower(&rho, &kernel, 1.0, None).unwrap();
        let sum = lower.term_total();
        assert!((sum - lower.lower.unwrap()).abs() < 1e-12 * (1.0 + sum.abs()));
        for eps in [0.1, 0.5, 2.0] {
            let upper = bounds::tfvw_upper(&rho, &kernel, 1.0, eps, 1.0).unwrap();
            assert!(lower.lower.unwrap() <= upper.upper.unwrap());
        }
        let lda = bounds::lda_bracket(&rho, 1.0, 1.0, ErrorMode::Quantum).unwrap();
        assert!(lda.lower.unwrap() <= lda.upper.unwrap());
        let indirect = bounds::lewin_lieb_gradient_lower(&rho).unwrap();
        assert!(indirect.lower.unwrap().is_finite());
    }
}

#[test]
fn constant_density_upper_bound_closed_form() {
    let grid = Grid::new(vec![6, 6, 6], vec![1.0; 3], Boundary::Periodic).unwrap();
    let rho0 = 2.0;
    let rho = DiscreteDensity::new(grid, vec![rho0 / 216.0; 216]).unwrap();
    let kernel = InteractionKernel::Coulomb3d;
    let upper = bounds::tfvw_upper(&rho, &kernel, 1.0, 0.3, 1.0).unwrap();
    let hartree = dftfunclab::sce::hartree(&rho, &kernel).unwrap();
    let expected = dftfunclab::constants::thomas_fermi_constant(3) * 1.3 * rho0.powf(5.0 / 3.0) + hartree;
    assert!((upper.upper.unwrap() - expected).abs() < 1e-10 * expected);
    let err = bounds::lda_error(&rho, 0.3, 1.0, ErrorMode::Quantum).unwrap();
    assert!((err - 0.3 * (rho0 + rho0 * rho0)).abs() < 1e-12);
    assert!(bounds::tfd_lower(&DiscreteDensity::new(rho.grid.clone(), vec![0.0; 216]).unwrap(), &kernel, 1.0, None).unwrap().lower.unwrap() == 0.0);
}
