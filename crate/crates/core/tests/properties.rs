use dftfunclab::fock::{convex_hull_value, sector_mixture_minimum};
use dftfunclab::lattice::{self, fit_inverse_powers, ZetaMethod};
use dftfunclab::model::{density_to_csv, parse_density_csv, Boundary, DiscreteDensity, Grid, Lattice, LatticeName};
use dftfunclab::verify::riemann_zeta_alternating;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn hull_equals_sector_mixture_lp(energies in prop::collection::vec(-5.0f64..5.0, 3..8), frac in 0.0f64..1.0) {
        let mut e = energies;
        e[0] = 0.0;
        let lambda = frac * (e.len() - 1) as f64;
        let lp = sector_mixture_minimum(&e, lambda).unwrap();
        let hull = convex_hull_value(&e, lambda);
        prop_assert!((lp - hull).abs() <= 1e-9 * (1.0 + hull.abs()), "lp {} hull {}", lp, hull);
    }

    #[test]
    fn density_csv_round_trip(values in prop::collection::vec(0.0f64..3.0, 2..20), length in 0.5f64..20.0) {
        let grid = Grid::line(values.len(), length, Boundary::Open).unwrap();
        let rho = DiscreteDensity::from_values(grid, &values).unwrap();
        let back = parse_density_csv(&density_to_csv(&rho), Boundary::Open).unwrap();
        prop_assert_eq!(back.grid.len(), rho.grid.len());
        for (a, b) in back.masses.iter().zip(&rho.masses) {
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn line_zeta_matches_riemann(s in 1.5f64..6.0) {
        let z = lattice::epstein_zeta(&Lattice::new(LatticeName::Z1), s, 1e-12, ZetaMethod::Ewald).unwrap();
        let oracle = riemann_zeta_alternating(s);
        prop_assert!((z.value - oracle).abs() <= 1e-9 * oracle.abs(), "{} vs {}", z.value, oracle);
    }

    #[test]
    fn inverse_power_fit_is_exact_on_exact_data(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
        let sides = [4.0, 6.0, 8.0, 12.0, 16.0];
        let values: Vec<f64> = sides.iter().map(|l: &f64| a + b / l + c / (l * l)).collect();
        let fit = fit_inverse_powers(&sides, &values, &[1.0, 2.0]).unwrap();
        prop_assert!((fit.limit - a).abs() < 1e-10);
        prop_assert!(fit.residual < 1e-10);
    }
}
