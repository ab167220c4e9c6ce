use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dftfunclab::lattice::{self, ZetaMethod};
use dftfunclab::model::{InteractionKernel, Lattice, LatticeName};
use dftfunclab::parallel;

fn run_both<F: Fn()>(c: &mut Criterion, group: &str, label: impl std::fmt::Display, f: F) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    for (name, seq) in [("sequential", true), ("parallel", false)] {
        g.bench_function(BenchmarkId::new(name, &label), |b| {
            parallel::set_sequential(seq);
            b.iter(&f);
        });
    }
    parallel::set_sequential(false);
    g.finish();
}

fn crystal_pair_sums(c: &mut Criterion) {
    let z3 = Lattice::new(LatticeName::Z3);
    let kernel = InteractionKernel::Coulomb3d;
    for side in [5.0, 8.0] {
        run_both(c, "floating_crystal_z3", side, || {
            black_box(lattice::floating_indirect(&z3, black_box(side), &kernel).unwrap());
        });
    }
}

fn direct_zeta(c: &mut Criterion) {
    let bcc = Lattice::new(LatticeName::BCC);
    run_both(c, "zeta_bcc_direct", "s=4", || {
        black_box(lattice::epstein_zeta(&bcc, 4.0, 1e-10, ZetaMethod::Direct).unwrap());
    });
}

criterion_group!(benches, crystal_pair_sums, direct_zeta);
criterion_main!(benches);
