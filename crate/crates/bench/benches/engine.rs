//! Hot-path benchmarks: node feasibility, tree pricing with its dual
//! oracle, the PDE sweep, and the Monte Carlo mass-loss estimate.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use quasisure::deflator::inverse_bessel_demo;
use quasisure::models::sde::{UncertaintySpec, VolSet};
use quasisure::models::tree::{TreeFamily, TreeSpec};
use quasisure::na1::{na1_check, node_feasibility};
use quasisure::superhedge::{
    bsb_solve, dual_enumerate, sublinear_price_tree, BsbGrid, Claim, Stepper,
};

fn fixture_tree() -> TreeFamily {
    TreeSpec::VolInterval {
        s0: 100.0,
        sigma_lo: 0.1,
        sigma_hi: 0.2,
        periods: 3,
        dt: 0.25,
    }
    .build()
    .unwrap()
}

fn bench_node_feasibility(c: &mut Criterion) {
    c.bench_function("node_feasibility_4_children", |b| {
        let s_v = vec![100.0, 50.0];
        let children = vec![
            vec![112.0, 47.0],
            vec![104.0, 55.0],
            vec![93.0, 52.0],
            vec![90.0, 46.0],
        ];
        b.iter(|| node_feasibility(black_box(&s_v), black_box(&children)).unwrap())
    });
}

fn bench_na1_check(c: &mut Criterion) {
    let fam = fixture_tree();
    c.bench_function("na1_check_vol_interval_3_periods", |b| {
        b.iter(|| na1_check(black_box(&fam)).unwrap())
    });
}

fn bench_tree_pricing(c: &mut Criterion) {
    let fam = fixture_tree();
    let claim = Claim::call(100.0);
    c.bench_function("sublinear_price_tree", |b| {
        b.iter(|| sublinear_price_tree(black_box(&fam), black_box(&claim)).unwrap())
    });
    c.bench_function("dual_enumerate_step_0.05", |b| {
        b.iter_batched(
            || (fam.clone(), claim.clone()),
            |(fam, claim)| dual_enumerate(&fam, &claim, 0.05).unwrap(),
            BatchSize::SmallInput,
        )
    });
}

fn bench_bsb(c: &mut Criterion) {
    let spec = UncertaintySpec {
        s0: vec![100.0],
        drift: vec![(0.0, 0.0)],
        vol: VolSet::Interval {
            sigma_lo: 0.1,
            sigma_hi: 0.2,
        },
        horizon: 1.0,
        steps: 200,
    };
    let claim = Claim::call(100.0);
    c.bench_function("bsb_solve_200x200", |b| {
        b.iter(|| {
            bsb_solve(
                black_box(&spec),
                black_box(&claim),
                BsbGrid {
                    n_t: 200,
                    n_s: 200,
                    s_max: 400.0,
                },
                Stepper::ImplicitFrozen,
            )
            .unwrap()
        })
    });
}

fn bench_bessel(c: &mut Criterion) {
    c.bench_function("inverse_bessel_demo_100k", |b| {
        b.iter(|| inverse_bessel_demo(1.0, 100_000, black_box(42)).unwrap())
    });
}

criterion_group!(
    benches,
    bench_node_feasibility,
    bench_na1_check,
    bench_tree_pricing,
    bench_bsb,
    bench_bessel
);
criterion_main!(benches);
