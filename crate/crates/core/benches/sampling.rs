use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use hypermod::constructions::{step1_unbounded, Step1Params};
use hypermod::funcspace::{mod_lower, SampleDomain};
use hypermod::par;
use hypermod::verify::{verify_space, verify_step1, VerifyConfig};
use hypermod::{MapExpr, Modulus, Space};

fn modes() -> [(&'static str, bool); 2] {
    [("parallel", false), ("sequential", true)]
}

fn run<R>(seq: bool, body: impl FnOnce() -> R) -> R {
    if seq {
        par::sequential(body)
    } else {
        body()
    }
}

fn space_axioms(c: &mut Criterion) {
    let mut g = c.benchmark_group("verify_space");
    g.sample_size(10);
    for sp in [Space::euclidean(2), Space::half_plane(), Space::star_tree(4)] {
        for (mode, seq) in modes() {
            g.bench_with_input(BenchmarkId::new(mode, sp.name()), &sp, |b, sp| {
                b.iter(|| run(seq, || black_box(verify_space(sp, 20_000, 1e-9, 1))))
            });
        }
    }
    g.finish();
}

fn modulus_estimate(c: &mut Criterion) {
    let sp = Space::half_plane();
    let m = MapExpr::Clamp { center: sp.base.clone(), radius: 1.5 };
    let dom = [SampleDomain::new(sp.base.clone(), 4.0)];
    let mut g = c.benchmark_group("mod_lower");
    g.sample_size(10);
    for (mode, seq) in modes() {
        g.bench_function(mode, |b| b.iter(|| run(seq, || black_box(mod_lower(&sp, &m, 1.0, 50_000, 3, &dom, &[])))));
    }
    g.finish();
}

fn step1_suite(c: &mut Criterion) {
    let sp = Space::euclidean(1);
    let w = Modulus::linear(1.0).unwrap();
    let rec = step1_unbounded(&sp, &w, &MapExpr::Identity, &Step1Params::new(1.0, 0.5, 0.5)).unwrap();
    let cfg = VerifyConfig { pairs: 20_000, ..VerifyConfig::default() };
    let mut g = c.benchmark_group("verify_step1");
    g.sample_size(10);
    for (mode, seq) in modes() {
        g.bench_function(mode, |b| b.iter(|| run(seq, || black_box(verify_step1(&sp, &rec, &cfg)))));
    }
    g.finish();
}

criterion_group!(benches, space_axioms, modulus_estimate, step1_suite);
criterion_main!(benches);
