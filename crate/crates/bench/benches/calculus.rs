use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use radul_bench::{symbol_pair, tuple};
use radul_core::cyclic_index::{index_radul, index_top_degree, psi_cocycle, radul_cocycle, toeplitz_kclass};
use radul_core::exact_scalars::Rational;
use radul_core::symbol_algebra::HeisenbergContext;
use radul_core::wodzicki_residue::residue;
use radul_core::zeta_laurent::cm_identity_check;

fn contexts() -> [(&'static str, HeisenbergContext); 3] {
    [
        ("two_sheet", HeisenbergContext::two_sheet()),
        ("torus_2_1", HeisenbergContext::torus(2, 1)),
        ("gaussian_2_1", HeisenbergContext::gaussian(2, 1)),
    ]
}

fn symbols(c: &mut Criterion) {
    let mut g = c.benchmark_group("symbols");
    for (name, ctx) in contexts() {
        let (a, b) = symbol_pair(&ctx, 1);
        g.bench_function(format!("star/{name}"), |bch| bch.iter(|| black_box(&a).star(black_box(&b))));
        g.bench_function(format!("delta/{name}"), |bch| bch.iter(|| black_box(&a).delta()));
        let ab = a.star(&b);
        g.bench_function(format!("residue/{name}"), |bch| bch.iter(|| residue(black_box(&ab)).unwrap()));
    }
    g.finish();
}

fn cocycles(c: &mut Criterion) {
    let mut g = c.benchmark_group("cocycles");
    g.sample_size(20);
    for (name, ctx) in contexts() {
        let t = tuple(&ctx, 2, 2);
        g.bench_function(format!("radul/{name}"), |bch| bch.iter(|| radul_cocycle(black_box(&t)).unwrap()));
        let t = tuple(&ctx, 2 * ctx.n, 3);
        g.bench_function(format!("psi_top/{name}"), |bch| bch.iter(|| psi_cocycle(ctx.n, black_box(&t)).unwrap()));
    }
    let kc = toeplitz_kclass(2).unwrap();
    g.bench_function("index_radul/toeplitz_2", |bch| bch.iter(|| index_radul(black_box(&kc)).unwrap()));
    g.bench_function("index_top/toeplitz_2", |bch| bch.iter(|| index_top_degree(black_box(&kc)).unwrap()));
    g.finish();
}

fn series(c: &mut Criterion) {
    let r = Rational::from(4);
    c.bench_function("series/cm_identity_z8_x12", |bch| bch.iter(|| cm_identity_check(black_box(&r), 8, 12).unwrap()));
}

criterion_group!(benches, symbols, cocycles, series);
criterion_main!(benches);
