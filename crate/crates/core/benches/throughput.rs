//! Sequential against parallel execution for the data-parallel kernels.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ineqmn::evidence::count_in_region;
use ineqmn::fit::ppp_value;
use ineqmn::sampler::{run_parallel_chains, ConstraintModel, GibbsOptions};
use ineqmn::{AbPolytope, CountData, DirichletPrior, Exec, ItemLayout};

fn dosage() -> (ConstraintModel, CountData, DirichletPrior) {
    let layout = ItemLayout::binary(3).unwrap();
    let poly = AbPolytope::new(vec![vec![-1.0, 1.0, 0.0], vec![0.0, -1.0, 1.0]], vec![0.0, 0.0], 3).unwrap();
    let data = CountData::from_free(&layout, &[16, 4, 2], &[40, 36, 15]).unwrap();
    let prior = DirichletPrior::uniform(&layout);
    (ConstraintModel::ab(layout, poly).unwrap(), data, prior)
}

const POLICIES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn counting(c: &mut Criterion) {
    let (model, _, prior) = dosage();
    let mut group = c.benchmark_group("count_1e6");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| count_in_region(&model, prior.shapes(), 1_000_000, 7, exec).unwrap())
        });
    }
    group.finish();
}

fn chains(c: &mut Criterion) {
    let (model, data, prior) = dosage();
    let opts = GibbsOptions::new(5_000);
    let mut group = c.benchmark_group("gibbs_8x5000");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| run_parallel_chains(&model, &data, &prior, &opts, 8, 7, exec).unwrap())
        });
    }
    group.finish();
}

fn ppp(c: &mut Criterion) {
    let (model, data, prior) = dosage();
    let chains = run_parallel_chains(&model, &data, &prior, &GibbsOptions::new(5_000), 8, 7, Exec::Parallel).unwrap();
    let pooled = ineqmn::sampler::Chain::pooled(&chains).unwrap();
    let layout = model.layout().clone();
    let mut group = c.benchmark_group("ppp_40000");
    group.sample_size(10);
    for (name, exec) in POLICIES {
        group.bench_with_input(BenchmarkId::from_parameter(name), &exec, |b, &exec| {
            b.iter(|| ppp_value(&pooled, &data, &layout, 7, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, counting, chains, ppp);
criterion_main!(benches);
