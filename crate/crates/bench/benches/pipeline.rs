use std::hint::black_box;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};
use vismanip_bench::COVID_QUERIES;
use vismanip_core::dataset::{generate, GenConfig, Vocabulary};
use vismanip_core::demo::covid_spec;
use vismanip_core::translate::{QueryContext, RulesTranslator, Translator};
use vismanip_core::{apply_all, plan, ChartState, PlanPolicy};

fn pipeline(c: &mut Criterion) {
    let spec = Arc::new(covid_spec());
    let ctx = QueryContext::new(spec.clone());
    let state = ChartState::initial(spec);
    let tr = RulesTranslator::default();
    let policy = PlanPolicy::default();
    let tasks: Vec<_> = COVID_QUERIES
        .iter()
        .map(|q| tr.translate(q, &ctx).unwrap().task)
        .collect();
    let plans: Vec<_> = tasks.iter().map(|t| plan(t, &state, &policy).unwrap()).collect();

    c.bench_function("translate", |b| {
        b.iter(|| {
            for q in COVID_QUERIES {
                black_box(tr.translate(q, &ctx).unwrap());
            }
        })
    });
    c.bench_function("plan", |b| {
        b.iter(|| {
            for t in &tasks {
                black_box(plan(t, &state, &policy).unwrap());
            }
        })
    });
    let mut g = c.benchmark_group("execute");
    g.sample_size(10);
    g.bench_function("apply_all", |b| {
        b.iter(|| {
            for p in &plans {
                black_box(apply_all(p, &state).unwrap());
            }
        })
    });
    g.finish();
}

fn dataset(c: &mut Criterion) {
    let vocab = Vocabulary::bundled();
    let config = GenConfig {
        total_pairs: 500,
        ..GenConfig::default()
    };
    let mut g = c.benchmark_group("dataset");
    g.sample_size(10);
    g.bench_function("generate_500", |b| {
        b.iter(|| black_box(generate(&config, &vocab).unwrap()))
    });
    g.finish();
}

criterion_group!(benches, pipeline, dataset);
criterion_main!(benches);
