//! Sequential against rayon-backed executor on two Monte Carlo workloads.
//! Both produce identical numbers; only wall time differs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dirjump::estimators::{check_exit_scaling, check_levy_system, ExitScalingParams, LevyParams};
use dirjump::{Executor, JumpKernelSpec, ModelSpec, RngPlan};

fn executors() -> [(&'static str, Executor); 2] {
    [("sequential", Executor::sequential()), ("parallel", Executor::parallel(None))]
}

fn bench(c: &mut Criterion) {
    let model = ModelSpec::unit_diffusion(1, JumpKernelSpec::stable(0.5)).unwrap();
    let plan = RngPlan::new(1);
    let mut g = c.benchmark_group("monte_carlo");
    g.sample_size(10);

    let exit = ExitScalingParams { n_paths: 2000, ..Default::default() };
    let levy = LevyParams { n_paths: 2000, table_points: 129, ..Default::default() };
    for (name, exec) in executors() {
        g.bench_with_input(BenchmarkId::new("exit_scaling", name), &exec, |b, e| {
            b.iter(|| check_exit_scaling(&model, &exit, &plan, e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("levy_system", name), &exec, |b, e| {
            b.iter(|| check_levy_system(&model, &levy, &plan, e).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
