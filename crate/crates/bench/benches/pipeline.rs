use std::hint::black_box;

use affordsim_bench::{affordance, contact, episode};
use affordsim_core::affordance::compute_affordance;
use affordsim_core::control::{aia_step, run_manipulation};
use affordsim_core::policy::propose_affordance_argmax;
use affordsim_core::render::render;
use affordsim_core::{AiaConfig, Category};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

fn bench_render(c: &mut Criterion) {
    let mut g = c.benchmark_group("render");
    for res in [96u32, 336] {
        let ep = episode(Category::Door, res);
        g.bench_with_input(BenchmarkId::from_parameter(res), &ep, |b, ep| {
            b.iter(|| render(&ep.obj, &ep.view.joint_values, &ep.view.camera).unwrap())
        });
    }
    g.finish();
}

fn bench_affordance(c: &mut Criterion) {
    let mut g = c.benchmark_group("affordance");
    for cat in [Category::Door, Category::Drawer] {
        let ep = episode(cat, 336);
        g.bench_function(cat.as_str(), |b| {
            b.iter(|| compute_affordance(&ep.obj, &ep.view, ep.spec.target_joint, None).unwrap())
        });
    }
    let ep = episode(Category::Door, 336);
    let amap = affordance(&ep);
    g.bench_function("argmax-proposal", |b| {
        b.iter(|| propose_affordance_argmax(&ep.obj, &ep.view, &amap, black_box(3)).unwrap())
    });
    g.finish();
}

fn bench_control(c: &mut Criterion) {
    let ep = episode(Category::Door, 336);
    let (pose, state) = contact(&ep);
    let cfg = AiaConfig::default();
    let d = -pose.forward_dir;
    c.bench_function("aia_step", |b| {
        b.iter(|| aia_step(&ep.obj, &state, &d, &cfg, black_box(7)).unwrap())
    });
    c.bench_function("episode", |b| {
        b.iter(|| {
            run_manipulation(&ep.obj, &ep.view, &pose, ep.spec.target_joint, &cfg, 7).unwrap()
        })
    });
}

criterion_group!(benches, bench_render, bench_affordance, bench_control);
criterion_main!(benches);
