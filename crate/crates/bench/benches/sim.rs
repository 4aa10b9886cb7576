use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use flaptune::agents::{GapPolicy, LidarPolicy};
use flaptune::config::default_config;
use flaptune::sim::{run_episode, Action, GameState};
use flaptune::traces::{composite_strip, encode_png, render_frame};
use flaptune_bench::bench_configs;

fn episode_benches(c: &mut Criterion) {
    let mut group = c.benchmark_group("episode");
    for (name, cfg) in bench_configs() {
        group.bench_function(format!("gap_policy/{name}"), |b| {
            b.iter(|| {
                let mut policy = GapPolicy::default();
                black_box(run_episode(&cfg, &mut policy, 7).unwrap().score)
            })
        });
    }
    let cfg = default_config();
    group.bench_function("lidar_policy/default", |b| {
        b.iter(|| {
            let mut policy = LidarPolicy;
            black_box(run_episode(&cfg, &mut policy, 7).unwrap().score)
        })
    });
    group.finish();
}

fn step_bench(c: &mut Criterion) {
    let cfg = default_config();
    c.bench_function("step/idle_tick", |b| {
        let mut state = GameState::reset(&cfg, 3).unwrap();
        b.iter(|| {
            if state.terminated.is_some() {
                state = GameState::reset(&cfg, 3).unwrap();
            }
            state.step(&cfg, Action::Idle).unwrap();
        })
    });
    c.bench_function("lidar_scan", |b| {
        let state = GameState::reset(&cfg, 3).unwrap();
        b.iter(|| black_box(state.lidar_scan(&cfg)))
    });
}

fn render_benches(c: &mut Criterion) {
    let cfg = default_config();
    let mut policy = GapPolicy::default();
    let trace = run_episode(&cfg, &mut policy, 7).unwrap();
    let state = GameState::reset(&cfg, 7).unwrap();
    c.bench_function("render_frame", |b| {
        b.iter(|| black_box(render_frame(&state, &cfg)))
    });
    c.bench_function("composite_strip", |b| {
        b.iter(|| black_box(composite_strip(&trace, &cfg)))
    });
    let strip = composite_strip(&trace, &cfg);
    c.bench_function("encode_png_strip", |b| {
        b.iter(|| black_box(encode_png(&strip).unwrap()))
    });
}

criterion_group!(benches, episode_benches, step_bench, render_benches);
criterion_main!(benches);
