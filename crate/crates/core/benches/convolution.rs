use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use gbq::config::RunConfig;
use gbq::lattice::{ModeTable, C64};
use gbq::run::{gen_init, BENCH_RADII};

fn weighted_convolution(c: &mut Criterion) {
    let mut group = c.benchmark_group("weighted_self_convolution");
    for radius in BENCH_RADII {
        let cfg = RunConfig::from_json_with_overrides("", &[format!("N={radius}")]).unwrap();
        let fs = cfg.frequency_system().unwrap();
        let modes = ModeTable::new(&fs);
        let (field, _) = gen_init(&cfg).unwrap();
        let dense = modes.ball.dense(&field).unwrap();
        let mut out = vec![C64::default(); dense.len()];
        group.bench_with_input(BenchmarkId::from_parameter(radius), &dense, |b, d| {
            b.iter(|| modes.ball.weighted_self_convolve(&modes.dots, d, &mut out))
        });
    }
    group.finish();
}

criterion_group!(benches, weighted_convolution);
criterion_main!(benches);
