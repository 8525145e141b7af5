use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ndarray::s;

use phrasegame::data::START_ID;
use phrasegame::speaker::{beam_decode, SpeakerKind};
use phrasegame_bench::{features, listener, phrases, speaker};

fn lstm_step(c: &mut Criterion) {
    let m = speaker(SpeakerKind::Simple);
    let f = features(32);
    let ctx = m.context(&f.view(), None).unwrap();
    let state = m.initial_state(32);
    let prev = vec![START_ID; 32];
    c.bench_function("speaker step, batch 32", |b| {
        b.iter(|| black_box(m.step_log_probs(&prev, &state, &ctx).unwrap()))
    });
}

fn beam(c: &mut Criterion) {
    let mut group = c.benchmark_group("beam decode");
    for kind in [SpeakerKind::Simple, SpeakerKind::Discerning] {
        let m = speaker(kind);
        let f = features(2);
        let other = f.slice(s![1..2, ..]);
        let ctx = m
            .context(&f.slice(s![0..1, ..]), (kind == SpeakerKind::Discerning).then_some(&other))
            .unwrap();
        group.bench_function(format!("{kind:?}, width 10"), |b| {
            b.iter(|| black_box(beam_decode(&m, &ctx, 10, 14).unwrap()))
        });
    }
    group.finish();
}

fn listener_scoring(c: &mut Criterion) {
    let m = listener();
    let left = features(256);
    let right = features(256);
    let batch = phrases(256, 3);
    c.bench_function("listener score, batch 256", |b| {
        b.iter(|| black_box(m.score_batch(&left.view(), &right.view(), &batch).unwrap()))
    });
}

criterion_group!(benches, lstm_step, beam, listener_scoring);
criterion_main!(benches);
