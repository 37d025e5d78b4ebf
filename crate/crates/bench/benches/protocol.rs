use criterion::{
    black_box, criterion_group, criterion_main, BatchSize, BenchmarkId, Criterion, Throughput,
};

use pope_core::bench::{gen_workload, WorkloadSpec};
use pope_core::protocol::{LocalSession, Op};
use pope_core::{keygen, MopeServer, PopeClient, PopeServer, Session};

fn pope_session(l: usize) -> LocalSession<PopeServer> {
    let key = keygen(Some(1));
    LocalSession::new(
        PopeServer::new(l, 2).unwrap(),
        PopeClient::with_seed(&key, l, 3).unwrap(),
    )
}

fn inserts(n: usize) -> Vec<Op> {
    let mut spec = WorkloadSpec::new(n).with_seed(7);
    spec.m = 0;
    gen_workload(&spec).unwrap()
}

fn pope_insert(c: &mut Criterion) {
    let ops = inserts(10_000);
    let mut g = c.benchmark_group("pope_insert");
    g.throughput(Throughput::Elements(ops.len() as u64));
    g.bench_function("10k", |b| {
        b.iter_batched(
            || pope_session(10),
            |mut s| {
                for op in &ops {
                    s.run_op(op).unwrap();
                }
                s
            },
            BatchSize::LargeInput,
        )
    });
    g.finish();
}

fn pope_search(c: &mut Criterion) {
    let ops = inserts(10_000);
    let mut g = c.benchmark_group("pope_first_search");
    g.sample_size(20);
    for l in [4usize, 10, 32] {
        g.bench_with_input(BenchmarkId::from_parameter(l), &l, |b, &l| {
            b.iter_batched(
                || {
                    let mut s = pope_session(l);
                    for op in &ops {
                        s.run_op(op).unwrap();
                    }
                    s
                },
                |mut s| black_box(s.search(1 << 30, 1 << 31).unwrap()),
                BatchSize::LargeInput,
            )
        });
    }
    g.finish();
}

fn workload(c: &mut Criterion) {
    let ops = gen_workload(&WorkloadSpec::new(10_000).with_seed(5)).unwrap();
    let mut g = c.benchmark_group("mixed_10k");
    g.sample_size(10);
    g.bench_function("pope", |b| {
        b.iter(|| {
            let mut s = pope_session(10);
            for op in &ops {
                black_box(s.run_op(op).unwrap());
            }
        })
    });
    g.bench_function("mope", |b| {
        b.iter(|| {
            let key = keygen(Some(1));
            let mut s = LocalSession::new(
                MopeServer::new(),
                PopeClient::with_seed(&key, 10, 3).unwrap(),
            );
            for op in &ops {
                black_box(s.run_op(op).unwrap());
            }
        })
    });
    g.finish();
}

criterion_group!(benches, pope_insert, pope_search, workload);
criterion_main!(benches);
