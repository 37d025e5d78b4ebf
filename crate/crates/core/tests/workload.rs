use pope_core::bench::{
    add_searches, gen_workload, ingest_reader, run_experiment, write_synthetic_payroll,
    ExperimentConfig, IngestOptions, Placement, PlainIndex, Scheme, WorkloadSpec,
};
use pope_core::protocol::Op;

#[test]
fn mean_result_size_is_the_configured_mean() {
    let mut spec = WorkloadSpec::new(100_000)
        .with_seed(17)
        .with_placement(Placement::BunchedAtEnd);
    spec.m = 10_000;
    let ops = gen_workload(&spec).unwrap();
    let mut idx = PlainIndex::new();
    let mut sizes = Vec::new();
    for op in &ops {
        match op {
            Op::Insert { label, payload } => idx.insert(*label, payload),
            Op::Search { lo, hi } => sizes.push(idx.count(*lo, *hi) as f64),
        }
    }
    let mean = sizes.iter().sum::<f64>() / sizes.len() as f64;
    println!("mean result size over {} searches: {mean:.2}", sizes.len());
    assert!((mean - 100.0).abs() <= 5.0, "mean {mean}");
}

#[test]
fn payroll_file_runs_end_to_end() {
    let mut csv = Vec::new();
    write_synthetic_payroll(&mut csv, 100_000, 3).unwrap();
    let ingested = ingest_reader(
        &csv[..],
        &IngestOptions::new("total_salary").with_payload("employee_id"),
    )
    .unwrap();
    assert_eq!((ingested.ops.len(), ingested.skipped), (100_000, 0));
    let spec = WorkloadSpec::new(ingested.ops.len()).with_seed(3);
    let ops = add_searches(&ingested.ops, &spec).unwrap();
    let inserts: Vec<_> = ops
        .iter()
        .filter(|o| matches!(o, Op::Insert { .. }))
        .cloned()
        .collect();
    assert_eq!(inserts, ingested.ops, "file order is kept");
    let r = run_experiment(&ops, &ExperimentConfig::new(Scheme::Pope, spec.capacity)).unwrap();
    assert!(r.complete);
    assert_eq!(r.searches, 316);
    assert_eq!(r.mismatches, Some(0));
}

#[test]
fn repeated_queries_cost_no_more_than_uniform_ones() {
    let per = |placement| {
        let mut total = 0.0;
        for seed in 0..6 {
            let spec = WorkloadSpec::new(1 << 12)
                .with_seed(seed)
                .with_placement(placement);
            let ops = gen_workload(&spec).unwrap();
            let r = run_experiment(
                &ops,
                &ExperimentConfig::new(Scheme::Pope, spec.capacity).with_seed(seed),
            )
            .unwrap();
            total += r.rounds_per_search;
        }
        total / 6.0
    };
    let uniform = per(Placement::UniformInterleaved);
    let repeated = per(Placement::SingleRepeated);
    println!("rounds per search: uniform {uniform:.3}, repeated {repeated:.3}");
    assert!(repeated <= uniform);
}

#[test]
fn search_rounds_track_log_base_capacity() {
    let mut spec = WorkloadSpec::new(10_000).with_seed(1);
    spec.capacity = 10;
    spec.m = 100;
    let ops = gen_workload(&spec).unwrap();
    let r = run_experiment(&ops, &ExperimentConfig::new(Scheme::Pope, 10)).unwrap();
    let log_l_n = (10_000f64).ln() / (10f64).ln();
    let c = r.rounds_per_search / log_l_n;
    println!(
        "mean rounds per search {:.3}, c = {c:.3}",
        r.rounds_per_search
    );
    assert!(c > 0.0 && c < 4.0);
}

#[test]
fn bunched_queries_follow_every_insert() {
    let ops =
        gen_workload(&WorkloadSpec::new(3000).with_placement(Placement::BunchedAtEnd)).unwrap();
    let first_search = ops
        .iter()
        .position(|o| matches!(o, Op::Search { .. }))
        .unwrap();
    assert!(ops[first_search..]
        .iter()
        .all(|o| matches!(o, Op::Search { .. })));
    assert_eq!(first_search, 3000);
}
