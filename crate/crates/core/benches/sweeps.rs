// Copyright 2026 The D3 Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use d3_core::experiment::{run_experiment, ExperimentConfig};
use d3_core::metrics::oracle_sweep;
use d3_core::placement::{BlockAddress, ClusterConfig, D3Layout};
use d3_core::recovery::plan_node_recovery_with;
use d3_core::simnet::{accumulate_traffic, lambda_exact};
use d3_core::{CodeScheme, Execution};

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn failed_node_sweep(c: &mut Criterion) {
    let cfg = ClusterConfig::new(8, 5);
    let scheme = CodeScheme::rs(6, 3).unwrap();
    let layout = D3Layout::new(&cfg, &scheme).unwrap();
    let map = layout.build(layout.stripes_per_cycle());
    let nodes: Vec<BlockAddress> = cfg.all_nodes().collect();
    let mut group = c.benchmark_group("failed_node_sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| {
                exec.map(&nodes, |&f| {
                    let plan = plan_node_recovery_with(&map, f, 0, Execution::Sequential).unwrap();
                    lambda_exact(&accumulate_traffic(&plan, &cfg)).unwrap()
                })
            })
        });
    }
    group.finish();
}

fn per_stripe_planning(c: &mut Criterion) {
    let cfg = ClusterConfig::new(8, 5);
    let scheme = CodeScheme::rs(6, 3).unwrap();
    let map = d3_core::placement::place_rdd(&cfg, &scheme, 20_000, 1).unwrap();
    let mut group = c.benchmark_group("baseline_planning");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| plan_node_recovery_with(&map, BlockAddress::new(2, 1), 7, exec).unwrap())
        });
    }
    group.finish();
}

fn experiment_cells(c: &mut Criterion) {
    let cfg = ExperimentConfig::from_json(
        r#"{
            "placers": ["d3", "rdd", "hdd"],
            "codes": ["rs:2,1", "rs:3,2", "rs:6,3"],
            "racks": [8],
            "nodes": [3],
            "cross_bw": [100, 200],
            "seeds": [1, 2, 3]
        }"#,
    )
    .unwrap();
    let mut group = c.benchmark_group("experiment_cells");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| run_experiment(&cfg, exec).unwrap())
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let schemes: Vec<CodeScheme> = (2..=6)
        .flat_map(|len| (1..len).map(move |m| CodeScheme::rs(len - m, m).unwrap()))
        .collect();
    let mut group = c.benchmark_group("oracle_sweep");
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| oracle_sweep(&schemes, exec))
        });
    }
    group.finish();
}

criterion_group!(
    benches,
    failed_node_sweep,
    per_stripe_planning,
    experiment_cells,
    oracle
);
criterion_main!(benches);
