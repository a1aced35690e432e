use std::time::Instant;

use isingdp::sampler::{chain_rng, run_parallel};
use isingdp::simgen::{generate_scenario, Scenario, ScenarioSpec};
use isingdp::SamplerConfig;

fn timed_run(threads: usize) -> (f64, Vec<Vec<u64>>) {
    let sim = generate_scenario(&ScenarioSpec::<f64>::standard(Scenario::One), &mut chain_rng(8, 0)).unwrap();
    let config = SamplerConfig { iterations: 600, burn_in: 300, n_chains: 4, seed: 8, ..SamplerConfig::default() };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let start = Instant::now();
    let traces = pool.install(|| run_parallel(&sim.data, &config)).unwrap();
    (start.elapsed().as_secs_f64(), traces.into_iter().map(|t| t.inclusion_counts).collect())
}

#[test]
fn four_chains_on_four_cores_more_than_halve_wall_time() {
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    if cores < 4 {
        eprintln!("skipped: {cores} core(s) available, the speedup check needs 4");
        return;
    }
    let (serial, a) = timed_run(1);
    let (parallel, b) = timed_run(4);
    assert_eq!(a, b, "chain output must not depend on the thread count");
    let speedup = serial / parallel;
    assert!(speedup > 2.0, "speedup {speedup:.2} (serial {serial:.2} s, 4 threads {parallel:.2} s)");
}
