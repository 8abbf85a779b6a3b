//! Deterministic workload generation: per-worker operation lists derived
//! from (seed, worker index), independent of protocol and transport.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sessionkv_core::{Key, Value};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WorkloadParams {
    pub num_workers: u64,
    pub ops_per_worker: u64,
    pub put_rate: f64,
    pub key_range: u64,
    pub val_range: u64,
    pub seed: u64,
}

impl Default for WorkloadParams {
    fn default() -> WorkloadParams {
        WorkloadParams {
            num_workers: 4,
            ops_per_worker: 1000,
            put_rate: 0.5,
            key_range: 50,
            val_range: 100_000,
            seed: 42,
        }
    }
}

impl WorkloadParams {
    pub fn total_ops(&self) -> u64 {
        self.num_workers * self.ops_per_worker
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Put { key: Key, value: Value },
    Get { key: Key },
}

/// One operation list per worker. Worker `w` draws from ChaCha stream `w`
/// of the shared seed, so lists are stable under re-generation and
/// independent of each other.
pub fn generate_workload(p: &WorkloadParams) -> Vec<Vec<Op>> {
    assert!((0.0..=1.0).contains(&p.put_rate), "put_rate must be in [0,1]");
    assert!(p.key_range >= 1 && p.val_range >= p.key_range, "value domain must contain keys");
    (0..p.num_workers)
        .map(|w| {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            rng.set_stream(w);
            (0..p.ops_per_worker)
                .map(|_| {
                    let key = Key(rng.gen_range(0..p.key_range));
                    if rng.gen::<f64>() < p.put_rate {
                        Op::Put { key, value: Value(rng.gen_range(0..p.val_range)) }
                    } else {
                        Op::Get { key }
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn put_rate_one_is_all_puts() {
        let p = WorkloadParams { put_rate: 1.0, ops_per_worker: 50, ..Default::default() };
        for ops in generate_workload(&p) {
            assert!(ops.iter().all(|o| matches!(o, Op::Put { .. })));
        }
    }

    #[test]
    fn regeneration_is_identical() {
        let p = WorkloadParams::default();
        assert_eq!(generate_workload(&p), generate_workload(&p));
    }

    #[test]
    fn empirical_put_fraction_tracks_put_rate() {
        let p = WorkloadParams {
            put_rate: 0.5,
            num_workers: 1,
            ops_per_worker: 10_000,
            ..Default::default()
        };
        let ops = &generate_workload(&p)[0];
        let puts = ops.iter().filter(|o| matches!(o, Op::Put { .. })).count() as f64;
        let frac = puts / ops.len() as f64;
        assert!((frac - 0.5).abs() < 0.02, "put fraction {frac}");
    }

    #[test]
    fn workers_draw_distinct_streams() {
        let p = WorkloadParams { ops_per_worker: 100, ..Default::default() };
        let w = generate_workload(&p);
        assert_ne!(w[0], w[1]);
    }
}
