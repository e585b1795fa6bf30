//! Brute-force references shared by the integration suites. Nothing here
//! goes through the binomial weights or node dispatch used by the library.

#![allow(dead_code)]

use finite_distill::bell::{fidelity, iterate_map, success_probability, BellDiagonalState};
use finite_distill::IterationPolicy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Survivor distribution from all `2^(n/2)` success/failure patterns.
pub fn enumerate_pmf(n: usize, p: f64) -> Vec<f64> {
    let trials = n / 2;
    let mut pmf = vec![0.0; trials + 1];
    for mask in 0u32..(1 << trials) {
        let ok = mask.count_ones() as usize;
        pmf[ok] += p.powi(ok as i32) * (1.0 - p).powi((trials - ok) as i32);
    }
    pmf
}

/// Exact mean output fidelity by walking every per-step outcome pattern of
/// every round. The rules are spelled out again here on purpose.
pub fn enumerate_iterative(n: usize, s0: &BellDiagonalState, policy: &IterationPolicy) -> f64 {
    let start = if policy.drop_one_when_even && n % 2 == 0 {
        n - 1
    } else {
        n
    };
    walk(start, 0, None, s0, policy)
}

fn walk(
    live: usize,
    depth: usize,
    backup: Option<usize>,
    s0: &BellDiagonalState,
    policy: &IterationPolicy,
) -> f64 {
    let fid = |d: usize| fidelity(&iterate_map(s0, d));
    if live == 0 {
        return match backup {
            Some(b) => fid(b),
            None => policy.failure_fidelity,
        };
    }
    if live == 1 {
        return fid(depth);
    }
    if live == 2 && backup.is_none() && policy.stop_at_two {
        return fid(depth);
    }
    let mut pool = live;
    let mut backup = backup;
    if pool % 2 == 1 {
        if policy.backup_enabled {
            backup = Some(depth);
        }
        pool -= 1;
    }
    let trials = pool / 2;
    let p = success_probability(&iterate_map(s0, depth));
    let mut total = 0.0;
    for mask in 0u32..(1 << trials) {
        let ok = mask.count_ones() as usize;
        let weight = p.powi(ok as i32) * (1.0 - p).powi((trials - ok) as i32);
        total += weight * walk(ok, depth + 1, backup, s0, policy);
    }
    total
}

/// Flat-Dirichlet draws on the probability simplex.
pub fn simplex_samples(count: usize, seed: u64) -> Vec<BellDiagonalState> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let e: [f64; 4] = std::array::from_fn(|_| -(1.0 - rng.gen::<f64>()).ln());
            let t: f64 = e.iter().sum();
            BellDiagonalState::from_array(e.map(|x| x / t)).unwrap()
        })
        .collect()
}

pub fn all_policies() -> Vec<(&'static str, IterationPolicy)> {
    let continuing = IterationPolicy {
        stop_at_two: false,
        ..IterationPolicy::backup()
    };
    vec![
        ("backup", IterationPolicy::backup()),
        ("nobackup", IterationPolicy::no_backup()),
        ("drop-even", IterationPolicy::drop_even()),
        ("continue-at-two", continuing),
    ]
}
