//! Iterative distillation of a finite sample down to one pair, with
//! optional backup pairs.
//!
//! Every live pair at iteration depth `i` is in the state obtained by `i`
//! successful steps from the initial state, so a pool is fully described by
//! an [`EnsembleNode`]. Each round the pool is reduced by the rules below and
//! the surviving pairs advance one depth:
//!
//! 1. no live pairs: output the backup, or `failure_fidelity` without one;
//! 2. one live pair: output it (it is at least as deep as any backup);
//! 3. two live pairs and no backup: stop and output one of them (unless
//!    the policy disables this rule);
//! 4. odd pool: set one pair aside as the new backup (or discard it);
//! 5. run `n/2` independent steps, survivors go one depth deeper.
//!
//! Expectations are computed exactly by memoized recursion over nodes with
//! binomial branch weights, or estimated from seeded trajectories.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bell::{fidelity, success_ladder, success_probability, BellDiagonalState};
use crate::ensemble::binomial_pmf;
use crate::error::{Error, Result};

/// Largest sample the exact evaluator accepts.
pub const EXACT_CAP: usize = 4096;

/// Trajectories are aggregated in fixed blocks of this size; the merge order
/// never depends on the thread count.
const MC_BLOCK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationPolicy {
    pub backup_enabled: bool,
    pub drop_one_when_even: bool,
    /// Stop with one of two remaining live pairs when no backup is held.
    /// Disabling it runs one more step on the last two pairs instead.
    pub stop_at_two: bool,
    /// Fidelity of the locally prepared pair returned when everything failed.
    pub failure_fidelity: f64,
}

impl IterationPolicy {
    pub fn backup() -> Self {
        Self {
            backup_enabled: true,
            drop_one_when_even: false,
            stop_at_two: true,
            failure_fidelity: 0.5,
        }
    }

    pub fn no_backup() -> Self {
        Self {
            backup_enabled: false,
            ..Self::backup()
        }
    }

    /// Backup pairs plus dropping one pair up front from an even sample.
    pub fn drop_even() -> Self {
        Self {
            drop_one_when_even: true,
            ..Self::backup()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=0.5).contains(&self.failure_fidelity) {
            return Err(Error::OutOfRange {
                name: "failure_fidelity",
                value: self.failure_fidelity,
                min: 0.0,
                max: 0.5,
            });
        }
        Ok(())
    }

    /// Pool size after the optional initial drop.
    pub fn initial_pool(&self, n: usize) -> usize {
        if self.drop_one_when_even && n % 2 == 0 && n > 0 {
            n - 1
        } else {
            n
        }
    }
}

impl Default for IterationPolicy {
    fn default() -> Self {
        Self::backup()
    }
}

/// `n` live pairs at `depth`, plus an optional backup pair at `backup_depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnsembleNode {
    pub n: usize,
    pub depth: usize,
    pub backup_depth: Option<usize>,
}

impl EnsembleNode {
    pub fn root(n: usize) -> Self {
        Self {
            n,
            depth: 0,
            backup_depth: None,
        }
    }
}

/// Which pair a finished run hands out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Output {
    Live(usize),
    Backup(usize),
    Failure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dispatch {
    Finish(Output),
    /// Run `trials` steps on pairs at the node's depth; the backup after any
    /// odd-pair handling is `backup_depth`.
    Round {
        trials: usize,
        backup_depth: Option<usize>,
    },
}

/// Applies the stopping and odd-pool rules to a node.
pub fn dispatch(node: EnsembleNode, policy: &IterationPolicy) -> Dispatch {
    match (node.n, node.backup_depth) {
        (0, Some(b)) => Dispatch::Finish(Output::Backup(b)),
        (0, None) => Dispatch::Finish(Output::Failure),
        (1, _) => Dispatch::Finish(Output::Live(node.depth)),
        (2, None) if policy.stop_at_two => Dispatch::Finish(Output::Live(node.depth)),
        (n, backup) => {
            let backup_depth = if n % 2 == 1 && policy.backup_enabled {
                // The fresh pair is deeper than any older backup.
                Some(node.depth)
            } else {
                backup
            };
            Dispatch::Round {
                trials: n / 2,
                backup_depth,
            }
        }
    }
}

/// `⌊log₂ n⌋`: rounds performed when every step succeeds.
pub fn full_success_rounds(n: usize) -> usize {
    if n <= 1 {
        0
    } else {
        (usize::BITS - 1 - n.leading_zeros()) as usize
    }
}

/// Upper bound on the number of rounds any run from `n` pairs performs.
pub fn depth_bound(n: usize) -> usize {
    if n <= 1 {
        1
    } else {
        (usize::BITS - (n - 1).leading_zeros()) as usize + 1
    }
}

/// Fidelities and step success probabilities along the success ladder.
#[derive(Debug, Clone)]
struct Ladder {
    fidelity: Vec<f64>,
    p_success: Vec<f64>,
}

impl Ladder {
    fn new(s0: &BellDiagonalState, n: usize) -> Self {
        let states = success_ladder(s0, full_success_rounds(n) + 1);
        Self {
            fidelity: states.iter().map(fidelity).collect(),
            p_success: states.iter().map(success_probability).collect(),
        }
    }

    fn output(&self, out: Output, policy: &IterationPolicy) -> f64 {
        match out {
            Output::Live(d) | Output::Backup(d) => self.fidelity[d],
            Output::Failure => policy.failure_fidelity,
        }
    }
}

fn check_inputs(n: usize, policy: &IterationPolicy) -> Result<()> {
    if n == 0 {
        return Err(Error::NoPairs);
    }
    policy.validate()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryOutcome {
    pub fidelity: f64,
    pub rounds: usize,
    pub output: Output,
}

impl TrajectoryOutcome {
    pub fn failed(&self) -> bool {
        self.output == Output::Failure
    }
}

/// One random run of the scheme.
pub fn run_trajectory<R: Rng + ?Sized>(
    n: usize,
    s0: &BellDiagonalState,
    policy: &IterationPolicy,
    rng: &mut R,
) -> Result<TrajectoryOutcome> {
    check_inputs(n, policy)?;
    let ladder = Ladder::new(s0, n);
    Ok(trajectory_on(&ladder, n, policy, rng))
}

fn trajectory_on<R: Rng + ?Sized>(
    ladder: &Ladder,
    n: usize,
    policy: &IterationPolicy,
    rng: &mut R,
) -> TrajectoryOutcome {
    let mut node = EnsembleNode::root(policy.initial_pool(n));
    let mut rounds = 0;
    loop {
        match dispatch(node, policy) {
            Dispatch::Finish(output) => {
                return TrajectoryOutcome {
                    fidelity: ladder.output(output, policy),
                    rounds,
                    output,
                }
            }
            Dispatch::Round {
                trials,
                backup_depth,
            } => {
                let p = ladder.p_success[node.depth];
                let survivors = (0..trials).filter(|_| rng.gen::<f64>() < p).count();
                node = EnsembleNode {
                    n: survivors,
                    depth: node.depth + 1,
                    backup_depth,
                };
                rounds += 1;
            }
        }
    }
}

struct ExactEvaluator<'a> {
    ladder: Ladder,
    policy: &'a IterationPolicy,
    memo: HashMap<EnsembleNode, f64>,
}

impl ExactEvaluator<'_> {
    fn value(&mut self, node: EnsembleNode) -> f64 {
        if let Some(&v) = self.memo.get(&node) {
            return v;
        }
        let v = match dispatch(node, self.policy) {
            Dispatch::Finish(out) => self.ladder.output(out, self.policy),
            Dispatch::Round {
                trials,
                backup_depth,
            } => {
                let pmf = binomial_pmf(trials, self.ladder.p_success[node.depth]);
                pmf.iter()
                    .enumerate()
                    .filter(|(_, &w)| w > 0.0)
                    .map(|(j, &w)| {
                        w * self.value(EnsembleNode {
                            n: j,
                            depth: node.depth + 1,
                            backup_depth,
                        })
                    })
                    .sum()
            }
        };
        self.memo.insert(node, v);
        v
    }
}

/// Exact mean output fidelity of the scheme.
pub fn expected_fidelity_exact(
    n: usize,
    s0: &BellDiagonalState,
    policy: &IterationPolicy,
) -> Result<f64> {
    check_inputs(n, policy)?;
    if n > EXACT_CAP {
        return Err(Error::ExactCapExceeded { n, cap: EXACT_CAP });
    }
    let mut eval = ExactEvaluator {
        ladder: Ladder::new(s0, n),
        policy,
        memo: HashMap::new(),
    };
    Ok(eval.value(EnsembleNode::root(policy.initial_pool(n))))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialStats {
    pub trials: usize,
    pub mean_fidelity: f64,
    /// Sample standard deviation over `sqrt(trials)`; zero for one trial.
    pub std_error: f64,
    /// Fraction of runs that ended with no pair at all.
    pub failure_rate: f64,
}

/// Count, mean, centred sum of squares and failures of a block.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    count: f64,
    mean: f64,
    m2: f64,
    failures: usize,
}

impl Moments {
    fn push(&mut self, x: f64, failed: bool) {
        self.count += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.count;
        self.m2 += delta * (x - self.mean);
        self.failures += usize::from(failed);
    }

    fn merge(self, other: Self) -> Self {
        if other.count == 0.0 {
            return self;
        }
        if self.count == 0.0 {
            return other;
        }
        let count = self.count + other.count;
        let delta = other.mean - self.mean;
        Self {
            count,
            mean: self.mean + delta * other.count / count,
            m2: self.m2 + other.m2 + delta * delta * self.count * other.count / count,
            failures: self.failures + other.failures,
        }
    }
}

/// Generator for trial `index`: the master seed picks the key, the trial
/// index picks the ChaCha stream.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Monte Carlo estimate over `trials` independent runs on the global rayon
/// pool. Results do not depend on the number of threads.
pub fn expected_fidelity_mc(
    n: usize,
    s0: &BellDiagonalState,
    policy: &IterationPolicy,
    trials: usize,
    seed: u64,
) -> Result<TrialStats> {
    check_inputs(n, policy)?;
    if trials == 0 {
        return Err(Error::NoTrials);
    }
    let ladder = Ladder::new(s0, n);
    let blocks = trials.div_ceil(MC_BLOCK);
    let partials: Vec<Moments> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut m = Moments::default();
            for t in b * MC_BLOCK..((b + 1) * MC_BLOCK).min(trials) {
                let mut rng = trial_rng(seed, t as u64);
                let out = trajectory_on(&ladder, n, policy, &mut rng);
                m.push(out.fidelity, out.failed());
            }
            m
        })
        .collect();
    let total = partials.into_iter().fold(Moments::default(), Moments::merge);
    let std_error = if trials > 1 {
        (total.m2 / (total.count - 1.0)).sqrt() / total.count.sqrt()
    } else {
        0.0
    };
    Ok(TrialStats {
        trials,
        mean_fidelity: total.mean,
        std_error,
        failure_rate: total.failures as f64 / trials as f64,
    })
}

/// As [`expected_fidelity_mc`] on a dedicated pool of `threads` workers.
pub fn expected_fidelity_mc_threads(
    n: usize,
    s0: &BellDiagonalState,
    policy: &IterationPolicy,
    trials: usize,
    seed: u64,
    threads: usize,
) -> Result<TrialStats> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .expect("thread pool");
    pool.install(|| expected_fidelity_mc(n, s0, policy, trials, seed))
}

/// Fidelity after every step succeeds from `n` pairs.
pub fn fully_successful_fidelity(n: usize, s0: &BellDiagonalState) -> f64 {
    let rounds = full_success_rounds(n);
    fidelity(&success_ladder(s0, rounds)[rounds])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampleSizeRow {
    pub n: usize,
    pub expected: f64,
    pub fully_successful: f64,
}

pub fn sweep_over_n(
    s0: &BellDiagonalState,
    n_range: std::ops::RangeInclusive<usize>,
    policy: &IterationPolicy,
) -> Result<Vec<SampleSizeRow>> {
    n_range
        .map(|n| {
            Ok(SampleSizeRow {
                n,
                expected: expected_fidelity_exact(n, s0, policy)?,
                fully_successful: fully_successful_fidelity(n, s0),
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityRow {
    pub a0: f64,
    pub expected: f64,
    pub ratio: f64,
}

/// Werner inputs at each `a0`, in the given order.
pub fn sweep_over_fidelity(
    n: usize,
    a_values: &[f64],
    policy: &IterationPolicy,
) -> Result<Vec<FidelityRow>> {
    a_values
        .par_iter()
        .map(|&a0| {
            let s0 = crate::bell::werner(a0)?;
            let expected = expected_fidelity_exact(n, &s0, policy)?;
            Ok(FidelityRow {
                a0,
                expected,
                ratio: expected / a0,
            })
        })
        .collect()
}
