//! 2-opt improvement with first-improvement acceptance.

use std::time::{Duration, Instant};

use rand_xoshiro::rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::Result;
use crate::geometry::{cycle_length, ensure_valid, Tour, TspInstance};

/// Moves must shorten the tour by more than this to be accepted.
pub const IMPROVEMENT_EPS: f64 = 1e-12;

/// No limit up to 200 nodes, 60 s per tour above that.
pub fn default_time_limit(n: usize) -> Option<Duration> {
    (n > 200).then(|| Duration::from_secs(60))
}

/// Length change from reversing positions `a..=b` of `t`.
///
/// Only the two boundary edges change: `(t[a-1], t[a])` and `(t[b], t[b+1])`
/// become `(t[a-1], t[b])` and `(t[a], t[b+1])`, indices cyclic. Reversing the
/// whole tour leaves the cycle unchanged and yields 0.
pub fn improvement_delta(inst: &TspInstance, t: &Tour, a: usize, b: usize) -> f64 {
    delta_on(inst, t.order(), a, b)
}

#[inline]
fn delta_on(inst: &TspInstance, order: &[usize], a: usize, b: usize) -> f64 {
    let n = order.len();
    debug_assert!(a < b && b < n);
    if a == 0 && b == n - 1 {
        return 0.0;
    }
    let before = order[(a + n - 1) % n];
    let first = order[a];
    let last = order[b];
    let after = order[(b + 1) % n];
    inst.dist(before, last) + inst.dist(first, after) - inst.dist(before, first) - inst.dist(last, after)
}

/// Reverses positions `a..=b`, or the complementary arc when that is shorter.
/// Both give the same cycle.
fn reverse_arc(order: &mut [usize], a: usize, b: usize) {
    let n = order.len();
    let len = b - a + 1;
    if 2 * len <= n {
        order[a..=b].reverse();
        return;
    }
    let (mut i, mut j) = (b + 1, a + n - 1);
    while i < j {
        order.swap(i % n, j % n);
        i += 1;
        j -= 1;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoOptOutcome {
    pub tour: Tour,
    pub moves: usize,
    pub sweeps: usize,
    /// Sum of the deltas of every accepted move.
    pub delta_sum: f64,
    /// Stopped by the time limit rather than by a sweep without improvement.
    pub timed_out: bool,
}

pub fn two_opt(inst: &TspInstance, t: &Tour, time_limit: Option<Duration>) -> Result<Tour> {
    two_opt_detailed(inst, t, time_limit).map(|o| o.tour)
}

pub fn two_opt_detailed(inst: &TspInstance, t: &Tour, time_limit: Option<Duration>) -> Result<TwoOptOutcome> {
    ensure_valid(inst, t)?;
    let start = Instant::now();
    let mut order = t.order().to_vec();
    let n = order.len();
    let mut out = TwoOptOutcome {
        tour: Tour::new(Vec::new()),
        moves: 0,
        sweeps: 0,
        delta_sum: 0.0,
        timed_out: false,
    };

    'sweeps: loop {
        out.sweeps += 1;
        let mut improved = false;
        for a in 0..n - 1 {
            if time_limit.is_some_and(|lim| start.elapsed() >= lim) {
                out.timed_out = true;
                break 'sweeps;
            }
            for b in a + 1..n {
                let delta = delta_on(inst, &order, a, b);
                if delta < -IMPROVEMENT_EPS {
                    reverse_arc(&mut order, a, b);
                    out.moves += 1;
                    out.delta_sum += delta;
                    improved = true;
                }
            }
        }
        if !improved {
            break;
        }
    }
    out.tour = Tour::new(order);
    Ok(out)
}

/// Best 2-opt local optimum over `restarts` random starting permutations.
/// Used to build reference tours where no exact solution is available.
pub fn multi_start_two_opt(inst: &TspInstance, restarts: usize, seed: u64) -> Result<Tour> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    let n = inst.len();
    let mut best: Option<(f64, Tour)> = None;
    for _ in 0..restarts.max(1) {
        let mut order: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = ((rng.next_u64() as u128 * (i as u128 + 1)) >> 64) as usize;
            order.swap(i, j);
        }
        let tour = two_opt(inst, &Tour::new(order), None)?;
        let len = cycle_length(inst, tour.order());
        if best.as_ref().map_or(true, |(b, _)| len < *b) {
            best = Some((len, tour));
        }
    }
    Ok(best.expect("at least one restart").1)
}
