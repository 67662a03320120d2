#![allow(dead_code)]
//! Shared helpers for the integration suites: seeded random models,
//! strategies and graphs.

use ocmdp::model::{ActionId, ActionRow, Bound, OcMdp, StateId, Weight};
use ocmdp::partitions::{Interval, IntervalPartition};
use ocmdp::strategies::{ActionDist, IntervalStrategy, StrategyTable};
use ocmdp::{Counter, Rational};
use rand::prelude::*;

pub fn rat_u(num: u64, den: u64) -> Rational {
    Rational::new(num.into(), den.into())
}

/// Random distribution over `k` items with small exact rational weights.
fn random_dist(rng: &mut impl Rng, k: usize) -> Vec<Rational> {
    let weights: Vec<u64> = (0..k).map(|_| rng.gen_range(1..=4)).collect();
    let total: u64 = weights.iter().sum();
    weights.into_iter().map(|w| rat_u(w, total)).collect()
}

/// A random deadlock-free OC-MDP with exact rational transitions.
pub fn random_model(rng: &mut impl Rng, max_states: usize, max_actions: usize) -> OcMdp {
    let nq = rng.gen_range(1..=max_states);
    let na = rng.gen_range(1..=max_actions);
    let state_names = (0..nq).map(|i| format!("s{i}")).collect();
    let action_names = (0..na).map(|i| format!("a{i}")).collect();
    let rows = (0..nq)
        .map(|_| {
            let enabled = rng.gen_range(1..=na);
            let mut actions: Vec<usize> = (0..na).collect();
            actions.shuffle(rng);
            let mut actions: Vec<usize> = actions.into_iter().take(enabled).collect();
            actions.sort_unstable();
            actions
                .into_iter()
                .map(|a| {
                    let weight = match rng.gen_range(0..3) {
                        0 => Weight::Down,
                        1 => Weight::Stay,
                        _ => Weight::Up,
                    };
                    let succ_count = rng.gen_range(1..=nq.min(3));
                    let mut targets: Vec<usize> = (0..nq).collect();
                    targets.shuffle(rng);
                    let targets: Vec<usize> = targets.into_iter().take(succ_count).collect();
                    let dist = random_dist(rng, targets.len());
                    ActionRow {
                        action: ActionId(a),
                        weight,
                        succ: targets.into_iter().map(StateId).zip(dist).collect(),
                    }
                })
                .collect()
        })
        .collect();
    OcMdp::new(state_names, action_names, rows)
}

/// A random partition of `[1, B-1]` into at most `max_intervals` intervals.
pub fn random_partition(rng: &mut impl Rng, bound: u64, max_intervals: usize) -> IntervalPartition {
    let total = bound - 1;
    if total == 0 {
        return IntervalPartition::new(Vec::new()).unwrap();
    }
    let pieces = rng.gen_range(1..=max_intervals.min(total as usize));
    let mut cuts: Vec<u64> = (0..pieces - 1).map(|_| rng.gen_range(1..=total)).collect();
    cuts.push(total);
    cuts.sort_unstable();
    cuts.dedup();
    let mut intervals = Vec::new();
    let mut lo = 1u64;
    for c in cuts {
        if c >= lo {
            intervals.push(Interval::bounded(lo, c));
            lo = c + 1;
        }
    }
    IntervalPartition::new(intervals).unwrap()
}

/// A random action distribution over the enabled actions of one state.
pub fn random_row(rng: &mut impl Rng, m: &OcMdp, q: StateId) -> ActionDist {
    let enabled: Vec<ActionId> = m.enabled(q).iter().map(|r| r.action).collect();
    if rng.gen_bool(0.5) {
        // Pure choice.
        let a = enabled[rng.gen_range(0..enabled.len())];
        vec![(a, Rational::new(1.into(), 1.into()))]
    } else {
        let dist = random_dist(rng, enabled.len());
        enabled.into_iter().zip(dist).collect()
    }
}

/// A random open-ended strategy on a random partition of `[1, B-1]`.
pub fn random_oeis(
    rng: &mut impl Rng,
    m: &OcMdp,
    bound: u64,
    max_intervals: usize,
) -> IntervalStrategy {
    let p = random_partition(rng, bound, max_intervals);
    let rows: StrategyTable = (0..p.len())
        .map(|_| m.states().map(|q| random_row(rng, m, q)).collect())
        .collect();
    IntervalStrategy::new_oeis(p, Bound::finite(bound), rows).unwrap()
}

/// A counter-oblivious row promoted to an unbounded single-interval strategy.
pub fn oblivious_oeis(row: Vec<ActionDist>) -> IntervalStrategy {
    let p = IntervalPartition::full_range(&Bound::Infinite);
    IntervalStrategy::new_oeis(p, Bound::Infinite, vec![row]).unwrap()
}

/// The same row as a cyclic strategy with the given period (all window
/// blocks equal, so it is the same function of the counter).
pub fn oblivious_cis(row: Vec<ActionDist>, period: u64, rng: &mut impl Rng) -> IntervalStrategy {
    let window = random_partition(rng, period + 1, 2.min(period as usize).max(1));
    let pp = ocmdp::partitions::PeriodicPartition::new(Counter::from(period), window.clone()).unwrap();
    let rows: StrategyTable = (0..window.len()).map(|_| row.clone()).collect();
    IntervalStrategy::new_cis(pp, rows).unwrap()
}
