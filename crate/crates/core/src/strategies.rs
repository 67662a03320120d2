//! Interval strategies: memoryless strategies that are constant on each
//! interval of a counter partition.
//!
//! Open-ended strategies (OEIS) carry a finite partition of `[1, B-1]`;
//! cyclic strategies (CIS) carry a period and a window partition of
//! `[1, period]` and repeat it forever. Pure strategies use Dirac rows.

use std::collections::{BTreeMap, HashMap};

use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::model::{ActionId, Bound, OcMdp, StateId, Weight};
use crate::partitions::{IntervalPartition, PeriodicPartition};
use crate::{Counter, Rational};

/// A distribution over enabled actions of one state.
pub type ActionDist = Vec<(ActionId, Rational)>;

/// Table rows: `rows[interval][state]` is the action distribution used while
/// the counter lies in that interval.
pub type StrategyTable = Vec<Vec<ActionDist>>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StrategyBase {
    Oeis { partition: IntervalPartition, bound: Bound },
    Cis(PeriodicPartition),
}

/// An interval strategy with its lookup table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntervalStrategy {
    pub base: StrategyBase,
    rows: StrategyTable,
}

impl IntervalStrategy {
    pub fn new_oeis(partition: IntervalPartition, bound: Bound, rows: StrategyTable) -> Result<IntervalStrategy> {
        if partition.covered_bound() != bound {
            return Err(Error::Domain(format!(
                "partition covers [1,{}-1] but the declared bound is {bound}",
                partition.covered_bound()
            )));
        }
        let s = IntervalStrategy { base: StrategyBase::Oeis { partition, bound }, rows };
        s.check_rows()?;
        Ok(s)
    }

    pub fn new_cis(window: PeriodicPartition, rows: StrategyTable) -> Result<IntervalStrategy> {
        let s = IntervalStrategy { base: StrategyBase::Cis(window), rows };
        s.check_rows()?;
        Ok(s)
    }

    fn check_rows(&self) -> Result<()> {
        let want = self.intervals().len();
        if self.rows.len() != want {
            return Err(Error::Domain(format!(
                "strategy table has {} interval blocks, partition has {want}",
                self.rows.len()
            )));
        }
        let n = self.rows.first().map(Vec::len).unwrap_or(0);
        for block in &self.rows {
            if block.len() != n {
                return Err(Error::Domain("interval blocks cover different state sets".to_string()));
            }
        }
        Ok(())
    }

    pub fn is_cis(&self) -> bool {
        matches!(self.base, StrategyBase::Cis(_))
    }

    /// Counter bound of the underlying semantics; infinite for CIS.
    pub fn bound(&self) -> Bound {
        match &self.base {
            StrategyBase::Oeis { bound, .. } => bound.clone(),
            StrategyBase::Cis(_) => Bound::Infinite,
        }
    }

    /// Intervals of the base partition (the window, for CIS).
    pub fn intervals(&self) -> &[crate::partitions::Interval] {
        match &self.base {
            StrategyBase::Oeis { partition, .. } => partition.intervals(),
            StrategyBase::Cis(pp) => pp.window.intervals(),
        }
    }

    pub fn table(&self) -> &StrategyTable {
        &self.rows
    }

    /// Index of the table block governing counter value `k`.
    pub fn block_index(&self, k: &Counter) -> Result<usize> {
        let idx = match &self.base {
            StrategyBase::Oeis { partition, .. } => partition.find(k),
            StrategyBase::Cis(pp) => pp.find(k),
        };
        idx.ok_or_else(|| Error::Domain(format!("counter value {k} outside the strategy domain")))
    }

    /// The action distribution prescribed in state `q` at counter `k >= 1`.
    pub fn lookup(&self, q: StateId, k: &Counter) -> Result<ActionDist> {
        let i = self.block_index(k)?;
        self.rows
            .get(i)
            .and_then(|block| block.get(q.0))
            .cloned()
            .ok_or_else(|| Error::Internal(format!("strategy table missing row ({i},{})", q.0)))
    }

    /// Model-aware validation: rows are distributions over enabled actions.
    pub fn validate_for(&self, m: &OcMdp) -> Vec<String> {
        let mut out = Vec::new();
        for (i, block) in self.rows.iter().enumerate() {
            if block.len() != m.n_states() {
                out.push(format!(
                    "interval block {i} has {} rows, model has {} states",
                    block.len(),
                    m.n_states()
                ));
                continue;
            }
            for (qi, dist) in block.iter().enumerate() {
                let q = StateId(qi);
                let mut sum = Rational::zero();
                for (a, p) in dist {
                    if m.row(q, *a).is_none() {
                        out.push(format!(
                            "block {i}: action {} not enabled in state {}",
                            m.action_name(*a),
                            m.state_name(q)
                        ));
                    }
                    if p.is_negative() {
                        out.push(format!("block {i}: negative probability in state {}", m.state_name(q)));
                    }
                    sum += p;
                }
                if !sum.is_one() {
                    out.push(format!(
                        "block {i}: row of state {} sums to {sum}, not 1",
                        m.state_name(q)
                    ));
                }
            }
        }
        out
    }

    /// True iff the lookup is constant on each interval of `p`.
    ///
    /// Checked by comparing table blocks across interval boundaries, never by
    /// sampling counter values.
    pub fn is_based_on(&self, p: &IntervalPartition) -> bool {
        let (own, domain) = match &self.base {
            StrategyBase::Oeis { partition, bound } => (partition, bound.clone()),
            StrategyBase::Cis(pp) => (&pp.window, Bound::Finite(&pp.period + 1u32)),
        };
        if p.covered_bound() != domain {
            return false;
        }
        for iv in p.intervals() {
            let first = match own.find(&iv.lo) {
                Some(i) => i,
                None => return false,
            };
            let last = match &iv.hi {
                Some(h) => match own.find(h) {
                    Some(i) => i,
                    None => return false,
                },
                None => own.len() - 1,
            };
            for i in first..=last {
                if self.rows[i] != self.rows[first] {
                    return false;
                }
            }
        }
        true
    }
}

/// Per state-interval pair, a non-empty subset of enabled actions: the
/// prescribed support of a sought randomised strategy.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SupportAssignment {
    /// `rows[interval][state]` = chosen action subset (sorted).
    pub rows: Vec<Vec<Vec<ActionId>>>,
}

/// Enabled actions of `q`, sorted by action id (enumeration tie-break order).
fn actions_sorted(m: &OcMdp, q: StateId) -> Vec<ActionId> {
    let mut v: Vec<ActionId> = m.enabled(q).iter().map(|r| r.action).collect();
    v.sort();
    v
}

/// All pure strategies based on `p`, in deterministic odometer order.
pub fn enumerate_pure<'a>(p: &IntervalPartition, m: &'a OcMdp) -> PureEnum<'a> {
    let choices: Vec<Vec<ActionId>> = {
        let per_state: Vec<Vec<ActionId>> = m.states().map(|q| actions_sorted(m, q)).collect();
        (0..p.len()).flat_map(|_| per_state.iter().cloned()).collect()
    };
    PureEnum {
        m,
        partition: p.clone(),
        digits: vec![0; choices.len()],
        choices,
        done: false,
    }
}

pub struct PureEnum<'a> {
    m: &'a OcMdp,
    partition: IntervalPartition,
    /// One digit per (interval, state), state-minor.
    digits: Vec<usize>,
    choices: Vec<Vec<ActionId>>,
    done: bool,
}

impl Iterator for PureEnum<'_> {
    type Item = IntervalStrategy;

    fn next(&mut self) -> Option<IntervalStrategy> {
        if self.done {
            return None;
        }
        let n = self.m.n_states();
        let rows: StrategyTable = (0..self.partition.len())
            .map(|i| {
                (0..n)
                    .map(|qi| {
                        let a = self.choices[i * n + qi][self.digits[i * n + qi]];
                        vec![(a, Rational::one())]
                    })
                    .collect()
            })
            .collect();
        let out = IntervalStrategy::new_oeis(
            self.partition.clone(),
            self.partition.covered_bound(),
            rows,
        )
        .expect("enumerated strategy is well-formed");
        // Advance the odometer.
        let mut i = self.digits.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            if self.digits[i] + 1 < self.choices[i].len() {
                self.digits[i] += 1;
                for d in self.digits[i + 1..].iter_mut() {
                    *d = 0;
                }
                break;
            }
        }
        Some(out)
    }
}

/// All support assignments for `p`: per state-interval pair every non-empty
/// subset of enabled actions, in mask-counting order.
pub fn enumerate_supports(p: &IntervalPartition, m: &OcMdp) -> SupportEnum {
    let per_state: Vec<Vec<ActionId>> = m.states().map(|q| actions_sorted(m, q)).collect();
    let slots: Vec<Vec<ActionId>> =
        (0..p.len()).flat_map(|_| per_state.iter().cloned()).collect();
    SupportEnum { n_states: m.n_states(), n_blocks: p.len(), masks: vec![1; slots.len()], slots, done: false }
}

pub struct SupportEnum {
    n_states: usize,
    n_blocks: usize,
    masks: Vec<u64>,
    slots: Vec<Vec<ActionId>>,
    done: bool,
}

impl SupportEnum {
    fn subset(&self, slot: usize) -> Vec<ActionId> {
        let mask = self.masks[slot];
        self.slots[slot]
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .map(|(_, a)| *a)
            .collect()
    }
}

impl Iterator for SupportEnum {
    type Item = SupportAssignment;

    fn next(&mut self) -> Option<SupportAssignment> {
        if self.done || self.slots.iter().any(Vec::is_empty) {
            self.done = true;
            return None;
        }
        let rows: Vec<Vec<Vec<ActionId>>> = (0..self.n_blocks)
            .map(|i| (0..self.n_states).map(|qi| self.subset(i * self.n_states + qi)).collect())
            .collect();
        let mut i = self.masks.len();
        loop {
            if i == 0 {
                self.done = true;
                break;
            }
            i -= 1;
            let full = (1u64 << self.slots[i].len()) - 1;
            if self.masks[i] < full {
                self.masks[i] += 1;
                for m in self.masks[i + 1..].iter_mut() {
                    *m = 1;
                }
                break;
            }
        }
        Some(SupportAssignment { rows })
    }
}

/// Finite-automaton counterpart of an interval strategy: tracks the counter
/// (bounded OEIS) or its residue modulo the period (CIS) in memory.
#[derive(Debug, Clone)]
pub struct MealyMachine {
    /// Memory state labels: counter values or residues.
    pub memory: Vec<Counter>,
    pub initial: usize,
    /// `(memory, state, action) -> memory`; absent entries are absorbed runs.
    pub update: HashMap<(usize, StateId, ActionId), usize>,
    /// `(memory, state) -> action distribution`.
    pub next: BTreeMap<(usize, StateId), ActionDist>,
}

/// Export the Mealy counterpart of a strategy started at counter `k_init`.
///
/// Bounded OEIS machines have one memory state per counter value, which is
/// exponential in the encoding of the bound; only states reachable from the
/// initial value are materialised unless `full` is set.
pub fn export_mealy(
    s: &IntervalStrategy,
    m: &OcMdp,
    k_init: &Counter,
    full: bool,
) -> Result<MealyMachine> {
    match &s.base {
        StrategyBase::Oeis { bound: Bound::Infinite, .. } => Err(Error::Unsupported(
            "an open-ended strategy over an unbounded counter may need infinite memory".to_string(),
        )),
        StrategyBase::Oeis { bound: Bound::Finite(b), .. } => {
            if k_init.is_zero() || k_init >= b {
                return Err(Error::Domain(format!("initial counter {k_init} outside [1,{b}-1]")));
            }
            let in_range = |k: &Counter| !k.is_zero() && k < b;
            let step = |k: &Counter, w: Weight| -> Option<Counter> {
                let k2 = w.apply(k);
                in_range(&k2).then_some(k2)
            };
            if full {
                let cap = u64::try_from(b).map_err(|_| {
                    Error::Unsupported("bound too large for full memory materialisation".to_string())
                })?;
                let memory: Vec<Counter> = (1..cap).map(Counter::from).collect();
                build_mealy(s, m, memory, k_init.clone(), step)
            } else {
                let memory = reachable_memory(s, m, k_init.clone(), &step)?;
                build_mealy(s, m, memory, k_init.clone(), step)
            }
        }
        StrategyBase::Cis(pp) => {
            let rho = pp.period.clone();
            let m0 = k_init.mod_floor(&rho);
            let step = {
                let rho = rho.clone();
                move |k: &Counter, w: Weight| -> Option<Counter> {
                    // Residue arithmetic: the counter itself never blocks.
                    let shifted = k + &rho; // keep subtraction non-negative
                    Some(w.apply(&shifted).mod_floor(&rho))
                }
            };
            if full {
                let cap = u64::try_from(&rho).map_err(|_| {
                    Error::Unsupported("period too large for full memory materialisation".to_string())
                })?;
                let memory: Vec<Counter> = (0..cap).map(Counter::from).collect();
                build_mealy(s, m, memory, m0, step)
            } else {
                let memory = reachable_memory(s, m, m0.clone(), &step)?;
                build_mealy(s, m, memory, m0, step)
            }
        }
    }
}

fn mealy_row(s: &IntervalStrategy, m: &OcMdp, mem: &Counter) -> Result<Vec<ActionDist>> {
    // For a CIS, residue 0 answers as counter value `period`.
    let key = match &s.base {
        StrategyBase::Cis(pp) if mem.is_zero() => pp.period.clone(),
        _ => mem.clone(),
    };
    m.states().map(|q| s.lookup(q, &key)).collect()
}

fn reachable_memory(
    s: &IntervalStrategy,
    m: &OcMdp,
    m0: Counter,
    step: &impl Fn(&Counter, Weight) -> Option<Counter>,
) -> Result<Vec<Counter>> {
    let mut seen = std::collections::BTreeSet::new();
    let mut queue = vec![m0.clone()];
    seen.insert(m0);
    while let Some(k) = queue.pop() {
        for q in m.states() {
            for (a, p) in mealy_row(s, m, &k)?[q.0].iter() {
                if p.is_zero() {
                    continue;
                }
                let w = m
                    .row(q, *a)
                    .ok_or_else(|| Error::Domain("strategy uses a disabled action".to_string()))?
                    .weight;
                if let Some(k2) = step(&k, w) {
                    if seen.insert(k2.clone()) {
                        queue.push(k2);
                    }
                }
            }
        }
    }
    Ok(seen.into_iter().collect())
}

fn build_mealy(
    s: &IntervalStrategy,
    m: &OcMdp,
    memory: Vec<Counter>,
    m0: Counter,
    step: impl Fn(&Counter, Weight) -> Option<Counter>,
) -> Result<MealyMachine> {
    let index: BTreeMap<&Counter, usize> = memory.iter().zip(0..).collect();
    let initial = *index
        .get(&m0)
        .ok_or_else(|| Error::Internal("initial memory state missing".to_string()))?;
    let mut update = HashMap::new();
    let mut next = BTreeMap::new();
    for (mi, k) in memory.iter().enumerate() {
        let rows = mealy_row(s, m, k)?;
        for q in m.states() {
            next.insert((mi, q), rows[q.0].clone());
            for r in m.enabled(q) {
                if let Some(k2) = step(k, r.weight) {
                    if let Some(&ti) = index.get(&k2) {
                        update.insert((mi, q, r.action), ti);
                    }
                }
            }
        }
    }
    Ok(MealyMachine { memory, initial, update, next })
}
