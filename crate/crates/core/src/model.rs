//! Core OC-MDP data model: states, actions, weighted probabilistic
//! transitions, configurations, objectives and queries.
//!
//! Also houses the target-absorbing transform and a brute-force induced-chain
//! oracle used by the test suites. The oracle expands configurations
//! explicitly and solves reachability with its own sparse elimination, so it
//! shares no numeric path with the compression pipeline it cross-checks.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};

use crate::compression::{ChainState, CompressedChain, Entry};
use crate::error::{Error, Result};
use crate::strategies::IntervalStrategy;
use crate::{Counter, Rational};

/// Index of a control state in its [`OcMdp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub usize);

/// Index of an action in its [`OcMdp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ActionId(pub usize);

/// Counter effect of a state-action pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Weight {
    Down,
    Stay,
    Up,
}

impl Weight {
    pub fn offset(self) -> i8 {
        match self {
            Weight::Down => -1,
            Weight::Stay => 0,
            Weight::Up => 1,
        }
    }

    pub fn from_offset(v: i64) -> Option<Weight> {
        match v {
            -1 => Some(Weight::Down),
            0 => Some(Weight::Stay),
            1 => Some(Weight::Up),
            _ => None,
        }
    }

    /// Counter value after taking a step from `k >= 1`.
    pub fn apply(self, k: &Counter) -> Counter {
        match self {
            Weight::Down => k - 1u32,
            Weight::Stay => k.clone(),
            Weight::Up => k + 1u32,
        }
    }
}

/// Counter ceiling: a finite bound absorbs runs that reach it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Bound {
    Finite(Counter),
    Infinite,
}

impl Bound {
    pub fn finite(n: u64) -> Bound {
        Bound::Finite(Counter::from(n))
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Bound::Finite(_))
    }

    pub fn as_finite(&self) -> Option<&Counter> {
        match self {
            Bound::Finite(b) => Some(b),
            Bound::Infinite => None,
        }
    }
}

impl std::fmt::Display for Bound {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Bound::Finite(b) => write!(f, "{b}"),
            Bound::Infinite => write!(f, "inf"),
        }
    }
}

/// One enabled action of a state: its weight and successor distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRow {
    pub action: ActionId,
    pub weight: Weight,
    pub succ: Vec<(StateId, Rational)>,
}

/// A one-counter Markov decision process.
///
/// Weights are deterministic per state-action pair; transition probabilities
/// are exact rationals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OcMdp {
    state_names: Vec<String>,
    action_names: Vec<String>,
    rows: Vec<Vec<ActionRow>>,
}

impl OcMdp {
    pub fn new(state_names: Vec<String>, action_names: Vec<String>, rows: Vec<Vec<ActionRow>>) -> OcMdp {
        assert_eq!(state_names.len(), rows.len(), "one action list per state");
        OcMdp { state_names, action_names, rows }
    }

    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    pub fn n_actions(&self) -> usize {
        self.action_names.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        (0..self.n_states()).map(StateId)
    }

    pub fn state_name(&self, q: StateId) -> &str {
        &self.state_names[q.0]
    }

    pub fn action_name(&self, a: ActionId) -> &str {
        &self.action_names[a.0]
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.state_names.iter().position(|n| n == name).map(StateId)
    }

    pub fn action_by_name(&self, name: &str) -> Option<ActionId> {
        self.action_names.iter().position(|n| n == name).map(ActionId)
    }

    /// Enabled actions of `q`, in declaration order.
    pub fn enabled(&self, q: StateId) -> &[ActionRow] {
        &self.rows[q.0]
    }

    pub fn row(&self, q: StateId, a: ActionId) -> Option<&ActionRow> {
        self.rows[q.0].iter().find(|r| r.action == a)
    }
}

/// A configuration: control state plus counter value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Config {
    pub state: StateId,
    pub counter: Counter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveKind {
    /// Visit a target state, regardless of the counter.
    Reach,
    /// Reach counter zero while in a target state.
    SelTerm,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Objective {
    pub kind: ObjectiveKind,
    pub targets: BTreeSet<StateId>,
}

/// A threshold query: compare the objective probability against `theta` (>=).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub objective: Objective,
    pub bound: Bound,
    pub init: Config,
    pub theta: Rational,
}

impl Query {
    /// Check the query against a model; returns all violations.
    pub fn validate(&self, m: &OcMdp) -> Vec<String> {
        let mut out = Vec::new();
        if self.objective.targets.is_empty() {
            out.push("objective has no target states".to_string());
        }
        for t in &self.objective.targets {
            if t.0 >= m.n_states() {
                out.push(format!("target state #{} out of range", t.0));
            }
        }
        if self.init.state.0 >= m.n_states() {
            out.push(format!("initial state #{} out of range", self.init.state.0));
        }
        if let Bound::Finite(b) = &self.bound {
            if &self.init.counter > b {
                out.push(format!("initial counter {} exceeds bound {}", self.init.counter, b));
            }
        }
        if self.theta.is_negative() || self.theta > Rational::one() {
            out.push(format!("threshold {} outside [0,1]", self.theta));
        }
        out
    }
}

/// A one-counter Markov chain: stochastic counter updates, no actions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OneCounterChain {
    pub state_names: Vec<String>,
    /// Per state: successor, weight, probability.
    pub rows: Vec<Vec<(StateId, Weight, Rational)>>,
}

impl OneCounterChain {
    pub fn n_states(&self) -> usize {
        self.state_names.len()
    }

    /// Violations of the distribution invariant (each row sums to one).
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (q, row) in self.rows.iter().enumerate() {
            let sum: Rational = row.iter().map(|(_, _, p)| p.clone()).sum();
            if !sum.is_one() {
                out.push(format!("row of {} sums to {}, not 1", self.state_names[q], sum));
            }
            if row.iter().any(|(_, _, p)| p.is_negative()) {
                out.push(format!("row of {} has a negative probability", self.state_names[q]));
            }
        }
        out
    }
}

/// Check all model invariants; `validate` returns violations as data rather
/// than failing on the first one.
pub fn validate(m: &OcMdp) -> Vec<String> {
    let mut out = Vec::new();
    for q in m.states() {
        let rows = m.enabled(q);
        if rows.is_empty() {
            out.push(format!("deadlock: state {} has no enabled action", m.state_name(q)));
        }
        let mut seen = BTreeSet::new();
        for r in rows {
            if r.action.0 >= m.n_actions() {
                out.push(format!("state {}: action #{} out of range", m.state_name(q), r.action.0));
                continue;
            }
            if !seen.insert(r.action) {
                out.push(format!(
                    "state {}: action {} declared twice",
                    m.state_name(q),
                    m.action_name(r.action)
                ));
            }
            let mut sum = Rational::zero();
            for (p, pr) in &r.succ {
                if p.0 >= m.n_states() {
                    out.push(format!("state {}: successor #{} out of range", m.state_name(q), p.0));
                }
                if pr.is_negative() {
                    out.push(format!(
                        "negative probability at ({},{})",
                        m.state_name(q),
                        m.action_name(r.action)
                    ));
                }
                sum += pr;
            }
            if !sum.is_one() {
                out.push(format!(
                    "distribution sum != 1 at ({},{}): got {}",
                    m.state_name(q),
                    m.action_name(r.action),
                    sum
                ));
            }
        }
    }
    out
}

/// Make every target state absorbing with a single weight -1 self-loop.
///
/// Runs that visit a target then drain the counter to zero, so
/// state-reachability in the original model becomes selective termination (or
/// hitting the ceiling) in the transformed one.
pub fn absorb_targets(m: &OcMdp, targets: &BTreeSet<StateId>) -> Result<OcMdp> {
    for t in targets {
        if t.0 >= m.n_states() {
            return Err(Error::Domain(format!("target state #{} not in the model", t.0)));
        }
    }
    let mut rows = m.rows.clone();
    for t in targets {
        let action = rows[t.0].first().map(|r| r.action).ok_or_else(|| {
            Error::Domain(format!("target state {} has no enabled action", m.state_name(*t)))
        })?;
        rows[t.0] = vec![ActionRow {
            action,
            weight: Weight::Down,
            succ: vec![(*t, Rational::one())],
        }];
    }
    Ok(OcMdp::new(m.state_names.clone(), m.action_names.clone(), rows))
}

/// Largest ceiling the explicit oracle will expand.
const ORACLE_BOUND_CAP: u64 = 1 << 21;

/// Explicit Markov chain induced on configurations `Q x [0, B]` by a strategy.
///
/// Counter-0 and counter-B configurations are absorbing. This is the
/// brute-force oracle: exponential in the encoding of `B` by design.
pub fn induced_chain_bounded(
    m: &OcMdp,
    strat: &IntervalStrategy,
    bound: &Bound,
) -> Result<CompressedChain> {
    let b = match bound {
        Bound::Finite(b) => b,
        Bound::Infinite => {
            return Err(Error::Unsupported(
                "induced-chain oracle only handles finite bounds".to_string(),
            ))
        }
    };
    let b: u64 = b
        .try_into()
        .ok()
        .filter(|v: &u64| *v <= ORACLE_BOUND_CAP)
        .ok_or_else(|| Error::Unsupported(format!("bound {b} too large for explicit expansion")))?;
    let nq = m.n_states();
    let n = (b as usize + 1) * nq;
    let mut states = Vec::with_capacity(n);
    for k in 0..=b {
        for q in m.states() {
            states.push(ChainState::Config { state: q, counter: Counter::from(k) });
        }
    }
    let idx = |q: StateId, k: u64| (k as usize) * nq + q.0;
    let mut rows: Vec<Vec<(usize, Entry)>> = Vec::with_capacity(n);
    for k in 0..=b {
        for q in m.states() {
            if k == 0 || k == b {
                rows.push(vec![(idx(q, k), Entry::Exact(Rational::one()))]);
                continue;
            }
            let dist = strat.lookup(q, &Counter::from(k))?;
            let mut acc: BTreeMap<usize, Rational> = BTreeMap::new();
            for (a, pa) in dist {
                if pa.is_zero() {
                    continue;
                }
                let row = m
                    .row(q, a)
                    .ok_or_else(|| Error::Domain(format!("strategy uses disabled action at {}", m.state_name(q))))?;
                let k2 = match row.weight {
                    Weight::Down => k - 1,
                    Weight::Stay => k,
                    Weight::Up => k + 1,
                };
                for (p, pr) in &row.succ {
                    *acc.entry(idx(*p, k2)).or_insert_with(Rational::zero) += &pa * pr;
                }
            }
            rows.push(acc.into_iter().map(|(j, v)| (j, Entry::Exact(v))).collect());
        }
    }
    Ok(CompressedChain::new(states, rows))
}

/// Exact reachability probabilities in a rational finite chain.
///
/// Self-contained sparse elimination; states that cannot reach the target are
/// pinned to zero first, which makes the linear system uniquely solvable.
pub fn reach_exact(chain: &CompressedChain, target: &[bool]) -> Result<Vec<Rational>> {
    let n = chain.states.len();
    assert_eq!(target.len(), n);
    // Backward reachability over positive-probability edges.
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in chain.rows.iter().enumerate() {
        for (j, e) in row {
            let pos = match e {
                Entry::Exact(v) => v.is_positive(),
                _ => return Err(Error::Precondition("reach_exact needs a rational chain".to_string())),
            };
            if pos && *j != i {
                preds[*j].push(i);
            }
        }
    }
    let mut can_reach = target.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|i| target[*i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &preds[j] {
            if !can_reach[i] {
                can_reach[i] = true;
                stack.push(i);
            }
        }
    }

    // Unknowns: non-target states that can reach the target and are not absorbing.
    let mut local = vec![usize::MAX; n];
    let mut unknowns = Vec::new();
    for i in 0..n {
        if target[i] || !can_reach[i] || chain.is_absorbing(i) {
            continue;
        }
        local[i] = unknowns.len();
        unknowns.push(i);
    }
    let u = unknowns.len();
    let mut mat: Vec<BTreeMap<usize, Rational>> = Vec::with_capacity(u);
    let mut rhs: Vec<Rational> = Vec::with_capacity(u);
    for &i in &unknowns {
        let mut row: BTreeMap<usize, Rational> = BTreeMap::new();
        row.insert(local[i], Rational::one());
        let mut b = Rational::zero();
        for (j, e) in &chain.rows[i] {
            let v = match e {
                Entry::Exact(v) => v.clone(),
                _ => unreachable!(),
            };
            if target[*j] {
                b += v;
            } else if local[*j] != usize::MAX {
                let c = row.entry(local[*j]).or_insert_with(Rational::zero);
                *c -= v;
            }
        }
        mat.push(row);
        rhs.push(b);
    }

    // Forward elimination with exact pivots, then back substitution.
    for col in 0..u {
        let piv = (col..u)
            .find(|&r| mat[r].get(&col).is_some_and(|v| !v.is_zero()))
            .ok_or_else(|| Error::Internal("singular reachability system".to_string()))?;
        mat.swap(col, piv);
        rhs.swap(col, piv);
        let pivot = mat[col].get(&col).unwrap().clone();
        let cols: Vec<usize> = mat[col].keys().copied().collect();
        for c in cols {
            let v = mat[col].get_mut(&c).unwrap();
            *v /= &pivot;
        }
        let r = &mut rhs[col];
        *r /= &pivot;
        let pivot_row: Vec<(usize, Rational)> =
            mat[col].iter().map(|(c, v)| (*c, v.clone())).collect();
        let pivot_rhs = rhs[col].clone();
        for r in (col + 1)..u {
            let factor = match mat[r].get(&col) {
                Some(v) if !v.is_zero() => v.clone(),
                _ => continue,
            };
            for (c, v) in &pivot_row {
                if *c < col {
                    continue;
                }
                let cell = mat[r].entry(*c).or_insert_with(Rational::zero);
                *cell -= &factor * v;
                if cell.is_zero() {
                    mat[r].remove(c);
                }
            }
            rhs[r] -= &factor * &pivot_rhs;
        }
    }
    let mut sol = vec![Rational::zero(); u];
    for col in (0..u).rev() {
        let mut v = rhs[col].clone();
        for (c, coef) in mat[col].iter() {
            if *c > col {
                v -= coef * &sol[*c];
            }
        }
        sol[col] = v;
    }

    let mut out = vec![Rational::zero(); n];
    for i in 0..n {
        if target[i] {
            out[i] = Rational::one();
        } else if local[i] != usize::MAX {
            out[i] = sol[local[i]].clone();
        }
    }
    Ok(out)
}

/// Oracle probability of reaching any state in `targets` (as a set of chain
/// state indices is awkward for callers, so this takes a predicate).
pub fn reach_exact_where(
    chain: &CompressedChain,
    pred: impl Fn(&ChainState) -> bool,
) -> Result<Vec<Rational>> {
    let target: Vec<bool> = chain.states.iter().map(pred).collect();
    reach_exact(chain, &target)
}

/// Float reachability on a numeric chain by sparse elimination; exact up to
/// f64 rounding, fast on the banded layered chains the oracle produces.
pub fn reach_f64_where(
    chain: &CompressedChain,
    pred: impl Fn(&ChainState) -> bool,
) -> Result<Vec<f64>> {
    let n = chain.states.len();
    let target: Vec<bool> = chain.states.iter().map(pred).collect();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    let val = |e: &Entry| -> Result<f64> {
        match e {
            Entry::Exact(v) => Ok(crate::solvers::rational_to_f64(v)),
            _ => Err(Error::Precondition("numeric chain required".to_string())),
        }
    };
    for (i, row) in chain.rows.iter().enumerate() {
        for (j, e) in row {
            if val(e)? > 0.0 && *j != i {
                preds[*j].push(i);
            }
        }
    }
    let mut can_reach = target.clone();
    let mut stack: Vec<usize> = (0..n).filter(|i| target[*i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &preds[j] {
            if !can_reach[i] {
                can_reach[i] = true;
                stack.push(i);
            }
        }
    }
    let mut local = vec![usize::MAX; n];
    let mut unknowns = Vec::new();
    for i in 0..n {
        if target[i] || !can_reach[i] || chain.is_absorbing(i) {
            continue;
        }
        local[i] = unknowns.len();
        unknowns.push(i);
    }
    let u = unknowns.len();
    let mut mat: Vec<BTreeMap<usize, f64>> = Vec::with_capacity(u);
    let mut rhs: Vec<f64> = Vec::with_capacity(u);
    for &i in &unknowns {
        let mut row: BTreeMap<usize, f64> = BTreeMap::new();
        row.insert(local[i], 1.0);
        let mut b = 0.0;
        for (j, e) in &chain.rows[i] {
            let v = val(e)?;
            if target[*j] {
                b += v;
            } else if local[*j] != usize::MAX {
                *row.entry(local[*j]).or_insert(0.0) -= v;
            }
        }
        mat.push(row);
        rhs.push(b);
    }
    for col in 0..u {
        let piv = (col..u)
            .filter(|&r| mat[r].get(&col).is_some_and(|v| v.abs() > 1e-300))
            .max_by(|&a, &b| {
                let va = mat[a].get(&col).unwrap().abs();
                let vb = mat[b].get(&col).unwrap().abs();
                va.partial_cmp(&vb).unwrap_or(std::cmp::Ordering::Equal)
            })
            .ok_or_else(|| Error::Internal("singular reachability system".to_string()))?;
        mat.swap(col, piv);
        rhs.swap(col, piv);
        let pivot = *mat[col].get(&col).unwrap();
        let cols: Vec<usize> = mat[col].keys().copied().collect();
        for c in &cols {
            *mat[col].get_mut(c).unwrap() /= pivot;
        }
        rhs[col] /= pivot;
        let pivot_row: Vec<(usize, f64)> = mat[col].iter().map(|(c, v)| (*c, *v)).collect();
        let pivot_rhs = rhs[col];
        for r in (col + 1)..u {
            let factor = match mat[r].get(&col) {
                Some(v) if v.abs() > 0.0 => *v,
                _ => continue,
            };
            for (c, v) in &pivot_row {
                if *c < col {
                    continue;
                }
                let cell = mat[r].entry(*c).or_insert(0.0);
                *cell -= factor * v;
            }
            rhs[r] -= factor * pivot_rhs;
        }
    }
    let mut sol = vec![0.0; u];
    for col in (0..u).rev() {
        let mut v = rhs[col];
        for (c, coef) in mat[col].iter() {
            if *c > col {
                v -= coef * sol[*c];
            }
        }
        sol[col] = v;
    }
    let mut out = vec![0.0; n];
    for i in 0..n {
        if target[i] {
            out[i] = 1.0;
        } else if local[i] != usize::MAX {
            out[i] = sol[local[i]];
        }
    }
    Ok(out)
}

/// Float reachability for large oracle chains; plain value iteration.
pub fn reach_approx_where(
    chain: &CompressedChain,
    pred: impl Fn(&ChainState) -> bool,
    eps: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    let n = chain.states.len();
    let target: Vec<bool> = chain.states.iter().map(&pred).collect();
    let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(n);
    for row in &chain.rows {
        let mut out = Vec::with_capacity(row.len());
        for (j, e) in row {
            let v = match e {
                Entry::Exact(v) => crate::solvers::rational_to_f64(v),
                Entry::Approx { lo, hi } => 0.5 * (lo + hi),
                Entry::Symbolic(_) => {
                    return Err(Error::Precondition("numeric chain required".to_string()))
                }
            };
            out.push((*j, v));
        }
        rows.push(out);
    }
    let mut y: Vec<f64> = target.iter().map(|t| if *t { 1.0 } else { 0.0 }).collect();
    for _ in 0..max_iters {
        let mut delta: f64 = 0.0;
        let mut next = y.clone();
        for i in 0..n {
            if target[i] || chain.is_absorbing(i) {
                continue;
            }
            let mut v = 0.0;
            for (j, p) in &rows[i] {
                v += p * y[*j];
            }
            delta = delta.max((v - y[i]).abs());
            next[i] = v;
        }
        y = next;
        if delta < eps {
            break;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::example_catalog;
    use crate::partitions::IntervalPartition;
    use crate::strategies::IntervalStrategy;
    use crate::{counter, rat};

    fn fig4() -> OcMdp {
        example_catalog().fig4.model
    }

    #[test]
    fn validate_catalog_models() {
        let cat = example_catalog();
        assert!(validate(&cat.fig1.model).is_empty());
        assert!(validate(&cat.fig2a.model).is_empty());
        assert!(validate(&cat.fig4.model).is_empty());
    }

    #[test]
    fn validate_smallest_model() {
        let m = OcMdp::new(
            vec!["q".into()],
            vec!["a".into()],
            vec![vec![ActionRow {
                action: ActionId(0),
                weight: Weight::Stay,
                succ: vec![(StateId(0), Rational::one())],
            }]],
        );
        assert!(validate(&m).is_empty());
    }

    #[test]
    fn validate_reports_bad_sum() {
        let m = OcMdp::new(
            vec!["q".into()],
            vec!["a".into()],
            vec![vec![ActionRow {
                action: ActionId(0),
                weight: Weight::Stay,
                succ: vec![(StateId(0), rat(1, 2))],
            }]],
        );
        let violations = validate(&m);
        assert_eq!(violations.len(), 1);
        assert!(violations[0].contains("distribution sum != 1"));
    }

    #[test]
    fn absorb_targets_fig4_and_empty() {
        let m = fig4();
        let t_top = m.state_by_name("t_top").unwrap();
        let m2 = absorb_targets(&m, &BTreeSet::from([t_top])).unwrap();
        let row = &m2.enabled(t_top)[0];
        assert_eq!(row.weight, Weight::Down);
        assert_eq!(row.succ, vec![(t_top, Rational::one())]);
        // t_bot untouched
        let t_bot = m.state_by_name("t_bot").unwrap();
        assert_eq!(m2.enabled(t_bot), m.enabled(t_bot));
        // empty target set: unchanged
        assert_eq!(absorb_targets(&m, &BTreeSet::new()).unwrap(), m);
    }

    #[test]
    fn absorb_targets_fig1_q2_weight_flips() {
        let m = example_catalog().fig1.model;
        let q2 = m.state_by_name("q2").unwrap();
        assert_eq!(m.enabled(q2)[0].weight, Weight::Stay);
        let m2 = absorb_targets(&m, &BTreeSet::from([q2])).unwrap();
        assert_eq!(m2.enabled(q2).len(), 1);
        assert_eq!(m2.enabled(q2)[0].weight, Weight::Down);
    }

    #[test]
    fn absorb_targets_idempotent() {
        let m = fig4();
        let t = BTreeSet::from([m.state_by_name("t_top").unwrap(), m.state_by_name("q").unwrap()]);
        let once = absorb_targets(&m, &t).unwrap();
        let twice = absorb_targets(&once, &t).unwrap();
        assert_eq!(once, twice);
    }

    fn oblivious(m: &OcMdp, bound: Bound, choose: impl Fn(StateId) -> Vec<(ActionId, Rational)>) -> IntervalStrategy {
        let part = IntervalPartition::full_range(&bound);
        let rows = (0..part.len()).map(|_| m.states().map(&choose).collect()).collect();
        IntervalStrategy::new_oeis(part, bound, rows).unwrap()
    }

    #[test]
    fn oracle_fig4_pure_and_uniform() {
        let m = fig4();
        let q = m.state_by_name("q").unwrap();
        let t_top = m.state_by_name("t_top").unwrap();
        let a = m.action_by_name("a").unwrap();
        let b = m.action_by_name("b").unwrap();
        let bound = Bound::finite(3);

        let pure_a = oblivious(&m, bound.clone(), |s| {
            if s == q {
                vec![(a, Rational::one())]
            } else {
                vec![(m.enabled(s)[0].action, Rational::one())]
            }
        });
        let chain = induced_chain_bounded(&m, &pure_a, &bound).unwrap();
        let probs = reach_exact_where(&chain, |s| {
            matches!(s, ChainState::Config { state, .. } if *state == t_top)
        })
        .unwrap();
        let init = chain.index_of(&ChainState::Config { state: q, counter: counter(2) }).unwrap();
        assert_eq!(probs[init], rat(3, 4));

        let uniform = oblivious(&m, bound.clone(), |s| {
            if s == q {
                vec![(a, rat(1, 2)), (b, rat(1, 2))]
            } else {
                vec![(m.enabled(s)[0].action, Rational::one())]
            }
        });
        let chain = induced_chain_bounded(&m, &uniform, &bound).unwrap();
        let probs = reach_exact_where(&chain, |s| {
            matches!(s, ChainState::Config { state, .. } if *state == t_top)
        })
        .unwrap();
        let init = chain.index_of(&ChainState::Config { state: q, counter: counter(2) }).unwrap();
        assert_eq!(probs[init], rat(25, 32));
    }

    #[test]
    fn oracle_bound_one_is_all_absorbing() {
        let m = fig4();
        let bound = Bound::finite(1);
        let strat = oblivious(&m, bound.clone(), |s| vec![(m.enabled(s)[0].action, Rational::one())]);
        let chain = induced_chain_bounded(&m, &strat, &bound).unwrap();
        for i in 0..chain.states.len() {
            assert!(chain.is_absorbing(i));
        }
    }

    #[test]
    fn oracle_rows_sum_to_one() {
        let m = fig4();
        let bound = Bound::finite(5);
        let a = m.action_by_name("a").unwrap();
        let b = m.action_by_name("b").unwrap();
        let q = m.state_by_name("q").unwrap();
        let strat = oblivious(&m, bound.clone(), |s| {
            if s == q {
                vec![(a, rat(1, 3)), (b, rat(2, 3))]
            } else {
                vec![(m.enabled(s)[0].action, Rational::one())]
            }
        });
        let chain = induced_chain_bounded(&m, &strat, &bound).unwrap();
        for row in &chain.rows {
            let sum: Rational = row
                .iter()
                .map(|(_, e)| match e {
                    Entry::Exact(v) => v.clone(),
                    _ => unreachable!(),
                })
                .sum();
            assert!(sum.is_one());
        }
    }

    #[test]
    fn oracle_termination_plus_ceiling_at_most_one() {
        let m = fig4();
        let bound = Bound::finite(4);
        let q = m.state_by_name("q").unwrap();
        let a = m.action_by_name("a").unwrap();
        let strat = oblivious(&m, bound.clone(), |s| {
            if s == q {
                vec![(a, Rational::one())]
            } else {
                vec![(m.enabled(s)[0].action, Rational::one())]
            }
        });
        let chain = induced_chain_bounded(&m, &strat, &bound).unwrap();
        let term = reach_exact_where(&chain, |s| {
            matches!(s, ChainState::Config { counter, .. } if counter.is_zero())
        })
        .unwrap();
        let four = counter(4);
        let ceil = reach_exact_where(&chain, |s| {
            matches!(s, ChainState::Config { counter, .. } if *counter == four)
        })
        .unwrap();
        let init = chain.index_of(&ChainState::Config { state: q, counter: counter(2) }).unwrap();
        assert!(term[init].clone() + ceil[init].clone() <= Rational::one());
    }
}
