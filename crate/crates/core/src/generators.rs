//! Built-in instance generators: reduction families with known closed-form
//! answers, plus a small catalog of worked examples used across the test
//! suites.

use std::collections::BTreeSet;

use num_traits::{One, Zero};

use crate::error::{Error, Result};
use crate::model::{
    ActionId, ActionRow, Bound, Config, Objective, ObjectiveKind, OcMdp, Query, StateId, Weight,
};
use crate::partitions::{Interval, IntervalPartition};
use crate::strategies::IntervalStrategy;
use crate::{counter, rat, Counter, Rational};

/// Inputs of a square-root-sum comparison `sum_i sqrt(x_i) >= y`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SqrtSumInstance {
    pub xs: Vec<u64>,
    pub y: u64,
}

fn bit_size(v: u64) -> u64 {
    (64 - v.leading_zeros() as u64).max(1)
}

impl SqrtSumInstance {
    pub fn new(xs: Vec<u64>, y: u64) -> Result<SqrtSumInstance> {
        if xs.is_empty() {
            return Err(Error::Domain("at least one input is required".to_string()));
        }
        if xs.contains(&0) {
            return Err(Error::Domain("inputs must be positive".to_string()));
        }
        Ok(SqrtSumInstance { xs, y })
    }

    pub fn n(&self) -> u64 {
        self.xs.len() as u64
    }

    pub fn max_input(&self) -> u64 {
        *self.xs.iter().max().expect("non-empty")
    }

    /// Sum of the bit-sizes of all inputs including `y`.
    pub fn lambda(&self) -> u64 {
        self.xs.iter().map(|x| bit_size(*x)).sum::<u64>() + bit_size(self.y)
    }

    /// Comparison threshold `y / (n * m)`.
    pub fn theta(&self) -> Rational {
        Rational::new(self.y.into(), (self.n() * self.max_input()).into())
    }

    /// Counter ceiling `2^n * m * (lambda + 1) + n * m^2 + 1` that makes the
    /// bounded variant of the reduction faithful. If the sum equals `y`
    /// exactly, no ceiling works; the separation bound `2^(-2^n (lambda+1))`
    /// below which nonequal values cannot hide is meaningful only otherwise.
    pub fn sufficient_bound(&self) -> Counter {
        let n = self.n();
        let m = self.max_input();
        let lambda = self.lambda();
        (Counter::one() << n) * m * (lambda + 1) + n * m * m + 1u32
    }
}

fn single_action_row(weight: Weight, succ: Vec<(StateId, Rational)>) -> Vec<ActionRow> {
    vec![ActionRow { action: ActionId(0), weight, succ }]
}

/// The gadget whose selective-termination probability from the entry state is
/// `(1/(n m)) * sum_i sqrt(x_i)`, and `sqrt(x_i)/m` from each branch state.
pub fn gen_sqrt_sum(inst: &SqrtSumInstance) -> Result<(OcMdp, Query)> {
    let n = inst.n();
    let m = inst.max_input();
    let mut names = vec!["qinit".to_string(), "t".to_string()];
    for i in 1..=n {
        names.push(format!("q{i}"));
        names.push(format!("q{i}p"));
        names.push(format!("q{i}m"));
    }
    let idx_q = |i: u64| StateId((2 + 3 * (i - 1)) as usize);
    let idx_p = |i: u64| StateId((3 + 3 * (i - 1)) as usize);
    let idx_m = |i: u64| StateId((4 + 3 * (i - 1)) as usize);
    let t = StateId(1);

    let mut rows = Vec::with_capacity(names.len());
    rows.push(single_action_row(
        Weight::Stay,
        (1..=n).map(|i| (idx_q(i), Rational::new(1.into(), n.into()))).collect(),
    ));
    rows.push(single_action_row(Weight::Down, vec![(t, Rational::one())]));
    for (i, x) in inst.xs.iter().enumerate() {
        let i = i as u64 + 1;
        rows.push(single_action_row(
            Weight::Stay,
            vec![(idx_p(i), rat(1, 2)), (idx_m(i), rat(1, 2))],
        ));
        rows.push(single_action_row(Weight::Up, vec![(idx_q(i), Rational::one())]));
        let hit = Rational::new((*x).into(), (m * m).into());
        let back = Rational::one() - &hit;
        let mut succ = vec![(t, hit)];
        if !back.is_zero() {
            succ.push((idx_q(i), back));
        }
        rows.push(single_action_row(Weight::Down, succ));
    }
    let model = OcMdp::new(names, vec!["a".to_string()], rows);
    let query = Query {
        objective: Objective { kind: ObjectiveKind::SelTerm, targets: BTreeSet::from([t]) },
        bound: Bound::Infinite,
        init: Config { state: StateId(0), counter: Counter::one() },
        theta: inst.theta(),
    };
    Ok((model, query))
}

/// Bounded variant: same gadget with the computed sufficient ceiling (or an
/// override, since the formula's value is astronomically large for honest
/// inputs).
pub fn gen_sqrt_sum_bounded(
    inst: &SqrtSumInstance,
    bound_override: Option<Counter>,
) -> Result<(OcMdp, Counter, Query)> {
    let (model, query) = gen_sqrt_sum(inst)?;
    let b = bound_override.unwrap_or_else(|| inst.sufficient_bound());
    let query = Query { bound: Bound::Finite(b.clone()), ..query };
    Ok((model, b, query))
}

/// A finite directed graph with a designated initial vertex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DirectedGraph {
    pub n_vertices: usize,
    pub edges: Vec<(usize, usize)>,
    pub initial: usize,
}

impl DirectedGraph {
    pub fn new(n_vertices: usize, edges: Vec<(usize, usize)>, initial: usize) -> Result<DirectedGraph> {
        if initial >= n_vertices {
            return Err(Error::Domain("initial vertex out of range".to_string()));
        }
        for (u, v) in &edges {
            if *u >= n_vertices || *v >= n_vertices {
                return Err(Error::Domain("edge endpoint out of range".to_string()));
            }
        }
        Ok(DirectedGraph { n_vertices, edges, initial })
    }
}

/// Deterministic OC-MDP in which a counter-oblivious strategy achieves
/// almost-sure selective termination in the duplicated initial vertex iff the
/// graph has a Hamiltonian cycle.
///
/// Edges into the initial vertex are redirected to its fresh copy; the copy
/// and a fresh sink fall through to the sink; every transition decrements the
/// counter. Vertices without outgoing edges get a single fall-through action
/// to the sink so the model has no deadlocks (such vertices cannot lie on any
/// cycle, so the reduction is unaffected).
pub fn gen_hamiltonian(g: &DirectedGraph) -> Result<(OcMdp, Query)> {
    let nv = g.n_vertices;
    let mut names: Vec<String> = (0..nv).map(|v| format!("v{v}")).collect();
    names.push("vinit_prime".to_string());
    names.push("sink".to_string());
    let prime = StateId(nv);
    let sink = StateId(nv + 1);
    let actions: Vec<String> = (0..nv).map(|v| format!("go{v}")).collect();

    let mut rows: Vec<Vec<ActionRow>> = vec![Vec::new(); nv + 2];
    for (u, v) in &g.edges {
        let target = if *v == g.initial { prime } else { StateId(*v) };
        rows[*u].push(ActionRow {
            action: ActionId(*v),
            weight: Weight::Down,
            succ: vec![(target, Rational::one())],
        });
    }
    for v in 0..nv {
        rows[v].sort_by_key(|r| r.action);
        if rows[v].is_empty() {
            rows[v].push(ActionRow {
                action: ActionId(v),
                weight: Weight::Down,
                succ: vec![(sink, Rational::one())],
            });
        }
    }
    for s in [prime, sink] {
        rows[s.0].push(ActionRow {
            action: ActionId(0),
            weight: Weight::Down,
            succ: vec![(sink, Rational::one())],
        });
    }
    let model = OcMdp::new(names, actions, rows);
    let query = Query {
        objective: Objective { kind: ObjectiveKind::SelTerm, targets: BTreeSet::from([prime]) },
        bound: Bound::finite(nv as u64 + 1),
        init: Config { state: StateId(g.initial), counter: counter(nv as u64) },
        theta: Rational::one(),
    };
    Ok((model, query))
}

/// One worked instance: a model with an optional companion strategy and query.
pub struct CatalogEntry {
    pub name: &'static str,
    pub model: OcMdp,
    pub strategy: Option<IntervalStrategy>,
    pub query: Query,
}

pub struct Catalog {
    pub fig1: CatalogEntry,
    pub fig2a: CatalogEntry,
    pub fig4: CatalogEntry,
}

impl Catalog {
    pub fn get(&self, name: &str) -> Option<&CatalogEntry> {
        match name {
            "fig1" => Some(&self.fig1),
            "fig2a" => Some(&self.fig2a),
            "fig4" => Some(&self.fig4),
            _ => None,
        }
    }

    pub fn names() -> [&'static str; 3] {
        ["fig1", "fig2a", "fig4"]
    }
}

/// The fixed catalog of worked examples.
pub fn example_catalog() -> Catalog {
    Catalog { fig1: fig1(), fig2a: fig2a(), fig4: fig4() }
}

/// Memory lower-bound example: distinguishing counter value 1 from the rest
/// requires as many memory states as there are counter values.
fn fig1() -> CatalogEntry {
    let q0 = StateId(0);
    let q1 = StateId(1);
    let q2 = StateId(2);
    let a = ActionId(0);
    let b = ActionId(1);
    let model = OcMdp::new(
        vec!["q0".into(), "q1".into(), "q2".into()],
        vec!["a".into(), "b".into()],
        vec![
            vec![ActionRow { action: a, weight: Weight::Up, succ: vec![(q0, rat(1, 2)), (q1, rat(1, 2))] }],
            vec![
                ActionRow { action: a, weight: Weight::Down, succ: vec![(q1, Rational::one())] },
                ActionRow { action: b, weight: Weight::Down, succ: vec![(q2, Rational::one())] },
            ],
            vec![ActionRow { action: a, weight: Weight::Stay, succ: vec![(q2, Rational::one())] }],
        ],
    );
    let bound = Bound::finite(8);
    let partition =
        IntervalPartition::new(vec![Interval::bounded(1, 1), Interval::bounded(2, 7)]).unwrap();
    let dirac = |x: ActionId| vec![(x, Rational::one())];
    let rows = vec![
        vec![dirac(a), dirac(b), dirac(a)],
        vec![dirac(a), dirac(a), dirac(a)],
    ];
    let strategy = IntervalStrategy::new_oeis(partition, bound.clone(), rows).unwrap();
    CatalogEntry {
        name: "fig1",
        model,
        strategy: Some(strategy),
        query: Query {
            objective: Objective { kind: ObjectiveKind::SelTerm, targets: BTreeSet::from([q2]) },
            bound,
            init: Config { state: q0, counter: Counter::one() },
            theta: rat(1, 2),
        },
    }
}

/// Compression worked example: a climb through `[1,7]` followed by an
/// unbounded tail with an irrational first-descent probability.
fn fig2a() -> CatalogEntry {
    let q = StateId(0);
    let p = StateId(1);
    let t = StateId(2);
    let tp = StateId(3);
    let a = ActionId(0);
    let b = ActionId(1);
    let c = ActionId(2);
    let model = OcMdp::new(
        vec!["q".into(), "p".into(), "t".into(), "tprime".into()],
        vec!["a".into(), "b".into(), "c".into()],
        vec![
            vec![
                ActionRow { action: a, weight: Weight::Up, succ: vec![(q, rat(1, 2)), (p, rat(1, 2))] },
                ActionRow { action: c, weight: Weight::Stay, succ: vec![(tp, Rational::one())] },
            ],
            vec![
                ActionRow { action: a, weight: Weight::Up, succ: vec![(p, Rational::one())] },
                ActionRow { action: b, weight: Weight::Down, succ: vec![(t, rat(1, 2)), (p, rat(1, 2))] },
            ],
            vec![ActionRow { action: b, weight: Weight::Down, succ: vec![(t, Rational::one())] }],
            vec![ActionRow { action: c, weight: Weight::Stay, succ: vec![(tp, Rational::one())] }],
        ],
    );
    let partition =
        IntervalPartition::new(vec![Interval::bounded(1, 7), Interval::unbounded(8)]).unwrap();
    let dirac = |x: ActionId| vec![(x, Rational::one())];
    let rows = vec![
        vec![dirac(a), dirac(a), dirac(b), dirac(c)],
        vec![dirac(c), vec![(a, rat(1, 2)), (b, rat(1, 2))], dirac(b), dirac(c)],
    ];
    let strategy = IntervalStrategy::new_oeis(partition, Bound::Infinite, rows).unwrap();
    CatalogEntry {
        name: "fig2a",
        model,
        strategy: Some(strategy),
        query: Query {
            objective: Objective { kind: ObjectiveKind::SelTerm, targets: BTreeSet::from([t]) },
            bound: Bound::Infinite,
            init: Config { state: q, counter: Counter::one() },
            theta: rat(7, 10),
        },
    }
}

/// Pure-versus-randomised example: both pure counter-oblivious strategies
/// reach the top target with probability 3/4 from `(q, 2)`, the uniform one
/// with 25/32.
fn fig4() -> CatalogEntry {
    let q = StateId(0);
    let t_top = StateId(1);
    let t_bot = StateId(2);
    let a = ActionId(0);
    let b = ActionId(1);
    let model = OcMdp::new(
        vec!["q".into(), "t_top".into(), "t_bot".into()],
        vec!["a".into(), "b".into()],
        vec![
            vec![
                ActionRow { action: a, weight: Weight::Down, succ: vec![(q, rat(1, 2)), (t_top, rat(1, 2))] },
                ActionRow { action: b, weight: Weight::Down, succ: vec![(t_top, rat(3, 4)), (t_bot, rat(1, 4))] },
            ],
            vec![ActionRow { action: a, weight: Weight::Down, succ: vec![(t_top, Rational::one())] }],
            vec![ActionRow { action: a, weight: Weight::Down, succ: vec![(t_bot, Rational::one())] }],
        ],
    );
    let bound = Bound::finite(3);
    let partition = IntervalPartition::full_range(&bound);
    let rows = vec![vec![
        vec![(a, rat(1, 2)), (b, rat(1, 2))],
        vec![(a, Rational::one())],
        vec![(a, Rational::one())],
    ]];
    let strategy = IntervalStrategy::new_oeis(partition, bound.clone(), rows).unwrap();
    CatalogEntry {
        name: "fig4",
        model,
        strategy: Some(strategy),
        query: Query {
            objective: Objective { kind: ObjectiveKind::SelTerm, targets: BTreeSet::from([t_top]) },
            bound,
            init: Config { state: q, counter: counter(2) },
            theta: rat(25, 32),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;

    #[test]
    fn catalog_is_fixed_and_valid() {
        let cat = example_catalog();
        for name in Catalog::names() {
            let inst = cat.get(name).unwrap();
            assert_eq!(inst.name, name);
            assert!(validate(&inst.model).is_empty(), "{name} must validate");
            assert!(inst.query.validate(&inst.model).is_empty());
            if let Some(s) = &inst.strategy {
                assert!(s.validate_for(&inst.model).is_empty());
            }
        }
        assert!(cat.get("fig3").is_none());
    }

    #[test]
    fn sqrt_sum_bound_formula() {
        // xs = (2), y = 1: bit sizes 2 + 1, so lambda = 3 and the ceiling is
        // 2 * 2 * 4 + 4 + 1 = 21.
        let inst = SqrtSumInstance::new(vec![2], 1).unwrap();
        assert_eq!(inst.lambda(), 3);
        assert_eq!(inst.sufficient_bound(), counter(21));
        let (_, b, q) = gen_sqrt_sum_bounded(&inst, None).unwrap();
        assert_eq!(b, counter(21));
        assert_eq!(q.bound, Bound::Finite(counter(21)));
    }

    #[test]
    fn sqrt_sum_rejects_zero_inputs() {
        assert!(SqrtSumInstance::new(vec![2, 0], 1).is_err());
        assert!(SqrtSumInstance::new(vec![], 1).is_err());
    }

    #[test]
    fn sqrt_sum_model_is_well_formed() {
        for xs in [vec![1], vec![2], vec![1, 4, 3]] {
            let inst = SqrtSumInstance::new(xs, 1).unwrap();
            let (m, q) = gen_sqrt_sum(&inst).unwrap();
            assert!(validate(&m).is_empty());
            assert!(q.validate(&m).is_empty());
        }
    }

    #[test]
    fn hamiltonian_models() {
        // Directed 3-cycle.
        let g = DirectedGraph::new(3, vec![(0, 1), (1, 2), (2, 0)], 0).unwrap();
        let (m, q) = gen_hamiltonian(&g).unwrap();
        assert!(validate(&m).is_empty());
        assert_eq!(q.bound, Bound::finite(4));
        assert_eq!(q.theta, Rational::one());

        // Single vertex with a self-loop: the loop reaches the copy.
        let g = DirectedGraph::new(1, vec![(0, 0)], 0).unwrap();
        let (m, _) = gen_hamiltonian(&g).unwrap();
        assert!(validate(&m).is_empty());
        let prime = m.state_by_name("vinit_prime").unwrap();
        assert_eq!(m.enabled(StateId(0))[0].succ, vec![(prime, Rational::one())]);

        // Dead-end vertices fall through to the sink.
        let g = DirectedGraph::new(2, vec![(0, 1)], 0).unwrap();
        let (m, _) = gen_hamiltonian(&g).unwrap();
        assert!(validate(&m).is_empty());
        let sink = m.state_by_name("sink").unwrap();
        assert_eq!(m.enabled(StateId(1))[0].succ, vec![(sink, Rational::one())]);
    }
}
