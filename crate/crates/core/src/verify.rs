//! End-to-end verification pipelines.
//!
//! Bounded open-ended strategies get exact rational answers: refine and
//! isolate the partition, solve each interval's doubling system stage by
//! stage, then solve one linear reachability system over the compressed
//! chain. Unbounded pipelines replace tail transitions by `[lo, hi]`
//! brackets and report a probability bracket, going inconclusive only when
//! the threshold falls inside it. Cyclic strategies are handled by
//! compressing twice: once into a one-counter chain over the window, then
//! compressing that chain.
//!
//! State-reachability reduces to the termination-style objectives by making
//! targets absorbing with weight -1 self-loops before anything else runs.

use num_traits::{One, Zero};

use crate::compression::{
    cis_to_ocmc, compress, compress_ocmc, compress_ocmc_sym, ChainState, CompressMode,
    CompressedChain, Entry, StratSpec,
};
use crate::eqsys::{pin_unreachable, PolySystem, VarId};
use crate::error::{Error, Result};
use crate::model::{absorb_targets, Bound, ObjectiveKind, OcMdp, Query, StateId};
use crate::partitions::{prepare, refine, Interval, IntervalPartition};
use crate::smt::{self, Script};
use crate::solvers::{self, rational_to_f64, reach_value_bounds, SolveConfig, SolveStatus};
use crate::strategies::{IntervalStrategy, StrategyBase};
use crate::{Counter, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Answer {
    Yes,
    No,
    Inconclusive,
}

/// A probability answer: exact in the bounded pipeline, a bracket otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum ProbBracket {
    Exact(Rational),
    Approx { lo: f64, hi: f64 },
}

impl ProbBracket {
    pub fn lo_f64(&self) -> f64 {
        match self {
            ProbBracket::Exact(v) => rational_to_f64(v),
            ProbBracket::Approx { lo, .. } => *lo,
        }
    }

    pub fn hi_f64(&self) -> f64 {
        match self {
            ProbBracket::Exact(v) => rational_to_f64(v),
            ProbBracket::Approx { hi, .. } => *hi,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub answer: Answer,
    pub bracket: ProbBracket,
    /// The refined partition the pipeline actually used.
    pub partition: IntervalPartition,
    pub status: SolveStatus,
    /// Whether the target-absorbing transform was applied first.
    pub transformed: bool,
}

fn decide(bracket: &ProbBracket, theta: &Rational) -> Answer {
    match bracket {
        ProbBracket::Exact(v) => {
            if v >= theta {
                Answer::Yes
            } else {
                Answer::No
            }
        }
        ProbBracket::Approx { lo, hi } => {
            let th = rational_to_f64(theta);
            if *lo >= th {
                Answer::Yes
            } else if *hi < th {
                Answer::No
            } else {
                Answer::Inconclusive
            }
        }
    }
}

/// Replace the strategy's rows on target states by the single action left
/// enabled after the target-absorbing transform.
fn retarget_strategy(s: &IntervalStrategy, m: &OcMdp, targets: &std::collections::BTreeSet<StateId>) -> Result<IntervalStrategy> {
    let mut rows = s.table().clone();
    for block in rows.iter_mut() {
        for t in targets {
            if t.0 < block.len() {
                let action = m.enabled(*t)[0].action;
                block[t.0] = vec![(action, Rational::one())];
            }
        }
    }
    match &s.base {
        StrategyBase::Oeis { partition, bound } => {
            IntervalStrategy::new_oeis(partition.clone(), bound.clone(), rows)
        }
        StrategyBase::Cis(pp) => IntervalStrategy::new_cis(pp.clone(), rows),
    }
}

/// Apply the state-reachability transform when the objective asks for it.
fn apply_objective(m: &OcMdp, s: &IntervalStrategy, q: &Query) -> Result<(OcMdp, IntervalStrategy, bool)> {
    match q.objective.kind {
        ObjectiveKind::SelTerm => Ok((m.clone(), s.clone(), false)),
        ObjectiveKind::Reach => {
            let m2 = absorb_targets(m, &q.objective.targets)?;
            let s2 = retarget_strategy(s, &m2, &q.objective.targets)?;
            Ok((m2, s2, true))
        }
    }
}

/// Chain-level target set: configurations of target states at counter zero,
/// plus counter-B configurations when the bound is finite and the objective
/// was state reachability.
fn chain_targets(chain: &CompressedChain, q: &Query, transformed: bool) -> Vec<bool> {
    let include_ceiling = transformed && q.bound.is_finite();
    chain
        .states
        .iter()
        .map(|s| match s {
            ChainState::Config { state, counter } if q.objective.targets.contains(state) => {
                counter.is_zero()
                    || (include_ceiling && q.bound.as_finite().is_some_and(|b| counter == b))
            }
            _ => false,
        })
        .collect()
}

/// Probability of the objective when the initial configuration is already
/// absorbing (counter 0 or at the ceiling).
fn trivial_probability(q: &Query) -> Option<Rational> {
    let in_target = q.objective.targets.contains(&q.init.state);
    if q.init.counter.is_zero() {
        return Some(if in_target { Rational::one() } else { Rational::zero() });
    }
    if let Bound::Finite(b) = &q.bound {
        if &q.init.counter == b {
            let hit = match q.objective.kind {
                ObjectiveKind::Reach => in_target,
                ObjectiveKind::SelTerm => false,
            };
            return Some(if hit { Rational::one() } else { Rational::zero() });
        }
    }
    None
}

fn verdict_exact(v: Rational, theta: &Rational, partition: IntervalPartition, transformed: bool) -> Verdict {
    let bracket = ProbBracket::Exact(v);
    Verdict {
        answer: decide(&bracket, theta),
        bracket,
        partition,
        status: SolveStatus::Exact,
        transformed,
    }
}

fn oeis_partition(s: &IntervalStrategy) -> Result<&IntervalPartition> {
    match &s.base {
        StrategyBase::Oeis { partition, .. } => Ok(partition),
        StrategyBase::Cis(_) => Err(Error::Domain("open-ended strategy required".to_string())),
    }
}

/// Exact verification of an open-ended strategy under a finite bound.
pub fn verify_bounded_oeis(m: &OcMdp, s: &IntervalStrategy, q: &Query) -> Result<Verdict> {
    let Bound::Finite(b) = &q.bound else {
        return Err(Error::Precondition("bounded pipeline needs a finite bound".to_string()));
    };
    if s.bound() != q.bound {
        return Err(Error::Domain(format!(
            "strategy bound {} does not match query bound {}",
            s.bound(),
            q.bound
        )));
    }
    if &q.init.counter > b {
        return Err(Error::Domain(format!(
            "initial counter {} outside [0,{b}]",
            q.init.counter
        )));
    }
    let (m2, s2, transformed) = apply_objective(m, s, q)?;
    let base = oeis_partition(&s2)?.clone();
    if let Some(v) = trivial_probability(q) {
        return Ok(verdict_exact(v, &q.theta, base, transformed));
    }
    let p = prepare(&base, &q.init.counter);
    let comp = compress(&m2, StratSpec::Concrete(&s2), &p, &q.bound, CompressMode::Rational)?;
    let chain = comp.comp.chain;
    let target = chain_targets(&chain, q, transformed);
    let (mut sys, y) = crate::eqsys::build_reach_system(&chain, &target)?;
    pin_unreachable(&mut sys, &y, &chain, &target);
    let sol = solvers::solve_linear(&sys, &SolveConfig::default())?;
    let init = chain
        .config_index(q.init.state, &q.init.counter)
        .ok_or_else(|| Error::Internal("initial configuration not retained".to_string()))?;
    let prob = match y[init] {
        Some(v) => sol.get_rational(v).cloned().unwrap_or_else(Rational::zero),
        None => {
            // Initial state is absorbing in the chain; it is a target or not.
            if target[init] {
                Rational::one()
            } else {
                Rational::zero()
            }
        }
    };
    Ok(verdict_exact(prob, &q.theta, p, transformed))
}

/// Bracketed verification over a chain with interval-valued entries.
fn bracket_reach(
    chain: &CompressedChain,
    target: &[bool],
    init: usize,
    cfg: &SolveConfig,
) -> Result<(f64, f64, SolveStatus)> {
    let n = chain.states.len();
    // Qualitative backward reachability over possibly-positive entries.
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in chain.rows.iter().enumerate() {
        for (j, e) in row {
            if e.possibly_positive() && *j != i {
                preds[*j].push(i);
            }
        }
    }
    let mut maybe = target.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|i| target[*i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &preds[j] {
            if !maybe[i] {
                maybe[i] = true;
                stack.push(i);
            }
        }
    }
    let rows: Vec<Vec<(usize, f64, f64)>> = chain
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|(j, e)| {
                    let (lo, hi) = e.bounds_f64().ok_or_else(|| {
                        Error::Precondition("bracket solving needs numeric entries".to_string())
                    })?;
                    Ok((*j, lo, hi))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let absorbing: Vec<bool> = (0..n).map(|i| chain.is_absorbing(i)).collect();
    let (lo, hi, status) = reach_value_bounds(&rows, &absorbing, target, &maybe, cfg);
    Ok((lo[init], hi[init], status))
}

/// Bracketed verification of an open-ended strategy with no counter ceiling.
pub fn verify_oeis(m: &OcMdp, s: &IntervalStrategy, q: &Query, cfg: &SolveConfig) -> Result<Verdict> {
    if q.bound != Bound::Infinite {
        return Err(Error::Precondition("use the bounded pipeline for finite bounds".to_string()));
    }
    if s.bound() != Bound::Infinite {
        return Err(Error::Domain("strategy is bounded but the query is not".to_string()));
    }
    let (m2, s2, transformed) = apply_objective(m, s, q)?;
    let base = oeis_partition(&s2)?.clone();
    if let Some(v) = trivial_probability(q) {
        return Ok(verdict_exact(v, &q.theta, base, transformed));
    }
    let p = prepare(&base, &q.init.counter);
    let comp = compress(
        &m2,
        StratSpec::Concrete(&s2),
        &p,
        &Bound::Infinite,
        CompressMode::Float(cfg.clone()),
    )?;
    let chain = comp.comp.chain;
    let target = chain_targets(&chain, q, transformed);
    let init = chain
        .config_index(q.init.state, &q.init.counter)
        .ok_or_else(|| Error::Internal("initial configuration not retained".to_string()))?;
    let (lo, hi, vi_status) = bracket_reach(&chain, &target, init, cfg)?;
    let bracket = ProbBracket::Approx { lo, hi };
    Ok(Verdict {
        answer: decide(&bracket, &q.theta),
        bracket,
        partition: p,
        status: comp.comp.status.join(vi_status),
        transformed,
    })
}

/// The second-compression partition: whole periods already consumed form the
/// bounded part `[1, floor(k_init/period)]` (refined), the rest is the tail.
fn cis_outer_partition(floor: &Counter) -> Result<IntervalPartition> {
    let mut intervals = Vec::new();
    if !floor.is_zero() {
        intervals.extend(refine(&Interval::new(Counter::one(), Some(floor.clone()))?));
    }
    intervals.push(Interval::new(floor + 1u32, None)?);
    IntervalPartition::new(intervals)
}

/// Window coordinates of a configuration: `(window value, outer counter,
/// full periods below)`. The outer counter equals the floor when the value
/// is a period multiple and floor + 1 otherwise; both are retained by
/// [`cis_outer_partition`].
fn cis_split(k: &Counter, period: &Counter) -> (Counter, Counter, Counter) {
    use num_integer::Integer;
    let rem = k.mod_floor(period);
    let floor = k / period;
    if rem.is_zero() {
        (period.clone(), floor.clone(), floor)
    } else {
        (rem, &floor + 1u32, floor)
    }
}

/// Bracketed verification of a cyclic strategy via double compression.
pub fn verify_cis(m: &OcMdp, s: &IntervalStrategy, q: &Query, cfg: &SolveConfig) -> Result<Verdict> {
    let StrategyBase::Cis(pp) = &s.base else {
        return Err(Error::Domain("cyclic strategy required".to_string()));
    };
    if q.bound != Bound::Infinite {
        return Err(Error::Precondition("cyclic strategies assume no counter ceiling".to_string()));
    }
    let period = pp.period.clone();
    let window_base = pp.window.clone();
    let (m2, s2, transformed) = apply_objective(m, s, q)?;
    if let Some(v) = trivial_probability(q) {
        return Ok(verdict_exact(v, &q.theta, window_base, transformed));
    }
    let (window_init, outer_init, outer_floor) = cis_split(&q.init.counter, &period);
    let window = prepare(&window_base, &window_init);
    let cis = cis_to_ocmc(&m2, &s2, &window, CompressMode::Rational)?;
    let ocmc = cis.to_numeric()?;
    let outer = cis_outer_partition(&outer_floor)?;
    let comp = compress_ocmc(&ocmc, &outer, CompressMode::Float(cfg.clone()))?;
    let chain = comp.chain;

    // Initial configuration: the window state at the outer counter.
    let win_state = cis
        .index_of(&ChainState::Config { state: q.init.state, counter: window_init })
        .ok_or_else(|| Error::Internal("window initial state not retained".to_string()))?;
    let init = chain
        .config_index(StateId(win_state), &outer_init)
        .ok_or_else(|| Error::Internal("outer initial state not retained".to_string()))?;

    // Targets: window states `(t, period)` of target states, at outer zero.
    let target: Vec<bool> = {
        let target_windows: Vec<usize> = q
            .objective
            .targets
            .iter()
            .filter_map(|t| {
                cis.index_of(&ChainState::Config { state: *t, counter: period.clone() })
            })
            .collect();
        chain
            .states
            .iter()
            .map(|st| match st {
                ChainState::Config { state, counter } => {
                    counter.is_zero() && target_windows.contains(&state.0)
                }
                ChainState::Bot => false,
            })
            .collect()
    };
    let (lo, hi, vi_status) = bracket_reach(&chain, &target, init, cfg)?;
    let bracket = ProbBracket::Approx { lo, hi };
    Ok(Verdict {
        answer: decide(&bracket, &q.theta),
        bracket,
        partition: window,
        status: cis.status.join(comp.status).join(vi_status),
        transformed,
    })
}

/// Dispatch on strategy shape and bound.
pub fn verify(m: &OcMdp, s: &IntervalStrategy, q: &Query, cfg: &SolveConfig) -> Result<Verdict> {
    match (&s.base, &q.bound) {
        (StrategyBase::Cis(_), _) => verify_cis(m, s, q, cfg),
        (StrategyBase::Oeis { .. }, Bound::Finite(_)) => verify_bounded_oeis(m, s, q),
        (StrategyBase::Oeis { .. }, Bound::Infinite) => verify_oeis(m, s, q, cfg),
    }
}

/// Polarity of emitted verification sentences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarity {
    /// Assert the constraint system plus `y < theta`; `unsat` means verified.
    NegatedExistential,
    /// One universally quantified implication; `sat` means verified.
    Universal,
}

/// Options for SMT emission.
#[derive(Debug, Clone)]
pub struct EmitOptions {
    pub polarity: Polarity,
    /// Leave strategy probabilities as free variables constrained to be
    /// distributions, instead of substituting the concrete strategy.
    pub symbolic_strategy: bool,
}

impl Default for EmitOptions {
    fn default() -> EmitOptions {
        EmitOptions { polarity: Polarity::NegatedExistential, symbolic_strategy: false }
    }
}

pub(crate) struct SymbolicPipeline {
    pub sys: PolySystem,
    pub chain: CompressedChain,
    pub y: Vec<Option<VarId>>,
    pub target: Vec<bool>,
    pub init: usize,
    /// Strategy variable groups that must be equal (sub-intervals of one
    /// declared interval), with the state they belong to.
    pub zvars: Option<crate::compression::StrategyVars>,
    pub zgroups: Vec<Vec<usize>>,
}

/// Build the symbolic system for an open-ended strategy (concrete or free).
pub(crate) fn symbolic_oeis_pipeline(
    m: &OcMdp,
    s: &IntervalStrategy,
    q: &Query,
    symbolic_strategy: bool,
) -> Result<(SymbolicPipeline, bool)> {
    let (m2, s2, transformed) = apply_objective(m, s, q)?;
    let base = oeis_partition(&s2)?.clone();
    let p = prepare(&base, &q.init.counter);
    let spec = if symbolic_strategy { StratSpec::SymbolicFree } else { StratSpec::Concrete(&s2) };
    let res = compress(&m2, spec, &p, &q.bound, CompressMode::Symbolic(PolySystem::new()))?;
    let chain = res.comp.chain;
    let mut sys = res.comp.sys.expect("symbolic mode returns the system");
    let target = chain_targets(&chain, q, transformed);
    let y = sys.push_reach_block(&chain, &target)?;
    let init = chain
        .config_index(q.init.state, &q.init.counter)
        .ok_or_else(|| Error::Internal("initial configuration not retained".to_string()))?;
    let zgroups = group_refined_by_base(&base, &p);
    Ok((
        SymbolicPipeline { sys, chain, y, target, init, zvars: res.zvars, zgroups },
        transformed,
    ))
}

/// Group indices of refined intervals by the declared interval containing them.
pub(crate) fn group_refined_by_base(base: &IntervalPartition, refined: &IntervalPartition) -> Vec<Vec<usize>> {
    let mut groups: Vec<Vec<usize>> = vec![Vec::new(); base.len()];
    for (j, iv) in refined.intervals().iter().enumerate() {
        if let Some(g) = base.find(&iv.lo) {
            groups[g].push(j);
        }
    }
    groups
}

/// The goal expression for a chain state: its reach variable, or a constant
/// when the state is absorbing (a target, or a dead end).
fn goal_expr(sys: &PolySystem, y: &[Option<VarId>], target: &[bool], i: usize) -> String {
    match y[i] {
        Some(v) if !sys.is_pinned(v) => sys.var(v).name.clone(),
        _ if target[i] => "1.0".to_string(),
        _ => "0.0".to_string(),
    }
}

/// Conjuncts of the transition formula: non-negativity, the equation
/// systems, and per-row sub-distribution constraints.
fn trans_conjuncts(sys: &PolySystem, chain: &CompressedChain, is_reach_var: &dyn Fn(VarId) -> bool) -> Vec<String> {
    let mut out = Vec::new();
    for (v, info) in sys.vars() {
        if sys.is_pinned(v) || is_reach_var(v) {
            continue;
        }
        if sys.equation(v).is_some() {
            out.push(format!("(>= {} 0.0)", info.name));
            out.push(format!("(= {} {})", info.name, smt::poly_smt(sys, sys.equation(v).unwrap())));
        }
    }
    for (i, row) in chain.rows.iter().enumerate() {
        if chain.is_absorbing(i) {
            continue;
        }
        let mut parts = Vec::new();
        for (_, e) in row {
            match e {
                Entry::Symbolic(v) if !sys.is_pinned(*v) => parts.push(sys.var(*v).name.clone()),
                Entry::Exact(c) => parts.push(smt::rational_smt(c)),
                _ => {}
            }
        }
        if parts.len() > 1 {
            out.push(format!("(<= (+ {}) 1.0)", parts.join(" ")));
        } else if parts.len() == 1 {
            out.push(format!("(<= {} 1.0)", parts[0]));
        }
    }
    out
}

/// Conjuncts of the objective formula: `y >= 0` and the reach equations.
fn obj_conjuncts(sys: &PolySystem, y: &[Option<VarId>]) -> Vec<String> {
    let mut out = Vec::new();
    for v in y.iter().flatten() {
        if sys.is_pinned(*v) {
            continue;
        }
        out.push(format!("(>= {} 0.0)", sys.var(*v).name));
        if let Some(p) = sys.equation(*v) {
            out.push(format!("(= {} {})", sys.var(*v).name, smt::poly_smt(sys, p)));
        }
    }
    out
}

/// Strategy well-formedness: per state-interval distributions, tied across
/// sub-intervals of each declared interval.
pub(crate) fn strat_conjuncts(
    sys: &PolySystem,
    m: &OcMdp,
    zvars: &crate::compression::StrategyVars,
    zgroups: &[Vec<usize>],
    strict_support: bool,
) -> Vec<String> {
    let mut out = Vec::new();
    for group in zgroups {
        let Some(&rep) = group.first() else { continue };
        for q in m.states() {
            let reps = &zvars[rep][q.0];
            if !reps.is_empty() {
                let names: Vec<String> = reps.iter().map(|(_, v)| sys.var(*v).name.clone()).collect();
                for n in &names {
                    out.push(if strict_support {
                        format!("(> {n} 0.0)")
                    } else {
                        format!("(>= {n} 0.0)")
                    });
                }
                let sum = if names.len() == 1 {
                    names[0].clone()
                } else {
                    format!("(+ {})", names.join(" "))
                };
                out.push(format!("(= {sum} 1.0)"));
            }
            for &other in group.iter().skip(1) {
                for ((_, v1), (_, v2)) in zvars[rep][q.0].iter().zip(&zvars[other][q.0]) {
                    out.push(format!("(= {} {})", sys.var(*v1).name, sys.var(*v2).name));
                }
            }
        }
    }
    out
}

fn all_conjuncts_as_assertions(script: &mut Script, conjuncts: &[String]) {
    for c in conjuncts {
        script.assert(c.clone());
    }
}

/// Emit the verification sentence for an interval strategy.
pub fn emit_verification_smt(
    m: &OcMdp,
    s: &IntervalStrategy,
    q: &Query,
    opts: &EmitOptions,
) -> Result<String> {
    match &s.base {
        StrategyBase::Oeis { .. } => emit_verification_oeis(m, s, q, opts),
        StrategyBase::Cis(_) => emit_verification_cis(m, s, q, opts),
    }
}

fn emit_verification_oeis(m: &OcMdp, s: &IntervalStrategy, q: &Query, opts: &EmitOptions) -> Result<String> {
    let (pipe, _) = symbolic_oeis_pipeline(m, s, q, opts.symbolic_strategy)?;
    let is_reach = |v: VarId| matches!(pipe.sys.var(v).role, crate::eqsys::VarRole::Reach { .. });
    let is_z = |v: VarId| matches!(pipe.sys.var(v).role, crate::eqsys::VarRole::Strategy { .. });
    let mut trans = trans_conjuncts(&pipe.sys, &pipe.chain, &is_reach);
    let obj = obj_conjuncts(&pipe.sys, &pipe.y);
    let yi = goal_expr(&pipe.sys, &pipe.y, &pipe.target, pipe.init);
    let theta = smt::rational_smt(&q.theta);

    let mut script = Script::new(match opts.polarity {
        Polarity::NegatedExistential => "QF_NRA",
        Polarity::Universal => "NRA",
    });
    script.comment("interval strategy verification");
    script.comment(&format!("threshold {}", q.theta));
    if let Some(zvars) = &pipe.zvars {
        smt::declare_vars(&mut script, &pipe.sys, is_z);
        let strat = strat_conjuncts(&pipe.sys, m, zvars, &pipe.zgroups, false);
        all_conjuncts_as_assertions(&mut script, &strat);
    }
    match opts.polarity {
        Polarity::NegatedExistential => {
            smt::declare_vars(&mut script, &pipe.sys, |v| !is_z(v));
            all_conjuncts_as_assertions(&mut script, &trans);
            all_conjuncts_as_assertions(&mut script, &obj);
            script.assert(format!("(< {yi} {theta})"));
            script.comment("unsat means the strategy meets the threshold");
        }
        Polarity::Universal => {
            let mut bound_vars = Vec::new();
            for (v, info) in pipe.sys.vars() {
                if !pipe.sys.is_pinned(v) && !is_z(v) && pipe.sys.equation(v).is_some() {
                    bound_vars.push(format!("({} Real)", info.name));
                }
            }
            trans.extend(obj);
            let body = format!("(=> (and {}) (>= {yi} {theta}))", trans.join(" "));
            script.assert(format!("(forall ({}) {body})", bound_vars.join(" ")));
            script.comment("sat means the strategy meets the threshold");
        }
    }
    script.check_sat();
    Ok(script.render())
}

pub(crate) struct CisSymbolic {
    pub sys: PolySystem,
    pub chain: CompressedChain,
    pub cis_rows: Vec<Vec<(usize, crate::model::Weight, Entry)>>,
    pub y: Vec<Option<VarId>>,
    pub target: Vec<bool>,
    pub init: usize,
    pub zvars: Option<crate::compression::StrategyVars>,
    pub zgroups: Vec<Vec<usize>>,
}

pub(crate) fn symbolic_cis_pipeline(
    m: &OcMdp,
    s: &IntervalStrategy,
    q: &Query,
    symbolic_strategy: bool,
) -> Result<CisSymbolic> {
    let StrategyBase::Cis(pp) = &s.base else {
        return Err(Error::Domain("cyclic strategy required".to_string()));
    };
    let period = pp.period.clone();
    let window_base = pp.window.clone();
    let (m2, s2, transformed) = apply_objective(m, s, q)?;
    let (window_init, outer_init, outer_floor) = cis_split(&q.init.counter, &period);
    let window = prepare(&window_base, &window_init);

    // First compression: symbolic window systems folded into the
    // period-crossing one-counter chain.
    let spec = if symbolic_strategy { StratSpec::SymbolicFree } else { StratSpec::Concrete(&s2) };
    let zgroups = group_refined_by_base(&window_base, &window);
    let cis = crate::compression::cis_to_ocmc_spec(
        &m2,
        spec,
        &period,
        &window,
        CompressMode::Symbolic(PolySystem::new()),
    )?;
    let zvars = cis.zvars.clone();
    let sys = cis.sys.clone().expect("symbolic system");

    let outer = cis_outer_partition(&outer_floor)?;
    let comp = compress_ocmc_sym(&cis, &outer, sys)?;
    let chain = comp.chain;
    let mut sys = comp.sys.expect("symbolic system");
    let win_state = cis
        .index_of(&ChainState::Config { state: q.init.state, counter: window_init })
        .ok_or_else(|| Error::Internal("window initial state not retained".to_string()))?;
    let init = chain
        .config_index(StateId(win_state), &outer_init)
        .ok_or_else(|| Error::Internal("outer initial state not retained".to_string()))?;
    let target: Vec<bool> = {
        let target_windows: Vec<usize> = q
            .objective
            .targets
            .iter()
            .filter_map(|t| cis.index_of(&ChainState::Config { state: *t, counter: period.clone() }))
            .collect();
        chain
            .states
            .iter()
            .map(|st| match st {
                ChainState::Config { state, counter } => {
                    counter.is_zero() && target_windows.contains(&state.0)
                }
                ChainState::Bot => false,
            })
            .collect()
    };
    let y = sys.push_reach_block(&chain, &target)?;
    let _ = transformed;
    Ok(CisSymbolic { sys, chain, cis_rows: cis.rows, y, target, init, zvars, zgroups })
}

fn emit_verification_cis(m: &OcMdp, s: &IntervalStrategy, q: &Query, opts: &EmitOptions) -> Result<String> {
    let pipe = symbolic_cis_pipeline(m, s, q, opts.symbolic_strategy)?;
    let is_reach = |v: VarId| matches!(pipe.sys.var(v).role, crate::eqsys::VarRole::Reach { .. });
    let is_z = |v: VarId| matches!(pipe.sys.var(v).role, crate::eqsys::VarRole::Strategy { .. });
    let mut conj = trans_conjuncts(&pipe.sys, &pipe.chain, &is_reach);
    // Row-sum constraints of the window chain (the inner compression).
    for (i, row) in pipe.cis_rows.iter().enumerate() {
        if i == 0 {
            continue; // bot
        }
        let parts: Vec<String> = row
            .iter()
            .filter_map(|(_, _, e)| match e {
                Entry::Symbolic(v) if !pipe.sys.is_pinned(*v) => {
                    Some(pipe.sys.var(*v).name.clone())
                }
                Entry::Exact(c) => Some(smt::rational_smt(c)),
                _ => None,
            })
            .collect();
        if parts.len() > 1 {
            conj.push(format!("(<= (+ {}) 1.0)", parts.join(" ")));
        }
    }
    let obj = obj_conjuncts(&pipe.sys, &pipe.y);
    let yi = goal_expr(&pipe.sys, &pipe.y, &pipe.target, pipe.init);
    let theta = smt::rational_smt(&q.theta);

    let mut script = Script::new(match opts.polarity {
        Polarity::NegatedExistential => "QF_NRA",
        Polarity::Universal => "NRA",
    });
    script.comment("cyclic interval strategy verification (double compression)");
    if let Some(zvars) = &pipe.zvars {
        smt::declare_vars(&mut script, &pipe.sys, is_z);
        let strat = strat_conjuncts(&pipe.sys, m, zvars, &pipe.zgroups, false);
        all_conjuncts_as_assertions(&mut script, &strat);
    }
    match opts.polarity {
        Polarity::NegatedExistential => {
            smt::declare_vars(&mut script, &pipe.sys, |v| !is_z(v));
            all_conjuncts_as_assertions(&mut script, &conj);
            all_conjuncts_as_assertions(&mut script, &obj);
            script.assert(format!("(< {yi} {theta})"));
            script.comment("unsat means the strategy meets the threshold");
        }
        Polarity::Universal => {
            let mut bound_vars = Vec::new();
            for (v, info) in pipe.sys.vars() {
                if !pipe.sys.is_pinned(v) && !is_z(v) && pipe.sys.equation(v).is_some() {
                    bound_vars.push(format!("({} Real)", info.name));
                }
            }
            conj.extend(obj);
            let body = format!("(=> (and {}) (>= {yi} {theta}))", conj.join(" "));
            script.assert(format!("(forall ({}) {body})", bound_vars.join(" ")));
            script.comment("sat means the strategy meets the threshold");
        }
    }
    script.check_sat();
    Ok(script.render())
}
