//! Fixed-interval and parameterised realisability.
//!
//! Pure strategies are found by enumeration plus verification, in a
//! deterministic order (partitions by interval count then interval lengths,
//! strategies in action-id odometer order), returning the first witness.
//! Randomised realisability over a finite bound enumerates action supports:
//! each support yields an existential script over its uniquely-pinned
//! systems, and a cheap exact check of the uniform-over-support strategy
//! often settles the answer without any solver (always, when the threshold
//! is one, since almost-sure reachability depends only on supports).

use std::time::Duration;

use num_traits::One;
use rayon::prelude::*;

use crate::compression::{CompressMode, StratSpec};
use crate::eqsys::{pin_unreachable, PolySystem, VarId, VarRole};
use crate::error::{Error, Result};
use crate::model::{absorb_targets, Bound, ObjectiveKind, OcMdp, Query};
use crate::partitions::{enumerate_partitions, prepare, IntervalPartition, PeriodicPartition};
use crate::smt::{self, Script, SolverAnswer};
use crate::solvers::SolveConfig;
use crate::strategies::{
    enumerate_pure, enumerate_supports, IntervalStrategy, SupportAssignment,
};
use crate::verify::{self, Answer, ProbBracket, Verdict};
use crate::{Counter, Rational};

#[derive(Debug, Clone, Default)]
pub struct SearchStats {
    /// Candidate strategies verified.
    pub candidates: usize,
    /// Candidates skipped by structural pruning (currently only empty
    /// partition streams).
    pub prunes: usize,
}

#[derive(Debug, Clone)]
pub struct Witness {
    pub strategy: IntervalStrategy,
    pub partition: IntervalPartition,
    pub bracket: ProbBracket,
}

/// One emitted script for a support assignment.
#[derive(Debug, Clone)]
pub struct RandScript {
    pub support: String,
    pub script: String,
}

#[derive(Debug)]
pub struct RealisabilityResult {
    pub answer: Answer,
    pub witness: Option<Witness>,
    pub stats: SearchStats,
    pub scripts: Vec<RandScript>,
}

fn check_partition_covers(p: &IntervalPartition, q: &Query) -> Result<()> {
    if p.covered_bound() != q.bound {
        return Err(Error::Domain(format!(
            "partition covers [1,{}-1] but the query bound is {}",
            p.covered_bound(),
            q.bound
        )));
    }
    Ok(())
}

fn verify_candidate(m: &OcMdp, s: &IntervalStrategy, q: &Query, cfg: &SolveConfig) -> Result<Verdict> {
    verify::verify(m, s, q, cfg)
}

/// Search a candidate stream for the first verified witness, preserving the
/// stream order. `jobs > 1` verifies batches in parallel.
#[allow(clippy::too_many_arguments)]
fn search_stream(
    m: &OcMdp,
    q: &Query,
    cfg: &SolveConfig,
    jobs: usize,
    partition: &IntervalPartition,
    candidates: impl Iterator<Item = IntervalStrategy>,
    stats: &mut SearchStats,
    saw_inconclusive: &mut bool,
) -> Result<Option<Witness>> {
    let batch_size = jobs.max(1) * 4;
    let mut stream = candidates.peekable();
    while stream.peek().is_some() {
        let batch: Vec<IntervalStrategy> = stream.by_ref().take(batch_size).collect();
        let verdicts: Vec<Result<Verdict>> = if jobs > 1 {
            batch.par_iter().map(|s| verify_candidate(m, s, q, cfg)).collect()
        } else {
            batch.iter().map(|s| verify_candidate(m, s, q, cfg)).collect()
        };
        for (s, v) in batch.into_iter().zip(verdicts) {
            let v = v?;
            stats.candidates += 1;
            match v.answer {
                Answer::Yes => {
                    return Ok(Some(Witness {
                        strategy: s,
                        partition: partition.clone(),
                        bracket: v.bracket,
                    }))
                }
                Answer::Inconclusive => *saw_inconclusive = true,
                Answer::No => {}
            }
        }
    }
    Ok(None)
}

/// Pure realisability over a fixed partition.
pub fn realise_pure_fixed(
    m: &OcMdp,
    q: &Query,
    p: &IntervalPartition,
    cfg: &SolveConfig,
    jobs: usize,
) -> Result<RealisabilityResult> {
    check_partition_covers(p, q)?;
    let mut stats = SearchStats::default();
    let mut inconclusive = false;
    let witness =
        search_stream(m, q, cfg, jobs, p, enumerate_pure(p, m), &mut stats, &mut inconclusive)?;
    let answer = match (&witness, inconclusive) {
        (Some(_), _) => Answer::Yes,
        (None, true) => Answer::Inconclusive,
        (None, false) => Answer::No,
    };
    Ok(RealisabilityResult { answer, witness, stats, scripts: Vec::new() })
}

/// Pure parameterised realisability: partitions with at most `d` intervals of
/// size at most `n`, then strategies based on them.
pub fn realise_pure_param(
    m: &OcMdp,
    q: &Query,
    d: usize,
    n: u64,
    cfg: &SolveConfig,
    jobs: usize,
) -> Result<RealisabilityResult> {
    let mut stats = SearchStats::default();
    let mut inconclusive = false;
    let mut saw_partition = false;
    for p in enumerate_partitions(d, n, &q.bound) {
        saw_partition = true;
        let witness =
            search_stream(m, q, cfg, jobs, &p, enumerate_pure(&p, m), &mut stats, &mut inconclusive)?;
        if let Some(w) = witness {
            return Ok(RealisabilityResult { answer: Answer::Yes, witness: Some(w), stats, scripts: Vec::new() });
        }
    }
    if !saw_partition {
        stats.prunes += 1; // no compatible partition: trivially negative
    }
    let answer = if inconclusive { Answer::Inconclusive } else { Answer::No };
    Ok(RealisabilityResult { answer, witness: None, stats, scripts: Vec::new() })
}

/// Pure realisability over a fixed cyclic window.
pub fn realise_pure_fixed_cis(
    m: &OcMdp,
    q: &Query,
    pp: &PeriodicPartition,
    cfg: &SolveConfig,
    jobs: usize,
) -> Result<RealisabilityResult> {
    let mut stats = SearchStats::default();
    let mut inconclusive = false;
    let candidates = enumerate_pure(&pp.window, m).map(|s| {
        IntervalStrategy::new_cis(pp.clone(), s.table().clone())
            .expect("window tables are well-formed")
    });
    let witness =
        search_stream(m, q, cfg, jobs, &pp.window, candidates, &mut stats, &mut inconclusive)?;
    let answer = match (&witness, inconclusive) {
        (Some(_), _) => Answer::Yes,
        (None, true) => Answer::Inconclusive,
        (None, false) => Answer::No,
    };
    Ok(RealisabilityResult { answer, witness, stats, scripts: Vec::new() })
}

/// Pure parameterised realisability over cyclic strategies: periods up to
/// `d * n`, window partitions compatible with the parameters.
pub fn realise_pure_cis_param(
    m: &OcMdp,
    q: &Query,
    d: usize,
    n: u64,
    cfg: &SolveConfig,
    jobs: usize,
) -> Result<RealisabilityResult> {
    if q.bound != Bound::Infinite {
        return Err(Error::Precondition("cyclic strategies assume no counter ceiling".to_string()));
    }
    let mut stats = SearchStats::default();
    let mut inconclusive = false;
    for rho in 1..=(d as u64 * n) {
        for window in enumerate_partitions(d, n, &Bound::finite(rho + 1)) {
            let pp = PeriodicPartition::new(Counter::from(rho), window.clone())?;
            let candidates = enumerate_pure(&window, m).map(|s| {
                IntervalStrategy::new_cis(pp.clone(), s.table().clone())
                    .expect("window tables are well-formed")
            });
            let witness =
                search_stream(m, q, cfg, jobs, &window, candidates, &mut stats, &mut inconclusive)?;
            if let Some(w) = witness {
                return Ok(RealisabilityResult {
                    answer: Answer::Yes,
                    witness: Some(w),
                    stats,
                    scripts: Vec::new(),
                });
            }
        }
    }
    let answer = if inconclusive { Answer::Inconclusive } else { Answer::No };
    Ok(RealisabilityResult { answer, witness: None, stats, scripts: Vec::new() })
}

fn support_desc(m: &OcMdp, sa: &SupportAssignment) -> String {
    let mut parts = Vec::new();
    for (j, block) in sa.rows.iter().enumerate() {
        for (qi, actions) in block.iter().enumerate() {
            let names: Vec<&str> =
                actions.iter().map(|a| m.action_name(*a)).collect();
            parts.push(format!("I{j}/{}:{{{}}}", m.state_name(crate::model::StateId(qi)), names.join(",")));
        }
    }
    parts.join(" ")
}

/// Uniform distribution over each assigned support.
fn uniform_over_support(
    p: &IntervalPartition,
    bound: &Bound,
    sa: &SupportAssignment,
) -> Result<IntervalStrategy> {
    let rows = sa
        .rows
        .iter()
        .map(|block| {
            block
                .iter()
                .map(|actions| {
                    let k = actions.len() as i64;
                    actions.iter().map(|a| (*a, Rational::new(1.into(), k.into()))).collect()
                })
                .collect()
        })
        .collect();
    IntervalStrategy::new_oeis(p.clone(), bound.clone(), rows)
}

/// Build the existential script of one support assignment: strategy
/// constraints with strict positivity on the support, uniquely-pinned
/// transition and reachability systems, and the threshold goal.
fn support_script(
    m2: &OcMdp,
    q: &Query,
    p_input: &IntervalPartition,
    p_refined: &IntervalPartition,
    sa: &SupportAssignment,
    transformed: bool,
) -> Result<(String, crate::compression::StrategyVars, PolySystem)> {
    // Expand input-interval supports onto the refined partition.
    let groups = verify::group_refined_by_base(p_input, p_refined);
    let mut refined_rows = vec![Vec::new(); p_refined.len()];
    for (g, members) in groups.iter().enumerate() {
        for &j in members {
            refined_rows[j] = sa.rows[g].clone();
        }
    }
    let expanded = SupportAssignment { rows: refined_rows };
    let res = crate::compression::compress(
        m2,
        StratSpec::SymbolicSupport(&expanded),
        p_refined,
        &q.bound,
        CompressMode::Symbolic(PolySystem::new()),
    )?;
    let chain = res.comp.chain;
    let mut sys = res.comp.sys.expect("symbolic system");
    let zvars = res.zvars.expect("support compression creates strategy variables");
    let target: Vec<bool> = chain
        .states
        .iter()
        .map(|s| match s {
            crate::compression::ChainState::Config { state, counter } => {
                q.objective.targets.contains(state)
                    && (num_traits::Zero::is_zero(counter)
                        || (transformed
                            && q.bound.as_finite().is_some_and(|b| counter == b)))
            }
            _ => false,
        })
        .collect();
    let y = sys.push_reach_block(&chain, &target)?;
    pin_unreachable(&mut sys, &y, &chain, &target);
    let init = chain
        .config_index(q.init.state, &q.init.counter)
        .ok_or_else(|| Error::Internal("initial configuration not retained".to_string()))?;

    let mut script = Script::new("QF_NRA");
    script.comment("randomised fixed-interval realisability for one support assignment");
    script.comment(&format!("support: {}", support_desc(m2, sa)));
    let is_reach = |v: VarId| matches!(sys.var(v).role, VarRole::Reach { .. });
    let is_z = |v: VarId| matches!(sys.var(v).role, VarRole::Strategy { .. });
    smt::declare_vars(&mut script, &sys, |_| true);
    for c in verify::strat_conjuncts(&sys, m2, &zvars, &groups, true) {
        script.assert(c);
    }
    // Transition systems (uniquely pinned) and row constraints.
    for (v, info) in sys.vars() {
        if sys.is_pinned(v) || is_z(v) || is_reach(v) {
            continue;
        }
        if let Some(poly) = sys.equation(v) {
            script.assert(format!("(>= {} 0.0)", info.name));
            script.assert(format!("(= {} {})", info.name, smt::poly_smt(&sys, poly)));
        }
    }
    for v in y.iter().flatten() {
        if sys.is_pinned(*v) {
            continue;
        }
        if let Some(poly) = sys.equation(*v) {
            script.assert(format!("(>= {} 0.0)", sys.var(*v).name));
            script.assert(format!("(= {} {})", sys.var(*v).name, smt::poly_smt(&sys, poly)));
        }
    }
    let goal = match y[init] {
        Some(v) if !sys.is_pinned(v) => sys.var(v).name.clone(),
        _ if target[init] => "1.0".to_string(),
        _ => "0.0".to_string(), // initial state cannot reach the target
    };
    script.assert(format!("(>= {goal} {})", smt::rational_smt(&q.theta)));
    script.check_sat();
    let znames: Vec<String> = zvars
        .iter()
        .flatten()
        .flatten()
        .map(|(_, v)| sys.var(*v).name.clone())
        .collect();
    script.get_value(&znames);
    Ok((script.render(), zvars, sys))
}

/// Reconstruct a strategy on the input partition from solver bindings.
fn strategy_from_model(
    m: &OcMdp,
    p_input: &IntervalPartition,
    p_refined: &IntervalPartition,
    bound: &Bound,
    zvars: &crate::compression::StrategyVars,
    sys: &PolySystem,
    bindings: &[(String, Rational)],
) -> Option<IntervalStrategy> {
    let lookup = |v: VarId| -> Option<Rational> {
        let name = &sys.var(v).name;
        bindings.iter().find(|(n, _)| n == name).map(|(_, r)| r.clone())
    };
    let groups = verify::group_refined_by_base(p_input, p_refined);
    let mut rows = Vec::with_capacity(p_input.len());
    for members in &groups {
        let rep = *members.first()?;
        let block: Option<Vec<crate::strategies::ActionDist>> = (0..m.n_states())
            .map(|qi| {
                let mut dist = Vec::new();
                let mut sum = Rational::new(0.into(), 1.into());
                for (a, v) in &zvars[rep][qi] {
                    let val = lookup(*v)?;
                    sum += &val;
                    dist.push((*a, val));
                }
                sum.is_one().then_some(dist)
            })
            .collect();
        rows.push(block?);
    }
    IntervalStrategy::new_oeis(p_input.clone(), bound.clone(), rows).ok()
}

/// Randomised fixed-interval realisability under a finite bound.
///
/// Every support assignment yields a script; the answer is decided without a
/// solver when a pure or uniform-over-support witness verifies exactly, or
/// when the threshold is one (almost-sure reachability depends only on
/// supports, so the uniform check is conclusive). Otherwise, a configured
/// external solver can discharge the scripts; failing that, the result is
/// inconclusive pending a solver.
pub fn realise_rand_bounded(
    m: &OcMdp,
    q: &Query,
    p_input: &IntervalPartition,
    solver_cmd: Option<&str>,
    solver_timeout: Duration,
    _cfg: &SolveConfig,
) -> Result<RealisabilityResult> {
    let Bound::Finite(_) = &q.bound else {
        return Err(Error::Precondition("randomised search needs a finite bound".to_string()));
    };
    check_partition_covers(p_input, q)?;
    let mut stats = SearchStats::default();

    // Work on the transformed model so supports match its action sets.
    let (m2, transformed) = match q.objective.kind {
        ObjectiveKind::Reach => (absorb_targets(m, &q.objective.targets)?, true),
        ObjectiveKind::SelTerm => (m.clone(), false),
    };
    let p_refined = prepare(p_input, &q.init.counter);

    let mut scripts = Vec::new();
    let mut witness: Option<Witness> = None;
    let mut pending: Vec<(SupportAssignment, crate::compression::StrategyVars, PolySystem, String)> =
        Vec::new();
    let mut any_undecided = false;
    for sa in enumerate_supports(p_input, &m2) {
        let (script, zvars, sys) = support_script(&m2, q, p_input, &p_refined, &sa, transformed)?;
        scripts.push(RandScript { support: support_desc(&m2, &sa), script: script.clone() });
        if witness.is_some() {
            continue;
        }
        // Exact check of the uniform-over-support strategy.
        let uniform = uniform_over_support(p_input, &q.bound, &sa)?;
        let v = verify::verify_bounded_oeis(&m2, &uniform, q)?;
        stats.candidates += 1;
        if v.answer == Answer::Yes {
            witness = Some(Witness {
                strategy: uniform,
                partition: p_input.clone(),
                bracket: v.bracket,
            });
        } else if q.theta == Rational::one() {
            // Almost-sure reachability is support-determined: this support
            // is conclusively refuted.
        } else {
            any_undecided = true;
            pending.push((sa, zvars, sys, script));
        }
    }

    if witness.is_none() {
        if let Some(cmd) = solver_cmd {
            any_undecided = false;
            for (_, zvars, sys, script) in &pending {
                match smt::run_solver(cmd, script, solver_timeout)? {
                    out if out.answer == SolverAnswer::Sat => {
                        if let Some(s) = strategy_from_model(
                            &m2, p_input, &p_refined, &q.bound, zvars, sys, &out.model,
                        ) {
                            let v = verify::verify_bounded_oeis(&m2, &s, q)?;
                            stats.candidates += 1;
                            if v.answer == Answer::Yes {
                                witness = Some(Witness {
                                    strategy: s,
                                    partition: p_input.clone(),
                                    bracket: v.bracket,
                                });
                                break;
                            }
                        }
                        // A sat answer whose model we cannot replay exactly.
                        any_undecided = true;
                    }
                    out if out.answer == SolverAnswer::Unsat => {}
                    _ => any_undecided = true,
                }
            }
        }
    }

    let answer = match (&witness, any_undecided) {
        (Some(_), _) => Answer::Yes,
        (None, false) => Answer::No,
        (None, true) => Answer::Inconclusive,
    };
    Ok(RealisabilityResult { answer, witness, stats, scripts })
}

/// Which class of strategy an existential-universal script quantifies over.
pub enum RealisabilityTarget<'a> {
    Oeis(&'a IntervalPartition),
    Cis { period: Counter, window: &'a IntervalPartition },
}

/// Emit the two-block sentence for randomised fixed-interval realisability:
/// exists strategy probabilities, for all transition and reachability values,
/// the constraint systems imply the threshold.
pub fn emit_realisability_smt(m: &OcMdp, q: &Query, target: RealisabilityTarget) -> Result<String> {
    match target {
        RealisabilityTarget::Oeis(p) => {
            check_partition_covers(p, q)?;
            let dummy = first_action_strategy_oeis(m, p, &q.bound);
            let (pipe, _) = verify::symbolic_oeis_pipeline(m, &dummy, q, true)?;
            emit_exists_forall(
                m, q, pipe.sys, &pipe.chain, None, &pipe.y, &pipe.target, pipe.init, pipe.zvars,
                pipe.zgroups,
            )
        }
        RealisabilityTarget::Cis { period, window } => {
            if q.bound != Bound::Infinite {
                return Err(Error::Precondition(
                    "cyclic strategies assume no counter ceiling".to_string(),
                ));
            }
            let pp = PeriodicPartition::new(period, window.clone())?;
            let rows = (0..window.len())
                .map(|_| {
                    m.states()
                        .map(|s| vec![(m.enabled(s)[0].action, Rational::one())])
                        .collect()
                })
                .collect();
            let dummy = IntervalStrategy::new_cis(pp, rows)?;
            let pipe = verify::symbolic_cis_pipeline(m, &dummy, q, true)?;
            emit_exists_forall(
                m,
                q,
                pipe.sys,
                &pipe.chain,
                Some(&pipe.cis_rows),
                &pipe.y,
                &pipe.target,
                pipe.init,
                pipe.zvars,
                pipe.zgroups,
            )
        }
    }
}

fn first_action_strategy_oeis(m: &OcMdp, p: &IntervalPartition, bound: &Bound) -> IntervalStrategy {
    let rows = (0..p.len())
        .map(|_| {
            m.states()
                .map(|s| vec![(m.enabled(s)[0].action, Rational::one())])
                .collect()
        })
        .collect();
    IntervalStrategy::new_oeis(p.clone(), bound.clone(), rows).expect("well-formed dummy strategy")
}

#[allow(clippy::too_many_arguments)]
fn emit_exists_forall(
    m: &OcMdp,
    q: &Query,
    sys: PolySystem,
    chain: &crate::compression::CompressedChain,
    cis_rows: Option<&Vec<Vec<(usize, crate::model::Weight, crate::compression::Entry)>>>,
    y: &[Option<VarId>],
    target: &[bool],
    init: usize,
    zvars: Option<crate::compression::StrategyVars>,
    zgroups: Vec<Vec<usize>>,
) -> Result<String> {
    let init_is_target = target[init];
    let zvars = zvars.ok_or_else(|| Error::Internal("symbolic strategy required".to_string()))?;
    let is_reach = |v: VarId| matches!(sys.var(v).role, VarRole::Reach { .. });
    let is_z = |v: VarId| matches!(sys.var(v).role, VarRole::Strategy { .. });

    let mut script = Script::new("NRA");
    script.comment("randomised fixed-interval realisability (exists-forall)");
    smt::declare_vars(&mut script, &sys, is_z);
    for c in verify::strat_conjuncts(&sys, m, &zvars, &zgroups, false) {
        script.assert(c);
    }

    let mut conj: Vec<String> = Vec::new();
    for (v, info) in sys.vars() {
        if sys.is_pinned(v) || is_z(v) || is_reach(v) {
            continue;
        }
        if let Some(poly) = sys.equation(v) {
            conj.push(format!("(>= {} 0.0)", info.name));
            conj.push(format!("(= {} {})", info.name, smt::poly_smt(&sys, poly)));
        }
    }
    let row_sum = |row_entries: Vec<String>| -> Option<String> {
        match row_entries.len() {
            0 => None,
            1 => Some(format!("(<= {} 1.0)", row_entries[0])),
            _ => Some(format!("(<= (+ {}) 1.0)", row_entries.join(" "))),
        }
    };
    for (i, row) in chain.rows.iter().enumerate() {
        if chain.is_absorbing(i) {
            continue;
        }
        let parts: Vec<String> = row
            .iter()
            .filter_map(|(_, e)| match e {
                crate::compression::Entry::Symbolic(v) if !sys.is_pinned(*v) => {
                    Some(sys.var(*v).name.clone())
                }
                crate::compression::Entry::Exact(c) => Some(smt::rational_smt(c)),
                _ => None,
            })
            .collect();
        conj.extend(row_sum(parts));
    }
    if let Some(rows) = cis_rows {
        for (i, row) in rows.iter().enumerate() {
            if i == 0 {
                continue;
            }
            let parts: Vec<String> = row
                .iter()
                .filter_map(|(_, _, e)| match e {
                    crate::compression::Entry::Symbolic(v) if !sys.is_pinned(*v) => {
                        Some(sys.var(*v).name.clone())
                    }
                    crate::compression::Entry::Exact(c) => Some(smt::rational_smt(c)),
                    _ => None,
                })
                .collect();
            conj.extend(row_sum(parts));
        }
    }
    for v in y.iter().flatten() {
        if sys.is_pinned(*v) {
            continue;
        }
        conj.push(format!("(>= {} 0.0)", sys.var(*v).name));
        if let Some(poly) = sys.equation(*v) {
            conj.push(format!("(= {} {})", sys.var(*v).name, smt::poly_smt(&sys, poly)));
        }
    }
    let goal = match y[init] {
        Some(v) if !sys.is_pinned(v) => sys.var(v).name.clone(),
        _ if init_is_target => "1.0".to_string(),
        _ => "0.0".to_string(),
    };
    let mut bound_vars = Vec::new();
    for (v, info) in sys.vars() {
        if !sys.is_pinned(v) && !is_z(v) && sys.equation(v).is_some() {
            bound_vars.push(format!("({} Real)", info.name));
        }
    }
    let body = format!(
        "(=> (and {}) (>= {goal} {}))",
        conj.join(" "),
        smt::rational_smt(&q.theta)
    );
    script.assert(format!("(forall ({}) {body})", bound_vars.join(" ")));
    script.check_sat();
    Ok(script.render())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::example_catalog;
    use crate::partitions::Interval;
    use crate::rat;
    use crate::solvers::Mode;

    fn cfg() -> SolveConfig {
        SolveConfig { mode: Mode::Float, eps: 1e-13, ..Default::default() }
    }

    #[test]
    fn pure_fixed_on_fig4() {
        let cat = example_catalog();
        let m = &cat.fig4.model;
        let q = cat.fig4.query.clone();
        let single = IntervalPartition::full_range(&q.bound);
        // theta 3/4: the very first pure strategy wins.
        let r = realise_pure_fixed(m, &Query { theta: rat(3, 4), ..q.clone() }, &single, &cfg(), 1).unwrap();
        assert_eq!(r.answer, Answer::Yes);
        let w = r.witness.unwrap();
        assert_eq!(w.bracket, ProbBracket::Exact(rat(3, 4)));
        // Witness re-verifies.
        let v = verify::verify(m, &w.strategy, &Query { theta: rat(3, 4), ..q.clone() }, &cfg()).unwrap();
        assert_eq!(v.answer, Answer::Yes);
        // theta 25/32: both pure candidates cap at 3/4.
        let r = realise_pure_fixed(m, &q, &single, &cfg(), 1).unwrap();
        assert_eq!(r.answer, Answer::No);
        assert_eq!(r.stats.candidates, 2);
    }

    #[test]
    fn pure_fixed_singletons_reach_seven_eighths() {
        let cat = example_catalog();
        let m = &cat.fig4.model;
        let q = Query { theta: rat(7, 8), ..cat.fig4.query.clone() };
        let p = IntervalPartition::new(vec![Interval::bounded(1, 1), Interval::bounded(2, 2)]).unwrap();
        let r = realise_pure_fixed(m, &q, &p, &cfg(), 1).unwrap();
        assert_eq!(r.answer, Answer::Yes);
        let w = r.witness.unwrap();
        assert_eq!(w.bracket, ProbBracket::Exact(rat(7, 8)));
        // The witness plays b at counter 1 and a at counter 2.
        let qs = m.state_by_name("q").unwrap();
        let b = m.action_by_name("b").unwrap();
        let a = m.action_by_name("a").unwrap();
        assert_eq!(w.strategy.lookup(qs, &crate::counter(1)).unwrap(), vec![(b, Rational::one())]);
        assert_eq!(w.strategy.lookup(qs, &crate::counter(2)).unwrap(), vec![(a, Rational::one())]);
    }

    #[test]
    fn pure_param_on_fig4() {
        let cat = example_catalog();
        let m = &cat.fig4.model;
        let q = Query { theta: rat(7, 8), ..cat.fig4.query.clone() };
        let r = realise_pure_param(m, &q, 2, 1, &cfg(), 1).unwrap();
        assert_eq!(r.answer, Answer::Yes);
        assert!(r.witness.is_some());
        // d = n = 1 cannot cover [1,2]: trivially negative.
        let r = realise_pure_param(m, &q, 1, 1, &cfg(), 1).unwrap();
        assert_eq!(r.answer, Answer::No);
        assert_eq!(r.stats.candidates, 0);
    }

    #[test]
    fn rand_bounded_on_fig4() {
        let cat = example_catalog();
        let m = &cat.fig4.model;
        let q = cat.fig4.query.clone(); // theta = 25/32
        let single = IntervalPartition::full_range(&q.bound);
        let r = realise_rand_bounded(m, &q, &single, None, Duration::from_secs(5), &cfg()).unwrap();
        // The uniform strategy over support {a,b} hits 25/32 exactly.
        assert_eq!(r.answer, Answer::Yes);
        let w = r.witness.unwrap();
        assert_eq!(w.bracket, ProbBracket::Exact(rat(25, 32)));
        // 3 supports for q (and singletons elsewhere): {a}, {b}, {a,b}.
        assert_eq!(r.scripts.len(), 3);
        assert!(r.scripts.iter().any(|s| s.script.contains("(check-sat)")));

        // theta = 1 is support-determined: conclusive no without a solver.
        let r = realise_rand_bounded(
            m,
            &Query { theta: Rational::one(), ..q },
            &single,
            None,
            Duration::from_secs(5),
            &cfg(),
        )
        .unwrap();
        assert_eq!(r.answer, Answer::No);
    }

    /// The support script for {a,b} is satisfied by the uniform witness:
    /// substitute the uniform strategy into the system, solve it, and check
    /// every assertion of the emitted text numerically.
    #[test]
    fn support_script_satisfied_by_uniform_witness() {
        use crate::smt::testeval::{assertions, eval};
        let cat = example_catalog();
        let m = &cat.fig4.model;
        let q = cat.fig4.query.clone(); // theta = 25/32
        let p_input = IntervalPartition::full_range(&q.bound);
        let p_refined = prepare(&p_input, &q.init.counter);
        let a = m.action_by_name("a").unwrap();
        let b = m.action_by_name("b").unwrap();
        let sa = SupportAssignment {
            rows: vec![vec![vec![a, b], vec![a], vec![a]]],
        };
        let (script, zvars, mut sys) = support_script(m, &q, &p_input, &p_refined, &sa, false).unwrap();
        // Bind the strategy variables to the uniform distribution.
        for block in &zvars {
            for (qi, per_state) in block.iter().enumerate() {
                let k = per_state.len() as i64;
                for (_, v) in per_state {
                    let mut poly = crate::eqsys::Polynomial::default();
                    poly.terms.push(crate::eqsys::Term {
                        coef: Rational::new(1.into(), k.into()),
                        vars: vec![],
                    });
                    sys.set_equation(*v, poly);
                }
                let _ = qi;
            }
        }
        let cfg = crate::solvers::SolveConfig {
            mode: crate::solvers::Mode::Float,
            eps: 1e-14,
            max_iters: 1_000_000,
            newton: false,
        };
        let sol = crate::solvers::lfp(&sys, &cfg).unwrap();
        let mut env = std::collections::HashMap::new();
        for (v, info) in sys.vars() {
            env.insert(info.name.clone(), if sys.is_pinned(v) { 0.0 } else { sol.get_f64(v) });
        }
        for (i, c) in assertions(&script).iter().enumerate() {
            assert_eq!(eval(c, &env), 1.0, "assertion {i} failed: {c:?}");
        }
    }

    /// The exists-forall sentences, evaluated pointwise at a satisfying
    /// witness: strategy constraints hold at the uniform strategy, and the
    /// quantified implication holds at the corresponding least solution.
    #[test]
    fn exists_forall_body_holds_at_witness() {
        use crate::smt::testeval::{assertions, eval};
        let cat = example_catalog();
        let m = &cat.fig4.model;
        let q = cat.fig4.query.clone();
        let single = IntervalPartition::full_range(&q.bound);
        let script = emit_realisability_smt(m, &q, RealisabilityTarget::Oeis(&single)).unwrap();

        // Rebuild the same symbolic system, bind z to the uniform strategy,
        // and solve for the least solution of everything else.
        let dummy = first_action_strategy_oeis(m, &single, &q.bound);
        let (pipe, _) = verify::symbolic_oeis_pipeline(m, &dummy, &q, true).unwrap();
        let mut sys = pipe.sys;
        for block in pipe.zvars.as_ref().unwrap() {
            for per_state in block {
                let k = per_state.len() as i64;
                for (_, v) in per_state {
                    let mut poly = crate::eqsys::Polynomial::default();
                    poly.terms.push(crate::eqsys::Term {
                        coef: Rational::new(1.into(), k.into()),
                        vars: vec![],
                    });
                    sys.set_equation(*v, poly);
                }
            }
        }
        let cfg = crate::solvers::SolveConfig {
            mode: crate::solvers::Mode::Float,
            eps: 1e-14,
            max_iters: 1_000_000,
            newton: false,
        };
        let sol = crate::solvers::lfp(&sys, &cfg).unwrap();
        let mut env = std::collections::HashMap::new();
        for (v, info) in sys.vars() {
            env.insert(info.name.clone(), if sys.is_pinned(v) { 0.0 } else { sol.get_f64(v) });
        }
        for (i, c) in assertions(&script).iter().enumerate() {
            assert_eq!(eval(c, &env), 1.0, "assertion {i} failed: {c:?}");
        }

        // Cyclic variant over the square-root gadget (period 1).
        let inst = crate::generators::SqrtSumInstance::new(vec![2], 1).unwrap();
        let (ms, qs) = crate::generators::gen_sqrt_sum(&inst).unwrap();
        let window = IntervalPartition::full_range(&Bound::finite(2));
        let script = emit_realisability_smt(
            &ms,
            &qs,
            RealisabilityTarget::Cis { period: Counter::one(), window: &window },
        )
        .unwrap();
        let pp = PeriodicPartition::new(Counter::one(), window.clone()).unwrap();
        let rows = (0..window.len())
            .map(|_| {
                ms.states()
                    .map(|s| vec![(ms.enabled(s)[0].action, Rational::one())])
                    .collect()
            })
            .collect();
        let dummy = IntervalStrategy::new_cis(pp, rows).unwrap();
        let pipe = verify::symbolic_cis_pipeline(&ms, &dummy, &qs, true).unwrap();
        let mut sys = pipe.sys;
        for block in pipe.zvars.as_ref().unwrap() {
            for per_state in block {
                let k = per_state.len() as i64;
                for (_, v) in per_state {
                    let mut poly = crate::eqsys::Polynomial::default();
                    poly.terms.push(crate::eqsys::Term {
                        coef: Rational::new(1.into(), k.into()),
                        vars: vec![],
                    });
                    sys.set_equation(*v, poly);
                }
            }
        }
        let cfg = crate::solvers::SolveConfig {
            mode: crate::solvers::Mode::Float,
            eps: 1e-14,
            max_iters: 2_000_000,
            newton: true,
        };
        let sol = crate::solvers::lfp(&sys, &cfg).unwrap();
        let mut env = std::collections::HashMap::new();
        for (v, info) in sys.vars() {
            env.insert(info.name.clone(), if sys.is_pinned(v) { 0.0 } else { sol.get_f64(v) });
        }
        for (i, c) in assertions(&script).iter().enumerate() {
            assert_eq!(eval(c, &env), 1.0, "cis assertion {i} failed: {c:?}");
        }
    }

    #[test]
    fn exists_forall_script_shape() {
        let cat = example_catalog();
        let m = &cat.fig4.model;
        let q = cat.fig4.query.clone();
        let single = IntervalPartition::full_range(&q.bound);
        let script = emit_realisability_smt(m, &q, RealisabilityTarget::Oeis(&single)).unwrap();
        assert!(script.contains("(set-logic NRA)"));
        assert!(script.contains("(forall ("));
        assert!(script.contains("zI0_"));

        let window = IntervalPartition::full_range(&Bound::finite(3));
        let inst = crate::generators::SqrtSumInstance::new(vec![2], 1).unwrap();
        let (ms, qs) = crate::generators::gen_sqrt_sum(&inst).unwrap();
        let script = emit_realisability_smt(
            &ms,
            &qs,
            RealisabilityTarget::Cis { period: crate::counter(2), window: &window },
        )
        .unwrap();
        assert!(script.contains("(set-logic NRA)"));
        assert!(script.contains("(forall ("));
    }
}
