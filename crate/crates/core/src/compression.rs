//! Compression of the (possibly infinite) chain induced by an interval
//! strategy down to a finite chain over *retained* configurations.
//!
//! Inside a bounded interval `[lo, hi]` of size `2^beta - 1`, the retained
//! counter values are `lo + 2^a - 1` and `hi - (2^a - 1)` for `a < beta`: a
//! value entered by a jump of `2^a` is next observed after a jump of
//! `2^(a+1)`, so each family doubles its stride until it exits the interval.
//! An unbounded interval retains only its minimum, whose sole successor is
//! the value just below. One transition of the compressed chain aggregates
//! every history between consecutive retained values; mass that never hits a
//! successor value is routed to the absorbing state `bot`.
//!
//! Transition probabilities come from the equation systems in [`crate::eqsys`]:
//! exact rationals for bounded intervals (staged linear solves after
//! qualitative zero-pinning), certified `[lo, hi]` brackets for unbounded
//! tails (a height-doubling sandwich between termination below a ceiling and
//! escape to it), or plain variables in symbolic mode.

use std::collections::HashMap;

use num_traits::{One, Signed, Zero};

use crate::eqsys::{
    self, fold_chain, fold_concrete, fold_symbolic, qual_of_supports, DeltaFold, FoldProb,
    PolySystem, Qual, VarId, VarRole,
};
use crate::error::{Error, Result};
use crate::model::{ActionId, Bound, OcMdp, OneCounterChain, StateId, Weight};
use crate::partitions::{Interval, IntervalPartition};
use crate::solvers::{self, SolveConfig, SolveStatus};
use crate::strategies::{IntervalStrategy, SupportAssignment};
use crate::{Counter, Rational};

/// A state of a compressed chain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ChainState {
    /// Absorbing sink for mass that never reaches another retained value.
    Bot,
    Config { state: StateId, counter: Counter },
}

/// A transition probability: exact, bracketed, or a system variable.
#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Exact(Rational),
    Approx { lo: f64, hi: f64 },
    Symbolic(VarId),
}

impl Entry {
    pub fn possibly_positive(&self) -> bool {
        match self {
            Entry::Exact(v) => v.is_positive(),
            Entry::Approx { hi, .. } => *hi > 0.0,
            Entry::Symbolic(_) => true,
        }
    }

    pub fn bounds_f64(&self) -> Option<(f64, f64)> {
        match self {
            Entry::Exact(v) => {
                let x = solvers::rational_to_f64(v);
                Some((x, x))
            }
            Entry::Approx { lo, hi } => Some((*lo, *hi)),
            Entry::Symbolic(_) => None,
        }
    }
}

/// A finite Markov chain over retained configurations plus `bot`.
#[derive(Debug, Clone)]
pub struct CompressedChain {
    pub states: Vec<ChainState>,
    /// Sparse rows; positions index into `states`.
    pub rows: Vec<Vec<(usize, Entry)>>,
    index: HashMap<ChainState, usize>,
}

impl CompressedChain {
    pub fn new(states: Vec<ChainState>, rows: Vec<Vec<(usize, Entry)>>) -> CompressedChain {
        assert_eq!(states.len(), rows.len());
        let index = states.iter().cloned().zip(0..).collect();
        CompressedChain { states, rows, index }
    }

    pub fn index_of(&self, s: &ChainState) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn config_index(&self, state: StateId, counter: &Counter) -> Option<usize> {
        self.index_of(&ChainState::Config { state, counter: counter.clone() })
    }

    /// A state is absorbing iff its row is a probability-one self-loop.
    pub fn is_absorbing(&self, i: usize) -> bool {
        match self.rows[i].as_slice() {
            [(j, Entry::Exact(v))] => *j == i && v.is_one(),
            [(j, Entry::Approx { lo, .. })] => *j == i && *lo >= 1.0,
            _ => false,
        }
    }

    pub fn describe(&self, i: usize) -> String {
        match &self.states[i] {
            ChainState::Bot => "bot".to_string(),
            ChainState::Config { state, counter } => format!("state#{}@{}", state.0, counter),
        }
    }

    /// True when every entry is exact.
    pub fn is_rational(&self) -> bool {
        self.rows.iter().flatten().all(|(_, e)| matches!(e, Entry::Exact(_)))
    }
}

/// Retained counter values of one interval, ascending.
pub fn retained_values(iv: &Interval) -> Result<Vec<Counter>> {
    match &iv.hi {
        None => Ok(vec![iv.lo.clone()]),
        Some(hi) => {
            let beta = iv.beta().ok_or_else(|| {
                Error::Precondition(format!("interval {iv} does not have size 2^beta - 1"))
            })?;
            let mut vals = std::collections::BTreeSet::new();
            for alpha in 0..beta {
                let step = (Counter::one() << alpha) - 1u32;
                vals.insert(&iv.lo + &step);
                vals.insert(hi - &step);
            }
            Ok(vals.into_iter().collect())
        }
    }
}

/// The one or two successor counter values of each retained value.
pub fn successor_values(iv: &Interval) -> Result<Vec<(Counter, Vec<Counter>)>> {
    match &iv.hi {
        None => Ok(vec![(iv.lo.clone(), vec![&iv.lo - 1u32])]),
        Some(hi) => {
            let beta = iv.beta().ok_or_else(|| {
                Error::Precondition(format!("interval {iv} does not have size 2^beta - 1"))
            })?;
            let mut out = Vec::new();
            for alpha in 0..beta {
                let step = (Counter::one() << alpha) - 1u32;
                let next = (Counter::one() << (alpha + 1)) - 1u32;
                let low = &iv.lo + &step;
                out.push((low.clone(), vec![&iv.lo - 1u32, &iv.lo + &next]));
                let high = hi - &step;
                if high != low {
                    out.push((high, vec![hi + 1u32, hi - &next]));
                }
            }
            out.sort_by(|a, b| a.0.cmp(&b.0));
            Ok(out)
        }
    }
}

/// The full retained state set for a partition: `bot`, the absorbing
/// counter-0 (and counter-B) configurations, and the per-interval values.
pub fn retained_states(p: &IntervalPartition, m: &OcMdp, bound: &Bound) -> Result<Vec<ChainState>> {
    retained_states_n(p, m.n_states(), bound)
}

fn retained_states_n(p: &IntervalPartition, nq: usize, bound: &Bound) -> Result<Vec<ChainState>> {
    let mut states = vec![ChainState::Bot];
    for q in 0..nq {
        states.push(ChainState::Config { state: StateId(q), counter: Counter::zero() });
    }
    for iv in p.intervals() {
        for k in retained_values(iv)? {
            for q in 0..nq {
                states.push(ChainState::Config { state: StateId(q), counter: k.clone() });
            }
        }
    }
    if let Bound::Finite(b) = bound {
        if !b.is_zero() {
            for q in 0..nq {
                states.push(ChainState::Config { state: StateId(q), counter: b.clone() });
            }
        }
    }
    Ok(states)
}

/// How transition probabilities are represented.
pub enum CompressMode {
    /// Exact rationals; rejects unbounded intervals.
    Rational,
    /// Exact rationals for bounded intervals, `[lo, hi]` brackets for tails.
    Float(SolveConfig),
    /// Entries are variables of the given system.
    Symbolic(PolySystem),
}

/// One interval's folded one-step behaviour plus its positive-support
/// skeleton (`None` only for unconstrained symbolic strategies).
pub struct EngineInput {
    pub fold: DeltaFold,
    pub qual: Option<Qual>,
}

/// Result of a compression.
pub struct Compression {
    pub chain: CompressedChain,
    pub partition: IntervalPartition,
    /// The accumulated system in symbolic mode.
    pub sys: Option<PolySystem>,
    pub status: SolveStatus,
}

type ApproxStage = (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<bool>>);

enum IntervalTrans {
    BoundedExact { up: Vec<Vec<Vec<Rational>>>, down: Vec<Vec<Vec<Rational>>> },
    BoundedApprox { up: Vec<ApproxStage>, down: Vec<ApproxStage> },
    BoundedSym { up: Vec<Vec<Vec<VarId>>>, down: Vec<Vec<Vec<VarId>>> },
    TailApprox { lo: Vec<Vec<f64>>, hi: Vec<Vec<f64>>, pos: Vec<Vec<bool>> },
    TailSym { x: Vec<Vec<VarId>> },
}

/// Certified brackets for the first-descent probabilities of an unbounded
/// interval.
///
/// The least solution of the termination system is sandwiched between the
/// probability of terminating while staying below a ceiling `2^k` and the
/// same plus the mass that first escapes to the ceiling. Both come from the
/// doubling scheme's middle-slot matrices, which obey a matrix recursion:
/// given the previous stage's up/down matrices `U`, `D`, the next stage
/// solves `(I - UD - DU) X = U^2` (and `D^2` for the down family), with rows
/// the qualitative analysis proves zero masked out. The escape mass at least
/// halves per stage even on critical (driftless) walks, so the bracket
/// tightens geometrically where plain iteration crawls.
fn tail_bracket(
    fold: &DeltaFold,
    qual: &Qual,
    cfg: &SolveConfig,
) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<bool>>, SolveStatus)> {
    const MAX_STAGES: usize = 44;
    let n = fold.n;
    let pos_term = eqsys::termination_positivity(qual);
    let mut one_up = vec![vec![0.0; n]; n];
    let mut one_down = vec![vec![0.0; n]; n];
    let mut one_stay = vec![vec![0.0; n]; n];
    for (q, row) in fold.entries.iter().enumerate() {
        for (t, w, prob) in row {
            let v = match prob {
                FoldProb::Num(r) => solvers::rational_to_f64(r),
                FoldProb::Sym(_) => {
                    return Err(Error::Internal("numeric tail solve on a symbolic fold".to_string()))
                }
            };
            match w {
                Weight::Up => one_up[q][t.0] += v,
                Weight::Down => one_down[q][t.0] += v,
                Weight::Stay => one_stay[q][t.0] += v,
            }
        }
    }
    let staged = eqsys::staged_positivity(qual, MAX_STAGES);

    let identity_minus = |p: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        for q in 0..n {
            for t in 0..n {
                m[q][t] = if q == t { 1.0 - p[q][t] } else { -p[q][t] };
            }
        }
        m
    };
    let matmul = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; n]; n];
        for q in 0..n {
            for t in 0..n {
                let v = a[q][t];
                if v == 0.0 {
                    continue;
                }
                for p in 0..n {
                    out[q][p] += v * b[t][p];
                }
            }
        }
        out
    };

    let mut stage_u = masked_solve_columns(&identity_minus(&one_stay), &staged.up[0][1], &one_up)?;
    let mut stage_d =
        masked_solve_columns(&identity_minus(&one_stay), &staged.down[0][1], &one_down)?;
    let mut term = stage_d.clone();
    let mut climb = stage_u.clone();
    let mut status = SolveStatus::Capped { iterations: MAX_STAGES, residual: 1.0 };
    for alpha in 1..MAX_STAGES {
        let escape = climb
            .iter()
            .map(|row| row.iter().sum::<f64>())
            .fold(0.0f64, f64::max);
        if escape < cfg.eps {
            status = SolveStatus::Converged { eps: cfg.eps };
            break;
        }
        status = SolveStatus::Capped { iterations: alpha, residual: escape };
        let mut p_mat = matmul(&stage_u, &stage_d);
        let du = matmul(&stage_d, &stage_u);
        for q in 0..n {
            for t in 0..n {
                p_mat[q][t] += du[q][t];
            }
        }
        let m_mat = identity_minus(&p_mat);
        let next_u = masked_solve_columns(&m_mat, &staged.up[alpha][1], &matmul(&stage_u, &stage_u))?;
        let next_d =
            masked_solve_columns(&m_mat, &staged.down[alpha][1], &matmul(&stage_d, &stage_d))?;
        let drop = matmul(&climb, &next_d);
        for q in 0..n {
            for t in 0..n {
                term[q][t] += drop[q][t];
            }
        }
        climb = matmul(&climb, &next_u);
        stage_u = next_u;
        stage_d = next_d;
    }
    let escapes: Vec<f64> = climb.iter().map(|row| row.iter().sum::<f64>()).collect();

    // Optional Newton pass on the termination system itself: another sound
    // lower bound, occasionally tighter than the truncated ladder when the
    // ladder capped out.
    let newton_lo = if cfg.newton {
        let mut local = PolySystem::new();
        let block = local.push_termination_block(fold, "tail");
        for q in 0..n {
            for t in 0..n {
                if !pos_term[q][t] {
                    local.pin_zero(block.x[q][t]);
                }
            }
        }
        let val = solvers::lfp(&local, cfg)?;
        Some(
            (0..n)
                .map(|q| (0..n).map(|t| val.get_f64(block.x[q][t]).clamp(0.0, 1.0)).collect())
                .collect::<Vec<Vec<f64>>>(),
        )
    } else {
        None
    };

    let mut lo = vec![vec![0.0; n]; n];
    let mut hi = vec![vec![0.0; n]; n];
    for q in 0..n {
        for p in 0..n {
            if !pos_term[q][p] {
                continue;
            }
            let mut l = term[q][p].clamp(0.0, 1.0);
            if let Some(nl) = &newton_lo {
                l = l.max(nl[q][p]);
            }
            lo[q][p] = l;
            hi[q][p] = (l + escapes[q] + 1e-12).clamp(l, 1.0);
        }
    }
    Ok((lo, hi, pos_term, status))
}

/// Solve `A x = b` column by column, restricting each column's unknowns to
/// the rows its mask marks possibly-positive (the rest are exact zeros of
/// the least solution).
fn masked_solve_columns(
    a: &[Vec<f64>],
    mask: &[Vec<bool>],
    b: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>> {
    let n = a.len();
    let mut out = vec![vec![0.0; n]; n];
    for p in 0..n {
        let active: Vec<usize> = (0..n).filter(|q| mask[*q][p]).collect();
        if active.is_empty() {
            continue;
        }
        let g = active.len();
        let mut sub = vec![vec![0.0; g]; g];
        let mut rhs = vec![0.0; g];
        for (i, &q) in active.iter().enumerate() {
            rhs[i] = b[q][p];
            for (j, &t) in active.iter().enumerate() {
                sub[i][j] = a[q][t];
            }
        }
        let sol = gauss_small(sub, rhs).ok_or_else(|| {
            Error::Internal("singular stage system despite qualitative pinning".to_string())
        })?;
        for (i, &q) in active.iter().enumerate() {
            out[q][p] = sol[i].clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

fn gauss_small(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&r1, &r2| {
            a[r1][col].abs().partial_cmp(&a[r2][col].abs()).unwrap_or(std::cmp::Ordering::Equal)
        })?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        let pv = a[col][col];
        for x in a[col].iter_mut() {
            *x /= pv;
        }
        b[col] /= pv;
        for r in 0..n {
            if r == col || a[r][col] == 0.0 {
                continue;
            }
            let f = a[r][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    Some(b)
}

/// Compress from explicit per-interval one-step behaviours. `label_prefix`
/// namespaces the per-interval system variables so that nested compressions
/// can share one symbolic system without name clashes.
pub fn compress_engines(
    nq: usize,
    engines: Vec<EngineInput>,
    p: &IntervalPartition,
    bound: &Bound,
    mode: CompressMode,
    label_prefix: &str,
) -> Result<Compression> {
    if &p.covered_bound() != bound {
        return Err(Error::Precondition(format!(
            "partition covers [1,{}-1], bound is {bound}",
            p.covered_bound()
        )));
    }
    if engines.len() != p.len() {
        return Err(Error::Internal("one engine per interval required".to_string()));
    }
    let mut status = SolveStatus::Exact;
    let (mut sys, numeric_cfg) = match mode {
        CompressMode::Symbolic(s) => (Some(s), None),
        CompressMode::Float(cfg) => (None, Some(cfg)),
        CompressMode::Rational => (None, None),
    };
    let symbolic = sys.is_some();

    // Solve or emit each interval's transition system.
    let mut trans: Vec<IntervalTrans> = Vec::with_capacity(p.len());
    for (j, iv) in p.intervals().iter().enumerate() {
        let engine = &engines[j];
        let label = format!("{label_prefix}{j}");
        match (&iv.hi, symbolic) {
            (Some(_), false) => {
                let beta = iv.beta().ok_or_else(|| {
                    Error::Precondition(format!("interval {iv} does not have size 2^beta - 1"))
                })?;
                let qual = engine.qual.as_ref().ok_or_else(|| {
                    Error::Precondition("numeric compression needs support information".to_string())
                })?;
                let mut local = PolySystem::new();
                let block = local.push_bounded_block(&engine.fold, beta, &label);
                eqsys::refine_unique(&mut local, &block, qual);
                // Exact values square their denominators once per stage; in
                // float mode, wide intervals switch to f64 stage solves with
                // a symmetric error pad instead.
                const EXACT_STAGE_LIMIT: usize = 24;
                if numeric_cfg.is_some() && beta > EXACT_STAGE_LIMIT {
                    let fcfg = SolveConfig { mode: solvers::Mode::Float, ..SolveConfig::default() };
                    let sol = solvers::solve_linear(&local, &fcfg)?;
                    let pad = 1e-9;
                    let take = |vars: &Vec<Vec<VarId>>| -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<bool>>) {
                        let mut lo = vec![vec![0.0; nq]; nq];
                        let mut hi = vec![vec![0.0; nq]; nq];
                        let mut pos = vec![vec![false; nq]; nq];
                        for (q, row) in vars.iter().enumerate() {
                            for (t, v) in row.iter().enumerate() {
                                if local.is_pinned(*v) {
                                    continue;
                                }
                                let x = sol.get_f64(*v).clamp(0.0, 1.0);
                                lo[q][t] = (x - pad).max(0.0);
                                hi[q][t] = (x + pad).min(1.0);
                                pos[q][t] = true;
                            }
                        }
                        (lo, hi, pos)
                    };
                    let mut ups = Vec::with_capacity(beta);
                    let mut downs = Vec::with_capacity(beta);
                    for a in 0..beta {
                        ups.push(take(block.chain_up(a)));
                        downs.push(take(block.chain_down(a)));
                    }
                    status = status.join(SolveStatus::Converged { eps: pad });
                    trans.push(IntervalTrans::BoundedApprox { up: ups, down: downs });
                    continue;
                }
                let sol = solvers::solve_linear(&local, &SolveConfig::default())?;
                let take = |vars: &Vec<Vec<VarId>>| -> Vec<Vec<Rational>> {
                    vars.iter()
                        .map(|row| {
                            row.iter()
                                .map(|v| sol.get_rational(*v).cloned().unwrap_or_else(Rational::zero))
                                .collect()
                        })
                        .collect()
                };
                let up = (0..beta).map(|a| take(block.chain_up(a))).collect();
                let down = (0..beta).map(|a| take(block.chain_down(a))).collect();
                trans.push(IntervalTrans::BoundedExact { up, down });
            }
            (Some(_), true) => {
                let beta = iv.beta().ok_or_else(|| {
                    Error::Precondition(format!("interval {iv} does not have size 2^beta - 1"))
                })?;
                let s = sys.as_mut().unwrap();
                let block = s.push_bounded_block(&engine.fold, beta, &label);
                if let Some(qual) = &engine.qual {
                    eqsys::refine_unique(s, &block, qual);
                }
                let up = (0..beta).map(|a| block.chain_up(a).clone()).collect();
                let down = (0..beta).map(|a| block.chain_down(a).clone()).collect();
                trans.push(IntervalTrans::BoundedSym { up, down });
            }
            (None, false) => {
                let cfg = numeric_cfg.as_ref().ok_or_else(|| {
                    Error::Unsupported(
                        "unbounded intervals need the float or symbolic mode".to_string(),
                    )
                })?;
                let qual = engine.qual.as_ref().ok_or_else(|| {
                    Error::Precondition("numeric compression needs support information".to_string())
                })?;
                let (lo, hi, pos, tail_status) = tail_bracket(&engine.fold, qual, cfg)?;
                status = status.join(tail_status);
                trans.push(IntervalTrans::TailApprox { lo, hi, pos });
            }
            (None, true) => {
                let s = sys.as_mut().unwrap();
                let block = s.push_termination_block(&engine.fold, &label);
                if let Some(qual) = &engine.qual {
                    let pos = eqsys::termination_positivity(qual);
                    for q in 0..nq {
                        for t in 0..nq {
                            if !pos[q][t] {
                                s.pin_zero(block.x[q][t]);
                            }
                        }
                    }
                }
                trans.push(IntervalTrans::TailSym { x: block.x });
            }
        }
    }

    let states = retained_states_n(p, nq, bound)?;
    let chain = assemble_chain(nq, states, p, &trans, sys.as_ref())?;
    Ok(Compression { chain, partition: p.clone(), sys, status })
}

fn assemble_chain(
    nq: usize,
    states: Vec<ChainState>,
    p: &IntervalPartition,
    trans: &[IntervalTrans],
    sys: Option<&PolySystem>,
) -> Result<CompressedChain> {
    let index: HashMap<ChainState, usize> = states.iter().cloned().zip(0..).collect();
    let at = |q: usize, k: &Counter| -> Result<usize> {
        index
            .get(&ChainState::Config { state: StateId(q), counter: k.clone() })
            .copied()
            .ok_or_else(|| Error::Internal(format!("missing retained configuration state#{q}@{k}")))
    };
    let mut rows: Vec<Vec<(usize, Entry)>> = vec![Vec::new(); states.len()];
    // Absorbing states: self-loops everywhere first; interval rows overwrite.
    for (i, _) in states.iter().enumerate() {
        rows[i] = vec![(i, Entry::Exact(Rational::one()))];
    }

    for (j, iv) in p.intervals().iter().enumerate() {
        match (&iv.hi, &trans[j]) {
            (None, IntervalTrans::TailApprox { lo, hi, pos }) => {
                let down = &iv.lo - 1u32;
                for q in 0..nq {
                    let mut row = Vec::new();
                    let mut sum_lo = 0.0;
                    let mut sum_hi = 0.0;
                    for t in 0..nq {
                        if !pos[q][t] {
                            continue;
                        }
                        row.push((at(t, &down)?, Entry::Approx { lo: lo[q][t], hi: hi[q][t] }));
                        sum_lo += lo[q][t];
                        sum_hi += hi[q][t];
                    }
                    let bot_lo = (1.0 - sum_hi).max(0.0);
                    let bot_hi = (1.0 - sum_lo).clamp(0.0, 1.0);
                    if bot_hi > 0.0 {
                        row.push((0, Entry::Approx { lo: bot_lo, hi: bot_hi }));
                    }
                    rows[at(q, &iv.lo)?] = row;
                }
            }
            (None, IntervalTrans::TailSym { x }) => {
                let sys = sys.expect("symbolic mode carries a system");
                let down = &iv.lo - 1u32;
                for q in 0..nq {
                    let mut row = Vec::new();
                    for t in 0..nq {
                        if sys.is_pinned(x[q][t]) {
                            continue;
                        }
                        row.push((at(t, &down)?, Entry::Symbolic(x[q][t])));
                    }
                    rows[at(q, &iv.lo)?] = row;
                }
            }
            (Some(hi_val), tr) => {
                let beta = iv.beta().expect("checked above");
                for alpha in 0..beta {
                    let step = (Counter::one() << alpha) - 1u32;
                    let next = (Counter::one() << (alpha + 1)) - 1u32;
                    let low_at = &iv.lo + &step;
                    let high_at = hi_val - &step;
                    // (source value, up-move target, down-move target); "up"
                    // moves a family away from the bound it entered through.
                    let mut fams: Vec<(Counter, Counter, Counter)> =
                        vec![(low_at.clone(), &iv.lo + &next, &iv.lo - 1u32)];
                    if high_at != low_at {
                        fams.push((high_at, hi_val + 1u32, hi_val - &next));
                    }
                    for (from, up_target, down_target) in fams {
                        for q in 0..nq {
                            let mut row: Vec<(usize, Entry)> = Vec::new();
                            match tr {
                                IntervalTrans::BoundedExact { up, down } => {
                                    let mut sum = Rational::zero();
                                    for t in 0..nq {
                                        let u = &up[alpha][q][t];
                                        if u.is_positive() {
                                            row.push((at(t, &up_target)?, Entry::Exact(u.clone())));
                                            sum += u;
                                        }
                                        let d = &down[alpha][q][t];
                                        if d.is_positive() {
                                            row.push((at(t, &down_target)?, Entry::Exact(d.clone())));
                                            sum += d;
                                        }
                                    }
                                    let rest = Rational::one() - sum;
                                    if rest.is_negative() {
                                        return Err(Error::Internal(format!(
                                            "row of state#{q}@{from} exceeds probability one"
                                        )));
                                    }
                                    if rest.is_positive() {
                                        row.push((0, Entry::Exact(rest)));
                                    }
                                }
                                IntervalTrans::BoundedApprox { up, down } => {
                                    let (ulo, uhi, upos) = &up[alpha];
                                    let (dlo, dhi, dpos) = &down[alpha];
                                    let mut sum_lo = 0.0;
                                    let mut sum_hi = 0.0;
                                    for t in 0..nq {
                                        if upos[q][t] {
                                            row.push((
                                                at(t, &up_target)?,
                                                Entry::Approx { lo: ulo[q][t], hi: uhi[q][t] },
                                            ));
                                            sum_lo += ulo[q][t];
                                            sum_hi += uhi[q][t];
                                        }
                                        if dpos[q][t] {
                                            row.push((
                                                at(t, &down_target)?,
                                                Entry::Approx { lo: dlo[q][t], hi: dhi[q][t] },
                                            ));
                                            sum_lo += dlo[q][t];
                                            sum_hi += dhi[q][t];
                                        }
                                    }
                                    let bot_lo = (1.0 - sum_hi).max(0.0);
                                    let bot_hi = (1.0 - sum_lo).clamp(0.0, 1.0);
                                    if bot_hi > 0.0 {
                                        row.push((0, Entry::Approx { lo: bot_lo, hi: bot_hi }));
                                    }
                                }
                                IntervalTrans::BoundedSym { up, down } => {
                                    let sys = sys.expect("symbolic mode carries a system");
                                    for t in 0..nq {
                                        let u = up[alpha][q][t];
                                        if !sys.is_pinned(u) {
                                            row.push((at(t, &up_target)?, Entry::Symbolic(u)));
                                        }
                                        let d = down[alpha][q][t];
                                        if !sys.is_pinned(d) {
                                            row.push((at(t, &down_target)?, Entry::Symbolic(d)));
                                        }
                                    }
                                }
                                _ => return Err(Error::Internal("interval kind mismatch".to_string())),
                            }
                            rows[at(q, &from)?] = row;
                        }
                    }
                }
            }
            _ => return Err(Error::Internal("interval kind mismatch".to_string())),
        }
    }

    Ok(CompressedChain::new(states, rows))
}

/// How the strategy enters the compression.
pub enum StratSpec<'a> {
    /// A concrete strategy; probabilities are folded to rational constants.
    Concrete(&'a IntervalStrategy),
    /// Fresh strategy variables per state-interval pair, unconstrained.
    SymbolicFree,
    /// Strategy variables restricted to the given supports; systems are
    /// pinned to their unique-solution form.
    SymbolicSupport(&'a SupportAssignment),
}

/// Strategy variables created by a symbolic compression:
/// `[interval][state] -> (action, variable)`.
pub type StrategyVars = Vec<Vec<Vec<(ActionId, VarId)>>>;

pub struct StrategyCompression {
    pub comp: Compression,
    pub zvars: Option<StrategyVars>,
}

/// Compress the chain induced by a strategy on the model.
///
/// The partition must already be refined (and, when a specific initial
/// configuration matters, isolated); see [`crate::partitions::prepare`].
pub fn compress(
    m: &OcMdp,
    strat: StratSpec,
    p: &IntervalPartition,
    bound: &Bound,
    mode: CompressMode,
) -> Result<StrategyCompression> {
    for iv in p.intervals() {
        if iv.is_bounded() && iv.beta().is_none() {
            return Err(Error::Precondition(format!(
                "interval {iv} violates the size assumption; refine the partition first"
            )));
        }
    }
    if let StratSpec::Concrete(s) = &strat {
        if !s.is_based_on(p) {
            return Err(Error::Domain(
                "strategy is not based on the compression partition".to_string(),
            ));
        }
    }
    let nq = m.n_states();
    let mut mode = mode;
    let mut zvars: Option<StrategyVars> = None;
    let mut engines = Vec::with_capacity(p.len());
    for (j, iv) in p.intervals().iter().enumerate() {
        match &strat {
            StratSpec::Concrete(s) => {
                let rows: Vec<crate::strategies::ActionDist> =
                    m.states().map(|q| s.lookup(q, &iv.lo)).collect::<Result<_>>()?;
                let fold = fold_concrete(m, &rows)?;
                // Keep the symbolic emission faithful to the plain equation
                // systems: pins are only for the numeric solvers.
                let qual = match mode {
                    CompressMode::Symbolic(_) => None,
                    _ => Some(fold.qual()),
                };
                engines.push(EngineInput { fold, qual });
            }
            StratSpec::SymbolicFree | StratSpec::SymbolicSupport(_) => {
                let sys = match &mut mode {
                    CompressMode::Symbolic(sys) => sys,
                    _ => {
                        return Err(Error::Precondition(
                            "symbolic strategies need the symbolic mode".to_string(),
                        ))
                    }
                };
                let supports = match &strat {
                    StratSpec::SymbolicSupport(sa) => Some(&sa.rows[j]),
                    _ => None,
                };
                let mut zrow: Vec<Vec<(ActionId, VarId)>> = Vec::with_capacity(nq);
                for q in m.states() {
                    let mut per_state = Vec::new();
                    for r in m.enabled(q) {
                        let include = supports.map_or(true, |sup| sup[q.0].contains(&r.action));
                        if include {
                            let v = sys.add_var(
                                format!("zI{j}_q{}_a{}", q.0, r.action.0),
                                VarRole::Strategy { state: q, action: r.action },
                            );
                            per_state.push((r.action, v));
                        }
                    }
                    per_state.sort_by_key(|(a, _)| *a);
                    zrow.push(per_state);
                }
                let fold = fold_symbolic(m, &zrow);
                let qual = supports.map(|sup| qual_of_supports(m, sup));
                zvars.get_or_insert_with(Vec::new).push(zrow);
                engines.push(EngineInput { fold, qual });
            }
        }
    }
    let comp = compress_engines(nq, engines, p, bound, mode, "I")?;
    Ok(StrategyCompression { comp, zvars })
}

/// Compress a one-counter Markov chain over a refined partition. The chain's
/// one-step behaviour is counter-independent, so a single fold serves every
/// interval.
pub fn compress_ocmc(
    c: &OneCounterChain,
    k_part: &IntervalPartition,
    mode: CompressMode,
) -> Result<Compression> {
    let fold = fold_chain(c);
    let qual = fold.qual();
    let numeric = !matches!(mode, CompressMode::Symbolic(_));
    let engines: Vec<EngineInput> = (0..k_part.len())
        .map(|_| EngineInput { fold: fold.clone(), qual: numeric.then(|| qual.clone()) })
        .collect();
    compress_engines(c.n_states(), engines, k_part, &k_part.covered_bound(), mode, "K")
}

/// Symbolic variant of [`compress_ocmc`] for chains whose entries are
/// variables of an enclosing system.
pub fn compress_ocmc_sym(
    cis: &CisChain,
    k_part: &IntervalPartition,
    sys: PolySystem,
) -> Result<Compression> {
    let entries: Vec<Vec<(StateId, Weight, FoldProb)>> = cis
        .rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|(j, w, e)| {
                    let prob = match e {
                        Entry::Exact(v) => FoldProb::Num(v.clone()),
                        Entry::Symbolic(v) => FoldProb::Sym(vec![(*v, Rational::one())]),
                        Entry::Approx { .. } => FoldProb::Num(Rational::zero()),
                    };
                    (StateId(*j), *w, prob)
                })
                .collect()
        })
        .collect();
    let fold = DeltaFold { n: cis.states.len(), entries };
    let engines: Vec<EngineInput> =
        (0..k_part.len()).map(|_| EngineInput { fold: fold.clone(), qual: None }).collect();
    compress_engines(
        cis.states.len(),
        engines,
        k_part,
        &k_part.covered_bound(),
        CompressMode::Symbolic(sys),
        "K",
    )
}

/// The one-counter chain whose induced chain is the compression of a cyclic
/// strategy: window configurations with weights recording period crossings.
pub struct CisChain {
    /// Index 0 is `bot`; the rest are window configurations `(q, k)`,
    /// `k` in `[1, period]`.
    pub states: Vec<ChainState>,
    pub rows: Vec<Vec<(usize, Weight, Entry)>>,
    pub sys: Option<PolySystem>,
    pub zvars: Option<StrategyVars>,
    pub status: SolveStatus,
}

impl CisChain {
    pub fn index_of(&self, s: &ChainState) -> Option<usize> {
        self.states.iter().position(|t| t == s)
    }

    /// View as a plain numeric one-counter chain; fails on symbolic entries.
    pub fn to_numeric(&self) -> Result<OneCounterChain> {
        let state_names = self
            .states
            .iter()
            .map(|s| match s {
                ChainState::Bot => "bot".to_string(),
                ChainState::Config { state, counter } => format!("s{}@{}", state.0, counter),
            })
            .collect();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .map(|(j, w, e)| match e {
                        Entry::Exact(v) => Ok((StateId(*j), *w, v.clone())),
                        _ => Err(Error::Precondition(
                            "symbolic or bracketed entries cannot form a numeric chain".to_string(),
                        )),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(OneCounterChain { state_names, rows })
    }
}

/// Build the one-counter chain inducing the compression of a cyclic strategy.
///
/// The window partition must be refined and cover `[1, period]`. Counter
/// moves below 1 re-enter the window at the period with weight -1; moves
/// above the period re-enter at 1 with weight +1; everything else, including
/// all mass into `bot`, has weight 0.
pub fn cis_to_ocmc(
    m: &OcMdp,
    s: &IntervalStrategy,
    window: &IntervalPartition,
    mode: CompressMode,
) -> Result<CisChain> {
    let StrategyBaseView::Cis(period) = strategy_base_view(s) else {
        return Err(Error::Domain("cyclic strategy required".to_string()));
    };
    cis_to_ocmc_spec(m, StratSpec::Concrete(s), &period, window, mode)
}

/// Like [`cis_to_ocmc`] but the strategy may be symbolic; the period is then
/// supplied by the caller.
pub fn cis_to_ocmc_spec(
    m: &OcMdp,
    strat: StratSpec,
    period: &Counter,
    window: &IntervalPartition,
    mode: CompressMode,
) -> Result<CisChain> {
    if let StratSpec::Concrete(s) = &strat {
        let StrategyBaseView::Cis(p) = strategy_base_view(s) else {
            return Err(Error::Domain("cyclic strategy required".to_string()));
        };
        if &p != period {
            return Err(Error::Domain("period mismatch".to_string()));
        }
    }
    let period = period.clone();
    let window_bound = Bound::Finite(&period + 1u32);
    if window.covered_bound() != window_bound {
        return Err(Error::Domain(format!(
            "window covers [1,{}-1] but the period is {period}",
            window.covered_bound()
        )));
    }
    let compressed = compress(m, strat, window, &window_bound, mode)?;
    let inner = compressed.comp.chain;

    // P_J: bot plus the retained window configurations.
    let mut states = vec![ChainState::Bot];
    for st in &inner.states {
        if let ChainState::Config { counter, .. } = st {
            if !counter.is_zero() && counter <= &period {
                states.push(st.clone());
            }
        }
    }
    let index_of = |s: &ChainState| states.iter().position(|t| t == s);
    let mut rows: Vec<Vec<(usize, Weight, Entry)>> =
        vec![vec![(0, Weight::Stay, Entry::Exact(Rational::one()))]];
    for st in states.iter().skip(1) {
        let ii = inner.index_of(st).ok_or_else(|| Error::Internal("missing window state".to_string()))?;
        let mut row = Vec::new();
        for (j, e) in &inner.rows[ii] {
            let (target, weight) = match &inner.states[*j] {
                ChainState::Bot => (ChainState::Bot, Weight::Stay),
                ChainState::Config { state, counter } if counter.is_zero() => (
                    ChainState::Config { state: *state, counter: period.clone() },
                    Weight::Down,
                ),
                ChainState::Config { state, counter } if *counter == &period + 1u32 => (
                    ChainState::Config { state: *state, counter: Counter::one() },
                    Weight::Up,
                ),
                other => (other.clone(), Weight::Stay),
            };
            let ti = index_of(&target)
                .ok_or_else(|| Error::Internal("window successor not retained".to_string()))?;
            row.push((ti, weight, e.clone()));
        }
        rows.push(row);
    }
    Ok(CisChain {
        states,
        rows,
        sys: compressed.comp.sys,
        zvars: compressed.zvars,
        status: compressed.comp.status,
    })
}

enum StrategyBaseView {
    Oeis,
    Cis(Counter),
}

fn strategy_base_view(s: &IntervalStrategy) -> StrategyBaseView {
    match &s.base {
        crate::strategies::StrategyBase::Oeis { .. } => StrategyBaseView::Oeis,
        crate::strategies::StrategyBase::Cis(pp) => StrategyBaseView::Cis(pp.period.clone()),
    }
}
