//! Monotone polynomial equation systems over `[0,1]` variables.
//!
//! Three system shapes are built here, all sharing one folding helper so the
//! one-step distributions cannot drift apart:
//!
//! * the termination system of a one-counter chain (quadratic, one variable
//!   per ordered state pair), characterising first-descent probabilities from
//!   the minimum of an unbounded interval;
//! * the doubling-scheme system of a bounded interval of size `2^beta - 1`
//!   (quadratic as a whole, but linear stage by stage in `alpha`);
//! * linear reachability systems over finite chains.
//!
//! Systems may carry *parameter* variables (strategy probabilities, or
//! transition variables of an inner compression) as coefficients; the
//! variable degree proper stays at most two, as in the underlying
//! constructions.

use std::collections::BTreeSet;

use num_traits::{One, Zero};

use crate::compression::{CompressedChain, Entry};
use crate::error::{Error, Result};
use crate::model::{ActionId, OcMdp, OneCounterChain, StateId, Weight};
use crate::partitions::Interval;
use crate::strategies::ActionDist;
use crate::Rational;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Dir {
    Up,
    Down,
}

/// Counter offset of a doubling-stage variable: `2^(a-1)`, `2^a` or
/// `3*2^(a-1)` above the interval floor. Stage 0 only uses `Mid` (value 1).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Slot {
    Low,
    Mid,
    High,
}

impl Slot {
    pub const ALL: [Slot; 3] = [Slot::Low, Slot::Mid, Slot::High];

    fn tag(self) -> &'static str {
        match self {
            Slot::Low => "lo",
            Slot::Mid => "mi",
            Slot::High => "hi",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VarRole {
    /// First descent below an unbounded interval's floor, ending in `to`.
    Termination { from: StateId, to: StateId },
    /// Doubling-scheme variable of a bounded interval.
    Bounded { dir: Dir, alpha: usize, slot: Slot, from: StateId, to: StateId },
    /// Reachability value of a chain state.
    Reach { chain_state: usize },
    /// Strategy probability; a parameter without a defining equation.
    Strategy { state: StateId, action: ActionId },
}

#[derive(Debug, Clone)]
pub struct VarInfo {
    pub name: String,
    pub role: VarRole,
}

/// `coef * prod(vars)`; at most three factors, of which at most one is a
/// parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub coef: Rational,
    pub vars: Vec<VarId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    pub terms: Vec<Term>,
}

impl Polynomial {
    fn push(&mut self, coef: Rational, vars: Vec<VarId>) {
        if coef.is_zero() {
            return;
        }
        debug_assert!(vars.len() <= 3);
        self.terms.push(Term { coef, vars });
    }
}

/// An equation system `x_v = P_v(x)` plus zero pins and optional staged
/// linear structure.
#[derive(Debug, Clone, Default)]
pub struct PolySystem {
    vars: Vec<VarInfo>,
    eqs: Vec<Option<Polynomial>>,
    zero_pins: BTreeSet<usize>,
    /// Stage list; each stage is a list of variable groups whose equations
    /// are linear in the group given all earlier stages.
    stages: Vec<Vec<Vec<VarId>>>,
}

impl PolySystem {
    pub fn new() -> PolySystem {
        PolySystem::default()
    }

    pub fn n_vars(&self) -> usize {
        self.vars.len()
    }

    /// Number of variables that carry a defining equation.
    pub fn n_equations(&self) -> usize {
        self.eqs.iter().filter(|e| e.is_some()).count()
    }

    pub fn var(&self, v: VarId) -> &VarInfo {
        &self.vars[v.0]
    }

    pub fn vars(&self) -> impl Iterator<Item = (VarId, &VarInfo)> {
        self.vars.iter().enumerate().map(|(i, v)| (VarId(i), v))
    }

    pub fn equation(&self, v: VarId) -> Option<&Polynomial> {
        self.eqs[v.0].as_ref()
    }

    pub fn is_param(&self, v: VarId) -> bool {
        self.eqs[v.0].is_none() && !self.zero_pins.contains(&v.0)
    }

    pub fn is_pinned(&self, v: VarId) -> bool {
        self.zero_pins.contains(&v.0)
    }

    pub fn pins(&self) -> impl Iterator<Item = VarId> + '_ {
        self.zero_pins.iter().map(|i| VarId(*i))
    }

    pub fn stages(&self) -> &[Vec<Vec<VarId>>] {
        &self.stages
    }

    pub fn add_var(&mut self, name: String, role: VarRole) -> VarId {
        self.vars.push(VarInfo { name, role });
        self.eqs.push(None);
        VarId(self.vars.len() - 1)
    }

    pub fn set_equation(&mut self, v: VarId, p: Polynomial) {
        self.eqs[v.0] = Some(p);
    }

    /// Constrain a variable to zero. Its equation (if any) is dropped; the
    /// pin records that the least solution is zero at this coordinate.
    pub fn pin_zero(&mut self, v: VarId) {
        self.zero_pins.insert(v.0);
        self.eqs[v.0] = None;
    }

    fn push_stage(&mut self, groups: Vec<Vec<VarId>>) {
        self.stages.push(groups);
    }

    /// One line per equation in a plain polynomial grammar, pins last.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for (v, info) in self.vars() {
            if self.is_pinned(v) {
                continue;
            }
            let Some(p) = self.equation(v) else { continue };
            let mut terms: Vec<String> = Vec::new();
            for t in &p.terms {
                let mut factors: Vec<String> = Vec::new();
                if !t.coef.is_one() || t.vars.is_empty() {
                    factors.push(t.coef.to_string());
                }
                factors.extend(t.vars.iter().map(|u| self.vars[u.0].name.clone()));
                terms.push(factors.join("*"));
            }
            let rhs = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
            out.push_str(&format!("{} = {rhs}\n", info.name));
        }
        for v in self.pins() {
            out.push_str(&format!("{} = 0\n", self.vars[v.0].name));
        }
        out
    }

    /// Evaluate the right-hand side of `v` under `x` (pinned vars read 0).
    pub fn eval_var(&self, v: VarId, x: &[f64]) -> f64 {
        match &self.eqs[v.0] {
            None => x[v.0],
            Some(p) => p
                .terms
                .iter()
                .map(|t| {
                    let mut acc = crate::solvers::rational_to_f64(&t.coef);
                    for u in &t.vars {
                        acc *= x[u.0];
                    }
                    acc
                })
                .sum(),
        }
    }
}

/// One-step folded behaviour of a state set: successor, weight, probability.
///
/// Probabilities are either rational constants or linear combinations of
/// parameter variables (strategy probabilities, inner transition variables).
#[derive(Debug, Clone)]
pub struct DeltaFold {
    pub n: usize,
    pub entries: Vec<Vec<(StateId, Weight, FoldProb)>>,
}

#[derive(Debug, Clone)]
pub enum FoldProb {
    Num(Rational),
    /// `sum_i c_i * param_i`.
    Sym(Vec<(VarId, Rational)>),
}

/// Fold a concrete per-state action distribution against the model:
/// `delta(q)(p, u) = sum over actions of weight u of row(q)(a) * delta(q,a)(p)`.
pub fn fold_concrete(m: &OcMdp, rows: &[ActionDist]) -> Result<DeltaFold> {
    let mut entries = Vec::with_capacity(m.n_states());
    for q in m.states() {
        let mut acc: std::collections::BTreeMap<(StateId, Weight), Rational> = Default::default();
        for (a, pa) in &rows[q.0] {
            if pa.is_zero() {
                continue;
            }
            let row = m.row(q, *a).ok_or_else(|| {
                Error::Domain(format!("action {} not enabled in {}", m.action_name(*a), m.state_name(q)))
            })?;
            for (p, pr) in &row.succ {
                *acc.entry((*p, row.weight)).or_insert_with(Rational::zero) += pa * pr;
            }
        }
        entries.push(
            acc.into_iter()
                .filter(|(_, v)| !v.is_zero())
                .map(|((p, w), v)| (p, w, FoldProb::Num(v)))
                .collect(),
        );
    }
    Ok(DeltaFold { n: m.n_states(), entries })
}

/// Fold with symbolic strategy probabilities `z[q] = [(action, var)]`.
pub fn fold_symbolic(m: &OcMdp, zvars: &[Vec<(ActionId, VarId)>]) -> DeltaFold {
    let mut entries = Vec::with_capacity(m.n_states());
    for q in m.states() {
        let mut acc: std::collections::BTreeMap<(StateId, Weight), Vec<(VarId, Rational)>> =
            Default::default();
        for (a, z) in &zvars[q.0] {
            let row = m.row(q, *a).expect("symbolic fold uses enabled actions");
            for (p, pr) in &row.succ {
                if pr.is_zero() {
                    continue;
                }
                acc.entry((*p, row.weight)).or_default().push((*z, pr.clone()));
            }
        }
        entries.push(acc.into_iter().map(|((p, w), v)| (p, w, FoldProb::Sym(v))).collect());
    }
    DeltaFold { n: m.n_states(), entries }
}

/// View a one-counter chain as an (already folded) one-step behaviour.
pub fn fold_chain(c: &OneCounterChain) -> DeltaFold {
    DeltaFold {
        n: c.n_states(),
        entries: c
            .rows
            .iter()
            .map(|row| {
                row.iter()
                    .filter(|(_, _, p)| !p.is_zero())
                    .map(|(p, w, pr)| (*p, *w, FoldProb::Num(pr.clone())))
                    .collect()
            })
            .collect(),
    }
}

/// Qualitative one-step structure: which `(successor, weight)` pairs can have
/// positive probability.
pub type Qual = Vec<Vec<(StateId, Weight)>>;

impl DeltaFold {
    /// Positive-support skeleton. For symbolic entries the parameters are
    /// assumed positive (valid for support-constrained strategies).
    pub fn qual(&self) -> Qual {
        self.entries
            .iter()
            .map(|row| {
                let mut out: Vec<(StateId, Weight)> = row
                    .iter()
                    .filter(|(_, _, p)| match p {
                        FoldProb::Num(v) => !v.is_zero(),
                        FoldProb::Sym(v) => !v.is_empty(),
                    })
                    .map(|(p, w, _)| (*p, *w))
                    .collect();
                out.sort();
                out.dedup();
                out
            })
            .collect()
    }
}

/// Positive-support skeleton of a support assignment block.
pub fn qual_of_supports(m: &OcMdp, supports: &[Vec<ActionId>]) -> Qual {
    m.states()
        .map(|q| {
            let mut out = Vec::new();
            for a in &supports[q.0] {
                if let Some(row) = m.row(q, *a) {
                    for (p, pr) in &row.succ {
                        if !pr.is_zero() {
                            out.push((*p, row.weight));
                        }
                    }
                }
            }
            out.sort();
            out.dedup();
            out
        })
        .collect()
}

fn add_terms(poly: &mut Polynomial, prob: &FoldProb, extra: &[VarId]) {
    match prob {
        FoldProb::Num(c) => poly.push(c.clone(), extra.to_vec()),
        FoldProb::Sym(parts) => {
            for (z, c) in parts {
                let mut vars = Vec::with_capacity(extra.len() + 1);
                vars.push(*z);
                vars.extend_from_slice(extra);
                poly.push(c.clone(), vars);
            }
        }
    }
}

/// Handle onto a termination block: `x[q][p]`.
#[derive(Debug, Clone)]
pub struct TermBlock {
    pub x: Vec<Vec<VarId>>,
}

/// Handle onto a bounded doubling block: `up/down[alpha][slot][q][p]`.
/// Stage 0 populates only the `Mid` slot (the other slots alias it).
#[derive(Debug, Clone)]
pub struct BoundedBlock {
    pub beta: usize,
    pub up: Vec<[Vec<Vec<VarId>>; 3]>,
    pub down: Vec<[Vec<Vec<VarId>>; 3]>,
}

impl BoundedBlock {
    fn slot(&self, dir: Dir, alpha: usize, slot: Slot) -> &Vec<Vec<VarId>> {
        let table = match dir {
            Dir::Up => &self.up,
            Dir::Down => &self.down,
        };
        let si = match slot {
            Slot::Low => 0,
            Slot::Mid => 1,
            Slot::High => 2,
        };
        &table[alpha][si]
    }

    /// The chain-facing transition variables at stage `alpha` (the middle
    /// slot: counter offset `2^alpha` above the floor).
    pub fn chain_up(&self, alpha: usize) -> &Vec<Vec<VarId>> {
        self.slot(Dir::Up, alpha, Slot::Mid)
    }

    pub fn chain_down(&self, alpha: usize) -> &Vec<Vec<VarId>> {
        self.slot(Dir::Down, alpha, Slot::Mid)
    }
}

impl PolySystem {
    /// Termination system of one unbounded interval: variables `x[q][p]`
    /// whose least solution is the probability of first descending below the
    /// interval floor in state `p`, starting from `q` at the floor.
    pub fn push_termination_block(&mut self, fold: &DeltaFold, label: &str) -> TermBlock {
        let n = fold.n;
        let x: Vec<Vec<VarId>> = (0..n)
            .map(|q| {
                (0..n)
                    .map(|p| {
                        self.add_var(
                            format!("x{label}_t_q{q}_q{p}"),
                            VarRole::Termination { from: StateId(q), to: StateId(p) },
                        )
                    })
                    .collect()
            })
            .collect();
        for q in 0..n {
            for p in 0..n {
                let mut poly = Polynomial::default();
                for (t, w, prob) in &fold.entries[q] {
                    match w {
                        Weight::Down => {
                            if t.0 == p {
                                add_terms(&mut poly, prob, &[]);
                            }
                        }
                        Weight::Stay => add_terms(&mut poly, prob, &[x[t.0][p]]),
                        Weight::Up => {
                            for mid in 0..n {
                                add_terms(&mut poly, prob, &[x[t.0][mid], x[mid][p]]);
                            }
                        }
                    }
                }
                self.set_equation(x[q][p], poly);
            }
        }
        TermBlock { x }
    }

    /// Doubling-scheme system of a bounded interval of size `2^beta - 1`.
    ///
    /// Stage 0 is linear in the one-step fold; each later stage is linear
    /// given the previous stage's middle-slot values, which is what the
    /// staged solver exploits.
    pub fn push_bounded_block(&mut self, fold: &DeltaFold, beta: usize, label: &str) -> BoundedBlock {
        assert!(beta >= 1);
        let n = fold.n;
        let mut up: Vec<[Vec<Vec<VarId>>; 3]> = Vec::with_capacity(beta);
        let mut down: Vec<[Vec<Vec<VarId>>; 3]> = Vec::with_capacity(beta);
        let mut stage_groups: Vec<Vec<Vec<VarId>>> = Vec::with_capacity(beta);

        // Stage 0.
        {
            let mk = |sys: &mut PolySystem, dir: Dir| -> Vec<Vec<VarId>> {
                let d = if dir == Dir::Up { "u" } else { "d" };
                (0..n)
                    .map(|q| {
                        (0..n)
                            .map(|p| {
                                sys.add_var(
                                    format!("x{label}_{d}0_mi_q{q}_q{p}"),
                                    VarRole::Bounded {
                                        dir,
                                        alpha: 0,
                                        slot: Slot::Mid,
                                        from: StateId(q),
                                        to: StateId(p),
                                    },
                                )
                            })
                            .collect()
                    })
                    .collect()
            };
            let u0 = mk(self, Dir::Up);
            let d0 = mk(self, Dir::Down);
            for q in 0..n {
                for p in 0..n {
                    let mut pu = Polynomial::default();
                    let mut pd = Polynomial::default();
                    for (t, w, prob) in &fold.entries[q] {
                        match w {
                            Weight::Up => {
                                if t.0 == p {
                                    add_terms(&mut pu, prob, &[]);
                                }
                            }
                            Weight::Down => {
                                if t.0 == p {
                                    add_terms(&mut pd, prob, &[]);
                                }
                            }
                            Weight::Stay => {
                                add_terms(&mut pu, prob, &[u0[t.0][p]]);
                                add_terms(&mut pd, prob, &[d0[t.0][p]]);
                            }
                        }
                    }
                    self.set_equation(u0[q][p], pu);
                    self.set_equation(d0[q][p], pd);
                }
            }
            let mut groups = Vec::with_capacity(2 * n);
            for p in 0..n {
                groups.push((0..n).map(|q| u0[q][p]).collect());
                groups.push((0..n).map(|q| d0[q][p]).collect());
            }
            stage_groups.push(groups);
            up.push([u0.clone(), u0.clone(), u0]);
            down.push([d0.clone(), d0.clone(), d0]);
        }

        // Stages alpha >= 1: counter jumps double, previous middle slot acts
        // as the one-step behaviour.
        for alpha in 1..beta {
            let mk = |sys: &mut PolySystem, dir: Dir, slot: Slot| -> Vec<Vec<VarId>> {
                let d = if dir == Dir::Up { "u" } else { "d" };
                (0..n)
                    .map(|q| {
                        (0..n)
                            .map(|p| {
                                sys.add_var(
                                    format!("x{label}_{d}{alpha}_{}_q{q}_q{p}", slot.tag()),
                                    VarRole::Bounded { dir, alpha, slot, from: StateId(q), to: StateId(p) },
                                )
                            })
                            .collect()
                    })
                    .collect()
            };
            let ulo = mk(self, Dir::Up, Slot::Low);
            let umi = mk(self, Dir::Up, Slot::Mid);
            let uhi = mk(self, Dir::Up, Slot::High);
            let dlo = mk(self, Dir::Down, Slot::Low);
            let dmi = mk(self, Dir::Down, Slot::Mid);
            let dhi = mk(self, Dir::Down, Slot::High);
            let pu = &up[alpha - 1][1];
            let pd = &down[alpha - 1][1];
            for q in 0..n {
                for p in 0..n {
                    let mut poly = Polynomial::default();
                    for t in 0..n {
                        poly.push(Rational::one(), vec![pu[q][t], umi[t][p]]);
                    }
                    self.set_equation(ulo[q][p], poly);

                    let mut poly = Polynomial::default();
                    for t in 0..n {
                        poly.push(Rational::one(), vec![pu[q][t], uhi[t][p]]);
                        poly.push(Rational::one(), vec![pd[q][t], ulo[t][p]]);
                    }
                    self.set_equation(umi[q][p], poly);

                    let mut poly = Polynomial::default();
                    for t in 0..n {
                        poly.push(Rational::one(), vec![pd[q][t], umi[t][p]]);
                    }
                    poly.push(Rational::one(), vec![pu[q][p]]);
                    self.set_equation(uhi[q][p], poly);

                    let mut poly = Polynomial::default();
                    for t in 0..n {
                        poly.push(Rational::one(), vec![pd[q][t], dmi[t][p]]);
                    }
                    self.set_equation(dhi[q][p], poly);

                    let mut poly = Polynomial::default();
                    for t in 0..n {
                        poly.push(Rational::one(), vec![pd[q][t], dlo[t][p]]);
                        poly.push(Rational::one(), vec![pu[q][t], dhi[t][p]]);
                    }
                    self.set_equation(dmi[q][p], poly);

                    let mut poly = Polynomial::default();
                    for t in 0..n {
                        poly.push(Rational::one(), vec![pu[q][t], dmi[t][p]]);
                    }
                    poly.push(Rational::one(), vec![pd[q][p]]);
                    self.set_equation(dlo[q][p], poly);
                }
            }
            let mut groups = Vec::with_capacity(2 * n);
            for p in 0..n {
                let mut gu = Vec::with_capacity(3 * n);
                let mut gd = Vec::with_capacity(3 * n);
                for q in 0..n {
                    gu.extend([ulo[q][p], umi[q][p], uhi[q][p]]);
                    gd.extend([dlo[q][p], dmi[q][p], dhi[q][p]]);
                }
                groups.push(gu);
                groups.push(gd);
            }
            stage_groups.push(groups);
            up.push([ulo, umi, uhi]);
            down.push([dlo, dmi, dhi]);
        }

        for g in stage_groups {
            self.push_stage(g);
        }
        BoundedBlock { beta, up, down }
    }

    /// Linear reachability system over a finite chain: one variable per
    /// non-absorbing non-target state; target states contribute constants.
    pub fn push_reach_block(&mut self, chain: &CompressedChain, target: &[bool]) -> Result<Vec<Option<VarId>>> {
        let n = chain.states.len();
        let mut y: Vec<Option<VarId>> = vec![None; n];
        for i in 0..n {
            if !chain.is_absorbing(i) && !target[i] {
                y[i] = Some(self.add_var(format!("y_s{i}"), VarRole::Reach { chain_state: i }));
            }
        }
        for i in 0..n {
            let Some(v) = y[i] else { continue };
            let mut poly = Polynomial::default();
            for (j, e) in &chain.rows[i] {
                let dest_var = y[*j];
                match (e, target[*j], dest_var) {
                    (Entry::Exact(c), true, _) => poly.push(c.clone(), vec![]),
                    (Entry::Exact(c), false, Some(u)) => poly.push(c.clone(), vec![u]),
                    (Entry::Exact(_), false, None) => {} // absorbing non-target: contributes 0
                    (Entry::Symbolic(x), true, _) => poly.push(Rational::one(), vec![*x]),
                    (Entry::Symbolic(x), false, Some(u)) => poly.push(Rational::one(), vec![*x, u]),
                    (Entry::Symbolic(_), false, None) => {}
                    (Entry::Approx { .. }, _, _) => {
                        return Err(Error::Precondition(
                            "reachability systems need rational or symbolic entries".to_string(),
                        ))
                    }
                }
            }
            self.set_equation(v, poly);
        }
        let group: Vec<VarId> = y.iter().flatten().copied().collect();
        self.push_stage(vec![group]);
        Ok(y)
    }
}

/// Build the termination system for a counter-oblivious row over the model.
pub fn build_termination_system(m: &OcMdp, row: &[ActionDist]) -> Result<(PolySystem, TermBlock)> {
    let fold = fold_concrete(m, row)?;
    let mut sys = PolySystem::new();
    let block = sys.push_termination_block(&fold, "");
    Ok((sys, block))
}

/// Build the doubling system for a counter-oblivious row and a bounded
/// interval satisfying the size assumption.
pub fn build_bounded_system(
    m: &OcMdp,
    row: &[ActionDist],
    interval: &Interval,
) -> Result<(PolySystem, BoundedBlock)> {
    let beta = interval.beta().ok_or_else(|| {
        Error::Precondition(format!("interval {interval} does not have size 2^beta - 1"))
    })?;
    let fold = fold_concrete(m, row)?;
    let mut sys = PolySystem::new();
    let block = sys.push_bounded_block(&fold, beta, "");
    Ok((sys, block))
}

/// Build the linear reachability system of a chain for a target set.
pub fn build_reach_system(
    chain: &CompressedChain,
    target: &[bool],
) -> Result<(PolySystem, Vec<Option<VarId>>)> {
    let mut sys = PolySystem::new();
    let y = sys.push_reach_block(chain, target)?;
    Ok((sys, y))
}

/// Per-stage positivity tables of a bounded block: `[alpha][slot][q][p]`.
#[derive(Debug, Clone)]
pub struct StagedQual {
    pub up: Vec<[Vec<Vec<bool>>; 3]>,
    pub down: Vec<[Vec<Vec<bool>>; 3]>,
}

/// Staged qualitative analysis of a bounded interval.
///
/// Stage 0 walks the one-step skeleton between counter offsets {0,1,2};
/// stage `alpha` walks a five-level skeleton whose edges are the positive
/// transitions determined at stage `alpha - 1`. Probabilities play no part:
/// only supports matter.
pub fn staged_positivity(qual: &Qual, beta: usize) -> StagedQual {
    let n = qual.len();
    let falsy = || vec![vec![false; n]; n];
    let mut up: Vec<[Vec<Vec<bool>>; 3]> = Vec::with_capacity(beta);
    let mut down: Vec<[Vec<Vec<bool>>; 3]> = Vec::with_capacity(beta);

    // Stage 0: nodes are (state, level) with levels 0..=2, start level 1.
    {
        let mut u0 = falsy();
        let mut d0 = falsy();
        // Forward closure over stay-moves, then one up/down move.
        for q in 0..n {
            let mut seen = vec![false; n];
            let mut stack = vec![q];
            seen[q] = true;
            while let Some(t) = stack.pop() {
                for (p, w) in &qual[t] {
                    match w {
                        Weight::Stay => {
                            if !seen[p.0] {
                                seen[p.0] = true;
                                stack.push(p.0);
                            }
                        }
                        Weight::Up => u0[q][p.0] = true,
                        Weight::Down => d0[q][p.0] = true,
                    }
                }
            }
        }
        up.push([u0.clone(), u0.clone(), u0]);
        down.push([d0.clone(), d0.clone(), d0]);
    }

    for alpha in 1..beta {
        let pu = &up[alpha - 1][1];
        let pd = &down[alpha - 1][1];
        // Five levels 0..=4; slots Low/Mid/High start at levels 1/2/3.
        let node = |lvl: usize, q: usize| lvl * n + q;
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); 5 * n];
        for lvl in 1..=3 {
            for q in 0..n {
                for p in 0..n {
                    if pu[q][p] {
                        adj[node(lvl, q)].push(node(lvl + 1, p));
                    }
                    if pd[q][p] {
                        adj[node(lvl, q)].push(node(lvl - 1, p));
                    }
                }
            }
        }
        let reach_from = |start: usize| -> Vec<bool> {
            let mut seen = vec![false; 5 * n];
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(v) = stack.pop() {
                for &w in &adj[v] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            seen
        };
        let mut u = [falsy(), falsy(), falsy()];
        let mut d = [falsy(), falsy(), falsy()];
        for q in 0..n {
            for (si, lvl) in [(0usize, 1usize), (1, 2), (2, 3)] {
                let seen = reach_from(node(lvl, q));
                for p in 0..n {
                    u[si][q][p] = seen[node(4, p)];
                    d[si][q][p] = seen[node(0, p)];
                }
            }
        }
        up.push(u);
        down.push(d);
    }
    StagedQual { up, down }
}

/// Positivity of termination-system variables by boolean saturation.
pub fn termination_positivity(qual: &Qual) -> Vec<Vec<bool>> {
    let n = qual.len();
    let mut r = vec![vec![false; n]; n];
    let mut changed = true;
    while changed {
        changed = false;
        for q in 0..n {
            for (t, w) in &qual[q] {
                match w {
                    Weight::Down => {
                        if !r[q][t.0] {
                            r[q][t.0] = true;
                            changed = true;
                        }
                    }
                    Weight::Stay => {
                        for p in 0..n {
                            if r[t.0][p] && !r[q][p] {
                                r[q][p] = true;
                                changed = true;
                            }
                        }
                    }
                    Weight::Up => {
                        for mid in 0..n {
                            if !r[t.0][mid] {
                                continue;
                            }
                            for p in 0..n {
                                if r[mid][p] && !r[q][p] {
                                    r[q][p] = true;
                                    changed = true;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    r
}

/// Pin to zero exactly the bounded-block variables that the staged
/// qualitative analysis proves zero; the remaining system has a unique
/// solution computable stage by stage as linear systems.
pub fn refine_unique(sys: &mut PolySystem, block: &BoundedBlock, qual: &Qual) {
    let staged = staged_positivity(qual, block.beta);
    let n = qual.len();
    for alpha in 0..block.beta {
        let slots: &[usize] = if alpha == 0 { &[1] } else { &[0, 1, 2] };
        for &si in slots {
            for q in 0..n {
                for p in 0..n {
                    if !staged.up[alpha][si][q][p] {
                        sys.pin_zero(block.up[alpha][si][q][p]);
                    }
                    if !staged.down[alpha][si][q][p] {
                        sys.pin_zero(block.down[alpha][si][q][p]);
                    }
                }
            }
        }
    }
}

/// Pin reach variables of chain states that cannot reach the target in the
/// positive-entry graph, making the linear system uniquely solvable.
pub fn pin_unreachable(
    sys: &mut PolySystem,
    y: &[Option<VarId>],
    chain: &CompressedChain,
    target: &[bool],
) {
    let n = chain.states.len();
    let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, row) in chain.rows.iter().enumerate() {
        for (j, e) in row {
            if e.possibly_positive() && *j != i {
                preds[*j].push(i);
            }
        }
    }
    let mut can = target.to_vec();
    let mut stack: Vec<usize> = (0..n).filter(|i| target[*i]).collect();
    while let Some(j) = stack.pop() {
        for &i in &preds[j] {
            if !can[i] {
                can[i] = true;
                stack.push(i);
            }
        }
    }
    for i in 0..n {
        if let Some(v) = y[i] {
            if !can[i] {
                sys.pin_zero(v);
            }
        }
    }
}
