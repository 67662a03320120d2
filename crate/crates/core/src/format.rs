//! Text formats: models, queries, partitions, strategies, chain dumps and
//! Mealy tables. Parsing reports the offending line; printing is canonical so
//! that parsing a printed value gives the value back.
//!
//! Model files:
//! ```text
//! states q p t
//! actions a b
//! trans q a +1 q:1/2 p:1/2
//! ```
//! Query files use `objective`, `targets`, `bound`, `init`, `theta` lines.
//! Partitions are written `1-7,8-inf` (or `empty`); periodic partitions as
//! `period=4; window=1-1,2-4`. Strategy files carry `kind`, `bound` or
//! `period`, and one `interval` block per partition element with one
//! `state: action:prob ...` row per line.

use std::collections::BTreeSet;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::compression::{ChainState, CompressedChain, Entry};
use crate::error::{Error, Result};
use crate::model::{
    ActionRow, Bound, Config, Objective, ObjectiveKind, OcMdp, Query, StateId, Weight,
};
use crate::partitions::{Interval, IntervalPartition, PeriodicPartition};
use crate::strategies::{ActionDist, IntervalStrategy, MealyMachine, StrategyBase};
use crate::{Counter, Rational};

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}

pub fn parse_rational(s: &str, line: usize) -> Result<Rational> {
    let s = s.trim();
    let parse_int = |t: &str| -> Result<num_bigint::BigInt> {
        num_bigint::BigInt::from_str(t).map_err(|_| perr(line, format!("bad integer `{t}`")))
    };
    match s.split_once('/') {
        Some((a, b)) => {
            let den = parse_int(b)?;
            if den.is_zero() {
                return Err(perr(line, "zero denominator"));
            }
            Ok(Rational::new(parse_int(a)?, den))
        }
        None => Ok(Rational::from_integer(parse_int(s)?)),
    }
}

pub fn print_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_counter(s: &str, line: usize) -> Result<Counter> {
    Counter::from_str(s.trim()).map_err(|_| perr(line, format!("bad counter value `{s}`")))
}

pub fn parse_bound(s: &str, line: usize) -> Result<Bound> {
    if s.trim() == "inf" {
        Ok(Bound::Infinite)
    } else {
        Ok(Bound::Finite(parse_counter(s, line)?))
    }
}

/// Numbered, comment-stripped lines.
fn logical_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let stripped = raw.split('#').next().unwrap_or("").trim();
        (!stripped.is_empty()).then_some((i + 1, stripped))
    })
}

pub fn parse_model(text: &str) -> Result<OcMdp> {
    let mut state_names: Option<Vec<String>> = None;
    let mut action_names: Option<Vec<String>> = None;
    let mut trans: Vec<(usize, Vec<&str>)> = Vec::new();
    for (ln, line) in logical_lines(text) {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("states") => state_names = Some(words.map(str::to_string).collect()),
            Some("actions") => action_names = Some(words.map(str::to_string).collect()),
            Some("trans") => trans.push((ln, words.collect())),
            Some(other) => return Err(perr(ln, format!("unknown directive `{other}`"))),
            None => unreachable!(),
        }
    }
    let state_names = state_names.ok_or_else(|| perr(0, "missing `states` line"))?;
    let action_names = action_names.ok_or_else(|| perr(0, "missing `actions` line"))?;
    if state_names.is_empty() {
        return Err(perr(0, "empty state set"));
    }
    let state_of = |name: &str, ln: usize| -> Result<StateId> {
        state_names
            .iter()
            .position(|n| n == name)
            .map(StateId)
            .ok_or_else(|| perr(ln, format!("unknown state `{name}`")))
    };
    let mut rows: Vec<Vec<ActionRow>> = vec![Vec::new(); state_names.len()];
    for (ln, words) in trans {
        if words.len() < 4 {
            return Err(perr(ln, "trans needs: state action weight succ:prob..."));
        }
        let q = state_of(words[0], ln)?;
        let action = action_names
            .iter()
            .position(|n| n == words[1])
            .map(crate::model::ActionId)
            .ok_or_else(|| perr(ln, format!("unknown action `{}`", words[1])))?;
        let weight = match words[2] {
            "-1" => Weight::Down,
            "0" => Weight::Stay,
            "+1" | "1" => Weight::Up,
            w => return Err(perr(ln, format!("weight must be -1, 0 or +1, got `{w}`"))),
        };
        let mut succ = Vec::new();
        for part in &words[3..] {
            let (name, prob) = part
                .split_once(':')
                .ok_or_else(|| perr(ln, format!("expected succ:prob, got `{part}`")))?;
            succ.push((state_of(name, ln)?, parse_rational(prob, ln)?));
        }
        rows[q.0].push(ActionRow { action, weight, succ });
    }
    let m = OcMdp::new(state_names, action_names, rows);
    let violations = crate::model::validate(&m);
    if !violations.is_empty() {
        return Err(Error::Domain(format!("invalid model: {}", violations.join("; "))));
    }
    Ok(m)
}

pub fn print_model(m: &OcMdp) -> String {
    let mut out = String::new();
    out.push_str("states");
    for q in m.states() {
        out.push(' ');
        out.push_str(m.state_name(q));
    }
    out.push_str("\nactions");
    for i in 0..m.n_actions() {
        out.push(' ');
        out.push_str(m.action_name(crate::model::ActionId(i)));
    }
    out.push('\n');
    for q in m.states() {
        for r in m.enabled(q) {
            let w = match r.weight {
                Weight::Down => "-1",
                Weight::Stay => "0",
                Weight::Up => "+1",
            };
            out.push_str(&format!("trans {} {} {w}", m.state_name(q), m.action_name(r.action)));
            for (p, pr) in &r.succ {
                out.push_str(&format!(" {}:{}", m.state_name(*p), print_rational(pr)));
            }
            out.push('\n');
        }
    }
    out
}

pub fn parse_query(text: &str, m: &OcMdp) -> Result<Query> {
    let mut kind = None;
    let mut targets = BTreeSet::new();
    let mut bound = None;
    let mut init = None;
    let mut theta = None;
    for (ln, line) in logical_lines(text) {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("objective") => {
                kind = Some(match words.next() {
                    Some("reach") => ObjectiveKind::Reach,
                    Some("selterm") => ObjectiveKind::SelTerm,
                    other => return Err(perr(ln, format!("objective must be reach or selterm, got {other:?}"))),
                })
            }
            Some("targets") => {
                for name in words {
                    targets.insert(
                        m.state_by_name(name)
                            .ok_or_else(|| perr(ln, format!("unknown state `{name}`")))?,
                    );
                }
            }
            Some("bound") => {
                bound = Some(parse_bound(
                    words.next().ok_or_else(|| perr(ln, "missing bound"))?,
                    ln,
                ))
                .transpose()?
                .map(Some)
                .unwrap_or(None)
            }
            Some("init") => {
                let q = words.next().ok_or_else(|| perr(ln, "missing initial state"))?;
                let k = words.next().ok_or_else(|| perr(ln, "missing initial counter"))?;
                init = Some(Config {
                    state: m
                        .state_by_name(q)
                        .ok_or_else(|| perr(ln, format!("unknown state `{q}`")))?,
                    counter: parse_counter(k, ln)?,
                });
            }
            Some("theta") => {
                theta = Some(parse_rational(
                    words.next().ok_or_else(|| perr(ln, "missing threshold"))?,
                    ln,
                )?)
            }
            Some(other) => return Err(perr(ln, format!("unknown directive `{other}`"))),
            None => unreachable!(),
        }
    }
    let q = Query {
        objective: Objective {
            kind: kind.ok_or_else(|| perr(0, "missing `objective`"))?,
            targets,
        },
        bound: bound.ok_or_else(|| perr(0, "missing `bound`"))?,
        init: init.ok_or_else(|| perr(0, "missing `init`"))?,
        theta: theta.ok_or_else(|| perr(0, "missing `theta`"))?,
    };
    let violations = q.validate(m);
    if !violations.is_empty() {
        return Err(Error::Domain(format!("invalid query: {}", violations.join("; "))));
    }
    Ok(q)
}

pub fn print_query(q: &Query, m: &OcMdp) -> String {
    let mut out = String::new();
    out.push_str(match q.objective.kind {
        ObjectiveKind::Reach => "objective reach\n",
        ObjectiveKind::SelTerm => "objective selterm\n",
    });
    out.push_str("targets");
    for t in &q.objective.targets {
        out.push(' ');
        out.push_str(m.state_name(*t));
    }
    out.push_str(&format!("\nbound {}\n", q.bound));
    out.push_str(&format!("init {} {}\n", m.state_name(q.init.state), q.init.counter));
    out.push_str(&format!("theta {}\n", print_rational(&q.theta)));
    out
}

pub fn parse_partition(s: &str, line: usize) -> Result<IntervalPartition> {
    let s = s.trim();
    if s == "empty" {
        return IntervalPartition::new(Vec::new());
    }
    let mut intervals = Vec::new();
    for part in s.split(',') {
        let (lo, hi) = part
            .trim()
            .split_once('-')
            .ok_or_else(|| perr(line, format!("expected lo-hi, got `{part}`")))?;
        let lo = parse_counter(lo, line)?;
        let hi = if hi.trim() == "inf" { None } else { Some(parse_counter(hi, line)?) };
        intervals.push(Interval::new(lo, hi)?);
    }
    IntervalPartition::new(intervals)
}

pub fn print_partition(p: &IntervalPartition) -> String {
    if p.is_empty() {
        return "empty".to_string();
    }
    p.intervals().iter().map(|iv| iv.to_string()).collect::<Vec<_>>().join(",")
}

pub fn parse_periodic(s: &str, line: usize) -> Result<PeriodicPartition> {
    let (period_part, window_part) = s
        .split_once(';')
        .ok_or_else(|| perr(line, "expected `period=RHO; window=...`"))?;
    let period = period_part
        .trim()
        .strip_prefix("period=")
        .ok_or_else(|| perr(line, "expected `period=RHO`"))?;
    let window = window_part
        .trim()
        .strip_prefix("window=")
        .ok_or_else(|| perr(line, "expected `window=...`"))?;
    PeriodicPartition::new(parse_counter(period, line)?, parse_partition(window, line)?)
}

pub fn print_periodic(pp: &PeriodicPartition) -> String {
    format!("period={}; window={}", pp.period, print_partition(&pp.window))
}

pub fn parse_strategy(text: &str, m: &OcMdp) -> Result<IntervalStrategy> {
    let mut kind: Option<&str> = None;
    let mut bound: Option<Bound> = None;
    let mut period: Option<Counter> = None;
    let mut intervals: Vec<Interval> = Vec::new();
    let mut blocks: Vec<Vec<Option<ActionDist>>> = Vec::new();
    for (ln, line) in logical_lines(text) {
        if let Some(rest) = line.strip_prefix("kind ") {
            kind = Some(match rest.trim() {
                "oeis" => "oeis",
                "cis" => "cis",
                other => return Err(perr(ln, format!("kind must be oeis or cis, got `{other}`"))),
            });
        } else if let Some(rest) = line.strip_prefix("bound ") {
            bound = Some(parse_bound(rest, ln)?);
        } else if let Some(rest) = line.strip_prefix("period ") {
            period = Some(parse_counter(rest, ln)?);
        } else if let Some(rest) = line.strip_prefix("interval ") {
            let (lo, hi) = rest
                .trim()
                .split_once('-')
                .ok_or_else(|| perr(ln, format!("expected lo-hi, got `{rest}`")))?;
            let lo = parse_counter(lo, ln)?;
            let hi = if hi.trim() == "inf" { None } else { Some(parse_counter(hi, ln)?) };
            intervals.push(Interval::new(lo, hi)?);
            blocks.push(vec![None; m.n_states()]);
        } else {
            // A state row: `state: action:prob action:prob`.
            let block = blocks
                .last_mut()
                .ok_or_else(|| perr(ln, "state row before any `interval` line"))?;
            let (state, rest) = line
                .split_once(':')
                .ok_or_else(|| perr(ln, "expected `state: action:prob ...`"))?;
            let q = m
                .state_by_name(state.trim())
                .ok_or_else(|| perr(ln, format!("unknown state `{}`", state.trim())))?;
            let mut dist = Vec::new();
            for part in rest.split_whitespace() {
                let (a, pr) = part
                    .split_once(':')
                    .ok_or_else(|| perr(ln, format!("expected action:prob, got `{part}`")))?;
                let action = m
                    .action_by_name(a)
                    .ok_or_else(|| perr(ln, format!("unknown action `{a}`")))?;
                dist.push((action, parse_rational(pr, ln)?));
            }
            if block[q.0].replace(dist).is_some() {
                return Err(perr(ln, format!("duplicate row for state `{}`", state.trim())));
            }
        }
    }
    let rows: Vec<Vec<ActionDist>> = blocks
        .into_iter()
        .enumerate()
        .map(|(i, block)| {
            block
                .into_iter()
                .enumerate()
                .map(|(qi, d)| {
                    d.ok_or_else(|| {
                        Error::Domain(format!(
                            "interval block {i} is missing a row for state {}",
                            m.state_name(StateId(qi))
                        ))
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let partition = IntervalPartition::new(intervals)?;
    let s = match kind.ok_or_else(|| perr(0, "missing `kind` line"))? {
        "oeis" => {
            let bound = bound.ok_or_else(|| perr(0, "missing `bound` line"))?;
            IntervalStrategy::new_oeis(partition, bound, rows)?
        }
        _ => {
            let period = period.ok_or_else(|| perr(0, "missing `period` line"))?;
            IntervalStrategy::new_cis(PeriodicPartition::new(period, partition)?, rows)?
        }
    };
    let violations = s.validate_for(m);
    if !violations.is_empty() {
        return Err(Error::Domain(format!("invalid strategy: {}", violations.join("; "))));
    }
    Ok(s)
}

pub fn print_strategy(s: &IntervalStrategy, m: &OcMdp) -> String {
    let mut out = String::new();
    match &s.base {
        StrategyBase::Oeis { bound, .. } => {
            out.push_str("kind oeis\n");
            out.push_str(&format!("bound {bound}\n"));
        }
        StrategyBase::Cis(pp) => {
            out.push_str("kind cis\n");
            out.push_str(&format!("period {}\n", pp.period));
        }
    }
    for (iv, block) in s.intervals().iter().zip(s.table()) {
        out.push_str(&format!("interval {iv}\n"));
        for (qi, dist) in block.iter().enumerate() {
            out.push_str(&format!("  {}:", m.state_name(StateId(qi))));
            for (a, pr) in dist {
                out.push_str(&format!(" {}:{}", m.action_name(*a), print_rational(pr)));
            }
            out.push('\n');
        }
    }
    out
}

fn chain_state_label(s: &ChainState, names: &[String]) -> String {
    match s {
        ChainState::Bot => "bot".to_string(),
        ChainState::Config { state, counter } => format!("{}@{}", names[state.0], counter),
    }
}

/// Dump a compressed chain. Float entries print both bracket ends with
/// round-trip precision; symbolic entries print variable names.
pub fn print_chain(
    chain: &CompressedChain,
    state_names: &[String],
    sys: Option<&crate::eqsys::PolySystem>,
) -> String {
    let mode = if chain.is_rational() {
        "rational"
    } else if chain.rows.iter().flatten().any(|(_, e)| matches!(e, Entry::Symbolic(_))) {
        "symbolic"
    } else {
        "float"
    };
    let mut out = format!("chain {mode}\nstates {}\n", state_names.join(" "));
    for st in &chain.states {
        out.push_str(&format!("node {}\n", chain_state_label(st, state_names)));
    }
    for (i, row) in chain.rows.iter().enumerate() {
        out.push_str(&format!("row {}", chain_state_label(&chain.states[i], state_names)));
        for (j, e) in row {
            let target = chain_state_label(&chain.states[*j], state_names);
            match e {
                Entry::Exact(v) => out.push_str(&format!(" {target}:{}", print_rational(v))),
                Entry::Approx { lo, hi } => out.push_str(&format!(" {target}:{lo:?}..{hi:?}")),
                Entry::Symbolic(v) => {
                    let name =
                        sys.map(|s| s.var(*v).name.clone()).unwrap_or_else(|| format!("x{}", v.0));
                    out.push_str(&format!(" {target}:${name}"));
                }
            }
        }
        out.push('\n');
    }
    out
}

/// Parse a rational or float chain dump back (symbolic dumps do not round-trip).
pub fn parse_chain(text: &str) -> Result<(CompressedChain, Vec<String>)> {
    let mut names: Vec<String> = Vec::new();
    let mut states: Vec<ChainState> = Vec::new();
    let mut rows_by_label: Vec<(usize, String, Vec<&str>)> = Vec::new();
    let mut mode = None;
    for (ln, line) in logical_lines(text) {
        let mut words = line.split_whitespace();
        match words.next() {
            Some("chain") => mode = words.next().map(str::to_string),
            Some("states") => names = words.map(str::to_string).collect(),
            Some("node") => {
                let label = words.next().ok_or_else(|| perr(ln, "missing node label"))?;
                states.push(parse_chain_state(label, &names, ln)?);
            }
            Some("row") => {
                let label = words.next().ok_or_else(|| perr(ln, "missing row label"))?;
                rows_by_label.push((ln, label.to_string(), words.collect()));
            }
            Some(other) => return Err(perr(ln, format!("unknown directive `{other}`"))),
            None => unreachable!(),
        }
    }
    if mode.as_deref() == Some("symbolic") {
        return Err(Error::Unsupported("symbolic chain dumps cannot be re-parsed".to_string()));
    }
    let index_of = |label: &str, ln: usize| -> Result<usize> {
        let st = parse_chain_state(label, &names, ln)?;
        states
            .iter()
            .position(|s| *s == st)
            .ok_or_else(|| perr(ln, format!("undeclared node `{label}`")))
    };
    let mut rows: Vec<Vec<(usize, Entry)>> = vec![Vec::new(); states.len()];
    for (ln, label, parts) in rows_by_label {
        let i = index_of(&label, ln)?;
        let mut row = Vec::new();
        for part in parts {
            let (target, value) = part
                .rsplit_once(':')
                .ok_or_else(|| perr(ln, format!("expected target:prob, got `{part}`")))?;
            let j = index_of(target, ln)?;
            let entry = if let Some((lo, hi)) = value.split_once("..") {
                let lo: f64 = lo.parse().map_err(|_| perr(ln, format!("bad float `{lo}`")))?;
                let hi: f64 = hi.parse().map_err(|_| perr(ln, format!("bad float `{hi}`")))?;
                Entry::Approx { lo, hi }
            } else {
                Entry::Exact(parse_rational(value, ln)?)
            };
            row.push((j, entry));
        }
        rows[i] = row;
    }
    Ok((CompressedChain::new(states, rows), names))
}

fn parse_chain_state(label: &str, names: &[String], ln: usize) -> Result<ChainState> {
    if label == "bot" {
        return Ok(ChainState::Bot);
    }
    let (name, counter) = label
        .rsplit_once('@')
        .ok_or_else(|| perr(ln, format!("expected name@counter, got `{label}`")))?;
    let state = names
        .iter()
        .position(|n| n == name)
        .map(StateId)
        .ok_or_else(|| perr(ln, format!("unknown state `{name}`")))?;
    Ok(ChainState::Config { state, counter: parse_counter(counter, ln)? })
}

/// Dump a Mealy machine as a transition table.
pub fn print_mealy(machine: &MealyMachine, m: &OcMdp) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "memory {}\ninitial {}\n",
        machine.memory.len(),
        machine.memory[machine.initial]
    ));
    for ((mi, q), dist) in &machine.next {
        out.push_str(&format!("next {} {}:", machine.memory[*mi], m.state_name(*q)));
        for (a, pr) in dist {
            out.push_str(&format!(" {}:{}", m.action_name(*a), print_rational(pr)));
        }
        out.push('\n');
    }
    let mut updates: Vec<_> = machine.update.iter().collect();
    updates.sort_by_key(|((mi, q, a), _)| (*mi, q.0, a.0));
    for ((mi, q, a), ti) in updates {
        out.push_str(&format!(
            "up {} {} {} -> {}\n",
            machine.memory[*mi],
            m.state_name(*q),
            m.action_name(*a),
            machine.memory[*ti]
        ));
    }
    out
}
