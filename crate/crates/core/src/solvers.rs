//! Numeric engines: exact rational solving of staged linear systems, Kleene
//! iteration (optionally Newton-accelerated per dependency SCC) for least
//! fixed points of monotone quadratic systems, and one-sided residual
//! amplification for upper bounds.
//!
//! Kleene iterates from zero never exceed the least solution, so every
//! iterate is a sound lower bound; the upper-bound pass adds an amplified
//! residual, with the amplification estimated from the linearisation's
//! spectral radius by power iteration (an engineering estimate, flagged in
//! the result status rather than certified).

use num_traits::{One, ToPrimitive, Zero};

use crate::eqsys::{PolySystem, VarId};
use crate::error::{Error, Result};
use crate::Rational;

pub fn rational_to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or_else(|| {
        let n = r.numer().to_f64().unwrap_or(f64::MAX);
        let d = r.denom().to_f64().unwrap_or(f64::MAX);
        n / d
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Rational,
    Float,
}

#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub mode: Mode,
    pub eps: f64,
    pub max_iters: usize,
    pub newton: bool,
}

impl Default for SolveConfig {
    fn default() -> SolveConfig {
        SolveConfig { mode: Mode::Rational, eps: 1e-12, max_iters: 1_000_000, newton: false }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum SolveStatus {
    Exact,
    Converged { eps: f64 },
    Capped { iterations: usize, residual: f64 },
}

impl SolveStatus {
    pub fn is_capped(&self) -> bool {
        matches!(self, SolveStatus::Capped { .. })
    }

    /// Combine two statuses, keeping the weaker guarantee.
    pub fn join(self, other: SolveStatus) -> SolveStatus {
        use SolveStatus::*;
        match (self, other) {
            (Exact, s) | (s, Exact) => s,
            (Capped { iterations, residual }, Capped { iterations: i2, residual: r2 }) => Capped {
                iterations: iterations.max(i2),
                residual: residual.max(r2),
            },
            (c @ Capped { .. }, _) | (_, c @ Capped { .. }) => c,
            (Converged { eps }, Converged { eps: e2 }) => Converged { eps: eps.max(e2) },
        }
    }
}

#[derive(Debug, Clone)]
pub enum Values {
    Rational(Vec<Rational>),
    Float(Vec<f64>),
}

/// A variable assignment with a quality tag.
#[derive(Debug, Clone)]
pub struct Valuation {
    pub values: Values,
    pub status: SolveStatus,
}

impl Valuation {
    pub fn get_f64(&self, v: VarId) -> f64 {
        match &self.values {
            Values::Rational(xs) => rational_to_f64(&xs[v.0]),
            Values::Float(xs) => xs[v.0],
        }
    }

    pub fn get_rational(&self, v: VarId) -> Option<&Rational> {
        match &self.values {
            Values::Rational(xs) => Some(&xs[v.0]),
            Values::Float(_) => None,
        }
    }

    pub fn as_f64_vec(&self) -> Vec<f64> {
        match &self.values {
            Values::Rational(xs) => xs.iter().map(rational_to_f64).collect(),
            Values::Float(xs) => xs.clone(),
        }
    }
}

/// Dense Gaussian elimination over the rationals. Returns `None` on a
/// singular matrix.
fn gauss_rational(mut a: Vec<Vec<Rational>>, mut b: Vec<Rational>) -> Option<Vec<Rational>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, piv);
        b.swap(col, piv);
        let pv = a[col][col].clone();
        for x in a[col].iter_mut() {
            *x /= &pv;
        }
        b[col] /= &pv;
        for r in 0..n {
            if r == col || a[r][col].is_zero() {
                continue;
            }
            let f = a[r][col].clone();
            for c in col..n {
                let t = &a[col][c] * &f;
                a[r][c] -= t;
            }
            let t = &b[col] * &f;
            b[r] -= t;
        }
    }
    Some(b)
}

/// Dense Gaussian elimination over f64 with partial pivoting.
fn gauss_f64(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
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
            if r == col {
                continue;
            }
            let f = a[r][col];
            if f == 0.0 {
                continue;
            }
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    b.iter().all(|v| v.is_finite()).then_some(b)
}

/// Solve a system that is linear stage by stage after pinning.
///
/// Every non-pinned equation variable must be covered by the system's stage
/// metadata, and each group's equations must be linear in the group's
/// variables given all previously solved values. Rational mode is exact.
pub fn solve_linear(sys: &PolySystem, cfg: &SolveConfig) -> Result<Valuation> {
    match cfg.mode {
        Mode::Rational => solve_linear_rational(sys).map(|values| Valuation {
            values: Values::Rational(values),
            status: SolveStatus::Exact,
        }),
        Mode::Float => solve_linear_float(sys).map(|values| Valuation {
            values: Values::Float(values),
            status: SolveStatus::Converged { eps: 0.0 },
        }),
    }
}

fn check_staged_coverage(sys: &PolySystem) -> Result<Vec<bool>> {
    let mut staged = vec![false; sys.n_vars()];
    for stage in sys.stages() {
        for group in stage {
            for v in group {
                staged[v.0] = true;
            }
        }
    }
    for (v, _) in sys.vars() {
        if sys.is_pinned(v) || sys.equation(v).is_none() {
            continue;
        }
        if !staged[v.0] {
            return Err(Error::Precondition(format!(
                "variable {} has an equation but no stage; use the fixed-point solver",
                sys.var(v).name
            )));
        }
    }
    Ok(staged)
}

fn solve_linear_rational(sys: &PolySystem) -> Result<Vec<Rational>> {
    check_staged_coverage(sys)?;
    let n = sys.n_vars();
    let mut value: Vec<Option<Rational>> = vec![None; n];
    for v in sys.pins() {
        value[v.0] = Some(Rational::zero());
    }
    for stage in sys.stages() {
        let mut solved_in_stage: Vec<(usize, Rational)> = Vec::new();
        for group in stage {
            let unknown: Vec<VarId> =
                group.iter().copied().filter(|v| value[v.0].is_none() && !sys.is_pinned(*v)).collect();
            if unknown.is_empty() {
                continue;
            }
            let index: std::collections::HashMap<usize, usize> =
                unknown.iter().enumerate().map(|(i, v)| (v.0, i)).collect();
            let g = unknown.len();
            let mut a = vec![vec![Rational::zero(); g]; g];
            let mut b = vec![Rational::zero(); g];
            for (i, v) in unknown.iter().enumerate() {
                a[i][i] = Rational::one();
                let poly = sys
                    .equation(*v)
                    .ok_or_else(|| Error::Precondition(format!("{} has no equation", sys.var(*v).name)))?;
                for term in &poly.terms {
                    let mut coef = term.coef.clone();
                    let mut cur: Option<usize> = None;
                    let mut dead = false;
                    for u in &term.vars {
                        if let Some(idx) = index.get(&u.0) {
                            if cur.is_some() {
                                return Err(Error::Precondition(format!(
                                    "equation of {} is quadratic within its own stage",
                                    sys.var(*v).name
                                )));
                            }
                            cur = Some(*idx);
                        } else {
                            match &value[u.0] {
                                Some(val) if val.is_zero() => {
                                    dead = true;
                                    break;
                                }
                                Some(val) => coef *= val,
                                None => {
                                    return Err(Error::Precondition(format!(
                                        "equation of {} uses unsolved variable {}",
                                        sys.var(*v).name,
                                        sys.var(*u).name
                                    )))
                                }
                            }
                        }
                    }
                    if dead {
                        continue;
                    }
                    match cur {
                        Some(j) => a[i][j] -= coef,
                        None => b[i] += coef,
                    }
                }
            }
            let sol = gauss_rational(a, b)
                .ok_or_else(|| Error::Internal("singular linear system despite pinning".to_string()))?;
            for (i, v) in unknown.iter().enumerate() {
                solved_in_stage.push((v.0, sol[i].clone()));
            }
        }
        for (i, val) in solved_in_stage {
            value[i] = Some(val);
        }
    }
    Ok(value.into_iter().map(|v| v.unwrap_or_else(Rational::zero)).collect())
}

fn solve_linear_float(sys: &PolySystem) -> Result<Vec<f64>> {
    check_staged_coverage(sys)?;
    let n = sys.n_vars();
    let mut value: Vec<Option<f64>> = vec![None; n];
    for v in sys.pins() {
        value[v.0] = Some(0.0);
    }
    for stage in sys.stages() {
        let mut solved_in_stage: Vec<(usize, f64)> = Vec::new();
        for group in stage {
            let unknown: Vec<VarId> =
                group.iter().copied().filter(|v| value[v.0].is_none() && !sys.is_pinned(*v)).collect();
            if unknown.is_empty() {
                continue;
            }
            let index: std::collections::HashMap<usize, usize> =
                unknown.iter().enumerate().map(|(i, v)| (v.0, i)).collect();
            let g = unknown.len();
            let mut a = vec![vec![0.0; g]; g];
            let mut b = vec![0.0; g];
            for (i, v) in unknown.iter().enumerate() {
                a[i][i] = 1.0;
                let poly = sys
                    .equation(*v)
                    .ok_or_else(|| Error::Precondition(format!("{} has no equation", sys.var(*v).name)))?;
                for term in &poly.terms {
                    let mut coef = rational_to_f64(&term.coef);
                    let mut cur: Option<usize> = None;
                    for u in &term.vars {
                        if let Some(idx) = index.get(&u.0) {
                            if cur.is_some() {
                                return Err(Error::Precondition(format!(
                                    "equation of {} is quadratic within its own stage",
                                    sys.var(*v).name
                                )));
                            }
                            cur = Some(*idx);
                        } else {
                            coef *= value[u.0].ok_or_else(|| {
                                Error::Precondition(format!(
                                    "equation of {} uses unsolved variable {}",
                                    sys.var(*v).name,
                                    sys.var(*u).name
                                ))
                            })?;
                        }
                    }
                    match cur {
                        Some(j) => a[i][j] -= coef,
                        None => b[i] += coef,
                    }
                }
            }
            let sol = gauss_f64(a, b)
                .ok_or_else(|| Error::Internal("singular linear system despite pinning".to_string()))?;
            for (i, v) in unknown.iter().enumerate() {
                solved_in_stage.push((v.0, sol[i]));
            }
        }
        for (i, val) in solved_in_stage {
            value[i] = Some(val);
        }
    }
    Ok(value.into_iter().map(|v| v.unwrap_or(0.0)).collect())
}

fn residual(sys: &PolySystem, x: &[f64]) -> f64 {
    let mut r: f64 = 0.0;
    for (v, _) in sys.vars() {
        if sys.is_pinned(v) || sys.equation(v).is_none() {
            continue;
        }
        r = r.max(sys.eval_var(v, x) - x[v.0]);
    }
    r.max(0.0)
}

/// Least non-negative solution of a monotone system by Kleene iteration from
/// zero, optionally Newton-accelerated per dependency SCC.
///
/// The returned values are a lower bound on the least solution; the status
/// carries the final residual when the iteration cap was hit.
pub fn lfp(sys: &PolySystem, cfg: &SolveConfig) -> Result<Valuation> {
    for (v, info) in sys.vars() {
        if sys.is_param(v) && sys.equation(v).is_none() {
            return Err(Error::Precondition(format!(
                "system has parameter {}; substitute it before solving",
                info.name
            )));
        }
    }
    let n = sys.n_vars();
    let mut x = vec![0.0; n];
    if cfg.newton {
        newton_by_scc(sys, &mut x, cfg)?;
    } else {
        kleene(sys, &mut x, cfg.eps, cfg.max_iters);
    }
    let r = residual(sys, &x);
    let status = if r <= cfg.eps {
        SolveStatus::Converged { eps: cfg.eps }
    } else {
        SolveStatus::Capped { iterations: cfg.max_iters, residual: r }
    };
    Ok(Valuation { values: Values::Float(x), status })
}

fn kleene(sys: &PolySystem, x: &mut [f64], eps: f64, max_iters: usize) {
    let n = x.len();
    let active: Vec<usize> = (0..n)
        .filter(|i| !sys.is_pinned(VarId(*i)) && sys.equation(VarId(*i)).is_some())
        .collect();
    let mut next = x.to_vec();
    for _ in 0..max_iters {
        let mut delta: f64 = 0.0;
        for &i in &active {
            let v = sys.eval_var(VarId(i), x).clamp(0.0, 1.0);
            delta = delta.max(v - x[i]);
            next[i] = v;
        }
        x.copy_from_slice(&next);
        if delta < eps {
            break;
        }
    }
}

/// Jacobian row entries of `v` at `x`, restricted to a variable subset.
fn jacobian_row(
    sys: &PolySystem,
    v: VarId,
    x: &[f64],
    index: &std::collections::HashMap<usize, usize>,
    row: &mut [f64],
) {
    row.iter_mut().for_each(|e| *e = 0.0);
    let Some(poly) = sys.equation(v) else { return };
    for term in &poly.terms {
        let c = rational_to_f64(&term.coef);
        for (k, u) in term.vars.iter().enumerate() {
            let Some(&j) = index.get(&u.0) else { continue };
            let mut grad = c;
            for (k2, w) in term.vars.iter().enumerate() {
                if k2 != k {
                    grad *= x[w.0];
                }
            }
            row[j] += grad;
        }
    }
}

fn newton_by_scc(sys: &PolySystem, x: &mut [f64], cfg: &SolveConfig) -> Result<()> {
    let n = sys.n_vars();
    let active: Vec<usize> = (0..n)
        .filter(|i| !sys.is_pinned(VarId(*i)) && sys.equation(VarId(*i)).is_some())
        .collect();
    // Dependency edges v -> u for u occurring in v's equation.
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &i in &active {
        if let Some(poly) = sys.equation(VarId(i)) {
            for term in &poly.terms {
                for u in &term.vars {
                    adj[i].push(u.0);
                }
            }
            adj[i].sort_unstable();
            adj[i].dedup();
        }
    }
    let sccs = tarjan_sccs(n, &adj, &active);
    // Tarjan emits dependency-closed components first.
    for scc in sccs {
        let index: std::collections::HashMap<usize, usize> =
            scc.iter().enumerate().map(|(i, v)| (*v, i)).collect();
        let g = scc.len();
        if g == 1 && !adj[scc[0]].contains(&scc[0]) {
            x[scc[0]] = sys.eval_var(VarId(scc[0]), x).clamp(0.0, 1.0);
            continue;
        }
        let mut row = vec![0.0; g];
        for _ in 0..200 {
            let mut res = vec![0.0; g];
            let mut worst: f64 = 0.0;
            for (i, &v) in scc.iter().enumerate() {
                res[i] = sys.eval_var(VarId(v), x) - x[v];
                worst = worst.max(res[i].abs());
            }
            if worst < cfg.eps * 1e-2 {
                break;
            }
            let mut a = vec![vec![0.0; g]; g];
            for (i, &v) in scc.iter().enumerate() {
                jacobian_row(sys, VarId(v), x, &index, &mut row);
                for j in 0..g {
                    a[i][j] = if i == j { 1.0 - row[j] } else { -row[j] };
                }
            }
            // Damped step: from below the least solution the residual stays
            // non-negative, so a clearly negative residual after stepping
            // signals an overshoot (the linearisation turns near-singular on
            // critical systems) and the step is halved.
            let mut accepted = false;
            if let Some(d) = gauss_f64(a, res.clone()) {
                let mut scale = 1.0;
                'damp: for _ in 0..40 {
                    let mut cand = x.to_vec();
                    for (i, &v) in scc.iter().enumerate() {
                        cand[v] = (x[v] + scale * d[i]).clamp(0.0, 1.0);
                    }
                    let ok = scc
                        .iter()
                        .all(|&v| sys.eval_var(VarId(v), &cand) - cand[v] >= -1e-9);
                    if ok {
                        for &v in &scc {
                            x[v] = cand[v];
                        }
                        accepted = true;
                        break 'damp;
                    }
                    scale *= 0.5;
                }
            }
            if !accepted {
                // Make progress with plain iteration and try again.
                for _ in 0..64 {
                    for &v in &scc {
                        x[v] = sys.eval_var(VarId(v), x).clamp(0.0, 1.0);
                    }
                }
            }
        }
    }
    Ok(())
}

fn tarjan_sccs(n: usize, adj: &[Vec<usize>], active: &[usize]) -> Vec<Vec<usize>> {
    let is_active: Vec<bool> = {
        let mut v = vec![false; n];
        for &i in active {
            v[i] = true;
        }
        v
    };
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut next_index = 0usize;
    let mut out: Vec<Vec<usize>> = Vec::new();

    // Iterative Tarjan to avoid recursion limits on large systems.
    enum Frame {
        Enter(usize),
        Resume(usize, usize),
    }
    for &start in active {
        if index[start] != usize::MAX {
            continue;
        }
        let mut frames = vec![Frame::Enter(start)];
        while let Some(frame) = frames.pop() {
            match frame {
                Frame::Enter(v) => {
                    index[v] = next_index;
                    low[v] = next_index;
                    next_index += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    frames.push(Frame::Resume(v, 0));
                }
                Frame::Resume(v, mut i) => {
                    let mut descended = false;
                    while i < adj[v].len() {
                        let w = adj[v][i];
                        i += 1;
                        if !is_active[w] {
                            continue;
                        }
                        if index[w] == usize::MAX {
                            frames.push(Frame::Resume(v, i));
                            frames.push(Frame::Enter(w));
                            descended = true;
                            break;
                        } else if on_stack[w] {
                            low[v] = low[v].min(index[w]);
                        }
                    }
                    if descended {
                        continue;
                    }
                    if low[v] == index[v] {
                        let mut comp = Vec::new();
                        while let Some(w) = stack.pop() {
                            on_stack[w] = false;
                            comp.push(w);
                            if w == v {
                                break;
                            }
                        }
                        out.push(comp);
                    }
                    if let Some(Frame::Resume(parent, _)) = frames.last() {
                        let parent = *parent;
                        low[parent] = low[parent].min(low[v]);
                    }
                }
            }
        }
    }
    out
}

/// One-sided upper bound on the least solution from a lower-bound valuation:
/// `upper = lower + residual * amplification`, where the amplification comes
/// from a power-iteration estimate of the linearisation's spectral radius.
pub fn upper_bound_pass(sys: &PolySystem, lower: &Valuation) -> Result<Valuation> {
    let x = lower.as_f64_vec();
    let r = residual(sys, &x);
    if r == 0.0 {
        return Ok(Valuation { values: Values::Float(x), status: lower.status.clone() });
    }
    let active: Vec<usize> = (0..sys.n_vars())
        .filter(|i| !sys.is_pinned(VarId(*i)) && sys.equation(VarId(*i)).is_some())
        .collect();
    let index: std::collections::HashMap<usize, usize> =
        active.iter().enumerate().map(|(i, v)| (*v, i)).collect();
    let g = active.len();
    let mut rows = vec![vec![0.0; g]; g];
    for (i, &v) in active.iter().enumerate() {
        jacobian_row(sys, VarId(v), &x, &index, &mut rows[i]);
    }
    let mut y = vec![1.0; g];
    let mut rho: f64 = 0.0;
    for _ in 0..100 {
        let mut y2 = vec![0.0; g];
        for i in 0..g {
            for j in 0..g {
                y2[i] += rows[i][j] * y[j];
            }
        }
        let norm = y2.iter().cloned().fold(0.0f64, f64::max);
        if norm == 0.0 {
            rho = 0.0;
            break;
        }
        rho = norm;
        for v in y2.iter_mut() {
            *v /= norm;
        }
        y = y2;
    }
    let rho = (rho * 1.1).min(2.0); // safety inflation
    let bump = if rho < 0.999 { r / (1.0 - rho) } else { 1.0 };
    let mut hi = x;
    for &v in &active {
        hi[v] = (hi[v] + bump).min(1.0);
    }
    Ok(Valuation { values: Values::Float(hi), status: lower.status.clone() })
}

/// Two-sided value iteration for reachability in a finite chain whose
/// transition entries are known as `[lo, hi]` intervals.
///
/// Every lower iterate starts at zero and stays below the true probability;
/// every upper iterate starts at one on the `maybe` set and stays above it,
/// so a capped run still returns sound (just loose) bounds.
pub fn reach_value_bounds(
    rows: &[Vec<(usize, f64, f64)>],
    absorbing: &[bool],
    target: &[bool],
    maybe: &[bool],
    cfg: &SolveConfig,
) -> (Vec<f64>, Vec<f64>, SolveStatus) {
    let n = rows.len();
    let mut lo: Vec<f64> = (0..n).map(|i| if target[i] { 1.0 } else { 0.0 }).collect();
    let mut hi: Vec<f64> =
        (0..n).map(|i| if target[i] || maybe[i] { 1.0 } else { 0.0 }).collect();
    let mut status = SolveStatus::Converged { eps: cfg.eps };
    let mut iters = 0usize;
    loop {
        let mut delta: f64 = 0.0;
        let mut lo2 = lo.clone();
        let mut hi2 = hi.clone();
        for i in 0..n {
            if target[i] || absorbing[i] || !maybe[i] {
                continue;
            }
            let mut vl = 0.0;
            let mut vh = 0.0;
            for (j, l, h) in &rows[i] {
                vl += l * lo[*j];
                vh += h * hi[*j];
            }
            let vh = vh.min(1.0);
            delta = delta.max((vl - lo[i]).abs()).max((hi[i] - vh).abs());
            lo2[i] = vl.max(lo[i]);
            hi2[i] = vh.min(hi[i]);
        }
        lo = lo2;
        hi = hi2;
        iters += 1;
        if delta < cfg.eps {
            break;
        }
        if iters >= cfg.max_iters {
            status = SolveStatus::Capped { iterations: iters, residual: delta };
            break;
        }
    }
    (lo, hi, status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compression::{ChainState, CompressedChain, Entry};
    use crate::eqsys::{build_reach_system, pin_unreachable, Polynomial, Term, VarRole};
    use crate::model::StateId;
    use crate::{counter, rat};

    fn quad_system(c0: Rational, c2: Rational) -> PolySystem {
        // x = c0 + c2 * x^2
        let mut sys = PolySystem::new();
        let x = sys.add_var("x".to_string(), VarRole::Reach { chain_state: 0 });
        let mut p = Polynomial::default();
        p.terms.push(Term { coef: c0, vars: vec![] });
        p.terms.push(Term { coef: c2, vars: vec![x, x] });
        sys.set_equation(x, p);
        sys
    }

    #[test]
    fn lfp_quarter_plus_half_square() {
        let sys = quad_system(rat(1, 4), rat(1, 2));
        let cfg = SolveConfig { mode: Mode::Float, eps: 1e-14, ..Default::default() };
        let v = lfp(&sys, &cfg).unwrap();
        let expect = 1.0 - 2f64.sqrt() / 2.0;
        assert!((v.get_f64(VarId(0)) - expect).abs() < 1e-9);
    }

    #[test]
    fn lfp_critical_double_root() {
        let sys = quad_system(rat(1, 2), rat(1, 2));
        let newton = SolveConfig { mode: Mode::Float, eps: 1e-12, newton: true, ..Default::default() };
        let v = lfp(&sys, &newton).unwrap();
        assert!((v.get_f64(VarId(0)) - 1.0).abs() < 1e-6);
        // Plain iteration crawls but stays a lower bound.
        let kleene = SolveConfig { mode: Mode::Float, eps: 1e-12, max_iters: 10_000, ..Default::default() };
        let v = lfp(&sys, &kleene).unwrap();
        assert!(v.status.is_capped());
        assert!(v.get_f64(VarId(0)) <= 1.0);
        assert!(v.get_f64(VarId(0)) > 0.99);
    }

    #[test]
    fn termination_of_always_down_chain_is_one() {
        use crate::eqsys::build_termination_system;
        use crate::model::{ActionRow, ActionId, OcMdp, StateId, Weight};
        let m = OcMdp::new(
            vec!["q".into()],
            vec!["a".into()],
            vec![vec![ActionRow {
                action: ActionId(0),
                weight: Weight::Down,
                succ: vec![(StateId(0), Rational::one())],
            }]],
        );
        let row = vec![vec![(ActionId(0), Rational::one())]];
        let (sys, block) = build_termination_system(&m, &row).unwrap();
        let cfg = SolveConfig { mode: Mode::Float, ..Default::default() };
        let v = lfp(&sys, &cfg).unwrap();
        assert!((v.get_f64(block.x[0][0]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lfp_constant_equation() {
        let sys = quad_system(Rational::new(3.into(), 10.into()), Rational::zero());
        let cfg = SolveConfig { mode: Mode::Float, ..Default::default() };
        let v = lfp(&sys, &cfg).unwrap();
        assert!((v.get_f64(VarId(0)) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn upper_bound_tracks_residual() {
        let sys = quad_system(rat(1, 4), rat(1, 2));
        let cfg = SolveConfig { mode: Mode::Float, eps: 1e-13, ..Default::default() };
        let v = lfp(&sys, &cfg).unwrap();
        let up = upper_bound_pass(&sys, &v).unwrap();
        let expect = 1.0 - 2f64.sqrt() / 2.0;
        assert!(up.get_f64(VarId(0)) + 1e-12 >= expect);
        assert!(up.get_f64(VarId(0)) - v.get_f64(VarId(0)) < 1e-8);

        // A deliberately capped run reports a wide but valid interval.
        let capped = SolveConfig { mode: Mode::Float, eps: 1e-13, max_iters: 3, ..Default::default() };
        let v = lfp(&sys, &capped).unwrap();
        assert!(v.status.is_capped());
        let up = upper_bound_pass(&sys, &v).unwrap();
        assert!(up.get_f64(VarId(0)) >= expect);
        assert!(up.get_f64(VarId(0)) - v.get_f64(VarId(0)) >= 1e-3);
    }

    /// Gambler's ruin on {0..4} with p = 1/2 as an explicit chain.
    fn ruin_chain() -> CompressedChain {
        let mut states = Vec::new();
        for k in 0..=4u64 {
            states.push(ChainState::Config { state: StateId(0), counter: counter(k) });
        }
        let rows = vec![
            vec![(0usize, Entry::Exact(Rational::one()))],
            vec![(0, Entry::Exact(rat(1, 2))), (2, Entry::Exact(rat(1, 2)))],
            vec![(1, Entry::Exact(rat(1, 2))), (3, Entry::Exact(rat(1, 2)))],
            vec![(2, Entry::Exact(rat(1, 2))), (4, Entry::Exact(rat(1, 2)))],
            vec![(4, Entry::Exact(Rational::one()))],
        ];
        CompressedChain::new(states, rows)
    }

    #[test]
    fn lfp_agrees_with_linear_solve_on_linear_systems() {
        let chain = ruin_chain();
        let target = vec![true, false, false, false, false];
        let (mut sys, y) = build_reach_system(&chain, &target).unwrap();
        pin_unreachable(&mut sys, &y, &chain, &target);
        let exact = solve_linear(&sys, &SolveConfig::default()).unwrap();
        let cfg = SolveConfig { mode: Mode::Float, eps: 1e-14, ..Default::default() };
        let iterated = lfp(&sys, &cfg).unwrap();
        for v in y.iter().flatten() {
            let a = rational_to_f64(exact.get_rational(*v).unwrap());
            let b = iterated.get_f64(*v);
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn gamblers_ruin_exact() {
        let chain = ruin_chain();
        let target = vec![true, false, false, false, false];
        let (mut sys, y) = build_reach_system(&chain, &target).unwrap();
        pin_unreachable(&mut sys, &y, &chain, &target);
        let v = solve_linear(&sys, &SolveConfig::default()).unwrap();
        let y1 = y[1].unwrap();
        assert_eq!(v.get_rational(y1).unwrap(), &rat(3, 4));
    }

    #[test]
    fn absorbing_only_reach_system() {
        let chain = ruin_chain();
        // Target everything: no unknowns remain and every value is one.
        let target = vec![true; 5];
        let (sys, y) = build_reach_system(&chain, &target).unwrap();
        assert_eq!(sys.n_vars(), 0);
        assert!(y.iter().all(Option::is_none));
        let probs = crate::model::reach_exact(&chain, &target).unwrap();
        assert!(probs.iter().all(|p| p.is_one()));
    }

    #[test]
    fn bot_row_gives_zero() {
        let states = vec![
            ChainState::Bot,
            ChainState::Config { state: StateId(0), counter: counter(1) },
            ChainState::Config { state: StateId(0), counter: counter(0) },
        ];
        let rows = vec![
            vec![(0usize, Entry::Exact(Rational::one()))],
            vec![(0, Entry::Exact(Rational::one()))],
            vec![(2, Entry::Exact(Rational::one()))],
        ];
        let chain = CompressedChain::new(states, rows);
        let target = vec![false, false, true];
        let (mut sys, y) = build_reach_system(&chain, &target).unwrap();
        pin_unreachable(&mut sys, &y, &chain, &target);
        let v = solve_linear(&sys, &SolveConfig::default()).unwrap();
        assert_eq!(v.get_rational(y[1].unwrap()).unwrap(), &Rational::zero());
    }

    #[test]
    fn value_bounds_bracket_ruin() {
        let rows: Vec<Vec<(usize, f64, f64)>> = vec![
            vec![],
            vec![(0, 0.5, 0.5), (2, 0.5, 0.5)],
            vec![(1, 0.5, 0.5), (3, 0.5, 0.5)],
            vec![(2, 0.5, 0.5), (4, 0.5, 0.5)],
            vec![],
        ];
        let absorbing = vec![true, false, false, false, true];
        let target = vec![true, false, false, false, false];
        let maybe = vec![true, true, true, true, false];
        let cfg = SolveConfig { mode: Mode::Float, eps: 1e-12, max_iters: 100_000, ..Default::default() };
        let (lo, hi, status) = reach_value_bounds(&rows, &absorbing, &target, &maybe, &cfg);
        assert!(!status.is_capped());
        assert!(lo[1] <= 0.75 && 0.75 <= hi[1]);
        assert!(hi[1] - lo[1] < 1e-9);
    }
}
