//! SMT-LIB v2 script construction over nonlinear real arithmetic, plus a
//! thin, solver-agnostic process boundary for optionally running an external
//! solver on emitted scripts.

use std::io::Write as _;
use std::time::{Duration, Instant};

use num_traits::{One, Signed, Zero};

use crate::eqsys::{PolySystem, Polynomial, VarId};
use crate::error::{Error, Result};
use crate::Rational;

/// Render a rational as an SMT real literal.
pub fn rational_smt(r: &Rational) -> String {
    let (num, den) = (r.numer(), r.denom());
    let body = if den == &num_bigint::BigInt::from(1) {
        format!("{}.0", num.magnitude())
    } else {
        format!("(/ {}.0 {}.0)", num.magnitude(), den.magnitude())
    };
    if r.is_negative() {
        format!("(- {body})")
    } else {
        body
    }
}

/// Render a polynomial right-hand side; terms over pinned variables vanish.
pub fn poly_smt(sys: &PolySystem, p: &Polynomial) -> String {
    let mut parts: Vec<String> = Vec::new();
    for term in &p.terms {
        if term.vars.iter().any(|v| sys.is_pinned(*v)) {
            continue;
        }
        if term.coef.is_zero() {
            continue;
        }
        let mut factors: Vec<String> = Vec::new();
        if !term.coef.is_one() || term.vars.is_empty() {
            factors.push(rational_smt(&term.coef));
        }
        for v in &term.vars {
            factors.push(sys.var(*v).name.clone());
        }
        parts.push(match factors.len() {
            1 => factors.pop().unwrap(),
            _ => format!("(* {})", factors.join(" ")),
        });
    }
    match parts.len() {
        0 => "0.0".to_string(),
        1 => parts.pop().unwrap(),
        _ => format!("(+ {})", parts.join(" ")),
    }
}

/// An SMT-LIB script under construction.
#[derive(Debug, Clone, Default)]
pub struct Script {
    lines: Vec<String>,
}

impl Script {
    pub fn new(logic: &str) -> Script {
        let mut s = Script::default();
        s.lines.push(format!("(set-logic {logic})"));
        s
    }

    pub fn comment(&mut self, text: &str) {
        for line in text.lines() {
            self.lines.push(format!("; {line}"));
        }
    }

    pub fn raw(&mut self, line: String) {
        self.lines.push(line);
    }

    pub fn declare_real(&mut self, name: &str) {
        self.lines.push(format!("(declare-const {name} Real)"));
    }

    pub fn assert(&mut self, expr: String) {
        self.lines.push(format!("(assert {expr})"));
    }

    pub fn check_sat(&mut self) {
        self.lines.push("(check-sat)".to_string());
    }

    pub fn get_value(&mut self, names: &[String]) {
        if !names.is_empty() {
            self.lines.push(format!("(get-value ({}))", names.join(" ")));
        }
    }

    pub fn render(&self) -> String {
        let mut out = self.lines.join("\n");
        out.push('\n');
        out
    }
}

/// Declare every non-pinned variable of the system satisfying `keep`.
pub fn declare_vars(script: &mut Script, sys: &PolySystem, keep: impl Fn(VarId) -> bool) {
    for (v, info) in sys.vars() {
        if !sys.is_pinned(v) && keep(v) {
            script.declare_real(&info.name);
        }
    }
}

/// Assert `name = rhs` for each equation variable satisfying `keep`.
pub fn assert_equations(script: &mut Script, sys: &PolySystem, keep: impl Fn(VarId) -> bool) {
    for (v, info) in sys.vars() {
        if sys.is_pinned(v) || !keep(v) {
            continue;
        }
        if let Some(p) = sys.equation(v) {
            script.assert(format!("(= {} {})", info.name, poly_smt(sys, p)));
        }
    }
}

/// Outcome of running an external solver.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverAnswer {
    Sat,
    Unsat,
    Unknown,
}

#[derive(Debug, Clone)]
pub struct SolverOutcome {
    pub answer: SolverAnswer,
    /// Parsed `(get-value ...)` bindings, where numeric.
    pub model: Vec<(String, Rational)>,
}

/// Run `command` (via the shell) feeding the script on stdin.
pub fn run_solver(command: &str, script: &str, timeout: Duration) -> Result<SolverOutcome> {
    let mut child = std::process::Command::new("sh")
        .arg("-c")
        .arg(command)
        .stdin(std::process::Stdio::piped())
        .stdout(std::process::Stdio::piped())
        .stderr(std::process::Stdio::null())
        .spawn()
        .map_err(|e| Error::Solver(format!("cannot start solver `{command}`: {e}")))?;
    child
        .stdin
        .take()
        .expect("piped stdin")
        .write_all(script.as_bytes())
        .map_err(|e| Error::Solver(format!("cannot feed solver: {e}")))?;
    let deadline = Instant::now() + timeout;
    loop {
        match child.try_wait().map_err(|e| Error::Solver(e.to_string()))? {
            Some(_) => break,
            None if Instant::now() > deadline => {
                let _ = child.kill();
                return Err(Error::Solver(format!("solver timed out after {timeout:?}")));
            }
            None => std::thread::sleep(Duration::from_millis(20)),
        }
    }
    let out = child.wait_with_output().map_err(|e| Error::Solver(e.to_string()))?;
    let text = String::from_utf8_lossy(&out.stdout);
    parse_solver_output(&text)
}

fn parse_solver_output(text: &str) -> Result<SolverOutcome> {
    let mut answer = None;
    for line in text.lines() {
        match line.trim() {
            "sat" => answer = Some(SolverAnswer::Sat),
            "unsat" => answer = Some(SolverAnswer::Unsat),
            "unknown" => answer = Some(SolverAnswer::Unknown),
            _ => {}
        }
        if answer.is_some() {
            break;
        }
    }
    let answer = answer.ok_or_else(|| Error::Solver("no sat/unsat answer in solver output".to_string()))?;
    let model = if answer == SolverAnswer::Sat { parse_bindings(text) } else { Vec::new() };
    Ok(SolverOutcome { answer, model })
}

/// Extract `(name value)` pairs from `(get-value ...)` style output. Values
/// that are not plain numerals or fractions are skipped.
fn parse_bindings(text: &str) -> Vec<(String, Rational)> {
    let tokens = tokenize(text);
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        // Pattern: "(" name value ")"
        if tokens[i] == "(" && i + 2 < tokens.len() && tokens[i + 1] != "(" && tokens[i + 1] != ")" {
            let name = tokens[i + 1].clone();
            if let Some((value, next)) = parse_value(&tokens, i + 2) {
                if next < tokens.len() && tokens[next] == ")" {
                    out.push((name, value));
                    i = next + 1;
                    continue;
                }
            }
        }
        i += 1;
    }
    out
}

fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    for ch in text.chars() {
        match ch {
            '(' | ')' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(ch.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn parse_numeral(tok: &str) -> Option<Rational> {
    if let Some((int_part, frac_part)) = tok.split_once('.') {
        let digits = format!("{int_part}{frac_part}");
        let num: num_bigint::BigInt = digits.parse().ok()?;
        let den = num_bigint::BigInt::from(10u32).pow(frac_part.len() as u32);
        Some(Rational::new(num, den))
    } else {
        let num: num_bigint::BigInt = tok.parse().ok()?;
        Some(Rational::from_integer(num))
    }
}

/// Parse a value at `i`: numeral, `(- v)`, or `(/ a b)`.
fn parse_value(tokens: &[String], i: usize) -> Option<(Rational, usize)> {
    if tokens.get(i)? == "(" {
        let op = tokens.get(i + 1)?;
        match op.as_str() {
            "-" => {
                let (v, next) = parse_value(tokens, i + 2)?;
                (tokens.get(next)? == ")").then_some((-v, next + 1))
            }
            "/" => {
                let (a, next) = parse_value(tokens, i + 2)?;
                let (b, next) = parse_value(tokens, next)?;
                (tokens.get(next)? == ")" && !b.is_zero()).then(|| (a / b, next + 1))
            }
            _ => None,
        }
    } else {
        parse_numeral(tokens.get(i)?).map(|v| (v, i + 1))
    }
}

/// Test-only numeric evaluation of emitted scripts: parse assertions and
/// check them under a variable environment.
#[cfg(test)]
pub(crate) mod testeval {
    use std::collections::HashMap;

    fn tokenize(text: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut cur = String::new();
        for ch in text.chars() {
            match ch {
                '(' | ')' => {
                    if !cur.is_empty() {
                        out.push(std::mem::take(&mut cur));
                    }
                    out.push(ch.to_string());
                }
                c if c.is_whitespace() => {
                    if !cur.is_empty() {
                        out.push(std::mem::take(&mut cur));
                    }
                }
                c => cur.push(c),
            }
        }
        if !cur.is_empty() {
            out.push(cur);
        }
        out
    }

    #[derive(Debug)]
    pub enum Sexp {
        Atom(String),
        List(Vec<Sexp>),
    }

    fn parse_sexp(tokens: &[String], i: usize) -> (Sexp, usize) {
        if tokens[i] == "(" {
            let mut items = Vec::new();
            let mut j = i + 1;
            while tokens[j] != ")" {
                let (s, next) = parse_sexp(tokens, j);
                items.push(s);
                j = next;
            }
            (Sexp::List(items), j + 1)
        } else {
            (Sexp::Atom(tokens[i].clone()), i + 1)
        }
    }

    /// Evaluate an arithmetic or boolean expression; booleans are 1.0 / 0.0.
    pub fn eval(s: &Sexp, env: &HashMap<String, f64>) -> f64 {
        match s {
            Sexp::Atom(a) => {
                if let Ok(v) = a.parse::<f64>() {
                    v
                } else {
                    *env.get(a).unwrap_or_else(|| panic!("unbound symbol {a}"))
                }
            }
            Sexp::List(items) => {
                let op = match &items[0] {
                    Sexp::Atom(a) => a.as_str(),
                    _ => panic!("operator expected"),
                };
                // Quantifiers are evaluated pointwise at the environment.
                if op == "forall" {
                    return eval(&items[2], env);
                }
                let args: Vec<f64> = items[1..].iter().map(|x| eval(x, env)).collect();
                let tol = 1e-7;
                match op {
                    "+" => args.iter().sum(),
                    "*" => args.iter().product(),
                    "/" => args[0] / args[1],
                    "-" => {
                        if args.len() == 1 {
                            -args[0]
                        } else {
                            args[0] - args[1]
                        }
                    }
                    "=" => ((args[0] - args[1]).abs() <= tol) as u8 as f64,
                    ">=" => (args[0] >= args[1] - tol) as u8 as f64,
                    "<=" => (args[0] <= args[1] + tol) as u8 as f64,
                    ">" => (args[0] > args[1] - tol) as u8 as f64,
                    "<" => (args[0] < args[1] + tol) as u8 as f64,
                    "and" => args.iter().all(|v| *v == 1.0) as u8 as f64,
                    "=>" => (args[0] != 1.0 || args[1] == 1.0) as u8 as f64,
                    other => panic!("unsupported operator {other}"),
                }
            }
        }
    }

    /// Collect `(assert ...)` bodies from a script.
    pub fn assertions(script: &str) -> Vec<Sexp> {
        let tokens = tokenize(script);
        let mut out = Vec::new();
        let mut i = 0;
        while i < tokens.len() {
            if tokens[i] == "(" && tokens.get(i + 1).map(String::as_str) == Some("assert") {
                let (body, next) = parse_sexp(&tokens, i + 2);
                out.push(body);
                assert_eq!(tokens[next], ")");
                i = next + 1;
            } else {
                i += 1;
            }
        }
        out
    }
}
