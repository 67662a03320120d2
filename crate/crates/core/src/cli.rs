//! Command-line surface. Exit codes: 0 = yes, 1 = no, 2 = inconclusive,
//! 3 = usage or data error. Reports are line-oriented `key: value` pairs on
//! stdout; diagnostics go to stderr.

use std::path::PathBuf;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::format;
use crate::model::{Bound, Config, ObjectiveKind, OcMdp, Query};
use crate::realise::{self, RealisabilityResult, RealisabilityTarget};
use crate::smt::{run_solver, SolverAnswer};
use crate::solvers::{Mode, SolveConfig, SolveStatus};
use crate::strategies::IntervalStrategy;
use crate::verify::{self, Answer, EmitOptions, Polarity, ProbBracket, Verdict};

#[derive(Parser)]
#[command(name = "ocmdp", about = "Interval-strategy analysis of one-counter MDPs")]
struct CliArgs {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct SolverOpts {
    /// Numeric mode for solvers.
    #[arg(long, default_value = "rational", value_parser = ["rational", "float"])]
    mode: String,
    /// Convergence tolerance for fixed-point iterations.
    #[arg(long, default_value_t = 1e-12)]
    eps: f64,
    /// Iteration cap for fixed-point and value iterations.
    #[arg(long, default_value_t = 1_000_000)]
    max_iters: usize,
    /// Enable per-component Newton acceleration.
    #[arg(long)]
    newton: bool,
}

impl SolverOpts {
    fn config(&self) -> SolveConfig {
        SolveConfig {
            mode: if self.mode == "float" { Mode::Float } else { Mode::Rational },
            eps: self.eps,
            max_iters: self.max_iters,
            newton: self.newton,
        }
    }
}

#[derive(Args, Clone)]
struct QueryOverrides {
    /// Override the query objective.
    #[arg(long, value_parser = ["reach", "selterm"])]
    objective: Option<String>,
    /// Override the counter bound (a number, or `inf`).
    #[arg(long)]
    bound: Option<String>,
    /// Override the threshold (a rational like `25/32`).
    #[arg(long)]
    theta: Option<String>,
    /// Override the initial configuration, as `state counter`.
    #[arg(long)]
    init: Option<String>,
}

impl QueryOverrides {
    fn apply(&self, q: &mut Query, m: &OcMdp) -> Result<()> {
        if let Some(o) = &self.objective {
            q.objective.kind =
                if o == "reach" { ObjectiveKind::Reach } else { ObjectiveKind::SelTerm };
        }
        if let Some(b) = &self.bound {
            q.bound = format::parse_bound(b, 0)?;
        }
        if let Some(t) = &self.theta {
            q.theta = format::parse_rational(t, 0)?;
        }
        if let Some(i) = &self.init {
            let mut words = i.split_whitespace();
            let (Some(state), Some(counter)) = (words.next(), words.next()) else {
                return Err(Error::Domain("--init expects `state counter`".to_string()));
            };
            q.init = Config {
                state: m
                    .state_by_name(state)
                    .ok_or_else(|| Error::Domain(format!("unknown state `{state}`")))?,
                counter: format::parse_counter(counter, 0)?,
            };
        }
        let violations = q.validate(m);
        if !violations.is_empty() {
            return Err(Error::Domain(format!("invalid query: {}", violations.join("; "))));
        }
        Ok(())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Verify an interval strategy against a threshold query.
    Verify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long)]
        query: PathBuf,
        /// Also write the verification sentence as an SMT-LIB script.
        #[arg(long)]
        smt_out: Option<PathBuf>,
        /// External SMT solver command used to settle inconclusive verdicts.
        #[arg(long, env = "OCMDP_SOLVER")]
        solver_cmd: Option<String>,
        #[arg(long, default_value_t = 60)]
        solver_timeout: u64,
        #[command(flatten)]
        solver: SolverOpts,
        #[command(flatten)]
        overrides: QueryOverrides,
    },
    /// Search for a pure interval strategy meeting the threshold.
    RealisePure {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        query: PathBuf,
        /// Fixed interval partition, e.g. `1-3,4-inf`.
        #[arg(long)]
        partition: Option<String>,
        /// Fixed cyclic window, e.g. `period=3; window=1-1,2-3`.
        #[arg(long)]
        periodic: Option<String>,
        /// Parameterised search: maximum number of intervals.
        #[arg(long)]
        d: Option<usize>,
        /// Parameterised search: maximum size of bounded intervals.
        #[arg(long)]
        n: Option<u64>,
        /// Search over cyclic strategies in the parameterised case.
        #[arg(long)]
        cis: bool,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        #[command(flatten)]
        solver: SolverOpts,
        #[command(flatten)]
        overrides: QueryOverrides,
    },
    /// Randomised fixed-interval realisability over a finite bound.
    RealiseRand {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long)]
        partition: String,
        /// Directory to write one script per support assignment.
        #[arg(long)]
        smt_dir: Option<PathBuf>,
        #[arg(long, env = "OCMDP_SOLVER")]
        solver_cmd: Option<String>,
        #[arg(long, default_value_t = 60)]
        solver_timeout: u64,
        #[command(flatten)]
        solver: SolverOpts,
        #[command(flatten)]
        overrides: QueryOverrides,
    },
    /// Build and dump the compressed chain of a strategy.
    Compress {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        /// Query providing the initial configuration to isolate.
        #[arg(long)]
        query: Option<PathBuf>,
        /// Write the dump here instead of stdout.
        #[arg(long)]
        dump: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverOpts,
    },
    /// Emit verification or realisability sentences as SMT-LIB scripts.
    EmitSmt {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        query: PathBuf,
        /// Verification script for this strategy.
        #[arg(long)]
        strategy: Option<PathBuf>,
        /// Keep strategy probabilities symbolic in the verification script.
        #[arg(long)]
        symbolic_strategy: bool,
        #[arg(long, default_value = "negated", value_parser = ["negated", "universal"])]
        polarity: String,
        /// Realisability script over this partition.
        #[arg(long)]
        partition: Option<String>,
        /// Realisability script over this cyclic window.
        #[arg(long)]
        periodic: Option<String>,
        /// Output path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: QueryOverrides,
    },
    /// Generate benchmark instances in the model/query file formats.
    Generate {
        /// Square-root-sum gadget: comma-separated inputs, e.g. `2,3,5`.
        #[arg(long)]
        sqrt_sum: Option<String>,
        /// Right-hand side of the square-root-sum comparison.
        #[arg(long)]
        y: Option<u64>,
        /// Use the bounded variant with its computed counter ceiling.
        #[arg(long)]
        bounded: bool,
        /// Override the computed ceiling of the bounded variant.
        #[arg(long)]
        bound_override: Option<String>,
        /// Hamiltonian-cycle reduction: edges as `0-1,1-2,...`.
        #[arg(long)]
        hamiltonian: Option<String>,
        #[arg(long, default_value_t = 0)]
        initial: usize,
        #[arg(long)]
        vertices: Option<usize>,
        /// A catalog instance: fig1, fig2a or fig4.
        #[arg(long)]
        catalog: Option<String>,
        #[arg(long)]
        out_model: PathBuf,
        #[arg(long)]
        out_query: Option<PathBuf>,
        #[arg(long)]
        out_strategy: Option<PathBuf>,
    },
    /// Export the Mealy counterpart of a strategy.
    MealyExport {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        strategy: PathBuf,
        #[arg(long)]
        k_init: String,
        /// Materialise all memory states, not only the reachable ones.
        #[arg(long)]
        full: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match CliArgs::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            // clap's help/version exit zero; usage errors exit 3.
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            3
        }
    }
}

fn load_model(path: &PathBuf) -> Result<OcMdp> {
    format::parse_model(&std::fs::read_to_string(path)?)
}

fn load_query(path: &PathBuf, m: &OcMdp) -> Result<Query> {
    format::parse_query(&std::fs::read_to_string(path)?, m)
}

fn load_strategy(path: &PathBuf, m: &OcMdp) -> Result<IntervalStrategy> {
    format::parse_strategy(&std::fs::read_to_string(path)?, m)
}

fn answer_code(a: Answer) -> i32 {
    match a {
        Answer::Yes => 0,
        Answer::No => 1,
        Answer::Inconclusive => 2,
    }
}

fn status_line(s: &SolveStatus) -> String {
    match s {
        SolveStatus::Exact => "exact".to_string(),
        SolveStatus::Converged { eps } => format!("converged eps={eps:e}"),
        SolveStatus::Capped { iterations, residual } => {
            format!("capped iterations={iterations} residual={residual:e}")
        }
    }
}

fn print_bracket(b: &ProbBracket) {
    match b {
        ProbBracket::Exact(v) => {
            println!("probability: {}", format::print_rational(v));
            println!("probability-lo: {}", format::print_rational(v));
            println!("probability-hi: {}", format::print_rational(v));
        }
        ProbBracket::Approx { lo, hi } => {
            println!("probability-lo: {lo:?}");
            println!("probability-hi: {hi:?}");
        }
    }
}

fn print_verdict(v: &Verdict, q: &Query) {
    println!(
        "answer: {}",
        match v.answer {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Inconclusive => "inconclusive",
        }
    );
    print_bracket(&v.bracket);
    println!("theta: {}", format::print_rational(&q.theta));
    println!("status: {}", status_line(&v.status));
    println!("transformed: {}", v.transformed);
    println!("partition: {}", format::print_partition(&v.partition));
}

fn print_realisability(r: &RealisabilityResult, m: &OcMdp, q: &Query) {
    println!(
        "answer: {}",
        match r.answer {
            Answer::Yes => "yes",
            Answer::No => "no",
            Answer::Inconclusive => "inconclusive",
        }
    );
    println!("theta: {}", format::print_rational(&q.theta));
    println!("candidates: {}", r.stats.candidates);
    println!("prunes: {}", r.stats.prunes);
    if let Some(w) = &r.witness {
        print_bracket(&w.bracket);
        println!("witness-partition: {}", format::print_partition(&w.partition));
        println!("witness:");
        print!("{}", format::print_strategy(&w.strategy, m));
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Verify {
            model,
            strategy,
            query,
            smt_out,
            solver_cmd,
            solver_timeout,
            solver,
            overrides,
        } => {
            let m = load_model(&model)?;
            let s = load_strategy(&strategy, &m)?;
            let mut q = load_query(&query, &m)?;
            overrides.apply(&mut q, &m)?;
            let cfg = solver.config();
            let mut v = verify::verify(&m, &s, &q, &cfg)?;
            if let Some(path) = &smt_out {
                let script = verify::emit_verification_smt(&m, &s, &q, &EmitOptions::default())?;
                std::fs::write(path, script)?;
                println!("smt-out: {}", path.display());
            }
            if v.answer == Answer::Inconclusive {
                if let Some(cmd) = &solver_cmd {
                    let script =
                        verify::emit_verification_smt(&m, &s, &q, &EmitOptions::default())?;
                    let out = run_solver(cmd, &script, Duration::from_secs(solver_timeout))?;
                    v.answer = match out.answer {
                        SolverAnswer::Unsat => Answer::Yes,
                        SolverAnswer::Sat => Answer::No,
                        SolverAnswer::Unknown => Answer::Inconclusive,
                    };
                    println!("solver-decision: {:?}", out.answer);
                }
            }
            print_verdict(&v, &q);
            Ok(answer_code(v.answer))
        }
        Command::RealisePure {
            model,
            query,
            partition,
            periodic,
            d,
            n,
            cis,
            jobs,
            solver,
            overrides,
        } => {
            let m = load_model(&model)?;
            let mut q = load_query(&query, &m)?;
            overrides.apply(&mut q, &m)?;
            let cfg = solver.config();
            let r = match (&partition, &periodic, d, n) {
                (Some(spec), None, _, _) => {
                    let p = format::parse_partition(spec, 0)?;
                    realise::realise_pure_fixed(&m, &q, &p, &cfg, jobs)?
                }
                (None, Some(spec), _, _) => {
                    let pp = format::parse_periodic(spec, 0)?;
                    realise_pure_fixed_cis(&m, &q, &pp, &cfg, jobs)?
                }
                (None, None, Some(d), Some(n)) if cis => {
                    realise::realise_pure_cis_param(&m, &q, d, n, &cfg, jobs)?
                }
                (None, None, Some(d), Some(n)) => {
                    realise::realise_pure_param(&m, &q, d, n, &cfg, jobs)?
                }
                _ => {
                    return Err(Error::Domain(
                        "give either --partition, --periodic, or both --d and --n".to_string(),
                    ))
                }
            };
            print_realisability(&r, &m, &q);
            Ok(answer_code(r.answer))
        }
        Command::RealiseRand {
            model,
            query,
            partition,
            smt_dir,
            solver_cmd,
            solver_timeout,
            solver,
            overrides,
        } => {
            let m = load_model(&model)?;
            let mut q = load_query(&query, &m)?;
            overrides.apply(&mut q, &m)?;
            let p = format::parse_partition(&partition, 0)?;
            let r = realise::realise_rand_bounded(
                &m,
                &q,
                &p,
                solver_cmd.as_deref(),
                Duration::from_secs(solver_timeout),
                &solver.config(),
            )?;
            if let Some(dir) = &smt_dir {
                std::fs::create_dir_all(dir)?;
                for (i, s) in r.scripts.iter().enumerate() {
                    let path = dir.join(format!("support_{i:03}.smt2"));
                    std::fs::write(&path, &s.script)?;
                }
                println!("scripts-written: {}", r.scripts.len());
            }
            print_realisability(&r, &m, &q);
            Ok(answer_code(r.answer))
        }
        Command::Compress { model, strategy, query, dump, solver } => {
            let m = load_model(&model)?;
            let s = load_strategy(&strategy, &m)?;
            let base = match &s.base {
                crate::strategies::StrategyBase::Oeis { partition, .. } => partition.clone(),
                crate::strategies::StrategyBase::Cis(_) => {
                    return Err(Error::Unsupported(
                        "dumping cyclic compressions is not supported; use verify".to_string(),
                    ))
                }
            };
            let p = match &query {
                Some(path) => {
                    let q = load_query(path, &m)?;
                    crate::partitions::prepare(&base, &q.init.counter)
                }
                None => crate::partitions::refine_partition(&base),
            };
            let bound = s.bound();
            let mode = match (&bound, solver.config().mode) {
                (Bound::Finite(_), Mode::Rational) => crate::compression::CompressMode::Rational,
                _ => crate::compression::CompressMode::Float(solver.config()),
            };
            let comp =
                crate::compression::compress(&m, crate::compression::StratSpec::Concrete(&s), &p, &bound, mode)?;
            let names: Vec<String> = m.states().map(|q| m.state_name(q).to_string()).collect();
            let text = format::print_chain(&comp.comp.chain, &names, comp.comp.sys.as_ref());
            match dump {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
        Command::EmitSmt {
            model,
            query,
            strategy,
            symbolic_strategy,
            polarity,
            partition,
            periodic,
            out,
            overrides,
        } => {
            let m = load_model(&model)?;
            let mut q = load_query(&query, &m)?;
            overrides.apply(&mut q, &m)?;
            let script = match (&strategy, &partition, &periodic) {
                (Some(path), None, None) => {
                    let s = load_strategy(path, &m)?;
                    let opts = EmitOptions {
                        polarity: if polarity == "universal" {
                            Polarity::Universal
                        } else {
                            Polarity::NegatedExistential
                        },
                        symbolic_strategy,
                    };
                    verify::emit_verification_smt(&m, &s, &q, &opts)?
                }
                (None, Some(spec), None) => {
                    let p = format::parse_partition(spec, 0)?;
                    realise::emit_realisability_smt(&m, &q, RealisabilityTarget::Oeis(&p))?
                }
                (None, None, Some(spec)) => {
                    let pp = format::parse_periodic(spec, 0)?;
                    realise::emit_realisability_smt(
                        &m,
                        &q,
                        RealisabilityTarget::Cis { period: pp.period.clone(), window: &pp.window },
                    )?
                }
                _ => {
                    return Err(Error::Domain(
                        "give exactly one of --strategy, --partition, --periodic".to_string(),
                    ))
                }
            };
            match out {
                Some(path) => std::fs::write(path, script)?,
                None => print!("{script}"),
            }
            Ok(0)
        }
        Command::Generate {
            sqrt_sum,
            y,
            bounded,
            bound_override,
            hamiltonian,
            initial,
            vertices,
            catalog,
            out_model,
            out_query,
            out_strategy,
        } => {
            let (m, q, s) = match (&sqrt_sum, &hamiltonian, &catalog) {
                (Some(xs), None, None) => {
                    let xs: Vec<u64> = xs
                        .split(',')
                        .map(|v| v.trim().parse().map_err(|_| Error::Domain(format!("bad input `{v}`"))))
                        .collect::<Result<_>>()?;
                    let inst = crate::generators::SqrtSumInstance::new(
                        xs,
                        y.ok_or_else(|| Error::Domain("--y is required".to_string()))?,
                    )?;
                    if bounded {
                        let over = bound_override
                            .as_deref()
                            .map(|b| format::parse_counter(b, 0))
                            .transpose()?;
                        let (m, _, q) = crate::generators::gen_sqrt_sum_bounded(&inst, over)?;
                        (m, q, None)
                    } else {
                        let (m, q) = crate::generators::gen_sqrt_sum(&inst)?;
                        (m, q, None)
                    }
                }
                (None, Some(edges), None) => {
                    let nv = vertices
                        .ok_or_else(|| Error::Domain("--vertices is required".to_string()))?;
                    let edges: Vec<(usize, usize)> = edges
                        .split(',')
                        .map(|e| {
                            let (a, b) = e
                                .trim()
                                .split_once('-')
                                .ok_or_else(|| Error::Domain(format!("bad edge `{e}`")))?;
                            Ok((
                                a.parse().map_err(|_| Error::Domain(format!("bad vertex `{a}`")))?,
                                b.parse().map_err(|_| Error::Domain(format!("bad vertex `{b}`")))?,
                            ))
                        })
                        .collect::<Result<_>>()?;
                    let g = crate::generators::DirectedGraph::new(nv, edges, initial)?;
                    let (m, q) = crate::generators::gen_hamiltonian(&g)?;
                    (m, q, None)
                }
                (None, None, Some(name)) => {
                    let cat = crate::generators::example_catalog();
                    let inst = cat
                        .get(name)
                        .ok_or_else(|| Error::Domain(format!("unknown catalog instance `{name}`")))?;
                    (inst.model.clone(), inst.query.clone(), inst.strategy.clone())
                }
                _ => {
                    return Err(Error::Domain(
                        "give exactly one of --sqrt-sum, --hamiltonian, --catalog".to_string(),
                    ))
                }
            };
            std::fs::write(&out_model, format::print_model(&m))?;
            println!("model: {}", out_model.display());
            if let Some(path) = &out_query {
                std::fs::write(path, format::print_query(&q, &m))?;
                println!("query: {}", path.display());
            }
            if let (Some(path), Some(s)) = (&out_strategy, &s) {
                std::fs::write(path, format::print_strategy(s, &m))?;
                println!("strategy: {}", path.display());
            }
            Ok(0)
        }
        Command::MealyExport { model, strategy, k_init, full, out } => {
            let m = load_model(&model)?;
            let s = load_strategy(&strategy, &m)?;
            let k = format::parse_counter(&k_init, 0)?;
            let machine = crate::strategies::export_mealy(&s, &m, &k, full)?;
            let text = format::print_mealy(&machine, &m);
            match out {
                Some(path) => std::fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(0)
        }
    }
}

/// Fixed-window pure realisability over cyclic strategies.
fn realise_pure_fixed_cis(
    m: &OcMdp,
    q: &Query,
    pp: &crate::partitions::PeriodicPartition,
    cfg: &SolveConfig,
    jobs: usize,
) -> Result<RealisabilityResult> {
    if q.bound != Bound::Infinite {
        return Err(Error::Precondition("cyclic strategies assume no counter ceiling".to_string()));
    }
    realise::realise_pure_fixed_cis(m, q, pp, cfg, jobs)
}
