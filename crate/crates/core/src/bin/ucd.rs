//! Command-line front end. Results go to stdout, diagnostics to stderr.
//! Exit codes: 0 success, 1 domain error, 2 usage error.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};

use ucd_core::clho::{self, greedy_from, load_model, save_model, train, TrainConfig, ValueModel};
use ucd_core::dispatch::{mode_dynamics, Dynamics};
use ucd_core::hybrid::Trajectory;
use ucd_core::oracle::{enumerate_all, enumerate_optimal, graph_dp_optimal, OracleSolution, DEFAULT_BUDGET};
use ucd_core::scenario::{parse_scenario, CommitmentVector, DispatchVector, Scenario, SystemState};
use ucd_core::simulate::{compare_with_oracle, dispatch_from_values, simulate, DisturbanceScript};

#[derive(Parser)]
#[command(name = "ucd", version, about = "Microgrid unit commitment and dispatch")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a scenario file
    Validate { scenario: PathBuf },
    /// Solve the dispatch QP of one mode at one period
    Dispatch {
        scenario: PathBuf,
        #[arg(long)]
        t: usize,
        /// Commitment bitstring, unit 1 first
        #[arg(long)]
        mode: String,
        /// Previous dispatch `P_1,..,P_N[,P_DG][,P_DR]`; defaults to the
        /// initial state at t=1 and to an idle state otherwise
        #[arg(long, allow_hyphen_values = true)]
        prev: Option<String>,
        /// Previous commitment; inferred from positive outputs in --prev
        #[arg(long)]
        prev_mode: Option<String>,
    },
    /// Solve exactly by enumeration or graph dynamic programming
    Oracle {
        scenario: PathBuf,
        #[arg(long, conflicts_with = "graph")]
        enumerate: bool,
        #[arg(long)]
        graph: bool,
        /// Write every feasible schedule and its cost as CSV ("-" for stdout)
        #[arg(long)]
        dump_table: Option<PathBuf>,
    },
    /// Train value approximations and write a model document
    Train {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Basis::Quad)]
        basis: Basis,
        #[arg(long, default_value_t = 0.0)]
        regularization: f64,
        /// Also write the weight trajectories as CSV
        #[arg(long)]
        weights_csv: Option<PathBuf>,
    },
    /// Schedule greedily with a trained model
    Schedule {
        scenario: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, requires = "state")]
        from_t: Option<usize>,
        /// Dispatch realized at from_t - 1
        #[arg(long, requires = "from_t")]
        state: Option<String>,
        /// Commitment realized at from_t - 1; inferred from --state otherwise
        #[arg(long, requires = "from_t")]
        prev_mode: Option<String>,
        /// Write the trajectory CSV (full-horizon runs only)
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Accept a model trained on a different scenario of the same shape
        #[arg(long)]
        force: bool,
    },
    /// Closed-loop run with dispatch overrides
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Override `t=k:P_1,..,P_N[,P_DG][,P_DR]`; repeatable
        #[arg(long)]
        disturb: Vec<String>,
        /// JSON run report destination
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Compare the trained scheduler with exhaustive enumeration
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Basis {
    /// Per-coordinate squares and linears plus a constant
    Quad,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => LevelFilter::Warn,
        1 => LevelFilter::Info,
        _ => LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).target(env_logger::Target::Stderr).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    parse_scenario(&text).with_context(|| format!("{}", path.display()))
}

fn load_checked_model(path: &Path, s: &Scenario, force: bool) -> Result<ValueModel> {
    let m = load_model(path).with_context(|| format!("model {}", path.display()))?;
    m.check_scenario(s, force)?;
    Ok(m)
}

fn parse_values(text: &str, s: &Scenario) -> Result<DispatchVector> {
    let nums = text
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("bad dispatch list {text:?}"))?;
    dispatch_from_values(&nums, s).map_err(anyhow::Error::msg)
}

fn parse_mode(text: &str, n: usize) -> Result<CommitmentVector> {
    match CommitmentVector::parse_bits(text) {
        Some(c) if c.len() == n => Ok(c),
        _ => bail!("commitment {text:?} must be {n} binary digits"),
    }
}

fn infer_mode(p: &DispatchVector) -> CommitmentVector {
    CommitmentVector::new(p.thermal.iter().map(|&v| v > 0.0).collect())
}

fn previous_state(
    s: &Scenario,
    t: usize,
    prev: Option<&str>,
    prev_mode: Option<&str>,
) -> Result<SystemState> {
    let n = s.n_units();
    let dispatch = match prev {
        Some(text) => parse_values(text, s)?,
        None if t == 1 => s.initial_dispatch.clone(),
        None => DispatchVector::zeros(n),
    };
    let commitment = match (prev_mode, prev) {
        (Some(bits), _) => parse_mode(bits, n)?,
        (None, Some(_)) => infer_mode(&dispatch),
        (None, None) if t == 1 => s.initial_commitment.clone(),
        (None, None) => CommitmentVector::all_off(n),
    };
    Ok(SystemState::new(commitment, dispatch))
}

fn format_dispatch(s: &Scenario, p: &DispatchVector) -> String {
    let mut parts: Vec<String> = p.thermal.iter().map(|v| format!("{v:.1}")).collect();
    if s.has_dg() {
        parts.push(format!("{:.1}", p.dg));
    }
    if s.has_dr() {
        parts.push(format!("{:.1}", p.dr));
    }
    parts.join(",")
}

fn open_out(path: &Path) -> Result<Box<dyn Write>> {
    if path == Path::new("-") {
        Ok(Box::new(io::stdout().lock()))
    } else {
        let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
        Ok(Box::new(BufWriter::new(f)))
    }
}

fn write_trajectory(traj: &Trajectory, path: &Path) -> Result<()> {
    traj.write_csv(open_out(path)?)?;
    Ok(())
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Validate { scenario } => {
            let s = load_scenario(&scenario)?;
            println!("ok: N={} T={} fingerprint={}", s.n_units(), s.horizon(), s.fingerprint());
        }
        Command::Dispatch { scenario, t, mode, prev, prev_mode } => {
            let s = load_scenario(&scenario)?;
            if t == 0 || t > s.horizon() {
                bail!("--t must lie in 1..={}", s.horizon());
            }
            let mode = parse_mode(&mode, s.n_units())?;
            let prev = previous_state(&s, t, prev.as_deref(), prev_mode.as_deref())?;
            let started = Instant::now();
            let p = mode_dynamics(&s, t, &mode, &prev)?;
            info!("solved in {:?}: {:?}", started.elapsed(), p);
            println!("{}", format_dispatch(&s, &p));
        }
        Command::Oracle { scenario, enumerate, graph, dump_table } => {
            let s = load_scenario(&scenario)?;
            let started = Instant::now();
            let sol: OracleSolution = if enumerate || (!graph && s.ramp_enforced) {
                enumerate_optimal(&s, DEFAULT_BUDGET)?
            } else {
                graph_dp_optimal(&s)?
            };
            info!("oracle finished in {:?}", started.elapsed());
            println!("{},{}", sol.schedule, sol.cost);
            if let Some(path) = dump_table {
                let mut w = csv::Writer::from_writer(open_out(&path)?);
                w.write_record(["schedule", "cost"])?;
                for (sched, cost) in enumerate_all(&s, DEFAULT_BUDGET)? {
                    w.write_record([sched.to_string(), cost.to_string()])?;
                }
                w.flush()?;
            }
        }
        Command::Train { scenario, out, samples, seed, basis: Basis::Quad, regularization, weights_csv } => {
            let s = load_scenario(&scenario)?;
            let cfg = TrainConfig { samples, regularization, seed };
            let started = Instant::now();
            let m = train(&s, &cfg)?;
            info!("trained {} weight vectors in {:?}", m.entries.len(), started.elapsed());
            save_model(&m, &out)?;
            if let Some(path) = weights_csv {
                clho::export_weights_csv(&m, open_out(&path)?)?;
            }
            println!("{}", out.display());
        }
        Command::Schedule { scenario, model, from_t, state, prev_mode, csv, force } => {
            let s = load_scenario(&scenario)?;
            let m = load_checked_model(&model, &s, force)?;
            let d = Dynamics::new(&s)?;
            match from_t {
                Some(t) => {
                    if t == 0 || t > s.horizon() {
                        bail!("--from-t must lie in 1..={}", s.horizon());
                    }
                    if csv.is_some() {
                        bail!("--csv is only available for full-horizon runs");
                    }
                    let prev = previous_state(&s, t, state.as_deref(), prev_mode.as_deref())?;
                    let states = greedy_from(&m, &d, t, &prev)?;
                    let mut tail = 0.0;
                    let mut last = prev.commitment.clone();
                    for st in &states {
                        tail += ucd_core::cost::running_cost(&s, &st.commitment, &st.dispatch)
                            + ucd_core::cost::switching_cost(&s, &last, &st.commitment);
                        last = st.commitment.clone();
                    }
                    let modes: Vec<String> = states.iter().map(|st| st.commitment.to_string()).collect();
                    println!("{},{}", modes.join("-"), tail);
                }
                None => {
                    let states = greedy_from(&m, &d, 1, &s.initial_state())?;
                    let traj = Trajectory::from_states(&s, &states);
                    println!("{},{}", traj.schedule(), traj.grand_total);
                    if let Some(path) = csv {
                        write_trajectory(&traj, &path)?;
                    }
                }
            }
        }
        Command::Simulate { scenario, model, disturb, report, csv, force } => {
            let s = load_scenario(&scenario)?;
            let m = load_checked_model(&model, &s, force)?;
            let overrides = disturb
                .iter()
                .map(|d| DisturbanceScript::parse_entry(d, &s))
                .collect::<Result<Vec<_>, _>>()?;
            let r = simulate(&s, &m, &DisturbanceScript::new(overrides))?;
            serde_json::to_writer_pretty(open_out(&report)?, &r)?;
            if let Some(path) = csv {
                write_trajectory(&r.trajectory, &path)?;
            }
            println!("{},{}", r.schedule, r.total_cost);
            for c in &r.comparisons {
                if c.matches == Some(false) {
                    eprintln!("t={}: realized tail {} differs from oracle tail {:?}", c.t, c.realized_tail, c.oracle_tail);
                }
            }
        }
        Command::Compare { scenario, model, force } => {
            let s = load_scenario(&scenario)?;
            let m = load_checked_model(&model, &s, force)?;
            let c = compare_with_oracle(&s, &m)?;
            let mut w = csv::Writer::from_writer(io::stdout().lock());
            w.write_record(["schedule", "cost", "oracle_argmin", "clho"])?;
            for row in &c.rows {
                w.write_record([
                    row.schedule.clone(),
                    row.cost.to_string(),
                    (Some(&row.schedule) == c.oracle_schedule.as_ref()).to_string(),
                    (row.schedule == c.clho_schedule).to_string(),
                ])?;
            }
            w.flush()?;
            match c.matches {
                Some(true) => eprintln!("CLHO schedule {} matches the oracle argmin", c.clho_schedule),
                Some(false) => eprintln!(
                    "CLHO schedule {} differs from the oracle argmin {}",
                    c.clho_schedule,
                    c.oracle_schedule.as_deref().unwrap_or("?")
                ),
                None => eprintln!("CLHO schedule {} (oracle over budget)", c.clho_schedule),
            }
        }
    }
    Ok(())
}
