//! Command-line front end: loads scenario files, dispatches to the engine,
//! and prints versioned CSV tables.
//!
//! Exit codes: 0 success; 2 input error; 3 tolerance exceeded (`gap`,
//! `props`); 4 solver failure.

mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quasidual::{
    cce_evaluate, duality_gap, enumerate_partitions, equality_k, fenchel_conjugate, grid_k,
    h_value, k_value, run_property_suite, AtomValue, Density, EngineError, FiniteSpace, GridCfg,
    MapSpec, Partition, PerAtom,
};
use scenario::{load_scenario, MapKind, Scenario, ScenarioError};

#[derive(Parser)]
#[command(
    name = "quasidual",
    about = "Dual representations of quasiconvex conditional maps",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArgs {
    /// Path to a TOML scenario file.
    scenario: PathBuf,
    /// Override the number of random solver restarts.
    #[arg(long)]
    restarts: Option<usize>,
    /// Override the solver seed.
    #[arg(long, env = "QUASIDUAL_SEED")]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate the primal map per atom.
    Eval(ScenarioArgs),
    /// Evaluate K(X,Q) per atom (scenario must provide q).
    K(ScenarioArgs),
    /// Run the dual search and print the full report.
    H(ScenarioArgs),
    /// Compare primal and dual values; exit 3 when the gap exceeds --tol.
    Gap {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Maximum tolerated per-atom |primal - dual|.
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Fenchel conjugate per atom (cash-invariant maps; scenario must provide q).
    Fenchel(ScenarioArgs),
    /// Enumerate coarsenings and print primal/dual values per coarse block.
    CoarsenSweep(ScenarioArgs),
    /// Run the seeded property suite and print its report.
    Props {
        #[arg(long, env = "QUASIDUAL_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 50)]
        cases: usize,
    },
    /// Cross-check the engine against the brute-force grid oracles.
    Oracle {
        #[command(flatten)]
        common: ScenarioArgs,
        /// Grid spacing.
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        /// Half-width of the symmetric grid box.
        #[arg(long = "box", default_value_t = 5.0)]
        box_half: f64,
    },
}

enum CliError {
    Input(String),
    Solver(String),
    GapExceeded,
    SuiteFailed,
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<quasidual::MapError> for CliError {
    fn from(e: quasidual::MapError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::BracketExhausted { .. } => CliError::Solver(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<quasidual::OracleError> for CliError {
    fn from(e: quasidual::OracleError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::GapExceeded) => ExitCode::from(3),
        Err(CliError::SuiteFailed) => ExitCode::from(3),
        Err(CliError::Solver(msg)) => {
            eprintln!("solver failure: {msg}");
            ExitCode::from(4)
        }
    }
}

fn atom_name(space: &FiniteSpace, atom: &[usize]) -> String {
    atom.iter()
        .map(|&i| space.labels()[i].as_str())
        .collect::<Vec<_>>()
        .join("+")
}

fn fmt_value(v: AtomValue) -> String {
    match v {
        AtomValue::Val(x) if x.is_finite() => format!("{x:.12}"),
        AtomValue::Val(x) if x == f64::INFINITY => "inf".to_string(),
        AtomValue::Val(_) => "-inf".to_string(),
        AtomValue::QNull => "q-null".to_string(),
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.12}")
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn print_per_atom(space: &FiniteSpace, g: &Partition, values: &PerAtom) {
    println!("schema_version,atom,value");
    for (idx, atom) in g.blocks().iter().enumerate() {
        println!("1,{},{}", atom_name(space, atom), fmt_value(values.get(idx)));
    }
}

fn print_dual_report(space: &FiniteSpace, g: &Partition, rep: &quasidual::DualReport) {
    println!("schema_version,atom,primal,dual,gap,argmax_weights,iterations");
    for (atom, a) in g.blocks().iter().zip(&rep.atoms) {
        let weights = a
            .argmax_weights
            .iter()
            .map(|w| format!("{w:.12}"))
            .collect::<Vec<_>>()
            .join(",");
        println!(
            "1,{},{},{},{},\"{}\",{}",
            atom_name(space, atom),
            fmt_f64(a.primal),
            fmt_f64(a.dual),
            fmt_f64(a.gap),
            weights,
            a.iterations
        );
    }
}

fn apply_overrides(sc: &mut Scenario, common: &ScenarioArgs) {
    if let Some(r) = common.restarts {
        sc.solver.restarts = r;
    }
    if let Some(s) = common.seed {
        sc.solver.seed = s;
    }
}

fn require_spec(sc: &Scenario) -> Result<&MapSpec, CliError> {
    match &sc.map {
        MapKind::Spec(m) => Ok(m),
        MapKind::Cce(_) => Err(CliError::Input(
            "cce maps support the eval command only; use family \"mirrored_entropic\" \
             for the dual machinery of exponential certainty equivalents"
                .into(),
        )),
    }
}

fn require_q(sc: &Scenario) -> Result<&Density, CliError> {
    sc.q
        .as_ref()
        .ok_or_else(|| CliError::Input("this command needs a [q] section in the scenario".into()))
}

fn load(common: &ScenarioArgs) -> Result<Scenario, CliError> {
    let mut sc = load_scenario(&common.scenario)?;
    apply_overrides(&mut sc, common);
    Ok(sc)
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Eval(common) => {
            let sc = load(&common)?;
            let values = match &sc.map {
                MapKind::Spec(m) => m.evaluate(&sc.space, &sc.x)?,
                MapKind::Cce(u) => cce_evaluate(*u, &sc.space, &sc.x, &sc.g)?,
            };
            println!("schema_version,atom,value");
            for atom in sc.g.blocks() {
                println!(
                    "1,{},{}",
                    atom_name(&sc.space, atom),
                    fmt_f64(values.values()[atom[0]])
                );
            }
            Ok(())
        }
        Command::K(common) => {
            let sc = load(&common)?;
            let m = require_spec(&sc)?;
            let q = require_q(&sc)?;
            let k = k_value(&sc.space, m, &sc.x, q, &sc.solver)?;
            print_per_atom(&sc.space, m.partition(), &k);
            Ok(())
        }
        Command::H(common) => {
            let sc = load(&common)?;
            let m = require_spec(&sc)?;
            let rep = h_value(&sc.space, m, &sc.x, &sc.solver)?;
            print_dual_report(&sc.space, m.partition(), &rep);
            Ok(())
        }
        Command::Gap { common, tol } => {
            let sc = load(&common)?;
            let m = require_spec(&sc)?;
            let rep = duality_gap(&sc.space, m, &sc.x, &sc.solver)?;
            print_dual_report(&sc.space, m.partition(), &rep);
            if rep.max_abs_gap() > tol {
                return Err(CliError::GapExceeded);
            }
            Ok(())
        }
        Command::Fenchel(common) => {
            let sc = load(&common)?;
            let m = require_spec(&sc)?;
            let q = require_q(&sc)?;
            let conj = fenchel_conjugate(&sc.space, m, q, &sc.solver)?;
            print_per_atom(&sc.space, m.partition(), &conj);
            Ok(())
        }
        Command::CoarsenSweep(common) => {
            let sc = load(&common)?;
            let m = require_spec(&sc)?;
            let q = sc
                .q
                .clone()
                .unwrap_or_else(|| Density::reference(&sc.space));
            let partitions = match &sc.gamma {
                Some(p) => vec![p.clone()],
                None => enumerate_partitions(&sc.space, &sc.g)?,
            };
            println!("schema_version,gamma,block,pi_gamma,k_gamma,h_gamma");
            for gamma in &partitions {
                let cm = m.clone().coarsen(gamma.clone())?;
                let pi = cm.evaluate(&sc.space, &sc.x)?;
                let kg = k_value(&sc.space, &cm, &sc.x, &q, &sc.solver)?;
                let rep = h_value(&sc.space, &cm, &sc.x, &sc.solver)?;
                let gamma_name = gamma
                    .blocks()
                    .iter()
                    .map(|b| atom_name(&sc.space, b))
                    .collect::<Vec<_>>()
                    .join(";");
                for (idx, block) in gamma.blocks().iter().enumerate() {
                    println!(
                        "1,{},{},{},{},{}",
                        gamma_name,
                        atom_name(&sc.space, block),
                        fmt_f64(pi.values()[block[0]]),
                        fmt_value(kg.get(idx)),
                        fmt_f64(rep.atoms[idx].dual),
                    );
                }
            }
            Ok(())
        }
        Command::Props { seed, cases } => {
            if cases == 0 {
                return Err(CliError::Input("--cases must be at least 1".into()));
            }
            let report = run_property_suite(seed, cases);
            print!("{}", report.to_csv());
            println!();
            print!("{}", report.summary());
            if report.passed() {
                Ok(())
            } else {
                Err(CliError::SuiteFailed)
            }
        }
        Command::Oracle {
            common,
            step,
            box_half,
        } => {
            if !(step > 0.0) || !(box_half > 0.0) {
                return Err(CliError::Input("--step and --box must be positive".into()));
            }
            let sc = load(&common)?;
            let m = require_spec(&sc)?;
            let q = sc
                .q
                .clone()
                .unwrap_or_else(|| Density::reference(&sc.space));
            let gcfg = GridCfg {
                box_lo: -box_half,
                box_hi: box_half,
                step,
            };
            let gk = grid_k(&sc.space, m, &sc.x, &q, &gcfg)?;
            let ek = equality_k(&sc.space, m, &sc.x, &q, &gcfg)?;
            let engine = k_value(&sc.space, m, &sc.x, &q, &sc.solver)?;
            let bound = quasidual::slope_bound(m, &gcfg);
            println!("schema_version,atom,grid_k,equality_k,engine_k,slope_bound,step");
            for (idx, atom) in m.partition().blocks().iter().enumerate() {
                println!(
                    "1,{},{},{},{},{},{}",
                    atom_name(&sc.space, atom),
                    fmt_value(gk.get(idx)),
                    fmt_value(ek.get(idx)),
                    fmt_value(engine.get(idx)),
                    fmt_f64(bound),
                    fmt_f64(step),
                );
            }
            Ok(())
        }
    }
}
