use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qba_core::adversary::scripted_attack_n_eq_2f;
use qba_core::analysis::{
    audit_collusion_locality, audit_lemma1, check_ic, strategy_search, IcVerdict, Lemma1Violation, SearchFamily,
    UnsignedDelivery,
};
use qba_core::consensus::Outcome;
use qba_core::harness::{emit_trace, NodeOutput};
use qba_core::keyrate::compute_key_rate;
use qba_core::{complexity, load_scenario, run, KeyRateInputF64, Message, RunReport, ScenarioConfig, TieOrder};
use serde::Serialize;

const EXIT_CONFIG: u8 = 2;
const EXIT_LIVENESS: u8 = 3;
const EXIT_KEYS: u8 = 4;

#[derive(Parser)]
#[command(name = "qba", version, about = "Quantum Byzantine agreement simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and print its report.
    Run {
        config: PathBuf,
        /// Also write the event trace as JSON lines.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Number of signature instances a retry-free run needs.
    Complexity {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        f: usize,
    },
    /// Check interactive consistency and audit a saved run report.
    Analyze { report: PathBuf },
    /// Search adversary tables for consistency violations.
    Search {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        f: usize,
        /// Comma-separated messages.
        #[arg(long, default_value = "m1,m2", value_delimiter = ',')]
        alphabet: Vec<String>,
        #[arg(long, default_value_t = 10_000)]
        budget: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also try the scripted attack (only applies when n = 2f).
        #[arg(long)]
        scripted_attack: bool,
    },
    /// Run the scripted attack on n = 2f players.
    AttackDemo {
        #[arg(long)]
        f: usize,
        /// Message that wins majority ties.
        #[arg(long, default_value = "m2")]
        prefer: String,
    },
    /// Secret key length from decoy-state parameters and counts.
    Keyrate { input: PathBuf },
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Self { code: EXIT_CONFIG, message: message.into() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("documents serialize"));
}

fn seed_override() -> Result<Option<u64>, Failure> {
    match std::env::var("QBA_SEED") {
        Ok(text) => text
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Failure::config(format!("QBA_SEED must be an unsigned integer, got {text:?}"))),
        Err(_) => Ok(None),
    }
}

fn outcome_code(outcome: &Outcome) -> u8 {
    match outcome {
        Outcome::Completed => 0,
        Outcome::AbortedLiveness { .. } => EXIT_LIVENESS,
        Outcome::AbortedKeys { .. } => EXIT_KEYS,
    }
}

fn summarize_outputs(report: &RunReport) {
    for NodeOutput { node, honest, initial_primary, output } in &report.outputs {
        let role = if *initial_primary { "primary" } else { "lieutenant" };
        let honesty = if *honest { "honest" } else { "dishonest" };
        let output = output.as_ref().map_or_else(|| "-".to_string(), |m| m.to_string());
        eprintln!("  node {node} ({honesty} {role}): {output}");
    }
}

fn run_scenario(config_path: &Path, trace: Option<&Path>) -> Result<u8, Failure> {
    let mut config = load_scenario(&read(config_path)?).map_err(|e| Failure::config(e.to_string()))?;
    if let Some(seed) = seed_override()? {
        config.seed = seed;
    }
    let report = run(&config).map_err(|e| Failure::config(e.to_string()))?;
    if let Some(path) = trace {
        let file = fs::File::create(path).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
        emit_trace(&report.trace, std::io::BufWriter::new(file))
            .map_err(|e| Failure::config(format!("{}: {e}", path.display())))?;
    }
    print_json(&report);
    eprintln!(
        "n = {}, f = {}: {:?}, {} signature instances, {} retries",
        config.n, config.f, report.verdict, report.qds_invocations, report.retries
    );
    summarize_outputs(&report);
    Ok(outcome_code(&report.verdict))
}

#[derive(Serialize)]
struct Analysis {
    #[serde(flatten)]
    verdict: IcVerdict,
    lemma1_violations: Vec<Lemma1Violation>,
    unsigned_deliveries: Vec<UnsignedDelivery>,
}

fn analyze(path: &Path) -> Result<u8, Failure> {
    let report: RunReport =
        serde_json::from_str(&read(path)?).map_err(|e| Failure::config(format!("malformed report: {e}")))?;
    let verdict = check_ic(&report, &report.config);
    let analysis = Analysis {
        verdict,
        lemma1_violations: audit_lemma1(&report),
        unsigned_deliveries: audit_collusion_locality(&report),
    };
    print_json(&analysis);
    eprintln!(
        "IC1 {:?}, IC2 {:?}, {} lemma 1 violations, {} unsigned deliveries",
        analysis.verdict.ic1,
        analysis.verdict.ic2,
        analysis.lemma1_violations.len(),
        analysis.unsigned_deliveries.len()
    );
    Ok(0)
}

fn search(n: usize, f: usize, alphabet: &[String], budget: u64, seed: u64, scripted_attack: bool) -> Result<u8, Failure> {
    let alphabet: Vec<Message> = alphabet.iter().map(|s| Message::from(s.as_str())).collect();
    let family = SearchFamily { tables: true, scripted_attack };
    let report = strategy_search(n, f, &alphabet, family, budget, seed).map_err(|e| Failure::config(e.to_string()))?;
    print_json(&report);
    eprintln!(
        "explored {} scenarios ({}), {} violations, {} aborted",
        report.explored,
        if report.exhaustive { "exhaustive" } else { "sampled" },
        report.violation_count,
        report.aborted
    );
    Ok(0)
}

#[derive(Serialize)]
struct AttackDemo {
    violation_found: bool,
    verdict: IcVerdict,
    config: ScenarioConfig,
    report: RunReport,
}

fn attack_demo(f: usize, prefer: &str) -> Result<u8, Failure> {
    if f < 2 {
        return Err(Failure::config("the scripted attack needs f >= 2"));
    }
    let mut config = scripted_attack_n_eq_2f(f, TieOrder::preferring(&Message::from(prefer)));
    if let Some(seed) = seed_override()? {
        config.seed = seed;
    }
    let report = run(&config).map_err(|e| Failure::config(e.to_string()))?;
    let verdict = check_ic(&report, &config);
    eprintln!(
        "n = {}, f = {}: IC1 {:?}, IC2 {:?}",
        config.n, config.f, verdict.ic1, verdict.ic2
    );
    summarize_outputs(&report);
    let code = outcome_code(&report.verdict);
    print_json(&AttackDemo { violation_found: verdict.is_violation(), verdict, config, report });
    Ok(code)
}

fn keyrate(path: &Path) -> Result<u8, Failure> {
    let input: KeyRateInputF64 =
        serde_json::from_str(&read(path)?).map_err(|e| Failure::config(format!("malformed input: {e}")))?;
    let result = compute_key_rate(&input.counts, &input.params).map_err(|e| Failure::config(e.to_string()))?;
    print_json(&result);
    eprintln!("key length: {} bits", result.ell);
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, trace } => run_scenario(config, trace.as_deref()),
        Command::Complexity { n, f } => match complexity(*n, *f) {
            Ok(value) => {
                println!("{value}");
                Ok(0)
            }
            Err(e) => Err(Failure::config(e.to_string())),
        },
        Command::Analyze { report } => analyze(report),
        Command::Search { n, f, alphabet, budget, seed, scripted_attack } => {
            search(*n, *f, alphabet, *budget, *seed, *scripted_attack)
        }
        Command::AttackDemo { f, prefer } => attack_demo(*f, prefer),
        Command::Keyrate { input } => keyrate(input),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
