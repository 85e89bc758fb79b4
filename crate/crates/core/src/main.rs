use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use noisy_bcast::harness::{
    measure_logstar_scaling, record_transcript, run_experiment, to_csv, to_json, ExperimentPlan,
    GammaChoice, Protocol,
};
use noisy_bcast::symmetric::{
    calibrate_t_scale, theta_tables, Interval, IntervalFamily, ThetaTable, LOCAL_MISS,
};

#[derive(Parser)]
#[command(
    name = "noisy-bcast",
    version,
    about = "Simulate protocols on a noisy broadcast channel with erasures"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// One protocol on one (n, p, gamma) cell.
    Run(RunArgs),
    /// One protocol over a grid of n and p values.
    Sweep(RunArgs),
    /// Rounds and recursion depth of input learning as n grows.
    Scaling(ScalingArgs),
    /// Every physical round of one recorded run.
    DumpTranscript(TranscriptArgs),
    /// θ tables of the weight protocol as CSV.
    ThetaTable(ThetaArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ProtocolArg {
    And,
    Equality,
    LearnInput,
    LargeAlphabet,
    HammingWeight,
}

impl From<ProtocolArg> for Protocol {
    fn from(p: ProtocolArg) -> Self {
        match p {
            ProtocolArg::And => Protocol::And,
            ProtocolArg::Equality => Protocol::Equality,
            ProtocolArg::LearnInput => Protocol::LearnInput,
            ProtocolArg::LargeAlphabet => Protocol::LargeAlphabet,
            ProtocolArg::HammingWeight => Protocol::HammingWeight,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = 0, env = "NOISY_BCAST_SEED")]
    seed: u64,
    /// Output file (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[group(id = "gamma_choice", multiple = false)]
struct GammaArgs {
    /// Repetitions per broadcast.
    #[arg(long)]
    gamma: Option<u32>,
    /// Choose the least gamma with p^gamma at most this value.
    #[arg(long)]
    gamma_target: Option<f64>,
}

impl GammaArgs {
    fn choice(&self) -> GammaChoice {
        match (self.gamma, self.gamma_target) {
            (_, Some(t)) => GammaChoice::Target(t),
            (g, None) => GammaChoice::Fixed(g.unwrap_or(1)),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, value_enum)]
    protocol: ProtocolArg,
    /// Processor count(s), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    n: Vec<usize>,
    /// Erasure probability(ies), comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    p: Vec<f64>,
    #[command(flatten)]
    gamma: GammaArgs,
    #[arg(long, default_value_t = 100)]
    trials: u64,
    #[arg(long, value_enum, default_value = "csv")]
    format: Format,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ScalingArgs {
    #[arg(long, value_delimiter = ',', default_value = "16,64,256,1024,4096")]
    n: Vec<usize>,
    #[arg(long, default_value_t = 0.0)]
    p: f64,
    #[command(flatten)]
    gamma: GammaArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct TranscriptArgs {
    #[arg(long, value_enum, default_value = "and")]
    protocol: ProtocolArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    #[command(flatten)]
    gamma: GammaArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ThetaArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: f64,
    /// Interval start; with --b exports one table instead of the whole family.
    #[arg(long, requires = "b")]
    a: Option<u64>,
    #[arg(long, requires = "a")]
    b: Option<u64>,
    /// Interval scale t (calibrated for --p when absent).
    #[arg(long)]
    t: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&PathBuf>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => io::stdout()
            .write_all(text.as_bytes())
            .context("writing stdout"),
    }
}

fn run(args: RunArgs, single: bool) -> Result<()> {
    if single && (args.n.len() != 1 || args.p.len() != 1) {
        bail!("`run` takes one n and one p; use `sweep` for grids");
    }
    let plan = ExperimentPlan {
        protocol: args.protocol.into(),
        ns: args.n,
        ps: args.p,
        gamma: args.gamma.choice(),
        trials: args.trials,
        seed: args.common.seed,
        jobs: args.jobs,
    };
    let rows = run_experiment(&plan)?;
    let text = match args.format {
        Format::Csv => to_csv(&rows)?,
        Format::Json => to_json(&rows)? + "\n",
    };
    emit(args.common.out.as_ref(), &text)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => run(args, true),
        Command::Sweep(args) => run(args, false),
        Command::Scaling(args) => {
            let gamma = args.gamma.choice().resolve(args.p)?;
            let rows = measure_logstar_scaling(&args.n, args.p, gamma, args.common.seed)?;
            let mut text = String::from("n,rounds,depth,log_star\n");
            for r in rows {
                text.push_str(&format!(
                    "{},{},{},{}\n",
                    r.n, r.rounds, r.depth, r.log_star
                ));
            }
            emit(args.common.out.as_ref(), &text)
        }
        Command::DumpTranscript(args) => {
            let gamma = args.gamma.choice().resolve(args.p)?;
            let t = record_transcript(
                args.protocol.into(),
                args.n,
                args.p,
                gamma,
                args.common.seed,
            )?;
            emit(args.common.out.as_ref(), &t.to_records())
        }
        Command::ThetaTable(args) => {
            let text = if let (Some(a), Some(b)) = (args.a, args.b) {
                ThetaTable::new(Interval { lo: a, hi: b }, args.p)?.to_csv()
            } else {
                let t = match args.t {
                    Some(t) => t,
                    None => calibrate_t_scale(args.n, args.p, LOCAL_MISS)?,
                };
                let family = IntervalFamily::new(args.n, t)?;
                let mut text = String::from("a,b,l,theta\n");
                for table in theta_tables(&family, args.p)? {
                    for (k, v) in table.values.iter().enumerate() {
                        let (a, b) = (table.interval.lo, table.interval.hi);
                        text.push_str(&format!("{a},{b},{},{v}\n", a + k as u64));
                    }
                }
                text
            };
            emit(args.out.as_ref(), &text)
        }
    }
}
