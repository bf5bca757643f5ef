mod artifact;
mod commands;
mod config;
mod report;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use lonscape::community::Algorithm;
use lonscape::stats::WeightMode;
use lonscape::transform::ExportFormat;
use lonscape::InstanceClass;

use artifact::{exit_code, Layout, Usage, EXIT_USAGE};
use commands::{Ctx, FilterMode};
use config::CampaignConfig;

/// Exact local optima networks of small QAP instances and their community structure.
#[derive(Parser, Debug)]
#[command(name = "lonscape", version)]
struct Cli {
    /// Campaign directory.
    #[arg(long, global = true, default_value = "campaign")]
    dir: PathBuf,
    /// JSON campaign config; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// More logging (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct GenArgs {
    /// Instance classes (uniform, real-like).
    #[arg(long, value_delimiter = ',')]
    class: Vec<InstanceClass>,
    /// Instance sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Instances per class and size.
    #[arg(long)]
    count: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug, Default)]
struct StageArgs {
    /// Allow n = 12.
    #[arg(long)]
    force_large: bool,
    /// Detectors (greedy, spinglass, mcl).
    #[arg(long, value_delimiter = ',')]
    algorithms: Vec<Algorithm>,
    /// Null-model sample count.
    #[arg(long)]
    m: Option<usize>,
    /// Weight handling in null models (permute, equal).
    #[arg(long, value_parser = parse_weights)]
    weights: Option<WeightMode>,
    /// ANOVA permutation count.
    #[arg(long)]
    perms: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate instances.
    Gen(GenArgs),
    /// Enumerate the LON of every instance.
    Build(StageArgs),
    /// Symmetrize and filter every LON.
    Filter {
        /// Use the largest grid threshold that keeps the graph connected.
        #[arg(long, conflicts_with = "pi")]
        auto: bool,
        /// Fixed quantile threshold in [0, 1].
        #[arg(long)]
        pi: Option<f64>,
    },
    /// Detect communities.
    Detect(StageArgs),
    /// Compare modularity against rewired null models.
    Nulltest(StageArgs),
    /// Fitness assortativity of each LON.
    Assort,
    /// Permutation ANOVA of modularity on class and algorithm.
    Anova(StageArgs),
    /// Tables, figures and a gap list from the campaign directory.
    Report,
    /// Write LONs as GraphML, DOT or CSV tables.
    Export {
        /// Formats (graphml, dot, edge-csv, node-csv); default all.
        #[arg(long, value_delimiter = ',', value_parser = parse_format)]
        format: Vec<ExportFormat>,
        /// Export the filtered undirected graphs instead of the LONs.
        #[arg(long)]
        filtered: bool,
    },
    /// Every stage in order.
    Run {
        #[command(flatten)]
        gen: GenArgs,
        #[command(flatten)]
        stage: StageArgs,
    },
}

fn parse_weights(s: &str) -> Result<WeightMode, String> {
    match s {
        "permute" => Ok(WeightMode::Permute),
        "equal" => Ok(WeightMode::Equal),
        _ => Err(format!(
            "unknown weight mode `{s}` (expected permute or equal)"
        )),
    }
}

fn parse_format(s: &str) -> Result<ExportFormat, String> {
    match s {
        "graphml" => Ok(ExportFormat::Graphml),
        "dot" => Ok(ExportFormat::Dot),
        "edge-csv" => Ok(ExportFormat::EdgeCsv),
        "node-csv" => Ok(ExportFormat::NodeCsv),
        _ => Err(format!(
            "unknown format `{s}` (expected graphml, dot, edge-csv or node-csv)"
        )),
    }
}

impl GenArgs {
    fn apply(&self, c: &mut CampaignConfig) {
        if !self.class.is_empty() {
            c.classes = self.class.clone();
        }
        if !self.n.is_empty() {
            c.sizes = self.n.clone();
        }
        if let Some(k) = self.count {
            c.instances_per_cell = k;
        }
        if let Some(s) = self.seed {
            c.master_seed = s;
        }
    }
}

impl StageArgs {
    fn apply(&self, c: &mut CampaignConfig) {
        c.force_large |= self.force_large;
        if !self.algorithms.is_empty() {
            c.detectors = self.algorithms.clone();
        }
        if let Some(m) = self.m {
            c.null_m = m;
        }
        if let Some(w) = self.weights {
            c.null_weights = w;
        }
        if let Some(p) = self.perms {
            c.anova_permutations = p;
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Usage("--threads must be positive".into()).into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()?;
    }
    let mut config = CampaignConfig::load(cli.config.as_deref())?;
    match &cli.command {
        Command::Gen(g) => g.apply(&mut config),
        Command::Build(s) | Command::Detect(s) | Command::Nulltest(s) | Command::Anova(s) => {
            s.apply(&mut config)
        }
        Command::Run { gen, stage } => {
            gen.apply(&mut config);
            stage.apply(&mut config);
        }
        _ => {}
    }
    if let Command::Report = cli.command {
        let s = report::report(&Layout::new(&cli.dir))?;
        println!(
            "wrote {} files to {}",
            s.files.len(),
            cli.dir.join("report").display()
        );
        for g in &s.gaps {
            println!("gap: {g}");
        }
        return Ok(());
    }
    let ctx = Ctx::new(config, &cli.dir)?;
    let done = |stage: &str, k: usize| println!("{stage}: {k} items");
    match cli.command {
        Command::Gen(_) => done("gen", commands::gen(&ctx)?.len()),
        Command::Build(_) => done("build", commands::build(&ctx)?.len()),
        Command::Filter { auto, pi } => {
            let mode = match (auto, pi) {
                (_, Some(pi)) if !(0.0..=1.0).contains(&pi) => {
                    return Err(Usage(format!("--pi {pi} is outside [0, 1]")).into())
                }
                (_, Some(pi)) => FilterMode::Fixed(pi),
                _ => FilterMode::Auto,
            };
            done("filter", commands::filter_stage(&ctx, mode)?.len())
        }
        Command::Detect(_) => done("detect", commands::detect(&ctx)?.len()),
        Command::Nulltest(_) => done("nulltest", commands::nulltest(&ctx)?.len()),
        Command::Assort => done("assort", commands::assort(&ctx)?.len()),
        Command::Export { format, filtered } => {
            let formats = if format.is_empty() {
                vec![
                    ExportFormat::Graphml,
                    ExportFormat::Dot,
                    ExportFormat::EdgeCsv,
                    ExportFormat::NodeCsv,
                ]
            } else {
                format
            };
            done("export", commands::export(&ctx, &formats, filtered)?.len())
        }
        Command::Anova(_) => {
            let r = commands::anova(&ctx)?;
            println!(
                "anova: p(class)={} p(algorithm)={} p(interaction)={}",
                r.p_class, r.p_algorithm, r.p_interaction
            );
        }
        Command::Run { .. } => {
            done("gen", commands::gen(&ctx)?.len());
            done("build", commands::build(&ctx)?.len());
            done(
                "filter",
                commands::filter_stage(&ctx, FilterMode::Auto)?.len(),
            );
            done("detect", commands::detect(&ctx)?.len());
            done("nulltest", commands::nulltest(&ctx)?.len());
            done("assort", commands::assort(&ctx)?.len());
            if ctx.config.classes.len() >= 2 {
                if let Err(e) = commands::anova(&ctx) {
                    log::warn!("anova skipped: {}", describe(&e));
                }
            }
            let s = report::report(&ctx.layout)?;
            println!("report: {} files, {} gaps", s.files.len(), s.gaps.len());
        }
        Command::Report => unreachable!(),
    }
    Ok(())
}

/// The error chain on one line, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
