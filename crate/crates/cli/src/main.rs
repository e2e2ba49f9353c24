//! `lscd`: run, validate and prepare lexical semantic change experiments.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use lscd_core::corpus::{downsample_targets, load_corpus, shuffle_control};
use lscd_core::eval::{embedded_gold_text, synthesize_change_corpus, GoldSource};
use lscd_core::pipeline::Control;
use lscd_core::util::{read_word_list, write_atomic};
use lscd_core::{run_pipeline, validate_config, ErrorKind, PipelineConfig, ResultReport};

#[derive(Parser)]
#[command(name = "lscd", version, about = "Lexical semantic change detection between two corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build, align and compare the two spaces, then evaluate against gold.
    Run(ConfigArgs),
    /// Check a configuration without running it.
    Validate(ConfigArgs),
    /// Print an embedded gold ranking as TSV.
    DumpGold {
        #[arg(value_enum)]
        which: Gold,
    },
    /// Write a synthetic corpus pair with known change rates.
    Synth {
        #[arg(long, default_value_t = 20)]
        targets: usize,
        #[arg(long, default_value_t = 100_000)]
        tokens: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the control corpora (shuffled, optionally downsampled) for a
    /// configuration.
    Shuffle(ConfigArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Gold {
    Durel,
    Surel,
}

#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one setting; applied after the file, later ones win.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long)]
    dump_config: bool,
}

impl ConfigArgs {
    fn resolve(&self) -> lscd_core::Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => PipelineConfig::load(path)?,
            None => PipelineConfig::default(),
        };
        let mut overrides = self.set.join("\n");
        if let Some(seed) = self.seed {
            overrides.push_str(&format!("\nseed = {seed}"));
        }
        if let Some(n) = self.iterations {
            overrides.push_str(&format!("\niterations = {n}"));
        }
        cfg.apply_text(&overrides)?;
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        Ok(cfg)
    }
}

fn print_summary(report: &ResultReport) {
    println!("measure       {}", report.scores.measure());
    if let Some(ev) = &report.evaluation {
        println!("{ev}");
    } else {
        println!("config        {}", report.config_hash);
    }
    if let (Some(lo), Some(hi)) = (
        report.iteration_rhos.iter().copied().reduce(f64::min),
        report.iteration_rhos.iter().copied().reduce(f64::max),
    ) {
        println!("rho range     {lo:.4} .. {hi:.4}");
    }
    println!("scored        {}", report.scores.len());
    for (stage, spent) in &report.timings {
        println!("  {stage:<10} {:>9.3}s", spent.as_secs_f64());
    }
    println!();
    for (word, score) in report.scores.ranked() {
        println!("{word}\t{score:.6}");
    }
}

fn run(args: &ConfigArgs) -> anyhow::Result<()> {
    let cfg = args.resolve()?;
    if args.dump_config {
        print!("{}", cfg.echo());
        return Ok(());
    }
    let report = run_pipeline(&cfg)?;
    print_summary(&report);
    Ok(())
}

fn validate(args: &ConfigArgs) -> anyhow::Result<()> {
    let cfg = args.resolve()?;
    if args.dump_config {
        print!("{}", cfg.echo());
    }
    validate_config(&cfg)?;
    println!("ok {}/{}/{} config {}", cfg.space, cfg.align, cfg.measure, cfg.hash());
    Ok(())
}

fn dump_gold(which: Gold) -> anyhow::Result<()> {
    let source = match which {
        Gold::Durel => GoldSource::Durel,
        Gold::Surel => GoldSource::Surel,
    };
    let text = embedded_gold_text(&source).expect("embedded fixture");
    std::io::stdout().write_all(text.as_bytes())?;
    Ok(())
}

fn synth(targets: usize, tokens: usize, seed: u64, out: &Path) -> anyhow::Result<()> {
    let (a, b, gold) = synthesize_change_corpus(targets, tokens, seed)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    a.write(&out.join("corpus_a.txt"))?;
    b.write(&out.join("corpus_b.txt"))?;
    gold.write_tsv(&out.join("gold.tsv"))?;
    let words: String = gold.lexemes().map(|w| format!("{w}\n")).collect();
    write_atomic(&out.join("targets.txt"), |w| w.write_all(words.as_bytes()))?;
    println!("wrote {} targets to {}", gold.len(), out.display());
    Ok(())
}

fn shuffle(args: &ConfigArgs) -> anyhow::Result<()> {
    let cfg = args.resolve()?;
    let (Some(path_a), Some(path_b), Some(path_t)) = (&cfg.corpus_a, &cfg.corpus_b, &cfg.targets) else {
        bail!(lscd_core::Error::Config(vec!["shuffle needs corpus_a, corpus_b and targets".into()]));
    };
    let Some(out) = &cfg.out else {
        bail!(lscd_core::Error::Config(vec!["shuffle needs --out".into()]));
    };
    let (a, _) = load_corpus(path_a, 0)?;
    let (b, _) = load_corpus(path_b, 0)?;
    let targets = read_word_list(path_t)?;
    let (a, b) = match cfg.control {
        Control::ShuffleDownsample => downsample_targets(&a, &b, &targets, cfg.downsample_n, cfg.seed)?,
        _ => (a, b),
    };
    let (a, b) = shuffle_control(&a, &b, &targets, cfg.seed);
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    a.write(&out.join("corpus_a.txt"))?;
    b.write(&out.join("corpus_b.txt"))?;
    println!("wrote control corpora to {}", out.display());
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<lscd_core::Error>().map(lscd_core::Error::kind) {
        Some(ErrorKind::Config) => 1,
        Some(ErrorKind::Numeric) => 3,
        _ => 2,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage_error = e.use_stderr();
            let _ = e.print();
            // usage errors are configuration errors
            return ExitCode::from(if usage_error { 1 } else { 0 });
        }
    };
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Validate(args) => validate(args),
        Command::DumpGold { which } => dump_gold(*which),
        Command::Synth {
            targets,
            tokens,
            seed,
            out,
        } => synth(*targets, *tokens, *seed, out),
        Command::Shuffle(args) => shuffle(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::debug!("{e:?}");
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
