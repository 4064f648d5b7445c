//! `unictc` command-line tool.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use unictc::eval::{evaluate, run_experiment_grid, ExperimentConfig};
use unictc::features::{load_features, Frontend};
use unictc::labelset::{load_alphabets, LabelInventory, LanguageId};
use unictc::model::{load_checkpoint, save_checkpoint, Variant};
use unictc::synth::{derive_seed, Manifest, SynthConfig};
use unictc::system::{AsrSystem, EncoderSize};
use unictc::trainer::{fine_tune, train, TrainOutcome, TrainingConfig};

#[derive(Parser)]
#[command(name = "unictc", version, about = "Language-universal CTC speech recognition")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a multilingual feature corpus.
    SynthData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Print the universal inventory and per-language overlap.
    Inventory {
        /// Alphabet file.
        #[arg(long)]
        config: PathBuf,
        /// Only list the tokens of this language.
        #[arg(long)]
        lang: Option<String>,
    },
    /// Print the token surfaces of a transcript.
    Tokenize {
        #[arg(long)]
        lang: String,
        #[arg(long)]
        text: String,
        /// Alphabet file; defaults to `a-z` and apostrophe for the given language.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train a model from scratch.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Output checkpoint; reports are written next to it.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        variant: Option<Variant>,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Continue training a checkpoint on one language.
    FineTune {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        lang: String,
        #[arg(long)]
        out: PathBuf,
        /// Redraw the output layer before training.
        #[arg(long)]
        reinit_head: bool,
        #[command(flatten)]
        run: RunFlags,
    },
    /// Greedy-decode a feature file or every entry of a manifest.
    Decode {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, conflicts_with = "manifest", required_unless_present = "manifest")]
        features: Option<PathBuf>,
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long)]
        lang: Option<String>,
        /// Write `id<TAB>hypothesis` lines here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode a manifest and report CER/WER per language.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        manifest: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment grid and write its report tables.
    Grid {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the output directory of the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        run: RunFlags,
    },
}

#[derive(Args)]
struct RunFlags {
    /// Overrides the training seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for gradient computation.
    #[arg(long)]
    jobs: Option<usize>,
}

impl RunFlags {
    fn apply(&self, cfg: &mut TrainingConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(j) = self.jobs {
            cfg.jobs = j;
        }
    }
}

/// Training configuration file for `train` and `fine-tune`. Paths are
/// relative to the file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    #[serde(default)]
    variant: Option<Variant>,
    /// Languages to train on; all languages of the alphabet file when empty.
    #[serde(default)]
    languages: Vec<String>,
    /// Alphabet file; defaults to the one next to the training manifest.
    #[serde(default)]
    alphabets: Option<PathBuf>,
    train_manifest: PathBuf,
    valid_manifest: PathBuf,
    #[serde(default = "yes")]
    mask: bool,
    #[serde(default)]
    frontend: Frontend,
    #[serde(default)]
    model: EncoderSize,
    #[serde(default)]
    training: TrainingConfig,
}

fn yes() -> bool {
    true
}

impl TrainFile {
    fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg: TrainFile = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        cfg.train_manifest = base.join(&cfg.train_manifest);
        cfg.valid_manifest = base.join(&cfg.valid_manifest);
        cfg.alphabets = cfg.alphabets.map(|a| base.join(a));
        Ok(cfg)
    }
}

fn default_inventory(lang: &str) -> Result<LabelInventory> {
    let letters: String = ('a'..='z').chain(std::iter::once('\'')).collect();
    Ok(LabelInventory::from_strs([(lang, letters.as_str())])?)
}

fn write_reports(out: &Path, outcome: &TrainOutcome) -> Result<()> {
    let json = out.with_extension("report.json");
    fs::write(&json, outcome.report.to_json()? + "\n").with_context(|| format!("writing {}", json.display()))?;
    let txt = out.with_extension("report.txt");
    fs::write(&txt, outcome.report.to_table()).with_context(|| format!("writing {}", txt.display()))?;
    Ok(())
}

fn load_system(path: &Path) -> Result<(AsrSystem, unictc::model::ModelParams)> {
    let ckpt = load_checkpoint(path)?;
    let system = AsrSystem::from_checkpoint(&ckpt)?;
    Ok((system, ckpt.params))
}

/// Resolves `--lang` against what the checkpoint needs.
fn decode_language(system: &AsrSystem, lang: Option<&str>) -> Result<Option<LanguageId>> {
    match (system.needs_language(), lang) {
        (true, None) => bail!("this checkpoint needs --lang (one of {})", codes(system)),
        (false, Some(_)) => bail!("this checkpoint was trained without language information; drop --lang"),
        (true, Some(code)) => Ok(Some(system.inventory().language(code)?.clone())),
        (false, None) => Ok(None),
    }
}

fn codes(system: &AsrSystem) -> String {
    system
        .inventory()
        .languages()
        .iter()
        .map(|l| l.as_str())
        .collect::<Vec<_>>()
        .join(", ")
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthData { config, out, seed } => {
            let text = fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = SynthConfig::from_toml(&text).with_context(|| format!("parsing {}", config.display()))?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let corpus = cfg.generate(&out)?;
            println!(
                "wrote {} utterances ({} train, {} valid, {} test) to {}",
                corpus.total(),
                corpus.train.len(),
                corpus.valid.len(),
                corpus.test.len(),
                out.display()
            );
        }
        Command::Inventory { config, lang } => {
            let inv = LabelInventory::build(&load_alphabets(&config)?)?;
            let selected = match &lang {
                Some(code) => Some(inv.membership(inv.language(code)?)?.clone()),
                None => None,
            };
            println!("tokens: {}", inv.len());
            for (k, token) in inv.tokens().iter().enumerate() {
                if selected.as_ref().is_some_and(|s| !s.contains(&k)) {
                    continue;
                }
                let langs: Vec<&str> = inv
                    .languages()
                    .iter()
                    .filter(|l| inv.membership(l).is_ok_and(|m| m.contains(&k)))
                    .map(|l| l.as_str())
                    .collect();
                println!("{k:>4}  {:<6} {}", token.surface, langs.join(","));
            }
            if inv.languages().len() > 1 {
                let overlap = inv.overlap_report()?;
                println!("shared by every language: {}", overlap.overall);
                for ((a, b), n) in &overlap.pairwise {
                    println!("shared by {a} and {b}: {n}");
                }
            }
        }
        Command::Tokenize { lang, text, config } => {
            let inv = match config {
                Some(path) => LabelInventory::build(&load_alphabets(&path)?)?,
                None => default_inventory(&lang)?,
            };
            let seq = inv.tokenize(&text, inv.language(&lang)?)?;
            println!("{}", inv.surfaces(&seq.ids).join(" "));
        }
        Command::Train {
            config,
            out,
            variant,
            run,
        } => {
            let mut cfg = TrainFile::load(&config)?;
            run.apply(&mut cfg.training);
            let variant = variant.or(cfg.variant).unwrap_or(Variant::UniversalGated);
            cfg.training.validate(false)?;
            let train_m = Manifest::load(&cfg.train_manifest)?;
            let valid_m = Manifest::load(&cfg.valid_manifest)?;
            let alphabets = cfg.alphabets.clone().unwrap_or_else(|| train_m.base_dir.join(unictc::synth::ALPHABET_FILE));
            let full = LabelInventory::build(&load_alphabets(&alphabets)?)?;
            let inventory = if cfg.languages.is_empty() {
                full
            } else {
                let ids = cfg
                    .languages
                    .iter()
                    .map(|c| full.language(c).cloned())
                    .collect::<unictc::Result<Vec<_>>>()?;
                full.restrict(&ids)?
            };
            let first = train_m.entries.first().context("training manifest is empty")?;
            let dim = train_m.load_entry(first)?.frames.dim();
            let system = AsrSystem::new(variant, inventory, cfg.frontend, dim, &cfg.model, cfg.mask)?;
            let tr = system.load_manifest(&train_m)?;
            let va = system.load_manifest(&valid_m)?;
            let init = system.init_params(derive_seed(cfg.training.seed, &[b"init"]))?;
            let outcome = train(&system, init, &tr, &va, &cfg.training)?;
            save_checkpoint(&system.checkpoint(&outcome.params), &out)?;
            write_reports(&out, &outcome)?;
            print!("{}", outcome.report.to_table());
        }
        Command::FineTune {
            checkpoint,
            config,
            lang,
            out,
            reinit_head,
            run,
        } => {
            let mut cfg = TrainFile::load(&config)?;
            run.apply(&mut cfg.training);
            cfg.training.validate(true)?;
            let (system, params) = load_system(&checkpoint)?;
            let train_m = Manifest::load(&cfg.train_manifest)?;
            let valid_m = Manifest::load(&cfg.valid_manifest)?;
            let alphabets = cfg.alphabets.clone().unwrap_or_else(|| train_m.base_dir.join(unictc::synth::ALPHABET_FILE));
            let data_inv = LabelInventory::build(&load_alphabets(&alphabets)?)?;
            let lang_id = data_inv.language(&lang)?.clone();
            let target = data_inv.restrict(std::slice::from_ref(&lang_id))?;
            let only = |m: &Manifest| m.filter_languages(std::slice::from_ref(&lang_id));
            let tr = system.load_manifest(&only(&train_m))?;
            let va = system.load_manifest(&only(&valid_m))?;
            let outcome = fine_tune(&system, params, &target, &tr, &va, &cfg.training, reinit_head)?;
            save_checkpoint(&system.checkpoint(&outcome.params), &out)?;
            write_reports(&out, &outcome)?;
            print!("{}", outcome.report.to_table());
        }
        Command::Decode {
            checkpoint,
            features,
            manifest,
            lang,
            out,
        } => {
            let (system, params) = load_system(&checkpoint)?;
            let language = decode_language(&system, lang.as_deref())?;
            let mut lines = Vec::new();
            if let Some(path) = features {
                let frames = load_features(&path)?;
                let input = system.prepare_frames(&frames)?;
                lines.push(system.decode(&params, &input, language.as_ref())?);
            } else if let Some(path) = manifest {
                let m = Manifest::load(&path)?;
                for entry in &m.entries {
                    let fm = m.load_entry(entry)?;
                    let input = system.prepare_frames(&fm.frames)?;
                    let hyp = system.decode(&params, &input, language.as_ref())?;
                    lines.push(format!("{}\t{hyp}", entry.utterance_id));
                }
            }
            let text: String = lines.iter().map(|l| format!("{l}\n")).collect();
            match out {
                Some(path) => fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?,
                None => print!("{text}"),
            }
        }
        Command::Eval {
            checkpoint,
            manifest,
            out,
        } => {
            let (system, params) = load_system(&checkpoint)?;
            let m = Manifest::load(&manifest)?;
            let unknown: Vec<&str> = m
                .entries
                .iter()
                .filter(|e| system.inventory().language_index(&e.language).is_err())
                .map(|e| e.utterance_id.as_str())
                .collect();
            if !unknown.is_empty() {
                bail!("checkpoint does not cover the language of {}", unknown.join(", "));
            }
            let data = system.load_manifest(&m)?;
            let report = evaluate(&system, &params, &data)?;
            print!("{report}");
            if let Some(path) = out {
                let json = serde_json::to_string_pretty(&report)? + "\n";
                fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        Command::Grid { config, out, run } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            run.apply(&mut cfg.training);
            if let Some(dir) = out {
                cfg.output = Some(dir);
            }
            let report = run_experiment_grid(&cfg)?;
            print!("{}", report.to_table());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
