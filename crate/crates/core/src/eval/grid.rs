//! Experiment grid: trains a list of runs on one synthetic corpus, decodes the
//! test split and tabulates CER/WER with relative improvement over the
//! monolingual row of each language.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{relative_improvement, EvalReport, Reference};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Frontend};
use crate::labelset::{LabelInventory, LanguageId};
use crate::model::{save_checkpoint, ModelParams, Variant};
use crate::synth::{Corpus, Manifest};
use crate::system::{AsrSystem, EncoderSize, Utterance};
use crate::trainer::{fine_tune, train, TrainReport, TrainingConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    pub name: String,
    pub variant: Variant,
    pub train_languages: Vec<String>,
    /// Defaults to the training languages.
    #[serde(default)]
    pub eval_languages: Vec<String>,
    /// Name of an earlier run to fine-tune from.
    #[serde(default)]
    pub init_from: Option<String>,
    #[serde(default)]
    pub reinit_head: bool,
    /// `false` trains without a language mask (bilingual mode).
    #[serde(default = "yes")]
    pub mask: bool,
    /// Fields overriding the grid-wide training configuration.
    #[serde(default)]
    pub training: toml::Table,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Corpus directory as written by the synthesizer.
    pub corpus: PathBuf,
    /// Directory for report files and checkpoints; nothing is written when absent.
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub frontend: Frontend,
    #[serde(default)]
    pub model: EncoderSize,
    #[serde(default)]
    pub training: TrainingConfig,
    pub runs: Vec<RunSpec>,
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Serde(e.to_string()))?;
        cfg.corpus = base_dir.join(&cfg.corpus);
        cfg.output = cfg.output.map(|o| base_dir.join(o));
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_toml(&text, base).map_err(|e| match e {
            Error::Serde(reason) => Error::malformed(path, reason),
            other => other,
        })
    }

    /// Training configuration of `run` after applying its overrides.
    pub fn run_training(&self, run: &RunSpec) -> Result<TrainingConfig> {
        if run.training.is_empty() {
            return Ok(self.training.clone());
        }
        let base = toml::Value::try_from(&self.training).map_err(|e| Error::Serde(e.to_string()))?;
        let mut table = match base {
            toml::Value::Table(t) => t,
            _ => unreachable!("a struct serializes to a table"),
        };
        for (k, v) in &run.training {
            table.insert(k.clone(), v.clone());
        }
        toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(format!("run {}: {e}", run.name)))
    }

    fn validate(&self, inventory: &LabelInventory) -> Result<()> {
        let mut seen = Vec::new();
        for run in &self.runs {
            let ctx = |msg: String| Error::Config(format!("run {}: {msg}", run.name));
            if seen.contains(&run.name) {
                return Err(ctx("duplicate run name".into()));
            }
            if run.train_languages.is_empty() {
                return Err(ctx("no training languages".into()));
            }
            for l in run.train_languages.iter().chain(&run.eval_languages) {
                inventory.language(l)?;
            }
            if run.variant == Variant::Monolingual && run.train_languages.len() != 1 && run.init_from.is_none() {
                return Err(ctx("a monolingual run trains on exactly one language".into()));
            }
            if !run.mask && run.variant != Variant::Universal {
                return Err(ctx("maskless training needs the univ variant".into()));
            }
            if let Some(src) = &run.init_from {
                if !seen.contains(src) {
                    return Err(ctx(format!("init_from {src} does not name an earlier run")));
                }
                if run.train_languages.len() != 1 {
                    return Err(ctx("fine-tuning trains on exactly one language".into()));
                }
            }
            self.run_training(run)?;
            seen.push(run.name.clone());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRow {
    pub name: String,
    pub variant: Variant,
    pub training_data: Vec<String>,
    pub gate: bool,
    pub mask: bool,
    pub init_from: Option<String>,
    pub eval: EvalReport,
    /// Relative CER improvement over the monolingual baseline, per language.
    pub relative_cer_improvement: BTreeMap<String, f64>,
    pub train: TrainReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub languages: Vec<String>,
    pub rows: Vec<GridRow>,
}

impl GridReport {
    pub fn row(&self, name: &str) -> Option<&GridRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn to_table(&self) -> String {
        let cell = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
        let name_w = self.rows.iter().map(|r| r.name.len()).max().unwrap_or(0).max(3);
        let data_w = self
            .rows
            .iter()
            .map(|r| r.training_data.join("+").len())
            .max()
            .unwrap_or(0)
            .max(13);
        let mut out = String::new();
        let mut header = format!("{:<name_w$}  {:<data_w$}  {:<7}  {:<4}", "run", "training data", "variant", "gate");
        for prefix in ["%CER", "%WER", "rel%"] {
            for l in &self.languages {
                header.push_str(&format!("  {:>9}", format!("{prefix} {l}")));
            }
        }
        let _ = writeln!(out, "{header}");
        let _ = writeln!(out, "{}", "-".repeat(header.len()));
        for r in &self.rows {
            let mut line = format!(
                "{:<name_w$}  {:<data_w$}  {:<7}  {:<4}",
                r.name,
                r.training_data.join("+"),
                r.variant.flag(),
                if r.gate { "yes" } else { "no" }
            );
            for l in &self.languages {
                line.push_str(&format!("  {:>9}", cell(r.eval.cer(l))));
            }
            for l in &self.languages {
                line.push_str(&format!("  {:>9}", cell(r.eval.wer(l))));
            }
            for l in &self.languages {
                line.push_str(&format!("  {:>9}", cell(r.relative_cer_improvement.get(l).copied())));
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
        out
    }
}

struct LoadedSplit {
    items: Vec<FeatureMatrix>,
}

impl LoadedSplit {
    fn load(manifest: &Manifest) -> Result<Self> {
        let items = manifest
            .entries
            .iter()
            .map(|e| manifest.load_entry(e))
            .collect::<Result<Vec<_>>>()?;
        Ok(LoadedSplit { items })
    }

    fn prepare(&self, system: &AsrSystem, languages: &[LanguageId]) -> Result<Vec<Utterance>> {
        self.items
            .iter()
            .filter(|fm| languages.contains(&fm.language))
            .map(|fm| system.prepare(fm))
            .collect()
    }
}

fn language_ids(inventory: &LabelInventory, codes: &[String]) -> Result<Vec<LanguageId>> {
    codes.iter().map(|c| inventory.language(c).cloned()).collect()
}

/// Decodes `data` and scores it per language.
pub fn evaluate(system: &AsrSystem, params: &ModelParams, data: &[Utterance]) -> Result<EvalReport> {
    let mut hyps = BTreeMap::new();
    let mut refs = BTreeMap::new();
    for utt in data {
        hyps.insert(utt.id.clone(), system.transcribe(params, utt)?);
        refs.insert(
            utt.id.clone(),
            Reference {
                language: utt.language.as_str().to_string(),
                text: utt.transcript.clone(),
            },
        );
    }
    EvalReport::build(&hyps, &refs)
}

/// Runs every configured run in order and returns the report. When the
/// configuration names an output directory, `report.txt`, `report.json` and
/// one checkpoint per run are written there.
pub fn run_experiment_grid(cfg: &ExperimentConfig) -> Result<GridReport> {
    let corpus = Corpus::open(&cfg.corpus)?;
    let full = corpus.inventory()?;
    cfg.validate(&full)?;
    let train_split = LoadedSplit::load(&corpus.train)?;
    let valid_split = LoadedSplit::load(&corpus.valid)?;
    let test_split = LoadedSplit::load(&corpus.test)?;
    let feature_dim = train_split
        .items
        .first()
        .map(|fm| fm.frames.dim())
        .ok_or_else(|| Error::Config("empty training split".into()))?;

    let mut trained: BTreeMap<String, (AsrSystem, ModelParams)> = BTreeMap::new();
    let mut rows = Vec::new();
    for run in &cfg.runs {
        log::info!("run {}", run.name);
        let training = cfg.run_training(run)?;
        let train_langs = language_ids(&full, &run.train_languages)?;
        let eval_codes = if run.eval_languages.is_empty() {
            &run.train_languages
        } else {
            &run.eval_languages
        };
        let eval_langs = language_ids(&full, eval_codes)?;

        let (system, outcome) = match &run.init_from {
            Some(src) => {
                let (system, params) = &trained[src];
                let target = full.restrict(&train_langs)?;
                let tr = train_split.prepare(system, &train_langs)?;
                let va = valid_split.prepare(system, &train_langs)?;
                let outcome = fine_tune(system, params.clone(), &target, &tr, &va, &training, run.reinit_head)?;
                (system.clone(), outcome)
            }
            None => {
                let inventory = full.restrict(&train_langs)?;
                let system = AsrSystem::new(run.variant, inventory, cfg.frontend, feature_dim, &cfg.model, run.mask)?;
                let tr = train_split.prepare(&system, &train_langs)?;
                let va = valid_split.prepare(&system, &train_langs)?;
                let init = system.init_params(crate::synth::derive_seed(training.seed, &[b"init"]))?;
                let outcome = train(&system, init, &tr, &va, &training)?;
                (system, outcome)
            }
        };
        for l in &eval_langs {
            system.inventory().language_index(l)?;
        }
        let test = test_split.prepare(&system, &eval_langs)?;
        let eval = evaluate(&system, &outcome.params, &test)?;
        if let Some(dir) = &cfg.output {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            save_checkpoint(&system.checkpoint(&outcome.params), &dir.join(format!("{}.pcm", run.name)))?;
        }
        rows.push(GridRow {
            name: run.name.clone(),
            variant: system.variant(),
            training_data: run.train_languages.clone(),
            gate: system.variant().has_gates(),
            mask: system.config().masked,
            init_from: run.init_from.clone(),
            eval,
            relative_cer_improvement: BTreeMap::new(),
            train: outcome.report,
        });
        trained.insert(run.name.clone(), (system, outcome.params));
    }

    fill_relative_improvements(&mut rows);
    let report = GridReport {
        languages: full.languages().iter().map(|l| l.as_str().to_string()).collect(),
        rows,
    };
    if let Some(dir) = &cfg.output {
        write_grid_report(&report, dir)?;
    }
    Ok(report)
}

/// The baseline of a language is the first from-scratch monolingual row that
/// evaluates it.
fn fill_relative_improvements(rows: &mut [GridRow]) {
    let mut base: BTreeMap<String, f64> = BTreeMap::new();
    for r in rows.iter() {
        if r.variant == Variant::Monolingual && r.init_from.is_none() {
            for (l, s) in &r.eval.languages {
                base.entry(l.clone()).or_insert(s.cer);
            }
        }
    }
    for r in rows.iter_mut() {
        r.relative_cer_improvement = r
            .eval
            .languages
            .iter()
            .filter_map(|(l, s)| base.get(l).map(|&b| (l.clone(), relative_improvement(b, s.cer))))
            .collect();
    }
}

pub fn write_grid_report(report: &GridReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let txt = dir.join("report.txt");
    fs::write(&txt, report.to_table()).map_err(|e| Error::io(&txt, e))?;
    let json = dir.join("report.json");
    fs::write(&json, report.to_json()? + "\n").map_err(|e| Error::io(&json, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{EmissionParams, LexiconParams, SynthConfig};

    fn corpus(dir: &Path) {
        let cfg = SynthConfig {
            alphabets: BTreeMap::from([("L1".into(), "abc".into()), ("L2".into(), "bcd".into())]),
            utterances_per_language: 20,
            seed: 3,
            emission: EmissionParams {
                dim: 3,
                sigma: 0.2,
                ..Default::default()
            },
            lexicon: LexiconParams {
                words_per_language: 5,
                ..Default::default()
            },
        };
        cfg.generate(dir).unwrap();
    }

    const GRID: &str = r#"
corpus = "corpus"
output = "out"

[model]
num_layers = 1
hidden_per_direction = 3
projection_dim = 3

[training]
max_epochs = 1
learning_rate = 0.01
clip_per_sample = 0.1

[[runs]]
name = "mono-L1"
variant = "mono"
train_languages = ["L1"]

[[runs]]
name = "gated"
variant = "gated"
train_languages = ["L1", "L2"]

[[runs]]
name = "ft-L1"
variant = "gated"
train_languages = ["L1"]
init_from = "gated"
training = { max_epochs = 0 }
"#;

    #[test]
    fn grid_runs_and_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        corpus(&dir.path().join("corpus"));
        let cfg = ExperimentConfig::from_toml(GRID, dir.path()).unwrap();
        assert_eq!(cfg.run_training(&cfg.runs[2]).unwrap().max_epochs, 0);
        assert_eq!(cfg.run_training(&cfg.runs[2]).unwrap().learning_rate, 0.01);
        let report = run_experiment_grid(&cfg).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert_eq!(report.row("mono-L1").unwrap().relative_cer_improvement["L1"], 0.0);
        let gated = report.row("gated").unwrap();
        let ft = report.row("ft-L1").unwrap();
        // zero fine-tuning epochs evaluate the pre-trained checkpoint directly
        assert_eq!(ft.eval.languages["L1"], gated.eval.languages["L1"]);
        let base = report.row("mono-L1").unwrap().eval.cer("L1").unwrap();
        let expected = relative_improvement(base, gated.eval.cer("L1").unwrap());
        assert_eq!(gated.relative_cer_improvement["L1"], expected);
        assert!(!gated.relative_cer_improvement.contains_key("L2"));
        let out = dir.path().join("out");
        let table = fs::read_to_string(out.join("report.txt")).unwrap();
        assert!(table.contains("%CER L1") && table.contains("ft-L1"));
        assert!(out.join("report.json").exists() && out.join("gated.pcm").exists());
    }

    #[test]
    fn invalid_grids_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        corpus(&dir.path().join("corpus"));
        for bad in [
            GRID.replace("init_from = \"gated\"", "init_from = \"later\""),
            GRID.replace("train_languages = [\"L1\"]\n\n[[runs]]\nname = \"gated\"", "train_languages = [\"L1\", \"L2\"]\n\n[[runs]]\nname = \"gated\""),
            GRID.replace("[\"L1\", \"L2\"]", "[\"L1\", \"L9\"]"),
            GRID.replace("name = \"ft-L1\"", "name = \"gated\""),
        ] {
            assert_ne!(bad, GRID);
            let cfg = ExperimentConfig::from_toml(&bad, dir.path()).unwrap();
            assert!(run_experiment_grid(&cfg).is_err(), "accepted:\n{bad}");
        }
    }
}
