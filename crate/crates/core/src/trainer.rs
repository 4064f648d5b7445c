//! SGD with momentum, per-utterance elementwise gradient clipping and early
//! stopping on validation CTC loss.
//!
//! The objective is a plain sum over utterances. Under a masked universal
//! model each term is the masked CTC loss over the shared output layer; under
//! multi-task heads each term uses the head of the utterance's language, so a
//! mixed batch is exactly the sum of its per-language sub-batches.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::labelset::LabelInventory;
use crate::model::{ModelParams, Variant, INIT_RANGE};
use crate::synth::derive_seed;
use crate::system::{AsrSystem, EncoderSize, Utterance, UtteranceGrad};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub clip_per_sample: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    /// Worker threads for per-utterance gradients; 1 is the serial reference.
    pub jobs: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 0.0004,
            clip_per_sample: 0.0003,
            momentum: 0.9,
            batch_size: 8,
            max_epochs: 20,
            patience: 3,
            seed: 0,
            jobs: 1,
        }
    }
}

impl TrainingConfig {
    /// `allow_zero_lr` admits a learning rate of 0, used to evaluate a fixed
    /// model through the training loop.
    pub fn validate(&self, allow_zero_lr: bool) -> Result<()> {
        let lr_ok = self.learning_rate > 0.0 || (allow_zero_lr && self.learning_rate == 0.0);
        if !lr_ok || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(self.clip_per_sample > 0.0) {
            return Err(Error::Config(format!("clip threshold {} must be positive", self.clip_per_sample)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch size must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be at least 1".into()));
        }
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }
}

/// Momentum buffer, one tensor per parameter tensor.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub velocity: ModelParams,
}

impl OptimizerState {
    pub fn new(params: &ModelParams) -> Self {
        OptimizerState {
            velocity: params.zeros_like(),
        }
    }

    /// `v = momentum * v + grad; params -= lr * v`.
    pub fn step(&mut self, params: &mut ModelParams, grad: &ModelParams, cfg: &TrainingConfig) {
        for ((_, v), (_, g)) in self.velocity.tensors_mut().into_iter().zip(grad.tensors()) {
            for (vi, gi) in v.data_mut().iter_mut().zip(g.data()) {
                *vi = cfg.momentum * *vi + gi;
            }
        }
        params.add_scaled(&self.velocity, -cfg.learning_rate);
    }
}

/// Clamps every component to `[-clip, clip]`.
pub fn clip_elementwise(grad: &mut ModelParams, clip: f64) {
    for (_, t) in grad.tensors_mut() {
        for v in t.data_mut() {
            *v = v.clamp(-clip, clip);
        }
    }
}

/// Loss and clipped, accumulated gradient of a batch.
#[derive(Debug, Clone)]
pub struct BatchObjective {
    pub loss: f64,
    pub grads: ModelParams,
    pub loss_by_language: BTreeMap<String, f64>,
    pub count_by_language: BTreeMap<String, usize>,
    /// Ids of utterances whose targets do not fit their frame count.
    pub skipped: Vec<String>,
}

fn map_ordered<T: Send>(
    items: &[&Utterance],
    jobs: usize,
    f: impl Fn(&Utterance) -> T + Sync + Send,
) -> Vec<T> {
    if jobs <= 1 || items.len() < 2 {
        return items.iter().map(|u| f(u)).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| items.par_iter().map(|u| f(u)).collect()),
        Err(e) => {
            log::warn!("falling back to serial execution: {e}");
            items.iter().map(|u| f(u)).collect()
        }
    }
}

fn is_skippable(e: &Error) -> bool {
    matches!(e, Error::InfeasibleTarget { .. })
}

/// Sum of per-utterance losses and of per-utterance clipped gradients.
/// Results are reduced in batch order whatever `jobs` is, so the parallel
/// mode reproduces the serial one exactly.
pub fn objective(
    system: &AsrSystem,
    params: &ModelParams,
    batch: &[&Utterance],
    clip: f64,
    jobs: usize,
) -> Result<BatchObjective> {
    let results = map_ordered(batch, jobs, |u| system.loss_and_grad(params, u));
    let mut out = BatchObjective {
        loss: 0.0,
        grads: params.zeros_like(),
        loss_by_language: BTreeMap::new(),
        count_by_language: BTreeMap::new(),
        skipped: Vec::new(),
    };
    for (utt, result) in batch.iter().zip(results) {
        let UtteranceGrad { loss, mut grads } = match result {
            Ok(g) => g,
            Err(e) if is_skippable(&e) => {
                log::warn!("skipping {}: {e}", utt.id);
                out.skipped.push(utt.id.clone());
                continue;
            }
            Err(e) => return Err(e),
        };
        clip_elementwise(&mut grads, clip);
        out.grads.add_scaled(&grads, 1.0);
        out.loss += loss;
        let lang = utt.language.as_str().to_string();
        *out.loss_by_language.entry(lang.clone()).or_default() += loss;
        *out.count_by_language.entry(lang).or_default() += 1;
    }
    Ok(out)
}

/// Mean CTC loss per utterance, overall and per language.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossSummary {
    pub mean: f64,
    pub by_language: BTreeMap<String, f64>,
    pub utterances: usize,
    pub skipped: Vec<String>,
}

pub fn evaluate_loss(system: &AsrSystem, params: &ModelParams, data: &[Utterance], jobs: usize) -> Result<LossSummary> {
    let refs: Vec<&Utterance> = data.iter().collect();
    let results = map_ordered(&refs, jobs, |u| system.loss(params, u));
    let mut total = 0.0;
    let mut n = 0usize;
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    let mut skipped = Vec::new();
    for (utt, result) in data.iter().zip(results) {
        let loss = match result {
            Ok(l) => l,
            Err(e) if is_skippable(&e) => {
                skipped.push(utt.id.clone());
                continue;
            }
            Err(e) => return Err(e),
        };
        total += loss;
        n += 1;
        let entry = sums.entry(utt.language.as_str().to_string()).or_default();
        entry.0 += loss;
        entry.1 += 1;
    }
    Ok(LossSummary {
        mean: if n == 0 { f64::NAN } else { total / n as f64 },
        by_language: sums.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect(),
        utterances: n,
        skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// Validation loss failed to improve for `patience` epochs.
    Patience,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss per utterance over the epoch, under the moving parameters.
    pub train_loss: f64,
    pub train_loss_by_language: BTreeMap<String, f64>,
    pub valid_loss: f64,
    pub valid_loss_by_language: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub variant: Variant,
    pub languages: Vec<String>,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept; 0 means the initial parameters.
    pub best_epoch: usize,
    pub best_valid_loss: f64,
    pub stop_reason: StopReason,
    pub updates: usize,
    pub skipped_utterances: Vec<String>,
}

impl TrainReport {
    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serde(e.to_string()))
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "variant: {}  languages: {}", self.variant, self.languages.join(","));
        let mut header = format!("{:>5}  {:>10}  {:>10}", "epoch", "train", "valid");
        for l in &self.languages {
            header.push_str(&format!("  {:>10}", format!("valid {l}")));
        }
        let _ = writeln!(out, "{header}");
        for e in &self.epochs {
            let mark = if e.epoch == self.best_epoch { " *" } else { "" };
            let mut line = format!("{:>5}  {:>10.4}  {:>10.4}", e.epoch, e.train_loss, e.valid_loss);
            for l in &self.languages {
                let v = e.valid_loss_by_language.get(l).copied().unwrap_or(f64::NAN);
                line.push_str(&format!("  {v:>10.4}"));
            }
            let _ = writeln!(out, "{line}{mark}");
        }
        let _ = writeln!(
            out,
            "best epoch {} (valid {:.4}); stopped: {}; updates: {}; skipped: {}",
            self.best_epoch,
            self.best_valid_loss,
            match self.stop_reason {
                StopReason::Patience => "patience",
                StopReason::MaxEpochs => "max epochs",
            },
            self.updates,
            self.skipped_utterances.len()
        );
        out
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub report: TrainReport,
    /// Parameters of the best epoch.
    pub params: ModelParams,
}

fn check_finite(epoch: usize, what: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(Error::Diverged {
            epoch,
            reason: format!("{what} is {v}"),
        })
    }
}

/// Trains `params` in place of a copy and returns the best-validation parameters.
pub fn train(
    system: &AsrSystem,
    init: ModelParams,
    train_set: &[Utterance],
    valid_set: &[Utterance],
    cfg: &TrainingConfig,
) -> Result<TrainOutcome> {
    train_inner(system, init, train_set, valid_set, cfg, false)
}

fn train_inner(
    system: &AsrSystem,
    init: ModelParams,
    train_set: &[Utterance],
    valid_set: &[Utterance],
    cfg: &TrainingConfig,
    allow_zero_lr: bool,
) -> Result<TrainOutcome> {
    cfg.validate(allow_zero_lr)?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::Config("training and validation sets must be non-empty".into()));
    }
    init.check_shapes(system.config())?;
    let mut params = init;
    let mut best = params.clone();
    let mut best_loss = f64::INFINITY;
    let mut best_epoch = 0;
    let mut since_best = 0;
    let mut optimizer = OptimizerState::new(&params);
    let mut epochs = Vec::new();
    let mut updates = 0;
    let mut skipped = std::collections::BTreeSet::new();
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, &[b"shuffle", &(epoch as u64).to_le_bytes()]));
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut lang_sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
        let mut counted = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Utterance> = chunk.iter().map(|&i| &train_set[i]).collect();
            let obj = objective(system, &params, &batch, cfg.clip_per_sample, cfg.jobs)?;
            check_finite(epoch, "training loss", obj.loss)?;
            skipped.extend(obj.skipped.iter().cloned());
            loss_sum += obj.loss;
            for (lang, loss) in &obj.loss_by_language {
                let e = lang_sums.entry(lang.clone()).or_default();
                e.0 += loss;
                e.1 += obj.count_by_language[lang];
                counted += obj.count_by_language[lang];
            }
            if obj.skipped.len() < batch.len() {
                optimizer.step(&mut params, &obj.grads, cfg);
                updates += 1;
            }
        }
        if !params.all_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: "non-finite parameter".into(),
            });
        }
        let valid = evaluate_loss(system, &params, valid_set, cfg.jobs)?;
        skipped.extend(valid.skipped.iter().cloned());
        if valid.utterances == 0 {
            return Err(Error::Config("every validation utterance is infeasible".into()));
        }
        check_finite(epoch, "validation loss", valid.mean)?;

        epochs.push(EpochRecord {
            epoch,
            train_loss: if counted == 0 { f64::NAN } else { loss_sum / counted as f64 },
            train_loss_by_language: lang_sums.into_iter().map(|(k, (s, c))| (k, s / c as f64)).collect(),
            valid_loss: valid.mean,
            valid_loss_by_language: valid.by_language,
        });
        log::info!("epoch {epoch}: valid loss {:.4}", valid.mean);

        if valid.mean < best_loss {
            best_loss = valid.mean;
            best_epoch = epoch;
            best = params.clone();
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stop_reason = StopReason::Patience;
                break;
            }
        }
    }

    if epochs.is_empty() {
        let valid = evaluate_loss(system, &params, valid_set, cfg.jobs)?;
        best_loss = valid.mean;
        skipped.extend(valid.skipped);
    }
    Ok(TrainOutcome {
        report: TrainReport {
            variant: system.variant(),
            languages: system.inventory().languages().iter().map(|l| l.as_str().to_string()).collect(),
            epochs,
            best_epoch,
            best_valid_loss: best_loss,
            stop_reason,
            updates,
            skipped_utterances: skipped.into_iter().collect(),
        },
        params: best,
    })
}

/// Builds a fresh system for `variant` over the languages of `inventory`,
/// initializes it from `cfg.seed` and trains it.
pub fn train_from_scratch(
    variant: Variant,
    inventory: LabelInventory,
    frontend: crate::features::Frontend,
    feature_dim: usize,
    size: &EncoderSize,
    train_set: &[Utterance],
    valid_set: &[Utterance],
    cfg: &TrainingConfig,
) -> Result<(AsrSystem, TrainOutcome)> {
    let system = AsrSystem::new(variant, inventory, frontend, feature_dim, size, true)?;
    let init = system.init_params(derive_seed(cfg.seed, &[b"init"]))?;
    let outcome = train(&system, init, train_set, valid_set, cfg)?;
    Ok((system, outcome))
}

/// Redraws the output layer from the initialization distribution.
pub fn reinit_heads(params: &mut ModelParams, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, &[b"head"]));
    for head in &mut params.heads {
        let w = head.w.shape();
        let b = head.b.shape();
        head.w = crate::matrix::Matrix::uniform(w.0, w.1, INIT_RANGE, &mut rng);
        head.b = crate::matrix::Matrix::uniform(b.0, b.1, INIT_RANGE, &mut rng);
    }
}

/// Continues training a checkpoint on one target language. `target` is the
/// label inventory of the target data; every one of its tokens must exist in
/// the checkpoint's inventory. With `max_epochs = 0` the checkpoint is
/// returned unchanged, which is the "no fine-tuning" evaluation path.
pub fn fine_tune(
    system: &AsrSystem,
    init: ModelParams,
    target: &LabelInventory,
    train_set: &[Utterance],
    valid_set: &[Utterance],
    cfg: &TrainingConfig,
    reinit_head: bool,
) -> Result<TrainOutcome> {
    if target.languages().len() != 1 {
        return Err(Error::Config("fine-tuning targets exactly one language".into()));
    }
    let lang = &target.languages()[0];
    let missing = system.inventory().missing_tokens(target, lang)?;
    if !missing.is_empty() {
        return Err(Error::LabelSetMismatch(missing));
    }
    if let Some(u) = train_set.iter().chain(valid_set).find(|u| &u.language != lang) {
        return Err(Error::Config(format!(
            "utterance {} is {}, not the target language {lang}",
            u.id, u.language
        )));
    }
    let mut params = init;
    if reinit_head {
        reinit_heads(&mut params, cfg.seed);
    }
    train_inner(system, params, train_set, valid_set, cfg, true)
}

/// Universal model over the union of two languages' labels with no mask, no
/// gate and no language input anywhere.
pub fn train_bilingual(
    inventory: &LabelInventory,
    frontend: crate::features::Frontend,
    feature_dim: usize,
    size: &EncoderSize,
    train_set: &[Utterance],
    valid_set: &[Utterance],
    cfg: &TrainingConfig,
) -> Result<(AsrSystem, TrainOutcome)> {
    if inventory.languages().len() != 2 {
        return Err(Error::Config(format!(
            "bilingual training needs exactly two languages, got {}",
            inventory.languages().len()
        )));
    }
    let system = AsrSystem::new(Variant::Universal, inventory.clone(), frontend, feature_dim, size, false)?;
    let init = system.init_params(derive_seed(cfg.seed, &[b"init"]))?;
    let outcome = train(&system, init, train_set, valid_set, cfg)?;
    Ok((system, outcome))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Frontend;
    use crate::synth::{build_specs, synth_utterance, EmissionParams, LexiconParams, TextSampler};

    fn size() -> EncoderSize {
        EncoderSize {
            num_layers: 1,
            hidden_per_direction: 4,
            projection_dim: 4,
            ..Default::default()
        }
    }

    fn data(inv: &LabelInventory, system: &AsrSystem, n: usize, sigma: f64, seed: u64) -> Vec<Utterance> {
        let params = EmissionParams {
            dim: 4,
            sigma,
            frames_min: 2,
            frames_max: 3,
            rho: 0.5,
        };
        let specs = build_specs(inv, &params, 7).unwrap();
        let lex = LexiconParams {
            words_per_language: 6,
            word_len_min: 1,
            word_len_max: 3,
            words_per_utterance_min: 1,
            words_per_utterance_max: 1,
            ..Default::default()
        };
        let sampler = TextSampler::random(inv, &lex, 7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for i in 0..n {
            let spec = &specs[i % specs.len()];
            let text = sampler.sample(&spec.language, &mut rng).unwrap();
            let fm = synth_utterance(spec, inv, &text, &format!("u{seed}_{i}"), seed * 1000 + i as u64).unwrap();
            out.push(system.prepare(&fm).unwrap());
        }
        out
    }

    fn setup(variant: Variant) -> (AsrSystem, Vec<Utterance>) {
        let inv = LabelInventory::from_strs([("L1", "ab"), ("L2", "bc")]).unwrap();
        let system = AsrSystem::new(variant, inv.clone(), Frontend { stack: 1, skip: 1 }, 4, &size(), true).unwrap();
        let utts = data(&inv, &system, 6, 0.1, 1);
        (system, utts)
    }

    #[test]
    fn single_utterance_objective_is_its_loss() {
        let (system, utts) = setup(Variant::UniversalGated);
        let params = system.init_params(1).unwrap();
        let obj = objective(&system, &params, &[&utts[0]], 1e9, 1).unwrap();
        assert_eq!(obj.loss, system.loss(&params, &utts[0]).unwrap());
    }

    #[test]
    fn mtl_objective_is_additive_over_languages() {
        let (system, utts) = setup(Variant::MultiTaskHeads);
        let params = system.init_params(2).unwrap();
        let all: Vec<&Utterance> = utts.iter().collect();
        let (l1, l2): (Vec<&Utterance>, Vec<&Utterance>) =
            all.iter().partition(|u| u.language.as_str() == "L1");
        let full = objective(&system, &params, &all, 1e9, 1).unwrap();
        let a = objective(&system, &params, &l1, 1e9, 1).unwrap();
        let b = objective(&system, &params, &l2, 1e9, 1).unwrap();
        assert!((full.loss - (a.loss + b.loss)).abs() <= 1e-10);
    }

    #[test]
    fn clipping_bounds_each_sample() {
        let (system, utts) = setup(Variant::Universal);
        let params = system.init_params(3).unwrap();
        let obj = objective(&system, &params, &[&utts[0]], 0.0003, 1).unwrap();
        assert!(obj.grads.max_abs() <= 0.0003);
        let raw = system.loss_and_grad(&params, &utts[0]).unwrap();
        assert!(raw.grads.max_abs() > 0.0003);
    }

    #[test]
    fn parallel_reduction_matches_serial() {
        let (system, utts) = setup(Variant::UniversalGated);
        let params = system.init_params(4).unwrap();
        let all: Vec<&Utterance> = utts.iter().collect();
        let a = objective(&system, &params, &all, 0.01, 1).unwrap();
        let b = objective(&system, &params, &all, 0.01, 3).unwrap();
        assert_eq!(a.loss, b.loss);
        assert_eq!(a.grads, b.grads);
    }

    #[test]
    fn infeasible_targets_are_skipped_and_reported() {
        let (system, mut utts) = setup(Variant::Universal);
        utts[0].input = crate::matrix::Matrix::zeros(1, utts[0].input.cols());
        utts[0].target = vec![1, 1, 2];
        let params = system.init_params(5).unwrap();
        let all: Vec<&Utterance> = utts.iter().collect();
        let obj = objective(&system, &params, &all, 1.0, 1).unwrap();
        assert_eq!(obj.skipped, vec![utts[0].id.clone()]);
    }

    #[test]
    fn zero_learning_rate_stops_after_two_epochs() {
        let (system, utts) = setup(Variant::Universal);
        let cfg = TrainingConfig {
            learning_rate: 0.0,
            patience: 1,
            max_epochs: 10,
            ..Default::default()
        };
        let params = system.init_params(6).unwrap();
        assert!(train(&system, params.clone(), &utts, &utts, &cfg).is_err());
        let out = train_inner(&system, params.clone(), &utts, &utts, &cfg, true).unwrap();
        assert_eq!(out.report.epochs.len(), 2);
        assert_eq!(out.report.stop_reason, StopReason::Patience);
        assert_eq!(out.params, params);
    }

    #[test]
    fn training_is_deterministic_and_keeps_best() {
        let (system, utts) = setup(Variant::UniversalGated);
        let cfg = TrainingConfig {
            learning_rate: 0.05,
            clip_per_sample: 1.0,
            batch_size: 2,
            max_epochs: 4,
            ..Default::default()
        };
        let init = system.init_params(7).unwrap();
        let a = train(&system, init.clone(), &utts[..4], &utts[4..], &cfg).unwrap();
        let b = train(&system, init, &utts[..4], &utts[4..], &cfg).unwrap();
        assert_eq!(a.report.to_json().unwrap(), b.report.to_json().unwrap());
        assert_eq!(a.params, b.params);
        let min = a.report.epochs.iter().map(|e| e.valid_loss).fold(f64::INFINITY, f64::min);
        assert_eq!(a.report.best_valid_loss, min);
        let direct = evaluate_loss(&system, &a.params, &utts[4..], 1).unwrap();
        assert!((direct.mean - min).abs() < 1e-12);
        assert!(a.report.to_table().contains("best epoch"));
    }

    #[test]
    fn fine_tune_zero_epochs_is_identity_and_checks_labels() {
        let (system, utts) = setup(Variant::UniversalGated);
        let init = system.init_params(8).unwrap();
        let l2 = system.inventory().restrict(&[system.inventory().language("L2").unwrap().clone()]).unwrap();
        let l2_utts: Vec<Utterance> = utts.iter().filter(|u| u.language.as_str() == "L2").cloned().collect();
        let cfg = TrainingConfig {
            max_epochs: 0,
            ..Default::default()
        };
        let out = fine_tune(&system, init.clone(), &l2, &l2_utts, &l2_utts, &cfg, false).unwrap();
        assert_eq!(out.params, init);
        assert!(out.report.epochs.is_empty());

        let foreign = LabelInventory::from_strs([("L2", "bcz")]).unwrap();
        match fine_tune(&system, init, &foreign, &l2_utts, &l2_utts, &cfg, false) {
            Err(Error::LabelSetMismatch(missing)) => assert!(missing.contains(&"z".to_string())),
            other => panic!("expected label mismatch, got {other:?}"),
        }
    }

    #[test]
    fn bilingual_rejects_wrong_language_count() {
        let inv = LabelInventory::from_strs([("L1", "ab")]).unwrap();
        let r = train_bilingual(&inv, Frontend::default(), 4, &size(), &[], &[], &TrainingConfig::default());
        assert!(matches!(r, Err(Error::Config(_))));
    }
}
