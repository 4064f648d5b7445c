//! A recognizer: label inventory, frontend and encoder configuration bound
//! together, with the glue that turns encoder logits into CTC lattices
//! (language masks, per-language heads) and lattices back into text.

use serde::{Deserialize, Serialize};

use crate::ctc::{apply_mask, ctc_loss, greedy_decode, LogProbLattice};
use crate::error::{Error, Result};
use crate::features::{FeatureMatrix, Frames, Frontend};
use crate::labelset::{LabelInventory, LanguageId, LanguageMask};
use crate::matrix::Matrix;
use crate::model::{Checkpoint, ForwardTrace, Model, ModelConfig, ModelParams, Variant};
use crate::synth::Manifest;

/// Encoder sizes; everything else in [`ModelConfig`] follows from the data.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EncoderSize {
    pub num_layers: usize,
    pub hidden_per_direction: usize,
    pub projection_dim: usize,
    /// 1-based gated layers; empty means every layer.
    pub gate_layers: Vec<usize>,
    pub mtl_branch_depth: usize,
}

impl Default for EncoderSize {
    fn default() -> Self {
        EncoderSize {
            num_layers: 4,
            hidden_per_direction: 320,
            projection_dim: 320,
            gate_layers: Vec::new(),
            mtl_branch_depth: 1,
        }
    }
}

/// One utterance ready for the encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    pub language: LanguageId,
    /// Stacked features, `T × input_dim`.
    pub input: Matrix,
    /// Blank-free global token ids.
    pub target: Vec<usize>,
    pub transcript: String,
}

#[derive(Debug, Clone)]
pub struct AsrSystem {
    model: Model,
    inventory: LabelInventory,
    frontend: Frontend,
    masks: Vec<LanguageMask>,
    /// Per language, the global ids in head order (multi-task heads only).
    head_tokens: Vec<Vec<usize>>,
}

/// Loss and gradient of one utterance.
#[derive(Debug, Clone)]
pub struct UtteranceGrad {
    pub loss: f64,
    pub grads: ModelParams,
}

impl AsrSystem {
    pub fn new(
        variant: Variant,
        inventory: LabelInventory,
        frontend: Frontend,
        feature_dim: usize,
        size: &EncoderSize,
        masked: bool,
    ) -> Result<Self> {
        let languages = inventory.languages().len();
        let output_dims = if variant == Variant::MultiTaskHeads {
            inventory
                .languages()
                .iter()
                .map(|l| inventory.membership(l).map(|m| m.len()))
                .collect::<Result<Vec<_>>>()?
        } else {
            vec![inventory.len()]
        };
        let mut config = ModelConfig::new(
            variant,
            frontend.output_dim(feature_dim),
            languages,
            output_dims,
        )
        .with_size(size.num_layers, size.hidden_per_direction, size.projection_dim);
        if !size.gate_layers.is_empty() {
            config.gate_layers = size.gate_layers.clone();
        }
        config.mtl_branch_depth = size.mtl_branch_depth;
        config.masked = masked;
        Self::from_parts(config, inventory, frontend)
    }

    pub fn from_parts(config: ModelConfig, inventory: LabelInventory, frontend: Frontend) -> Result<Self> {
        if config.num_languages != inventory.languages().len() {
            return Err(Error::Config(format!(
                "model expects {} languages, inventory has {}",
                config.num_languages,
                inventory.languages().len()
            )));
        }
        if config.variant == Variant::MultiTaskHeads {
            for (l, lang) in inventory.languages().iter().enumerate() {
                if config.output_dims[l] != inventory.membership(lang)?.len() {
                    return Err(Error::Config(format!("head size mismatch for {lang}")));
                }
            }
        } else if config.output_dims[0] != inventory.len() {
            return Err(Error::Config(format!(
                "head has {} outputs, inventory has {} tokens",
                config.output_dims[0],
                inventory.len()
            )));
        }
        let masks = inventory
            .languages()
            .iter()
            .map(|l| inventory.language_mask(l))
            .collect::<Result<Vec<_>>>()?;
        let head_tokens = inventory
            .languages()
            .iter()
            .map(|l| inventory.language_tokens(l))
            .collect::<Result<Vec<_>>>()?;
        Ok(AsrSystem {
            model: Model::new(config)?,
            inventory,
            frontend,
            masks,
            head_tokens,
        })
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        ckpt.params.check_shapes(&ckpt.config)?;
        Self::from_parts(ckpt.config.clone(), ckpt.inventory()?, ckpt.frontend)
    }

    pub fn checkpoint(&self, params: &ModelParams) -> Checkpoint {
        Checkpoint {
            config: self.config().clone(),
            frontend: self.frontend,
            alphabets: self.inventory.alphabet_strings(),
            params: params.clone(),
        }
    }

    pub fn model(&self) -> &Model {
        &self.model
    }

    pub fn config(&self) -> &ModelConfig {
        self.model.config()
    }

    pub fn variant(&self) -> Variant {
        self.config().variant
    }

    pub fn inventory(&self) -> &LabelInventory {
        &self.inventory
    }

    pub fn frontend(&self) -> Frontend {
        self.frontend
    }

    /// Whether decoding needs to know the utterance language.
    pub fn needs_language(&self) -> bool {
        self.config().masked || self.variant().uses_language()
    }

    pub fn init_params(&self, seed: u64) -> Result<ModelParams> {
        self.model.init_params(seed)
    }

    fn model_language(&self, language: Option<&LanguageId>) -> Result<Option<usize>> {
        if !self.variant().uses_language() {
            return Ok(None);
        }
        let lang = language.ok_or_else(|| {
            Error::Config(format!("the {} model needs the utterance language", self.variant()))
        })?;
        Ok(Some(self.inventory.language_index(lang)?))
    }

    fn mask_for(&self, language: Option<&LanguageId>, width: usize) -> Result<LanguageMask> {
        if self.variant() == Variant::MultiTaskHeads || !self.config().masked {
            return Ok(LanguageMask::all_ones(width));
        }
        let lang = language.ok_or_else(|| {
            Error::Config("a masked model needs the utterance language".into())
        })?;
        Ok(self.masks[self.inventory.language_index(lang)?].clone())
    }

    pub fn prepare_frames(&self, frames: &Frames) -> Result<Matrix> {
        Ok(self.frontend.apply(frames)?.to_matrix())
    }

    pub fn prepare(&self, fm: &FeatureMatrix) -> Result<Utterance> {
        let target = self.inventory.tokenize(&fm.transcript, &fm.language)?.ids;
        Ok(Utterance {
            id: fm.utterance_id.clone(),
            language: fm.language.clone(),
            input: self.prepare_frames(&fm.frames)?,
            target,
            transcript: fm.transcript.clone(),
        })
    }

    /// Loads and prepares every manifest entry whose language is in the
    /// inventory (all entries when `languages` is `None`).
    pub fn load_manifest(&self, manifest: &Manifest) -> Result<Vec<Utterance>> {
        manifest
            .entries
            .iter()
            .filter(|e| self.inventory.language_index(&e.language).is_ok())
            .map(|e| self.prepare(&manifest.load_entry(e)?))
            .collect()
    }

    /// Per-frame log-posteriors plus the trace for backpropagation.
    pub fn lattice(
        &self,
        params: &ModelParams,
        input: &Matrix,
        language: Option<&LanguageId>,
    ) -> Result<(LogProbLattice, ForwardTrace)> {
        let lang_index = self.model_language(language)?;
        let (logits, trace) = self.model.forward(params, input, lang_index)?;
        let mask = self.mask_for(language, logits.cols())?;
        Ok((apply_mask(&logits, &mask)?, trace))
    }

    /// Target ids in the output space of the head used for `language`.
    fn head_target(&self, target: &[usize], language: &LanguageId) -> Result<Vec<usize>> {
        if self.variant() != Variant::MultiTaskHeads {
            return Ok(target.to_vec());
        }
        let tokens = &self.head_tokens[self.inventory.language_index(language)?];
        target
            .iter()
            .map(|k| {
                tokens.binary_search(k).map_err(|_| Error::MaskedTarget { token: *k })
            })
            .collect()
    }

    fn to_global(&self, ids: Vec<usize>, language: Option<&LanguageId>) -> Result<Vec<usize>> {
        if self.variant() != Variant::MultiTaskHeads {
            return Ok(ids);
        }
        let l = self.inventory.language_index(language.expect("multi-task decode has a language"))?;
        Ok(ids.into_iter().map(|k| self.head_tokens[l][k]).collect())
    }

    pub fn loss(&self, params: &ModelParams, utt: &Utterance) -> Result<f64> {
        let (lattice, _) = self.lattice(params, &utt.input, Some(&utt.language))?;
        let target = self.head_target(&utt.target, &utt.language)?;
        Ok(ctc_loss(&lattice, &target, self.inventory.blank_index())?.loss)
    }

    pub fn loss_and_grad(&self, params: &ModelParams, utt: &Utterance) -> Result<UtteranceGrad> {
        let lang = Some(&utt.language);
        let (lattice, trace) = self.lattice(params, &utt.input, lang)?;
        let target = self.head_target(&utt.target, &utt.language)?;
        let ctc = ctc_loss(&lattice, &target, self.inventory.blank_index())?;
        let grads = self.model.backward(params, &trace, &ctc.grad)?;
        Ok(UtteranceGrad {
            loss: ctc.loss,
            grads,
        })
    }

    /// Greedy decode to global token ids.
    pub fn decode_ids(&self, params: &ModelParams, input: &Matrix, language: Option<&LanguageId>) -> Result<Vec<usize>> {
        let (lattice, _) = self.lattice(params, input, language)?;
        let ids = greedy_decode(&lattice, self.inventory.blank_index());
        self.to_global(ids, language)
    }

    pub fn decode(&self, params: &ModelParams, input: &Matrix, language: Option<&LanguageId>) -> Result<String> {
        let ids = self.decode_ids(params, input, language)?;
        self.inventory.detokenize_ids(&ids)
    }

    /// Decodes an utterance, passing its language only when the model uses it.
    pub fn transcribe(&self, params: &ModelParams, utt: &Utterance) -> Result<String> {
        let lang = self.needs_language().then_some(&utt.language);
        self.decode(params, &utt.input, lang)
    }
}
