//! Stacked bidirectional LSTM encoder with per-layer linear projections,
//! optional language-specific gating and one or more output heads.
//!
//! Layer `i` runs a forward and a backward LSTM over the whole utterance,
//! concatenates their hidden states and projects them to `projection_dim`.
//! In the language-aware variants the projected output `h` of every layer in
//! `gate_layers` is rescaled by a sigmoid gate and tagged with the one-hot
//! language vector `d` before it feeds the next layer (or the head):
//!
//! ```text
//! g  = sigmoid(U h + V d + b)
//! h' = [g * h : d]
//! ```
//!
//! The ablations change only the gate function (`gate-h`: `U h + b`,
//! `gate-d`: `V d + b`) or drop the gate entirely (`aux`: `h' = [h : d]`).
//! In all of these the first layer also reads `[x : d]`, so every layer
//! sees the language.

mod checkpoint;
mod lstm;
mod network;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{sigmoid, Matrix};

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use lstm::LstmParams;
pub use network::{ForwardTrace, Model};

/// Half-width of the uniform initialization range.
pub const INIT_RANGE: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "mono")]
    Monolingual,
    #[serde(rename = "mtl")]
    MultiTaskHeads,
    #[serde(rename = "univ")]
    Universal,
    #[serde(rename = "gated")]
    UniversalGated,
    #[serde(rename = "aux")]
    AuxInputOnly,
    #[serde(rename = "gate-h")]
    GateHOnly,
    #[serde(rename = "gate-d")]
    GateDOnly,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Monolingual,
        Variant::MultiTaskHeads,
        Variant::Universal,
        Variant::UniversalGated,
        Variant::AuxInputOnly,
        Variant::GateHOnly,
        Variant::GateDOnly,
    ];

    pub fn flag(self) -> &'static str {
        match self {
            Variant::Monolingual => "mono",
            Variant::MultiTaskHeads => "mtl",
            Variant::Universal => "univ",
            Variant::UniversalGated => "gated",
            Variant::AuxInputOnly => "aux",
            Variant::GateHOnly => "gate-h",
            Variant::GateDOnly => "gate-d",
        }
    }

    /// Whether the encoder consumes the one-hot language indicator.
    pub fn uses_language(self) -> bool {
        !matches!(self, Variant::Monolingual | Variant::Universal)
    }

    pub fn has_gates(self) -> bool {
        matches!(
            self,
            Variant::UniversalGated | Variant::GateHOnly | Variant::GateDOnly
        )
    }

    pub fn appends_indicator(self) -> bool {
        self.has_gates() || self == Variant::AuxInputOnly
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.flag())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.flag() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub num_layers: usize,
    pub hidden_per_direction: usize,
    pub projection_dim: usize,
    pub input_dim: usize,
    /// 1-based indices of the layers whose outputs are gated (and tagged with
    /// the language vector).
    pub gate_layers: Vec<usize>,
    /// Number of top layers duplicated per language in the multi-task model.
    pub mtl_branch_depth: usize,
    pub num_languages: usize,
    /// One entry for a shared head, one per language for multi-task heads.
    pub output_dims: Vec<usize>,
    /// Whether decoding and training restrict outputs with a language mask.
    pub masked: bool,
}

impl ModelConfig {
    /// Defaults for everything but the data-dependent sizes: 4 layers of 320
    /// cells per direction, 320-dim projections, every layer gated.
    pub fn new(variant: Variant, input_dim: usize, num_languages: usize, output_dims: Vec<usize>) -> Self {
        ModelConfig {
            variant,
            num_layers: 4,
            hidden_per_direction: 320,
            projection_dim: 320,
            input_dim,
            gate_layers: (1..=4).collect(),
            mtl_branch_depth: 1,
            num_languages,
            output_dims,
            masked: true,
        }
    }

    /// Resizes the encoder, gating every layer.
    pub fn with_size(mut self, num_layers: usize, hidden: usize, projection: usize) -> Self {
        self.num_layers = num_layers;
        self.hidden_per_direction = hidden;
        self.projection_dim = projection;
        self.gate_layers = (1..=num_layers).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.num_layers == 0 {
            return bad("num_layers must be at least 1".into());
        }
        if self.hidden_per_direction == 0 || self.projection_dim == 0 || self.input_dim == 0 {
            return bad("layer sizes must be positive".into());
        }
        if self.num_languages == 0 {
            return bad("at least one language is required".into());
        }
        if let Some(&l) = self
            .gate_layers
            .iter()
            .find(|&&l| l == 0 || l > self.num_layers)
        {
            return bad(format!("gate layer {l} outside 1..={}", self.num_layers));
        }
        if self.output_dims.iter().any(|&k| k < 2) {
            return bad("output heads need at least two labels".into());
        }
        match self.variant {
            Variant::MultiTaskHeads => {
                if self.output_dims.len() != self.num_languages {
                    return bad("multi-task model needs one head per language".into());
                }
                if self.mtl_branch_depth > self.num_layers {
                    return bad("branch depth exceeds the number of layers".into());
                }
            }
            _ => {
                if self.output_dims.len() != 1 {
                    return bad("shared-head model needs exactly one output size".into());
                }
            }
        }
        if self.variant == Variant::Monolingual && self.num_languages != 1 {
            return bad("monolingual model covers exactly one language".into());
        }
        Ok(())
    }

    /// Whether layer `i` (0-based) emits `[h' : d]`.
    pub fn appends_indicator(&self, i: usize) -> bool {
        match self.variant {
            Variant::AuxInputOnly => true,
            v if v.has_gates() => self.gate_layers.contains(&(i + 1)),
            _ => false,
        }
    }

    pub fn is_gated(&self, i: usize) -> bool {
        self.variant.has_gates() && self.gate_layers.contains(&(i + 1))
    }

    pub fn layer_output_dim(&self, i: usize) -> usize {
        self.projection_dim
            + if self.appends_indicator(i) {
                self.num_languages
            } else {
                0
            }
    }

    /// Whether the first layer reads `[x : d]` rather than `x` alone.
    pub fn input_carries_indicator(&self) -> bool {
        self.variant == Variant::AuxInputOnly || self.variant.has_gates()
    }

    pub fn layer_input_dim(&self, i: usize) -> usize {
        if i == 0 {
            self.input_dim
                + if self.input_carries_indicator() {
                    self.num_languages
                } else {
                    0
                }
        } else {
            self.layer_output_dim(i - 1)
        }
    }

    /// Layers shared across languages (all of them unless multi-task).
    pub fn shared_layers(&self) -> usize {
        match self.variant {
            Variant::MultiTaskHeads => self.num_layers - self.mtl_branch_depth,
            _ => self.num_layers,
        }
    }

    pub fn num_heads(&self) -> usize {
        self.output_dims.len()
    }

    pub fn head_input_dim(&self) -> usize {
        self.layer_output_dim(self.num_layers - 1)
    }
}

/// One-hot language vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageIndicator {
    values: Vec<f64>,
    hot: usize,
}

impl LanguageIndicator {
    pub fn one_hot(index: usize, num_languages: usize) -> Result<Self> {
        if index >= num_languages {
            return Err(Error::Config(format!(
                "language index {index} out of range for {num_languages} languages"
            )));
        }
        let mut values = vec![0.0; num_languages];
        values[index] = 1.0;
        Ok(LanguageIndicator { values, hot: index })
    }

    pub fn from_values(values: Vec<f64>) -> Result<Self> {
        let ones: Vec<usize> = values
            .iter()
            .enumerate()
            .filter(|(_, &v)| v == 1.0)
            .map(|(i, _)| i)
            .collect();
        let zeros = values.iter().filter(|&&v| v == 0.0).count();
        if ones.len() != 1 || zeros + 1 != values.len() {
            return Err(Error::Config(format!("{values:?} is not one-hot")));
        }
        Ok(LanguageIndicator {
            hot: ones[0],
            values,
        })
    }

    pub fn index(&self) -> usize {
        self.hot
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    /// `projection_dim × 2·hidden`.
    pub proj_w: Matrix,
    pub proj_b: Matrix,
}

impl LayerParams {
    fn init(input: usize, hidden: usize, projection: usize, rng: &mut ChaCha8Rng) -> Self {
        LayerParams {
            fwd: LstmParams::init(input, hidden, rng),
            bwd: LstmParams::init(input, hidden, rng),
            proj_w: Matrix::uniform(projection, 2 * hidden, INIT_RANGE, rng),
            proj_b: Matrix::uniform(projection, 1, INIT_RANGE, rng),
        }
    }

    fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix)>) {
        self.fwd.tensors(&format!("{prefix}.fwd"), out);
        self.bwd.tensors(&format!("{prefix}.bwd"), out);
        out.push((format!("{prefix}.proj.w"), &self.proj_w));
        out.push((format!("{prefix}.proj.b"), &self.proj_b));
    }

    fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix)>) {
        self.fwd.tensors_mut(&format!("{prefix}.fwd"), out);
        self.bwd.tensors_mut(&format!("{prefix}.bwd"), out);
        out.push((format!("{prefix}.proj.w"), &mut self.proj_w));
        out.push((format!("{prefix}.proj.b"), &mut self.proj_b));
    }
}

/// Gate parameters of one layer: `U` (`P × P`), `V` (`P × L`), `b` (`P`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateParams {
    pub u: Matrix,
    pub v: Matrix,
    pub b: Matrix,
}

/// Which inputs drive a gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateInputs {
    Both,
    HiddenOnly,
    LanguageOnly,
}

impl GateInputs {
    pub fn for_variant(variant: Variant) -> Option<Self> {
        match variant {
            Variant::UniversalGated => Some(GateInputs::Both),
            Variant::GateHOnly => Some(GateInputs::HiddenOnly),
            Variant::GateDOnly => Some(GateInputs::LanguageOnly),
            _ => None,
        }
    }

    pub fn uses_hidden(self) -> bool {
        self != GateInputs::LanguageOnly
    }

    pub fn uses_language(self) -> bool {
        self != GateInputs::HiddenOnly
    }
}

impl GateParams {
    pub fn zeros(projection: usize, num_languages: usize) -> Self {
        GateParams {
            u: Matrix::zeros(projection, projection),
            v: Matrix::zeros(projection, num_languages),
            b: Matrix::zeros(projection, 1),
        }
    }

    fn init(projection: usize, num_languages: usize, rng: &mut ChaCha8Rng) -> Self {
        GateParams {
            u: Matrix::uniform(projection, projection, INIT_RANGE, rng),
            v: Matrix::uniform(projection, num_languages, INIT_RANGE, rng),
            b: Matrix::uniform(projection, 1, INIT_RANGE, rng),
        }
    }

    /// Gate activations `sigmoid(U h + V d + b)`, restricted to the inputs
    /// selected by `inputs`.
    pub fn activations(&self, h: &[f64], d: &LanguageIndicator, inputs: GateInputs) -> Vec<f64> {
        let mut a: Vec<f64> = self.b.data().to_vec();
        if inputs.uses_hidden() {
            self.u.matvec_acc(h, &mut a);
        }
        if inputs.uses_language() {
            let l = d.index();
            for (ai, r) in a.iter_mut().zip(0..self.v.rows()) {
                *ai += self.v.get(r, l);
            }
        }
        a.iter_mut().for_each(|x| *x = sigmoid(*x));
        a
    }
}

/// Applies the full gate `g = sigmoid(U h + V d + b)` and returns
/// `[g * h : d]`.
pub fn gate_forward(h: &[f64], d: &LanguageIndicator, gate: &GateParams) -> Result<Vec<f64>> {
    if h.len() != gate.u.cols() || gate.u.rows() != h.len() {
        return Err(Error::Shape(format!(
            "hidden vector of length {} does not match gate U {:?}",
            h.len(),
            gate.u.shape()
        )));
    }
    if d.len() != gate.v.cols() {
        return Err(Error::Shape(format!(
            "indicator of length {} does not match gate V {:?}",
            d.len(),
            gate.v.shape()
        )));
    }
    let g = gate.activations(h, d, GateInputs::Both);
    let mut out: Vec<f64> = g.iter().zip(h).map(|(g, h)| g * h).collect();
    out.extend_from_slice(d.values());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeadParams {
    pub w: Matrix,
    pub b: Matrix,
}

impl HeadParams {
    fn init(outputs: usize, inputs: usize, rng: &mut ChaCha8Rng) -> Self {
        HeadParams {
            w: Matrix::uniform(outputs, inputs, INIT_RANGE, rng),
            b: Matrix::uniform(outputs, 1, INIT_RANGE, rng),
        }
    }
}

/// All trainable tensors. For multi-task models `layers` holds only the
/// shared lower layers and `branches[l]` the language-specific top layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub layers: Vec<LayerParams>,
    pub branches: Vec<Vec<LayerParams>>,
    /// Indexed by layer; `None` for layers without a gate. Multi-task models
    /// never carry gates.
    pub gates: Vec<Option<GateParams>>,
    pub heads: Vec<HeadParams>,
}

impl ModelParams {
    /// Every weight and bias i.i.d. uniform on `[-0.05, 0.05]`.
    pub fn init(config: &ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let hidden = config.hidden_per_direction;
        let proj = config.projection_dim;
        let shared = config.shared_layers();
        let layers = (0..shared)
            .map(|i| LayerParams::init(config.layer_input_dim(i), hidden, proj, &mut rng))
            .collect();
        let branches = if config.variant == Variant::MultiTaskHeads {
            (0..config.num_languages)
                .map(|_| {
                    (shared..config.num_layers)
                        .map(|i| LayerParams::init(config.layer_input_dim(i), hidden, proj, &mut rng))
                        .collect()
                })
                .collect()
        } else {
            Vec::new()
        };
        let gates = (0..config.num_layers)
            .map(|i| {
                config
                    .is_gated(i)
                    .then(|| GateParams::init(proj, config.num_languages, &mut rng))
            })
            .collect();
        let heads = config
            .output_dims
            .iter()
            .map(|&k| HeadParams::init(k, config.head_input_dim(), &mut rng))
            .collect();
        Ok(ModelParams {
            layers,
            branches,
            gates,
            heads,
        })
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Named view of every tensor in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = Vec::new();
        for (i, layer) in self.layers.iter().enumerate() {
            layer.tensors(&format!("layer{}", i + 1), &mut out);
        }
        let shared = self.layers.len();
        for (l, branch) in self.branches.iter().enumerate() {
            for (j, layer) in branch.iter().enumerate() {
                layer.tensors(&format!("branch{l}.layer{}", shared + j + 1), &mut out);
            }
        }
        for (i, gate) in self.gates.iter().enumerate() {
            if let Some(g) = gate {
                out.push((format!("gate{}.u", i + 1), &g.u));
                out.push((format!("gate{}.v", i + 1), &g.v));
                out.push((format!("gate{}.b", i + 1), &g.b));
            }
        }
        for (h, head) in self.heads.iter().enumerate() {
            out.push((format!("head{h}.w"), &head.w));
            out.push((format!("head{h}.b"), &head.b));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = Vec::new();
        let shared = self.layers.len();
        for (i, layer) in self.layers.iter_mut().enumerate() {
            layer.tensors_mut(&format!("layer{}", i + 1), &mut out);
        }
        for (l, branch) in self.branches.iter_mut().enumerate() {
            for (j, layer) in branch.iter_mut().enumerate() {
                layer.tensors_mut(&format!("branch{l}.layer{}", shared + j + 1), &mut out);
            }
        }
        for (i, gate) in self.gates.iter_mut().enumerate() {
            if let Some(g) = gate {
                out.push((format!("gate{}.u", i + 1), &mut g.u));
                out.push((format!("gate{}.v", i + 1), &mut g.v));
                out.push((format!("gate{}.b", i + 1), &mut g.b));
            }
        }
        for (h, head) in self.heads.iter_mut().enumerate() {
            out.push((format!("head{h}.w"), &mut head.w));
            out.push((format!("head{h}.b"), &mut head.b));
        }
        out
    }

    pub fn num_values(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.data().len()).sum()
    }

    /// `self += scale * other`, tensor by tensor.
    pub fn add_scaled(&mut self, other: &ModelParams, scale: f64) {
        for ((_, a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            crate::matrix::axpy(scale, b.data(), a.data_mut());
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.tensors()
            .iter()
            .fold(0.0, |m, (_, t)| m.max(t.max_abs()))
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.all_finite())
    }

    /// Checks that names and shapes agree with a freshly initialized model
    /// of `config`.
    pub fn check_shapes(&self, config: &ModelConfig) -> Result<()> {
        let reference = ModelParams::init(config, 0)?;
        let mine = self.tensors();
        let theirs = reference.tensors();
        if mine.len() != theirs.len() {
            return Err(Error::Shape(format!(
                "{} tensors where the configuration implies {}",
                mine.len(),
                theirs.len()
            )));
        }
        for ((na, a), (nb, b)) in mine.iter().zip(&theirs) {
            if na != nb || a.shape() != b.shape() {
                return Err(Error::Shape(format!(
                    "tensor {na} {:?} does not match expected {nb} {:?}",
                    a.shape(),
                    b.shape()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny(variant: Variant) -> ModelConfig {
        let outputs = if variant == Variant::MultiTaskHeads { vec![4, 5] } else { vec![6] };
        let langs = if variant == Variant::Monolingual { 1 } else { 2 };
        ModelConfig::new(variant, 3, langs, outputs).with_size(2, 3, 4)
    }

    #[test]
    fn init_is_bounded_and_seeded() {
        for v in Variant::ALL {
            let cfg = tiny(v);
            let a = ModelParams::init(&cfg, 11).unwrap();
            assert!(a.max_abs() <= INIT_RANGE, "{v}");
            assert_eq!(a, ModelParams::init(&cfg, 11).unwrap());
            assert_ne!(a, ModelParams::init(&cfg, 12).unwrap());
            a.check_shapes(&cfg).unwrap();
        }
    }

    #[test]
    fn variant_flags_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.flag().parse::<Variant>().unwrap(), v);
        }
        assert!("nope".parse::<Variant>().is_err());
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny(Variant::UniversalGated);
        cfg.gate_layers = vec![3];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny(Variant::MultiTaskHeads);
        cfg.output_dims = vec![4];
        assert!(cfg.validate().is_err());
        let mut cfg = tiny(Variant::Universal);
        cfg.num_layers = 0;
        assert!(cfg.validate().is_err());
        let cfg = ModelConfig::new(Variant::Monolingual, 3, 2, vec![5]);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn gated_layer_widths() {
        let mut cfg = tiny(Variant::UniversalGated);
        cfg.gate_layers = vec![1];
        assert_eq!(cfg.layer_input_dim(1), 4 + 2);
        assert_eq!(cfg.head_input_dim(), 4);
        assert_eq!(tiny(Variant::AuxInputOnly).head_input_dim(), 6);
        assert_eq!(tiny(Variant::Universal).layer_input_dim(1), 4);
        let input = cfg.input_dim;
        assert_eq!(cfg.layer_input_dim(0), input + 2);
        assert_eq!(tiny(Variant::AuxInputOnly).layer_input_dim(0), input + 2);
        assert_eq!(tiny(Variant::Universal).layer_input_dim(0), input);
        assert_eq!(tiny(Variant::MultiTaskHeads).layer_input_dim(0), input);
    }

    #[test]
    fn indicator_validation() {
        assert!(LanguageIndicator::from_values(vec![0.0, 1.0, 0.0]).is_ok());
        assert!(LanguageIndicator::from_values(vec![1.0, 1.0]).is_err());
        assert!(LanguageIndicator::from_values(vec![0.5, 0.5]).is_err());
        assert!(LanguageIndicator::from_values(vec![0.0, 0.0]).is_err());
        assert!(LanguageIndicator::one_hot(2, 2).is_err());
    }

    #[test]
    fn zero_gate_halves() {
        let gate = GateParams::zeros(3, 2);
        let d = LanguageIndicator::one_hot(1, 2).unwrap();
        let out = gate_forward(&[2.0, -4.0, 1.0], &d, &gate).unwrap();
        assert_eq!(out, [1.0, -2.0, 0.5, 0.0, 1.0]);
    }

    #[test]
    fn vanishing_v_is_language_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut gate = GateParams::init(3, 3, &mut rng);
        gate.v.fill(0.0);
        let h = [0.3, -0.7, 1.1];
        let outs: Vec<Vec<f64>> = (0..3)
            .map(|l| gate_forward(&h, &LanguageIndicator::one_hot(l, 3).unwrap(), &gate).unwrap())
            .collect();
        for o in &outs[1..] {
            assert_eq!(o[..3], outs[0][..3]);
        }
        assert_ne!(outs[0][3..], outs[1][3..]);
    }

    #[test]
    fn zero_hidden_stays_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let gate = GateParams::init(4, 2, &mut rng);
        let d = LanguageIndicator::one_hot(0, 2).unwrap();
        let out = gate_forward(&[0.0; 4], &d, &gate).unwrap();
        assert_eq!(out[..4], [0.0; 4]);
        assert!(gate_forward(&[0.0; 3], &d, &gate).is_err());
    }
}
