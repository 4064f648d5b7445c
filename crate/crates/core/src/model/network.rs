use crate::error::{Error, Result};
use crate::matrix::{axpy, Matrix};

use super::lstm::LstmTrace;
use super::{GateInputs, LanguageIndicator, LayerParams, ModelConfig, ModelParams, Variant};

/// A configured network; parameters are passed separately so that one model
/// can evaluate many parameter sets (checkpoints, finite-difference probes).
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
}

#[derive(Debug, Clone)]
struct LayerTrace {
    input: Matrix,
    fwd: LstmTrace,
    bwd: LstmTrace,
    concat: Matrix,
    projected: Matrix,
    /// Gate activations, `T × P`, for gated layers.
    gate: Option<Matrix>,
}

/// Everything the backward pass needs from a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    layers: Vec<LayerTrace>,
    head_input: Matrix,
    language: Option<usize>,
    head: usize,
}

impl ForwardTrace {
    pub fn frames(&self) -> usize {
        self.head_input.rows()
    }

    pub fn language(&self) -> Option<usize> {
        self.language
    }

    /// Gate activations of every gated layer, in layer order.
    pub fn gate_activations(&self) -> impl Iterator<Item = &Matrix> {
        self.layers.iter().filter_map(|l| l.gate.as_ref())
    }
}

impl Model {
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Model { config })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn init_params(&self, seed: u64) -> Result<ModelParams> {
        ModelParams::init(&self.config, seed)
    }

    /// Output width for the head selected by `language`.
    pub fn output_dim(&self, language: Option<usize>) -> usize {
        match self.config.variant {
            Variant::MultiTaskHeads => self.config.output_dims[language.unwrap_or(0)],
            _ => self.config.output_dims[0],
        }
    }

    fn layer<'a>(&self, params: &'a ModelParams, i: usize, language: Option<usize>) -> &'a LayerParams {
        let shared = self.config.shared_layers();
        if i < shared {
            &params.layers[i]
        } else {
            &params.branches[language.unwrap_or(0)][i - shared]
        }
    }

    fn layer_mut<'a>(&self, params: &'a mut ModelParams, i: usize, language: Option<usize>) -> &'a mut LayerParams {
        let shared = self.config.shared_layers();
        if i < shared {
            &mut params.layers[i]
        } else {
            &mut params.branches[language.unwrap_or(0)][i - shared]
        }
    }

    fn check_language(&self, language: Option<usize>) -> Result<Option<LanguageIndicator>> {
        let variant = self.config.variant;
        match (variant.uses_language(), language) {
            (true, Some(l)) => Ok(Some(LanguageIndicator::one_hot(l, self.config.num_languages)?)),
            (true, None) => Err(Error::Config(format!(
                "the {variant} model needs a language indicator"
            ))),
            (false, None) => Ok(None),
            (false, Some(_)) => Err(Error::Config(format!(
                "the {variant} model takes no language indicator"
            ))),
        }
    }

    fn check_params(&self, params: &ModelParams) -> Result<()> {
        let cfg = &self.config;
        let branches_ok = match cfg.variant {
            Variant::MultiTaskHeads => {
                params.branches.len() == cfg.num_languages
                    && params
                        .branches
                        .iter()
                        .all(|b| b.len() == cfg.num_layers - cfg.shared_layers())
            }
            _ => params.branches.is_empty(),
        };
        if params.layers.len() != cfg.shared_layers()
            || !branches_ok
            || params.gates.len() != cfg.num_layers
            || params.heads.len() != cfg.num_heads()
        {
            return Err(Error::Shape("parameters do not match the model configuration".into()));
        }
        Ok(())
    }

    /// Runs the encoder and the head selected by `language`. The language
    /// must be given exactly when the variant consumes it.
    pub fn forward(&self, params: &ModelParams, input: &Matrix, language: Option<usize>) -> Result<(Matrix, ForwardTrace)> {
        let cfg = &self.config;
        self.check_params(params)?;
        let indicator = self.check_language(language)?;
        if input.cols() != cfg.input_dim {
            return Err(Error::Shape(format!(
                "input has {} features, model expects {}",
                input.cols(),
                cfg.input_dim
            )));
        }
        if input.rows() == 0 {
            return Err(Error::Shape("empty input".into()));
        }
        let frames = input.rows();
        let hidden = cfg.hidden_per_direction;
        let proj_dim = cfg.projection_dim;
        let gate_inputs = GateInputs::for_variant(cfg.variant);

        let mut layers = Vec::with_capacity(cfg.num_layers);
        let mut x = match &indicator {
            Some(d) if cfg.input_carries_indicator() => {
                let mut x = Matrix::zeros(frames, cfg.layer_input_dim(0));
                for t in 0..frames {
                    let row = x.row_mut(t);
                    row[..cfg.input_dim].copy_from_slice(input.row(t));
                    row[cfg.input_dim..].copy_from_slice(d.values());
                }
                x
            }
            _ => input.clone(),
        };
        for i in 0..cfg.num_layers {
            let lp = self.layer(params, i, language);
            let fwd = lp.fwd.forward(&x, false);
            let bwd = lp.bwd.forward(&x, true);
            let mut concat = Matrix::zeros(frames, 2 * hidden);
            for t in 0..frames {
                let row = concat.row_mut(t);
                row[..hidden].copy_from_slice(fwd.hidden.row(t));
                row[hidden..].copy_from_slice(bwd.hidden.row(t));
            }
            let projected = lp.proj_w.affine_rows(&concat, lp.proj_b.data());

            let out_dim = cfg.layer_output_dim(i);
            let mut out = Matrix::zeros(frames, out_dim);
            let mut gate_trace = None;
            match (&params.gates[i], gate_inputs, &indicator) {
                (Some(gate), Some(inputs), Some(d)) if cfg.is_gated(i) => {
                    let mut g_all = Matrix::zeros(frames, proj_dim);
                    for t in 0..frames {
                        let h = projected.row(t);
                        let g = gate.activations(h, d, inputs);
                        let row = out.row_mut(t);
                        for j in 0..proj_dim {
                            row[j] = g[j] * h[j];
                        }
                        g_all.row_mut(t).copy_from_slice(&g);
                    }
                    gate_trace = Some(g_all);
                }
                _ => {
                    for t in 0..frames {
                        out.row_mut(t)[..proj_dim].copy_from_slice(projected.row(t));
                    }
                }
            }
            if cfg.appends_indicator(i) {
                let d = indicator.as_ref().expect("indicator checked above");
                for t in 0..frames {
                    out.row_mut(t)[proj_dim..].copy_from_slice(d.values());
                }
            }
            layers.push(LayerTrace {
                input: x,
                fwd,
                bwd,
                concat,
                projected,
                gate: gate_trace,
            });
            x = out;
        }

        let head = match cfg.variant {
            Variant::MultiTaskHeads => language.expect("checked above"),
            _ => 0,
        };
        let hp = &params.heads[head];
        let logits = hp.w.affine_rows(&x, hp.b.data());
        Ok((
            logits,
            ForwardTrace {
                layers,
                head_input: x,
                language,
                head,
            },
        ))
    }

    /// Exact gradients of every parameter given `d loss / d logits`.
    /// Parameters that did not take part in the forward pass (other
    /// languages' heads and branches) get zero gradient.
    pub fn backward(&self, params: &ModelParams, trace: &ForwardTrace, grad_logits: &Matrix) -> Result<ModelParams> {
        let cfg = &self.config;
        self.check_params(params)?;
        let frames = trace.frames();
        let out_dim = params.heads[trace.head].w.rows();
        if grad_logits.shape() != (frames, out_dim) {
            return Err(Error::Shape(format!(
                "logit gradient {:?} does not match forward output ({frames}, {out_dim})",
                grad_logits.shape()
            )));
        }
        let mut grads = params.zeros_like();
        let language = trace.language;
        let hidden = cfg.hidden_per_direction;
        let proj_dim = cfg.projection_dim;
        let gate_inputs = GateInputs::for_variant(cfg.variant);

        let hp = &params.heads[trace.head];
        let mut dx = Matrix::zeros(frames, trace.head_input.cols());
        {
            let gh = &mut grads.heads[trace.head];
            for t in 0..frames {
                let dl = grad_logits.row(t);
                gh.w.outer_acc(dl, trace.head_input.row(t));
                axpy(1.0, dl, gh.b.data_mut());
                hp.w.matvec_t_acc(dl, dx.row_mut(t));
            }
        }

        for i in (0..cfg.num_layers).rev() {
            let lt = &trace.layers[i];
            // the appended indicator is constant, so only the first P columns carry gradient
            let mut dproj = Matrix::zeros(frames, proj_dim);
            match (&lt.gate, &params.gates[i], gate_inputs) {
                (Some(g_all), Some(gate), Some(inputs)) => {
                    let gg = grads.gates[i].as_mut().expect("gradient mirrors params");
                    let l = language.expect("gated forward had a language");
                    let mut da = vec![0.0; proj_dim];
                    for t in 0..frames {
                        let h = lt.projected.row(t);
                        let g = g_all.row(t);
                        let dout = &dx.row(t)[..proj_dim];
                        let dh = dproj.row_mut(t);
                        for j in 0..proj_dim {
                            da[j] = dout[j] * h[j] * g[j] * (1.0 - g[j]);
                            dh[j] = dout[j] * g[j];
                        }
                        if inputs.uses_hidden() {
                            gg.u.outer_acc(&da, h);
                            gate.u.matvec_t_acc(&da, dh);
                        }
                        if inputs.uses_language() {
                            for (r, &a) in da.iter().enumerate() {
                                let v = gg.v.get(r, l);
                                gg.v.set(r, l, v + a);
                            }
                        }
                        axpy(1.0, &da, gg.b.data_mut());
                    }
                }
                _ => {
                    for t in 0..frames {
                        dproj.row_mut(t).copy_from_slice(&dx.row(t)[..proj_dim]);
                    }
                }
            }

            let lp = self.layer(params, i, language);
            let gl = self.layer_mut(&mut grads, i, language);
            let mut dfwd = Matrix::zeros(frames, hidden);
            let mut dbwd = Matrix::zeros(frames, hidden);
            let mut dconcat = vec![0.0; 2 * hidden];
            for t in 0..frames {
                let dp = dproj.row(t);
                gl.proj_w.outer_acc(dp, lt.concat.row(t));
                axpy(1.0, dp, gl.proj_b.data_mut());
                dconcat.fill(0.0);
                lp.proj_w.matvec_t_acc(dp, &mut dconcat);
                dfwd.row_mut(t).copy_from_slice(&dconcat[..hidden]);
                dbwd.row_mut(t).copy_from_slice(&dconcat[hidden..]);
            }
            let mut d_input = lp.fwd.backward(&lt.input, &lt.fwd, &dfwd, &mut gl.fwd);
            let d_back = lp.bwd.backward(&lt.input, &lt.bwd, &dbwd, &mut gl.bwd);
            d_input.add_assign(&d_back);
            dx = d_input;
        }
        Ok(grads)
    }
}
