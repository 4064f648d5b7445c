//! Finite-difference oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use unictc::ctc::{apply_mask, ctc_loss};
use unictc::labelset::LanguageMask;
use unictc::matrix::Matrix;
use unictc::model::{Model, ModelParams};

pub const FD_EPS: f64 = 1e-5;

/// Components whose analytic and numeric magnitudes are both below this are
/// compared absolutely rather than relatively. Central differences at
/// `FD_EPS` carry about 1e-10 of round-off, which is already 1e-4 relative
/// on a 1e-6 gradient.
pub const REL_FLOOR: f64 = 1e-5;

pub fn rel_err(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Masked CTC loss of `logits` and its analytic gradient.
pub fn masked_ctc(logits: &Matrix, mask: &LanguageMask, target: &[usize], blank: usize) -> (f64, Matrix) {
    let lattice = apply_mask(logits, mask).unwrap();
    let r = ctc_loss(&lattice, target, blank).unwrap();
    (r.loss, r.grad)
}

/// Largest relative error between the analytic logit gradient and central
/// differences. Masked columns are skipped: their logits do not enter the
/// loss and their analytic gradient is zero by construction.
pub fn ctc_logit_check(logits: &Matrix, mask: &LanguageMask, target: &[usize], blank: usize) -> f64 {
    let (_, grad) = masked_ctc(logits, mask, target, blank);
    let mut worst: f64 = 0.0;
    for t in 0..logits.rows() {
        for k in 0..logits.cols() {
            if !mask.allows(k) {
                assert_eq!(grad.get(t, k), 0.0);
                continue;
            }
            let mut plus = logits.clone();
            plus.set(t, k, logits.get(t, k) + FD_EPS);
            let mut minus = logits.clone();
            minus.set(t, k, logits.get(t, k) - FD_EPS);
            let numeric = (masked_ctc(&plus, mask, target, blank).0 - masked_ctc(&minus, mask, target, blank).0)
                / (2.0 * FD_EPS);
            worst = worst.max(rel_err(grad.get(t, k), numeric));
        }
    }
    worst
}

/// Loss of the whole network on one utterance.
pub fn model_loss(
    model: &Model,
    params: &ModelParams,
    input: &Matrix,
    language: Option<usize>,
    mask: &LanguageMask,
    target: &[usize],
) -> f64 {
    let (logits, _) = model.forward(params, input, language).unwrap();
    masked_ctc(&logits, mask, target, 0).0
}

/// Largest relative error over every parameter of the network, the tensor
/// where it occurs and the number of components checked.
pub fn model_gradient_check(
    model: &Model,
    params: &ModelParams,
    input: &Matrix,
    language: Option<usize>,
    mask: &LanguageMask,
    target: &[usize],
) -> (f64, String, usize) {
    let (logits, trace) = model.forward(params, input, language).unwrap();
    let (_, dlogits) = masked_ctc(&logits, mask, target, 0);
    let grads = model.backward(params, &trace, &dlogits).unwrap();
    let analytic: Vec<(String, Vec<f64>)> = grads
        .tensors()
        .into_iter()
        .map(|(n, t)| (n, t.data().to_vec()))
        .collect();
    let mut worst = (0.0, String::new());
    let mut checked = 0;
    for (ti, (name, values)) in analytic.iter().enumerate() {
        for (i, &a) in values.iter().enumerate() {
            let perturbed = |delta: f64| {
                let mut p = params.clone();
                let mut tensors = p.tensors_mut();
                tensors[ti].1.data_mut()[i] += delta;
                drop(tensors);
                model_loss(model, &p, input, language, mask, target)
            };
            let numeric = (perturbed(FD_EPS) - perturbed(-FD_EPS)) / (2.0 * FD_EPS);
            let e = rel_err(a, numeric);
            if e > worst.0 {
                worst = (e, format!("{name}[{i}]"));
            }
            checked += 1;
        }
    }
    (worst.0, worst.1, checked)
}
