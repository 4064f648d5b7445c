//! Connectionist temporal classification: log-space forward-backward with
//! gradients w.r.t. pre-softmax logits, an enumeration oracle, greedy
//! decoding and language masking.

use crate::error::{Error, Result};
use crate::labelset::{collapse, LanguageMask};
use crate::matrix::Matrix;

/// Largest alignment count [`ctc_brute_force`] will enumerate.
pub const BRUTE_FORCE_GUARD: f64 = 1e7;

#[inline]
pub fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// `T × K` per-frame log-posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct LogProbLattice {
    values: Matrix,
}

impl LogProbLattice {
    /// Wraps a matrix of log-probabilities, checking that every row is a
    /// normalized distribution.
    pub fn from_log_probs(values: Matrix) -> Result<Self> {
        for t in 0..values.rows() {
            let row = values.row(t);
            let total = log_sum_exp(row);
            if (total).abs() > 1e-6 || row.iter().any(|&v| v > 1e-9 || v.is_nan()) {
                return Err(Error::Shape(format!(
                    "lattice row {t} is not a log-distribution (log-sum {total})"
                )));
            }
        }
        Ok(LogProbLattice { values })
    }

    pub fn frames(&self) -> usize {
        self.values.rows()
    }

    pub fn labels(&self) -> usize {
        self.values.cols()
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    #[inline]
    pub fn get(&self, t: usize, k: usize) -> f64 {
        self.values.get(t, k)
    }
}

/// Log-softmax of each logit row with masked entries forced to `-inf` before
/// normalization.
pub fn apply_mask(logits: &Matrix, mask: &LanguageMask) -> Result<LogProbLattice> {
    if mask.len() != logits.cols() {
        return Err(Error::Shape(format!(
            "mask length {} does not match {} logits",
            mask.len(),
            logits.cols()
        )));
    }
    if mask.count_ones() == 0 {
        return Err(Error::Shape("mask allows no label".into()));
    }
    let bits = mask.bits();
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for t in 0..logits.rows() {
        let row = logits.row(t);
        let max = row
            .iter()
            .zip(bits)
            .filter(|(_, b)| **b)
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row
            .iter()
            .zip(bits)
            .filter(|(_, b)| **b)
            .map(|(v, _)| (v - max).exp())
            .sum();
        let norm = max + sum.ln();
        for ((o, v), b) in out.row_mut(t).iter_mut().zip(row).zip(bits) {
            *o = if *b { v - norm } else { f64::NEG_INFINITY };
        }
    }
    Ok(LogProbLattice { values: out })
}

pub fn log_softmax(logits: &Matrix) -> LogProbLattice {
    apply_mask(logits, &LanguageMask::all_ones(logits.cols())).expect("unmasked log-softmax")
}

/// Loss and gradient w.r.t. the logits that produced the lattice.
#[derive(Debug, Clone)]
pub struct CtcResult {
    pub loss: f64,
    pub grad: Matrix,
}

/// Minimum number of frames needed to emit `target`: one per label plus a
/// separating blank between equal neighbours.
pub fn required_frames(target: &[usize]) -> usize {
    target.len() + target.windows(2).filter(|w| w[0] == w[1]).count()
}

fn check_target(lattice: &LogProbLattice, target: &[usize], blank: usize) -> Result<()> {
    let k = lattice.labels();
    if blank >= k {
        return Err(Error::Shape(format!("blank {blank} out of range for K={k}")));
    }
    if let Some(&bad) = target.iter().find(|&&y| y >= k) {
        return Err(Error::Shape(format!("target token {bad} out of range for K={k}")));
    }
    if target.contains(&blank) {
        return Err(Error::InvalidSequence("target contains the blank".into()));
    }
    if lattice.frames() == 0 {
        return Err(Error::Shape("empty lattice".into()));
    }
    let required = required_frames(target);
    if required > lattice.frames() {
        return Err(Error::InfeasibleTarget {
            target_len: target.len(),
            required,
            frames: lattice.frames(),
        });
    }
    for &y in target {
        if (0..lattice.frames()).all(|t| lattice.get(t, y) == f64::NEG_INFINITY) {
            return Err(Error::MaskedTarget { token: y });
        }
    }
    Ok(())
}

pub fn ctc_loss(lattice: &LogProbLattice, target: &[usize], blank: usize) -> Result<CtcResult> {
    check_target(lattice, target, blank)?;
    let frames = lattice.frames();
    let k = lattice.labels();
    let states = 2 * target.len() + 1;
    let label = |s: usize| if s % 2 == 0 { blank } else { target[s / 2] };
    // skip transition s-2 -> s allowed for non-blank states whose label differs from s-2
    let can_skip = |s: usize| s >= 2 && s % 2 == 1 && target[s / 2] != target[s / 2 - 1];

    let neg = f64::NEG_INFINITY;
    let mut alpha = Matrix::from_vec(frames, states, vec![neg; frames * states]);
    alpha.set(0, 0, lattice.get(0, blank));
    if states > 1 {
        alpha.set(0, 1, lattice.get(0, target[0]));
    }
    for t in 1..frames {
        for s in 0..states {
            let mut acc = alpha.get(t - 1, s);
            if s >= 1 {
                acc = log_add(acc, alpha.get(t - 1, s - 1));
            }
            if can_skip(s) {
                acc = log_add(acc, alpha.get(t - 1, s - 2));
            }
            if acc != neg {
                alpha.set(t, s, acc + lattice.get(t, label(s)));
            }
        }
    }

    let mut beta = Matrix::from_vec(frames, states, vec![neg; frames * states]);
    let last = frames - 1;
    beta.set(last, states - 1, lattice.get(last, label(states - 1)));
    if states > 1 {
        beta.set(last, states - 2, lattice.get(last, label(states - 2)));
    }
    for t in (0..last).rev() {
        for s in 0..states {
            let mut acc = beta.get(t + 1, s);
            if s + 1 < states {
                acc = log_add(acc, beta.get(t + 1, s + 1));
            }
            if s + 2 < states && can_skip(s + 2) {
                acc = log_add(acc, beta.get(t + 1, s + 2));
            }
            if acc != neg {
                beta.set(t, s, acc + lattice.get(t, label(s)));
            }
        }
    }

    let mut log_p = alpha.get(last, states - 1);
    if states > 1 {
        log_p = log_add(log_p, alpha.get(last, states - 2));
    }
    if !log_p.is_finite() {
        return Err(Error::ZeroProbability);
    }

    let mut grad = Matrix::zeros(frames, k);
    let mut occupancy = vec![neg; k];
    for t in 0..frames {
        occupancy.fill(neg);
        for s in 0..states {
            let a = alpha.get(t, s);
            let b = beta.get(t, s);
            if a == neg || b == neg {
                continue;
            }
            let y = label(s);
            occupancy[y] = log_add(occupancy[y], a + b - lattice.get(t, y));
        }
        for (j, g) in grad.row_mut(t).iter_mut().enumerate() {
            let p = lattice.get(t, j).exp();
            let occ = (occupancy[j] - log_p).exp();
            *g = p - occ;
        }
    }

    Ok(CtcResult { loss: -log_p, grad })
}

/// Negative log-likelihood by explicit summation over all `K^T` alignments.
pub fn ctc_brute_force(lattice: &LogProbLattice, target: &[usize], blank: usize) -> Result<f64> {
    let frames = lattice.frames();
    let k = lattice.labels();
    let count = (k as f64).powi(frames as i32);
    if count > BRUTE_FORCE_GUARD {
        return Err(Error::EnumerationGuard(count));
    }
    let mut path = vec![0usize; frames];
    let mut total = f64::NEG_INFINITY;
    loop {
        if collapse(&path, blank) == target {
            let score: f64 = path.iter().enumerate().map(|(t, &y)| lattice.get(t, y)).sum();
            total = log_add(total, score);
        }
        // odometer increment
        let mut pos = 0;
        loop {
            if pos == frames {
                return Ok(-total);
            }
            path[pos] += 1;
            if path[pos] < k {
                break;
            }
            path[pos] = 0;
            pos += 1;
        }
    }
}

/// Frame-wise argmax; ties resolve to the lowest label index.
pub fn best_path(lattice: &LogProbLattice) -> Vec<usize> {
    (0..lattice.frames())
        .map(|t| argmax(lattice.values().row(t)))
        .collect()
}

pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Greedy best-path decoding: argmax per frame, collapse repeats, drop blanks.
pub fn greedy_decode(lattice: &LogProbLattice, blank: usize) -> Vec<usize> {
    collapse(&best_path(lattice), blank)
}
