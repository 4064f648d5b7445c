use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::matrix::{sigmoid, Matrix};

use super::INIT_RANGE;

/// One LSTM direction. Gate rows are laid out as `[input, forget, cell, output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    /// `4H × input`.
    pub wx: Matrix,
    /// `4H × H`.
    pub wh: Matrix,
    /// `4H`.
    pub b: Matrix,
}

/// Activations of one direction over an utterance, indexed by time.
#[derive(Debug, Clone)]
pub struct LstmTrace {
    /// Post-nonlinearity gates `[i, f, g, o]`, `T × 4H`.
    pub gates: Matrix,
    pub cell: Matrix,
    pub cell_tanh: Matrix,
    pub hidden: Matrix,
    pub reverse: bool,
}

impl LstmParams {
    pub(super) fn init(input: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        LstmParams {
            wx: Matrix::uniform(4 * hidden, input, INIT_RANGE, rng),
            wh: Matrix::uniform(4 * hidden, hidden, INIT_RANGE, rng),
            b: Matrix::uniform(4 * hidden, 1, INIT_RANGE, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.wh.cols()
    }

    pub(super) fn tensors<'a>(&'a self, prefix: &str, out: &mut Vec<(String, &'a Matrix)>) {
        out.push((format!("{prefix}.wx"), &self.wx));
        out.push((format!("{prefix}.wh"), &self.wh));
        out.push((format!("{prefix}.b"), &self.b));
    }

    pub(super) fn tensors_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, &'a mut Matrix)>) {
        out.push((format!("{prefix}.wx"), &mut self.wx));
        out.push((format!("{prefix}.wh"), &mut self.wh));
        out.push((format!("{prefix}.b"), &mut self.b));
    }

    /// Runs the cell over `x` (`T × input`), right to left when `reverse`.
    pub fn forward(&self, x: &Matrix, reverse: bool) -> LstmTrace {
        let h = self.hidden();
        let frames = x.rows();
        let pre = self.wx.affine_rows(x, self.b.data());
        let mut trace = LstmTrace {
            gates: Matrix::zeros(frames, 4 * h),
            cell: Matrix::zeros(frames, h),
            cell_tanh: Matrix::zeros(frames, h),
            hidden: Matrix::zeros(frames, h),
            reverse,
        };
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut z = vec![0.0; 4 * h];
        for step in 0..frames {
            let t = if reverse { frames - 1 - step } else { step };
            z.copy_from_slice(pre.row(t));
            self.wh.matvec_acc(&h_prev, &mut z);
            let gates = trace.gates.row_mut(t);
            for j in 0..h {
                gates[j] = sigmoid(z[j]);
                gates[h + j] = sigmoid(z[h + j]);
                gates[2 * h + j] = z[2 * h + j].tanh();
                gates[3 * h + j] = sigmoid(z[3 * h + j]);
            }
            for j in 0..h {
                let c = gates[h + j] * c_prev[j] + gates[j] * gates[2 * h + j];
                c_prev[j] = c;
                let tc = c.tanh();
                h_prev[j] = gates[3 * h + j] * tc;
            }
            trace.cell.row_mut(t).copy_from_slice(&c_prev);
            let ct = trace.cell_tanh.row_mut(t);
            for (o, c) in ct.iter_mut().zip(&c_prev) {
                *o = c.tanh();
            }
            trace.hidden.row_mut(t).copy_from_slice(&h_prev);
        }
        trace
    }

    /// Backpropagates `d_hidden` (`T × H`, gradient of the loss w.r.t. each
    /// emitted hidden state) through time, accumulating parameter gradients
    /// into `grad` and returning the gradient w.r.t. the input `x`.
    pub fn backward(&self, x: &Matrix, trace: &LstmTrace, d_hidden: &Matrix, grad: &mut LstmParams) -> Matrix {
        let h = self.hidden();
        let frames = x.rows();
        let mut dx = Matrix::zeros(frames, x.cols());
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut dz = vec![0.0; 4 * h];
        let zeros = vec![0.0; h];
        for step in (0..frames).rev() {
            let t = if trace.reverse { frames - 1 - step } else { step };
            let prev = if step == 0 {
                None
            } else if trace.reverse {
                Some(t + 1)
            } else {
                Some(t - 1)
            };
            let c_prev = prev.map_or(zeros.as_slice(), |p| trace.cell.row(p));
            let h_prev = prev.map_or(zeros.as_slice(), |p| trace.hidden.row(p));
            let gates = trace.gates.row(t);
            let tc = trace.cell_tanh.row(t);
            let dh_out = d_hidden.row(t);
            for j in 0..h {
                let (i, f, g, o) = (gates[j], gates[h + j], gates[2 * h + j], gates[3 * h + j]);
                let dh = dh_out[j] + dh_next[j];
                let dc = dc_next[j] + dh * o * (1.0 - tc[j] * tc[j]);
                dz[j] = dc * g * i * (1.0 - i);
                dz[h + j] = dc * c_prev[j] * f * (1.0 - f);
                dz[2 * h + j] = dc * i * (1.0 - g * g);
                dz[3 * h + j] = dh * tc[j] * o * (1.0 - o);
                dc_next[j] = dc * f;
            }
            grad.wx.outer_acc(&dz, x.row(t));
            grad.wh.outer_acc(&dz, h_prev);
            crate::matrix::axpy(1.0, &dz, grad.b.data_mut());
            self.wx.matvec_t_acc(&dz, dx.row_mut(t));
            dh_next.fill(0.0);
            self.wh.matvec_t_acc(&dz, &mut dh_next);
        }
        dx
    }
}
