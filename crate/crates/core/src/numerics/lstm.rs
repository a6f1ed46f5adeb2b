use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activations::sigmoid;
use super::array::{matvec_acc, matvec_backward};
use super::{Array2, ParamSlot, Parameterized};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Single-layer LSTM cell.
///
/// Gate pre-activations come from one `4H x (D + H)` matrix applied to
/// `[x_t; h_{t-1}]`, stacked as input, forget, candidate, output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Lstm<T> {
    pub weight: ParamSlot<T>,
    pub bias: ParamSlot<T>,
    input_dim: usize,
    hidden: usize,
}

/// Everything the backward pass of one step needs.
#[derive(Debug, Clone)]
pub struct LstmStepCache<T> {
    z: Vec<T>,
    c_prev: Vec<T>,
    i: Vec<T>,
    f: Vec<T>,
    g: Vec<T>,
    o: Vec<T>,
    tanh_c: Vec<T>,
}

/// Hidden states and caches of a full unrolled pass.
#[derive(Debug, Clone)]
pub struct LstmTrace<T> {
    pub hidden: Vec<Vec<T>>,
    caches: Vec<LstmStepCache<T>>,
}

impl<T: Scalar> Lstm<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let fan_in = input_dim + hidden;
        Self {
            weight: ParamSlot::uniform(format!("{name}.weight"), 4 * hidden, fan_in, fan_in, rng),
            bias: ParamSlot::zeros(format!("{name}.bias"), 1, 4 * hidden),
            input_dim,
            hidden,
        }
    }

    pub fn zeros(name: &str, input_dim: usize, hidden: usize) -> Self {
        Self {
            weight: ParamSlot::zeros(format!("{name}.weight"), 4 * hidden, input_dim + hidden),
            bias: ParamSlot::zeros(format!("{name}.bias"), 1, 4 * hidden),
            input_dim,
            hidden,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn step(&self, x: &[T], h_prev: &[T], c_prev: &[T]) -> Result<(Vec<T>, Vec<T>, LstmStepCache<T>)> {
        let hd = self.hidden;
        if x.len() != self.input_dim || h_prev.len() != hd || c_prev.len() != hd {
            return Err(Error::dimension(
                format!("x[{}], h[{hd}], c[{hd}]", self.input_dim),
                format!("x[{}], h[{}], c[{}]", x.len(), h_prev.len(), c_prev.len()),
            ));
        }
        let mut z = Vec::with_capacity(self.input_dim + hd);
        z.extend_from_slice(x);
        z.extend_from_slice(h_prev);
        let mut pre = self.bias.value.row(0).to_vec();
        matvec_acc(&self.weight.value, &z, &mut pre);

        let i: Vec<T> = pre[..hd].iter().map(|&v| sigmoid(v)).collect();
        let f: Vec<T> = pre[hd..2 * hd].iter().map(|&v| sigmoid(v)).collect();
        let g: Vec<T> = pre[2 * hd..3 * hd].iter().map(|v| v.tanh()).collect();
        let o: Vec<T> = pre[3 * hd..].iter().map(|&v| sigmoid(v)).collect();
        let c: Vec<T> = (0..hd).map(|j| f[j] * c_prev[j] + i[j] * g[j]).collect();
        let tanh_c: Vec<T> = c.iter().map(|v| v.tanh()).collect();
        let h: Vec<T> = (0..hd).map(|j| o[j] * tanh_c[j]).collect();
        let cache = LstmStepCache {
            z,
            c_prev: c_prev.to_vec(),
            i,
            f,
            g,
            o,
            tanh_c,
        };
        Ok((h, c, cache))
    }

    /// Returns `(dx, dh_prev, dc_prev)` and accumulates parameter gradients.
    pub fn step_backward(&mut self, cache: &LstmStepCache<T>, dh: &[T], dc: &[T]) -> (Vec<T>, Vec<T>, Vec<T>) {
        let hd = self.hidden;
        let one = T::one();
        let mut dpre = vec![T::zero(); 4 * hd];
        let mut dc_prev = vec![T::zero(); hd];
        for j in 0..hd {
            let (i, f, g, o, tc) = (cache.i[j], cache.f[j], cache.g[j], cache.o[j], cache.tanh_c[j]);
            let d_o = dh[j] * tc;
            let dct = dc[j] + dh[j] * o * (one - tc * tc);
            dpre[j] = dct * g * i * (one - i);
            dpre[hd + j] = dct * cache.c_prev[j] * f * (one - f);
            dpre[2 * hd + j] = dct * i * (one - g * g);
            dpre[3 * hd + j] = d_o * o * (one - o);
            dc_prev[j] = dct * f;
        }
        let mut dz = vec![T::zero(); cache.z.len()];
        matvec_backward(&self.weight.value, &mut self.weight.grad, &cache.z, &dpre, &mut dz);
        for (g, &d) in self.bias.grad.row_mut(0).iter_mut().zip(&dpre) {
            *g += d;
        }
        let dh_prev = dz.split_off(self.input_dim);
        (dz, dh_prev, dc_prev)
    }

    /// Unrolls over `inputs` from zero initial state.
    pub fn run<'a, I>(&self, inputs: I) -> Result<LstmTrace<T>>
    where
        I: IntoIterator<Item = &'a [T]>,
    {
        let mut h = vec![T::zero(); self.hidden];
        let mut c = vec![T::zero(); self.hidden];
        let mut trace = LstmTrace {
            hidden: Vec::new(),
            caches: Vec::new(),
        };
        for x in inputs {
            let (h2, c2, cache) = self.step(x, &h, &c)?;
            trace.hidden.push(h2.clone());
            trace.caches.push(cache);
            h = h2;
            c = c2;
        }
        Ok(trace)
    }

    /// Backpropagation through time; `dhidden[t]` is `dL/dh_t` from outside the
    /// recurrence. Returns `dL/dx_t` for each step.
    pub fn run_backward(&mut self, trace: &LstmTrace<T>, dhidden: &[Vec<T>]) -> Vec<Vec<T>> {
        let steps = trace.caches.len();
        let mut dxs = vec![Vec::new(); steps];
        let mut dh_next = vec![T::zero(); self.hidden];
        let mut dc_next = vec![T::zero(); self.hidden];
        for t in (0..steps).rev() {
            let dh: Vec<T> = dhidden[t].iter().zip(&dh_next).map(|(&a, &b)| a + b).collect();
            let (dx, dh_prev, dc_prev) = self.step_backward(&trace.caches[t], &dh, &dc_next);
            dxs[t] = dx;
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        dxs
    }
}

impl<T: Scalar> Parameterized<T> for Lstm<T> {
    fn slots(&self) -> Vec<&ParamSlot<T>> {
        vec![&self.weight, &self.bias]
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot<T>> {
        vec![&mut self.weight, &mut self.bias]
    }
}

/// Forward and backward LSTMs over a frame sequence, outputs concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct BiLstm<T> {
    pub forward: Lstm<T>,
    pub backward: Lstm<T>,
}

#[derive(Debug, Clone)]
pub struct BiLstmTrace<T> {
    fwd: LstmTrace<T>,
    bwd: LstmTrace<T>,
}

impl<T: Scalar> BiLstm<T> {
    pub fn new<R: Rng + ?Sized>(name: &str, input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            forward: Lstm::new(&format!("{name}.fwd"), input_dim, hidden, rng),
            backward: Lstm::new(&format!("{name}.bwd"), input_dim, hidden, rng),
        }
    }

    pub fn hidden(&self) -> usize {
        self.forward.hidden()
    }

    /// `L x Din` in, `L x 2H` out; row `t` is `[h_fwd_t ; h_bwd_t]`.
    pub fn forward(&self, x: &Array2<T>) -> Result<(Array2<T>, BiLstmTrace<T>)> {
        let len = x.rows();
        if len == 0 {
            return Err(Error::EmptyInput("bilstm over zero frames"));
        }
        let fwd = self.forward.run((0..len).map(|t| x.row(t)))?;
        let bwd = self.backward.run((0..len).rev().map(|t| x.row(t)))?;
        let hd = self.hidden();
        let mut out = Array2::zeros(len, 2 * hd);
        for t in 0..len {
            let row = out.row_mut(t);
            row[..hd].copy_from_slice(&fwd.hidden[t]);
            row[hd..].copy_from_slice(&bwd.hidden[len - 1 - t]);
        }
        Ok((out, BiLstmTrace { fwd, bwd }))
    }

    /// Returns `dL/dx` as an `L x Din` matrix.
    pub fn backward(&mut self, trace: &BiLstmTrace<T>, dout: &Array2<T>) -> Array2<T> {
        let len = dout.rows();
        let hd = self.hidden();
        let dfwd: Vec<Vec<T>> = (0..len).map(|t| dout.row(t)[..hd].to_vec()).collect();
        let dbwd: Vec<Vec<T>> = (0..len).rev().map(|t| dout.row(t)[hd..].to_vec()).collect();
        let dx_f = self.forward.run_backward(&trace.fwd, &dfwd);
        let dx_b = self.backward.run_backward(&trace.bwd, &dbwd);
        let din = self.forward.input_dim();
        let mut dx = Array2::zeros(len, din);
        for t in 0..len {
            let row = dx.row_mut(t);
            for (d, (&a, &b)) in row.iter_mut().zip(dx_f[t].iter().zip(&dx_b[len - 1 - t])) {
                *d = a + b;
            }
        }
        dx
    }
}

impl<T: Scalar> Parameterized<T> for BiLstm<T> {
    fn slots(&self) -> Vec<&ParamSlot<T>> {
        let mut v = self.forward.slots();
        v.extend(self.backward.slots());
        v
    }

    fn slots_mut(&mut self) -> Vec<&mut ParamSlot<T>> {
        let mut v = self.forward.slots_mut();
        v.extend(self.backward.slots_mut());
        v
    }
}
