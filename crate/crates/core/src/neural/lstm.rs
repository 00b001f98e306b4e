//! Batched LSTM direction kernels and the single-sequence BiLSTM API.
//!
//! Each direction owns `W [4H × (D+H)]` (row blocks: input, forget,
//! candidate, output gate; columns: input part then recurrent part) and
//! `b [4H]`. Inputs are time-major `[T][B][D]`. Rows whose sequence is
//! shorter than `T` hold their state through padded steps, so the forward
//! direction ends on each row's last valid step and the backward direction
//! starts there.

use crate::error::{Error, Result};
use crate::neural::gemm::{gemm, View};

pub const GATES: usize = 4;
pub const GATE_NAMES: [&str; GATES] = ["input", "forget", "candidate", "output"];

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Order {
    Forward,
    Backward,
}

impl Order {
    #[inline]
    fn time(self, k: usize, t: usize) -> usize {
        match self {
            Order::Forward => k,
            Order::Backward => t - 1 - k,
        }
    }
}

/// Geometry of one batched pass.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Dims {
    pub t: usize,
    pub b: usize,
    pub d: usize,
    pub h: usize,
}

/// Activations of one direction, indexed by processing step `k`.
pub(crate) struct DirCache {
    order: Order,
    /// Post-activation gates `[T][B][4H]`.
    gates: Vec<f64>,
    c: Vec<f64>,
    h: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl DirCache {
    /// Final hidden state `[B × H]`.
    pub fn last_h(&self, dims: Dims) -> &[f64] {
        let n = dims.b * dims.h;
        &self.h[(dims.t - 1) * n..dims.t * n]
    }

    /// Hidden state of row `b` at time index `tau`.
    pub fn h_at(&self, dims: Dims, tau: usize, b: usize) -> &[f64] {
        let k = match self.order {
            Order::Forward => tau,
            Order::Backward => dims.t - 1 - tau,
        };
        let s = (k * dims.b + b) * dims.h;
        &self.h[s..s + dims.h]
    }
}

#[inline]
fn valid(lens: &[usize], b: usize, tau: usize) -> bool {
    tau < lens[b]
}

pub(crate) fn dir_forward(w: &[f64], bias: &[f64], x: &[f64], lens: &[usize], dims: Dims, order: Order) -> DirCache {
    let Dims { t, b, d, h } = dims;
    let g4 = GATES * h;
    let ld = d + h;
    debug_assert_eq!(w.len(), g4 * ld);
    debug_assert_eq!(x.len(), t * b * d);
    let mut pre = vec![0.0; t * b * g4];
    gemm(t * b, d, g4, 1.0, View::rows(x, 0, d), View::rows(w, 0, ld).t(), 0.0, &mut pre, 0, g4, 1);
    let mut cache = DirCache {
        order,
        gates: vec![0.0; t * b * g4],
        c: vec![0.0; t * b * h],
        h: vec![0.0; t * b * h],
        tanh_c: vec![0.0; t * b * h],
    };
    let mut a = vec![0.0; b * g4];
    for k in 0..t {
        let tau = order.time(k, t);
        a.copy_from_slice(&pre[tau * b * g4..(tau + 1) * b * g4]);
        if k > 0 {
            let hp = &cache.h[(k - 1) * b * h..k * b * h];
            gemm(b, h, g4, 1.0, View::rows(hp, 0, h), View { data: w, off: d, rs: 1, cs: ld }, 1.0, &mut a, 0, g4, 1);
        }
        for r in 0..b {
            let s = (k * b + r) * h;
            if !valid(lens, r, tau) {
                if k > 0 {
                    let p = ((k - 1) * b + r) * h;
                    cache.c.copy_within(p..p + h, s);
                    cache.h.copy_within(p..p + h, s);
                    cache.tanh_c.copy_within(p..p + h, s);
                }
                continue;
            }
            let ar = &a[r * g4..(r + 1) * g4];
            let gs = (k * b + r) * g4;
            for j in 0..h {
                let i_g = sigmoid(ar[j] + bias[j]);
                let f_g = sigmoid(ar[h + j] + bias[h + j]);
                let g_g = (ar[2 * h + j] + bias[2 * h + j]).tanh();
                let o_g = sigmoid(ar[3 * h + j] + bias[3 * h + j]);
                let c_prev = if k > 0 { cache.c[((k - 1) * b + r) * h + j] } else { 0.0 };
                let c = f_g * c_prev + i_g * g_g;
                let tc = c.tanh();
                cache.gates[gs + j] = i_g;
                cache.gates[gs + h + j] = f_g;
                cache.gates[gs + 2 * h + j] = g_g;
                cache.gates[gs + 3 * h + j] = o_g;
                cache.c[s + j] = c;
                cache.tanh_c[s + j] = tc;
                cache.h[s + j] = o_g * tc;
            }
        }
    }
    cache
}

/// Backpropagates `dh_last [B × H]` (gradient on the final hidden state)
/// through one direction. Accumulates into `dw`, `db` and `dx`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn dir_backward(
    w: &[f64],
    x: &[f64],
    lens: &[usize],
    dims: Dims,
    cache: &DirCache,
    dh_last: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    dx: Option<&mut [f64]>,
) {
    let Dims { t, b, d, h } = dims;
    let g4 = GATES * h;
    let ld = d + h;
    let order = cache.order;
    let mut dh = dh_last.to_vec();
    let mut dc = vec![0.0; b * h];
    let mut da_all = vec![0.0; t * b * g4];
    let mut dh_prev = vec![0.0; b * h];
    for k in (0..t).rev() {
        let tau = order.time(k, t);
        let da = &mut da_all[tau * b * g4..(tau + 1) * b * g4];
        for r in 0..b {
            if !valid(lens, r, tau) {
                continue;
            }
            let s = (k * b + r) * h;
            let gs = (k * b + r) * g4;
            for j in 0..h {
                let i_g = cache.gates[gs + j];
                let f_g = cache.gates[gs + h + j];
                let g_g = cache.gates[gs + 2 * h + j];
                let o_g = cache.gates[gs + 3 * h + j];
                let tc = cache.tanh_c[s + j];
                let c_prev = if k > 0 { cache.c[((k - 1) * b + r) * h + j] } else { 0.0 };
                let dhj = dh[r * h + j];
                let dcj = dc[r * h + j] + dhj * o_g * (1.0 - tc * tc);
                let dar = &mut da[r * g4..(r + 1) * g4];
                dar[j] = dcj * g_g * i_g * (1.0 - i_g);
                dar[h + j] = dcj * c_prev * f_g * (1.0 - f_g);
                dar[2 * h + j] = dcj * i_g * (1.0 - g_g * g_g);
                dar[3 * h + j] = dhj * tc * o_g * (1.0 - o_g);
                dc[r * h + j] = dcj * f_g;
            }
        }
        if k == 0 {
            break;
        }
        let hp = &cache.h[(k - 1) * b * h..k * b * h];
        let da = &da_all[tau * b * g4..(tau + 1) * b * g4];
        gemm(g4, b, h, 1.0, View::rows(da, 0, g4).t(), View::rows(hp, 0, h), 1.0, dw, d, ld, 1);
        gemm(b, g4, h, 1.0, View::rows(da, 0, g4), View { data: w, off: d, rs: ld, cs: 1 }, 0.0, &mut dh_prev, 0, h, 1);
        for r in 0..b {
            if !valid(lens, r, tau) {
                // Held state: gradient passes straight through.
                for j in 0..h {
                    dh_prev[r * h + j] += dh[r * h + j];
                }
            }
        }
        std::mem::swap(&mut dh, &mut dh_prev);
    }
    gemm(g4, t * b, d, 1.0, View::rows(&da_all, 0, g4).t(), View::rows(x, 0, d), 1.0, dw, 0, ld, 1);
    for row in da_all.chunks_exact(g4) {
        for (acc, v) in db.iter_mut().zip(row) {
            *acc += v;
        }
    }
    if let Some(dx) = dx {
        gemm(t * b, g4, d, 1.0, View::rows(&da_all, 0, g4), View { data: w, off: 0, rs: ld, cs: 1 }, 1.0, dx, 0, d, 1);
    }
}

/// Weights of one direction.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmDirection {
    /// `[4H × (D+H)]`, row-major.
    pub w: Vec<f64>,
    /// `[4H]`.
    pub b: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub input_dim: usize,
    pub hidden: usize,
    pub forward: LstmDirection,
    pub backward: LstmDirection,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let dir = LstmDirection {
            w: vec![0.0; GATES * hidden * (input_dim + hidden)],
            b: vec![0.0; GATES * hidden],
        };
        Self {
            input_dim,
            hidden,
            forward: dir.clone(),
            backward: dir,
        }
    }

    fn check(&self) -> Result<()> {
        let (d, h) = (self.input_dim, self.hidden);
        for dir in [&self.forward, &self.backward] {
            if dir.w.len() != GATES * h * (d + h) {
                return Err(Error::Shape {
                    what: "lstm weights",
                    expected: GATES * h * (d + h),
                    got: dir.w.len(),
                });
            }
            if dir.b.len() != GATES * h {
                return Err(Error::Shape {
                    what: "lstm bias",
                    expected: GATES * h,
                    got: dir.b.len(),
                });
            }
        }
        Ok(())
    }
}

/// Per-timestep states of both directions and the sequence summary.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderState {
    /// `forward[t]` is →h_t.
    pub forward: Vec<Vec<f64>>,
    /// `backward[t]` is ←h_t.
    pub backward: Vec<Vec<f64>>,
}

impl EncoderState {
    /// `[→h_t ; ←h_t]`.
    pub fn h(&self, t: usize) -> Vec<f64> {
        let mut v = self.forward[t].clone();
        v.extend_from_slice(&self.backward[t]);
        v
    }

    /// `[→h_n ; ←h_1]`.
    pub fn summary(&self) -> Vec<f64> {
        let mut v = self.forward[self.forward.len() - 1].clone();
        v.extend_from_slice(&self.backward[0]);
        v
    }
}

/// Runs both directions over one sequence of input vectors.
pub fn bilstm_forward(seq: &[Vec<f64>], params: &LstmParams) -> Result<EncoderState> {
    params.check()?;
    if seq.is_empty() {
        return Err(Error::Input("empty sequence".into()));
    }
    let d = params.input_dim;
    let mut x = Vec::with_capacity(seq.len() * d);
    for step in seq {
        if step.len() != d {
            return Err(Error::Shape {
                what: "lstm input",
                expected: d,
                got: step.len(),
            });
        }
        x.extend_from_slice(step);
    }
    let dims = Dims {
        t: seq.len(),
        b: 1,
        d,
        h: params.hidden,
    };
    let lens = [seq.len()];
    let f = dir_forward(&params.forward.w, &params.forward.b, &x, &lens, dims, Order::Forward);
    let bw = dir_forward(&params.backward.w, &params.backward.b, &x, &lens, dims, Order::Backward);
    Ok(EncoderState {
        forward: (0..dims.t).map(|tau| f.h_at(dims, tau, 0).to_vec()).collect(),
        backward: (0..dims.t).map(|tau| bw.h_at(dims, tau, 0).to_vec()).collect(),
    })
}
