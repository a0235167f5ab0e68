//! One direction of an LSTM layer: forward recurrence with a trace for
//! backpropagation through time.
//!
//! Gate rows are ordered input, forget, cell, output. The weight matrix has
//! `4H` rows and `in + H` columns acting on `[x_t; h_{t-1}]`.

#[derive(Clone, Copy)]
pub(crate) struct Cell<'a> {
    pub w: &'a [f64],
    pub b: &'a [f64],
    pub input: usize,
    pub hidden: usize,
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Scratch state of one recurrence step: `[x; h_prev]`, gate activations,
/// cell state, `tanh(c)` and the hidden output.
pub(crate) struct StepBuf {
    pub xh: Vec<f64>,
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

impl StepBuf {
    pub fn new(input: usize, hidden: usize) -> Self {
        Self {
            xh: vec![0.0; input + hidden],
            gates: vec![0.0; 4 * hidden],
            c: vec![0.0; hidden],
            tanh_c: vec![0.0; hidden],
            h: vec![0.0; hidden],
        }
    }
}

/// Advances the cell one step. `buf.xh` must hold `[x_t; h_{t-1}]` and
/// `c_prev` the previous cell state; writes gates, `c`, `tanh(c)`, `h`.
#[inline]
pub(crate) fn step(cell: Cell<'_>, c_prev: &[f64], buf: &mut StepBuf) {
    let n = cell.input + cell.hidden;
    let hd = cell.hidden;
    for (r, g) in buf.gates.iter_mut().enumerate() {
        let z = cell.b[r] + dot(&cell.w[r * n..(r + 1) * n], &buf.xh);
        *g = if (2 * hd..3 * hd).contains(&r) { z.tanh() } else { sigmoid(z) };
    }
    for k in 0..hd {
        let (i, f, g, o) = (buf.gates[k], buf.gates[hd + k], buf.gates[2 * hd + k], buf.gates[3 * hd + k]);
        let c = f * c_prev[k] + i * g;
        let tc = c.tanh();
        buf.c[k] = c;
        buf.tanh_c[k] = tc;
        buf.h[k] = o * tc;
    }
}

/// Forward trace of one direction over a whole sequence, stored by
/// processing step. Step `s` handles time `s` (forward) or `T-1-s` (reverse).
pub(crate) struct Trace {
    pub input: usize,
    pub hidden: usize,
    pub len: usize,
    pub reverse: bool,
    xh: Vec<f64>,
    gates: Vec<f64>,
    c: Vec<f64>,
    tanh_c: Vec<f64>,
    h: Vec<f64>,
}

impl Trace {
    pub fn time(&self, s: usize) -> usize {
        if self.reverse {
            self.len - 1 - s
        } else {
            s
        }
    }

    /// Hidden state produced at time `t`.
    pub fn h_at(&self, t: usize) -> &[f64] {
        let s = if self.reverse { self.len - 1 - t } else { t };
        &self.h[s * self.hidden..(s + 1) * self.hidden]
    }
}

/// Runs the recurrence over `x` (`len × input`, time-major) from a zero state.
pub(crate) fn forward(cell: Cell<'_>, x: &[f64], len: usize, reverse: bool) -> Trace {
    let (inp, hd) = (cell.input, cell.hidden);
    let n = inp + hd;
    let mut tr = Trace {
        input: inp,
        hidden: hd,
        len,
        reverse,
        xh: Vec::with_capacity(len * n),
        gates: Vec::with_capacity(len * 4 * hd),
        c: Vec::with_capacity(len * hd),
        tanh_c: Vec::with_capacity(len * hd),
        h: Vec::with_capacity(len * hd),
    };
    let mut buf = StepBuf::new(inp, hd);
    let mut c_prev = vec![0.0; hd];
    for s in 0..len {
        let t = tr.time(s);
        buf.xh[..inp].copy_from_slice(&x[t * inp..(t + 1) * inp]);
        // buf.h still holds h_{s-1} (zero on the first step).
        buf.xh[inp..].copy_from_slice(&buf.h);
        step(cell, &c_prev, &mut buf);
        tr.xh.extend_from_slice(&buf.xh);
        tr.gates.extend_from_slice(&buf.gates);
        tr.c.extend_from_slice(&buf.c);
        tr.tanh_c.extend_from_slice(&buf.tanh_c);
        tr.h.extend_from_slice(&buf.h);
        c_prev.copy_from_slice(&buf.c);
    }
    tr
}

/// Backpropagation through time.
///
/// `dh_up` holds upstream gradients on the hidden output by time
/// (`len × H`). Parameter gradients are added into `dw`/`db` and input
/// gradients into `dx` (`len × input`, by time).
pub(crate) fn backward(cell: Cell<'_>, tr: &Trace, dh_up: &[f64], dw: &mut [f64], db: &mut [f64], dx: &mut [f64]) {
    let (inp, hd) = (tr.input, tr.hidden);
    let n = inp + hd;
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dz = vec![0.0; 4 * hd];
    let mut dxh = vec![0.0; n];
    for s in (0..tr.len).rev() {
        let t = tr.time(s);
        let gates = &tr.gates[s * 4 * hd..(s + 1) * 4 * hd];
        let tanh_c = &tr.tanh_c[s * hd..(s + 1) * hd];
        for k in 0..hd {
            let (i, f, g, o) = (gates[k], gates[hd + k], gates[2 * hd + k], gates[3 * hd + k]);
            let c_prev = if s == 0 { 0.0 } else { tr.c[(s - 1) * hd + k] };
            let dh = dh_up[t * hd + k] + dh_next[k];
            let tc = tanh_c[k];
            let dc = dh * o * (1.0 - tc * tc) + dc_next[k];
            dz[k] = dc * g * i * (1.0 - i);
            dz[hd + k] = dc * c_prev * f * (1.0 - f);
            dz[2 * hd + k] = dc * i * (1.0 - g * g);
            dz[3 * hd + k] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        let xh = &tr.xh[s * n..(s + 1) * n];
        dxh.iter_mut().for_each(|v| *v = 0.0);
        for (r, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            db[r] += d;
            let row = r * n..(r + 1) * n;
            for ((gw, w), (&v, acc)) in dw[row.clone()].iter_mut().zip(&cell.w[row]).zip(xh.iter().zip(dxh.iter_mut())) {
                *gw += d * v;
                *acc += d * w;
            }
        }
        for (acc, v) in dx[t * inp..(t + 1) * inp].iter_mut().zip(&dxh[..inp]) {
            *acc += v;
        }
        dh_next.copy_from_slice(&dxh[inp..]);
    }
}
