//! Raw slice kernels behind the tape operations.

pub(crate) fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `c[m×n] = a[m×k] · b[k×n]`
pub(crate) fn matmul(a: &[f64], b: &[f64], m: usize, k: usize, n: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * n];
    if n == 1 {
        for i in 0..m {
            c[i] = dot(&a[i * k..(i + 1) * k], b);
        }
        return c;
    }
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip != 0.0 {
                axpy(aip, &b[p * n..(p + 1) * n], crow);
            }
        }
    }
    c
}

/// `da += dc · bᵀ`
pub(crate) fn matmul_grad_a(dc: &[f64], b: &[f64], da: &mut [f64], m: usize, k: usize, n: usize) {
    if n == 1 {
        for i in 0..m {
            axpy(dc[i], b, &mut da[i * k..(i + 1) * k]);
        }
        return;
    }
    for i in 0..m {
        let dcrow = &dc[i * n..(i + 1) * n];
        for p in 0..k {
            da[i * k + p] += dot(dcrow, &b[p * n..(p + 1) * n]);
        }
    }
}

/// `db += aᵀ · dc`
pub(crate) fn matmul_grad_b(a: &[f64], dc: &[f64], db: &mut [f64], m: usize, k: usize, n: usize) {
    for i in 0..m {
        let dcrow = &dc[i * n..(i + 1) * n];
        for p in 0..k {
            let aip = a[i * k + p];
            if aip != 0.0 {
                axpy(aip, dcrow, &mut db[p * n..(p + 1) * n]);
            }
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub(crate) struct ConvGeom {
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
    pub t_in: usize,
    pub t_out: usize,
    pub dilation: usize,
    pub pad_left: usize,
}

impl ConvGeom {
    /// Output range `[lo, hi)` for which tap `kk` reads inside the input.
    #[inline]
    fn tap_range(&self, kk: usize) -> (usize, usize, isize) {
        let offset = (kk * self.dilation) as isize - self.pad_left as isize;
        let lo = if offset < 0 { (-offset) as usize } else { 0 };
        let hi_signed = self.t_in as isize - offset;
        let hi = hi_signed.clamp(0, self.t_out as isize) as usize;
        (lo.min(hi), hi, offset)
    }
}

pub(crate) fn conv1d(x: &[f64], w: &[f64], bias: Option<&[f64]>, g: ConvGeom) -> Vec<f64> {
    let mut y = vec![0.0; g.c_out * g.t_out];
    for o in 0..g.c_out {
        let yrow = &mut y[o * g.t_out..(o + 1) * g.t_out];
        if let Some(b) = bias {
            yrow.iter_mut().for_each(|v| *v = b[o]);
        }
        for c in 0..g.c_in {
            let xrow = &x[c * g.t_in..(c + 1) * g.t_in];
            for kk in 0..g.k {
                let wv = w[(o * g.c_in + c) * g.k + kk];
                let (lo, hi, offset) = g.tap_range(kk);
                if lo >= hi || wv == 0.0 {
                    continue;
                }
                let xs = (lo as isize + offset) as usize;
                axpy(wv, &xrow[xs..xs + (hi - lo)], &mut yrow[lo..hi]);
            }
        }
    }
    y
}

pub(crate) fn conv1d_backward(
    x: &[f64],
    w: &[f64],
    dy: &[f64],
    g: ConvGeom,
    mut dx: Option<&mut [f64]>,
    mut dw: Option<&mut [f64]>,
    db: Option<&mut [f64]>,
) {
    if let Some(db) = db {
        for o in 0..g.c_out {
            db[o] += dy[o * g.t_out..(o + 1) * g.t_out].iter().sum::<f64>();
        }
    }
    for o in 0..g.c_out {
        let dyrow = &dy[o * g.t_out..(o + 1) * g.t_out];
        for c in 0..g.c_in {
            let xbase = c * g.t_in;
            for kk in 0..g.k {
                let (lo, hi, offset) = g.tap_range(kk);
                if lo >= hi {
                    continue;
                }
                let xs = (lo as isize + offset) as usize;
                let widx = (o * g.c_in + c) * g.k + kk;
                if let Some(dw) = dw.as_deref_mut() {
                    dw[widx] += dot(&dyrow[lo..hi], &x[xbase + xs..xbase + xs + (hi - lo)]);
                }
                if let Some(dx) = dx.as_deref_mut() {
                    axpy(w[widx], &dyrow[lo..hi], &mut dx[xbase + xs..xbase + xs + (hi - lo)]);
                }
            }
        }
    }
}

/// Saved activations of one LSTM step, gate order i, f, g, o.
#[derive(Clone, Debug)]
pub(crate) struct LstmCache {
    pub gates: Vec<f64>,
    pub tanh_c: Vec<f64>,
}

/// One LSTM step. `state` is `[h; c]`, the result is the new `[h; c]`.
pub(crate) fn lstm_forward(
    x: &[f64],
    state: &[f64],
    w_ih: &[f64],
    w_hh: &[f64],
    b: &[f64],
    u: usize,
) -> (Vec<f64>, LstmCache) {
    let d = x.len();
    let (h, c) = state.split_at(u);
    let mut gates = b.to_vec();
    for r in 0..4 * u {
        gates[r] += dot(&w_ih[r * d..(r + 1) * d], x) + dot(&w_hh[r * u..(r + 1) * u], h);
    }
    for r in 0..4 * u {
        gates[r] = if (2 * u..3 * u).contains(&r) {
            gates[r].tanh()
        } else {
            sigmoid(gates[r])
        };
    }
    let mut out = vec![0.0; 2 * u];
    let mut tanh_c = vec![0.0; u];
    for j in 0..u {
        let (i, f, gg, o) = (gates[j], gates[u + j], gates[2 * u + j], gates[3 * u + j]);
        let cn = f * c[j] + i * gg;
        tanh_c[j] = cn.tanh();
        out[u + j] = cn;
        out[j] = o * tanh_c[j];
    }
    (out, LstmCache { gates, tanh_c })
}

pub(crate) struct LstmGrads<'a> {
    pub dx: Option<&'a mut [f64]>,
    pub dstate: Option<&'a mut [f64]>,
    pub dw_ih: Option<&'a mut [f64]>,
    pub dw_hh: Option<&'a mut [f64]>,
    pub db: Option<&'a mut [f64]>,
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn lstm_backward(
    x: &[f64],
    state: &[f64],
    w_ih: &[f64],
    w_hh: &[f64],
    cache: &LstmCache,
    dout: &[f64],
    u: usize,
    grads: LstmGrads<'_>,
) {
    let d = x.len();
    let (h, c) = state.split_at(u);
    let (dh, dc_out) = dout.split_at(u);
    let g = &cache.gates;
    let mut dpre = vec![0.0; 4 * u];
    let mut dc_prev = vec![0.0; u];
    for j in 0..u {
        let (i, f, gg, o) = (g[j], g[u + j], g[2 * u + j], g[3 * u + j]);
        let tc = cache.tanh_c[j];
        let d_o = dh[j] * tc;
        let dc = dc_out[j] + dh[j] * o * (1.0 - tc * tc);
        let di = dc * gg;
        let dg = dc * i;
        let df = dc * c[j];
        dc_prev[j] = dc * f;
        dpre[j] = di * i * (1.0 - i);
        dpre[u + j] = df * f * (1.0 - f);
        dpre[2 * u + j] = dg * (1.0 - gg * gg);
        dpre[3 * u + j] = d_o * o * (1.0 - o);
    }
    if let Some(db) = grads.db {
        axpy(1.0, &dpre, db);
    }
    if let Some(dw) = grads.dw_ih {
        for r in 0..4 * u {
            axpy(dpre[r], x, &mut dw[r * d..(r + 1) * d]);
        }
    }
    if let Some(dw) = grads.dw_hh {
        for r in 0..4 * u {
            axpy(dpre[r], h, &mut dw[r * u..(r + 1) * u]);
        }
    }
    if let Some(dx) = grads.dx {
        for r in 0..4 * u {
            axpy(dpre[r], &w_ih[r * d..(r + 1) * d], dx);
        }
    }
    if let Some(ds) = grads.dstate {
        let (dhp, dcp) = ds.split_at_mut(u);
        for r in 0..4 * u {
            axpy(dpre[r], &w_hh[r * u..(r + 1) * u], dhp);
        }
        axpy(1.0, &dc_prev, dcp);
    }
}

/// Softmax with max subtraction.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}
