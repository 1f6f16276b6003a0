//! Batched second-order jets through the network, with a hand-written reverse
//! pass for parameter gradients.
//!
//! A jet carries, per unit and point, the value and the first and second
//! derivatives along each requested input direction. For `a = tanh(z)`:
//!
//! ```text
//! a_d  = p1 z_d
//! a_dd = p1 z_dd + p2 z_d^2        p1 = 1 - a^2,  p2 = -2 a p1,  p3 = -2 p1^2 - 2 a p2
//! ```
//!
//! and the reverse pass maps output-jet adjoints back to weights through
//!
//! ```text
//! zbar_dd = abar_dd p1
//! zbar_d  = abar_d p1 + 2 abar_dd p2 z_d
//! zbar    = abar p1 + sum_d [abar_d p2 z_d + abar_dd (p2 z_dd + p3 z_d^2)]
//! ```
//!
//! Buffers are laid out `[unit][channel][point]`, so every weight touches one
//! contiguous run of `channels * points` values.

use crate::Scalar;

use super::network::DenseNetwork;

/// Channel layout for a set of derivative directions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct JetLayout {
    /// Input coordinates differentiated, in channel order.
    pub dirs: Vec<usize>,
}

impl JetLayout {
    pub fn value_only() -> Self {
        Self { dirs: vec![] }
    }

    pub fn along(dirs: &[usize]) -> Self {
        Self { dirs: dirs.to_vec() }
    }

    pub fn channels(&self) -> usize {
        1 + 2 * self.dirs.len()
    }

    /// Channel of the first derivative along input `input`.
    pub fn first(&self, input: usize) -> Option<usize> {
        self.dirs.iter().position(|&d| d == input).map(|k| 1 + 2 * k)
    }

    pub fn second(&self, input: usize) -> Option<usize> {
        self.first(input).map(|c| c + 1)
    }
}

/// Forward record needed by the reverse pass.
#[derive(Clone, Debug)]
pub struct JetTape<S> {
    layout: JetLayout,
    n_points: usize,
    /// Post-activation jets, one per layer input (index 0 is the network input).
    acts: Vec<Vec<S>>,
    /// Pre-activation jets of the hidden layers.
    pre: Vec<Vec<S>>,
    /// Output jet `[channel][point]`.
    output: Vec<S>,
}

impl<S: Scalar> JetTape<S> {
    pub fn layout(&self) -> &JetLayout {
        &self.layout
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    /// Output channel `c` at point `p`.
    pub fn out(&self, c: usize, p: usize) -> S {
        self.output[c * self.n_points + p]
    }

    pub fn output(&self) -> &[S] {
        &self.output
    }
}

/// Runs the network on `points` (each of length `net.input_dim()`).
pub fn forward_jets<S: Scalar>(net: &DenseNetwork, params: &[S], points: &[Vec<S>], layout: &JetLayout) -> JetTape<S> {
    let n = points.len();
    let c = layout.channels();
    let span = c * n;
    let widths = net.widths();

    let mut input = vec![S::zero(); widths[0] * span];
    for (i, chunk) in input.chunks_mut(span).enumerate() {
        for (p, pt) in points.iter().enumerate() {
            chunk[p] = pt[i];
        }
        if let Some(ch) = layout.first(i) {
            chunk[ch * n..(ch + 1) * n].iter_mut().for_each(|v| *v = S::one());
        }
    }

    let mut acts = vec![input];
    let mut pre = Vec::with_capacity(net.n_layers() - 1);
    for l in 0..net.n_layers() {
        let (w, b) = net.layer(params, l);
        let (fi, fo) = (widths[l], widths[l + 1]);
        let a = acts.last().expect("input present");
        let mut z = vec![S::zero(); fo * span];
        for (o, zo) in z.chunks_mut(span).enumerate() {
            zo[..n].iter_mut().for_each(|v| *v = b[o]);
        }
        gemm_acc(&mut z, w, a, fo, fi, span);
        if l + 1 == net.n_layers() {
            let output = z[..span].to_vec();
            return JetTape {
                layout: layout.clone(),
                n_points: n,
                acts,
                pre,
                output,
            };
        }
        let mut out = vec![S::zero(); fo * span];
        for (zo, ao) in z.chunks(span).zip(out.chunks_mut(span)) {
            for p in 0..n {
                let av = zo[p].tanh();
                let p1 = S::one() - av * av;
                let p2 = S::of(-2.0) * av * p1;
                ao[p] = av;
                for k in 0..layout.dirs.len() {
                    let (c1, c2) = ((1 + 2 * k) * n + p, (2 + 2 * k) * n + p);
                    let zd = zo[c1];
                    ao[c1] = p1 * zd;
                    ao[c2] = p1 * zo[c2] + p2 * zd * zd;
                }
            }
        }
        pre.push(z);
        acts.push(out);
    }
    unreachable!("network has at least one layer")
}

/// Accumulates into `grad` (length `net.n_weights()` or more) the gradient of
/// `sum_{c,p} out_bar[c][p] * output[c][p]` with respect to the weights.
pub fn backward_jets<S: Scalar>(net: &DenseNetwork, params: &[S], tape: &JetTape<S>, out_bar: &[S], grad: &mut [S]) {
    let n = tape.n_points;
    let c = tape.layout.channels();
    let span = c * n;
    let widths = net.widths();
    let dirs = tape.layout.dirs.len();
    debug_assert_eq!(out_bar.len(), span);

    let mut zbar: Vec<S> = out_bar.to_vec();
    for l in (0..net.n_layers()).rev() {
        let (w, _) = net.layer(params, l);
        let (fi, fo) = (widths[l], widths[l + 1]);
        let a = &tape.acts[l];
        let off = net.layer_offset(l);
        gemm_nt_acc(&mut grad[off..off + fi * fo], &zbar, a, fo, fi, span);
        for o in 0..fo {
            let bias: S = zbar[o * span..o * span + n].iter().copied().sum();
            grad[off + fi * fo + o] += bias;
        }
        if l == 0 {
            break;
        }

        let mut wt = vec![S::zero(); fi * fo];
        for o in 0..fo {
            for i in 0..fi {
                wt[i * fo + o] = w[o * fi + i];
            }
        }
        let mut abar = vec![S::zero(); fi * span];
        gemm_acc(&mut abar, &wt, &zbar, fi, fo, span);

        let z = &tape.pre[l - 1];
        let act = &tape.acts[l];
        let mut next = vec![S::zero(); fi * span];
        let two = S::of(2.0);
        for u in 0..fi {
            let base = u * span;
            for p in 0..n {
                let av = act[base + p];
                let p1 = S::one() - av * av;
                let p2 = -two * av * p1;
                let p3 = -two * p1 * p1 - two * av * p2;
                let mut zb0 = abar[base + p] * p1;
                for k in 0..dirs {
                    let (c1, c2) = (base + (1 + 2 * k) * n + p, base + (2 + 2 * k) * n + p);
                    let (zd, zdd) = (z[c1], z[c2]);
                    let (ad, add) = (abar[c1], abar[c2]);
                    next[c2] = add * p1;
                    next[c1] = ad * p1 + two * add * p2 * zd;
                    zb0 += ad * p2 * zd + add * (p2 * zdd + p3 * zd * zd);
                }
                next[base + p] = zb0;
            }
        }
        zbar = next;
    }
}

const LANES: usize = 4;
const ROWS: usize = 4;

/// `out[o][s] += sum_i w[o][i] * a[i][s]` with `w` row-major `rows x inner`
/// and `a`, `out` holding rows of length `span`.
fn gemm_acc<S: Scalar>(out: &mut [S], w: &[S], a: &[S], rows: usize, inner: usize, span: usize) {
    let full = span - span % LANES;
    let mut o0 = 0;
    while o0 + ROWS <= rows {
        for s0 in (0..full).step_by(LANES) {
            let mut acc = [[S::zero(); LANES]; ROWS];
            for (r, row) in acc.iter_mut().enumerate() {
                row.copy_from_slice(&out[(o0 + r) * span + s0..(o0 + r) * span + s0 + LANES]);
            }
            for i in 0..inner {
                let av: &[S; LANES] = a[i * span + s0..i * span + s0 + LANES].try_into().expect("lane width");
                for (r, row) in acc.iter_mut().enumerate() {
                    let wv = w[(o0 + r) * inner + i];
                    for l in 0..LANES {
                        row[l] += wv * av[l];
                    }
                }
            }
            for (r, row) in acc.iter().enumerate() {
                out[(o0 + r) * span + s0..(o0 + r) * span + s0 + LANES].copy_from_slice(row);
            }
        }
        for s in full..span {
            for r in 0..ROWS {
                let mut v = out[(o0 + r) * span + s];
                for i in 0..inner {
                    v += w[(o0 + r) * inner + i] * a[i * span + s];
                }
                out[(o0 + r) * span + s] = v;
            }
        }
        o0 += ROWS;
    }
    for o in o0..rows {
        let (orow, wrow) = (&mut out[o * span..(o + 1) * span], &w[o * inner..(o + 1) * inner]);
        for (i, &wv) in wrow.iter().enumerate() {
            for (v, &av) in orow.iter_mut().zip(&a[i * span..(i + 1) * span]) {
                *v += wv * av;
            }
        }
    }
}

/// `g[o][i] += sum_s x[o][s] * y[i][s]`, tiled two by two.
fn gemm_nt_acc<S: Scalar>(g: &mut [S], x: &[S], y: &[S], rows: usize, cols: usize, span: usize) {
    fn row<S>(m: &[S], k: usize, span: usize) -> &[S] {
        &m[k * span..(k + 1) * span]
    }
    let full = span - span % LANES;
    let mut o = 0;
    while o + 2 <= rows {
        let (x0, x1) = (row(x, o, span), row(x, o + 1, span));
        let mut i = 0;
        while i + 2 <= cols {
            let (y0, y1) = (row(y, i, span), row(y, i + 1, span));
            let mut acc = [[S::zero(); LANES]; 4];
            for s0 in (0..full).step_by(LANES) {
                for l in 0..LANES {
                    let (a0, a1, b0, b1) = (x0[s0 + l], x1[s0 + l], y0[s0 + l], y1[s0 + l]);
                    acc[0][l] += a0 * b0;
                    acc[1][l] += a0 * b1;
                    acc[2][l] += a1 * b0;
                    acc[3][l] += a1 * b1;
                }
            }
            let mut t = acc.map(|v| v.iter().copied().sum::<S>());
            for s in full..span {
                t[0] += x0[s] * y0[s];
                t[1] += x0[s] * y1[s];
                t[2] += x1[s] * y0[s];
                t[3] += x1[s] * y1[s];
            }
            g[o * cols + i] += t[0];
            g[o * cols + i + 1] += t[1];
            g[(o + 1) * cols + i] += t[2];
            g[(o + 1) * cols + i + 1] += t[3];
            i += 2;
        }
        for i in i..cols {
            g[o * cols + i] += dot_lanes(x0, row(y, i, span));
            g[(o + 1) * cols + i] += dot_lanes(x1, row(y, i, span));
        }
        o += 2;
    }
    for o in o..rows {
        for i in 0..cols {
            g[o * cols + i] += dot_lanes(row(x, o, span), row(y, i, span));
        }
    }
}

/// Dot product with independent partial sums so the loop vectorizes.
fn dot_lanes<S: Scalar>(x: &[S], y: &[S]) -> S {
    let mut acc = [S::zero(); LANES];
    let mut xc = x.chunks_exact(LANES);
    let mut yc = y.chunks_exact(LANES);
    for (xs, ys) in (&mut xc).zip(&mut yc) {
        for l in 0..LANES {
            acc[l] += xs[l] * ys[l];
        }
    }
    let tail: S = xc.remainder().iter().zip(yc.remainder()).map(|(&a, &b)| a * b).sum();
    acc.iter().copied().sum::<S>() + tail
}
