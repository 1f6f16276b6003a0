//! Fully connected tanh networks over a flat parameter vector.
//!
//! Layer `l` maps `widths[l]` inputs to `widths[l+1]` outputs; its weights are
//! stored row-major (`fan_out x fan_in`) followed by its biases. An optional
//! trailing scalar holds a trainable PDE coefficient.

use rand::Rng;

use crate::rng::standard_normal;
use crate::Scalar;

use super::dual::{constant2, seed2, NetValue};
use super::PinnError;

pub const DEFAULT_WIDTHS: [usize; 5] = [2, 32, 32, 32, 1];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DenseNetwork {
    widths: Vec<usize>,
    offsets: Vec<usize>,
    inverse_slot: bool,
}

/// Which input derivatives to compute.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DerivativeRequest {
    pub x: bool,
    pub t: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct InputDerivatives<S> {
    pub u: S,
    pub u_x: Option<S>,
    pub u_xx: Option<S>,
    pub u_t: Option<S>,
    pub u_tt: Option<S>,
}

impl DenseNetwork {
    pub fn new(widths: &[usize], inverse_slot: bool) -> Result<Self, PinnError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(PinnError::Architecture(format!("bad layer widths {widths:?}")));
        }
        let mut offsets = Vec::with_capacity(widths.len());
        let mut at = 0;
        for l in 0..widths.len() - 1 {
            offsets.push(at);
            at += (widths[l] + 1) * widths[l + 1];
        }
        offsets.push(at);
        Ok(Self {
            widths: widths.to_vec(),
            offsets,
            inverse_slot,
        })
    }

    /// The 2-32-32-32-1 tanh network.
    pub fn standard(inverse_slot: bool) -> Self {
        Self::new(&DEFAULT_WIDTHS, inverse_slot).expect("valid widths")
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn has_inverse_slot(&self) -> bool {
        self.inverse_slot
    }

    /// Parameters of the network alone.
    pub fn n_weights(&self) -> usize {
        *self.offsets.last().expect("non-empty")
    }

    pub fn n_params(&self) -> usize {
        self.n_weights() + usize::from(self.inverse_slot)
    }

    /// Index of the trainable coefficient, if any.
    pub fn inverse_index(&self) -> Option<usize> {
        self.inverse_slot.then(|| self.n_weights())
    }

    /// Offset of layer `l`'s weight block; biases follow at `+ fan_in * fan_out`.
    pub fn layer_offset(&self, l: usize) -> usize {
        self.offsets[l]
    }

    pub(crate) fn layer<'a, S>(&self, params: &'a [S], l: usize) -> (&'a [S], &'a [S]) {
        let (fi, fo) = (self.widths[l], self.widths[l + 1]);
        let w0 = self.offsets[l];
        (&params[w0..w0 + fi * fo], &params[w0 + fi * fo..w0 + fi * fo + fo])
    }

    /// Gaussian weights with std `1/sqrt(fan_in)`, zero biases, coefficient slot at `alpha0`.
    pub fn init<S: Scalar, R: Rng + ?Sized>(&self, rng: &mut R, alpha0: S) -> Vec<S> {
        let mut p = vec![S::zero(); self.n_params()];
        for l in 0..self.n_layers() {
            let (fi, fo) = (self.widths[l], self.widths[l + 1]);
            let std = S::of(1.0 / (fi as f64).sqrt());
            let w0 = self.offsets[l];
            for v in &mut p[w0..w0 + fi * fo] {
                *v = standard_normal::<S, _>(rng) * std;
            }
        }
        if let Some(i) = self.inverse_index() {
            p[i] = alpha0;
        }
        p
    }

    fn check<S>(&self, params: &[S], input_len: usize) -> Result<(), PinnError> {
        if params.len() != self.n_params() {
            return Err(PinnError::Dimension {
                what: "parameter vector",
                expected: self.n_params(),
                got: params.len(),
            });
        }
        if input_len != self.input_dim() {
            return Err(PinnError::Dimension {
                what: "input",
                expected: self.input_dim(),
                got: input_len,
            });
        }
        Ok(())
    }

    /// Forward pass on any [`NetValue`]; returns the first output.
    pub fn forward_generic<S: Scalar, V: NetValue<S>>(&self, params: &[S], input: &[V]) -> Result<V, PinnError> {
        self.check(params, input.len())?;
        let mut a: Vec<V> = input.to_vec();
        for l in 0..self.n_layers() {
            let (w, b) = self.layer(params, l);
            let fi = self.widths[l];
            let last = l + 1 == self.n_layers();
            a = b
                .iter()
                .enumerate()
                .map(|(o, &bo)| {
                    let row = &w[o * fi..(o + 1) * fi];
                    let z = row.iter().zip(&a).fold(V::constant(bo), |acc, (&wi, &ai)| acc + ai.scale(wi));
                    if last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
        }
        Ok(a[0])
    }

    pub fn forward<S: Scalar>(&self, params: &[S], input: &[S]) -> Result<S, PinnError> {
        self.forward_generic(params, input)
    }

    /// Exact input derivatives by nested dual numbers. Input 0 is `x`, input 1
    /// (when present) is `t`.
    pub fn input_derivatives<S: Scalar>(
        &self,
        params: &[S],
        input: &[S],
        request: DerivativeRequest,
    ) -> Result<InputDerivatives<S>, PinnError> {
        let mut out = InputDerivatives {
            u: self.forward(params, input)?,
            ..Default::default()
        };
        let along = |dir: usize| -> Result<(S, S), PinnError> {
            let duals: Vec<_> = input
                .iter()
                .enumerate()
                .map(|(i, &v)| if i == dir { seed2(v) } else { constant2(v) })
                .collect();
            let y = self.forward_generic(params, &duals)?;
            Ok((y.re.eps, y.eps.eps))
        };
        if request.x {
            let (d, dd) = along(0)?;
            out.u_x = Some(d);
            out.u_xx = Some(dd);
        }
        if request.t {
            if input.len() < 2 {
                return Err(PinnError::Dimension {
                    what: "input (time derivative requested)",
                    expected: 2,
                    got: input.len(),
                });
            }
            let (d, dd) = along(1)?;
            out.u_t = Some(d);
            out.u_tt = Some(dd);
        }
        Ok(out)
    }
}
