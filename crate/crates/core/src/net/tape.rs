//! Batched forward jets and their reverse pass.
//!
//! A batch of `B` inputs carrying jets of order `p` is laid out as a matrix
//! with `(p + 1)·B` columns: column block `c` holds the `c`-th derivative with
//! respect to the input for every sample. Affine layers act linearly on every
//! block (the bias only touches block 0), so each layer is a single GEMM.
//! Activations push the jets through Faà di Bruno's formula:
//!
//! ```text
//! z  = σ(a)
//! z′ = σ′ a′
//! z″ = σ″ a′² + σ′ a″
//! z‴ = σ‴ a′³ + 3 σ″ a′ a″ + σ′ a‴
//! ```
//!
//! The tape keeps every layer input, every hidden pre-activation jet and
//! `σ′ … σ^(p+1)` at the primal point, which is all the reverse pass needs.

use ndarray::{linalg::general_mat_mul, s, Array2, ArrayView2};

use super::{Activation, Params};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Highest input-derivative order carried by a jet.
pub const MAX_JET_ORDER: usize = 3;

/// Recorded forward pass. Buffers are reused by [`JetTape::run`], so a
/// training loop keeps one tape alive instead of reallocating every step.
#[derive(Clone, Debug)]
pub struct JetTape<T> {
    order: usize,
    batch: usize,
    activation: Option<Activation>,
    /// Input to each affine layer.
    inputs: Vec<Array2<T>>,
    /// Pre-activation jets of the hidden layers.
    pre: Vec<Array2<T>>,
    /// `σ′ … σ^(order+1)` at the hidden pre-activations, block layout.
    slopes: Vec<Array2<T>>,
    /// Cotangents of the hidden pre-activations (reverse-pass scratch).
    adjoints: Vec<Array2<T>>,
    output: Array2<T>,
}

impl<T: Scalar> Default for JetTape<T> {
    fn default() -> Self {
        JetTape {
            order: 0,
            batch: 0,
            activation: None,
            inputs: Vec::new(),
            pre: Vec::new(),
            slopes: Vec::new(),
            adjoints: Vec::new(),
            output: Array2::zeros((1, 0)),
        }
    }
}

fn ensure_shape<T: Scalar>(buf: &mut Array2<T>, rows: usize, cols: usize) {
    if buf.dim() != (rows, cols) {
        *buf = Array2::zeros((rows, cols));
    }
}

fn ensure_layers<T: Scalar>(bufs: &mut Vec<Array2<T>>, count: usize) {
    bufs.resize_with(count, || Array2::zeros((0, 0)));
}

impl<T: Scalar> JetTape<T> {
    /// Propagates jets of `order` for every input in `xs`.
    pub fn forward(params: &Params<T>, xs: &[T], order: usize) -> Result<Self> {
        let mut tape = Self::default();
        tape.run(params, xs, order)?;
        Ok(tape)
    }

    /// Re-records the tape in place.
    pub fn run(&mut self, params: &Params<T>, xs: &[T], order: usize) -> Result<()> {
        if order > MAX_JET_ORDER {
            return Err(Error::UnsupportedOrder {
                order,
                max: MAX_JET_ORDER,
            });
        }
        if let Some(index) = xs.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite {
                what: "network input",
                index,
            });
        }
        let batch = xs.len();
        let width = (order + 1) * batch;
        let activation = params.activation();
        let sizes = &params.architecture().sizes;
        let depth = params.depth();
        self.order = order;
        self.batch = batch;
        self.activation = Some(activation);

        ensure_layers(&mut self.inputs, depth);
        ensure_layers(&mut self.pre, depth - 1);
        ensure_layers(&mut self.slopes, depth - 1);
        for (input, &size) in self.inputs.iter_mut().zip(&sizes[..depth]) {
            ensure_shape(input, size, width);
        }
        for l in 0..depth - 1 {
            ensure_shape(&mut self.pre[l], sizes[l + 1], width);
            ensure_shape(&mut self.slopes[l], sizes[l + 1], width);
        }
        ensure_shape(&mut self.output, 1, width);

        {
            let z = &mut self.inputs[0];
            z.fill(T::zero());
            z.slice_mut(s![0, ..batch])
                .iter_mut()
                .zip(xs)
                .for_each(|(dst, &x)| *dst = x);
            if order >= 1 {
                z.slice_mut(s![0, batch..2 * batch]).fill(T::one());
            }
        }

        for l in 0..depth {
            let w = params.weight(l);
            let (head, tail) = self.inputs.split_at_mut(l + 1);
            let z = &head[l];
            let a = if l + 1 < depth {
                &mut self.pre[l]
            } else {
                &mut self.output
            };
            general_mat_mul(T::one(), &w, z, T::zero(), a);
            if let Some(b) = params.bias(l) {
                for (mut row, &bi) in a.rows_mut().into_iter().zip(b.iter()) {
                    row.slice_mut(s![..batch]).mapv_inplace(|v| v + bi);
                }
            }
            if l + 1 < depth {
                activate(activation, a, &mut tail[0], &mut self.slopes[l], order, batch);
            }
        }
        Ok(())
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// The `c`-th input-derivative of the network output for every sample.
    pub fn component(&self, c: usize) -> &[T] {
        assert!(c <= self.order, "component {c} above jet order {}", self.order);
        let row = self.output.as_slice().expect("output is contiguous");
        &row[c * self.batch..(c + 1) * self.batch]
    }

    /// Gradient with respect to the parameters of `Σ_c Σ_j cot[c·B + j] · u^(c)(x_j)`.
    ///
    /// `cotangents` uses the same block layout as the tape (length `(order+1)·B`).
    pub fn backward(&mut self, params: &Params<T>, cotangents: &[T]) -> Result<Params<T>> {
        let mut grad = params.zeros_like();
        self.backward_into(params, cotangents, &mut grad)?;
        Ok(grad)
    }

    /// Like [`JetTape::backward`], overwriting `grad`.
    pub fn backward_into(&mut self, params: &Params<T>, cotangents: &[T], grad: &mut Params<T>) -> Result<()> {
        let width = (self.order + 1) * self.batch;
        if cotangents.len() != width {
            return Err(Error::Structural(format!(
                "expected {width} cotangents, got {}",
                cotangents.len()
            )));
        }
        if self.activation != Some(params.activation())
            || params.depth() != self.inputs.len()
            || grad.architecture() != params.architecture()
        {
            return Err(Error::Structural("parameters do not match the recorded tape".into()));
        }
        let depth = params.depth();
        ensure_layers(&mut self.adjoints, depth - 1);
        for l in 0..depth - 1 {
            ensure_shape(&mut self.adjoints[l], self.pre[l].nrows(), width);
        }
        let top = ArrayView2::from_shape((1, width), cotangents).expect("cotangent row has tape width");
        for l in (0..depth).rev() {
            let (lower, upper) = self.adjoints.split_at_mut(l.min(depth - 1));
            let g = if l + 1 == depth { top.view() } else { upper[0].view() };
            let z = &self.inputs[l];
            {
                let (mut dw, db) = grad.layer_mut(l);
                general_mat_mul(T::one(), &g, &z.t(), T::zero(), &mut dw);
                if let Some(mut db) = db {
                    for (dst, row) in db.iter_mut().zip(g.rows()) {
                        *dst = row.slice(s![..self.batch]).sum();
                    }
                }
            }
            if l == 0 {
                break;
            }
            let gz = &mut lower[l - 1];
            general_mat_mul(T::one(), &params.weight(l).t(), &g, T::zero(), gz);
            activate_backward(gz, &self.pre[l - 1], &self.slopes[l - 1], self.order, self.batch);
        }
        Ok(())
    }
}

fn activate<T: Scalar>(
    act: Activation,
    a: &Array2<T>,
    z: &mut Array2<T>,
    slope: &mut Array2<T>,
    order: usize,
    batch: usize,
) {
    let a = a.as_slice().expect("pre-activations are contiguous");
    let z = z.as_slice_mut().expect("activations are contiguous");
    let slope = slope.as_slice_mut().expect("slopes are contiguous");
    match order {
        0 => activate_order::<T, 0>(act, a, z, slope, batch),
        1 => activate_order::<T, 1>(act, a, z, slope, batch),
        2 => activate_order::<T, 2>(act, a, z, slope, batch),
        _ => activate_order::<T, 3>(act, a, z, slope, batch),
    }
}

fn activate_order<T: Scalar, const P: usize>(act: Activation, a: &[T], z: &mut [T], slope: &mut [T], batch: usize) {
    let width = (P + 1) * batch;
    let three = T::lit(3.0);
    for ((arow, zrow), srow) in a
        .chunks_exact(width)
        .zip(z.chunks_exact_mut(width))
        .zip(slope.chunks_exact_mut(width))
    {
        for j in 0..batch {
            let d = act.derivatives4(arow[j]);
            zrow[j] = d[0];
            srow[j] = d[1];
            if P >= 1 {
                let a1 = arow[batch + j];
                zrow[batch + j] = d[1] * a1;
                srow[batch + j] = d[2];
                if P >= 2 {
                    let a2 = arow[2 * batch + j];
                    zrow[2 * batch + j] = d[2] * a1 * a1 + d[1] * a2;
                    srow[2 * batch + j] = d[3];
                    if P >= 3 {
                        let a3 = arow[3 * batch + j];
                        zrow[3 * batch + j] = d[3] * a1 * a1 * a1 + three * d[2] * a1 * a2 + d[1] * a3;
                        srow[3 * batch + j] = d[4];
                    }
                }
            }
        }
    }
}

/// Turns cotangents on activation outputs (in place) into cotangents on the
/// pre-activation jet.
fn activate_backward<T: Scalar>(g: &mut Array2<T>, pre: &Array2<T>, slope: &Array2<T>, order: usize, batch: usize) {
    let g = g.as_slice_mut().expect("cotangents are contiguous");
    let pre = pre.as_slice().expect("pre-activations are contiguous");
    let slope = slope.as_slice().expect("slopes are contiguous");
    match order {
        0 => activate_backward_order::<T, 0>(g, pre, slope, batch),
        1 => activate_backward_order::<T, 1>(g, pre, slope, batch),
        2 => activate_backward_order::<T, 2>(g, pre, slope, batch),
        _ => activate_backward_order::<T, 3>(g, pre, slope, batch),
    }
}

fn activate_backward_order<T: Scalar, const P: usize>(g: &mut [T], pre: &[T], slope: &[T], batch: usize) {
    let (two, three) = (T::lit(2.0), T::lit(3.0));
    let width = (P + 1) * batch;
    for ((grow, arow), srow) in g
        .chunks_exact_mut(width)
        .zip(pre.chunks_exact(width))
        .zip(slope.chunks_exact(width))
    {
        for j in 0..batch {
            let s1 = srow[j];
            let g0 = grow[j];
            if P == 0 {
                grow[j] = g0 * s1;
                continue;
            }
            let (a1, s2, g1) = (arow[batch + j], srow[batch + j], grow[batch + j]);
            let mut b0 = g0 * s1 + g1 * s2 * a1;
            let mut b1 = g1 * s1;
            if P >= 2 {
                let (a2, s3, g2) = (arow[2 * batch + j], srow[2 * batch + j], grow[2 * batch + j]);
                b0 = b0 + g2 * (s3 * a1 * a1 + s2 * a2);
                b1 = b1 + two * g2 * s2 * a1;
                let mut b2 = g2 * s1;
                if P >= 3 {
                    let (a3, s4, g3) = (arow[3 * batch + j], srow[3 * batch + j], grow[3 * batch + j]);
                    b0 = b0 + g3 * (s4 * a1 * a1 * a1 + three * s3 * a1 * a2 + s2 * a3);
                    b1 = b1 + three * g3 * (s3 * a1 * a1 + s2 * a2);
                    b2 = b2 + three * g3 * s2 * a1;
                    grow[3 * batch + j] = g3 * s1;
                }
                grow[2 * batch + j] = b2;
            }
            grow[j] = b0;
            grow[batch + j] = b1;
        }
    }
}
