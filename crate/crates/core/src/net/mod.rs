//! Fully connected scalar networks with exact input-derivative jets.

mod activation;
pub mod checkpoint;
mod params;
mod tape;

pub use activation::{Activation, MAX_ACTIVATION_ORDER};
pub use params::{Architecture, InitScheme, Params, DEFAULT_LAYER_SIZES};
pub use tape::{JetTape, MAX_JET_ORDER};

use crate::error::Result;
use crate::scalar::Scalar;

/// Network output and its first three derivatives with respect to `x`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Jet<T> {
    pub v: T,
    pub d1: T,
    pub d2: T,
    pub d3: T,
}

impl<T: Scalar> Jet<T> {
    /// Component by derivative order (`0` is the value).
    pub fn get(&self, order: usize) -> T {
        match order {
            0 => self.v,
            1 => self.d1,
            2 => self.d2,
            3 => self.d3,
            _ => panic!("jet order {order} out of range"),
        }
    }

    pub fn as_array(&self) -> [T; 4] {
        [self.v, self.d1, self.d2, self.d3]
    }
}

pub fn forward<T: Scalar>(params: &Params<T>, x: T) -> Result<T> {
    Ok(JetTape::forward(params, &[x], 0)?.component(0)[0])
}

/// Network outputs for many inputs in one batched pass.
pub fn forward_many<T: Scalar>(params: &Params<T>, xs: &[T]) -> Result<Vec<T>> {
    Ok(JetTape::forward(params, xs, 0)?.component(0).to_vec())
}

/// Exact derivatives `0..=order` at `x`; higher components are zero.
pub fn forward_jet<T: Scalar>(params: &Params<T>, x: T, order: usize) -> Result<Jet<T>> {
    let tape = JetTape::forward(params, &[x], order)?;
    let mut c = [T::zero(); 4];
    for (k, slot) in c.iter_mut().enumerate().take(order + 1) {
        *slot = tape.component(k)[0];
    }
    Ok(Jet {
        v: c[0],
        d1: c[1],
        d2: c[2],
        d3: c[3],
    })
}

/// `∂(w_v·v + w_1·d1 + w_2·d2 + w_3·d3)/∂θ` at `x`.
///
/// Only as many jet components as the highest nonzero cotangent are propagated.
pub fn backprop_jet<T: Scalar>(params: &Params<T>, x: T, cotangents: [T; 4]) -> Result<Params<T>> {
    if let Some(index) = cotangents.iter().position(|c| !c.is_finite()) {
        return Err(crate::Error::NonFinite {
            what: "cotangent",
            index,
        });
    }
    let order = cotangents.iter().rposition(|c| !c.is_zero()).unwrap_or(0);
    let mut tape = JetTape::forward(params, &[x], order)?;
    tape.backward(params, &cotangents[..=order])
}
