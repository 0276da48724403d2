use ndarray::{ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::Activation;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Layer sizes used throughout the benchmarks: two hidden layers of 100 units.
pub const DEFAULT_LAYER_SIZES: [usize; 4] = [1, 100, 100, 1];

/// Weight initialization scheme. Biases always start at zero.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitScheme {
    /// Variance `2 / (fan_in + fan_out)`.
    #[default]
    GlorotNormal,
    /// Variance `1 / fan_in`.
    LecunNormal,
    /// All parameters zero.
    Zeros,
}

impl InitScheme {
    pub fn variance(self, fan_in: usize, fan_out: usize) -> f64 {
        match self {
            InitScheme::GlorotNormal => 2.0 / (fan_in + fan_out) as f64,
            InitScheme::LecunNormal => 1.0 / fan_in as f64,
            InitScheme::Zeros => 0.0,
        }
    }
}

impl std::str::FromStr for InitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "glorot" | "glorot-normal" => Ok(InitScheme::GlorotNormal),
            "lecun" | "lecun-normal" => Ok(InitScheme::LecunNormal),
            "zeros" => Ok(InitScheme::Zeros),
            other => Err(Error::Structural(format!("unknown init scheme '{other}'"))),
        }
    }
}

/// Network shape: scalar in, scalar out, fully connected.
///
/// Hidden layers apply `activation`; the output layer is affine. With
/// `bias = false` every layer is a pure matrix product, so `[1, 1]` without
/// bias is the one-parameter model `f(x) = θ·x`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub sizes: Vec<usize>,
    pub activation: Activation,
    pub bias: bool,
}

impl Architecture {
    pub fn new(sizes: Vec<usize>, activation: Activation) -> Result<Self> {
        let arch = Architecture {
            sizes,
            activation,
            bias: true,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sizes;
        if s.len() < 2 {
            return Err(Error::Structural(format!(
                "need at least 2 layer sizes, got {}",
                s.len()
            )));
        }
        if s[0] != 1 || s[s.len() - 1] != 1 {
            return Err(Error::Structural(format!(
                "first and last layer sizes must be 1, got {s:?}"
            )));
        }
        if s.contains(&0) {
            return Err(Error::Structural(format!("layer size 0 in {s:?}")));
        }
        Ok(())
    }

    /// Number of affine layers.
    pub fn depth(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.sizes
            .windows(2)
            .map(|w| w[1] * w[0] + if self.bias { w[1] } else { 0 })
            .sum()
    }
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            sizes: DEFAULT_LAYER_SIZES.to_vec(),
            activation: Activation::Tanh,
            bias: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Slot {
    weight: usize,
    bias: Option<usize>,
    rows: usize,
    cols: usize,
}

/// All weights and biases of a network, stored flat.
///
/// Layer `l` owns a row-major `(sizes[l+1] × sizes[l])` weight block followed
/// by its bias. Gradients share the type, so optimizer updates are plain
/// slice arithmetic.
#[derive(Clone, Debug, PartialEq)]
pub struct Params<T> {
    arch: Architecture,
    slots: Vec<Slot>,
    data: Vec<T>,
}

impl<T: Scalar> Params<T> {
    pub fn zeros(arch: Architecture) -> Result<Self> {
        arch.validate()?;
        let mut slots = Vec::with_capacity(arch.depth());
        let mut offset = 0;
        for w in arch.sizes.windows(2) {
            let (cols, rows) = (w[0], w[1]);
            let weight = offset;
            offset += rows * cols;
            let bias = arch.bias.then(|| {
                let b = offset;
                offset += rows;
                b
            });
            slots.push(Slot {
                weight,
                bias,
                rows,
                cols,
            });
        }
        Ok(Params {
            arch,
            slots,
            data: vec![T::zero(); offset],
        })
    }

    /// Seeded Gaussian weights with per-layer variance from `scheme`, zero biases.
    pub fn init(seed: u64, arch: Architecture, scheme: InitScheme) -> Result<Self> {
        let mut params = Self::zeros(arch)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in 0..params.slots.len() {
            let Slot { weight, rows, cols, .. } = params.slots[l];
            let std = scheme.variance(cols, rows).sqrt();
            for w in &mut params.data[weight..weight + rows * cols] {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = T::lit(std * z);
            }
        }
        Ok(params)
    }

    /// Builds parameters from a flat vector laid out as described on the type.
    pub fn from_flat(arch: Architecture, data: Vec<T>) -> Result<Self> {
        let mut params = Self::zeros(arch)?;
        if data.len() != params.data.len() {
            return Err(Error::Structural(format!(
                "expected {} parameters, got {}",
                params.data.len(),
                data.len()
            )));
        }
        params.data = data;
        Ok(params)
    }

    pub fn zeros_like(&self) -> Self {
        Params {
            arch: self.arch.clone(),
            slots: self.slots.clone(),
            data: vec![T::zero(); self.data.len()],
        }
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn activation(&self) -> Activation {
        self.arch.activation
    }

    pub fn depth(&self) -> usize {
        self.slots.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_flat(self) -> Vec<T> {
        self.data
    }

    pub fn weight(&self, layer: usize) -> ArrayView2<'_, T> {
        let s = &self.slots[layer];
        ArrayView2::from_shape((s.rows, s.cols), &self.data[s.weight..s.weight + s.rows * s.cols])
            .expect("slot shape matches storage")
    }

    pub fn weight_mut(&mut self, layer: usize) -> ArrayViewMut2<'_, T> {
        let s = &self.slots[layer];
        ArrayViewMut2::from_shape((s.rows, s.cols), &mut self.data[s.weight..s.weight + s.rows * s.cols])
            .expect("slot shape matches storage")
    }

    pub fn bias(&self, layer: usize) -> Option<ArrayView1<'_, T>> {
        let s = &self.slots[layer];
        s.bias.map(|b| ArrayView1::from(&self.data[b..b + s.rows]))
    }

    pub fn bias_mut(&mut self, layer: usize) -> Option<ArrayViewMut1<'_, T>> {
        let s = self.slots[layer].clone();
        s.bias.map(move |b| ArrayViewMut1::from(&mut self.data[b..b + s.rows]))
    }

    /// Mutable weight block and bias of one layer at once.
    pub(crate) fn layer_mut(&mut self, layer: usize) -> (ArrayViewMut2<'_, T>, Option<ArrayViewMut1<'_, T>>) {
        let s = self.slots[layer].clone();
        let (head, tail) = self.data.split_at_mut(s.weight + s.rows * s.cols);
        let w = ArrayViewMut2::from_shape((s.rows, s.cols), &mut head[s.weight..]).expect("slot shape matches storage");
        let b = s.bias.map(|b| {
            let start = b - (s.weight + s.rows * s.cols);
            ArrayViewMut1::from(&mut tail[start..start + s.rows])
        });
        (w, b)
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    /// Multiplies the output layer (weights and bias) by `c`.
    pub fn scale_output_layer(&mut self, c: T) {
        let last = self.depth() - 1;
        let (mut w, b) = self.layer_mut(last);
        w.mapv_inplace(|v| v * c);
        if let Some(mut b) = b {
            b.mapv_inplace(|v| v * c);
        }
    }

    pub fn dot(&self, other: &Self) -> T {
        self.data
            .iter()
            .zip(&other.data)
            .fold(T::zero(), |acc, (a, b)| acc + *a * *b)
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: T, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + alpha * *b;
        }
    }

    /// Lossless element-type conversion between `f32`/`f64` widths.
    pub fn cast<U: Scalar>(&self) -> Params<U> {
        Params {
            arch: self.arch.clone(),
            slots: self.slots.clone(),
            data: self.data.iter().map(|v| U::lit(v.wide())).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn arch() -> Architecture {
        Architecture::default()
    }

    #[test]
    fn layout_and_count() {
        let p = Params::<f64>::zeros(arch()).unwrap();
        assert_eq!(p.len(), 100 + 100 + 100 * 100 + 100 + 100 + 1);
        assert_eq!(p.weight(1).dim(), (100, 100));
        assert_eq!(p.bias(2).unwrap().len(), 1);
        let nb = Params::<f64>::zeros(Architecture::new(vec![1, 1], Activation::Tanh).unwrap().without_bias()).unwrap();
        assert_eq!(nb.len(), 1);
        assert!(nb.bias(0).is_none());
    }

    #[test]
    fn invalid_sizes_rejected() {
        for sizes in [vec![1], vec![2, 1], vec![1, 3, 2], vec![1, 0, 1]] {
            assert!(matches!(
                Architecture::new(sizes, Activation::Tanh),
                Err(Error::Structural(_))
            ));
        }
    }

    #[test]
    fn init_is_deterministic() {
        let a = Params::<f64>::init(7, arch(), InitScheme::GlorotNormal).unwrap();
        let b = Params::<f64>::init(7, arch(), InitScheme::GlorotNormal).unwrap();
        let bits = |p: &Params<f64>| p.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&a), bits(&b));
        let c = Params::<f64>::init(8, arch(), InitScheme::GlorotNormal).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn biases_start_at_zero() {
        let p = Params::<f64>::init(3, arch(), InitScheme::GlorotNormal).unwrap();
        for l in 0..p.depth() {
            assert!(p.bias(l).unwrap().iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn glorot_variance_monte_carlo() {
        // layer-0 weights pooled over seeds: 100 draws each, 10^4 total
        let draws: Vec<f64> = (0..100u64)
            .flat_map(|seed| {
                let p = Params::<f64>::init(seed, arch(), InitScheme::GlorotNormal).unwrap();
                p.weight(0).iter().copied().collect::<Vec<_>>()
            })
            .collect();
        assert_eq!(draws.len(), 10_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let var = draws.iter().map(|w| (w - mean).powi(2)).sum::<f64>() / (draws.len() - 1) as f64;
        let target = 2.0 / 101.0;
        assert!((var - target).abs() / target < 0.1, "variance {var} vs {target}");
    }

    #[test]
    fn layer_mut_addresses_the_same_storage() {
        let mut p = Params::<f64>::zeros(arch()).unwrap();
        {
            let (mut w, b) = p.layer_mut(1);
            w[[3, 4]] = 2.5;
            b.unwrap()[7] = -1.0;
        }
        assert_eq!(p.weight(1)[[3, 4]], 2.5);
        assert_eq!(p.bias(1).unwrap()[7], -1.0);
        assert_eq!(p.bias_mut(1).unwrap()[7], -1.0);
    }
}
