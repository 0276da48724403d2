//! Amplitude estimates at integer frequencies on a periodic grid.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Default number of samples on the periodic grid.
pub const DEFAULT_SPECTRUM_GRID: usize = 256;

#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum<T> {
    pub grid_size: usize,
    /// `(frequency, amplitude)`, frequencies strictly increasing.
    pub bins: Vec<(u32, T)>,
}

impl<T: Scalar> Spectrum<T> {
    pub fn frequencies(&self) -> Vec<u32> {
        self.bins.iter().map(|b| b.0).collect()
    }

    pub fn amplitude(&self, frequency: u32) -> Option<T> {
        self.bins.iter().find(|b| b.0 == frequency).map(|b| b.1)
    }
}

/// Samples `f` at `x_j = lo + j·(hi − lo)/n`, `j = 0..n` (right end excluded).
pub fn sample_uniform<T: Scalar>(f: impl Fn(T) -> T, n: usize, domain: (T, T)) -> Result<Vec<T>> {
    Ok(periodic_grid(n, domain)?.into_iter().map(f).collect())
}

/// Nodes of the periodic grid used by [`sample_uniform`].
pub fn periodic_grid<T: Scalar>(n: usize, domain: (T, T)) -> Result<Vec<T>> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::Structural(format!(
            "grid size must be a power of two ≥ 2, got {n}"
        )));
    }
    let (lo, hi) = (domain.0.wide(), domain.1.wide());
    let h = (hi - lo) / n as f64;
    Ok((0..n).map(|j| T::lit(lo + j as f64 * h)).collect())
}

/// `(2/N)·|Σ_j s_j e^{−2πi·k·j/N}|` for each requested frequency.
///
/// The domain is taken to span one period, so frequency `k` means `k` cycles
/// over the domain and a tone `A·sin(kx + φ)` reports `|A|`.
pub fn dft_amplitudes<T: Scalar>(samples: &[T], freqs: &[u32]) -> Result<Spectrum<T>> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::Structural(format!("need at least 2 samples, got {n}")));
    }
    let mut sorted = freqs.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != freqs.len() || sorted != freqs {
        return Err(Error::Structural(format!(
            "frequencies must be strictly increasing, got {freqs:?}"
        )));
    }
    let mut bins = Vec::with_capacity(freqs.len());
    for &k in freqs {
        if k == 0 {
            return Err(Error::Structural("frequency 0 is not a positive integer".into()));
        }
        if 2 * k as usize >= n {
            return Err(Error::Aliasing { frequency: k, grid: n });
        }
        // twiddle index reduced mod N keeps the angle small and exact
        let (mut re, mut im) = (0.0_f64, 0.0_f64);
        for (j, s) in samples.iter().enumerate() {
            let idx = (k as usize * j) % n;
            let theta = std::f64::consts::TAU * idx as f64 / n as f64;
            let s = s.wide();
            re += s * theta.cos();
            im -= s * theta.sin();
        }
        let amp = 2.0 / n as f64 * re.hypot(im);
        bins.push((k, T::lit(amp)));
    }
    Ok(Spectrum { grid_size: n, bins })
}

/// `|measured − exact|` per frequency.
pub fn spectrum_error<T: Scalar>(measured: &Spectrum<T>, exact: &Spectrum<T>) -> Result<Vec<(u32, T)>> {
    if measured.frequencies() != exact.frequencies() {
        return Err(Error::Structural(format!(
            "frequency lists differ: {:?} vs {:?}",
            measured.frequencies(),
            exact.frequencies()
        )));
    }
    Ok(measured
        .bins
        .iter()
        .zip(&exact.bins)
        .map(|(m, e)| (m.0, (m.1 - e.1).abs()))
        .collect())
}
