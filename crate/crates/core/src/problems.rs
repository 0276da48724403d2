//! Benchmark catalog: sinusoidal ODEs of order 0–3 on `[−π, π]` with closed
//! forms and boundary constraints.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Open01;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Frequencies accepted by the single-sinusoid benchmarks.
pub const SINGLE_TONE_FREQUENCIES: [u32; 3] = [2, 6, 10];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Sin,
    Cos,
}

/// `amplitude · phase(frequency · x)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SinusoidTerm<T> {
    pub amplitude: T,
    pub frequency: u32,
    pub phase: Phase,
}

impl<T: Scalar> SinusoidTerm<T> {
    pub fn sin(amplitude: T, frequency: u32) -> Self {
        SinusoidTerm {
            amplitude,
            frequency,
            phase: Phase::Sin,
        }
    }

    pub fn cos(amplitude: T, frequency: u32) -> Self {
        SinusoidTerm {
            amplitude,
            frequency,
            phase: Phase::Cos,
        }
    }

    pub fn eval(&self, x: T) -> T {
        let arg = T::lit(self.frequency as f64) * x;
        self.amplitude
            * match self.phase {
                Phase::Sin => arg.sin(),
                Phase::Cos => arg.cos(),
            }
    }

    /// The `n`-th derivative, again a single term.
    pub fn derivative(&self, n: usize) -> Self {
        let k = T::lit(self.frequency as f64);
        let mut term = *self;
        for _ in 0..n {
            term = match term.phase {
                Phase::Sin => SinusoidTerm::cos(term.amplitude * k, term.frequency),
                Phase::Cos => SinusoidTerm::sin(-term.amplitude * k, term.frequency),
            };
        }
        term
    }
}

/// Evaluates `Σ terms` at `x`.
pub fn eval_terms<T: Scalar>(terms: &[SinusoidTerm<T>], x: T) -> T {
    terms.iter().map(|t| t.eval(x)).sum()
}

/// `d^order u/dx^order (location) = target`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundaryConstraint<T> {
    pub location: T,
    pub order: usize,
    pub target: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProblemId {
    Eq17,
    Eq18,
    Eq19,
    Eq20,
    Eq21,
    Eq22,
    Eq23,
    Eq24,
    Eq25,
}

impl ProblemId {
    pub const ALL: [ProblemId; 9] = [
        ProblemId::Eq17,
        ProblemId::Eq18,
        ProblemId::Eq19,
        ProblemId::Eq20,
        ProblemId::Eq21,
        ProblemId::Eq22,
        ProblemId::Eq23,
        ProblemId::Eq24,
        ProblemId::Eq25,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemId::Eq17 => "eq17",
            ProblemId::Eq18 => "eq18",
            ProblemId::Eq19 => "eq19",
            ProblemId::Eq20 => "eq20",
            ProblemId::Eq21 => "eq21",
            ProblemId::Eq22 => "eq22",
            ProblemId::Eq23 => "eq23",
            ProblemId::Eq24 => "eq24",
            ProblemId::Eq25 => "eq25",
        }
    }

    /// Whether the entry is a single tone parameterized by `k`.
    pub fn takes_frequency(self) -> bool {
        !matches!(
            self,
            ProblemId::Eq17 | ProblemId::Eq18 | ProblemId::Eq19 | ProblemId::Eq20
        )
    }

    pub fn order(self) -> usize {
        match self {
            ProblemId::Eq17 | ProblemId::Eq22 | ProblemId::Eq24 | ProblemId::Eq25 => 0,
            ProblemId::Eq18 => 1,
            ProblemId::Eq19 | ProblemId::Eq21 => 2,
            ProblemId::Eq20 | ProblemId::Eq23 => 3,
        }
    }
}

impl std::fmt::Display for ProblemId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ProblemId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemId::ALL
            .into_iter()
            .find(|id| id.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Catalog(format!("unknown problem id '{s}'")))
    }
}

/// How boundary constraints are chosen for the third-order entries.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryMode {
    /// `u(−π) = u(π) = 0` only, which leaves third-order problems with a
    /// one-parameter family `c·(x² − π²)` of solutions.
    #[default]
    TwoPoint,
    /// Adds `u(0) = 0` to third-order problems so the closed form is unique.
    WellPosed,
}

/// One benchmark: `d^order u/dx^order = forcing` on `domain` plus constraints.
#[derive(Clone, Debug, PartialEq)]
pub struct Problem<T> {
    pub id: ProblemId,
    pub k: Option<u32>,
    pub order: usize,
    pub forcing: Vec<SinusoidTerm<T>>,
    pub domain: (T, T),
    pub constraints: Vec<BoundaryConstraint<T>>,
    pub closed_form: Vec<SinusoidTerm<T>>,
    pub mode: BoundaryMode,
}

/// Looks up a catalog entry. `k` is required for the single-tone entries and
/// ignored by the combined-sinusoid ones.
pub fn catalog<T: Scalar>(id: ProblemId, k: Option<u32>, mode: BoundaryMode) -> Result<Problem<T>> {
    let freq = if id.takes_frequency() {
        let k = k.ok_or_else(|| Error::Catalog(format!("{id} needs a frequency k")))?;
        if !SINGLE_TONE_FREQUENCIES.contains(&k) {
            return Err(Error::Catalog(format!(
                "{id} supports k in {SINGLE_TONE_FREQUENCIES:?}, got {k}"
            )));
        }
        Some(k)
    } else {
        None
    };
    let kf = T::lit(freq.unwrap_or(1) as f64);

    // Σ_{j=1..5} sin(2jx)/(2j): the function behind the combined entries
    let combined: Vec<SinusoidTerm<T>> = (1..=5u32)
        .map(|j| SinusoidTerm::sin(T::one() / T::lit(2.0 * j as f64), 2 * j))
        .collect();
    let k = freq.unwrap_or(0);
    let closed_form = match id {
        ProblemId::Eq17 | ProblemId::Eq18 | ProblemId::Eq19 | ProblemId::Eq20 => combined,
        ProblemId::Eq21 | ProblemId::Eq22 => vec![SinusoidTerm::sin(-T::one() / (kf * kf), k)],
        ProblemId::Eq23 | ProblemId::Eq24 => {
            vec![SinusoidTerm::sin(-T::one() / (kf * kf * kf), k)]
        }
        ProblemId::Eq25 => vec![SinusoidTerm::sin(-T::one(), k)],
    };
    let order = id.order();
    // forcing stated directly; the catalog tests check it against the closed form
    let forcing = match id {
        ProblemId::Eq17 | ProblemId::Eq22 | ProblemId::Eq24 | ProblemId::Eq25 => closed_form.clone(),
        ProblemId::Eq18 => (1..=5u32).map(|j| SinusoidTerm::cos(T::one(), 2 * j)).collect(),
        ProblemId::Eq19 => (1..=5u32)
            .map(|j| SinusoidTerm::sin(-T::lit(2.0 * j as f64), 2 * j))
            .collect(),
        ProblemId::Eq20 => (1..=5u32)
            .map(|j| SinusoidTerm::cos(-T::lit((2.0 * j as f64).powi(2)), 2 * j))
            .collect(),
        ProblemId::Eq21 => vec![SinusoidTerm::sin(T::one(), k)],
        ProblemId::Eq23 => vec![SinusoidTerm::cos(T::one(), k)],
    };

    let pi = T::PI();
    let mut constraints = vec![
        BoundaryConstraint {
            location: -pi,
            order: 0,
            target: T::zero(),
        },
        BoundaryConstraint {
            location: pi,
            order: 0,
            target: T::zero(),
        },
    ];
    if order == 3 && mode == BoundaryMode::WellPosed {
        constraints.push(BoundaryConstraint {
            location: T::zero(),
            order: 0,
            target: T::zero(),
        });
    }

    Ok(Problem {
        id,
        k: freq,
        order,
        forcing,
        domain: (-pi, pi),
        constraints,
        closed_form,
        mode,
    })
}

/// Sampling strategy for interior collocation points.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampling {
    /// One uniform draw per equal-width bin.
    #[default]
    Stratified,
    UniformRandom,
}

impl<T: Scalar> Problem<T> {
    /// `deriv`-th derivative of the closed-form solution at `x`.
    pub fn closed_form_eval(&self, x: T, deriv: usize) -> T {
        self.closed_form.iter().map(|t| t.derivative(deriv).eval(x)).sum()
    }

    pub fn forcing_eval(&self, x: T) -> T {
        eval_terms(&self.forcing, x)
    }

    /// Label such as `eq21(k=6)`.
    pub fn label(&self) -> String {
        match self.k {
            Some(k) => format!("{}(k={k})", self.id),
            None => self.id.to_string(),
        }
    }

    /// `n` points in the open interior of the domain, deterministic in `seed`.
    pub fn sample_collocation(&self, n: usize, strategy: Sampling, seed: u64) -> Result<Vec<T>> {
        if n == 0 {
            return Err(Error::Structural("collocation count must be ≥ 1".into()));
        }
        let (lo, hi) = (self.domain.0.wide(), self.domain.1.wide());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let width = hi - lo;
        let points = match strategy {
            Sampling::Stratified => {
                let h = width / n as f64;
                (0..n)
                    .map(|i| {
                        let u: f64 = rng.sample(Open01);
                        // bin edges are recomputed so the last bin ends exactly at `hi`
                        let (a, b) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
                        T::lit(a + u * (b - a))
                    })
                    .collect()
            }
            Sampling::UniformRandom => (0..n)
                .map(|_| {
                    let u: f64 = rng.sample(Open01);
                    T::lit(lo + u * width)
                })
                .collect(),
        };
        Ok(points)
    }

    /// `n` equispaced points on the closed domain (`n ≥ 2`).
    pub fn linspace(&self, n: usize) -> Vec<T> {
        let (lo, hi) = (self.domain.0.wide(), self.domain.1.wide());
        linspace(lo, hi, n).into_iter().map(T::lit).collect()
    }
}

/// `n` equispaced values from `lo` to `hi` inclusive; a single point sits at `lo`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| {
                if i == n - 1 {
                    hi
                } else {
                    lo + (hi - lo) * i as f64 / (n - 1) as f64
                }
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn all_problems(mode: BoundaryMode) -> Vec<Problem<f64>> {
        ProblemId::ALL
            .into_iter()
            .flat_map(|id| {
                let ks: Vec<Option<u32>> = if id.takes_frequency() {
                    SINGLE_TONE_FREQUENCIES.iter().map(|&k| Some(k)).collect()
                } else {
                    vec![None]
                };
                ks.into_iter().map(move |k| catalog(id, k, mode).unwrap())
            })
            .collect()
    }

    #[test]
    fn closed_forms_solve_their_equations() {
        for mode in [BoundaryMode::TwoPoint, BoundaryMode::WellPosed] {
            for p in all_problems(mode) {
                for x in linspace(-PI, PI, 1001) {
                    let lhs = p.closed_form_eval(x, p.order);
                    assert_abs_diff_eq!(lhs, p.forcing_eval(x), epsilon = 1e-10);
                }
                for c in &p.constraints {
                    assert!(c.location >= p.domain.0 && c.location <= p.domain.1);
                    assert_abs_diff_eq!(p.closed_form_eval(c.location, c.order), c.target, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn single_tone_entries() {
        let p = catalog::<f64>(ProblemId::Eq21, Some(6), BoundaryMode::TwoPoint).unwrap();
        assert_eq!(p.order, 2);
        assert_eq!(p.forcing, vec![SinusoidTerm::sin(1.0, 6)]);
        assert_eq!(p.closed_form, vec![SinusoidTerm::sin(-1.0 / 36.0, 6)]);

        let p = catalog::<f64>(ProblemId::Eq24, Some(2), BoundaryMode::TwoPoint).unwrap();
        assert_eq!(p.order, 0);
        assert_eq!(p.closed_form, vec![SinusoidTerm::sin(-1.0 / 8.0, 2)]);

        let p = catalog::<f64>(ProblemId::Eq25, Some(10), BoundaryMode::TwoPoint).unwrap();
        assert_eq!(p.closed_form, vec![SinusoidTerm::sin(-1.0, 10)]);
    }

    #[test]
    fn order_zero_forcing_is_closed_form() {
        let p = catalog::<f64>(ProblemId::Eq17, None, BoundaryMode::TwoPoint).unwrap();
        assert_eq!(p.forcing, p.closed_form);
    }

    #[test]
    fn closed_form_values() {
        let p = catalog::<f64>(ProblemId::Eq22, Some(2), BoundaryMode::TwoPoint).unwrap();
        assert_abs_diff_eq!(p.closed_form_eval(PI / 4.0, 0), -0.25, epsilon = 1e-15);
        let p = catalog::<f64>(ProblemId::Eq21, Some(2), BoundaryMode::TwoPoint).unwrap();
        for x in [-2.0, 0.1, 1.3] {
            assert_abs_diff_eq!(p.closed_form_eval(x, 2), (2.0 * x).sin(), epsilon = 1e-14);
        }
        for p in all_problems(BoundaryMode::TwoPoint) {
            assert_abs_diff_eq!(p.closed_form_eval(-PI, 0), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn forcing_values() {
        let p = catalog::<f64>(ProblemId::Eq21, Some(6), BoundaryMode::TwoPoint).unwrap();
        assert_abs_diff_eq!(p.forcing_eval(PI / 12.0), 1.0, epsilon = 1e-15);
        let p = catalog::<f64>(ProblemId::Eq20, None, BoundaryMode::TwoPoint).unwrap();
        assert_eq!(p.forcing_eval(0.0), -220.0);
        let p = catalog::<f64>(ProblemId::Eq17, None, BoundaryMode::TwoPoint).unwrap();
        assert_eq!(p.forcing_eval(0.0), 0.0);
    }

    #[test]
    fn catalog_errors() {
        assert!(matches!(
            catalog::<f64>(ProblemId::Eq21, Some(3), BoundaryMode::TwoPoint),
            Err(Error::Catalog(_))
        ));
        assert!(matches!(
            catalog::<f64>(ProblemId::Eq25, None, BoundaryMode::TwoPoint),
            Err(Error::Catalog(_))
        ));
        assert!("eqXX".parse::<ProblemId>().is_err());
        assert_eq!("EQ19".parse::<ProblemId>().unwrap(), ProblemId::Eq19);
        // combined entries ignore k
        assert!(catalog::<f64>(ProblemId::Eq17, Some(99), BoundaryMode::TwoPoint).is_ok());
    }

    #[test]
    fn boundary_constraint_counts() {
        for p in all_problems(BoundaryMode::TwoPoint) {
            assert_eq!(p.constraints.len(), 2);
        }
        for p in all_problems(BoundaryMode::WellPosed) {
            assert_eq!(p.constraints.len(), if p.order == 3 { 3 } else { 2 });
        }
    }

    /// Homogeneous solutions of u‴ = 0 are c₂x² + c₁x + c₀; the constraints
    /// pin them to zero iff the 3×3 system is nonsingular.
    #[test]
    fn well_posed_mode_pins_the_null_space() {
        let det3 = |m: [[f64; 3]; 3]| {
            m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
                + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
        };
        for id in [ProblemId::Eq20, ProblemId::Eq23] {
            let k = id.takes_frequency().then_some(2);
            let p = catalog::<f64>(id, k, BoundaryMode::WellPosed).unwrap();
            assert_eq!(p.constraints.len(), 3);
            let rows: Vec<[f64; 3]> = p
                .constraints
                .iter()
                .map(|c| [c.location * c.location, c.location, 1.0])
                .collect();
            assert!(det3([rows[0], rows[1], rows[2]]).abs() > 1e-6);

            // two-point: c₂(x² − π²) satisfies both constraints
            let q = catalog::<f64>(id, k, BoundaryMode::TwoPoint).unwrap();
            for c in &q.constraints {
                assert_abs_diff_eq!(c.location * c.location - PI * PI, 0.0, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn stratified_sampling() {
        let p = catalog::<f64>(ProblemId::Eq25, Some(2), BoundaryMode::TwoPoint).unwrap();
        let one = p.sample_collocation(1, Sampling::Stratified, 3).unwrap();
        assert!(one[0] > -PI && one[0] < PI);

        let n = 1024;
        let pts = p.sample_collocation(n, Sampling::Stratified, 3).unwrap();
        let h = 2.0 * PI / n as f64;
        for (i, x) in pts.iter().enumerate() {
            let lo = -PI + i as f64 * h;
            assert!(*x >= lo && *x < lo + h, "point {i} = {x} outside its bin");
        }
        assert_eq!(pts, p.sample_collocation(n, Sampling::Stratified, 3).unwrap());
        assert_ne!(pts, p.sample_collocation(n, Sampling::Stratified, 4).unwrap());

        let mean = pts.iter().sum::<f64>() / n as f64;
        assert!(mean.abs() < 4.0 * 2.0 * PI / (12.0 * n as f64).sqrt());
        assert!(p.sample_collocation(0, Sampling::Stratified, 3).is_err());
    }

    #[test]
    fn uniform_sampling_is_interior() {
        let p = catalog::<f64>(ProblemId::Eq17, None, BoundaryMode::TwoPoint).unwrap();
        let pts = p.sample_collocation(5000, Sampling::UniformRandom, 1).unwrap();
        assert!(pts.iter().all(|&x| x > -PI && x < PI));
    }

    #[test]
    fn derivative_cycle() {
        let t = SinusoidTerm::sin(0.5_f64, 3);
        assert_eq!(t.derivative(4), SinusoidTerm::sin(0.5 * 81.0, 3));
        assert_eq!(t.derivative(1), SinusoidTerm::cos(1.5, 3));
        assert_eq!(t.derivative(2), SinusoidTerm::sin(-4.5, 3));
    }
}
