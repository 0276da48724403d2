//! Residual losses and their exact parameter gradients.
//!
//! Interior and boundary points of a PINN problem share one batched jet pass:
//! the cotangent of each residual `r` is `2·λ·r / count`, routed to the jet
//! component matching the residual's derivative order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::net::{forward_jet, JetTape, Params};
use crate::problems::{BoundaryConstraint, Problem};
use crate::scalar::Scalar;

/// Relative weights of the interior and boundary terms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub interior: f64,
    pub boundary: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            interior: 1.0,
            boundary: 1.0,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(self.interior) || !ok(self.boundary) {
            return Err(Error::Structural(format!(
                "loss weights must be finite and non-negative, got {self:?}"
            )));
        }
        if self.interior == 0.0 && self.boundary == 0.0 {
            return Err(Error::Structural("loss weights are both zero".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossBreakdown<T> {
    /// Mean squared interior residual (the MSE in supervised mode).
    pub interior: T,
    /// Mean squared boundary residual.
    pub boundary: T,
    /// `λ_interior·interior + λ_boundary·boundary`.
    pub total: T,
    pub boundary_residuals: Vec<T>,
}

/// `d^m u/dx^m (x) − f(x)`.
pub fn interior_residual<T: Scalar>(params: &Params<T>, problem: &Problem<T>, x: T) -> Result<T> {
    let jet = forward_jet(params, x, problem.order)?;
    Ok(jet.get(problem.order) - problem.forcing_eval(x))
}

pub fn boundary_residual<T: Scalar>(params: &Params<T>, constraint: &BoundaryConstraint<T>) -> Result<T> {
    let jet = forward_jet(params, constraint.location, constraint.order)?;
    Ok(jet.get(constraint.order) - constraint.target)
}

/// Something the trainer can minimize.
pub trait Objective<T: Scalar> {
    /// Loss at `params`, writing `∂total/∂θ` into `grad`.
    fn loss_and_grad(&mut self, params: &Params<T>, grad: &mut Params<T>) -> Result<LossBreakdown<T>>;

    fn loss(&mut self, params: &Params<T>) -> Result<LossBreakdown<T>>;
}

/// Reusable PINN loss over a fixed point set.
#[derive(Debug)]
pub struct PinnObjective<'a, T> {
    problem: &'a Problem<T>,
    weights: LossWeights,
    order: usize,
    /// Collocation points followed by constraint locations.
    points: Vec<T>,
    interior: usize,
    forcing: Vec<T>,
    tape: JetTape<T>,
    cotangents: Vec<T>,
}

impl<'a, T: Scalar> PinnObjective<'a, T> {
    pub fn new(problem: &'a Problem<T>, collocation: &[T], weights: LossWeights) -> Result<Self> {
        weights.validate()?;
        let order = problem
            .constraints
            .iter()
            .map(|c| c.order)
            .chain(std::iter::once(problem.order))
            .max()
            .unwrap_or(0);
        let mut obj = PinnObjective {
            problem,
            weights,
            order,
            points: Vec::new(),
            interior: 0,
            forcing: Vec::new(),
            tape: JetTape::default(),
            cotangents: Vec::new(),
        };
        obj.set_collocation(collocation)?;
        Ok(obj)
    }

    /// Replaces the interior point set.
    pub fn set_collocation(&mut self, collocation: &[T]) -> Result<()> {
        if collocation.is_empty() {
            return Err(Error::Structural("collocation set is empty".into()));
        }
        self.interior = collocation.len();
        self.points.clear();
        self.points.extend_from_slice(collocation);
        self.points.extend(self.problem.constraints.iter().map(|c| c.location));
        self.forcing = collocation.iter().map(|&x| self.problem.forcing_eval(x)).collect();
        Ok(())
    }

    fn evaluate(&mut self, params: &Params<T>, want_grad: bool) -> Result<LossBreakdown<T>> {
        self.tape.run(params, &self.points, self.order)?;
        let batch = self.points.len();
        let n = self.interior;
        let (li, lb) = (T::lit(self.weights.interior), T::lit(self.weights.boundary));
        let nc = self.problem.constraints.len();

        if want_grad {
            self.cotangents.clear();
            self.cotangents.resize((self.order + 1) * batch, T::zero());
        }
        let two = T::lit(2.0);

        let m = self.problem.order;
        let du = self.tape.component(m);
        let mut interior = T::zero();
        let scale = two * li / T::from_usize_lossy(n);
        for (j, (&u, &g)) in du.iter().zip(&self.forcing).enumerate() {
            let r = u - g;
            interior = interior + r * r;
            if want_grad {
                self.cotangents[m * batch + j] = scale * r;
            }
        }
        interior = interior / T::from_usize_lossy(n);

        let mut boundary = T::zero();
        let mut boundary_residuals = Vec::with_capacity(nc);
        if nc > 0 {
            let scale = two * lb / T::from_usize_lossy(nc);
            for (i, c) in self.problem.constraints.iter().enumerate() {
                let j = n + i;
                let r = self.tape.component(c.order)[j] - c.target;
                boundary = boundary + r * r;
                boundary_residuals.push(r);
                if want_grad {
                    self.cotangents[c.order * batch + j] = scale * r;
                }
            }
            boundary = boundary / T::from_usize_lossy(nc);
        }
        Ok(LossBreakdown {
            interior,
            boundary,
            total: li * interior + lb * boundary,
            boundary_residuals,
        })
    }
}

impl<T: Scalar> Objective<T> for PinnObjective<'_, T> {
    fn loss_and_grad(&mut self, params: &Params<T>, grad: &mut Params<T>) -> Result<LossBreakdown<T>> {
        let loss = self.evaluate(params, true)?;
        self.tape.backward_into(params, &self.cotangents, grad)?;
        Ok(loss)
    }

    fn loss(&mut self, params: &Params<T>) -> Result<LossBreakdown<T>> {
        self.evaluate(params, false)
    }
}

/// Reusable mean-squared-error loss over fixed samples.
#[derive(Debug)]
pub struct SupervisedObjective<T> {
    inputs: Vec<T>,
    targets: Vec<T>,
    tape: JetTape<T>,
    cotangents: Vec<T>,
}

impl<T: Scalar> SupervisedObjective<T> {
    pub fn new(inputs: Vec<T>, targets: Vec<T>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::Structural(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if inputs.is_empty() {
            return Err(Error::Structural("supervised data set is empty".into()));
        }
        Ok(SupervisedObjective {
            inputs,
            targets,
            tape: JetTape::default(),
            cotangents: Vec::new(),
        })
    }

    fn evaluate(&mut self, params: &Params<T>, want_grad: bool) -> Result<LossBreakdown<T>> {
        self.tape.run(params, &self.inputs, 0)?;
        let n = T::from_usize_lossy(self.inputs.len());
        let out = self.tape.component(0);
        let scale = T::lit(2.0) / n;
        self.cotangents.clear();
        let mut sum = T::zero();
        for (u, y) in out.iter().zip(&self.targets) {
            let r = *u - *y;
            sum = sum + r * r;
            if want_grad {
                self.cotangents.push(scale * r);
            }
        }
        let mse = sum / n;
        Ok(LossBreakdown {
            interior: mse,
            boundary: T::zero(),
            total: mse,
            boundary_residuals: Vec::new(),
        })
    }
}

impl<T: Scalar> Objective<T> for SupervisedObjective<T> {
    fn loss_and_grad(&mut self, params: &Params<T>, grad: &mut Params<T>) -> Result<LossBreakdown<T>> {
        let loss = self.evaluate(params, true)?;
        self.tape.backward_into(params, &self.cotangents, grad)?;
        Ok(loss)
    }

    fn loss(&mut self, params: &Params<T>) -> Result<LossBreakdown<T>> {
        self.evaluate(params, false)
    }
}

/// Weighted PINN loss and its exact gradient.
pub fn total_loss_and_grad<T: Scalar>(
    params: &Params<T>,
    problem: &Problem<T>,
    collocation: &[T],
    weights: LossWeights,
) -> Result<(LossBreakdown<T>, Params<T>)> {
    let mut obj = PinnObjective::new(problem, collocation, weights)?;
    let mut grad = params.zeros_like();
    let loss = obj.loss_and_grad(params, &mut grad)?;
    Ok((loss, grad))
}

pub fn total_loss<T: Scalar>(
    params: &Params<T>,
    problem: &Problem<T>,
    collocation: &[T],
    weights: LossWeights,
) -> Result<LossBreakdown<T>> {
    PinnObjective::new(problem, collocation, weights)?.loss(params)
}

/// `(1/N) Σ (u(xᵢ) − yᵢ)²` and its gradient.
pub fn supervised_loss_and_grad<T: Scalar>(params: &Params<T>, inputs: &[T], targets: &[T]) -> Result<(T, Params<T>)> {
    let mut obj = SupervisedObjective::new(inputs.to_vec(), targets.to_vec())?;
    let mut grad = params.zeros_like();
    let loss = obj.loss_and_grad(params, &mut grad)?;
    Ok((loss.total, grad))
}
