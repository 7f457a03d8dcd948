//! Sequential minimization of classic 2-D test functions, taught through
//! verbalized gradient information.

use std::any::Any;
use std::f64::consts::{E, PI};

use rand::Rng;
use serde_json::json;

use crate::env::{Ctx, Problem, ResetOutput, Transition};
use crate::error::EnvError;
use crate::feedback::{FeedbackKind, FeedbackSet};
use crate::text::{num, numbers, point};

/// Gradient components at or below this magnitude carry no direction.
pub const DIRECTION_TOLERANCE: f64 = 1e-8;
/// Below this magnitude a slope is called flat.
pub const FLAT_SLOPE: f64 = 1e-3;
/// At or above this magnitude a slope is called steep.
pub const STEEP_SLOPE: f64 = 1.0;

/// A differentiable loss over a box.
pub trait LossFunction: Send + Sync {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    /// Per-coordinate bounds; every coordinate shares them.
    fn domain(&self) -> (f64, f64);
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64]) -> Vec<f64>;
    fn minimum(&self) -> (Vec<f64>, f64);
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TestFunction {
    Rosenbrock,
    Bohachevsky,
    Sphere,
    Booth,
    Matyas,
    Himmelblau,
    Rastrigin,
    Ackley,
}

impl TestFunction {
    pub const ALL: [TestFunction; 8] = [
        TestFunction::Rosenbrock,
        TestFunction::Bohachevsky,
        TestFunction::Sphere,
        TestFunction::Booth,
        TestFunction::Matyas,
        TestFunction::Himmelblau,
        TestFunction::Rastrigin,
        TestFunction::Ackley,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TestFunction::Rosenbrock => "rosenbrock",
            TestFunction::Bohachevsky => "bohachevsky",
            TestFunction::Sphere => "sphere",
            TestFunction::Booth => "booth",
            TestFunction::Matyas => "matyas",
            TestFunction::Himmelblau => "himmelblau",
            TestFunction::Rastrigin => "rastrigin",
            TestFunction::Ackley => "ackley",
        }
    }

    /// Defaults to Rosenbrock.
    pub fn parse(variant: Option<&str>) -> Result<Self, EnvError> {
        let Some(v) = variant else {
            return Ok(TestFunction::Rosenbrock);
        };
        let v = v.trim().to_lowercase();
        Self::ALL
            .into_iter()
            .find(|f| f.name() == v || (v == "bohachevsky1" && *f == TestFunction::Bohachevsky))
            .ok_or_else(|| EnvError::UnknownEnv(format!("optimization:{v}")))
    }

    pub fn dim(self) -> usize {
        2
    }

    pub fn domain(self) -> (f64, f64) {
        match self {
            TestFunction::Rosenbrock => (-2.048, 2.048),
            TestFunction::Bohachevsky => (-100.0, 100.0),
            TestFunction::Sphere | TestFunction::Rastrigin => (-5.12, 5.12),
            TestFunction::Booth | TestFunction::Matyas => (-10.0, 10.0),
            TestFunction::Himmelblau => (-5.0, 5.0),
            TestFunction::Ackley => (-32.768, 32.768),
        }
    }
}

impl LossFunction for TestFunction {
    fn name(&self) -> &str {
        TestFunction::name(*self)
    }

    fn dim(&self) -> usize {
        TestFunction::dim(*self)
    }

    fn domain(&self) -> (f64, f64) {
        TestFunction::domain(*self)
    }

    fn value(&self, p: &[f64]) -> f64 {
        let (x, y) = (p[0], p[1]);
        match self {
            TestFunction::Rosenbrock => (1.0 - x).powi(2) + 100.0 * (y - x * x).powi(2),
            TestFunction::Bohachevsky => {
                x * x + 2.0 * y * y - 0.3 * (3.0 * PI * x).cos() - 0.4 * (4.0 * PI * y).cos() + 0.7
            }
            TestFunction::Sphere => x * x + y * y,
            TestFunction::Booth => (x + 2.0 * y - 7.0).powi(2) + (2.0 * x + y - 5.0).powi(2),
            TestFunction::Matyas => 0.26 * (x * x + y * y) - 0.48 * x * y,
            TestFunction::Himmelblau => (x * x + y - 11.0).powi(2) + (x + y * y - 7.0).powi(2),
            TestFunction::Rastrigin => p.iter().map(|v| v * v - 10.0 * (2.0 * PI * v).cos()).sum::<f64>() + 20.0,
            TestFunction::Ackley => {
                let r = (0.5 * (x * x + y * y)).sqrt();
                let c = 0.5 * ((2.0 * PI * x).cos() + (2.0 * PI * y).cos());
                -20.0 * (-0.2 * r).exp() - c.exp() + E + 20.0
            }
        }
    }

    fn gradient(&self, p: &[f64]) -> Vec<f64> {
        let (x, y) = (p[0], p[1]);
        match self {
            TestFunction::Rosenbrock => {
                vec![-2.0 * (1.0 - x) - 400.0 * x * (y - x * x), 200.0 * (y - x * x)]
            }
            TestFunction::Bohachevsky => vec![
                2.0 * x + 0.9 * PI * (3.0 * PI * x).sin(),
                4.0 * y + 1.6 * PI * (4.0 * PI * y).sin(),
            ],
            TestFunction::Sphere => vec![2.0 * x, 2.0 * y],
            TestFunction::Booth => {
                let (a, b) = (x + 2.0 * y - 7.0, 2.0 * x + y - 5.0);
                vec![2.0 * a + 4.0 * b, 4.0 * a + 2.0 * b]
            }
            TestFunction::Matyas => vec![0.52 * x - 0.48 * y, 0.52 * y - 0.48 * x],
            TestFunction::Himmelblau => {
                let (a, b) = (x * x + y - 11.0, x + y * y - 7.0);
                vec![4.0 * x * a + 2.0 * b, 2.0 * a + 4.0 * y * b]
            }
            TestFunction::Rastrigin => p.iter().map(|v| 2.0 * v + 20.0 * PI * (2.0 * PI * v).sin()).collect(),
            TestFunction::Ackley => {
                let r = (0.5 * (x * x + y * y)).sqrt();
                let c = (0.5 * ((2.0 * PI * x).cos() + (2.0 * PI * y).cos())).exp();
                let radial = |v: f64| if r > 0.0 { 2.0 * v * (-0.2 * r).exp() / r } else { 0.0 };
                vec![
                    radial(x) + PI * (2.0 * PI * x).sin() * c,
                    radial(y) + PI * (2.0 * PI * y).sin() * c,
                ]
            }
        }
    }

    fn minimum(&self) -> (Vec<f64>, f64) {
        let x = match self {
            TestFunction::Rosenbrock => vec![1.0, 1.0],
            TestFunction::Booth => vec![1.0, 3.0],
            TestFunction::Himmelblau => vec![3.0, 2.0],
            _ => vec![0.0, 0.0],
        };
        (x, 0.0)
    }
}

/// Exact value and gradient.
pub fn loss_and_grad(f: &dyn LossFunction, x: &[f64]) -> Result<(f64, Vec<f64>), EnvError> {
    if x.len() != f.dim() || x.iter().any(|v| !v.is_finite()) {
        return Err(EnvError::NonFiniteInput);
    }
    Ok((f.value(x), f.gradient(x)))
}

/// Clamp into the box; reports whether anything moved.
pub fn clamp_to_domain(f: &dyn LossFunction, x: &[f64]) -> (Vec<f64>, bool) {
    let (lo, hi) = f.domain();
    let clamped: Vec<f64> = x.iter().map(|v| v.clamp(lo, hi)).collect();
    let moved = clamped.iter().zip(x).any(|(a, b)| a != b);
    (clamped, moved)
}

pub fn slope_word(g: f64) -> &'static str {
    let g = g.abs();
    if g < FLAT_SLOPE {
        "flat"
    } else if g < STEEP_SLOPE {
        "gentle"
    } else {
        "steep"
    }
}

fn coord_name(i: usize) -> String {
    format!("x{}", i + 1)
}

/// Hidden optimizer state.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OptState {
    pub x0: Vec<f64>,
    pub x_prev: Option<Vec<f64>>,
    pub x_curr: Option<Vec<f64>>,
    pub f_prev: Option<f64>,
    pub f_curr: Option<f64>,
    pub best_f: f64,
    pub step: u32,
}

/// Gradient feedback for the latest evaluation: hindsight at `x_prev`,
/// suggestions at `x_curr`.
pub fn verbalize_gradient(ctx: &mut Ctx<'_>, state: &OptState, f: &dyn LossFunction) -> Result<FeedbackSet, EnvError> {
    use FeedbackKind::*;
    let x_curr = state.x_curr.as_ref().ok_or(EnvError::NoEvaluationYet)?;
    let (value, grad) = loss_and_grad(f, x_curr)?;
    let mut fb = FeedbackSet::new();
    ctx.emit(&mut fb, R, "loss", &[("point", point(x_curr, 4)), ("value", num(value, 4))])?;

    if let (Some(x_prev), Some(f_prev)) = (&state.x_prev, state.f_prev) {
        let slots = [("previous", point(x_prev, 4)), ("current", point(x_curr, 4))];
        if value < f_prev {
            ctx.emit(&mut fb, Hp, "decreased", &slots)?;
        } else {
            ctx.emit(&mut fb, Hn, "not_decreased", &slots)?;
        }
        let grad_prev = f.gradient(x_prev);
        for (i, (g, (a, b))) in grad_prev.iter().zip(x_prev.iter().zip(x_curr)).enumerate() {
            let dx = b - a;
            if dx == 0.0 || g.abs() <= DIRECTION_TOLERANCE {
                continue;
            }
            let moved = if dx > 0.0 { "increasing" } else { "decreasing" };
            let slots = [("coord", coord_name(i)), ("direction", moved.to_owned())];
            if dx * g < 0.0 {
                ctx.emit(&mut fb, Hp, "coord_agree", &slots)?;
            } else {
                ctx.emit(&mut fb, Hn, "coord_disagree", &slots)?;
            }
        }
    }

    for (i, g) in grad.iter().enumerate() {
        if g.abs() <= DIRECTION_TOLERANCE {
            continue;
        }
        let down = if *g < 0.0 { "increase" } else { "decrease" };
        let up = if *g > 0.0 { "increasing" } else { "decreasing" };
        ctx.emit(
            &mut fb,
            Fp,
            "direction",
            &[("coord", coord_name(i)), ("direction", down.to_owned()), ("slope", slope_word(*g).to_owned())],
        )?;
        ctx.emit(&mut fb, Fn, "direction", &[("coord", coord_name(i)), ("direction", up.to_owned())])?;
    }
    if grad.iter().all(|g| g.abs() < FLAT_SLOPE) {
        ctx.emit(&mut fb, Fp, "stay", &[("point", point(x_curr, 4))])?;
    }
    Ok(fb)
}

pub struct OptimizationProblem {
    function: Box<dyn LossFunction>,
    state: OptState,
}

impl std::fmt::Debug for OptimizationProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OptimizationProblem")
            .field("function", &self.function.name())
            .field("state", &self.state)
            .finish()
    }
}

impl OptimizationProblem {
    pub fn new(function: Box<dyn LossFunction>) -> Self {
        Self { function, state: OptState::default() }
    }

    pub fn from_variant(variant: Option<&str>) -> Result<Self, EnvError> {
        Ok(Self::new(Box::new(TestFunction::parse(variant)?)))
    }

    pub fn function(&self) -> &dyn LossFunction {
        self.function.as_ref()
    }

    pub fn state(&self) -> &OptState {
        &self.state
    }

    fn success_threshold(&self) -> f64 {
        let (_, f_star) = self.function.minimum();
        1e-3 * (1.0 + f_star.abs())
    }

    fn current_point(&self) -> &[f64] {
        self.state.x_curr.as_deref().unwrap_or(&self.state.x0)
    }
}

impl Problem for OptimizationProblem {
    fn reset(&mut self, ctx: &mut Ctx<'_>, _fresh_session: bool) -> Result<ResetOutput, EnvError> {
        let (lo, hi) = self.function.domain();
        let x0: Vec<f64> = (0..self.function.dim()).map(|_| ctx.latent.random_range(lo..=hi)).collect();
        let observation = format!("Starting point: x = {}. No proposal has been evaluated yet.", point(&x0, 4));
        self.state = OptState { x0, best_f: f64::INFINITY, ..OptState::default() };
        let instruction = ctx.instruction(
            "basic",
            &[
                ("dims", self.function.dim().to_string()),
                ("low", num(lo, 3)),
                ("high", num(hi, 3)),
            ],
        )?;
        Ok(ResetOutput { observation, instruction })
    }

    fn step(&mut self, ctx: &mut Ctx<'_>, action: &str) -> Result<Transition, EnvError> {
        let dim = self.function.dim();
        let parsed = numbers(action);
        self.state.step += 1;
        if parsed.len() != dim || parsed.iter().any(|v| !v.is_finite()) {
            let mut feedback = FeedbackSet::new();
            ctx.emit(&mut feedback, FeedbackKind::Hn, "malformed", &[("dims", dim.to_string())])?;
            let current = self.current_point().to_vec();
            let value = self.function.value(&current);
            let info = [
                ("success", json!(false)),
                ("value", json!(value)),
                ("best_f", json!(self.state.best_f)),
                ("malformed_action", json!(true)),
            ]
            .into_iter()
            .map(|(k, v)| (k.to_owned(), v))
            .collect();
            return Ok(Transition {
                observation: format!("Your answer could not be used. The current point is x = {}.", point(&current, 4)),
                reward: -value,
                terminated: false,
                feedback,
                info,
            });
        }

        let (x, clamped) = clamp_to_domain(self.function.as_ref(), &parsed);
        let (value, grad) = loss_and_grad(self.function.as_ref(), &x)?;
        self.state.x_prev = self.state.x_curr.take();
        self.state.f_prev = self.state.f_curr.take();
        self.state.x_curr = Some(x.clone());
        self.state.f_curr = Some(value);
        self.state.best_f = self.state.best_f.min(value);

        let mut feedback = verbalize_gradient(ctx, &self.state, self.function.as_ref())?;
        if clamped {
            let (lo, hi) = self.function.domain();
            ctx.emit(
                &mut feedback,
                FeedbackKind::Hn,
                "clamped",
                &[("point", point(&x, 4)), ("low", num(lo, 3)), ("high", num(hi, 3))],
            )?;
        }
        let (_, f_star) = self.function.minimum();
        let success = value - f_star < self.success_threshold();
        let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let info = [
            ("success", json!(success)),
            ("value", json!(value)),
            ("best_f", json!(self.state.best_f)),
            ("gradient_norm", json!(grad_norm)),
            ("clamped", json!(clamped)),
            ("malformed_action", json!(false)),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();
        Ok(Transition {
            observation: format!("Your proposal x = {} was evaluated.", point(&x, 4)),
            reward: -value,
            terminated: success,
            feedback,
            info,
        })
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn rosenbrock_values() {
        let f = TestFunction::Rosenbrock;
        let (v, g) = loss_and_grad(&f, &[1.0, 1.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
        let (v, g) = loss_and_grad(&f, &[0.0, 0.0]).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![-2.0, 0.0]);
    }

    #[test]
    fn sphere_origin() {
        let (v, g) = loss_and_grad(&TestFunction::Sphere, &[0.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn recorded_minima() {
        for f in TestFunction::ALL {
            let (x, f_star) = f.minimum();
            assert_abs_diff_eq!(f.value(&x), f_star, epsilon = 1e-9);
            let (lo, hi) = f.domain();
            assert!(x.iter().all(|v| (lo..=hi).contains(v)));
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(matches!(loss_and_grad(&TestFunction::Sphere, &[f64::NAN, 0.0]), Err(EnvError::NonFiniteInput)));
        assert!(matches!(loss_and_grad(&TestFunction::Sphere, &[0.0]), Err(EnvError::NonFiniteInput)));
    }

    #[test]
    fn clamping() {
        let (x, moved) = clamp_to_domain(&TestFunction::Himmelblau, &[7.0, -1.0]);
        assert_eq!(x, vec![5.0, -1.0]);
        assert!(moved);
        assert!(!clamp_to_domain(&TestFunction::Himmelblau, &[1.0, 1.0]).1);
    }

    #[test]
    fn variants() {
        assert_eq!(TestFunction::parse(Some("Booth")).unwrap(), TestFunction::Booth);
        assert_eq!(TestFunction::parse(None).unwrap(), TestFunction::Rosenbrock);
        assert!(matches!(TestFunction::parse(Some("beale")), Err(EnvError::UnknownEnv(_))));
    }
}
