//! Goal-conditioned parking with a kinematic bicycle model.

use std::any::Any;
use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use regex::Regex;
use serde_json::json;
use std::sync::OnceLock;
use thiserror::Error;

use crate::env::{Ctx, Problem, ResetOutput, Transition};
use crate::error::EnvError;
use crate::feedback::{FeedbackKind, FeedbackSet};
use crate::text::{num, numbers};

pub const POSITION_TOLERANCE: f64 = 0.5;
pub const HEADING_TOLERANCE: f64 = 0.2;
pub const SPEED_TOLERANCE: f64 = 0.2;
pub const POSITION_WEIGHT: f64 = 1.0;
pub const HEADING_WEIGHT: f64 = 0.5;
pub const COLLISION_COST: f64 = 100.0;

pub const SPOTS_PER_ROW: usize = 10;
pub const SPOT_PITCH: f64 = 3.5;
pub const SPOT_WIDTH: f64 = 3.0;
pub const SPOT_DEPTH: f64 = 5.5;
pub const ROW_CENTER_Y: f64 = 7.75;
pub const LOT_HALF_WIDTH: f64 = 18.0;
pub const LOT_HALF_HEIGHT: f64 = 11.0;
pub const CAR_LENGTH: f64 = 4.5;
pub const CAR_WIDTH: f64 = 1.9;
pub const PARKED_PROBABILITY: f64 = 0.5;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum ParkingError {
    #[error("throttle and steering must be finite")]
    NonFiniteAction,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicsParams {
    pub wheelbase: f64,
    pub dt: f64,
    pub accel: f64,
    pub v_max: f64,
    pub max_steer: f64,
    /// Fraction of speed lost per step.
    pub friction: f64,
}

impl Default for DynamicsParams {
    fn default() -> Self {
        Self { wheelbase: 2.5, dt: 0.1, accel: 4.0, v_max: 5.0, max_steer: 0.6, friction: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
}

impl VehicleState {
    pub fn footprint(&self) -> OrientedRect {
        OrientedRect::new(self.x, self.y, CAR_LENGTH, CAR_WIDTH, self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

/// Wrap an angle into (−π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// One step of the kinematic bicycle: speed, then heading, then position.
/// Inputs must already lie in range; see [`clamp_action`].
pub fn integrate(
    state: &VehicleState,
    throttle: f64,
    steer: f64,
    params: &DynamicsParams,
) -> Result<VehicleState, ParkingError> {
    if !throttle.is_finite() || !steer.is_finite() {
        return Err(ParkingError::NonFiniteAction);
    }
    let speed = (state.speed + throttle * params.accel * params.dt - params.friction * state.speed)
        .clamp(-params.v_max, params.v_max);
    let heading = wrap_angle(state.heading + speed / params.wheelbase * steer.tan() * params.dt);
    Ok(VehicleState {
        x: state.x + speed * params.dt * heading.cos(),
        y: state.y + speed * params.dt * heading.sin(),
        heading,
        speed,
    })
}

/// Clamp throttle to [−1, 1] and steering to the steering limit. The flag
/// reports whether anything changed.
pub fn clamp_action(throttle: f64, steer: f64, params: &DynamicsParams) -> (f64, f64, bool) {
    let t = throttle.clamp(-1.0, 1.0);
    let s = steer.clamp(-params.max_steer, params.max_steer);
    (t, s, t != throttle || s != steer)
}

/// Rectangle given by centre, full length along `heading`, and full width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedRect {
    pub cx: f64,
    pub cy: f64,
    pub length: f64,
    pub width: f64,
    pub heading: f64,
}

impl OrientedRect {
    pub fn new(cx: f64, cy: f64, length: f64, width: f64, heading: f64) -> Self {
        Self { cx, cy, length, width, heading }
    }

    fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.heading.sin_cos();
        [(c, s), (-s, c)]
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        let [(ux, uy), (vx, vy)] = self.axes();
        let (hl, hw) = (self.length / 2.0, self.width / 2.0);
        [(1.0, 1.0), (-1.0, 1.0), (-1.0, -1.0), (1.0, -1.0)]
            .map(|(a, b)| (self.cx + a * hl * ux + b * hw * vx, self.cy + a * hl * uy + b * hw * vy))
    }

    pub fn contains(&self, px: f64, py: f64) -> bool {
        let [(ux, uy), (vx, vy)] = self.axes();
        let (dx, dy) = (px - self.cx, py - self.cy);
        (dx * ux + dy * uy).abs() <= self.length / 2.0 && (dx * vx + dy * vy).abs() <= self.width / 2.0
    }

    fn project(&self, (ax, ay): (f64, f64)) -> (f64, f64) {
        self.corners().iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, y)| {
            let p = x * ax + y * ay;
            (lo.min(p), hi.max(p))
        })
    }

    /// Separating-axis test. Touching rectangles overlap.
    pub fn overlaps(&self, other: &OrientedRect) -> bool {
        self.axes().into_iter().chain(other.axes()).all(|axis| {
            let (a_lo, a_hi) = self.project(axis);
            let (b_lo, b_hi) = other.project(axis);
            a_hi >= b_lo && b_hi >= a_lo
        })
    }

    pub fn within_bounds(&self, half_width: f64, half_height: f64) -> bool {
        self.corners().iter().all(|&(x, y)| x.abs() <= half_width && y.abs() <= half_height)
    }
}

pub fn spot_center(row: usize, index: usize) -> (f64, f64) {
    let x = (index as f64 - (SPOTS_PER_ROW as f64 - 1.0) / 2.0) * SPOT_PITCH;
    let y = if row == 0 { ROW_CENTER_Y } else { -ROW_CENTER_Y };
    (x, y)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParkingScene {
    pub goal: Pose,
    pub goal_spot: (usize, usize),
    pub obstacles: Vec<OrientedRect>,
    pub start: VehicleState,
}

impl ParkingScene {
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let goal_spot = (rng.random_range(0..2), rng.random_range(0..SPOTS_PER_ROW));
        let (gx, gy) = spot_center(goal_spot.0, goal_spot.1);
        let goal_heading = if rng.random_bool(0.5) { FRAC_PI_2 } else { -FRAC_PI_2 };
        let mut obstacles = Vec::new();
        for row in 0..2 {
            for index in 0..SPOTS_PER_ROW {
                let occupied = rng.random_bool(PARKED_PROBABILITY);
                if (row, index) != goal_spot && occupied {
                    let (x, y) = spot_center(row, index);
                    obstacles.push(OrientedRect::new(x, y, CAR_LENGTH, CAR_WIDTH, FRAC_PI_2));
                }
            }
        }
        let start = VehicleState {
            x: rng.random_range(-10.0..=10.0),
            y: rng.random_range(-1.5..=1.5),
            heading: wrap_angle(rng.random_range(-PI..PI)),
            speed: 0.0,
        };
        Self { goal: Pose { x: gx, y: gy, heading: goal_heading }, goal_spot, obstacles, start }
    }

    pub fn collides(&self, state: &VehicleState) -> Option<Collision> {
        let rect = state.footprint();
        if !rect.within_bounds(LOT_HALF_WIDTH, LOT_HALF_HEIGHT) {
            return Some(Collision::Boundary);
        }
        self.obstacles.iter().any(|o| o.overlaps(&rect)).then_some(Collision::ParkedCar)
    }

    pub fn distance(&self, state: &VehicleState) -> f64 {
        (state.x - self.goal.x).hypot(state.y - self.goal.y)
    }

    pub fn heading_error(&self, state: &VehicleState) -> f64 {
        wrap_angle(state.heading - self.goal.heading).abs()
    }

    pub fn parked(&self, state: &VehicleState) -> bool {
        self.distance(state) < POSITION_TOLERANCE
            && self.heading_error(state) < HEADING_TOLERANCE
            && state.speed.abs() < SPEED_TOLERANCE
    }

    pub fn reward(&self, state: &VehicleState, collided: bool) -> f64 {
        -POSITION_WEIGHT * self.distance(state)
            - HEADING_WEIGHT * self.heading_error(state)
            - if collided { COLLISION_COST } else { 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Collision {
    ParkedCar,
    Boundary,
}

impl Collision {
    fn describe(self) -> &'static str {
        match self {
            Collision::ParkedCar => "a parked car",
            Collision::Boundary => "the edge of the lot",
        }
    }
}

/// Parse `throttle=a, steering=b` (either order) or two bare numbers.
pub fn parse_action(text: &str) -> Option<(f64, f64)> {
    static KEYED: OnceLock<(Regex, Regex)> = OnceLock::new();
    let (throttle_re, steer_re) = KEYED.get_or_init(|| {
        let num = r"([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf|nan)";
        (
            Regex::new(&format!(r"(?i)throttle\s*[=:]\s*{num}")).expect("valid regex"),
            Regex::new(&format!(r"(?i)steer(?:ing)?\s*[=:]\s*{num}")).expect("valid regex"),
        )
    });
    let keyed = |re: &Regex| re.captures(text).and_then(|c| c[1].parse::<f64>().ok());
    match (keyed(throttle_re), keyed(steer_re)) {
        (Some(t), Some(s)) => Some((t, s)),
        (None, None) => match numbers(text)[..] {
            [t, s] => Some((t, s)),
            _ => None,
        },
        _ => None,
    }
}

pub fn format_action(throttle: f64, steer: f64) -> String {
    format!("throttle={}, steering={}", num(throttle, 3), num(steer, 3))
}

#[derive(Debug, Clone)]
pub struct ParkingProblem {
    params: DynamicsParams,
    scene: Option<ParkingScene>,
    state: VehicleState,
}

impl ParkingProblem {
    pub fn new(params: DynamicsParams) -> Self {
        Self { params, scene: None, state: VehicleState::default() }
    }

    pub fn from_variant(variant: Option<&str>) -> Result<Self, EnvError> {
        match variant {
            None => Ok(Self::new(DynamicsParams::default())),
            Some(v) => Err(EnvError::UnknownEnv(format!("parking:{v}"))),
        }
    }

    pub fn params(&self) -> &DynamicsParams {
        &self.params
    }

    pub fn scene(&self) -> Option<&ParkingScene> {
        self.scene.as_ref()
    }

    pub fn state(&self) -> &VehicleState {
        &self.state
    }

    pub fn set_state(&mut self, state: VehicleState) {
        self.state = state;
    }

    pub fn set_scene(&mut self, scene: ParkingScene) {
        self.scene = Some(scene);
    }

    fn describe(&self) -> String {
        let s = &self.state;
        let g = &self.scene.as_ref().expect("scene drawn").goal;
        format!(
            "Car at ({}, {}) heading {} rad, speed {} m/s. Goal at ({}, {}) heading {} rad.",
            num(s.x, 2),
            num(s.y, 2),
            num(s.heading, 2),
            num(s.speed, 2),
            num(g.x, 2),
            num(g.y, 2),
            num(g.heading, 2)
        )
    }
}

impl Problem for ParkingProblem {
    fn reset(&mut self, ctx: &mut Ctx<'_>, _fresh_session: bool) -> Result<ResetOutput, EnvError> {
        let scene = ParkingScene::sample(ctx.latent);
        self.state = scene.start;
        self.scene = Some(scene);
        let instruction = ctx.instruction(
            "basic",
            &[("max_steer", num(self.params.max_steer, 1)), ("tolerance", num(POSITION_TOLERANCE, 1))],
        )?;
        Ok(ResetOutput { observation: self.describe(), instruction })
    }

    fn step(&mut self, ctx: &mut Ctx<'_>, action: &str) -> Result<Transition, EnvError> {
        use FeedbackKind::*;
        let mut fb = FeedbackSet::new();
        let scene = self.scene.clone().expect("parking used before reset");
        let before = scene.distance(&self.state);

        let parsed = parse_action(action).filter(|(t, s)| t.is_finite() && s.is_finite());
        let (throttle, steer) = match parsed {
            Some((t, s)) => {
                let (ct, cs, clamped) = clamp_action(t, s, &self.params);
                if clamped {
                    ctx.emit(
                        &mut fb,
                        Hn,
                        "clamped",
                        &[("requested", format_action(t, s)), ("applied", format_action(ct, cs))],
                    )?;
                }
                (ct, cs)
            }
            None => {
                ctx.emit(&mut fb, Hn, "malformed", &[])?;
                (0.0, 0.0)
            }
        };
        self.state = integrate(&self.state, throttle, steer, &self.params).map_err(|_| EnvError::NonFiniteInput)?;

        let after = scene.distance(&self.state);
        let collision = scene.collides(&self.state);
        let parked = collision.is_none() && scene.parked(&self.state);
        let reward = scene.reward(&self.state, collision.is_some());

        ctx.emit(
            &mut fb,
            R,
            "distance",
            &[("distance", num(after, 2)), ("heading", num(scene.heading_error(&self.state), 2))],
        )?;
        let moved = [("previous", num(before, 2)), ("current", num(after, 2))];
        if after < before {
            ctx.emit(&mut fb, Hp, "closer", &moved)?;
        } else if after > before {
            ctx.emit(&mut fb, Hn, "farther", &moved)?;
        } else {
            ctx.emit(&mut fb, Hn, "no_progress", &[("distance", num(after, 2))])?;
        }
        if let Some(c) = collision {
            ctx.emit(&mut fb, Hn, "collision", &[("obstacle", c.describe().to_owned())])?;
        }

        let info = [
            ("success", json!(parked)),
            ("distance", json!(after)),
            ("previous_distance", json!(before)),
            ("heading_error", json!(scene.heading_error(&self.state))),
            ("speed", json!(self.state.speed)),
            ("collision", json!(collision.is_some())),
            ("malformed_action", json!(parsed.is_none())),
        ]
        .into_iter()
        .map(|(k, v)| (k.to_owned(), v))
        .collect();
        Ok(Transition {
            observation: self.describe(),
            reward,
            terminated: parked || collision.is_some(),
            feedback: fb,
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
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rest_is_fixed_point() {
        let p = DynamicsParams::default();
        let s = VehicleState { x: 1.0, y: -2.0, heading: 0.3, speed: 0.0 };
        assert_eq!(integrate(&s, 0.0, 0.4, &p).unwrap(), s);
    }

    #[test]
    fn straight_line_keeps_heading() {
        let p = DynamicsParams::default();
        let s = VehicleState { heading: 0.7, ..Default::default() };
        let n = integrate(&s, 1.0, 0.0, &p).unwrap();
        assert_eq!(n.heading, 0.7);
        assert!(n.speed > 0.0);
        assert_abs_diff_eq!(n.y / n.x, 0.7f64.tan(), epsilon = 1e-12);
    }

    #[test]
    fn coasting_never_speeds_up() {
        let p = DynamicsParams::default();
        let mut s = VehicleState { speed: -4.0, ..Default::default() };
        for _ in 0..50 {
            let n = integrate(&s, 0.0, 0.2, &p).unwrap();
            assert!(n.speed.abs() <= s.speed.abs());
            s = n;
        }
    }

    #[test]
    fn non_finite_rejected() {
        let p = DynamicsParams::default();
        assert_eq!(integrate(&VehicleState::default(), f64::NAN, 0.0, &p), Err(ParkingError::NonFiniteAction));
    }

    #[test]
    fn wrap_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert_abs_diff_eq!(wrap_angle(-PI), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(wrap_angle(3.0 * PI / 2.0), -PI / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn sat_simple_cases() {
        let a = OrientedRect::new(0.0, 0.0, 2.0, 2.0, 0.0);
        assert!(a.overlaps(&OrientedRect::new(1.5, 0.0, 2.0, 2.0, 0.0)));
        assert!(!a.overlaps(&OrientedRect::new(2.5, 0.0, 2.0, 2.0, 0.0)));
        // Diamond whose corner stops short of the square's corner.
        let d = OrientedRect::new(2.1, 2.1, 2.0, 2.0, PI / 4.0);
        assert!(!a.overlaps(&d));
        assert!(a.overlaps(&OrientedRect::new(1.5, 1.5, 2.0, 2.0, PI / 4.0)));
    }

    #[test]
    fn scenes_start_clear_and_goal_free() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let scene = ParkingScene::sample(&mut rng);
            assert_eq!(scene.collides(&scene.start), None);
            let goal = VehicleState { x: scene.goal.x, y: scene.goal.y, heading: scene.goal.heading, speed: 0.0 };
            assert_eq!(scene.collides(&goal), None);
            assert!(scene.parked(&goal));
        }
    }

    #[test]
    fn action_parsing() {
        assert_eq!(parse_action("throttle=0.5, steering=-0.2"), Some((0.5, -0.2)));
        assert_eq!(parse_action("steer: 0.1 throttle: 1"), Some((1.0, 0.1)));
        assert_eq!(parse_action("0.3 0.0"), Some((0.3, 0.0)));
        assert_eq!(parse_action("throttle=1"), None);
        assert_eq!(parse_action("go forward"), None);
    }
}
