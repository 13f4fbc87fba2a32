use std::ops::{Add, Mul, Sub};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::Normal;
use serde::{Deserialize, Serialize};

use super::{substream, ScenarioConfig, STREAM_POSITIONS, STREAM_VELOCITIES};
use crate::error::{Error, Result};

/// Point or velocity in the simulation plane.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<[f64; 2]> for Vec2 {
    fn from([x, y]: [f64; 2]) -> Self {
        Vec2 { x, y }
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

/// Moving state of the simulated environment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub p_rx: Vec2,
    pub s_rx: Vec2,
    /// Reflection point positions.
    pub p_r: Vec<Vec2>,
    /// Reflection point velocities; `None` marks a static point.
    pub s: Vec<Option<Vec2>>,
    /// Elapsed simulation time (s).
    pub t_now: f64,
}

impl Scene {
    pub fn mobile_count(&self) -> usize {
        self.s.iter().filter(|v| v.is_some()).count()
    }
}

fn gaussian(mean: f64, variance: f64) -> Result<Normal<f64>> {
    Normal::new(mean, variance.sqrt())
        .map_err(|e| Error::config(format!("bad Gaussian N({mean}, {variance}): {e}")))
}

/// Draws the initial scene. Positions come from the position sub-stream;
/// the receiver velocity, the mobile subset and the mobile velocities come
/// from the velocity sub-stream.
pub fn init_scene(config: &ScenarioConfig) -> Result<Scene> {
    config.validate()?;

    let pos = gaussian(config.mu_p, config.sigma2_p)?;
    let mut rng = substream(config.seed, STREAM_POSITIONS);
    let p_r: Vec<Vec2> = (0..config.n_r)
        .map(|_| Vec2::new(rng.sample(pos), rng.sample(pos)))
        .collect();

    let rx_speed = gaussian(config.mu_rx, config.sigma2_rx)?;
    let point_speed = gaussian(config.mu_s, config.sigma2_s)?;
    let mut rng = substream(config.seed, STREAM_VELOCITIES);
    let s_rx = Vec2::new(rng.sample(rx_speed), rng.sample(rx_speed));

    let mut order: Vec<usize> = (0..config.n_r).collect();
    order.shuffle(&mut rng);
    let mut s = vec![None; config.n_r];
    for &i in &order[..config.n_m] {
        s[i] = Some(Vec2::new(rng.sample(point_speed), rng.sample(point_speed)));
    }

    Ok(Scene {
        p_rx: config.p_rx_init,
        s_rx,
        p_r,
        s,
        t_now: 0.0,
    })
}

/// Moves the receiver and every mobile point linearly by `delta_t` seconds.
pub fn advance_scene(scene: &Scene, delta_t: f64) -> Scene {
    let mut next = scene.clone();
    next.p_rx = scene.p_rx + scene.s_rx * delta_t;
    for (p, v) in next.p_r.iter_mut().zip(&scene.s) {
        if let Some(v) = v {
            *p = *p + *v * delta_t;
        }
    }
    next.t_now = scene.t_now + delta_t;
    next
}
