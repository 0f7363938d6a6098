//! Scenario geometry and Rician air-to-ground channels.
//!
//! Large-scale gain follows the log-distance model `L(d) = a + b * log10(d)` dB
//! on the 3D UAV-to-node distance. The small-scale part mixes a line-of-sight
//! steering vector of a half-wavelength uniform linear array (axis along x)
//! with i.i.d. circularly-symmetric Gaussian scattering.

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::Scalar;
use num_complex::Complex;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Physical scenario parameters. Defaults are the reference urban-UAV setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    /// Side of the square service area, meters.
    pub area_side: f64,
    /// Number of legitimate users (and paired eavesdroppers).
    pub users: usize,
    pub antennas: usize,
    /// UAV altitude, meters.
    pub altitude: f64,
    pub rician_factor_db: f64,
    pub pathloss_intercept_db: f64,
    pub pathloss_slope_db: f64,
    /// User-to-eavesdropper ground distance, meters.
    pub eve_distance: f64,
    /// Total transmit power budget, watts.
    pub power_budget: f64,
    /// Receiver noise power, watts.
    pub noise_power: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            area_side: 200.0,
            users: 8,
            antennas: 8,
            altitude: 100.0,
            rician_factor_db: 10.0,
            pathloss_intercept_db: 30.0,
            pathloss_slope_db: 22.0,
            eve_distance: 20.0,
            power_budget: 1.0,
            noise_power: 1.2e-13,
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("area_side", self.area_side),
            ("altitude", self.altitude),
            ("eve_distance", self.eve_distance),
            ("power_budget", self.power_budget),
            ("noise_power", self.noise_power),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.users == 0 {
            return Err(Error::Config("users must be at least 1".into()));
        }
        if self.antennas == 0 {
            return Err(Error::Config("antennas must be at least 1".into()));
        }
        if self.eve_distance >= self.area_side {
            return Err(Error::Config("eve_distance must be smaller than area_side".into()));
        }
        if self.rician_factor_db.is_nan() || !self.pathloss_intercept_db.is_finite() || !self.pathloss_slope_db.is_finite() {
            return Err(Error::Config("channel model parameters must be numbers".into()));
        }
        Ok(())
    }

    /// Linear Rician factor; `+inf` dB gives pure line of sight.
    pub fn rician_linear(&self) -> f64 {
        10f64.powf(self.rician_factor_db / 10.0)
    }

    /// Path gain at distance equal to the altitude (UAV straight overhead).
    pub fn reference_gain(&self) -> f64 {
        path_gain_db(self.altitude, self.pathloss_intercept_db, self.pathloss_slope_db)
            .expect("altitude validated positive")
    }
}

/// Ground layout plus the UAV's horizontal position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology<T = f64> {
    pub area_side: T,
    pub uav: Point<T>,
    pub altitude: T,
    pub users: Vec<Point<T>>,
    /// `eves[k]` wiretaps `users[k]`.
    pub eves: Vec<Point<T>>,
}

impl<T: Scalar> Topology<T> {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn center(&self) -> Point<T> {
        let h = self.area_side * T::lit(0.5);
        Point::new(h, h)
    }

    pub fn contains(&self, p: Point<T>) -> bool {
        p.x >= T::zero() && p.y >= T::zero() && p.x <= self.area_side && p.y <= self.area_side
    }

    pub fn clip(&self, p: Point<T>) -> Point<T> {
        Point::new(p.x.max(T::zero()).min(self.area_side), p.y.max(T::zero()).min(self.area_side))
    }

    pub fn with_uav(&self, uav: Point<T>) -> Self {
        Self { uav, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.users.is_empty() || self.users.len() != self.eves.len() {
            return Err(Error::Dimension(format!(
                "{} users vs {} eavesdroppers",
                self.users.len(),
                self.eves.len()
            )));
        }
        if self.altitude <= T::zero() {
            return Err(Error::Domain("altitude must be positive".into()));
        }
        if !self.users.iter().chain(&self.eves).chain(std::iter::once(&self.uav)).all(|&p| self.contains(p)) {
            return Err(Error::Domain("ground coordinate outside the service area".into()));
        }
        Ok(())
    }
}

/// Complex channels from the UAV to every user and eavesdropper.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet<T = f64> {
    pub users: Vec<Vec<Complex<T>>>,
    pub eves: Vec<Vec<Complex<T>>>,
    pub uav: Point<T>,
}

impl<T: Scalar> ChannelSet<T> {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn antennas(&self) -> usize {
        self.users.first().map_or(0, Vec::len)
    }

    /// Reorders users (and their eavesdroppers): entry `i` of the result is
    /// entry `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        Self {
            users: perm.iter().map(|&i| self.users[i].clone()).collect(),
            eves: perm.iter().map(|&i| self.eves[i].clone()).collect(),
            uav: self.uav,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.antennas();
        if self.users.is_empty() || self.users.len() != self.eves.len() {
            return Err(Error::Dimension("user/eavesdropper channel counts differ".into()));
        }
        if self.users.iter().chain(&self.eves).any(|h| h.len() != n) {
            return Err(Error::Dimension("channel vectors differ in length".into()));
        }
        if self.users.iter().chain(&self.eves).flatten().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(Error::Domain("non-finite channel entry".into()));
        }
        Ok(())
    }
}

/// Users uniform over the area; each eavesdropper at exactly
/// `cfg.eve_distance` from its user at a uniform angle, redrawn until inside.
/// The UAV starts at the area center.
pub fn sample_topology<T: Scalar, R: Rng + ?Sized>(cfg: &ScenarioConfig, rng: &mut R) -> Topology<T> {
    let side = T::lit(cfg.area_side);
    let dist = T::lit(cfg.eve_distance);
    let mut users = Vec::with_capacity(cfg.users);
    let mut eves = Vec::with_capacity(cfg.users);
    for _ in 0..cfg.users {
        let u = Point::new(T::unit_uniform(rng) * side, T::unit_uniform(rng) * side);
        let e = loop {
            let theta = T::unit_uniform(rng) * T::TAU();
            let e = Point::new(u.x + dist * theta.cos(), u.y + dist * theta.sin());
            if e.x >= T::zero() && e.y >= T::zero() && e.x <= side && e.y <= side {
                break e;
            }
        };
        users.push(u);
        eves.push(e);
    }
    let h = side * T::lit(0.5);
    Topology { area_side: side, uav: Point::new(h, h), altitude: T::lit(cfg.altitude), users, eves }
}

pub fn distance_3d<T: Scalar>(uav: Point<T>, altitude: T, ground: Point<T>) -> T {
    let dx = ground.x - uav.x;
    let dy = ground.y - uav.y;
    (dx * dx + dy * dy + altitude * altitude).sqrt()
}

/// Linear power gain `10^(-(a + b log10 d) / 10)`.
pub fn path_gain_db<T: Scalar>(d: T, intercept_db: f64, slope_db: f64) -> Result<T> {
    if !(d > T::zero()) {
        return Err(Error::Domain(format!("distance must be positive, got {d}")));
    }
    let loss_db = T::lit(intercept_db) + T::lit(slope_db) * d.log10();
    Ok(T::lit(10.0).powf(-loss_db / T::lit(10.0)))
}

/// [`path_gain_db`] with the default 30 + 22 log10(d) model.
pub fn path_gain<T: Scalar>(d: T) -> Result<T> {
    path_gain_db(d, 30.0, 22.0)
}

/// Unit-modulus ULA response toward `ground`: element `n` has phase
/// `pi * n * cos(psi)` where `psi` is the angle between the array axis (x)
/// and the UAV-to-node ray.
pub fn steering_vector<T: Scalar>(uav: Point<T>, altitude: T, ground: Point<T>, antennas: usize) -> Vec<Complex<T>> {
    let d = distance_3d(uav, altitude, ground);
    let cos_psi = (ground.x - uav.x) / d;
    (0..antennas)
        .map(|n| Complex::from_polar(T::one(), T::PI() * T::lit(n as f64) * cos_psi))
        .collect()
}

/// Weights on the line-of-sight and scattered parts for a linear factor `kappa`.
fn rician_weights<T: Scalar>(kappa: f64) -> (T, T) {
    if kappa.is_infinite() {
        return (T::one(), T::zero());
    }
    (T::lit((kappa / (1.0 + kappa)).sqrt()), T::lit((1.0 / (1.0 + kappa)).sqrt()))
}

/// One Rician channel vector `sqrt(g) (w_los a + w_nlos u)`.
pub fn draw_channel<T: Scalar, R: Rng + ?Sized>(
    uav: Point<T>,
    altitude: T,
    ground: Point<T>,
    cfg: &ScenarioConfig,
    rng: &mut R,
) -> Vec<Complex<T>> {
    let d = distance_3d(uav, altitude, ground);
    let g = path_gain_db(d, cfg.pathloss_intercept_db, cfg.pathloss_slope_db).expect("altitude > 0");
    let amp = g.sqrt();
    let (w_los, w_nlos) = rician_weights::<T>(cfg.rician_linear());
    let half = T::FRAC_1_SQRT_2();
    steering_vector(uav, altitude, ground, cfg.antennas)
        .into_iter()
        .map(|a| {
            let u = Complex::new(T::standard_normal(rng) * half, T::standard_normal(rng) * half);
            (a * w_los + u * w_nlos) * amp
        })
        .collect()
}

/// Channels for all `2K` links; users first, then eavesdroppers, each with
/// independent small-scale draws.
pub fn draw_channel_set<T: Scalar, R: Rng + ?Sized>(topo: &Topology<T>, cfg: &ScenarioConfig, rng: &mut R) -> ChannelSet<T> {
    let users = topo.users.iter().map(|&p| draw_channel(topo.uav, topo.altitude, p, cfg, rng)).collect();
    let eves = topo.eves.iter().map(|&p| draw_channel(topo.uav, topo.altitude, p, cfg, rng)).collect();
    ChannelSet { users, eves, uav: topo.uav }
}
