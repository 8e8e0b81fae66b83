//! WGS-84 / local ENU conversion, heading initialization and GNSS noise.
//!
//! The ENU frame is an equirectangular tangent plane anchored at a fixed
//! geodetic point. Over a campus-sized area (about 1 km across) it stays well
//! below a centimeter of the full geodetic pipeline, which is why the
//! projection refuses inputs more than [`MAX_PROJECTION_OFFSET_DEG`] away from
//! the anchor.
//!
//! The robot's local navigation frame is tied to the global frame through a
//! [`FrameAlignment`]: an origin (the GNSS position at the end of the
//! initialization run) and a heading bias, the angle between the robot's local
//! x axis and east.

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Equatorial radius used by the tangent-plane projection.
pub const EARTH_RADIUS_M: f64 = 6_378_137.0;

/// Largest latitude or longitude offset from the anchor accepted by the projection.
pub const MAX_PROJECTION_OFFSET_DEG: f64 = 0.1;

/// Shortest GNSS baseline accepted by [`heading_from_fixes`].
pub const DEFAULT_MIN_BASELINE_M: f64 = 1.0;

/// Number of consecutive fixes averaged into one filtered fix.
pub const DEFAULT_FIX_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeoError {
    #[error("coordinate is not finite")]
    NonFinite,
    #[error("latitude {0} outside [-90, 90]")]
    LatitudeOutOfRange(f64),
    #[error("longitude {0} outside [-180, 180]")]
    LongitudeOutOfRange(f64),
    #[error(
        "point is {dlat_deg:.4} deg / {dlon_deg:.4} deg from the anchor, projection is only valid within {MAX_PROJECTION_OFFSET_DEG} deg"
    )]
    OutsideProjectionDomain { dlat_deg: f64, dlon_deg: f64 },
    #[error("anchor latitude {0} is too close to a pole for the tangent-plane projection")]
    PolarAnchor(f64),
    #[error("GNSS baseline {distance_m:.3} m is shorter than the {min_m} m minimum")]
    InsufficientBaseline { distance_m: f64, min_m: f64 },
    #[error("polygon has fewer than 3 distinct vertices")]
    TooFewVertices,
    #[error("polygon has zero area")]
    DegeneratePolygon,
    #[error("polygon edges {0} and {1} intersect")]
    SelfIntersecting(usize, usize),
    #[error("noise standard deviation must be finite and >= 0, got {0}")]
    InvalidSigma(f64),
    #[error("at least two point pairs are needed to fit a frame alignment")]
    NotEnoughPairs,
}

/// Geodetic position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawWgs84")]
pub struct Wgs84Point {
    lat: f64,
    lon: f64,
}

#[derive(Deserialize)]
struct RawWgs84 {
    lat: f64,
    lon: f64,
}

impl TryFrom<RawWgs84> for Wgs84Point {
    type Error = GeoError;

    fn try_from(raw: RawWgs84) -> Result<Self, GeoError> {
        Wgs84Point::new(raw.lat, raw.lon)
    }
}

impl Wgs84Point {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        if !lat.is_finite() || !lon.is_finite() {
            return Err(GeoError::NonFinite);
        }
        if !(-90.0..=90.0).contains(&lat) {
            return Err(GeoError::LatitudeOutOfRange(lat));
        }
        if !(-180.0..=180.0).contains(&lon) {
            return Err(GeoError::LongitudeOutOfRange(lon));
        }
        Ok(Wgs84Point { lat, lon })
    }

    pub fn lat(&self) -> f64 {
        self.lat
    }

    pub fn lon(&self) -> f64 {
        self.lon
    }
}

impl fmt::Display for Wgs84Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:.7}, {:.7})", self.lat, self.lon)
    }
}

/// Point in a local Cartesian frame, meters. In the global ENU frame `x` is
/// east and `y` is north; in the robot's local frame `x` is forward.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EnuPoint {
    pub x: f64,
    pub y: f64,
}

impl EnuPoint {
    pub const ORIGIN: EnuPoint = EnuPoint { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        EnuPoint { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(&self, other: EnuPoint) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }

    pub fn dot(&self, other: EnuPoint) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z component of the 3D cross product.
    pub fn cross(&self, other: EnuPoint) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Rotates counter-clockwise by `theta` radians.
    pub fn rotated(&self, theta: f64) -> EnuPoint {
        let (s, c) = theta.sin_cos();
        EnuPoint::new(c * self.x - s * self.y, s * self.x + c * self.y)
    }

    pub fn heading(&self) -> f64 {
        self.y.atan2(self.x)
    }
}

impl Add for EnuPoint {
    type Output = EnuPoint;
    fn add(self, rhs: EnuPoint) -> EnuPoint {
        EnuPoint::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for EnuPoint {
    type Output = EnuPoint;
    fn sub(self, rhs: EnuPoint) -> EnuPoint {
        EnuPoint::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for EnuPoint {
    type Output = EnuPoint;
    fn mul(self, rhs: f64) -> EnuPoint {
        EnuPoint::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for EnuPoint {
    type Output = EnuPoint;
    fn neg(self) -> EnuPoint {
        EnuPoint::new(-self.x, -self.y)
    }
}

/// Wraps an angle into (-pi, pi].
pub fn normalize_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// Angle between the robot's local x axis and east, normalized to (-pi, pi].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HeadingBias(f64);

impl HeadingBias {
    pub fn new(theta: f64) -> Self {
        HeadingBias(normalize_angle(theta))
    }

    pub fn radians(&self) -> f64 {
        self.0
    }
}

/// Projects `p` into the tangent plane anchored at `anchor`.
pub fn wgs84_to_enu(anchor: Wgs84Point, p: Wgs84Point) -> Result<EnuPoint, GeoError> {
    let dlat = p.lat - anchor.lat;
    let dlon = p.lon - anchor.lon;
    check_domain(dlat, dlon)?;
    let cos_lat = anchor_cos(anchor)?;
    Ok(EnuPoint::new(
        EARTH_RADIUS_M * cos_lat * dlon.to_radians(),
        EARTH_RADIUS_M * dlat.to_radians(),
    ))
}

/// Inverse of [`wgs84_to_enu`].
pub fn enu_to_wgs84(anchor: Wgs84Point, p: EnuPoint) -> Result<Wgs84Point, GeoError> {
    if !p.is_finite() {
        return Err(GeoError::NonFinite);
    }
    let cos_lat = anchor_cos(anchor)?;
    let dlat = (p.y / EARTH_RADIUS_M).to_degrees();
    let dlon = (p.x / (EARTH_RADIUS_M * cos_lat)).to_degrees();
    check_domain(dlat, dlon)?;
    Wgs84Point::new(anchor.lat + dlat, anchor.lon + dlon)
}

fn check_domain(dlat: f64, dlon: f64) -> Result<(), GeoError> {
    if !dlat.is_finite() || !dlon.is_finite() {
        return Err(GeoError::NonFinite);
    }
    if dlat.abs() >= MAX_PROJECTION_OFFSET_DEG || dlon.abs() >= MAX_PROJECTION_OFFSET_DEG {
        return Err(GeoError::OutsideProjectionDomain {
            dlat_deg: dlat,
            dlon_deg: dlon,
        });
    }
    Ok(())
}

fn anchor_cos(anchor: Wgs84Point) -> Result<f64, GeoError> {
    let c = anchor.lat.to_radians().cos();
    if c < 1e-6 {
        return Err(GeoError::PolarAnchor(anchor.lat));
    }
    Ok(c)
}

/// Heading bias from the two ends of a straight initialization run, with the
/// default 1 m baseline guard.
pub fn heading_from_fixes(p_start: EnuPoint, p_end: EnuPoint) -> Result<HeadingBias, GeoError> {
    heading_from_fixes_with_min(p_start, p_end, DEFAULT_MIN_BASELINE_M)
}

pub fn heading_from_fixes_with_min(
    p_start: EnuPoint,
    p_end: EnuPoint,
    min_baseline_m: f64,
) -> Result<HeadingBias, GeoError> {
    if !p_start.is_finite() || !p_end.is_finite() {
        return Err(GeoError::NonFinite);
    }
    let v = p_end - p_start;
    let d = v.norm();
    if d < min_baseline_m {
        return Err(GeoError::InsufficientBaseline {
            distance_m: d,
            min_m: min_baseline_m,
        });
    }
    Ok(HeadingBias::new(v.y.atan2(v.x)))
}

/// `R(theta)^T (w_global - p_end)`: a global ENU waypoint expressed in the
/// robot's local navigation frame.
pub fn global_to_local_waypoint(w_global: EnuPoint, p_end: EnuPoint, bias: HeadingBias) -> EnuPoint {
    (w_global - p_end).rotated(-bias.radians())
}

/// Inverse of [`global_to_local_waypoint`].
pub fn local_to_global_waypoint(w_local: EnuPoint, p_end: EnuPoint, bias: HeadingBias) -> EnuPoint {
    w_local.rotated(bias.radians()) + p_end
}

/// Rigid transform between the robot's local navigation frame and global ENU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameAlignment {
    /// Global position of the local frame's origin.
    pub origin: EnuPoint,
    pub bias: HeadingBias,
}

impl FrameAlignment {
    pub fn new(origin: EnuPoint, bias: HeadingBias) -> Self {
        FrameAlignment { origin, bias }
    }

    /// Alignment from the filtered fixes at both ends of the initialization run.
    pub fn from_init_run(p_start: EnuPoint, p_end: EnuPoint) -> Result<Self, GeoError> {
        Ok(FrameAlignment {
            origin: p_end,
            bias: heading_from_fixes(p_start, p_end)?,
        })
    }

    pub fn to_local(&self, global: EnuPoint) -> EnuPoint {
        global_to_local_waypoint(global, self.origin, self.bias)
    }

    pub fn to_global(&self, local: EnuPoint) -> EnuPoint {
        local_to_global_waypoint(local, self.origin, self.bias)
    }

    /// Least-squares rigid fit mapping local positions onto global fixes.
    ///
    /// Used to refine the alignment with (odometry, GNSS) pairs collected
    /// while driving, which shrinks the heading error as the baseline grows.
    pub fn fit(pairs: &[(EnuPoint, EnuPoint)]) -> Result<Self, GeoError> {
        if pairs.len() < 2 {
            return Err(GeoError::NotEnoughPairs);
        }
        let n = pairs.len() as f64;
        let (mut lc, mut gc) = (EnuPoint::ORIGIN, EnuPoint::ORIGIN);
        for (l, g) in pairs {
            lc = lc + *l;
            gc = gc + *g;
        }
        lc = lc * (1.0 / n);
        gc = gc * (1.0 / n);
        let (mut sin_sum, mut cos_sum) = (0.0, 0.0);
        for (l, g) in pairs {
            let (dl, dg) = (*l - lc, *g - gc);
            sin_sum += dl.cross(dg);
            cos_sum += dl.dot(dg);
        }
        if sin_sum == 0.0 && cos_sum == 0.0 {
            return Err(GeoError::NotEnoughPairs);
        }
        let theta = sin_sum.atan2(cos_sum);
        let origin = gc - lc.rotated(theta);
        Ok(FrameAlignment {
            origin,
            bias: HeadingBias::new(theta),
        })
    }
}

/// Per-axis Gaussian GNSS noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnssNoiseModel {
    pub sigma_m: f64,
    pub seed: u64,
}

impl GnssNoiseModel {
    pub fn new(sigma_m: f64, seed: u64) -> Result<Self, GeoError> {
        if !sigma_m.is_finite() || sigma_m < 0.0 {
            return Err(GeoError::InvalidSigma(sigma_m));
        }
        Ok(GnssNoiseModel { sigma_m, seed })
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.seed)
    }
}

/// One noisy fix of `true_point`.
pub fn simulate_gnss_fix<R: Rng + ?Sized>(true_point: EnuPoint, sigma_m: f64, rng: &mut R) -> EnuPoint {
    if sigma_m == 0.0 {
        return true_point;
    }
    let normal = Normal::new(0.0, sigma_m).expect("sigma validated by GnssNoiseModel");
    let nx = normal.sample(rng);
    let ny = normal.sample(rng);
    EnuPoint::new(true_point.x + nx, true_point.y + ny)
}

/// Seeded GNSS source owning its generator.
#[derive(Debug, Clone)]
pub struct GnssReceiver {
    model: GnssNoiseModel,
    rng: ChaCha8Rng,
}

impl GnssReceiver {
    pub fn new(model: GnssNoiseModel) -> Self {
        GnssReceiver {
            rng: model.rng(),
            model,
        }
    }

    pub fn model(&self) -> GnssNoiseModel {
        self.model
    }

    pub fn fix(&mut self, true_point: EnuPoint) -> EnuPoint {
        simulate_gnss_fix(true_point, self.model.sigma_m, &mut self.rng)
    }

    /// Mean of `k` consecutive fixes taken while stationary.
    pub fn filtered_fix(&mut self, true_point: EnuPoint, k: usize) -> EnuPoint {
        let k = k.max(1);
        let mut acc = EnuPoint::ORIGIN;
        for _ in 0..k {
            acc = acc + self.fix(true_point);
        }
        acc * (1.0 / k as f64)
    }
}
