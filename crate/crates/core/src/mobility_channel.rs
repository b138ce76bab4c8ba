//! Vehicle kinematics inside one base station's coverage, the uplink channel
//! and per-round delay terms.
//!
//! The road runs along the x axis through the coverage disc; every vehicle
//! keeps a fixed lateral offset `y` from the base station. Units are SI
//! throughout (m, s, W, Hz, bit/s).

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleState<T: Scalar> {
    pub id: usize,
    /// Signed position along the road, m.
    pub x: T,
    /// Lateral offset from the base station, m.
    pub y: T,
    /// Constant speed, m/s.
    pub v: T,
    /// CPU frequency, cycles/s.
    pub f: T,
    /// Transmit power, W.
    pub p: T,
    pub local_model: Vec<T>,
    /// Index of the vehicle's local dataset.
    pub dataset: usize,
    /// Set by [`advance`] when the vehicle left coverage and was re-inserted at the entry point.
    pub reentered: bool,
}

impl<T: Scalar> VehicleState<T> {
    pub fn position(&self) -> (T, T) {
        (self.x, self.y)
    }
}

/// Constant-velocity motion. Leaving coverage re-inserts the vehicle at `-radius`.
pub fn advance<T: Scalar>(s: &VehicleState<T>, dt: T, radius: T) -> VehicleState<T> {
    debug_assert!(dt >= T::zero());
    let mut next = s.clone();
    next.x = s.x + s.v * dt;
    next.reentered = next.x > radius;
    if next.reentered {
        next.x = -radius;
    }
    next
}

pub fn distance_to_bs<T: Scalar>(s: &VehicleState<T>, bs: (T, T)) -> Result<T> {
    let (dx, dy) = (s.x - bs.0, s.y - bs.1);
    let d = (dx * dx + dy * dy).sqrt();
    if !d.is_finite() {
        return Err(Error::Validation("vehicle or base station coordinate is not finite".into()));
    }
    if d <= T::zero() {
        return Err(Error::ZeroDistance);
    }
    Ok(d)
}

/// Channel gain model: `h = Z²` with `Z ~ Normal(mean, std)`, resampled while below `floor`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingModel {
    pub mean: f64,
    pub std: f64,
    pub floor: f64,
}

impl Default for FadingModel {
    fn default() -> Self {
        Self { mean: 1.0, std: 0.1, floor: 1e-6 }
    }
}

const MAX_RESAMPLES: usize = 32;

impl FadingModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean.is_finite() && self.std.is_finite() && self.std >= 0.0) {
            return Err(Error::Validation("fading mean must be finite and std non-negative".into()));
        }
        if !(self.floor > 0.0 && self.floor.is_finite()) {
            return Err(Error::Validation("fading floor must be positive".into()));
        }
        Ok(())
    }

    /// Mean of `h` ignoring the floor: `mean² + std²`.
    pub fn expected_gain(&self) -> f64 {
        self.mean * self.mean + self.std * self.std
    }
}

/// Draws one channel gain. Always consumes at least one normal draw; after a
/// bounded number of rejections the floor itself is returned.
pub fn sample_channel_gain<T: Scalar, R: Rng + ?Sized>(model: &FadingModel, rng: &mut R) -> T {
    let normal = Normal::new(model.mean, model.std).expect("validated fading parameters");
    for _ in 0..MAX_RESAMPLES {
        let z: f64 = normal.sample(rng);
        let h = z * z;
        if h >= model.floor {
            return T::lit(h);
        }
    }
    T::lit(model.floor)
}

/// `γ = p · h · d^(−α) / σ²`.
pub fn snr<T: Scalar>(p: T, h: T, d: T, path_loss_exp: T, noise_power: T) -> Result<T> {
    if d <= T::zero() {
        return Err(Error::ZeroDistance);
    }
    Ok(p * h * d.powf(-path_loss_exp) / noise_power)
}

/// Shannon rate on one of `subcarriers` equal slices of `bandwidth`.
pub fn transmission_rate<T: Scalar>(bandwidth: T, subcarriers: u32, gamma: T) -> T {
    let slice = bandwidth / T::from_u32(subcarriers).expect("subcarrier count representable");
    slice * (T::one() + gamma).log2()
}

pub fn upload_time<T: Scalar>(bits: T, rate: T) -> Result<T> {
    if bits == T::zero() {
        return Ok(T::zero());
    }
    if rate <= T::zero() {
        return Err(Error::InfiniteDelay);
    }
    Ok(bits / rate)
}

pub fn compute_time<T: Scalar>(cycles: T, freq: T) -> T {
    cycles / freq
}

/// Remaining time inside coverage, `(R_B − x) / v`.
pub fn residence_time<T: Scalar>(x: T, v: T, radius: T) -> Result<T> {
    if v <= T::zero() {
        return Err(Error::Validation("vehicle speed must be positive".into()));
    }
    Ok(((radius - x) / v).max(T::zero()))
}
