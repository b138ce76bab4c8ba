//! Stochastic gradient quantization: norm + sign + level encoding, payload
//! accounting and the quantization-error estimate.
//!
//! Each entry `g_j` of a gradient with norm `‖g‖` is mapped to
//! `‖g‖ · sgn(g_j) · ξ_j` where `ξ_j` is `l/q` or `(l+1)/q`, rounded up with
//! probability `a·q − l` for `a = |g_j|/‖g‖`. The encoding is unbiased.

use rand::Rng;

use crate::error::{Error, Result};
use crate::scalar::{self, Scalar};

/// Dense gradient with a cached euclidean norm.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector<T: Scalar> {
    values: Vec<T>,
    norm: T,
}

impl<T: Scalar> GradientVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::Validation("gradient must have at least one entry".into()));
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        let norm = scalar::norm(&values);
        Ok(Self { values, norm })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![T::zero(); dim])
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn norm(&self) -> T {
        self.norm
    }

    pub fn norm_sq(&self) -> T {
        scalar::norm_sq(&self.values)
    }
}

/// Wire form of a quantized gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedGradient<T: Scalar> {
    pub norm: T,
    /// -1, 0 or +1 per entry. Zero only for entries that were exactly zero.
    pub signs: Vec<i8>,
    /// Numerator of `ξ_j · q`, in `0..=q`.
    pub levels: Vec<u32>,
    pub q: u32,
}

impl<T: Scalar> QuantizedGradient<T> {
    pub fn dim(&self) -> usize {
        self.levels.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.q == 0 {
            return Err(Error::ZeroLevels);
        }
        if self.signs.len() != self.levels.len() {
            return Err(Error::DimensionMismatch { expected: self.levels.len(), found: self.signs.len() });
        }
        if self.levels.is_empty() {
            return Err(Error::Validation("quantized gradient is empty".into()));
        }
        if !(self.norm.is_finite() && self.norm >= T::zero()) {
            return Err(Error::Validation("quantized norm must be finite and non-negative".into()));
        }
        if let Some(j) = self.levels.iter().position(|&l| l > self.q) {
            return Err(Error::Validation(format!("level {} at entry {j} exceeds q = {}", self.levels[j], self.q)));
        }
        if let Some(j) = self.signs.iter().position(|s| !(-1..=1).contains(s)) {
            return Err(Error::Validation(format!("sign at entry {j} is not in {{-1, 0, 1}}")));
        }
        Ok(())
    }
}

/// Quantizes `g` with `q` levels. One uniform draw is consumed per entry,
/// including zero entries, so stream consumption depends only on the dimension.
pub fn quantize<T: Scalar, R: Rng + ?Sized>(
    g: &GradientVector<T>,
    q: u32,
    rng: &mut R,
) -> Result<QuantizedGradient<T>> {
    if q == 0 {
        return Err(Error::ZeroLevels);
    }
    let dim = g.dim();
    let norm = g.norm();
    let mut signs = Vec::with_capacity(dim);
    let mut levels = Vec::with_capacity(dim);
    let qt = T::from_u32(q).expect("level count representable");

    for &x in g.values() {
        let u = T::lit(rng.random::<f64>());
        if norm == T::zero() || x == T::zero() {
            signs.push(0);
            levels.push(0);
            continue;
        }
        // |x| <= norm mathematically; rounding can push the ratio a hair above 1.
        let scaled = ((x.abs() / norm) * qt).min(qt);
        let lower = scaled.floor();
        let promote = scaled - lower;
        let mut level = lower.to_u32().expect("level in range");
        if u < promote {
            level += 1;
        }
        signs.push(if x > T::zero() { 1 } else { -1 });
        levels.push(level.min(q));
    }

    Ok(QuantizedGradient { norm, signs, levels, q })
}

/// Reconstructs `norm · sign · level / q` per entry.
pub fn dequantize<T: Scalar>(encoded: &QuantizedGradient<T>) -> Result<GradientVector<T>> {
    encoded.validate()?;
    let qt = T::from_u32(encoded.q).expect("level count representable");
    let values = encoded
        .signs
        .iter()
        .zip(&encoded.levels)
        .map(|(&s, &l)| {
            let xi = T::from_u32(l).expect("level representable") / qt;
            encoded.norm * T::from_i8(s).expect("sign representable") * xi
        })
        .collect();
    GradientVector::new(values)
}

/// Uplink payload `[1 + log2(q + 1)] · d` in bits. One sign bit per entry plus
/// the level index; the norm is treated as negligible.
pub fn payload_bits(q: u32, d: usize) -> f64 {
    debug_assert!(q >= 1 && d >= 1);
    (1.0 + (f64::from(q) + 1.0).log2()) * d as f64
}

/// Upper bound `(√d / q) · ‖g‖²` on the expected squared quantization error.
/// Only a bound in the regime `d ≥ q²`; see [`in_bound_regime`].
pub fn quantization_error_bound<T: Scalar>(g: &GradientVector<T>, q: u32) -> T {
    qe_bound(g.norm_sq(), q, g.dim())
}

/// Same bound from a precomputed squared norm and an explicit dimension.
pub fn qe_bound<T: Scalar>(norm_sq: T, q: u32, d: usize) -> T {
    let d = T::from_usize_lossy(d);
    d.sqrt() / T::from_u32(q).expect("level count representable") * norm_sq
}

pub fn in_bound_regime(q: u32, d: usize) -> bool {
    (q as usize).saturating_mul(q as usize) <= d
}
