//! Symmetric stochastic uniform quantization with one scale per tensor.
//!
//! `Q(x) = clip(round_stochastic(x * s), b)` with `s = (2^(b-1) - 1) / alpha`,
//! where `alpha` is the largest absolute value in the tensor. Codes live in
//! the symmetric range `[-(2^(b-1) - 1), 2^(b-1) - 1]`; dequantization is
//! `code / s`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{DenseTensor, ParamSet};

pub const MIN_BITS: u32 = 2;
pub const MAX_BITS: u32 = 32;

fn check_bits(bits: u32) -> Result<()> {
    if (MIN_BITS..=MAX_BITS).contains(&bits) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "bit-length {bits} outside [{MIN_BITS}, {MAX_BITS}]"
        )))
    }
}

/// Largest representable code magnitude, `2^(b-1) - 1`.
pub fn max_code(bits: u32) -> i64 {
    (1i64 << (bits - 1)) - 1
}

/// `(2^(b-1) - 1) / alpha`, or 1 when `alpha == 0`.
pub fn scale_factor(alpha: f64, bits: u32) -> Result<f64> {
    check_bits(bits)?;
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    if alpha == 0.0 {
        return Ok(1.0);
    }
    Ok(max_code(bits) as f64 / alpha)
}

/// Round down with probability `ceil(x) - x`, up otherwise.
pub fn stochastic_round<R: Rng + ?Sized>(x: f64, rng: &mut R) -> Result<i64> {
    if !x.is_finite() {
        return Err(Error::invalid(format!("cannot round non-finite value {x}")));
    }
    if x.abs() >= (1u64 << 62) as f64 {
        return Err(Error::invalid(format!("value {x} exceeds the 2^62 rounding range")));
    }
    let floor = x.floor();
    let frac = x - floor;
    if frac == 0.0 {
        return Ok(floor as i64);
    }
    let up = rng.random::<f64>() < frac;
    Ok(floor as i64 + i64::from(up))
}

/// Clamp into `[-(2^(b-1) - 1), 2^(b-1) - 1]`.
pub fn clip_int(y: i64, bits: u32) -> i64 {
    let m = max_code(bits.clamp(MIN_BITS, MAX_BITS));
    y.clamp(-m, m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedTensor {
    pub shape: Vec<usize>,
    pub codes: Vec<i64>,
    pub bits: u32,
    pub scale: f64,
}

impl QuantizedTensor {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    /// Checks the code-range and length invariants.
    pub fn validate(&self) -> Result<()> {
        check_bits(self.bits)?;
        if self.shape.iter().product::<usize>() != self.codes.len() {
            return Err(Error::ShapeMismatch(format!(
                "shape {:?} vs {} codes",
                self.shape,
                self.codes.len()
            )));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!("scale must be positive, got {}", self.scale)));
        }
        let m = max_code(self.bits);
        if let Some(c) = self.codes.iter().find(|c| c.abs() > m) {
            return Err(Error::invalid(format!("code {c} outside {}-bit range", self.bits)));
        }
        Ok(())
    }
}

pub fn quantize<R: Rng + ?Sized>(t: &DenseTensor, bits: u32, rng: &mut R) -> Result<QuantizedTensor> {
    let scale = scale_factor(t.max_abs(), bits)?;
    let codes = t
        .values()
        .iter()
        .map(|&x| stochastic_round(x * scale, rng).map(|y| clip_int(y, bits)))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantizedTensor {
        shape: t.shape().to_vec(),
        codes,
        bits,
        scale,
    })
}

pub fn dequantize(q: &QuantizedTensor) -> Result<DenseTensor> {
    q.validate()?;
    let values = q.codes.iter().map(|&c| c as f64 / q.scale).collect();
    DenseTensor::new(q.shape.clone(), values)
}

/// Quantized counterpart of a [`ParamSet`]; one scale per tensor.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct QuantizedParamSet {
    pub entries: Vec<(String, QuantizedTensor)>,
}

impl QuantizedParamSet {
    pub fn scales(&self) -> Vec<f64> {
        self.entries.iter().map(|(_, q)| q.scale).collect()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

pub fn quantize_params<R: Rng + ?Sized>(p: &ParamSet, bits: u32, rng: &mut R) -> Result<QuantizedParamSet> {
    check_bits(bits)?;
    let entries = p
        .entries()
        .iter()
        .map(|(name, t)| Ok((name.clone(), quantize(t, bits, rng)?)))
        .collect::<Result<_>>()?;
    Ok(QuantizedParamSet { entries })
}

pub fn dequantize_params(q: &QuantizedParamSet) -> Result<ParamSet> {
    let entries = q
        .entries
        .iter()
        .map(|(name, t)| Ok((name.clone(), dequantize(t)?)))
        .collect::<Result<_>>()?;
    ParamSet::new(entries)
}
