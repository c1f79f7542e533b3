//! Communication accounting and bit packing of quantized codes.
//!
//! A quantized tensor on the wire costs `len * b` payload bits plus a 32-bit
//! scale and an 8-bit bit-length tag.

use crate::error::{Error, Result};
use crate::math::ParamSet;
use crate::quant::{QuantizedParamSet, MAX_BITS, MIN_BITS};

pub const SCALE_BITS: u64 = 32;
pub const TAG_BITS: u64 = 8;
pub const FP32_BITS: u64 = 32;

/// Bits needed to send `q`.
pub fn comm_cost(q: &QuantizedParamSet) -> u64 {
    q.entries
        .iter()
        .map(|(_, t)| t.len() as u64 * u64::from(t.bits) + SCALE_BITS + TAG_BITS)
        .sum()
}

/// Bits needed to send `p` as raw 32-bit floats.
pub fn fp32_cost(p: &ParamSet) -> u64 {
    p.num_elements() as u64 * FP32_BITS
}

/// Pack codes into `bits`-wide two's-complement fields, least significant bit first.
pub fn pack_codes(codes: &[i64], bits: u32) -> Result<Vec<u8>> {
    if !(MIN_BITS..=MAX_BITS).contains(&bits) {
        return Err(Error::invalid(format!("cannot pack {bits}-bit codes")));
    }
    let limit = (1i64 << (bits - 1)) - 1;
    let mask = (1u64 << bits) - 1;
    let total_bits = codes.len() * bits as usize;
    let mut out = vec![0u8; total_bits.div_ceil(8)];
    let mut pos = 0usize;
    for &c in codes {
        if c.abs() > limit {
            return Err(Error::invalid(format!("code {c} does not fit in {bits} bits")));
        }
        let mut word = (c as u64) & mask;
        let mut remaining = bits as usize;
        while remaining > 0 {
            let byte = pos / 8;
            let offset = pos % 8;
            let n = remaining.min(8 - offset);
            out[byte] |= ((word & ((1 << n) - 1)) as u8) << offset;
            word >>= n;
            pos += n;
            remaining -= n;
        }
    }
    Ok(out)
}

/// Inverse of [`pack_codes`] for `count` codes.
pub fn unpack_codes(bytes: &[u8], bits: u32, count: usize) -> Result<Vec<i64>> {
    if !(MIN_BITS..=MAX_BITS).contains(&bits) {
        return Err(Error::invalid(format!("cannot unpack {bits}-bit codes")));
    }
    let needed = (count * bits as usize).div_ceil(8);
    if bytes.len() < needed {
        return Err(Error::invalid(format!(
            "need {needed} bytes for {count} codes, got {}",
            bytes.len()
        )));
    }
    let mut pos = 0usize;
    let shift = 64 - bits;
    let codes = (0..count)
        .map(|_| {
            let mut word = 0u64;
            let mut filled = 0usize;
            while filled < bits as usize {
                let byte = pos / 8;
                let offset = pos % 8;
                let n = (bits as usize - filled).min(8 - offset);
                let chunk = (u64::from(bytes[byte]) >> offset) & ((1 << n) - 1);
                word |= chunk << filled;
                filled += n;
                pos += n;
            }
            ((word << shift) as i64) >> shift
        })
        .collect();
    Ok(codes)
}
