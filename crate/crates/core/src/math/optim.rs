use super::tensor::ParamSet;
use crate::error::{Error, Result};

/// Sum of absolute values over every element.
pub fn l1_norm(p: &ParamSet) -> f64 {
    p.iter_values().map(f64::abs).sum()
}

/// Scale `grad` by `min(1, xi / ||grad||_1)` so its L1 norm never exceeds `xi`.
pub fn clip_gradient_l1(grad: &ParamSet, xi: f64) -> Result<ParamSet> {
    if !(xi > 0.0 && xi.is_finite()) {
        return Err(Error::invalid(format!("clipping bound must be positive, got {xi}")));
    }
    let norm = l1_norm(grad);
    if norm <= xi {
        return Ok(grad.clone());
    }
    let factor = xi / norm;
    let clipped = grad.scale(factor);
    // Rounding can leave the result a few ulps above xi; shave it back.
    if l1_norm(&clipped) > xi {
        let mut f = factor;
        let mut out = clipped;
        while l1_norm(&out) > xi {
            f = f64::from_bits(f.to_bits() - 1);
            out = grad.scale(f);
        }
        return Ok(out);
    }
    Ok(clipped)
}

/// `params - eta * grad`.
pub fn sgd_step(params: &ParamSet, grad: &ParamSet, eta: f64) -> Result<ParamSet> {
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("learning rate must be positive, got {eta}")));
    }
    params.zip_with(grad, |p, g| p - eta * g)
}
