//! Laplace local differential privacy.
//!
//! Each client estimates a local Lipschitz constant from its training trace,
//! turns it into an L1 sensitivity for the round, scales that by
//! `T_i = P T / (N E)` and the privacy budget, and adds Laplace noise to its
//! trained parameters before quantizing them for upload.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{l1_norm, ParamSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DpConfig {
    pub epsilon: f64,
    /// L1 gradient clipping bound.
    pub xi: f64,
}

impl DpConfig {
    /// Local DP here is pure: delta is always 0.
    pub const DELTA: f64 = 0.0;

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::invalid(format!("epsilon must be > 0, got {}", self.epsilon)));
        }
        if !(self.xi > 0.0 && self.xi.is_finite()) {
            return Err(Error::invalid(format!("xi must be > 0, got {}", self.xi)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensitivityInputs {
    pub lambda: f64,
    pub eta: f64,
    pub local_epochs: u64,
    pub n_i: u64,
    pub xi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundScaling {
    pub clients_per_round: u64,
    pub total_rounds: u64,
    pub num_clients: u64,
    pub local_epochs: u64,
}

impl RoundScaling {
    /// `P T / (N E)`.
    pub fn factor(&self) -> f64 {
        (self.clients_per_round as f64 * self.total_rounds as f64)
            / (self.num_clients as f64 * self.local_epochs as f64)
    }
}

/// Per-batch `(gradient, parameters)` records, indexed `[epoch][batch]`.
#[derive(Debug, Clone, Default)]
pub struct BatchTrace {
    epochs: Vec<Vec<(ParamSet, ParamSet)>>,
}

impl BatchTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn start_epoch(&mut self) {
        self.epochs.push(Vec::new());
    }

    /// Record the gradient evaluated at `params` for the next batch of the current epoch.
    pub fn record(&mut self, grad: ParamSet, params: ParamSet) {
        if self.epochs.is_empty() {
            self.start_epoch();
        }
        self.epochs.last_mut().expect("epoch started").push((grad, params));
    }

    pub fn epochs(&self) -> &[Vec<(ParamSet, ParamSet)>] {
        &self.epochs
    }
}

/// Largest `||g - g'||_1 / ||theta - theta'||_1` over same-batch pairs of
/// consecutive epochs. Pairs with no parameter movement are skipped; returns 0
/// when nothing is left.
pub fn lipschitz_estimate(trace: &BatchTrace) -> Result<f64> {
    let mut best = 0.0f64;
    for pair in trace.epochs.windows(2) {
        for ((g0, p0), (g1, p1)) in pair[0].iter().zip(&pair[1]) {
            let denom = l1_norm(&p0.sub(p1)?);
            if denom == 0.0 {
                continue;
            }
            let ratio = l1_norm(&g0.sub(g1)?) / denom;
            if ratio.is_finite() {
                best = best.max(ratio);
            }
        }
    }
    Ok(best)
}

fn growth_reaches(base: f64, k: u64, target: f64) -> bool {
    let pow = if k <= i32::MAX as u64 {
        base.powi(k as i32)
    } else {
        base.powf(k as f64)
    };
    pow >= target
}

/// Smallest integer `E0 >= 0` with `(1 + lambda eta)^E0 >= 1 + n_i`.
///
/// Returns `u64::MAX` when `1 + lambda eta` rounds to 1 in `f64` and the
/// inequality can never be met.
pub fn compute_e0(lambda: f64, eta: f64, n_i: u64) -> Result<u64> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("E0 needs lambda > 0, got {lambda}")));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::invalid(format!("eta must be > 0, got {eta}")));
    }
    let base = 1.0 + lambda * eta;
    let target = 1.0 + n_i as f64;
    if base == 1.0 {
        return Ok(if n_i == 0 { 0 } else { u64::MAX });
    }
    // Start just below the logarithmic estimate and walk to the exact boundary.
    let guess = (target.ln() / (lambda * eta).ln_1p()).floor();
    let mut k = if guess.is_finite() && guess > 2.0 {
        (guess as u64).saturating_sub(2)
    } else {
        0
    };
    while k > 0 && growth_reaches(base, k - 1, target) {
        k -= 1;
    }
    while !growth_reaches(base, k, target) {
        k += 1;
    }
    Ok(k)
}

/// L1 sensitivity of one client's round output.
pub fn sensitivity(inp: &SensitivityInputs) -> Result<f64> {
    let SensitivityInputs {
        lambda,
        eta,
        local_epochs,
        n_i,
        xi,
    } = *inp;
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
    }
    if !(eta > 0.0 && xi > 0.0 && local_epochs >= 1 && n_i >= 1) {
        return Err(Error::invalid(format!("sensitivity inputs must be positive: {inp:?}")));
    }
    let e = local_epochs as f64;
    let n = n_i as f64;
    if lambda == 0.0 {
        return Ok(2.0 * xi * e * eta / n);
    }
    let e0 = compute_e0(lambda, eta, n_i)?;
    if local_epochs < e0 {
        // (1 + lambda eta)^E - 1 via expm1/ln1p, accurate as lambda -> 0
        let growth = (e * (lambda * eta).ln_1p()).exp_m1();
        Ok(2.0 * xi / (lambda * n) * growth)
    } else {
        Ok(2.0 * xi + 2.0 * eta * xi * (local_epochs - e0) as f64)
    }
}

/// Laplace scale `T_i * Xi / epsilon`.
pub fn noise_scale(sensitivity: f64, dp: &DpConfig, rs: &RoundScaling) -> Result<f64> {
    dp.validate()?;
    if !(sensitivity >= 0.0 && sensitivity.is_finite()) {
        return Err(Error::invalid(format!("sensitivity must be >= 0, got {sensitivity}")));
    }
    if rs.clients_per_round == 0 || rs.num_clients == 0 || rs.local_epochs == 0 || rs.total_rounds == 0 {
        return Err(Error::invalid(format!("round scaling terms must be positive: {rs:?}")));
    }
    Ok(rs.factor() * sensitivity / dp.epsilon)
}

/// One Laplace(0, scale) draw by inverse CDF.
pub fn sample_laplace<R: Rng + ?Sized>(scale: f64, rng: &mut R) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let u = loop {
        let u = rng.random::<f64>() - 0.5;
        if u.abs() < 0.5 {
            break u;
        }
    };
    -scale * u.signum() * (-2.0 * u.abs()).ln_1p()
}

/// I.i.d. Laplace noise shaped like `like`.
pub fn laplace_noise<R: Rng + ?Sized>(scale: f64, like: &ParamSet, rng: &mut R) -> Result<ParamSet> {
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(Error::invalid(format!("Laplace scale must be >= 0, got {scale}")));
    }
    let mut out = like.zeros_like();
    if scale > 0.0 {
        for (_, t) in out.entries_mut() {
            t.values_mut().iter_mut().for_each(|v| *v = sample_laplace(scale, rng));
        }
    }
    Ok(out)
}

/// `params + noise`.
pub fn perturb(params: &ParamSet, noise: &ParamSet) -> Result<ParamSet> {
    params.add(noise)
}
