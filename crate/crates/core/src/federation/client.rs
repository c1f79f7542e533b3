use rand::Rng;

use super::config::ExperimentConfig;
use crate::data::LabeledDataset;
use crate::error::{Error, Result};
use crate::math::{clip_gradient_l1, loss_and_grad, sgd_step, ModelSpec, ParamSet, Sample};
use crate::privacy::{
    laplace_noise, lipschitz_estimate, noise_scale, perturb, sensitivity, BatchTrace, RoundScaling, SensitivityInputs,
};
use crate::quant::{dequantize_params, quantize_params, QuantizedParamSet};
use crate::schedule::{client_importance, schedule_bits, ImportanceInputs};

/// A client's slice of the training set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientProfile {
    pub id: usize,
    /// Sample indices, in the order batches are drawn.
    pub indices: Vec<usize>,
    pub label_counts: Vec<u64>,
}

impl ClientProfile {
    pub fn new(id: usize, indices: Vec<usize>, data: &LabeledDataset) -> Result<Self> {
        let label_counts = data.subset_histogram(&indices)?;
        Ok(Self {
            id,
            indices,
            label_counts,
        })
    }

    pub fn num_samples(&self) -> u64 {
        self.indices.len() as u64
    }
}

/// What a client sends back.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdate {
    pub client_id: usize,
    pub params: QuantizedParamSet,
    pub num_samples: u64,
    pub bits: u32,
    /// Importance score used by the dynamic schedule (1 otherwise).
    pub importance: f64,
    /// Laplace scale applied, 0 when DP is off.
    pub noise_scale: f64,
}

impl ClientUpdate {
    pub fn scales(&self) -> Vec<f64> {
        self.params.scales()
    }
}

/// Per-client random streams for one round.
pub struct ClientRngs<R> {
    pub rounding: R,
    pub noise: R,
}

/// Local training hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct LocalTraining {
    pub epochs: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// L1 clipping bound; `None` trains with raw gradients.
    pub clip: Option<f64>,
    pub record_trace: bool,
}

/// Mini-batch SGD over `indices` in order, final short batch kept.
pub fn local_train(
    spec: &ModelSpec,
    start: &ParamSet,
    data: &LabeledDataset,
    indices: &[usize],
    opts: &LocalTraining,
) -> Result<(ParamSet, BatchTrace)> {
    if indices.is_empty() {
        return Err(Error::Config("client has no training samples".into()));
    }
    let mut params = start.clone();
    let mut trace = BatchTrace::new();
    let mut batch: Vec<Sample<'_>> = Vec::with_capacity(opts.batch_size);
    for _ in 0..opts.epochs {
        if opts.record_trace {
            trace.start_epoch();
        }
        for chunk in indices.chunks(opts.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data.sample(i)));
            let (_, grad) = loss_and_grad(spec, &params, &batch)?;
            let step = match opts.clip {
                Some(xi) => clip_gradient_l1(&grad, xi)?,
                None => grad.clone(),
            };
            let next = sgd_step(&params, &step, opts.learning_rate)?;
            if opts.record_trace {
                trace.record(grad, std::mem::replace(&mut params, next));
            } else {
                params = next;
            }
        }
    }
    Ok((params, trace))
}

/// One client's round: dequantize the broadcast, train locally, add Laplace
/// noise (when DP is on), pick a bit-length and quantize for upload.
#[allow(clippy::too_many_arguments)]
pub fn client_update<R: Rng>(
    global: &QuantizedParamSet,
    n_max: u64,
    cfg: &ExperimentConfig,
    client: &ClientProfile,
    data: &LabeledDataset,
    t: u64,
    rngs: &mut ClientRngs<R>,
) -> Result<ClientUpdate> {
    let start = dequantize_params(global)?;
    let opts = LocalTraining {
        epochs: cfg.local_epochs,
        batch_size: cfg.batch_size,
        learning_rate: cfg.learning_rate,
        clip: cfg.dp.map(|dp| dp.xi),
        record_trace: cfg.dp.is_some(),
    };
    let (mut params, trace) = local_train(&cfg.model, &start, data, &client.indices, &opts)?;

    let mut scale = 0.0;
    if let Some(dp) = &cfg.dp {
        let lambda = lipschitz_estimate(&trace)?;
        let xi_sens = sensitivity(&SensitivityInputs {
            lambda,
            eta: cfg.learning_rate,
            local_epochs: cfg.local_epochs,
            n_i: client.num_samples(),
            xi: dp.xi,
        })?;
        let rs = RoundScaling {
            clients_per_round: cfg.clients_per_round as u64,
            total_rounds: cfg.rounds,
            num_clients: cfg.num_clients as u64,
            local_epochs: cfg.local_epochs,
        };
        scale = noise_scale(xi_sens, dp, &rs)?;
        let noise = laplace_noise(scale, &params, &mut rngs.noise)?;
        params = perturb(&params, &noise)?;
    }

    let inputs = ImportanceInputs {
        label_counts: client.label_counts.clone(),
        dataset_size: client.num_samples(),
        n_max,
        num_classes: cfg.model.num_classes,
    };
    let schedule = cfg.schedule_config();
    let importance = match schedule.mode {
        crate::schedule::ScheduleMode::Dynamic => client_importance(&inputs, schedule.lambda_h)?,
        _ => 1.0,
    };
    let bits = schedule_bits(&schedule, t, Some(&inputs))?;
    let quantized = quantize_params(&params, bits, &mut rngs.rounding)?;
    Ok(ClientUpdate {
        client_id: client.id,
        params: quantized,
        num_samples: client.num_samples(),
        bits,
        importance,
        noise_scale: scale,
    })
}
