use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::accounting::comm_cost;
use super::client::{client_update, ClientProfile, ClientRngs, ClientUpdate};
use super::config::{DataSource, ExperimentConfig, PartitionScheme};
use crate::data::{
    dirichlet_partition, idx, iid_partition, load_idx, power_law_two_class_partition, synthetic_blobs, LabeledDataset,
    Partition,
};
use crate::error::{Error, Result};
use crate::math::{init_params, predict, ModelSpec, ParamSet};
use crate::quant::{dequantize_params, quantize_params};
use crate::rng::{stream, Purpose};

/// Metrics for one communication round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub t: u64,
    pub downlink_bits: u64,
    pub uplink_bits: u64,
    /// Mean upload bit-length over the selected clients.
    pub mean_bits: f64,
    pub test_acc: Option<f64>,
    pub train_acc: Option<f64>,
    pub selected: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServerState {
    pub round: u64,
    pub params: ParamSet,
    pub uplink_bits: u64,
    pub downlink_bits: u64,
}

/// `P` distinct client ids drawn uniformly, sorted ascending.
pub fn select_clients<R: Rng + ?Sized>(num_clients: usize, per_round: usize, rng: &mut R) -> Result<Vec<usize>> {
    if per_round == 0 || per_round > num_clients {
        return Err(Error::invalid(format!(
            "cannot select {per_round} of {num_clients} clients"
        )));
    }
    let mut ids = sample(rng, num_clients, per_round).into_vec();
    ids.sort_unstable();
    Ok(ids)
}

/// Dataset-size weighted average of the dequantized updates.
///
/// Updates are reduced in client-id order, so the result does not depend on
/// the order they arrive in.
pub fn aggregate(updates: &[ClientUpdate]) -> Result<ParamSet> {
    if updates.is_empty() {
        return Err(Error::Protocol("no client updates to aggregate".into()));
    }
    let mut ordered: Vec<&ClientUpdate> = updates.iter().collect();
    ordered.sort_by_key(|u| u.client_id);
    let total: u64 = ordered.iter().map(|u| u.num_samples).sum();
    if total == 0 {
        return Err(Error::Protocol("client updates carry no samples".into()));
    }
    let mut acc: Option<ParamSet> = None;
    for u in ordered {
        let params = dequantize_params(&u.params)?;
        let w = u.num_samples as f64 / total as f64;
        match acc.as_mut() {
            None => {
                let mut first = params.zeros_like();
                first.axpy_in_place(w, &params)?;
                acc = Some(first);
            }
            Some(a) => a
                .axpy_in_place(w, &params)
                .map_err(|e| Error::Protocol(format!("client {}: {e}", u.client_id)))?,
        }
    }
    Ok(acc.expect("at least one update"))
}

/// Fraction of samples whose argmax prediction matches the label.
pub fn evaluate(spec: &ModelSpec, params: &ParamSet, data: &LabeledDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("cannot evaluate on an empty dataset"));
    }
    let preds = predict(spec, params, data.rows())?;
    let correct = preds.iter().zip(data.labels()).filter(|(p, y)| p == y).count();
    Ok(correct as f64 / data.len() as f64)
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

/// Load or generate the train/test sets named by the config.
pub fn load_data(cfg: &ExperimentConfig) -> Result<(LabeledDataset, LabeledDataset)> {
    match &cfg.data {
        DataSource::Synthetic {
            n_per_class,
            test_per_class,
            spread,
        } => {
            let (k, d) = (cfg.model.num_classes, cfg.model.input_dim);
            let train = synthetic_blobs(k, d, *n_per_class, *spread, &mut stream(cfg.seed, Purpose::Data, 0, 0))?;
            let test = synthetic_blobs(
                k,
                d,
                *test_per_class,
                *spread,
                &mut stream(cfg.seed, Purpose::Data, 1, 0),
            )?;
            Ok((train, test))
        }
        DataSource::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
        } => {
            let k = cfg.model.num_classes;
            let train = idx::with_num_classes(load_idx(train_images, train_labels)?, k)?;
            let test = idx::with_num_classes(load_idx(test_images, test_labels)?, k)?;
            Ok((train, test))
        }
    }
}

/// A federated run in progress.
pub struct Simulation {
    cfg: ExperimentConfig,
    train: LabeledDataset,
    test: LabeledDataset,
    clients: Vec<ClientProfile>,
    state: ServerState,
}

impl Simulation {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let (train, test) = load_data(&cfg)?;
        Self::with_data(cfg, train, test)
    }

    pub fn with_data(cfg: ExperimentConfig, train: LabeledDataset, test: LabeledDataset) -> Result<Self> {
        cfg.validate()?;
        for (name, ds) in [("train", &train), ("test", &test)] {
            if ds.input_dim() != cfg.model.input_dim || ds.num_classes() != cfg.model.num_classes {
                return Err(Error::Config(format!(
                    "{name} data has dim {} and {} classes, model expects {} and {}",
                    ds.input_dim(),
                    ds.num_classes(),
                    cfg.model.input_dim,
                    cfg.model.num_classes
                )));
            }
        }
        if test.is_empty() {
            return Err(Error::Config("test set is empty".into()));
        }
        let partition = partition_for(&cfg, &train)?;
        partition
            .validate(train.len())
            .map_err(|e| Error::Config(format!("partition: {e}")))?;
        let clients = partition
            .assignments
            .into_iter()
            .enumerate()
            .map(|(id, idx)| ClientProfile::new(id, idx, &train))
            .collect::<Result<Vec<_>>>()?;
        let params = init_params(&cfg.model, &mut stream(cfg.seed, Purpose::Init, 0, 0))?;
        Ok(Self {
            cfg,
            train,
            test,
            clients,
            state: ServerState {
                round: 0,
                params,
                uplink_bits: 0,
                downlink_bits: 0,
            },
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ServerState {
        &self.state
    }

    pub fn global_params(&self) -> &ParamSet {
        &self.state.params
    }

    pub fn clients(&self) -> &[ClientProfile] {
        &self.clients
    }

    pub fn train_data(&self) -> &LabeledDataset {
        &self.train
    }

    pub fn test_data(&self) -> &LabeledDataset {
        &self.test
    }

    pub fn is_finished(&self) -> bool {
        self.state.round >= self.cfg.rounds
    }

    /// Run one round and return its record.
    pub fn run_round(&mut self) -> Result<RoundRecord> {
        if self.is_finished() {
            return Err(Error::Protocol(format!("all {} rounds already run", self.cfg.rounds)));
        }
        let cfg = &self.cfg;
        let t = self.state.round;
        let seed = cfg.seed;

        let selected = select_clients(
            cfg.num_clients,
            cfg.clients_per_round,
            &mut stream(seed, Purpose::Selection, t, 0),
        )?;
        let server_bits = cfg.schedule_config().server_bits(t)?;
        let broadcast = quantize_params(
            &self.state.params,
            server_bits,
            &mut stream(seed, Purpose::ServerRounding, t, 0),
        )?;
        let downlink = selected.len() as u64 * comm_cost(&broadcast);
        let n_max = selected
            .iter()
            .map(|&c| self.clients[c].num_samples())
            .max()
            .unwrap_or(0);

        let work = |&c: &usize| -> Result<ClientUpdate> {
            let mut rngs = ClientRngs {
                rounding: stream(seed, Purpose::ClientRounding, t, c as u64),
                noise: stream(seed, Purpose::ClientNoise, t, c as u64),
            };
            client_update(&broadcast, n_max, cfg, &self.clients[c], &self.train, t, &mut rngs)
        };
        let updates: Vec<ClientUpdate> = if cfg.parallel {
            selected.par_iter().map(work).collect::<Result<_>>()?
        } else {
            selected.iter().map(work).collect::<Result<_>>()?
        };

        let uplink: u64 = updates.iter().map(|u| comm_cost(&u.params)).sum();
        let mean_bits = updates.iter().map(|u| f64::from(u.bits)).sum::<f64>() / updates.len() as f64;
        let next = aggregate(&updates)?;

        self.state.params = next;
        self.state.round += 1;
        self.state.downlink_bits += downlink;
        self.state.uplink_bits += uplink;

        let done = self.state.round;
        let (test_acc, train_acc) = if done.is_multiple_of(self.cfg.eval_every) || done == self.cfg.rounds {
            (
                Some(round6(evaluate(&self.cfg.model, &self.state.params, &self.test)?)),
                Some(round6(evaluate(&self.cfg.model, &self.state.params, &self.train)?)),
            )
        } else {
            (None, None)
        };
        Ok(RoundRecord {
            t,
            downlink_bits: downlink,
            uplink_bits: uplink,
            mean_bits: round6(mean_bits),
            test_acc,
            train_acc,
            selected,
        })
    }

    /// Run all remaining rounds.
    pub fn run(&mut self) -> Result<Vec<RoundRecord>> {
        let mut records = Vec::with_capacity((self.cfg.rounds - self.state.round) as usize);
        while !self.is_finished() {
            records.push(self.run_round()?);
        }
        Ok(records)
    }
}

fn partition_for(cfg: &ExperimentConfig, train: &LabeledDataset) -> Result<Partition> {
    let mut rng = stream(cfg.seed, Purpose::Partition, 0, 0);
    let labels = train.labels();
    let n = cfg.num_clients;
    match cfg.partition {
        PartitionScheme::Dirichlet { alpha } => dirichlet_partition(labels, n, alpha, &mut rng),
        PartitionScheme::PowerLaw { exponent } => power_law_two_class_partition(labels, n, exponent, &mut rng),
        PartitionScheme::Iid => iid_partition(labels, n, &mut rng),
    }
}

/// Build, run and return every round's record.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RoundRecord>> {
    Simulation::new(cfg.clone())?.run()
}

/// `(best test accuracy, its round)`, first occurrence on ties.
pub fn best_round(records: &[RoundRecord]) -> Option<(f64, u64)> {
    records
        .iter()
        .filter_map(|r| r.test_acc.map(|a| (a, r.t)))
        .fold(None, |best, (a, t)| match best {
            Some((b, _)) if b >= a => best,
            _ => Some((a, t)),
        })
}
