//! Splitting sample indices across clients.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Gamma};

use crate::error::{Error, Result};

/// Per-client sample index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub assignments: Vec<Vec<usize>>,
}

impl Partition {
    pub fn num_clients(&self) -> usize {
        self.assignments.len()
    }

    pub fn client(&self, i: usize) -> &[usize] {
        &self.assignments[i]
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.assignments.iter().map(Vec::len).collect()
    }

    /// Pairwise disjoint, in range, no client empty.
    pub fn validate(&self, num_samples: usize) -> Result<()> {
        let mut seen = vec![false; num_samples];
        for (c, idx) in self.assignments.iter().enumerate() {
            if idx.is_empty() {
                return Err(Error::invalid(format!("client {c} has no samples")));
            }
            for &i in idx {
                if i >= num_samples {
                    return Err(Error::invalid(format!("client {c}: index {i} out of range")));
                }
                if std::mem::replace(&mut seen[i], true) {
                    return Err(Error::invalid(format!("index {i} assigned twice")));
                }
            }
        }
        Ok(())
    }
}

fn indices_by_class(labels: &[usize]) -> Vec<Vec<usize>> {
    let k = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); k];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    by_class
}

fn check_clients(labels: &[usize], num_clients: usize) -> Result<()> {
    if num_clients == 0 {
        return Err(Error::invalid("need at least one client"));
    }
    if labels.len() < num_clients {
        return Err(Error::invalid(format!(
            "{} samples cannot give each of {num_clients} clients one sample",
            labels.len()
        )));
    }
    Ok(())
}

fn finish<R: Rng + ?Sized>(mut assignments: Vec<Vec<usize>>, rng: &mut R) -> Partition {
    for a in &mut assignments {
        a.shuffle(rng);
    }
    Partition { assignments }
}

/// Shuffle and deal round-robin.
pub fn iid_partition<R: Rng + ?Sized>(labels: &[usize], num_clients: usize, rng: &mut R) -> Result<Partition> {
    check_clients(labels, num_clients)?;
    let mut all: Vec<usize> = (0..labels.len()).collect();
    all.shuffle(rng);
    let mut assignments = vec![Vec::new(); num_clients];
    for (j, i) in all.into_iter().enumerate() {
        assignments[j % num_clients].push(i);
    }
    Ok(finish(assignments, rng))
}

/// Label-skewed split: every class is divided among clients by proportions
/// drawn from `Dirichlet(alpha, ..., alpha)`.
///
/// Clients left empty take one sample from the currently largest client.
pub fn dirichlet_partition<R: Rng + ?Sized>(
    labels: &[usize],
    num_clients: usize,
    alpha: f64,
    rng: &mut R,
) -> Result<Partition> {
    check_clients(labels, num_clients)?;
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!("Dirichlet alpha must be > 0, got {alpha}")));
    }
    let gamma = Gamma::new(alpha, 1.0).map_err(|e| Error::invalid(format!("Dirichlet alpha: {e}")))?;
    let mut assignments = vec![Vec::new(); num_clients];

    for mut pool in indices_by_class(labels) {
        if pool.is_empty() {
            continue;
        }
        pool.shuffle(rng);
        let draws: Vec<f64> = (0..num_clients).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        let props: Vec<f64> = if total > 0.0 && total.is_finite() {
            draws.iter().map(|d| d / total).collect()
        } else {
            vec![1.0 / num_clients as f64; num_clients]
        };
        let n = pool.len();
        let mut start = 0usize;
        let mut cumulative = 0.0;
        for (c, p) in props.iter().enumerate() {
            cumulative += p;
            let end = if c + 1 == num_clients {
                n
            } else {
                ((cumulative * n as f64).round() as usize).clamp(start, n)
            };
            assignments[c].extend_from_slice(&pool[start..end]);
            start = end;
        }
    }

    while let Some(empty) = assignments.iter().position(Vec::is_empty) {
        let donor = (0..num_clients)
            .max_by(|&a, &b| assignments[a].len().cmp(&assignments[b].len()).then(b.cmp(&a)))
            .expect("at least one client");
        let moved = assignments[donor].pop().expect("donor is the largest client");
        assignments[empty].push(moved);
    }
    Ok(finish(assignments, rng))
}

/// Two classes per client, client sizes following `rank^-exponent`.
///
/// Client `i` (rank `i + 1`) takes the `i`-th class pair, cycling through the
/// pairs of present classes in lexicographic order, and draws half its quota
/// (rounded up) from the first class of the pair. Quotas are shrunk uniformly
/// until every class pool can cover them; each client gets at least 2 samples.
pub fn power_law_two_class_partition<R: Rng + ?Sized>(
    labels: &[usize],
    num_clients: usize,
    exponent: f64,
    rng: &mut R,
) -> Result<Partition> {
    check_clients(labels, num_clients)?;
    if !(exponent >= 0.0 && exponent.is_finite()) {
        return Err(Error::invalid(format!(
            "power-law exponent must be >= 0, got {exponent}"
        )));
    }
    let mut pools = indices_by_class(labels);
    let present: Vec<usize> = (0..pools.len()).filter(|&k| !pools[k].is_empty()).collect();
    if present.len() < 2 {
        return Err(Error::invalid("two-class partition needs at least 2 classes present"));
    }
    let pairs: Vec<(usize, usize)> = present
        .iter()
        .enumerate()
        .flat_map(|(i, &a)| present[i + 1..].iter().map(move |&b| (a, b)))
        .collect();
    let client_pair = |c: usize| pairs[c % pairs.len()];

    let weights: Vec<f64> = (1..=num_clients).map(|r| (r as f64).powf(-exponent)).collect();
    let weight_sum: f64 = weights.iter().sum();
    let total = labels.len() as f64;
    let raw: Vec<f64> = weights.iter().map(|w| w / weight_sum * total).collect();

    let demand_of = |sizes: &[usize]| {
        let mut demand = vec![0usize; pools.len()];
        for (c, &s) in sizes.iter().enumerate() {
            let (a, b) = client_pair(c);
            demand[a] += s.div_ceil(2);
            demand[b] += s / 2;
        }
        demand
    };

    let mut shrink = 1.0f64;
    let sizes = loop {
        let sizes: Vec<usize> = raw.iter().map(|r| ((shrink * r).floor() as usize).max(2)).collect();
        let demand = demand_of(&sizes);
        let worst = demand
            .iter()
            .zip(&pools)
            .filter(|(d, _)| **d > 0)
            .map(|(&d, p)| p.len() as f64 / d as f64)
            .fold(f64::INFINITY, f64::min);
        if worst >= 1.0 {
            break sizes;
        }
        if sizes.iter().all(|&s| s == 2) {
            return Err(Error::invalid(format!(
                "not enough samples to give {num_clients} clients one sample of each of two classes"
            )));
        }
        shrink *= worst.min(0.999);
    };

    for pool in &mut pools {
        pool.shuffle(rng);
    }
    let mut cursor = vec![0usize; pools.len()];
    let mut take = |class: usize, n: usize, out: &mut Vec<usize>| {
        out.extend_from_slice(&pools[class][cursor[class]..cursor[class] + n]);
        cursor[class] += n;
    };
    let assignments = sizes
        .iter()
        .enumerate()
        .map(|(c, &s)| {
            let (a, b) = client_pair(c);
            let mut idx = Vec::with_capacity(s);
            take(a, s.div_ceil(2), &mut idx);
            take(b, s / 2, &mut idx);
            idx
        })
        .collect();
    Ok(finish(assignments, rng))
}
