use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_MCS_DATES: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McsConfig {
    pub alpha: f64,
    pub bootstrap: usize,
    pub block_len: usize,
    pub seed: u64,
}

impl Default for McsConfig {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            bootstrap: 1000,
            block_len: 22,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum McsStatistic {
    #[serde(rename = "T_max")]
    TMax,
    #[serde(rename = "T_R")]
    TR,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsOutcome {
    pub statistic: McsStatistic,
    /// 1 is best; the first model eliminated gets the largest rank.
    pub ranks: Vec<usize>,
    /// MCS p-value per model (running maximum along the elimination sequence).
    pub p_values: Vec<f64>,
    pub survivors: Vec<bool>,
    pub elimination_order: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsResult {
    pub models: Vec<String>,
    pub t_max: McsOutcome,
    pub t_r: McsOutcome,
    /// At least one elimination step found every remaining loss column identical.
    pub degenerate: bool,
    pub config: McsConfig,
}

impl McsResult {
    pub fn outcome(&self, s: McsStatistic) -> &McsOutcome {
        match s {
            McsStatistic::TMax => &self.t_max,
            McsStatistic::TR => &self.t_r,
        }
    }
}

/// Moving-block resample of `0..n`; replicate `b` draws from its own ChaCha stream.
fn block_indices(n: usize, block: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b as u64 + 1);
    let l = block.clamp(1, n);
    let mut idx = Vec::with_capacity(n + l);
    while idx.len() < n {
        let s = rng.random_range(0..=n - l);
        idx.extend(s..s + l);
    }
    idx.truncate(n);
    idx
}

fn t_ratio(d: f64, se: f64) -> f64 {
    if se > 0.0 {
        d / se
    } else if d > 0.0 {
        f64::INFINITY
    } else if d < 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

fn centered(dstar: f64, d: f64, se: f64) -> f64 {
    if se > 0.0 {
        (dstar - d) / se
    } else {
        0.0
    }
}

struct Step {
    worst: usize,
    p_value: f64,
    degenerate: bool,
}

/// `means[i]` is model i's sample mean loss; `boot[b][i]` the replicate mean.
fn step(active: &[usize], means: &[f64], boot: &[Vec<f64>], stat: McsStatistic) -> Step {
    let m = active.len();
    let first = active[0];
    if active.iter().all(|i| means[*i] == means[first]) && boot.iter().all(|r| active.iter().all(|i| r[*i] == r[first])) {
        return Step {
            worst: first,
            p_value: 1.0,
            degenerate: true,
        };
    }
    let nb = boot.len() as f64;
    match stat {
        McsStatistic::TMax => {
            let avg = active.iter().map(|i| means[*i]).sum::<f64>() / m as f64;
            let d: Vec<f64> = active.iter().map(|i| means[*i] - avg).collect();
            let dstar: Vec<Vec<f64>> = boot
                .iter()
                .map(|row| {
                    let a = active.iter().map(|i| row[*i]).sum::<f64>() / m as f64;
                    active.iter().map(|i| row[*i] - a).collect()
                })
                .collect();
            let se: Vec<f64> = (0..m)
                .map(|k| (dstar.iter().map(|r| (r[k] - d[k]).powi(2)).sum::<f64>() / nb).sqrt())
                .collect();
            let t: Vec<f64> = (0..m).map(|k| t_ratio(d[k], se[k])).collect();
            let (worst, tmax) = argmax(&t);
            let exceed = dstar
                .iter()
                .filter(|r| (0..m).map(|k| centered(r[k], d[k], se[k])).fold(f64::NEG_INFINITY, f64::max) >= tmax)
                .count();
            Step {
                worst: active[worst],
                p_value: exceed as f64 / nb,
                degenerate: false,
            }
        }
        McsStatistic::TR => {
            let mut tij = vec![vec![0.0; m]; m];
            let mut seij = vec![vec![0.0; m]; m];
            for a in 0..m {
                for b in 0..m {
                    if a == b {
                        continue;
                    }
                    let (i, j) = (active[a], active[b]);
                    let d = means[i] - means[j];
                    let se = (boot.iter().map(|r| (r[i] - r[j] - d).powi(2)).sum::<f64>() / nb).sqrt();
                    seij[a][b] = se;
                    tij[a][b] = t_ratio(d, se);
                }
            }
            let tr = tij.iter().flatten().map(|v| v.abs()).fold(0.0, f64::max);
            let row_max: Vec<f64> = (0..m)
                .map(|a| (0..m).filter(|b| *b != a).map(|b| tij[a][b]).fold(f64::NEG_INFINITY, f64::max))
                .collect();
            let (worst, _) = argmax(&row_max);
            let exceed = boot
                .iter()
                .filter(|r| {
                    let mut best = 0.0f64;
                    for a in 0..m {
                        for b in a + 1..m {
                            let (i, j) = (active[a], active[b]);
                            let d = means[i] - means[j];
                            best = best.max(centered(r[i] - r[j], d, seij[a][b]).abs());
                        }
                    }
                    best >= tr
                })
                .count();
            Step {
                worst: active[worst],
                p_value: exceed as f64 / nb,
                degenerate: false,
            }
        }
    }
}

/// First index of the maximum.
fn argmax(v: &[f64]) -> (usize, f64) {
    let mut best = 0;
    for i in 1..v.len() {
        if v[i] > v[best] {
            best = i;
        }
    }
    (best, v[best])
}

fn run_statistic(means: &[f64], boot: &[Vec<f64>], stat: McsStatistic, alpha: f64) -> (McsOutcome, bool) {
    let m = means.len();
    let mut active: Vec<usize> = (0..m).collect();
    let mut order = Vec::with_capacity(m);
    let mut p_running = 0.0f64;
    let mut p_values = vec![1.0; m];
    let mut degenerate = false;
    while active.len() > 1 {
        let s = step(&active, means, boot, stat);
        if s.degenerate {
            degenerate = true;
            // Remaining models are indistinguishable: keep index order, all share the same p-value.
            for i in &active {
                p_values[*i] = 1.0;
            }
            break;
        }
        p_running = p_running.max(s.p_value);
        p_values[s.worst] = p_running;
        order.push(s.worst);
        active.retain(|i| *i != s.worst);
    }
    let mut ranks = vec![0; m];
    for (k, i) in order.iter().enumerate() {
        ranks[*i] = m - k;
    }
    for (r, i) in active.iter().enumerate() {
        ranks[*i] = r + 1;
    }
    for i in active.iter().rev() {
        order.push(*i);
    }
    let survivors = p_values.iter().map(|p| *p >= alpha).collect();
    (
        McsOutcome {
            statistic: stat,
            ranks,
            p_values,
            survivors,
            elimination_order: order,
        },
        degenerate,
    )
}

/// Model Confidence Set on a loss matrix given as `losses[model][date]`.
pub fn mcs(losses: &[Vec<f64>], models: &[String], cfg: &McsConfig) -> Result<McsResult> {
    let m = losses.len();
    if m < 2 || models.len() != m {
        return Err(Error::invalid("MCS needs at least two named models"));
    }
    let n = losses[0].len();
    if losses.iter().any(|l| l.len() != n) {
        return Err(Error::Shape("loss columns differ in length".into()));
    }
    if n < MIN_MCS_DATES {
        return Err(Error::InsufficientData {
            what: "MCS dates".into(),
            needed: MIN_MCS_DATES,
            got: n,
        });
    }
    if losses.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("MCS losses must be finite"));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0) || cfg.bootstrap == 0 || cfg.block_len == 0 {
        return Err(Error::invalid("MCS needs alpha in (0, 1), bootstrap > 0, block_len > 0"));
    }
    let means: Vec<f64> = losses.iter().map(|l| l.iter().sum::<f64>() / n as f64).collect();
    let boot: Vec<Vec<f64>> = (0..cfg.bootstrap)
        .into_par_iter()
        .map(|b| {
            let idx = block_indices(n, cfg.block_len, cfg.seed, b);
            losses
                .iter()
                .map(|l| idx.iter().map(|t| l[*t]).sum::<f64>() / n as f64)
                .collect()
        })
        .collect();
    let (t_max, d1) = run_statistic(&means, &boot, McsStatistic::TMax, cfg.alpha);
    let (t_r, d2) = run_statistic(&means, &boot, McsStatistic::TR, cfg.alpha);
    if d1 || d2 {
        log::warn!("MCS: identical loss columns among remaining models");
    }
    Ok(McsResult {
        models: models.to_vec(),
        t_max,
        t_r,
        degenerate: d1 || d2,
        config: *cfg,
    })
}

/// Times each model survives across several MCS results (e.g. four losses x two statistics).
pub fn superior_set_counts(results: &[&McsResult]) -> Vec<(usize, usize)> {
    let m = results.first().map_or(0, |r| r.models.len());
    (0..m)
        .map(|i| {
            let s = results
                .iter()
                .map(|r| r.t_max.survivors[i] as usize + r.t_r.survivors[i] as usize)
                .sum();
            (s, 2 * results.len())
        })
        .collect()
}
