//! Dataset aggregation with a decaying expert mixture.

use rayon::prelude::*;

use super::{init_policy, train, Dataset, MlpPolicy, TrainConfig, LABEL_DIM};
use crate::error::{Error, Result};
use crate::harness::{run_episode, sample_episode_spec, Actor, Record, RunConfig, Scene};
use crate::perception::EXTRA_FEATURES;
use crate::rng;

/// Episodes flown in parallel before checking the record budget.
const CHUNK: usize = 16;
/// Give up on a round after this many episodes per requested record.
const EPISODES_PER_RECORD: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct DaggerConfig {
    pub rounds: usize,
    /// Records gathered per round.
    pub per_round: usize,
    pub alpha0: f64,
    pub decay: f64,
    pub seed: u64,
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for DaggerConfig {
    fn default() -> Self {
        Self {
            rounds: 4,
            per_round: 2000,
            alpha0: 1.0,
            decay: 0.8,
            seed: 0,
            hidden: vec![256, 128],
            train: TrainConfig::default(),
        }
    }
}

impl DaggerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0
            || self.per_round == 0
            || !(0.0..=1.0).contains(&self.alpha0)
            || !(0.0..=1.0).contains(&self.decay)
        {
            return Err(Error::InvalidConfig(format!(
                "bad aggregation config: rounds {}, per_round {}, alpha0 {}, decay {}",
                self.rounds, self.per_round, self.alpha0, self.decay
            )));
        }
        self.train.validate()
    }
}

/// Expert probability in round `i`.
pub fn alpha(cfg: &DaggerConfig, i: usize) -> f64 {
    cfg.alpha0 * cfg.decay.powi(i as i32)
}

/// Fly episodes with `actor` until `count` expert-labeled records exist.
/// Episode `j` of round `round` uses seed `seed ^ (round << 32 | j)` and
/// scene `j % scenes.len()`.
pub fn dagger_collect(
    actor: &Actor,
    scenes: &[Scene],
    count: usize,
    round: usize,
    seed: u64,
    cfg: &RunConfig,
) -> Result<Dataset> {
    if scenes.is_empty() {
        return Err(Error::InvalidConfig("no scenes to collect in".into()));
    }
    let obs_dim = cfg.expert.camera.pixels() + EXTRA_FEATURES;
    let mut data = Dataset::new(obs_dim);
    let limit = count.saturating_mul(EPISODES_PER_RECORD).max(CHUNK);
    let mut next = 0;
    while data.len() < count && next < limit {
        let batch: Vec<Result<Vec<Record>>> = (next..next + CHUNK)
            .into_par_iter()
            .map(|j| {
                let s = seed ^ ((round as u64) << 32 | j as u64);
                let k = j % scenes.len();
                let mut r = rng::stream(s);
                let (spec, pot) = sample_episode_spec(&scenes[k], k, s, cfg.sim.timeout, &mut r)?;
                let mut recs = Vec::new();
                run_episode(actor, &scenes[k], &spec, &pot, cfg, &mut r, Some(&mut recs))?;
                Ok(recs)
            })
            .collect();
        for recs in batch {
            for (o, l) in recs? {
                if data.len() == count {
                    break;
                }
                data.push(&o, l)?;
            }
        }
        next += CHUNK;
    }
    if data.len() < count {
        log::warn!("round {round}: only {} of {count} records after {next} episodes", data.len());
    }
    Ok(data)
}

#[derive(Clone, Debug)]
pub struct DaggerOutcome {
    /// Policy after each round.
    pub policies: Vec<MlpPolicy>,
    pub dataset: Dataset,
    pub alphas: Vec<f64>,
    /// Per-round epoch loss histories.
    pub losses: Vec<Vec<f64>>,
}

/// Aggregate expert labels over `cfg.rounds` rounds, warm-starting the
/// policy each round. Normalization is fit once, on the first round's data.
pub fn dagger(scenes: &[Scene], cfg: &DaggerConfig, run: &RunConfig) -> Result<DaggerOutcome> {
    cfg.validate()?;
    run.validate()?;
    let obs_dim = run.expert.camera.pixels() + EXTRA_FEATURES;
    let mut dims = vec![obs_dim];
    dims.extend(&cfg.hidden);
    dims.push(LABEL_DIM);
    let mut policy = init_policy(cfg.seed, &dims)?;
    let mut dataset = Dataset::new(obs_dim);
    let mut out = DaggerOutcome {
        policies: Vec::new(),
        dataset: Dataset::new(obs_dim),
        alphas: Vec::new(),
        losses: Vec::new(),
    };
    for i in 0..cfg.rounds {
        let a = alpha(cfg, i);
        let actor = Actor::Mixed {
            policy: &policy,
            alpha: a,
        };
        let fresh = dagger_collect(&actor, scenes, cfg.per_round, i, cfg.seed, run)?;
        dataset.extend(&fresh)?;
        if dataset.is_empty() {
            return Err(Error::InvalidConfig("aggregation gathered no records".into()));
        }
        if i == 0 {
            policy.fit_normalization(&dataset)?;
        }
        let tc = TrainConfig {
            seed: cfg.train.seed ^ i as u64,
            ..cfg.train
        };
        let (next, hist) = train(&policy, &dataset, &tc)?;
        log::info!("round {i}: alpha {a}, {} records, loss {:?}", dataset.len(), hist.last());
        policy = next;
        out.policies.push(policy.clone());
        out.alphas.push(a);
        out.losses.push(hist);
    }
    out.dataset = dataset;
    Ok(out)
}
