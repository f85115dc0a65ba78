//! Synthetic mobility world generation.
//!
//! Each user draws a home cell from a configurable population
//! distribution, a few secondary cells, and then emits per-period visit
//! counts from independent Poisson rates: high at home, moderate at
//! secondaries, near zero elsewhere. The generator returns the true home
//! distribution so estimation quality can be scored.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::location::LocationSet;
use crate::mobility::{Period, TraceEvent, TraceSet};
use crate::privacy::PriorDistribution;

/// Shape of the home-location distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PiSpec {
    Uniform,
    /// `w_i = 1 / (i+1)^exponent` over location indices.
    Zipf { exponent: f64 },
}

impl PiSpec {
    pub fn build(&self, n: usize) -> Result<PriorDistribution> {
        match *self {
            PiSpec::Uniform => Ok(PriorDistribution::uniform(n)),
            PiSpec::Zipf { exponent } => {
                if !(exponent > 0.0 && exponent.is_finite()) {
                    return Err(Error::invalid("zipf exponent must be positive"));
                }
                let w: Vec<f64> =
                    (0..n).map(|i| 1.0 / ((i + 1) as f64).powf(exponent)).collect();
                PriorDistribution::from_weights(&w)
            }
        }
    }
}

/// Parameters of the synthetic world.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldConfig {
    pub rows: usize,
    pub cols: usize,
    pub cell_km: f64,
    pub n_users: usize,
    pub pi_true: PiSpec,
    /// Per-period visit rate at the home cell.
    pub lambda_home: f64,
    /// Per-period visit rate everywhere else.
    pub lambda_bg: f64,
    /// Number of secondary cells per user.
    pub n_secondary: usize,
    /// Secondary rates are drawn uniformly from this range.
    pub lambda_secondary: (f64, f64),
    pub train_periods: usize,
    pub test_periods: usize,
    pub period: Period,
    pub seed: u64,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            rows: 5,
            cols: 5,
            cell_km: 1.0,
            n_users: 600,
            pi_true: PiSpec::Zipf { exponent: 0.75 },
            lambda_home: 2.0,
            lambda_bg: 0.01,
            n_secondary: 2,
            lambda_secondary: (0.3, 1.5),
            train_periods: 40,
            test_periods: 1,
            period: Period::Daily,
            seed: 7,
        }
    }
}

impl WorldConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 {
            return Err(Error::invalid("world needs at least one user"));
        }
        if self.train_periods == 0 || self.test_periods == 0 {
            return Err(Error::invalid("train and test periods must be positive"));
        }
        if !(self.lambda_bg >= 0.0 && self.lambda_home > self.lambda_bg) {
            return Err(Error::invalid("need lambda_home > lambda_bg >= 0"));
        }
        let (lo, hi) = self.lambda_secondary;
        if self.n_secondary > 0 && !(lo >= self.lambda_bg && lo <= hi && hi <= self.lambda_home) {
            return Err(Error::invalid(
                "secondary rate range must sit between lambda_bg and lambda_home",
            ));
        }
        if self.n_secondary + 1 > self.rows * self.cols {
            return Err(Error::invalid("more per-user cells than grid cells"));
        }
        Ok(())
    }

    pub fn user_id(i: usize) -> String {
        format!("u{i:05}")
    }
}

/// Knuth's product method; splits large rates to keep the loop short.
pub fn sample_poisson(lambda: f64, rng: &mut (impl Rng + ?Sized)) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    if lambda > 30.0 {
        return sample_poisson(lambda / 2.0, rng) + sample_poisson(lambda - lambda / 2.0, rng);
    }
    let limit = (-lambda).exp();
    let mut k = 0u32;
    let mut p = 1.0f64;
    loop {
        p *= rng.random::<f64>();
        if p <= limit {
            return k;
        }
        k += 1;
    }
}

fn sample_categorical(probs: &[f64], rng: &mut (impl Rng + ?Sized)) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Generates the grid, the trace log and the true home distribution.
pub fn generate_world(config: &WorldConfig) -> Result<(LocationSet, TraceSet, PriorDistribution)> {
    config.validate()?;
    let ls = LocationSet::build_grid(config.rows, config.cols, config.cell_km)?;
    let n = ls.len();
    let pi_true = config.pi_true.build(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let period_len = config.period.len_secs();
    // Weekly periods are Monday-aligned; epoch day 4 is the first Monday.
    let t0: i64 = match config.period {
        Period::Daily => 0,
        Period::Weekly => 4 * 86_400,
    };
    let total_periods = config.train_periods + config.test_periods;
    let split = t0 + config.train_periods as i64 * period_len;
    let end = t0 + total_periods as i64 * period_len;

    let mut events: Vec<TraceEvent> = Vec::new();
    for ui in 0..config.n_users {
        let user = WorldConfig::user_id(ui);
        let home = sample_categorical(pi_true.as_slice(), &mut rng);
        let mut rates = vec![config.lambda_bg; n];
        rates[home] = config.lambda_home;
        let mut picked = vec![home];
        for _ in 0..config.n_secondary {
            let mut cell = sample_categorical(pi_true.as_slice(), &mut rng);
            let mut tries = 0;
            while picked.contains(&cell) && tries < 64 {
                cell = sample_categorical(pi_true.as_slice(), &mut rng);
                tries += 1;
            }
            if picked.contains(&cell) {
                // Skewed distributions can exhaust retries; scan for a free cell.
                cell = (0..n).find(|c| !picked.contains(c)).expect("free cell");
            }
            picked.push(cell);
            let (lo, hi) = config.lambda_secondary;
            rates[cell] = lo + (hi - lo) * rng.random::<f64>();
        }
        for p in 0..total_periods {
            let base = t0 + p as i64 * period_len;
            for (loc, &rate) in rates.iter().enumerate() {
                let count = sample_poisson(rate, &mut rng);
                for _ in 0..count {
                    events.push(TraceEvent {
                        user: user.clone(),
                        time: base + rng.random_range(0..period_len),
                        location: crate::location::LocationId(loc),
                    });
                }
            }
        }
    }
    let traces = TraceSet::with_window(events, config.period, split, t0, end)?;
    Ok((ls, traces, pi_true))
}
