//! Labeled trait datasets: CSV ingestion and a synthetic generator with the
//! structure of a sports-roster rating table (53 traits, per-position
//! weighted-sum ratings).

use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::active::{EvalSet, QueryPool};
use super::LearnError;

pub const ROSTER_TRAITS: usize = 53;
pub const ROSTER_POSITIONS: usize = 6;
pub const ROSTER_SAMPLES: usize = 500;

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub trait_names: Vec<String>,
    pub traits: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
}

/// Pool half of a split; labels stay with the caller and are revealed
/// through the labeling oracle.
#[derive(Debug, Clone)]
pub struct Split {
    pub pool: QueryPool,
    pub pool_labels: Vec<f64>,
    pub eval: EvalSet,
}

impl Dataset {
    pub fn dim(&self) -> usize {
        self.trait_names.len()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Reads a CSV whose header names the traits followed by one label column.
    pub fn from_csv(path: &Path) -> Result<Self, LearnError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: std::io::Read>(reader: R) -> Result<Self, LearnError> {
        let mut rdr = csv::Reader::from_reader(reader);
        let header = rdr.headers().map_err(|e| LearnError::Dataset(e.to_string()))?.clone();
        if header.len() < 2 {
            return Err(LearnError::Dataset("need at least one trait column and a label column".into()));
        }
        let dim = header.len() - 1;
        let trait_names = header.iter().take(dim).map(str::to_owned).collect();
        let mut traits = Vec::new();
        let mut labels = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| LearnError::Dataset(e.to_string()))?;
            let values = rec
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|e| LearnError::Dataset(format!("row {}: {e}", row + 1)))?;
            let (x, y) = values.split_at(dim);
            if !(0.0..=1.0).contains(&y[0]) {
                return Err(LearnError::LabelOutOfRange { index: row, value: y[0] });
            }
            traits.push(x.to_vec());
            labels.push(y[0]);
        }
        Ok(Dataset {
            trait_names,
            traits,
            labels,
        })
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<(), LearnError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.trait_names.clone();
        header.push("label".into());
        w.write_record(&header).map_err(|e| LearnError::Dataset(e.to_string()))?;
        for (x, y) in self.traits.iter().zip(&self.labels) {
            let row: Vec<String> = x.iter().chain(std::iter::once(y)).map(|v| v.to_string()).collect();
            w.write_record(&row).map_err(|e| LearnError::Dataset(e.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    /// Seeded shuffle, then the first `eval_fraction` of rows become the
    /// evaluation set and the rest the query pool.
    pub fn split(&self, eval_fraction: f64, seed: u64) -> Result<Split, LearnError> {
        if !(0.0..1.0).contains(&eval_fraction) {
            return Err(LearnError::Dataset(format!("eval fraction {eval_fraction} not in [0, 1)")));
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_eval = (self.len() as f64 * eval_fraction).round() as usize;
        let (eval_idx, pool_idx) = idx.split_at(n_eval);
        Ok(Split {
            pool: QueryPool::new(pool_idx.iter().map(|&i| self.traits[i].clone()).collect()),
            pool_labels: pool_idx.iter().map(|&i| self.labels[i]).collect(),
            eval: EvalSet {
                inputs: eval_idx.iter().map(|&i| self.traits[i].clone()).collect(),
                labels: eval_idx.iter().map(|&i| self.labels[i]).collect(),
            },
        })
    }
}

/// Rating weights for one synthetic position: a handful of key traits carry
/// most of the weight, the rest contribute a little.
pub fn position_weights(position: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 + position as u64);
    let mut order: Vec<usize> = (0..ROSTER_TRAITS).collect();
    order.shuffle(&mut rng);
    let mut w = vec![0.0; ROSTER_TRAITS];
    for (rank, &t) in order.iter().enumerate() {
        w[t] = if rank < 8 { rng.gen_range(0.5..1.0) } else { rng.gen_range(0.0..0.1) };
    }
    w
}

/// 500 players, 53 traits uniform in `[0, 1]`, rating = weighted mean of the
/// traits with the position's weights.
pub fn roster_dataset(position: usize, seed: u64) -> Dataset {
    let w = position_weights(position);
    let total: f64 = w.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let traits: Vec<Vec<f64>> = (0..ROSTER_SAMPLES)
        .map(|_| (0..ROSTER_TRAITS).map(|_| rng.gen::<f64>()).collect())
        .collect();
    let labels = traits
        .iter()
        .map(|x| (x.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() / total).clamp(0.0, 1.0))
        .collect();
    Dataset {
        trait_names: (0..ROSTER_TRAITS).map(|i| format!("trait_{i:02}")).collect(),
        traits,
        labels,
    }
}
