//! Date-atomic train/validation/test splits.

use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SampleRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SplitSpec {
    pub seed: u64,
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            seed: 0,
            train: 0.78,
            val: 0.11,
            test: 0.11,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(*p >= 0.0 && p.is_finite())) {
            return Err(Error::param("split ratios must be non-negative"));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-6 {
            return Err(Error::param("split ratios must sum to 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subset {
    Train,
    Val,
    Test,
}

impl Subset {
    pub const ALL: [Subset; 3] = [Subset::Train, Subset::Val, Subset::Test];

    pub fn name(self) -> &'static str {
        match self {
            Subset::Train => "train",
            Subset::Val => "val",
            Subset::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Split {
    pub train: Vec<SampleRecord>,
    pub val: Vec<SampleRecord>,
    pub test: Vec<SampleRecord>,
}

impl Split {
    pub fn subset(&self, s: Subset) -> &[SampleRecord] {
        match s {
            Subset::Train => &self.train,
            Subset::Val => &self.val,
            Subset::Test => &self.test,
        }
    }

    fn subset_mut(&mut self, s: Subset) -> &mut Vec<SampleRecord> {
        match s {
            Subset::Train => &mut self.train,
            Subset::Val => &mut self.val,
            Subset::Test => &mut self.test,
        }
    }

    pub fn subset_of(&self, path: &std::path::Path) -> Option<Subset> {
        Subset::ALL
            .into_iter()
            .find(|s| self.subset(*s).iter().any(|r| r.path == path))
    }
}

/// Shuffles capture dates with the seed and fills train, then val, then
/// test until each reaches its share of the record count. Records keep
/// their input order within a subset.
pub fn split(records: &[SampleRecord], spec: &SplitSpec) -> Result<Split> {
    spec.validate()?;
    let mut by_date: BTreeMap<NaiveDate, Vec<&SampleRecord>> = BTreeMap::new();
    for r in records {
        by_date.entry(r.date()).or_default().push(r);
    }
    let mut dates: Vec<NaiveDate> = by_date.keys().copied().collect();
    dates.shuffle(&mut ChaCha8Rng::seed_from_u64(spec.seed));

    let n = records.len() as f64;
    let bounds = [spec.train * n, (spec.train + spec.val) * n];
    let mut assigned = BTreeMap::new();
    let mut filled = 0usize;
    for d in dates {
        let subset = if (filled as f64) < bounds[0] || spec.val + spec.test == 0.0 {
            Subset::Train
        } else if (filled as f64) < bounds[1] || spec.test == 0.0 {
            Subset::Val
        } else {
            Subset::Test
        };
        filled += by_date[&d].len();
        assigned.insert(d, subset);
    }
    let mut out = Split::default();
    for r in records {
        out.subset_mut(assigned[&r.date()]).push(r.clone());
    }
    Ok(out)
}
