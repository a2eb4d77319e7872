use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::set::{Key, OpKind};

/// Operation mix plus key range ("bucket"). Keys are drawn uniformly from
/// `[0, key_range)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct WorkloadSpec {
    pub insert_pct: u32,
    pub delete_pct: u32,
    pub search_pct: u32,
    pub key_range: u64,
}

impl WorkloadSpec {
    /// 9% insert, 1% delete, 90% search.
    pub const fn low_contention(key_range: u64) -> Self {
        WorkloadSpec::new(9, 1, 90, key_range)
    }

    /// 20% insert, 10% delete, 70% search.
    pub const fn mid_contention(key_range: u64) -> Self {
        WorkloadSpec::new(20, 10, 70, key_range)
    }

    pub const fn new(insert_pct: u32, delete_pct: u32, search_pct: u32, key_range: u64) -> Self {
        WorkloadSpec {
            insert_pct,
            delete_pct,
            search_pct,
            key_range,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let sum = u64::from(self.insert_pct) + u64::from(self.delete_pct) + u64::from(self.search_pct);
        if sum != 100 {
            return Err(ConfigError::MixSum {
                insert: self.insert_pct,
                delete: self.delete_pct,
                search: self.search_pct,
            });
        }
        // keys must stay clear of the sentinel at i64::MAX
        if self.key_range < 2 || self.key_range > i64::MAX as u64 {
            return Err(ConfigError::KeyRange(self.key_range));
        }
        Ok(())
    }

    pub fn mix(&self) -> Mix {
        Mix {
            insert: self.insert_pct,
            delete: self.delete_pct,
            search: self.search_pct,
        }
    }
}

/// `insert,delete,search` percentages as given on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mix {
    pub insert: u32,
    pub delete: u32,
    pub search: u32,
}

impl Mix {
    pub const LOW: Mix = Mix {
        insert: 9,
        delete: 1,
        search: 90,
    };
    pub const MID: Mix = Mix {
        insert: 20,
        delete: 10,
        search: 70,
    };

    pub fn with_range(self, key_range: u64) -> WorkloadSpec {
        WorkloadSpec::new(self.insert, self.delete, self.search, key_range)
    }
}

impl fmt::Display for Mix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.insert, self.delete, self.search)
    }
}

impl FromStr for Mix {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [i, d, q] = parts.as_slice() else {
            return Err(format!("mix `{s}` must be three comma-separated percentages"));
        };
        let num = |p: &str| p.parse::<u32>().map_err(|e| format!("mix `{s}`: {e}"));
        let mix = Mix {
            insert: num(i)?,
            delete: num(d)?,
            search: num(q)?,
        };
        mix.with_range(2).validate().map_err(|e| e.to_string())?;
        Ok(mix)
    }
}

/// Stream used by prefill, kept apart from the worker streams.
pub const PREFILL_STREAM: u64 = u64::MAX;

/// Seeded op stream. Each thread gets its own ChaCha stream of the same seed,
/// so a thread's sequence depends only on `(seed, stream)`.
pub struct OpGenerator {
    rng: ChaCha8Rng,
    insert_below: u32,
    delete_below: u32,
    key_range: u64,
}

impl OpGenerator {
    pub fn new(spec: &WorkloadSpec, seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        OpGenerator {
            rng,
            insert_below: spec.insert_pct,
            delete_below: spec.insert_pct + spec.delete_pct,
            key_range: spec.key_range,
        }
    }

    #[inline]
    pub fn next_key(&mut self) -> Key {
        self.rng.random_range(0..self.key_range) as Key
    }

    #[inline]
    pub fn next_kind(&mut self) -> OpKind {
        let r = self.rng.random_range(0..100u32);
        if r < self.insert_below {
            OpKind::Insert
        } else if r < self.delete_below {
            OpKind::Delete
        } else {
            OpKind::Search
        }
    }

    #[inline]
    pub fn next_op(&mut self) -> (OpKind, Key) {
        let kind = self.next_kind();
        (kind, self.next_key())
    }
}
