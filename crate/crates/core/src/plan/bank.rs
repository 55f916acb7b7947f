//! Data-driven trajectory retrieval: expert futures binned by the initial
//! speed and heading rate of their past.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::geom::Vec2;
use crate::plan::{PastTrack, Trajectory};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BankConfig {
    /// m/s.
    pub speed_bin: f64,
    /// rad/s.
    pub heading_rate_bin: f64,
    pub samples_per_query: usize,
}

impl Default for BankConfig {
    fn default() -> Self {
        Self {
            speed_bin: 1.0,
            heading_rate_bin: 0.1,
            samples_per_query: 200,
        }
    }
}

impl BankConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.speed_bin > 0.0 && self.heading_rate_bin > 0.0) {
            return Err(Error::Config("bank bin widths must be positive".into()));
        }
        Ok(())
    }
}

/// Bin key: quantized speed and heading rate.
pub type BinKey = (i64, i64);

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryBank {
    pub speed_bin: f64,
    pub heading_rate_bin: f64,
    pub frame_interval: f64,
    pub frames: usize,
    /// Futures in the ego frame of their present pose.
    bins: BTreeMap<BinKey, Vec<Vec<Vec2>>>,
}

impl TrajectoryBank {
    pub fn build(
        experts: &[(PastTrack, Trajectory)],
        cfg: &BankConfig,
        frame_interval: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        let frames = experts
            .first()
            .ok_or(Error::Empty("bank expert set"))?
            .1
            .len();
        let mut bank = Self {
            speed_bin: cfg.speed_bin,
            heading_rate_bin: cfg.heading_rate_bin,
            frame_interval,
            frames,
            bins: BTreeMap::new(),
        };
        for (past, future) in experts {
            if future.len() != frames {
                return Err(Error::FrameMismatch(format!(
                    "bank futures have {frames} frames, got {}",
                    future.len()
                )));
            }
            let state = past.ego_state(frame_interval, 0.0)?;
            let local = future
                .positions()
                .into_iter()
                .map(|p| (p - state.position).rotate(-state.heading))
                .collect();
            bank.bins
                .entry(bank.key(state.speed, state.heading_rate))
                .or_default()
                .push(local);
        }
        Ok(bank)
    }

    pub fn from_bins(
        speed_bin: f64,
        heading_rate_bin: f64,
        frame_interval: f64,
        frames: usize,
        bins: BTreeMap<BinKey, Vec<Vec<Vec2>>>,
    ) -> Result<Self> {
        if bins.values().flatten().any(|f| f.len() != frames) {
            return Err(Error::FrameMismatch("bank future length".into()));
        }
        Ok(Self {
            speed_bin,
            heading_rate_bin,
            frame_interval,
            frames,
            bins,
        })
    }

    pub fn bins(&self) -> &BTreeMap<BinKey, Vec<Vec<Vec2>>> {
        &self.bins
    }

    pub fn len(&self) -> usize {
        self.bins.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn key(&self, speed: f64, heading_rate: f64) -> BinKey {
        (
            (speed / self.speed_bin).round() as i64,
            (heading_rate / self.heading_rate_bin).round() as i64,
        )
    }

    /// Nonempty bin whose center is nearest to `(speed, heading_rate)`;
    /// ties go to the lower speed, then the lower heading rate.
    pub fn nearest_bin(&self, speed: f64, heading_rate: f64) -> Option<BinKey> {
        let mut best: Option<(f64, BinKey)> = None;
        for (&key, futures) in &self.bins {
            if futures.is_empty() {
                continue;
            }
            let ds = key.0 as f64 * self.speed_bin - speed;
            let dr = key.1 as f64 * self.heading_rate_bin - heading_rate;
            let d = ds * ds + dr * dr;
            if best.is_none_or(|(b, _)| d < b) {
                best = Some((d, key));
            }
        }
        best.map(|(_, k)| k)
    }

    /// Draws `count` futures uniformly with replacement from the nearest bin
    /// and places them at the query's present pose.
    pub fn query<R: Rng>(
        &self,
        past: &PastTrack,
        count: usize,
        default_heading: f64,
        rng: &mut R,
    ) -> Result<Vec<Trajectory>> {
        let state = past.ego_state(self.frame_interval, default_heading)?;
        let key = self
            .nearest_bin(state.speed, state.heading_rate)
            .ok_or(Error::Empty("trajectory bank"))?;
        let futures = &self.bins[&key];
        (0..count)
            .map(|_| {
                let f = &futures[rng.gen_range(0..futures.len())];
                let placed: Vec<Vec2> = f
                    .iter()
                    .map(|&p| state.position + p.rotate(state.heading))
                    .collect();
                Trajectory::from_positions(&placed)
            })
            .collect()
    }
}
