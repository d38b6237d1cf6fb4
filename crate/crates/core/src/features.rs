//! Engineered per-cycle features.
//!
//! Set 1 tracks the pressure floor: the cycle minimum plus the mean of a
//! flat region (the pre-burst prefix on process stations, the last 20% on
//! non-process stations). Both shift one-for-one with any additive change in
//! log pressure.
//!
//! Set 2 tracks shape: amplitude (max - min) and noisiness (median absolute
//! successive difference). Both are invariant under an additive offset, so a
//! gauge drift leaves them untouched while a floor rise under a fixed peak
//! shrinks the amplitude.

use serde::{Deserialize, Serialize};

use crate::cycle_model::{PressureCycle, StationType, DEFAULT_MIN_CYCLE_SAMPLES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureSet {
    #[serde(rename = "fs1")]
    Floor,
    #[serde(rename = "fs2")]
    Shape,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub set: FeatureSet,
    pub values: [f64; 2],
}

impl FeatureVector {
    pub fn as_point(&self) -> Vec<f64> {
        self.values.to_vec()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FeatureError {
    #[error("cycle has {got} samples, need at least {need}")]
    CycleTooShort { got: usize, need: usize },
}

fn require(cycle: &PressureCycle, need: usize) -> Result<&[f64], FeatureError> {
    let lv = &cycle.log_values;
    if lv.len() < need {
        return Err(FeatureError::CycleTooShort { got: lv.len(), need });
    }
    Ok(lv)
}

/// Index `i >= 1` of the largest rise `lv[i] - lv[i-1]`, smallest on ties.
pub fn max_jump_index(cycle: &PressureCycle) -> Result<usize, FeatureError> {
    let lv = require(cycle, 2)?;
    Ok(max_jump(lv))
}

fn max_jump(lv: &[f64]) -> usize {
    let mut best = 1;
    let mut best_rise = lv[1] - lv[0];
    for i in 2..lv.len() {
        let rise = lv[i] - lv[i - 1];
        if rise > best_rise {
            best = i;
            best_rise = rise;
        }
    }
    best
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

pub fn median(xs: &mut [f64]) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

pub fn feature_set_1(cycle: &PressureCycle, station_type: StationType) -> Result<FeatureVector, FeatureError> {
    feature_set_1_with_min(cycle, station_type, DEFAULT_MIN_CYCLE_SAMPLES)
}

/// As [`feature_set_1`] with an explicit minimum cycle length.
pub fn feature_set_1_with_min(
    cycle: &PressureCycle,
    station_type: StationType,
    min_samples: usize,
) -> Result<FeatureVector, FeatureError> {
    let lv = require(cycle, min_samples.max(2))?;
    let floor = lv.iter().copied().fold(f64::INFINITY, f64::min);
    let flat = match station_type {
        StationType::Process => mean(&lv[..max_jump(lv)]),
        StationType::NonProcess => {
            let tail = ((0.2 * lv.len() as f64).ceil() as usize).max(1);
            mean(&lv[lv.len() - tail..])
        }
    };
    Ok(FeatureVector {
        set: FeatureSet::Floor,
        values: [floor, flat],
    })
}

pub fn feature_set_2(cycle: &PressureCycle) -> Result<FeatureVector, FeatureError> {
    let lv = require(cycle, 2)?;
    let (lo, hi) = lv
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let mut diffs: Vec<f64> = lv.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    Ok(FeatureVector {
        set: FeatureSet::Shape,
        values: [hi - lo, median(&mut diffs)],
    })
}
