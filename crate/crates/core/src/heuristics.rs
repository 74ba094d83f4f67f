//! Heuristic evaluators: distance baselines and plausibility-based heuristics.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::decoder::{DecodeError, Decoder};
use crate::imaging::{chi2_diff, histogram, kl_div, Histogram, ImageError};
use crate::strips::{PlanningTask, State};

/// Non-negative integer heuristic value; [`HValue::INFINITE`] marks dead ends.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct HValue(pub u64);

impl HValue {
    pub const INFINITE: HValue = HValue(u64::MAX);
    pub const ZERO: HValue = HValue(0);

    pub fn is_infinite(self) -> bool {
        self == Self::INFINITE
    }
}

impl fmt::Display for HValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{}", self.0)
        }
    }
}

#[derive(Debug, Error)]
pub enum HeuristicError {
    #[error("decode failed during evaluation: {0}")]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

pub trait Heuristic {
    fn name(&self) -> String;
    fn evaluate(&mut self, task: &PlanningTask, state: &State) -> Result<HValue, HeuristicError>;
}

pub fn h_blind(task: &PlanningTask, state: &State) -> HValue {
    HValue(u64::from(!task.is_goal(state)))
}

pub fn h_goalcount(task: &PlanningTask, state: &State) -> HValue {
    HValue(task.goal.count_missing_from(state) as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Relaxation {
    Max,
    Add,
}

/// Delete-relaxation fixed point: proposition costs start at 0 for true
/// propositions and settle to min over achievers of 1 + combine(pre costs).
fn relaxed_cost(task: &PlanningTask, state: &State, kind: Relaxation) -> HValue {
    const INF: u64 = u64::MAX;
    let n = task.n_props();
    let mut cost = vec![INF; n];
    for p in state.iter() {
        cost[p] = 0;
    }
    let combine = |acc: u64, c: u64| match kind {
        Relaxation::Max => acc.max(c),
        Relaxation::Add => acc.saturating_add(c),
    };
    loop {
        let mut changed = false;
        for a in &task.actions {
            let mut pre_cost = 0u64;
            for p in a.pre.iter() {
                if cost[p] == INF {
                    pre_cost = INF;
                    break;
                }
                pre_cost = combine(pre_cost, cost[p]);
            }
            if pre_cost == INF {
                continue;
            }
            let c = pre_cost.saturating_add(1);
            for p in a.add.iter() {
                if c < cost[p] {
                    cost[p] = c;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut h = 0u64;
    for p in task.goal.iter() {
        if cost[p] == INF {
            return HValue::INFINITE;
        }
        h = combine(h, cost[p]);
    }
    HValue(h.min(INF - 1))
}

pub fn h_max(task: &PlanningTask, state: &State) -> HValue {
    relaxed_cost(task, state, Relaxation::Max)
}

pub fn h_add(task: &PlanningTask, state: &State) -> HValue {
    relaxed_cost(task, state, Relaxation::Add)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Blind,
    Goalcount,
    Hmax,
    Hadd,
    /// h ≡ 0; turns best-first search into uniform-cost / breadth-first.
    Zero,
}

impl Heuristic for Baseline {
    fn name(&self) -> String {
        match self {
            Baseline::Blind => "blind",
            Baseline::Goalcount => "goalcount",
            Baseline::Hmax => "hmax",
            Baseline::Hadd => "hadd",
            Baseline::Zero => "zero",
        }
        .to_string()
    }

    fn evaluate(&mut self, task: &PlanningTask, state: &State) -> Result<HValue, HeuristicError> {
        Ok(match self {
            Baseline::Blind => h_blind(task, state),
            Baseline::Goalcount => h_goalcount(task, state),
            Baseline::Hmax => h_max(task, state),
            Baseline::Hadd => h_add(task, state),
            Baseline::Zero => HValue::ZERO,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Chi2,
    Kl,
}

impl Metric {
    pub fn default_scale(self) -> f64 {
        match self {
            Metric::Chi2 => 1.0,
            Metric::Kl => 1000.0,
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Chi2 => "chi2",
            Metric::Kl => "kl",
        })
    }
}

/// Which decoded state anchors the reference histogram.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReferenceChoice {
    #[default]
    Goal,
    Init,
    /// Explicit bit string, `'0'`/`'1'` per proposition.
    Bits(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlausibilitySettings {
    pub metric: Metric,
    pub n_bins: usize,
    pub kl_alpha: f64,
    pub scale: f64,
    pub reference: ReferenceChoice,
}

impl PlausibilitySettings {
    pub fn new(metric: Metric) -> Self {
        PlausibilitySettings {
            metric,
            n_bins: 10,
            kl_alpha: 1.0,
            scale: metric.default_scale(),
            reference: ReferenceChoice::Goal,
        }
    }
}

#[derive(Debug, Error)]
pub enum ContextError {
    #[error(transparent)]
    Decode(#[from] DecodeError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("reference histogram is empty")]
    EmptyReference,
    #[error("scale must be positive and finite, got {0}")]
    Scale(f64),
    #[error("kl smoothing must be positive, got {0}")]
    Alpha(f64),
    #[error("reference bits do not parse or have the wrong width")]
    ReferenceBits,
}

/// Histogram-divergence plausibility against a fixed reference image.
#[derive(Debug, Clone)]
pub struct PlausibilityContext {
    decoder: Arc<Decoder>,
    reference: Histogram,
    settings: PlausibilitySettings,
}

impl PlausibilityContext {
    /// Decodes the reference state once and keeps its histogram.
    pub fn new(
        decoder: Arc<Decoder>,
        task: &PlanningTask,
        settings: PlausibilitySettings,
    ) -> Result<Self, ContextError> {
        if !(settings.scale > 0.0 && settings.scale.is_finite()) {
            return Err(ContextError::Scale(settings.scale));
        }
        if !(settings.kl_alpha > 0.0 && settings.kl_alpha.is_finite()) {
            return Err(ContextError::Alpha(settings.kl_alpha));
        }
        let reference_state = match &settings.reference {
            ReferenceChoice::Goal => task.goal.clone(),
            ReferenceChoice::Init => task.init.clone(),
            ReferenceChoice::Bits(bits) => State::from_bit_str(bits)
                .filter(|s| s.len() == task.n_props())
                .ok_or(ContextError::ReferenceBits)?,
        };
        let image = decoder.decode(&reference_state)?;
        let reference = histogram(&image, settings.n_bins)?;
        if reference.total() == 0 {
            return Err(ContextError::EmptyReference);
        }
        Ok(PlausibilityContext {
            decoder,
            reference,
            settings,
        })
    }

    pub fn settings(&self) -> &PlausibilitySettings {
        &self.settings
    }

    pub fn reference(&self) -> &Histogram {
        &self.reference
    }

    pub fn decoder(&self) -> &Arc<Decoder> {
        &self.decoder
    }

    /// Divergence of the decoded state from the reference (−plausibility).
    pub fn divergence(&self, state: &State) -> Result<f64, HeuristicError> {
        let image = self.decoder.decode(state)?;
        let h = histogram(&image, self.settings.n_bins)?;
        Ok(match self.settings.metric {
            Metric::Chi2 => chi2_diff(&self.reference, &h)?,
            Metric::Kl => kl_div(&self.reference, &h, self.settings.kl_alpha)?,
        })
    }

    pub fn h_plausibility(&self, state: &State) -> Result<HValue, HeuristicError> {
        let d = self.divergence(state)?;
        Ok(scaled_floor(d, self.settings.scale))
    }
}

/// `floor(scale · d)` clamped into the finite heuristic range.
pub fn scaled_floor(d: f64, scale: f64) -> HValue {
    let v = (scale * d).floor();
    if v.is_nan() || v <= 0.0 {
        HValue::ZERO
    } else if v >= (u64::MAX - 1) as f64 {
        HValue(u64::MAX - 1)
    } else {
        HValue(v as u64)
    }
}

impl Heuristic for PlausibilityContext {
    fn name(&self) -> String {
        self.settings.metric.to_string()
    }

    fn evaluate(&mut self, _task: &PlanningTask, state: &State) -> Result<HValue, HeuristicError> {
        self.h_plausibility(state)
    }
}
