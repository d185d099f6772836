use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{LbeeError, Result};

/// Sentence selection strategy applied to every hard cluster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum Method {
    /// Top-ranked sentences of the hard prototype, no contrasting.
    TopS,
    /// Top-ranked hard sentences minus those matching the nearest easy prototype.
    SetDiff,
    /// Ranking by the difference of the hard and easy similarity profiles.
    PDiff,
    /// `PDiff` restricted to sentences close to the hard prototype.
    FPDiff,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::TopS, Method::SetDiff, Method::PDiff, Method::FPDiff];

    pub fn name(self) -> &'static str {
        match self {
            Method::TopS => "TopS",
            Method::SetDiff => "SetDiff",
            Method::PDiff => "PDiff",
            Method::FPDiff => "FPDiff",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = LbeeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "tops" => Ok(Method::TopS),
            "setdiff" => Ok(Method::SetDiff),
            "pdiff" => Ok(Method::PDiff),
            "fpdiff" => Ok(Method::FPDiff),
            other => Err(LbeeError::InvalidConfig(format!(
                "unknown method '{other}' (expected TopS, SetDiff, PDiff or FPDiff)"
            ))),
        }
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// How the target set is split into easy and hard images.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitMode {
    /// Thresholds around the mean confidence score.
    Score,
    /// Correct images are easy, false positives and negatives are hard.
    Outcome,
}

impl FromStr for SplitMode {
    type Err = LbeeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "score" => Ok(SplitMode::Score),
            "outcome" => Ok(SplitMode::Outcome),
            other => Err(LbeeError::InvalidConfig(format!(
                "unknown split mode '{other}' (expected score or outcome)"
            ))),
        }
    }
}

impl<'de> Deserialize<'de> for SplitMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub const DEFAULT_A: f64 = 0.2;
pub const DEFAULT_O: f64 = 0.2;
pub const DEFAULT_CLUSTERS: usize = 15;
/// Cluster count used for per-class analyses.
pub const PER_CLASS_CLUSTERS: usize = 5;
pub const DEFAULT_K: usize = 3;
pub const DEFAULT_TAU: f64 = 0.25;

/// Hyper-parameters of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    /// Split threshold margin, in standard deviations of the confidence.
    pub a: f64,
    /// Ground-truth margin factor: `beta = o * std(performance)`.
    pub o: f64,
    /// Absolute ground-truth margin; overrides `o` when set.
    pub beta: Option<f64>,
    pub c_easy: usize,
    pub c_hard: usize,
    /// Sentences retained per hard cluster.
    pub k: usize,
    pub tau: f64,
    pub method: Method,
    pub split_mode: SplitMode,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            a: DEFAULT_A,
            o: DEFAULT_O,
            beta: None,
            c_easy: DEFAULT_CLUSTERS,
            c_hard: DEFAULT_CLUSTERS,
            k: DEFAULT_K,
            tau: DEFAULT_TAU,
            method: Method::FPDiff,
            split_mode: SplitMode::Score,
            seed: 0,
        }
    }
}

/// Config file shape: every key optional, `c` sets both cluster counts.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    a: Option<f64>,
    o: Option<f64>,
    beta: Option<f64>,
    c: Option<usize>,
    c_easy: Option<usize>,
    c_hard: Option<usize>,
    k: Option<usize>,
    tau: Option<f64>,
    method: Option<Method>,
    split_mode: Option<SplitMode>,
    seed: Option<u64>,
}

impl RunConfig {
    /// Parses a JSON config object; absent keys keep their defaults.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawConfig =
            serde_json::from_str(text).map_err(|e| LbeeError::InvalidConfig(e.to_string()))?;
        let d = RunConfig::default();
        let cfg = RunConfig {
            a: raw.a.unwrap_or(d.a),
            o: raw.o.unwrap_or(d.o),
            beta: raw.beta,
            c_easy: raw.c_easy.or(raw.c).unwrap_or(d.c_easy),
            c_hard: raw.c_hard.or(raw.c).unwrap_or(d.c_hard),
            k: raw.k.unwrap_or(d.k),
            tau: raw.tau.unwrap_or(d.tau),
            method: raw.method.unwrap_or(d.method),
            split_mode: raw.split_mode.unwrap_or(d.split_mode),
            seed: raw.seed.unwrap_or(d.seed),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(LbeeError::InvalidConfig(msg));
        if !(self.a.is_finite() && self.a >= 0.0) {
            return bad(format!("a must be finite and >= 0, got {}", self.a));
        }
        if !(self.o.is_finite() && self.o >= 0.0) {
            return bad(format!("o must be finite and >= 0, got {}", self.o));
        }
        if let Some(beta) = self.beta {
            if !(beta.is_finite() && beta >= 0.0) {
                return bad(format!("beta must be finite and >= 0, got {beta}"));
            }
        }
        if self.c_easy == 0 || self.c_hard == 0 {
            return bad("cluster counts must be >= 1".into());
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if !self.tau.is_finite() {
            return bad(format!("tau must be finite, got {}", self.tau));
        }
        Ok(())
    }
}
