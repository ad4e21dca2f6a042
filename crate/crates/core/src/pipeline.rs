//! Glue between the stages: batch matching and the scenario configuration
//! document.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::SummaryOptions;
use crate::contacts::{AnalysisConfig, DEFAULT_ARRIVAL_THRESHOLD_M, DEFAULT_PERIMETERS_M, DEFAULT_RANGES_M, DEFAULT_TOLERANCE};
use crate::geo::{CartPoint, Projection};
use crate::matcher::{match_line, LineMatch, LineSpec, MatchError, MatcherConfig};
use crate::network::RoadNetwork;
use crate::replay::SimConfig;
use crate::stats::DEFAULT_BINS;

/// Matches every line, returning results ordered by line id.
pub fn match_lines(
    net: &RoadNetwork,
    lines: &[LineSpec],
    projection: &Projection,
    cfg: &MatcherConfig,
) -> Vec<(String, Result<LineMatch, MatchError>)> {
    let mut out: Vec<_> = lines
        .iter()
        .map(|l| (l.line_id.clone(), match_line(net, l, projection, cfg)))
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

/// Parameters of the analysis sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SweepConfig {
    pub ranges: Vec<f64>,
    pub perimeters: Vec<f64>,
    pub reference: CartPoint,
    pub arrival_threshold: f64,
    pub include_censored: bool,
    pub bins: usize,
    pub clip: Option<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            ranges: DEFAULT_RANGES_M.to_vec(),
            perimeters: DEFAULT_PERIMETERS_M.to_vec(),
            reference: CartPoint::default(),
            arrival_threshold: DEFAULT_ARRIVAL_THRESHOLD_M,
            include_censored: false,
            bins: DEFAULT_BINS,
            clip: None,
        }
    }
}

impl SweepConfig {
    /// One configuration per (range, perimeter), ranges outermost.
    pub fn configs(&self) -> Vec<AnalysisConfig> {
        let mut out = Vec::new();
        for &tx_range in &self.ranges {
            for &perimeter_radius in &self.perimeters {
                out.push(AnalysisConfig {
                    tx_range,
                    perimeter_radius,
                    reference: self.reference,
                    arrival_threshold: self.arrival_threshold,
                    include_censored: self.include_censored,
                });
            }
        }
        out
    }

    pub fn summary_options(&self) -> SummaryOptions {
        SummaryOptions {
            bins: self.bins,
            clip: self.clip,
        }
    }
}

/// Scenario document: input paths (relative to the document) and parameter
/// overrides for every stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub network: Option<PathBuf>,
    pub lines: Vec<PathBuf>,
    pub output: Option<PathBuf>,
    pub real_journeys: Option<PathBuf>,
    pub tolerance: f64,
    pub matcher: MatcherConfig,
    pub simulation: SimConfig,
    pub analysis: SweepConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            network: None,
            lines: Vec::new(),
            output: None,
            real_journeys: None,
            tolerance: DEFAULT_TOLERANCE,
            matcher: MatcherConfig::default(),
            simulation: SimConfig::default(),
            analysis: SweepConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serialises") + "\n"
    }

    /// Makes every relative path relative to `base` instead.
    pub fn resolve(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.network.iter_mut().for_each(fix);
        self.lines.iter_mut().for_each(fix);
        self.output.iter_mut().for_each(fix);
        self.real_journeys.iter_mut().for_each(fix);
        self
    }
}
