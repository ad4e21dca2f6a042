//! All metrics of one (range, perimeter) configuration as CSV rows plus a
//! JSON-ready summary.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::contacts::{
    self, AnalysisConfig, ContactError, ContactInterval, IntervalKind, MetricRow, TravelTimes,
};
use crate::replay::TraceFrame;
use crate::stats::{self, StatSummary, DEFAULT_BINS};

pub const TRAVEL_TIME: &str = "travel_time";
pub const IN_PERIMETER: &str = "in_perimeter";
pub const TOTAL_CONNECTED: &str = "total_connected";
pub const DEGREE: &str = "degree";
pub const CONTACT: &str = "contact";
pub const INTER_CONTACT: &str = "inter_contact";
pub const CONTACT_CENSORED: &str = "contact_censored";
pub const INTER_CONTACT_CENSORED: &str = "inter_contact_censored";

/// Summarized metrics, in output order.
pub const METRICS: [&str; 6] = [TRAVEL_TIME, IN_PERIMETER, TOTAL_CONNECTED, DEGREE, CONTACT, INTER_CONTACT];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryOptions {
    pub bins: usize,
    /// Upper histogram bound for contact and inter-contact durations.
    pub clip: Option<f64>,
}

impl Default for SummaryOptions {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            clip: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntervalCounts {
    pub contact: usize,
    pub inter_contact: usize,
    pub contact_censored: usize,
    pub inter_contact_censored: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TripCounts {
    pub completed: usize,
    pub not_arrived: usize,
    pub never_entered: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSummary {
    pub config: AnalysisConfig,
    pub frames: usize,
    pub vehicles: usize,
    pub intervals: IntervalCounts,
    pub trips: TripCounts,
    /// `None` when the metric has no samples.
    pub metrics: BTreeMap<String, Option<StatSummary>>,
}

impl AnalysisSummary {
    pub fn metric(&self, name: &str) -> Option<&StatSummary> {
        self.metrics.get(name).and_then(Option::as_ref)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub rows: Vec<MetricRow>,
    pub intervals: Vec<ContactInterval>,
    pub travel: TravelTimes,
    pub summary: AnalysisSummary,
}

fn row(metric: &str, vehicle: &str, t: f64, value: f64) -> MetricRow {
    MetricRow {
        metric: metric.to_string(),
        vehicle_id: vehicle.to_string(),
        t_or_start: t,
        value,
    }
}

pub fn analyze(
    frames: &[TraceFrame],
    cfg: &AnalysisConfig,
    opts: &SummaryOptions,
) -> Result<Analysis, ContactError> {
    cfg.validate()?;
    let intervals = contacts::contact_intervals(frames, cfg.tx_range)?;
    let travel = contacts::travel_times(frames, cfg);
    let perimeter = contacts::vehicles_in_perimeter(frames, cfg);
    let connected = contacts::total_connected(frames, cfg.tx_range);
    let mut degrees = contacts::connectivity_degrees(frames, cfg.tx_range);
    degrees.sort_by(|a, b| a.vehicle_id.cmp(&b.vehicle_id).then(a.t.total_cmp(&b.t)));

    let mut samples: BTreeMap<&str, Vec<f64>> = METRICS.iter().map(|m| (*m, Vec::new())).collect();
    let mut rows = Vec::new();

    for trip in &travel.trips {
        rows.push(row(TRAVEL_TIME, &trip.vehicle_id, trip.entered, trip.duration()));
        samples.get_mut(TRAVEL_TIME).unwrap().push(trip.duration());
    }
    for &(t, n) in &perimeter {
        rows.push(row(IN_PERIMETER, "", t, n as f64));
        samples.get_mut(IN_PERIMETER).unwrap().push(n as f64);
    }
    for &(t, n) in &connected {
        rows.push(row(TOTAL_CONNECTED, "", t, n as f64));
        samples.get_mut(TOTAL_CONNECTED).unwrap().push(n as f64);
    }
    for d in &degrees {
        rows.push(row(DEGREE, &d.vehicle_id, d.t, d.degree as f64));
        samples.get_mut(DEGREE).unwrap().push(d.degree as f64);
    }

    let mut counts = IntervalCounts::default();
    let mut interval_rows: Vec<MetricRow> = Vec::new();
    for iv in &intervals {
        let (metric, summary_metric) = match (iv.kind, iv.censored) {
            (IntervalKind::Contact, false) => {
                counts.contact += 1;
                (CONTACT, CONTACT)
            }
            (IntervalKind::InterContact, false) => {
                counts.inter_contact += 1;
                (INTER_CONTACT, INTER_CONTACT)
            }
            (IntervalKind::Contact, true) => {
                counts.contact_censored += 1;
                (CONTACT_CENSORED, CONTACT)
            }
            (IntervalKind::InterContact, true) => {
                counts.inter_contact_censored += 1;
                (INTER_CONTACT_CENSORED, INTER_CONTACT)
            }
        };
        interval_rows.push(row(metric, &iv.vehicle_id, iv.start, iv.duration()));
        if !iv.censored || cfg.include_censored {
            samples.get_mut(summary_metric).unwrap().push(iv.duration());
        }
    }
    // Group interval rows by metric; within a metric they stay in
    // (vehicle, start) order.
    let order = [CONTACT, CONTACT_CENSORED, INTER_CONTACT, INTER_CONTACT_CENSORED];
    interval_rows.sort_by_key(|r| order.iter().position(|m| *m == r.metric));
    rows.extend(interval_rows);

    let mut metrics = BTreeMap::new();
    for (name, values) in samples {
        let clip = if name == CONTACT || name == INTER_CONTACT {
            opts.clip
        } else {
            None
        };
        let summary = if values.is_empty() {
            None
        } else {
            // A clip below every sample leaves nothing to plot; fall back to
            // the full range rather than failing the whole analysis.
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let clip = clip.filter(|c| *c >= min);
            Some(stats::summarize(&values, opts.bins.max(1), clip).expect("finite, non-empty samples"))
        };
        metrics.insert(name.to_string(), summary);
    }

    let vehicles = frames
        .iter()
        .flat_map(|f| f.positions.keys())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let summary = AnalysisSummary {
        config: *cfg,
        frames: frames.len(),
        vehicles,
        intervals: counts,
        trips: TripCounts {
            completed: travel.trips.len(),
            not_arrived: travel.not_arrived.len(),
            never_entered: travel.never_entered.len(),
        },
        metrics,
    };
    Ok(Analysis {
        rows,
        intervals,
        travel,
        summary,
    })
}

/// Total time in contact per vehicle, censored intervals included.
pub fn time_in_contact(intervals: &[ContactInterval]) -> BTreeMap<String, f64> {
    let mut out: BTreeMap<String, f64> = BTreeMap::new();
    for iv in intervals.iter().filter(|i| i.kind == IntervalKind::Contact) {
        *out.entry(iv.vehicle_id.clone()).or_default() += iv.duration();
    }
    out
}
