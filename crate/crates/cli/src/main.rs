//! `busnet`: match bus lines onto a road network, replay them, and analyze
//! the resulting contact patterns.
//!
//! Exit codes: 0 on success, 1 when some input could not be processed, 2 on
//! usage errors (bad flags, missing files).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use busnet_core::matcher::StayPolicy;
use busnet_core::network::MatchGeometry;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "busnet", version, about = "Bus-line map matching, replay and contact analysis")]
pub struct Cli {
    /// Scenario JSON supplying inputs and parameters; flags override it.
    #[arg(long, global = true, value_name = "FILE")]
    pub scenario: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Match line itineraries and stops; write matched lines, conference
    /// files and the route and stop documents.
    Match(MatchArgs),
    /// Replay matched lines into a position trace.
    Simulate(SimulateArgs),
    /// Compute the mobility metrics of a trace for every (range, perimeter).
    Analyze(AnalyzeArgs),
    /// Consolidate analysis outputs, with an optional compatibility check
    /// against observed journey times.
    Report(ReportArgs),
    /// Run match, simulate, analyze and report in sequence.
    Run(RunArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum GeometryArg {
    Chord,
    Polyline,
}

impl From<GeometryArg> for MatchGeometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Chord => MatchGeometry::Chord,
            GeometryArg::Polyline => MatchGeometry::Polyline,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StayArg {
    WithinRadius,
    Nearest,
}

impl From<StayArg> for StayPolicy {
    fn from(s: StayArg) -> Self {
        match s {
            StayArg::WithinRadius => StayPolicy::WithinRadius,
            StayArg::Nearest => StayPolicy::Nearest,
        }
    }
}

#[derive(Debug, Clone, Args, Default)]
pub struct MatcherFlags {
    /// Candidate search radius in meters [default: 15].
    #[arg(long, value_name = "M")]
    pub radius: Option<f64>,
    /// Midpoint densification passes over the itinerary [default: 1].
    #[arg(long, value_name = "N")]
    pub densify_passes: Option<usize>,
    /// Consecutive unmatched points tolerated before a line fails [default: 5].
    #[arg(long, value_name = "N")]
    pub max_gaps: Option<usize>,
    /// Edge geometry used for distances [default: chord].
    #[arg(long, value_enum)]
    pub geometry: Option<GeometryArg>,
    /// When a point keeps the current edge [default: within-radius].
    #[arg(long, value_enum)]
    pub stay: Option<StayArg>,
    /// Half-length of a bus-stop platform in meters [default: 5].
    #[arg(long, value_name = "M")]
    pub platform_half_length: Option<f64>,
    /// Add stop elements with this dwell (seconds) to every route.
    #[arg(long, value_name = "S")]
    pub stop_duration: Option<f64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct SimFlags {
    /// Seconds between samples [default: 3].
    #[arg(long, value_name = "S")]
    pub sample_interval: Option<f64>,
    /// Seconds spent at each stop [default: 20].
    #[arg(long, value_name = "S")]
    pub dwell_time: Option<f64>,
    /// Window start, seconds after midnight [default: 0].
    #[arg(long, value_name = "S")]
    pub start: Option<f64>,
    /// Window end (inclusive), seconds after midnight [default: 7200].
    #[arg(long, value_name = "S")]
    pub end: Option<f64>,
    /// Multiplier in (0, 1] on edge speed limits [default: 1].
    #[arg(long, value_name = "F")]
    pub speed_factor: Option<f64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct AnalysisFlags {
    /// Transmission range in meters; repeatable [default: 150 and 300].
    #[arg(long = "range", value_name = "M")]
    pub ranges: Vec<f64>,
    /// Perimeter radius around the reference in meters; repeatable
    /// [default: 2000 and 4000].
    #[arg(long = "perimeter", value_name = "M")]
    pub perimeters: Vec<f64>,
    /// Reference terminal as planar `X,Y` meters [default: 0,0].
    #[arg(long, value_name = "X,Y")]
    pub reference: Option<String>,
    /// Distance to the reference that counts as arrival [default: 50].
    #[arg(long, value_name = "M")]
    pub arrival_threshold: Option<f64>,
    /// Include window-truncated intervals in the summaries.
    #[arg(long)]
    pub include_censored: bool,
    /// Histogram bins per metric [default: 40].
    #[arg(long, value_name = "N")]
    pub bins: Option<usize>,
    /// Upper histogram bound for contact and inter-contact durations.
    #[arg(long, value_name = "S")]
    pub clip: Option<f64>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct ReportFlags {
    /// Observed journey times, CSV `vehicle_id,duration`.
    #[arg(long, value_name = "FILE")]
    pub real_journeys: Option<PathBuf>,
    /// Relative tolerance for the compatibility check [default: 0.2].
    #[arg(long, value_name = "F")]
    pub tolerance: Option<f64>,
}

#[derive(Debug, Args)]
pub struct MatchArgs {
    /// Road network document.
    #[arg(long, value_name = "FILE")]
    pub network: Option<PathBuf>,
    /// Line JSON document; repeatable.
    #[arg(long = "line", value_name = "FILE")]
    pub lines: Vec<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub matcher: MatcherFlags,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, value_name = "FILE")]
    pub network: Option<PathBuf>,
    /// Matched-line JSON file or a directory of them; repeatable.
    #[arg(long, value_name = "PATH")]
    pub matched: Vec<PathBuf>,
    /// Trace CSV to write.
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub sim: SimFlags,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Trace CSV `t,vehicle_id,x,y`.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
    /// Output directory; one subdirectory per (range, perimeter).
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub analysis: AnalysisFlags,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Analysis directory (or a directory of them); repeatable.
    #[arg(long = "input", value_name = "DIR")]
    pub inputs: Vec<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub report: ReportFlags,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, value_name = "FILE")]
    pub network: Option<PathBuf>,
    #[arg(long = "line", value_name = "FILE")]
    pub lines: Vec<PathBuf>,
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub matcher: MatcherFlags,
    #[command(flatten)]
    pub sim: SimFlags,
    #[command(flatten)]
    pub analysis: AnalysisFlags,
    #[command(flatten)]
    pub report: ReportFlags,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::dispatch(cli) {
        Ok(status) => status.into(),
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
