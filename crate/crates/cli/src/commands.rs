use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use busnet_core::analysis::{self, AnalysisSummary, TRAVEL_TIME};
use busnet_core::contacts::{self, read_metrics, write_metrics, AnalysisConfig, Compatibility};
use busnet_core::emitter::{emit_routes_with, emit_stops_with, EmitConfig, DEFAULT_PLATFORM_HALF_LENGTH_M};
use busnet_core::geo::CartPoint;
use busnet_core::matcher::{
    match_line, Conference, LineMatch, LineSpec, MatchError, MatchedLine, MatchedStop, MatcherConfig,
};
use busnet_core::network::{parse_network, RoadNetwork};
use busnet_core::pipeline::{ScenarioConfig, SweepConfig};
use busnet_core::replay::{read_trace, simulate, write_trace, SimConfig};
use busnet_core::stats::write_density;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{
    AnalysisFlags, AnalyzeArgs, Cli, Command, MatchArgs, MatcherFlags, ReportArgs, ReportFlags, RunArgs,
    SimFlags, SimulateArgs,
};

#[derive(Debug)]
pub enum CliError {
    /// Bad invocation: missing inputs, invalid parameters.
    Usage(String),
    /// Inputs that exist but cannot be processed.
    Data(String),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
        }
    }
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Usage(_) => ExitCode::from(2),
            CliError::Data(_) => ExitCode::from(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Success,
    /// Finished, but some inputs failed.
    Partial,
}

impl From<Status> for ExitCode {
    fn from(s: Status) -> Self {
        match s {
            Status::Success => ExitCode::SUCCESS,
            Status::Partial => ExitCode::from(1),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(m: impl Into<String>) -> CliError {
    CliError::Usage(m.into())
}

fn data(m: impl Into<String>) -> CliError {
    CliError::Data(m.into())
}

pub fn dispatch(cli: Cli) -> Result<Status> {
    let scenario = load_scenario(cli.scenario.as_deref())?;
    match cli.command {
        Command::Match(a) => cmd_match(&scenario, a).map(|(status, _)| status),
        Command::Simulate(a) => cmd_simulate(&scenario, a).map(|_| Status::Success),
        Command::Analyze(a) => cmd_analyze(&scenario, a).map(|_| Status::Success),
        Command::Report(a) => cmd_report(&scenario, a).map(|_| Status::Success),
        Command::Run(a) => cmd_run(&scenario, a),
    }
}

fn load_scenario(path: Option<&Path>) -> Result<ScenarioConfig> {
    let Some(path) = path else {
        return Ok(ScenarioConfig::default());
    };
    let text = read_input(path)?;
    let cfg = ScenarioConfig::from_json(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new(""));
    Ok(cfg.resolve(base))
}

fn read_input(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))
}

fn write_output(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| data(format!("cannot create {}: {e}", parent.display())))?;
    }
    fs::write(path, contents).map_err(|e| data(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("serialisable") + "\n"
}

fn output_dir(flag: Option<PathBuf>, scenario: &ScenarioConfig, sub: &str) -> Result<PathBuf> {
    flag.or_else(|| scenario.output.as_ref().map(|o| o.join(sub)))
        .ok_or_else(|| usage("no output location given (--out)"))
}

fn load_network(flag: Option<PathBuf>, scenario: &ScenarioConfig) -> Result<RoadNetwork> {
    let path = flag
        .or_else(|| scenario.network.clone())
        .ok_or_else(|| usage("no road network given (--network)"))?;
    let text = read_input(&path)?;
    parse_network(&text).map_err(|e| data(format!("{}: {e}", path.display())))
}

/// File-system friendly form of an identifier.
fn file_stem(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || "._-".contains(c) { c } else { '_' })
        .collect()
}

fn number_label(v: f64) -> String {
    format!("{v}")
}

fn analysis_dir_name(cfg: &AnalysisConfig) -> String {
    format!("range{}_perimeter{}", number_label(cfg.tx_range), number_label(cfg.perimeter_radius))
}

// ---- match -----------------------------------------------------------------

fn matcher_config(base: &MatcherConfig, flags: &MatcherFlags) -> Result<(MatcherConfig, EmitConfig)> {
    let mut cfg = *base;
    if let Some(r) = flags.radius {
        cfg.radius = r;
    }
    if let Some(n) = flags.densify_passes {
        cfg.densify_passes = n;
    }
    if let Some(n) = flags.max_gaps {
        cfg.max_consecutive_gaps = n;
    }
    if let Some(g) = flags.geometry {
        cfg.geometry = g.into();
    }
    if let Some(s) = flags.stay {
        cfg.stay = s.into();
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    let emit = EmitConfig {
        platform_half_length: flags.platform_half_length.unwrap_or(DEFAULT_PLATFORM_HALF_LENGTH_M),
        stop_duration: flags.stop_duration,
    };
    if !(emit.platform_half_length.is_finite() && emit.platform_half_length > 0.0) {
        return Err(usage("platform half-length must be positive"));
    }
    if emit.stop_duration.is_some_and(|d| !(d.is_finite() && d >= 0.0)) {
        return Err(usage("stop duration must be non-negative"));
    }
    Ok((cfg, emit))
}

#[derive(Debug, Serialize, Deserialize)]
struct ErrorRecord {
    source: String,
    line_id: Option<String>,
    error: String,
}

#[derive(Serialize)]
struct ConferenceFile<'a> {
    #[serde(flatten)]
    conference: &'a Conference,
    stops: &'a [MatchedStop],
    unmatched_stops: &'a [String],
}

type LineOutcome = std::result::Result<LineMatch, (Option<String>, MatchError)>;

fn cmd_match(scenario: &ScenarioConfig, args: MatchArgs) -> Result<(Status, PathBuf)> {
    let net = load_network(args.network, scenario)?;
    let lines = if args.lines.is_empty() {
        scenario.lines.clone()
    } else {
        args.lines
    };
    if lines.is_empty() {
        return Err(usage("no line documents given (--line)"));
    }
    let out = output_dir(args.out, scenario, "match")?;
    let (cfg, emit) = matcher_config(&scenario.matcher, &args.matcher)?;
    let projection = net
        .projection()
        .map_err(|e| data(format!("road network: {e}; line coordinates cannot be projected")))?;

    let texts = lines
        .iter()
        .map(|p| read_input(p).map(|t| (p.clone(), t)))
        .collect::<Result<Vec<_>>>()?;

    let results: Vec<(PathBuf, LineOutcome)> = texts
        .par_iter()
        .map(|(path, text)| {
            let outcome = LineSpec::from_json(text)
                .map_err(|e| (None, e))
                .and_then(|spec| {
                    match_line(&net, &spec, &projection, &cfg).map_err(|e| (Some(spec.line_id.clone()), e))
                });
            (path.clone(), outcome)
        })
        .collect();

    let mut errors = Vec::new();
    let mut matched = Vec::new();
    let mut seen = HashSet::new();
    for (path, outcome) in results {
        match outcome {
            Ok(m) if !seen.insert(m.line.line_id.clone()) => errors.push(ErrorRecord {
                source: path.display().to_string(),
                line_id: Some(m.line.line_id.clone()),
                error: format!("duplicate line id `{}`", m.line.line_id),
            }),
            Ok(m) => matched.push(m),
            Err((line_id, e)) => errors.push(ErrorRecord {
                source: path.display().to_string(),
                line_id,
                error: e.to_string(),
            }),
        }
    }
    matched.sort_by(|a, b| a.line.line_id.cmp(&b.line.line_id));

    for m in &matched {
        let stem = file_stem(&m.line.line_id);
        write_output(&out.join("matched").join(format!("{stem}.json")), to_json(&m.line))?;
        let conference = ConferenceFile {
            conference: &m.conference,
            stops: &m.line.stops,
            unmatched_stops: &m.unmatched_stops,
        };
        write_output(&out.join("conference").join(format!("{stem}.json")), to_json(&conference))?;
    }
    let matched_lines: Vec<MatchedLine> = matched.iter().map(|m| m.line.clone()).collect();
    let routes = emit_routes_with(&matched_lines, &emit).map_err(|e| data(e.to_string()))?;
    let stops = emit_stops_with(&net, &matched_lines, &emit).map_err(|e| data(e.to_string()))?;
    write_output(&out.join("routes.rou.xml"), routes)?;
    write_output(&out.join("stops.add.xml"), stops)?;
    write_output(&out.join("errors.json"), to_json(&errors))?;

    for e in &errors {
        eprintln!("error: {}: {}", e.source, e.error);
    }
    println!(
        "matched {} of {} lines into {}",
        matched.len(),
        matched.len() + errors.len(),
        out.display()
    );
    let status = if errors.is_empty() {
        Status::Success
    } else {
        Status::Partial
    };
    Ok((status, out))
}

// ---- simulate --------------------------------------------------------------

fn sim_config(base: &SimConfig, flags: &SimFlags) -> Result<SimConfig> {
    let mut cfg = *base;
    if let Some(v) = flags.sample_interval {
        cfg.sample_interval = v;
    }
    if let Some(v) = flags.dwell_time {
        cfg.dwell_time = v;
    }
    if let Some(v) = flags.start {
        cfg.time_window.0 = v;
    }
    if let Some(v) = flags.end {
        cfg.time_window.1 = v;
    }
    if let Some(v) = flags.speed_factor {
        cfg.speed_factor = v;
    }
    cfg.validate().map_err(|e| usage(e.to_string()))?;
    Ok(cfg)
}

fn matched_files(paths: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            files.sort();
            out.extend(files);
        } else if p.is_file() {
            out.push(p.clone());
        } else {
            return Err(usage(format!("cannot read {}: no such file or directory", p.display())));
        }
    }
    Ok(out)
}

fn cmd_simulate(scenario: &ScenarioConfig, args: SimulateArgs) -> Result<PathBuf> {
    let cfg = sim_config(&scenario.simulation, &args.sim)?;
    let matched = if args.matched.is_empty() {
        vec![output_dir(None, scenario, "match")
            .map_err(|_| usage("no matched lines given (--matched)"))?
            .join("matched")]
    } else {
        args.matched
    };
    let out = output_dir(args.out, scenario, "trace.csv")?;
    let net = load_network(args.network, scenario)?;
    let mut lines = Vec::new();
    for path in matched_files(&matched)? {
        let text = read_input(&path)?;
        let line: MatchedLine =
            serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
        lines.push(line);
    }
    let frames = simulate(&net, &lines, &cfg).map_err(|e| data(e.to_string()))?;
    let mut buf = Vec::new();
    write_trace(&frames, &mut buf).map_err(|e| data(e.to_string()))?;
    write_output(&out, buf)?;
    let rows: usize = frames.iter().map(|f| f.positions.len()).sum();
    println!(
        "replayed {} lines into {} frames ({rows} positions): {}",
        lines.len(),
        frames.len(),
        out.display()
    );
    Ok(out)
}

// ---- analyze ---------------------------------------------------------------

fn parse_point(text: &str) -> Result<CartPoint> {
    let bad = || usage(format!("reference `{text}` is not `X,Y`"));
    let (x, y) = text.split_once(',').ok_or_else(bad)?;
    let x: f64 = x.trim().parse().map_err(|_| bad())?;
    let y: f64 = y.trim().parse().map_err(|_| bad())?;
    Ok(CartPoint::new(x, y))
}

fn sweep_config(base: &SweepConfig, flags: &AnalysisFlags) -> Result<SweepConfig> {
    let mut cfg = base.clone();
    if !flags.ranges.is_empty() {
        cfg.ranges = flags.ranges.clone();
    }
    if !flags.perimeters.is_empty() {
        cfg.perimeters = flags.perimeters.clone();
    }
    if let Some(r) = &flags.reference {
        cfg.reference = parse_point(r)?;
    }
    if let Some(v) = flags.arrival_threshold {
        cfg.arrival_threshold = v;
    }
    cfg.include_censored |= flags.include_censored;
    if let Some(b) = flags.bins {
        cfg.bins = b;
    }
    if flags.clip.is_some() {
        cfg.clip = flags.clip;
    }
    if cfg.bins == 0 {
        return Err(usage("bin count must be at least 1"));
    }
    if cfg.ranges.is_empty() || cfg.perimeters.is_empty() {
        return Err(usage("at least one range and one perimeter are required"));
    }
    for c in cfg.configs() {
        c.validate().map_err(|e| usage(e.to_string()))?;
    }
    Ok(cfg)
}

fn cmd_analyze(scenario: &ScenarioConfig, args: AnalyzeArgs) -> Result<PathBuf> {
    let sweep = sweep_config(&scenario.analysis, &args.analysis)?;
    let trace = args
        .trace
        .or_else(|| scenario.output.as_ref().map(|o| o.join("trace.csv")))
        .ok_or_else(|| usage("no trace given (--trace)"))?;
    let out = output_dir(args.out, scenario, "analysis")?;
    let text = read_input(&trace)?;
    let frames = read_trace(text.as_bytes()).map_err(|e| data(format!("{}: {e}", trace.display())))?;

    let opts = sweep.summary_options();
    let results = sweep
        .configs()
        .par_iter()
        .map(|cfg| analysis::analyze(&frames, cfg, &opts).map(|a| (*cfg, a)))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| data(format!("{}: {e}", trace.display())))?;

    for (cfg, a) in &results {
        let dir = out.join(analysis_dir_name(cfg));
        let mut csv = Vec::new();
        write_metrics(&a.rows, &mut csv).map_err(|e| data(e.to_string()))?;
        write_output(&dir.join("metrics.csv"), csv)?;
        write_output(&dir.join("summary.json"), to_json(&a.summary))?;
    }
    println!(
        "analyzed {} frames for {} configurations into {}",
        frames.len(),
        results.len(),
        out.display()
    );
    Ok(out)
}

// ---- report ----------------------------------------------------------------

fn summary_dirs(inputs: &[PathBuf]) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in inputs {
        if !p.is_dir() {
            return Err(usage(format!("{} is not a directory", p.display())));
        }
        if p.join("summary.json").is_file() {
            out.push(p.clone());
            continue;
        }
        let mut subs: Vec<PathBuf> = fs::read_dir(p)
            .map_err(|e| usage(format!("cannot read {}: {e}", p.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|d| d.join("summary.json").is_file())
            .collect();
        subs.sort();
        out.extend(subs);
    }
    Ok(out)
}

#[derive(Serialize)]
struct ReportEntry {
    tx_range: f64,
    perimeter_radius: f64,
    /// Mean inter-contact over mean contact duration.
    inter_contact_to_contact: Option<f64>,
    #[serde(flatten)]
    summary: AnalysisSummary,
}

#[derive(Serialize)]
struct CompatibilityEntry {
    perimeter_radius: f64,
    tolerance: f64,
    #[serde(flatten)]
    result: Compatibility,
}

#[derive(Serialize)]
struct Report {
    analyses: Vec<ReportEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    compatibility: Option<Vec<CompatibilityEntry>>,
}

fn read_journeys(path: &Path) -> Result<Vec<(String, f64)>> {
    let text = read_input(path)?;
    contacts::read_journeys(text.as_bytes()).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn cmd_report(scenario: &ScenarioConfig, args: ReportArgs) -> Result<PathBuf> {
    let inputs = if args.inputs.is_empty() {
        scenario
            .output
            .as_ref()
            .map(|o| vec![o.join("analysis")])
            .ok_or_else(|| usage("no analysis inputs given (--input)"))?
    } else {
        args.inputs
    };
    let out = output_dir(args.out, scenario, "report")?;
    let dirs = summary_dirs(&inputs)?;
    if dirs.is_empty() {
        return Err(usage("no analysis outputs (summary.json) found in the inputs"));
    }

    // Keyed by (range, perimeter) bit patterns for a stable, exact order.
    let mut entries: BTreeMap<(u64, u64), (AnalysisSummary, PathBuf)> = BTreeMap::new();
    for dir in dirs {
        let path = dir.join("summary.json");
        let summary: AnalysisSummary = serde_json::from_str(&read_input(&path)?)
            .map_err(|e| data(format!("{}: {e}", path.display())))?;
        let key = (
            summary.config.tx_range.to_bits(),
            summary.config.perimeter_radius.to_bits(),
        );
        match entries.get(&key) {
            Some((existing, first)) if *existing != summary => {
                return Err(data(format!(
                    "{} and {} both hold range {} / perimeter {} with different results",
                    first.display(),
                    dir.display(),
                    summary.config.tx_range,
                    summary.config.perimeter_radius
                )))
            }
            Some(_) => {}
            None => {
                entries.insert(key, (summary, dir));
            }
        }
    }
    let mut ordered: Vec<(AnalysisSummary, PathBuf)> = entries.into_values().collect();
    ordered.sort_by(|a, b| {
        a.0.config
            .tx_range
            .total_cmp(&b.0.config.tx_range)
            .then(a.0.config.perimeter_radius.total_cmp(&b.0.config.perimeter_radius))
    });

    for (summary, _) in &ordered {
        for (metric, stat) in &summary.metrics {
            if let Some(stat) = stat {
                let mut buf = Vec::new();
                write_density(stat, &mut buf).map_err(|e| data(e.to_string()))?;
                let name = format!("{metric}_{}.csv", analysis_dir_name(&summary.config));
                write_output(&out.join("density").join(name), buf)?;
            }
        }
    }

    let journeys = args.report.real_journeys.clone().or_else(|| scenario.real_journeys.clone());
    let compatibility = match journeys {
        Some(path) => Some(compatibility_section(&path, &ordered, &args.report, scenario)?),
        None => None,
    };

    let report = Report {
        analyses: ordered
            .into_iter()
            .map(|(summary, _)| ReportEntry {
                tx_range: summary.config.tx_range,
                perimeter_radius: summary.config.perimeter_radius,
                inter_contact_to_contact: match (
                    summary.metric(analysis::INTER_CONTACT),
                    summary.metric(analysis::CONTACT),
                ) {
                    (Some(i), Some(c)) if c.mean > 0.0 => Some(i.mean / c.mean),
                    _ => None,
                },
                summary,
            })
            .collect(),
        compatibility,
    };
    write_output(&out.join("report.json"), to_json(&report))?;
    println!("reported {} analyses into {}", report.analyses.len(), out.display());
    Ok(out)
}

fn compatibility_section(
    journeys: &Path,
    analyses: &[(AnalysisSummary, PathBuf)],
    flags: &ReportFlags,
    scenario: &ScenarioConfig,
) -> Result<Vec<CompatibilityEntry>> {
    let tolerance = flags.tolerance.unwrap_or(scenario.tolerance);
    if !(tolerance.is_finite() && tolerance >= 0.0) {
        return Err(usage("tolerance must be non-negative"));
    }
    let real = read_journeys(journeys)?;
    let mut done = HashSet::new();
    let mut out = Vec::new();
    for (summary, dir) in analyses {
        let perimeter = summary.config.perimeter_radius;
        if !done.insert(perimeter.to_bits()) {
            continue;
        }
        let path = dir.join("metrics.csv");
        let rows = read_metrics(read_input(&path)?.as_bytes()).map_err(|e| data(format!("{}: {e}", path.display())))?;
        let simulated: BTreeMap<&str, f64> = rows
            .iter()
            .filter(|r| r.metric == TRAVEL_TIME)
            .map(|r| (r.vehicle_id.as_str(), r.value))
            .collect();
        let mut sim = Vec::with_capacity(real.len());
        for (vehicle, _) in &real {
            let d = simulated.get(vehicle.as_str()).ok_or_else(|| {
                data(format!(
                    "journey of `{vehicle}` has no simulated travel time at perimeter {perimeter}"
                ))
            })?;
            sim.push(*d);
        }
        let real_durations: Vec<f64> = real.iter().map(|r| r.1).collect();
        let result = contacts::compatibility(&real_durations, &sim, tolerance).map_err(|e| data(e.to_string()))?;
        out.push(CompatibilityEntry {
            perimeter_radius: perimeter,
            tolerance,
            result,
        });
    }
    Ok(out)
}

// ---- run -------------------------------------------------------------------

fn cmd_run(scenario: &ScenarioConfig, args: RunArgs) -> Result<Status> {
    let out = args
        .out
        .or_else(|| scenario.output.clone())
        .ok_or_else(|| usage("no output directory given (--out)"))?;
    // Reject bad parameters before any stage writes output.
    matcher_config(&scenario.matcher, &args.matcher)?;
    sim_config(&scenario.simulation, &args.sim)?;
    sweep_config(&scenario.analysis, &args.analysis)?;
    let network = args.network.or_else(|| scenario.network.clone());
    let (status, match_dir) = cmd_match(
        scenario,
        MatchArgs {
            network: network.clone(),
            lines: args.lines,
            out: Some(out.join("match")),
            matcher: args.matcher,
        },
    )?;
    let trace = cmd_simulate(
        scenario,
        SimulateArgs {
            network,
            matched: vec![match_dir.join("matched")],
            out: Some(out.join("trace.csv")),
            sim: args.sim,
        },
    )?;
    let analysis_dir = cmd_analyze(
        scenario,
        AnalyzeArgs {
            trace: Some(trace),
            out: Some(out.join("analysis")),
            analysis: args.analysis,
        },
    )?;
    cmd_report(
        scenario,
        ReportArgs {
            inputs: vec![analysis_dir],
            out: Some(out.join("report")),
            report: args.report,
        },
    )?;
    Ok(status)
}
