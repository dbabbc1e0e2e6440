use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use chrono::Duration;
use inlet_core::changepoint::{detect_changes, write_events_csv, ChangeEvent, DetectorConfig};
use inlet_core::optimizer::{find_sweet_spot, sweep_temperature, write_curve_csv, OperatingProfile};
use inlet_core::physics::PlantConfig;
use inlet_core::simulator::{presets, simulate as run_simulation, Scenario};
use inlet_core::stats::{
    batch_analysis, matched_window_analysis, plot_rows, read_results_csv, summarize_batch, write_plot_csv,
    write_results_csv, AnalysisResult,
};
use inlet_core::telemetry::{aggregate_room, parse_telemetry_csv, RoomManifest, RoomTelemetry, SensorKind};
use inlet_core::timefmt::format_timestamp;

use crate::output::Outputs;
use crate::{AnalyzeArgs, DetectArgs, DetectorArgs, OptimizeArgs, Preset, ReportArgs, SimulateArgs};

#[derive(Debug)]
pub enum Failure {
    /// Bad flag values: exit 1.
    Usage(anyhow::Error),
    /// Unreadable or unusable input: exit 2.
    Data(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (Failure::Usage(e) | Failure::Data(e)) = self;
        write!(f, "{e:#}")
    }
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Data(e)
    }
}

impl From<inlet_core::Error> for Failure {
    fn from(e: inlet_core::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn usage(msg: impl fmt::Display) -> Failure {
    Failure::Usage(anyhow!("{msg}"))
}

fn hours(value: f64, flag: &str) -> Result<Duration, Failure> {
    if !(value.is_finite() && value > 0.0) {
        return Err(usage(format!("--{flag} must be a positive number of hours")));
    }
    Ok(Duration::seconds((value * 3600.0).round() as i64))
}

fn alpha(value: f64) -> Result<f64, Failure> {
    if value > 0.0 && value < 1.0 {
        Ok(value)
    } else {
        Err(usage("--alpha must lie in (0, 1)"))
    }
}

impl DetectorArgs {
    fn config(&self) -> Result<DetectorConfig, Failure> {
        let mut cfg = DetectorConfig::new(hours(self.window_hours, "window-hours")?, self.threshold);
        if let Some(r) = self.refractory_hours {
            cfg.refractory = hours(r, "refractory-hours")?;
        }
        cfg.validate().map_err(|e| Failure::Usage(e.into()))?;
        Ok(cfg)
    }
}

/// Every `*.json` manifest in `dir`, by file name.
fn load_rooms(dir: &Path) -> Result<Vec<RoomTelemetry>, Failure> {
    let mut manifests: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading room directory {}", dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json") && p.is_file())
        .collect();
    manifests.sort();
    if manifests.is_empty() {
        return Err(Failure::Data(anyhow!("no room manifests (*.json) in {}", dir.display())));
    }
    manifests
        .iter()
        .map(|path| {
            let manifest = RoomManifest::load(path)?;
            let room = aggregate_room(&manifest).with_context(|| format!("room {}", manifest.room_id))?;
            Ok(room)
        })
        .collect()
}

pub fn detect(args: &DetectArgs) -> CmdResult {
    let cfg = args.detector.config()?;
    let rooms = load_rooms(&args.rooms)?;
    let mut events = Vec::new();
    for room in &rooms {
        match detect_changes(room, &cfg) {
            Ok(found) => events.extend(found),
            Err(e) => eprintln!("warning: room {} skipped: {e}", room.room_id),
        }
    }
    events.sort_by(|a, b| a.room_id.cmp(&b.room_id).then(a.event_time.cmp(&b.event_time)));
    let mut buf = Vec::new();
    write_events_csv(&events, &mut buf)?;
    eprintln!("{} changes in {} rooms", events.len(), rooms.len());
    match &args.out {
        Some(path) => crate::output::write_atomic(path, &buf)?,
        None => print!("{}", String::from_utf8_lossy(&buf)),
    }
    Ok(())
}

fn plot_file_name(r: &AnalysisResult) -> String {
    format!("{}_{}_{}h.csv", r.room_id, r.event_time.format("%Y%m%dT%H%M%SZ"), r.window_hours)
}

pub fn analyze(args: &AnalyzeArgs) -> CmdResult {
    let cfg = args.detector.config()?;
    let alpha = alpha(args.alpha)?;
    let windows = args.windows.iter().map(|&w| hours(w, "windows")).collect::<Result<Vec<_>, _>>()?;
    let guard = match args.guard_minutes {
        Some(m) if m.is_finite() && m >= 0.0 => Some(Duration::seconds((m * 60.0).round() as i64)),
        Some(_) => return Err(usage("--guard-minutes must not be negative")),
        None => None,
    };
    let matched_window = hours(args.matched_window_hours, "matched-window-hours")?;
    if (args.days_before + args.days_after) % 7 != 0 || args.days_before + args.days_after == 0 {
        return Err(usage("--days-before plus --days-after must be a positive multiple of 7"));
    }

    let rooms = load_rooms(&args.rooms)?;
    let batch = batch_analysis(&rooms, &cfg, &windows, guard)?;
    for s in &batch.skipped {
        let when = s.event_time.map(format_timestamp).unwrap_or_default();
        eprintln!("warning: skipped {} {} {:?}h: {}", s.room_id, when, s.window_hours, s.reason);
    }

    let mut out = Outputs::default();
    let mut buf = Vec::new();
    write_results_csv(&batch.results, &mut buf)?;
    out.add(args.out.join("results.csv"), buf);

    let summary = if batch.results.is_empty() {
        serde_json::json!({ "count": 0, "alpha": alpha })
    } else {
        serde_json::to_value(summarize_batch(&batch.results, alpha)?).context("serializing summary")?
    };
    let mut json = serde_json::to_vec_pretty(&summary).context("serializing summary")?;
    json.push(b'\n');
    out.add(args.out.join("summary.json"), json);

    for r in &batch.results {
        let room = rooms.iter().find(|room| room.room_id == r.room_id).expect("result from a loaded room");
        let event = ChangeEvent {
            room_id: r.room_id.clone(),
            event_time: r.event_time,
            temp_before: r.temp_before,
            temp_after: r.temp_after,
            magnitude: r.temp_after - r.temp_before,
        };
        let window = Duration::seconds((r.window_hours * 3600.0).round() as i64);
        let guard = Duration::seconds((r.guard_minutes * 60.0).round() as i64);
        let mut buf = Vec::new();
        write_plot_csv(&plot_rows(room, &event, window, guard), &mut buf)?;
        out.add(args.out.join("plots").join(plot_file_name(r)), buf);
    }

    if let Some(path) = &args.building {
        let building = parse_telemetry_csv(path, SensorKind::Power)?.series;
        let mut seen = Vec::new();
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "room_id",
            "event_time",
            "mean_before",
            "mean_after",
            "relative_change",
            "t_statistic",
            "p_value",
            "significant",
        ])
        .context("writing matched comparisons")?;
        for r in &batch.results {
            if seen.contains(&(&r.room_id, r.event_time)) {
                continue;
            }
            seen.push((&r.room_id, r.event_time));
            match matched_window_analysis(&building, r.event_time, args.days_before, args.days_after, matched_window) {
                Ok(m) => w
                    .write_record([
                        r.room_id.clone(),
                        format_timestamp(r.event_time),
                        m.mean_before.to_string(),
                        m.mean_after.to_string(),
                        m.relative_change.to_string(),
                        m.t_statistic.to_string(),
                        m.p_value.to_string(),
                        m.significant.to_string(),
                    ])
                    .context("writing matched comparisons")?,
                Err(e) => eprintln!("warning: matched comparison for {} {} skipped: {e}", r.room_id, format_timestamp(r.event_time)),
            }
        }
        out.add(args.out.join("matched.csv"), w.into_inner().map_err(|e| anyhow!("{e}"))?);
    }

    eprintln!("{} analyses, {} skipped", batch.results.len(), batch.skipped.len());
    out.commit()?;
    Ok(())
}

pub fn simulate(args: &SimulateArgs) -> CmdResult {
    let mut scenario = match (&args.scenario, args.preset) {
        (Some(path), _) => {
            let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Scenario::from_json(&raw).with_context(|| format!("scenario {}", path.display()))?
        }
        (None, Some(Preset::CampaignTwoYears)) => presets::campaign_two_years(args.seed.unwrap_or(0)),
        (None, Some(Preset::MinuteSteps)) => presets::minute_steps(args.seed.unwrap_or(0)),
        (None, None) => return Err(usage("either --scenario or --preset is required")),
    };
    if let Some(seed) = args.seed {
        scenario.seed = seed;
    }
    let sim = run_simulation(&scenario)?;
    let mut out = Outputs::default();
    for (name, bytes) in sim.output_files()? {
        out.add(args.out.join(name), bytes);
    }
    eprintln!("{} rooms, {} samples each", sim.rooms.len(), sim.timestamps.len());
    out.commit()?;
    Ok(())
}

fn read_profile(path: &Path) -> Result<OperatingProfile, Failure> {
    let mut reader = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let headers = reader.headers().context("reading profile header")?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Failure::Data(anyhow!("{}: missing column {name}", path.display())))
    };
    let (load_col, outdoor_col) = (column("load_kw")?, column("outdoor_c")?);
    let (mut loads, mut outdoor) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let record = record.context("reading profile row")?;
        let field = |col: usize| -> Result<f64, Failure> {
            record
                .get(col)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Failure::Data(anyhow!("{}: bad value on data row {}", path.display(), line + 1)))
        };
        loads.push(field(load_col)?);
        outdoor.push(field(outdoor_col)?);
    }
    Ok(OperatingProfile::new(loads, outdoor)?)
}

pub fn optimize(args: &OptimizeArgs) -> CmdResult {
    if !(args.t_min < args.t_max) {
        return Err(usage("--t-min must be below --t-max"));
    }
    if !(args.tol > 0.0 && args.step > 0.0) {
        return Err(usage("--tol and --step must be positive"));
    }
    let plant = match &args.plant {
        Some(path) => {
            let raw = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            PlantConfig::from_json(&raw).with_context(|| format!("plant {}", path.display()))?
        }
        None => PlantConfig::default(),
    };
    let profile = match &args.profile {
        Some(path) => read_profile(path)?,
        None => OperatingProfile::temperate_year(),
    };
    let mut result = find_sweet_spot(&plant, &profile, args.t_min, args.t_max, args.tol)?;
    if result.upper_bound_truncated {
        eprintln!("warning: upper bound lowered to {} °C, the highest feasible inlet", result.t_max);
    }
    if result.plateau {
        eprintln!("warning: several temperatures tie for the minimum; reporting the lowest");
    }
    result.curve = sweep_temperature(&plant, &profile, args.t_min, args.t_max, args.step)?;

    let mut out = Outputs::default();
    let mut buf = Vec::new();
    write_curve_csv(&result.curve, &mut buf)?;
    out.add(args.out.join("curve.csv"), buf);
    let mut json = serde_json::to_vec_pretty(&result).context("serializing result")?;
    json.push(b'\n');
    out.add(args.out.join("result.json"), json);
    eprintln!("optimum {:.3} °C, mean building power {:.3} kW", result.optimal_t, result.optimal_power);
    out.commit()?;
    Ok(())
}

pub fn report(args: &ReportArgs) -> CmdResult {
    let alpha = alpha(args.alpha)?;
    let file = fs::File::open(&args.results).with_context(|| format!("opening {}", args.results.display()))?;
    let results = read_results_csv(file).with_context(|| format!("reading {}", args.results.display()))?;
    print!("{}", crate::report::render(&results, alpha)?);
    Ok(())
}
