use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use pi2lab::cc_models::{switchover_rtt, switchover_rtt_approx, CcMode, CcParams};
use pi2lab::dataset::{
    classify_switchover, default_lambda0_mix, switchover_curve, weighted_summary, DatasetSource,
    DATASET_ENV, WORLD_INTERNET_USERS,
};
use pi2lab::geometry::{lambda0_for, recovery_coefficient, transition_region, RttKind};
use pi2lab::manifest::RunManifest;
use pi2lab::sim::{capacity_invariance_check, measure_cycles, sim_run, SimScenario};
use pi2lab::target::{build_report, MixEntry, Rounding, RtypProvenance, TargetInputs};
use pi2lab::units::{parse_rate, parse_time, pps_to_mbps};
use pi2lab::{Error, Pi2Config, Result};

/// Sawtooth geometry, PI² simulation and target queue-delay derivation.
///
/// Rates take a unit suffix (pps, kbit, mbit, gbit, bit; 1500-byte packets),
/// times take ms, us or s.
#[derive(Parser)]
#[command(name = "pi2lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Closed-form analyses.
    #[command(subcommand)]
    Analyze(Analyze),
    /// Run a fluid simulation from a scenario file.
    Sim(SimArgs),
    /// Derive a recommended PI² target queue delay.
    Target(TargetArgs),
    /// Summarise the per-country CDN RTT table.
    Dataset(DatasetArgs),
    /// Print built-in defaults as JSON.
    Defaults,
}

#[derive(Args, Clone)]
struct Output {
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Also write the JSON result to this file (plus a manifest next to it).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct AqmArgs {
    /// PI² target queue delay.
    #[arg(long, default_value = "15ms", value_parser = parse_time)]
    target: f64,
    /// PI² update interval.
    #[arg(long, default_value = "16ms", value_parser = parse_time)]
    tupdate: f64,
    /// PI² design maximum RTT.
    #[arg(long, default_value = "100ms", value_parser = parse_time)]
    rmax: f64,
}

impl AqmArgs {
    fn config(&self) -> Result<Pi2Config> {
        Pi2Config::new(self.target, self.tupdate, self.rmax)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Min,
    Max,
    Avg,
    All,
}

#[derive(Subcommand)]
enum Analyze {
    /// Fraction of the sawtooth amplitude below its average.
    Lambda0 {
        /// Congestion controller: reno, creno or cubic.
        #[arg(long, default_value = "reno")]
        cc: CcMode,
        #[command(flatten)]
        out: Output,
    },
    /// Sawtooth recovery time `coef · rate · RTT²`.
    Recovery {
        #[arg(long, default_value = "creno")]
        cc: CcMode,
        /// Per-flow packet rate.
        #[arg(long, value_parser = parse_rate)]
        rate: f64,
        /// RTT of the chosen kind (min, max or avg).
        #[arg(long, value_parser = parse_time)]
        rtt: f64,
        #[arg(long, value_enum, default_value = "all")]
        kind: KindArg,
        #[command(flatten)]
        out: Output,
    },
    /// RTT at which Cubic switches between Reno-friendly and pure Cubic mode.
    Switchover {
        /// Per-flow packet rate.
        #[arg(long, value_parser = parse_rate)]
        rate: f64,
        /// Write a sampled curve `rate_pps,rtt_ms` here for plotting.
        #[arg(long)]
        curve_out: Option<PathBuf>,
        /// Lowest rate of the sampled curve.
        #[arg(long, default_value = "1pps", value_parser = parse_rate)]
        curve_from: f64,
        /// Highest rate of the sampled curve.
        #[arg(long, default_value = "1000000pps", value_parser = parse_rate)]
        curve_to: f64,
        #[arg(long, default_value_t = 121)]
        curve_points: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Average-RTT bounds of the AQM transition region at one rate.
    Transition {
        #[arg(long, default_value = "creno")]
        cc: CcMode,
        /// Per-flow packet rate.
        #[arg(long, value_parser = parse_rate)]
        rate: f64,
        #[command(flatten)]
        aqm: AqmArgs,
        #[command(flatten)]
        out: Output,
    },
}

#[derive(Args)]
struct SimArgs {
    /// Scenario file (`key = value` lines).
    scenario: PathBuf,
    /// Override a scenario key, e.g. `--set link_rate=40mbit`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// RNG seed (overrides the scenario's `seed`).
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for trace.csv, cycles.json and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run a capacity sweep at these link-rate multiples instead, e.g. 1,2,4.
    #[arg(long, value_delimiter = ',')]
    sweep_capacity: Option<Vec<f64>>,
}

#[derive(Args, Clone)]
struct DatasetSelect {
    /// Country table CSV [default: $PI2LAB_DATASET, else the bundled table].
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Countries to leave out. Repeatable.
    #[arg(long, default_value = "China")]
    exclude: Vec<String>,
    /// Keep every country.
    #[arg(long, conflicts_with = "exclude")]
    no_exclude: bool,
}

impl DatasetSelect {
    fn exclusions(&self) -> Vec<String> {
        if self.no_exclude {
            Vec::new()
        } else {
            self.exclude.clone()
        }
    }
}

#[derive(Args)]
struct TargetArgs {
    #[command(flatten)]
    select: DatasetSelect,
    /// Safety factor (>= 1).
    #[arg(long, default_value_t = 2.0)]
    f: f64,
    /// Traffic mix as controller=weight pairs summing to 1.
    #[arg(long, default_value = "creno=0.7,cubic=0.3")]
    weights: String,
    /// λ for AIMD controllers (fraction of amplitude below target).
    #[arg(long, default_value_t = pi2lab::geometry::LAMBDA_AIMD)]
    lambda_aimd: f64,
    /// λ for Cubic.
    #[arg(long, default_value_t = pi2lab::geometry::LAMBDA_CUBIC)]
    lambda_cubic: f64,
    /// Typical base RTT; skips the dataset when given.
    #[arg(long, value_parser = parse_time)]
    rtyp: Option<f64>,
    /// Round factors to 2 dp and R_typ to whole ms before multiplying.
    #[arg(long)]
    staged_rounding: bool,
    /// Write the JSON report here (plus a manifest) instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DatasetArgs {
    #[command(flatten)]
    select: DatasetSelect,
    /// Target used for the under-load RTT of each country.
    #[arg(long, default_value = "15ms", value_parser = parse_time)]
    target: f64,
    /// Countries left out of the above-curve user share (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "China,Russia")]
    above_exclude: Vec<String>,
    /// Output directory for summary.json, scatter.csv, curve.csv and manifest.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 2 } else { 3 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Analyze(a) => analyze(a),
        Command::Sim(s) => sim(s),
        Command::Target(t) => target(t),
        Command::Dataset(d) => dataset(d),
        Command::Defaults => {
            println!("{}", serde_json::to_string_pretty(&defaults())?);
            Ok(())
        }
    }
}

fn defaults() -> serde_json::Value {
    json!({
        "pi2": Pi2Config::default(),
        "reno": CcParams::reno(),
        "creno": CcParams::creno(),
        "cubic": CcParams::cubic(),
        "target": TargetInputs::default(),
        "dataset_env": DATASET_ENV,
    })
}

fn ms(seconds: f64) -> String {
    format!("{:.2} ms", seconds * 1e3)
}

/// Prints text or JSON, and writes JSON plus manifest to `--out`.
fn emit<T: Serialize>(sub: &str, out: &Output, value: &T, text: String) -> Result<()> {
    let body = serde_json::to_string_pretty(value)? + "\n";
    if out.json {
        print!("{body}");
    } else {
        print!("{text}");
    }
    if let Some(path) = &out.out {
        write_with_manifest(sub, path, &body, serde_json::to_value(value)?, None)?;
    }
    Ok(())
}

fn write_with_manifest(
    sub: &str,
    path: &Path,
    body: &str,
    config: serde_json::Value,
    seed: Option<u64>,
) -> Result<()> {
    fs::write(path, body)?;
    let mut m = RunManifest::new(sub, config, seed);
    m.add_output(path);
    m.write(&RunManifest::path_for(path))
}

fn analyze(cmd: Analyze) -> Result<()> {
    match cmd {
        Analyze::Lambda0 { cc, out } => {
            let params = CcParams::for_mode(cc);
            let l0 = lambda0_for(&params)?;
            let v = json!({ "cc": cc, "b": params.b, "lambda0": l0 });
            emit("analyze lambda0", &out, &v, format!("lambda0 {cc} (b = {}): {l0:.3}\n", params.b))
        }
        Analyze::Recovery { cc, rate, rtt, kind, out } => {
            let params = CcParams::for_mode(cc);
            let kinds: &[RttKind] = match kind {
                KindArg::Min => &[RttKind::Min],
                KindArg::Max => &[RttKind::Max],
                KindArg::Avg => &[RttKind::Avg],
                KindArg::All => &[RttKind::Min, RttKind::Avg, RttKind::Max],
            };
            let mut rows = Vec::new();
            let mut text = String::new();
            for &k in kinds {
                let coef = recovery_coefficient(k, &params)?;
                let t = pi2lab::geometry::recovery_time(rate, rtt, k, &params)?;
                text += &format!("{cc} {k:?}: {coef:.4} · r · R² = {} \n", ms(t));
                rows.push(json!({ "kind": format!("{k:?}").to_lowercase(), "coefficient": coef, "recovery_time_s": t }));
            }
            let v = json!({ "cc": cc, "rate_pps": rate, "rtt_s": rtt, "results": rows });
            emit("analyze recovery", &out, &v, text)
        }
        Analyze::Switchover { rate, curve_out, curve_from, curve_to, curve_points, out } => {
            let cubic = CcParams::cubic();
            let exact = switchover_rtt(rate, &cubic)?;
            let approx = switchover_rtt_approx(rate)?;
            let v = json!({
                "rate_pps": rate,
                "rate_mbps": pps_to_mbps(rate),
                "switchover_rtt_s": exact,
                "switchover_rtt_approx_s": approx,
            });
            let text = format!(
                "switchover RTT at {rate:.1} pps ({:.2} Mb/s): {} (1.22/r^0.4: {})\n",
                pps_to_mbps(rate),
                ms(exact),
                ms(approx)
            );
            emit("analyze switchover", &out, &v, text)?;
            if let Some(path) = curve_out {
                let mut body = String::from("rate_pps,rtt_ms\n");
                for (r, t) in switchover_curve(curve_from, curve_to, curve_points, &cubic)? {
                    body += &format!("{r},{t}\n");
                }
                let cfg = json!({ "from_pps": curve_from, "to_pps": curve_to, "points": curve_points, "cubic": cubic });
                write_with_manifest("analyze switchover", &path, &body, cfg, None)?;
            }
            Ok(())
        }
        Analyze::Transition { cc, rate, aqm, out } => {
            let params = CcParams::for_mode(cc);
            let cfg = aqm.config()?;
            let t = transition_region(rate, &cfg, &params)?;
            let v = json!({ "cc": cc, "aqm": cfg, "region": t });
            let text = format!(
                "{cc} at {rate:.1} pps: floor {} (recovery = tupdate), center {} (recovery = rmax)\n",
                ms(t.rtt_floor),
                ms(t.rtt_center)
            );
            emit("analyze transition", &out, &v, text)
        }
    }
}

fn parse_overrides(raw: &[String]) -> Result<Vec<(String, String)>> {
    raw.iter()
        .map(|kv| {
            kv.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::InvalidInput {
                    name: "--set",
                    reason: format!("`{kv}` must look like key=value"),
                })
        })
        .collect()
}

fn sim(args: SimArgs) -> Result<()> {
    let text = fs::read_to_string(&args.scenario).map_err(|e| {
        Error::Io(std::io::Error::new(
            e.kind(),
            format!("cannot read scenario {}: {e}", args.scenario.display()),
        ))
    })?;
    let mut overrides = parse_overrides(&args.overrides)?;
    if let Some(seed) = args.seed {
        overrides.push(("seed".into(), seed.to_string()));
    }
    let scenario = SimScenario::parse_with_overrides(&text, &overrides)?;
    for w in scenario.warnings() {
        eprintln!("warning: {w}");
    }
    let mut config = serde_json::to_value(&scenario)?;
    config["dt_resolved"] = json!(scenario.step());

    if let Some(factors) = &args.sweep_capacity {
        let report = capacity_invariance_check(&scenario, factors)?;
        for p in &report.points {
            println!(
                "x{}: q_min {} q_max {} lambda_hat {:.3} cycles {}",
                p.factor,
                ms(p.stats.mean_q_min),
                ms(p.stats.mean_q_max),
                p.stats.lambda_hat,
                p.stats.cycles
            );
        }
        println!(
            "drift: q_min {:.1}% q_max {:.1}%",
            report.q_min_drift * 100.0,
            report.q_max_drift * 100.0
        );
        if let Some(dir) = &args.out {
            fs::create_dir_all(dir)?;
            let path = dir.join("sweep.json");
            fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")?;
            let mut m = RunManifest::new("sim", json!({ "scenario": config, "factors": factors }), Some(scenario.seed));
            m.add_output(&path);
            m.write(&dir.join("manifest.json"))?;
        }
        return Ok(());
    }

    let trace = sim_run(&scenario)?;
    let stats = measure_cycles(&trace);
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        let mut m = RunManifest::new("sim", config, Some(scenario.seed));
        let trace_path = dir.join("trace.csv");
        trace.write_csv(std::io::BufWriter::new(fs::File::create(&trace_path)?))?;
        m.add_output(&trace_path);
        if let Ok(s) = &stats {
            let path = dir.join("cycles.json");
            fs::write(&path, serde_json::to_string_pretty(s)? + "\n")?;
            m.add_output(&path);
        }
        m.write(&dir.join("manifest.json"))?;
    }
    let s = stats?;
    println!(
        "cycles {}  lambda_hat {:.3}  lambda0_hat {:.3}  mean q {}  q_min {}  q_max {}  mean cycle {}",
        s.cycles,
        s.lambda_hat,
        s.lambda0_hat,
        ms(s.mean_q),
        ms(s.mean_q_min),
        ms(s.mean_q_max),
        ms(s.mean_duration)
    );
    Ok(())
}

fn parse_weights(text: &str, lambda_aimd: f64, lambda_cubic: f64) -> Result<Vec<MixEntry>> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            let (cc, w) = pair.split_once('=').ok_or_else(|| Error::InvalidInput {
                name: "--weights",
                reason: format!("`{pair}` is not controller=weight"),
            })?;
            let w: f64 = w.trim().parse().map_err(|_| Error::InvalidInput {
                name: "--weights",
                reason: format!("`{w}` is not a number"),
            })?;
            let mut entry = MixEntry::for_controller(cc.trim().parse()?, w);
            entry.lambda = if entry.controller.is_aimd() { lambda_aimd } else { lambda_cubic };
            Ok(entry)
        })
        .collect()
}

fn target(args: TargetArgs) -> Result<()> {
    let mix = parse_weights(&args.weights, args.lambda_aimd, args.lambda_cubic)?;
    let (r_typ, provenance) = match args.rtyp {
        Some(r) => (r, RtypProvenance::Explicit),
        None => {
            let source = DatasetSource::resolve(args.select.dataset.as_deref())?;
            let exclusions = args.select.exclusions();
            let summary = weighted_summary(&source.records()?, &exclusions)?;
            (
                summary.weighted_rtt_ms / 1e3,
                RtypProvenance::Dataset {
                    path: source.name.clone(),
                    sha256: source.sha256(),
                    exclusions,
                    total_users: summary.total_users,
                },
            )
        }
    };
    let inputs = TargetInputs { r_typ, f: args.f, mix };
    let rounding = if args.staged_rounding { Rounding::Staged } else { Rounding::Full };
    let report = build_report(&inputs, rounding, provenance)?;
    let body = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(path) => {
            write_with_manifest("target", path, &body, serde_json::to_value(&report)?, None)?;
            println!("target: {} ({:.0} ms)", ms(report.target_s), report.target_s * 1e3);
        }
        None => print!("{body}"),
    }
    Ok(())
}

#[derive(Serialize)]
struct DatasetReport {
    source: String,
    sha256: String,
    all: pi2lab::DatasetSummary,
    selected: pi2lab::DatasetSummary,
    target_s: f64,
    lambda0_mix: f64,
    users_above_switchover: u64,
    /// Shares below leave out these countries.
    above_curve_exclusions: Vec<String>,
    share_above_world_users: f64,
    share_above_dataset_users: f64,
}

fn dataset(args: DatasetArgs) -> Result<()> {
    let source = DatasetSource::resolve(args.select.dataset.as_deref())?;
    let records = source.records()?;
    let exclusions = args.select.exclusions();
    let mix = default_lambda0_mix();
    let class = classify_switchover(&records, args.target, mix, &CcParams::cubic())?;
    let report = DatasetReport {
        source: source.name.clone(),
        sha256: source.sha256(),
        all: weighted_summary(&records, &[])?,
        selected: weighted_summary(&records, &exclusions)?,
        target_s: args.target,
        lambda0_mix: mix,
        users_above_switchover: class.users_above,
        share_above_world_users: class.share_above(&args.above_exclude, WORLD_INTERNET_USERS),
        share_above_dataset_users: class.share_above(&args.above_exclude, class.total_users),
        above_curve_exclusions: args.above_exclude.clone(),
    };
    let body = serde_json::to_string_pretty(&report)? + "\n";
    let Some(dir) = &args.out else {
        print!("{body}");
        return Ok(());
    };
    fs::create_dir_all(dir)?;
    let config = json!({ "dataset": source.name, "sha256": report.sha256, "exclusions": exclusions, "target_s": args.target });
    let mut m = RunManifest::new("dataset", config, None);

    let summary_path = dir.join("summary.json");
    fs::write(&summary_path, &body)?;
    m.add_output(&summary_path);

    let scatter_path = dir.join("scatter.csv");
    let mut w = csv::Writer::from_path(&scatter_path).map_err(csv_io)?;
    w.write_record(["country", "users", "fixed_mbps", "rtt_loaded_ms", "above_curve"]).map_err(csv_io)?;
    for c in &class.countries {
        w.write_record([
            c.country.clone(),
            c.users.to_string(),
            c.fixed_mbps.to_string(),
            c.rtt_loaded_ms.to_string(),
            c.above_curve.to_string(),
        ])
        .map_err(csv_io)?;
    }
    w.flush()?;
    m.add_output(&scatter_path);

    let curve_path = dir.join("curve.csv");
    let mut body = String::from("rate_pps,rtt_ms\n");
    for (r, t) in switchover_curve(1.0, 1e6, 121, &CcParams::cubic())? {
        body += &format!("{r},{t}\n");
    }
    fs::write(&curve_path, body)?;
    m.add_output(&curve_path);

    m.write(&dir.join("manifest.json"))?;
    println!(
        "weighted RTT {:.2} ms, bandwidth {:.2} Mb/s ({} users); {:.2}% of Internet users above the switchover curve (excluding {})",
        report.selected.weighted_rtt_ms,
        report.selected.weighted_bw_mbps,
        report.selected.total_users,
        report.share_above_world_users * 100.0,
        report.above_curve_exclusions.join(", ")
    );
    Ok(())
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}
