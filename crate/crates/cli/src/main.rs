//! `saccade`: run, serve, benchmark and render the saccade planner.
//!
//! Exit codes: 0 success, 2 configuration error, 3 runtime error. The log
//! level comes from `SACCADE_LOG` (default `warn`).

mod serve;

use std::fs;
use std::io::{BufReader, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use saccade_core::bench::{bench_grid, BenchRow};
use saccade_core::render::{render_ascii, render_csv};
use saccade_core::sim::read_trace;
use saccade_core::{run_episode, Agent, EpisodeOptions, EpisodeSummary, GridSpec, PlannerConfig, Scenario};

const LOG_ENV: &str = "SACCADE_LOG";

#[derive(Parser)]
#[command(name = "saccade", version, about = "Active-inference saccade planner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario in the simulated world and write an NDJSON trace.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 100)]
        steps: usize,
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Write measured latency into the trace (makes it non-reproducible).
        #[arg(long)]
        trace_latency: bool,
        /// Leave belief snapshots out of the trace.
        #[arg(long)]
        no_snapshots: bool,
        /// Print the summary as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Answer frame records with action records over stdio or TCP.
    Serve {
        #[arg(long, value_enum, default_value_t = Transport::Stdio)]
        transport: Transport,
        #[arg(long, default_value_t = 7878)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Planner config, or a scenario whose `planner` section is used.
        #[arg(long)]
        config: PathBuf,
        /// Under lag, fold queued frames into the belief and answer only the newest.
        #[arg(long)]
        latest_wins: bool,
        /// TCP only: exit after this many client connections.
        #[arg(long)]
        max_connections: Option<usize>,
    },
    /// Time belief update plus planning per grid size.
    Bench {
        /// Comma-separated `KxL/WxH` grids.
        #[arg(long, default_value = "16x16/5x5", value_delimiter = ',')]
        grids: Vec<GridArg>,
        #[arg(long, default_value_t = 1000)]
        reps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Draw a trace as ASCII grids or per-step CSV.
    Render {
        #[arg(long)]
        trace: PathBuf,
        #[arg(long, value_enum, default_value_t = RenderMode::Ascii)]
        mode: RenderMode,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Transport {
    Stdio,
    Tcp,
}

#[derive(Clone, Copy, ValueEnum)]
enum RenderMode {
    Ascii,
    Csv,
}

#[derive(Debug, Clone, Copy)]
struct GridArg(GridSpec);

impl FromStr for GridArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected KxL/WxH like 16x16/5x5, got `{s}`");
        let (grid, fov) = s.trim().split_once('/').ok_or_else(bad)?;
        let pair = |p: &str| -> Result<(usize, usize), String> {
            let (a, b) = p.split_once(['x', 'X']).ok_or_else(bad)?;
            Ok((a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?))
        };
        let (k, l) = pair(grid)?;
        let (w, h) = pair(fov)?;
        GridSpec::new(k, l, w, h).map(GridArg).map_err(|e| e.to_string())
    }
}

enum Failure {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    fn from_core(e: saccade_core::Error) -> Self {
        use saccade_core::Error::*;
        match e {
            Config { .. } | InvalidGrid(_) | InvalidProbability { .. } | InvalidSensor(_) => Failure::Config(e.into()),
            _ => Failure::Runtime(e.into()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn read_config_file(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Config(anyhow!("cannot read {}: {e}", path.display())))
}

fn in_file(path: &Path) -> impl Fn(saccade_core::Error) -> Failure + '_ {
    move |e| match Failure::from_core(e) {
        Failure::Config(e) => Failure::Config(e.context(format!("in {}", path.display()))),
        other => other,
    }
}

fn simulate(
    scenario_path: &Path,
    steps: usize,
    trace_path: Option<&Path>,
    options: EpisodeOptions,
    json: bool,
) -> CmdResult {
    let scenario = Scenario::from_json(&read_config_file(scenario_path)?).map_err(in_file(scenario_path))?;
    let trace = run_episode(&scenario, steps, options).map_err(Failure::from_core)?;
    if let Some(path) = trace_path {
        fs::write(path, trace.to_ndjson())
            .with_context(|| format!("cannot write trace {}", path.display()))
            .map_err(Failure::Runtime)?;
        info!("wrote {} records to {}", trace.records.len(), path.display());
    }
    let text = if json {
        serde_json::to_string_pretty(&trace.summary).expect("summary serializes") + "\n"
    } else {
        summary_text(&trace.summary)
    };
    print_stdout(&text)
}

fn summary_text(s: &EpisodeSummary) -> String {
    let opt = |v: Option<usize>| v.map_or("not reached".to_string(), |n| n.to_string());
    let mut out = format!(
        "steps: {}\ncoverage_steps: {}\nsteps_to_detect: {}\nmean_tracking_error: {}\n",
        s.steps,
        opt(s.coverage_steps),
        opt(s.steps_to_detect),
        s.mean_tracking_error.map_or("n/a".to_string(), |e| format!("{e:.3}")),
    );
    if let Some(l) = s.latency {
        out += &format!(
            "latency_us: min {:.1} median {:.1} p99 {:.1} max {:.1}\n",
            l.min_us, l.median_us, l.p99_us, l.max_us
        );
    }
    out += &format!("malformed_detections: {}\n", s.malformed_detections);
    out
}

fn load_planner(path: &Path) -> Result<PlannerConfig, Failure> {
    let text = read_config_file(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Config(anyhow!("{}: {e}", path.display())))?;
    if value.get("planner").is_some() {
        Ok(Scenario::from_json(&text).map_err(in_file(path))?.planner)
    } else {
        PlannerConfig::from_json(&text).map_err(in_file(path))
    }
}

fn serve(
    transport: Transport,
    host: &str,
    port: u16,
    config: &Path,
    latest_wins: bool,
    max_connections: Option<usize>,
) -> CmdResult {
    let mut agent = Agent::new(load_planner(config)?).map_err(in_file(config))?;
    let runtime = |e: std::io::Error| Failure::Runtime(e.into());
    match transport {
        Transport::Stdio => {
            let stats = serve::serve_stdio(&mut agent, latest_wins).map_err(runtime)?;
            info!("served {stats:?}");
        }
        Transport::Tcp => {
            let listener = TcpListener::bind((host, port))
                .with_context(|| format!("cannot bind {host}:{port}"))
                .map_err(Failure::Runtime)?;
            // always announced, so callers that asked for port 0 can find the socket
            eprintln!("listening on {}", listener.local_addr().map_err(runtime)?);
            serve::serve_tcp(&mut agent, listener, latest_wins, max_connections).map_err(runtime)?;
        }
    }
    Ok(())
}

fn bench(grids: &[GridArg], reps: usize, seed: u64, json: bool) -> CmdResult {
    let mut rows = Vec::new();
    for g in grids {
        rows.push(bench_grid(g.0, reps, seed).map_err(Failure::from_core)?);
    }
    let text = if json {
        serde_json::to_string_pretty(&rows).expect("bench rows serialize") + "\n"
    } else {
        bench_table(&rows)
    };
    print_stdout(&text)
}

fn bench_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:<12} {:>6} {:>10} {:>10} {:>10} {:>10}\n",
        "grid", "reps", "min_us", "median_us", "p99_us", "max_us"
    );
    for r in rows {
        let g = r.grid;
        let name = format!("{}x{}/{}x{}", g.pan_blocks(), g.tilt_blocks(), g.fov_width(), g.fov_height());
        out += &format!(
            "{:<12} {:>6} {:>10.1} {:>10.1} {:>10.1} {:>10.1}\n",
            name, r.repetitions, r.stats.min_us, r.stats.median_us, r.stats.p99_us, r.stats.max_us
        );
    }
    for r in rows {
        let g = r.grid;
        out += &format!(
            "params {}x{}/{}x{}: belief {} + likelihood {} + preferences {} = {}\n",
            g.pan_blocks(),
            g.tilt_blocks(),
            g.fov_width(),
            g.fov_height(),
            r.model.belief,
            r.model.likelihood,
            r.model.preferences,
            r.model.total()
        );
    }
    out
}

fn render(path: &Path, mode: RenderMode) -> CmdResult {
    let file = fs::File::open(path).map_err(|e| Failure::Config(anyhow!("cannot read {}: {e}", path.display())))?;
    let (records, skipped) = read_trace(BufReader::new(file))
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Runtime)?;
    if skipped > 0 {
        log::warn!("skipped {skipped} corrupt trace lines");
    }
    let text = match mode {
        RenderMode::Ascii => render_ascii(&records),
        RenderMode::Csv => render_csv(&records),
    };
    print_stdout(&text)
}

fn print_stdout(text: &str) -> CmdResult {
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Ok(()) => Ok(()),
        // a closed pipe (`| head`) is not a failure
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        Err(e) => Err(Failure::Runtime(e.into())),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate {
            scenario,
            steps,
            trace,
            trace_latency,
            no_snapshots,
            json,
        } => {
            let options = EpisodeOptions {
                record_latency: trace_latency,
                snapshots: !no_snapshots,
            };
            simulate(&scenario, steps, trace.as_deref(), options, json)
        }
        Command::Serve {
            transport,
            port,
            host,
            config,
            latest_wins,
            max_connections,
        } => serve(transport, &host, port, &config, latest_wins, max_connections),
        Command::Bench { grids, reps, seed, json } => bench(&grids, reps, seed, json),
        Command::Render { trace, mode } => render(&trace, mode),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(3)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_arguments() {
        let g = "16x16/5x5".parse::<GridArg>().unwrap().0;
        assert_eq!((g.pan_blocks(), g.tilt_blocks(), g.fov_width(), g.fov_height()), (16, 16, 5, 5));
        let g = "12X8/3x1".parse::<GridArg>().unwrap().0;
        assert_eq!((g.pan_blocks(), g.fov_height()), (12, 1));
        assert!("16x16".parse::<GridArg>().is_err());
        assert!("3x3/5x5".parse::<GridArg>().is_err());
        assert!("ax3/1x1".parse::<GridArg>().is_err());
    }

    #[test]
    fn summary_lines() {
        let s = EpisodeSummary {
            steps: 9,
            coverage_steps: Some(9),
            steps_to_detect: None,
            mean_tracking_error: None,
            latency: None,
            malformed_detections: 0,
        };
        let text = summary_text(&s);
        assert!(text.contains("coverage_steps: 9\n"));
        assert!(text.contains("steps_to_detect: not reached\n"));
    }
}
