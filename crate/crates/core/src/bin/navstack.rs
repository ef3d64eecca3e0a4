//! Command-line front end: episode simulation, record evaluation, and small
//! inspection utilities over the same file formats.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use navstack::bev::{depth_to_points, project_to_bev, CameraIntrinsics, DepthMap, SegMap};
use navstack::controller::{fuse_with_threshold, weights_from_alphas, Control};
use navstack::geodesy::{self, GeoPoint, Pose};
use navstack::harness::{
    evaluate_records, run_episode, write_report_csv, HarnessError, PredictorChoice, RunConfig,
};
use navstack::record::read_record;

#[derive(Parser)]
#[command(
    name = "navstack",
    version,
    about = "Route-following navigation stack with a closed-loop simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a closed-loop episode from a JSON run configuration.
    Simulate {
        /// Run configuration path; defaults to $NAVSTACK_CONFIG.
        #[arg(env = "NAVSTACK_CONFIG")]
        config: PathBuf,
        /// Override the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the GNSS noise sigma, meters.
        #[arg(long)]
        noise_gnss_m: Option<f64>,
        /// Override the bearing noise sigma, degrees.
        #[arg(long)]
        noise_bearing_deg: Option<f64>,
        /// Override the predictor (oracle | playback | external-stream).
        #[arg(long)]
        predictor: Option<PredictorChoice>,
        /// Override the episode output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score driving records and emit a report.
    Evaluate {
        /// Prediction records (JSON Lines).
        #[arg(required = true)]
        records: Vec<PathBuf>,
        /// Truth records aligned with the predictions; omitted means
        /// self-evaluation.
        #[arg(long, num_args = 1..)]
        truths: Vec<PathBuf>,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a flat CSV (one row per run plus mean/std).
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Transform a global target into the vehicle frame of an origin pose.
    Geodesy {
        /// Origin position as "lat,lon" decimal degrees.
        origin: String,
        /// Target position as "lat,lon" decimal degrees.
        target: String,
        /// Origin bearing, degrees clockwise from north.
        #[arg(long, default_value_t = 0.0)]
        bearing: f64,
    },
    /// Back-project a depth raster and build the BEV semantic grid.
    Bev {
        /// Depth raster (DPF1).
        depth: PathBuf,
        /// Segmentation raster (PGM, class ids).
        seg: PathBuf,
        /// Camera intrinsics JSON; defaults otherwise.
        #[arg(long)]
        intrinsics: Option<PathBuf>,
        /// Output grid (PGM).
        #[arg(long, default_value = "bev.pgm")]
        out: PathBuf,
    },
    /// Fuse agent controls from a CSV of per-tick proposals.
    PolicyTrace {
        /// CSV with header mlp_steering,mlp_throttle,pid_steering,pid_throttle.
        csv: PathBuf,
        /// Fusion alphas "a1,a2,a3".
        #[arg(long, value_delimiter = ',', num_args = 3)]
        alphas: Option<Vec<f64>>,
    },
    /// Render a record's trajectory as SVG plus a per-tick CSV.
    Plot {
        record: PathBuf,
        #[arg(long, default_value = "trajectory.svg")]
        svg: PathBuf,
        #[arg(long, default_value = "trajectory.csv")]
        csv: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::Simulate {
            config,
            seed,
            noise_gnss_m,
            noise_bearing_deg,
            predictor,
            out,
        } => {
            let mut config = RunConfig::load(&config)?;
            if let Some(seed) = seed {
                config.seed = Some(seed);
            }
            if let Some(sigma) = noise_gnss_m {
                config.noise.gnss_sigma_m = sigma;
            }
            if let Some(sigma) = noise_bearing_deg {
                config.noise.bearing_sigma_deg = sigma;
            }
            if let Some(choice) = predictor {
                config.predictor = choice;
            }
            if let Some(out) = out {
                config.out_dir = out;
            }
            let result = run_episode(&config)?;
            // The empty sum is -0.0; keep the printed zero unsigned.
            let total_time: f64 = 0.0
                + result
                    .interventions
                    .iter()
                    .map(|e| e.duration_s(config.vehicle.dt_s))
                    .sum::<f64>();
            println!("record: {}", result.record_path.display());
            println!("finished: {}", result.finished);
            println!("ticks: {}", result.ticks);
            println!(
                "interventions: {} ({:.2} s)",
                result.interventions.len(),
                total_time
            );
            Ok(())
        }
        Command::Evaluate {
            records,
            truths,
            out,
            csv,
        } => {
            let truths = if truths.is_empty() {
                None
            } else {
                Some(truths.as_slice())
            };
            let report = evaluate_records(&records, truths)?;
            let json = serde_json::to_string_pretty(&report)?;
            match out {
                Some(path) => std::fs::write(path, json)?,
                None => println!("{json}"),
            }
            if let Some(path) = csv {
                write_report_csv(&report, &path)?;
            }
            Ok(())
        }
        Command::Geodesy {
            origin,
            target,
            bearing,
        } => {
            let origin = parse_geo(&origin)?;
            let target = parse_geo(&target)?;
            let pose = Pose::new(origin, bearing);
            let local = geodesy::route_point_to_local(&pose, target)?;
            println!("{}", serde_json::to_string(&local)?);
            Ok(())
        }
        Command::Bev {
            depth,
            seg,
            intrinsics,
            out,
        } => {
            let intr = match intrinsics {
                Some(path) => serde_json::from_str(&std::fs::read_to_string(path)?)?,
                None => CameraIntrinsics::default(),
            };
            let depth = DepthMap::read_file(&depth)?;
            let seg = SegMap::read_file(&seg)?;
            let points = depth_to_points(&depth, &intr)?;
            let grid = project_to_bev(&points, &seg)?;
            grid.write_file(&out)?;
            let occupied = grid
                .data
                .iter()
                .filter(|&&c| c != navstack::bev::class::NONE)
                .count();
            println!("grid: {} ({occupied} occupied cells)", out.display());
            Ok(())
        }
        Command::PolicyTrace { csv, alphas } => {
            let alphas = alphas.unwrap_or_else(|| vec![1.0, 1.0, 1.0]);
            let weights = weights_from_alphas(alphas[0], alphas[1], alphas[2])?;
            let mut reader = csv::ReaderBuilder::new()
                .trim(csv::Trim::All)
                .from_path(&csv)?;
            let mut out = csv::Writer::from_writer(std::io::stdout());
            out.write_record(["steering", "throttle"])?;
            for row in reader.deserialize() {
                let row: AgentRow = row?;
                let fused = fuse_with_threshold(
                    Control::new(row.mlp_steering, row.mlp_throttle),
                    Control::new(row.pid_steering, row.pid_throttle),
                    &weights,
                    navstack::controller::AGENT_ACTIVE_THRESHOLD,
                );
                out.write_record([
                    format!("{:.6}", fused.steering),
                    format!("{:.6}", fused.throttle),
                ])?;
            }
            out.flush()?;
            Ok(())
        }
        Command::Plot { record, svg, csv } => {
            plot_record(&record, &svg, &csv)?;
            println!("svg: {}", svg.display());
            println!("csv: {}", csv.display());
            Ok(())
        }
    }
}

#[derive(serde::Deserialize)]
struct AgentRow {
    mlp_steering: f64,
    mlp_throttle: f64,
    pid_steering: f64,
    pid_throttle: f64,
}

fn parse_geo(text: &str) -> Result<GeoPoint, HarnessError> {
    let mut parts = text.split(',');
    let parse = |s: Option<&str>| -> Result<f64, HarnessError> {
        s.ok_or_else(|| HarnessError::Config(format!("expected \"lat,lon\", got {text:?}")))?
            .trim()
            .parse::<f64>()
            .map_err(|e| HarnessError::Config(format!("bad coordinate in {text:?}: {e}")))
    };
    let lat = parse(parts.next())?;
    let lon = parse(parts.next())?;
    if parts.next().is_some() {
        return Err(HarnessError::Config(format!(
            "expected \"lat,lon\", got {text:?}"
        )));
    }
    GeoPoint::new(lat, lon).map_err(|e| HarnessError::Config(e.to_string()))
}

fn plot_record(record: &Path, svg_path: &Path, csv_path: &Path) -> Result<(), HarnessError> {
    let (_, ticks) = read_record(record)?;
    if ticks.is_empty() {
        return Err(HarnessError::Config("record has no ticks".into()));
    }
    let origin = ticks[0].gnss;
    let positions: Vec<(f64, f64, bool)> = ticks
        .iter()
        .map(|t| {
            let off = geodesy::geo_to_offset(origin, t.gnss)?;
            Ok((off.dx_m, off.dy_m, t.intervention_flag))
        })
        .collect::<Result<_, navstack::geodesy::GeodesyError>>()?;

    // Per-tick CSV.
    let mut out = csv::Writer::from_path(csv_path)?;
    out.write_record([
        "t",
        "x_east_m",
        "y_north_m",
        "bearing_deg",
        "steering",
        "throttle",
        "omega_l",
        "omega_r",
        "command",
        "intervention",
    ])?;
    for (tick, &(x, y, _)) in ticks.iter().zip(&positions) {
        out.write_record([
            tick.t.to_string(),
            format!("{x:.4}"),
            format!("{y:.4}"),
            format!("{:.3}", tick.bearing_deg),
            format!("{:.4}", tick.steering),
            format!("{:.4}", tick.throttle),
            format!("{:.4}", tick.omega_l),
            format!("{:.4}", tick.omega_r),
            format!("{:?}", tick.rp_window.command),
            tick.intervention_flag.to_string(),
        ])?;
    }
    out.flush()?;

    // Trajectory SVG: normal driving in blue, supervised ticks in red.
    let (mut min_x, mut min_y, mut max_x, mut max_y) = (
        f64::INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y, _) in &positions {
        min_x = min_x.min(x);
        min_y = min_y.min(y);
        max_x = max_x.max(x);
        max_y = max_y.max(y);
    }
    let pad = 2.0;
    let (min_x, min_y) = (min_x - pad, min_y - pad);
    let (max_x, max_y) = (max_x + pad, max_y + pad);
    let scale = 600.0 / (max_x - min_x).max(max_y - min_y);
    let width = ((max_x - min_x) * scale).ceil();
    let height = ((max_y - min_y) * scale).ceil();
    let to_px = |x: f64, y: f64| ((x - min_x) * scale, (max_y - y) * scale);

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    ));
    for pair in positions.windows(2) {
        let (x1, y1) = to_px(pair[0].0, pair[0].1);
        let (x2, y2) = to_px(pair[1].0, pair[1].1);
        let color = if pair[1].2 { "#d33" } else { "#36c" };
        svg.push_str(&format!(
            "<line x1=\"{x1:.1}\" y1=\"{y1:.1}\" x2=\"{x2:.1}\" y2=\"{y2:.1}\" \
             stroke=\"{color}\" stroke-width=\"2\"/>\n"
        ));
    }
    let (sx, sy) = to_px(positions[0].0, positions[0].1);
    let (ex, ey) = to_px(positions.last().unwrap().0, positions.last().unwrap().1);
    svg.push_str(&format!(
        "<circle cx=\"{sx:.1}\" cy=\"{sy:.1}\" r=\"5\" fill=\"#2a2\"/>\n\
         <circle cx=\"{ex:.1}\" cy=\"{ey:.1}\" r=\"5\" fill=\"#222\"/>\n</svg>\n"
    ));
    std::fs::write(svg_path, svg)?;
    Ok(())
}
