//! The closed 4 Hz loop: sense -> route window -> predict -> fuse ->
//! supervise -> step, logging one record line per tick.

use std::path::PathBuf;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bev::{depth_to_points, project_to_bev};
use crate::controller::{fuse_with_threshold, weights_from_alphas, PidAgent};
use crate::geodesy::Pose;
use crate::harness::config::{BevSource, HarnessError, PredictorChoice, RunConfig};
use crate::predictor::stream::ProcessPredictor;
use crate::predictor::{
    playback_predict, pure_pursuit_predict, ObservationBundle, PredictionOutput,
};
use crate::record::{
    read_record, write_record, RecordHeader, RpWindowRecord, TickRecord, RECORD_SCHEMA,
};
use crate::route::{command, Route, RouteTracker};
use crate::sim::{
    sense, topdown_bev, wheel_speeds, InterventionEvent, Supervisor, VehicleState, World,
};

#[derive(Debug)]
pub struct EpisodeResult {
    pub record_path: PathBuf,
    pub finished: bool,
    pub ticks: u64,
    pub interventions: Vec<InterventionEvent>,
    /// Closest the vehicle center ever came to an obstacle footprint.
    pub min_obstacle_clearance_m: f64,
}

enum ActivePredictor {
    Oracle,
    Playback(Vec<TickRecord>),
    External(ProcessPredictor),
}

/// Runs one episode to route completion or the tick limit. The run directory
/// receives a copy of the effective config plus the JSON Lines record;
/// identical configs and seeds produce byte-identical records.
pub fn run_episode(config: &RunConfig) -> Result<EpisodeResult, HarnessError> {
    config.validate()?;
    let seed = config.seed.expect("validated");

    let mut world = World::load(&config.world)?;
    if let Some(route_path) = &config.route {
        let route = Route::from_json_file(route_path)?;
        world.set_route(route)?;
    }
    for warning in world.route.spacing_warnings() {
        eprintln!("warning: {warning}");
    }

    std::fs::create_dir_all(&config.out_dir)?;
    let raster_dir = config.out_dir.join("rasters");
    if config.save_rasters {
        std::fs::create_dir_all(&raster_dir)?;
    }
    std::fs::write(
        config.out_dir.join("config.json"),
        serde_json::to_string_pretty(config)?,
    )?;

    let mut predictor = match config.predictor {
        PredictorChoice::Oracle => ActivePredictor::Oracle,
        PredictorChoice::Playback => {
            let path = config.playback_record.as_ref().expect("validated");
            let (_, ticks) = read_record(path)?;
            ActivePredictor::Playback(ticks)
        }
        PredictorChoice::ExternalStream => {
            ActivePredictor::External(ProcessPredictor::spawn(&config.external_cmd)?)
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = VehicleState::at_rest(world.start);
    let mut tracker = RouteTracker::new(&world.route);
    let weights = weights_from_alphas(config.alphas[1], config.alphas[2], config.alphas[3])?;
    let mut pid_agent = PidAgent::new(
        config.controller.lateral,
        config.controller.longitudinal,
        config.controller.integral_bound,
        config.controller.speed_gain,
    );
    pid_agent.reset();
    let mut supervisor = Supervisor::new(config.supervisor);

    let render_camera = config.bev_source == BevSource::Camera || config.save_rasters;
    let mut ticks: Vec<TickRecord> = Vec::new();
    let mut finished = false;
    let mut min_clearance = f64::INFINITY;

    for tick in 0..config.episode_limit_ticks {
        let wheels = wheel_speeds(&state, &config.vehicle);
        let sensed = sense(
            &world,
            &state,
            &config.intrinsics,
            &config.noise,
            &mut rng,
            render_camera,
        )?;
        let pose_est = Pose::new(sensed.gnss, sensed.bearing_deg);

        let (next_tracker, done) = tracker.advance(&pose_est)?;
        tracker = next_tracker;
        if done {
            finished = true;
            break;
        }
        let window = tracker.window(&pose_est)?;

        let bev = match config.bev_source {
            BevSource::Topdown => topdown_bev(&world, &state.pose)?,
            BevSource::Camera => {
                let depth = sensed.depth.as_ref().expect("camera mode renders depth");
                let seg = sensed.seg.as_ref().expect("camera mode renders seg");
                let points = depth_to_points(depth, &config.intrinsics)?;
                project_to_bev(&points, seg)?
            }
        };
        let bundle = ObservationBundle {
            bev,
            window,
            wheels,
        };

        let prediction: PredictionOutput = match &mut predictor {
            ActivePredictor::Oracle => {
                pure_pursuit_predict(&bundle, config.speed_target_mps, &config.oracle)
            }
            ActivePredictor::Playback(recorded) => {
                match playback_predict(recorded, tick as usize) {
                    Ok(waypoints) => PredictionOutput {
                        waypoints,
                        control: crate::controller::Control::stop(),
                    },
                    // Past the replayable range: stop output.
                    Err(crate::predictor::PredictorError::EndOfRecord { .. }) => {
                        PredictionOutput::stop()
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            ActivePredictor::External(process) => {
                process.predict(&bundle, tick, config.speed_target_mps)?
            }
        };

        let pid_control = pid_agent.step(&prediction.waypoints, &wheels, config.vehicle.dt_s)?;
        let fused = fuse_with_threshold(
            prediction.control,
            pid_control,
            &weights,
            config.controller.agent_threshold,
        );
        let (applied, supervised) =
            supervisor.arbitrate(&world, &state, fused, &config.vehicle, tick)?;

        let (depth_path, seg_path) = if config.save_rasters {
            let depth = sensed.depth.as_ref().expect("rasters rendered");
            let seg = sensed.seg.as_ref().expect("rasters rendered");
            let depth_rel = format!("rasters/depth_{tick:05}.dpf");
            let seg_rel = format!("rasters/seg_{tick:05}.pgm");
            depth.write_file(&config.out_dir.join(&depth_rel))?;
            seg.write_file(&config.out_dir.join(&seg_rel))?;
            (Some(depth_rel), Some(seg_rel))
        } else {
            (None, None)
        };

        let at = world.local_of(state.pose.position)?;
        min_clearance = min_clearance.min(world.obstacle_clearance(at.dx_m, at.dy_m));

        ticks.push(TickRecord {
            t: tick,
            gnss: sensed.gnss,
            bearing_deg: sensed.bearing_deg,
            omega_l: wheels.omega_l,
            omega_r: wheels.omega_r,
            steering: applied.steering,
            throttle: applied.throttle,
            rp_window: RpWindowRecord {
                index: tracker.current_index(),
                rp1: [window.rp1.x_m, window.rp1.y_m],
                rp2: [window.rp2.x_m, window.rp2.y_m],
                command: command(&window),
            },
            depth_path,
            seg_path,
            waypoints_pred: [
                [prediction.waypoints.wp1.x_m, prediction.waypoints.wp1.y_m],
                [prediction.waypoints.wp2.x_m, prediction.waypoints.wp2.y_m],
                [prediction.waypoints.wp3.x_m, prediction.waypoints.wp3.y_m],
            ],
            waypoints_gt: None,
            intervention_flag: supervised,
            intervention_cause: supervised.then(|| supervisor.current_cause()).flatten(),
        });

        state = crate::sim::step(&state, applied, &config.vehicle)?;
    }

    let last_tick = ticks.last().map_or(0, |t| t.t);
    let interventions = supervisor.finish(last_tick);

    // Waypoint ground truth from the record's own trajectory (the +1/2/3 s
    // rule); the tail without enough future stays unset.
    let snapshot = ticks.clone();
    for (i, tick) in ticks.iter_mut().enumerate() {
        if let Ok(wp) = playback_predict(&snapshot, i) {
            tick.waypoints_gt = Some([
                [wp.wp1.x_m, wp.wp1.y_m],
                [wp.wp2.x_m, wp.wp2.y_m],
                [wp.wp3.x_m, wp.wp3.y_m],
            ]);
        }
    }

    let record_path = config.out_dir.join("record.jsonl");
    let header = RecordHeader {
        schema: RECORD_SCHEMA.to_string(),
        seed,
        config: config.clone(),
    };
    write_record(&record_path, &header, &ticks)?;

    Ok(EpisodeResult {
        record_path,
        finished,
        ticks: ticks.len() as u64,
        interventions,
        min_obstacle_clearance_m: min_clearance,
    })
}
