//! Training-data collection: drives the simulator with an excitation policy
//! and records `(x_t, u_t, M_t, x_{t+1})` tuples at the controller period.
//!
//! Episodes reset on rollover or when the vehicle leaves the safe interior
//! of the grid (where the local crop would run off the map). The per-episode
//! step index restarts at zero on reset, which is how consumers recover
//! episode boundaries from the flat record stream.

use crate::se3::Pose;
use crate::sim::{SimError, Simulator, VehicleParams, CONTROL_DT};
use crate::terrain::{add_observation_noise, crop_local_map, ElevationGrid, RallyTrackLayout};
use crate::{derive_seed, ControlInput, VehicleState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

/// Excitation policies for data collection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ExcitationPolicy {
    /// Uniform-increment random walk on (δ, v_des), reflected into bounds.
    UniformRandomWalk { steer_step: f64, vdes_step: f64, v_max: f64 },
    /// Steering sinusoid with a swept period plus a slow speed sinusoid.
    SinusoidalSweep {
        steer_amp: f64,
        period_lo: f64,
        period_hi: f64,
        sweep_seconds: f64,
        v_lo: f64,
        v_hi: f64,
    },
    /// Pure-pursuit laps of the bundled rally loop at a fixed desired speed.
    ScriptedLaps { layout: RallyTrackLayout, v_des: f64, lookahead: f64 },
}

impl ExcitationPolicy {
    pub fn default_random_walk(v_max: f64) -> Self {
        Self::UniformRandomWalk { steer_step: 0.08, vdes_step: 0.35, v_max }
    }

    pub fn default_sweep(v_max: f64) -> Self {
        Self::SinusoidalSweep {
            steer_amp: 0.35,
            period_lo: 2.0,
            period_hi: 8.0,
            sweep_seconds: 40.0,
            v_lo: 1.0,
            v_hi: v_max,
        }
    }
}

/// Mutable per-episode policy state.
struct PolicyState {
    steer: f64,
    v_des: f64,
    tick: u64,
}

impl ExcitationPolicy {
    fn reset(&self, rng: &mut ChaCha8Rng) -> PolicyState {
        match self {
            Self::UniformRandomWalk { v_max, .. } => PolicyState {
                steer: 0.0,
                v_des: rng.gen_range(0.0..*v_max),
                tick: 0,
            },
            _ => PolicyState { steer: 0.0, v_des: 0.0, tick: 0 },
        }
    }

    fn action(
        &self,
        st: &mut PolicyState,
        state: &VehicleState,
        params: &VehicleParams,
        rng: &mut ChaCha8Rng,
    ) -> ControlInput {
        let t = st.tick as f64 * CONTROL_DT;
        st.tick += 1;
        match self {
            Self::UniformRandomWalk { steer_step, vdes_step, v_max } => {
                st.steer = (st.steer + rng.gen_range(-steer_step..=*steer_step))
                    .clamp(-params.max_steer, params.max_steer);
                st.v_des = (st.v_des + rng.gen_range(-vdes_step..=*vdes_step))
                    .clamp(0.0, v_max.min(params.max_speed));
                ControlInput::new(st.steer, st.v_des)
            }
            Self::SinusoidalSweep {
                steer_amp,
                period_lo,
                period_hi,
                sweep_seconds,
                v_lo,
                v_hi,
            } => {
                let frac = (t / sweep_seconds).fract();
                let period = period_lo + (period_hi - period_lo) * frac;
                let steer = steer_amp * (std::f64::consts::TAU * t / period).sin();
                let v_mid = 0.5 * (v_lo + v_hi);
                let v_amp = 0.5 * (v_hi - v_lo);
                let v_des = v_mid + v_amp * (std::f64::consts::TAU * t / (3.7 * period)).sin();
                ControlInput::new(steer, v_des).clamped(params.max_steer, params.max_speed)
            }
            Self::ScriptedLaps { layout, v_des, lookahead } => {
                let p = state.pose.position;
                let s = layout.progress(p.x, p.y);
                let (tx, ty) = layout.point_at(s + lookahead);
                let dx = tx - p.x;
                let dy = ty - p.y;
                let alpha = dy.atan2(dx) - state.pose.euler.yaw;
                let alpha = crate::se3::wrap_angle(alpha);
                let ld = (dx * dx + dy * dy).sqrt().max(1e-6);
                let steer = (2.0 * params.wheelbase() * alpha.sin() / ld).atan();
                ControlInput::new(steer, *v_des).clamped(params.max_steer, params.max_speed)
            }
        }
    }
}

/// One training tuple at the controller period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Record {
    /// Step index within the episode; 0 marks an episode start.
    pub t: u64,
    /// State before the step, `[v, ω, p, e]`.
    pub x: [f64; 12],
    /// Control held during the step.
    pub u: [f64; 2],
    /// Local elevation map at the pre-step pose, row-major relative heights.
    #[serde(rename = "M")]
    pub m: Vec<f32>,
    /// State after the step.
    pub x_next: [f64; 12],
}

/// First line of the JSON-lines dataset file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub dt: f64,
    /// Local map side length, cells.
    pub l: usize,
    /// Local map resolution, m/cell.
    pub resolution: f64,
    pub vehicle_params_hash: String,
    pub seed: u64,
    /// Manifest hash over all record lines.
    pub records_sha256: String,
    pub n_records: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub records: Vec<Record>,
}

impl Dataset {
    /// Velocity-change target for a record: `x_next[..6] − x[..6]`.
    pub fn target(record: &Record) -> [f64; 6] {
        let mut d = [0.0; 6];
        for i in 0..6 {
            d[i] = record.x_next[i] - record.x[i];
        }
        d
    }
}

/// Collection options beyond the policy itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollectConfig {
    /// Local map side, cells (odd).
    pub local_map_side: usize,
    /// Observation noise applied to recorded crops, m.
    pub map_noise_sigma: f64,
    /// Settling time after each spawn, s (not recorded).
    pub settle_seconds: f64,
}

impl Default for CollectConfig {
    fn default() -> Self {
        Self { local_map_side: 65, map_noise_sigma: 0.01, settle_seconds: 0.6 }
    }
}

/// Margin from the grid boundary inside which episodes are allowed to run:
/// crop half-diagonal plus headroom for one tick of motion.
fn safe_margin(cfg: &CollectConfig, grid: &ElevationGrid, params: &VehicleParams) -> f64 {
    let crop_half = cfg.local_map_side as f64 * grid.geometry.resolution * 0.5;
    crop_half * std::f64::consts::SQRT_2 + params.footprint_radius() + params.max_speed * CONTROL_DT
}

fn inside_safe(grid: &ElevationGrid, margin: f64, x: f64, y: f64) -> bool {
    let (x0, y0, x1, y1) = grid.extent();
    x >= x0 + margin && x <= x1 - margin && y >= y0 + margin && y <= y1 - margin
}

/// Drives the simulator under the excitation policy for `n_steps` controller
/// ticks and returns the recorded tuples. Deterministic per seed.
pub fn collect_dataset(
    grid: &ElevationGrid,
    policy: &ExcitationPolicy,
    params: &VehicleParams,
    cfg: &CollectConfig,
    n_steps: usize,
    seed: u64,
) -> Result<Dataset, SimError> {
    assert!(cfg.local_map_side % 2 == 1, "local map side must be odd");
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0x01));
    let margin = safe_margin(cfg, grid, params);
    let (x0, y0, x1, y1) = grid.extent();
    assert!(
        x1 - x0 > 2.0 * margin && y1 - y0 > 2.0 * margin,
        "grid too small for the configured crop"
    );

    let mut records = Vec::with_capacity(n_steps);
    let mut episode: Option<(Simulator, PolicyState)> = None;
    let mut episode_tick: u64 = 0;

    while records.len() < n_steps {
        if episode.is_none() {
            let (sx, sy, syaw) = match policy {
                ExcitationPolicy::ScriptedLaps { layout, .. } => {
                    let (px, py, pyaw) = layout.start_position();
                    (px, py + rng.gen_range(-1.0..1.0), pyaw)
                }
                _ => (
                    rng.gen_range(x0 + margin..x1 - margin),
                    rng.gen_range(y0 + margin..y1 - margin),
                    rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                ),
            };
            let mut sim = Simulator::spawn(params.clone(), grid, sx, sy, syaw)?;
            sim.settle(grid, cfg.settle_seconds)?;
            let pstate = policy.reset(&mut rng);
            episode = Some((sim, pstate));
            episode_tick = 0;
        }

        let (sim, pstate) = episode.as_mut().unwrap();
        let state = *sim.state();
        let pose = Pose { position: state.pose.position, euler: state.pose.euler };

        let map = match crop_local_map(grid, &pose, cfg.local_map_side) {
            Ok(m) => m,
            Err(_) => {
                episode = None;
                continue;
            }
        };
        let map = if cfg.map_noise_sigma > 0.0 {
            add_observation_noise(
                &map,
                cfg.map_noise_sigma,
                derive_seed(seed, 0x1000 + records.len() as u64),
            )
        } else {
            map
        };

        let u = policy.action(pstate, &state, params, &mut rng);
        match sim.control_step(u, grid) {
            Ok(()) => {}
            Err(SimError::Terrain(_)) => {
                episode = None;
                continue;
            }
            Err(e) => return Err(e),
        }

        let next = *sim.state();
        records.push(Record {
            t: episode_tick,
            x: state.to_array(),
            u: u.to_array(),
            m: map.cells,
            x_next: next.to_array(),
        });
        episode_tick += 1;

        let p = next.pose.position;
        if sim.sim.is_rolled_over() || !inside_safe(grid, margin, p.x, p.y) {
            episode = None;
        }
    }

    let header = DatasetHeader {
        dt: CONTROL_DT,
        l: cfg.local_map_side,
        resolution: grid.geometry.resolution,
        vehicle_params_hash: params.params_hash(),
        seed,
        records_sha256: records_hash(&records),
        n_records: records.len(),
    };
    Ok(Dataset { header, records })
}

fn records_hash(records: &[Record]) -> String {
    use sha2::{Digest, Sha256};
    let mut h = Sha256::new();
    for r in records {
        h.update(serde_json::to_string(r).unwrap().as_bytes());
        h.update(b"\n");
    }
    hex::encode(h.finalize())
}

/// Writes the dataset as JSON-lines: a header line followed by one record
/// per line.
pub fn write_dataset(ds: &Dataset, path: &Path) -> std::io::Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer(&mut w, &ds.header)?;
    w.write_all(b"\n")?;
    for r in &ds.records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

/// Reads a JSON-lines dataset, verifying the record manifest hash.
pub fn read_dataset(path: &Path) -> std::io::Result<Dataset> {
    let file = std::fs::File::open(path)?;
    let mut lines = std::io::BufReader::new(file).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidData, "empty dataset"))??;
    let header: DatasetHeader = serde_json::from_str(&header_line)?;
    let mut records = Vec::with_capacity(header.n_records);
    for line in lines {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        records.push(serde_json::from_str::<Record>(&line)?);
    }
    let actual = records_hash(&records);
    if actual != header.records_sha256 {
        return Err(std::io::Error::new(
            std::io::ErrorKind::InvalidData,
            format!(
                "dataset manifest hash mismatch: header {} vs payload {}",
                header.records_sha256, actual
            ),
        ));
    }
    Ok(Dataset { header, records })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::terrain::{generate_terrain, GridGeometry, TerrainRecipe};

    fn small_grid() -> ElevationGrid {
        let geom = GridGeometry::covering(-40.0, -40.0, 40.0, 40.0, 0.2);
        generate_terrain(geom, &TerrainRecipe::Flat { height: 0.0 }, 0).unwrap()
    }

    fn small_cfg() -> CollectConfig {
        CollectConfig { local_map_side: 21, map_noise_sigma: 0.0, settle_seconds: 0.2 }
    }

    #[test]
    fn zero_steps_gives_empty_dataset() {
        let grid = small_grid();
        let params = VehicleParams::default();
        let ds = collect_dataset(
            &grid,
            &ExcitationPolicy::default_random_walk(5.0),
            &params,
            &small_cfg(),
            0,
            1,
        )
        .unwrap();
        assert!(ds.records.is_empty());
        assert_eq!(ds.header.n_records, 0);
    }

    #[test]
    fn zero_controls_on_flat_terrain_give_near_zero_targets() {
        let grid = small_grid();
        let params = VehicleParams::default();
        // A random walk with zero step size and zero initial speed never moves.
        let policy = ExcitationPolicy::UniformRandomWalk {
            steer_step: 0.0,
            vdes_step: 0.0,
            v_max: 1e-12,
        };
        let ds = collect_dataset(&grid, &policy, &params, &small_cfg(), 50, 3).unwrap();
        for r in &ds.records {
            for d in Dataset::target(r) {
                assert!(d.abs() < 1e-4, "velocity change {d}");
            }
        }
    }

    #[test]
    fn collection_is_deterministic_and_tuples_are_consistent() {
        let geom = GridGeometry::covering(-50.0, -50.0, 50.0, 50.0, 0.2);
        let grid = generate_terrain(
            geom,
            &TerrainRecipe::FractalNoise { amplitude: 0.2, wavelength: 8.0, octaves: 3 },
            5,
        )
        .unwrap();
        let params = VehicleParams::default();
        let cfg = CollectConfig { map_noise_sigma: 0.01, ..small_cfg() };
        let policy = ExcitationPolicy::default_random_walk(6.0);
        let a = collect_dataset(&grid, &policy, &params, &cfg, 120, 9).unwrap();
        let b = collect_dataset(&grid, &policy, &params, &cfg, 120, 9).unwrap();
        assert_eq!(a.header.records_sha256, b.header.records_sha256);

        let side = cfg.local_map_side;
        let mut prev_t = None;
        for r in &a.records {
            assert_eq!(r.m.len(), side * side);
            assert!(r.m.iter().all(|c| c.is_finite()));
            assert!(r.x.iter().chain(&r.u).chain(&r.x_next).all(|v| v.is_finite()));
            // Episode tick either starts at 0 or increments.
            match prev_t {
                Some(p) => assert!(r.t == 0 || r.t == p + 1),
                None => assert_eq!(r.t, 0),
            }
            prev_t = Some(r.t);
        }
    }

    #[test]
    fn jsonl_round_trip_preserves_everything() {
        let grid = small_grid();
        let params = VehicleParams::default();
        let ds = collect_dataset(
            &grid,
            &ExcitationPolicy::default_sweep(5.0),
            &params,
            &small_cfg(),
            30,
            7,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        write_dataset(&ds, &path).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.header.records_sha256, ds.header.records_sha256);
        assert_eq!(back.records.len(), ds.records.len());
        assert_eq!(back.records[3].x, ds.records[3].x);
        assert_eq!(back.records[3].m, ds.records[3].m);

        // Tampering with a record line must be detected.
        let text = std::fs::read_to_string(&path).unwrap();
        let tampered = text.replacen("\"t\":1", "\"t\":99", 1);
        std::fs::write(&path, tampered).unwrap();
        assert!(read_dataset(&path).is_err());
    }
}
