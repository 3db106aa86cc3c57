//! Global elevation maps, procedural terrain recipes, and the vehicle-centric
//! local crop that feeds the learned model.
//!
//! Heights are stored row-major as `f32` at grid nodes; queries interpolate
//! bilinearly between nodes, and the simulator and the crop operator share
//! the same sampler so the learner never sees a representation mismatch.

pub mod track;

use crate::artifact;
use crate::se3::Pose;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

pub use track::RallyTrackLayout;

#[derive(Debug, Error)]
pub enum TerrainError {
    #[error("unknown terrain recipe `{0}`")]
    UnknownRecipe(String),
    #[error("query ({x:.3}, {y:.3}) lies outside the grid extent")]
    OutOfBounds { x: f64, y: f64 },
    #[error("grid payload does not match header: {0}")]
    BadData(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Placement and size of a grid: world position of node (0, 0), node spacing,
/// and node counts per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    /// World (x, y) of node (row 0, col 0), m.
    pub origin: [f64; 2],
    /// Node spacing, m.
    pub resolution: f64,
    /// Node count along x (columns).
    pub width: usize,
    /// Node count along y (rows).
    pub height: usize,
}

impl GridGeometry {
    /// Covers `[x0, x1] × [y0, y1]` at the given resolution.
    pub fn covering(x0: f64, y0: f64, x1: f64, y1: f64, resolution: f64) -> Self {
        assert!(resolution > 0.0 && x1 > x0 && y1 > y0);
        let width = ((x1 - x0) / resolution).ceil() as usize + 1;
        let height = ((y1 - y0) / resolution).ceil() as usize + 1;
        Self { origin: [x0, y0], resolution, width, height }
    }
}

/// Procedural terrain recipes. All are C⁰-continuous and deterministic for a
/// fixed seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TerrainRecipe {
    /// Constant height.
    Flat { height: f64 },
    /// `a · sin(2π x / λ)`, independent of y.
    Sinusoidal { amplitude: f64, wavelength: f64 },
    /// Multi-octave value noise.
    FractalNoise { amplitude: f64, wavelength: f64, octaves: u32 },
    /// Jittered lattice of raised-cosine bumps.
    BumpField { amplitude: f64, spacing: f64, radius: f64 },
    /// Closed rally loop: flat base, a staggered-bump sector on one straight,
    /// a washboard sector on the other, light noise texture everywhere.
    RallyTrack(track::RallyTrackRecipe),
}

impl TerrainRecipe {
    /// Builds a recipe from a CLI name with its default parameters.
    pub fn from_name(name: &str) -> Result<Self, TerrainError> {
        match name {
            "flat" => Ok(Self::Flat { height: 0.0 }),
            "sinusoidal" => Ok(Self::Sinusoidal { amplitude: 0.3, wavelength: 8.0 }),
            "fractal-noise" => Ok(Self::FractalNoise { amplitude: 0.3, wavelength: 14.0, octaves: 4 }),
            "bump-field" => Ok(Self::BumpField { amplitude: 0.18, spacing: 6.0, radius: 1.6 }),
            "rally-track" => Ok(Self::RallyTrack(track::RallyTrackRecipe::default())),
            other => Err(TerrainError::UnknownRecipe(other.to_string())),
        }
    }

    /// Closed-form height at a world point.
    pub fn height_at(&self, x: f64, y: f64, seed: u64) -> f64 {
        match self {
            Self::Flat { height } => *height,
            Self::Sinusoidal { amplitude, wavelength } => {
                amplitude * (std::f64::consts::TAU * x / wavelength).sin()
            }
            Self::FractalNoise { amplitude, wavelength, octaves } => {
                fractal_noise(x, y, *amplitude, *wavelength, *octaves, seed)
            }
            Self::BumpField { amplitude, spacing, radius } => {
                bump_field(x, y, *amplitude, *spacing, *radius, seed)
            }
            Self::RallyTrack(recipe) => recipe.height_at(x, y, seed),
        }
    }
}

/// Global heightmap: row-major node heights over a [`GridGeometry`].
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    pub geometry: GridGeometry,
    /// Node heights, row-major (`heights[row * width + col]`), m.
    pub heights: Vec<f32>,
}

impl ElevationGrid {
    pub fn new(geometry: GridGeometry, heights: Vec<f32>) -> Result<Self, TerrainError> {
        if heights.len() != geometry.width * geometry.height {
            return Err(TerrainError::BadData(format!(
                "expected {} heights, got {}",
                geometry.width * geometry.height,
                heights.len()
            )));
        }
        if !(geometry.resolution > 0.0) {
            return Err(TerrainError::BadData("resolution must be positive".into()));
        }
        if heights.iter().any(|h| !h.is_finite()) {
            return Err(TerrainError::BadData("non-finite height".into()));
        }
        Ok(Self { geometry, heights })
    }

    /// Inclusive world-extent of valid queries: `[x0, x1] × [y0, y1]`.
    pub fn extent(&self) -> (f64, f64, f64, f64) {
        let g = &self.geometry;
        (
            g.origin[0],
            g.origin[1],
            g.origin[0] + (g.width - 1) as f64 * g.resolution,
            g.origin[1] + (g.height - 1) as f64 * g.resolution,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (x0, y0, x1, y1) = self.extent();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    #[inline]
    fn node(&self, row: usize, col: usize) -> f64 {
        self.heights[row * self.geometry.width + col] as f64
    }

    /// Bilinear height at a world point.
    pub fn sample_height(&self, x: f64, y: f64) -> Result<f64, TerrainError> {
        if !self.contains(x, y) {
            return Err(TerrainError::OutOfBounds { x, y });
        }
        let g = &self.geometry;
        let fx = (x - g.origin[0]) / g.resolution;
        let fy = (y - g.origin[1]) / g.resolution;
        let cx = (fx.floor() as usize).min(g.width - 2);
        let cy = (fy.floor() as usize).min(g.height - 2);
        let tx = fx - cx as f64;
        let ty = fy - cy as f64;
        let h00 = self.node(cy, cx);
        let h01 = self.node(cy, cx + 1);
        let h10 = self.node(cy + 1, cx);
        let h11 = self.node(cy + 1, cx + 1);
        Ok(h00 * (1.0 - tx) * (1.0 - ty)
            + h01 * tx * (1.0 - ty)
            + h10 * (1.0 - tx) * ty
            + h11 * tx * ty)
    }
}

/// Degenerate-width guard for one-node-wide grids is intentionally absent:
/// generation always produces at least 2×2 nodes.
pub fn generate_terrain(
    geometry: GridGeometry,
    recipe: &TerrainRecipe,
    seed: u64,
) -> Result<ElevationGrid, TerrainError> {
    assert!(geometry.width >= 2 && geometry.height >= 2, "grid must be at least 2x2 nodes");
    let mut heights = Vec::with_capacity(geometry.width * geometry.height);
    for row in 0..geometry.height {
        let y = geometry.origin[1] + row as f64 * geometry.resolution;
        for col in 0..geometry.width {
            let x = geometry.origin[0] + col as f64 * geometry.resolution;
            heights.push(recipe.height_at(x, y, seed) as f32);
        }
    }
    ElevationGrid::new(geometry, heights)
}

/// Crop frame: CoM position and yaw the local map is aligned with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CropFrame {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

/// Vehicle-centric local elevation map: an odd-sided square of heights
/// relative to the CoM, yaw-aligned, row-major with +x along columns.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalMap {
    /// Relative heights (terrain − CoM height), row-major, m.
    pub cells: Vec<f32>,
    /// Side length in cells, odd.
    pub side: usize,
    /// Cell edge, m.
    pub resolution: f64,
    pub frame: CropFrame,
}

impl LocalMap {
    #[inline]
    pub fn cell(&self, row: usize, col: usize) -> f32 {
        self.cells[row * self.side + col]
    }
}

/// Crops an `side × side` local map centered at the pose's CoM and aligned
/// with its yaw. Cell (i, j) samples the world point at crop-frame offset
/// `((j − c)·res, (i − c)·res)` rotated by yaw, with `c = (side − 1)/2`, and
/// stores the height relative to the CoM.
pub fn crop_local_map(
    grid: &ElevationGrid,
    pose: &Pose,
    side: usize,
) -> Result<LocalMap, TerrainError> {
    assert!(side % 2 == 1, "local map side must be odd");
    let res = grid.geometry.resolution;
    let c = (side / 2) as f64;
    let (sy, cy) = pose.euler.yaw.sin_cos();
    let (px, py, pz) = (pose.position.x, pose.position.y, pose.position.z);
    let mut cells = Vec::with_capacity(side * side);
    for i in 0..side {
        let oy = (i as f64 - c) * res;
        for j in 0..side {
            let ox = (j as f64 - c) * res;
            let wx = px + cy * ox - sy * oy;
            let wy = py + sy * ox + cy * oy;
            cells.push((grid.sample_height(wx, wy)? - pz) as f32);
        }
    }
    Ok(LocalMap {
        cells,
        side,
        resolution: res,
        frame: CropFrame { x: px, y: py, z: pz, yaw: pose.euler.yaw },
    })
}

/// Perturbs every cell with i.i.d. zero-mean Gaussian noise of the given
/// standard deviation; deterministic per seed.
pub fn add_observation_noise(map: &LocalMap, sigma: f64, seed: u64) -> LocalMap {
    assert!(sigma >= 0.0);
    if sigma == 0.0 {
        return map.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).unwrap();
    let mut out = map.clone();
    for cell in &mut out.cells {
        *cell += normal.sample(&mut rng) as f32;
    }
    out
}

/// Checks the local-map sizing rule: the crop must span the reachable set
/// over one control period plus all contact points,
/// `side · resolution ≥ 2 (v_max · Δt + r_vehicle)`.
pub fn check_local_map_sizing(
    side: usize,
    resolution: f64,
    v_max: f64,
    dt: f64,
    r_vehicle: f64,
) -> Result<(), String> {
    let span = side as f64 * resolution;
    let needed = 2.0 * (v_max * dt + r_vehicle);
    if span < needed {
        return Err(format!(
            "local map spans {span:.2} m but needs at least {needed:.2} m \
             (v_max {v_max}, dt {dt}, r_vehicle {r_vehicle})"
        ));
    }
    Ok(())
}

// --- procedural noise -------------------------------------------------------

fn hash2(ix: i64, iy: i64, seed: u64, salt: u64) -> u64 {
    let mut z = (ix as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (iy as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f)
        ^ seed.wrapping_mul(0x1656_67b1_9e37_79f9)
        ^ salt.wrapping_mul(0x2545_f491_4f6c_dd1d);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in [0, 1).
fn hash2_unit(ix: i64, iy: i64, seed: u64, salt: u64) -> f64 {
    (hash2(ix, iy, seed, salt) >> 11) as f64 / (1u64 << 53) as f64
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Single-octave value noise in [−1, 1], C¹ across lattice cells.
fn value_noise(x: f64, y: f64, seed: u64, salt: u64) -> f64 {
    let ix = x.floor() as i64;
    let iy = y.floor() as i64;
    let tx = smoothstep(x - ix as f64);
    let ty = smoothstep(y - iy as f64);
    let v = |dx: i64, dy: i64| 2.0 * hash2_unit(ix + dx, iy + dy, seed, salt) - 1.0;
    let a = v(0, 0) * (1.0 - tx) + v(1, 0) * tx;
    let b = v(0, 1) * (1.0 - tx) + v(1, 1) * tx;
    a * (1.0 - ty) + b * ty
}

pub(crate) fn fractal_noise(
    x: f64,
    y: f64,
    amplitude: f64,
    wavelength: f64,
    octaves: u32,
    seed: u64,
) -> f64 {
    let octaves = octaves.max(1);
    let mut sum = 0.0;
    let mut weight = 1.0;
    let mut total = 0.0;
    let mut freq = 1.0 / wavelength;
    for o in 0..octaves {
        sum += weight * value_noise(x * freq, y * freq, seed, o as u64);
        total += weight;
        weight *= 0.5;
        freq *= 2.0;
    }
    amplitude * sum / total
}

/// Raised-cosine bump profile: 1 at the center, 0 with zero slope at `d = 1`.
fn bump_profile(d: f64) -> f64 {
    if d >= 1.0 {
        0.0
    } else {
        let c = (std::f64::consts::FRAC_PI_2 * d).cos();
        c * c
    }
}

pub(crate) fn bump_field(
    x: f64,
    y: f64,
    amplitude: f64,
    spacing: f64,
    radius: f64,
    seed: u64,
) -> f64 {
    let cx = (x / spacing).floor() as i64;
    let cy = (y / spacing).floor() as i64;
    let mut h: f64 = 0.0;
    for dy in -1..=1 {
        for dx in -1..=1 {
            let (ix, iy) = (cx + dx, cy + dy);
            let jx = (hash2_unit(ix, iy, seed, 1) - 0.5) * 0.5 * spacing;
            let jy = (hash2_unit(ix, iy, seed, 2) - 0.5) * 0.5 * spacing;
            let amp = amplitude * (0.5 + 0.5 * hash2_unit(ix, iy, seed, 3));
            let bx = ix as f64 * spacing + 0.5 * spacing + jx;
            let by = iy as f64 * spacing + 0.5 * spacing + jy;
            let d = ((x - bx).powi(2) + (y - by).powi(2)).sqrt() / radius;
            h += amp * bump_profile(d);
        }
    }
    h
}

// --- file format -------------------------------------------------------------

/// JSON header stored next to the little-endian `f32` payload.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TerrainHeader {
    pub origin: [f64; 2],
    pub resolution: f64,
    pub width: usize,
    pub height: usize,
    pub recipe: TerrainRecipe,
    pub seed: u64,
    /// File name of the sibling binary payload.
    pub data_file: String,
    /// SHA-256 of the payload, the artifact's manifest hash.
    pub sha256: String,
}

/// Writes `<path>` (JSON header) plus the sibling `.bin` payload.
pub fn save_elevation_grid(
    grid: &ElevationGrid,
    recipe: &TerrainRecipe,
    seed: u64,
    header_path: &Path,
) -> Result<TerrainHeader, TerrainError> {
    let data_path = artifact::data_path_for(header_path);
    let payload = artifact::f32s_to_le_bytes(&grid.heights);
    artifact::write_bytes(&data_path, &payload)?;
    let header = TerrainHeader {
        origin: grid.geometry.origin,
        resolution: grid.geometry.resolution,
        width: grid.geometry.width,
        height: grid.geometry.height,
        recipe: recipe.clone(),
        seed,
        data_file: data_path.file_name().unwrap().to_string_lossy().into_owned(),
        sha256: artifact::sha256_hex(&payload),
    };
    artifact::write_bytes(header_path, serde_json::to_string_pretty(&header)?.as_bytes())?;
    Ok(header)
}

/// Loads a grid, verifying the payload against the header's manifest hash.
pub fn load_elevation_grid(header_path: &Path) -> Result<(ElevationGrid, TerrainHeader), TerrainError> {
    let header: TerrainHeader =
        serde_json::from_slice(&artifact::read_bytes(header_path)?)?;
    let data_path = header_path.with_file_name(&header.data_file);
    let payload = artifact::read_verified(&data_path, &header.sha256)?;
    let heights = artifact::f32s_from_le_bytes(&payload)?;
    let grid = ElevationGrid::new(
        GridGeometry {
            origin: header.origin,
            resolution: header.resolution,
            width: header.width,
            height: header.height,
        },
        heights,
    )?;
    Ok((grid, header))
}
