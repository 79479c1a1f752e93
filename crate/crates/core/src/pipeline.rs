//! Run configuration, orchestration of the analyses and the JSON report.

use std::collections::BTreeMap;
use std::fs::{self, OpenOptions};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blowdown::{self, BlowDownResult, DEFAULT_BINS, DEFAULT_PEAK_THRESHOLD, MIN_BINS};
use crate::error::{Error, Result, Stage};
use crate::field::{self, Field2D, Grid2D};
use crate::fitspec::{self, NoiseFloors};
use crate::io;
use crate::potentials::Potential;
use crate::profile::{check_increasing, Profile1D, ProfileSummary};
use crate::solver::{self, BoundaryKind, BoundarySpec, RayEnd, SolveOptions};
use crate::spectral::{self, GapResult};
use crate::stress::{self, PolygonVertex};

pub const REPORT_VERSION: &str = "aclab-report/1";
pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialConfig {
    Quartic,
    /// `u,W` table; a relative path is resolved against the config file.
    Tabulated { path: PathBuf },
}

impl PotentialConfig {
    pub fn load(&self, base: &Path) -> Result<Potential> {
        match self {
            PotentialConfig::Quartic => Ok(Potential::quartic()),
            PotentialConfig::Tabulated { path } => Potential::from_csv_path(&base.join(path)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub half_width: f64,
    pub tol: f64,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        ProfileConfig { half_width: 30.0, tol: 1e-12 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    pub extent: [f64; 2],
    #[serde(default)]
    pub center: [f64; 2],
}

impl GridConfig {
    pub fn build(&self) -> Result<Grid2D> {
        Grid2D::centered((self.center[0], self.center[1]), (self.extent[0], self.extent[1]), self.h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryName {
    Layer,
    Multilayer,
    Saddle,
    Multiend,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundaryConfig {
    pub kind: BoundaryName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ts: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ends: Option<Vec<RayEnd>>,
    #[serde(default)]
    pub inflow_bump: f64,
}

impl BoundaryConfig {
    pub fn to_kind(&self) -> Result<BoundaryKind> {
        let need = |key: &str| Error::Config(format!("boundary.{key} is required for kind {:?}", self.kind));
        let extra = |key: &str| Error::Config(format!("boundary.{key} is not used by kind {:?}", self.kind));
        let kind = match self.kind {
            BoundaryName::Layer => BoundaryKind::Layer { t: self.t.ok_or_else(|| need("t"))? },
            BoundaryName::Multilayer => {
                let ts = self.ts.clone().ok_or_else(|| need("ts"))?;
                check_increasing(&ts).map_err(|e| Error::Config(format!("boundary.ts: {e}")))?;
                BoundaryKind::Multilayer { ts }
            }
            BoundaryName::Saddle => BoundaryKind::Saddle,
            BoundaryName::Multiend => BoundaryKind::Multiend { ends: self.ends.clone().ok_or_else(|| need("ends"))? },
        };
        if self.t.is_some() && self.kind != BoundaryName::Layer {
            return Err(extra("t"));
        }
        if self.ts.is_some() && self.kind != BoundaryName::Multilayer {
            return Err(extra("ts"));
        }
        if self.ends.is_some() && self.kind != BoundaryName::Multiend {
            return Err(extra("ends"));
        }
        Ok(kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BlowdownConfig {
    pub enabled: bool,
    /// Annulus radii; default `0.45 R` and `0.9 R` with `R` the smallest
    /// distance from the origin to the domain edge.
    pub r_in: Option<f64>,
    pub r_out: Option<f64>,
    pub bins: usize,
    pub threshold: f64,
}

impl Default for BlowdownConfig {
    fn default() -> Self {
        BlowdownConfig { enabled: true, r_in: None, r_out: None, bins: DEFAULT_BINS, threshold: DEFAULT_PEAK_THRESHOLD }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StressConfig {
    pub enabled: bool,
    /// Two level values; default `0.75 σ₀ R` and `0.5 σ₀ R`.
    pub levels: Option<[f64; 2]>,
    /// Radius of the jump circle; default `0.5 R`.
    pub circle_radius: Option<f64>,
    /// Also write `U` as `stress_potential.csv`.
    pub dump_potential: bool,
}

impl Default for StressConfig {
    fn default() -> Self {
        StressConfig { enabled: true, levels: None, circle_radius: None, dump_potential: false }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub enabled: bool,
    pub lambda: f64,
    /// Column range; default from a quarter of `R` to the last interior column.
    pub x_min: Option<f64>,
    pub x_max: Option<f64>,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig { enabled: true, lambda: 1.0, x_min: None, x_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GapConfig {
    #[serde(rename = "L_minus")]
    pub l_minus: f64,
    #[serde(rename = "L_plus")]
    pub l_plus: f64,
    pub h: f64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig { l_minus: 20.0, l_plus: 20.0, h: 0.01 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralConfig {
    pub enabled: bool,
    /// Radius of the excluded disk; default `0.25 R`.
    pub exterior_radius: Option<f64>,
    pub gap: Option<GapConfig>,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        SpectralConfig { enabled: true, exterior_radius: None, gap: Some(GapConfig::default()) }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    pub blowdown: BlowdownConfig,
    pub stress: StressConfig,
    pub fit: FitConfig,
    pub spectral: SpectralConfig,
}

impl AnalysisConfig {
    /// Only the analyses named in `names` enabled, defaults otherwise.
    pub fn only(names: &[&str]) -> Self {
        let mut a = AnalysisConfig::default();
        a.blowdown.enabled = names.contains(&"blowdown");
        a.stress.enabled = names.contains(&"stress");
        a.fit.enabled = names.contains(&"fit");
        a.spectral.enabled = names.contains(&"spectral");
        a
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |key: &str, v: Option<f64>| match v {
            Some(x) if !(x > 0.0 && x.is_finite()) => Err(Error::Config(format!("{key} must be positive, got {x}"))),
            _ => Ok(()),
        };
        let b = &self.blowdown;
        positive("analysis.blowdown.r_in", b.r_in)?;
        positive("analysis.blowdown.r_out", b.r_out)?;
        if let (Some(a), Some(c)) = (b.r_in, b.r_out) {
            if a >= c {
                return Err(Error::Config("analysis.blowdown.r_in must be below r_out".into()));
            }
        }
        if b.bins < MIN_BINS {
            return Err(Error::Config(format!("analysis.blowdown.bins must be at least {MIN_BINS}")));
        }
        if !(b.threshold > 0.0 && b.threshold < 1.0) {
            return Err(Error::Config("analysis.blowdown.threshold must lie in (0, 1)".into()));
        }
        if let Some(l) = self.stress.levels {
            positive("analysis.stress.levels", Some(l[0].min(l[1])))?;
        }
        positive("analysis.stress.circle_radius", self.stress.circle_radius)?;
        positive("analysis.fit.lambda", Some(self.fit.lambda))?;
        if let (Some(a), Some(c)) = (self.fit.x_min, self.fit.x_max) {
            if a >= c {
                return Err(Error::Config("analysis.fit.x_min must be below x_max".into()));
            }
        }
        if let Some(r) = self.spectral.exterior_radius {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::Config("analysis.spectral.exterior_radius must be non-negative".into()));
            }
        }
        if let Some(g) = &self.spectral.gap {
            if !(g.l_minus >= 5.0 && g.l_plus >= 5.0 && g.l_minus.is_finite() && g.l_plus.is_finite()) {
                return Err(Error::Config("analysis.spectral.gap.L_minus and L_plus must be at least 5".into()));
            }
            if !(g.h > 0.0 && g.h <= 0.05) {
                return Err(Error::Config("analysis.spectral.gap.h must lie in (0, 0.05]".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub potential: PotentialConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    pub grid: GridConfig,
    pub boundary: BoundaryConfig,
    #[serde(default)]
    pub solver: SolveOptions,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Checks every documented range; messages name the offending key.
    pub fn validate(&self, base: &Path) -> Result<()> {
        let g = &self.grid;
        if !(g.h > 0.0 && g.h.is_finite()) {
            return Err(Error::Config(format!("grid.h must be positive, got {}", g.h)));
        }
        if !g.extent.iter().all(|e| *e > 0.0 && e.is_finite()) {
            return Err(Error::Config(format!("grid.extent must be positive, got {:?}", g.extent)));
        }
        if !g.center.iter().all(|c| c.is_finite()) {
            return Err(Error::Config("grid.center must be finite".into()));
        }
        g.build().map_err(|e| Error::Config(format!("grid: {e}")))?;
        self.boundary.to_kind()?;
        if !(self.boundary.inflow_bump.abs() < 0.5) {
            return Err(Error::Config("boundary.inflow_bump must lie in (-0.5, 0.5)".into()));
        }
        self.solver.validate()?;
        let pr = &self.profile;
        if !(pr.half_width >= 10.0 && pr.half_width.is_finite()) {
            return Err(Error::Config("profile.half_width must be at least 10".into()));
        }
        if !(pr.tol > 0.0 && pr.tol < 1e-3) {
            return Err(Error::Config("profile.tol must lie in (0, 1e-3)".into()));
        }
        if let PotentialConfig::Tabulated { path } = &self.potential {
            if !base.join(path).is_file() {
                return Err(Error::Config(format!("potential.path {} does not exist", path.display())));
            }
        }
        self.analysis.validate()
    }

    /// SHA-256 of the canonical JSON serialization, without `output_dir`.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(o) = v.as_object_mut() {
            o.remove("output_dir");
        }
        let bytes = serde_json::to_vec(&v).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

/// A failed pipeline stage.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl StageError {
    pub fn new(stage: Stage, source: Error) -> Self {
        StageError { stage, source }
    }

    /// 1 for configuration and input problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match (&self.stage, &self.source) {
            (Stage::Config | Stage::Io, _) => 1,
            (_, Error::Config(_) | Error::Io(_) | Error::Parse { .. } | Error::Json(_)) => 1,
            _ => 2,
        }
    }
}

pub type StageResult<T> = std::result::Result<T, StageError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T> AtStage<T> for Result<T> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|e| StageError::new(stage, e))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridReport {
    pub origin: [f64; 2],
    pub h: f64,
    pub nx: usize,
    pub ny: usize,
}

impl From<&Grid2D> for GridReport {
    fn from(g: &Grid2D) -> Self {
        let (nx, ny) = g.dims();
        GridReport { origin: [g.origin().0, g.origin().1], h: g.spacing(), nx, ny }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveReport {
    pub residual: f64,
    pub newton_iterations: usize,
    pub flow_iterations: usize,
    pub modica_violation: f64,
    pub jacobian_negative: usize,
    pub unknowns: usize,
    pub energy_history_path: Option<String>,
    pub final_energy: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RayReport {
    pub angle_deg: f64,
    pub density_raw: f64,
    pub n: u32,
    pub rounding_residual: f64,
    pub tau: [[f64; 2]; 2],
    pub tau_defect: f64,
    pub equipartition: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BlowdownReport {
    pub r_in: f64,
    pub r_out: f64,
    #[serde(rename = "N")]
    pub count: usize,
    pub rays: Vec<RayReport>,
    pub balancing_defect: f64,
    pub sum_rule: f64,
    pub ambiguous: bool,
}

impl BlowdownReport {
    fn new(r: &BlowDownResult, r_in: f64, r_out: f64) -> Self {
        let tau = blowdown::tau_check(r);
        BlowdownReport {
            r_in,
            r_out,
            count: r.rays.len(),
            rays: r
                .rays
                .iter()
                .zip(tau)
                .map(|(ray, d)| RayReport {
                    angle_deg: ray.angle_deg,
                    density_raw: ray.density_raw,
                    n: ray.n,
                    rounding_residual: ray.rounding_residual,
                    tau: ray.tau,
                    tau_defect: d,
                    equipartition: ray.equipartition,
                })
                .collect(),
            balancing_defect: r.balancing_defect,
            sum_rule: r.sum_rule,
            ambiguous: r.ambiguous,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VertexReport {
    pub vertex_angle_deg: f64,
    pub jump_over_2sigma0: f64,
}

impl From<&PolygonVertex> for VertexReport {
    fn from(v: &PolygonVertex) -> Self {
        VertexReport { vertex_angle_deg: v.vertex_angle_deg, jump_over_2sigma0: v.jump_over_2sigma0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StressReport {
    pub consistency_defect: f64,
    pub max_curl: f64,
    pub trace_defect: f64,
    pub min_hessian_eigenvalue: f64,
    /// Growth constant on the full box and on the box scaled by one half.
    pub linear_growth_const: [f64; 2],
    pub levels: [f64; 2],
    pub polygon: Vec<VertexReport>,
    pub polygon_second_level: Vec<VertexReport>,
    pub polygon_clipped: bool,
    pub hull_defect: f64,
    /// Largest angle between matched vertices of the two level sets.
    pub level_angle_agreement_deg: Option<f64>,
    pub circle_radius: f64,
    pub circle: Vec<VertexReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    #[serde(rename = "N")]
    pub count: usize,
    pub lambda: f64,
    pub columns: usize,
    pub converged: usize,
    pub max_final_slope: f64,
    pub rates: Option<fitspec::DecayRates>,
    pub rates_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectralReport {
    pub morse_index: usize,
    pub margin: f64,
    pub shift: f64,
    pub exterior_radius: f64,
    pub exterior_min_eigenvalue: f64,
    pub gap: Option<GapResult>,
}

/// Results of the analyses of one field.
#[derive(Debug, Clone, Default, Serialize)]
pub struct AnalysisReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub blowdown: Option<BlowdownReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stress: Option<StressReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectral: Option<SpectralReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub version: String,
    pub crate_version: String,
    pub config_hash: String,
    pub grid: GridReport,
    pub profile: ProfileSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solve: Option<SolveReport>,
    #[serde(flatten)]
    pub analysis: AnalysisReport,
    /// Wall-clock seconds per stage; excluded from determinism checks.
    pub timings: BTreeMap<String, f64>,
}

impl RunReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}

/// Smallest distance from the origin to the edge of the grid.
pub fn inner_radius(g: &Grid2D) -> f64 {
    let (x0, x1, y0, y1) = g.bounds();
    (-x0).min(x1).min(-y0).min(y1)
}

/// Holds `<dir>/.lock` for the lifetime of a run.
#[derive(Debug)]
pub struct OutputLock {
    path: PathBuf,
}

impl OutputLock {
    pub fn acquire(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        let path = dir.join(LOCK_FILE);
        match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(OutputLock { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                Err(Error::Config(format!("output directory {} is locked by another run", dir.display())))
            }
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for OutputLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

/// Builds the profile for `p`.
pub fn build_profile(p: &Potential, cfg: &ProfileConfig) -> StageResult<Profile1D> {
    Profile1D::solve(p, cfg.half_width, cfg.tol).at(Stage::Profile)
}

/// Runs the enabled analyses on `f`, writing plot data into `out` if given.
pub fn analyze(
    f: &Field2D,
    prof: &Profile1D,
    cfg: &AnalysisConfig,
    out: Option<&Path>,
    timings: &mut BTreeMap<String, f64>,
) -> StageResult<AnalysisReport> {
    let p = prof.potential();
    let sigma0 = prof.sigma0();
    let radius = inner_radius(f.grid());
    let mut report = AnalysisReport::default();

    if cfg.blowdown.enabled {
        let t = Instant::now();
        let b = &cfg.blowdown;
        let r_out = b.r_out.unwrap_or(0.9 * radius);
        let r_in = b.r_in.unwrap_or(0.5 * r_out);
        let profile = blowdown::angular_energy(f, p, r_in, r_out, b.bins).at(Stage::Blowdown)?;
        let rays = blowdown::extract_rays(&profile, sigma0, b.threshold).at(Stage::Blowdown)?;
        if let Some(dir) = out {
            io::write_file(&dir.join("angular.csv"), |w| profile.write_csv(w)).at(Stage::Io)?;
        }
        report.blowdown = Some(BlowdownReport::new(&rays, r_in, r_out));
        timings.insert("blowdown".into(), t.elapsed().as_secs_f64());
    }

    if cfg.stress.enabled {
        let t = Instant::now();
        let s = &cfg.stress;
        let sp = stress::build_potential(f, p).at(Stage::Stress)?;
        let levels = s.levels.unwrap_or([0.75 * sigma0 * radius, 0.5 * sigma0 * radius]);
        let first = stress::blowdown_polygon_clipped(&sp, levels[0], sigma0).at(Stage::Stress)?;
        let second = stress::blowdown_polygon_clipped(&sp, levels[1], sigma0).at(Stage::Stress)?;
        let circle_radius = s.circle_radius.unwrap_or(0.5 * radius);
        let circle = stress::circle_jumps(&sp, circle_radius, sigma0).at(Stage::Stress)?;
        let agreement = angle_agreement(&first.vertices, &second.vertices);
        if let Some(dir) = out {
            if s.dump_potential {
                io::write_file(&dir.join("stress_potential.csv"), |w| io::write_field_csv(&sp.u, w)).at(Stage::Io)?;
            }
        }
        report.stress = Some(StressReport {
            consistency_defect: sp.consistency_defect,
            max_curl: sp.max_curl,
            trace_defect: sp.trace_defect(f, p),
            min_hessian_eigenvalue: sp.min_hessian_eigenvalue(),
            linear_growth_const: [stress::linear_growth_check(&sp), stress::linear_growth_on_box(&sp, 0.5)],
            levels,
            polygon: first.vertices.iter().map(VertexReport::from).collect(),
            polygon_second_level: second.vertices.iter().map(VertexReport::from).collect(),
            polygon_clipped: first.clipped,
            hull_defect: first.hull_defect,
            level_angle_agreement_deg: agreement,
            circle_radius,
            circle: circle.iter().map(VertexReport::from).collect(),
        });
        timings.insert("stress".into(), t.elapsed().as_secs_f64());
    }

    if cfg.fit.enabled {
        let t = Instant::now();
        let c = &cfg.fit;
        let (gx0, gx1, _, _) = f.grid().bounds();
        let x_min = c.x_min.unwrap_or(0.0_f64.max(gx0) + 0.25 * radius);
        let x_max = c.x_max.unwrap_or(gx1 - f.grid().spacing());
        let set = fitspec::extract_interfaces(f, x_min, x_max).at(Stage::Fit)?;
        let traj = fitspec::trajectory(f, prof, &set, c.lambda).at(Stage::Fit)?;
        let floors = NoiseFloors::for_grid(set.count(), sigma0, f.grid().spacing());
        let (rates, rates_error) = match fitspec::decay_rates(&traj, sigma0, floors) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        if let Some(dir) = out {
            io::write_file(&dir.join("trajectory.csv"), |w| io::write_trajectory_csv(&traj, w)).at(Stage::Io)?;
        }
        report.fit = Some(FitReport {
            count: set.count(),
            lambda: c.lambda,
            columns: traj.xs.len(),
            converged: traj.converged.iter().filter(|&&v| v).count(),
            max_final_slope: set.max_slope.last().copied().unwrap_or(0.0),
            rates,
            rates_error,
        });
        timings.insert("fit".into(), t.elapsed().as_secs_f64());
    }

    if cfg.spectral.enabled {
        let t = Instant::now();
        let s = &cfg.spectral;
        let morse = spectral::morse_index_2d(f, p, None).at(Stage::Spectral)?;
        let exterior_radius = s.exterior_radius.unwrap_or(0.25 * radius);
        let ext = spectral::stability_outside_compact(f, p, exterior_radius).at(Stage::Spectral)?;
        let gap = match &s.gap {
            Some(g) => Some(spectral::constrained_gap(prof, p, g.l_minus, g.l_plus, g.h).at(Stage::Spectral)?),
            None => None,
        };
        report.spectral = Some(SpectralReport {
            morse_index: morse.index,
            margin: morse.margin,
            shift: morse.shift,
            exterior_radius,
            exterior_min_eigenvalue: ext.min_eigenvalue,
            gap,
        });
        timings.insert("spectral".into(), t.elapsed().as_secs_f64());
    }
    Ok(report)
}

/// Largest angular distance from a vertex of `a` to the nearest vertex of `b`.
fn angle_agreement(a: &[PolygonVertex], b: &[PolygonVertex]) -> Option<f64> {
    if a.is_empty() || b.is_empty() {
        return None;
    }
    let dist = |x: f64, y: f64| {
        let d = (x - y).rem_euclid(360.0);
        d.min(360.0 - d)
    };
    Some(
        a.iter()
            .map(|v| b.iter().map(|w| dist(v.vertex_angle_deg, w.vertex_angle_deg)).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max),
    )
}

/// Solves the configured problem; returns the field and its diagnostics.
pub fn solve_stage(
    config: &RunConfig,
    prof: &Profile1D,
) -> StageResult<(Field2D, solver::SolveDiagnostics)> {
    let grid = config.grid.build().at(Stage::Config)?;
    let kind = config.boundary.to_kind().at(Stage::Config)?;
    let spec = BoundarySpec::new(kind, prof.clone())
        .and_then(|s| s.with_inflow_bump(config.boundary.inflow_bump))
        .at(Stage::Config)?;
    solver::solve_dirichlet(&grid, &spec, prof.potential(), &config.solver).at(Stage::Solve)
}

/// Options of [`run`] beyond the config file.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Stop after the PDE solve.
    pub solve_only: bool,
}

/// Profile, solve and the enabled analyses; writes report and plot data to
/// `config.output_dir` (relative to `base`).
pub fn run(config: &RunConfig, base: &Path, opts: RunOptions) -> StageResult<RunReport> {
    config.validate(base).at(Stage::Config)?;
    let out = base.join(&config.output_dir);
    let _lock = OutputLock::acquire(&out).at(Stage::Io)?;
    let mut timings = BTreeMap::new();

    let t = Instant::now();
    let p = config.potential.load(base).at(Stage::Potential)?;
    let prof = build_profile(&p, &config.profile)?;
    timings.insert("profile".into(), t.elapsed().as_secs_f64());
    io::write_file(&out.join("profile.csv"), |w| prof.write_csv(w)).at(Stage::Io)?;

    let t = Instant::now();
    let (f, diag) = solve_stage(config, &prof)?;
    timings.insert("solve".into(), t.elapsed().as_secs_f64());
    io::write_file(&out.join("field.csv"), |w| io::write_field_csv(&f, w)).at(Stage::Io)?;
    io::write_file(&out.join("curves.csv"), |w| io::write_curves_csv(&field::zero_contours(&f), w)).at(Stage::Io)?;
    io::write_file(&out.join("energy_history.csv"), |w| {
        use std::io::Write;
        writeln!(w, "step,energy")?;
        for (k, e) in diag.energy_history.iter().enumerate() {
            writeln!(w, "{k},{e}")?;
        }
        Ok(())
    })
    .at(Stage::Io)?;

    let analysis = if opts.solve_only {
        AnalysisReport::default()
    } else {
        analyze(&f, &prof, &config.analysis, Some(&out), &mut timings)?
    };
    let report = RunReport {
        version: REPORT_VERSION.into(),
        crate_version: env!("CARGO_PKG_VERSION").into(),
        config_hash: config.hash(),
        grid: GridReport::from(f.grid()),
        profile: prof.summary(),
        solve: Some(SolveReport {
            residual: diag.residual,
            newton_iterations: diag.newton_iterations,
            flow_iterations: diag.flow_iterations,
            modica_violation: diag.modica_violation,
            jacobian_negative: diag.jacobian_negative,
            unknowns: diag.unknowns,
            energy_history_path: Some("energy_history.csv".into()),
            final_energy: diag.energy_history.last().copied(),
        }),
        analysis,
        timings,
    };
    let text = report.to_json().at(Stage::Io)?;
    fs::write(out.join("report.json"), text).map_err(Error::from).at(Stage::Io)?;
    Ok(report)
}

/// Combines two reports of the same configuration: sections missing from
/// `a` are taken from `b`, timings are merged.
pub fn merge_reports(a: &serde_json::Value, b: &serde_json::Value) -> Result<serde_json::Value> {
    let hash = |v: &serde_json::Value| v.get("config_hash").and_then(|h| h.as_str()).map(str::to_owned);
    match (hash(a), hash(b)) {
        (Some(x), Some(y)) if x == y => {}
        (x, y) => {
            return Err(Error::Inconsistent(format!("cannot merge reports with config hashes {x:?} and {y:?}")));
        }
    }
    let (Some(ao), Some(bo)) = (a.as_object(), b.as_object()) else {
        return Err(Error::Inconsistent("reports must be JSON objects".into()));
    };
    let mut out = ao.clone();
    for (k, v) in bo {
        match (k.as_str(), out.get_mut(k)) {
            ("timings", Some(serde_json::Value::Object(t))) => {
                if let Some(bt) = v.as_object() {
                    for (tk, tv) in bt {
                        t.entry(tk.clone()).or_insert_with(|| tv.clone());
                    }
                }
            }
            (_, Some(_)) => {}
            (_, None) => {
                out.insert(k.clone(), v.clone());
            }
        }
    }
    Ok(serde_json::Value::Object(out))
}

/// Removes `timings` so reports can be compared for determinism.
pub fn strip_timings(v: &mut serde_json::Value) {
    if let Some(o) = v.as_object_mut() {
        o.remove("timings");
    }
}

/// Parses a report and checks its format version.
pub fn parse_report(text: &str) -> Result<serde_json::Value> {
    let v: serde_json::Value = serde_json::from_str(text)?;
    match v.get("version").and_then(|s| s.as_str()) {
        Some(REPORT_VERSION) => Ok(v),
        other => Err(Error::Inconsistent(format!("unsupported report version {other:?}, expected {REPORT_VERSION:?}"))),
    }
}

pub fn read_report(path: &Path) -> Result<serde_json::Value> {
    parse_report(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "potential": {"kind": "quartic"},
        "grid": {"h": 0.25, "extent": [12.0, 12.0]},
        "boundary": {"kind": "layer", "t": 0.0}
    }"#;

    #[test]
    fn hash_survives_serialization_round_trip() {
        let text = MINIMAL.replace("\"t\": 0.0", "\"t\": -111111111111111111111115");
        let c = RunConfig::from_json(&text).unwrap();
        let again = RunConfig::from_json(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(c.hash(), again.hash());
        let mut moved = c.clone();
        moved.output_dir = "elsewhere".into();
        assert_eq!(c.hash(), moved.hash());
    }

    #[test]
    fn config_parsing_and_validation() {
        let c = RunConfig::from_json(MINIMAL).unwrap();
        c.validate(Path::new(".")).unwrap();
        assert_eq!(c.hash(), RunConfig::from_json(MINIMAL).unwrap().hash());

        let bad = MINIMAL.replace("\"t\": 0.0", "\"t\": 0.0, \"colour\": 1");
        assert!(RunConfig::from_json(&bad).unwrap_err().to_string().contains("colour"));

        let ts = MINIMAL.replace(r#""kind": "layer", "t": 0.0"#, r#""kind": "multilayer", "ts": [2.0, -2.0]"#);
        let c = RunConfig::from_json(&ts).unwrap();
        let e = c.validate(Path::new(".")).unwrap_err();
        assert!(e.to_string().contains("boundary.ts"), "{e}");

        let tab = MINIMAL.replace(r#"{"kind": "quartic"}"#, r#"{"kind": "tabulated", "path": "missing.csv"}"#);
        assert!(RunConfig::from_json(&tab).unwrap().validate(Path::new(".")).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(StageError::new(Stage::Config, Error::Config("x".into())).exit_code(), 1);
        let nc = Error::NonConvergence { iterations: 3, residual: 1.0, context: "c".into() };
        assert_eq!(StageError::new(Stage::Solve, nc).exit_code(), 2);
    }

    #[test]
    fn merge_requires_equal_hashes() {
        let a = serde_json::json!({"config_hash": "aa", "solve": {}, "timings": {"solve": 1.0}});
        let b = serde_json::json!({"config_hash": "aa", "fit": {}, "timings": {"fit": 2.0}});
        let m = merge_reports(&a, &b).unwrap();
        assert!(m.get("fit").is_some() && m["timings"].get("fit").is_some());
        let c = serde_json::json!({"config_hash": "bb"});
        assert!(merge_reports(&a, &c).is_err());
    }

    #[test]
    fn lock_is_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let first = OutputLock::acquire(dir.path()).unwrap();
        assert!(OutputLock::acquire(dir.path()).is_err());
        drop(first);
        assert!(OutputLock::acquire(dir.path()).is_ok());
    }
}
