//! Scenario files: the JSON schema and its validation into ready-to-run
//! objects. Nothing here writes output; every precondition a command
//! depends on is checked before any evolution starts.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use qwave_core::{
    assemble_operator_pair, cfl_limit, decode, dirichlet_constraints, reduce_system, ConstraintSet,
    EstimatorConfig, EstimatorMode, EvolutionConfig, EvolutionMethod, FieldBlock, GreensMethod, GreensOptions,
    MaterialModel, OperatorPair, PointSource, PolarGridSpec, ReducedSystem, RegisterLayout, Side,
    SourceTimeFunction, StaggeredGrid, SubspaceProjector, VectorSeries, WaveOperators,
};
use serde::Deserialize;

use crate::error::{CliError, CliResult, Context};
use crate::io::{as_index, read_state, read_table};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QWAVE_OUT_DIR";
/// Output directory used when neither the flag, the scenario nor the
/// environment name one.
pub const DEFAULT_OUT_DIR: &str = "qwave-out";

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub grid: Option<GridSpec>,
    pub material: Option<MaterialSpec>,
    #[serde(default)]
    pub boundaries: Vec<BoundarySpec>,
    #[serde(default)]
    pub initial: InitialSpec,
    #[serde(default)]
    pub sources: Vec<SourceSpec>,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default)]
    pub evolution: EvolutionSpec,
    pub times: Option<TimesSpec>,
    #[serde(default)]
    pub measurements: Vec<MeasurementSpec>,
    #[serde(default)]
    pub estimator: EstimatorSpec,
    /// Also compute every measurement from a classical monolithic run.
    #[serde(default)]
    pub reference_check: bool,
    pub initcircuit: Option<InitCircuitSpec>,
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dimension: usize,
    pub bounds: Vec<[f64; 2]>,
    pub nodes: Vec<usize>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FamilyName {
    #[default]
    Acoustic,
    #[serde(rename = "maxwell1d")]
    Maxwell1d,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    #[serde(default)]
    pub family: FamilyName,
    pub model: ModelSpec,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Constant { medium: Medium },
    /// `background` overridden by each region in turn.
    Piecewise { background: Medium, regions: Vec<MediumRegion> },
    /// CSV `x[,y],<first>,<second>`; each DOF takes its nearest sample.
    Tabulated { file: PathBuf },
}

/// `rho` and `c` for acoustics, `permittivity` and `permeability` for
/// Maxwell.
#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Medium {
    pub rho: Option<f64>,
    pub c: Option<f64>,
    pub permittivity: Option<f64>,
    pub permeability: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MediumRegion {
    pub within: Shape,
    pub medium: Medium,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum Shape {
    /// Closed box `min <= x <= max` per coordinate.
    Box { min: Vec<f64>, max: Vec<f64> },
    /// Closed ball.
    Ball { center: Vec<f64>, radius: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SideName {
    Left,
    Right,
    Bottom,
    Top,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Dirichlet,
    /// Zero normal velocity; the natural condition of the staggered grid.
    Neumann,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundarySpec {
    pub side: SideName,
    pub kind: BcKind,
    /// CSV `time,<value per constrained DOF>` (or a single broadcast
    /// value column) for inhomogeneous Dirichlet data.
    pub values: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    #[default]
    Zero,
    /// Gaussian pressure bump at rest.
    Gaussian {
        center: Vec<f64>,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// CSV `dof,value` over the full DOF vector; missing DOFs are zero.
    /// Values on constrained DOFs are replaced by the boundary data.
    Field { file: PathBuf },
    /// Single-stack register state (CSV plus JSON sidecar) as written by
    /// `simulate`.
    State { file: PathBuf },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Gaussian {
        center: f64,
        width: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    Ricker {
        center: f64,
        frequency: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    WindowedSine {
        start: f64,
        duration: f64,
        frequency: f64,
        #[serde(default = "one")]
        amplitude: f64,
    },
    /// CSV `time,value`.
    Tabulated { file: PathBuf },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    #[default]
    Discrete,
    Analytic,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    /// Pressure node index; alternatively `position` snaps to the nearest node.
    pub node: Option<usize>,
    pub position: Option<Vec<f64>>,
    #[serde(default = "pressure_polarization")]
    pub polarization: [f64; 3],
    pub signal: SignalSpec,
    pub t_start: f64,
    pub t_end: f64,
    /// Radius of the homogeneous ball around the source used to
    /// pre-simulate its slices.
    pub ball_radius: Option<f64>,
    pub windows: Option<usize>,
    #[serde(default)]
    pub method: MethodName,
}

fn pressure_polarization() -> [f64; 3] {
    [1.0, 0.0, 0.0]
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    /// Encoded unitary evolution, with sliced sources stacked in the register.
    #[default]
    Quantum,
    /// Classical leapfrog reference.
    Leapfrog,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Auto,
    Dense,
    Taylor,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvolutionSpec {
    #[serde(default)]
    pub method: MethodChoice,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
}

impl Default for EvolutionSpec {
    fn default() -> Self {
        Self { method: MethodChoice::Auto, tolerance: default_tolerance() }
    }
}

fn default_tolerance() -> f64 {
    1e-12
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimesSpec {
    #[serde(rename = "final")]
    pub final_time: f64,
    #[serde(default)]
    pub snapshots: Vec<f64>,
    /// Leapfrog step; defaults to the CFL-limited step.
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasurementSpec {
    pub name: String,
    /// Defaults to the final time.
    pub time: Option<f64>,
    pub subspace: SubspaceSpec,
    pub estimator: Option<EstimatorSpec>,
}

/// Exactly one of `ranges` (half-open full-grid DOF ranges) or `region`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubspaceSpec {
    pub ranges: Option<Vec<[usize; 2]>>,
    pub region: Option<RegionSpec>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockName {
    #[default]
    Any,
    Pressure,
    Vx,
    Vy,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    #[serde(default)]
    pub block: BlockName,
    pub within: Shape,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    Exact,
    Shots,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimatorSpec {
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default)]
    pub shots: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitCircuitSpec {
    pub radial: usize,
    pub center: [f64; 2],
    pub radial_step: f64,
    #[serde(default = "two")]
    pub components: usize,
    #[serde(default)]
    pub rotation_plane: usize,
    pub field: CovariantFieldSpec,
}

fn two() -> usize {
    2
}

/// Vector field `f(r) e_r + g(r) e_theta` with polynomial profiles
/// (coefficients in increasing powers of `r`), plus radial scalar channels.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovariantFieldSpec {
    #[serde(default)]
    pub radial: Vec<f64>,
    #[serde(default)]
    pub tangential: Vec<f64>,
    #[serde(default)]
    pub scalars: Vec<Vec<f64>>,
}

/// Command line values that take precedence over the scenario.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub shots: Option<usize>,
}

/// A parsed scenario and the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub scenario: Scenario,
    pub path: PathBuf,
    pub base: PathBuf,
}

impl LoadedScenario {
    pub fn load(path: &Path) -> CliResult<Self> {
        let ctx = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|e| CliError::validation(&ctx, e))?;
        let scenario: Scenario = serde_json::from_str(&text).map_err(|e| CliError::validation(&ctx, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self { scenario, path: path.to_path_buf(), base })
    }

    fn ctx(&self, field: &str) -> String {
        format!("{}: {field}", self.path.display())
    }

    fn invalid(&self, field: &str, message: impl ToString) -> CliError {
        CliError::validation(self.ctx(field), message)
    }

    fn resolve(&self, file: &Path) -> PathBuf {
        if file.is_absolute() {
            file.to_path_buf()
        } else {
            self.base.join(file)
        }
    }

    /// Flag, then scenario (relative to its file), then environment, then
    /// the built-in default.
    pub fn output_dir(&self, overrides: &Overrides) -> PathBuf {
        if let Some(out) = &overrides.out {
            return out.clone();
        }
        if let Some(out) = &self.scenario.output {
            return self.resolve(out);
        }
        match std::env::var_os(OUT_DIR_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => PathBuf::from(DEFAULT_OUT_DIR),
        }
    }
}

/// Per-source data ready for slicing or forcing.
#[derive(Debug, Clone)]
pub struct PreparedSource {
    pub source: PointSource,
    pub ball_radius: Option<f64>,
    pub c_hom: f64,
    pub rho_hom: f64,
    pub options: GreensOptions,
}

#[derive(Debug, Clone)]
pub struct PreparedMeasurement {
    pub name: String,
    pub time: f64,
    /// Over the free DOFs of the reduced system.
    pub projector: SubspaceProjector,
    pub estimator: EstimatorConfig,
}

/// A validated wave scenario.
#[derive(Debug, Clone)]
pub struct Model {
    pub family: FamilyName,
    pub grid: StaggeredGrid,
    pub pair: OperatorPair,
    pub reduced: ReducedSystem,
    /// Full-grid initial field at `t = 0`.
    pub initial: Vec<f64>,
    pub sources: Vec<PreparedSource>,
    pub engine: Engine,
    pub evolution: EvolutionConfig,
    pub final_time: f64,
    /// Sorted, unique, always ending at the final time.
    pub snapshot_times: Vec<f64>,
    pub dt: Option<f64>,
    pub measurements: Vec<PreparedMeasurement>,
    pub reference_check: bool,
}

impl Model {
    /// Snapshot and measurement times, sorted and unique.
    pub fn output_times(&self) -> Vec<f64> {
        let mut t: Vec<f64> = self.snapshot_times.iter().copied().chain(self.measurements.iter().map(|m| m.time)).collect();
        t.sort_by(f64::total_cmp);
        t.dedup();
        t
    }

    /// Latest source end time, or 0 without sources.
    pub fn sync_time(&self) -> f64 {
        self.sources.iter().map(|s| s.source.t_end).fold(0.0, f64::max)
    }
}

type MediumFn = Box<dyn Fn([f64; 2]) -> (f64, f64)>;

impl LoadedScenario {
    /// Validates everything a wave command needs.
    pub fn model(&self, overrides: &Overrides) -> CliResult<Model> {
        let s = &self.scenario;
        let grid_spec = s.grid.as_ref().ok_or_else(|| self.invalid("grid", "missing"))?;
        if grid_spec.bounds.len() != grid_spec.dimension || grid_spec.nodes.len() != grid_spec.dimension {
            return Err(self.invalid("grid", "bounds and nodes need one entry per dimension"));
        }
        let bounds: Vec<(f64, f64)> = grid_spec.bounds.iter().map(|b| (b[0], b[1])).collect();
        let grid = StaggeredGrid::new(grid_spec.dimension, &bounds, &grid_spec.nodes).context(self.ctx("grid"))?;

        let material = s.material.as_ref().ok_or_else(|| self.invalid("material", "missing"))?;
        let family = material.family;
        if family == FamilyName::Maxwell1d && grid.dimension() != 1 {
            return Err(self.invalid("material.family", "maxwell1d needs a 1D grid"));
        }
        let medium = self.medium_fn(material, &grid)?;
        let model = match family {
            FamilyName::Acoustic => MaterialModel::acoustic_from_fn(&grid, &medium),
            FamilyName::Maxwell1d => MaterialModel::maxwell1d_from_fn(&grid, |x| medium([x, 0.0])),
        };
        let pair = assemble_operator_pair(&grid, &model).context(self.ctx("material"))?;

        let constraints = self.constraints(&grid)?;
        let reduced = reduce_system(&pair, &constraints).context(self.ctx("boundaries"))?;
        RegisterLayout::new(reduced.len(), 1, true).context(self.ctx("grid"))?;

        let times = s.times.as_ref().ok_or_else(|| self.invalid("times", "missing"))?;
        let final_time = times.final_time;
        if !(final_time >= 0.0 && final_time.is_finite()) {
            return Err(self.invalid("times.final", "must be a finite non-negative time"));
        }
        let mut snapshot_times = times.snapshots.clone();
        for (k, &t) in snapshot_times.iter().enumerate() {
            if !(0.0..=final_time).contains(&t) {
                return Err(self.invalid(&format!("times.snapshots[{k}]"), format!("{t} outside [0, {final_time}]")));
            }
        }
        snapshot_times.push(final_time);
        snapshot_times.sort_by(f64::total_cmp);
        snapshot_times.dedup();

        let initial = self.initial(&grid, &reduced)?;
        let sources = self.sources(&grid, family, &medium)?;

        let evolution = EvolutionConfig {
            tolerance: s.evolution.tolerance,
            method: match s.evolution.method {
                MethodChoice::Auto => EvolutionMethod::Auto,
                MethodChoice::Dense => EvolutionMethod::DenseEigen,
                MethodChoice::Taylor => EvolutionMethod::Taylor,
            },
            ..Default::default()
        };
        if !(evolution.tolerance > 0.0 && evolution.tolerance < 1.0) {
            return Err(self.invalid("evolution.tolerance", "must lie in (0, 1)"));
        }

        let dt = times.dt;
        if let Some(dt) = dt {
            let limit = cfl_limit(&reduced);
            if !(dt > 0.0 && dt <= limit) {
                return Err(self.invalid("times.dt", format!("{dt} violates the stability bound {limit:e}")));
            }
        }

        let measurements = self.measurements(&grid, &reduced, final_time, overrides)?;

        let model = Model {
            family,
            grid,
            pair,
            reduced,
            initial,
            sources,
            engine: s.engine,
            evolution,
            final_time,
            snapshot_times,
            dt,
            measurements,
            reference_check: s.reference_check,
        };
        self.check_engine(&model)?;
        Ok(model)
    }

    fn check_engine(&self, model: &Model) -> CliResult<()> {
        if model.reference_check && !model.reduced.is_homogeneous() {
            return Err(self.invalid("reference_check", "needs homogeneous boundary values"));
        }
        if model.engine != Engine::Quantum {
            return Ok(());
        }
        if !model.reduced.is_homogeneous() {
            return Err(self.invalid("engine", "inhomogeneous boundary values need the leapfrog engine"));
        }
        let sync = model.sync_time();
        for (k, s) in model.sources.iter().enumerate() {
            if s.ball_radius.is_none() {
                return Err(self.invalid(&format!("sources[{k}].ball_radius"), "required by the quantum engine"));
            }
        }
        if let Some(&t) = model.output_times().first() {
            if t < sync {
                return Err(self.invalid(
                    "times",
                    format!("output time {t} precedes the end of the sources at {sync}; the quantum engine reports fields only once all sources are off"),
                ));
            }
        }
        Ok(())
    }

    fn medium_fn(&self, material: &MaterialSpec, grid: &StaggeredGrid) -> CliResult<MediumFn> {
        let family = material.family;
        let pair_of = |m: &Medium, field: &str| -> CliResult<(f64, f64)> {
            let (a, b, names) = match family {
                FamilyName::Acoustic => (m.rho, m.c, ("rho", "c")),
                FamilyName::Maxwell1d => (m.permittivity, m.permeability, ("permittivity", "permeability")),
            };
            let extra = match family {
                FamilyName::Acoustic => m.permittivity.is_some() || m.permeability.is_some(),
                FamilyName::Maxwell1d => m.rho.is_some() || m.c.is_some(),
            };
            match (a, b) {
                (Some(a), Some(b)) if !extra => Ok((a, b)),
                _ => Err(self.invalid(field, format!("needs exactly `{}` and `{}`", names.0, names.1))),
            }
        };
        let dim = grid.dimension();
        match &material.model {
            ModelSpec::Constant { medium } => {
                let v = pair_of(medium, "material.model.medium")?;
                Ok(Box::new(move |_| v))
            }
            ModelSpec::Piecewise { background, regions } => {
                let bg = pair_of(background, "material.model.background")?;
                let mut parts = Vec::with_capacity(regions.len());
                for (k, r) in regions.iter().enumerate() {
                    let field = format!("material.model.regions[{k}]");
                    self.check_shape(&r.within, dim, &format!("{field}.within"))?;
                    parts.push((r.within.clone(), pair_of(&r.medium, &format!("{field}.medium"))?));
                }
                Ok(Box::new(move |x| {
                    parts.iter().rev().find(|(shape, _)| shape.contains(x, dim)).map_or(bg, |(_, v)| *v)
                }))
            }
            ModelSpec::Tabulated { file } => {
                let path = self.resolve(file);
                let names: &[&str] = match (family, dim) {
                    (FamilyName::Acoustic, 1) => &["x", "rho", "c"],
                    (FamilyName::Acoustic, _) => &["x", "y", "rho", "c"],
                    (FamilyName::Maxwell1d, _) => &["x", "permittivity", "permeability"],
                };
                let (_, rows) = read_table(&path, names, false)?;
                let samples: Vec<([f64; 2], (f64, f64))> = rows
                    .into_iter()
                    .map(|r| if dim == 1 { ([r[0], 0.0], (r[1], r[2])) } else { ([r[0], r[1]], (r[2], r[3])) })
                    .collect();
                Ok(Box::new(move |x| {
                    let d = |p: &[f64; 2]| (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
                    samples.iter().min_by(|a, b| d(&a.0).total_cmp(&d(&b.0))).expect("table is not empty").1
                }))
            }
        }
    }

    fn check_shape(&self, shape: &Shape, dim: usize, field: &str) -> CliResult<()> {
        let ok = match shape {
            Shape::Box { min, max } => min.len() == dim && max.len() == dim && min.iter().zip(max).all(|(a, b)| a <= b),
            Shape::Ball { center, radius } => center.len() == dim && *radius >= 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(self.invalid(field, format!("needs {dim}-dimensional coordinates with min <= max and radius >= 0")))
        }
    }

    fn side(&self, name: SideName, dim: usize, field: &str) -> CliResult<Side> {
        let side = match name {
            SideName::Left => Side::Left,
            SideName::Right => Side::Right,
            SideName::Bottom => Side::Bottom,
            SideName::Top => Side::Top,
        };
        if dim == 1 && matches!(side, Side::Bottom | Side::Top) {
            return Err(self.invalid(field, "top and bottom need a 2D grid"));
        }
        Ok(side)
    }

    fn constraints(&self, grid: &StaggeredGrid) -> CliResult<ConstraintSet> {
        let mut seen = BTreeSet::new();
        let mut dirichlet: Vec<(Vec<usize>, Option<VectorSeries>)> = Vec::new();
        for (k, bc) in self.scenario.boundaries.iter().enumerate() {
            let field = format!("boundaries[{k}]");
            let side = self.side(bc.side, grid.dimension(), &format!("{field}.side"))?;
            if !seen.insert(side as u8) {
                return Err(self.invalid(&format!("{field}.side"), "boundary declared twice"));
            }
            match bc.kind {
                BcKind::Neumann => {
                    if bc.values.is_some() {
                        return Err(self.invalid(&format!("{field}.values"), "only Dirichlet boundaries take values"));
                    }
                }
                BcKind::Dirichlet => {
                    let dofs = grid.boundary_pressure_dofs(side).context(self.ctx(&field))?;
                    let series = match &bc.values {
                        None => None,
                        Some(file) => Some(self.boundary_series(&self.resolve(file), dofs.len(), &field)?),
                    };
                    dirichlet.push((dofs, series));
                }
            }
        }
        if dirichlet.is_empty() {
            return Ok(ConstraintSet::none(grid.n_total()));
        }
        let mut all: Vec<usize> = dirichlet.iter().flat_map(|(d, _)| d.iter().copied()).collect();
        all.sort_unstable();
        all.dedup();
        let cs = dirichlet_constraints(grid, &all).context(self.ctx("boundaries"))?;
        let mut times: Vec<f64> = dirichlet.iter().filter_map(|(_, s)| s.as_ref()).flat_map(|s| s.times().to_vec()).collect();
        if times.is_empty() {
            return Ok(cs);
        }
        times.sort_by(f64::total_cmp);
        times.dedup();
        // Merge per-boundary series on the union of their sample times;
        // later boundaries win at shared corners.
        let mut values = Vec::with_capacity(times.len());
        for &t in &times {
            let mut row = vec![0.0; all.len()];
            for (dofs, series) in &dirichlet {
                if let Some(series) = series {
                    let mut v = vec![0.0; dofs.len()];
                    series.value_into(t, &mut v);
                    for (d, x) in dofs.iter().zip(v) {
                        row[all.binary_search(d).expect("dof is in the union")] = x;
                    }
                }
            }
            values.push(row);
        }
        let series = VectorSeries::new(times, values).context(self.ctx("boundaries"))?;
        cs.with_rhs(series).context(self.ctx("boundaries"))
    }

    fn boundary_series(&self, path: &Path, width: usize, field: &str) -> CliResult<VectorSeries> {
        let (header, rows) = read_table(path, &["time"], true)?;
        let columns = header.len() - 1;
        if columns != 1 && columns != width {
            return Err(self.invalid(
                &format!("{field}.values"),
                format!("{} has {columns} value columns; the boundary has {width} DOFs (or use one broadcast column)", path.display()),
            ));
        }
        let times = rows.iter().map(|r| r[0]).collect();
        let values = rows.iter().map(|r| if columns == 1 { vec![r[1]; width] } else { r[1..].to_vec() }).collect();
        VectorSeries::new(times, values).context(format!("{}: {}", self.ctx(field), path.display()))
    }

    fn initial(&self, grid: &StaggeredGrid, reduced: &ReducedSystem) -> CliResult<Vec<f64>> {
        let n = grid.n_total();
        let w = match &self.scenario.initial {
            InitialSpec::Zero => vec![0.0; n],
            InitialSpec::Gaussian { center, width, amplitude } => {
                if center.len() != grid.dimension() || !(*width > 0.0) {
                    return Err(self.invalid("initial", "gaussian needs a center per dimension and a positive width"));
                }
                (0..n)
                    .map(|k| {
                        let (block, x) = grid.dof_position(k).expect("k < n_total");
                        if block != FieldBlock::Pressure {
                            return 0.0;
                        }
                        let r2: f64 = center.iter().zip(x).map(|(c, x)| (x - c).powi(2)).sum();
                        amplitude * (-0.5 * r2 / (width * width)).exp()
                    })
                    .collect()
            }
            InitialSpec::Field { file } => {
                let path = self.resolve(file);
                let (_, rows) = read_table(&path, &["dof", "value"], false)?;
                let mut w = vec![0.0; n];
                for row in rows {
                    let k = as_index(row[0]).filter(|&k| k < n).ok_or_else(|| {
                        CliError::validation(path.display().to_string(), format!("DOF {} outside 0..{n}", row[0]))
                    })?;
                    w[k] = row[1];
                }
                w
            }
            InitialSpec::State { file } => {
                let path = self.resolve(file);
                let state = read_state(&path)?;
                let layout = state.layout();
                if layout.stacks != 1 || layout.auxiliary || layout.physical != reduced.len() {
                    return Err(self.invalid(
                        "initial.file",
                        format!("state must hold one block of {} DOFs without auxiliary qubit", reduced.len()),
                    ));
                }
                let free = decode(&state, &reduced.b().diagonal()).context(self.ctx("initial"))?;
                reduced.expand(&free, 0.0).context(self.ctx("initial"))?
            }
        };
        // Constrained DOFs follow from the free ones and the boundary data.
        let free = reduced.restrict(&w).context(self.ctx("initial"))?;
        reduced.expand(&free, 0.0).context(self.ctx("initial"))
    }

    fn sources(&self, grid: &StaggeredGrid, family: FamilyName, medium: &MediumFn) -> CliResult<Vec<PreparedSource>> {
        let mut out = Vec::with_capacity(self.scenario.sources.len());
        for (k, spec) in self.scenario.sources.iter().enumerate() {
            let field = format!("sources[{k}]");
            if family != FamilyName::Acoustic {
                return Err(self.invalid(&field, "sources need the acoustic family"));
            }
            let location = match (&spec.node, &spec.position) {
                (Some(node), None) => {
                    if *node >= grid.n_u() {
                        return Err(self.invalid(&format!("{field}.node"), format!("{node} outside 0..{}", grid.n_u())));
                    }
                    *node
                }
                (None, Some(x)) => self.nearest_node(grid, x, &format!("{field}.position"))?,
                _ => return Err(self.invalid(&field, "give exactly one of `node` and `position`")),
            };
            if spec.polarization[2] != 0.0 && grid.dimension() != 2 {
                return Err(self.invalid(&format!("{field}.polarization"), "a y component needs a 2D grid"));
            }
            if !(spec.t_start >= 0.0 && spec.t_end >= spec.t_start && spec.t_end.is_finite()) {
                return Err(self.invalid(&field, "needs 0 <= t_start <= t_end"));
            }
            let signal = self.signal(&spec.signal, &format!("{field}.signal"))?;
            let source =
                PointSource { location, polarization: spec.polarization, signal, t_start: spec.t_start, t_end: spec.t_end };
            let center = grid.dof_position(location).expect("location < n_u").1;
            let (rho_hom, c_hom) = medium(center);
            if let Some(r) = spec.ball_radius {
                if !(r > 0.0) {
                    return Err(self.invalid(&format!("{field}.ball_radius"), "must be positive"));
                }
                // The ball must see one medium; sample every DOF inside it.
                for dof in 0..grid.n_total() {
                    let x = grid.dof_position(dof).expect("dof < n_total").1;
                    if (x[0] - center[0]).hypot(x[1] - center[1]) <= r && medium(x) != (rho_hom, c_hom) {
                        return Err(self.invalid(
                            &format!("{field}.ball_radius"),
                            format!("material is not homogeneous within {r} of the source (DOF {dof} differs)"),
                        ));
                    }
                }
            }
            if spec.method == MethodName::Analytic && grid.dimension() != 1 {
                return Err(self.invalid(&format!("{field}.method"), "analytic slices exist in 1D only"));
            }
            if spec.windows == Some(0) {
                return Err(self.invalid(&format!("{field}.windows"), "at least one window is required"));
            }
            let options = GreensOptions {
                method: match spec.method {
                    MethodName::Discrete => GreensMethod::Discrete,
                    MethodName::Analytic => GreensMethod::Analytic,
                },
                windows: spec.windows,
                ..Default::default()
            };
            out.push(PreparedSource { source, ball_radius: spec.ball_radius, c_hom, rho_hom, options });
        }
        Ok(out)
    }

    fn nearest_node(&self, grid: &StaggeredGrid, x: &[f64], field: &str) -> CliResult<usize> {
        if x.len() != grid.dimension() {
            return Err(self.invalid(field, "needs one coordinate per dimension"));
        }
        let mut idx = [0usize; 2];
        let counts = [grid.nx(), grid.ny()];
        for (d, &(lo, hi)) in grid.bounds().iter().enumerate() {
            if !(lo..=hi).contains(&x[d]) {
                return Err(self.invalid(field, format!("{} outside [{lo}, {hi}]", x[d])));
            }
            let h = grid.spacing()[d];
            idx[d] = (((x[d] - lo) / h).round() as usize).min(counts[d] - 1);
        }
        Ok(grid.pressure_index(idx[0], idx[1]))
    }

    fn signal(&self, spec: &SignalSpec, field: &str) -> CliResult<SourceTimeFunction> {
        let positive = |v: f64, name: &str| -> CliResult<()> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(self.invalid(field, format!("`{name}` must be positive")))
            }
        };
        Ok(match spec {
            SignalSpec::Gaussian { center, width, amplitude } => {
                positive(*width, "width")?;
                SourceTimeFunction::Gaussian { center: *center, width: *width, amplitude: *amplitude }
            }
            SignalSpec::Ricker { center, frequency, amplitude } => {
                positive(*frequency, "frequency")?;
                SourceTimeFunction::Ricker { center: *center, frequency: *frequency, amplitude: *amplitude }
            }
            SignalSpec::WindowedSine { start, duration, frequency, amplitude } => {
                positive(*duration, "duration")?;
                SourceTimeFunction::WindowedSine {
                    start: *start,
                    duration: *duration,
                    frequency: *frequency,
                    amplitude: *amplitude,
                }
            }
            SignalSpec::Tabulated { file } => {
                let path = self.resolve(file);
                let (_, rows) = read_table(&path, &["time", "value"], false)?;
                SourceTimeFunction::tabulated(rows.iter().map(|r| r[0]).collect(), rows.iter().map(|r| r[1]).collect())
                    .context(path.display().to_string())?
            }
        })
    }

    fn measurements(
        &self,
        grid: &StaggeredGrid,
        reduced: &ReducedSystem,
        final_time: f64,
        overrides: &Overrides,
    ) -> CliResult<Vec<PreparedMeasurement>> {
        let mut names = BTreeSet::new();
        let mut out = Vec::new();
        for (k, m) in self.scenario.measurements.iter().enumerate() {
            let field = format!("measurements[{k}]");
            let valid_name =
                !m.name.is_empty() && m.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !valid_name {
                return Err(self.invalid(&format!("{field}.name"), "use letters, digits, `_` or `-`"));
            }
            if !names.insert(m.name.clone()) {
                return Err(self.invalid(&format!("{field}.name"), format!("`{}` used twice", m.name)));
            }
            let time = m.time.unwrap_or(final_time);
            if !(0.0..=final_time).contains(&time) {
                return Err(self.invalid(&format!("{field}.time"), format!("{time} outside [0, {final_time}]")));
            }
            let full = self.full_mask(grid, &m.subspace, &format!("{field}.subspace"))?;
            let projector = SubspaceProjector::new(reduced.free_dofs().iter().map(|&i| full[i]).collect());
            let estimator = self.estimator(m.estimator.unwrap_or(self.scenario.estimator), overrides, &field)?;
            out.push(PreparedMeasurement { name: m.name.clone(), time, projector, estimator });
        }
        Ok(out)
    }

    fn full_mask(&self, grid: &StaggeredGrid, spec: &SubspaceSpec, field: &str) -> CliResult<Vec<bool>> {
        let n = grid.n_total();
        match (&spec.ranges, &spec.region) {
            (Some(ranges), None) => {
                let mut mask = vec![false; n];
                for (k, &[a, b]) in ranges.iter().enumerate() {
                    if !(a < b && b <= n) {
                        return Err(self.invalid(&format!("{field}.ranges[{k}]"), format!("[{a}, {b}) is not a range in 0..{n}")));
                    }
                    mask[a..b].iter_mut().for_each(|m| *m = true);
                }
                Ok(mask)
            }
            (None, Some(region)) => {
                self.check_shape(&region.within, grid.dimension(), &format!("{field}.region.within"))?;
                if region.block == BlockName::Vy && grid.dimension() != 2 {
                    return Err(self.invalid(&format!("{field}.region.block"), "vy needs a 2D grid"));
                }
                Ok((0..n)
                    .map(|k| {
                        let (block, x) = grid.dof_position(k).expect("k < n_total");
                        let block_ok = match region.block {
                            BlockName::Any => true,
                            BlockName::Pressure => block == FieldBlock::Pressure,
                            BlockName::Vx => block == FieldBlock::VelocityX,
                            BlockName::Vy => block == FieldBlock::VelocityY,
                        };
                        block_ok && region.within.contains(x, grid.dimension())
                    })
                    .collect())
            }
            _ => Err(self.invalid(field, "give exactly one of `ranges` and `region`")),
        }
    }

    fn estimator(&self, spec: EstimatorSpec, overrides: &Overrides, field: &str) -> CliResult<EstimatorConfig> {
        let shots = overrides.shots.unwrap_or(spec.shots);
        let mode = if overrides.shots.is_some() { ModeName::Shots } else { spec.mode };
        let seed = overrides.seed.or(spec.seed);
        match mode {
            ModeName::Exact => Ok(EstimatorConfig::exact()),
            ModeName::Shots => {
                if shots == 0 {
                    return Err(self.invalid(&format!("{field}.estimator.shots"), "shot mode needs shots > 0"));
                }
                let seed =
                    seed.ok_or_else(|| self.invalid(&format!("{field}.estimator.seed"), "shot mode needs a seed"))?;
                Ok(EstimatorConfig { mode: EstimatorMode::Shots, shots, seed: Some(seed) })
            }
        }
    }

    /// Validates the `initcircuit` section.
    pub fn circuit_spec(&self) -> CliResult<(PolarGridSpec, CovariantFieldSpec)> {
        let spec = self.scenario.initcircuit.as_ref().ok_or_else(|| self.invalid("initcircuit", "missing"))?;
        let polar = PolarGridSpec {
            radial: spec.radial,
            components: spec.components,
            center: spec.center,
            radial_step: spec.radial_step,
            rotation_plane: spec.rotation_plane,
        };
        polar.validate().context(self.ctx("initcircuit"))?;
        let channels = 2 + spec.field.scalars.len();
        if channels > spec.components {
            return Err(self.invalid(
                "initcircuit.field",
                format!("{channels} channels do not fit into {} components", spec.components),
            ));
        }
        let values = spec.field.radial.iter().chain(&spec.field.tangential).chain(spec.field.scalars.iter().flatten());
        if values.clone().any(|v| !v.is_finite()) {
            return Err(self.invalid("initcircuit.field", "coefficients must be finite"));
        }
        Ok((polar, spec.field.clone()))
    }
}

impl Shape {
    pub fn contains(&self, x: [f64; 2], dim: usize) -> bool {
        match self {
            Shape::Box { min, max } => (0..dim).all(|d| min[d] <= x[d] && x[d] <= max[d]),
            Shape::Ball { center, radius } => (0..dim).map(|d| (x[d] - center[d]).powi(2)).sum::<f64>() <= radius * radius,
        }
    }
}

impl CovariantFieldSpec {
    /// Field values at `x` for a grid centred at `center` with `components`
    /// channels; the vector part occupies `(plane, plane + 1)`.
    pub fn eval(&self, x: [f64; 2], center: [f64; 2], components: usize, plane: usize) -> Vec<f64> {
        let (dx, dy) = (x[0] - center[0], x[1] - center[1]);
        let r = dx.hypot(dy);
        let poly = |c: &[f64]| c.iter().rev().fold(0.0, |acc, k| acc * r + k);
        let (f, g) = (poly(&self.radial), poly(&self.tangential));
        let mut out = vec![0.0; components];
        if r > 0.0 {
            out[plane] = (f * dx - g * dy) / r;
            out[plane + 1] = (f * dy + g * dx) / r;
        }
        let scalar_slots = (0..components).filter(|&c| c != plane && c != plane + 1);
        for (slot, coeffs) in scalar_slots.zip(&self.scalars) {
            out[slot] = poly(coeffs);
        }
        out
    }
}
