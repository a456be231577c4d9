//! Benchmark registry and TOML problem configuration.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::design_io::read_design;
use crate::error::{Result, TopOptError};
use crate::fem::{HeatModel, MechModel, SolverKind};
use crate::grid::{resolve_boundary, Edge, FieldKind, Grid, GridSpec, LoadCase, Segment, SegmentKind};
use crate::material::{ConductivityInterp, ElasticInterp, ElasticMaterial, HeatMaterial};
use crate::objective::{Formulation, HeatObjective, MechObjective, PenaltyParams};
use crate::optimizer::{optimize, ConstraintMode, IterateRecord, OptimizationResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const BUILTIN_NAMES: [&str; 3] = ["mech1", "mech2", "heat"];

/// Penalty weight used by the displacement-energy formulation unless overridden.
pub const DISPLACEMENT_LAMBDA: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhysicsKind {
    Mechanism,
    Heat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SegmentKindName {
    Clamp,
    RollerNormal,
    Traction,
    Temperature,
    Insulated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct SegmentConfig {
    pub edge: Edge,
    pub start: f64,
    pub end: f64,
    pub kind: SegmentKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub load: Option<LoadCase>,
    /// Traction per unit length.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub traction: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

impl SegmentConfig {
    fn plain(edge: Edge, start: f64, end: f64, kind: SegmentKindName) -> Self {
        Self { edge, start, end, kind, load: None, traction: None, temperature: None }
    }

    fn traction(edge: Edge, start: f64, end: f64, load: LoadCase, value: [f64; 2]) -> Self {
        Self { load: Some(load), traction: Some(value), ..Self::plain(edge, start, end, SegmentKindName::Traction) }
    }

    pub fn to_segment(&self, index: usize) -> Result<Segment<f64>> {
        let missing = |what: &str| TopOptError::Validation(format!("boundary segment {index}: missing `{what}`"));
        let extra = |what: &str| {
            TopOptError::Validation(format!("boundary segment {index}: `{what}` does not apply to this kind"))
        };
        let kind = match self.kind {
            SegmentKindName::Traction => SegmentKind::Traction {
                load: self.load.ok_or_else(|| missing("load"))?,
                value: self.traction.ok_or_else(|| missing("traction"))?,
            },
            SegmentKindName::Temperature => {
                SegmentKind::Temperature { value: self.temperature.ok_or_else(|| missing("temperature"))? }
            }
            SegmentKindName::Clamp => SegmentKind::Clamp,
            SegmentKindName::RollerNormal => SegmentKind::RollerNormal,
            SegmentKindName::Insulated => SegmentKind::Insulated,
        };
        if self.kind != SegmentKindName::Traction {
            if self.load.is_some() {
                return Err(extra("load"));
            }
            if self.traction.is_some() {
                return Err(extra("traction"));
            }
        }
        if self.kind != SegmentKindName::Temperature && self.temperature.is_some() {
            return Err(extra("temperature"));
        }
        Ok(Segment::new(self.edge, self.start, self.end, kind))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InterpName {
    #[default]
    Linear,
    LinearStiffness,
    LinearCompliance,
    Gmif,
}

/// Material block; which keys are required depends on the physics.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct MaterialConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_min: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interp: Option<InterpName>,
    /// Exponent of the power-mean interpolation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct PenaltyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    pub gamma: f64,
    /// Defaults to the cell size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Defaults to one cell area.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default)]
    pub constraint: ConstraintMode,
    #[serde(default)]
    pub formulation: Formulation,
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Axis {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialKind {
    Uniform,
    Strip,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct InitialConfig {
    pub kind: InitialKind,
    /// Uniform value; defaults to the volume fraction.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub axis: Option<Axis>,
    /// Strip centre as a fraction of the transverse side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub width: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
}

impl InitialConfig {
    fn uniform() -> Self {
        Self { kind: InitialKind::Uniform, value: None, axis: None, center: None, width: None, path: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema_version: u32,
    pub name: String,
    pub physics: PhysicsKind,
    #[serde(default)]
    pub solver: SolverKind,
    pub grid: GridSpec<f64>,
    pub boundary: Vec<SegmentConfig>,
    pub material: MaterialConfig,
    pub penalty: PenaltyConfig,
    pub initial: InitialConfig,
}

const MECH_E_MAX: f64 = 5000.0 * 8.0 / 3.0;
const PORT: f64 = 0.05;

fn mechanism_base(name: &str, nx: usize, ny: usize, lx: f64, ly: f64) -> ProblemConfig {
    ProblemConfig {
        schema_version: SCHEMA_VERSION,
        name: name.into(),
        physics: PhysicsKind::Mechanism,
        solver: SolverKind::Auto,
        grid: GridSpec::new(nx, ny, lx, ly),
        boundary: vec![
            SegmentConfig::plain(Edge::Left, 0.0, 0.05, SegmentKindName::Clamp),
            SegmentConfig::plain(Edge::Left, 0.95, 1.0, SegmentKindName::Clamp),
        ],
        material: MaterialConfig {
            e_max: Some(MECH_E_MAX),
            e_min: Some(1e-5 * MECH_E_MAX),
            nu: Some(0.3),
            interp: Some(InterpName::LinearCompliance),
            ..Default::default()
        },
        penalty: PenaltyConfig {
            lambda: Some(1.0),
            gamma: 0.1,
            eps: None,
            beta: Some(0.3),
            delta: None,
            constraint: ConstraintMode::Inequality,
            formulation: Formulation::Stress,
            max_iters: 500,
        },
        initial: InitialConfig::uniform(),
    }
}

/// Force inverter: input pulled outward at the middle of the left edge, output
/// at the middle of the right edge, clamped left-edge corners.
pub fn model_problem_1() -> ProblemConfig {
    let mut c = mechanism_base("mech1", 400, 400, 1.0, 1.0);
    let (lo, hi) = (0.5 - PORT / 2.0, 0.5 + PORT / 2.0);
    c.boundary.push(SegmentConfig::traction(Edge::Left, lo, hi, LoadCase::In, [-2.0, 0.0]));
    c.boundary.push(SegmentConfig::traction(Edge::Right, lo, hi, LoadCase::Out, [-1.0, 0.0]));
    c
}

/// Gripper on a 2:1 domain: input pushed inward at the middle of the left edge,
/// two output jaws on the right edge loaded toward each other.
pub fn model_problem_2() -> ProblemConfig {
    let mut c = mechanism_base("mech2", 600, 300, 2.0, 1.0);
    // port width lx/20 measured on the unit-height left edge
    let w = 2.0 * PORT;
    c.boundary.push(SegmentConfig::traction(Edge::Left, 0.5 - w / 2.0, 0.5 + w / 2.0, LoadCase::In, [1.0, 0.0]));
    c.boundary.push(SegmentConfig::traction(Edge::Right, 0.55, 0.55 + w, LoadCase::Out, [0.0, 1.0]));
    c.boundary.push(SegmentConfig::traction(Edge::Right, 0.45 - w, 0.45, LoadCase::Out, [0.0, -1.0]));
    c
}

/// Heat dissipation: zero temperature on a centred fifth of the left edge,
/// insulated elsewhere, horizontal strip as the initial design.
pub fn heat_benchmark() -> ProblemConfig {
    ProblemConfig {
        schema_version: SCHEMA_VERSION,
        name: "heat".into(),
        physics: PhysicsKind::Heat,
        solver: SolverKind::Auto,
        grid: GridSpec::new(600, 600, 1.0, 1.0),
        boundary: vec![SegmentConfig {
            temperature: Some(0.0),
            ..SegmentConfig::plain(Edge::Left, 0.4, 0.6, SegmentKindName::Temperature)
        }],
        material: MaterialConfig {
            kappa1: Some(10.0),
            kappa2: Some(1.0),
            q1: Some(1.0),
            q2: Some(100.0),
            interp: Some(InterpName::Linear),
            ..Default::default()
        },
        penalty: PenaltyConfig {
            lambda: Some(0.1),
            gamma: 0.1,
            eps: None,
            beta: Some(0.4),
            delta: None,
            constraint: ConstraintMode::Inequality,
            formulation: Formulation::Stress,
            max_iters: 500,
        },
        initial: InitialConfig {
            kind: InitialKind::Strip,
            value: None,
            axis: Some(Axis::Horizontal),
            center: Some(0.5),
            width: Some(0.2),
            path: None,
        },
    }
}

pub fn builtin(name: &str) -> Option<ProblemConfig> {
    match name {
        "mech1" => Some(model_problem_1()),
        "mech2" => Some(model_problem_2()),
        "heat" => Some(heat_benchmark()),
        _ => None,
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

/// Parses and validates a TOML configuration.
pub fn parse_config(text: &str) -> Result<ProblemConfig> {
    let cfg: ProblemConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
        TopOptError::Parse { line, column, message: e.message().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<ProblemConfig> {
    let text = fs::read_to_string(path)?;
    let mut cfg = parse_config(&text)?;
    // relative design paths resolve against the config location
    if let (Some(p), Some(dir)) = (cfg.initial.path.as_mut(), path.parent()) {
        if p.is_relative() {
            *p = dir.join(&*p);
        }
    }
    Ok(cfg)
}

pub fn to_toml(cfg: &ProblemConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| TopOptError::Config(format!("cannot serialize config: {e}")))
}

pub fn save_config(cfg: &ProblemConfig, path: &Path) -> Result<()> {
    fs::write(path, to_toml(cfg)?)?;
    Ok(())
}

/// Command-line style overrides of individual config keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub nx: Option<usize>,
    pub ny: Option<usize>,
    pub max_iters: Option<usize>,
    pub beta: Option<f64>,
    pub lambda: Option<f64>,
    pub gamma: Option<f64>,
    pub eps: Option<f64>,
    pub p: Option<f64>,
    pub constraint: Option<ConstraintMode>,
    pub formulation: Option<Formulation>,
    pub solver: Option<SolverKind>,
}

impl Overrides {
    /// Applies the overrides. Changing one mesh count keeps cells square by
    /// scaling the other.
    pub fn apply(&self, cfg: &mut ProblemConfig) -> Result<()> {
        let g = &mut cfg.grid;
        match (self.nx, self.ny) {
            (Some(nx), Some(ny)) => {
                g.nx = nx;
                g.ny = ny;
            }
            (Some(nx), None) => {
                g.ny = ((nx as f64) * g.ly / g.lx).round() as usize;
                g.nx = nx;
            }
            (None, Some(ny)) => {
                g.nx = ((ny as f64) * g.lx / g.ly).round() as usize;
                g.ny = ny;
            }
            (None, None) => {}
        }
        let pen = &mut cfg.penalty;
        if let Some(v) = self.max_iters {
            pen.max_iters = v;
        }
        if let Some(v) = self.beta {
            pen.beta = Some(v);
        }
        if let Some(v) = self.gamma {
            pen.gamma = v;
        }
        if let Some(v) = self.eps {
            pen.eps = Some(v);
        }
        if let Some(v) = self.constraint {
            pen.constraint = v;
        }
        if let Some(v) = self.formulation {
            pen.formulation = v;
            if v == Formulation::DisplacementAdjoint && self.lambda.is_none() {
                pen.lambda = Some(DISPLACEMENT_LAMBDA);
            }
        }
        if let Some(v) = self.lambda {
            pen.lambda = Some(v);
        }
        if let Some(p) = self.p {
            cfg.material.interp = Some(InterpName::Gmif);
            cfg.material.p = Some(p);
        }
        if let Some(s) = self.solver {
            cfg.solver = s;
        }
        cfg.validate()
    }
}

fn need(v: Option<f64>, key: &str) -> Result<f64> {
    v.ok_or_else(|| TopOptError::Validation(format!("missing `{key}`")))
}

impl ProblemConfig {
    pub fn grid(&self) -> Result<Grid<f64>> {
        Grid::new(self.grid)
    }

    pub fn segments(&self) -> Result<Vec<Segment<f64>>> {
        self.boundary.iter().enumerate().map(|(i, s)| s.to_segment(i)).collect()
    }

    fn field(&self) -> FieldKind {
        match self.physics {
            PhysicsKind::Mechanism => FieldKind::Vector,
            PhysicsKind::Heat => FieldKind::Scalar,
        }
    }

    fn check_material_keys(&self) -> Result<()> {
        let m = &self.material;
        let (own, foreign): (&[(&str, Option<f64>)], &[(&str, Option<f64>)]) = (
            &[("e-max", m.e_max), ("e-min", m.e_min), ("nu", m.nu)],
            &[("kappa1", m.kappa1), ("kappa2", m.kappa2), ("q1", m.q1), ("q2", m.q2)],
        );
        let foreign = match self.physics {
            PhysicsKind::Mechanism => foreign,
            PhysicsKind::Heat => own,
        };
        if let Some((k, _)) = foreign.iter().find(|(_, v)| v.is_some()) {
            return Err(TopOptError::Validation(format!("material key `{k}` does not apply to this physics")));
        }
        Ok(())
    }

    pub fn elastic_material(&self) -> Result<ElasticMaterial<f64>> {
        let m = &self.material;
        let interp = match m.interp.unwrap_or(InterpName::LinearCompliance) {
            InterpName::LinearCompliance => ElasticInterp::LinearCompliance,
            InterpName::LinearStiffness => ElasticInterp::LinearStiffness,
            InterpName::Gmif => ElasticInterp::Gmif(need(m.p, "material.p")?),
            InterpName::Linear => {
                return Err(TopOptError::Validation(
                    "elastic interp must be linear-compliance, linear-stiffness or gmif".into(),
                ))
            }
        };
        ElasticMaterial::new(need(m.e_max, "material.e-max")?, need(m.e_min, "material.e-min")?, m.nu.unwrap_or(0.3), interp)
    }

    pub fn heat_material(&self) -> Result<HeatMaterial<f64>> {
        let m = &self.material;
        let interp = match m.interp.unwrap_or(InterpName::Linear) {
            InterpName::Linear => ConductivityInterp::Linear,
            InterpName::Gmif => ConductivityInterp::Gmif(need(m.p, "material.p")?),
            _ => return Err(TopOptError::Validation("conductivity interp must be linear or gmif".into())),
        };
        HeatMaterial::new(
            need(m.kappa1, "material.kappa1")?,
            need(m.kappa2, "material.kappa2")?,
            need(m.q1, "material.q1")?,
            need(m.q2, "material.q2")?,
            interp,
        )
    }

    pub fn penalty_params(&self, grid: &Grid<f64>) -> Result<PenaltyParams<f64>> {
        let p = &self.penalty;
        let default_lambda = match (self.physics, p.formulation) {
            (PhysicsKind::Heat, _) => 0.1,
            (_, Formulation::DisplacementAdjoint) => DISPLACEMENT_LAMBDA,
            _ => 1.0,
        };
        let params = PenaltyParams {
            lambda: p.lambda.unwrap_or(default_lambda),
            gamma: p.gamma,
            eps: p.eps.unwrap_or(grid.h()),
            beta: need(p.beta, "penalty.beta")?,
            delta: p.delta.unwrap_or(grid.cell_area()),
            constraint: p.constraint,
            formulation: p.formulation,
            max_iters: p.max_iters,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(TopOptError::Validation(format!(
                "unsupported schema-version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let grid = self.grid()?;
        let segments = self.segments()?;
        resolve_boundary(&grid, &segments, self.field())?;
        self.check_material_keys()?;
        match self.physics {
            PhysicsKind::Mechanism => {
                self.elastic_material()?;
            }
            PhysicsKind::Heat => {
                self.heat_material()?;
                if self.penalty.formulation != Formulation::Stress {
                    return Err(TopOptError::Validation("heat problems use the default formulation".into()));
                }
            }
        }
        self.penalty_params(&grid)?;
        let init = &self.initial;
        match init.kind {
            InitialKind::Uniform => {
                if let Some(v) = init.value {
                    if !(0.0..=1.0).contains(&v) {
                        return Err(TopOptError::Validation("initial.value must lie in [0, 1]".into()));
                    }
                }
            }
            InitialKind::Strip => {
                need(init.center, "initial.center")?;
                let w = need(init.width, "initial.width")?;
                if !(w > 0.0 && w <= 1.0) {
                    return Err(TopOptError::Validation("initial.width must lie in (0, 1]".into()));
                }
            }
            InitialKind::File => {
                if init.path.is_none() {
                    return Err(TopOptError::Validation("missing `initial.path`".into()));
                }
            }
        }
        Ok(())
    }

    /// Initial design on the configured grid.
    pub fn initial_design(&self) -> Result<Vec<f64>> {
        let grid = self.grid()?;
        let n = grid.n_elems();
        let init = &self.initial;
        match init.kind {
            InitialKind::Uniform => {
                let v = match init.value {
                    Some(v) => v,
                    None => need(self.penalty.beta, "penalty.beta")?,
                };
                Ok(vec![v; n])
            }
            InitialKind::Strip => {
                let center = need(init.center, "initial.center")?;
                let half = need(init.width, "initial.width")? / 2.0;
                let axis = init.axis.unwrap_or(Axis::Horizontal);
                let tol = 1e-9;
                Ok((0..n)
                    .map(|e| {
                        let [x, y] = grid.centroid(e);
                        let t = match axis {
                            Axis::Horizontal => y / grid.ly(),
                            Axis::Vertical => x / grid.lx(),
                        };
                        if (t - center).abs() <= half + tol { 1.0 } else { 0.0 }
                    })
                    .collect())
            }
            InitialKind::File => {
                let path = init.path.as_ref().ok_or_else(|| TopOptError::Validation("missing `initial.path`".into()))?;
                read_design(path, grid.nx(), grid.ny())
            }
        }
    }

    pub fn build(&self) -> Result<Problem> {
        self.validate()?;
        let grid = self.grid()?;
        let segments = self.segments()?;
        let params = self.penalty_params(&grid)?;
        Ok(match self.physics {
            PhysicsKind::Mechanism => {
                let model = MechModel::new(&grid, self.elastic_material()?, &segments, self.solver)?;
                Problem::Mech(MechObjective::new(model, params)?)
            }
            PhysicsKind::Heat => {
                let model = HeatModel::new(&grid, self.heat_material()?, &segments, self.solver)?;
                Problem::Heat(HeatObjective::new(model, params)?)
            }
        })
    }
}

/// A configured problem ready to optimize.
#[derive(Debug, Clone)]
pub enum Problem {
    Mech(MechObjective<f64>),
    Heat(HeatObjective<f64>),
}

impl Problem {
    pub fn grid(&self) -> &Grid<f64> {
        match self {
            Problem::Mech(m) => m.grid(),
            Problem::Heat(h) => h.grid(),
        }
    }

    pub fn params(&self) -> &PenaltyParams<f64> {
        match self {
            Problem::Mech(m) => m.params(),
            Problem::Heat(h) => h.params(),
        }
    }

    pub fn optimize<F>(&self, chi0: Vec<f64>, on_iterate: F) -> OptimizationResult<f64>
    where
        F: FnMut(&IterateRecord, &[f64]),
    {
        match self {
            Problem::Mech(m) => optimize(m, chi0, on_iterate),
            Problem::Heat(h) => optimize(h, chi0, on_iterate),
        }
    }

    /// Assembles and solves once at `chi` without optimizing.
    pub fn dry_run(&self, chi: &[f64]) -> Result<()> {
        match self {
            Problem::Mech(m) => m.snapshot(chi).map(|_| ()),
            Problem::Heat(h) => h.snapshot(chi).map(|_| ()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_parameters() {
        let m1 = model_problem_1();
        assert!((m1.material.e_max.unwrap() - 13333.333333333334).abs() < 1e-9);
        assert_eq!(m1.penalty.gamma, 0.1);
        assert_eq!(m1.penalty.eps, None);
        assert_eq!((m1.grid.nx, m1.grid.ny), (400, 400));
        let g = m1.grid().unwrap();
        assert_eq!(m1.penalty_params(&g).unwrap().eps, g.h());
        let m2 = model_problem_2();
        assert_eq!((m2.grid.nx, m2.grid.ny), (600, 300));
        assert_eq!(m2.grid.lx / m2.grid.ly, 2.0);
        let h = heat_benchmark();
        assert_eq!(h.material.kappa1.unwrap() / h.material.kappa2.unwrap(), 10.0);
        assert_eq!(h.material.q2.unwrap() / h.material.q1.unwrap(), 100.0);
        assert_eq!(h.penalty.lambda, Some(0.1));
    }

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_NAMES {
            builtin(name).unwrap().validate().unwrap();
        }
        assert!(builtin("nope").is_none());
    }

    #[test]
    fn scaled_variant_keeps_parameters() {
        let mut c = model_problem_1();
        Overrides { nx: Some(100), ..Default::default() }.apply(&mut c).unwrap();
        assert_eq!((c.grid.nx, c.grid.ny), (100, 100));
        let mut base = model_problem_1();
        base.grid = c.grid;
        assert_eq!(base, c);
        let mut c2 = model_problem_2();
        Overrides { nx: Some(120), ..Default::default() }.apply(&mut c2).unwrap();
        assert_eq!((c2.grid.nx, c2.grid.ny), (120, 60));
    }

    #[test]
    fn toml_round_trip() {
        for name in BUILTIN_NAMES {
            let c = builtin(name).unwrap();
            let text = to_toml(&c).unwrap();
            assert_eq!(parse_config(&text).unwrap(), c, "{text}");
        }
    }

    #[test]
    fn missing_and_bad_beta() {
        let mut c = model_problem_1();
        c.penalty.beta = None;
        assert!(matches!(parse_config(&to_toml(&c).unwrap()), Err(TopOptError::Validation(_))));
        c.penalty.beta = Some(1.5);
        assert!(matches!(parse_config(&to_toml(&c).unwrap()), Err(TopOptError::Validation(_))));
    }

    #[test]
    fn unknown_key_reports_position() {
        let text = to_toml(&model_problem_1()).unwrap().replace("gamma = ", "gamma-typo = 1\ngamma = ");
        match parse_config(&text) {
            Err(TopOptError::Parse { line, column, .. }) => assert!(line > 1 && column >= 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn heat_strip_rows() {
        let mut c = heat_benchmark();
        Overrides { nx: Some(150), ..Default::default() }.apply(&mut c).unwrap();
        let chi = c.initial_design().unwrap();
        let g = c.grid().unwrap();
        for e in 0..g.n_elems() {
            let y = g.centroid(e)[1];
            assert_eq!(chi[e] == 1.0, (0.4..=0.6).contains(&y), "y = {y}");
        }
        assert_eq!(chi.iter().filter(|&&v| v == 1.0).count(), 150 * 30);
    }

    #[test]
    fn dry_run_at_reduced_resolution() {
        for name in BUILTIN_NAMES {
            let mut c = builtin(name).unwrap();
            Overrides { nx: Some(50), ..Default::default() }.apply(&mut c).unwrap();
            let p = c.build().unwrap();
            p.dry_run(&c.initial_design().unwrap()).unwrap();
        }
    }

    #[test]
    fn p_override_switches_to_gmif() {
        let mut c = heat_benchmark();
        Overrides { p: Some(-1.0), ..Default::default() }.apply(&mut c).unwrap();
        assert_eq!(c.heat_material().unwrap().interp_kappa, ConductivityInterp::Gmif(-1.0));
        let mut c = model_problem_1();
        Overrides { formulation: Some(Formulation::DisplacementAdjoint), ..Default::default() }.apply(&mut c).unwrap();
        assert_eq!(c.penalty.lambda, Some(DISPLACEMENT_LAMBDA));
    }
}
