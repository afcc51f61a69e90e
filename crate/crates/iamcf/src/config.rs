//! Run configuration: a TOML document with nested tables for the norm, the
//! obstacle, the grid, the solver and the flow diagnostics.

use std::fmt;
use std::path::{Path, PathBuf};

use iamcf_core::{
    BoundaryFit, Grid2, GridDomain, MinkowskiNorm, Obstacle, OuterBc, Polygon, SolverConfig, WulffShape,
};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Named configurations shipped with the binary.
pub const BUNDLED: &[(&str, &str)] = &[("wulff_euclid_2d", include_str!("../configs/wulff_euclid_2d.toml"))];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_name")]
    pub name: String,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output directory; the CLI falls back to `$IAMCF_OUT/<name>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default = "Check::all")]
    pub checks: Vec<Check>,
    pub norm: NormSpec,
    pub obstacle: ObstacleSpec,
    pub grid: GridSpec,
    #[serde(default)]
    pub solver: SolverSpec,
    #[serde(default)]
    pub flow: FlowSpec,
}

fn default_name() -> String {
    "run".into()
}

fn default_seed() -> u64 {
    20240611
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NormSpec {
    Euclidean,
    Ellipsoidal {
        #[serde(rename = "A")]
        matrix: [[f64; 2]; 2],
    },
    Lq {
        q: f64,
        #[serde(default = "default_smoothing")]
        smoothing: f64,
    },
}

fn default_smoothing() -> f64 {
    iamcf_core::norm::DEFAULT_LQ_SMOOTHING
}

impl NormSpec {
    pub fn build(&self) -> Result<MinkowskiNorm> {
        let norm = match self {
            NormSpec::Euclidean => MinkowskiNorm::euclidean(2),
            NormSpec::Ellipsoidal { matrix } => {
                MinkowskiNorm::ellipsoidal(2, &[matrix[0][0], matrix[0][1], matrix[1][0], matrix[1][1]])
            }
            NormSpec::Lq { q, smoothing } => MinkowskiNorm::lq(2, *q, *smoothing),
        };
        norm.map_err(|e| Error::field("norm", e))
    }
}

/// A Wulff shape of the run norm or a convex polygon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObstacleSpec {
    Wulff {
        #[serde(default)]
        center: [f64; 2],
        radius: f64,
    },
    Polygon { vertices: Vec<[f64; 2]> },
}

impl ObstacleSpec {
    pub fn build(&self, norm: &MinkowskiNorm) -> Result<Obstacle> {
        match self {
            ObstacleSpec::Wulff { center, radius } => WulffShape::new(center.to_vec(), *radius, norm.clone())
                .map(Obstacle::Wulff)
                .map_err(|e| Error::field("obstacle", e)),
            ObstacleSpec::Polygon { vertices } => {
                let poly = Polygon::new(vertices.clone()).map_err(|e| Error::field("obstacle.vertices", e))?;
                if !poly.is_convex() {
                    return Err(Error::Invalid { field: "obstacle.vertices".into(), message: "polygon must be convex".into() });
                }
                Ok(Obstacle::Polygon(poly))
            }
        }
    }

    /// Closed-form arrival times exist only for Wulff obstacles.
    pub fn is_wulff(&self) -> bool {
        matches!(self, ObstacleSpec::Wulff { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    /// Box center; defaults to the obstacle center.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<[f64; 2]>,
    pub half_width: f64,
    /// Cells per axis.
    pub resolution: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterBcSpec {
    #[default]
    BarrierValue,
    Zero,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryFitSpec {
    #[default]
    CutCell,
    Staircase,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSpec {
    pub schedule: Vec<f64>,
    pub tol_energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol_grad: Option<f64>,
    pub max_iter: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub regularization: Option<f64>,
    pub confirm_regularization: bool,
    pub outer_bc: OuterBcSpec,
    pub boundary_fit: BoundaryFitSpec,
    pub allow_small_p: bool,
}

impl Default for SolverSpec {
    fn default() -> Self {
        let base = SolverConfig::default();
        Self {
            schedule: base.schedule,
            tol_energy: base.tol_energy,
            tol_grad: base.tol_grad,
            max_iter: base.max_iter,
            regularization: base.regularization,
            confirm_regularization: base.confirm_regularization,
            outer_bc: OuterBcSpec::BarrierValue,
            boundary_fit: BoundaryFitSpec::CutCell,
            allow_small_p: base.allow_small_p,
        }
    }
}

impl SolverSpec {
    pub fn build(&self) -> SolverConfig {
        SolverConfig {
            p: self.schedule.first().copied().unwrap_or(1.5),
            regularization: self.regularization,
            tol_grad: self.tol_grad,
            tol_energy: self.tol_energy,
            max_iter: self.max_iter,
            schedule: self.schedule.clone(),
            outer_bc: match self.outer_bc {
                OuterBcSpec::BarrierValue => OuterBc::BarrierValue,
                OuterBcSpec::Zero => OuterBc::Zero,
            },
            boundary_fit: match self.boundary_fit {
                BoundaryFitSpec::CutCell => BoundaryFit::CutCell,
                BoundaryFitSpec::Staircase => BoundaryFit::Staircase,
            },
            obstacle_value: 1.0,
            confirm_regularization: self.confirm_regularization,
            allow_small_p: self.allow_small_p,
        }
    }
}

/// Parameters of the post-solve flow diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSpec {
    pub growth_times: Vec<f64>,
    /// Levels at which the weak curvature identity is tested.
    pub curvature_levels: Vec<f64>,
    pub minimality_trials: u64,
    /// Reported relative tolerance for the growth ratio.
    pub growth_tol: f64,
    pub curvature_tol: f64,
    pub convergence_tol: f64,
}

impl Default for FlowSpec {
    fn default() -> Self {
        Self {
            growth_times: vec![0.25, 0.5, 1.0, 1.5],
            curvature_levels: vec![0.5, 1.0],
            minimality_trials: 200,
            growth_tol: 0.05,
            curvature_tol: 0.05,
            convergence_tol: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Barriers,
    Maxgrad,
    InradiusBound,
    BoundaryCurvature,
    Growth,
    Minimality,
    WeakCurvature,
    PConvergence,
}

impl Check {
    pub const ALL: [Check; 8] = [
        Check::Barriers,
        Check::Maxgrad,
        Check::InradiusBound,
        Check::BoundaryCurvature,
        Check::Growth,
        Check::Minimality,
        Check::WeakCurvature,
        Check::PConvergence,
    ];

    fn all() -> Vec<Check> {
        Self::ALL.to_vec()
    }

    pub fn name(self) -> &'static str {
        match self {
            Check::Barriers => "barriers",
            Check::Maxgrad => "maxgrad",
            Check::InradiusBound => "inradius_bound",
            Check::BoundaryCurvature => "boundary_curvature",
            Check::Growth => "growth",
            Check::Minimality => "minimality",
            Check::WeakCurvature => "weak_curvature",
            Check::PConvergence => "p_convergence",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Everything `continuation_solve` needs.
#[derive(Clone, Debug)]
pub struct Problem {
    pub norm: MinkowskiNorm,
    pub domain: GridDomain,
    pub solver: SolverConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    /// A bundled configuration by name.
    pub fn bundled(name: &str) -> Option<Self> {
        BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, text)| Self::from_toml(text).expect("bundled configs parse"))
    }

    /// A path to a TOML file, or the name of a bundled configuration.
    pub fn resolve(spec: &str) -> Result<Self> {
        let path = Path::new(spec);
        if path.exists() {
            return Self::load(path);
        }
        Self::bundled(spec).ok_or_else(|| Error::Io {
            path: path.to_path_buf(),
            message: "no such file or bundled configuration".into(),
        })
    }

    /// The configuration with every default spelled out.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configs serialize")
    }

    /// Checks the schedule against the dimension and the obstacle against
    /// the grid, and assembles the solver inputs.
    pub fn problem(&self) -> Result<Problem> {
        let norm = self.norm.build()?;
        let solver = self.solver.build();
        solver.validate_schedule(norm.dim()).map_err(|e| Error::field("solver.schedule", e))?;
        solver.validate(norm.dim()).map_err(|e| Error::field("solver", e))?;
        let obstacle = self.obstacle.build(&norm)?;
        let center = self.grid.center.unwrap_or_else(|| obstacle.center());
        let grid = Grid2::square(center, self.grid.half_width, self.grid.resolution)
            .map_err(|e| Error::field("grid", e))?;
        let domain = GridDomain::new(grid, obstacle).map_err(|e| Error::field("grid", e))?;
        for t in &self.flow.growth_times {
            if !(t.is_finite() && *t >= 0.0) {
                return Err(Error::Invalid { field: "flow.growth_times".into(), message: format!("{t} is not a nonnegative time") });
            }
        }
        Ok(Problem { norm, domain, solver })
    }
}
