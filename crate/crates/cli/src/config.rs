//! JSON run configuration and its conversion into core types.

use std::path::PathBuf;

use patchcomp_core::dynamics::Scheme;
use patchcomp_core::*;
use serde::{Deserialize, Serialize};

use crate::failure::Failure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub landscape: LandscapeConfig,
    pub environment: EnvironmentConfig,
    pub resident: TraitsConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mutant: Option<TraitsConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub steady: SteadySection,
    #[serde(default)]
    pub eigen: EigenSection,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pip: Option<PipSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LandscapeConfig {
    /// Patch lengths, left to right.
    pub lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub r: Vec<f64>,
    pub k: Vec<f64>,
}

/// Diffusion rates plus either jump ratios `p` or edge preferences `alpha`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraitsConfig {
    pub d: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridConfig {
    Uniform(usize),
    Spacing(f64),
    PerPatch(Vec<usize>),
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig::Uniform(50)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadySection {
    pub newton_tol: f64,
    pub max_newton_iters: usize,
    pub armijo: f64,
    pub max_backtracks: usize,
    pub fallback_dt: f64,
    pub fallback_horizon: f64,
}

impl Default for SteadySection {
    fn default() -> Self {
        let c = SteadyConfig::<f64>::default();
        Self {
            newton_tol: c.newton_tol,
            max_newton_iters: c.max_newton_iters,
            armijo: c.armijo,
            max_backtracks: c.max_backtracks,
            fallback_dt: c.fallback_dt,
            fallback_horizon: c.fallback_horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenSection {
    pub sign_tol: f64,
    pub max_inverse_iters: usize,
    pub inverse_tol: f64,
}

impl Default for EigenSection {
    fn default() -> Self {
        let c = EigenConfig64::default();
        Self {
            sign_tol: c.sign_tol,
            max_inverse_iters: c.max_inverse_iters,
            inverse_tol: c.inverse_tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeConfig {
    ImexEuler,
    CrankNicolson,
}

/// `null` for `dt` and `extinction_eps` means "derived from the environment":
/// `0.01 / max r` and `1e-6 · min k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt: Option<f64>,
    pub t_max: f64,
    pub steady_tol: f64,
    pub extinction_eps: Option<f64>,
    pub scheme: SchemeConfig,
    pub check_every: usize,
    pub match_scale: f64,
    pub persistence_floor: f64,
    /// Write every n-th state to `trajectory.csv`.
    pub trajectory_stride: Option<usize>,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt: None,
            t_max: 2000.0,
            steady_tol: 1e-8,
            extinction_eps: None,
            scheme: SchemeConfig::ImexEuler,
            check_every: 100,
            match_scale: 1e4,
            persistence_floor: 1e-3,
            trajectory_stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl ScanRange {
    pub fn values(&self) -> Vec<f64> {
        if self.count == 1 {
            return vec![self.min];
        }
        let step = (self.max - self.min) / (self.count - 1) as f64;
        (0..self.count).map(|i| self.min + step * i as f64).collect()
    }

    fn validate(&self, field: &str) -> Result<(), Failure> {
        if !(self.min > 0.0 && self.max >= self.min && self.max.is_finite()) {
            return Err(Failure::validation(field, "need 0 < min <= max"));
        }
        if self.count == 0 {
            return Err(Failure::validation(&format!("{field}.count"), "must be at least 1"));
        }
        Ok(())
    }
}

/// Two-patch invasibility scan; defaults to `[k̄/2, 2k̄]` with 21 points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipSection {
    pub resident: ScanRange,
    pub mutant: ScanRange,
}

/// Cartesian product of resident and mutant jump-ratio vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub resident_p: Vec<Vec<f64>>,
    pub mutant_p: Vec<Vec<f64>>,
    #[serde(default = "yes")]
    pub fitness: bool,
}

fn yes() -> bool {
    true
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            landscape: LandscapeConfig { lengths: vec![1.0, 1.0] },
            environment: EnvironmentConfig {
                r: vec![1.0, 1.0],
                k: vec![1.0, 2.0],
            },
            resident: TraitsConfig {
                d: vec![1.0, 1.0],
                p: Some(vec![3.0]),
                alpha: None,
            },
            mutant: Some(TraitsConfig {
                d: vec![1.0, 1.0],
                p: Some(vec![4.0]),
                alpha: None,
            }),
            grid: GridConfig::default(),
            steady: SteadySection::default(),
            eigen: EigenSection::default(),
            sim: SimSection::default(),
            pip: None,
            sweep: None,
            output_dir: None,
            seed: 0,
        }
    }
}

/// A validated configuration in core types.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub landscape: Landscape64,
    pub env: PatchEnvironment64,
    pub resident: SpeciesTraits64,
    pub mutant: Option<SpeciesTraits64>,
    pub grid: Grid64,
    pub steady: SteadyConfig<f64>,
    pub eigen: EigenConfig64,
    pub sim: SimConfig64,
}

impl Resolved {
    pub fn model(&self) -> Result<CompetitionModel64, Failure> {
        let mutant = self
            .mutant
            .clone()
            .ok_or_else(|| Failure::validation("mutant", "required by this command"))?;
        Ok(CompetitionModel::new(self.landscape.clone(), self.env.clone(), self.resident.clone(), mutant)?)
    }
}

fn at<T>(field: &str, r: patchcomp_core::error::Result<T>) -> Result<T, Failure> {
    r.map_err(|e| match e {
        patchcomp_core::Error::Validation { field: inner, reason } => Failure::validation(&format!("{field}.{inner}"), &reason),
        other if other.is_validation() => Failure::validation(field, &other.to_string()),
        other => Failure::from(other),
    })
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, Failure> {
        serde_json::from_str(text).map_err(|e| Failure::Validation(format!("config: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    fn traits(&self, which: &str, t: &TraitsConfig) -> Result<SpeciesTraits64, Failure> {
        match (&t.p, &t.alpha) {
            (Some(p), None) => at(which, SpeciesTraits::with_ratios(t.d.clone(), p.clone())),
            (None, Some(alpha)) => at(which, SpeciesTraits::with_preferences(t.d.clone(), alpha)),
            (None, None) if self.landscape.lengths.len() == 1 => at(which, SpeciesTraits::with_ratios(t.d.clone(), vec![])),
            (None, None) => Err(Failure::validation(&format!("{which}.p"), "give either p or alpha")),
            (Some(_), Some(_)) => Err(Failure::validation(&format!("{which}.alpha"), "give p or alpha, not both")),
        }
    }

    /// Checks every section and builds the core objects. Nothing numerical runs before this succeeds.
    pub fn resolve(&self) -> Result<Resolved, Failure> {
        let landscape = at("landscape.lengths", Landscape::from_lengths(&self.landscape.lengths))?;
        let env = at("environment", PatchEnvironment::new(self.environment.r.clone(), self.environment.k.clone()))?;
        let n = landscape.n();
        if env.n() != n {
            return Err(Failure::validation("environment", &format!("expected {n} patches, got {}", env.n())));
        }
        let resident = self.traits("resident", &self.resident)?;
        at("resident", resident.check_dims(n, "d"))?;
        let mutant = match &self.mutant {
            Some(m) => {
                let t = self.traits("mutant", m)?;
                at("mutant", t.check_dims(n, "d"))?;
                Some(t)
            }
            None => None,
        };
        let resolution = match &self.grid {
            GridConfig::Uniform(m) => Resolution::Uniform(*m),
            GridConfig::Spacing(h) => Resolution::Spacing(*h),
            GridConfig::PerPatch(c) => Resolution::PerPatch(c.clone()),
        };
        let grid = at("grid", build_grid(&landscape, &resolution))?;
        let s = &self.steady;
        let steady = SteadyConfig {
            newton_tol: s.newton_tol,
            max_newton_iters: s.max_newton_iters,
            armijo: s.armijo,
            max_backtracks: s.max_backtracks,
            fallback_dt: s.fallback_dt,
            fallback_horizon: s.fallback_horizon,
        };
        at("steady", steady.validate())?;
        let e = &self.eigen;
        if !(e.sign_tol >= 0.0 && e.inverse_tol > 0.0 && e.max_inverse_iters > 0) {
            return Err(Failure::validation("eigen", "tolerances must be positive and max_inverse_iters at least 1"));
        }
        let eigen = EigenConfig {
            sign_tol: e.sign_tol,
            max_inverse_iters: e.max_inverse_iters,
            inverse_tol: e.inverse_tol,
            steady: steady.clone(),
        };
        let base = SimConfig::for_environment(&env);
        let m = &self.sim;
        let sim = SimConfig {
            dt: m.dt.unwrap_or(base.dt),
            t_max: m.t_max,
            steady_tol: m.steady_tol,
            extinction_eps: m.extinction_eps.unwrap_or(base.extinction_eps),
            scheme: match m.scheme {
                SchemeConfig::ImexEuler => Scheme::ImexEuler,
                SchemeConfig::CrankNicolson => Scheme::CrankNicolson,
            },
            check_every: m.check_every,
            match_scale: m.match_scale,
            persistence_floor: m.persistence_floor,
        };
        at("sim", sim.validate())?;
        if m.trajectory_stride == Some(0) {
            return Err(Failure::validation("sim.trajectory_stride", "must be at least 1"));
        }
        if let Some(pip) = &self.pip {
            pip.resident.validate("pip.resident")?;
            pip.mutant.validate("pip.mutant")?;
        }
        if let Some(sweep) = &self.sweep {
            if sweep.resident_p.is_empty() || sweep.mutant_p.is_empty() {
                return Err(Failure::validation("sweep", "needs at least one resident and one mutant strategy"));
            }
            for (name, list) in [("sweep.resident_p", &sweep.resident_p), ("sweep.mutant_p", &sweep.mutant_p)] {
                for (i, p) in list.iter().enumerate() {
                    at(&format!("{name}[{i}]"), StrategyVector::new(p.clone()))?;
                    if p.len() + 1 != n {
                        return Err(Failure::validation(&format!("{name}[{i}]"), &format!("expected {} ratios", n - 1)));
                    }
                }
            }
        }
        Ok(Resolved {
            landscape,
            env,
            resident,
            mutant,
            grid,
            steady,
            eigen,
            sim,
        })
    }
}
