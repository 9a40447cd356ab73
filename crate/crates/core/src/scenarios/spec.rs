use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, ScenarioErrorKind};
use crate::game::{CoefficientSet, CostTerm, CrowdCoefficients};
use crate::law::GaussianLaw;
use crate::lq::{DesiredVelocityLaw, LqTaggedProblem};
use crate::lsmc::{PicardConfig, RegressionBasis};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    KeepTogether,
    DesiredVelocity,
    Bidirectional,
}

impl ScenarioKind {
    pub fn ident(self) -> &'static str {
        match self {
            ScenarioKind::KeepTogether => "keep_together",
            ScenarioKind::DesiredVelocity => "desired_velocity",
            ScenarioKind::Bidirectional => "bidirectional",
        }
    }

    pub fn from_ident(s: &str) -> Option<Self> {
        [ScenarioKind::KeepTogether, ScenarioKind::DesiredVelocity, ScenarioKind::Bidirectional]
            .into_iter()
            .find(|k| k.ident() == s)
    }
}

/// Tagged crowd: `dY = (u + λ_noise B^y) dt + Z dB`, `Y_T = y_T`, running cost
/// `½[λ_cont|u|² + λ_des|u − v_des|² + λ_rep|Y − Q|² + λ_attr|Y − E Y|² +
/// λ_rep_crowd|Y − E X|²]` and initial cost `½ λ_init |Y_0 − y_0|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaggedSpec {
    pub noise: f64,
    pub cont: f64,
    pub des: f64,
    pub rep: f64,
    pub q: Vec<f64>,
    pub attr: f64,
    pub rep_crowd: f64,
    pub init: f64,
    pub initial: GaussianLaw,
    pub terminal: GaussianLaw,
    pub vdes: DesiredVelocityLaw,
}

/// Ordinary crowd: `dX = u dt + σ dB^x`, `X_0 = x_0`, running cost
/// `½[λ_cont|u|² + λ_rep|X − Y|²]` and terminal cost `½ λ_term |X_T − x_T|²`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrdinarySpec {
    pub sigma: f64,
    pub cont: f64,
    pub rep: f64,
    pub term: f64,
    pub target: Vec<f64>,
    pub initial: GaussianLaw,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    pub steps: usize,
    pub paths: usize,
    pub seed: u64,
    pub picard: PicardConfig,
    pub basis: RegressionBasis,
}

impl Default for SolverSpec {
    fn default() -> Self {
        SolverSpec { steps: 100, paths: 10_000, seed: 1, picard: PicardConfig::default(), basis: RegressionBasis::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub kind: ScenarioKind,
    pub dim: usize,
    pub horizon: f64,
    pub tagged: TaggedSpec,
    pub ordinary: Option<OrdinarySpec>,
    pub solver: SolverSpec,
}

fn sign_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Scenario {
        location: field.to_string(),
        kind: ScenarioErrorKind::SignViolation { field: field.to_string(), reason: reason.into() },
    }
}

fn malformed(field: &str, reason: impl Into<String>) -> Error {
    Error::Scenario {
        location: field.to_string(),
        kind: ScenarioErrorKind::Malformed { field: field.to_string(), reason: reason.into() },
    }
}

fn finite(field: &str, v: f64) -> Result<()> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(malformed(field, "value must be finite"))
    }
}

fn nonneg(field: &str, v: f64) -> Result<()> {
    finite(field, v)?;
    if v < 0.0 {
        return Err(sign_err(field, format!("{v} must be non-negative")));
    }
    Ok(())
}

fn vector(field: &str, v: &[f64], dim: usize) -> Result<()> {
    if v.len() != dim {
        return Err(malformed(field, format!("expected {dim} components, found {}", v.len())));
    }
    v.iter().try_for_each(|x| finite(field, *x))
}

impl ScenarioSpec {
    /// Check signs, dimensions and solver settings.
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(malformed("dim", "must be at least 1"));
        }
        finite("horizon", self.horizon)?;
        if self.horizon <= 0.0 {
            return Err(sign_err("horizon", format!("{} must be positive", self.horizon)));
        }
        let t = &self.tagged;
        nonneg("tagged.noise", t.noise)?;
        nonneg("tagged.cont", t.cont)?;
        nonneg("tagged.des", t.des)?;
        nonneg("tagged.init", t.init)?;
        finite("tagged.rep", t.rep)?;
        finite("tagged.attr", t.attr)?;
        finite("tagged.rep_crowd", t.rep_crowd)?;
        if !(t.cont + t.des > 0.0) {
            return Err(sign_err(
                "tagged.cont",
                "λ_cont + λ_des must be positive for a concave tagged Hamiltonian",
            ));
        }
        vector("tagged.q", &t.q, self.dim)?;
        vector("tagged.initial.mean", &t.initial.mean, self.dim)?;
        vector("tagged.terminal.mean", &t.terminal.mean, self.dim)?;
        nonneg("tagged.initial.std", t.initial.std)?;
        nonneg("tagged.terminal.std", t.terminal.std)?;
        t.vdes.validate(self.dim).map_err(|e| malformed("tagged.vdes", e.to_string()))?;
        match (&self.ordinary, self.kind) {
            (Some(o), ScenarioKind::Bidirectional) => {
                nonneg("ordinary.sigma", o.sigma)?;
                nonneg("ordinary.term", o.term)?;
                finite("ordinary.rep", o.rep)?;
                finite("ordinary.cont", o.cont)?;
                if o.cont <= 0.0 {
                    return Err(sign_err("ordinary.cont", "λ^x_cont must be positive for a concave ordinary Hamiltonian"));
                }
                vector("ordinary.target", &o.target, self.dim)?;
                vector("ordinary.initial.mean", &o.initial.mean, self.dim)?;
                nonneg("ordinary.initial.std", o.initial.std)?;
            }
            (None, ScenarioKind::Bidirectional) => {
                return Err(Error::Scenario {
                    location: "ordinary".into(),
                    kind: ScenarioErrorKind::MissingField("ordinary".into()),
                })
            }
            (Some(_), _) => return Err(malformed("ordinary", "only bidirectional scenarios have an ordinary crowd")),
            (None, _) => {
                if t.rep_crowd != 0.0 {
                    return Err(malformed("tagged.rep_crowd", "needs an ordinary crowd"));
                }
            }
        }
        let s = &self.solver;
        if s.steps == 0 {
            return Err(malformed("solver.steps", "must be at least 1"));
        }
        if s.paths < 2 {
            return Err(malformed("solver.paths", "must be at least 2"));
        }
        s.picard.validate().map_err(|e| malformed("solver.picard", e.to_string()))?;
        if s.basis.degree > 8 {
            return Err(malformed("solver.basis.degree", "degree above 8 is not supported"));
        }
        Ok(())
    }

    pub fn has_ordinary(&self) -> bool {
        self.ordinary.is_some()
    }

    /// Noise dimensions `(w_x, w_y)`.
    pub fn noise_dims(&self) -> (usize, usize) {
        (if self.has_ordinary() { self.dim } else { 0 }, self.dim)
    }

    /// Coefficients of the game (or of the tagged control problem).
    pub fn coefficients(&self) -> CoefficientSet {
        let t = &self.tagged;
        let mut running = vec![CostTerm::ControlEnergy { weight: t.cont }];
        if t.des != 0.0 {
            running.push(CostTerm::VelocityTracking { weight: t.des, law: t.vdes.clone() });
        }
        if t.rep != 0.0 {
            running.push(CostTerm::PointDistance { weight: t.rep, point: t.q.clone() });
        }
        if t.attr != 0.0 {
            running.push(CostTerm::DistanceToOwnMean { weight: t.attr });
        }
        if self.ordinary.is_some() && t.rep_crowd != 0.0 {
            running.push(CostTerm::DistanceToOtherMean { weight: t.rep_crowd });
        }
        let tagged = CrowdCoefficients { noise: t.noise, running, boundary_weight: t.init };
        let ordinary = self.ordinary.as_ref().map(|o| {
            let mut running = vec![CostTerm::ControlEnergy { weight: o.cont }];
            if o.rep != 0.0 {
                running.push(CostTerm::DistanceToOther { weight: o.rep });
            }
            CrowdCoefficients { noise: o.sigma, running, boundary_weight: o.term }
        });
        CoefficientSet { dim: self.dim, horizon: self.horizon, tagged, ordinary }
    }

    /// The closed-form problem, when the scenario has no ordinary crowd.
    pub fn lq_problem(&self) -> Option<LqTaggedProblem> {
        if self.ordinary.is_some() {
            return None;
        }
        let t = &self.tagged;
        Some(LqTaggedProblem {
            horizon: self.horizon,
            noise: t.noise,
            cont: t.cont,
            des: t.des,
            rep: t.rep,
            q: t.q.clone(),
            attr: t.attr,
            init: t.init,
            initial: t.initial.clone(),
            terminal: t.terminal.clone(),
            vdes: t.vdes.clone(),
        })
    }

    /// No ordinary crowd and no mean-field term: every path solves the same
    /// standard LQ problem.
    pub fn is_lq_decoupled(&self) -> bool {
        self.ordinary.is_none() && self.tagged.attr == 0.0
    }
}
