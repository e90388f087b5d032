//! JSON experiment configuration and its resolution into runnable objects.

use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bounds::{BoundParams, FormulaId, MixingEnvelope, SampleBoundInputs, Variant};
use crate::chains::{self, ChainModel};
use crate::error::{Error, Result};
use crate::mixing::{self, fit_exponential_envelope, fit_polynomial_envelope};
use crate::oracle::{self, AssumptionCertificate, Family, GradientOracle, LabelRule};
use crate::ssmgd::{default_checkpoints, Problem, Schedule};

const DEFAULT_MIXING_HORIZON: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum ChainSpec {
    TwoState { p: f64, q: f64 },
    CycleWalk { n: usize, h: f64 },
    RenewalTail { k: f64, m: usize },
    Iid { rho: Vec<f64> },
    Matrix { transition: Vec<Vec<f64>> },
}

impl ChainSpec {
    pub fn build(&self) -> Result<ChainModel> {
        match self {
            ChainSpec::TwoState { p, q } => chains::build_two_state(*p, *q),
            ChainSpec::CycleWalk { n, h } => chains::build_cycle_walk(*n, *h),
            ChainSpec::RenewalTail { k, m } => chains::build_renewal_tail(*k, *m),
            ChainSpec::Iid { rho } => chains::build_iid(rho),
            ChainSpec::Matrix { transition } => ChainModel::from_rows(transition),
        }
    }
}

fn default_noise() -> f64 {
    1.0
}

/// The state count of a family always comes from the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum FamilySpec {
    RandomQuadratic {
        d: usize,
        kappa: f64,
        eta: f64,
        #[serde(default = "default_noise")]
        noise_scale: f64,
        #[serde(default)]
        seed: u64,
    },
    Kernel {
        bandwidth: f64,
        lambda: f64,
        #[serde(default = "default_label_rule")]
        labels: LabelRule,
        #[serde(default)]
        seed: u64,
    },
}

fn default_label_rule() -> LabelRule {
    LabelRule::Sine { noise: 0.1 }
}

impl FamilySpec {
    pub fn build(&self, n_states: usize) -> Result<Family> {
        match self {
            FamilySpec::RandomQuadratic { d, kappa, eta, noise_scale, seed } => Ok(Family::Quadratic(
                oracle::build_random_quadratic(*d, n_states, *kappa, *eta, *noise_scale, *seed)?,
            )),
            FamilySpec::Kernel { bandwidth, lambda, labels, seed } => {
                Ok(Family::Kernel(oracle::build_kernel_family(n_states, *bandwidth, *lambda, *labels, *seed)?))
            }
        }
    }
}

/// Which sampling bound to evaluate. `auto` picks the θ = 1 bound for θ = 1,
/// otherwise the exponential φ bound when φ admits a geometric envelope and the
/// exact partial-sum bound when it does not.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormulaChoice {
    #[default]
    Auto,
    Thm1Phi,
    ThmBeta,
    PropTheta1,
    GenericPartialSum,
    PolyRate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub chain: ChainSpec,
    pub family: FamilySpec,
    pub theta: f64,
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub checkpoints: Option<Vec<usize>>,
    #[serde(default = "default_variant")]
    pub variant: Variant,
    #[serde(default)]
    pub formula: FormulaChoice,
    /// Starting point; zeros when absent.
    #[serde(default)]
    pub w1: Option<Vec<f64>>,
    /// Number of φ/β terms used to fit envelopes.
    #[serde(default)]
    pub mixing_horizon: Option<usize>,
    /// `[t_lo, t_hi]` for slope fits on the median error curve.
    #[serde(default)]
    pub rate_range: Option<(usize, usize)>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_trials() -> usize {
    100
}

fn default_delta() -> f64 {
    0.1
}

fn default_variant() -> Variant {
    Variant::Conservative
}

impl ExperimentConfig {
    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn checkpoints(&self) -> Vec<usize> {
        self.checkpoints.clone().unwrap_or_else(|| default_checkpoints(self.horizon))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta = {} must lie in (0, 1)", self.delta));
        }
        if !(self.theta > 0.5 && self.theta <= 1.0) {
            return bad(format!("theta = {} must lie in (1/2, 1]", self.theta));
        }
        let cps = self.checkpoints();
        if cps.is_empty() || cps[0] == 0 || cps.windows(2).any(|w| w[0] >= w[1]) || *cps.last().unwrap() > self.horizon {
            return bad("checkpoints must be sorted, distinct and inside [1, horizon]".into());
        }
        Ok(())
    }

    /// Resolves every derived object. Errors here are configuration errors.
    pub fn build(&self) -> Result<Experiment> {
        self.validate()?;
        let as_config = |e: Error| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        let chain = self.chain.build().map_err(as_config)?;
        let family = self.family.build(chain.n_states()).map_err(as_config)?;
        let rho: Vec<f64> = chain.stationary().iter().copied().collect();
        let w_star = family.minimizer(&rho).map_err(as_config)?;
        let certificate = family.certify(&rho).map_err(as_config)?;
        let schedule = Schedule::new(self.theta, certificate.eta).map_err(as_config)?;
        let w1 = match &self.w1 {
            Some(v) => DVector::from_vec(v.clone()),
            None => DVector::zeros(family.dim()),
        };
        family.check_point(&w1).map_err(as_config)?;
        let r1_norm = family.norm(&(&w1 - &w_star)).map_err(as_config)?;
        let problem = Problem::new(family, w_star).map_err(as_config)?;
        let checkpoints = self.checkpoints();
        let inputs = SampleBoundInputs {
            theta: self.theta,
            alpha: certificate.alpha,
            sigma2: certificate.sigma2,
            eta: certificate.eta,
            delta: self.delta,
        };
        let (formula, envelope) = self.resolve_formula(&chain, &checkpoints).map_err(as_config)?;
        Ok(Experiment {
            config: self.clone(),
            chain,
            problem,
            certificate,
            schedule,
            w1,
            r1_norm,
            checkpoints,
            formula,
            bound_params: BoundParams { inputs, envelope },
        })
    }

    fn resolve_formula(&self, chain: &ChainModel, checkpoints: &[usize]) -> Result<(FormulaId, MixingEnvelope)> {
        let fit_horizon = self.mixing_horizon.unwrap_or(DEFAULT_MIXING_HORIZON.min(self.horizon).max(2));
        let exact_sums = || -> Result<MixingEnvelope> {
            let last = *checkpoints.last().unwrap();
            let phi = mixing::phi_coefficients(chain, last)?;
            Ok(MixingEnvelope::PartialSums { sums: mixing::partial_sums(&phi) })
        };
        let phi_env = || -> Result<MixingEnvelope> {
            let phi = mixing::phi_coefficients(chain, fit_horizon)?;
            Ok(MixingEnvelope::Exponential(fit_exponential_envelope(&phi)?))
        };
        Ok(match self.formula {
            FormulaChoice::Thm1Phi => (FormulaId::Thm1Phi, phi_env()?),
            FormulaChoice::PropTheta1 => (FormulaId::PropTheta1, phi_env()?),
            FormulaChoice::ThmBeta => {
                let beta = mixing::beta_coefficients(chain, fit_horizon)?;
                (FormulaId::ThmBeta, MixingEnvelope::Exponential(fit_exponential_envelope(&beta)?))
            }
            FormulaChoice::GenericPartialSum => (FormulaId::GenericPartialSum, exact_sums()?),
            FormulaChoice::PolyRate => {
                let phi = mixing::phi_coefficients(chain, fit_horizon)?;
                (FormulaId::PolyRate, MixingEnvelope::Polynomial(fit_polynomial_envelope(&phi)?))
            }
            FormulaChoice::Auto if self.theta == 1.0 => (FormulaId::PropTheta1, phi_env()?),
            FormulaChoice::Auto => match phi_env() {
                Ok(env) => (FormulaId::Thm1Phi, env),
                Err(Error::Fit(_)) => (FormulaId::GenericPartialSum, exact_sums()?),
                Err(e) => return Err(e),
            },
        })
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub chain: ChainModel,
    pub problem: Problem<Family>,
    pub certificate: AssumptionCertificate,
    pub schedule: Schedule,
    pub w1: DVector<f64>,
    /// `‖w_1 − w*‖`.
    pub r1_norm: f64,
    pub checkpoints: Vec<usize>,
    pub formula: FormulaId,
    pub bound_params: BoundParams,
}

impl Experiment {
    pub fn init_bounds(&self, variant: Variant) -> Result<Vec<f64>> {
        let p = &self.bound_params.inputs;
        self.checkpoints
            .iter()
            .map(|&t| crate::bounds::init_bound(t, p.theta, p.alpha, self.r1_norm, variant))
            .collect()
    }

    pub fn samp_bounds(&self) -> Result<Vec<f64>> {
        self.checkpoints.iter().map(|&t| self.bound_params.samp_bound(self.formula, t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASIC: &str = r#"{
        "chain": {"kind": "two_state", "params": {"p": 0.25, "q": 0.25}},
        "family": {"kind": "random_quadratic", "params": {"d": 3, "kappa": 0.5, "eta": 2.0, "seed": 1}},
        "theta": 0.75, "horizon": 100, "trials": 4, "seed": 9
    }"#;

    #[test]
    fn parses_and_builds() {
        let cfg = ExperimentConfig::from_json(BASIC).unwrap();
        assert_eq!(cfg.variant, Variant::Conservative);
        assert_eq!(cfg.checkpoints(), vec![1, 2, 4, 8, 16, 32, 64, 100]);
        let exp = cfg.build().unwrap();
        assert_eq!(exp.formula, FormulaId::Thm1Phi);
        assert!((exp.certificate.alpha - 0.25).abs() < 1e-9);
        let MixingEnvelope::Exponential(env) = exp.bound_params.envelope else { panic!() };
        assert!((env.d - 0.5).abs() < 1e-10 && (env.r - 0.5).abs() < 1e-12);
    }

    #[test]
    fn theta_one_picks_theta_one_bound() {
        let mut cfg = ExperimentConfig::from_json(BASIC).unwrap();
        cfg.theta = 1.0;
        assert_eq!(cfg.build().unwrap().formula, FormulaId::PropTheta1);
    }

    #[test]
    fn rejects_bad_values() {
        let mut cfg = ExperimentConfig::from_json(BASIC).unwrap();
        cfg.delta = 1.0;
        assert!(matches!(cfg.build(), Err(Error::Config(_))));
        let mut cfg = ExperimentConfig::from_json(BASIC).unwrap();
        cfg.checkpoints = Some(vec![5, 3]);
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::from_json(r#"{"chain": 1}"#).is_err());
        let mut cfg = ExperimentConfig::from_json(BASIC).unwrap();
        cfg.w1 = Some(vec![0.0; 2]);
        assert!(matches!(cfg.build(), Err(Error::Config(_))));
    }
}
