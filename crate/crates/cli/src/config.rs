//! Experiment configuration, read from a TOML file.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::Deserialize;

use contraction_bounds::chains::{make_model, ChainModel, FunctionalSpec, ModelSpec};
use contraction_bounds::coefficients::MomentConstants;
use contraction_bounds::erm::ErmProblem;
use contraction_bounds::montecarlo::GridPolicy;
use contraction_bounds::schedules::{make_schedule, CustomSequences, Regime, Schedule};

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub threads: Option<usize>,
    pub model: Option<ModelSpec>,
    pub coeffs: Option<CoeffsConfig>,
    pub bound: Option<BoundConfig>,
    pub verify: Option<VerifyConfig>,
    pub moments: Option<MomentsConfig>,
    pub sa: Option<SaConfig>,
    pub erm: Option<ErmConfig>,
    pub simulate: Option<SimulateConfig>,
}

fn default_seed() -> u64 {
    20_241_017
}

impl Default for Config {
    fn default() -> Self {
        Config {
            master_seed: default_seed(),
            threads: None,
            model: None,
            coeffs: None,
            bound: None,
            verify: None,
            moments: None,
            sa: None,
            erm: None,
            simulate: None,
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        // toml reports the line, column and field of the first problem.
        Ok(toml::from_str(text)?)
    }

    pub fn model(&self) -> Result<ChainModel> {
        let spec = self.model.clone().context("this subcommand needs a [model] section")?;
        make_model(spec).context("model")
    }

    pub fn section<'a, T>(&self, section: &'a Option<T>, name: &str) -> Result<&'a T> {
        section.as_ref().with_context(|| format!("this subcommand needs a [{name}] section"))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FunctionalKind {
    #[default]
    SumOfStates,
    SumOfNorms,
}

impl FunctionalKind {
    pub fn spec(self) -> FunctionalSpec {
        match self {
            FunctionalKind::SumOfStates => FunctionalSpec::SumOfStates,
            FunctionalKind::SumOfNorms => FunctionalSpec::SumOfNorms,
        }
    }
}

/// Where `(ρ_n, τ_n, ξ_n)` come from.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSource {
    /// The schedule certified by the `[model]` section.
    #[default]
    Model,
    Canonical {
        regime: Regime,
        alpha: f64,
        rho: f64,
        eta: f64,
    },
    /// Explicit sequences, entry `i` at index `n = i + 2`; optionally
    /// classified with the tightest constants for `regime` and `alpha`.
    Custom {
        rho: Vec<f64>,
        tau: Vec<f64>,
        xi: Vec<f64>,
        regime: Option<Regime>,
        alpha: Option<f64>,
    },
}

impl ScheduleSource {
    pub fn build(&self, cfg: &Config) -> Result<Schedule> {
        Ok(match self {
            ScheduleSource::Model => cfg.model()?.schedule().clone(),
            ScheduleSource::Canonical { regime, alpha, rho, eta } => {
                make_schedule(*regime, *alpha, *rho, *eta, None).context("schedule")?
            }
            ScheduleSource::Custom {
                rho,
                tau,
                xi,
                regime,
                alpha,
            } => {
                let s = Schedule::custom(CustomSequences {
                    rho: rho.clone(),
                    tau: tau.clone(),
                    xi: xi.clone(),
                })
                .context("schedule")?;
                match (regime, alpha) {
                    (None, None) => s,
                    (Some(r), Some(a)) => s.classify_tightest(*r, *a).context("schedule classification")?,
                    _ => bail!("schedule: `regime` and `alpha` must be given together"),
                }
            }
        })
    }
}

fn all_forms() -> Vec<String> {
    vec!["all".into()]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoeffsConfig {
    pub n: usize,
    #[serde(default)]
    pub schedule: ScheduleSource,
    /// Horizons for the asymptotics report; empty skips it.
    #[serde(default)]
    pub asymptotics_grid: Vec<usize>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub n: usize,
    /// Envelope labels such as `bernstein_refined` or `fuk_nagaev_q4`;
    /// `all` expands to the standard set.
    #[serde(default = "all_forms")]
    pub forms: Vec<String>,
    pub grid: GridPolicy,
    #[serde(default)]
    pub schedule: ScheduleSource,
    /// Given moment constants; derived from `[model]` when absent.
    pub constants: Option<MomentConstants>,
    /// Dimension of the functional; defaults to the model's.
    pub d: Option<usize>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub n: usize,
    #[serde(default = "default_tail_reps")]
    pub reps: usize,
    #[serde(default)]
    pub grid: GridPolicy,
    #[serde(default = "all_forms")]
    pub forms: Vec<String>,
    #[serde(default)]
    pub functional: FunctionalKind,
    /// Enumerate every noise path instead of sampling (finite-support noise).
    #[serde(default)]
    pub exact: bool,
    /// Adds the fake envelope `fake_scale × p_hat`, which must fail for
    /// `fake_scale < 1`.
    pub fake_scale: Option<f64>,
}

fn default_tail_reps() -> usize {
    20_000
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsConfig {
    pub n: usize,
    #[serde(default = "default_moment_reps")]
    pub reps: usize,
    #[serde(default = "default_mz_orders")]
    pub mz_orders: Vec<f64>,
    #[serde(default = "default_vbe_orders")]
    pub vbe_orders: Vec<f64>,
}

fn default_moment_reps() -> usize {
    10_000
}

fn default_mz_orders() -> Vec<f64> {
    vec![2.0, 4.0]
}

fn default_vbe_orders() -> Vec<f64> {
    vec![1.0, 2.0]
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaConfig {
    pub checkpoints: Vec<usize>,
    #[serde(default = "default_sa_reps")]
    pub reps: usize,
    /// Accepted range for the log-log slopes of the averaged estimators.
    pub slope_window: Option<[f64; 2]>,
    /// Horizon for the exact `C₀/n` check.
    #[serde(default = "default_exact_n")]
    pub exact_check_n: usize,
}

fn default_sa_reps() -> usize {
    2000
}

fn default_exact_n() -> usize {
    1000
}

#[derive(Debug, Clone, Deserialize)]
pub struct ErmConfig {
    #[serde(flatten)]
    pub problem: ErmProblem,
    pub n_grid: Vec<usize>,
    #[serde(default = "default_erm_reps")]
    pub reps: usize,
    /// Repetitions that must sit under the fitted envelope; defaults to 90%.
    pub min_dominated: Option<usize>,
}

fn default_erm_reps() -> usize {
    20
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub n: usize,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_errors_name_the_line() {
        let err = Config::parse("master_seed = 1\n[coeffs]\nn = \"three\"\n").unwrap_err();
        let msg = format!("{err:#}");
        assert!(msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn unknown_fields_are_rejected() {
        assert!(Config::parse("[coeffs]\nn = 3\nbogus = 1\n").is_err());
    }

    #[test]
    fn custom_schedule_section() {
        let cfg = Config::parse(
            "[coeffs]\nn = 3\n[coeffs.schedule]\nsource = \"custom\"\nrho = [0.5, 0.5]\ntau = [1.0, 1.0]\nxi = [0.0, 0.0]\n",
        )
        .unwrap();
        let s = cfg.coeffs.as_ref().unwrap().schedule.build(&cfg).unwrap();
        assert_eq!(s.eval(3).unwrap(), (0.5, 1.0, 0.0));
    }

    #[test]
    fn model_section_round_trips() {
        let cfg = Config::parse(
            "[model]\np = 2.0\n[model.example]\nkind = \"linear_sa\"\na = [[1.0]]\nb = [0.0]\ngamma = 0.5\nalpha = 0.5\n\
             [model.noise]\nkind = \"gaussian\"\nsigma = 1.0\nd = 1\n[model.init]\nkind = \"point\"\nx = [0.0]\n",
        )
        .unwrap();
        assert_eq!(cfg.model().unwrap().d(), 1);
        assert!(Config::default().model().is_err());
    }
}
