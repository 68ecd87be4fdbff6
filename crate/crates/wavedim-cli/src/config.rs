//! Run configuration: TOML schema, validation, content hashing, and
//! construction of the simulated system from a config and a damping value.
//!
//! Schema (TOML):
//!
//! ```toml
//! scenario = "rotational"        # linear | gradient_cubic | rotational | custom
//! output_dir = "runs"
//!
//! [domain]
//! kind = "interval"              # interval | rectangle | box3
//! len = 3.141592653589793        # lx/ly (rectangle), lx/ly/lz (box3)
//!
//! [discretization]
//! modes = 64                     # Galerkin truncation M
//! components = 2                 # system size N
//! dt = 0.02
//! t_final = 100.0                # simulated span of the plain run
//! sample_stride = 25             # record every k-th step
//!
//! [sweep]
//! gammas = [0.2, 0.1, 0.05, 0.025]   # positive, strictly decreasing
//! seeds = [1]
//! tangent_count = 0              # 0 = choose per γ from the mode count
//! averaging_time = 300.0
//! # burn_in = 50.0               # default 20/γ
//! require_convergence = true
//! collect_q = false
//! initial_amplitude = 0.5
//!
//! [scenario_params]
//! a = 0.0                        # linearization offset of the lower bound
//! b = 1.0                        # rotational coupling
//! bd = 1.0                       # B_d for closed-form bounds without a run
//! # potential = [{ coeff = 0.25, powers = [4, 0] }]   # custom scenario
//! # rotational = false                                # custom scenario
//! # forcing = [{ mode = 1, component = 1, amplitude = 0.1 }]
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wavedim::dynamics::{GalerkinState, NonlinearitySpec, PotentialTerm, WaveSystem};
use wavedim::spectral::Domain;

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// f ≡ 0: every mode is an exactly damped oscillator.
    Linear,
    /// Gradient case F₀ = Σ_c u_c⁴/4, f = ∇F₀; admits a Lyapunov
    /// functional.
    GradientCubic,
    /// Non-gradient coupling γ(sin(bu₂/γ), −sin(bu₁/γ)); needs N = 2.
    Rotational,
    /// Potential, rotation and forcing taken verbatim from
    /// `scenario_params`.
    Custom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Discretization {
    pub modes: usize,
    pub components: usize,
    pub dt: f64,
    pub t_final: f64,
    pub sample_stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepParams {
    pub gammas: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Tangents for the exponent computation; 0 picks per γ from the
    /// unstable-mode count (rotational) or a small fixed batch.
    #[serde(default)]
    pub tangent_count: usize,
    pub averaging_time: f64,
    #[serde(default)]
    pub burn_in: Option<f64>,
    #[serde(default = "default_true")]
    pub require_convergence: bool,
    #[serde(default)]
    pub collect_q: bool,
    #[serde(default = "default_amplitude")]
    pub initial_amplitude: f64,
}

fn default_true() -> bool {
    true
}

fn default_amplitude() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForcingEntry {
    /// 1-based eigenmode index.
    pub mode: usize,
    /// 1-based component index.
    pub component: usize,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioParams {
    #[serde(default)]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_b")]
    pub bd: f64,
    #[serde(default)]
    pub potential: Vec<PotentialEntry>,
    #[serde(default)]
    pub rotational: bool,
    #[serde(default)]
    pub forcing: Vec<ForcingEntry>,
}

fn default_b() -> f64 {
    1.0
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            a: 0.0,
            b: 1.0,
            bd: 1.0,
            potential: Vec::new(),
            rotational: false,
            forcing: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialEntry {
    pub coeff: f64,
    /// One exponent per component, as in `PotentialTerm`.
    pub powers: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub scenario: Scenario,
    pub output_dir: PathBuf,
    pub domain: Domain,
    pub discretization: Discretization,
    pub sweep: SweepParams,
    #[serde(default)]
    pub scenario_params: ScenarioParams,
}

impl SweepConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: SweepConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> CliResult<()> {
        let d = &self.discretization;
        if d.modes == 0 || d.components == 0 {
            return Err(CliError::Config("modes and components must be positive".into()));
        }
        if !(d.dt > 0.0) || !(d.t_final > 0.0) {
            return Err(CliError::Config("dt and t_final must be positive".into()));
        }
        if d.sample_stride == 0 {
            return Err(CliError::Config("sample_stride must be positive".into()));
        }
        let s = &self.sweep;
        if s.gammas.is_empty() {
            return Err(CliError::Config("gamma grid must be non-empty".into()));
        }
        if s.gammas.iter().any(|&g| !(g > 0.0) || !g.is_finite()) {
            return Err(CliError::Config("gamma values must be positive and finite".into()));
        }
        if s.gammas.windows(2).any(|w| w[0] <= w[1]) {
            return Err(CliError::Config(
                "gamma values must be strictly decreasing".into(),
            ));
        }
        if s.seeds.is_empty() {
            return Err(CliError::Config("need at least one seed".into()));
        }
        if !(s.averaging_time > 0.0) {
            return Err(CliError::Config("averaging_time must be positive".into()));
        }
        if !(s.initial_amplitude > 0.0) {
            return Err(CliError::Config("initial_amplitude must be positive".into()));
        }
        if self.scenario == Scenario::Rotational && self.discretization.components != 2 {
            return Err(CliError::Config(
                "the rotational scenario needs exactly two components".into(),
            ));
        }
        if matches!(self.scenario, Scenario::Rotational | Scenario::Custom)
            && self.scenario_params.rotational_active(self.scenario)
            && self.scenario_params.b == 0.0
        {
            return Err(CliError::Config("rotational coupling b must be nonzero".into()));
        }
        if self.domain.dim() == 3
            && !matches!(self.scenario, Scenario::Linear)
        {
            return Err(CliError::Config(
                "nonlinear simulation is limited to one- and two-dimensional domains".into(),
            ));
        }
        self.domain
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        for entry in &self.scenario_params.forcing {
            if entry.mode == 0
                || entry.mode > d.modes
                || entry.component == 0
                || entry.component > d.components
            {
                return Err(CliError::Config(format!(
                    "forcing entry (mode {}, component {}) outside the {}×{} truncation",
                    entry.mode, entry.component, d.modes, d.components
                )));
            }
        }
        Ok(())
    }

    /// Content hash of the config; keys one run directory. Sixteen hex
    /// digits of the SHA-256 of the canonical JSON serialization.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut hex = String::with_capacity(16);
        for byte in &digest[..8] {
            hex.push_str(&format!("{byte:02x}"));
        }
        hex
    }

    /// Right-hand side for one damping value.
    pub fn nonlinearity(&self, gamma: f64) -> CliResult<NonlinearitySpec> {
        let p = &self.scenario_params;
        let n = self.discretization.components;
        let spec = match self.scenario {
            Scenario::Linear => NonlinearitySpec::linear(gamma),
            Scenario::GradientCubic => {
                let terms = (0..n)
                    .map(|c| {
                        let mut powers = vec![0u32; n];
                        powers[c] = 4;
                        PotentialTerm { coeff: 0.25, powers }
                    })
                    .collect();
                NonlinearitySpec::gradient(gamma, terms)
            }
            Scenario::Rotational => {
                let mut spec = NonlinearitySpec::rotational(gamma);
                spec.rotation_b = p.b;
                spec
            }
            Scenario::Custom => {
                let terms = p
                    .potential
                    .iter()
                    .map(|t| PotentialTerm {
                        coeff: t.coeff,
                        powers: t.powers.clone(),
                    })
                    .collect();
                let mut spec = NonlinearitySpec::gradient(gamma, terms);
                spec.rotational = p.rotational;
                spec.rotation_b = p.b;
                spec
            }
        };
        let spec = if self.scenario_params.forcing.is_empty() {
            spec
        } else {
            let mut forcing = Array2::zeros((self.discretization.modes, n));
            for entry in &p.forcing {
                forcing[[entry.mode - 1, entry.component - 1]] = entry.amplitude;
            }
            spec.with_forcing(forcing)
        };
        Ok(spec)
    }

    /// Assembled Galerkin system for one damping value.
    pub fn system(&self, gamma: f64) -> CliResult<WaveSystem> {
        let spec = self.nonlinearity(gamma)?;
        WaveSystem::new(
            self.domain,
            self.discretization.modes,
            self.discretization.components,
            spec,
        )
        .map_err(CliError::from)
    }

    /// Seeded initial state: smooth random coefficients u_j ~ ξ/λ_j at the
    /// configured amplitude, zero velocity. Seed 0 is the zero state, kept
    /// in the seed set because the exponents at that equilibrium realize
    /// the supremum that defines the uniform Lyapunov dimension; random
    /// trajectories alone can settle on a lower-dimensional component.
    pub fn initial_state(&self, system: &WaveSystem, seed: u64) -> GalerkinState {
        let modes = self.discretization.modes;
        let n = self.discretization.components;
        if seed == 0 {
            return GalerkinState::zero(modes, n);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = GalerkinState::zero(modes, n);
        for j in 0..modes {
            let scale = self.sweep.initial_amplitude / system.spectrum.lambdas[j];
            for c in 0..n {
                state.u[[j, c]] = scale * rng.gen_range(-1.0..1.0);
            }
        }
        state
    }
}

impl ScenarioParams {
    fn rotational_active(&self, scenario: Scenario) -> bool {
        match scenario {
            Scenario::Rotational => true,
            Scenario::Custom => self.rotational,
            _ => false,
        }
    }
}

/// Small validated rotational config for tests elsewhere in the crate.
#[cfg(test)]
pub(crate) fn tests_fixture() -> SweepConfig {
    let config: SweepConfig = toml::from_str(
        r#"
scenario = "rotational"
output_dir = "runs"

[domain]
kind = "interval"
len = 3.141592653589793

[discretization]
modes = 16
components = 2
dt = 0.02
t_final = 10.0
sample_stride = 5

[sweep]
gammas = [0.2, 0.1]
seeds = [1]
averaging_time = 20.0
"#,
    )
    .expect("fixture parses");
    config.validate().expect("fixture validates");
    config
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_toml() -> String {
        r#"
scenario = "rotational"
output_dir = "runs"

[domain]
kind = "interval"
len = 3.141592653589793

[discretization]
modes = 16
components = 2
dt = 0.02
t_final = 10.0
sample_stride = 5

[sweep]
gammas = [0.2, 0.1]
seeds = [1]
averaging_time = 20.0
"#
        .to_string()
    }

    fn parse(text: &str) -> CliResult<SweepConfig> {
        let config: SweepConfig =
            toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    #[test]
    fn minimal_config_parses_with_defaults() {
        let config = parse(&minimal_toml()).unwrap();
        assert_eq!(config.scenario, Scenario::Rotational);
        assert_eq!(config.sweep.tangent_count, 0);
        assert!(config.sweep.require_convergence);
        assert_eq!(config.scenario_params.b, 1.0);
        assert_eq!(config.domain, Domain::Interval { len: std::f64::consts::PI });
    }

    #[test]
    fn gamma_ordering_is_enforced() {
        let text = minimal_toml().replace("[0.2, 0.1]", "[0.1, 0.2]");
        let err = parse(&text).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }

    #[test]
    fn rotational_needs_two_components() {
        let text = minimal_toml().replace("components = 2", "components = 1");
        let err = parse(&text).unwrap_err();
        assert!(matches!(err, CliError::Config(_)));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal_toml() + "\n[extra]\nkey = 1\n";
        assert!(parse(&text).is_err());
    }

    #[test]
    fn hash_is_stable_and_content_sensitive() {
        let a = parse(&minimal_toml()).unwrap();
        let b = parse(&minimal_toml()).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
        let c = parse(&minimal_toml().replace("modes = 16", "modes = 32")).unwrap();
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn gradient_cubic_builds_per_component_quartics() {
        let text = minimal_toml()
            .replace("\"rotational\"", "\"gradient_cubic\"");
        let config = parse(&text).unwrap();
        let spec = config.nonlinearity(0.1).unwrap();
        assert_eq!(spec.potential.len(), 2);
        assert_eq!(spec.potential[0].powers, vec![4, 0]);
        assert_eq!(spec.potential[1].powers, vec![0, 4]);
        assert!(!spec.rotational);
    }

    #[test]
    fn forcing_entries_land_in_the_coefficient_table() {
        let text = minimal_toml()
            + r#"
[scenario_params]
forcing = [{ mode = 3, component = 2, amplitude = 0.7 }]
"#;
        let config = parse(&text).unwrap();
        let spec = config.nonlinearity(0.1).unwrap();
        assert_eq!(spec.forcing.dim(), (16, 2));
        assert_eq!(spec.forcing[[2, 1]], 0.7);
    }

    #[test]
    fn initial_state_is_seed_deterministic() {
        let config = parse(&minimal_toml()).unwrap();
        let system = config.system(0.1).unwrap();
        let a = config.initial_state(&system, 7);
        let b = config.initial_state(&system, 7);
        assert_eq!(a.u, b.u);
        let c = config.initial_state(&system, 8);
        assert_ne!(a.u, c.u);
        let equilibrium = config.initial_state(&system, 0);
        assert!(equilibrium.u.iter().all(|&x| x == 0.0));
        assert!(equilibrium.v.iter().all(|&x| x == 0.0));
    }
}
