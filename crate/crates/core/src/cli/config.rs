//! Run configuration: a JSON file with defaults for every field, plus a few
//! command-line overrides.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::carleman::Variant;
use crate::error::{Error, Result};
use crate::grid::{build_grid, DomainSpec, Gamma0, Shape, SpaceTimeGrid};
use crate::identity::{AuxKind, FluxForm};
use crate::operator::{check_condition1, derive_coeffs, GLCoeffs};
use crate::solver::{BoundaryCondition, Scheme};
use crate::stability::{Observation, SuiteConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BcKind {
    Dirichlet,
    Neumann,
}

impl BcKind {
    pub fn condition(self) -> BoundaryCondition {
        match self {
            BcKind::Dirichlet => BoundaryCondition::Dirichlet0,
            BcKind::Neumann => BoundaryCondition::Neumann0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DomainConfig {
    pub shape: Shape,
    pub omega_center: Option<[f64; 2]>,
    pub omega_radius: f64,
}

impl Default for DomainConfig {
    fn default() -> Self {
        Self { shape: Shape::UnitSquare, omega_center: None, omega_radius: 0.25 }
    }
}

impl DomainConfig {
    pub fn spec(&self) -> DomainSpec {
        let mut s = match self.shape {
            Shape::UnitSquare => DomainSpec::unit_square([0.5, 0.5], self.omega_radius),
            Shape::UnitDisk => DomainSpec::unit_disk([0.0, 0.0], self.omega_radius),
        };
        if let Some(c) = self.omega_center {
            s.omega_center = c;
        }
        s.gamma0 = Gamma0::FullBoundary;
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSection {
    pub scheme: Scheme,
    pub bc: BcKind,
    pub modes: usize,
    pub amplitude: f64,
    /// Also run a manufactured-solution refinement study.
    pub manufactured: bool,
    /// Also write the trajectory as CSV.
    pub csv: bool,
}

impl Default for SolveSection {
    fn default() -> Self {
        Self { scheme: Scheme::ImexCn, bc: BcKind::Dirichlet, modes: 4, amplitude: 1.0, manufactured: false, csv: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentitySection {
    pub random_fields: usize,
    /// Include the closed-form built-in fields.
    pub builtin_fields: bool,
    /// Only the zero field.
    pub zero_field_only: bool,
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub coeff_pairs: Vec<[f64; 2]>,
    pub aux: AuxKind,
    pub form: FluxForm,
    /// Identity grid (sample points only); small is enough.
    pub n: usize,
    pub nt: usize,
}

impl Default for IdentitySection {
    fn default() -> Self {
        Self {
            random_fields: 10,
            builtin_fields: true,
            zero_field_only: false,
            lambdas: vec![2.0, 8.0],
            mus: vec![1.5, 3.0],
            coeff_pairs: vec![[0.0, 0.0], [0.3, 0.4], [0.5, 0.6]],
            aux: AuxKind::StepOne,
            form: FluxForm::Corrected,
            n: 32,
            nt: 20,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySpec {
    pub bc: BcKind,
    pub seed_offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub lambdas: Vec<f64>,
    pub mus: Vec<f64>,
    pub variants: Vec<Variant>,
    pub trajectories: Vec<TrajectorySpec>,
    pub modes: usize,
    pub amplitude: f64,
}

impl Default for ScanSection {
    fn default() -> Self {
        let t = |bc, seed_offset| TrajectorySpec { bc, seed_offset };
        Self {
            lambdas: vec![2.0, 4.0, 8.0, 16.0, 32.0],
            mus: vec![1.5, 2.0, 3.0],
            variants: Variant::ALL.to_vec(),
            trajectories: vec![
                t(BcKind::Dirichlet, 0),
                t(BcKind::Dirichlet, 1),
                t(BcKind::Dirichlet, 2),
                t(BcKind::Neumann, 3),
                t(BcKind::Neumann, 4),
            ],
            modes: 4,
            amplitude: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub deltas: Vec<f64>,
    pub epsilons: Vec<f64>,
    pub background_l6: f64,
    pub background_modes: usize,
    pub perturbation_modes: usize,
    pub observations: Vec<Observation>,
    pub bc: BcKind,
    pub max_spread: f64,
}

impl Default for StabilitySection {
    fn default() -> Self {
        let s = SuiteConfig::default();
        Self {
            deltas: s.deltas,
            epsilons: s.epsilons,
            background_l6: s.background_l6,
            background_modes: s.background_modes,
            perturbation_modes: s.perturbation_modes,
            observations: vec![Observation::Interior, Observation::Boundary],
            bc: BcKind::Dirichlet,
            max_spread: 10.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    pub lambda: f64,
    pub mu: f64,
    pub epsilon: f64,
}

impl Default for WeightsSection {
    fn default() -> Self {
        Self { lambda: 4.0, mu: 2.0, epsilon: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub domain: DomainConfig,
    pub n: usize,
    pub nt: usize,
    pub t_final: f64,
    pub b: f64,
    pub c: f64,
    pub r0: f64,
    pub delta0: f64,
    pub solve: SolveSection,
    pub identity: IdentitySection,
    pub scan: ScanSection,
    pub stability: StabilitySection,
    pub weights: WeightsSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            domain: DomainConfig::default(),
            n: 64,
            nt: 64,
            t_final: 1.0,
            b: 0.3,
            c: 0.4,
            r0: 0.5,
            delta0: 0.1,
            solve: SolveSection::default(),
            identity: IdentitySection::default(),
            scan: ScanSection::default(),
            stability: StabilitySection::default(),
            weights: WeightsSection::default(),
        }
    }
}

/// Command-line overrides applied after the file is read.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub lambda: Option<f64>,
    pub mu: Option<f64>,
    pub grid: Option<usize>,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| Error::Config(format!("at '{}': {}", e.path(), e.inner())))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// `--lambda`/`--mu` replace every λ/μ list with a single value.
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(l) = o.lambda {
            self.identity.lambdas = vec![l];
            self.scan.lambdas = vec![l];
            self.weights.lambda = l;
        }
        if let Some(m) = o.mu {
            self.identity.mus = vec![m];
            self.scan.mus = vec![m];
            self.weights.mu = m;
        }
        if let Some(n) = o.grid {
            self.n = n;
            self.nt = n;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
    }

    pub fn coeffs(&self) -> GLCoeffs {
        derive_coeffs(self.b, self.c)
    }

    pub fn grid(&self) -> Result<SpaceTimeGrid> {
        build_grid(self.domain.spec(), self.n, self.n, self.nt, self.t_final)
    }

    /// Checks every precondition that can be checked without computing.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let spec = self.domain.spec();
        spec.validate(1.0 / self.n.max(1) as f64)?;
        if self.n < 16 || self.nt < 16 {
            return bad(format!("grid n = {}, nt = {} is below the minimum of 16", self.n, self.nt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad(format!("t_final = {} must be positive", self.t_final));
        }
        let report = check_condition1(&self.coeffs(), self.r0, self.delta0)?;
        if !report.pass {
            let failed: Vec<&str> = report.clauses.iter().filter(|c| !c.holds).map(|c| c.name).collect();
            return bad(format!("(b, c) = ({}, {}) violates the coefficient condition: {}", self.b, self.c, failed.join(", ")));
        }
        let positive = |name: &str, v: &[f64], min: f64| -> Result<()> {
            if v.is_empty() || v.iter().any(|&x| !(x > min && x.is_finite())) {
                return Err(Error::InvalidArgument(format!("{name} must be a non-empty list of values > {min}")));
            }
            Ok(())
        };
        positive("identity.lambdas", &self.identity.lambdas, 1.0)?;
        positive("identity.mus", &self.identity.mus, 1.0)?;
        positive("scan.lambdas", &self.scan.lambdas, 1.0)?;
        positive("scan.mus", &self.scan.mus, 1.0)?;
        if self.identity.coeff_pairs.is_empty() {
            return bad("identity.coeff_pairs must not be empty".into());
        }
        if self.identity.n < 16 || self.identity.nt < 16 {
            return bad("identity grid must have n, nt >= 16".into());
        }
        if self.weights.lambda <= 1.0 || self.weights.mu <= 1.0 {
            return bad("weights.lambda and weights.mu must exceed 1".into());
        }
        if !(self.weights.epsilon > 0.0 && self.weights.epsilon < 0.5) {
            return bad("weights.epsilon is a fraction of T in (0, 1/2)".into());
        }
        if self.stability.epsilons.is_empty() || self.stability.epsilons.iter().any(|&e| !(e > 0.0 && e < 0.5)) {
            return bad("stability.epsilons are fractions of T in (0, 1/2)".into());
        }
        if self.stability.deltas.is_empty() || self.stability.deltas.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return bad("stability.deltas must be positive".into());
        }
        if self.stability.background_l6 <= 0.0 {
            return bad("stability.background_l6 must be positive".into());
        }
        let disk = self.domain.shape == Shape::UnitDisk;
        let neumann = |b: BcKind| b == BcKind::Neumann;
        if disk && (neumann(self.solve.bc) || neumann(self.stability.bc) || self.scan.trajectories.iter().any(|t| neumann(t.bc))) {
            return bad("Neumann conditions are not available on the disk".into());
        }
        if self.stability.observations.contains(&Observation::Boundary) && neumann(self.stability.bc) {
            return bad("boundary observation needs Dirichlet pairs".into());
        }
        if self.solve.modes == 0 || self.scan.modes == 0 || self.stability.background_modes == 0 || self.stability.perturbation_modes == 0 {
            return bad("mode counts must be positive".into());
        }
        if self.scan.trajectories.is_empty() {
            return bad("scan.trajectories must not be empty".into());
        }
        Ok(())
    }

    /// First 16 hex digits of the SHA-256 of `command` and the resolved config.
    pub fn hash(&self, command: &str) -> String {
        let body = serde_json::to_string(self).expect("config serializes");
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0u8]);
        h.update(body.as_bytes());
        hex::encode(h.finalize())[..16].to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let c = RunConfig::default();
        c.validate().unwrap();
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(RunConfig::from_json(&text).unwrap(), c);
        assert_eq!(RunConfig::from_json("{}").unwrap(), c);
    }

    #[test]
    fn errors_carry_field_paths() {
        let e = RunConfig::from_json(r#"{"scan": {"lambdas": [2, "x"]}}"#).unwrap_err().to_string();
        assert!(e.contains("scan.lambdas"), "{e}");
        let e = RunConfig::from_json(r#"{"identity": {"nope": 1}}"#).unwrap_err().to_string();
        assert!(e.contains("identity"), "{e}");
    }

    #[test]
    fn validation_rejects_bad_coefficients() {
        let c = RunConfig { b: 0.0, c: -2.0, ..Default::default() };
        assert!(c.validate().is_err());
        let c = RunConfig { delta0: 0.2, ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_depends_on_command_and_content() {
        let a = RunConfig::default();
        let mut b = a.clone();
        assert_eq!(a.hash("solve"), b.hash("solve"));
        assert_ne!(a.hash("solve"), a.hash("stability"));
        b.apply(&Overrides { seed: Some(9), ..Default::default() });
        assert_ne!(a.hash("solve"), b.hash("solve"));
        assert_eq!(a.hash("solve").len(), 16);
    }
}
