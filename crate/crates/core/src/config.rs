//! TOML run configuration and problem assembly.

use serde::{Deserialize, Serialize};

use crate::energy::Problem;
use crate::error::{Error, Result};
use crate::fields::{validate_hypotheses, ExponentField, FieldsConfig, ValidationReport};
use crate::kirchhoff::{KirchhoffKind, KirchhoffSpec};
use crate::mesh::{DomainMesh, Interval};
use crate::reaction::{Reaction, ReactionConfig};
use crate::search::DescentOptions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Validate,
    Ledger,
    SolveCc,
    SolveSl,
    Decay,
    Ccp,
    Verify,
}

impl Scenario {
    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Validate => "validate",
            Scenario::Ledger => "ledger",
            Scenario::SolveCc => "solve-cc",
            Scenario::SolveSl => "solve-sl",
            Scenario::Decay => "decay",
            Scenario::Ccp => "ccp",
            Scenario::Verify => "verify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    /// One `[lo, hi]` pair per axis.
    #[serde(rename = "box")]
    pub bounds: Vec<[f64; 2]>,
    pub nodes: Vec<usize>,
    pub ambient_n: usize,
    #[serde(default)]
    pub critical: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KirchhoffConfig {
    #[serde(flatten)]
    pub kind: KirchhoffKind,
    pub tau0: f64,
    /// Explicit truncation point; chosen by a grid scan when absent.
    #[serde(default)]
    pub t0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub max_iters: usize,
    pub tol: f64,
    pub step_cap: f64,
    pub preconditioned: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = DescentOptions::default();
        SolverConfig { max_iters: d.max_iters, tol: d.tol, step_cap: d.step_cap, preconditioned: d.preconditioned }
    }
}

impl SolverConfig {
    pub fn options(&self) -> DescentOptions {
        DescentOptions {
            max_iters: self.max_iters,
            tol: self.tol,
            step_cap: self.step_cap,
            preconditioned: self.preconditioned,
            ..DescentOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveCcConfig {
    /// `λ = lambda_fraction · λ*` unless `lambda` is given.
    pub lambda_fraction: f64,
    pub lambda: Option<f64>,
}

impl Default for SolveCcConfig {
    fn default() -> Self {
        SolveCcConfig { lambda_fraction: 0.5, lambda: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecayConfig {
    /// Grid as fractions of `λ*`.
    pub fractions: Vec<f64>,
}

impl Default for DecayConfig {
    fn default() -> Self {
        DecayConfig { fractions: vec![0.5, 0.25, 0.125, 0.0625] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveSlConfig {
    pub k_pairs: usize,
    /// `θ = theta_fraction · θ1(R_K)` unless `theta` is given.
    pub theta_fraction: f64,
    pub theta: Option<f64>,
}

impl Default for SolveSlConfig {
    fn default() -> Self {
        SolveSlConfig { k_pairs: 3, theta_fraction: 0.5, theta: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcpConfig {
    /// Bubble center; defaults to the domain center.
    pub center: Option<Vec<f64>>,
    pub eps: Vec<f64>,
    /// Amplitude exponent; defaults to `(N - p(x0)) / p(x0)`.
    pub s: Option<f64>,
}

impl Default for CcpConfig {
    fn default() -> Self {
        CcpConfig { center: None, eps: vec![0.25, 0.125, 0.0625], s: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub suites: Vec<String>,
    pub samples: usize,
    pub tolerance: Option<f64>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            suites: crate::verify::ALL_SUITES.iter().map(|s| s.to_string()).collect(),
            samples: 200,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    pub scenario: Scenario,
    /// Report directory; `--output` overrides it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<std::path::PathBuf>,
    pub domain: DomainConfig,
    pub fields: FieldsConfig,
    pub reaction: ReactionConfig,
    pub kirchhoff: KirchhoffConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub solve_cc: SolveCcConfig,
    #[serde(default)]
    pub decay: DecayConfig,
    #[serde(default)]
    pub solve_sl: SolveSlConfig,
    #[serde(default)]
    pub ccp: CcpConfig,
    #[serde(default)]
    pub verify: VerifyConfig,
}

/// Extracts the key named in a deserializer message, else the key on the offending line.
fn offending_key(message: &str, text: &str, span: Option<std::ops::Range<usize>>) -> String {
    for marker in ["missing field `", "unknown field `", "unknown variant `"] {
        if let Some(i) = message.find(marker) {
            let rest = &message[i + marker.len()..];
            if let Some(j) = rest.find('`') {
                return rest[..j].to_string();
            }
        }
    }
    if let Some(span) = span {
        let start = text[..span.start.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
        let line = text[start..].lines().next().unwrap_or("");
        if let Some((key, _)) = line.split_once('=') {
            let key = key.trim();
            if !key.is_empty() {
                return key.to_string();
            }
        }
        let header = line.trim().trim_matches(|c| c == '[' || c == ']');
        if !header.is_empty() {
            return header.to_string();
        }
    }
    "config".to_string()
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let message = e.message().lines().next().unwrap_or("").to_string();
            Error::config(offending_key(&message, text, e.span()), message)
        })
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn mesh(&self) -> Result<DomainMesh> {
        let d = &self.domain;
        if d.bounds.is_empty() || d.bounds.len() > 2 {
            return Err(Error::config("domain.box", "one or two axes are supported"));
        }
        if d.bounds.len() != d.nodes.len() {
            return Err(Error::config("domain.nodes", "one node count per axis is required"));
        }
        let ivs: Vec<Interval> = d.bounds.iter().map(|b| Interval::new(b[0], b[1])).collect();
        DomainMesh::new(&ivs, &d.nodes).map_err(|e| match e {
            Error::Resource(_) => e,
            other => Error::config("domain", other.to_string()),
        })
    }

    pub fn fields(&self, mesh: &DomainMesh) -> Result<ExponentField> {
        ExponentField::build(mesh, &self.fields, self.domain.ambient_n, self.domain.critical)
    }

    /// Checks the structural hypotheses without raising on violations.
    pub fn validate(&self) -> Result<ValidationReport> {
        let mesh = self.mesh()?;
        let fields = self.fields(&mesh)?;
        validate_hypotheses(&mesh, &fields)
    }

    /// Assembles the discrete problem; hypothesis violations are configuration errors.
    pub fn problem(&self) -> Result<Problem> {
        let mesh = self.mesh()?;
        let fields = self.fields(&mesh)?;
        let report = validate_hypotheses(&mesh, &fields)?;
        if let Some(v) = report.violations.first() {
            return Err(Error::config(
                "fields",
                format!("hypothesis `{}` fails at node {} by {}", v.condition, v.node, v.excess),
            ));
        }
        let ex = *fields.extrema();
        let k = &self.kirchhoff;
        let kirchhoff = match k.t0 {
            Some(t0) => KirchhoffSpec::with_t0(k.kind, k.tau0, t0, ex.q_plus, ex.r1_minus)?,
            None => KirchhoffSpec::new(k.kind, k.tau0, ex.q_plus, ex.r1_minus)?,
        };
        let reaction = Reaction::build(&mesh, &fields, &self.reaction)?;
        Ok(Problem::new(mesh, fields, kirchhoff, reaction))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
scenario = "validate"

[domain]
box = [[0.0, 1.0]]
nodes = [33]
ambient_n = 4

[fields]
p = { kind = "constant", value = 2.0 }
q = { kind = "constant", value = 2.4 }
a = { kind = "constant", value = 1.0 }
c1 = { kind = "constant", value = 1.0 }
c2 = { kind = "constant", value = 1.0 }
r1 = { kind = "critical" }
r2 = { kind = "matched" }

[reaction]
kind = "cc-power"
c1 = 1.0
c2 = 0.0
delta = { kind = "constant", value = 1.5 }

[kirchhoff]
kind = "affine"
m0 = 1.0
kappa = 0.5
tau0 = 1.0
"#;

    #[test]
    fn minimal_config_assembles() {
        let cfg = RunConfig::from_toml(MINIMAL).unwrap();
        assert_eq!(cfg.scenario, Scenario::Validate);
        assert_eq!(cfg.solver, SolverConfig::default());
        let p = cfg.problem().unwrap();
        assert_eq!(p.mesh.len(), 33);
        let again = RunConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn missing_key_is_named() {
        let text = MINIMAL.replace("q = { kind = \"constant\", value = 2.4 }\n", "");
        match RunConfig::from_toml(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "q"),
            other => panic!("{other:?}"),
        }
        let text = MINIMAL.replace("nodes = [33]", "nodes = \"many\"");
        match RunConfig::from_toml(&text) {
            Err(Error::Config { key, .. }) => assert_eq!(key, "nodes"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn violations_are_config_errors() {
        let text = MINIMAL.replace("value = 2.4", "value = 3.0");
        let cfg = RunConfig::from_toml(&text).unwrap();
        assert!(!cfg.validate().unwrap().is_ok());
        assert!(matches!(cfg.problem(), Err(Error::Config { .. })));
    }
}
