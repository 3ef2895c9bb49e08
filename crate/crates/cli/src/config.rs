//! Run configuration: a single JSON document shared by every subcommand.
//!
//! Floats may be written as JSON numbers or as strings holding either a
//! hex-float (`"0x1.8p+1"`) or a decimal literal.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use tllsize::dynamics::{builtin_model, ControlSystemModel};
use tllsize::geometry::BoxDomain;
use tllsize::hexfloat::parse_hex;
use tllsize::sizing::{ExponentMultiplier, SpecBudget};

use crate::error::CliError;

/// A float accepted as a number, a hex-float string or a decimal string.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Num(pub f64);

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_finite() {
            s.serialize_f64(self.0)
        } else {
            s.serialize_str(&tllsize::hexfloat::format_hex(self.0))
        }
    }
}

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct NumVisitor;
        impl Visitor<'_> for NumVisitor {
            type Value = Num;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or a hex-float / decimal string")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Num, E> {
                Ok(Num(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Num, E> {
                Ok(Num(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Num, E> {
                parse_num(v).map(Num).map_err(E::custom)
            }
        }
        d.deserialize_any(NumVisitor)
    }
}

/// Parses a hex-float or decimal literal.
pub fn parse_num(text: &str) -> Result<f64, String> {
    let t = text.trim();
    let lower = t.trim_start_matches(['-', '+']).to_ascii_lowercase();
    if lower.starts_with("0x") {
        parse_hex(t).map_err(|e| format!("bad hex-float {t:?}: {e}"))
    } else {
        t.parse::<f64>().map_err(|e| format!("bad number {t:?}: {e}"))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub k_x: Num,
    pub k_u: Num,
    pub k_cont: Num,
    pub tau: Num,
    pub delta: Num,
    #[serde(default)]
    pub exponent_multiplier: ExponentMultiplier,
}

impl BudgetConfig {
    pub fn to_budget(&self) -> Result<SpecBudget, CliError> {
        let b = SpecBudget {
            k_x: self.k_x.0,
            k_u: self.k_u.0,
            k_cont: self.k_cont.0,
            tau: self.tau.0,
            delta: self.delta.0,
            exponent_multiplier: self.exponent_multiplier,
        };
        b.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(b)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub lower: Vec<Num>,
    pub upper: Vec<Num>,
}

impl BoxConfig {
    pub fn to_box(&self, what: &str) -> Result<BoxDomain, CliError> {
        BoxDomain::new(
            self.lower.iter().map(|v| v.0).collect(),
            self.upper.iter().map(|v| v.0).collect(),
        )
        .map_err(|e| CliError::Config(format!("{what}: {e}")))
    }
}

/// Where controller values come from.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ControllerSpec {
    /// A named controller from the built-in catalog.
    Builtin { name: String },
    /// The same control vector everywhere.
    Constant { value: Vec<Num> },
    /// A table with one row per point: `n` state columns then `m` control
    /// columns, after a header row.
    Csv { path: PathBuf },
    /// A long-lived subprocess. Each request is one line holding a JSON array
    /// of points; the reply is one line holding a JSON array of controls.
    Command { argv: Vec<String> },
}

fn default_probe_count() -> usize {
    2000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeConfig {
    #[serde(default = "default_probe_count")]
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            count: default_probe_count(),
            seed: 0,
        }
    }
}

fn default_equivalence() -> Num {
    Num(1e-9)
}
fn default_continuity() -> Num {
    Num(1e-9)
}
fn default_face_samples() -> usize {
    4
}
fn default_quotient_pairs() -> usize {
    2000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Largest allowed `|tll - cpwa|` on probes.
    #[serde(default = "default_equivalence")]
    pub equivalence: Num,
    /// Largest allowed disagreement between adjacent pieces on shared faces.
    #[serde(default = "default_continuity")]
    pub continuity: Num,
    #[serde(default = "default_face_samples")]
    pub continuity_samples_per_face: usize,
    /// Bound for the approximation audit; the budgeted `mu_max` when absent.
    #[serde(default)]
    pub approximation: Option<Num>,
    #[serde(default = "default_quotient_pairs")]
    pub quotient_pairs: usize,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            equivalence: default_equivalence(),
            continuity: default_continuity(),
            continuity_samples_per_face: default_face_samples(),
            approximation: None,
            quotient_pairs: default_quotient_pairs(),
        }
    }
}

fn path_default(s: &str) -> PathBuf {
    PathBuf::from(s)
}

/// Artifact file names, resolved against `--out` when relative.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifacts {
    #[serde(default = "grid_default")]
    pub grid: PathBuf,
    #[serde(default = "interp_default")]
    pub interpolant: PathBuf,
    #[serde(default = "net_default")]
    pub network: PathBuf,
    #[serde(default = "expanded_default")]
    pub expanded: PathBuf,
    #[serde(default = "sysid_interp_default")]
    pub sysid_interpolant: PathBuf,
    #[serde(default = "sysid_net_default")]
    pub sysid_network: PathBuf,
}

fn grid_default() -> PathBuf {
    path_default("grid.json")
}
fn interp_default() -> PathBuf {
    path_default("interpolant.json")
}
fn net_default() -> PathBuf {
    path_default("network.json")
}
fn expanded_default() -> PathBuf {
    path_default("expanded.json")
}
fn sysid_interp_default() -> PathBuf {
    path_default("sysid_interpolant.json")
}
fn sysid_net_default() -> PathBuf {
    path_default("sysid_network.json")
}

impl Default for Artifacts {
    fn default() -> Self {
        Artifacts {
            grid: grid_default(),
            interpolant: interp_default(),
            network: net_default(),
            expanded: expanded_default(),
            sysid_interpolant: sysid_interp_default(),
            sysid_network: sysid_net_default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdsConfig {
    pub left: PathBuf,
    pub right: PathBuf,
    pub delta: Num,
}

fn default_step_divisions() -> usize {
    100
}
fn default_density() -> usize {
    11
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorConfig {
    /// RK4 uses `tau / steps_per_tau` as its step.
    #[serde(default = "default_step_divisions")]
    pub steps_per_tau: usize,
    /// Lattice points per axis for the invariance audit.
    #[serde(default = "default_density")]
    pub invariance_density: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            steps_per_tau: default_step_divisions(),
            invariance_density: default_density(),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SysidConfig {
    /// Grid spacing on `X x U`; the budgeted `eta` when absent.
    #[serde(default)]
    pub eta: Option<Num>,
    /// Lipschitz constant of the vector field in `(x, u)`; `K_x + K_u` of
    /// the model when absent.
    #[serde(default)]
    pub k_field: Option<Num>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub budget: BudgetConfig,
    #[serde(default)]
    pub model: Option<String>,
    #[serde(default)]
    pub state_box: Option<BoxConfig>,
    #[serde(default)]
    pub control_box: Option<BoxConfig>,
    #[serde(default)]
    pub eta: Option<Num>,
    #[serde(default)]
    pub controller: Option<ControllerSpec>,
    #[serde(default)]
    pub probes: ProbeConfig,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub artifacts: Artifacts,
    #[serde(default)]
    pub ads: Option<AdsConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default)]
    pub sysid: Option<SysidConfig>,
    /// Merge radius when snapping states of a transition system.
    #[serde(default)]
    pub snap_tolerance: Option<Num>,
}

fn positive(what: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!("{what} must be finite and > 0, got {v}")))
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.budget.to_budget()?;
        positive("tolerances.equivalence", self.tolerances.equivalence.0)?;
        positive("tolerances.continuity", self.tolerances.continuity.0)?;
        if let Some(a) = self.tolerances.approximation {
            positive("tolerances.approximation", a.0)?;
        }
        if let Some(e) = self.eta {
            positive("eta", e.0)?;
        }
        if let Some(s) = self.snap_tolerance {
            positive("snap_tolerance", s.0)?;
        }
        if let Some(ads) = &self.ads {
            if !(ads.delta.0 >= 0.0 && ads.delta.0.is_finite()) {
                return Err(CliError::Config(format!("ads.delta must be finite and >= 0, got {}", ads.delta.0)));
            }
        }
        if let Some(s) = &self.sysid {
            if let Some(e) = s.eta {
                positive("sysid.eta", e.0)?;
            }
            if let Some(k) = s.k_field {
                positive("sysid.k_field", k.0)?;
            }
        }
        if self.probes.count == 0 {
            return Err(CliError::Config("probes.count must be >= 1".into()));
        }
        if self.integrator.steps_per_tau == 0 {
            return Err(CliError::Config("integrator.steps_per_tau must be >= 1".into()));
        }
        if let Some(name) = &self.model {
            if builtin_model(name).is_none() {
                return Err(CliError::Config(format!("unknown model {name:?}")));
            }
        }
        if self.state_box.is_some() || self.control_box.is_some() {
            self.state_domain()?;
            self.control_domain()?;
        }
        Ok(())
    }

    pub fn budget(&self) -> SpecBudget {
        self.budget.to_budget().expect("validated on load")
    }

    /// `X`: the explicit box, else the model's.
    pub fn state_domain(&self) -> Result<BoxDomain, CliError> {
        if let Some(b) = &self.state_box {
            return b.to_box("state_box");
        }
        self.base_model()
            .map(|m| m.x)
            .ok_or_else(|| CliError::Config("need state_box or model".into()))
    }

    /// `U`, when one is known.
    pub fn control_domain(&self) -> Result<Option<BoxDomain>, CliError> {
        if let Some(b) = &self.control_box {
            return b.to_box("control_box").map(Some);
        }
        Ok(self.base_model().map(|m| m.u))
    }

    fn base_model(&self) -> Option<ControlSystemModel> {
        self.model.as_deref().and_then(builtin_model)
    }

    /// The selected model with any configured boxes substituted.
    pub fn model(&self) -> Result<ControlSystemModel, CliError> {
        let mut m = self
            .base_model()
            .ok_or_else(|| CliError::Config("this command needs a model".into()))?;
        let x = self.state_domain()?;
        let u = self.control_domain()?.expect("model supplies U");
        if x.dim() != m.n || u.dim() != m.m {
            return Err(CliError::Config(format!(
                "boxes have dims ({}, {}) but model {} has ({}, {})",
                x.dim(),
                u.dim(),
                m.name,
                m.n,
                m.m
            )));
        }
        m.x = x;
        m.u = u;
        Ok(m)
    }

    /// Number of controls.
    pub fn control_dim(&self) -> Result<usize, CliError> {
        if let Some(u) = self.control_domain()? {
            return Ok(u.dim());
        }
        match &self.controller {
            Some(ControllerSpec::Constant { value }) => Ok(value.len()),
            _ => Ok(1),
        }
    }

    pub fn rk_step(&self) -> f64 {
        self.budget.tau.0 / self.integrator.steps_per_tau as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"budget": {"k_x": 1, "k_u": 1, "k_cont": 1, "tau": 0.1, "delta": 0.05}}"#;

    #[test]
    fn number_forms() {
        assert_eq!(parse_num("0x1.8p+1").unwrap(), 3.0);
        assert_eq!(parse_num("-0x1p-1").unwrap(), -0.5);
        assert_eq!(parse_num("0.25").unwrap(), 0.25);
        assert!(parse_num("zero").is_err());
        let n: Num = serde_json::from_str(r#""0x1p-2""#).unwrap();
        assert_eq!(n.0, 0.25);
        let n: Num = serde_json::from_str("7").unwrap();
        assert_eq!(n.0, 7.0);
    }

    #[test]
    fn defaults_fill_in() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.probes.count, 2000);
        assert_eq!(c.budget().exponent_multiplier, ExponentMultiplier::Three);
        assert_eq!(c.artifacts.network, PathBuf::from("network.json"));
        assert!(c.state_domain().is_err());
    }

    #[test]
    fn rejects_bad_values() {
        let bad = MINIMAL.replace("0.05", "-1");
        assert!(matches!(RunConfig::parse(&bad), Err(CliError::Config(_))));
        let unknown = MINIMAL.replace("\"budget\"", "\"surprise\": 1, \"budget\"");
        assert!(RunConfig::parse(&unknown).is_err());
        let model = MINIMAL.replace("}}", "}, \"model\": \"nope\"}");
        assert!(RunConfig::parse(&model).is_err());
        let tol = MINIMAL.replace("}}", "}, \"tolerances\": {\"equivalence\": 0}}");
        assert!(RunConfig::parse(&tol).is_err());
    }

    #[test]
    fn model_boxes_override() {
        let text = MINIMAL.replace(
            "}}",
            r#"}, "model": "pendulum", "state_box": {"lower": [-0.5, "-0x1p-1"], "upper": [0.5, 0.5]}}"#,
        );
        let c = RunConfig::parse(&text).unwrap();
        let m = c.model().unwrap();
        assert_eq!(m.x.lower(), &[-0.5, -0.5]);
        assert_eq!(m.u.upper(), &[2.0]);
        assert_eq!(c.control_dim().unwrap(), 1);
    }
}
