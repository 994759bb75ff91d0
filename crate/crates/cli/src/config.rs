//! Run configuration: JSON file, command-line flags and defaults.

use std::path::PathBuf;

use kagome_core::geometry::{Method, Orientation};
use kagome_core::Boundary;
use serde::{Deserialize, Serialize};

/// JSON schema of `RunConfig`, shipped with the binary.
pub const SCHEMA: &str = include_str!("../schema/run_config.schema.json");

pub const OUTPUT_DIR_ENV: &str = "KAGOME_OUTPUT_DIR";

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Option<String>,
    #[serde(default)]
    pub lattice: LatticeConfig,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeConfig {
    #[serde(rename = "L1")]
    pub l1: Option<usize>,
    #[serde(rename = "L2")]
    pub l2: Option<usize>,
    pub boundary: Option<Boundary>,
    /// Entanglement cut in cell columns.
    pub cut: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub mu: Option<f64>,
    pub alpha: Option<f64>,
    /// Six `[re, im]` hexagon weights.
    pub beta: Option<[[f64; 2]; 6]>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    pub grid: Option<usize>,
    pub fd_step: Option<f64>,
    pub method: Option<MethodName>,
    pub orientation: Option<Orientation>,
    pub eps_max: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum MethodName {
    #[serde(rename = "analytic-n")]
    #[value(name = "analytic-n")]
    AnalyticN,
    #[serde(rename = "finite-difference")]
    #[value(name = "finite-difference")]
    FiniteDifference,
    #[serde(rename = "closed-form")]
    #[value(name = "closed-form")]
    ClosedForm,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    pub flat: Option<f64>,
    pub gap: Option<f64>,
    pub chi: Option<f64>,
    pub volume: Option<f64>,
    pub ideal: Option<f64>,
    pub fidelity: Option<f64>,
    pub residual: Option<f64>,
    pub spectrum: Option<f64>,
    pub metric: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
pub enum Format {
    #[default]
    #[serde(rename = "csv")]
    Csv,
    #[serde(rename = "json")]
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub format: Option<Format>,
}

fn pick<T>(base: Option<T>, over: Option<T>) -> Option<T> {
    over.or(base)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Fields set in `over` replace those in `self`.
    pub fn merged(self, over: RunConfig) -> RunConfig {
        let t = self.numerics.tolerances;
        let o = over.numerics.tolerances;
        RunConfig {
            command: pick(self.command, over.command),
            lattice: LatticeConfig {
                l1: pick(self.lattice.l1, over.lattice.l1),
                l2: pick(self.lattice.l2, over.lattice.l2),
                boundary: pick(self.lattice.boundary, over.lattice.boundary),
                cut: pick(self.lattice.cut, over.lattice.cut),
            },
            model: ModelConfig {
                mu: pick(self.model.mu, over.model.mu),
                alpha: pick(self.model.alpha, over.model.alpha),
                beta: pick(self.model.beta, over.model.beta),
            },
            numerics: NumericsConfig {
                grid: pick(self.numerics.grid, over.numerics.grid),
                fd_step: pick(self.numerics.fd_step, over.numerics.fd_step),
                method: pick(self.numerics.method, over.numerics.method),
                orientation: pick(self.numerics.orientation, over.numerics.orientation),
                eps_max: pick(self.numerics.eps_max, over.numerics.eps_max),
                tolerances: Tolerances {
                    flat: pick(t.flat, o.flat),
                    gap: pick(t.gap, o.gap),
                    chi: pick(t.chi, o.chi),
                    volume: pick(t.volume, o.volume),
                    ideal: pick(t.ideal, o.ideal),
                    fidelity: pick(t.fidelity, o.fidelity),
                    residual: pick(t.residual, o.residual),
                    spectrum: pick(t.spectrum, o.spectrum),
                    metric: pick(t.metric, o.metric),
                },
            },
            output: OutputConfig {
                directory: pick(self.output.directory, over.output.directory),
                format: pick(self.output.format, over.output.format),
            },
        }
    }

    /// Range checks the schema expresses but serde cannot.
    pub fn validate(&self) -> Result<(), String> {
        const COMMANDS: [&str; 7] = ["bands", "topology", "state", "entanglement", "circuit", "metric", "verify-all"];
        if let Some(c) = &self.command {
            if !COMMANDS.contains(&c.as_str()) {
                return Err(format!("command: unknown command {c:?}"));
            }
        }
        for (name, v) in [("lattice.L1", self.lattice.l1), ("lattice.L2", self.lattice.l2)] {
            if let Some(v) = v {
                if v < 2 {
                    return Err(format!("{name}: must be at least 2, got {v}"));
                }
            }
        }
        if self.lattice.cut == Some(0) {
            return Err("lattice.cut: must be at least 1".into());
        }
        let finite = [
            ("model.mu", self.model.mu),
            ("model.alpha", self.model.alpha),
            ("numerics.fd_step", self.numerics.fd_step),
            ("numerics.eps_max", self.numerics.eps_max),
        ];
        for (name, v) in finite {
            if v.is_some_and(|x| !x.is_finite()) {
                return Err(format!("{name}: must be finite"));
            }
        }
        if let Some(g) = self.numerics.grid {
            if g < 2 {
                return Err(format!("numerics.grid: must be at least 2, got {g}"));
            }
        }
        if self.numerics.fd_step.is_some_and(|h| h <= 0.0) {
            return Err("numerics.fd_step: must be positive".into());
        }
        if self.numerics.eps_max.is_some_and(|e| e <= 0.0) {
            return Err("numerics.eps_max: must be positive".into());
        }
        let t = &self.numerics.tolerances;
        for (name, v) in [
            ("flat", t.flat),
            ("gap", t.gap),
            ("chi", t.chi),
            ("volume", t.volume),
            ("ideal", t.ideal),
            ("fidelity", t.fidelity),
            ("residual", t.residual),
            ("spectrum", t.spectrum),
            ("metric", t.metric),
        ] {
            if v.is_some_and(|x| !(x.is_finite() && x >= 0.0)) {
                return Err(format!("numerics.tolerances.{name}: must be a finite non-negative number"));
            }
        }
        if let Some(beta) = &self.model.beta {
            if beta.iter().flatten().any(|x| !x.is_finite()) {
                return Err("model.beta: entries must be finite".into());
            }
        }
        Ok(())
    }

    pub fn mu(&self, default: f64) -> f64 {
        self.model.mu.unwrap_or(default)
    }

    pub fn alpha(&self, default: f64) -> f64 {
        self.model.alpha.unwrap_or(default)
    }

    pub fn size(&self, default: (usize, usize)) -> (usize, usize) {
        (self.lattice.l1.unwrap_or(default.0), self.lattice.l2.unwrap_or(default.1))
    }

    pub fn boundary(&self) -> Boundary {
        self.lattice.boundary.unwrap_or(Boundary::Torus)
    }

    pub fn format(&self) -> Format {
        self.output.format.unwrap_or_default()
    }

    pub fn method(&self) -> Result<Method, String> {
        match self.numerics.method.unwrap_or(MethodName::AnalyticN) {
            MethodName::AnalyticN => Ok(Method::AnalyticN),
            MethodName::ClosedForm => Ok(Method::ClosedForm),
            MethodName::FiniteDifference => {
                Method::finite_difference(self.numerics.fd_step.unwrap_or(1e-4)).map_err(|e| e.to_string())
            }
        }
    }

    pub fn tol(&self, pick: impl Fn(&Tolerances) -> Option<f64>, default: f64) -> f64 {
        pick(&self.numerics.tolerances).unwrap_or(default)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_fields() {
        assert!(RunConfig::parse(r#"{"model": {"mu": 0, "nu": 1}}"#).is_err());
        assert!(RunConfig::parse(r#"{"colour": "red"}"#).is_err());
    }

    #[test]
    fn parses_full_config() {
        let text = r#"{
            "command": "bands",
            "lattice": {"L1": 3, "L2": 2, "boundary": "torus", "cut": 1},
            "model": {"mu": -1, "alpha": 0.5},
            "numerics": {"grid": 51, "fd_step": 1e-4, "method": "closed-form", "orientation": "d1xd2",
                         "eps_max": 8, "tolerances": {"gap": 1e-2}},
            "output": {"directory": "out", "format": "json"}
        }"#;
        let cfg = RunConfig::parse(text).unwrap();
        assert_eq!(cfg.size((0, 0)), (3, 2));
        assert_eq!(cfg.format(), Format::Json);
        assert_eq!(cfg.numerics.orientation, Some(Orientation::D1CrossD2));
        assert_eq!(cfg.tol(|t| t.gap, 1.0), 1e-2);
    }

    #[test]
    fn range_errors() {
        assert!(RunConfig::parse(r#"{"lattice": {"L1": 1}}"#).is_err());
        assert!(RunConfig::parse(r#"{"numerics": {"grid": 1}}"#).is_err());
        assert!(RunConfig::parse(r#"{"command": "plot"}"#).is_err());
        assert!(RunConfig::parse(r#"{"numerics": {"tolerances": {"gap": -1}}}"#).is_err());
    }

    #[test]
    fn later_layer_wins() {
        let a = RunConfig::parse(r#"{"model": {"mu": 0.5, "alpha": 1}}"#).unwrap();
        let b = RunConfig::parse(r#"{"model": {"mu": -1}}"#).unwrap();
        let m = a.merged(b);
        assert_eq!(m.model.mu, Some(-1.0));
        assert_eq!(m.model.alpha, Some(1.0));
    }

    #[test]
    fn schema_lists_every_section() {
        let schema: serde_json::Value = serde_json::from_str(SCHEMA).unwrap();
        let props = schema["properties"].as_object().unwrap();
        for key in ["command", "lattice", "model", "numerics", "output"] {
            assert!(props.contains_key(key), "{key}");
        }
        assert_eq!(schema["additionalProperties"], false);
        let tol = &props["numerics"]["properties"]["tolerances"]["properties"];
        let names: Vec<&String> = tol.as_object().unwrap().keys().collect();
        let sample = serde_json::to_value(Tolerances::default()).unwrap();
        let mut ours: Vec<&String> = sample.as_object().unwrap().keys().collect();
        ours.sort();
        let mut names = names;
        names.sort();
        assert_eq!(names, ours);
    }
}
