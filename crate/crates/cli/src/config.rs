//! Run configuration (JSON).
//!
//! Lengths are in units of `L0`, the length unit of the lattice vectors;
//! in-plane positions are fractional coordinates of the unit cell. Physical
//! quantities in the `analysis.physical` block carry their unit in the key
//! name (`rf_amplitude_v`, `rf_frequency_hz`, `length_unit_m`, `mass_u`).
//!
//! ```json
//! {
//!   "lattice": { "kind": "square", "spacing": 1.0 },
//!   "grid": { "kind": "oblique", "n1": 48, "n2": 48 },
//!   "traps": [ { "label": "t", "position": [0.5, 0.5, 0.2], "gamma": "cylindrical" } ],
//!   "extras": [ { "position": [0.0, 0.5, 0.9], "relation": "at_most", "lambda": -0.05 } ],
//!   "suppression": { "rounds": 4, "fraction": 0.01, "mode": "at_most" },
//!   "outputs": { "map": "electrodes.map", "report": "report.json", "svg": "electrodes.svg" }
//! }
//! ```

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use trap_forge::analysis::AnalysisOptions;
use trap_forge::constraints::{cylindrical_quadrupole, curvature_from_frequencies, Relation};
use trap_forge::field::{default_cutoff, Derivative};
use trap_forge::lattice::GridKind;
use trap_forge::optimize::SolverOptions;
use trap_forge::synthesis::SuppressionPolicy;
use trap_forge::{BravaisLattice, Error, Position, Result, TrapSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LatticeSpec {
    Square { spacing: f64 },
    Hexagonal { spacing: f64 },
    Oblique { a1: [f64; 2], a2: [f64; 2] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaSpec {
    /// diag(−1/2, −1/2, 1).
    Cylindrical,
    Tensor([[f64; 3]; 3]),
    /// Secular frequency ratios along orthonormal axes (rows).
    Frequencies { ratios: [f64; 3], axes: [[f64; 3]; 3] },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapConfig {
    pub label: String,
    /// Fractional x, fractional y, height z.
    pub position: [f64; 3],
    pub gamma: GammaSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LambdaKeyword {
    /// Typical in-cell field magnitude at the constraint height.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaSpec {
    Value(f64),
    Keyword(LambdaKeyword),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtraConfig {
    /// Absolute position (fractional x, fractional y, z) ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<[f64; 3]>,
    /// ... or a trap label plus `offset` (fractional dx, dy and dz).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trap: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub offset: Option<[f64; 3]>,
    #[serde(default = "default_component")]
    pub component: Derivative,
    #[serde(default = "default_relation")]
    pub relation: Relation,
    /// Imposed value in units of `C`.
    pub lambda: LambdaSpec,
}

fn default_component() -> Derivative {
    Derivative::Dz
}

fn default_relation() -> Relation {
    Relation::Equal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Outputs {
    pub map: String,
    pub report: String,
    pub svg: Option<String>,
    /// Landscape export `x,y,z,psi` (Cartesian, L0).
    pub landscape_csv: Option<String>,
    pub sweep_csv: String,
}

impl Default for Outputs {
    fn default() -> Self {
        Outputs {
            map: "electrodes.map".into(),
            report: "report.json".into(),
            svg: Some("electrodes.svg".into()),
            landscape_csv: None,
            sweep_csv: "sweep.csv".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// Trap heights in units of the trap spacing `d`.
    pub z_over_d: Vec<f64>,
    /// `d` in L0; defaults to |a1|.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spacing: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeSpec,
    /// Free-text note on what L0 stands for (e.g. "trap spacing d").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub length_unit: Option<String>,
    pub grid: GridKind,
    /// Fourier cutoff; twice the finer grid resolution when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_cut: Option<usize>,
    pub traps: Vec<TrapConfig>,
    #[serde(default)]
    pub extras: Vec<ExtraConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suppression: Option<SuppressionPolicy>,
    #[serde(default)]
    pub solver: SolverOptions,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default)]
    pub outputs: Outputs,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepConfig>,
}

/// Resolved extra constraint; `lambda` is `None` for `"auto"`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtraRequest {
    pub position: Position,
    pub component: Derivative,
    pub relation: Relation,
    pub lambda: Option<f64>,
}

fn config_error(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config { location: location.into(), message: message.into() }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            config_error(format!("{path} (line {}, column {})", inner.line(), inner.column()), inner.to_string())
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(path.display().to_string(), e.to_string()))?;
        RunConfig::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Cross-reference and range checks that the schema cannot express.
    pub fn validate(&self) -> Result<()> {
        if self.traps.is_empty() {
            return Err(config_error("traps", "at least one trap is required"));
        }
        let mut labels = HashSet::new();
        for (i, t) in self.traps.iter().enumerate() {
            if t.label.is_empty() || t.label.chars().any(char::is_whitespace) {
                return Err(config_error(format!("traps[{i}].label"), "labels must be non-empty without whitespace"));
            }
            if !labels.insert(t.label.as_str()) {
                return Err(config_error(format!("traps[{i}].label"), format!("duplicate label '{}'", t.label)));
            }
        }
        for (i, e) in self.extras.iter().enumerate() {
            match (&e.position, &e.trap) {
                (Some(_), None) if e.offset.is_none() => {}
                (None, Some(label)) if labels.contains(label.as_str()) => {}
                (None, Some(label)) => {
                    return Err(config_error(format!("extras[{i}].trap"), format!("unknown trap label '{label}'")))
                }
                _ => {
                    return Err(config_error(
                        format!("extras[{i}]"),
                        "give either 'position' or 'trap' (with optional 'offset')",
                    ))
                }
            }
        }
        if let Some(sweep) = &self.sweep {
            if self.traps.len() != 1 {
                return Err(config_error("sweep", "sweeps need exactly one trap per cell"));
            }
            if let Some(bad) = sweep.z_over_d.iter().find(|z| !(**z > 0.0)) {
                return Err(config_error("sweep.z_over_d", format!("heights must be positive, got {bad}")));
            }
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<BravaisLattice> {
        match self.lattice {
            LatticeSpec::Square { spacing } => BravaisLattice::square(spacing),
            LatticeSpec::Hexagonal { spacing } => BravaisLattice::hexagonal(spacing),
            LatticeSpec::Oblique { a1, a2 } => BravaisLattice::new(a1, a2),
        }
    }

    pub fn n_cut(&self) -> usize {
        self.n_cut.unwrap_or_else(|| default_cutoff(self.grid))
    }

    /// Rescales the patch grid to `n` per direction and resets the cutoff to its default.
    pub fn override_resolution(&mut self, n: usize) {
        self.grid = self.grid.with_resolution(n);
        self.n_cut = None;
    }

    pub fn traps(&self) -> Result<Vec<TrapSpec>> {
        self.traps
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let gamma = match &t.gamma {
                    GammaSpec::Cylindrical => cylindrical_quadrupole(),
                    GammaSpec::Tensor(g) => *g,
                    GammaSpec::Frequencies { ratios, axes } => {
                        curvature_from_frequencies(*ratios, *axes)
                            .map_err(|e| config_error(format!("traps[{i}].gamma"), format!("trap '{}': {e}", t.label)))?
                            .0
                    }
                };
                let spec = TrapSpec::new(t.label.clone(), Position::new(t.position[0], t.position[1], t.position[2]), gamma);
                spec.validate()?;
                Ok(spec)
            })
            .collect()
    }

    pub fn extras(&self) -> Vec<ExtraRequest> {
        self.extras
            .iter()
            .map(|e| {
                let position = match (&e.position, &e.trap) {
                    (Some(p), _) => Position::new(p[0], p[1], p[2]),
                    (None, Some(label)) => {
                        let t = self.traps.iter().find(|t| &t.label == label).expect("validated");
                        let o = e.offset.unwrap_or([0.0; 3]);
                        Position::new(t.position[0] + o[0], t.position[1] + o[1], t.position[2] + o[2])
                    }
                    (None, None) => unreachable!("validated"),
                };
                let lambda = match e.lambda {
                    LambdaSpec::Value(v) => Some(v),
                    LambdaSpec::Keyword(LambdaKeyword::Auto) => None,
                };
                ExtraRequest { position, component: e.component, relation: e.relation, lambda }
            })
            .collect()
    }

    /// Copy with the single trap moved to height `z_over_d · d`.
    pub fn at_height(&self, z_over_d: f64) -> Result<RunConfig> {
        let d = match self.sweep.as_ref().and_then(|s| s.spacing) {
            Some(d) => d,
            None => {
                let a1 = self.lattice()?.a1();
                (a1[0] * a1[0] + a1[1] * a1[1]).sqrt()
            }
        };
        let mut out = self.clone();
        out.traps[0].position[2] = z_over_d * d;
        Ok(out)
    }
}
