//! Run configuration: JSON file plus `--set key=value` overrides, validated
//! against a closed schema before any computation.

use serde::{Deserialize, Serialize};
use serde_json::Value;

use kbl_core::cases::parse_override;
use kbl_core::krylov::Thresholds;
use kbl_core::linalg::{c, real, Matrix, C64};
use kbl_core::operators::{volterra_matrix, grid};
use kbl_core::spaces::SpaceConfig;
use kbl_core::spectral::ContourSpec;
use kbl_core::{KblError, Operator, Result, VolterraRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    /// Real diagonal entries, or `[re, im]` pairs.
    Diagonal { entries: Vec<Scalar> },
    /// `diag(1/√n)`
    InvSqrt { dim: usize },
    /// `diag(1/n)`
    Harmonic { dim: usize },
    Shift { offset: usize, dim: usize },
    Volterra { dim: usize, #[serde(default)] rule: VolterraRule },
    /// Row-major real matrix with an optional eigenvalue oracle.
    Dense { rows: Vec<Vec<Scalar>>, #[serde(default)] eigenvalues: Option<Vec<Scalar>> },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Real(f64),
    Complex([f64; 2]),
}

impl Scalar {
    pub fn value(self) -> C64 {
        match self {
            Scalar::Real(x) => real(x),
            Scalar::Complex([re, im]) => c(re, im),
        }
    }
}

impl OperatorSpec {
    pub fn build(&self) -> Result<Operator> {
        match self {
            OperatorSpec::Diagonal { entries } => {
                if entries.is_empty() {
                    return Err(KblError::Config("diagonal operator needs at least one entry".into()));
                }
                Ok(Operator::diagonal(entries.iter().map(|s| s.value()).collect()))
            }
            OperatorSpec::InvSqrt { dim } => {
                Ok(Operator::diagonal((1..=*dim).map(|k| real(1.0 / (k as f64).sqrt())).collect()))
            }
            OperatorSpec::Harmonic { dim } => Ok(Operator::diagonal((1..=*dim).map(|k| real(1.0 / k as f64)).collect())),
            OperatorSpec::Shift { offset, dim } => Operator::shift(*offset, *dim),
            OperatorSpec::Volterra { dim, rule } => volterra_matrix(*dim, *rule),
            OperatorSpec::Dense { rows, eigenvalues } => {
                let rows: Vec<Vec<C64>> = rows.iter().map(|r| r.iter().map(|s| s.value()).collect()).collect();
                let m = Matrix::from_rows(&rows)?;
                match eigenvalues {
                    Some(e) => Operator::dense_with_spectrum(m, &e.iter().map(|s| s.value()).collect::<Vec<_>>()),
                    None => Operator::dense(m),
                }
            }
        }
    }
}

/// Inline values or a named generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum VectorSpec {
    Values(Vec<Scalar>),
    Generator(GeneratorSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    /// `ones`, `inv_sqrt`, `harmonic`, `grid`, `evens` or `unit`.
    pub generator: String,
    /// 1-based index for `unit`.
    #[serde(default)]
    pub index: Option<usize>,
}

impl VectorSpec {
    pub fn build(&self, dim: usize) -> Result<Vec<C64>> {
        let v: Vec<C64> = match self {
            VectorSpec::Values(v) => v.iter().map(|s| s.value()).collect(),
            VectorSpec::Generator(g) => match g.generator.as_str() {
                "ones" => vec![real(1.0); dim],
                "inv_sqrt" => (1..=dim).map(|k| real(1.0 / (k as f64).sqrt())).collect(),
                "harmonic" => (1..=dim).map(|k| real(1.0 / k as f64)).collect(),
                "grid" => grid(dim).into_iter().map(real).collect(),
                "evens" => (1..=dim).map(|k| real(if k % 2 == 0 { 1.0 } else { 0.0 })).collect(),
                "unit" => {
                    let i = g.index.ok_or_else(|| KblError::Config("generator 'unit' needs an index".into()))?;
                    if i == 0 || i > dim {
                        return Err(KblError::Config(format!("unit index {i} outside 1..={dim}")));
                    }
                    kbl_core::linalg::unit_vector(dim, i - 1)
                }
                other => return Err(KblError::Config(format!("unknown vector generator '{other}'"))),
            },
        };
        if v.len() != dim {
            return Err(KblError::Config(format!("vector has {} entries, operator dimension is {dim}", v.len())));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolventSpec {
    /// Point `ζ′` where the resolvent is wanted; `[0, 0]` requests the inverse.
    pub target: [f64; 2],
    /// Start `ζ₀` beyond the spectral radius; chosen automatically when absent.
    #[serde(default)]
    pub start: Option<[f64; 2]>,
    #[serde(default)]
    pub waypoints: Vec<[f64; 2]>,
    #[serde(default = "default_eps")]
    pub eps: f64,
}

fn default_eps() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present, must name the subcommand being run.
    #[serde(default)]
    pub command: Option<String>,
    #[serde(default)]
    pub operator: Option<OperatorSpec>,
    #[serde(default)]
    pub space: Option<SpaceConfig>,
    #[serde(default)]
    pub f: Option<VectorSpec>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub thresholds: Option<Thresholds>,
    #[serde(default)]
    pub contours: Vec<ContourSpec>,
    #[serde(default)]
    pub resolvent: Option<ResolventSpec>,
    /// Output directory.
    #[serde(default)]
    pub output: Option<String>,
    #[serde(default)]
    pub seed: Option<u64>,
}

/// Sets a dotted path inside a JSON object, creating objects on the way.
pub fn set_path(root: &mut Value, path: &str, v: Value) -> Result<()> {
    let mut cur = root;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(KblError::Config(format!("bad override path '{path}'")));
        }
        let obj = match cur {
            Value::Object(o) => o,
            Value::Null => {
                *cur = Value::Object(Default::default());
                cur.as_object_mut().expect("just created")
            }
            _ => return Err(KblError::Config(format!("override path '{path}' crosses a non-object"))),
        };
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), v);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert(Value::Null);
    }
    Ok(())
}

impl RunConfig {
    /// Parses `text` (JSON), applies overrides, then validates the schema.
    pub fn load(text: &str, overrides: &[String]) -> Result<(RunConfig, Value)> {
        let mut raw: Value = serde_json::from_str(text).map_err(|e| KblError::Config(format!("config is not valid JSON: {e}")))?;
        if !raw.is_object() {
            return Err(KblError::Config("config must be a JSON object".into()));
        }
        for o in overrides {
            let (k, v) = parse_override(o)?;
            set_path(&mut raw, &k, v)?;
        }
        let cfg: RunConfig = serde_json::from_value(raw).map_err(|e| KblError::Config(format!("config schema: {e}")))?;
        let echo = serde_json::to_value(&cfg)?;
        Ok((cfg, echo))
    }

    pub fn expect_command(&self, name: &str) -> Result<()> {
        match &self.command {
            Some(c) if c != name => Err(KblError::Config(format!("config is for command '{c}', not '{name}'"))),
            _ => Ok(()),
        }
    }

    pub fn operator(&self) -> Result<Operator> {
        self.operator.as_ref().ok_or_else(|| KblError::Config("config needs an 'operator'".into()))?.build()
    }
}
