//! JSON run configuration and its translation into library objects.

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use tikhlav::{
    assemble_fredholm, assemble_poisson, AdmissibleSet, BoxBounds, DataModel, DomainGrid,
    GridFunction, KernelSpec, LavrentievSign, ObservationRegion, OperatorKind, StateConstraint,
};

use crate::CliError;

/// A number, `"inf"`/`"-inf"`, or `"nan"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    fn value(&self, field: &str) -> Result<f64, CliError> {
        match self {
            Scalar::Number(x) => Ok(*x),
            Scalar::Text(s) => s
                .trim()
                .parse::<f64>()
                .map_err(|_| CliError::Config(format!("{field}: cannot read {s:?} as a number"))),
        }
    }
}

/// Node values given as a constant, an explicit list, a file of
/// whitespace-separated numbers, or an indicator of a coordinate box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridValue {
    Constant(Scalar),
    Values(Vec<Scalar>),
    File {
        file: PathBuf,
    },
    Indicator {
        lower: Vec<f64>,
        upper: Vec<f64>,
        inside: f64,
        #[serde(default)]
        outside: f64,
    },
}

impl GridValue {
    /// Values at the given nodes of `grid`.
    fn resolve(
        &self,
        grid: &DomainGrid,
        nodes: &[usize],
        base: &Path,
        field: &str,
    ) -> Result<Vec<f64>, CliError> {
        let values = match self {
            GridValue::Constant(c) => vec![c.value(field)?; nodes.len()],
            GridValue::Values(v) => v.iter().map(|s| s.value(field)).collect::<Result<_, _>>()?,
            GridValue::File { file } => {
                let path = base.join(file);
                let text = fs::read_to_string(&path).map_err(|e| {
                    CliError::Config(format!("{field}: cannot read {}: {e}", path.display()))
                })?;
                text.split_whitespace()
                    .map(|t| {
                        t.parse::<f64>().map_err(|_| {
                            CliError::Config(format!(
                                "{field}: bad number {t:?} in {}",
                                path.display()
                            ))
                        })
                    })
                    .collect::<Result<_, _>>()?
            }
            GridValue::Indicator {
                lower,
                upper,
                inside,
                outside,
            } => {
                if lower.len() != grid.dim() || upper.len() != grid.dim() {
                    return Err(CliError::Config(format!(
                        "{field}: box needs {} coordinates per corner",
                        grid.dim()
                    )));
                }
                nodes
                    .iter()
                    .map(|&i| {
                        let x = grid.coords(i);
                        let hit = (0..grid.dim()).all(|k| x[k] >= lower[k] && x[k] <= upper[k]);
                        if hit {
                            *inside
                        } else {
                            *outside
                        }
                    })
                    .collect()
            }
        };
        if values.len() != nodes.len() {
            return Err(CliError::Config(format!(
                "{field}: expected {} values, found {}",
                nodes.len(),
                values.len()
            )));
        }
        Ok(values)
    }

    pub(crate) fn on_grid(
        &self,
        grid: &DomainGrid,
        base: &Path,
        field: &str,
    ) -> Result<GridFunction, CliError> {
        let nodes: Vec<usize> = (0..grid.len()).collect();
        let v = self.resolve(grid, &nodes, base, field)?;
        Ok(GridFunction::new(*grid, v)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub kind: OperatorKind,
    pub d: usize,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetSpec {
    /// upper bound `b`; unbounded when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<GridValue>,
    /// state bound on the region nodes; no state constraint when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub psi: Option<GridValue>,
    /// the whole grid when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<RegionSpec>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub sign: LavrentievSign,
    /// Slater point used to cap `λ` for the plus sign; zero when absent
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slater_point: Option<GridValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Attainable,
    Random { norm: f64, seed: Option<u64> },
    RangeOrthogonal { norm: f64, seed: Option<u64> },
    Given { residual: GridValue },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DataSpec {
    Manufactured {
        w: GridValue,
        model: ModelSpec,
    },
    /// observed data only; no exact solution is known
    File {
        y_d: GridValue,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ExperimentSpec {
    SweepAlpha {
        alphas: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope_range: Option<[f64; 2]>,
    },
    Activity {
        alphas: Vec<f64>,
        /// instance margin when absent
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tau: Option<f64>,
    },
    Noise {
        deltas: Vec<f64>,
        #[serde(default = "default_rule_c")]
        c: f64,
        #[serde(default = "default_rule_s")]
        s: f64,
        /// require all constraints inactive at the smallest `δ`
        #[serde(default)]
        expect_inactive: bool,
    },
    Lavrentiev {
        alpha: f64,
        lambdas: Vec<f64>,
        #[serde(default)]
        sign: LavrentievSign,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        u_hat: Option<GridValue>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_c_ratio: Option<f64>,
        #[serde(default)]
        expect_coincidence: bool,
    },
    TotalError {
        alphas: Vec<f64>,
        /// `λ = min(lambda_cap, α)`; `λ = α` when absent
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lambda_cap: Option<f64>,
        #[serde(default)]
        sign: LavrentievSign,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        slope_range: Option<[f64; 2]>,
    },
    Continuity {
        pairs: Vec<[f64; 2]>,
    },
}

fn default_rule_c() -> f64 {
    1.0
}

fn default_rule_s() -> f64 {
    2.0 / 3.0
}

impl ExperimentSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            ExperimentSpec::SweepAlpha { .. } => "sweep-alpha",
            ExperimentSpec::Activity { .. } => "activity",
            ExperimentSpec::Noise { .. } => "noise",
            ExperimentSpec::Lavrentiev { .. } => "lavrentiev",
            ExperimentSpec::TotalError { .. } => "total-error",
            ExperimentSpec::Continuity { .. } => "continuity",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub operator: OperatorSpec,
    pub set: SetSpec,
    pub data: DataSpec,
    /// Tikhonov parameter for `solve`
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub experiments: Vec<ExperimentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// fill the `seconds` CSV column with wall time
    #[serde(default)]
    pub record_timing: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
}

/// Library objects built from a validated configuration.
pub struct Resolved {
    pub grid: DomainGrid,
    pub set: AdmissibleSet,
    pub slater_point: GridFunction,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("config: cannot read {}: {e}", path.display()))
        })?;
        Self::parse(&text)
    }

    /// Cross-checks that need no operator assembly.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.set.lambda >= 0.0) || !self.set.lambda.is_finite() {
            return bad(format!(
                "set.lambda must be finite and >= 0, got {}",
                self.set.lambda
            ));
        }
        if let Some(a) = self.alpha {
            if !(a > 0.0) || !a.is_finite() {
                return bad(format!("alpha must be positive, got {a}"));
            }
        }
        if let Some(t) = self.tol {
            if !(t > 0.0) {
                return bad(format!("tol must be positive, got {t}"));
            }
        }
        let positive = |name: &str, v: &[f64]| -> Result<(), CliError> {
            if v.is_empty() {
                return Err(CliError::Config(format!("{name} must not be empty")));
            }
            match v.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
                Some(x) => Err(CliError::Config(format!(
                    "{name} must be positive, got {x}"
                ))),
                None => Ok(()),
            }
        };
        for (k, e) in self.experiments.iter().enumerate() {
            let field = |f: &str| format!("experiments[{k}].{f}");
            match e {
                ExperimentSpec::SweepAlpha { alphas, .. }
                | ExperimentSpec::Activity { alphas, .. } => positive(&field("alphas"), alphas)?,
                ExperimentSpec::TotalError {
                    alphas, lambda_cap, ..
                } => {
                    positive(&field("alphas"), alphas)?;
                    if let Some(c) = lambda_cap {
                        if !(*c >= 0.0) {
                            return bad(format!("{} must be >= 0", field("lambda_cap")));
                        }
                    }
                }
                ExperimentSpec::Noise { deltas, .. } => {
                    if deltas.is_empty() || deltas.iter().any(|d| !(*d >= 0.0) || !d.is_finite()) {
                        return bad(format!(
                            "{} must be a nonempty list of values >= 0",
                            field("deltas")
                        ));
                    }
                }
                ExperimentSpec::Lavrentiev { alpha, lambdas, .. } => {
                    positive(&field("alpha"), &[*alpha])?;
                    if lambdas.is_empty() || lambdas.iter().any(|l| !(*l >= 0.0) || !l.is_finite())
                    {
                        return bad(format!(
                            "{} must be a nonempty list of values >= 0",
                            field("lambdas")
                        ));
                    }
                }
                ExperimentSpec::Continuity { pairs } => {
                    let flat: Vec<f64> = pairs.iter().flatten().copied().collect();
                    positive(&field("pairs"), &flat)?
                }
            }
        }
        Ok(())
    }

    /// Builds the grid, operator and admissible set; `base` anchors relative file paths.
    pub fn resolve(&self, base: &Path) -> Result<Resolved, CliError> {
        let op = &self.operator;
        let grid =
            DomainGrid::new(op.d, op.n).map_err(|e| CliError::Config(format!("operator: {e}")))?;
        let assembled = match op.kind {
            OperatorKind::Poisson => {
                if op.kernel.is_some() {
                    return Err(CliError::Config(
                        "operator.kernel is only used by the fredholm kind".into(),
                    ));
                }
                assemble_poisson(&grid)?
            }
            OperatorKind::Fredholm => {
                let k = op.kernel.ok_or_else(|| {
                    CliError::Config("operator.kernel is required for the fredholm kind".into())
                })?;
                assemble_fredholm(&grid, k)
                    .map_err(|e| CliError::Config(format!("operator.kernel: {e}")))?
            }
        };
        let bounds = match &self.set.b {
            None => BoxBounds::unbounded(&grid),
            Some(b) => BoxBounds::new(b.on_grid(&grid, base, "set.b")?)
                .map_err(|e| CliError::Config(format!("set.b: {e}")))?,
        };
        let region = match &self.set.region {
            None => ObservationRegion::all(&grid),
            Some(r) => ObservationRegion::from_box(&grid, &r.lower, &r.upper)
                .map_err(|e| CliError::Config(format!("set.region: {e}")))?,
        };
        let state = match &self.set.psi {
            None => StateConstraint::inactive(&grid),
            Some(psi) => {
                let values = psi.resolve(&grid, region.indices(), base, "set.psi")?;
                StateConstraint::new(region, values, self.set.lambda, self.set.sign)
                    .map_err(|e| CliError::Config(format!("set.psi: {e}")))?
            }
        };
        let set = AdmissibleSet::new(Arc::new(assembled), bounds, state)?;
        let slater_point = match &self.set.slater_point {
            None => grid.zeros(),
            Some(v) => v.on_grid(&grid, base, "set.slater_point")?,
        };
        Ok(Resolved {
            grid,
            set,
            slater_point,
        })
    }

    /// Source element and data model of a manufactured instance.
    pub fn manufactured(
        &self,
        grid: &DomainGrid,
        base: &Path,
    ) -> Result<(GridFunction, DataModel), CliError> {
        let DataSpec::Manufactured { w, model } = &self.data else {
            return Err(CliError::Config(
                "data: a manufactured instance is required".into(),
            ));
        };
        let w = w.on_grid(grid, base, "data.w")?;
        let seed = |s: &Option<u64>| self.seed.or(*s).unwrap_or(0);
        let model = match model {
            ModelSpec::Attainable => DataModel::Attainable,
            ModelSpec::Random { norm, seed: s } => DataModel::Random {
                norm: *norm,
                seed: seed(s),
            },
            ModelSpec::RangeOrthogonal { norm, seed: s } => DataModel::RangeOrthogonal {
                norm: *norm,
                seed: seed(s),
            },
            ModelSpec::Given { residual } => DataModel::Given {
                residual: residual
                    .on_grid(grid, base, "data.model.residual")?
                    .into_values(),
            },
        };
        Ok((w, model))
    }

    pub fn observed(
        &self,
        grid: &DomainGrid,
        base: &Path,
    ) -> Result<Option<GridFunction>, CliError> {
        match &self.data {
            DataSpec::File { y_d } => Ok(Some(y_d.on_grid(grid, base, "data.y_d")?)),
            DataSpec::Manufactured { .. } => Ok(None),
        }
    }
}
