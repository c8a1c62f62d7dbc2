//! Declarative scenario format: model + generator + symmetry datum +
//! experiment, with matrices as nested arrays of [re, im] pairs.

use serde::{Deserialize, Serialize};

use bqms_core::error::{Error, Result};
use bqms_core::numerics::{self, CMatrix};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Spin { n: usize },
    Full { n: usize },
    Fermion { m: usize, a: Vec<f64>, beta: f64 },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GeneratorSpec {
    ExplicitMultiplier { lhat: Matrix },
    L0PlusL1 { l0: Matrix, l1: Matrix },
    Jumps { items: Vec<JumpSpec> },
    PaperExampleC4,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JumpSpec {
    pub omega: f64,
    pub v: Matrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaSpec {
    None,
    Modular { rho: Matrix },
    Explicit { delta_hat: Matrix },
    Solve,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ExperimentSpec {
    Classify,
    Poincare,
    Flow { grid: Vec<f64>, d0: Matrix },
    Lsi { grid: Vec<f64>, d0: Matrix, beta: Option<f64> },
    Talagrand { grid: Vec<f64>, d0: Matrix, beta: Option<f64> },
    Intertwine,
    Limit,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub herm: Option<f64>,
    pub eig_floor: Option<f64>,
    pub eq: Option<f64>,
    pub scale: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Scenario {
    pub model: ModelSpec,
    #[serde(default)]
    pub generator: Option<GeneratorSpec>,
    #[serde(default = "default_delta")]
    pub delta: DeltaSpec,
    pub experiment: ExperimentSpec,
    #[serde(default)]
    pub tolerances: ToleranceSpec,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_delta() -> DeltaSpec {
    DeltaSpec::None
}

fn default_seed() -> u64 {
    7
}

/// A complex matrix serialized as rows of [re, im] pairs.
pub type Matrix = Vec<Vec<[f64; 2]>>;

pub fn parse_matrix(m: &Matrix) -> Result<CMatrix> {
    let rows = m.len();
    if rows == 0 {
        return Err(Error::ShapeMismatch { expected: "nonempty matrix".into(), got: "0 rows".into() });
    }
    let cols = m[0].len();
    let mut entries = Vec::with_capacity(rows * cols);
    for row in m {
        if row.len() != cols {
            return Err(Error::ShapeMismatch {
                expected: format!("{cols} columns"),
                got: format!("{} columns", row.len()),
            });
        }
        for &[re, im] in row {
            entries.push(numerics::c(re, im));
        }
    }
    numerics::from_rows(rows, cols, &entries)
}

pub fn emit_matrix(m: &CMatrix) -> Matrix {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}
