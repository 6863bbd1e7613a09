//! JSON system description and its conversion into core types.

use std::path::Path;

use pwaq_core::certify::{LyapunovFunction, LyapunovPiece};
use pwaq_core::linalg::{Mat, Vector};
use pwaq_core::model::{AffineController, Cell, InputPolytope, PwaSystem, UniformQuantizer};
use pwaq_core::optim::LpOptions;
use pwaq_core::polytope::HPolytope;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub type Rows = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyFile {
    #[serde(rename = "U")]
    pub u: Rows,
    pub v: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFile {
    #[serde(rename = "U")]
    pub u: Rows,
    pub v: Vec<f64>,
    #[serde(rename = "A")]
    pub a: Rows,
    #[serde(rename = "B")]
    pub b: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<Vec<f64>>,
    #[serde(rename = "D", default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Rows>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainFile {
    #[serde(rename = "K")]
    pub k: Rows,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PieceFile {
    #[serde(rename = "P")]
    pub p: Rows,
    /// `P` acts on `[x; 1]` when set.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub affine: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizerFile {
    pub delta: f64,
    #[serde(rename = "M")]
    pub range: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    #[serde(rename = "R")]
    pub r_mat: Rows,
    pub r: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemFile {
    pub state_dim: usize,
    pub input_dim: usize,
    pub disturbance_dim: usize,
    pub total_space: PolyFile,
    pub cells: Vec<CellFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<Vec<GainFile>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<Vec<PieceFile>>,
    pub quantizer: QuantizerFile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_polytope: Option<InputFile>,
}

/// Everything the commands need, validated.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub system: PwaSystem,
    pub controller: Option<AffineController>,
    pub lyapunov: Option<LyapunovFunction>,
    pub quantizer: UniformQuantizer,
    pub input: Option<InputPolytope>,
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::validation(msg)
}

pub fn to_mat(rows: &Rows, r: usize, c: usize, what: &str) -> Result<Mat, CliError> {
    if rows.is_empty() && (r == 0 || c == 0) {
        return Ok(Mat::zeros(r, c));
    }
    if rows.len() != r {
        return Err(invalid(format!("{what}: expected {r} rows, found {}", rows.len())));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != c {
            return Err(invalid(format!("{what}: row {} has {} entries, expected {c}", i + 1, row.len())));
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(invalid(format!("{what}: non-finite entry in row {}", i + 1)));
        }
    }
    Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Rows {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn to_vec(v: &[f64], n: usize, what: &str) -> Result<Vector, CliError> {
    if v.len() != n {
        return Err(invalid(format!("{what}: expected {n} entries, found {}", v.len())));
    }
    Ok(Vector::from_column_slice(v))
}

/// Rows of a polytope of unknown row count.
fn poly(p: &PolyFile, n: usize, what: &str) -> Result<HPolytope, CliError> {
    let u = to_mat(&p.u, p.u.len(), n, what)?;
    let v = to_vec(&p.v, p.u.len(), what)?;
    HPolytope::new(u, v).map_err(|e| invalid(format!("{what}: {e}")))
}

impl PolyFile {
    pub fn from_polytope(p: &HPolytope) -> Self {
        PolyFile { u: to_rows(p.u()), v: p.v().iter().copied().collect() }
    }

    pub fn load(path: &Path, n: usize) -> Result<HPolytope, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        let p: PolyFile = serde_json::from_str(&text).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        poly(&p, n, &path.display().to_string())
    }
}

impl SystemFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| invalid(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| invalid(format!("system file: {e}")))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("system file serializes");
        s.push('\n');
        s
    }

    pub fn load(&self, lp: &LpOptions) -> Result<Loaded, CliError> {
        let (n, m, nd) = (self.state_dim, self.input_dim, self.disturbance_dim);
        if n == 0 || m == 0 {
            return Err(invalid("state_dim and input_dim must be positive"));
        }
        let total = poly(&self.total_space, n, "total_space")?;
        let mut cells = Vec::with_capacity(self.cells.len());
        for (idx, c) in self.cells.iter().enumerate() {
            let ctx = |f: &str| format!("cells[{}].{f}", idx + 1);
            let region = poly(&PolyFile { u: c.u.clone(), v: c.v.clone() }, n, &ctx("U/v"))?;
            let a = to_mat(&c.a, n, n, &ctx("A"))?;
            let b = to_mat(&c.b, n, m, &ctx("B"))?;
            let f = match &c.f {
                Some(f) => to_vec(f, n, &ctx("f"))?,
                None => Vector::zeros(n),
            };
            let d = match &c.d {
                Some(d) => to_mat(d, n, nd, &ctx("D"))?,
                None => Mat::zeros(n, nd),
            };
            cells.push(Cell { region, a, b, f, d });
        }
        let system = PwaSystem::new(n, m, nd, total, cells).map_err(|e| invalid(format!("system: {e}")))?;
        let s = system.num_cells();
        let controller = match &self.controller {
            None => None,
            Some(gains) => {
                if gains.len() != s {
                    return Err(invalid(format!("controller: expected {s} gains, found {}", gains.len())));
                }
                let mut k = Vec::with_capacity(s);
                let mut g = Vec::with_capacity(s);
                for (i, gf) in gains.iter().enumerate() {
                    k.push(to_mat(&gf.k, m, n, &format!("controller[{}].K", i + 1))?);
                    g.push(match &gf.g {
                        Some(v) => to_vec(v, m, &format!("controller[{}].g", i + 1))?,
                        None => Vector::zeros(m),
                    });
                }
                let c = AffineController::new(k, g).map_err(|e| invalid(format!("controller: {e}")))?;
                c.validate(&system).map_err(|e| invalid(format!("controller: {e}")))?;
                Some(c)
            }
        };
        let lyapunov = match &self.lyapunov {
            None => None,
            Some(ps) => {
                if ps.len() != s {
                    return Err(invalid(format!("lyapunov: expected {s} pieces, found {}", ps.len())));
                }
                let mut pieces = Vec::with_capacity(s);
                for (i, pf) in ps.iter().enumerate() {
                    let d = if pf.affine { n + 1 } else { n };
                    let p = to_mat(&pf.p, d, d, &format!("lyapunov[{}].P", i + 1))?;
                    pieces.push(if pf.affine { LyapunovPiece::Affine(p) } else { LyapunovPiece::Quadratic(p) });
                }
                Some(LyapunovFunction { pieces })
            }
        };
        let quantizer = UniformQuantizer::new(self.quantizer.delta, self.quantizer.range)
            .map_err(|e| invalid(format!("quantizer: {e}")))?;
        let input = match &self.input_polytope {
            None => None,
            Some(ip) => {
                let r = to_mat(&ip.r_mat, ip.r_mat.len(), m, "input_polytope.R")?;
                let rv = to_vec(&ip.r, ip.r_mat.len(), "input_polytope.r")?;
                Some(InputPolytope::new(r, rv, lp).map_err(|e| invalid(format!("input_polytope: {e}")))?)
            }
        };
        Ok(Loaded { system, controller, lyapunov, quantizer, input })
    }

    pub fn set_controller(&mut self, c: &AffineController) {
        self.controller = Some(
            c.k.iter()
                .zip(&c.g)
                .map(|(k, g)| GainFile { k: to_rows(k), g: Some(g.iter().copied().collect()) })
                .collect(),
        );
    }

    pub fn set_lyapunov(&mut self, v: &LyapunovFunction) {
        self.lyapunov = Some(
            v.pieces
                .iter()
                .map(|p| match p {
                    LyapunovPiece::Quadratic(m) => PieceFile { p: to_rows(m), affine: false },
                    LyapunovPiece::Affine(m) => PieceFile { p: to_rows(m), affine: true },
                })
                .collect(),
        );
    }
}
