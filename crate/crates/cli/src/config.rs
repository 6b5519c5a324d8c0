//! Instance configuration files.
//!
//! A config is a TOML document. Times are in seconds and `nu` is in 1/s.
//! Matrices are written inline as
//! `{ rows = 2, cols = 2, data = [[re, im], ...] }` in row-major order, as
//! `{ diag = [..] }` for real diagonals, or as `{ scale = x }` for `x·I`.

use std::path::{Path, PathBuf};

use evoq_core::linalg::c;
use evoq_core::solver::Tolerances;
use evoq_core::transform::DEFAULT_PADDING;
use evoq_core::{CMatrix, CVector, C64};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    /// Seed for every random probe run on this instance.
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub nu: f64,
    pub grid: GridConfig,
    pub spatial: SpatialConfig,
    /// Material law for `kind = "matrix"`; the builders supply it otherwise.
    #[serde(default)]
    pub law: Option<LawConfig>,
    #[serde(default)]
    pub rhs: RhsConfig,
    #[serde(default)]
    pub control: Option<ControlConfig>,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

fn default_seed() -> u64 {
    20_240_601
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub n: usize,
    #[serde(default = "default_padding")]
    pub padding_fraction: f64,
}

fn default_padding() -> f64 {
    DEFAULT_PADDING
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialKind {
    Heat,
    Wave,
    Maxwell,
    Matrix,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialConfig {
    pub kind: SpatialKind,
    /// Number of interior unknowns of the stencil.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_dx")]
    pub dx: f64,
    /// Heat conductivity `a` (k×k).
    #[serde(default)]
    pub conductivity: Option<MatrixSpec>,
    /// Wave elasticity `T` ((k+1)×(k+1)).
    #[serde(default)]
    pub elasticity: Option<MatrixSpec>,
    /// Maxwell permittivity (k×k), permeability ((k+1)×(k+1)) and
    /// conductivity (k×k).
    #[serde(default)]
    pub epsilon: Option<MatrixSpec>,
    #[serde(default)]
    pub mu: Option<MatrixSpec>,
    #[serde(default)]
    pub sigma: Option<MatrixSpec>,
    /// Skew-selfadjoint operator for `kind = "matrix"`.
    #[serde(default)]
    pub a: Option<MatrixSpec>,
}

fn default_dx() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawConfig {
    /// `M_0, M_1, …` of `Σ z^{−k} M_k`.
    pub coeffs: Vec<MatrixSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixSpec {
    Dense {
        rows: usize,
        cols: usize,
        data: Vec<[f64; 2]>,
    },
    Diag {
        diag: Vec<f64>,
    },
    Scale {
        scale: f64,
    },
}

impl MatrixSpec {
    /// Materializes the matrix; `size` fixes the shape of `Diag`/`Scale` forms
    /// and is checked against `Dense` ones when given.
    pub fn to_matrix(&self, size: Option<(usize, usize)>) -> Result<CMatrix, String> {
        let m = match self {
            MatrixSpec::Dense { rows, cols, data } => {
                if data.len() != rows * cols {
                    return Err(format!(
                        "matrix declares {rows}x{cols} but lists {} entries",
                        data.len()
                    ));
                }
                let vals: Vec<C64> = data.iter().map(|[re, im]| C64::new(*re, *im)).collect();
                CMatrix::from_row_slice(*rows, *cols, &vals)
            }
            MatrixSpec::Diag { diag } => {
                CMatrix::from_diagonal(&CVector::from_iterator(diag.len(), diag.iter().map(|&x| c(x))))
            }
            MatrixSpec::Scale { scale } => {
                let (r, k) = size.ok_or("a scale matrix needs a known size")?;
                if r != k {
                    return Err(format!("a scale matrix must be square, requested {r}x{k}"));
                }
                CMatrix::identity(r, r) * c(*scale)
            }
        };
        if let Some((r, k)) = size {
            if m.nrows() != r || m.ncols() != k {
                return Err(format!("expected a {r}x{k} matrix, got {}x{}", m.nrows(), m.ncols()));
            }
        }
        if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err("matrix has non-finite entries".into());
        }
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsShape {
    /// `exp(−1/(1 − x²))` with `x = (t − center)/width`.
    Bump,
    /// `1` on `[start, end)`.
    Indicator,
    /// Unweighted samples read from `path`: columns `t, re_1..re_m, im_1..im_m`.
    Csv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RhsConfig {
    pub shape: RhsShape,
    #[serde(default)]
    pub center: f64,
    #[serde(default = "default_width")]
    pub width: f64,
    #[serde(default)]
    pub start: f64,
    #[serde(default)]
    pub end: f64,
    #[serde(default)]
    pub path: Option<PathBuf>,
    /// Spatial profile multiplying the scalar shape; defaults to all ones.
    #[serde(default)]
    pub profile: Option<Vec<[f64; 2]>>,
}

fn default_width() -> f64 {
    1.0
}

impl Default for RhsConfig {
    fn default() -> Self {
        Self {
            shape: RhsShape::Bump,
            center: 0.0,
            width: 1.0,
            start: 0.0,
            end: 0.0,
            path: None,
            profile: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum VariantName {
    Supported,
    Pointwise,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlConfig {
    /// `m×q` injection.
    pub b: MatrixSpec,
    #[serde(rename = "T")]
    pub horizon: f64,
    #[serde(default = "default_variant")]
    pub variant: VariantName,
    /// Initial state for the pointwise variant.
    #[serde(default)]
    pub u0: Option<Vec<[f64; 2]>>,
}

fn default_variant() -> VariantName {
    VariantName::Supported
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    pub algebraic: Option<f64>,
    pub pairing: Option<f64>,
    pub conjugation: Option<f64>,
    pub cross_method: Option<f64>,
    pub cross_nu: Option<f64>,
}

impl ToleranceOverrides {
    pub fn resolve(&self) -> Tolerances {
        let d = Tolerances::default();
        Tolerances {
            algebraic: self.algebraic.unwrap_or(d.algebraic),
            pairing: self.pairing.unwrap_or(d.pairing),
            conjugation: self.conjugation.unwrap_or(d.conjugation),
            cross_method: self.cross_method.unwrap_or(d.cross_method),
            cross_nu: self.cross_nu.unwrap_or(d.cross_nu),
        }
    }
}

/// A parsed config together with the directory relative paths refer to.
#[derive(Clone, Debug)]
pub struct LoadedConfig {
    pub config: InstanceConfig,
    pub base_dir: PathBuf,
}

pub fn parse_config(text: &str, base_dir: &Path) -> Result<LoadedConfig, String> {
    let config: InstanceConfig = toml::from_str(text).map_err(|e| e.to_string())?;
    Ok(LoadedConfig {
        config,
        base_dir: base_dir.to_path_buf(),
    })
}

pub fn complex_vector(v: &[[f64; 2]]) -> CVector {
    CVector::from_iterator(v.len(), v.iter().map(|[re, im]| C64::new(*re, *im)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(text: &str) -> MatrixSpec {
        #[derive(Deserialize)]
        struct Wrap {
            m: MatrixSpec,
        }
        toml::from_str::<Wrap>(&format!("m = {text}")).unwrap().m
    }

    #[test]
    fn matrix_forms_parse_row_major() {
        let d = spec("{ rows = 2, cols = 2, data = [[1, 0], [0, 2], [3, 0], [0, -4]] }");
        let m = d.to_matrix(None).unwrap();
        assert_eq!(m[(0, 1)], C64::new(0.0, 2.0));
        assert_eq!(m[(1, 0)], C64::new(3.0, 0.0));
        assert_eq!(spec("{ diag = [1, 2, 3] }").to_matrix(None).unwrap()[(2, 2)], c(3.0));
        let s = spec("{ scale = 0.5 }").to_matrix(Some((3, 3))).unwrap();
        assert_eq!(s, CMatrix::identity(3, 3) * c(0.5));
    }

    #[test]
    fn matrix_shape_errors_are_reported() {
        let short = spec("{ rows = 2, cols = 2, data = [[1, 0]] }");
        assert!(short.to_matrix(None).unwrap_err().contains("lists 1 entries"));
        assert!(spec("{ scale = 1 }").to_matrix(None).is_err());
        assert!(spec("{ scale = 1 }").to_matrix(Some((2, 3))).is_err());
        assert!(spec("{ diag = [1, 2] }").to_matrix(Some((3, 3))).is_err());
    }

    #[test]
    fn bundled_defaults_fill_in() {
        let text = "nu = 1.0\n[grid]\nt_min = -1.0\nt_max = 1.0\nn = 8\n[spatial]\nkind = \"heat\"\nk = 2\n";
        let cfg = parse_config(text, Path::new(".")).unwrap().config;
        assert_eq!(cfg.grid.padding_fraction, 0.25);
        assert_eq!(cfg.rhs.shape, RhsShape::Bump);
        assert!(cfg.control.is_none());
        assert!(parse_config(&format!("{text}bogus = 1\n"), Path::new(".")).is_err());
    }
}
