//! Kernel specification files.
//!
//! ```json
//! {"q": 1, "family": "poisson", "params": {"rho": 0.5}}
//! {"q": 2, "family": "geometric", "params": {"rho": 0.25}}
//! {"q": 2, "family": "mode", "params": {"m": 1, "n": 1}}
//! {"q": 3, "family": "zero"}
//! {"q": 2, "coefficients": "kernel.json"}
//! ```
//!
//! A relative coefficient path is resolved against the spec file's directory.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use num_complex::Complex64;
use serde::Deserialize;
use serde_json::{Map, Value};
use zonal_core::spectral::{geometric_table, poisson_table};
use zonal_core::{CoefficientTable, SpectralIndex, ZonalKernel};

#[derive(Clone, Debug, PartialEq)]
pub enum Family {
    Poisson { rho: f64 },
    Geometric { rho: f64 },
    Mode(SpectralIndex),
    Zero,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Source {
    Family(Family),
    File { path: PathBuf, table: CoefficientTable },
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub q: usize,
    pub source: Source,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpec {
    #[serde(default)]
    version: Option<u32>,
    q: usize,
    #[serde(default)]
    family: Option<String>,
    #[serde(default)]
    params: Option<Map<String, Value>>,
    #[serde(default)]
    coefficients: Option<PathBuf>,
}

pub fn parse_kernel_spec(path: &Path) -> Result<KernelSpec> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_kernel_spec_str(&text, base).with_context(|| format!("kernel spec {}", path.display()))
}

pub fn parse_kernel_spec_str(text: &str, base: &Path) -> Result<KernelSpec> {
    let raw: RawSpec = serde_json::from_str(text)?;
    if let Some(v) = raw.version {
        if v != zonal_core::json::SCHEMA_VERSION {
            bail!("field \"version\": unsupported schema version {v}");
        }
    }
    if raw.q == 0 {
        bail!("field \"q\": must be at least 1");
    }
    let q = raw.q;
    let source = match (raw.family, raw.coefficients) {
        (Some(_), Some(_)) => bail!("fields \"family\" and \"coefficients\" are mutually exclusive"),
        (None, None) => bail!("one of the fields \"family\" or \"coefficients\" is required"),
        (None, Some(rel)) => {
            if raw.params.is_some() {
                bail!("field \"params\" only applies to families");
            }
            let path = if rel.is_absolute() { rel } else { base.join(rel) };
            let table = CoefficientTable::read(&path).with_context(|| format!("field \"coefficients\": {}", path.display()))?;
            if table.q() != q {
                bail!("field \"coefficients\": file has q = {} but the spec says q = {q}", table.q());
            }
            Source::File { path, table }
        }
        (Some(name), None) => Source::Family(parse_family(q, &name, raw.params.unwrap_or_default())?),
    };
    Ok(KernelSpec { q, source })
}

fn parse_family(q: usize, name: &str, params: Map<String, Value>) -> Result<Family> {
    let allow = |keys: &[&str]| -> Result<()> {
        match params.keys().find(|k| !keys.contains(&k.as_str())) {
            Some(k) => bail!("params.{k}: unknown parameter for family \"{name}\""),
            None => Ok(()),
        }
    };
    let rho = || -> Result<f64> {
        let rho = params
            .get("rho")
            .ok_or_else(|| anyhow!("params.rho: required for family \"{name}\""))?
            .as_f64()
            .ok_or_else(|| anyhow!("params.rho: must be a number"))?;
        if !(rho > 0.0 && rho < 1.0) {
            bail!("params.rho: must lie in (0, 1), got {rho}");
        }
        Ok(rho)
    };
    let uint = |key: &str| -> Result<u64> {
        params
            .get(key)
            .ok_or_else(|| anyhow!("params.{key}: required for family \"mode\""))?
            .as_u64()
            .ok_or_else(|| anyhow!("params.{key}: must be a nonnegative integer"))
    };
    match name {
        "poisson" => {
            allow(&["rho"])?;
            if q != 1 {
                bail!("family \"poisson\" requires q = 1, got q = {q}");
            }
            Ok(Family::Poisson { rho: rho()? })
        }
        "geometric" => {
            allow(&["rho"])?;
            if q < 2 {
                bail!("family \"geometric\" requires q >= 2, got q = {q}");
            }
            Ok(Family::Geometric { rho: rho()? })
        }
        "mode" if q == 1 => {
            allow(&["k"])?;
            let k = params
                .get("k")
                .ok_or_else(|| anyhow!("params.k: required for family \"mode\" with q = 1"))?
                .as_i64()
                .ok_or_else(|| anyhow!("params.k: must be an integer"))?;
            Ok(Family::Mode(SpectralIndex::circle(k)))
        }
        "mode" => {
            allow(&["m", "n"])?;
            let m = u32::try_from(uint("m")?).context("params.m: too large")?;
            let n = u32::try_from(uint("n")?).context("params.n: too large")?;
            Ok(Family::Mode(SpectralIndex::disc(m, n)))
        }
        "zero" => {
            allow(&[])?;
            Ok(Family::Zero)
        }
        other => bail!("field \"family\": unknown family \"{other}\" (expected poisson, geometric, mode or zero)"),
    }
}

impl KernelSpec {
    /// Evaluable kernel; families without a closed form are tables truncated
    /// at `degree`.
    pub fn kernel(&self, degree: usize) -> Result<ZonalKernel> {
        Ok(match &self.source {
            Source::Family(Family::Poisson { rho }) => ZonalKernel::poisson(*rho)?,
            _ => self.table(degree)?.into(),
        })
    }

    /// Coefficient table up to `degree`; files keep their own degree.
    pub fn table(&self, degree: usize) -> Result<CoefficientTable> {
        let q = self.q;
        Ok(match &self.source {
            Source::File { table, .. } => table.clone(),
            Source::Family(Family::Poisson { rho }) => poisson_table(*rho, degree)?,
            Source::Family(Family::Geometric { rho }) => geometric_table(q, *rho, degree)?,
            Source::Family(Family::Mode(idx)) => {
                CoefficientTable::new(q, degree.max(idx.max_degree()), [(*idx, Complex64::new(1.0, 0.0))])?
            }
            Source::Family(Family::Zero) => CoefficientTable::empty(q, degree),
        })
    }
}
