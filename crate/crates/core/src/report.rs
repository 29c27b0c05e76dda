//! Report rows and number formatting shared by the CLI and examples.

/// Serializers writing every float with 17 significant digits.
///
/// Non-finite values become `null`.
pub mod sig17 {
    use serde::ser::{SerializeSeq, Serializer};
    use serde::Serialize;

    /// A float that serializes with 17 significant digits.
    #[derive(Debug, Clone, Copy, PartialEq)]
    pub struct F17(pub f64);

    impl Serialize for F17 {
        fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
            if !self.0.is_finite() {
                return s.serialize_none();
            }
            let text = format!("{:.16e}", self.0);
            let num: serde_json::Number = text.parse().map_err(serde::ser::Error::custom)?;
            num.serialize(s)
        }
    }

    pub fn format(x: f64) -> String {
        if x.is_finite() {
            format!("{x:.16e}")
        } else {
            String::new()
        }
    }

    pub fn scalar<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        F17(*x).serialize(s)
    }

    pub fn opt_scalar<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => F17(*v).serialize(s),
            None => s.serialize_none(),
        }
    }

    pub fn vec<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(v.len()))?;
        for x in v {
            seq.serialize_element(&F17(*x))?;
        }
        seq.end()
    }

    pub fn opt_vec<S: Serializer>(v: &Option<Vec<f64>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(v) => vec(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn matrix<S: Serializer>(m: &[Vec<f64>], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(m.len()))?;
        for row in m {
            let row: Vec<F17> = row.iter().map(|x| F17(*x)).collect();
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}


use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::catalog::{envelope, Algorithm, Certificate};
use crate::certificates::{verify_func_identity, verify_grad_identity, IdentityReport, Metric};
use crate::error::{invalid, Error, Result};
use crate::lift::{
    check_func_feasibility, check_grad_feasibility, lift_func, lift_grad_with_xi,
    verify_composite_func_identity, verify_composite_grad_identity, XiChoice, LAPLACIAN_TOL,
};
use crate::problems::{make_problem, make_problem_cached, ProblemKind, ProblemSpec, ProxProblem};
use sig17::F17;

/// Relative coefficient mismatch of an identity check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub quad: F17,
    #[serde(rename = "linF")]
    pub lin_f: F17,
    #[serde(rename = "linH")]
    pub lin_h: F17,
}

impl From<&IdentityReport> for ResidualSummary {
    fn from(r: &IdentityReport) -> Self {
        Self {
            quad: F17(r.residuals.quad),
            lin_f: F17(r.residuals.lin_f),
            lin_h: F17(r.residuals.lin_h),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Certify,
    Lift,
}

/// One verification result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub algorithm: Algorithm,
    pub n: usize,
    /// Level for the silver and GSW families.
    pub k: Option<usize>,
    pub metric: Metric,
    pub stage: Stage,
    pub residuals: ResidualSummary,
    #[serde(serialize_with = "sig17::scalar")]
    pub tol: f64,
    /// Smallest multiplier (`lambda` when certifying, `mu` when lifting).
    #[serde(serialize_with = "sig17::scalar")]
    pub min_mu: f64,
    #[serde(rename = "min_eig_S", serialize_with = "sig17::opt_scalar")]
    pub min_eig_s: Option<f64>,
    /// Laplacian (function value) or diagonal dominance (gradient) evidence.
    pub laplacian_ok: Option<bool>,
    #[serde(serialize_with = "sig17::opt_scalar")]
    pub xi: Option<f64>,
    #[serde(serialize_with = "sig17::opt_scalar")]
    pub pseudo_xi: Option<f64>,
    #[serde(serialize_with = "sig17::scalar")]
    pub rate: f64,
    #[serde(serialize_with = "sig17::opt_scalar")]
    pub paper_rate: Option<f64>,
    /// Worst `observed / bound` over sampled instances.
    #[serde(serialize_with = "sig17::opt_scalar")]
    pub observed_ratio: Option<f64>,
    #[serde(serialize_with = "sig17::scalar")]
    pub runtime_ms: f64,
    pub pass: bool,
}

impl ReportRow {
    pub fn max_residual(&self) -> f64 {
        self.residuals.quad.0.max(self.residuals.lin_f.0).max(self.residuals.lin_h.0)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Choice of `xi` on the command line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiMode {
    Default,
    Pseudo,
    Value(f64),
}

impl FromStr for XiMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "paper" | "default" => Ok(XiMode::Default),
            "pseudo" => Ok(XiMode::Pseudo),
            other => {
                let v: f64 = other
                    .parse()
                    .map_err(|_| invalid(format!("xi must be 'paper', 'pseudo' or a number, got '{other}'")))?;
                if !(v > 0.0) || !v.is_finite() {
                    return Err(invalid(format!("xi must be positive, got {v}")));
                }
                Ok(XiMode::Value(v))
            }
        }
    }
}

fn size_fields(algo: Algorithm, size: usize) -> Result<(usize, Option<usize>)> {
    let n = algo.steps(size)?;
    Ok((n, algo.uses_level().then_some(size)))
}

/// Checks the unconstrained identity and the multiplier invariants.
pub fn certify_cell(algo: Algorithm, size: usize) -> Result<ReportRow> {
    let start = Instant::now();
    let (n, k) = size_fields(algo, size)?;
    let h = algo.stepsize_matrix(size)?;
    let tol = crate::global_tol();
    let (id, inv, rate) = match algo.certificate(size)? {
        Certificate::Func(c) => (verify_func_identity(&h, &c)?, c.invariants(), c.unconstrained_rate()),
        Certificate::Grad(c) => (verify_grad_identity(&h, &c)?, c.invariants(), c.unconstrained_rate()),
    };
    Ok(ReportRow {
        algorithm: algo,
        n,
        k,
        metric: algo.metric(),
        stage: Stage::Certify,
        residuals: (&id).into(),
        tol,
        min_mu: inv.min_entry,
        min_eig_s: None,
        laplacian_ok: None,
        xi: None,
        pseudo_xi: None,
        rate,
        paper_rate: None,
        observed_ratio: None,
        runtime_ms: start.elapsed().as_secs_f64() * 1e3,
        pass: id.pass && inv.passes(tol),
    })
}

/// Lifts the certificate, checks feasibility and the composite identity.
///
/// With `XiMode::Pseudo` the Schur-complement Laplacian test is reported but
/// not required; the eigenvalue test still is.
pub fn lift_cell(algo: Algorithm, size: usize, xi: XiMode) -> Result<ReportRow> {
    let start = Instant::now();
    let (n, k) = size_fields(algo, size)?;
    let h = algo.stepsize_matrix(size)?;
    let paper_rate = Some(algo.closed_form_rate(size)?);
    let mut row = match algo.certificate(size)? {
        Certificate::Func(c) => {
            let choice = match xi {
                XiMode::Default => XiChoice::Value(algo.default_xi(size)?),
                XiMode::Value(v) => XiChoice::Value(v),
                XiMode::Pseudo => XiChoice::Pseudoinverse,
            };
            let lift = lift_func(&h, &c, choice)?;
            let feas = check_func_feasibility(&lift, lift.xi)?;
            let id = verify_composite_func_identity(&h, &c, &lift)?;
            let laplacian_ok = feas.l_laplacian.passes(LAPLACIAN_TOL) && feas.schur_ok;
            let feasible = match xi {
                XiMode::Pseudo => feas.mu_ok && feas.psd_ok,
                _ => feas.pass,
            };
            ReportRow {
                algorithm: algo,
                n,
                k,
                metric: Metric::Func,
                stage: Stage::Lift,
                residuals: (&id).into(),
                tol: id.tol,
                min_mu: feas.min_mu,
                min_eig_s: Some(feas.min_eig_s),
                laplacian_ok: Some(laplacian_ok),
                xi: Some(lift.xi),
                pseudo_xi: Some(lift.pseudo_xi),
                rate: lift.rate(),
                paper_rate,
                observed_ratio: None,
                runtime_ms: 0.0,
                pass: id.pass && feasible,
            }
        }
        Certificate::Grad(c) => {
            let value = match xi {
                XiMode::Default => algo.default_xi(size)?,
                XiMode::Value(v) => v,
                XiMode::Pseudo => {
                    return Err(invalid("--xi pseudo applies to the func metric only"));
                }
            };
            let lift = lift_grad_with_xi(&h, &c, value)?;
            let feas = check_grad_feasibility(&lift);
            let id = verify_composite_grad_identity(&h, &c, &lift)?;
            ReportRow {
                algorithm: algo,
                n,
                k,
                metric: Metric::Grad,
                stage: Stage::Lift,
                residuals: (&id).into(),
                tol: id.tol,
                min_mu: feas.min_mu,
                min_eig_s: Some(feas.min_eig_s),
                laplacian_ok: Some(feas.dominance_ok),
                xi: Some(lift.xi),
                pseudo_xi: None,
                rate: lift.rate(),
                paper_rate,
                observed_ratio: None,
                runtime_ms: 0.0,
                pass: id.pass && feas.pass,
            }
        }
    };
    row.runtime_ms = start.elapsed().as_secs_f64() * 1e3;
    Ok(row)
}

/// A sampled problem with its starting point.
#[derive(Debug, Clone)]
pub struct Instance {
    pub spec: ProblemSpec,
    pub problem: ProxProblem,
    pub x0: DVector<f64>,
}

impl Instance {
    pub fn new(spec: ProblemSpec, cache_dir: Option<&Path>) -> Result<Self> {
        let problem = match cache_dir {
            Some(dir) => make_problem_cached(&spec, dir)?,
            None => make_problem(&spec)?,
        };
        let x0 = spec.starting_point(problem.dim());
        Ok(Self { spec, problem, x0 })
    }
}

/// Worst `observed / bound` of the certified rate over the instances.
pub fn observed_ratio(algo: Algorithm, size: usize, rate: f64, instances: &[Instance]) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for inst in instances {
        let trace = algo.run(&inst.problem, size, &inst.x0)?;
        worst = worst.max(envelope(algo.metric(), rate, &trace, &inst.problem)?.ratio());
    }
    Ok(worst)
}

fn default_kinds() -> Vec<ProblemKind> {
    vec![ProblemKind::Lasso, ProblemKind::BoxQp]
}
fn default_count() -> usize {
    5
}
fn default_rows() -> usize {
    30
}
fn default_cols() -> usize {
    15
}

/// Sampled instances attached to a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    #[serde(default = "default_kinds")]
    pub kinds: Vec<ProblemKind>,
    /// Instances per kind.
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_rows")]
    pub rows: usize,
    #[serde(default = "default_cols")]
    pub cols: usize,
    #[serde(default)]
    pub seed: u64,
}

impl InstanceConfig {
    pub fn specs(&self) -> Vec<ProblemSpec> {
        let mut out = Vec::new();
        for kind in &self.kinds {
            for i in 0..self.count {
                out.push(ProblemSpec::new(*kind, self.rows, self.cols, self.seed + i as u64));
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCell {
    pub algorithm: String,
    /// `k` for silver and GSW, `n` for OGM and OGM-G.
    pub sizes: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub cells: Vec<SweepCell>,
    /// `"paper"` (default), `"pseudo"` or a number.
    #[serde(default)]
    pub xi: Option<String>,
    #[serde(default)]
    pub instances: Option<InstanceConfig>,
    #[serde(default)]
    pub cache_dir: Option<std::path::PathBuf>,
}

impl SweepConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    /// The grid as `(algorithm, size)` pairs, validating names first.
    pub fn grid(&self) -> Result<Vec<(Algorithm, usize)>> {
        let mut out = Vec::new();
        for cell in &self.cells {
            let algo: Algorithm = cell.algorithm.parse()?;
            for &size in &cell.sizes {
                algo.steps(size)?;
                out.push((algo, size));
            }
        }
        Ok(out)
    }
}

/// Certification and lift results for one grid cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellReport {
    pub certify: ReportRow,
    pub lift: ReportRow,
}

impl CellReport {
    pub fn pass(&self) -> bool {
        self.certify.pass && self.lift.pass && self.lift.observed_ratio.is_none_or(|r| r <= 1.0 + 1e-9)
    }

    pub fn file_name(&self) -> String {
        let size = self.certify.k.unwrap_or(self.certify.n);
        let tag = if self.certify.k.is_some() { "k" } else { "n" };
        format!("{}_{tag}{size}.json", self.certify.algorithm)
    }
}

pub fn evaluate_cell(algo: Algorithm, size: usize, xi: XiMode, instances: &[Instance]) -> Result<CellReport> {
    let certify = certify_cell(algo, size)?;
    let mut lift = lift_cell(algo, size, xi)?;
    if !instances.is_empty() {
        let start = Instant::now();
        lift.observed_ratio = Some(observed_ratio(algo, size, lift.rate, instances)?);
        lift.runtime_ms += start.elapsed().as_secs_f64() * 1e3;
    }
    Ok(CellReport { certify, lift })
}

pub const SUMMARY_HEADER: &str = "algorithm,metric,n,k,unconstrained_rate,certified_rate,paper_rate,xi,max_residual,feasible,observed_ratio,runtime_ms,pass";

/// Roll-up CSV: one line per cell.
pub fn summary_csv(cells: &[CellReport]) -> String {
    let mut out = String::from(SUMMARY_HEADER);
    out.push('\n');
    for c in cells {
        let opt = |x: Option<f64>| x.map(sig17::format).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{:.3},{}\n",
            c.certify.algorithm,
            c.certify.metric,
            c.certify.n,
            c.certify.k.map(|k| k.to_string()).unwrap_or_default(),
            sig17::format(c.certify.rate),
            sig17::format(c.lift.rate),
            opt(c.lift.paper_rate),
            opt(c.lift.xi),
            sig17::format(c.certify.max_residual().max(c.lift.max_residual())),
            c.lift.pass,
            opt(c.lift.observed_ratio),
            c.certify.runtime_ms + c.lift.runtime_ms,
            c.pass(),
        ));
    }
    out
}

/// Runs every cell with at most `jobs` worker threads and writes one JSON
/// file per cell plus `summary.csv` into `out`.
pub fn run_sweep(config: &SweepConfig, out: &Path, jobs: usize) -> Result<Vec<CellReport>> {
    let grid = config.grid()?;
    let xi = match &config.xi {
        Some(s) => s.parse()?,
        None => XiMode::Default,
    };
    if grid.is_empty() {
        return Ok(Vec::new());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let cells = pool.install(|| -> Result<Vec<CellReport>> {
        let instances = match &config.instances {
            Some(ic) => ic
                .specs()
                .into_par_iter()
                .map(|s| Instance::new(s, config.cache_dir.as_deref()))
                .collect::<Result<Vec<_>>>()?,
            None => Vec::new(),
        };
        grid.par_iter().map(|(a, s)| evaluate_cell(*a, *s, xi, &instances)).collect()
    })?;
    std::fs::create_dir_all(out)?;
    for c in &cells {
        std::fs::write(out.join(c.file_name()), serde_json::to_string_pretty(c)?)?;
    }
    std::fs::write(out.join("summary.csv"), summary_csv(&cells))?;
    Ok(cells)
}

#[cfg(test)]
mod tests {

    use super::*;

    #[test]
    fn row_schema_keys() {
        let row = lift_cell(Algorithm::Silver, 2, XiMode::Default).unwrap();
        let v: serde_json::Value = serde_json::from_str(&row.to_json().unwrap()).unwrap();
        for key in ["algorithm", "n", "metric", "residuals", "min_mu", "min_eig_S", "laplacian_ok", "rate", "paper_rate", "pass"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
        for key in ["quad", "linF", "linH"] {
            assert!(v["residuals"].get(key).is_some());
        }
        assert!(row.pass);
    }

    #[test]
    fn xi_parsing() {
        assert_eq!("paper".parse::<XiMode>().unwrap(), XiMode::Default);
        assert_eq!("0.5".parse::<XiMode>().unwrap(), XiMode::Value(0.5));
        assert!("-1".parse::<XiMode>().is_err());
        assert!("abc".parse::<XiMode>().is_err());
    }

    #[test]
    fn tiny_xi_fails_lift() {
        let row = lift_cell(Algorithm::Silver, 3, XiMode::Value(1e-6)).unwrap();
        assert!(!row.pass);
        assert_eq!(row.laplacian_ok, Some(false));
    }

    #[test]
    fn sweep_writes_reports() {
        let dir = tempfile::tempdir().unwrap();
        let config: SweepConfig = serde_json::from_str(
            r#"{"cells":[{"algorithm":"ogm","sizes":[1,3]},{"algorithm":"gsw","sizes":[2]}],
                "instances":{"count":2,"rows":8,"cols":4}}"#,
        )
        .unwrap();
        let cells = run_sweep(&config, dir.path(), 2).unwrap();
        assert_eq!(cells.len(), 3);
        assert!(cells.iter().all(|c| c.pass()));
        let csv = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
        assert_eq!(csv.lines().count(), 4);
        assert!(dir.path().join("gsw_k2.json").exists());
        assert!(run_sweep(&SweepConfig::default(), &dir.path().join("none"), 1).unwrap().is_empty());
        let bad: SweepConfig = serde_json::from_str(r#"{"cells":[{"algorithm":"heavyball","sizes":[1]}]}"#).unwrap();
        assert!(run_sweep(&bad, dir.path(), 1).unwrap_err().to_string().contains("silver"));
    }

    #[test]
    fn seventeen_digits() {
        let s = serde_json::to_string(&F17(std::f64::consts::SQRT_2)).unwrap();
        assert_eq!(s, "1.4142135623730951e+0");
        let back: f64 = serde_json::from_str(&s).unwrap();
        assert_eq!(back, std::f64::consts::SQRT_2);
        assert_eq!(serde_json::to_string(&F17(f64::NAN)).unwrap(), "null");
        let s = serde_json::to_string(&F17(0.1)).unwrap();
        assert_eq!(s, "1.0000000000000001e-1");
    }
}
