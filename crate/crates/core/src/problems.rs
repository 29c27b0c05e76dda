//! Composite test instances `F = f + h` with exact oracles.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{invalid, Error, Result};

/// Smooth convex part `f`.
#[derive(Debug, Clone, PartialEq)]
pub enum SmoothPart {
    /// `1/2 |A x - b|^2`.
    LeastSquares { a: DMatrix<f64>, b: DVector<f64> },
    /// `sum_i huber_delta((A x - b)_i)`.
    Huber { a: DMatrix<f64>, b: DVector<f64>, delta: f64 },
    /// `sum_i log(1 + exp(-y_i (A x)_i))` with labels `y_i = +-1`.
    Logistic { a: DMatrix<f64>, y: DVector<f64> },
}

/// Prox-friendly part `h`.
#[derive(Debug, Clone, PartialEq)]
pub enum ProxPart {
    Zero,
    /// `tau |x|_1`.
    L1 { tau: f64 },
    /// Indicator of `lo <= x <= hi`.
    Box { lo: DVector<f64>, hi: DVector<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProxProblem {
    pub smooth: SmoothPart,
    pub prox: ProxPart,
    lipschitz: f64,
    pub x_star: Option<DVector<f64>>,
    pub f_star: Option<f64>,
}

fn lambda_max_gram(a: &DMatrix<f64>) -> f64 {
    let gram = a.transpose() * a;
    SymmetricEigen::new(gram).eigenvalues.max().max(0.0)
}

fn log1p_exp(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

impl SmoothPart {
    pub fn dim(&self) -> usize {
        match self {
            SmoothPart::LeastSquares { a, .. }
            | SmoothPart::Huber { a, .. }
            | SmoothPart::Logistic { a, .. } => a.ncols(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            SmoothPart::LeastSquares { a, .. } | SmoothPart::Huber { a, .. } => lambda_max_gram(a),
            SmoothPart::Logistic { a, .. } => lambda_max_gram(a) / 4.0,
        }
    }

    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            SmoothPart::LeastSquares { a, b } => 0.5 * (a * x - b).norm_squared(),
            SmoothPart::Huber { a, b, delta } => (a * x - b)
                .iter()
                .map(|r| {
                    if r.abs() <= *delta {
                        0.5 * r * r
                    } else {
                        delta * (r.abs() - 0.5 * delta)
                    }
                })
                .sum(),
            SmoothPart::Logistic { a, y } => {
                (a * x).iter().zip(y.iter()).map(|(m, yi)| log1p_exp(-yi * m)).sum()
            }
        }
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        match self {
            SmoothPart::LeastSquares { a, b } => a.transpose() * (a * x - b),
            SmoothPart::Huber { a, b, delta } => {
                a.transpose() * (a * x - b).map(|r| r.clamp(-*delta, *delta))
            }
            SmoothPart::Logistic { a, y } => {
                let m = a * x;
                let w = DVector::from_fn(m.len(), |i, _| -y[i] * sigmoid(-y[i] * m[i]));
                a.transpose() * w
            }
        }
    }
}

impl ProxPart {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        match self {
            ProxPart::Zero => 0.0,
            ProxPart::L1 { tau } => tau * x.lp_norm(1),
            ProxPart::Box { lo, hi } => {
                if x.iter().zip(lo.iter().zip(hi.iter())).all(|(v, (l, h))| *l <= *v && *v <= *h) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_z alpha h(z) + 1/2 |z - x|^2`.
    pub fn prox(&self, alpha: f64, x: &DVector<f64>) -> DVector<f64> {
        match self {
            ProxPart::Zero => x.clone(),
            ProxPart::L1 { tau } => soft_threshold(x, alpha * tau),
            ProxPart::Box { lo, hi } => DVector::from_fn(x.len(), |i, _| x[i].clamp(lo[i], hi[i])),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, ProxPart::Zero)
    }
}

pub fn soft_threshold(x: &DVector<f64>, t: f64) -> DVector<f64> {
    x.map(|v| v.signum() * (v.abs() - t).max(0.0))
}

impl ProxProblem {
    pub fn new(smooth: SmoothPart, prox: ProxPart) -> Result<Self> {
        let n = smooth.dim();
        if let ProxPart::Box { lo, hi } = &prox {
            if lo.len() != n || hi.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: lo.len() });
            }
            if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
                return Err(invalid("box bounds need lo <= hi"));
            }
        }
        if let ProxPart::L1 { tau } = &prox {
            if !(*tau >= 0.0) {
                return Err(invalid("l1 weight must be nonnegative"));
            }
        }
        let lipschitz = smooth.lipschitz();
        if !(lipschitz > 0.0) || !lipschitz.is_finite() {
            return Err(invalid("smoothness constant is zero; the data matrix vanishes"));
        }
        Ok(Self { smooth, prox, lipschitz, x_star: None, f_star: None })
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn f(&self, x: &DVector<f64>) -> f64 {
        self.smooth.value(x)
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        self.smooth.grad(x)
    }

    pub fn h(&self, x: &DVector<f64>) -> f64 {
        self.prox.value(x)
    }

    pub fn prox(&self, alpha: f64, x: &DVector<f64>) -> DVector<f64> {
        self.prox.prox(alpha, x)
    }

    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.f(x) + self.h(x)
    }

    pub fn with_solution(mut self, x_star: DVector<f64>) -> Self {
        self.f_star = Some(self.objective(&x_star));
        self.x_star = Some(x_star);
        self
    }

    /// Computes `x_*` and `F_*` if not already known.
    pub fn solve_reference(&mut self) -> Result<()> {
        if self.f_star.is_some() {
            return Ok(());
        }
        let x = reference_solution(self)?;
        self.f_star = Some(self.objective(&x));
        self.x_star = Some(x);
        Ok(())
    }
}

/// Restarted FISTA with step `1/L`, stopping on a vanishing step.
pub fn fista_restarted(p: &ProxProblem, x0: &DVector<f64>, max_iter: usize) -> DVector<f64> {
    let step = 1.0 / p.lipschitz();
    let mut x = p.prox(step, x0);
    let mut y = x.clone();
    let mut t = 1.0f64;
    for _ in 0..max_iter {
        let x_next = p.prox(step, &(&y - p.grad(&y) * step));
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let dx = &x_next - &x;
        // gradient-based restart
        if (&y - &x_next).dot(&dx) > 0.0 {
            t = 1.0;
            y = x_next.clone();
        } else {
            y = &x_next + &dx * ((t - 1.0) / t_next);
            t = t_next;
        }
        let small = dx.norm() <= 1e-15 * x_next.norm().max(1.0);
        x = x_next;
        if small {
            break;
        }
    }
    x
}

/// Least-squares solve restricted to `free` coordinates with the others fixed.
fn restricted_least_squares(
    a: &DMatrix<f64>,
    rhs: &DVector<f64>,
    free: &[usize],
    shift: &DVector<f64>,
) -> Option<DVector<f64>> {
    if free.is_empty() {
        return Some(DVector::zeros(0));
    }
    let af = DMatrix::from_fn(a.nrows(), free.len(), |r, c| a[(r, free[c])]);
    let gram = af.transpose() * &af;
    let target = af.transpose() * rhs - shift;
    gram.cholesky().map(|c| c.solve(&target))
}

/// Refines a near-optimal point by solving the optimality system on its
/// active pattern; returns `None` when the refined point is not better.
fn polish(p: &ProxProblem, x: &DVector<f64>) -> Option<DVector<f64>> {
    let SmoothPart::LeastSquares { a, b } = &p.smooth else {
        return None;
    };
    let n = x.len();
    let scale = x.amax().max(1.0);
    let candidate = match &p.prox {
        ProxPart::Zero => {
            let all: Vec<usize> = (0..n).collect();
            restricted_least_squares(a, b, &all, &DVector::zeros(n))?
        }
        ProxPart::L1 { tau } => {
            let free: Vec<usize> = (0..n).filter(|i| x[*i].abs() > 1e-9 * scale).collect();
            let signs = DVector::from_fn(free.len(), |c, _| x[free[c]].signum() * tau);
            let sol = restricted_least_squares(a, b, &free, &signs)?;
            let mut out = DVector::zeros(n);
            for (c, i) in free.iter().enumerate() {
                if sol[c].signum() != x[*i].signum() {
                    return None;
                }
                out[*i] = sol[c];
            }
            out
        }
        ProxPart::Box { lo, hi } => {
            let tol = 1e-9 * scale;
            let free: Vec<usize> =
                (0..n).filter(|i| x[*i] > lo[*i] + tol && x[*i] < hi[*i] - tol).collect();
            let mut fixed = x.clone();
            for i in 0..n {
                if x[i] <= lo[i] + tol {
                    fixed[i] = lo[i];
                } else if x[i] >= hi[i] - tol {
                    fixed[i] = hi[i];
                } else {
                    fixed[i] = 0.0;
                }
            }
            let rhs = b - a * &fixed;
            let sol = restricted_least_squares(a, &rhs, &free, &DVector::zeros(free.len()))?;
            let mut out = fixed;
            for (c, i) in free.iter().enumerate() {
                if sol[c] < lo[*i] || sol[c] > hi[*i] {
                    return None;
                }
                out[*i] = sol[c];
            }
            out
        }
    };
    let better = p.objective(&candidate) <= p.objective(x);
    better.then_some(candidate)
}

/// High-accuracy minimizer used to define `F_*`.
pub fn reference_solution(p: &ProxProblem) -> Result<DVector<f64>> {
    let x0 = match &p.prox {
        ProxPart::Box { lo, hi } => (lo + hi) * 0.5,
        _ => DVector::zeros(p.dim()),
    };
    let x = fista_restarted(p, &x0, 100_000);
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::OracleFailure("reference solve diverged".into()));
    }
    Ok(polish(p, &x).unwrap_or(x))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Lasso,
    BoxQp,
    SmoothQuadratic,
    SmoothHuber,
    L1Logistic,
}

fn default_tau() -> f64 {
    0.1
}
fn default_lo() -> f64 {
    -1.0
}
fn default_hi() -> f64 {
    1.0
}
fn default_delta() -> f64 {
    1.0
}

/// JSON description of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    #[serde(default)]
    pub rows: usize,
    #[serde(default)]
    pub cols: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_lo")]
    pub lo: f64,
    #[serde(default = "default_hi")]
    pub hi: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Use `A = I` (requires `rows == cols`).
    #[serde(default)]
    pub identity: bool,
    /// Optional CSV file with the data matrix, one row per line.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a_csv: Option<PathBuf>,
    /// Optional CSV file with the right-hand side or labels.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b_csv: Option<PathBuf>,
}

impl ProblemSpec {
    pub fn new(kind: ProblemKind, rows: usize, cols: usize, seed: u64) -> Self {
        Self {
            kind,
            rows,
            cols,
            seed,
            tau: default_tau(),
            lo: default_lo(),
            hi: default_hi(),
            delta: default_delta(),
            identity: false,
            a_csv: None,
            b_csv: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut spec: ProblemSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut spec.a_csv, &mut spec.b_csv].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        if self.a_csv.is_none() && (self.rows == 0 || self.cols == 0) {
            return Err(invalid("rows and cols must be positive"));
        }
        if self.identity && self.rows != self.cols {
            return Err(invalid("identity data needs rows == cols"));
        }
        if !(self.lo <= self.hi) {
            return Err(invalid("box bounds need lo <= hi"));
        }
        if !(self.tau >= 0.0) {
            return Err(invalid("tau must be nonnegative"));
        }
        if !(self.delta > 0.0) {
            return Err(invalid("huber delta must be positive"));
        }
        Ok(())
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }

    fn data(&self) -> Result<(DMatrix<f64>, DVector<f64>)> {
        let mut rng = self.rng(0);
        let a = match &self.a_csv {
            Some(p) => read_csv_matrix(p)?,
            None if self.identity => DMatrix::identity(self.rows, self.cols),
            None => {
                let s = 1.0 / (self.rows as f64).sqrt();
                DMatrix::from_fn(self.rows, self.cols, |_, _| rng.sample::<f64, _>(StandardNormal) * s)
            }
        };
        let b = match &self.b_csv {
            Some(p) => {
                let m = read_csv_matrix(p)?;
                DVector::from_iterator(m.len(), m.transpose().iter().copied())
            }
            None => DVector::from_fn(a.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal)),
        };
        if b.len() != a.nrows() {
            return Err(Error::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
        Ok((a, b))
    }

    /// Builds the oracles without solving for `F_*`.
    pub fn build(&self) -> Result<ProxProblem> {
        self.validate()?;
        let (a, b) = self.data()?;
        let n = a.ncols();
        let (smooth, prox) = match self.kind {
            ProblemKind::Lasso => (SmoothPart::LeastSquares { a, b }, ProxPart::L1 { tau: self.tau }),
            ProblemKind::BoxQp => (
                SmoothPart::LeastSquares { a, b },
                ProxPart::Box {
                    lo: DVector::from_element(n, self.lo),
                    hi: DVector::from_element(n, self.hi),
                },
            ),
            ProblemKind::SmoothQuadratic => (SmoothPart::LeastSquares { a, b }, ProxPart::Zero),
            ProblemKind::SmoothHuber => {
                (SmoothPart::Huber { a, b, delta: self.delta }, ProxPart::Zero)
            }
            ProblemKind::L1Logistic => {
                let y = b.map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
                (SmoothPart::Logistic { a, y }, ProxPart::L1 { tau: self.tau })
            }
        };
        let p = ProxProblem::new(smooth, prox)?;
        Ok(match self.closed_form(&p) {
            Some(x) => p.with_solution(x),
            None => p,
        })
    }

    fn closed_form(&self, p: &ProxProblem) -> Option<DVector<f64>> {
        if !self.identity || self.a_csv.is_some() {
            return None;
        }
        let SmoothPart::LeastSquares { b, .. } = &p.smooth else {
            return None;
        };
        Some(match &p.prox {
            ProxPart::L1 { tau } => soft_threshold(b, *tau),
            ProxPart::Box { lo, hi } => DVector::from_fn(b.len(), |i, _| b[i].clamp(lo[i], hi[i])),
            ProxPart::Zero => b.clone(),
        })
    }

    /// Deterministic starting point; inside the box for box problems.
    pub fn starting_point(&self, dim: usize) -> DVector<f64> {
        let mut rng = self.rng(1);
        match self.kind {
            ProblemKind::BoxQp => {
                DVector::from_fn(dim, |_, _| self.lo + (self.hi - self.lo) * rng.random::<f64>())
            }
            _ => DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal)),
        }
    }

    /// Stable key for the solution cache.
    pub fn hash(&self) -> Result<String> {
        let mut hasher = Sha256::new();
        hasher.update(serde_json::to_vec(self)?);
        for p in [&self.a_csv, &self.b_csv].into_iter().flatten() {
            hasher.update(std::fs::read(p)?);
        }
        Ok(hasher.finalize().iter().map(|b| format!("{b:02x}")).collect())
    }
}

/// Builds a problem and computes its reference optimum.
pub fn make_problem(spec: &ProblemSpec) -> Result<ProxProblem> {
    let mut p = spec.build()?;
    p.solve_reference()?;
    Ok(p)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedSolution {
    hash: String,
    #[serde(serialize_with = "crate::report::sig17::scalar")]
    f_star: f64,
    #[serde(serialize_with = "crate::report::sig17::vec")]
    x_star: Vec<f64>,
}

/// Like [`make_problem`], reusing `F_*` from a JSON sidecar in `dir`.
pub fn make_problem_cached(spec: &ProblemSpec, dir: impl AsRef<Path>) -> Result<ProxProblem> {
    let mut p = spec.build()?;
    if p.f_star.is_some() {
        return Ok(p);
    }
    let hash = spec.hash()?;
    let file = dir.as_ref().join(format!("{hash}.json"));
    if let Ok(text) = std::fs::read_to_string(&file) {
        if let Ok(c) = serde_json::from_str::<CachedSolution>(&text) {
            if c.hash == hash && c.x_star.len() == p.dim() {
                p.f_star = Some(c.f_star);
                p.x_star = Some(DVector::from_vec(c.x_star));
                return Ok(p);
            }
        }
    }
    p.solve_reference()?;
    let cached = CachedSolution {
        hash,
        f_star: p.f_star.unwrap_or(f64::NAN),
        x_star: p.x_star.as_ref().map(|x| x.iter().copied().collect()).unwrap_or_default(),
    };
    std::fs::create_dir_all(dir.as_ref())?;
    std::fs::write(&file, serde_json::to_string_pretty(&cached)?)?;
    Ok(p)
}

/// `F(x_k) - F_*` along a trace.
pub fn composite_gap(trace: &crate::methods::RunTrace, p: &ProxProblem) -> Result<Vec<f64>> {
    let f_star = p.f_star.ok_or(Error::UnknownOptimum)?;
    Ok(trace.gaps(f_star))
}

pub fn read_csv_matrix(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), ln + 1)))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Parse(format!(
                    "{}:{}: expected {} columns, got {}",
                    path.display(),
                    ln + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no data", path.display())));
    }
    Ok(DMatrix::from_fn(rows.len(), rows[0].len(), |r, c| rows[r][c]))
}
