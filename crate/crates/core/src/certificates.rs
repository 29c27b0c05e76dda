//! Closed-form multipliers for the unconstrained methods and exact
//! verification of the identities they certify.
//!
//! A function-value certificate stores `lambda` as an `(n+2) x (n+1)`
//! matrix: rows `0..=n` are iterates, row `n+1` is `*`. A gradient-norm
//! certificate has no `*` row.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::ledger::{GramLedger, Inequality, IterateExpander, LedgerMode, Point, Residuals};
use crate::schedules::{
    gsw_schedule, silver_schedule, CumulativeStepsizeMatrix, StepsizeMatrix, ThetaSequence, RHO,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Func,
    Grad,
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Metric::Func => "func",
            Metric::Grad => "grad",
        })
    }
}

/// `(lambda, gamma, R_n)` certifying `f_n - f_* <= |x_0 - x_*|^2 / (2 R_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FuncCertificate {
    pub n: usize,
    pub lambda: DMatrix<f64>,
    pub gamma: DVector<f64>,
    pub r: f64,
}

/// `(lambda', R'_n)` certifying `|g_n|^2 <= 2 (f_0 - f_n) / R'_n`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCertificate {
    pub n: usize,
    pub lambda: DMatrix<f64>,
    pub r: f64,
}

/// Largest violation of the structural invariants of a certificate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct InvariantReport {
    pub min_entry: f64,
    pub max_sum_violation: f64,
    pub max_star_violation: f64,
}

impl InvariantReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.min_entry >= -tol && self.max_sum_violation < tol && self.max_star_violation < tol
    }
}

fn row_sum(m: &DMatrix<f64>, r: usize) -> f64 {
    m.row(r).sum()
}

fn col_sum(m: &DMatrix<f64>, c: usize) -> f64 {
    m.column(c).sum()
}

fn entry_scale(m: &DMatrix<f64>) -> f64 {
    m.abs().max().max(1.0)
}

impl FuncCertificate {
    pub fn new(lambda: DMatrix<f64>, gamma: DVector<f64>, r: f64) -> Result<Self> {
        let n = gamma.len().checked_sub(1).ok_or_else(|| invalid("gamma must be nonempty"))?;
        if lambda.nrows() != n + 2 || lambda.ncols() != n + 1 {
            return Err(Error::DimensionMismatch { expected: n + 2, got: lambda.nrows() });
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid("R_n must be positive"));
        }
        Ok(Self { n, lambda, gamma, r })
    }

    pub fn star(&self) -> usize {
        self.n + 1
    }

    pub fn get(&self, i: Point, j: usize) -> f64 {
        self.lambda[(i.slot(self.n), j)]
    }

    pub fn invariants(&self) -> InvariantReport {
        let n = self.n;
        let scale = entry_scale(&self.lambda);
        let mut sum_v = 0.0f64;
        for i in 0..=n {
            let target = if i == n { -self.r } else { 0.0 };
            let d = row_sum(&self.lambda, i) - col_sum(&self.lambda, i) - target;
            sum_v = sum_v.max(d.abs() / scale);
        }
        let mut star_v = (row_sum(&self.lambda, n + 1) - self.r).abs() / scale;
        for i in 0..=n {
            star_v = star_v.max((self.lambda[(n + 1, i)] - self.gamma[i]).abs() / scale);
        }
        InvariantReport {
            min_entry: self.lambda.min() / scale,
            max_sum_violation: sum_v,
            max_star_violation: star_v,
        }
    }

    /// `(1, 2R_n)`-normalised rate: `f_n - f_* <= rate * |x_0 - x_*|^2`.
    pub fn unconstrained_rate(&self) -> f64 {
        1.0 / (2.0 * self.r)
    }
}

impl GradCertificate {
    pub fn new(lambda: DMatrix<f64>, r: f64) -> Result<Self> {
        let n = lambda.nrows().checked_sub(1).ok_or_else(|| invalid("lambda must be nonempty"))?;
        if lambda.ncols() != n + 1 {
            return Err(Error::DimensionMismatch { expected: n + 1, got: lambda.ncols() });
        }
        if !(r > 0.0) || !r.is_finite() {
            return Err(invalid("R'_n must be positive"));
        }
        Ok(Self { n, lambda, r })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.lambda[(i, j)]
    }

    pub fn invariants(&self) -> InvariantReport {
        let n = self.n;
        let scale = entry_scale(&self.lambda);
        let mut sum_v = 0.0f64;
        for i in 0..=n {
            let target = if i == 0 {
                1.0
            } else if i == n {
                -1.0
            } else {
                0.0
            };
            let target = if n == 0 { 0.0 } else { target };
            let d = row_sum(&self.lambda, i) - col_sum(&self.lambda, i) - target;
            sum_v = sum_v.max(d.abs() / scale);
        }
        let star_v =
            (row_sum(&self.lambda, n) + col_sum(&self.lambda, n) - self.r).abs() / scale;
        InvariantReport {
            min_entry: self.lambda.min() / scale,
            max_sum_violation: sum_v,
            max_star_violation: star_v,
        }
    }

    pub fn unconstrained_rate(&self) -> f64 {
        2.0 / self.r
    }
}

/// Square block of the silver multipliers on indices `0..=n`.
pub fn silver_lambda_bar(k: u32) -> Result<DMatrix<f64>> {
    silver_schedule(k)?;
    let mut bar = DMatrix::from_row_slice(2, 2, &[0.0, RHO, 1.0, 0.0]);
    for level in 1..k {
        let n = (1usize << level) - 1;
        let pi = silver_schedule(level)?;
        let mut next = DMatrix::zeros(2 * n + 2, 2 * n + 2);
        next.view_mut((0, 0), (n + 1, n + 1)).copy_from(&bar);
        next.view_mut((n + 1, n + 1), (n + 1, n + 1)).copy_from(&(&bar * (RHO * RHO)));
        next[(n, 2 * n + 1)] += RHO;
        next[(2 * n + 1, n)] += RHO.powi(level as i32);
        for j in n + 1..=2 * n {
            let p = pi[j - n - 1];
            next[(n, j)] += RHO * p;
            next[(2 * n + 1, j)] += RHO * p;
        }
        bar = next;
    }
    Ok(bar)
}

pub fn silver_func_certificate(k: u32) -> Result<FuncCertificate> {
    let bar = silver_lambda_bar(k)?;
    let n = bar.nrows() - 1;
    let mut gamma: Vec<f64> = silver_schedule(k)?;
    gamma.push(RHO.powi(k as i32));
    let mut lambda = DMatrix::zeros(n + 2, n + 1);
    lambda.view_mut((0, 0), (n + 1, n + 1)).copy_from(&bar);
    for (j, g) in gamma.iter().enumerate() {
        lambda[(n + 1, j)] = *g;
    }
    FuncCertificate::new(lambda, DVector::from_vec(gamma), 2.0 * RHO.powi(k as i32) - 1.0)
}

pub fn ogm_func_certificate(n: usize) -> Result<FuncCertificate> {
    let theta = ThetaSequence::new(n)?;
    let t = |i: usize| theta.get(i);
    let mut lambda = DMatrix::zeros(n + 2, n + 1);
    for i in 0..n {
        lambda[(i, i + 1)] = 2.0 * t(i) * t(i);
        lambda[(n + 1, i)] = 2.0 * t(i);
    }
    lambda[(n + 1, n)] = t(n);
    let gamma = DVector::from_fn(n + 1, |i, _| if i < n { 2.0 * t(i) } else { t(n) });
    FuncCertificate::new(lambda, gamma, t(n) * t(n))
}

pub fn gsw_grad_certificate(k: u32) -> Result<GradCertificate> {
    let sched = gsw_schedule(k)?;
    let mut lam = DMatrix::from_row_slice(2, 2, &[0.0, 2.0, 1.0, 0.0]);
    for level in 1..k {
        let n = (1usize << level) - 1;
        let tau_next = sched.tau(level + 1);
        let r2k = RHO.powi(2 * level as i32);
        let bar = silver_lambda_bar(level)?;
        let pi = silver_schedule(level)?;
        let mut next = DMatrix::zeros(2 * n + 2, 2 * n + 2);
        next.view_mut((0, 0), (n + 1, n + 1)).copy_from(&lam);
        next.view_mut((n + 1, n + 1), (n + 1, n + 1)).copy_from(&(&bar * (tau_next / r2k)));
        next[(n, 2 * n + 1)] += tau_next / (2.0 * r2k);
        next[(2 * n + 1, n)] += tau_next / (2.0 * RHO.powi(level as i32)) - 1.0;
        for j in n + 1..=2 * n {
            let c = tau_next / (2.0 * r2k) * pi[j - n - 1];
            next[(n, j)] += c;
            next[(2 * n + 1, j)] += c;
        }
        lam = next;
    }
    GradCertificate::new(lam, sched.tau(k) - 1.0)
}

pub fn ogmg_grad_certificate(n: usize) -> Result<GradCertificate> {
    let theta = ThetaSequence::new(n)?;
    let t = |i: usize| theta.get(i);
    let tn2 = t(n) * t(n);
    let mut lambda = DMatrix::zeros(n + 1, n + 1);
    for i in 0..n {
        lambda[(i, i + 1)] = tn2 / (2.0 * t(n - i - 1).powi(2));
    }
    lambda[(n, 0)] = tn2 * (1.0 / (2.0 * t(n - 1).powi(2)) - 1.0 / tn2);
    for j in 1..n {
        lambda[(n, j)] = tn2 * (1.0 / (2.0 * t(n - j - 1).powi(2)) - 1.0 / (2.0 * t(n - j).powi(2)));
    }
    GradCertificate::new(lambda, tn2 - 1.0)
}

/// Outcome of an exact coefficient comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityReport {
    pub residuals: Residuals,
    pub tol: f64,
    pub pass: bool,
}

impl IdentityReport {
    pub fn from_residuals(residuals: Residuals, tol: f64) -> Self {
        Self { residuals, tol, pass: residuals.passes(tol) }
    }
}

fn check_n(h: &StepsizeMatrix, n: usize) -> Result<()> {
    if h.n() != n {
        return Err(Error::DimensionMismatch { expected: h.n(), got: n });
    }
    Ok(())
}

/// Both sides of the function-value identity as ledgers.
pub fn func_identity_sides(
    cumulative: &CumulativeStepsizeMatrix,
    cert: &FuncCertificate,
) -> Result<(GramLedger, GramLedger)> {
    let n = cert.n;
    let exp = IterateExpander::new(cumulative, LedgerMode::Unconstrained);
    let mut lhs = GramLedger::new(n, LedgerMode::Unconstrained);
    add_func_multiplier_terms(&exp, &mut lhs, &cert.lambda, Inequality::Unconstrained)?;
    let mut u: Vec<(usize, f64)> = vec![(GramLedger::X0_MINUS_XSTAR, 1.0)];
    for i in 0..=n {
        u.push((lhs.g(i), -cert.gamma[i]));
    }
    lhs.add_square(&u, 0.5);

    let mut rhs = GramLedger::new(n, LedgerMode::Unconstrained);
    rhs.add_f(Point::Star, cert.r);
    rhs.add_f(Point::Iter(n), -cert.r);
    rhs.add_entry(0, 0, 0.5);
    Ok((lhs, rhs))
}

pub(crate) fn add_func_multiplier_terms(
    exp: &IterateExpander<'_>,
    ledger: &mut GramLedger,
    lambda: &DMatrix<f64>,
    kind: Inequality,
) -> Result<()> {
    let n = exp.n();
    for r in 0..lambda.nrows() {
        let i = if r == n + 1 { Point::Star } else { Point::Iter(r) };
        for j in 0..lambda.ncols() {
            let c = lambda[(r, j)];
            if c != 0.0 && i != Point::Iter(j) {
                exp.add_inequality(ledger, kind, i, Point::Iter(j), c)?;
            }
        }
    }
    Ok(())
}

pub fn verify_func_identity(h: &StepsizeMatrix, cert: &FuncCertificate) -> Result<IdentityReport> {
    verify_func_identity_tol(h, cert, crate::global_tol())
}

pub fn verify_func_identity_tol(
    h: &StepsizeMatrix,
    cert: &FuncCertificate,
    tol: f64,
) -> Result<IdentityReport> {
    check_n(h, cert.n)?;
    let (lhs, rhs) = func_identity_sides(&h.cumulative(), cert)?;
    Ok(IdentityReport::from_residuals(lhs.compare(&rhs)?, tol))
}

pub fn grad_identity_sides(
    cumulative: &CumulativeStepsizeMatrix,
    cert: &GradCertificate,
) -> Result<(GramLedger, GramLedger)> {
    let n = cert.n;
    let exp = IterateExpander::new(cumulative, LedgerMode::Unconstrained);
    let mut lhs = GramLedger::new(n, LedgerMode::Unconstrained);
    add_func_multiplier_terms(&exp, &mut lhs, &cert.lambda, Inequality::Unconstrained)?;
    let mut rhs = GramLedger::new(n, LedgerMode::Unconstrained);
    let gn = rhs.g(n);
    rhs.add_entry(gn, gn, -cert.r / 2.0);
    rhs.add_f(Point::Iter(0), 1.0);
    rhs.add_f(Point::Iter(n), -1.0);
    Ok((lhs, rhs))
}

pub fn verify_grad_identity(h: &StepsizeMatrix, cert: &GradCertificate) -> Result<IdentityReport> {
    verify_grad_identity_tol(h, cert, crate::global_tol())
}

pub fn verify_grad_identity_tol(
    h: &StepsizeMatrix,
    cert: &GradCertificate,
    tol: f64,
) -> Result<IdentityReport> {
    check_n(h, cert.n)?;
    let (lhs, rhs) = grad_identity_sides(&h.cumulative(), cert)?;
    Ok(IdentityReport::from_residuals(lhs.compare(&rhs)?, tol))
}

/// `lambda-hat` and `lambda-tilde` of a multiplier array.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiplierAggregates {
    pub hat: DMatrix<f64>,
    pub tilde: DMatrix<f64>,
}

/// Aggregates of a multiplier matrix whose first `n + 1` rows are
/// iterates (an optional extra row is `*`).
pub fn aggregates_of(lambda: &DMatrix<f64>, n: usize) -> MultiplierAggregates {
    let col = |a: usize| col_sum(lambda, a);
    let row = |a: usize| row_sum(lambda, a);
    let hat = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            -(col(a) + row(a))
        } else {
            lambda[(a, b)] + lambda[(b, a)]
        }
    });
    let tilde = DMatrix::from_fn(n, n, |r, c| {
        let i = r + 1;
        if c == i {
            -col(i)
        } else {
            lambda[(i, c)]
        }
    });
    MultiplierAggregates { hat, tilde }
}

pub fn func_aggregates(cert: &FuncCertificate) -> MultiplierAggregates {
    aggregates_of(&cert.lambda, cert.n)
}

pub fn grad_aggregates(cert: &GradCertificate) -> MultiplierAggregates {
    aggregates_of(&cert.lambda, cert.n)
}

/// Relative residual of `hat + H~ tilde + (H~ tilde)^T = target`.
pub fn aggregate_identity_residual(
    cumulative: &CumulativeStepsizeMatrix,
    agg: &MultiplierAggregates,
    target: &DMatrix<f64>,
) -> f64 {
    let ht = cumulative.as_matrix() * &agg.tilde;
    let lhs = &agg.hat + &ht + ht.transpose();
    let scale = lhs.abs().max().max(target.abs().max()).max(1.0);
    (lhs - target).abs().max() / scale
}

/// `-gamma~ gamma~^T` with `gamma~ = gamma_0..gamma_{n-1}`.
pub fn func_aggregate_target(cert: &FuncCertificate) -> DMatrix<f64> {
    let g = cert.gamma.rows(0, cert.n).into_owned();
    -(&g * g.transpose())
}

/// On-disk certificate. Rows of `lambda` are iterates, followed by `*`
/// for function-value certificates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CertificateFile {
    pub metric: Metric,
    pub n: usize,
    #[serde(serialize_with = "crate::report::sig17::matrix")]
    pub lambda: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none", serialize_with = "crate::report::sig17::opt_vec")]
    pub gamma: Option<Vec<f64>>,
    #[serde(serialize_with = "crate::report::sig17::scalar")]
    pub r: f64,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|r| m.row(r).iter().copied().collect()).collect()
}

fn from_rows(rows: &[Vec<f64>], ncols: usize) -> Result<DMatrix<f64>> {
    for row in rows {
        if row.len() != ncols {
            return Err(Error::DimensionMismatch { expected: ncols, got: row.len() });
        }
    }
    Ok(DMatrix::from_fn(rows.len(), ncols, |r, c| rows[r][c]))
}

impl From<&FuncCertificate> for CertificateFile {
    fn from(c: &FuncCertificate) -> Self {
        CertificateFile {
            metric: Metric::Func,
            n: c.n,
            lambda: to_rows(&c.lambda),
            gamma: Some(c.gamma.iter().copied().collect()),
            r: c.r,
        }
    }
}

impl From<&GradCertificate> for CertificateFile {
    fn from(c: &GradCertificate) -> Self {
        CertificateFile { metric: Metric::Grad, n: c.n, lambda: to_rows(&c.lambda), gamma: None, r: c.r }
    }
}

impl CertificateFile {
    pub fn into_func(self) -> Result<FuncCertificate> {
        if self.metric != Metric::Func {
            return Err(Error::Parse("expected a func certificate".into()));
        }
        let gamma = self.gamma.ok_or_else(|| Error::Parse("func certificate needs gamma".into()))?;
        if gamma.len() != self.n + 1 || self.lambda.len() != self.n + 2 {
            return Err(Error::DimensionMismatch { expected: self.n + 2, got: self.lambda.len() });
        }
        FuncCertificate::new(from_rows(&self.lambda, self.n + 1)?, DVector::from_vec(gamma), self.r)
    }

    pub fn into_grad(self) -> Result<GradCertificate> {
        if self.metric != Metric::Grad {
            return Err(Error::Parse("expected a grad certificate".into()));
        }
        if self.lambda.len() != self.n + 1 {
            return Err(Error::DimensionMismatch { expected: self.n + 1, got: self.lambda.len() });
        }
        GradCertificate::new(from_rows(&self.lambda, self.n + 1)?, self.r)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
