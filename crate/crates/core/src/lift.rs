//! Lifting unconstrained certificates to the composite setting.
//!
//! Index conventions:
//! - `sigma`, `v`: entries `1..=n` at slots `0..n`, the `*` entry last.
//! - `mu`: `(n+1) x n`, rows `1..=n` then `*`, columns `1..=n`.
//! - `mu_grad`: `(n+1) x n`, rows `0..=n`, columns `1..=n`.
//! - `S` acts on `[x_0 - x_*, s_1, .., s_n, s_*]`, `S'` on `[g_n, s_1, .., s_n]`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::certificates::{
    add_func_multiplier_terms, func_aggregates, grad_aggregates, FuncCertificate, GradCertificate,
    IdentityReport, Metric,
};
use crate::error::{invalid, Error, Result};
use crate::ledger::{GramLedger, Inequality, IterateExpander, LedgerMode, Point};
use crate::schedules::StepsizeMatrix;

/// How to pick the slack weight `xi` in the function-value lift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiChoice {
    Value(f64),
    /// `v^T L^+ v`.
    Pseudoinverse,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeFuncLift {
    pub n: usize,
    pub r: f64,
    pub gamma_n: f64,
    pub sigma: DVector<f64>,
    pub mu_tilde: DMatrix<f64>,
    /// Largest relative gap between the two closed forms of `mu_tilde`.
    pub mu_tilde_gap: f64,
    pub mu: DMatrix<f64>,
    pub xi: f64,
    pub pseudo_xi: f64,
    pub v: DVector<f64>,
    pub l: DMatrix<f64>,
    pub s: DMatrix<f64>,
    /// Coordinates of `u` over the composite ledger basis.
    pub u: DVector<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeGradLift {
    pub n: usize,
    pub r: f64,
    pub mu_tilde: DMatrix<f64>,
    pub mu: DMatrix<f64>,
    pub xi: f64,
    pub v: DVector<f64>,
    /// `[[R', v'^T], [v', -lambda-hat']]` before the rank-one subtraction.
    pub block: DMatrix<f64>,
    pub s: DMatrix<f64>,
}

/// Worst violations of the Laplacian conditions, relative to the largest
/// entry.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaplacianCheck {
    pub max_offdiag: f64,
    pub max_row_sum: f64,
}

impl LaplacianCheck {
    pub fn of(m: &DMatrix<f64>) -> Self {
        let scale = m.abs().max().max(f64::MIN_POSITIVE);
        let mut off = f64::NEG_INFINITY;
        let mut rows = 0.0f64;
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                if r != c {
                    off = off.max(m[(r, c)]);
                }
            }
            rows = rows.max(m.row(r).sum().abs());
        }
        if m.nrows() < 2 {
            off = 0.0;
        }
        Self { max_offdiag: off / scale, max_row_sum: rows / scale }
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_offdiag <= tol && self.max_row_sum <= tol
    }
}

/// Smallest margin `|d_ii| - sum_{j != i} |d_ij|`, relative to the largest
/// entry.
pub fn diagonal_dominance_margin(m: &DMatrix<f64>) -> f64 {
    let scale = m.abs().max().max(f64::MIN_POSITIVE);
    (0..m.nrows())
        .map(|r| {
            let off: f64 = (0..m.ncols()).filter(|c| *c != r).map(|c| m[(r, c)].abs()).sum();
            (m[(r, r)].abs() - off) / scale
        })
        .fold(f64::INFINITY, f64::min)
}

/// `(min eigenvalue, spectral norm)` of a symmetric matrix.
pub fn eig_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    let norm = eig.eigenvalues.abs().max();
    (min, norm)
}

/// `v^T L^+ v`, dropping eigenvalues below `1e-10 |L|`.
pub fn pseudoinverse_quadratic(l: &DMatrix<f64>, v: &DVector<f64>) -> f64 {
    let eig = SymmetricEigen::new(l.clone());
    let cutoff = 1e-10 * eig.eigenvalues.abs().max();
    let proj = eig.eigenvectors.transpose() * v;
    eig.eigenvalues
        .iter()
        .zip(proj.iter())
        .filter(|(e, _)| e.abs() > cutoff)
        .map(|(e, p)| p * p / e)
        .sum()
}

fn check_n(h: &StepsizeMatrix, n: usize) -> Result<()> {
    if h.n() != n {
        return Err(Error::DimensionMismatch { expected: h.n(), got: n });
    }
    Ok(())
}

fn assemble_s(xi: f64, v: &DVector<f64>, l: &DMatrix<f64>) -> DMatrix<f64> {
    let m = l.nrows() + 1;
    let mut s = DMatrix::zeros(m, m);
    s[(0, 0)] = xi;
    for a in 0..v.len() {
        s[(0, a + 1)] = v[a];
        s[(a + 1, 0)] = v[a];
    }
    s.view_mut((1, 1), (m - 1, m - 1)).copy_from(l);
    s
}

pub fn lift_func(h: &StepsizeMatrix, cert: &FuncCertificate, xi: XiChoice) -> Result<CompositeFuncLift> {
    let n = cert.n;
    check_n(h, n)?;
    let lam = &cert.lambda;
    let star = n + 1;
    let gamma_n = cert.gamma[n];
    if gamma_n == 0.0 {
        return Err(Error::DegenerateCertificate("gamma_n = 0 leaves sigma undefined".into()));
    }
    let mut sigma = DVector::zeros(n + 1);
    for i in 1..=n {
        sigma[i - 1] = (lam[(i - 1, n)] + lam[(n, i - 1)]) / gamma_n;
    }
    sigma[n] = lam[(star, n)] / gamma_n;

    let cum = h.cumulative();
    let ht = cum.as_matrix();
    let agg = func_aggregates(cert);
    let gt = cert.gamma.rows(0, n).into_owned();
    let st = sigma.rows(0, n).into_owned();

    let htl = ht * &agg.tilde;
    let rhs1 = htl.transpose() + &gt * (&gt + &st).transpose();
    let mu_tilde = -cum.solve(&rhs1);
    let mu_alt = cum.solve(&(&agg.hat - &gt * st.transpose())) + &agg.tilde;
    let scale = mu_tilde.abs().max().max(1.0);
    let mu_tilde_gap = (&mu_tilde - &mu_alt).abs().max() / scale;

    let mut mu = DMatrix::zeros(n + 1, n);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                mu[(i, j)] = mu_tilde[(i, j)];
            }
        }
    }
    for j in 0..n {
        mu[(n, j)] = -mu_tilde.column(j).sum();
    }

    let mut v = DVector::zeros(n + 1);
    for i in 1..=n {
        v[i - 1] = sigma[i - 1] + lam[(star, i - 1)] - mu[(n, i - 1)];
    }
    v[n] = sigma[n];

    let lam_star_total = lam.row(star).sum();
    let mut l = DMatrix::zeros(n + 1, n + 1);
    for a in 0..n {
        for b in 0..n {
            l[(a, b)] = -agg.hat[(a, b)];
        }
        l[(a, n)] = -gt[a];
        l[(n, a)] = -gt[a];
    }
    l[(n, n)] = lam_star_total;
    l -= &sigma * sigma.transpose();

    let pseudo_xi = pseudoinverse_quadratic(&l, &v);
    let xi = match xi {
        XiChoice::Value(x) => {
            if !(x >= 0.0) || !x.is_finite() {
                return Err(invalid(format!("xi must be a nonnegative number, got {x}")));
            }
            x
        }
        XiChoice::Pseudoinverse => pseudo_xi,
    };
    let s = assemble_s(xi, &v, &l);

    let mut u = DVector::zeros(2 * n + 3);
    for i in 0..=n {
        u[1 + i] += cert.gamma[i];
    }
    for i in 0..n {
        u[n + 2 + i] += cert.gamma[i] + sigma[i];
    }
    u[2 * n + 2] += sigma[n];

    Ok(CompositeFuncLift {
        n,
        r: cert.r,
        gamma_n,
        sigma,
        mu_tilde,
        mu_tilde_gap,
        mu,
        xi,
        pseudo_xi,
        v,
        l,
        s,
        u,
    })
}

impl CompositeFuncLift {
    /// Same lift with a different `xi`.
    pub fn with_xi(&self, xi: f64) -> Result<Self> {
        if !(xi >= 0.0) || !xi.is_finite() {
            return Err(invalid(format!("xi must be a nonnegative number, got {xi}")));
        }
        let mut out = self.clone();
        out.xi = xi;
        out.s[(0, 0)] = xi;
        Ok(out)
    }

    pub fn mu_at(&self, i: Point, j: usize) -> f64 {
        match i {
            Point::Iter(i) => self.mu[(i - 1, j - 1)],
            Point::Star => self.mu[(self.n, j - 1)],
        }
    }

    pub fn rate(&self) -> f64 {
        (1.0 + self.xi) / (2.0 * self.r)
    }

    /// `L - v v^T / xi`.
    pub fn schur_complement(&self, xi: f64) -> Result<DMatrix<f64>> {
        if !(xi > 0.0) {
            return Err(invalid(format!("Schur route needs xi > 0, got {xi}")));
        }
        Ok(&self.l - &self.v * self.v.transpose() / xi)
    }
}

/// Both feasibility items for a function-value lift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FuncFeasibility {
    pub xi: f64,
    pub min_mu: f64,
    pub mu_ok: bool,
    pub min_eig_s: f64,
    pub norm_s: f64,
    pub psd_ok: bool,
    pub schur: LaplacianCheck,
    pub schur_ok: bool,
    pub l_laplacian: LaplacianCheck,
    pub pass: bool,
}

pub const MU_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-9;
pub const LAPLACIAN_TOL: f64 = 1e-10;

pub fn check_func_feasibility(lift: &CompositeFuncLift, xi: f64) -> Result<FuncFeasibility> {
    let lift = lift.with_xi(xi)?;
    let schur = LaplacianCheck::of(&lift.schur_complement(xi)?);
    let mu_scale = lift.mu.abs().max().max(1.0);
    let min_mu = if lift.mu.is_empty() { 0.0 } else { lift.mu.min() };
    let mu_ok = min_mu >= -MU_TOL * mu_scale;
    let (min_eig_s, norm_s) = eig_extremes(&lift.s);
    let psd_ok = min_eig_s >= -PSD_TOL * norm_s;
    let schur_ok = schur.passes(LAPLACIAN_TOL);
    let l_laplacian = LaplacianCheck::of(&lift.l);
    Ok(FuncFeasibility {
        xi,
        min_mu,
        mu_ok,
        min_eig_s,
        norm_s,
        psd_ok,
        schur,
        schur_ok,
        l_laplacian,
        pass: mu_ok && psd_ok && schur_ok,
    })
}

pub fn composite_func_identity_sides(
    h: &StepsizeMatrix,
    cert: &FuncCertificate,
    lift: &CompositeFuncLift,
) -> Result<(GramLedger, GramLedger)> {
    let n = cert.n;
    check_n(h, n)?;
    if lift.n != n {
        return Err(Error::DimensionMismatch { expected: n, got: lift.n });
    }
    let cum = h.cumulative();
    let exp = IterateExpander::new(&cum, LedgerMode::Composite);
    let mut lhs = GramLedger::new(n, LedgerMode::Composite);
    add_func_multiplier_terms(&exp, &mut lhs, &cert.lambda, Inequality::CompositeF)?;
    for r in 0..=n {
        let i = if r == n { Point::Star } else { Point::Iter(r + 1) };
        for j in 1..=n {
            if i != Point::Iter(j) {
                exp.add_inequality(&mut lhs, Inequality::CompositeH, i, Point::Iter(j), lift.mu[(r, j - 1)])?;
            }
        }
    }
    let mut d: Vec<(usize, f64)> = vec![(GramLedger::X0_MINUS_XSTAR, 1.0)];
    d.extend(lift.u.iter().enumerate().filter(|(_, c)| **c != 0.0).map(|(k, c)| (k, -c)));
    lhs.add_square(&d, 0.5);
    let slot = |a: usize| if a == 0 { GramLedger::X0_MINUS_XSTAR } else { n + 1 + a };
    for a in 0..n + 2 {
        for b in 0..n + 2 {
            lhs.add_entry(slot(a), slot(b), 0.5 * lift.s[(a, b)]);
        }
    }

    let mut rhs = GramLedger::new(n, LedgerMode::Composite);
    for (p, c) in [(Point::Star, cert.r), (Point::Iter(n), -cert.r)] {
        rhs.add_f(p, c);
        rhs.add_h(p, c);
    }
    rhs.add_entry(0, 0, 0.5 * (1.0 + lift.xi));
    Ok((lhs, rhs))
}

pub fn verify_composite_func_identity(
    h: &StepsizeMatrix,
    cert: &FuncCertificate,
    lift: &CompositeFuncLift,
) -> Result<IdentityReport> {
    let (lhs, rhs) = composite_func_identity_sides(h, cert, lift)?;
    Ok(IdentityReport::from_residuals(lhs.compare(&rhs)?, crate::global_tol()))
}

/// `xi' = 1 - (lambda'_{n-1,n} + lambda'_{n,n-1}) / R'_n`.
pub fn default_grad_xi(cert: &GradCertificate) -> f64 {
    let n = cert.n;
    1.0 - (cert.lambda[(n - 1, n)] + cert.lambda[(n, n - 1)]) / cert.r
}

pub fn lift_grad(h: &StepsizeMatrix, cert: &GradCertificate) -> Result<CompositeGradLift> {
    lift_grad_with_xi(h, cert, default_grad_xi(cert))
}

pub fn lift_grad_with_xi(h: &StepsizeMatrix, cert: &GradCertificate, xi: f64) -> Result<CompositeGradLift> {
    let n = cert.n;
    check_n(h, n)?;
    if !xi.is_finite() || !(0.0..1.0).contains(&xi) {
        return Err(invalid(format!("xi' must lie in [0, 1), got {xi}")));
    }
    let cum = h.cumulative();
    let agg = grad_aggregates(cert);
    let htl = cum.as_matrix() * &agg.tilde;
    let mu_tilde = -cum.solve(&htl.transpose());
    let mut mu = DMatrix::zeros(n + 1, n);
    for j in 0..n {
        mu[(0, j)] = -mu_tilde.column(j).sum();
        for i in 0..n {
            if i != j {
                mu[(i + 1, j)] = mu_tilde[(i, j)];
            }
        }
    }
    let lam = &cert.lambda;
    let v = DVector::from_fn(n, |a, _| lam[(a, n)] + lam[(n, a)]);
    let mut block = DMatrix::zeros(n + 1, n + 1);
    block[(0, 0)] = cert.r;
    for a in 0..n {
        block[(0, a + 1)] = v[a];
        block[(a + 1, 0)] = v[a];
    }
    block.view_mut((1, 1), (n, n)).copy_from(&(-&agg.hat));
    let c = cert.r * (1.0 - xi);
    let mut s = block.clone();
    for (a, b) in [(0, 0), (0, n), (n, 0), (n, n)] {
        s[(a, b)] -= c;
    }
    Ok(CompositeGradLift { n, r: cert.r, mu_tilde, mu, xi, v, block, s })
}

impl CompositeGradLift {
    pub fn rate(&self) -> f64 {
        2.0 / (self.r * (1.0 - self.xi))
    }

    pub fn mu_at(&self, i: usize, j: usize) -> f64 {
        self.mu[(i, j - 1)]
    }

    /// The `(1, n+1)` entry of `S'`.
    pub fn corner(&self) -> f64 {
        self.s[(0, self.n)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradFeasibility {
    pub xi: f64,
    pub min_mu: f64,
    pub mu_ok: bool,
    pub min_eig_s: f64,
    pub norm_s: f64,
    pub psd_ok: bool,
    pub block_dominance: f64,
    pub s_dominance: f64,
    pub corner: f64,
    pub dominance_ok: bool,
    pub pass: bool,
}

pub fn check_grad_feasibility(lift: &CompositeGradLift) -> GradFeasibility {
    let scale = lift.mu.abs().max().max(1.0);
    let min_mu = if lift.mu.is_empty() { 0.0 } else { lift.mu.min() };
    let mu_ok = min_mu >= -MU_TOL * scale;
    let (min_eig_s, norm_s) = eig_extremes(&lift.s);
    let psd_ok = min_eig_s >= -PSD_TOL * norm_s;
    let block_dominance = diagonal_dominance_margin(&lift.block);
    let s_dominance = diagonal_dominance_margin(&lift.s);
    let s_scale = lift.s.abs().max().max(1.0);
    let corner = lift.corner();
    let dominance_ok = block_dominance >= -LAPLACIAN_TOL
        && s_dominance >= -LAPLACIAN_TOL
        && corner >= -LAPLACIAN_TOL * s_scale;
    GradFeasibility {
        xi: lift.xi,
        min_mu,
        mu_ok,
        min_eig_s,
        norm_s,
        psd_ok,
        block_dominance,
        s_dominance,
        corner,
        dominance_ok,
        pass: mu_ok && psd_ok && dominance_ok,
    }
}

pub fn composite_grad_identity_sides(
    h: &StepsizeMatrix,
    cert: &GradCertificate,
    lift: &CompositeGradLift,
) -> Result<(GramLedger, GramLedger)> {
    let n = cert.n;
    check_n(h, n)?;
    if lift.n != n {
        return Err(Error::DimensionMismatch { expected: n, got: lift.n });
    }
    let cum = h.cumulative();
    let exp = IterateExpander::new(&cum, LedgerMode::Composite);
    let mut lhs = GramLedger::new(n, LedgerMode::Composite);
    add_func_multiplier_terms(&exp, &mut lhs, &cert.lambda, Inequality::CompositeF)?;
    for i in 0..=n {
        for j in 1..=n {
            if i != j {
                exp.add_inequality(&mut lhs, Inequality::CompositeH, Point::Iter(i), Point::Iter(j), lift.mu[(i, j - 1)])?;
            }
        }
    }
    let gn = lhs.g(n);
    let slot = |a: usize| if a == 0 { gn } else { n + 1 + a };
    for a in 0..=n {
        for b in 0..=n {
            lhs.add_entry(slot(a), slot(b), 0.5 * lift.s[(a, b)]);
        }
    }

    let mut rhs = GramLedger::new(n, LedgerMode::Composite);
    let sn = rhs.s(n);
    rhs.add_square(&[(gn, 1.0), (sn, 1.0)], -cert.r * (1.0 - lift.xi) / 2.0);
    for (p, c) in [(Point::Iter(0), 1.0), (Point::Iter(n), -1.0)] {
        rhs.add_f(p, c);
        rhs.add_h(p, c);
    }
    Ok((lhs, rhs))
}

pub fn verify_composite_grad_identity(
    h: &StepsizeMatrix,
    cert: &GradCertificate,
    lift: &CompositeGradLift,
) -> Result<IdentityReport> {
    let (lhs, rhs) = composite_grad_identity_sides(h, cert, lift)?;
    Ok(IdentityReport::from_residuals(lhs.compare(&rhs)?, crate::global_tol()))
}

/// A certified composite rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertifiedRate {
    pub metric: Metric,
    /// `F_n - F_* <= constant |x_0 - x_*|^2` or
    /// `|g_n + s_n|^2 <= constant (F_0 - F_n)`.
    pub constant: f64,
}

pub fn certified_func_rate(lift: &CompositeFuncLift) -> CertifiedRate {
    CertifiedRate { metric: Metric::Func, constant: lift.rate() }
}

pub fn certified_grad_rate(lift: &CompositeGradLift) -> CertifiedRate {
    CertifiedRate { metric: Metric::Grad, constant: lift.rate() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::certificates::{
        gsw_grad_certificate, ogm_func_certificate, ogmg_grad_certificate, silver_func_certificate,
        verify_func_identity_tol, verify_grad_identity_tol,
    };
    use crate::schedules::{ogm_stepsize_matrix, ogmg_stepsize_matrix, ScheduleSpec, ThetaSequence, RHO};
    use approx::assert_relative_eq;
    use std::f64::consts::SQRT_2;

    fn silver(k: u32) -> (StepsizeMatrix, FuncCertificate) {
        (ScheduleSpec::Silver { k }.stepsize_matrix().unwrap(), silver_func_certificate(k).unwrap())
    }

    #[test]
    fn silver_single_step_sigma() {
        let (h, c) = silver(1);
        let lift = lift_func(&h, &c, XiChoice::Value(1.0 / SQRT_2)).unwrap();
        // sigma_1 = (lambda_{0,1} + lambda_{1,0}) / gamma_1, sigma_* = lambda_{*,1} / gamma_1
        assert_relative_eq!(lift.sigma[0], (RHO + 1.0) / RHO, epsilon = 1e-14);
        assert_relative_eq!(lift.sigma[0], SQRT_2, epsilon = 1e-14);
        assert_relative_eq!(lift.sigma[1], 1.0, epsilon = 1e-14);
        assert_relative_eq!(lift.sigma.sum(), c.gamma[1], epsilon = 1e-13);
    }

    #[test]
    fn ogm_sigma_pattern_and_small_case() {
        for n in 1..=10 {
            let h = ogm_stepsize_matrix(n).unwrap();
            let c = ogm_func_certificate(n).unwrap();
            let lift = lift_func(&h, &c, XiChoice::Value(0.3)).unwrap();
            let tn = ThetaSequence::new(n).unwrap().last();
            for i in 0..n - 1 {
                assert!(lift.sigma[i].abs() < 1e-13);
            }
            assert_relative_eq!(lift.sigma[n - 1], tn - 1.0, epsilon = 1e-12);
            assert_relative_eq!(lift.sigma[n], 1.0, epsilon = 1e-12);
        }
        let h = ogm_stepsize_matrix(1).unwrap();
        let c = ogm_func_certificate(1).unwrap();
        let lift = lift_func(&h, &c, XiChoice::Value(1.0 / 3.0)).unwrap();
        let expect = DMatrix::from_row_slice(2, 2, &[3.0, -3.0, -3.0, 3.0]);
        assert!((&lift.l - expect).abs().max() < 1e-12);
        assert_relative_eq!(lift.v[0], -1.0, epsilon = 1e-12);
        let feas = check_func_feasibility(&lift, 1.0 / 3.0).unwrap();
        assert!(feas.pass, "{feas:?}");
        assert_relative_eq!(lift.rate(), 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn silver_lift_structure() {
        for k in 1..=4 {
            let (h, c) = silver(k);
            assert!(verify_func_identity_tol(&h, &c, 1e-9).unwrap().pass);
            let lift = lift_func(&h, &c, XiChoice::Value(1.0 / SQRT_2)).unwrap();
            let n = c.n;
            assert!(lift.mu_tilde_gap < 1e-9);
            assert!(lift.v.sum().abs() < 1e-10);
            assert!(LaplacianCheck::of(&lift.l).passes(1e-10));
            if k >= 2 {
                let mut expect = DVector::zeros(n + 1);
                expect[0] = -1.0;
                expect[n] = 1.0;
                assert!((&lift.v - expect).abs().max() < 1e-10);
                let schur = lift.schur_complement(1.0 / SQRT_2).unwrap();
                assert!(schur[(0, n)].abs() < 1e-10 * schur.abs().max());
            }
            let feas = check_func_feasibility(&lift, 1.0 / SQRT_2).unwrap();
            assert!(feas.pass, "k={k} {feas:?}");
            let rep = verify_composite_func_identity(&h, &c, &lift).unwrap();
            assert!(rep.pass, "k={k} {rep:?}");
            let expected = RHO / (SQRT_2 * (4.0 * RHO.powi(k as i32) - 2.0));
            assert_relative_eq!(lift.rate(), expected, max_relative = 1e-12);
        }
    }

    #[test]
    fn tiny_xi_breaks_schur_route() {
        let (h, c) = silver(3);
        let lift = lift_func(&h, &c, XiChoice::Value(1e-6)).unwrap();
        let feas = check_func_feasibility(&lift, 1e-6).unwrap();
        assert!(!feas.schur_ok);
        assert!(check_func_feasibility(&lift, 0.0).is_err());
        assert!(lift_func(&h, &c, XiChoice::Value(-1.0)).is_err());
    }

    #[test]
    fn pseudoinverse_xi_is_not_above_default_choice() {
        for k in 1..=4 {
            let (h, c) = silver(k);
            let lift = lift_func(&h, &c, XiChoice::Pseudoinverse).unwrap();
            assert!(lift.xi <= 1.0 / SQRT_2 + 1e-12, "k={k} xi={}", lift.xi);
            assert!(lift.xi >= 0.0);
            assert!(check_func_feasibility(&lift, lift.xi.max(1e-12)).unwrap().psd_ok);
        }
    }

    #[test]
    fn prox_free_part_collapses_to_unconstrained() {
        let h = ogm_stepsize_matrix(6).unwrap();
        let c = ogm_func_certificate(6).unwrap();
        let lift = lift_func(&h, &c, XiChoice::Value(0.3)).unwrap();
        let (lhs, rhs) = composite_func_identity_sides(&h, &c, &lift).unwrap();
        let collapsed = lhs.drop_prox_terms().compare(&rhs.drop_prox_terms()).unwrap();
        let plain = verify_func_identity_tol(&h, &c, 1e-9).unwrap();
        assert!(collapsed.max_absolute() < 1e-10);
        assert!((collapsed.max_absolute() - plain.residuals.max_absolute()).abs() < 1e-10);
    }

    #[test]
    fn grad_lift_small_cases() {
        let h = ogmg_stepsize_matrix(1).unwrap();
        let c = ogmg_grad_certificate(1).unwrap();
        let lift = lift_grad(&h, &c).unwrap();
        assert_relative_eq!(lift.rate(), 2.0 / 3.0, epsilon = 1e-14);
        let h = ScheduleSpec::Gsw { k: 1 }.stepsize_matrix().unwrap();
        let c = gsw_grad_certificate(1).unwrap();
        let lift = lift_grad(&h, &c).unwrap();
        assert_relative_eq!(lift.xi, 0.0, epsilon = 1e-15);
        assert_relative_eq!(lift.rate(), 2.0 / 3.0, epsilon = 1e-14);
        assert!(lift.rate() < 2.0 * SQRT_2 / 4.0);
    }

    #[test]
    fn grad_lifts_verify() {
        for n in [2, 3, 7, 12] {
            let h = ogmg_stepsize_matrix(n).unwrap();
            let c = ogmg_grad_certificate(n).unwrap();
            assert!(verify_grad_identity_tol(&h, &c, 1e-9).unwrap().pass);
            let lift = lift_grad(&h, &c).unwrap();
            let feas = check_grad_feasibility(&lift);
            assert!(feas.pass, "ogmg n={n} {feas:?}");
            assert!(verify_composite_grad_identity(&h, &c, &lift).unwrap().pass);
            let tn2 = ThetaSequence::new(n).unwrap().last().powi(2);
            assert_relative_eq!(lift.rate(), 2.0 * (5f64.sqrt() - 1.0) / tn2, max_relative = 1e-12);
        }
        for k in 1..=4 {
            let h = ScheduleSpec::Gsw { k }.stepsize_matrix().unwrap();
            let c = gsw_grad_certificate(k).unwrap();
            let lift = lift_grad(&h, &c).unwrap();
            let feas = check_grad_feasibility(&lift);
            assert!(feas.pass, "gsw k={k} {feas:?}");
            assert!(verify_composite_grad_identity(&h, &c, &lift).unwrap().pass);
            let mu0 = lift.mu.row(0);
            for j in 0..c.n {
                let e = if j == 0 { 1.0 } else { 0.0 };
                assert!((mu0[j] - e).abs() < 1e-10, "k={k} j={j} {}", mu0[j]);
            }
        }
    }

    #[test]
    fn flipped_mu_fails_item_one() {
        let h = ogmg_stepsize_matrix(5).unwrap();
        let c = ogmg_grad_certificate(5).unwrap();
        let mut lift = lift_grad(&h, &c).unwrap();
        let (r, col) = lift.mu.iamax_full();
        lift.mu[(r, col)] = -lift.mu[(r, col)];
        assert!(!check_grad_feasibility(&lift).mu_ok);
    }

    #[test]
    fn laplacian_and_dominance_helpers() {
        let l = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, -1.0, 1.0]);
        assert!(LaplacianCheck::of(&l).passes(1e-12));
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(!LaplacianCheck::of(&bad).passes(1e-12));
        assert!(diagonal_dominance_margin(&bad) > 0.0);
        let v = DVector::from_column_slice(&[1.0, -1.0]);
        assert_relative_eq!(pseudoinverse_quadratic(&l, &v), 1.0, epsilon = 1e-12);
    }
}
