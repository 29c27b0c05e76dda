//! Numerical checks of the structural facts behind the certificates:
//! sign patterns of scaled partial sums, the `theta`/`phi` bounds and the
//! triangular systems whose solutions give the columns of `mu-tilde`.
//!
//! Each check reports its worst margin. Inequalities `a >= 0` contribute
//! `a / scale`, equalities `a = b` contribute `-|a - b| / scale`, with
//! `scale = max(1, |a|, |b|)`. A check passes when the worst margin is
//! at least `-tol`.

use nalgebra::{DMatrix, DVector};

use crate::certificates::{
    grad_aggregates, gsw_grad_certificate, ogm_func_certificate, ogmg_grad_certificate,
    silver_func_certificate,
};
use crate::error::{invalid, Error, Result};
use crate::lift::{lift_func, lift_grad, XiChoice};
use crate::schedules::{
    gsw_schedule, ogm_stepsize_matrix, silver_schedule, u_matrix,
    StepsizeMatrix, ThetaSequence,
};

pub const STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaCheck {
    pub name: String,
    pub checks: usize,
    pub worst: f64,
    /// Description of the tightest comparison.
    pub worst_at: String,
}

impl LemmaCheck {
    fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), checks: 0, worst: f64::INFINITY, worst_at: String::new() }
    }

    fn record(&mut self, margin: f64, at: impl FnOnce() -> String) {
        self.checks += 1;
        if margin < self.worst {
            self.worst = margin;
            self.worst_at = at();
        }
    }

    fn nonneg(&mut self, value: f64, at: impl FnOnce() -> String) {
        self.record(value / value.abs().max(1.0), at);
    }

    fn nonpos(&mut self, value: f64, at: impl FnOnce() -> String) {
        self.nonneg(-value, at);
    }

    fn equal(&mut self, a: f64, b: f64, at: impl FnOnce() -> String) {
        let scale = a.abs().max(b.abs()).max(1.0);
        self.record(-(a - b).abs() / scale, at);
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.worst >= -tol
    }

    pub fn pass(&self) -> bool {
        self.passes(STRUCTURE_TOL)
    }
}

/// `-H~^{-1} A^T H~^T` for diagonal `H`, via the scaled partial-sum formula.
pub fn partial_sum_kernel(h: &StepsizeMatrix, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.n();
    if !h.is_diagonal() {
        return Err(invalid("partial-sum formula needs a diagonal stepsize matrix"));
    }
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.nrows() });
    }
    let alpha = h.diagonal_entries();
    // tail[l][c] = sum_{l' >= l} A[l', c]
    let mut tail = DMatrix::<f64>::zeros(n + 1, n);
    for l in (0..n).rev() {
        for c in 0..n {
            tail[(l, c)] = tail[(l + 1, c)] + a[(l, c)];
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| {
        if i + 1 < n {
            alpha[j] * (tail[(j, i + 1)] / alpha[i + 1] - tail[(j, i)] / alpha[i])
        } else {
            -alpha[j] * tail[(j, n - 1)] / alpha[n - 1]
        }
    }))
}

/// Same quantity by explicit triangular solves.
pub fn partial_sum_kernel_direct(h: &StepsizeMatrix, a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = h.n();
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.nrows() });
    }
    let cum = h.cumulative();
    Ok(-cum.solve(&(a.transpose() * cum.as_matrix().transpose())))
}

fn scaled_partial_sums(
    name: &str,
    lambda: &DMatrix<f64>,
    gamma: &[f64],
    n: usize,
) -> LemmaCheck {
    let mut c = LemmaCheck::new(name);
    for j in 1..=n {
        for i in 0..=n {
            let d = lambda[(i, j - 1)] / gamma[j - 1] - lambda[(i, j)] / gamma[j];
            if i + 2 <= j {
                c.nonneg(d, || format!("i={i} j={j}"));
            } else if i >= j + 1 {
                c.nonpos(d, || format!("i={i} j={j}"));
            }
        }
    }
    c
}

/// Sign pattern of `lambda_{i,j-1}/gamma_{j-1} - lambda_{i,j}/gamma_j` for
/// the silver multipliers, with `gamma_n` replaced by 1.
pub fn silver_partial_sums(k: u32) -> Result<LemmaCheck> {
    let cert = silver_func_certificate(k)?;
    let mut gamma: Vec<f64> = cert.gamma.iter().copied().collect();
    gamma[cert.n] = 1.0;
    Ok(scaled_partial_sums(&format!("silver partial sums k={k}"), &cert.lambda, &gamma, cert.n))
}

/// `t_j = pi_j sum_{l<j} lambda_{l,n} - lambda_{j-1,n} - lambda_{n,j-1} >= 0`.
pub fn silver_t_sums(k: u32) -> Result<LemmaCheck> {
    if k < 2 {
        return Err(invalid("t_j sums are defined for k >= 2"));
    }
    let cert = silver_func_certificate(k)?;
    let pi = silver_schedule(k)?;
    let n = cert.n;
    let lam = &cert.lambda;
    let mut c = LemmaCheck::new(format!("silver t_j k={k}"));
    for j in 1..n {
        let partial: f64 = (1..j).map(|l| lam[(l, n)]).sum();
        let t = pi[j - 1] * partial - lam[(j - 1, n)] - lam[(n, j - 1)];
        c.nonneg(t, || format!("j={j}"));
    }
    Ok(c)
}

/// Scaled partial sums of the gradient-norm multipliers with
/// `gamma' = [w, 1]`.
pub fn gsw_partial_sums(k: u32) -> Result<LemmaCheck> {
    let cert = gsw_grad_certificate(k)?;
    let mut gamma = gsw_schedule(k)?.steps;
    gamma.push(1.0);
    Ok(scaled_partial_sums(&format!("gsw partial sums k={k}"), &cert.lambda, &gamma, cert.n))
}

/// Difference and concentration bounds on `theta` and `phi`.
pub fn theta_phi_bounds(n: usize) -> Result<LemmaCheck> {
    let t = ThetaSequence::new(n)?;
    let mut c = LemmaCheck::new(format!("theta/phi bounds n={n}"));
    for i in 0..n {
        let d = t.get(i + 1) - t.get(i);
        c.nonneg(d - 0.5, || format!("theta diff > 1/2 at i={i}"));
        if i + 2 <= n {
            c.nonneg(0.75 - d, || format!("theta diff < 3/4 at i={i}"));
        }
    }
    let upper = 1.0 + std::f64::consts::FRAC_1_SQRT_2;
    for j in 1..=n {
        let p = t.phi(j);
        if j >= 2 {
            c.nonneg(p - 4.0 / 3.0, || format!("phi_{j} >= 4/3"));
            c.nonneg(upper - p, || format!("phi_{j} <= 1 + 1/sqrt 2"));
        }
        if j >= 3 {
            c.nonneg(p - 15.0 / 11.0, || format!("phi_{j} >= 15/11"));
        }
        if j >= 4 {
            c.nonneg(p - 1.4, || format!("phi_{j} >= 7/5"));
        }
        if j < n {
            c.nonneg(1.5 - p, || format!("phi_{j} <= 3/2"));
        }
    }
    Ok(c)
}

fn solve_upper(u: &DMatrix<f64>, rhs: &DVector<f64>) -> DVector<f64> {
    u.solve_upper_triangular(rhs).expect("nonzero diagonal")
}

/// Columns of `mu-tilde` for OGM through `U(phi) x = b`, including the
/// closed-form solution, its sign pattern and the resulting `mu` entries.
pub fn ogm_linear_systems(n: usize) -> Result<LemmaCheck> {
    let t = ThetaSequence::new(n)?;
    let th = |i: usize| t.get(i);
    let phi = t.phis();
    let ph = |i: usize| phi[i - 1];
    let uphi = u_matrix(&phi);
    let utheta = u_matrix(&t.values()[1..]);
    let un_inv = u_matrix(&vec![1.0; n])
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .expect("unit triangular");

    let h = ogm_stepsize_matrix(n)?;
    let cert = ogm_func_certificate(n)?;
    let lift = lift_func(&h, &cert, XiChoice::Value(0.0))?;

    let mut c = LemmaCheck::new(format!("ogm linear systems n={n}"));
    for j in 1..=n {
        let mut b = DVector::zeros(n);
        if j < n {
            for i in 1..=j {
                b[i - 1] = 2.0 * th(j - 1);
            }
            b[j] = -(th(j) - 1.0);
        } else {
            b.fill(2.0 * th(n - 1) + th(n) - 1.0);
        }
        let x = solve_upper(&uphi, &b);
        let xi = |i: usize| x[i - 1];
        if j < n {
            for i in j + 2..=n {
                c.equal(xi(i), 0.0, || format!("x_{i}=0 (j={j})"));
            }
            c.equal(xi(j + 1), -(th(j) - 1.0) / ph(j + 1), || format!("x_{{j+1}} (j={j})"));
            c.nonpos(xi(j + 1), || format!("x_{{j+1}} < 0 (j={j})"));
            c.equal(xi(j), (2.0 * th(j - 1) - xi(j + 1)) / ph(j), || format!("x_j (j={j})"));
            c.nonneg(xi(j), || format!("x_j > 0 (j={j})"));
            for i in 1..j {
                let by_phi = (ph(i + 1) - 1.0) / ph(i) * xi(i + 1);
                let by_theta = (th(i + 1) - 1.0) / (th(i - 1) + 2.0 * th(i)) * xi(i + 1);
                c.equal(xi(i), by_phi, || format!("x_{i} recursion (j={j})"));
                c.equal(xi(i), by_theta, || format!("x_{i} theta form (j={j})"));
                c.nonneg(xi(i), || format!("x_{i} > 0 (j={j})"));
            }
        } else {
            for i in 1..n {
                c.equal(xi(i), (ph(i + 1) - 1.0) / ph(i) * xi(i + 1), || format!("x_{i} (j=n)"));
                c.nonneg(xi(i), || format!("x_{i} > 0 (j=n)"));
            }
            c.nonneg(xi(n), || "x_n > 0 (j=n)".into());
        }
        // mu-tilde column j = -U_n^{-1} U(theta) x
        let col = -(&un_inv * &utheta * &x);
        for i in 1..=n {
            c.equal(lift.mu_tilde[(i - 1, j - 1)], col[i - 1], || format!("mu-tilde ({i},{j})"));
        }
        if j < n {
            c.equal(lift.mu_tilde[(j, j - 1)], -th(j + 1) * xi(j + 1), || format!("mu_{{j+1,j}} (j={j})"));
            for i in 1..j {
                c.equal(
                    lift.mu_tilde[(i - 1, j - 1)],
                    (th(i - 1) + th(i)) * xi(i),
                    || format!("mu_{{i,j}} i={i} j={j}"),
                );
            }
        }
    }
    Ok(c)
}

fn ogmg_scaled_column(lhat: &DMatrix<f64>, t: &ThetaSequence, j: usize) -> DVector<f64> {
    let n = t.n();
    let rev: Vec<f64> = (1..=n).rev().map(|i| t.get(i)).collect();
    let tn2 = t.last().powi(2);
    (u_matrix(&rev) * lhat.column(j - 1)) / tn2
}

/// Typical columns `2 <= j <= n-1` of the OGM-G system, parts (a)-(d).
pub fn ogmg_typical_columns(n: usize) -> Result<LemmaCheck> {
    if n < 3 {
        return Err(invalid("typical OGM-G columns need n >= 3"));
    }
    let t = ThetaSequence::new(n)?;
    let th = |i: usize| t.get(i);
    let ph = |i: usize| t.phi(i);
    let rev_phi: Vec<f64> = (1..=n).rev().map(|i| t.phi(i)).collect();
    let uphi = u_matrix(&rev_phi);
    let cert = ogmg_grad_certificate(n)?;
    let lhat = grad_aggregates(&cert).hat;

    let mut c = LemmaCheck::new(format!("ogm-g typical columns n={n}"));
    for j in 2..n {
        let mut b = DVector::zeros(n);
        for i in 1..=j.saturating_sub(2) {
            b[i - 1] = -1.0;
        }
        b[j - 2] = th(n - j + 2) * th(n - j + 1) - th(n - j + 2) - th(n - j + 1);
        b[j - 1] = -(2.0 * th(n - j + 1) - 1.0) * th(n - j + 1);
        b[j] = th(n - j + 1) * th(n - j);
        let from_cert = ogmg_scaled_column(&lhat, &t, j) * (2.0 * th(n - j + 1) * th(n - j).powi(2));
        for i in 0..n {
            c.equal(b[i], from_cert[i], || format!("right-hand side row {} (j={j})", i + 1));
        }
        let x = solve_upper(&uphi, &b);
        let x = |i: usize| x[i - 1];
        for i in j + 2..=n {
            c.equal(x(i), 0.0, || format!("x'_{i}=0 (j={j})"));
        }
        c.nonneg(x(j + 1), || format!("x'_{{j+1}} > 0 (j={j})"));
        c.nonpos(x(j), || format!("x'_j < 0 (j={j})"));
        c.nonneg(x(j - 1), || format!("x'_{{j-1}} > 0 (j={j})"));
        if j >= 3 {
            c.nonpos(x(j - 2), || format!("x'_{{j-2}} < 0 (j={j})"));
            for k in 1..=j - 3 {
                c.equal(x(k), (ph(n - k) - 1.0) / ph(n - k + 1) * x(k + 1), || format!("x'_{k} recursion (j={j})"));
            }
            let d = th(n - j).powi(2) + th(n - j + 1) / (2.0 * th(n - j + 2)) * x(j - 2) - 0.5 * x(j - 1);
            c.nonneg(d, || format!("(d) j={j}"));
        }
        let cc = -th(n - j + 1).powi(2) + 0.5 * x(j - 1) - th(n - j + 1) / (2.0 * th(n - j)) * x(j);
        c.nonneg(cc, || format!("(c) j={j}"));
    }
    Ok(c)
}

/// The `n`-th column of the OGM-G system.
pub fn ogmg_last_column(n: usize) -> Result<LemmaCheck> {
    if n < 3 {
        return Err(invalid("the last-column system needs n >= 3"));
    }
    let t = ThetaSequence::new(n)?;
    let th = |i: usize| t.get(i);
    let ph = |i: usize| t.phi(i);
    let rev_phi: Vec<f64> = (1..=n).rev().map(|i| t.phi(i)).collect();
    let cert = ogmg_grad_certificate(n)?;
    let lhat = grad_aggregates(&cert).hat;

    let mut c = LemmaCheck::new(format!("ogm-g last column n={n}"));
    let mut b = DVector::from_element(n, -(2.0 * th(1).powi(2) - 1.0));
    b[n - 2] = th(2) - 2.0 * th(1).powi(2);
    b[n - 1] = -2.0 * th(1).powi(3);
    let from_cert = ogmg_scaled_column(&lhat, &t, n) * (2.0 * th(1).powi(2));
    for i in 0..n {
        c.equal(b[i], from_cert[i], || format!("right-hand side row {}", i + 1));
    }
    let y = solve_upper(&u_matrix(&rev_phi), &b);
    let y = |i: usize| y[i - 1];
    c.equal(y(n), -4.0 * th(1), || "y'_n".into());
    c.nonpos(y(n), || "y'_n < 0".into());
    let ynm1 = (th(2) + 2.0 * th(1) - 2.0) / ph(2);
    c.equal(y(n - 1), ynm1, || "y'_{n-1}".into());
    c.nonneg(y(n - 1), || "y'_{n-1} > 0".into());
    c.equal(y(n - 2), -(th(2) - 1.0 - (ph(2) - 1.0) * ynm1) / ph(3), || "y'_{n-2}".into());
    c.nonpos(y(n - 2), || "y'_{n-2} < 0".into());
    for k in 1..=n - 3 {
        c.equal(y(k), (ph(n - k) - 1.0) / ph(n - k + 1) * y(k + 1), || format!("y'_{k} recursion"));
    }
    Ok(c)
}

/// `mu'_{0, .} = e_1` for the gradient-norm silver-type schedule.
pub fn gsw_first_row(k: u32) -> Result<LemmaCheck> {
    let h = StepsizeMatrix::diagonal(&gsw_schedule(k)?.steps)?;
    let cert = gsw_grad_certificate(k)?;
    let lift = lift_grad(&h, &cert)?;
    let mut c = LemmaCheck::new(format!("gsw mu'_0 k={k}"));
    for j in 1..=cert.n {
        c.equal(lift.mu_at(0, j), if j == 1 { 1.0 } else { 0.0 }, || format!("j={j}"));
    }
    Ok(c)
}
