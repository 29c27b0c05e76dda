//! Formal quadratic-plus-linear forms over the symbolic vectors of a run.
//!
//! Basis layout for an `n`-step method (fixed everywhere in the crate):
//!
//! | index            | symbol      |
//! |------------------|-------------|
//! | `0`              | `x_0 - x_*` |
//! | `1 + i`          | `g_i`, `0 <= i <= n` |
//! | `n + 1 + i`      | `s_i`, `1 <= i <= n` (composite only) |
//! | `2n + 2`         | `s_*` (composite only) |
//!
//! Scalars are `f_0..f_n, f_*` and `h_0..h_n, h_*`, with `*` stored last.
//! The optimal gradient is substituted at construction: `g_* = 0` in the
//! unconstrained setting and `g_* = -s_*` in the composite one.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::schedules::CumulativeStepsizeMatrix;

/// An iterate index `0..=n` or the minimizer `*`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Point {
    Iter(usize),
    Star,
}

impl Point {
    /// Storage slot: `i` for iterates, `n + 1` for `*`.
    pub fn slot(self, n: usize) -> usize {
        match self {
            Point::Iter(i) => i,
            Point::Star => n + 1,
        }
    }
}

impl std::fmt::Display for Point {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Point::Iter(i) => write!(f, "{i}"),
            Point::Star => write!(f, "*"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedgerMode {
    Unconstrained,
    Composite,
}

/// Sparse linear combination of basis vectors.
pub type LinExpr = Vec<(usize, f64)>;

/// Which valid inequality to expand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inequality {
    /// `f_i - f_j - <g_j, x_i - x_j> - 1/2 |g_i - g_j|^2` without prox terms.
    Unconstrained,
    /// Same expression, iterates and `g_*` taken from the composite extension.
    CompositeF,
    /// `h_i - h_j - <s_j, x_i - x_j>`.
    CompositeH,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GramLedger {
    n: usize,
    mode: LedgerMode,
    quad: DMatrix<f64>,
    lin_f: DVector<f64>,
    lin_h: DVector<f64>,
    quad_mag: DMatrix<f64>,
    lin_f_mag: DVector<f64>,
    lin_h_mag: DVector<f64>,
}

/// Coefficient mismatch between two ledgers.
///
/// Relative values divide each entry difference by `max(1, m)` where `m`
/// is the accumulated absolute size of the terms that produced that entry.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Residuals {
    pub quad: f64,
    pub lin_f: f64,
    pub lin_h: f64,
    pub quad_abs: f64,
    pub lin_f_abs: f64,
    pub lin_h_abs: f64,
}

impl Residuals {
    pub fn max_relative(&self) -> f64 {
        self.quad.max(self.lin_f).max(self.lin_h)
    }

    pub fn max_absolute(&self) -> f64 {
        self.quad_abs.max(self.lin_f_abs).max(self.lin_h_abs)
    }

    pub fn passes(&self, tol: f64) -> bool {
        self.max_relative() < tol
    }
}

impl GramLedger {
    pub fn new(n: usize, mode: LedgerMode) -> Self {
        let dim = match mode {
            LedgerMode::Unconstrained => n + 2,
            LedgerMode::Composite => 2 * n + 3,
        };
        Self {
            n,
            mode,
            quad: DMatrix::zeros(dim, dim),
            lin_f: DVector::zeros(n + 2),
            lin_h: DVector::zeros(n + 2),
            quad_mag: DMatrix::zeros(dim, dim),
            lin_f_mag: DVector::zeros(n + 2),
            lin_h_mag: DVector::zeros(n + 2),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn mode(&self) -> LedgerMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.quad.nrows()
    }

    pub const X0_MINUS_XSTAR: usize = 0;

    pub fn g(&self, i: usize) -> usize {
        assert!(i <= self.n, "g_{i} outside 0..={}", self.n);
        1 + i
    }

    pub fn s(&self, i: usize) -> usize {
        assert!(self.mode == LedgerMode::Composite, "s-vectors need a composite ledger");
        assert!(i >= 1 && i <= self.n, "s_{i} outside 1..={}", self.n);
        self.n + 1 + i
    }

    pub fn s_star(&self) -> usize {
        assert!(self.mode == LedgerMode::Composite, "s-vectors need a composite ledger");
        2 * self.n + 2
    }

    /// Human-readable name of a basis index.
    pub fn label(&self, idx: usize) -> String {
        let n = self.n;
        if idx == 0 {
            "x0-x*".into()
        } else if idx <= n + 1 {
            format!("g{}", idx - 1)
        } else if idx <= 2 * n + 1 {
            format!("s{}", idx - n - 1)
        } else {
            "s*".into()
        }
    }

    pub fn quad(&self) -> &DMatrix<f64> {
        &self.quad
    }

    pub fn lin_f(&self) -> &DVector<f64> {
        &self.lin_f
    }

    pub fn lin_h(&self) -> &DVector<f64> {
        &self.lin_h
    }

    /// Adds `c <a, b>`.
    pub fn add_inner(&mut self, a: &[(usize, f64)], b: &[(usize, f64)], c: f64) {
        if c == 0.0 {
            return;
        }
        for &(k, ak) in a {
            for &(l, bl) in b {
                let v = 0.5 * c * ak * bl;
                if v == 0.0 {
                    continue;
                }
                self.quad[(k, l)] += v;
                self.quad[(l, k)] += v;
                self.quad_mag[(k, l)] += v.abs();
                self.quad_mag[(l, k)] += v.abs();
            }
        }
    }

    /// Adds `c |a|^2`.
    pub fn add_square(&mut self, a: &[(usize, f64)], c: f64) {
        self.add_inner(a, a, c);
    }

    /// Adds `c <e_k, e_l>` for basis indices `k`, `l`.
    pub fn add_entry(&mut self, k: usize, l: usize, c: f64) {
        self.add_inner(&[(k, 1.0)], &[(l, 1.0)], c);
    }

    pub fn add_f(&mut self, p: Point, c: f64) {
        let s = p.slot(self.n);
        self.lin_f[s] += c;
        self.lin_f_mag[s] += c.abs();
    }

    pub fn add_h(&mut self, p: Point, c: f64) {
        let s = p.slot(self.n);
        self.lin_h[s] += c;
        self.lin_h_mag[s] += c.abs();
    }

    /// `self += c * other`.
    pub fn add_scaled(&mut self, other: &GramLedger, c: f64) -> Result<()> {
        self.check_shape(other)?;
        self.quad += &other.quad * c;
        self.lin_f += &other.lin_f * c;
        self.lin_h += &other.lin_h * c;
        self.quad_mag += &other.quad_mag * c.abs();
        self.lin_f_mag += &other.lin_f_mag * c.abs();
        self.lin_h_mag += &other.lin_h_mag * c.abs();
        Ok(())
    }

    fn check_shape(&self, other: &GramLedger) -> Result<()> {
        if self.n != other.n || self.mode != other.mode {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        Ok(())
    }

    /// Coefficient-wise comparison against another ledger.
    pub fn compare(&self, other: &GramLedger) -> Result<Residuals> {
        self.check_shape(other)?;
        let (quad, quad_abs) = entry_residual(
            self.quad.iter().zip(other.quad.iter()),
            self.quad_mag.iter().zip(other.quad_mag.iter()),
        );
        let (lin_f, lin_f_abs) = entry_residual(
            self.lin_f.iter().zip(other.lin_f.iter()),
            self.lin_f_mag.iter().zip(other.lin_f_mag.iter()),
        );
        let (lin_h, lin_h_abs) = entry_residual(
            self.lin_h.iter().zip(other.lin_h.iter()),
            self.lin_h_mag.iter().zip(other.lin_h_mag.iter()),
        );
        Ok(Residuals { quad, lin_f, lin_h, quad_abs, lin_f_abs, lin_h_abs })
    }

    /// Restriction to the unconstrained sub-basis, dropping `h` and every
    /// `s` coordinate.
    pub fn drop_prox_terms(&self) -> GramLedger {
        let mut out = GramLedger::new(self.n, LedgerMode::Unconstrained);
        let d = out.dim();
        out.quad.copy_from(&self.quad.view((0, 0), (d, d)));
        out.quad_mag.copy_from(&self.quad_mag.view((0, 0), (d, d)));
        out.lin_f.copy_from(&self.lin_f);
        out.lin_f_mag.copy_from(&self.lin_f_mag);
        out
    }

    /// Value of the form on concrete vectors (one per basis element) and
    /// function values `f_0..f_n, f_*`, `h_0..h_n, h_*`.
    pub fn evaluate(&self, vectors: &[DVector<f64>], f: &[f64], h: &[f64]) -> Result<f64> {
        if vectors.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: vectors.len() });
        }
        if f.len() != self.n + 2 {
            return Err(Error::DimensionMismatch { expected: self.n + 2, got: f.len() });
        }
        let mut total = 0.0;
        for k in 0..self.dim() {
            for l in 0..self.dim() {
                let c = self.quad[(k, l)];
                if c != 0.0 {
                    total += c * vectors[k].dot(&vectors[l]);
                }
            }
        }
        for (c, v) in self.lin_f.iter().zip(f) {
            if *c != 0.0 {
                total += c * v;
            }
        }
        if self.mode == LedgerMode::Composite {
            if h.len() != self.n + 2 {
                return Err(Error::DimensionMismatch { expected: self.n + 2, got: h.len() });
            }
            for (c, v) in self.lin_h.iter().zip(h) {
                if *c != 0.0 {
                    total += c * v;
                }
            }
        }
        Ok(total)
    }
}

fn entry_residual<'a>(
    vals: impl Iterator<Item = (&'a f64, &'a f64)>,
    mags: impl Iterator<Item = (&'a f64, &'a f64)>,
) -> (f64, f64) {
    let mut rel = 0.0f64;
    let mut abs = 0.0f64;
    for ((a, b), (ma, mb)) in vals.zip(mags) {
        let d = (a - b).abs();
        abs = abs.max(d);
        rel = rel.max(d / (ma + mb).max(1.0));
    }
    (rel, abs)
}

/// Expands iterates of a method with cumulative stepsizes `H~` over the
/// ledger basis.
#[derive(Debug, Clone, Copy)]
pub struct IterateExpander<'a> {
    cumulative: &'a CumulativeStepsizeMatrix,
    mode: LedgerMode,
}

impl<'a> IterateExpander<'a> {
    pub fn new(cumulative: &'a CumulativeStepsizeMatrix, mode: LedgerMode) -> Self {
        Self { cumulative, mode }
    }

    pub fn n(&self) -> usize {
        self.cumulative.n()
    }

    fn check(&self, p: Point) -> Result<()> {
        match p {
            Point::Iter(i) if i > self.n() => {
                Err(Error::IndexOutOfRange(format!("iterate {i} exceeds n = {}", self.n())))
            }
            _ => Ok(()),
        }
    }

    fn g_idx(&self, i: usize) -> usize {
        1 + i
    }

    fn s_idx(&self, i: usize) -> usize {
        self.n() + 1 + i
    }

    /// `x_p - x_0`.
    pub fn x_offset(&self, p: Point) -> Result<LinExpr> {
        self.check(p)?;
        let n = self.n();
        Ok(match p {
            Point::Star => vec![(GramLedger::X0_MINUS_XSTAR, -1.0)],
            Point::Iter(i) => {
                let mut e = Vec::with_capacity(2 * i);
                for l in 0..i {
                    let w = self.cumulative.weight(i, l);
                    if w == 0.0 {
                        continue;
                    }
                    e.push((self.g_idx(l), -w));
                    if self.mode == LedgerMode::Composite && l + 1 <= n {
                        e.push((self.s_idx(l + 1), -w));
                    }
                }
                e
            }
        })
    }

    /// `x_p - x_q`.
    pub fn x_diff(&self, p: Point, q: Point) -> Result<LinExpr> {
        let mut e = self.x_offset(p)?;
        e.extend(self.x_offset(q)?.into_iter().map(|(k, c)| (k, -c)));
        Ok(e)
    }

    pub fn grad(&self, p: Point) -> Result<LinExpr> {
        self.check(p)?;
        Ok(match (p, self.mode) {
            (Point::Iter(i), _) => vec![(self.g_idx(i), 1.0)],
            (Point::Star, LedgerMode::Unconstrained) => vec![],
            (Point::Star, LedgerMode::Composite) => vec![(2 * self.n() + 2, -1.0)],
        })
    }

    pub fn subgrad(&self, p: Point) -> Result<LinExpr> {
        self.check(p)?;
        if self.mode != LedgerMode::Composite {
            return Err(Error::InvalidArgument("subgradients need a composite ledger".into()));
        }
        match p {
            Point::Iter(0) => Err(Error::IndexOutOfRange("s_0 is not part of the basis".into())),
            Point::Iter(i) => Ok(vec![(self.s_idx(i), 1.0)]),
            Point::Star => Ok(vec![(2 * self.n() + 2, 1.0)]),
        }
    }

    /// Adds `coef * Q_{ij}` of the given kind to `ledger`.
    pub fn add_inequality(
        &self,
        ledger: &mut GramLedger,
        kind: Inequality,
        i: Point,
        j: Point,
        coef: f64,
    ) -> Result<()> {
        if i == j {
            return Err(Error::InvalidArgument(format!("inequality needs i != j, got {i}")));
        }
        let needed = match kind {
            Inequality::Unconstrained => LedgerMode::Unconstrained,
            _ => LedgerMode::Composite,
        };
        if needed != self.mode || ledger.mode() != self.mode || ledger.n() != self.n() {
            return Err(Error::InvalidArgument("ledger and expander modes disagree".into()));
        }
        if coef == 0.0 {
            self.check(i)?;
            self.check(j)?;
            return Ok(());
        }
        let dx = self.x_diff(i, j)?;
        match kind {
            Inequality::Unconstrained | Inequality::CompositeF => {
                let gi = self.grad(i)?;
                let gj = self.grad(j)?;
                ledger.add_f(i, coef);
                ledger.add_f(j, -coef);
                ledger.add_inner(&gj, &dx, -coef);
                let mut dg = gi;
                dg.extend(gj.into_iter().map(|(k, c)| (k, -c)));
                ledger.add_square(&dg, -0.5 * coef);
            }
            Inequality::CompositeH => {
                let sj = self.subgrad(j)?;
                ledger.add_h(i, coef);
                ledger.add_h(j, -coef);
                ledger.add_inner(&sj, &dx, -coef);
            }
        }
        Ok(())
    }
}

/// Single co-coercivity `Q_{ij}` as a standalone ledger.
pub fn cocoercivity_ledger(
    cumulative: &CumulativeStepsizeMatrix,
    i: Point,
    j: Point,
    kind: Inequality,
) -> Result<GramLedger> {
    let mode = match kind {
        Inequality::Unconstrained => LedgerMode::Unconstrained,
        _ => LedgerMode::Composite,
    };
    let exp = IterateExpander::new(cumulative, mode);
    let mut ledger = GramLedger::new(cumulative.n(), mode);
    exp.add_inequality(&mut ledger, kind, i, j, 1.0)?;
    Ok(ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schedules::{ogm_stepsize_matrix, StepsizeMatrix};

    #[test]
    fn unconstrained_q_n_star() {
        let h = StepsizeMatrix::diagonal(&[1.0, 1.5, 0.5]).unwrap();
        let c = h.cumulative();
        let l = cocoercivity_ledger(&c, Point::Iter(3), Point::Star, Inequality::Unconstrained)
            .unwrap();
        let mut expect = GramLedger::new(3, LedgerMode::Unconstrained);
        expect.add_f(Point::Iter(3), 1.0);
        expect.add_f(Point::Star, -1.0);
        expect.add_entry(4, 4, -0.5);
        let r = l.compare(&expect).unwrap();
        assert_eq!(r.max_absolute(), 0.0);
    }

    #[test]
    fn composite_pair_gives_gap_minus_square() {
        let h = ogm_stepsize_matrix(4).unwrap();
        let c = h.cumulative();
        let mut total = cocoercivity_ledger(&c, Point::Iter(4), Point::Star, Inequality::CompositeF)
            .unwrap();
        let qh = cocoercivity_ledger(&c, Point::Iter(4), Point::Star, Inequality::CompositeH).unwrap();
        total.add_scaled(&qh, 1.0).unwrap();

        let mut expect = GramLedger::new(4, LedgerMode::Composite);
        expect.add_f(Point::Iter(4), 1.0);
        expect.add_h(Point::Iter(4), 1.0);
        expect.add_f(Point::Star, -1.0);
        expect.add_h(Point::Star, -1.0);
        let d = vec![(expect.g(4), 1.0), (expect.s_star(), 1.0)];
        expect.add_square(&d, -0.5);
        let r = total.compare(&expect).unwrap();
        assert!(r.max_absolute() < 1e-14, "{r:?}");
    }

    #[test]
    fn evaluation_matches_direct_formula() {
        let h = StepsizeMatrix::diagonal(&[0.5, 1.2]).unwrap();
        let c = h.cumulative();
        let l = cocoercivity_ledger(&c, Point::Iter(1), Point::Iter(2), Inequality::Unconstrained)
            .unwrap();
        let e = |v: [f64; 2]| DVector::from_column_slice(&v);
        let d0 = e([0.3, -1.0]);
        let g = [e([1.0, 2.0]), e([0.5, -0.5]), e([-0.2, 0.1])];
        let vectors = vec![d0.clone(), g[0].clone(), g[1].clone(), g[2].clone()];
        let f = [3.0, 2.0, 1.5, 0.0];
        // x_1 - x_2 = 1.2 g_1
        let dx = &g[1] * 1.2;
        let direct = f[1] - f[2] - g[2].dot(&dx) - 0.5 * (&g[1] - &g[2]).norm_squared();
        let val = l.evaluate(&vectors, &f, &[]).unwrap();
        assert!((val - direct).abs() < 1e-14);
    }

    #[test]
    fn index_errors() {
        let h = StepsizeMatrix::diagonal(&[1.0]).unwrap();
        let c = h.cumulative();
        assert!(cocoercivity_ledger(&c, Point::Iter(2), Point::Star, Inequality::Unconstrained)
            .is_err());
        assert!(cocoercivity_ledger(&c, Point::Iter(1), Point::Iter(1), Inequality::CompositeF)
            .is_err());
        assert!(cocoercivity_ledger(&c, Point::Iter(1), Point::Iter(0), Inequality::CompositeH)
            .is_err());
    }

    #[test]
    fn relative_residual_uses_entry_scale() {
        let mut a = GramLedger::new(1, LedgerMode::Unconstrained);
        let mut b = a.clone();
        a.add_f(Point::Iter(0), 1e6);
        b.add_f(Point::Iter(0), 1e6 + 1.0);
        let r = a.compare(&b).unwrap();
        assert!((r.lin_f_abs - 1.0).abs() < 1e-9);
        assert!(r.lin_f < 1e-5);
    }

    #[test]
    fn labels() {
        let l = GramLedger::new(2, LedgerMode::Composite);
        let names: Vec<_> = (0..l.dim()).map(|i| l.label(i)).collect();
        assert_eq!(names, ["x0-x*", "g0", "g1", "g2", "s1", "s2", "s*"]);
    }
}
