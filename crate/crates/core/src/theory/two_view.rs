//! Finite two-view models and a constructive check of the tv-embedding
//! theorem: every function the existence proof builds is computed by linear
//! algebra and compared against the conditionals of the model itself.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Singular values at or below this count as zero.
pub const RANK_TOL: f64 = 1e-8;
/// Above this condition number of `BᵀB` the pseudo-inverse is used.
pub const MAX_CONDITION: f64 = 1e10;
pub const SAMPLE_BUDGET: usize = 1000;

/// `X₁`, `X₂` and `Y` conditionally independent given a hidden state `h`.
/// Conditional tables are column-stochastic, one column per hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoViewModel {
    pub ph: DVector<f64>,
    pub px1_h: DMatrix<f64>,
    pub px2_h: DMatrix<f64>,
    pub py_h: DMatrix<f64>,
}

fn check_stochastic(name: &str, m: &DMatrix<f64>, k: usize) -> Result<()> {
    if m.ncols() != k {
        return Err(Error::InvalidArgument(format!(
            "{name} has {} columns, expected {k}",
            m.ncols()
        )));
    }
    if m.nrows() == 0 {
        return Err(Error::InvalidArgument(format!("{name} has no rows")));
    }
    if m.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "{name} has a negative or non-finite entry"
        )));
    }
    for (h, col) in m.column_iter().enumerate() {
        if (col.sum() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "{name} column {h} sums to {}",
                col.sum()
            )));
        }
    }
    Ok(())
}

impl TwoViewModel {
    pub fn new(ph: DVector<f64>, px1_h: DMatrix<f64>, px2_h: DMatrix<f64>, py_h: DMatrix<f64>) -> Result<Self> {
        let k = ph.len();
        if k == 0 {
            return Err(Error::InvalidArgument("no hidden states".into()));
        }
        check_stochastic("P(h)", &DMatrix::from_column_slice(k, 1, ph.as_slice()), 1)?;
        check_stochastic("P(X1|h)", &px1_h, k)?;
        check_stochastic("P(X2|h)", &px2_h, k)?;
        check_stochastic("P(Y|h)", &py_h, k)?;
        Ok(TwoViewModel { ph, px1_h, px2_h, py_h })
    }

    pub fn hidden(&self) -> usize {
        self.ph.len()
    }

    /// `[P(a, h)]` as an `|a| × k` matrix from a conditional table.
    fn joint_with_h(&self, cond: &DMatrix<f64>) -> DMatrix<f64> {
        cond * DMatrix::from_diagonal(&self.ph)
    }

    /// `[P(h | a)]` as a `k × |a|` matrix, `None` if some value of `a` has probability 0.
    fn posterior_h(&self, cond: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        let joint = self.joint_with_h(cond).transpose();
        let mut out = joint.clone();
        for (a, mut col) in out.column_iter_mut().enumerate() {
            let total = joint.column(a).sum();
            if total <= 0.0 {
                return None;
            }
            col /= total;
        }
        Some(out)
    }

    /// `[P(row | col)]` between the two views, `|X_row| × |X_col|`.
    fn cross_conditional(&self, row: &DMatrix<f64>, col: &DMatrix<f64>) -> Option<DMatrix<f64>> {
        self.posterior_h(col).map(|c| row * c)
    }

    /// `P(Y | x₁, x₂)` by Bayes' rule over the hidden states.
    pub fn label_posterior(&self, x1: usize, x2: usize) -> DVector<f64> {
        let k = self.hidden();
        let w = DVector::from_fn(k, |h, _| self.ph[h] * self.px1_h[(x1, h)] * self.px2_h[(x2, h)]);
        let total = w.sum();
        &self.py_h * (w / total)
    }
}

/// Draws a random model, resampling until `P(X₂|X₁)` has rank `k`.
pub fn sample_two_view_model(k: usize, x1: usize, x2: usize, y: usize, seed: u64) -> Result<TwoViewModel> {
    if k == 0 || y == 0 {
        return Err(Error::InvalidArgument(
            "need at least one hidden state and one label".into(),
        ));
    }
    if x1 < k || x2 < k {
        return Err(Error::InvalidArgument(format!(
            "view sizes ({x1}, {x2}) must be at least the number of hidden states {k}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // columns drawn from a flat Dirichlet
    let mut table = |rows: usize, cols: usize| {
        let mut m = DMatrix::from_fn(rows, cols, |_, _| -(1.0 - rng.gen::<f64>()).ln());
        for mut c in m.column_iter_mut() {
            let s = c.sum();
            c /= s;
        }
        m
    };
    for _ in 0..SAMPLE_BUDGET {
        let ph = DVector::from_column_slice(table(k, 1).as_slice());
        let model = TwoViewModel {
            ph,
            px1_h: table(x1, k),
            px2_h: table(x2, k),
            py_h: table(y, k),
        };
        if let Some(a) = model.cross_conditional(&model.px2_h, &model.px1_h) {
            if kth_singular_value(&a, k) > RANK_TOL {
                return Ok(model);
            }
        }
    }
    Err(Error::Numerical(format!(
        "no rank-{k} model within {SAMPLE_BUDGET} draws"
    )))
}

fn kth_singular_value(m: &DMatrix<f64>, k: usize) -> f64 {
    let mut s: Vec<f64> = m.singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s.get(k - 1).copied().unwrap_or(0.0)
}

/// `(BᵀB)⁻¹Bᵀ`, falling back to the pseudo-inverse when `BᵀB` is ill-conditioned.
fn left_inverse(b: &DMatrix<f64>, diagnostics: &mut Vec<String>, name: &str) -> Result<DMatrix<f64>> {
    let btb = b.transpose() * b;
    let s = btb.singular_values();
    let (max, min) = (s.max(), s.min());
    let cond = if min > 0.0 { max / min } else { f64::INFINITY };
    if cond > MAX_CONDITION {
        diagnostics.push(format!(
            "{name}: BᵀB condition number {cond:.3e} > {MAX_CONDITION:.0e}, using pseudo-inverse"
        ));
        return b
            .clone()
            .pseudo_inverse(RANK_TOL)
            .map_err(|e| Error::Numerical(e.to_string()));
    }
    let inv = btb
        .try_inverse()
        .ok_or_else(|| Error::Numerical(format!("{name}: BᵀB is singular")))?;
    Ok(inv * b.transpose())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub residual: f64,
    pub tol: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.residual < self.tol
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        write!(f, "{verdict} {} {:.3e} {:.3e}", self.name, self.residual, self.tol)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub checks: Vec<Check>,
    pub diagnostics: Vec<String>,
    /// False when the rank condition fails; the checks are then skipped.
    pub assumption_holds: bool,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.assumption_holds && self.checks.iter().all(Check::passed)
    }
}

impl fmt::Display for Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(f, "{c}")?;
        }
        for d in &self.diagnostics {
            writeln!(f, "NOTE {d}")?;
        }
        Ok(())
    }
}

fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// The functions built in the existence proof, tabulated. `f₁(x₁)` is column
/// `x₁` of `A = [P(X₂|X₁)]` and `g₁(a, x₂) = a[x₂]`; symmetrically for view 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub a: DMatrix<f64>,
    pub u: DMatrix<f64>,
    /// `t₁(f₁(x₁), h)` at `(h, x₁)`.
    pub t1: DMatrix<f64>,
    /// `t₂(f₂(x₂), h)` at `(h, x₂)`.
    pub t2: DMatrix<f64>,
    /// `q₁(f₁(x₁), y)` at `(y, x₁)`.
    pub q1: DMatrix<f64>,
    /// `q(f₁(x₁), f₂(x₂), y)`: entry `x₁` holds a `|Y| × |X₂|` table.
    pub q: Vec<DMatrix<f64>>,
}

fn t_from_embedding(u: &DMatrix<f64>, f: &DMatrix<f64>) -> DMatrix<f64> {
    // t(a, h) = Σ_x g(a, x) u(h, x) with g(a, x) = a[x]
    DMatrix::from_fn(u.nrows(), f.ncols(), |h, x| {
        let a = f.column(x);
        (0..a.len()).map(|j| a[j] * u[(h, j)]).sum()
    })
}

/// Tabulates the proof's functions. `None` (with a diagnostic) when the
/// model violates the rank assumption or a view value has probability 0.
pub fn construct(model: &TwoViewModel, diagnostics: &mut Vec<String>) -> Result<Option<Construction>> {
    let k = model.hidden();
    let (Some(a), Some(a2)) = (
        model.cross_conditional(&model.px2_h, &model.px1_h),
        model.cross_conditional(&model.px1_h, &model.px2_h),
    ) else {
        diagnostics.push("a view value has probability 0; conditionals undefined".into());
        return Ok(None);
    };
    let sk = kth_singular_value(&a, k);
    if sk <= RANK_TOL {
        diagnostics.push(format!(
            "rank condition violated: sigma_{k}(P(X2|X1)) = {sk:.3e} <= {RANK_TOL:.0e}; checks skipped"
        ));
        return Ok(None);
    }
    let u = left_inverse(&model.px2_h, diagnostics, "view 1")?;
    let u2 = left_inverse(&model.px1_h, diagnostics, "view 2")?;
    let t1 = t_from_embedding(&u, &a);
    let t2 = t_from_embedding(&u2, &a2);
    let q1 = &model.py_h * &t1;
    let q = (0..a.ncols())
        .map(|x1| {
            let mut table = DMatrix::zeros(model.py_h.nrows(), a2.ncols());
            for x2 in 0..a2.ncols() {
                let mut post = DVector::from_fn(k, |h, _| t1[(h, x1)] * t2[(h, x2)] / model.ph[h]);
                let total = post.sum();
                post /= total;
                table.set_column(x2, &(&model.py_h * post));
            }
            table
        })
        .collect();
    Ok(Some(Construction { a, u, t1, t2, q1, q }))
}

/// Checks `C = UA`, `P(h|X₁) = t₁(f₁(X₁), h)` (and its view-2 twin),
/// `P(Y|X₁) = q₁(f₁(X₁), Y)` and `P(Y|X₁,X₂) = q(f₁(X₁), f₂(X₂), Y)`.
pub fn verify_theorem1(model: &TwoViewModel, tol: f64) -> Result<Report> {
    let mut report = Report::default();
    let Some(cons) = construct(model, &mut report.diagnostics)? else {
        return Ok(report);
    };
    report.assumption_holds = true;
    let c = model.posterior_h(&model.px1_h).expect("checked in construct");
    let c2 = model.posterior_h(&model.px2_h).expect("checked in construct");

    let mut push = |name, residual| report.checks.push(Check { name, residual, tol });
    push("c_equals_ua", max_abs_diff(&c, &(&cons.u * &cons.a)));
    push("h_given_x1", max_abs_diff(&c, &cons.t1));
    push("h_given_x2", max_abs_diff(&c2, &cons.t2));
    push("y_given_x1", max_abs_diff(&(&model.py_h * &c), &cons.q1));
    let mut worst: f64 = 0.0;
    for (x1, table) in cons.q.iter().enumerate() {
        for x2 in 0..table.ncols() {
            let truth = model.label_posterior(x1, x2);
            worst = worst.max((table.column(x2) - truth).amax());
        }
    }
    push("y_given_x1_x2", worst);
    Ok(report)
}
