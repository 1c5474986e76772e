//! Constant-speed paths of mass functions and the machinery built on them:
//! recovering the speed, flux distribution and mixing coefficients from a
//! path, the second-order coefficient `h`, the four condition margins, and
//! two independent routes to the second derivative of entropy.
//!
//! A path `f_k(t)` on `{0,…,n}` has constant speed `v` when
//! `∂f_k/∂t = -v ∇₁ g_k` with `g_k = α_{k+1} f_{k+1} + (1-α_k) f_k` for
//! mixing coefficients `α` that vanish at `k = 0` and equal one at `k = n`.
//! The representation is unique, which is what makes the margins below
//! well-defined functions of the path alone.

use std::sync::Arc;

use serde::Serialize;

use crate::distributions::{entropy_of, Pmf};
use crate::error::{Error, Result};
use crate::numerics::{
    prefix_comp_sums, richardson_d2, second_diff_3pt, suffix_comp_sums, CompSum,
};
use crate::tol;

/// Closed-form supplier of mass vectors (or their time derivatives) along a
/// path.
pub type PathFn = Arc<dyn Fn(f64) -> Vec<f64> + Send + Sync>;

/// A time-sampled family of mass functions on a common support, with
/// optional closed-form suppliers for off-grid evaluation.
#[derive(Clone)]
pub struct DiscretePath {
    times: Vec<f64>,
    pmfs: Vec<Pmf>,
    pmf_fn: Option<PathFn>,
    dpmf_fn: Option<PathFn>,
}

impl std::fmt::Debug for DiscretePath {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DiscretePath")
            .field("times", &self.times.len())
            .field("support", &self.pmfs.first().map(|p| p.support_size()))
            .field("has_pmf_fn", &self.pmf_fn.is_some())
            .field("has_dpmf_fn", &self.dpmf_fn.is_some())
            .finish()
    }
}

fn check_times(times: &[f64]) -> Result<()> {
    if times.len() < 2 {
        return Err(Error::Domain("a path needs at least two grid times".into()));
    }
    for w in times.windows(2) {
        if w[1] <= w[0] {
            return Err(Error::Domain("grid times must strictly increase".into()));
        }
    }
    if times[0] < 0.0 || *times.last().unwrap() > 1.0 {
        return Err(Error::TimeRange(times[0].min(*times.last().unwrap())));
    }
    Ok(())
}

impl DiscretePath {
    pub fn from_pmfs(times: Vec<f64>, pmfs: Vec<Pmf>) -> Result<Self> {
        check_times(&times)?;
        if times.len() != pmfs.len() {
            return Err(Error::SupportMismatch(times.len(), pmfs.len()));
        }
        let support = pmfs[0].support_size();
        for p in &pmfs {
            if p.support_size() != support {
                return Err(Error::SupportMismatch(support, p.support_size()));
            }
        }
        Ok(Self {
            times,
            pmfs,
            pmf_fn: None,
            dpmf_fn: None,
        })
    }

    /// Sample a closed-form family on the given grid, keeping the supplier
    /// for off-grid evaluation.
    pub fn from_fn<F>(times: Vec<f64>, f: F) -> Result<Self>
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        check_times(&times)?;
        let pmf_fn: PathFn = Arc::new(f);
        let pmfs = times
            .iter()
            .map(|&t| Pmf::new(pmf_fn(t)))
            .collect::<Result<Vec<_>>>()?;
        let mut path = Self::from_pmfs(times, pmfs)?;
        path.pmf_fn = Some(pmf_fn);
        Ok(path)
    }

    /// Attach a closed-form time derivative `t ↦ ∂f_k/∂t`.
    pub fn with_derivative<F>(mut self, d: F) -> Self
    where
        F: Fn(f64) -> Vec<f64> + Send + Sync + 'static,
    {
        self.dpmf_fn = Some(Arc::new(d));
        self
    }

    /// Uniform grid of `len` points spanning `[0,1]`.
    pub fn uniform_times(len: usize) -> Vec<f64> {
        let m = len.max(2);
        (0..m).map(|i| i as f64 / (m - 1) as f64).collect()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Largest support index `n`.
    pub fn max_index(&self) -> usize {
        self.pmfs[0].max_index()
    }

    pub fn pmf(&self, i: usize) -> &Pmf {
        &self.pmfs[i]
    }

    pub fn pmfs(&self) -> &[Pmf] {
        &self.pmfs
    }

    pub fn has_pmf_fn(&self) -> bool {
        self.pmf_fn.is_some()
    }

    pub fn has_derivative_fn(&self) -> bool {
        self.dpmf_fn.is_some()
    }

    /// Masses at arbitrary `t` when a supplier is available.
    pub fn masses_at(&self, t: f64) -> Option<Vec<f64>> {
        self.pmf_fn.as_ref().map(|f| f(t))
    }

    /// Entropy at arbitrary `t` when a supplier is available.
    pub fn entropy_at(&self, t: f64) -> Option<f64> {
        self.masses_at(t).map(|m| entropy_of(&m))
    }

    /// `∂f_k/∂t` at grid index `i`: the closed form when supplied, otherwise
    /// second-order finite differences on the grid.
    pub fn dfdt_grid(&self, i: usize) -> Vec<f64> {
        if let Some(d) = &self.dpmf_fn {
            return d(self.times[i]);
        }
        let t = &self.times;
        let last = t.len() - 1;
        let (a, b, c) = if i == 0 {
            (0, 1, 2.min(last))
        } else if i == last {
            (last - 2, last - 1, last)
        } else {
            (i - 1, i, i + 1)
        };
        if a == b || b == c {
            // two-point grid: forward slope
            let dt = t[1] - t[0];
            return (0..=self.max_index())
                .map(|k| (self.pmfs[1].masses()[k] - self.pmfs[0].masses()[k]) / dt)
                .collect();
        }
        (0..=self.max_index())
            .map(|k| {
                lagrange_d1(
                    [t[a], t[b], t[c]],
                    [
                        self.pmfs[a].masses()[k],
                        self.pmfs[b].masses()[k],
                        self.pmfs[c].masses()[k],
                    ],
                    t[i],
                )
            })
            .collect()
    }

    /// Time reversal `t ↦ 1 - t` (suppliers are remapped).
    pub fn reversed(&self) -> Self {
        let times: Vec<f64> = self.times.iter().rev().map(|&t| 1.0 - t).collect();
        let pmfs: Vec<Pmf> = self.pmfs.iter().rev().cloned().collect();
        let pmf_fn = self.pmf_fn.clone().map(|f| {
            let g: PathFn = Arc::new(move |t| f(1.0 - t));
            g
        });
        let dpmf_fn = self.dpmf_fn.clone().map(|d| {
            let g: PathFn = Arc::new(move |t| d(1.0 - t).into_iter().map(|x| -x).collect());
            g
        });
        Self {
            times,
            pmfs,
            pmf_fn,
            dpmf_fn,
        }
    }
}

/// Derivative at `t` of the quadratic through three samples.
fn lagrange_d1(ts: [f64; 3], ys: [f64; 3], t: f64) -> f64 {
    let [ta, tb, tc] = ts;
    let [ya, yb, yc] = ys;
    ya * (2.0 * t - tb - tc) / ((ta - tb) * (ta - tc))
        + yb * (2.0 * t - ta - tc) / ((tb - ta) * (tb - tc))
        + yc * (2.0 * t - ta - tb) / ((tc - ta) * (tc - tb))
}

/// One time slice of mixing coefficients with per-entry computability
/// flags. Entries whose denominator mass sat below [`tol::MASS`] hold `NaN`
/// and a cleared flag; out-of-range values are reported, never clamped.
#[derive(Debug, Clone, Serialize)]
pub struct AlphaRow {
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
}

impl AlphaRow {
    /// Worst excursion below 0 or above 1 over computable entries.
    pub fn range_violation(&self) -> f64 {
        self.values
            .iter()
            .zip(&self.valid)
            .filter(|(_, &ok)| ok)
            .map(|(&a, _)| (-a).max(a - 1.0))
            .fold(0.0f64, f64::max)
    }
}

/// The unique `(v, α, g, h)` data of a constant-speed path, sampled on the
/// path's grid. Rows are times; `NaN` marks entries whose defining ratio was
/// not formed because the denominator mass sat below [`tol::MASS`].
#[derive(Debug, Clone, Serialize)]
pub struct TransportDecomposition {
    pub v: f64,
    /// `α_k(t)`, rows of length `n+1`.
    pub alpha: Vec<Vec<f64>>,
    /// `∂α_k/∂t`, finite differences in `t` (one Richardson step inside).
    pub dalpha_dt: Vec<Vec<f64>>,
    /// Flux mass functions `g_k(t)`, rows of length `n`.
    pub g: Vec<Vec<f64>>,
    /// Second-order coefficients `h_k(t)`, rows of length `n-1`.
    pub h: Vec<Vec<f64>>,
    /// Whether `α_k(t)` was computable.
    pub valid: Vec<Vec<bool>>,
    /// The `∂f_k/∂t` samples the decomposition used.
    pub dfdt: Vec<Vec<f64>>,
}

impl TransportDecomposition {
    /// Worst deviation of `α` from `[0,1]` over computable entries.
    pub fn alpha_range_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for (row, val) in self.alpha.iter().zip(&self.valid) {
            for (&a, &ok) in row.iter().zip(val) {
                if ok {
                    worst = worst.max(-a).max(a - 1.0);
                }
            }
        }
        worst
    }
}

/// Signed tail `Σ_{l≥k} d_l` accumulated from whichever side carries less
/// mass, so the result stays accurate when the target is tiny.
fn near_side_tail(dpre: &[f64], dsuf: &[f64], upper_mass: f64, k: usize) -> f64 {
    if upper_mass <= 0.5 {
        dsuf[k]
    } else if k == 0 {
        0.0
    } else {
        -dpre[k - 1]
    }
}

/// Recover the unique constant-speed data of a path.
///
/// The speed comes from the endpoint means; the flux `g` from cumulative
/// time derivatives; `α` from the tail identity, accumulated from the
/// nearer tail; `∂α/∂t` from differences of the `α` samples; and `h` from
/// [`h_from_alpha`].
pub fn decompose_constant_speed(path: &DiscretePath) -> Result<TransportDecomposition> {
    if path.len() < 3 && !path.has_derivative_fn() {
        return Err(Error::Domain(
            "decomposition needs at least three grid points or a derivative supplier".into(),
        ));
    }
    let n = path.max_index();
    let t_count = path.len();
    let v = path.pmf(t_count - 1).mean() - path.pmf(0).mean();
    if v.abs() <= tol::SPEED {
        return Err(Error::DegenerateSpeed);
    }

    let mut alpha = Vec::with_capacity(t_count);
    let mut g_all = Vec::with_capacity(t_count);
    let mut valid_all = Vec::with_capacity(t_count);
    let mut dfdt_all = Vec::with_capacity(t_count);

    for i in 0..t_count {
        let t = path.times()[i];
        let f = path.pmf(i);
        let dfdt = path.dfdt_grid(i);
        let pre = prefix_comp_sums(&dfdt);
        let suf = suffix_comp_sums(&dfdt);
        let cdf = f.cdf();

        let mut g = vec![0.0; n];
        for l in 0..n {
            // dF_l/dt from the lighter tail of the derivative mass
            let df = if cdf[l] <= 0.5 {
                pre[l]
            } else if l < n {
                -suf[l + 1]
            } else {
                0.0
            };
            g[l] = -df / v;
            if g[l] < tol::NEG_TRANSPORT {
                return Err(Error::NegativeTransport {
                    t,
                    k: l,
                    value: g[l],
                });
            }
        }

        // α_k f_k = Σ_{l≥k} (f_l - g_l), with g_n = 0
        let d: Vec<f64> = (0..=n)
            .map(|l| f.masses()[l] - if l < n { g[l] } else { 0.0 })
            .collect();
        let dpre = prefix_comp_sums(&d);
        let dsuf = suffix_comp_sums(&d);

        let mut a_row = vec![f64::NAN; n + 1];
        let mut ok_row = vec![false; n + 1];
        for k in 0..=n {
            let fk = f.masses()[k];
            if fk > tol::MASS {
                let upper = 1.0 - if k == 0 { 0.0 } else { cdf[k - 1] };
                a_row[k] = near_side_tail(&dpre, &dsuf, upper, k) / fk;
                ok_row[k] = true;
            }
        }
        alpha.push(a_row);
        valid_all.push(ok_row);
        g_all.push(g);
        dfdt_all.push(dfdt);
    }

    let dalpha = alpha_time_derivative(path.times(), &alpha, &valid_all);

    let mut h_all = Vec::with_capacity(t_count);
    for i in 0..t_count {
        let f = path.pmf(i);
        let mut h_row = vec![f64::NAN; n.saturating_sub(1)];
        for k in 0..n.saturating_sub(1) {
            let usable = valid_all[i][k]
                && valid_all[i][k + 1]
                && valid_all[i][k + 2]
                && dalpha[i][k + 1].is_finite();
            if usable {
                h_row[k] = h_entry(
                    f.masses(),
                    &alpha[i],
                    dalpha[i][k + 1],
                    v,
                    k,
                );
            }
        }
        h_all.push(h_row);
    }

    Ok(TransportDecomposition {
        v,
        alpha,
        dalpha_dt: dalpha,
        g: g_all,
        h: h_all,
        valid: valid_all,
        dfdt: dfdt_all,
    })
}

/// `∂α/∂t` by central differences over the time grid with one Richardson
/// extrapolation where two neighbours are available on each side.
fn alpha_time_derivative(
    times: &[f64],
    alpha: &[Vec<f64>],
    valid: &[Vec<bool>],
) -> Vec<Vec<f64>> {
    let t_count = times.len();
    let width = alpha[0].len();
    let mut out = vec![vec![f64::NAN; width]; t_count];
    for k in 0..width {
        for i in 0..t_count {
            if !valid[i][k] {
                continue;
            }
            let ok = |j: usize| j < t_count && valid[j][k];
            let slope = |a: usize, b: usize| (alpha[b][k] - alpha[a][k]) / (times[b] - times[a]);
            out[i][k] = if i >= 2 && i + 2 < t_count && ok(i - 2) && ok(i - 1) && ok(i + 1) && ok(i + 2)
            {
                let d1 = slope(i - 1, i + 1);
                let d2 = slope(i - 2, i + 2);
                (4.0 * d1 - d2) / 3.0
            } else if i >= 1 && i + 1 < t_count && ok(i - 1) && ok(i + 1) {
                slope(i - 1, i + 1)
            } else if i + 2 < t_count && ok(i + 1) && ok(i + 2) {
                lagrange_d1(
                    [times[i], times[i + 1], times[i + 2]],
                    [alpha[i][k], alpha[i + 1][k], alpha[i + 2][k]],
                    times[i],
                )
            } else if i >= 2 && ok(i - 1) && ok(i - 2) {
                lagrange_d1(
                    [times[i - 2], times[i - 1], times[i]],
                    [alpha[i - 2][k], alpha[i - 1][k], alpha[i][k]],
                    times[i],
                )
            } else {
                f64::NAN
            };
        }
    }
    out
}

fn h_entry(f: &[f64], alpha: &[f64], dalpha_k1: f64, v: f64, k: usize) -> f64 {
    (1.0 - alpha[k]) * (1.0 - alpha[k + 1]) * f[k]
        + 2.0 * alpha[k + 1] * (1.0 - alpha[k + 1]) * f[k + 1]
        + alpha[k + 1] * alpha[k + 2] * f[k + 2]
        - f[k + 1] * dalpha_k1 / v
}

/// Second-order transport coefficient `h_k` for `k = 0,…,n-2` from the
/// mixing coefficients, their time derivative and the speed.
pub fn h_from_alpha(f: &Pmf, alpha: &[f64], dalpha_dt: &[f64], v: f64) -> Result<Vec<f64>> {
    let n = f.max_index();
    if alpha.len() != n + 1 || dalpha_dt.len() != n + 1 {
        return Err(Error::SupportMismatch(alpha.len(), n + 1));
    }
    if alpha[0].abs() > 1e-9 || (alpha[n] - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(
            "mixing coefficients must vanish at k=0 and equal one at k=n".into(),
        ));
    }
    if v.abs() <= tol::SPEED {
        return Err(Error::DegenerateSpeed);
    }
    Ok((0..n.saturating_sub(1))
        .map(|k| h_entry(f.masses(), alpha, dalpha_dt[k + 1], v, k))
        .collect())
}

/// Generalized log-concavity margins
/// `α_{k+1}(1-α_{k+1}) f_{k+1}² - α_{k+2}(1-α_k) f_k f_{k+2}` for
/// `k = 0,…,n-2`. With `α_k = k/n` these coincide with the
/// ultra-log-concavity margins of order `n`.
pub fn glc_margins(f: &Pmf, alpha: &[f64]) -> Vec<f64> {
    let n = f.max_index();
    let m = f.masses();
    (0..n.saturating_sub(1))
        .map(|k| {
            alpha[k + 1] * (1.0 - alpha[k + 1]) * m[k + 1] * m[k + 1]
                - alpha[k + 2] * (1.0 - alpha[k]) * m[k] * m[k + 2]
        })
        .collect()
}

/// The comparison coefficients `h̃_k` with skip flags where the local
/// log-concavity gap `f_{k+1}² - f_k f_{k+2}` sits below [`tol::DENOM`].
#[derive(Debug, Clone, Serialize)]
pub struct HTilde {
    pub values: Vec<f64>,
    pub skipped: Vec<bool>,
}

pub(crate) fn h_tilde_slices(f: &[f64], g: &[f64]) -> (Vec<f64>, Vec<bool>) {
    let n = f.len() - 1;
    let count = n.saturating_sub(1);
    let mut values = vec![f64::NAN; count];
    let mut skipped = vec![true; count];
    for k in 0..count {
        let d = f[k + 1] * f[k + 1] - f[k] * f[k + 2];
        if d > tol::DENOM {
            values[k] = (2.0 * g[k] * g[k + 1] * f[k + 1]
                - g[k] * g[k] * f[k + 2]
                - g[k + 1] * g[k + 1] * f[k])
                / d;
            skipped[k] = false;
        }
    }
    (values, skipped)
}

/// `h̃_k` from a mass function and its flux distribution.
pub fn h_tilde(f: &Pmf, g: &Pmf) -> Result<HTilde> {
    if g.support_size() + 1 != f.support_size() {
        return Err(Error::SupportMismatch(g.support_size(), f.support_size()));
    }
    let (values, skipped) = h_tilde_slices(f.masses(), g.masses());
    Ok(HTilde { values, skipped })
}

/// `θ(v) = 1/(2v) - v/2`, the elementary bound `0 ≤ -ln v ≤ θ(v)` on `(0,1]`.
pub fn theta(v: f64) -> f64 {
    0.5 / v - 0.5 * v
}

/// Second derivative of entropy along the path at grid time `t`, from the
/// transport form `-Σ v²∇₂(h_k) ln f_k - Σ (∇₁(v g_k))²/f_k`.
///
/// Terms with vanishing mass are dropped only when their numerator also
/// vanishes; a vanishing mass under nonzero flux is a boundary degeneracy
/// and the caller should shrink to the interior of the time interval.
pub fn entropy_second_derivative(
    path: &DiscretePath,
    decomp: &TransportDecomposition,
    t: f64,
) -> Result<f64> {
    let i = grid_index(path.times(), t)?;
    let f = path.pmf(i).masses();
    let n = path.max_index();
    let h = &decomp.h[i];
    let g = &decomp.g[i];
    let v = decomp.v;
    let t_val = path.times()[i];

    let h_at = |k: isize| -> f64 {
        if k < 0 || k as usize >= h.len() {
            0.0
        } else {
            h[k as usize]
        }
    };
    let g_at = |k: isize| -> f64 {
        if k < 0 || k as usize >= g.len() {
            0.0
        } else {
            g[k as usize]
        }
    };

    let mut first = CompSum::new();
    let mut second = CompSum::new();
    for k in 0..=n as isize {
        let lap_h = h_at(k) - 2.0 * h_at(k - 1) + h_at(k - 2);
        if lap_h.is_nan() {
            return Err(Error::Domain(format!(
                "h unavailable near k = {k} at t = {t_val}"
            )));
        }
        let fk = f[k as usize];
        if fk > 0.0 {
            first.add(lap_h * fk.ln());
        } else if lap_h.abs() > tol::MASS {
            return Err(Error::BoundaryDegeneracy {
                t: t_val,
                k: k as usize,
            });
        }
        let flux = v * (g_at(k) - g_at(k - 1));
        if fk > 0.0 {
            second.add(flux * flux / fk);
        } else if flux.abs() > tol::MASS {
            return Err(Error::BoundaryDegeneracy {
                t: t_val,
                k: k as usize,
            });
        }
    }
    Ok(-v * v * first.total() - second.total())
}

fn grid_index(times: &[f64], t: f64) -> Result<usize> {
    let i = times
        .iter()
        .enumerate()
        .min_by(|a, b| {
            (a.1 - t)
                .abs()
                .partial_cmp(&(b.1 - t).abs())
                .expect("finite times")
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Domain("empty grid".into()))?;
    if (times[i] - t).abs() > 1e-9 {
        return Err(Error::Domain(format!("t = {t} is not a grid time")));
    }
    Ok(i)
}

/// Default step for the finite-difference entropy curvature oracle.
pub const FD_STEP: f64 = 1e-3;

/// Second derivative of entropy by finite differences: a Richardson
/// five-point stencil on the closed-form entropy when the path carries a
/// mass supplier, otherwise a three-point difference on the grid entropies.
pub fn entropy_second_derivative_fd(path: &DiscretePath, t: f64) -> Result<f64> {
    entropy_second_derivative_fd_with_step(path, t, FD_STEP)
}

pub fn entropy_second_derivative_fd_with_step(
    path: &DiscretePath,
    t: f64,
    step: f64,
) -> Result<f64> {
    if path.has_pmf_fn() {
        let h = step.min(t / 2.5).min((1.0 - t) / 2.5);
        if h <= 0.0 {
            return Err(Error::Domain(
                "finite differences need interior time".into(),
            ));
        }
        return Ok(richardson_d2(
            |s| path.entropy_at(s).expect("supplier checked"),
            t,
            h,
        ));
    }
    let i = grid_index(path.times(), t)?;
    if i == 0 || i + 1 >= path.len() {
        return Err(Error::Domain(
            "grid finite differences need an interior grid point".into(),
        ));
    }
    let ts = path.times();
    Ok(second_diff_3pt(
        ts[i - 1],
        path.pmf(i - 1).entropy(),
        ts[i],
        path.pmf(i).entropy(),
        ts[i + 1],
        path.pmf(i + 1).entropy(),
    ))
}

/// Per-condition pass flags; a condition passes when its worst evaluated
/// margin sits above `-1e-10`.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionVerdicts {
    pub kmon: bool,
    pub tmon: bool,
    pub glc: bool,
    pub delta: bool,
    pub concave: bool,
}

/// Extremal margins over the evaluated grid.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionMinima {
    pub kmon: f64,
    pub tmon: f64,
    pub glc: f64,
    pub delta: f64,
    pub max_h2: f64,
    pub max_h2_gap: f64,
}

/// Margins of the four conditions on the trimmed grid plus the second
/// derivative of entropy both ways. `NaN` marks entries that were skipped
/// (vanishing mass or log-concavity gap below the denominator floor).
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub times: Vec<f64>,
    pub kmon_margins: Vec<Vec<f64>>,
    pub tmon_margins: Vec<Vec<f64>>,
    pub glc_margins: Vec<Vec<f64>>,
    pub delta_margins: Vec<Vec<f64>>,
    pub h2_transport: Vec<f64>,
    pub h2_fd: Vec<f64>,
    pub minima: ConditionMinima,
    pub verdicts: ConditionVerdicts,
}

fn finite_min(values: impl Iterator<Item = f64>) -> f64 {
    values
        .filter(|x| x.is_finite())
        .fold(f64::INFINITY, f64::min)
}

fn finite_max(values: impl Iterator<Item = f64>) -> f64 {
    values
        .filter(|x| x.is_finite())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Interior grid indices where every mass clears the floor, shrunk one more
/// step away from any end that had to be cut.
pub fn trimmed_range(path: &DiscretePath) -> Option<(usize, usize)> {
    let last = path.len() - 1;
    let ok = |i: usize| path.pmf(i).masses().iter().all(|&m| m > tol::MASS);
    let mut lo = (0..=last).find(|&i| ok(i))?;
    let mut hi = (0..=last).rev().find(|&i| ok(i))?;
    if lo > 0 {
        lo += 1;
    }
    if hi < last {
        hi = hi.checked_sub(1)?;
    }
    // exact endpoints are reported through one-sided limits, not margins
    lo = lo.max(1);
    hi = hi.min(last - 1);
    (lo <= hi).then_some((lo, hi))
}

/// Evaluate all four condition margins and both entropy-curvature routes on
/// the trimmed grid of a decomposed path.
pub fn condition_report(path: &DiscretePath, decomp: &TransportDecomposition) -> ConditionReport {
    let n = path.max_index();
    let (lo, hi) = match trimmed_range(path) {
        Some(r) => r,
        None => {
            return ConditionReport {
                times: Vec::new(),
                kmon_margins: Vec::new(),
                tmon_margins: Vec::new(),
                glc_margins: Vec::new(),
                delta_margins: Vec::new(),
                h2_transport: Vec::new(),
                h2_fd: Vec::new(),
                minima: ConditionMinima {
                    kmon: f64::INFINITY,
                    tmon: f64::INFINITY,
                    glc: f64::INFINITY,
                    delta: f64::INFINITY,
                    max_h2: f64::NEG_INFINITY,
                    max_h2_gap: 0.0,
                },
                verdicts: ConditionVerdicts {
                    kmon: true,
                    tmon: true,
                    glc: true,
                    delta: true,
                    concave: true,
                },
            }
        }
    };

    let mut times = Vec::with_capacity(hi - lo + 1);
    let mut kmon = Vec::new();
    let mut tmon = Vec::new();
    let mut glc = Vec::new();
    let mut delta = Vec::new();
    let mut h2_tr = Vec::new();
    let mut h2_fd = Vec::new();

    for i in lo..=hi {
        let t = path.times()[i];
        times.push(t);
        let f = path.pmf(i);
        let a = &decomp.alpha[i];
        let ok = &decomp.valid[i];

        kmon.push(
            (0..n)
                .map(|k| {
                    if ok[k] && ok[k + 1] {
                        a[k + 1] - a[k]
                    } else {
                        f64::NAN
                    }
                })
                .collect(),
        );
        tmon.push(decomp.dalpha_dt[i].clone());
        glc.push(
            (0..n.saturating_sub(1))
                .map(|k| {
                    if ok[k] && ok[k + 1] && ok[k + 2] {
                        glc_margins(f, a)[k]
                    } else {
                        f64::NAN
                    }
                })
                .collect::<Vec<f64>>(),
        );
        let (ht, skipped) = h_tilde_slices(f.masses(), &decomp.g[i]);
        delta.push(
            (0..n.saturating_sub(1))
                .map(|k| {
                    if skipped[k] || decomp.h[i][k].is_nan() {
                        f64::NAN
                    } else {
                        ht[k] - decomp.h[i][k]
                    }
                })
                .collect::<Vec<f64>>(),
        );
        h2_tr.push(entropy_second_derivative(path, decomp, t).unwrap_or(f64::NAN));
        h2_fd.push(entropy_second_derivative_fd(path, t).unwrap_or(f64::NAN));
    }

    let minima = ConditionMinima {
        kmon: finite_min(kmon.iter().flatten().copied()),
        tmon: finite_min(tmon.iter().flatten().copied()),
        glc: finite_min(glc.iter().flatten().copied()),
        delta: finite_min(delta.iter().flatten().copied()),
        max_h2: finite_max(h2_tr.iter().copied()),
        max_h2_gap: h2_tr
            .iter()
            .zip(&h2_fd)
            .filter(|(a, b)| a.is_finite() && b.is_finite())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max),
    };
    let verdicts = ConditionVerdicts {
        kmon: minima.kmon >= -tol::DELTA,
        tmon: minima.tmon >= -tol::DELTA,
        glc: minima.glc >= -tol::DELTA,
        delta: minima.delta >= -tol::DELTA,
        concave: minima.max_h2 <= tol::H2,
    };

    ConditionReport {
        times,
        kmon_margins: kmon,
        tmon_margins: tmon,
        glc_margins: glc,
        delta_margins: delta,
        h2_transport: h2_tr,
        h2_fd,
        minima,
        verdicts,
    }
}

/// A certified upper bound on the second derivative of entropy, together
/// with the worst residual of the internal remainder identity.
#[derive(Debug, Clone, Serialize)]
pub struct Certificate {
    pub bound: f64,
    pub max_identity_residual: f64,
}

/// Certify concavity at one time slice from `(f, g, h, v)`.
///
/// Verifies the inequalities the bound actually consumes — the cross
/// products `f_{k+1} g_k - f_k g_{k+1}` and `f_{k+1} g_{k+1} - f_{k+2} g_k`
/// nonnegative (the joint consequence of k-monotonicity and generalized
/// log-concavity) and `h_k ≤ h̃_k` — then assembles the term-by-term bound.
/// The two bracketed factors of the remainder form are computed separately
/// and their agreement is reported as `max_identity_residual`.
pub fn concavity_certificate(f: &Pmf, g: &Pmf, h: &[f64], v: f64) -> Result<Certificate> {
    let n = f.max_index();
    if g.support_size() + 1 != f.support_size() {
        return Err(Error::SupportMismatch(g.support_size(), f.support_size()));
    }
    if h.len() != n.saturating_sub(1) {
        return Err(Error::SupportMismatch(h.len(), n.saturating_sub(1)));
    }
    if v.abs() <= tol::SPEED {
        return Err(Error::DegenerateSpeed);
    }
    let fm = f.masses();
    let gm = g.masses();

    let mut bound_pos = CompSum::new();
    let mut max_residual = 0.0f64;
    for k in 0..n.saturating_sub(1) {
        let a_k = fm[k + 1] * gm[k] - fm[k] * gm[k + 1];
        let b_k = fm[k + 1] * gm[k + 1] - fm[k + 2] * gm[k];
        if a_k < -tol::DELTA || b_k < -tol::DELTA {
            return Err(Error::ConditionsNotVerified(format!(
                "cross products negative at k = {k}: {a_k:e}, {b_k:e}"
            )));
        }
        let d = fm[k + 1] * fm[k + 1] - fm[k] * fm[k + 2];
        if d < -tol::PMF_SUM {
            return Err(Error::ConditionsNotVerified(format!(
                "log-concavity gap negative at k = {k}"
            )));
        }
        if d <= tol::DENOM {
            // the log factor vanishes with the gap; only the flux term remains
            continue;
        }
        if fm[k] <= tol::MASS || fm[k + 2] <= tol::MASS || gm[k] <= tol::MASS || gm[k + 1] <= tol::MASS
        {
            return Err(Error::ConditionsNotVerified(format!(
                "vanishing mass at k = {k} prevents the bound"
            )));
        }
        let h_tilde = (gm[k + 1] * a_k + gm[k] * b_k) / d;
        if h[k] > h_tilde + tol::DELTA {
            return Err(Error::ConditionsNotVerified(format!(
                "h exceeds h-tilde at k = {k}"
            )));
        }
        let theta_sum = d / (2.0 * fm[k + 1] * gm[k] * gm[k + 1])
            * (gm[k] * gm[k] / fm[k] + gm[k + 1] * gm[k + 1] / fm[k + 2]);
        bound_pos.add(h_tilde * theta_sum);

        let left = a_k * gm[k + 1] - b_k * gm[k];
        let right = fm[k + 2] * gm[k] * gm[k] - fm[k] * gm[k + 1] * gm[k + 1];
        max_residual = max_residual.max((left - right).abs());
    }

    let g_at = |k: isize| -> f64 {
        if k < 0 || k as usize >= gm.len() {
            0.0
        } else {
            gm[k as usize]
        }
    };
    let mut flux_sum = CompSum::new();
    for k in 0..=n as isize {
        let flux = v * (g_at(k) - g_at(k - 1));
        let fk = fm[k as usize];
        if fk > 0.0 {
            flux_sum.add(flux * flux / fk);
        } else if flux.abs() > tol::MASS {
            return Err(Error::ConditionsNotVerified(format!(
                "flux through vanishing mass at k = {k}"
            )));
        }
    }

    Ok(Certificate {
        bound: v * v * bound_pos.total() - flux_sum.total(),
        max_identity_residual: max_residual,
    })
}
