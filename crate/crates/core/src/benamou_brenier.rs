//! The discrete dynamic action and the distance it induces: evaluating the
//! kinetic term of a path under a field of mixing coefficients, the
//! mean-displacement lower bound, the W1 comparison, optimal concatenation,
//! joint minimisation over paths and coefficient fields, and two closed-form
//! two-point contrasts.

use rand::Rng;
use serde::Serialize;

use crate::couplings::{coupling_path_decomposition, monotone_coupling};
use crate::distributions::Pmf;
use crate::error::{Error, Result};
use crate::numerics::{
    adaptive_simpson, comp_sum, isotonic_clamped, prefix_comp_sums, suffix_comp_sums, trapezoid,
};
use crate::sampling::rng_for;
use crate::tol;
use crate::transport::DiscretePath;

/// Kinetic evaluation of one path under one coefficient field.
#[derive(Debug, Clone, Serialize)]
pub struct ActionEvaluation {
    /// Squared path length `∫ β(t) dt` (infinite when flux crosses an
    /// empty site).
    pub action_sq: f64,
    /// `β(t) = Σ_k g_k v_k²` per grid time.
    pub beta: Vec<f64>,
    /// Per-`(t,k)` velocities solved from the continuity constraint.
    pub velocity: Vec<Vec<f64>>,
}

fn check_alpha_rows(alpha: &[Vec<f64>], t_count: usize, n: usize) -> Result<()> {
    if alpha.len() != t_count {
        return Err(Error::SupportMismatch(alpha.len(), t_count));
    }
    for row in alpha {
        if row.len() != n + 1 {
            return Err(Error::SupportMismatch(row.len(), n + 1));
        }
        if row[0].abs() > 1e-9 || (row[n] - 1.0).abs() > 1e-9 {
            return Err(Error::Domain(
                "coefficient rows must start at 0 and end at 1".into(),
            ));
        }
        for &a in row {
            if !(-1e-9..=1.0 + 1e-9).contains(&a) {
                return Err(Error::Domain(format!("coefficient {a} outside [0,1]")));
            }
        }
    }
    Ok(())
}

/// `∂F_l/∂t` for all `l`, each accumulated from the lighter tail of the
/// derivative mass so edge values stay accurate.
fn df_rows(dfdt: &[f64], cdf: &[f64], n: usize) -> Vec<f64> {
    let pre = prefix_comp_sums(dfdt);
    let suf = suffix_comp_sums(dfdt);
    (0..n)
        .map(|l| {
            if cdf[l] <= 0.5 {
                pre[l]
            } else if l + 1 < suf.len() {
                -suf[l + 1]
            } else {
                0.0
            }
        })
        .collect()
}

/// Evaluate the action of a path under a coefficient field: velocities are
/// solved per site from the cumulative continuity constraint
/// `v_l g_l = -∂F_l/∂t`, the kinetic term is summed per grid time, and the
/// squared length is its trapezoid integral. Flux through a site whose
/// mixture mass vanishes makes the action infinite.
pub fn path_action(path: &DiscretePath, alpha: &[Vec<f64>]) -> Result<ActionEvaluation> {
    let n = path.max_index();
    check_alpha_rows(alpha, path.len(), n)?;

    let mut beta = Vec::with_capacity(path.len());
    let mut velocity = Vec::with_capacity(path.len());
    for i in 0..path.len() {
        let f = path.pmf(i);
        let dfdt = path.dfdt_grid(i);
        let df = df_rows(&dfdt, &f.cdf(), n);
        let mut b = 0.0f64;
        let mut vel = vec![0.0; n];
        for l in 0..n {
            let g = alpha[i][l + 1] * f.get(l as isize + 1) + (1.0 - alpha[i][l]) * f.get(l as isize);
            if g <= tol::MASS {
                if df[l].abs() <= tol::MASS {
                    continue;
                }
                b = f64::INFINITY;
                vel[l] = f64::INFINITY;
                continue;
            }
            let v = -df[l] / g;
            vel[l] = v;
            b += g * v * v;
        }
        beta.push(b);
        velocity.push(vel);
    }
    let action_sq = if beta.iter().any(|b| !b.is_finite()) {
        f64::INFINITY
    } else {
        trapezoid(path.times(), &beta)
    };
    Ok(ActionEvaluation {
        action_sq,
        beta,
        velocity,
    })
}

/// `|mean(f1) - mean(f0)|`: no path can be shorter.
pub fn vn_lower_bound(f0: &Pmf, f1: &Pmf) -> f64 {
    (f1.mean() - f0.mean()).abs()
}

/// One-dimensional W1 distance `Σ_k |F1_k - F0_k|`.
pub fn w1_distance(f0: &Pmf, f1: &Pmf) -> Result<f64> {
    if f0.support_size() != f1.support_size() {
        return Err(Error::SupportMismatch(f0.support_size(), f1.support_size()));
    }
    let c0 = f0.cdf();
    let c1 = f1.cdf();
    let n = f0.max_index();
    Ok(comp_sum((0..n).map(|k| (c1[k] - c0[k]).abs())))
}

/// A concatenated path with its coefficient field and the junction time.
#[derive(Debug, Clone)]
pub struct ConcatenatedPath {
    pub path: DiscretePath,
    pub alpha: Vec<Vec<f64>>,
    pub rho: f64,
}

/// Concatenate two paths at the action-optimal junction
/// `ρ = I(a)/(I(a)+I(b))`, so the result's length is the sum of the legs'.
pub fn concatenate_paths(
    a: &DiscretePath,
    alpha_a: &[Vec<f64>],
    b: &DiscretePath,
    alpha_b: &[Vec<f64>],
) -> Result<ConcatenatedPath> {
    if a.max_index() != b.max_index() {
        return Err(Error::SupportMismatch(a.max_index(), b.max_index()));
    }
    let end = a.pmf(a.len() - 1).masses();
    let start = b.pmf(0).masses();
    for (k, (x, y)) in end.iter().zip(start).enumerate() {
        if (x - y).abs() > 1e-12 {
            return Err(Error::EndpointMismatch(k));
        }
    }
    let len_a = path_action(a, alpha_a)?.action_sq.max(0.0).sqrt();
    let len_b = path_action(b, alpha_b)?.action_sq.max(0.0).sqrt();
    if len_b <= 1e-15 {
        return Ok(ConcatenatedPath {
            path: a.clone(),
            alpha: alpha_a.to_vec(),
            rho: 1.0,
        });
    }
    if len_a <= 1e-15 {
        return Ok(ConcatenatedPath {
            path: b.clone(),
            alpha: alpha_b.to_vec(),
            rho: 0.0,
        });
    }
    let rho = len_a / (len_a + len_b);

    let mut times: Vec<f64> = a.times().iter().map(|&t| t * rho).collect();
    times.extend(b.times().iter().skip(1).map(|&t| rho + t * (1.0 - rho)));
    let mut pmfs: Vec<Pmf> = a.pmfs().to_vec();
    pmfs.extend(b.pmfs().iter().skip(1).cloned());
    let mut alpha = alpha_a.to_vec();
    alpha.extend(alpha_b.iter().skip(1).cloned());
    let path = DiscretePath::from_pmfs(times, pmfs)?;
    Ok(ConcatenatedPath { path, alpha, rho })
}

/// Settings for [`minimize_action`].
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OptimizerConfig {
    /// Time-grid size.
    pub grid: usize,
    pub max_iters: usize,
    /// Initial gradient step; grows on success, halves on failure.
    pub step: f64,
    /// Cap on `1/g` inside the objective, so flux through an empty site
    /// costs `penalty · flux²` instead of overflowing.
    pub penalty: f64,
    /// Seed for the tiny symmetric-plateau jitter on the initial field.
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            grid: 51,
            max_iters: 5000,
            step: 0.1,
            penalty: 1e12,
            seed: 0,
        }
    }
}

/// Outcome of the joint path/coefficient minimisation.
#[derive(Debug, Clone)]
pub struct MinimizationResult {
    pub vn_estimate: f64,
    pub lower_bound: f64,
    pub action_sq: f64,
    /// Kinetic term per grid interval of the final path.
    pub beta: Vec<f64>,
    pub beta_variance: f64,
    /// Coefficient of variation of `β` (0 for a constant-speed optimum).
    pub beta_cv: f64,
    pub iterations: usize,
    pub converged: bool,
    pub best_path: DiscretePath,
    pub best_alpha: Vec<Vec<f64>>,
}

struct ObjectiveSpace {
    times: Vec<f64>,
    n: usize,
    /// distribution-function rows, `t_count × n`
    f_rows: Vec<Vec<f64>>,
    alpha: Vec<Vec<f64>>,
    inv_g_cap: f64,
}

impl ObjectiveSpace {
    fn masses(&self, i: usize) -> Vec<f64> {
        let row = &self.f_rows[i];
        let mut f = Vec::with_capacity(self.n + 1);
        f.push(row[0].max(0.0));
        for l in 1..self.n {
            f.push((row[l] - row[l - 1]).max(0.0));
        }
        f.push((1.0 - row[self.n - 1]).max(0.0));
        f
    }

    fn g_row(&self, i: usize, f: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|l| self.alpha[i][l + 1] * f[l + 1] + (1.0 - self.alpha[i][l]) * f[l])
            .collect()
    }

    /// Interval-form action: per interval, slopes of the distribution rows
    /// against the averaged mixture mass. The per-interval Cauchy–Schwarz
    /// bound keeps this at or above the squared mean displacement.
    fn action(&self) -> f64 {
        let t_count = self.times.len();
        let mut total = 0.0;
        let mut g_prev = {
            let f = self.masses(0);
            self.g_row(0, &f)
        };
        for i in 0..t_count - 1 {
            let dt = self.times[i + 1] - self.times[i];
            let f_next = self.masses(i + 1);
            let g_next = self.g_row(i + 1, &f_next);
            let mut term = 0.0;
            for l in 0..self.n {
                let df = (self.f_rows[i + 1][l] - self.f_rows[i][l]) / dt;
                if df == 0.0 {
                    continue;
                }
                let g_mid = (0.5 * (g_prev[l] + g_next[l])).max(1.0 / self.inv_g_cap);
                term += df * df / g_mid;
            }
            total += dt * term;
            g_prev = g_next;
        }
        total
    }

    fn beta_per_interval(&self) -> Vec<f64> {
        let t_count = self.times.len();
        let mut out = Vec::with_capacity(t_count - 1);
        for i in 0..t_count - 1 {
            let dt = self.times[i + 1] - self.times[i];
            let f_a = self.masses(i);
            let f_b = self.masses(i + 1);
            let g_a = self.g_row(i, &f_a);
            let g_b = self.g_row(i + 1, &f_b);
            let mut term = 0.0f64;
            for l in 0..self.n {
                let df = (self.f_rows[i + 1][l] - self.f_rows[i][l]) / dt;
                let g_mid = 0.5 * (g_a[l] + g_b[l]);
                if g_mid <= tol::MASS {
                    if df.abs() > tol::MASS {
                        term = f64::INFINITY;
                        break;
                    }
                    continue;
                }
                term += df * df / g_mid;
            }
            out.push(term);
        }
        out
    }
}

fn dominates(f0: &Pmf, f1: &Pmf) -> bool {
    let c0 = f0.cdf();
    let c1 = f1.cdf();
    c0.iter().zip(&c1).all(|(a, b)| *a >= *b - tol::PMF_SUM)
}

/// Initial rows from a coupling path when the endpoints are stochastically
/// ordered, otherwise the straight mixture.
type Rows = Vec<Vec<f64>>;

fn initial_state(f0: &Pmf, f1: &Pmf, times: &[f64], n: usize) -> (Rows, Rows) {
    let fallback_alpha = |_t: f64| -> Vec<f64> {
        (0..=n)
            .map(|k| {
                if k == 0 {
                    0.0
                } else if k == n {
                    1.0
                } else {
                    k as f64 / n as f64
                }
            })
            .collect()
    };
    let from_coupling = |a: &Pmf, b: &Pmf, reverse: bool| -> Option<(Rows, Rows)> {
        let pi = monotone_coupling(a, b).ok()?;
        let cp = coupling_path_decomposition(&pi).ok()?;
        let mut f_rows = Vec::with_capacity(times.len());
        let mut a_rows = Vec::with_capacity(times.len());
        for &t in times {
            let s = if reverse { 1.0 - t } else { t };
            let pmf = cp.pmf_at(s).ok()?.padded(n).ok()?;
            f_rows.push(pmf.cdf()[..n].to_vec());
            let row = cp.alpha_at(s).ok()?;
            let mut alpha: Vec<f64> = row
                .values
                .iter()
                .zip(&row.valid)
                .enumerate()
                .map(|(k, (&a, &ok))| {
                    if ok {
                        a.clamp(0.0, 1.0)
                    } else {
                        k as f64 / n as f64
                    }
                })
                .collect();
            alpha.resize(n + 1, 1.0);
            alpha[0] = 0.0;
            alpha[n] = 1.0;
            a_rows.push(alpha);
        }
        Some((f_rows, a_rows))
    };

    if dominates(f0, f1) {
        if let Some(init) = from_coupling(f0, f1, false) {
            return init;
        }
    }
    if dominates(f1, f0) {
        if let Some(init) = from_coupling(f1, f0, true) {
            return init;
        }
    }
    let c0 = f0.cdf();
    let c1 = f1.cdf();
    let f_rows = times
        .iter()
        .map(|&t| (0..n).map(|l| (1.0 - t) * c0[l] + t * c1[l]).collect())
        .collect();
    let a_rows = times.iter().map(|&t| fallback_alpha(t)).collect();
    (f_rows, a_rows)
}

/// Projected gradient descent over the path (as distribution-function rows,
/// isotonic in `k`) and the coefficient field (clamped to `[0,1]`) jointly,
/// with finite-difference gradients and step halving on increase.
pub fn minimize_action(f0: &Pmf, f1: &Pmf, config: OptimizerConfig) -> Result<MinimizationResult> {
    if f0.support_size() != f1.support_size() {
        return Err(Error::SupportMismatch(f0.support_size(), f1.support_size()));
    }
    let n = f0.max_index();
    if n == 0 {
        return Err(Error::Domain("one-point support has no transport".into()));
    }
    let t_count = config.grid.max(3);
    let times = DiscretePath::uniform_times(t_count);
    let lower_bound = vn_lower_bound(f0, f1);

    let (mut f_rows, mut alpha) = initial_state(f0, f1, &times, n);
    // pin the endpoint rows exactly
    f_rows[0] = f0.cdf()[..n].to_vec();
    f_rows[t_count - 1] = f1.cdf()[..n].to_vec();
    let mut rng = rng_for(config.seed, 0xb0b);
    for row in alpha.iter_mut() {
        for a in row[1..n].iter_mut() {
            *a = (*a + rng.random_range(-1e-6..1e-6)).clamp(0.0, 1.0);
        }
    }

    let mut space = ObjectiveSpace {
        times,
        n,
        f_rows,
        alpha,
        inv_g_cap: config.penalty,
    };

    let project = |space: &mut ObjectiveSpace| {
        for i in 1..t_count - 1 {
            isotonic_clamped(&mut space.f_rows[i], 0.0, 1.0);
        }
        for row in space.alpha.iter_mut() {
            for a in row[1..n].iter_mut() {
                *a = a.clamp(0.0, 1.0);
            }
        }
    };
    project(&mut space);

    let mut best = space.action();
    let mut step = config.step;
    let fd = 1e-6;
    let mut iterations = 0;
    let mut converged = false;
    let mut stall = 0usize;

    for _ in 0..config.max_iters {
        iterations += 1;
        // finite-difference gradient over the free variables
        let mut grad_f = vec![vec![0.0; n]; t_count];
        let mut grad_a = vec![vec![0.0; n + 1]; t_count];
        for i in 1..t_count - 1 {
            for l in 0..n {
                let orig = space.f_rows[i][l];
                space.f_rows[i][l] = orig + fd;
                let up = space.action();
                space.f_rows[i][l] = orig - fd;
                let down = space.action();
                space.f_rows[i][l] = orig;
                grad_f[i][l] = (up - down) / (2.0 * fd);
            }
        }
        for i in 0..t_count {
            for k in 1..n {
                let orig = space.alpha[i][k];
                space.alpha[i][k] = orig + fd;
                let up = space.action();
                space.alpha[i][k] = orig - fd;
                let down = space.action();
                space.alpha[i][k] = orig;
                grad_a[i][k] = (up - down) / (2.0 * fd);
            }
        }

        // backtracking step
        let mut accepted = false;
        while step > 1e-14 {
            let saved_f = space.f_rows.clone();
            let saved_a = space.alpha.clone();
            for i in 1..t_count - 1 {
                for l in 0..n {
                    space.f_rows[i][l] -= step * grad_f[i][l];
                }
            }
            for i in 0..t_count {
                for k in 1..n {
                    space.alpha[i][k] -= step * grad_a[i][k];
                }
            }
            project(&mut space);
            let candidate = space.action();
            if candidate < best {
                let gain = best - candidate;
                best = candidate;
                step *= 1.25;
                accepted = true;
                if gain < 1e-12 * best.max(1e-30) {
                    stall += 1;
                } else {
                    stall = 0;
                }
                break;
            }
            space.f_rows = saved_f;
            space.alpha = saved_a;
            step *= 0.5;
        }
        if !accepted || stall >= 25 {
            converged = true;
            break;
        }
    }

    let beta = space.beta_per_interval();
    let action_sq = if beta.iter().any(|b| !b.is_finite()) {
        f64::INFINITY
    } else {
        let mut acc = 0.0;
        for (i, b) in beta.iter().enumerate() {
            acc += b * (space.times[i + 1] - space.times[i]);
        }
        acc
    };
    let mean_beta = beta.iter().sum::<f64>() / beta.len().max(1) as f64;
    let beta_variance = beta
        .iter()
        .map(|b| (b - mean_beta).powi(2))
        .sum::<f64>()
        / beta.len().max(1) as f64;
    let beta_cv = if mean_beta > 0.0 {
        beta_variance.sqrt() / mean_beta
    } else {
        0.0
    };

    let pmfs: Vec<Pmf> = (0..t_count)
        .map(|i| Pmf::new(space.masses(i)))
        .collect::<Result<_>>()?;
    let best_path = DiscretePath::from_pmfs(space.times.clone(), pmfs)?;

    Ok(MinimizationResult {
        vn_estimate: action_sq.sqrt(),
        lower_bound,
        action_sq,
        beta,
        beta_variance,
        beta_cv,
        iterations,
        converged,
        best_path,
        best_alpha: space.alpha,
    })
}

/// `arctanh(r)/r` with its removable singularity filled in at `r = 0`.
fn atanh_over_r(r: f64) -> f64 {
    if r.abs() < 1e-4 {
        let r2 = r * r;
        1.0 + r2 / 3.0 + r2 * r2 / 5.0 + r2 * r2 * r2 / 7.0
    } else {
        r.atanh() / r
    }
}

/// The two-point Markov-chain transport distance
/// `(1/√(2p)) ∫_a^b √(arctanh r / r) dr`, for contrast with the
/// mean-displacement value `|b-a|/2` of the dynamic distance here.
pub fn maas_two_point_distance(p: f64, a: f64, b: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::ProbabilityRange(p));
    }
    if !(-1.0 < a && a <= b && b < 1.0) {
        return Err(Error::Domain(format!(
            "integration limits ({a}, {b}) must sit inside (-1, 1)"
        )));
    }
    let integral = adaptive_simpson(|r| atanh_over_r(r).sqrt(), a, b, 1e-10);
    Ok(integral / (2.0 * p).sqrt())
}

/// Value of `arctanh(r)/r` as used by the two-point integrand (exposed for
/// the removable-singularity check).
pub fn maas_integrand_base(r: f64) -> f64 {
    atanh_over_r(r)
}

/// Closed form and numeric confirmation of the two-point action built on
/// the plain reciprocal-mass kinetic term.
#[derive(Debug, Clone, Serialize)]
pub struct AltMetricResult {
    /// `4 (√(1-q) - √(1-p))²`.
    pub squared_length: f64,
    /// Squared length of the grid minimiser.
    pub numeric_squared_length: f64,
    /// Largest gap between the numeric minimiser and the closed-form
    /// optimal curve.
    pub max_theta_gap: f64,
    pub theta_closed: Vec<f64>,
    pub theta_numeric: Vec<f64>,
}

/// Minimise `∫ θ'²/θ dt` with `θ(0) = 1-p`, `θ(1) = 1-q` on a dense grid
/// (in square-root coordinates, where the discrete action is exact for the
/// interpolant) and compare with the closed-form optimum
/// `θ*(t) = (t√(1-q) + (1-t)√(1-p))²`.
pub fn alt_metric_two_point(p: f64, q: f64) -> Result<AltMetricResult> {
    if !(0.0..=1.0).contains(&p) || !(0.0..=1.0).contains(&q) || p > q {
        return Err(Error::Domain(format!(
            "need 0 ≤ p ≤ q ≤ 1, got ({p}, {q})"
        )));
    }
    let s0 = (1.0 - p).sqrt();
    let s1 = (1.0 - q).sqrt();
    let squared_length = 4.0 * (s1 - s0) * (s1 - s0);

    let cells = 200usize;
    let times = DiscretePath::uniform_times(cells + 1);
    let theta_closed: Vec<f64> = times
        .iter()
        .map(|&t| {
            let s = t * s1 + (1.0 - t) * s0;
            s * s
        })
        .collect();

    // conjugate gradient on the discrete Laplace system for the interior
    // square-root values
    let m = cells - 1;
    let mut s = vec![0.0f64; m];
    for (i, item) in s.iter_mut().enumerate() {
        // flat start away from the optimum
        *item = 0.5 * (s0 + s1) + 1e-3 * ((i as f64).sin());
    }
    let mut rhs = vec![0.0f64; m];
    rhs[0] += s0;
    rhs[m - 1] += s1;
    let apply = |x: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|i| {
                let left = if i > 0 { x[i - 1] } else { 0.0 };
                let right = if i + 1 < m { x[i + 1] } else { 0.0 };
                2.0 * x[i] - left - right
            })
            .collect()
    };
    let mut r: Vec<f64> = apply(&s)
        .iter()
        .zip(&rhs)
        .map(|(ax, b)| b - ax)
        .collect();
    let mut d = r.clone();
    let mut rs_old: f64 = r.iter().map(|x| x * x).sum();
    for _ in 0..(10 * m) {
        if rs_old < 1e-28 {
            break;
        }
        let ad = apply(&d);
        let denom: f64 = d.iter().zip(&ad).map(|(a, b)| a * b).sum();
        let alpha = rs_old / denom;
        for i in 0..m {
            s[i] += alpha * d[i];
            r[i] -= alpha * ad[i];
        }
        let rs_new: f64 = r.iter().map(|x| x * x).sum();
        let beta = rs_new / rs_old;
        for i in 0..m {
            d[i] = r[i] + beta * d[i];
        }
        rs_old = rs_new;
    }

    let mut s_full = Vec::with_capacity(cells + 1);
    s_full.push(s0);
    s_full.extend_from_slice(&s);
    s_full.push(s1);
    let theta_numeric: Vec<f64> = s_full.iter().map(|x| x * x).collect();
    let dt = 1.0 / cells as f64;
    let numeric_squared_length = (0..cells)
        .map(|i| 4.0 * (s_full[i + 1] - s_full[i]).powi(2) / dt)
        .sum();
    let max_theta_gap = theta_closed
        .iter()
        .zip(&theta_numeric)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0f64, f64::max);

    Ok(AltMetricResult {
        squared_length,
        numeric_squared_length,
        max_theta_gap,
        theta_closed,
        theta_numeric,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::binomial_pmf;

    fn binomial_alpha_rows(t_count: usize, n: usize) -> Vec<Vec<f64>> {
        (0..t_count)
            .map(|_| (0..=n).map(|k| k as f64 / n as f64).collect())
            .collect()
    }

    fn binomial_path(n: usize, p: f64, q: f64, grid: usize) -> DiscretePath {
        let slope = q - p;
        DiscretePath::from_fn(DiscretePath::uniform_times(grid), move |t| {
            binomial_pmf(n, p + slope * t)
        })
        .unwrap()
        .with_derivative(move |t| {
            let b = binomial_pmf(n - 1, p + slope * t);
            let scale = n as f64 * slope;
            (0..=n as isize)
                .map(|k| {
                    let prev = if k >= 1 {
                        b.get((k - 1) as usize).copied().unwrap_or(0.0)
                    } else {
                        0.0
                    };
                    let cur = b.get(k as usize).copied().unwrap_or(0.0);
                    -scale * (cur - prev)
                })
                .collect()
        })
    }

    #[test]
    fn extreme_binomial_path_action_is_n_squared() {
        let n = 4;
        let path = binomial_path(n, 0.0, 1.0, 101);
        let eval = path_action(&path, &binomial_alpha_rows(101, n)).unwrap();
        assert!((eval.action_sq - (n * n) as f64).abs() < 1e-9);
        for b in &eval.beta {
            assert!((b - (n * n) as f64).abs() < 1e-9);
        }
    }

    #[test]
    fn time_reversal_preserves_action() {
        let n = 3;
        let path = binomial_path(n, 0.1, 0.7, 81);
        let alpha = binomial_alpha_rows(81, n);
        let fwd = path_action(&path, &alpha).unwrap();
        let rev = path_action(&path.reversed(), &alpha).unwrap();
        assert!((fwd.action_sq - rev.action_sq).abs() < 1e-10);
    }

    #[test]
    fn lower_bound_values() {
        let f = Pmf::new(vec![0.25, 0.5, 0.25]).unwrap();
        assert_eq!(vn_lower_bound(&f, &f), 0.0);
        let d0 = Pmf::point_mass(0, 4);
        let d3 = Pmf::point_mass(3, 4);
        assert!((vn_lower_bound(&d0, &d3) - 3.0).abs() < 1e-15);
        let b1 = Pmf::new(binomial_pmf(3, 0.2)).unwrap();
        let b2 = Pmf::new(binomial_pmf(3, 0.9)).unwrap();
        assert!((vn_lower_bound(&b1, &b2) - 3.0 * 0.7).abs() < 1e-12);
    }

    #[test]
    fn w1_values() {
        let d0 = Pmf::point_mass(0, 2);
        let d1 = Pmf::point_mass(1, 2);
        assert!((w1_distance(&d0, &d1).unwrap() - 1.0).abs() < 1e-15);
        // non-ordered pair by direct cumulative differences
        let f0 = Pmf::new(vec![0.5, 0.0, 0.5]).unwrap();
        let f1 = Pmf::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert!((w1_distance(&f0, &f1).unwrap() - 1.0).abs() < 1e-15);
        // stochastically ordered pair: W1 equals the mean gap
        let b1 = Pmf::new(binomial_pmf(4, 0.3)).unwrap();
        let b2 = Pmf::new(binomial_pmf(4, 0.8)).unwrap();
        assert!((w1_distance(&b1, &b2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn concatenation_splits_at_half_for_equal_legs() {
        let a = binomial_path(1, 0.0, 0.5, 41);
        let b = binomial_path(1, 0.5, 1.0, 41);
        let alpha = binomial_alpha_rows(41, 1);
        let joined = concatenate_paths(&a, &alpha, &b, &alpha).unwrap();
        assert!((joined.rho - 0.5).abs() < 1e-9);
        let eval = path_action(&joined.path, &joined.alpha).unwrap();
        assert!((eval.action_sq.sqrt() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn concatenation_with_trivial_leg_returns_other() {
        let a = binomial_path(1, 0.2, 0.8, 21);
        let constant =
            DiscretePath::from_fn(DiscretePath::uniform_times(21), |_| binomial_pmf(1, 0.8))
                .unwrap()
                .with_derivative(|_| vec![0.0, 0.0]);
        let alpha = binomial_alpha_rows(21, 1);
        let joined = concatenate_paths(&a, &alpha, &constant, &alpha).unwrap();
        assert_eq!(joined.rho, 1.0);
        assert_eq!(joined.path.len(), a.len());
    }

    #[test]
    fn concatenation_rejects_mismatched_endpoints() {
        let a = binomial_path(1, 0.0, 0.4, 21);
        let b = binomial_path(1, 0.5, 1.0, 21);
        let alpha = binomial_alpha_rows(21, 1);
        assert!(matches!(
            concatenate_paths(&a, &alpha, &b, &alpha),
            Err(Error::EndpointMismatch(_))
        ));
    }

    #[test]
    fn bernoulli_minimisation_reaches_the_bound() {
        let f0 = Pmf::new(vec![0.8, 0.2]).unwrap();
        let f1 = Pmf::new(vec![0.3, 0.7]).unwrap();
        let config = OptimizerConfig {
            max_iters: 500,
            ..OptimizerConfig::default()
        };
        let res = minimize_action(&f0, &f1, config).unwrap();
        assert!((res.vn_estimate - 0.5).abs() / 0.5 < 0.01, "{}", res.vn_estimate);
        assert!(res.vn_estimate >= res.lower_bound - 1e-9);
        assert!(res.beta_cv <= 0.05);
    }

    #[test]
    fn equal_mean_distinct_masses_have_positive_distance() {
        let f0 = Pmf::new(vec![0.5, 0.0, 0.5]).unwrap();
        let f1 = Pmf::new(vec![0.0, 1.0, 0.0]).unwrap();
        let config = OptimizerConfig {
            max_iters: 400,
            ..OptimizerConfig::default()
        };
        let res = minimize_action(&f0, &f1, config).unwrap();
        assert_eq!(res.lower_bound, 0.0);
        assert!(res.vn_estimate > 0.1, "{}", res.vn_estimate);
        assert!(res.vn_estimate >= res.lower_bound - 1e-9);
    }

    #[test]
    fn maas_distance_degenerate_and_singularity() {
        assert_eq!(maas_two_point_distance(0.5, 0.3, 0.3).unwrap(), 0.0);
        assert!((maas_integrand_base(0.0) - 1.0).abs() < 1e-12);
        // against a mid-accuracy rectangle check
        let v = maas_two_point_distance(0.5, -0.5, 0.5).unwrap();
        assert!(v > 0.9 && v < 1.2, "{v}");
        assert!(matches!(
            maas_two_point_distance(0.5, -1.0, 0.5),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn alt_metric_closed_form_and_minimiser_agree() {
        let res = alt_metric_two_point(0.0, 1.0).unwrap();
        assert_eq!(res.squared_length, 4.0);
        assert!((res.numeric_squared_length - 4.0).abs() < 1e-9);
        assert!(res.max_theta_gap < 1e-9);

        let res = alt_metric_two_point(0.3, 0.3).unwrap();
        assert_eq!(res.squared_length, 0.0);

        let res = alt_metric_two_point(0.2, 0.7).unwrap();
        assert!(res.max_theta_gap < 1e-6);
        assert!((res.numeric_squared_length - res.squared_length).abs() < 1e-9);
    }
}
