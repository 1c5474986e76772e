//! Closed forms for the interpolation of a Bernoulli sum along affine
//! parameter lines: the mixing coefficients, flux and second-order
//! coefficient built from leave-one-out and leave-two-out sums, the pairwise
//! quadratic-form certificate for the `h ≤ h̃` condition, and the Gaussian
//! surrogate with matching mean and variance.

use serde::Serialize;

use crate::distributions::{entropy_of, poisson_binomial, BernoulliSystem, Pmf};
use crate::error::{Error, Result};
use crate::numerics::{richardson_d2, CompSum};
use crate::tol;
use crate::transport::{AlphaRow, ConditionMinima, ConditionVerdicts, DiscretePath};

/// Zero-padded access into a mass vector.
#[inline]
fn at(w: &[f64], k: isize) -> f64 {
    if k < 0 || k as usize >= w.len() {
        0.0
    } else {
        w[k as usize]
    }
}

/// A Bernoulli system viewed as an interpolation of its sum.
///
/// Factors frozen at 0 contribute nothing and factors frozen at 1 shift the
/// support by one; both are factored out at construction so every ratio in
/// the closed forms keeps a positive denominator. `shift` records the
/// removed offset; entropy and all condition margins agree with the full
/// system.
#[derive(Debug, Clone)]
pub struct SheppOlkinInstance {
    original: BernoulliSystem,
    reduced: BernoulliSystem,
    shift: usize,
    v: f64,
}

/// Per-`(i,j)` values of the pairwise certificate at one `(t, k)`.
#[derive(Debug, Clone, Serialize)]
pub struct PairTerms {
    pub k: usize,
    /// `b[i][j]`, `NaN` on the diagonal.
    pub b: Vec<Vec<f64>>,
    /// `c[i][j]`, symmetric, `NaN` on the diagonal.
    pub c: Vec<Vec<f64>>,
}

/// Aggregated pairwise-certificate margins over `(i, j, k)` at one time.
#[derive(Debug, Clone, Serialize)]
pub struct DeltaCertificate {
    pub verdict: bool,
    /// Worst `b[i][j]` (nonnegative for monotone instances).
    pub min_b: f64,
    /// Worst margin of `b + (p_i(1-p_j) + p_j(1-p_i))/2 · c`.
    pub min_mixed: f64,
    /// Largest `4 p_i(1-p_i) p_j(1-p_j) c² - 4 b_ij b_ji` over pairs with
    /// `c < 0`; `-inf` when no pair enters that branch.
    pub max_discriminant: f64,
    /// Worst value of the full quadratic form over `k`.
    pub min_quadratic_form: f64,
    /// Worst residual between the quadratic form and its `(g, A, B, D)`
    /// assembly.
    pub max_reconstruction_residual: f64,
}

/// Everything the condition ladder needs at one time, cached so the
/// leave-out products are built once.
struct Snapshot {
    ps: Vec<f64>,
    ds: Vec<f64>,
    v: f64,
    /// reduced masses, length `m+1`
    f: Vec<f64>,
    /// leave-one-out masses, `m` rows of length `m`
    loo: Vec<Vec<f64>>,
    /// leave-two-out masses for `i < j`, rows of length `m-1`
    loo2: Vec<Vec<f64>>,
}

#[inline]
fn pair_index(i: usize, j: usize, m: usize) -> usize {
    debug_assert!(i < j && j < m);
    i * m - i * (i + 1) / 2 + (j - i - 1)
}

impl Snapshot {
    fn new(reduced: &BernoulliSystem, v: f64, t: f64, with_pairs: bool) -> Self {
        let ps = reduced.params_at(t);
        let ds = reduced.derivatives();
        let m = ps.len();
        let f = poisson_binomial(&ps);
        let skip_one = |skip: usize| -> Vec<f64> {
            let sub: Vec<f64> = ps
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, &p)| p)
                .collect();
            poisson_binomial(&sub)
        };
        let loo: Vec<Vec<f64>> = (0..m).map(skip_one).collect();
        let loo2 = if with_pairs && m >= 2 {
            let mut out = Vec::with_capacity(m * (m - 1) / 2);
            for i in 0..m {
                for j in (i + 1)..m {
                    let sub: Vec<f64> = ps
                        .iter()
                        .enumerate()
                        .filter(|(l, _)| *l != i && *l != j)
                        .map(|(_, &p)| p)
                        .collect();
                    out.push(poisson_binomial(&sub));
                }
            }
            out
        } else {
            Vec::new()
        };
        Self {
            ps,
            ds,
            v,
            f,
            loo,
            loo2,
        }
    }

    fn m(&self) -> usize {
        self.ps.len()
    }

    fn pair(&self, i: usize, j: usize) -> &[f64] {
        if i < j {
            &self.loo2[pair_index(i, j, self.m())]
        } else {
            &self.loo2[pair_index(j, i, self.m())]
        }
    }

    /// `Σ_i d_i p_i f^{(i)}_{k-1}`, the numerator of the mixing coefficient.
    fn alpha_numerator(&self, k: isize) -> f64 {
        let mut acc = CompSum::new();
        for i in 0..self.m() {
            acc.add(self.ds[i] * self.ps[i] * at(&self.loo[i], k - 1));
        }
        acc.total()
    }

    /// The complementary numerator `Σ_i d_i (1-p_i) f^{(i)}_k`.
    fn alpha_conumerator(&self, k: isize) -> f64 {
        let mut acc = CompSum::new();
        for i in 0..self.m() {
            acc.add(self.ds[i] * (1.0 - self.ps[i]) * at(&self.loo[i], k));
        }
        acc.total()
    }

    fn alpha_row(&self) -> Result<AlphaRow> {
        let m = self.m();
        let mut values = vec![f64::NAN; m + 1];
        let mut valid = vec![false; m + 1];
        for k in 0..=m {
            let fk = self.f[k];
            if fk <= tol::MASS {
                continue;
            }
            let primary = self.alpha_numerator(k as isize) / (self.v * fk);
            let complement = 1.0 - self.alpha_conumerator(k as isize) / (self.v * fk);
            if (primary - complement).abs() > tol::CROSS_CHECK {
                return Err(Error::Domain(format!(
                    "the two closed forms of alpha disagree at k = {k}: {primary} vs {complement}"
                )));
            }
            values[k] = primary;
            valid[k] = true;
        }
        // boundary values are identities, pin them exactly
        if valid[0] {
            debug_assert!(values[0].abs() < 1e-12);
            values[0] = 0.0;
        }
        if valid[m] {
            debug_assert!((values[m] - 1.0).abs() < 1e-12);
            values[m] = 1.0;
        }
        Ok(AlphaRow { values, valid })
    }

    /// Flux distribution `g_k = (1/v) Σ_i d_i f^{(i)}_k` on `{0,…,m-1}`.
    fn g_row(&self) -> Vec<f64> {
        (0..self.m())
            .map(|k| {
                let mut acc = CompSum::new();
                for i in 0..self.m() {
                    acc.add(self.ds[i] * self.loo[i][k]);
                }
                acc.total() / self.v
            })
            .collect()
    }

    /// `∂f_k/∂t = Σ_i d_i (f^{(i)}_{k-1} - f^{(i)}_k)`.
    fn dfdt(&self, k: isize) -> f64 {
        let mut acc = CompSum::new();
        for i in 0..self.m() {
            acc.add(self.ds[i] * (at(&self.loo[i], k - 1) - at(&self.loo[i], k)));
        }
        acc.total()
    }

    /// `∂f^{(i)}_k/∂t` through the leave-two-out masses.
    fn dloo(&self, i: usize, k: isize) -> f64 {
        let mut acc = CompSum::new();
        for j in 0..self.m() {
            if j != i {
                let w = self.pair(i, j);
                acc.add(self.ds[j] * (at(w, k - 1) - at(w, k)));
            }
        }
        acc.total()
    }

    /// Closed-form `∂α_k/∂t` by differentiated quotients.
    fn dalpha_row(&self, alpha: &AlphaRow) -> Vec<f64> {
        let m = self.m();
        let mut out = vec![f64::NAN; m + 1];
        for k in 0..=m {
            if !alpha.valid[k] {
                continue;
            }
            if k == 0 || k == m {
                out[k] = 0.0;
                continue;
            }
            let fk = self.f[k];
            let num = self.alpha_numerator(k as isize);
            let mut dnum = CompSum::new();
            for i in 0..m {
                dnum.add(
                    self.ds[i]
                        * (self.ds[i] * at(&self.loo[i], k as isize - 1)
                            + self.ps[i] * self.dloo(i, k as isize - 1)),
                );
            }
            let dfk = self.dfdt(k as isize);
            out[k] = dnum.total() / (self.v * fk) - num * dfk / (self.v * fk * fk);
        }
        out
    }

    /// `h_k = Σ_{i≠j} d_i d_j f^{(i,j)}_k / v²` on `{0,…,m-2}`.
    fn h_row(&self) -> Vec<f64> {
        let m = self.m();
        if m < 2 {
            return Vec::new();
        }
        (0..m - 1)
            .map(|k| {
                let mut acc = CompSum::new();
                for i in 0..m {
                    for j in (i + 1)..m {
                        acc.add(2.0 * self.ds[i] * self.ds[j] * self.pair(i, j)[k]);
                    }
                }
                acc.total() / (self.v * self.v)
            })
            .collect()
    }
}

fn cubic_c1(w: &[f64], k: isize) -> f64 {
    at(w, k - 1) * at(w, k).powi(2) - 2.0 * at(w, k - 1).powi(2) * at(w, k + 1)
        + at(w, k - 2) * at(w, k) * at(w, k + 1)
}

fn cubic_c1bar(w: &[f64], k: isize) -> f64 {
    at(w, k).powi(2) * at(w, k + 1) - 2.0 * at(w, k + 1).powi(2) * at(w, k - 1)
        + at(w, k + 2) * at(w, k) * at(w, k - 1)
}

fn cubic_c3(w: &[f64], k: isize) -> f64 {
    2.0 * at(w, k).powi(3) - 3.0 * at(w, k - 1) * at(w, k) * at(w, k + 1)
        + at(w, k - 1).powi(2) * at(w, k + 2)
}

fn cubic_c3bar(w: &[f64], k: isize) -> f64 {
    2.0 * at(w, k).powi(3) - 3.0 * at(w, k - 1) * at(w, k) * at(w, k + 1)
        + at(w, k + 1).powi(2) * at(w, k - 2)
}

fn pair_b(w: &[f64], pi: f64, pj: f64, k: isize) -> f64 {
    0.5 * (pi * pj * cubic_c1(w, k)
        + (1.0 - pi) * (1.0 - pj) * cubic_c1bar(w, k)
        + (1.0 - pi) * pj * cubic_c3(w, k)
        + pi * (1.0 - pj) * cubic_c3bar(w, k))
}

fn pair_c(w: &[f64], k: isize) -> f64 {
    -at(w, k).powi(3) + 2.0 * at(w, k - 1) * at(w, k) * at(w, k + 1)
        - at(w, k + 1).powi(2) * at(w, k - 2)
        - at(w, k - 1).powi(2) * at(w, k + 2)
        + at(w, k - 2) * at(w, k) * at(w, k + 2)
}

impl SheppOlkinInstance {
    pub fn new(system: BernoulliSystem) -> Result<Self> {
        let mut keep_start = Vec::new();
        let mut keep_end = Vec::new();
        let mut shift = 0usize;
        for i in 0..system.len() {
            let (a, b) = (system.p_start()[i], system.p_end()[i]);
            if a == b && (a == 0.0 || a == 1.0) {
                if a == 1.0 {
                    shift += 1;
                }
            } else {
                keep_start.push(a);
                keep_end.push(b);
            }
        }
        let reduced = BernoulliSystem::new(keep_start, keep_end)?;
        let v = reduced.speed();
        Ok(Self {
            original: system,
            reduced,
            shift,
            v,
        })
    }

    pub fn system(&self) -> &BernoulliSystem {
        &self.original
    }

    pub fn reduced_system(&self) -> &BernoulliSystem {
        &self.reduced
    }

    /// Deterministic support offset removed at construction.
    pub fn shift(&self) -> usize {
        self.shift
    }

    /// Total parameter speed `v = Σ p_i'`.
    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn is_monotone(&self) -> bool {
        self.original.is_monotone()
    }

    fn require_speed(&self) -> Result<()> {
        if self.v.abs() <= tol::SPEED {
            return Err(Error::DegenerateSpeed);
        }
        if self.v < 0.0 {
            return Err(Error::Domain(
                "mixing coefficients need positive total speed".into(),
            ));
        }
        Ok(())
    }

    fn require_monotone(&self) -> Result<()> {
        if let Some(i) = self
            .original
            .p_start()
            .iter()
            .zip(self.original.p_end())
            .position(|(&a, &b)| b < a)
        {
            return Err(Error::NonMonotone(i));
        }
        Ok(())
    }

    fn check_time(t: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeRange(t));
        }
        Ok(())
    }

    /// Reduced mass function at `t`.
    pub fn pmf_at(&self, t: f64) -> Result<Pmf> {
        Self::check_time(t)?;
        Pmf::new(poisson_binomial(&self.reduced.params_at(t)))
    }

    /// Closed-form `∂f_k/∂t` of the reduced masses at `t`.
    pub fn dpmf_at(&self, t: f64) -> Vec<f64> {
        let snap = Snapshot::new(&self.reduced, self.v, t, false);
        (0..=snap.m() as isize).map(|k| snap.dfdt(k)).collect()
    }

    /// The reduced interpolation as a grid path with closed-form suppliers.
    pub fn path(&self, grid: usize) -> Result<DiscretePath> {
        let times = DiscretePath::uniform_times(grid);
        let sys = self.reduced.clone();
        let path = DiscretePath::from_fn(times, move |t| poisson_binomial(&sys.params_at(t)))?;
        let me = self.clone();
        Ok(path.with_derivative(move |t| me.dpmf_at(t)))
    }

    /// Mixing coefficients at `t`, both closed forms cross-checked.
    pub fn alpha_at(&self, t: f64) -> Result<AlphaRow> {
        Self::check_time(t)?;
        self.require_speed()?;
        Snapshot::new(&self.reduced, self.v, t, false).alpha_row()
    }

    /// Closed-form `∂α_k/∂t` at `t` (`NaN` where `α` is not computable).
    pub fn dalpha_at(&self, t: f64) -> Result<Vec<f64>> {
        Self::check_time(t)?;
        self.require_speed()?;
        let snap = Snapshot::new(&self.reduced, self.v, t, true);
        let alpha = snap.alpha_row()?;
        Ok(snap.dalpha_row(&alpha))
    }

    /// Flux distribution at `t` on `{0,…,m-1}`.
    pub fn g_at(&self, t: f64) -> Result<Pmf> {
        Self::check_time(t)?;
        self.require_speed()?;
        Pmf::new(Snapshot::new(&self.reduced, self.v, t, false).g_row())
    }

    /// Second-order coefficient at `t` on `{0,…,m-2}` (empty for fewer than
    /// two moving factors).
    pub fn h_at(&self, t: f64) -> Result<Vec<f64>> {
        Self::check_time(t)?;
        self.require_speed()?;
        Ok(Snapshot::new(&self.reduced, self.v, t, true).h_row())
    }

    /// Pairwise certificate terms at one `(t, k)`.
    pub fn pair_terms(&self, t: f64, k: usize) -> Result<PairTerms> {
        Self::check_time(t)?;
        let snap = Snapshot::new(&self.reduced, self.v, t, true);
        let m = snap.m();
        if m < 2 {
            return Err(Error::Domain(
                "pair terms need at least two moving factors".into(),
            ));
        }
        let mut b = vec![vec![f64::NAN; m]; m];
        let mut c = vec![vec![f64::NAN; m]; m];
        for i in 0..m {
            for j in 0..m {
                if i == j {
                    continue;
                }
                let w = snap.pair(i, j);
                b[i][j] = pair_b(w, snap.ps[i], snap.ps[j], k as isize);
                c[i][j] = pair_c(w, k as isize);
            }
        }
        Ok(PairTerms { k, b, c })
    }

    /// Evaluate the pairwise certificate over every `(i, j, k)` at `t`.
    pub fn delta_certificate(&self, t: f64) -> Result<DeltaCertificate> {
        Self::check_time(t)?;
        self.require_monotone()?;
        self.require_speed()?;
        let snap = Snapshot::new(&self.reduced, self.v, t, true);
        Ok(delta_certificate_from(&snap))
    }
}

fn delta_certificate_from(snap: &Snapshot) -> DeltaCertificate {
    let m = snap.m();
    let v = snap.v;
    let g = snap.g_row();
    let f = &snap.f;
    let mut min_b = f64::INFINITY;
    let mut min_mixed = f64::INFINITY;
    let mut max_disc = f64::NEG_INFINITY;
    let mut min_quad = f64::INFINITY;
    let mut max_resid = 0.0f64;

    for k in 0..m.saturating_sub(1) {
        let ki = k as isize;
        let mut quad = CompSum::new();
        for i in 0..m {
            for j in (i + 1)..m {
                let w = snap.pair(i, j);
                let (pi, pj) = (snap.ps[i], snap.ps[j]);
                let (di, dj) = (snap.ds[i], snap.ds[j]);
                let b_ij = pair_b(w, pi, pj, ki);
                let b_ji = pair_b(w, pj, pi, ki);
                let c = pair_c(w, ki);
                min_b = min_b.min(b_ij).min(b_ji);
                let mix = 0.5 * (pi * (1.0 - pj) + pj * (1.0 - pi));
                min_mixed = min_mixed.min(b_ij + mix * c).min(b_ji + mix * c);
                if c < 0.0 {
                    let disc =
                        4.0 * pi * (1.0 - pi) * pj * (1.0 - pj) * c * c - 4.0 * b_ij * b_ji;
                    max_disc = max_disc.max(disc);
                }
                quad.add(di * di * pj * (1.0 - pj) * b_ij);
                quad.add(dj * dj * pi * (1.0 - pi) * b_ji);
                quad.add(2.0 * di * dj * pi * (1.0 - pi) * pj * (1.0 - pj) * c);
            }
        }
        let quad = quad.total();
        min_quad = min_quad.min(quad);

        // reassemble through (g, A, B, D) and the leave-two-out h
        let a_k = at(f, ki + 1) * at(&g, ki) - at(f, ki) * at(&g, ki + 1);
        let b_k = at(f, ki + 1) * at(&g, ki + 1) - at(f, ki + 2) * at(&g, ki);
        let d_k1 = at(f, ki + 1) * at(f, ki + 1) - at(f, ki) * at(f, ki + 2);
        let mut v2h = CompSum::new();
        for i in 0..m {
            for j in (i + 1)..m {
                v2h.add(2.0 * snap.ds[i] * snap.ds[j] * snap.pair(i, j)[k]);
            }
        }
        let assembled = v * v * (at(&g, ki + 1) * a_k + at(&g, ki) * b_k) - d_k1 * v2h.total();
        max_resid = max_resid.max((quad - assembled).abs());
    }

    let verdict = min_b >= -tol::MARGIN
        && min_mixed >= -tol::MARGIN
        && (max_disc == f64::NEG_INFINITY || max_disc <= tol::DELTA)
        && min_quad >= -tol::DELTA;
    DeltaCertificate {
        verdict,
        min_b,
        min_mixed,
        max_discriminant: max_disc,
        min_quadratic_form: min_quad,
        max_reconstruction_residual: max_resid,
    }
}

/// Pairwise-certificate margins aggregated over the evaluated grid.
#[derive(Debug, Clone, Serialize)]
pub struct PairCertificateSummary {
    pub verdict: bool,
    pub min_b: f64,
    pub min_mixed: f64,
    pub max_discriminant: f64,
    pub min_quadratic_form: f64,
    pub max_reconstruction_residual: f64,
}

/// Full condition-ladder evaluation of one instance on a trimmed grid.
#[derive(Debug, Clone, Serialize)]
pub struct SheppOlkinReport {
    pub v: f64,
    pub shift: usize,
    pub monotone: bool,
    /// All parameters frozen: the entropy curve is constant and the ladder
    /// is vacuous.
    pub trivially_constant: bool,
    pub grid_times: Vec<f64>,
    pub entropy: Vec<f64>,
    /// Trimmed evaluation times for everything below.
    pub times: Vec<f64>,
    pub alpha: Vec<Vec<f64>>,
    pub dalpha: Vec<Vec<f64>>,
    pub g: Vec<Vec<f64>>,
    pub h: Vec<Vec<f64>>,
    pub kmon_margins: Vec<Vec<f64>>,
    pub tmon_margins: Vec<Vec<f64>>,
    pub glc_margins: Vec<Vec<f64>>,
    pub delta_margins: Vec<Vec<f64>>,
    pub h2_transport: Vec<f64>,
    pub h2_fd: Vec<f64>,
    pub minima: ConditionMinima,
    pub verdicts: ConditionVerdicts,
    /// Whether both curvature routes agree within `max(1e-6, 1e-4·|H''|)`
    /// at every evaluated time.
    pub h2_agreement: bool,
    pub pair: Option<PairCertificateSummary>,
}

/// Options for [`analyze`].
#[derive(Debug, Clone, Copy)]
pub struct AnalyzeOptions {
    pub grid: usize,
    /// Also run the pairwise certificate at every evaluated time.
    pub with_pair_certificate: bool,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            grid: 201,
            with_pair_certificate: false,
        }
    }
}

fn finite_min(values: impl Iterator<Item = f64>) -> f64 {
    values
        .filter(|x| x.is_finite())
        .fold(f64::INFINITY, f64::min)
}

/// Evaluate the whole condition ladder for an instance: closed-form
/// `(α, ∂α/∂t, g, h)`, the four margins, both curvature routes and
/// optionally the pairwise certificate, on the grid trimmed of boundary
/// times where any full or leave-one-out mass vanishes.
pub fn analyze(inst: &SheppOlkinInstance, opts: AnalyzeOptions) -> Result<SheppOlkinReport> {
    let grid_times = DiscretePath::uniform_times(opts.grid);
    let reduced = inst.reduced_system();
    let m = reduced.len();
    let entropy: Vec<f64> = grid_times
        .iter()
        .map(|&t| entropy_of(&poisson_binomial(&reduced.params_at(t))))
        .collect();

    let trivially_constant = reduced.derivatives().iter().all(|&d| d == 0.0);
    if trivially_constant {
        return Ok(SheppOlkinReport {
            v: inst.v(),
            shift: inst.shift(),
            monotone: inst.is_monotone(),
            trivially_constant: true,
            grid_times,
            entropy,
            times: Vec::new(),
            alpha: Vec::new(),
            dalpha: Vec::new(),
            g: Vec::new(),
            h: Vec::new(),
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
                max_h2: 0.0,
                max_h2_gap: 0.0,
            },
            verdicts: ConditionVerdicts {
                kmon: true,
                tmon: true,
                glc: true,
                delta: true,
                concave: true,
            },
            h2_agreement: true,
            pair: None,
        });
    }
    inst.require_speed()?;

    // Trim boundary times where any full or leave-one-out mass vanishes.
    // Masses sitting below the floor at every grid time are exempt: they
    // never become ratio denominators (per-entry validity handles them) and
    // must not erase the whole grid.
    let snapshots: Vec<Snapshot> = grid_times
        .iter()
        .map(|&t| Snapshot::new(reduced, inst.v(), t, true))
        .collect();
    let f_cols = snapshots[0].f.len();
    let f_tiny: Vec<bool> = (0..f_cols)
        .map(|k| snapshots.iter().all(|s| s.f[k] <= tol::MASS))
        .collect();
    let loo_tiny: Vec<Vec<bool>> = (0..m)
        .map(|i| {
            (0..f_cols - 1)
                .map(|k| snapshots.iter().all(|s| s.loo[i][k] <= tol::MASS))
                .collect()
        })
        .collect();
    let ok = |s: &Snapshot| {
        s.f.iter()
            .enumerate()
            .all(|(k, &x)| x > tol::MASS || f_tiny[k])
            && s.loo.iter().enumerate().all(|(i, row)| {
                row.iter()
                    .enumerate()
                    .all(|(k, &x)| x > tol::MASS || loo_tiny[i][k])
            })
    };
    let last = grid_times.len() - 1;
    let empty_report = |grid_times: Vec<f64>, entropy: Vec<f64>| SheppOlkinReport {
        v: inst.v(),
        shift: inst.shift(),
        monotone: inst.is_monotone(),
        trivially_constant: false,
        grid_times,
        entropy,
        times: Vec::new(),
        alpha: Vec::new(),
        dalpha: Vec::new(),
        g: Vec::new(),
        h: Vec::new(),
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
        h2_agreement: true,
        pair: None,
    };
    let (mut lo, mut hi) = match (
        snapshots.iter().position(ok),
        snapshots.iter().rposition(ok),
    ) {
        (Some(a), Some(b)) => (a, b),
        _ => return Ok(empty_report(grid_times, entropy)),
    };
    if lo > 0 {
        lo += 1;
    }
    if hi < last {
        hi = hi.saturating_sub(1);
    }
    lo = lo.max(1);
    hi = hi.min(last - 1);
    if lo > hi {
        return Ok(empty_report(grid_times, entropy));
    }

    let sys_for_fd = reduced.clone();
    let entropy_at = move |t: f64| entropy_of(&poisson_binomial(&sys_for_fd.params_at(t)));

    let mut times = Vec::new();
    let mut alpha_rows = Vec::new();
    let mut dalpha_rows = Vec::new();
    let mut g_rows = Vec::new();
    let mut h_rows = Vec::new();
    let mut kmon = Vec::new();
    let mut tmon = Vec::new();
    let mut glc = Vec::new();
    let mut delta = Vec::new();
    let mut h2_tr = Vec::new();
    let mut h2_fd = Vec::new();
    let mut h2_agreement = true;
    let mut pair_summary: Option<PairCertificateSummary> = None;

    for i in lo..=hi {
        let t = grid_times[i];
        let snap = &snapshots[i];
        let alpha = snap.alpha_row()?;
        let dalpha = snap.dalpha_row(&alpha);
        let g = snap.g_row();
        let h = snap.h_row();
        let f = &snap.f;

        let a = &alpha.values;
        kmon.push((0..m).map(|k| a[k + 1] - a[k]).collect::<Vec<f64>>());
        tmon.push(dalpha.clone());
        glc.push(
            (0..m.saturating_sub(1))
                .map(|k| {
                    a[k + 1] * (1.0 - a[k + 1]) * f[k + 1] * f[k + 1]
                        - a[k + 2] * (1.0 - a[k]) * f[k] * f[k + 2]
                })
                .collect::<Vec<f64>>(),
        );
        let (ht, skipped) = crate::transport::h_tilde_slices(f, &g);
        delta.push(
            (0..m.saturating_sub(1))
                .map(|k| if skipped[k] { f64::NAN } else { ht[k] - h[k] })
                .collect::<Vec<f64>>(),
        );

        let h2 = transport_h2(f, &g, &h, inst.v());
        let fd = {
            let step = (1e-3f64).min(t / 2.5).min((1.0 - t) / 2.5);
            richardson_d2(&entropy_at, t, step)
        };
        if (h2 - fd).abs() > (1e-6f64).max(1e-4 * h2.abs()) {
            h2_agreement = false;
        }
        h2_tr.push(h2);
        h2_fd.push(fd);

        if opts.with_pair_certificate && inst.is_monotone() && m >= 2 {
            let cert = delta_certificate_from(snap);
            pair_summary = Some(match pair_summary.take() {
                None => PairCertificateSummary {
                    verdict: cert.verdict,
                    min_b: cert.min_b,
                    min_mixed: cert.min_mixed,
                    max_discriminant: cert.max_discriminant,
                    min_quadratic_form: cert.min_quadratic_form,
                    max_reconstruction_residual: cert.max_reconstruction_residual,
                },
                Some(acc) => PairCertificateSummary {
                    verdict: acc.verdict && cert.verdict,
                    min_b: acc.min_b.min(cert.min_b),
                    min_mixed: acc.min_mixed.min(cert.min_mixed),
                    max_discriminant: acc.max_discriminant.max(cert.max_discriminant),
                    min_quadratic_form: acc.min_quadratic_form.min(cert.min_quadratic_form),
                    max_reconstruction_residual: acc
                        .max_reconstruction_residual
                        .max(cert.max_reconstruction_residual),
                },
            });
        }

        times.push(t);
        alpha_rows.push(alpha.values);
        dalpha_rows.push(dalpha);
        g_rows.push(g);
        h_rows.push(h);
    }

    let minima = ConditionMinima {
        kmon: finite_min(kmon.iter().flatten().copied()),
        tmon: finite_min(tmon.iter().flatten().copied()),
        glc: finite_min(glc.iter().flatten().copied()),
        delta: finite_min(delta.iter().flatten().copied()),
        max_h2: h2_tr.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        max_h2_gap: h2_tr
            .iter()
            .zip(&h2_fd)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max),
    };
    let verdicts = ConditionVerdicts {
        kmon: minima.kmon >= -tol::MARGIN,
        tmon: minima.tmon >= -tol::DELTA,
        glc: minima.glc >= -tol::MARGIN,
        delta: minima.delta >= -tol::DELTA,
        concave: minima.max_h2 <= tol::H2,
    };

    Ok(SheppOlkinReport {
        v: inst.v(),
        shift: inst.shift(),
        monotone: inst.is_monotone(),
        trivially_constant: false,
        grid_times,
        entropy,
        times,
        alpha: alpha_rows,
        dalpha: dalpha_rows,
        g: g_rows,
        h: h_rows,
        kmon_margins: kmon,
        tmon_margins: tmon,
        glc_margins: glc,
        delta_margins: delta,
        h2_transport: h2_tr,
        h2_fd,
        minima,
        verdicts,
        h2_agreement,
        pair: pair_summary,
    })
}

/// A monotone system whose mixing coefficients move backwards in time
/// somewhere, together with the re-verification data showing the entropy
/// stays concave regardless.
#[derive(Debug, Clone, Serialize)]
pub struct TmonWitness {
    pub p_start: Vec<f64>,
    pub p_end: Vec<f64>,
    pub trial_index: u64,
    pub min_dalpha: f64,
    pub at_t: f64,
    pub at_k: usize,
    /// Minimum over a grid of twice the search resolution.
    pub recheck_grid: usize,
    pub recheck_min_dalpha: f64,
    /// Largest transport-form curvature over the trimmed 201-point grid.
    pub max_h2: f64,
}

fn min_dalpha_on_grid(
    so: &SheppOlkinInstance,
    grid: usize,
) -> Option<(f64, f64, usize)> {
    let times = DiscretePath::uniform_times(grid);
    let mut best: Option<(f64, f64, usize)> = None;
    for &t in &times[1..times.len() - 1] {
        let Ok(da) = so.dalpha_at(t) else { continue };
        for (k, &d) in da.iter().enumerate() {
            if d.is_finite() && best.is_none_or(|(b, _, _)| d < b) {
                best = Some((d, t, k));
            }
        }
    }
    best
}

/// Random search over monotone systems for an instance where some mixing
/// coefficient decreases in time. A hit is re-verified at twice the grid
/// resolution and its entropy curvature is evaluated on the standard grid.
pub fn tmon_search(n: usize, trials: u64, seed: u64, grid: usize) -> Result<Option<TmonWitness>> {
    if trials == 0 {
        return Err(Error::Domain("search needs at least one trial".into()));
    }
    for idx in 0..trials {
        let mut rng = crate::sampling::rng_for(seed, idx);
        let sys = crate::sampling::random_monotone_system(n, &mut rng);
        let so = SheppOlkinInstance::new(sys)?;
        if so.v() <= tol::SPEED || so.reduced_system().len() < 2 {
            continue;
        }
        let Some((min_d, at_t, at_k)) = min_dalpha_on_grid(&so, grid) else {
            continue;
        };
        if min_d < -1e-6 {
            let recheck_grid = 2 * grid - 1;
            let recheck = min_dalpha_on_grid(&so, recheck_grid)
                .map(|(d, _, _)| d)
                .unwrap_or(f64::INFINITY);
            let rep = analyze(
                &so,
                AnalyzeOptions {
                    grid: 201,
                    with_pair_certificate: false,
                },
            )?;
            return Ok(Some(TmonWitness {
                p_start: so.system().p_start().to_vec(),
                p_end: so.system().p_end().to_vec(),
                trial_index: idx,
                min_dalpha: min_d,
                at_t,
                at_k,
                recheck_grid,
                recheck_min_dalpha: recheck,
                max_h2: rep.minima.max_h2,
            }));
        }
    }
    Ok(None)
}

/// Transport-form curvature `-v²Σ∇₂(h_k)ln f_k - Σ(∇₁(v g_k))²/f_k` from
/// one time slice of closed forms.
pub(crate) fn transport_h2(f: &[f64], g: &[f64], h: &[f64], v: f64) -> f64 {
    let n = f.len() - 1;
    let h_at = |k: isize| at(h, k);
    let g_at = |k: isize| at(g, k);
    let mut first = CompSum::new();
    let mut second = CompSum::new();
    for k in 0..=n as isize {
        let fk = f[k as usize];
        let lap = h_at(k) - 2.0 * h_at(k - 1) + h_at(k - 2);
        if fk > 0.0 {
            first.add(lap * fk.ln());
            let flux = v * (g_at(k) - g_at(k - 1));
            second.add(flux * flux / fk);
        }
    }
    -v * v * first.total() - second.total()
}

/// Differential entropy of the Gaussian with the system's mean and variance
/// at `t`, together with its closed-form second time derivative.
///
/// `H(t) = ln(2πe·V(t))/2` with `V(t) = Σ p_i(t)(1-p_i(t))`; since the mean
/// is affine and `V'' = -2Σ p_i'² ≤ 0`, the curvature
/// `H'' = (V''/V - (V'/V)²)/2` is never positive.
pub fn gaussian_proxy_entropy(system: &BernoulliSystem, t: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeRange(t));
    }
    let v_t = system.variance_at(t);
    if v_t <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let ds = system.derivatives();
    let dv: f64 = system
        .params_at(t)
        .iter()
        .zip(&ds)
        .map(|(&p, &d)| d * (1.0 - 2.0 * p))
        .sum();
    let ddv: f64 = -2.0 * ds.iter().map(|&d| d * d).sum::<f64>();
    let h = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * v_t).ln();
    let h2 = 0.5 * (ddv / v_t - (dv / v_t).powi(2));
    Ok((h, h2))
}
