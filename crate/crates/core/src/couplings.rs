//! Thinning, coupling-induced interpolations, the quantile coupling of
//! stochastically ordered pairs, and the translation path.
//!
//! A coupling bridges each pair `(x, y)` of its support by an independent
//! binomial walk, which interpolates the marginals and, in the ordered
//! case, yields a constant-speed path whose flux and mixing coefficients
//! have closed forms.

use serde::Serialize;

use crate::distributions::Pmf;
use crate::error::{Error, Result};
use crate::numerics::{binomial_pmf, comp_sum, CompSum};
use crate::tol;
use crate::transport::{AlphaRow, DiscretePath};

/// Rényi thinning: each unit of mass is kept independently with
/// probability `t`, so `(T_t f)_k = Σ_x f_x · bin(x, t, k)`.
///
/// `T_0 f` is the point mass at zero and `T_1 f = f`.
pub fn thin(f: &Pmf, t: f64) -> Result<Pmf> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeRange(t));
    }
    let n = f.max_index();
    let mut out = vec![0.0; n + 1];
    // grow bin(x, t) one convolution step at a time
    let mut b = vec![1.0];
    for (x, &mass) in f.masses().iter().enumerate() {
        if x > 0 {
            let mut next = vec![0.0; x + 1];
            for (j, &bj) in b.iter().enumerate() {
                next[j] += (1.0 - t) * bj;
                next[j + 1] += t * bj;
            }
            b = next;
        }
        if mass > 0.0 {
            for (j, &bj) in b.iter().enumerate() {
                out[j] += mass * bj;
            }
        }
    }
    Pmf::new(out)
}

/// A joint distribution on lattice pairs, stored as `(x, y, mass)` triples.
#[derive(Debug, Clone, Serialize)]
pub struct Coupling {
    support: Vec<(usize, usize, f64)>,
}

impl Coupling {
    pub fn new(support: Vec<(usize, usize, f64)>) -> Result<Self> {
        if support.is_empty() {
            return Err(Error::Domain("coupling has empty support".into()));
        }
        for &(_, _, m) in &support {
            if m <= 0.0 || !m.is_finite() {
                return Err(Error::Domain(format!("coupling mass {m} not positive")));
            }
        }
        let total = comp_sum(support.iter().map(|&(_, _, m)| m));
        if (total - 1.0).abs() > tol::PMF_SUM {
            return Err(Error::Domain(format!("coupling total mass {total}")));
        }
        Ok(Self { support })
    }

    pub fn support(&self) -> &[(usize, usize, f64)] {
        &self.support
    }

    /// Largest lattice index touched by either marginal.
    pub fn max_index(&self) -> usize {
        self.support
            .iter()
            .map(|&(x, y, _)| x.max(y))
            .max()
            .unwrap_or(0)
    }

    /// `(x marginal, y marginal)` on `{0,…,max_index}`.
    pub fn marginals(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.max_index();
        let mut mx = vec![0.0; n + 1];
        let mut my = vec![0.0; n + 1];
        for &(x, y, m) in &self.support {
            mx[x] += m;
            my[y] += m;
        }
        (mx, my)
    }

    /// True when every support pair satisfies `x ≤ y`.
    pub fn is_ordered(&self) -> bool {
        self.support.iter().all(|&(x, y, _)| x <= y)
    }

    /// Mean displacement `v = Σ π_{x,y} (y - x)` (signed).
    pub fn mean_displacement(&self) -> f64 {
        comp_sum(
            self.support
                .iter()
                .map(|&(x, y, m)| m * (y as f64 - x as f64)),
        )
    }
}

/// The mass function at time `t` of the binomial bridge over a coupling:
/// `f_k(t) = Σ π_{x,y} bin(|y-x|, t, ±(k-x))`, walking upward for `y ≥ x`
/// and downward (reflected) for `y < x`.
pub fn coupling_interpolation(pi: &Coupling, t: f64) -> Result<Pmf> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeRange(t));
    }
    let n = pi.max_index();
    let mut out = vec![0.0; n + 1];
    for &(x, y, mass) in pi.support() {
        if y >= x {
            let b = binomial_pmf(y - x, t);
            for (j, &bj) in b.iter().enumerate() {
                out[x + j] += mass * bj;
            }
        } else {
            let b = binomial_pmf(x - y, t);
            for (j, &bj) in b.iter().enumerate() {
                out[x - j] += mass * bj;
            }
        }
    }
    Pmf::new(out)
}

/// Quantile coupling of a stochastically ordered pair: mass between
/// consecutive breakpoints of the merged distribution functions, so every
/// support pair has `x ≤ y`.
pub fn monotone_coupling(f0: &Pmf, f1: &Pmf) -> Result<Coupling> {
    let cf0 = f0.cdf();
    let cf1 = f1.cdf();
    let len = cf0.len().max(cf1.len());
    let level = |c: &[f64], k: usize| if k < c.len() { c[k].min(1.0) } else { 1.0 };
    for k in 0..len {
        if level(&cf0, k) < level(&cf1, k) - tol::PMF_SUM {
            return Err(Error::DominationViolated(k));
        }
    }
    let mut triples = Vec::new();
    let (mut i, mut j) = (0usize, 0usize);
    let mut prev = 0.0f64;
    loop {
        let a = level(&cf0, i);
        let b = level(&cf1, j);
        let u = a.min(b);
        if u - prev > 1e-15 {
            triples.push((i, j, u - prev));
        }
        prev = u;
        let mut advanced = false;
        if a <= u + 1e-15 && i + 1 < cf0.len() {
            i += 1;
            advanced = true;
        }
        if b <= u + 1e-15 && j + 1 < cf1.len() {
            j += 1;
            advanced = true;
        }
        if !advanced {
            break;
        }
    }
    Coupling::new(triples)
}

/// A coupling-induced constant-speed path with closed-form masses, flux and
/// mixing coefficients.
#[derive(Debug, Clone)]
pub struct CouplingPath {
    pi: Coupling,
    v: f64,
    n: usize,
}

/// Decompose the binomial bridge over an ordered coupling into its speed,
/// flux distribution and mixing coefficients.
pub fn coupling_path_decomposition(pi: &Coupling) -> Result<CouplingPath> {
    if !pi.is_ordered() {
        return Err(Error::Domain(
            "decomposition needs an ordered coupling (x ≤ y on the support)".into(),
        ));
    }
    let v = pi.mean_displacement();
    if v.abs() <= tol::SPEED {
        return Err(Error::DegenerateSpeed);
    }
    Ok(CouplingPath {
        n: pi.max_index(),
        pi: pi.clone(),
        v,
    })
}

impl CouplingPath {
    pub fn v(&self) -> f64 {
        self.v
    }

    pub fn max_index(&self) -> usize {
        self.n
    }

    pub fn coupling(&self) -> &Coupling {
        &self.pi
    }

    pub fn pmf_at(&self, t: f64) -> Result<Pmf> {
        coupling_interpolation(&self.pi, t)
    }

    /// Flux distribution `g_k(t) = Σ π̃_{x,y} bin(y-x-1, t, k-x)` under the
    /// distance-biased weights `π̃ = π (y-x)/v`.
    pub fn g_at(&self, t: f64) -> Result<Pmf> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeRange(t));
        }
        let mut g = vec![0.0; self.n.max(1)];
        for &(x, y, mass) in self.pi.support() {
            if y > x {
                let b = binomial_pmf(y - x - 1, t);
                let w = mass * (y - x) as f64 / self.v;
                for (j, &bj) in b.iter().enumerate() {
                    g[x + j] += w * bj;
                }
            }
        }
        Pmf::new(g)
    }

    /// Closed-form `∂f_k/∂t = -v ∇₁ g_k`.
    pub fn dpmf_at(&self, t: f64) -> Result<Vec<f64>> {
        let g = self.g_at(t)?;
        Ok((0..=self.n as isize)
            .map(|k| -self.v * (g.get(k) - g.get(k - 1)))
            .collect())
    }

    /// Mixing coefficients from the tail identity, written out per support
    /// pair: for `y > x` the pair contributes
    /// `t·bin(y-x-1, t, k-x-1) + (1 - (y-x)/v)·Σ_{l≥k} bin(y-x-1, t, l-x)`,
    /// and a static pair `y = x` contributes its mass when `x ≥ k`.
    ///
    /// Whether the values stay inside `[0,1]` is measured, not assumed;
    /// inspect [`AlphaRow::range_violation`].
    pub fn alpha_at(&self, t: f64) -> Result<AlphaRow> {
        let f = self.pmf_at(t)?;
        let n = self.n;
        let mut num = vec![CompSum::new(); n + 1];
        for &(x, y, mass) in self.pi.support() {
            if y == x {
                for item in num.iter_mut().take(x + 1) {
                    item.add(mass);
                }
                continue;
            }
            let b = binomial_pmf(y - x - 1, t);
            let tail = {
                // upper tails of b: tail[j] = Σ_{l ≥ j} b_l
                let mut acc = 0.0;
                let mut tail = vec![0.0; b.len() + 1];
                for j in (0..b.len()).rev() {
                    acc += b[j];
                    tail[j] = acc;
                }
                tail
            };
            let bias = 1.0 - (y - x) as f64 / self.v;
            for (k, item) in num.iter_mut().enumerate() {
                let j = k as isize - x as isize;
                let walk = if j >= 1 && ((j - 1) as usize) < b.len() {
                    t * b[(j - 1) as usize]
                } else {
                    0.0
                };
                let tail_val = if j <= 0 {
                    1.0
                } else if (j as usize) < tail.len() {
                    tail[j as usize]
                } else {
                    0.0
                };
                item.add(mass * (walk + bias * tail_val));
            }
        }
        let mut values = vec![f64::NAN; n + 1];
        let mut valid = vec![false; n + 1];
        for k in 0..=n {
            let fk = f.get(k as isize);
            if fk > tol::MASS {
                values[k] = num[k].total() / fk;
                valid[k] = true;
            }
        }
        if valid[0] {
            debug_assert!(values[0].abs() < 1e-9);
            values[0] = 0.0;
        }
        if valid[n] {
            debug_assert!((values[n] - 1.0).abs() < 1e-9);
            values[n] = 1.0;
        }
        Ok(AlphaRow { values, valid })
    }

    /// Sample the path on a uniform grid, carrying closed-form suppliers.
    pub fn to_path(&self, grid: usize) -> Result<DiscretePath> {
        let me = self.clone();
        let path = DiscretePath::from_fn(DiscretePath::uniform_times(grid), move |t| {
            me.pmf_at(t).expect("time inside [0,1]").masses().to_vec()
        })?;
        let me = self.clone();
        Ok(path.with_derivative(move |t| me.dpmf_at(t).expect("time inside [0,1]")))
    }
}

/// The shift-by-`m` path of a mass function: `f(t) = f ⊛ bin(m, t)`, with
/// flux `g_k(t) = Σ_x f_x bin(m-1, t, k-x)` and mixing coefficients
/// `α_k = t g_{k-1}/f_k = 1 - (1-t) g_k/f_k`.
#[derive(Debug, Clone)]
pub struct TranslationPath {
    f: Pmf,
    m: usize,
    log_concave: bool,
}

pub fn translation_path(f: &Pmf, m: usize) -> Result<TranslationPath> {
    if m == 0 {
        return Err(Error::DegenerateSpeed);
    }
    Ok(TranslationPath {
        log_concave: f.is_log_concave(tol::PMF_SUM),
        f: f.clone(),
        m,
    })
}

impl TranslationPath {
    pub fn shift(&self) -> usize {
        self.m
    }

    pub fn v(&self) -> f64 {
        self.m as f64
    }

    /// Whether the base mass function is log-concave; the monotonicity
    /// margins are only guaranteed when it is.
    pub fn is_log_concave(&self) -> bool {
        self.log_concave
    }

    pub fn max_index(&self) -> usize {
        self.f.max_index() + self.m
    }

    pub fn pmf_at(&self, t: f64) -> Result<Pmf> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeRange(t));
        }
        let b = binomial_pmf(self.m, t);
        let mut out = vec![0.0; self.max_index() + 1];
        for (x, &mass) in self.f.masses().iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                out[x + j] += mass * bj;
            }
        }
        Pmf::new(out)
    }

    pub fn g_at(&self, t: f64) -> Result<Pmf> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::TimeRange(t));
        }
        let b = binomial_pmf(self.m - 1, t);
        let mut out = vec![0.0; self.max_index()];
        for (x, &mass) in self.f.masses().iter().enumerate() {
            for (j, &bj) in b.iter().enumerate() {
                out[x + j] += mass * bj;
            }
        }
        Pmf::new(out)
    }

    pub fn dpmf_at(&self, t: f64) -> Result<Vec<f64>> {
        let g = self.g_at(t)?;
        let v = self.v();
        Ok((0..=self.max_index() as isize)
            .map(|k| -v * (g.get(k) - g.get(k - 1)))
            .collect())
    }

    /// Mixing coefficients, with the two closed forms cross-checked.
    pub fn alpha_at(&self, t: f64) -> Result<AlphaRow> {
        let f = self.pmf_at(t)?;
        let g = self.g_at(t)?;
        let n = self.max_index();
        let mut values = vec![f64::NAN; n + 1];
        let mut valid = vec![false; n + 1];
        for k in 0..=n {
            let fk = f.get(k as isize);
            if fk <= tol::MASS {
                continue;
            }
            let forward = t * g.get(k as isize - 1) / fk;
            let backward = 1.0 - (1.0 - t) * g.get(k as isize) / fk;
            if (forward - backward).abs() > tol::CROSS_CHECK {
                return Err(Error::Domain(format!(
                    "translation mixing forms disagree at k = {k}"
                )));
            }
            values[k] = forward;
            valid[k] = true;
        }
        Ok(AlphaRow { values, valid })
    }

    pub fn to_path(&self, grid: usize) -> Result<DiscretePath> {
        let me = self.clone();
        let path = DiscretePath::from_fn(DiscretePath::uniform_times(grid), move |t| {
            me.pmf_at(t).expect("time inside [0,1]").masses().to_vec()
        })?;
        let me = self.clone();
        Ok(path.with_derivative(move |t| me.dpmf_at(t).expect("time inside [0,1]")))
    }
}

/// One time slice of the translation path: the mass function and its mixing
/// coefficients.
pub fn translation_at(f: &Pmf, m: usize, t: f64) -> Result<(Pmf, AlphaRow)> {
    let path = translation_path(f, m)?;
    Ok((path.pmf_at(t)?, path.alpha_at(t)?))
}
