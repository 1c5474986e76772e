//! Bernoulli-sum (Poisson-binomial) mass functions and their elementary
//! functionals: entropy, log-concavity margins and ultra-log-concavity.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::{comp_sum, CompSum};
use crate::tol;

/// A finite probability mass function on `{0,…,n}`.
///
/// Out-of-support indices read as exact zero everywhere; every margin
/// formula in the crate relies on that convention.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Pmf {
    masses: Vec<f64>,
}

impl Pmf {
    /// Validate and wrap a mass vector. Masses may be very slightly negative
    /// (down to [`tol::PMF_NEG`]) to absorb rounding from upstream
    /// arithmetic, and must total one within [`tol::PMF_SUM`].
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.is_empty() {
            return Err(Error::InvalidPmf("empty mass vector".into()));
        }
        for (k, &m) in masses.iter().enumerate() {
            if !m.is_finite() || m < tol::PMF_NEG {
                return Err(Error::InvalidPmf(format!("mass[{k}] = {m:e}")));
            }
        }
        let total = comp_sum(masses.iter().copied());
        if (total - 1.0).abs() > tol::PMF_SUM {
            return Err(Error::InvalidPmf(format!("total mass {total}")));
        }
        Ok(Self { masses })
    }

    /// Point mass at `at` on the support `{0,…,support_size-1}`.
    pub fn point_mass(at: usize, support_size: usize) -> Self {
        let mut masses = vec![0.0; support_size.max(at + 1)];
        masses[at] = 1.0;
        Self { masses }
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn support_size(&self) -> usize {
        self.masses.len()
    }

    /// Largest support index `n`.
    pub fn max_index(&self) -> usize {
        self.masses.len() - 1
    }

    /// Mass at `k`, zero outside the support.
    pub fn get(&self, k: isize) -> f64 {
        if k < 0 || k as usize >= self.masses.len() {
            0.0
        } else {
            self.masses[k as usize]
        }
    }

    pub fn mean(&self) -> f64 {
        comp_sum(self.masses.iter().enumerate().map(|(k, &m)| k as f64 * m))
    }

    /// Distribution function `F_k = f_0 + … + f_k`.
    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = CompSum::new();
        self.masses
            .iter()
            .map(|&m| {
                acc.add(m);
                acc.total()
            })
            .collect()
    }

    /// Shannon entropy in nats; zero masses contribute zero.
    pub fn entropy(&self) -> f64 {
        entropy_of(&self.masses)
    }

    pub fn is_log_concave(&self, slack: f64) -> bool {
        log_concavity_margins(self).d.iter().all(|&d| d >= -slack)
    }

    /// Extend the support to `{0,…,n}` by zero-padding.
    pub fn padded(&self, n: usize) -> Result<Self> {
        if self.masses.len() > n + 1 {
            return Err(Error::SupportExceedsOrder {
                order: n,
                len: self.masses.len(),
            });
        }
        let mut masses = self.masses.clone();
        masses.resize(n + 1, 0.0);
        Ok(Self { masses })
    }
}

pub(crate) fn entropy_of(masses: &[f64]) -> f64 {
    let mut acc = CompSum::new();
    for &m in masses {
        if m > 0.0 {
            acc.add(-m * m.ln());
        }
    }
    acc.total()
}

/// Independent Bernoulli factors whose parameters move along affine lines
/// `p_i(t) = p_i(0)(1-t) + p_i(1)t`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BernoulliSystem {
    p_start: Vec<f64>,
    p_end: Vec<f64>,
}

impl BernoulliSystem {
    pub fn new(p_start: Vec<f64>, p_end: Vec<f64>) -> Result<Self> {
        if p_start.len() != p_end.len() {
            return Err(Error::SupportMismatch(p_start.len(), p_end.len()));
        }
        for &p in p_start.iter().chain(p_end.iter()) {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityRange(p));
            }
        }
        Ok(Self { p_start, p_end })
    }

    /// A system whose parameters do not move.
    pub fn constant(ps: Vec<f64>) -> Result<Self> {
        Self::new(ps.clone(), ps)
    }

    pub fn len(&self) -> usize {
        self.p_start.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p_start.is_empty()
    }

    pub fn p_start(&self) -> &[f64] {
        &self.p_start
    }

    pub fn p_end(&self) -> &[f64] {
        &self.p_end
    }

    pub fn params_at(&self, t: f64) -> Vec<f64> {
        self.p_start
            .iter()
            .zip(&self.p_end)
            .map(|(&a, &b)| a * (1.0 - t) + b * t)
            .collect()
    }

    /// Constant derivatives `p_i' = p_i(1) - p_i(0)`.
    pub fn derivatives(&self) -> Vec<f64> {
        self.p_start
            .iter()
            .zip(&self.p_end)
            .map(|(&a, &b)| b - a)
            .collect()
    }

    /// True iff every parameter is nondecreasing.
    pub fn is_monotone(&self) -> bool {
        self.p_start.iter().zip(&self.p_end).all(|(&a, &b)| b >= a)
    }

    /// Total parameter speed `v = Σ p_i'`.
    pub fn speed(&self) -> f64 {
        comp_sum(self.derivatives())
    }

    pub fn mean_at(&self, t: f64) -> f64 {
        comp_sum(self.params_at(t))
    }

    /// Sum of factor variances `V(t) = Σ p_i(t)(1 - p_i(t))`.
    pub fn variance_at(&self, t: f64) -> f64 {
        comp_sum(self.params_at(t).into_iter().map(|p| p * (1.0 - p)))
    }
}

/// Mass vector of the sum of independent Bernoulli factors with the given
/// parameters, by iterated convolution with ascending-index accumulation.
pub fn poisson_binomial(ps: &[f64]) -> Vec<f64> {
    let mut f = vec![0.0; ps.len() + 1];
    f[0] = 1.0;
    for (step, &p) in ps.iter().enumerate() {
        let q = 1.0 - p;
        let mut prev = 0.0;
        for item in f.iter_mut().take(step + 2) {
            let cur = *item;
            *item = q * cur + p * prev;
            prev = cur;
        }
    }
    f
}

/// Bernoulli-sum pmf of `system` at time `t`.
pub fn bernoulli_sum_pmf(system: &BernoulliSystem, t: f64) -> Result<Pmf> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeRange(t));
    }
    Pmf::new(poisson_binomial(&system.params_at(t)))
}

/// Bernoulli-sum pmf omitting one or two factors (recomputed from scratch,
/// not deconvolved). Indices are zero-based and must be distinct.
pub fn leave_out_pmf(system: &BernoulliSystem, t: f64, excluded: &[usize]) -> Result<Pmf> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::TimeRange(t));
    }
    for &i in excluded {
        if i >= system.len() {
            return Err(Error::IndexRange {
                index: i,
                len: system.len(),
            });
        }
    }
    if excluded.len() == 2 && excluded[0] == excluded[1] {
        return Err(Error::DuplicateIndex);
    }
    let ps: Vec<f64> = system
        .params_at(t)
        .into_iter()
        .enumerate()
        .filter(|(i, _)| !excluded.contains(i))
        .map(|(_, p)| p)
        .collect();
    Pmf::new(poisson_binomial(&ps))
}

/// Adjacent and skew log-concavity gaps of a mass function:
/// `d[k] = f_k^2 - f_{k-1} f_{k+1}` and `e[k] = f_k f_{k-1} - f_{k-2} f_{k+1}`,
/// with zero-padding outside the support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogConcavityMargins {
    pub d: Vec<f64>,
    pub e: Vec<f64>,
}

pub fn log_concavity_margins(f: &Pmf) -> LogConcavityMargins {
    let n = f.max_index() as isize;
    let d = (0..=n)
        .map(|k| f.get(k) * f.get(k) - f.get(k - 1) * f.get(k + 1))
        .collect();
    let e = (0..=n)
        .map(|k| f.get(k) * f.get(k - 1) - f.get(k - 2) * f.get(k + 1))
        .collect();
    LogConcavityMargins { d, e }
}

/// Ultra-log-concavity margins of order `n`: log-concavity of `f` relative
/// to the binomial with `n` trials, one entry per `k = 0,…,n-2`.
///
/// All entries nonnegative iff `f` is ULC(n); the binomial itself sits at
/// equality.
pub fn ulc_margins(f: &Pmf, n: usize) -> Result<Vec<f64>> {
    let f = f.padded(n)?;
    let nf = n as f64;
    Ok((0..n.saturating_sub(1))
        .map(|k| {
            let kf = k as f64;
            let a = (kf + 1.0) / nf * (1.0 - (kf + 1.0) / nf) * f.get(k as isize + 1).powi(2);
            let b = (kf + 2.0) / nf * (1.0 - kf / nf) * f.get(k as isize) * f.get(k as isize + 2);
            a - b
        })
        .collect())
}

/// Shannon entropy of `f` in nats.
pub fn entropy(f: &Pmf) -> f64 {
    f.entropy()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn empty_product_is_point_mass_at_zero() {
        let sys = BernoulliSystem::new(vec![], vec![]).unwrap();
        let f = bernoulli_sum_pmf(&sys, 0.3).unwrap();
        assert_eq!(f.masses(), &[1.0]);
    }

    #[test]
    fn fair_pair_is_binomial() {
        let sys = BernoulliSystem::constant(vec![0.5, 0.5]).unwrap();
        for &t in &[0.0, 0.4, 1.0] {
            let f = bernoulli_sum_pmf(&sys, t).unwrap();
            assert_eq!(f.masses(), &[0.25, 0.5, 0.25]);
        }
    }

    #[test]
    fn deterministic_factor_shifts_support() {
        let sys = BernoulliSystem::constant(vec![1.0, 0.3]).unwrap();
        let f = bernoulli_sum_pmf(&sys, 0.7).unwrap();
        assert!(close(f.get(0), 0.0, 0.0));
        assert!(close(f.get(1), 0.7, 1e-15));
        assert!(close(f.get(2), 0.3, 1e-15));
    }

    #[test]
    fn time_outside_unit_interval_rejected() {
        let sys = BernoulliSystem::constant(vec![0.5]).unwrap();
        assert!(matches!(
            bernoulli_sum_pmf(&sys, 1.5),
            Err(Error::TimeRange(_))
        ));
    }

    #[test]
    fn leave_out_single_factor() {
        let sys = BernoulliSystem::constant(vec![0.2, 0.7]).unwrap();
        let f = leave_out_pmf(&sys, 0.0, &[0]).unwrap();
        assert!(close(f.get(0), 0.3, 1e-15) && close(f.get(1), 0.7, 1e-15));
        let g = leave_out_pmf(&sys, 0.0, &[0, 1]).unwrap();
        assert_eq!(g.masses(), &[1.0]);
        let h = leave_out_pmf(
            &BernoulliSystem::constant(vec![0.5, 0.5, 0.5]).unwrap(),
            0.0,
            &[2],
        )
        .unwrap();
        assert_eq!(h.masses(), &[0.25, 0.5, 0.25]);
    }

    #[test]
    fn leave_out_rejects_bad_indices() {
        let sys = BernoulliSystem::constant(vec![0.2, 0.7]).unwrap();
        assert!(matches!(
            leave_out_pmf(&sys, 0.0, &[2]),
            Err(Error::IndexRange { .. })
        ));
        assert!(matches!(
            leave_out_pmf(&sys, 0.0, &[1, 1]),
            Err(Error::DuplicateIndex)
        ));
    }

    #[test]
    fn entropy_values() {
        assert_eq!(Pmf::new(vec![1.0]).unwrap().entropy(), 0.0);
        let h = Pmf::new(vec![0.5, 0.5]).unwrap().entropy();
        assert!(close(h, 2f64.ln(), 1e-15));
        // direct summation oracle for the fair two-factor sum
        let f = Pmf::new(vec![0.25, 0.5, 0.25]).unwrap();
        let oracle = -(0.25f64 * 0.25f64.ln() * 2.0 + 0.5 * 0.5f64.ln());
        assert!(close(f.entropy(), oracle, 1e-15));
        assert!(close(f.entropy(), 1.5 * 2f64.ln(), 1e-15));
    }

    #[test]
    fn log_concavity_margin_values() {
        let f = Pmf::new(vec![0.25, 0.5, 0.25]).unwrap();
        let m = log_concavity_margins(&f);
        assert!(close(m.d[1], 0.1875, 1e-16));

        let point = Pmf::new(vec![1.0]).unwrap();
        let m = log_concavity_margins(&point);
        assert_eq!(m.d, vec![1.0]);

        let gap = Pmf::new(vec![0.5, 0.0, 0.5]).unwrap();
        let m = log_concavity_margins(&gap);
        assert!(close(m.d[1], -0.25, 1e-16));
        assert!(!gap.is_log_concave(1e-12));
    }

    #[test]
    fn ulc_margins_binomial_equality() {
        for n in 2..=8usize {
            for &p in &[0.1, 0.5, 0.83] {
                let f = Pmf::new(crate::numerics::binomial_pmf(n, p)).unwrap();
                let m = ulc_margins(&f, n).unwrap();
                assert!(m.iter().all(|&x| x.abs() < 1e-15), "n={n} p={p} {m:?}");
            }
        }
    }

    #[test]
    fn ulc_margin_detects_uniform_violation() {
        let third = 1.0 / 3.0;
        let f = Pmf::new(vec![third, third, third]).unwrap();
        let m = ulc_margins(&f, 2).unwrap();
        assert!(close(m[0], 0.25 / 9.0 - 1.0 / 9.0, 1e-15));
        assert!(m[0] < 0.0);
    }

    #[test]
    fn ulc_rejects_oversized_support() {
        let f = Pmf::new(vec![0.25, 0.5, 0.25]).unwrap();
        assert!(matches!(
            ulc_margins(&f, 1),
            Err(Error::SupportExceedsOrder { .. })
        ));
    }

    #[test]
    fn leave_out_decomposition_identity() {
        // f_k = (1-p_i) f_k g + p_i f_{k-1} across every factor.
        let sys = BernoulliSystem::new(vec![0.1, 0.35, 0.8], vec![0.4, 0.9, 0.85]).unwrap();
        for &t in &[0.0, 0.23, 0.77, 1.0] {
            let f = bernoulli_sum_pmf(&sys, t).unwrap();
            let ps = sys.params_at(t);
            for (i, &p) in ps.iter().enumerate() {
                let loo = leave_out_pmf(&sys, t, &[i]).unwrap();
                for k in 0..=f.max_index() as isize {
                    let rebuilt = (1.0 - p) * loo.get(k) + p * loo.get(k - 1);
                    assert!(close(f.get(k), rebuilt, 1e-13));
                }
            }
        }
    }

    #[test]
    fn mean_identity() {
        let sys = BernoulliSystem::new(vec![0.0, 0.25, 0.5], vec![0.5, 0.75, 1.0]).unwrap();
        for i in 0..=10 {
            let t = i as f64 / 10.0;
            let f = bernoulli_sum_pmf(&sys, t).unwrap();
            assert!(close(f.mean(), sys.mean_at(t), 1e-12));
        }
    }
}
