//! Cubic inequalities and product identities satisfied by Bernoulli-sum
//! mass functions, with randomized verification campaigns.
//!
//! Everything here works on a plain parameter vector; out-of-support masses
//! read as zero so the margin formulas hold for every integer index.

use rayon::prelude::*;
use serde::Serialize;

use crate::distributions::poisson_binomial;
use crate::error::{Error, Result};
use crate::sampling::{random_params, rng_for, stratified_prob};
use crate::tol;

fn check_params(params: &[f64]) -> Result<()> {
    for &p in params {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::ProbabilityRange(p));
        }
    }
    Ok(())
}

/// Zero-padded access into a mass vector.
#[inline]
fn at(g: &[f64], k: isize) -> f64 {
    if k < 0 || k as usize >= g.len() {
        0.0
    } else {
        g[k as usize]
    }
}

fn d_gap(g: &[f64], k: isize) -> f64 {
    at(g, k) * at(g, k) - at(g, k - 1) * at(g, k + 1)
}

fn c1(g: &[f64], k: isize) -> f64 {
    at(g, k - 1) * at(g, k).powi(2) - 2.0 * at(g, k - 1).powi(2) * at(g, k + 1)
        + at(g, k) * at(g, k + 1) * at(g, k - 2)
}

fn c1bar(g: &[f64], k: isize) -> f64 {
    at(g, k).powi(2) * at(g, k + 1) - 2.0 * at(g, k + 1).powi(2) * at(g, k - 1)
        + at(g, k + 2) * at(g, k) * at(g, k - 1)
}

fn c2(g: &[f64], k: isize) -> f64 {
    at(g, k).powi(3) - at(g, k - 1) * at(g, k) * at(g, k + 1) - at(g, k - 1).powi(2) * at(g, k + 2)
        + at(g, k - 2) * at(g, k) * at(g, k + 2)
}

fn c2bar(g: &[f64], k: isize) -> f64 {
    at(g, k).powi(3) - at(g, k - 1) * at(g, k) * at(g, k + 1) - at(g, k + 1).powi(2) * at(g, k - 2)
        + at(g, k - 2) * at(g, k) * at(g, k + 2)
}

fn c3(g: &[f64], k: isize) -> f64 {
    2.0 * at(g, k).powi(3) - 3.0 * at(g, k - 1) * at(g, k) * at(g, k + 1)
        + at(g, k - 1).powi(2) * at(g, k + 2)
}

fn c3bar(g: &[f64], k: isize) -> f64 {
    2.0 * at(g, k).powi(3) - 3.0 * at(g, k - 1) * at(g, k) * at(g, k + 1)
        + at(g, k + 1).powi(2) * at(g, k - 2)
}

fn d1(g: &[f64], k: isize) -> f64 {
    2.0 * at(g, k).powi(2) * at(g, k - 2) - 3.0 * at(g, k - 2) * at(g, k - 1) * at(g, k + 1)
        + at(g, k + 1) * at(g, k) * at(g, k - 3)
}

/// Spatial index range wide enough to cover every index where any cubic can
/// be nonzero, plus a zero-padded rim.
fn k_range(m: usize) -> std::ops::RangeInclusive<isize> {
    0..=(m as isize + 2)
}

/// Left-hand sides of the seven cubic inequalities, one entry per `k` in
/// `0,…,m+2`, all nonnegative for Bernoulli sums.
#[derive(Debug, Clone, Serialize)]
pub struct CubicMargins {
    pub c1: Vec<f64>,
    pub c1bar: Vec<f64>,
    pub c2: Vec<f64>,
    pub c2bar: Vec<f64>,
    pub c3: Vec<f64>,
    pub c3bar: Vec<f64>,
    pub d1: Vec<f64>,
}

impl CubicMargins {
    pub fn min(&self) -> f64 {
        [
            &self.c1, &self.c1bar, &self.c2, &self.c2bar, &self.c3, &self.c3bar, &self.d1,
        ]
        .iter()
        .flat_map(|v| v.iter().copied())
        .fold(f64::INFINITY, f64::min)
    }
}

pub fn cubic_margins(params: &[f64]) -> Result<CubicMargins> {
    check_params(params)?;
    let g = poisson_binomial(params);
    let ks = k_range(params.len());
    Ok(CubicMargins {
        c1: ks.clone().map(|k| c1(&g, k)).collect(),
        c1bar: ks.clone().map(|k| c1bar(&g, k)).collect(),
        c2: ks.clone().map(|k| c2(&g, k)).collect(),
        c2bar: ks.clone().map(|k| c2bar(&g, k)).collect(),
        c3: ks.clone().map(|k| c3(&g, k)).collect(),
        c3bar: ks.clone().map(|k| c3bar(&g, k)).collect(),
        d1: ks.map(|k| d1(&g, k)).collect(),
    })
}

/// Residual of the leave-one-out product identity
/// `q f_k f_{k-q} = Σ_j p_j(1-p_j) [f^{(j)}_{k-1} f^{(j)}_{k-q} - f^{(j)}_k f^{(j)}_{k-q-1}]`.
pub fn soi_bvar_residual(params: &[f64], k: isize, q: u32) -> Result<f64> {
    check_params(params)?;
    if q < 1 {
        return Err(Error::Domain("q must be at least 1".into()));
    }
    let f = poisson_binomial(params);
    let lhs = q as f64 * at(&f, k) * at(&f, k - q as isize);
    let mut rhs = 0.0;
    for j in 0..params.len() {
        let ps: Vec<f64> = params
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != j)
            .map(|(_, &p)| p)
            .collect();
        let fj = poisson_binomial(&ps);
        rhs += params[j]
            * (1.0 - params[j])
            * (at(&fj, k - 1) * at(&fj, k - q as isize) - at(&fj, k) * at(&fj, k - 1 - q as isize));
    }
    Ok((lhs - rhs).abs())
}

/// Margins of `g_k D_k + g_{k-2} D_{k+1} - 2 g_{k+2} D_{k-1}`, one entry per
/// `k` in `0,…,m+2`.
pub fn pn_equiv_margins(params: &[f64]) -> Result<Vec<f64>> {
    check_params(params)?;
    let g = poisson_binomial(params);
    Ok(k_range(params.len())
        .map(|k| at(&g, k) * d_gap(&g, k) + at(&g, k - 2) * d_gap(&g, k + 1) - 2.0 * at(&g, k + 2) * d_gap(&g, k - 1))
        .collect())
}

/// Residuals of the three factorization identities that reduce the corollary
/// inequalities to the base cubic.
#[derive(Debug, Clone, Serialize)]
pub struct FactorizationReport {
    /// `g_{k+1} C2(k) - [(g_k g_{k+1} - g_{k-1} g_{k+2}) D_k + g_{k+2} C1(k)]`
    pub c2: Vec<f64>,
    /// `g_k C3(k) - [2 D_k^2 + g_{k-1} C1bar(k)]`
    pub c3: Vec<f64>,
    /// `g_{k-1} D1(k) - [2 g_{k-2} C1(k) + g_{k+1} C1(k-1)]`
    pub d1: Vec<f64>,
}

impl FactorizationReport {
    pub fn max_residual(&self) -> f64 {
        self.c2
            .iter()
            .chain(&self.c3)
            .chain(&self.d1)
            .fold(0.0f64, |m, &r| m.max(r.abs()))
    }
}

pub fn corollary_factorizations(params: &[f64]) -> Result<FactorizationReport> {
    check_params(params)?;
    let g = poisson_binomial(params);
    let ks = k_range(params.len());
    let mut rep = FactorizationReport {
        c2: Vec::new(),
        c3: Vec::new(),
        d1: Vec::new(),
    };
    for k in ks {
        rep.c2.push(
            at(&g, k + 1) * c2(&g, k)
                - ((at(&g, k) * at(&g, k + 1) - at(&g, k - 1) * at(&g, k + 2)) * d_gap(&g, k)
                    + at(&g, k + 2) * c1(&g, k)),
        );
        rep.c3
            .push(at(&g, k) * c3(&g, k) - (2.0 * d_gap(&g, k).powi(2) + at(&g, k - 1) * c1bar(&g, k)));
        rep.d1.push(
            at(&g, k - 1) * d1(&g, k) - (2.0 * at(&g, k - 2) * c1(&g, k) + at(&g, k + 1) * c1(&g, k - 1)),
        );
    }
    Ok(rep)
}

/// Basis coefficients of the one-more-factor expansion of the base cubic in
/// `(1-p)^3, p(1-p)^2, p^2(1-p), p^3`, plus the reassembly residual against
/// the cubic of the enlarged sum.
#[derive(Debug, Clone, Serialize)]
pub struct InductionCoefficients {
    /// Coefficient of `(1-p)^3`: the base cubic at `k`.
    pub c1_here: Vec<f64>,
    /// Coefficient of `p(1-p)^2`.
    pub d1: Vec<f64>,
    /// Coefficient of `p^2(1-p)`: `g_{k-1} D_{k-1} + g_{k-3} D_k - 2 g_{k+1} D_{k-2}`.
    pub pn_combo: Vec<f64>,
    /// Coefficient of `p^3`: the base cubic at `k-1`.
    pub c1_shift: Vec<f64>,
    /// `|reassembled - C1 of the (m+1)-factor sum|` per `k`.
    pub reassembly_residual: Vec<f64>,
}

impl InductionCoefficients {
    pub fn min_coefficient(&self) -> f64 {
        self.c1_here
            .iter()
            .chain(&self.d1)
            .chain(&self.pn_combo)
            .chain(&self.c1_shift)
            .fold(f64::INFINITY, |m, &x| m.min(x))
    }

    pub fn max_residual(&self) -> f64 {
        self.reassembly_residual
            .iter()
            .fold(0.0f64, |m, &x| m.max(x))
    }
}

pub fn induction_coefficients(params: &[f64], p_new: f64) -> Result<InductionCoefficients> {
    check_params(params)?;
    if !(0.0..=1.0).contains(&p_new) {
        return Err(Error::ProbabilityRange(p_new));
    }
    let g = poisson_binomial(params);
    let mut extended = params.to_vec();
    extended.push(p_new);
    let g_ext = poisson_binomial(&extended);
    let p = p_new;
    let q = 1.0 - p;
    // Range over the enlarged support so the reassembly covers every index.
    let ks = k_range(extended.len());
    let mut out = InductionCoefficients {
        c1_here: Vec::new(),
        d1: Vec::new(),
        pn_combo: Vec::new(),
        c1_shift: Vec::new(),
        reassembly_residual: Vec::new(),
    };
    for k in ks {
        let a = c1(&g, k);
        let b = d1(&g, k);
        let c = at(&g, k - 1) * d_gap(&g, k - 1) + at(&g, k - 3) * d_gap(&g, k)
            - 2.0 * at(&g, k + 1) * d_gap(&g, k - 2);
        let d = c1(&g, k - 1);
        let rebuilt = q.powi(3) * a + p * q * q * b + p * p * q * c + p.powi(3) * d;
        out.c1_here.push(a);
        out.d1.push(b);
        out.pn_combo.push(c);
        out.c1_shift.push(d);
        out.reassembly_residual.push((rebuilt - c1(&g_ext, k)).abs());
    }
    Ok(out)
}

/// Worst value of one margin family over a campaign, with the instance that
/// attained it.
#[derive(Debug, Clone, Serialize)]
pub struct WorstMargin {
    pub value: f64,
    /// Worst margin divided by the cube of the instance's largest mass, so
    /// near-degenerate instances cannot hide violations.
    pub normalized: f64,
    pub params: Vec<f64>,
    pub k: isize,
}

impl WorstMargin {
    fn seed() -> Self {
        Self {
            value: f64::INFINITY,
            normalized: f64::INFINITY,
            params: Vec::new(),
            k: 0,
        }
    }

    fn take_min(&mut self, values: &[f64], params: &[f64], scale: f64) {
        for (i, &v) in values.iter().enumerate() {
            if v < self.value {
                self.value = v;
                self.normalized = v / scale;
                self.params = params.to_vec();
                self.k = i as isize;
            }
        }
    }
}

/// Summary of a randomized verification campaign over Bernoulli systems.
#[derive(Debug, Clone, Serialize)]
pub struct CampaignSummary {
    pub seed: u64,
    pub trials: usize,
    pub m_max: usize,
    pub worst_c1: WorstMargin,
    pub worst_c1bar: WorstMargin,
    pub worst_c2: WorstMargin,
    pub worst_c2bar: WorstMargin,
    pub worst_c3: WorstMargin,
    pub worst_c3bar: WorstMargin,
    pub worst_d1: WorstMargin,
    pub worst_pn_equiv: WorstMargin,
    pub worst_induction_coeff: WorstMargin,
    pub max_soi_bvar_residual: f64,
    pub max_factorization_residual: f64,
    pub max_induction_residual: f64,
    pub violations: usize,
}

impl CampaignSummary {
    /// True when every margin and residual sits inside its tolerance.
    pub fn all_pass(&self) -> bool {
        self.violations == 0
    }
}

struct InstanceOutcome {
    margins: CubicMargins,
    pn: Vec<f64>,
    induction: InductionCoefficients,
    params: Vec<f64>,
    scale: f64,
    soi_residual: f64,
    fact_residual: f64,
}

fn run_instance(seed: u64, idx: usize, m_max: usize) -> InstanceOutcome {
    let mut rng = rng_for(seed, idx as u64);
    let m = 1 + idx % m_max;
    let params = random_params(m, &mut rng);
    let p_new = stratified_prob(&mut rng);
    let g = poisson_binomial(&params);
    let scale = g.iter().fold(0.0f64, |m, &x| m.max(x)).powi(3).max(1e-300);

    let margins = cubic_margins(&params).expect("params in range");
    let pn = pn_equiv_margins(&params).expect("params in range");
    let induction = induction_coefficients(&params, p_new).expect("params in range");
    let fact_residual = corollary_factorizations(&params)
        .expect("params in range")
        .max_residual();
    let mut soi_residual = 0.0f64;
    for q in 1..=m as u32 {
        for k in -1..=(m as isize + 1) {
            soi_residual = soi_residual.max(soi_bvar_residual(&params, k, q).unwrap());
        }
    }
    InstanceOutcome {
        margins,
        pn,
        induction,
        params,
        scale,
        soi_residual,
        fact_residual,
    }
}

/// Run `trials` random instances with up to `m_max` factors and reduce the
/// worst margins. Deterministic for a fixed `(seed, trials, m_max)`;
/// parallel over instances.
pub fn verify_campaign(m_max: usize, trials: usize, seed: u64) -> CampaignSummary {
    let outcomes: Vec<InstanceOutcome> = (0..trials)
        .into_par_iter()
        .map(|idx| run_instance(seed, idx, m_max))
        .collect();

    let mut summary = CampaignSummary {
        seed,
        trials,
        m_max,
        worst_c1: WorstMargin::seed(),
        worst_c1bar: WorstMargin::seed(),
        worst_c2: WorstMargin::seed(),
        worst_c2bar: WorstMargin::seed(),
        worst_c3: WorstMargin::seed(),
        worst_c3bar: WorstMargin::seed(),
        worst_d1: WorstMargin::seed(),
        worst_pn_equiv: WorstMargin::seed(),
        worst_induction_coeff: WorstMargin::seed(),
        max_soi_bvar_residual: 0.0,
        max_factorization_residual: 0.0,
        max_induction_residual: 0.0,
        violations: 0,
    };
    for o in &outcomes {
        summary.worst_c1.take_min(&o.margins.c1, &o.params, o.scale);
        summary
            .worst_c1bar
            .take_min(&o.margins.c1bar, &o.params, o.scale);
        summary.worst_c2.take_min(&o.margins.c2, &o.params, o.scale);
        summary
            .worst_c2bar
            .take_min(&o.margins.c2bar, &o.params, o.scale);
        summary.worst_c3.take_min(&o.margins.c3, &o.params, o.scale);
        summary
            .worst_c3bar
            .take_min(&o.margins.c3bar, &o.params, o.scale);
        summary.worst_d1.take_min(&o.margins.d1, &o.params, o.scale);
        summary.worst_pn_equiv.take_min(&o.pn, &o.params, o.scale);
        summary
            .worst_induction_coeff
            .take_min(&o.induction.c1_here, &o.params, o.scale);
        summary
            .worst_induction_coeff
            .take_min(&o.induction.d1, &o.params, o.scale);
        summary
            .worst_induction_coeff
            .take_min(&o.induction.pn_combo, &o.params, o.scale);
        summary
            .worst_induction_coeff
            .take_min(&o.induction.c1_shift, &o.params, o.scale);
        summary.max_soi_bvar_residual = summary.max_soi_bvar_residual.max(o.soi_residual);
        summary.max_factorization_residual =
            summary.max_factorization_residual.max(o.fact_residual);
        summary.max_induction_residual = summary
            .max_induction_residual
            .max(o.induction.max_residual());
    }
    let margin_floor = -tol::MARGIN;
    if summary.worst_c1.value < margin_floor
        || summary.worst_c1bar.value < margin_floor
        || summary.worst_c2.value < margin_floor
        || summary.worst_c2bar.value < margin_floor
        || summary.worst_c3.value < margin_floor
        || summary.worst_c3bar.value < margin_floor
        || summary.worst_d1.value < margin_floor
        || summary.worst_pn_equiv.value < margin_floor
        || summary.worst_induction_coeff.value < margin_floor
    {
        summary.violations += 1;
    }
    if summary.max_soi_bvar_residual > tol::SOI_BVAR
        || summary.max_factorization_residual > tol::IDENTITY
        || summary.max_induction_residual > tol::IDENTITY
    {
        summary.violations += 1;
    }
    summary
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soi_bvar_trivial_cases() {
        // single factor, inside support
        assert!(soi_bvar_residual(&[0.37], 1, 1).unwrap() < 1e-16);
        // indices outside the support: both sides vanish
        assert!(soi_bvar_residual(&[0.3, 0.6], 7, 1).unwrap() == 0.0);
        assert!(soi_bvar_residual(&[0.3, 0.6], -2, 2).unwrap() == 0.0);
    }

    #[test]
    fn soi_bvar_exhaustive_small_instances() {
        let mut rng = rng_for(7, 0);
        for _ in 0..50 {
            let m = 1 + (stratified_prob(&mut rng) * 7.0) as usize;
            let params = random_params(m, &mut rng);
            for q in 1..=m as u32 {
                for k in -1..=(m as isize + 1) {
                    assert!(soi_bvar_residual(&params, k, q).unwrap() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn cubic_margin_fair_binomial_value() {
        // C1(1) for the fair two-factor sum: 0.5^2*0.25 - 2*0.25^2*0.25 + 0
        let m = cubic_margins(&[0.5, 0.5]).unwrap();
        assert!((m.c1[1] - 0.03125).abs() < 1e-16);
        assert!(m.min() >= 0.0);
    }

    #[test]
    fn single_factor_margins_nonnegative() {
        for &p in &[0.0, 0.2, 0.5, 0.9, 1.0] {
            let m = cubic_margins(&[p]).unwrap();
            assert!(m.min() >= 0.0, "p={p}");
        }
    }

    #[test]
    fn duality_maps_c1_to_c1bar() {
        let params = [0.15, 0.6, 0.85, 0.4];
        let flipped: Vec<f64> = params.iter().map(|p| 1.0 - p).collect();
        let m = cubic_margins(&params).unwrap();
        let mf = cubic_margins(&flipped).unwrap();
        let n = params.len() as isize;
        // C1 of the flipped system at k equals C1bar of the original at m-k.
        let g = poisson_binomial(&params);
        let gf = poisson_binomial(&flipped);
        for k in k_range(params.len()) {
            let mirrored = c1bar(&g, n - k);
            assert!((c1(&gf, k) - mirrored).abs() < 1e-14);
        }
        // margins of the double flip reproduce the original
        let back = cubic_margins(&flipped.iter().map(|p| 1.0 - p).collect::<Vec<_>>()).unwrap();
        for (a, b) in m.c1.iter().zip(&back.c1) {
            assert!((a - b).abs() < 1e-14);
        }
        let _ = (m, mf);
    }

    #[test]
    fn factorizations_hold_on_binomial() {
        let rep = corollary_factorizations(&[0.3, 0.3, 0.3]).unwrap();
        assert!(rep.max_residual() < 1e-12);
        // zero-padding rim holds as 0 = 0
        assert_eq!(*rep.c2.last().unwrap(), 0.0);
    }

    #[test]
    fn induction_reassembles_fair_binomial() {
        let ind = induction_coefficients(&[0.5], 0.5).unwrap();
        assert!(ind.max_residual() < 1e-16);
        assert!(ind.min_coefficient() >= 0.0);
        // degenerate new factor reduces to the shifted / unshifted cubic
        for &p in &[0.0, 1.0] {
            let ind = induction_coefficients(&[0.3, 0.7], p).unwrap();
            assert!(ind.max_residual() < 1e-16, "p={p}");
        }
    }

    #[test]
    fn pn_equiv_on_fair_binomial() {
        let m = pn_equiv_margins(&[0.5, 0.5]).unwrap();
        assert!(m.iter().all(|&x| x >= -1e-12));
    }

    #[test]
    fn small_campaign_passes_and_reproduces() {
        let a = verify_campaign(6, 200, 42);
        let b = verify_campaign(6, 200, 42);
        assert!(a.all_pass(), "worst C1 {:?}", a.worst_c1);
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }
}
