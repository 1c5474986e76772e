//! Python bindings: the main mass-function operations, the condition-ladder
//! summary for affine Bernoulli interpolations, the action minimiser, and
//! the randomized inequality campaigns.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dotk_core::benamou_brenier as bb;
use dotk_core::distributions::{self, BernoulliSystem, Pmf};
use dotk_core::shepp_olkin::{self, AnalyzeOptions, SheppOlkinInstance};
use dotk_core::{appendix, couplings};

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn pmf(masses: Vec<f64>) -> PyResult<Pmf> {
    Pmf::new(masses).map_err(err)
}

fn system(p_start: Vec<f64>, p_end: Vec<f64>) -> PyResult<BernoulliSystem> {
    BernoulliSystem::new(p_start, p_end).map_err(err)
}

/// Mass function of the Bernoulli sum with parameters `p_i(t)`.
#[pyfunction]
fn bernoulli_sum_pmf(p_start: Vec<f64>, p_end: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
    let sys = system(p_start, p_end)?;
    Ok(distributions::bernoulli_sum_pmf(&sys, t)
        .map_err(err)?
        .masses()
        .to_vec())
}

/// Bernoulli-sum mass function omitting the zero-based factor indices.
#[pyfunction]
fn leave_out_pmf(
    p_start: Vec<f64>,
    p_end: Vec<f64>,
    t: f64,
    excluded: Vec<usize>,
) -> PyResult<Vec<f64>> {
    let sys = system(p_start, p_end)?;
    Ok(distributions::leave_out_pmf(&sys, t, &excluded)
        .map_err(err)?
        .masses()
        .to_vec())
}

/// Shannon entropy in nats.
#[pyfunction]
fn entropy(masses: Vec<f64>) -> PyResult<f64> {
    Ok(pmf(masses)?.entropy())
}

/// `(d, e)` log-concavity margin vectors.
#[pyfunction]
fn log_concavity_margins(masses: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let m = distributions::log_concavity_margins(&pmf(masses)?);
    Ok((m.d, m.e))
}

/// Ultra-log-concavity margins of order `n`.
#[pyfunction]
fn ulc_margins(masses: Vec<f64>, n: usize) -> PyResult<Vec<f64>> {
    distributions::ulc_margins(&pmf(masses)?, n).map_err(err)
}

/// Thinned mass function: each unit kept independently with probability `t`.
#[pyfunction]
fn thin(masses: Vec<f64>, t: f64) -> PyResult<Vec<f64>> {
    Ok(couplings::thin(&pmf(masses)?, t)
        .map_err(err)?
        .masses()
        .to_vec())
}

/// One-dimensional W1 distance.
#[pyfunction]
fn w1_distance(f0: Vec<f64>, f1: Vec<f64>) -> PyResult<f64> {
    bb::w1_distance(&pmf(f0)?, &pmf(f1)?).map_err(err)
}

/// Mean-displacement lower bound on the dynamic distance.
#[pyfunction]
fn vn_lower_bound(f0: Vec<f64>, f1: Vec<f64>) -> PyResult<f64> {
    Ok(bb::vn_lower_bound(&pmf(f0)?, &pmf(f1)?))
}

/// Minimise the path action between two mass functions.
#[pyfunction]
#[pyo3(signature = (f0, f1, grid=51, max_iters=2000, seed=0))]
fn minimize_action(
    py: Python<'_>,
    f0: Vec<f64>,
    f1: Vec<f64>,
    grid: usize,
    max_iters: usize,
    seed: u64,
) -> PyResult<Py<PyDict>> {
    let config = bb::OptimizerConfig {
        grid,
        max_iters,
        seed,
        ..bb::OptimizerConfig::default()
    };
    let res = bb::minimize_action(&pmf(f0)?, &pmf(f1)?, config).map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("vn_estimate", res.vn_estimate)?;
    out.set_item("lower_bound", res.lower_bound)?;
    out.set_item("action_sq", res.action_sq)?;
    out.set_item("beta_cv", res.beta_cv)?;
    out.set_item("iterations", res.iterations)?;
    out.set_item("converged", res.converged)?;
    Ok(out.into())
}

/// Condition-ladder summary along the affine interpolation of a system.
#[pyfunction]
#[pyo3(signature = (p_start, p_end, grid=201, with_pairs=true))]
fn shepp_olkin_report(
    py: Python<'_>,
    p_start: Vec<f64>,
    p_end: Vec<f64>,
    grid: usize,
    with_pairs: bool,
) -> PyResult<Py<PyDict>> {
    let inst = SheppOlkinInstance::new(system(p_start, p_end)?).map_err(err)?;
    let rep = shepp_olkin::analyze(
        &inst,
        AnalyzeOptions {
            grid,
            with_pair_certificate: with_pairs && inst.is_monotone(),
        },
    )
    .map_err(err)?;
    let out = PyDict::new(py);
    out.set_item("v", rep.v)?;
    out.set_item("monotone", rep.monotone)?;
    out.set_item("trivially_constant", rep.trivially_constant)?;
    out.set_item("min_kmon", rep.minima.kmon)?;
    out.set_item("min_tmon", rep.minima.tmon)?;
    out.set_item("min_glc", rep.minima.glc)?;
    out.set_item("min_delta", rep.minima.delta)?;
    out.set_item("max_h2", rep.minima.max_h2)?;
    out.set_item("h2_agreement", rep.h2_agreement)?;
    out.set_item("concave", rep.verdicts.concave)?;
    out.set_item(
        "pair_certificate",
        rep.pair.as_ref().map(|p| p.verdict),
    )?;
    out.set_item("entropy", rep.entropy)?;
    out.set_item("grid_times", rep.grid_times)?;
    Ok(out.into())
}

/// Search for a monotone system whose mixing coefficients decrease in time.
#[pyfunction]
#[pyo3(signature = (n, trials=10_000, seed=1, grid=51))]
fn tmon_search(
    py: Python<'_>,
    n: usize,
    trials: u64,
    seed: u64,
    grid: usize,
) -> PyResult<Option<Py<PyDict>>> {
    match shepp_olkin::tmon_search(n, trials, seed, grid).map_err(err)? {
        None => Ok(None),
        Some(w) => {
            let out = PyDict::new(py);
            out.set_item("p_start", w.p_start)?;
            out.set_item("p_end", w.p_end)?;
            out.set_item("trial_index", w.trial_index)?;
            out.set_item("min_dalpha", w.min_dalpha)?;
            out.set_item("at_t", w.at_t)?;
            out.set_item("at_k", w.at_k)?;
            out.set_item("recheck_min_dalpha", w.recheck_min_dalpha)?;
            out.set_item("max_h2", w.max_h2)?;
            Ok(Some(out.into()))
        }
    }
}

/// Randomized verification of the cubic inequalities.
#[pyfunction]
#[pyo3(signature = (m_max=10, trials=10_000, seed=1))]
fn verify_appendix(py: Python<'_>, m_max: usize, trials: usize, seed: u64) -> PyResult<Py<PyDict>> {
    let summary = appendix::verify_campaign(m_max, trials, seed);
    let out = PyDict::new(py);
    out.set_item("all_pass", summary.all_pass())?;
    out.set_item("violations", summary.violations)?;
    out.set_item("worst_c1", summary.worst_c1.value)?;
    out.set_item("worst_d1", summary.worst_d1.value)?;
    out.set_item("worst_pn_equiv", summary.worst_pn_equiv.value)?;
    out.set_item("max_soi_bvar_residual", summary.max_soi_bvar_residual)?;
    out.set_item(
        "max_factorization_residual",
        summary.max_factorization_residual,
    )?;
    out.set_item("max_induction_residual", summary.max_induction_residual)?;
    Ok(out.into())
}

/// Two-point Markov-chain transport distance.
#[pyfunction]
fn maas_two_point_distance(p: f64, a: f64, b: f64) -> PyResult<f64> {
    bb::maas_two_point_distance(p, a, b).map_err(err)
}

/// `(closed-form squared length, numeric squared length, max curve gap)`
/// of the two-point reciprocal-mass action.
#[pyfunction]
fn alt_metric_two_point(p: f64, q: f64) -> PyResult<(f64, f64, f64)> {
    let res = bb::alt_metric_two_point(p, q).map_err(err)?;
    Ok((
        res.squared_length,
        res.numeric_squared_length,
        res.max_theta_gap,
    ))
}

/// `(entropy, second derivative)` of the Gaussian surrogate at `t`.
#[pyfunction]
fn gaussian_proxy_entropy(p_start: Vec<f64>, p_end: Vec<f64>, t: f64) -> PyResult<(f64, f64)> {
    shepp_olkin::gaussian_proxy_entropy(&system(p_start, p_end)?, t).map_err(err)
}

/// `(masses, mixing coefficients)` of the shift-by-`m` path at time `t`.
#[pyfunction]
fn translation_at(masses: Vec<f64>, m: usize, t: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let (f, alpha) = couplings::translation_at(&pmf(masses)?, m, t).map_err(err)?;
    Ok((f.masses().to_vec(), alpha.values))
}

#[pymodule]
fn dotk_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bernoulli_sum_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(leave_out_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(entropy, m)?)?;
    m.add_function(wrap_pyfunction!(log_concavity_margins, m)?)?;
    m.add_function(wrap_pyfunction!(ulc_margins, m)?)?;
    m.add_function(wrap_pyfunction!(thin, m)?)?;
    m.add_function(wrap_pyfunction!(w1_distance, m)?)?;
    m.add_function(wrap_pyfunction!(vn_lower_bound, m)?)?;
    m.add_function(wrap_pyfunction!(minimize_action, m)?)?;
    m.add_function(wrap_pyfunction!(shepp_olkin_report, m)?)?;
    m.add_function(wrap_pyfunction!(tmon_search, m)?)?;
    m.add_function(wrap_pyfunction!(verify_appendix, m)?)?;
    m.add_function(wrap_pyfunction!(maas_two_point_distance, m)?)?;
    m.add_function(wrap_pyfunction!(alt_metric_two_point, m)?)?;
    m.add_function(wrap_pyfunction!(gaussian_proxy_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(translation_at, m)?)?;
    Ok(())
}
