//! Command implementations: input parsing, verdict assembly, exit codes.

use std::error::Error;
use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use serde_json::{json, Value};

use dotk_core::benamou_brenier::{minimize_action, w1_distance, OptimizerConfig};
use dotk_core::couplings::{thin, translation_path};
use dotk_core::distributions::{BernoulliSystem, Pmf};
use dotk_core::shepp_olkin::{analyze, tmon_search, AnalyzeOptions, SheppOlkinInstance};
use dotk_core::transport::{entropy_second_derivative_fd_with_step, glc_margins, trimmed_range};

use crate::report::{csv_sibling, emit_json, experiment_report, write_csv, Metadata};
use crate::{Cli, Command, Format};

type AnyError = Box<dyn Error>;

/// Margin tolerances after the uniform scale. Defaults match the library's
/// verdict thresholds.
struct Tols {
    margin: f64,
    delta: f64,
    h2: f64,
}

impl Tols {
    fn scaled(scale: f64) -> Self {
        Self {
            margin: 1e-11 * scale,
            delta: 1e-10 * scale,
            h2: 1e-8 * scale,
        }
    }
}

fn parse_masses(inline: &Option<String>, file: &Option<PathBuf>, what: &str) -> Result<Pmf, AnyError> {
    let masses: Vec<f64> = match (inline, file) {
        (Some(s), _) => parse_floats(s)?,
        (None, Some(path)) => serde_json::from_str(&fs::read_to_string(path)?)?,
        (None, None) => return Err(format!("{what}: provide masses inline or via a file").into()),
    };
    Ok(Pmf::new(masses)?)
}

fn parse_floats(s: &str) -> Result<Vec<f64>, AnyError> {
    s.split(',')
        .map(|x| x.trim().parse::<f64>().map_err(Into::into))
        .collect()
}

fn load_system(
    p_start: &Option<String>,
    p_end: &Option<String>,
    params_file: &Option<PathBuf>,
) -> Result<BernoulliSystem, AnyError> {
    if let Some(path) = params_file {
        #[derive(serde::Deserialize)]
        struct Params {
            p_start: Vec<f64>,
            p_end: Vec<f64>,
        }
        let params: Params = serde_json::from_str(&fs::read_to_string(path)?)?;
        return Ok(BernoulliSystem::new(params.p_start, params.p_end)?);
    }
    match (p_start, p_end) {
        (Some(a), Some(b)) => Ok(BernoulliSystem::new(parse_floats(a)?, parse_floats(b)?)?),
        _ => Err("provide --p-start/--p-end or --params-file".into()),
    }
}

fn curves_require_output(format: Format, output: &Option<PathBuf>) -> Result<(), AnyError> {
    if format == Format::Csv && output.is_none() {
        return Err("--format csv needs --output to place the curve files".into());
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<ExitCode, AnyError> {
    let tols = Tols::scaled(cli.tolerance);
    match &cli.command {
        Command::SheppOlkin {
            p_start,
            p_end,
            params_file,
            allow_nonmonotone,
            max_n,
            skip_pairs,
        } => cmd_shepp_olkin(
            &cli,
            &tols,
            load_system(p_start, p_end, params_file)?,
            *allow_nonmonotone,
            *max_n,
            *skip_pairs,
        ),
        Command::TmonSearch { n } => cmd_tmon_search(&cli, &tols, *n),
        Command::Geodesic {
            f0,
            f0_file,
            f1,
            f1_file,
            max_iters,
            step,
            penalty,
        } => cmd_geodesic(
            &cli,
            parse_masses(f0, f0_file, "start distribution")?,
            parse_masses(f1, f1_file, "end distribution")?,
            *max_iters,
            *step,
            *penalty,
        ),
        Command::VerifyAppendix { m_max } => cmd_verify_appendix(&cli, *m_max),
        Command::Thin { pmf, pmf_file, t } => {
            cmd_thin(&cli, parse_masses(pmf, pmf_file, "mass function")?, *t)
        }
        Command::Translate {
            pmf,
            pmf_file,
            shift,
        } => cmd_translate(&cli, &tols, parse_masses(pmf, pmf_file, "mass function")?, *shift),
    }
}

fn cmd_shepp_olkin(
    cli: &Cli,
    tols: &Tols,
    system: BernoulliSystem,
    allow_nonmonotone: bool,
    max_n: usize,
    skip_pairs: bool,
) -> Result<ExitCode, AnyError> {
    if system.len() > max_n {
        return Err(format!(
            "{} factors exceed the cap of {max_n}; raise --max-n if the precision loss is acceptable",
            system.len()
        )
        .into());
    }
    if !system.is_monotone() && !allow_nonmonotone {
        eprintln!(
            "error: some parameter decreases; the concavity certificate only covers monotone \
             systems. Pass --allow-nonmonotone to evaluate the margins anyway."
        );
        return Ok(ExitCode::from(2));
    }
    curves_require_output(cli.format, &cli.output)?;
    let grid = cli.grid.unwrap_or(201);
    let inst = SheppOlkinInstance::new(system.clone())?;
    let rep = analyze(
        &inst,
        AnalyzeOptions {
            grid,
            with_pair_certificate: !skip_pairs && inst.is_monotone(),
        },
    )?;

    let kmon = rep.minima.kmon >= -tols.margin;
    let tmon = rep.minima.tmon >= -tols.delta;
    let glc = rep.minima.glc >= -tols.margin;
    let delta = rep.minima.delta >= -tols.delta;
    let concave = rep.minima.max_h2 <= tols.h2;
    let pair_ok = rep.pair.as_ref().map(|p| p.verdict);
    let all_pass = kmon && glc && delta && concave && rep.h2_agreement && pair_ok.unwrap_or(true);

    let mut metadata = Metadata::new("shepp-olkin", cli.tolerance);
    metadata.grid = Some(grid);
    metadata.params = json!({
        "p_start": system.p_start(),
        "p_end": system.p_end(),
        "allow_nonmonotone": allow_nonmonotone,
    });
    let verdicts = json!({
        "kmon": kmon,
        "tmon": tmon,
        "glc": glc,
        "delta": delta,
        "concave": concave,
        "h2_agreement": rep.h2_agreement,
        "pair_certificate": pair_ok,
        "all_pass": all_pass,
    });
    let report = experiment_report(&metadata, &rep, verdicts);
    emit_json(&report, cli.output.as_deref())?;
    if cli.format == Format::Csv {
        let output = cli.output.as_ref().expect("checked above");
        write_csv(
            &csv_sibling(output, "entropy"),
            ("t", "value"),
            rep.grid_times.iter().copied().zip(rep.entropy.iter().copied()),
        )?;
        write_csv(
            &csv_sibling(output, "h2"),
            ("t", "value"),
            rep.times.iter().copied().zip(rep.h2_transport.iter().copied()),
        )?;
    }
    // failing margins on a monotone instance would contradict the certificate
    if inst.is_monotone() && !all_pass {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_tmon_search(cli: &Cli, tols: &Tols, n: usize) -> Result<ExitCode, AnyError> {
    let trials = cli.trials.unwrap_or(10_000) as u64;
    let seed = cli.seed.unwrap_or(1);
    let grid = cli.grid.unwrap_or(51);
    if cli.format == Format::Csv {
        return Err("tmon-search has no curve output; use --format json".into());
    }
    let witness = tmon_search(n, trials, seed, grid)?;
    let mut metadata = Metadata::new("tmon-search", cli.tolerance);
    metadata.grid = Some(grid);
    metadata.seed = Some(seed);
    metadata.trials = Some(trials as usize);
    metadata.params = json!({ "n": n });
    let concave_on_witness = witness.as_ref().map(|w| w.max_h2 <= tols.h2);
    let verdicts = json!({
        "found": witness.is_some(),
        "concave_on_witness": concave_on_witness,
    });
    let report = experiment_report(&metadata, &witness, verdicts);
    emit_json(&report, cli.output.as_deref())?;
    if concave_on_witness == Some(false) {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_geodesic(
    cli: &Cli,
    f0: Pmf,
    f1: Pmf,
    max_iters: usize,
    step: f64,
    penalty: f64,
) -> Result<ExitCode, AnyError> {
    curves_require_output(cli.format, &cli.output)?;
    let config = OptimizerConfig {
        grid: cli.grid.unwrap_or(51),
        max_iters,
        step,
        penalty,
        seed: cli.seed.unwrap_or(0),
    };
    let res = minimize_action(&f0, &f1, config)?;
    let w1 = w1_distance(&f0, &f1)?;
    // the quantile coupling that seeded the optimizer, when the endpoints
    // are stochastically ordered
    let coupling = dotk_core::couplings::monotone_coupling(&f0, &f1)
        .or_else(|_| dotk_core::couplings::monotone_coupling(&f1, &f0))
        .ok();
    let mut metadata = Metadata::new("geodesic", cli.tolerance);
    metadata.grid = Some(config.grid);
    metadata.seed = Some(config.seed);
    metadata.params = json!({
        "f0": f0.masses(),
        "f1": f1.masses(),
        "max_iters": max_iters,
        "step": step,
        "penalty": penalty,
    });
    let payload = json!({
        "vn_estimate": res.vn_estimate,
        "lower_bound": res.lower_bound,
        "action_sq": res.action_sq,
        "w1": w1,
        "beta": res.beta,
        "beta_variance": res.beta_variance,
        "beta_cv": res.beta_cv,
        "iterations": res.iterations,
        "converged": res.converged,
    });
    let bound_ok = res.vn_estimate >= res.lower_bound - 1e-9;
    let verdicts = json!({
        "lower_bound_respected": bound_ok,
        "converged": res.converged,
    });
    let report = experiment_report(&metadata, &payload, verdicts);
    emit_json(&report, cli.output.as_deref())?;
    if cli.format == Format::Csv {
        let output = cli.output.as_ref().expect("checked above");
        let times = res.best_path.times();
        let mids = (0..res.beta.len()).map(|i| 0.5 * (times[i] + times[i + 1]));
        write_csv(
            &csv_sibling(output, "beta"),
            ("t", "value"),
            mids.zip(res.beta.iter().copied()),
        )?;
    }
    if !bound_ok {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify_appendix(cli: &Cli, m_max: usize) -> Result<ExitCode, AnyError> {
    if cli.format == Format::Csv {
        return Err("verify-appendix has no curve output; use --format json".into());
    }
    let trials = cli.trials.unwrap_or(10_000);
    let seed = cli.seed.unwrap_or(1);
    let summary = dotk_core::appendix::verify_campaign(m_max, trials, seed);
    let mut metadata = Metadata::new("verify-appendix", cli.tolerance);
    metadata.seed = Some(seed);
    metadata.trials = Some(trials);
    metadata.params = json!({ "m_max": m_max });
    let verdicts = json!({
        "all_pass": summary.all_pass(),
        "violations": summary.violations,
    });
    let all_pass = summary.all_pass();
    let report = experiment_report(&metadata, &summary, verdicts);
    emit_json(&report, cli.output.as_deref())?;
    if !all_pass {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_thin(cli: &Cli, f: Pmf, t: f64) -> Result<ExitCode, AnyError> {
    let thinned = thin(&f, t)?;
    match cli.format {
        Format::Json => {
            let mut metadata = Metadata::new("thin", cli.tolerance);
            metadata.params = json!({ "pmf": f.masses(), "t": t });
            let payload = json!({ "masses": thinned.masses() });
            let report = experiment_report(&metadata, &payload, Value::Null);
            emit_json(&report, cli.output.as_deref())?;
        }
        Format::Csv => {
            let rows = thinned
                .masses()
                .iter()
                .enumerate()
                .map(|(k, &m)| (k as f64, m));
            match &cli.output {
                Some(path) => write_csv(path, ("k", "value"), rows)?,
                None => {
                    println!("k,value");
                    for (k, m) in rows {
                        println!("{k},{m:.16e}");
                    }
                }
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_translate(cli: &Cli, tols: &Tols, f: Pmf, shift: usize) -> Result<ExitCode, AnyError> {
    curves_require_output(cli.format, &cli.output)?;
    let grid = cli.grid.unwrap_or(201);
    let path = translation_path(&f, shift)?;
    if !path.is_log_concave() {
        eprintln!(
            "warning: the base mass function is not log-concave; spatial monotonicity and \
             concavity of entropy are not guaranteed"
        );
    }
    let grid_path = path.to_path(grid)?;
    let mut entropy_curve = Vec::with_capacity(grid_path.len());
    for i in 0..grid_path.len() {
        entropy_curve.push(grid_path.pmf(i).entropy());
    }
    let mut times = Vec::new();
    let mut h2_curve = Vec::new();
    let mut min_kmon = f64::INFINITY;
    let mut max_abs_glc = 0.0f64;
    let mut max_h2 = f64::NEG_INFINITY;
    if let Some((lo, hi)) = trimmed_range(&grid_path) {
        for i in lo..=hi {
            let t = grid_path.times()[i];
            let fp = path.pmf_at(t)?;
            let a = path.alpha_at(t)?;
            for (k, &m) in glc_margins(&fp, &a.values).iter().enumerate() {
                if a.valid[k] && a.valid[k + 1] && a.valid[k + 2] {
                    max_abs_glc = max_abs_glc.max(m.abs());
                }
            }
            for k in 0..path.max_index() {
                if a.valid[k] && a.valid[k + 1] {
                    min_kmon = min_kmon.min(a.values[k + 1] - a.values[k]);
                }
            }
            let h2 = entropy_second_derivative_fd_with_step(&grid_path, t, 4e-3)?;
            max_h2 = max_h2.max(h2);
            times.push(t);
            h2_curve.push(h2);
        }
    }

    let concave = max_h2 <= tols.h2;
    let kmon = min_kmon >= -tols.margin;
    let glc_equality = max_abs_glc <= 1e-12 * cli.tolerance;
    let mut metadata = Metadata::new("translate", cli.tolerance);
    metadata.grid = Some(grid);
    metadata.params = json!({ "pmf": f.masses(), "shift": shift });
    let payload = json!({
        "log_concave": path.is_log_concave(),
        "grid_times": grid_path.times(),
        "entropy": entropy_curve,
        "times": times,
        "h2_fd": h2_curve,
        "min_kmon": min_kmon,
        "max_abs_glc": max_abs_glc,
        "max_h2": max_h2,
    });
    let verdicts = json!({
        "glc_equality": glc_equality,
        "kmon": kmon,
        "concave": concave,
        "all_pass": glc_equality && kmon && concave,
    });
    let report = experiment_report(&metadata, &payload, verdicts);
    emit_json(&report, cli.output.as_deref())?;
    if cli.format == Format::Csv {
        let output = cli.output.as_ref().expect("checked above");
        write_csv(
            &csv_sibling(output, "entropy"),
            ("t", "value"),
            grid_path
                .times()
                .iter()
                .copied()
                .zip(entropy_curve.iter().copied()),
        )?;
        write_csv(
            &csv_sibling(output, "h2"),
            ("t", "value"),
            times.iter().copied().zip(h2_curve.iter().copied()),
        )?;
    }
    // the certificate covers log-concave bases; a violation there is a bug
    if path.is_log_concave() && !(glc_equality && kmon && concave) {
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
