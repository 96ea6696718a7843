use rayon::prelude::*;
use serde::Serialize;
use std::path::{Path, PathBuf};
use std::time::Instant;

use metastab::dynamics::AngularFlow;
use metastab::initgen::{equispaced_centers, validate_well_prepared};
use metastab::meanfield::{escape_claim_check, integrate_meanfield, mf_bounds, variance_check};
use metastab::metastability::{cap_statistics, metastability_report};
use metastab::renorm::{phi_infinity, run_staircase, StaircaseSpec};
use metastab::verify;
use metastab::{integrate, integrate_angular, AngularConfiguration, Error, IntegratorSpec, Model, Scheme, Trajectory};

use crate::config::{build_initial, certificate, ExperimentConfig, InitSpec, Initial, SCHEMA_VERSION};
use crate::error::{invalid, CliError, CliResult};
use crate::output::{write_csv, write_csv_rows, write_json, Manifest, RunEntry};

/// Two-dimensional SA run from five uniform points at `beta = 4`, Euler step 0.1.
pub fn default_simulate() -> ExperimentConfig {
    ExperimentConfig {
        schema: SCHEMA_VERSION,
        model: metastab::ModelKind::Sa,
        beta: 4.0,
        integrator: Some(IntegratorSpec::new(Scheme::EulerProject, 0.1, 50.0)),
        init: InitSpec::Uniform { dim: 2, n: 5 },
        seeds: vec![0],
        caps: None,
    }
}

pub fn default_metastability() -> ExperimentConfig {
    ExperimentConfig {
        schema: SCHEMA_VERSION,
        model: metastab::ModelKind::Usa,
        beta: 12.0,
        integrator: None,
        init: InitSpec::Separated { dim: 2, n: 6, k: 2, eps: 0.02, centers: None },
        seeds: (0..20).collect(),
        caps: None,
    }
}

pub fn default_meanfield() -> ExperimentConfig {
    ExperimentConfig {
        schema: SCHEMA_VERSION,
        model: metastab::ModelKind::Sa,
        beta: 60.0,
        integrator: Some(IntegratorSpec::new(Scheme::Rk4Project, 0.02, 60.0).with_cadence(10)),
        init: InitSpec::SeparatedMeasure { dim: 2, k: 2, eps: 0.01, atoms_per_cap: 100, centers: None },
        seeds: vec![0],
        caps: None,
    }
}

/// Builds every initial state up front so that refused input writes nothing.
fn initials(cfg: &ExperimentConfig, seeds: &[u64]) -> CliResult<Vec<(u64, Initial)>> {
    seeds.iter().map(|&s| Ok((s, build_initial(cfg, s)?))).collect()
}

fn abort_message(e: &CliError) -> Option<String> {
    match e {
        CliError::Core(Error::NonFinite { .. } | Error::Numeric(_)) => Some(e.to_string()),
        _ => None,
    }
}

/// Aborted runs get a manifest entry; any other error stops the command.
fn settle<T>(seed: u64, r: CliResult<T>) -> CliResult<Result<T, RunEntry>> {
    match r {
        Ok(v) => Ok(Ok(v)),
        Err(e) => match abort_message(&e) {
            Some(msg) => Ok(Err(RunEntry { seed, outputs: vec![], pass: None, abort: Some(msg) })),
            None => Err(e),
        },
    }
}

fn finish(out: &Path, command: &str, cfg_hash: String, runs: Vec<RunEntry>, started: Instant) -> CliResult<i32> {
    let aborted = runs.iter().any(|r| r.abort.is_some());
    let manifest = Manifest::new(command, cfg_hash, runs, started);
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(if aborted {
        3
    } else if manifest.pass == Some(false) {
        1
    } else {
        0
    })
}

fn trace_rows(traj: &Trajectory, caps: Option<&metastab::CapFamily>) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header: Vec<String> =
        ["t", "energy", "energy_normalized", "grad_norm", "min_pair_dist"].map(String::from).to_vec();
    if let Some(c) = caps {
        for q in 0..c.k() {
            header.extend([format!("eta_{q}"), format!("var_{q}"), format!("diam_sq_{q}")]);
        }
    }
    let rows = traj
        .records
        .iter()
        .map(|r| {
            let mut row: Vec<String> = [r.t, r.energy, r.energy_normalized, r.grad_norm, r.min_pair_dist]
                .iter()
                .map(|v| v.to_string())
                .collect();
            if let Some(c) = caps {
                for s in cap_statistics(&r.config, c, traj.model.beta) {
                    match s {
                        Some(s) => row.extend([s.eta, s.var, s.diam_sq].map(|v| v.to_string())),
                        None => row.extend([String::new(), String::new(), String::new()]),
                    }
                }
            }
            row
        })
        .collect();
    (header, rows)
}

pub fn simulate(cfg: &ExperimentConfig, seeds: &[u64], out: &Path) -> CliResult<i32> {
    let started = Instant::now();
    let spec = cfg.integrator.unwrap_or(IntegratorSpec::new(Scheme::EulerProject, 0.1, 50.0));
    let model = Model { kind: cfg.model, beta: cfg.beta };
    let inits = initials(cfg, seeds)?;
    let caps: Vec<Option<metastab::CapFamily>> = inits
        .iter()
        .map(|(_, i)| match (&i.cert, cfg.caps.as_ref()) {
            (Some(c), _) => Some(c.caps.clone()),
            (None, Some(p)) => match (&p.centers, p.eps) {
                (Some(c), Some(e)) => metastab::CapFamily::new(c.clone(), e).ok(),
                _ => None,
            },
            _ => None,
        })
        .collect();
    let results: Vec<_> = inits
        .par_iter()
        .zip(&caps)
        .map(|((seed, init), caps)| {
            let r = integrate(&model, &init.config, &spec, &mut []).map_err(CliError::from).and_then(|traj| {
                let path = out.join(format!("trace_seed{seed}.csv"));
                let (header, rows) = trace_rows(&traj, caps.as_ref());
                write_csv_rows(&path, &header, &rows)?;
                Ok(path)
            });
            settle(*seed, r).map(|r| r.map(|p| RunEntry { seed: *seed, outputs: vec![p], pass: None, abort: None }))
        })
        .collect::<CliResult<Vec<_>>>()?;
    let runs = results.into_iter().map(|r| r.unwrap_or_else(|e| e)).collect();
    finish(out, "simulate", cfg.hash(), runs, started)
}

#[derive(Serialize)]
struct SeedLine {
    seed: u64,
    pass: bool,
    t_collapse: Option<f64>,
    t1_upper: f64,
    t_escape: Option<f64>,
    t2_lower: f64,
    horizon: f64,
}

pub fn metastability(cfg: &ExperimentConfig, seeds: &[u64], out: &Path) -> CliResult<i32> {
    let started = Instant::now();
    let inits = initials(cfg, seeds)?;
    let mut jobs = Vec::new();
    for (seed, init) in inits {
        let cert = certificate(cfg, &init)
            .map_err(|e| CliError::Invalid(format!("seed {seed}: configuration refused: {e}")))?;
        let window = cert.window();
        let lambda = cfg.caps.as_ref().and_then(|p| p.lambda).unwrap_or_else(|| window.mid());
        if window.empty || !window.contains(lambda) {
            return invalid(format!(
                "seed {seed}: lambda = {lambda} outside the admissible window ({}, {})",
                window.lo, window.hi
            ));
        }
        let spec = cfg.integrator.unwrap_or_else(|| {
            let dt = 0.01 / cfg.beta;
            let horizon = 1.05 * cert.times(lambda).t1_upper;
            IntegratorSpec::new(Scheme::Rk4Project, dt, horizon).with_cadence(((horizon / dt) as usize / 4000).max(1))
        });
        spec.validate()?;
        jobs.push((seed, init.config, cert, lambda, spec));
    }
    let model = Model { kind: cfg.model, beta: cfg.beta };
    let results = jobs
        .par_iter()
        .map(|(seed, x0, cert, lambda, spec)| {
            let r = integrate(&model, x0, spec, &mut []).map_err(CliError::from).and_then(|traj| {
                let report = metastability_report(&traj, cert, *lambda);
                let path = out.join(format!("report_seed{seed}.json"));
                write_json(&path, &report)?;
                Ok((report, path))
            });
            settle(*seed, r)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let mut runs = Vec::new();
    let mut lines = Vec::new();
    for ((seed, ..), r) in jobs.iter().zip(results) {
        match r {
            Ok((rep, path)) => {
                let pass = rep.pass();
                let escape = match rep.t_escape {
                    Some(t) => format!("escape at {t:.4} (T2 >= {:.4e})", rep.predicted.t2_lower),
                    None => format!("escape not observed >= {:.4}", rep.horizon),
                };
                let collapse = match rep.t_collapse {
                    Some(t) => format!("collapse at {t:.4} <= T1 = {:.4}", rep.predicted.t1_upper),
                    None => format!("collapse not observed (T1 = {:.4})", rep.predicted.t1_upper),
                };
                println!("seed {seed}: {} {collapse}; {escape}", if pass { "PASS" } else { "FAIL" });
                lines.push(SeedLine {
                    seed: *seed,
                    pass,
                    t_collapse: rep.t_collapse,
                    t1_upper: rep.predicted.t1_upper,
                    t_escape: rep.t_escape,
                    t2_lower: rep.predicted.t2_lower,
                    horizon: rep.horizon,
                });
                runs.push(RunEntry { seed: *seed, outputs: vec![path], pass: Some(pass), abort: None });
            }
            Err(entry) => {
                println!("seed {seed}: ABORT {}", entry.abort.as_deref().unwrap_or(""));
                runs.push(entry);
            }
        }
    }
    write_json(&out.join("summary.json"), &lines)?;
    finish(out, "metastability", cfg.hash(), runs, started)
}

#[derive(Serialize)]
struct PlateauRow {
    beta: f64,
    segment: usize,
    level: f64,
    target: f64,
    error: f64,
    low_confidence: bool,
}

#[derive(Serialize)]
struct ProfileRow {
    beta: f64,
    s: f64,
    energy_normalized: f64,
    n_active: usize,
    min_admissible_gap: f64,
}

#[derive(Serialize)]
struct StaircaseSummary {
    n: usize,
    c0: f64,
    betas: Vec<f64>,
    merges: Vec<usize>,
    max_errors: Vec<f64>,
    well_prepared: Vec<Option<String>>,
    merges_ok: bool,
    errors_decreasing: bool,
    pass: bool,
}

/// Output paths; `out` may name the profile CSV directly.
fn staircase_paths(out: &Path) -> [PathBuf; 4] {
    if out.extension().is_some_and(|e| e == "csv") {
        let stem = out.with_extension("");
        let side = |s: &str| PathBuf::from(format!("{}.{s}", stem.display()));
        [out.to_path_buf(), side("events.json"), side("plateaus.csv"), side("summary.json")]
    } else {
        ["profile.csv", "events.json", "plateaus.csv", "summary.json"].map(|f| out.join(f))
    }
}

pub fn staircase(n: usize, c0: f64, betas: &[f64], c: f64, strict: bool, out: &Path) -> CliResult<i32> {
    if betas.is_empty() || betas.iter().any(|b| !(*b > std::f64::consts::E)) {
        return invalid("need at least one beta, each above e");
    }
    let theta = metastab::initgen::gen_well_prepared(n, c0)?.theta;
    for &b in betas {
        if let Err(e) = validate_well_prepared(&theta, b, c) {
            if strict {
                return invalid(format!("beta = {b}: {e}"));
            }
            eprintln!("warning: beta = {b}: {e}; continuing");
        }
    }
    let runs = run_staircase(n, c0, betas, &StaircaseSpec::new(1.0))?;
    let [profile, events, plateaus, summary] = staircase_paths(out);
    write_csv(
        &profile,
        runs.iter().flat_map(|r| {
            r.profile.samples.iter().map(move |s| ProfileRow {
                beta: r.beta,
                s: s.s,
                energy_normalized: s.energy_normalized,
                n_active: s.n_active,
                min_admissible_gap: s.min_admissible_gap,
            })
        }),
    )?;
    let ev: Vec<_> = runs.iter().map(|r| (r.beta, &r.profile.events)).collect();
    write_json(&events, &ev)?;
    write_csv(
        &plateaus,
        runs.iter().flat_map(|r| {
            r.plateaus.levels.iter().enumerate().map(move |(i, &level)| PlateauRow {
                beta: r.beta,
                segment: i,
                level,
                target: phi_infinity(n, i),
                error: r.errors[i],
                low_confidence: r.plateaus.low_confidence[i],
            })
        }),
    )?;
    let mut order: Vec<usize> = (0..runs.len()).collect();
    order.sort_by(|&a, &b| runs[a].beta.total_cmp(&runs[b].beta));
    let merges_ok = runs.iter().all(|r| r.profile.events.len() == n - 1);
    let errors_decreasing = order.windows(2).all(|w| runs[w[1]].max_error < runs[w[0]].max_error);
    let s = StaircaseSummary {
        n,
        c0,
        betas: runs.iter().map(|r| r.beta).collect(),
        merges: runs.iter().map(|r| r.profile.events.len()).collect(),
        max_errors: runs.iter().map(|r| r.max_error).collect(),
        well_prepared: runs.iter().map(|r| r.well_prepared.clone().err()).collect(),
        merges_ok,
        errors_decreasing,
        pass: merges_ok && errors_decreasing,
    };
    for r in &runs {
        println!("beta {}: {} merges, max plateau error {:.4}", r.beta, r.profile.events.len(), r.max_error);
    }
    println!("{}", if s.pass { "PASS" } else { "FAIL" });
    write_json(&summary, &s)?;
    Ok(if s.pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct MeanFieldSummary {
    seed: u64,
    gamma: f64,
    alpha: f64,
    lambda: f64,
    log_pivot: f64,
    verified_up_to: f64,
    variance: metastab::meanfield::VarianceCheck,
    claim: metastab::meanfield::EscapeClaim,
    pass: bool,
}

pub fn meanfield(cfg: &ExperimentConfig, seeds: &[u64], out: &Path) -> CliResult<i32> {
    let started = Instant::now();
    if !matches!(cfg.init, InitSpec::SeparatedMeasure { .. }) {
        return invalid("meanfield needs a `separated-measure` initialization");
    }
    let spec = cfg.integrator.unwrap_or(IntegratorSpec::new(Scheme::Rk4Project, 0.02, 60.0).with_cadence(10));
    let inits = initials(cfg, seeds)?;
    let results = inits
        .par_iter()
        .map(|(seed, init)| {
            let cert = init.measure_cert.as_ref().expect("measure initialization carries a certificate");
            let lambda = cfg.caps.as_ref().and_then(|p| p.lambda).unwrap_or(cert.gamma / 2.0);
            let r = integrate_meanfield(&init.config, cfg.beta, &spec, Some(cert)).map_err(CliError::from).and_then(
                |traj| {
                    let k = cert.k();
                    let mut header = vec!["t".to_string()];
                    for q in 0..k {
                        header.extend([format!("eta_{q}"), format!("V_{q}"), format!("support_ok_{q}")]);
                    }
                    let rows: Vec<Vec<String>> = traj
                        .records
                        .iter()
                        .map(|r| {
                            let mut row = vec![r.t.to_string()];
                            for c in &r.caps {
                                row.extend([c.eta.to_string(), c.v.to_string(), c.contained.to_string()]);
                            }
                            row
                        })
                        .collect();
                    let trace = out.join(format!("meanfield_seed{seed}.csv"));
                    write_csv_rows(&trace, &header, &rows)?;
                    let variance = variance_check(&traj, lambda);
                    let claim = escape_claim_check(&traj, cert, lambda)?;
                    let pass = variance.contained_until_horizon && variance.persists && variance.t_first.is_some();
                    let summary = MeanFieldSummary {
                        seed: *seed,
                        gamma: cert.gamma,
                        alpha: cert.alpha,
                        lambda,
                        log_pivot: mf_bounds(cert).log_pivot,
                        verified_up_to: spec.t_max,
                        variance,
                        claim,
                        pass,
                    };
                    let path = out.join(format!("meanfield_seed{seed}.json"));
                    write_json(&path, &summary)?;
                    println!(
                        "seed {seed}: {} contained up to {} (verified horizon), V_q below e^(-lambda beta) from {:?}",
                        if pass { "PASS" } else { "FAIL" },
                        spec.t_max,
                        summary.variance.t_first
                    );
                    Ok(RunEntry { seed: *seed, outputs: vec![trace, path], pass: Some(pass), abort: None })
                },
            );
            settle(*seed, r)
        })
        .collect::<CliResult<Vec<_>>>()?;
    let runs = results.into_iter().map(|r| r.unwrap_or_else(|e| e)).collect();
    finish(out, "meanfield", cfg.hash(), runs, started)
}

pub struct SampleArgs {
    pub kind: String,
    pub dim: usize,
    pub n: usize,
    pub k: usize,
    pub eps: f64,
    pub beta: f64,
    pub c0: f64,
    pub r: f64,
    pub sigma: f64,
    pub atoms_per_cap: usize,
}

pub fn sample_init(a: &SampleArgs, seed: u64, out: &Path) -> CliResult<i32> {
    let init = match a.kind.as_str() {
        "uniform" => InitSpec::Uniform { dim: a.dim, n: a.n },
        "separated" => InitSpec::Separated { dim: a.dim, n: a.n, k: a.k, eps: a.eps, centers: None },
        "gaussian-mixture" => {
            InitSpec::GaussianMixture { n: a.n, r: a.r, sigma: a.sigma, centers: equispaced_centers(a.dim, a.k, 0.0) }
        }
        "well-prepared" => InitSpec::WellPrepared { n: a.n, c0: a.c0 },
        "separated-measure" => {
            InitSpec::SeparatedMeasure { dim: a.dim, k: a.k, eps: a.eps, atoms_per_cap: a.atoms_per_cap, centers: None }
        }
        other => return invalid(format!("unknown kind `{other}`")),
    };
    let cfg = ExperimentConfig {
        schema: SCHEMA_VERSION,
        model: metastab::ModelKind::Sa,
        beta: a.beta,
        integrator: None,
        init,
        seeds: vec![seed],
        caps: None,
    };
    cfg.validate()?;
    let init = build_initial(&cfg, seed)?;
    write_json(out, &init.config)?;
    if let Some(c) = &init.cert {
        println!("certified: k = {}, alpha = {:.6}, gamma = {:.6}", c.k(), c.alpha, c.gamma);
    }
    Ok(0)
}

#[derive(Serialize)]
struct LemmaRow {
    lemma: &'static str,
    beta: f64,
    c: f64,
    u0: f64,
    empirical: Option<f64>,
    bound: f64,
    margin: Option<f64>,
    pass: bool,
}

#[derive(Serialize)]
struct PlRow {
    seed: u64,
    t: f64,
    in_slow_region: bool,
    h: f64,
    bound: f64,
    pass: bool,
}

pub fn verify_suite(suite: &str, seed: u64, out: &Path) -> CliResult<i32> {
    let outcome = |o: verify::Outcome| {
        println!("{o}");
        o.pass
    };
    let pass = match suite {
        "gradients" => {
            let r = verify::check_gradients(50, seed);
            write_json(&out.join("gradients.json"), &r)?;
            outcome(r.outcome())
        }
        "hessian" => {
            let r = verify::check_hessian(50, seed);
            write_json(&out.join("hessian.json"), &r)?;
            println!(
                "[{}] Hessian vs differences {:.2e}, SA Jacobian vs differences {:.2e}, row sums {:.2e}, asymmetry {:.2e}",
                if r.pass() { "PASS" } else { "FAIL" },
                r.max_fd_err,
                r.max_sa_jacobian_err,
                r.max_row_sum,
                r.max_asymmetry
            );
            r.pass()
        }
        "lemmas" => {
            let collapse = verify::check_collapse_lemma()?;
            let timescale = verify::check_clustering_timescale()?;
            let mut rows: Vec<LemmaRow> = collapse
                .iter()
                .map(|c| LemmaRow {
                    lemma: "collapse-time",
                    beta: c.beta,
                    c: c.c,
                    u0: c.u0,
                    empirical: c.t,
                    bound: c.bound,
                    margin: c.margin,
                    pass: c.margin.is_some_and(|m| m >= 0.0),
                })
                .collect();
            // Clustering rows: bound is the asymptotic formula, margin is 0.05 - |t - bound|.
            rows.extend(timescale.iter().map(|r| LemmaRow {
                lemma: "clustering-timescale",
                beta: r.beta,
                c: 1.0,
                u0: 1.0,
                empirical: r.times.t_beta,
                bound: r.times.asymptotic_t,
                margin: Some(0.05 - r.error),
                pass: r.error < 0.05,
            }));
            write_csv(&out.join("lemmas.csv"), &rows)?;
            let a = outcome(verify::collapse_lemma_outcome(&collapse));
            let b = outcome(verify::timescale_outcome(&timescale));
            a && b
        }
        "pl" => {
            let runs = verify::check_pl(10, seed)?;
            let rows: Vec<PlRow> = runs
                .iter()
                .flat_map(|r| {
                    r.report.samples.iter().map(|s| PlRow {
                        seed: r.seed,
                        t: s.t,
                        in_slow_region: s.in_slow_region,
                        h: s.h,
                        bound: s.bound,
                        pass: s.pass,
                    })
                })
                .collect();
            write_csv(&out.join("pl.csv"), &rows)?;
            let summary: Vec<_> = runs
                .iter()
                .map(|r| {
                    serde_json::json!({
                        "seed": r.seed,
                        "checks_total": r.report.checks_total,
                        "checks_passed": r.report.checks_passed,
                        "first_failure_t": r.report.first_failure_t,
                        "slow_pairs": r.slow_pairs,
                        "slow_pairs_passed": r.slow_pairs_passed,
                    })
                })
                .collect();
            write_json(&out.join("pl_summary.json"), &summary)?;
            outcome(verify::pl_outcome(&runs))
        }
        "acceptance" => {
            let all = verify::run_all()?;
            write_json(&out.join("acceptance.json"), &all)?;
            all.into_iter().map(outcome).fold(true, |a, b| a && b)
        }
        other => return invalid(format!("unknown suite `{other}`")),
    };
    Ok(if pass { 0 } else { 1 })
}

#[derive(Serialize)]
struct AngleRow {
    t: f64,
    particle: usize,
    theta: f64,
    energy_normalized: f64,
}

/// Long-format CSV for plotting: particle angles along a circle trajectory, or
/// the staircase energy profiles.
pub fn figure_data(which: &str, cfg: &ExperimentConfig, seed: u64, out: &Path) -> CliResult<i32> {
    match which {
        "trajectory" => {
            let init = build_initial(cfg, seed)?;
            let theta = init.config.angles()?;
            let spec = cfg.integrator.unwrap_or(IntegratorSpec::new(Scheme::EulerProject, 0.1, 50.0));
            let flow = match cfg.model {
                metastab::ModelKind::Sa => AngularFlow::Sa,
                metastab::ModelKind::Usa => AngularFlow::UsaGradient,
            };
            let w = init.config.weights().to_vec();
            let traj = integrate_angular(&AngularConfiguration { theta, weights: w.clone() }, cfg.beta, flow, &spec)?;
            let rows = traj.records.iter().flat_map(|r| {
                let e = metastab::energy::energy_angular(&r.theta, &w, cfg.beta).normalized;
                r.theta.iter().enumerate().map(move |(i, &theta)| AngleRow {
                    t: r.t,
                    particle: i,
                    theta,
                    energy_normalized: e,
                })
            });
            write_csv(&out.join("figure_trajectory.csv"), rows)?;
        }
        "staircase" => {
            return staircase(5, 0.02, &[50.0, 100.0, 200.0], 1.5, false, &out.join("figure_staircase.csv"));
        }
        other => return invalid(format!("unknown figure `{other}`")),
    }
    Ok(0)
}
