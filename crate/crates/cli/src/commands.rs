//! The subcommands.

use std::path::Path;

use axcirc::bootstrap::{parametric_bootstrap, BootstrapConfig};
use axcirc::mixture::{fit, log_likelihood, select_model};
use axcirc::simstudy::{default_scenarios, run_recovery_study, RecoveryReport, Scenario};
use serde::Serialize;

use crate::args::{
    expand_families, BootstrapArgs, Command, Common, EvaluateArgs, FitArgs, RecoveryArgs, SelectArgs, SimulateArgs,
};
use crate::error::{CliError, CliResult};
use crate::export::{write_contours, write_marginals, write_rose};
use crate::ingest::{ingest, Ingested};
use crate::output::{
    ensure_dir, num, out_path, read_model, write_classification, write_csv, write_intervals, write_json,
    write_selection, BootstrapSummary, ResultFile,
};

pub fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Fit(a) => cmd_fit(&a),
        Command::Select(a) => cmd_select(&a),
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Bootstrap(a) => cmd_bootstrap(&a),
        Command::Recovery(a) => cmd_recovery(&a),
        Command::Evaluate(a) => cmd_evaluate(&a),
    }
}

fn prepare(common: &Common) -> CliResult<()> {
    if let Some(t) = common.threads {
        if t == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        // a second initialization in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(t).build_global();
    }
    ensure_dir(&common.out)
}

fn load(data: &crate::args::DataArgs) -> CliResult<Ingested> {
    let d = ingest(&data.input, &data.ingest_config()?)?;
    if !d.dropped.is_empty() {
        eprintln!("dropped {} incomplete rows (lines {:?})", d.dropped.len(), d.dropped);
    }
    Ok(d)
}

fn check_components(j: usize) -> CliResult<()> {
    if j == 0 {
        return Err(CliError::Usage("the number of components must be at least 1".into()));
    }
    Ok(())
}

pub fn cmd_fit(a: &FitArgs) -> CliResult<()> {
    prepare(&a.common)?;
    check_components(a.components)?;
    let d = load(&a.data)?;
    let cfg = a.em.fit_config(a.common.seed);
    let r = fit(&d.dataset, a.families.families(), a.components, &cfg)?;
    let out = &a.common.out;
    write_json(
        &out_path(out, "result.json"),
        &ResultFile::new("fit", a.common.seed, &r, &d.covariate_names, &d.dropped),
    )?;
    write_classification(&out_path(out, "classification.csv"), &r, &d.lines)?;
    if a.grid > 0 {
        write_contours(&out_path(out, "contours.csv"), &r, a.grid)?;
        write_marginals(&out_path(out, "marginals.csv"), &r, a.grid)?;
    }
    write_rose(&out_path(out, "rose.csv"), &d.dataset, a.circular_bins, a.axial_bins)?;
    println!(
        "{} J={} n={} loglik={:.4} bic={:.4} converged={}",
        a.families, a.components, r.n, r.loglik, r.bic, r.converged
    );
    Ok(())
}

pub fn cmd_select(a: &SelectArgs) -> CliResult<()> {
    prepare(&a.common)?;
    let d = load(&a.data)?;
    let pairs: Vec<_> = expand_families(&a.families).iter().map(|f| f.families()).collect();
    let cfg = a.em.fit_config(a.common.seed);
    let sel = select_model(&d.dataset, &pairs, &a.components.0, &cfg)?;
    let out = &a.common.out;
    write_selection(&out_path(out, "selection.csv"), &sel)?;
    write_json(
        &out_path(out, "result.json"),
        &ResultFile::new("select", a.common.seed, &sel.best_fit, &d.covariate_names, &d.dropped),
    )?;
    write_classification(&out_path(out, "classification.csv"), &sel.best_fit, &d.lines)?;
    let b = &sel.rows[sel.best];
    println!("best {}-{} J={} bic={:.4}", b.circular.code(), b.axial.code(), b.components, sel.best_fit.bic);
    Ok(())
}

fn find_scenario(name: &str) -> CliResult<Scenario> {
    let key = |s: &str| s.to_ascii_lowercase().replace([' ', '_'], "");
    default_scenarios().into_iter().find(|s| key(&s.name) == key(name)).ok_or_else(|| {
        let names: Vec<String> = default_scenarios().into_iter().map(|s| s.name).collect();
        CliError::Usage(format!("unknown scenario {name:?}; built-in scenarios: {}", names.join(", ")))
    })
}

fn read_scenarios(path: &Path) -> CliResult<Vec<Scenario>> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
    // a single scenario or a list
    match serde_json::from_str::<Vec<Scenario>>(&text) {
        Ok(v) => Ok(v),
        Err(_) => Ok(vec![serde_json::from_str::<Scenario>(&text)?]),
    }
}

pub fn cmd_simulate(a: &SimulateArgs) -> CliResult<()> {
    prepare(&a.common)?;
    let mut s = match &a.scenario_file {
        Some(p) => {
            read_scenarios(p)?.into_iter().next().ok_or_else(|| CliError::Data("scenario file is empty".into()))?
        }
        None => find_scenario(&a.scenario)?,
    };
    s.seed = a.common.seed;
    if let Some(n) = a.n {
        s.n = n;
    }
    let (data, labels) = s.simulate(a.replica)?;
    let q = s.covariates.len();
    let mut header = vec!["x".to_string(), "y".to_string()];
    header.extend((1..=q).map(|k| format!("z{k}")));
    header.push("label".into());
    let rows = (0..data.len()).map(|i| {
        let mut r = vec![
            num(a.unit.from_radians(data.circular()[i].value())),
            num(a.unit.from_radians(data.axial()[i].value())),
        ];
        r.extend(data.covariate_row(i)[1..].iter().map(|v| num(*v)));
        r.push((labels[i] + 1).to_string());
        r
    });
    let out = &a.common.out;
    write_csv(&out_path(out, "data.csv"), &header, rows)?;
    write_json(&out_path(out, "truth.json"), &s)?;
    println!("simulated {} rows from {:?}", data.len(), s.name);
    Ok(())
}

pub fn cmd_bootstrap(a: &BootstrapArgs) -> CliResult<()> {
    prepare(&a.common)?;
    check_components(a.components)?;
    let d = load(&a.data)?;
    let cfg = a.em.fit_config(a.common.seed);
    let r = fit(&d.dataset, a.families.families(), a.components, &cfg)?;
    if !r.converged {
        eprintln!("warning: the fit reached max-iter without converging; bootstrapping the last iterate");
    }
    let bcfg = BootstrapConfig {
        replicates: a.replicates,
        level: a.level,
        seed: a.common.seed,
        restarts: a.boot_restarts,
        fit: axcirc::FitConfig { screen_iterations: a.boot_screen_iterations, finalists: a.boot_finalists, ..cfg },
    };
    let boot = parametric_bootstrap(&r, &d.dataset, &bcfg)?;
    if boot.low_success_warning {
        eprintln!("warning: only {} of {} bootstrap refits succeeded", boot.effective, boot.requested);
    }
    let mut result = ResultFile::new("bootstrap", a.common.seed, &r, &d.covariate_names, &d.dropped);
    result.bootstrap = Some(BootstrapSummary {
        replicates: boot.requested,
        effective: boot.effective,
        level: boot.level,
        low_success_warning: boot.low_success_warning,
    });
    let out = &a.common.out;
    write_json(&out_path(out, "result.json"), &result)?;
    write_intervals(&out_path(out, "intervals.csv"), &boot, &d.covariate_names)?;
    write_classification(&out_path(out, "classification.csv"), &r, &d.lines)?;
    println!(
        "{} of {} replicates refitted; {} intervals written",
        boot.effective,
        boot.requested,
        boot.intervals.len()
    );
    Ok(())
}

pub fn cmd_recovery(a: &RecoveryArgs) -> CliResult<()> {
    prepare(&a.common)?;
    let mut scenarios = match &a.scenario_file {
        Some(p) => read_scenarios(p)?,
        None if a.scenario.iter().any(|s| s.eq_ignore_ascii_case("all")) => default_scenarios(),
        None => a.scenario.iter().map(|s| find_scenario(s)).collect::<CliResult<_>>()?,
    };
    for s in &mut scenarios {
        s.seed = a.common.seed;
        if let Some(r) = a.replicas {
            s.replicas = r;
        }
        if let Some(n) = a.n {
            s.n = n;
        }
    }
    let cfg = a.em.fit_config(a.common.seed);
    let reports: Vec<RecoveryReport> =
        scenarios.iter().map(|s| run_recovery_study(s, &cfg)).collect::<Result<_, _>>()?;
    let out = &a.common.out;
    write_json(&out_path(out, "recovery.json"), &reports)?;
    let header: Vec<String> = ["scenario", "parameter", "truth", "mean", "lower", "upper"].map(String::from).to_vec();
    let rows = reports.iter().flat_map(|r| {
        r.parameters
            .iter()
            .map(|p| vec![r.scenario.clone(), p.name.clone(), num(p.truth), num(p.mean), num(p.lower), num(p.upper)])
    });
    write_csv(&out_path(out, "recovery.csv"), &header, rows)?;
    let header: Vec<String> = ["scenario", "replica", "accuracy", "loglik", "converged", "loglik_decreases", "error"]
        .map(String::from)
        .to_vec();
    let rows = reports.iter().flat_map(|r| {
        r.replicas.iter().map(|o| {
            vec![
                r.scenario.clone(),
                (o.replica + 1).to_string(),
                o.accuracy.map(num).unwrap_or_default(),
                o.loglik.map(num).unwrap_or_default(),
                o.converged.to_string(),
                o.loglik_decreases.to_string(),
                o.error.clone().unwrap_or_default(),
            ]
        })
    });
    write_csv(&out_path(out, "accuracy.csv"), &header, rows)?;
    for r in &reports {
        println!("{}: median accuracy {:.3}, {} failures", r.scenario, r.median_accuracy, r.failures);
        if r.failure_warning {
            eprintln!("warning: {}: more than 5% of replicas failed", r.scenario);
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Evaluation {
    n: usize,
    loglik: f64,
    bic: f64,
    n_params: usize,
}

pub fn cmd_evaluate(a: &EvaluateArgs) -> CliResult<()> {
    prepare(&a.common)?;
    let d = load(&a.data)?;
    let model = read_model(&a.model)?;
    let loglik = log_likelihood(&model, &d.dataset)?;
    let n_params = model.n_params();
    let e = Evaluation {
        n: d.dataset.len(),
        loglik,
        bic: axcirc::mixture::bic(loglik, n_params, d.dataset.len()),
        n_params,
    };
    write_json(&out_path(&a.common.out, "evaluation.json"), &e)?;
    println!("{}", serde_json::to_string(&e)?);
    Ok(())
}
