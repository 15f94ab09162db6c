use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use subfrac_core::fractional_solver::{convergence_sweep, residual_check};
use subfrac_core::mc_engine::{estimate_u_grid, occupation_relation, verify_cor22, verify_lemma21};
use subfrac_core::solve;

use crate::config::Experiment;
use crate::CliError;

/// Laplace identity tolerance, relative.
const LAPLACE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    Lemma21,
    Cor22,
    Laplace,
    Occupation,
}

impl Which {
    fn name(self) -> &'static str {
        match self {
            Which::Lemma21 => "lemma21",
            Which::Cor22 => "cor22",
            Which::Laplace => "laplace",
            Which::Occupation => "occupation",
        }
    }
}

/// `Ok(false)` means a report was written but a check failed.
pub type Verdict = Result<bool, CliError>;

/// Fixed 17-significant-digit form, with `nan`/`inf` sentinels.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.16e}")
    }
}

/// Writes `value` as pretty JSON; object keys come out sorted because
/// `serde_json::Value` maps are ordered.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let v = serde_json::to_value(value).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    let mut text =
        serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn with_csv(
    path: &Path,
    body: impl FnOnce(&mut BufWriter<File>) -> Result<(), CliError>,
) -> Result<(), CliError> {
    let mut out = BufWriter::new(File::create(path)?);
    body(&mut out)?;
    out.flush()?;
    Ok(())
}

fn envelope(exp: &Experiment, command: &str) -> serde_json::Map<String, Value> {
    let mut m = serde_json::Map::new();
    m.insert("command".into(), json!(command));
    m.insert("config_hash".into(), json!(exp.hash));
    m.insert("seed".into(), json!(exp.seed()));
    m.insert("spec".into(), json!(exp.config.spec));
    m.insert("grid".into(), json!(exp.config.grid));
    m
}

pub fn cmd_solve(exp: &Experiment) -> Verdict {
    let result = solve(&exp.model, &exp.config.spec, &exp.config.grid, &exp.initial)?;
    let residual = residual_check(&result, &exp.model, &exp.initial)?;

    with_csv(&exp.output_path("_solution.csv"), |out| {
        Ok(result.write_csv(out)?)
    })?;
    if exp.model.eigen().is_some() {
        with_csv(&exp.output_path("_eigen.csv"), |out| {
            Ok(exp.model.write_eigen_csv(out)?)
        })?;
    }
    let mut meta = envelope(exp, "solve");
    meta.insert("dim".into(), json!(exp.model.dim()));
    meta.insert("initial".into(), json!(exp.initial));
    meta.insert("residual_check".into(), json!(residual));
    meta.insert("scheme".into(), json!(result.scheme));
    write_json(&exp.output_path("_meta.json"), &meta)?;
    Ok(true)
}

pub fn cmd_mc(exp: &Experiment) -> Verdict {
    let nodes = exp.config.grid.nodes();
    let dim = exp.model.dim();
    let est = estimate_u_grid(
        &exp.model,
        &exp.config.spec,
        &exp.initial,
        &nodes[1..],
        &exp.config.mc,
    )?;

    with_csv(&exp.output_path("_mc.csv"), |out| {
        let header: Vec<String> = std::iter::once("t".to_string())
            .chain((0..dim).map(|i| format!("state_{i}")))
            .chain((0..dim).map(|i| format!("se_{i}")))
            .collect();
        writeln!(out, "{}", header.join(","))?;
        // E_0 = 0, so the first row is the initial vector exactly.
        let mut row = vec![fmt_num(0.0)];
        row.extend(exp.initial.iter().map(|&v| fmt_num(v)));
        row.extend((0..dim).map(|_| fmt_num(0.0)));
        writeln!(out, "{}", row.join(","))?;
        for (t, states) in nodes[1..].iter().zip(&est) {
            let mut row = vec![fmt_num(*t)];
            row.extend(states.iter().map(|e| fmt_num(e.value)));
            row.extend(states.iter().map(|e| fmt_num(e.std_error)));
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    })?;
    let mut meta = envelope(exp, "mc");
    meta.insert("dim".into(), json!(dim));
    meta.insert("initial".into(), json!(exp.initial));
    meta.insert("mc".into(), json!(exp.config.mc));
    meta.insert("n_streams".into(), json!(exp.config.mc.n_streams()));
    write_json(&exp.output_path("_mc_meta.json"), &meta)?;
    Ok(true)
}

pub fn cmd_verify(exp: &Experiment, which: Which) -> Verdict {
    let spec = &exp.config.spec;
    let settings = &exp.config.verify;
    let mc = &exp.config.mc;
    let mut report = envelope(exp, "verify");
    report.insert("which".into(), json!(which.name()));

    let pass = match which {
        Which::Laplace => {
            let mut rows = Vec::new();
            let mut ok = true;
            for &lambda in &settings.lambdas {
                let err = spec.check_laplace_identity(lambda)?;
                let pass = err <= LAPLACE_TOL;
                ok &= pass;
                rows.push(json!({"lambda": lambda, "rel_error": err, "tolerance": LAPLACE_TOL, "pass": pass}));
            }
            report.insert("checks".into(), Value::Array(rows));
            ok
        }
        Which::Lemma21 => {
            let check = verify_lemma21(spec, settings.s, settings.t, mc)?;
            report.insert("detail".into(), json!(check));
            report.insert("reports".into(), json!([check.report()]));
            check.pass()
        }
        Which::Cor22 => {
            let times = settings
                .times
                .clone()
                .unwrap_or_else(|| vec![exp.config.grid.t_end]);
            let mut details = Vec::new();
            let mut reports = Vec::new();
            let mut ok = true;
            for t in times {
                let check = verify_cor22(spec, t, settings.kappa, mc)?;
                ok &= check.pass();
                reports.extend(check.reports());
                details.push(check);
            }
            report.insert("detail".into(), json!(details));
            report.insert("reports".into(), json!(reports));
            ok
        }
        Which::Occupation => {
            let start = match settings.start {
                Some(s) => s,
                None => {
                    let domain = exp.model.domain_indices();
                    domain[domain.len() / 2]
                }
            };
            let occ = occupation_relation(&exp.model, spec, start, mc)?;
            report.insert("detail".into(), json!(occ));
            report.insert("reports".into(), json!(occ.reports()));
            occ.pass()
        }
    };
    report.insert("pass".into(), json!(pass));
    write_json(
        &exp.output_path(&format!("_{}.json", which.name())),
        &report,
    )?;
    Ok(pass)
}

pub fn cmd_converge(exp: &Experiment) -> Verdict {
    let Some(family) = &exp.config.sweep else {
        return Err(CliError::Config("converge needs a `sweep` section".into()));
    };
    let sweep = convergence_sweep(&exp.model, family, &exp.config.grid, &exp.initial)?;

    with_csv(&exp.output_path("_converge.csv"), |out| {
        writeln!(out, "delta,distance")?;
        for r in &sweep.rows {
            writeln!(out, "{},{}", fmt_num(r.delta), fmt_num(r.distance))?;
        }
        Ok(())
    })?;
    let mut report = envelope(exp, "converge");
    report.insert("sweep".into(), json!(family));
    report.insert("rows".into(), json!(sweep.rows));
    report.insert(
        "strictly_decreasing".into(),
        json!(sweep.strictly_decreasing),
    );
    let pass = sweep.strictly_decreasing.unwrap_or(true);
    report.insert("pass".into(), json!(pass));
    write_json(&exp.output_path("_converge.json"), &report)?;
    Ok(pass)
}
