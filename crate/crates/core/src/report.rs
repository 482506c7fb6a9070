//! CSV output.
//!
//! Every file starts with a `# schema: <name> v<k>` line, then optional
//! `# key = value` metadata lines, then a header row. Column layouts:
//!
//! | schema      | columns                                                        |
//! |-------------|----------------------------------------------------------------|
//! | trajectory  | `time, x1..xN`                                                 |
//! | diagnosis   | `n, delta, lambda, verdict, slope, t_stat, returns, events, reached` |
//! | fixedpoint  | `x, mass`                                                      |
//! | pi2         | `x, y, mass`                                                   |
//! | certificate | `key, value`                                                   |
//! | sweep       | see [`SWEEP_COLUMNS`]                                          |
//! | critical    | depends on the mode, see the CLI                               |
//! | chaos       | `n, tv, std_error`                                             |

use std::io::Write;

use crate::error::Result;
use crate::gaps::GridLaw;
use crate::lyapunov::Certificate;
use crate::model::ModelSpec;
use crate::nonlinear::FixedPointReport;
use crate::sim::{ChaosPoint, RecurrenceDiagnosis, Trajectory};
use crate::sweep::SweepRow;

/// Shortest faithful rendering with at most 12 decimals; integers keep `.0`.
pub fn fmt_num(v: f64) -> String {
    if !v.is_finite() {
        return if v.is_nan() {
            "nan".into()
        } else if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    if v != 0.0 && (v.abs() < 1e-6 || v.abs() >= 1e15) {
        return format!("{v:e}");
    }
    let s = format!("{v:.12}");
    let s = s.trim_end_matches('0');
    let s = if s.ends_with('.') { format!("{s}0") } else { s.to_string() };
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

/// Writes one table.
pub fn write_table<W: Write>(
    mut out: W,
    schema: &str,
    metadata: &[(&str, String)],
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let io = |e| crate::error::Error::io("<output>", e);
    writeln!(out, "# schema: {schema} v1").map_err(io)?;
    for (k, v) in metadata {
        writeln!(out, "# {k} = {v}").map_err(io)?;
    }
    let mut w = csv::Writer::from_writer(&mut out);
    let csv_err = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => io(e),
        kind => crate::error::Error::invalid(format!("csv: {kind:?}")),
    };
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(io)?;
    Ok(())
}

fn model_metadata(model: &ModelSpec) -> Vec<(&'static str, String)> {
    vec![
        ("n", model.n_particles.to_string()),
        ("delta", fmt_num(model.delta)),
        ("lambda", fmt_num(model.lambda)),
        ("kernel", model.kernel.to_string()),
    ]
}

pub fn write_trajectory<W: Write>(out: W, model: &ModelSpec, path: &Trajectory) -> Result<()> {
    let names: Vec<String> = (1..=path.n_particles()).map(|i| format!("x{i}")).collect();
    let mut header = vec!["time"];
    header.extend(names.iter().map(String::as_str));
    let mut meta = model_metadata(model);
    meta.push(("horizon", fmt_num(path.horizon())));
    let rows = path.iter().map(|(t, x)| {
        std::iter::once(fmt_num(t))
            .chain(x.iter().map(u64::to_string))
            .collect()
    });
    write_table(out, "trajectory", &meta, &header, rows)
}

pub fn write_diagnosis<W: Write>(out: W, rows: &[(ModelSpec, RecurrenceDiagnosis)]) -> Result<()> {
    let header = ["n", "delta", "lambda", "verdict", "slope", "t_stat", "returns", "events", "reached"];
    let rows = rows.iter().map(|(m, d)| {
        vec![
            m.n_particles.to_string(),
            fmt_num(m.delta),
            fmt_num(m.lambda),
            d.verdict.to_string(),
            fmt_num(d.min_position_slope),
            fmt_num(d.slope_t_stat),
            d.returns.to_string(),
            d.events.to_string(),
            fmt_num(d.reached),
        ]
    });
    write_table(out, "diagnosis", &[], &header, rows)
}

pub fn write_fixed_point<W: Write>(out: W, delta: f64, lambda: f64, report: &FixedPointReport) -> Result<()> {
    let meta = [
        ("delta", fmt_num(delta)),
        ("lambda", fmt_num(lambda)),
        ("regime", report.regime.to_string()),
        ("iterations", report.iterations.to_string()),
        ("converged", report.converged.to_string()),
        ("final_step_tv", fmt_num(report.final_step_tv)),
        ("stationarity_residual", fmt_num(report.stationarity_residual)),
        ("lower_pair_sum", fmt_num(report.lower_pair_sum)),
        ("mean_identity_residual", fmt_num(report.mean_identity_residual)),
        ("median", report.measure.median().to_string()),
        ("tail_bound", fmt_num(report.measure.tail_bound())),
        ("damped", report.damped.to_string()),
    ];
    let rows = report
        .measure
        .mass()
        .iter()
        .enumerate()
        .map(|(x, p)| vec![x.to_string(), fmt_num(*p)]);
    write_table(out, "fixedpoint", &meta, &["x", "mass"], rows)
}

pub fn write_pi2<W: Write>(out: W, delta: f64, lambda: f64, law: &GridLaw) -> Result<()> {
    let meta = [
        ("delta", fmt_num(delta)),
        ("lambda", fmt_num(lambda)),
        ("c", fmt_num(law.c_numeric())),
        ("tail_bound", fmt_num(law.tail_bound())),
    ];
    let rows = law
        .iter()
        .map(|(x, y, p)| vec![x.to_string(), y.to_string(), fmt_num(p)]);
    write_table(out, "pi2", &meta, &["x", "y", "mass"], rows)
}

pub fn write_certificate<W: Write>(out: W, cert: &Certificate) -> Result<()> {
    let mut rows = vec![
        ("kind", cert.kind.to_string()),
        ("holds", cert.holds.to_string()),
        ("n", cert.n.to_string()),
        ("delta", fmt_num(cert.delta)),
        ("lambda", fmt_num(cert.lambda)),
        ("worst_residual", fmt_num(cert.worst_residual)),
    ];
    match cert.kind {
        crate::lyapunov::CertificateKind::ErgodicDrift => rows.extend([
            ("alpha", fmt_num(cert.alpha)),
            ("beta", fmt_num(cert.beta)),
            ("gamma", fmt_num(cert.gamma)),
            ("h", fmt_num(cert.h)),
            ("box_radius", cert.box_radius.to_string()),
            ("core", cert.core.to_string()),
            ("states_checked", cert.states_checked.to_string()),
        ]),
        crate::lyapunov::CertificateKind::TransienceDrift => {
            rows.push(("epsilon", fmt_num(cert.epsilon)));
            if let Some(v) = cert.region_values.first() {
                rows.push(("interior", fmt_num(*v)));
            }
        }
    }
    let piles: Vec<(String, String)> = cert
        .region_values
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, v)| (format!("pile_{}", j + 1), fmt_num(*v)))
        .collect();
    let rows = rows
        .into_iter()
        .map(|(k, v)| vec![k.to_string(), v])
        .chain(piles.into_iter().map(|(k, v)| vec![k, v]));
    write_table(out, "certificate", &[], &["key", "value"], rows)
}

pub const SWEEP_COLUMNS: [&str; 14] = [
    "n",
    "delta",
    "lambda",
    "verdict",
    "ergodic_votes",
    "transient_votes",
    "replicates",
    "mean_slope",
    "mean_returns",
    "bound_transient_below",
    "bound_ergodic_above",
    "conjectured_critical",
    "continuum_critical",
    "note",
];

pub fn write_sweep<W: Write>(out: W, seed: u64, horizon: f64, rows: &[SweepRow]) -> Result<()> {
    let meta = [("seed", seed.to_string()), ("horizon", fmt_num(horizon))];
    let rows = rows.iter().map(|r| {
        vec![
            r.n.to_string(),
            fmt_num(r.delta),
            fmt_num(r.lambda),
            r.verdict.to_string(),
            r.ergodic_votes.to_string(),
            r.transient_votes.to_string(),
            r.replicates.to_string(),
            fmt_num(r.mean_slope),
            fmt_num(r.mean_returns),
            fmt_num(r.bound_transient_below),
            fmt_num(r.bound_ergodic_above),
            fmt_num(r.conjectured_critical),
            fmt_num(r.continuum_critical),
            r.note.clone(),
        ]
    });
    write_table(out, "sweep", &meta, &SWEEP_COLUMNS, rows)
}

pub fn write_chaos<W: Write>(out: W, delta: f64, lambda: f64, horizon: f64, points: &[ChaosPoint]) -> Result<()> {
    let meta = [
        ("delta", fmt_num(delta)),
        ("lambda", fmt_num(lambda)),
        ("horizon", fmt_num(horizon)),
    ];
    let rows = points
        .iter()
        .map(|p| vec![p.n.to_string(), fmt_num(p.tv), fmt_num(p.std_error)]);
    write_table(out, "chaos", &meta, &["n", "tv", "std_error"], rows)
}
