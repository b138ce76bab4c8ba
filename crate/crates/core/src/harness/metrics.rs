//! CSV output. Reals are written with 9 significant digits in the style of
//! C's `%.9g`; every file is written to a temporary sibling and renamed.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use super::experiment::{ExperimentResult, Summary};
use crate::error::Result;

pub const LEARNING_CURVE_HEADER: &str = "episode,mean_reward,mean_loss";
pub const ROUNDS_HEADER: &str = "round,vehicle,q,T_comp,T_upload,T_fed,R_lambda,T_total,QE,F_global,F_best,converged";
pub const SUMMARY_HEADER: &str = "scheme,w1,K,avg_total_time,avg_QE,G_pi,rounds_to_converge,test_acc";
pub const COMPARISON_HEADER: &str = "scheme,w1,K,avg_total_time,avg_QE,G_pi,rounds_to_converge,test_acc,avg_q";

/// `%.9g`.
pub fn fmt_g(x: f64) -> String {
    const SIG: i32 = 9;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{:.*e}", (SIG - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..SIG).contains(&exp) {
        let m = trim_fraction(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIG - 1 - exp) as usize;
        trim_fraction(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Writes `contents` next to `path` and renames it into place.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents.as_bytes())?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn learning_curve_csv(res: &ExperimentResult) -> String {
    let mut s = format!("{LEARNING_CURVE_HEADER}\n");
    for row in &res.curve {
        writeln!(s, "{},{},{}", row.episode, fmt_g(row.mean_reward), fmt_g(row.mean_loss)).expect("write to string");
    }
    s
}

pub fn rounds_csv(res: &ExperimentResult) -> String {
    let mut s = format!("{ROUNDS_HEADER}\n");
    for r in &res.rounds {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.round,
            r.vehicle,
            r.q,
            fmt_g(r.t_comp),
            fmt_g(r.t_upload),
            fmt_g(r.t_fed),
            r.r_lambda,
            fmt_g(r.t_total),
            fmt_g(r.qe),
            fmt_g(r.f_global),
            fmt_g(r.f_best),
            r.converged
        )
        .expect("write to string");
    }
    s
}

fn summary_fields(m: &Summary) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        m.scheme,
        fmt_g(m.w1),
        fmt_g(m.k),
        fmt_g(m.avg_total_time),
        fmt_g(m.avg_qe),
        fmt_g(m.g_pi),
        fmt_g(m.rounds_to_converge),
        fmt_g(m.test_acc)
    )
}

pub fn summary_csv(res: &ExperimentResult) -> String {
    format!("{SUMMARY_HEADER}\n{}\n", summary_fields(&res.summary))
}

/// One summary row per run plus the mean applied level.
pub fn comparison_csv(results: &[ExperimentResult]) -> String {
    let mut s = format!("{COMPARISON_HEADER}\n");
    for res in results {
        writeln!(s, "{},{}", summary_fields(&res.summary), fmt_g(res.summary.avg_q)).expect("write to string");
    }
    s
}

/// Writes `learning_curve.csv`, `rounds.csv` and `summary.csv` into `out_dir`.
pub fn emit_metrics(res: &ExperimentResult, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let files = [
        ("learning_curve.csv", learning_curve_csv(res)),
        ("rounds.csv", rounds_csv(res)),
        ("summary.csv", summary_csv(res)),
    ];
    let mut written = Vec::with_capacity(files.len());
    for (name, body) in files {
        let path = out_dir.join(name);
        write_atomic(&path, &body)?;
        written.push(path);
    }
    Ok(written)
}
