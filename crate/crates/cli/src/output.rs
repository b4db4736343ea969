//! CSV emission with 12 significant digits and config sidecars.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::runner::RunResult;
use crate::CliError;

pub const RUN_HEADER: &str = "round,regret,loss,vbar,queries";
pub const SUMMARY_HEADER: &str = "algo,env,seed,final_regret,vbar_T,vT,fT,wT,total_queries,wall_ms,regret_x,regret_y,config";

/// Formats like C's `%.12g`: 12 significant digits, trailing zeros removed.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..12).contains(&exp) {
        let m = strip_zeros(mantissa);
        return format!("{m}e{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    strip_zeros(&format!("{x:.decimals$}")).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

/// FNV-1a 64-bit, stable across platforms and toolchains.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Sidecar text and its file name `config_<hash>.txt`.
pub fn config_sidecar(lines: &[(String, String)]) -> (String, String) {
    let mut text = String::new();
    for (k, v) in lines {
        writeln!(text, "{k}={v}").expect("writing to a String");
    }
    let name = format!("config_{:016x}.txt", fnv1a(text.as_bytes()));
    (name, text)
}

pub fn run_file_name(r: &RunResult) -> String {
    format!("run_{}_{}_{}.csv", r.algo, r.env, r.seed)
}

pub fn run_csv(r: &RunResult) -> String {
    let mut s = String::from(RUN_HEADER);
    s.push('\n');
    for row in &r.rows {
        writeln!(
            s,
            "{},{},{},{},{}",
            row.round,
            fmt_num(row.regret),
            fmt_num(row.loss),
            fmt_num(row.vbar),
            row.queries
        )
        .expect("writing to a String");
    }
    s
}

pub fn summary_csv(results: &[RunResult]) -> String {
    let mut s = String::from(SUMMARY_HEADER);
    s.push('\n');
    for r in results {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.algo,
            r.env,
            r.seed,
            fmt_num(r.final_regret),
            fmt_num(r.vbar_t),
            opt(r.v_t),
            opt(r.f_t),
            opt(r.w_t),
            r.total_queries,
            r.wall_ms,
            opt(r.regret_x),
            opt(r.regret_y),
            config_sidecar(&r.config_lines).0
        )
        .expect("writing to a String");
    }
    s
}

pub fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}
