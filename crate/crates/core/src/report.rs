//! CSV output with `%.17g` number formatting.

use std::io::{self, Write};

use crate::decompose::TpmrRun;
use crate::landscape::SweepRow;

pub const SWEEP_HEADER: &str =
    "seed,d,k,tau,delta,kappa,point_kind,gradient_norm,min_eig,nearest_index,error,bound,within";
pub const TRACE_HEADER: &str = "round,restart,iteration,lambda,ratio";

/// Formats like C's `%.17g`: 17 significant digits, exponent form when the
/// decimal exponent is below -4 or at least 17, trailing zeros removed.
pub fn g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".to_owned();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".to_owned() } else { "-inf".to_owned() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".to_owned() } else { "0".to_owned() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exponent) = sci.split_once('e').expect("exponent form");
    let exponent: i32 = exponent.parse().expect("integer exponent");
    if !(-4..17).contains(&exponent) {
        let mantissa = trim_fraction(mantissa);
        let sign = if exponent < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exponent.abs());
    }
    let decimals = (16 - exponent) as usize;
    trim_fraction(&format!("{x:.decimals$}")).to_owned()
}

fn trim_fraction(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> io::Result<()> {
    writeln!(out, "{SWEEP_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.seed,
            r.d,
            r.k,
            g17(r.tau),
            g17(r.delta),
            g17(r.kappa),
            r.point_kind,
            g17(r.gradient_norm),
            g17(r.min_eig),
            r.nearest_index,
            g17(r.error),
            g17(r.bound),
            r.within
        )?;
    }
    Ok(())
}

/// One row per power iteration of every restart that produced an outcome.
/// `ratio` is left empty when the run had no ground truth.
pub fn write_trace_csv<W: Write>(mut out: W, run: &TpmrRun) -> io::Result<()> {
    writeln!(out, "{TRACE_HEADER}")?;
    for round in &run.rounds {
        for record in &round.restarts {
            let Some(outcome) = &record.outcome else { continue };
            for (i, lambda) in outcome.lambda_trace.iter().enumerate() {
                let ratio = outcome.ratio_trace.get(i + 1).map(|r| g17(*r)).unwrap_or_default();
                writeln!(out, "{},{},{},{},{}", round.round, record.restart, i + 1, g17(*lambda), ratio)?;
            }
        }
    }
    Ok(())
}
