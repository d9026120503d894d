//! CSV emission. Numbers use 12 significant digits, `.` as the decimal
//! separator and no locale-dependent formatting, so equal inputs give
//! byte-identical files.

use std::fmt::Write as _;

use crate::concentration::TailEstimate;
use crate::constructions::{HomogenizationCheck, LowerBoundCheck, UpperBoundCheck};
use crate::influence::{DependenceReport, LinfReport};
use crate::linalg::Matrix;
use crate::scp::ScpVerdict;
use crate::sparsify::SpectralCheck;

const SIGNIFICANT: i32 = 12;

/// Formats like C's `%.12g`: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros stripped.
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
    // Round first so the exponent reflects the printed mantissa.
    let sci = format!("{:.*e}", (SIGNIFICANT - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..SIGNIFICANT).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (SIGNIFICANT - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn push_row(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

fn linf_rows(out: &mut String, report: &LinfReport) {
    for r in &report.rows {
        push_row(
            out,
            &[
                report.kind.label().to_string(),
                r.spec.lambda_label(),
                r.spec.assignment_label(),
                (r.row + 1).to_string(),
                fmt_num(r.l1),
            ],
        );
    }
}

/// One line per feasible row of every pinning, then `#` summary lines.
pub fn analyze_csv(report: &DependenceReport) -> String {
    let mut out = String::from("kind,lambda,assignment,row,l1_sum\n");
    linf_rows(&mut out, &report.one_sided);
    linf_rows(&mut out, &report.two_sided);
    let _ = writeln!(
        out,
        "# D_inf={},D_inf_offdiag={},D_two_sided={},D_am={}",
        fmt_num(report.one_sided.d_inf),
        fmt_num(report.one_sided.d_inf_offdiag),
        fmt_num(report.two_sided.d_inf),
        report.d_am.map(fmt_num).unwrap_or_else(|| "na".into()),
    );
    let arg = &report.one_sided;
    let _ = writeln!(
        out,
        "# argmax lambda={} row={}",
        arg.argmax_spec.lambda_label(),
        arg.argmax_row + 1
    );
    out
}

pub fn chernoff_csv(estimates: &[TailEstimate]) -> String {
    let mut out = String::from("side,delta,mu_extreme,d_param,empirical,bound,allowance,exact,trials,holds\n");
    for e in estimates {
        push_row(
            &mut out,
            &[
                e.side.label().to_string(),
                fmt_num(e.delta),
                fmt_num(e.mu_extreme),
                fmt_num(e.d_param),
                fmt_num(e.empirical),
                fmt_num(e.bound),
                fmt_num(e.allowance()),
                e.exact.to_string(),
                e.trials.to_string(),
                e.holds().to_string(),
            ],
        );
    }
    out
}

/// Matrix with a `v1..vn` header row.
pub fn matrix_csv(m: &Matrix) -> String {
    let header: Vec<String> = (1..=m.ncols()).map(|j| format!("v{j}")).collect();
    let mut out = String::new();
    push_row(&mut out, &header);
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| fmt_num(m[(i, j)])).collect();
        push_row(&mut out, &row);
    }
    out
}

pub fn sparsify_csv(t: usize, epsilon: f64, constant: f64, seed: u64, check: &SpectralCheck) -> String {
    let mut out =
        String::from("t,epsilon,constant,seed,min_eigenvalue,max_eigenvalue,worst_error,ok\n");
    push_row(
        &mut out,
        &[
            t.to_string(),
            fmt_num(epsilon),
            fmt_num(constant),
            seed.to_string(),
            fmt_num(check.min_eigenvalue),
            fmt_num(check.max_eigenvalue),
            fmt_num(check.worst_error),
            check.ok.to_string(),
        ],
    );
    out
}

pub fn scp_csv(verdict: &ScpVerdict) -> String {
    let mut out = String::from("holds,tau,v,instances_checked\n");
    let (tau, v) = match verdict.witness {
        Some((tau, v)) => (
            tau.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(";"),
            (v + 1).to_string(),
        ),
        None => (String::new(), String::new()),
    };
    push_row(
        &mut out,
        &[verdict.holds.to_string(), tau, v, verdict.instances_checked.to_string()],
    );
    out
}

pub fn bounds_csv(n: usize, k: usize, upper: &UpperBoundCheck, lower: &LowerBoundCheck) -> String {
    let mut out = String::from("bound,n,k,threshold,measured,measured_offdiag,ok\n");
    push_row(
        &mut out,
        &[
            "upper".into(),
            n.to_string(),
            k.to_string(),
            fmt_num(upper.bound),
            fmt_num(upper.measured),
            fmt_num(upper.measured_offdiag),
            upper.ok.to_string(),
        ],
    );
    push_row(
        &mut out,
        &[
            "lower".into(),
            n.to_string(),
            k.to_string(),
            fmt_num(lower.lower),
            fmt_num(lower.measured),
            String::new(),
            lower.ok.to_string(),
        ],
    );
    out
}

pub fn homogenization_csv(check: &HomogenizationCheck) -> String {
    let mut out = String::from("two_sided_d,hom_one_sided_d,reflection_residual,ok\n");
    push_row(
        &mut out,
        &[
            fmt_num(check.two_sided_d),
            fmt_num(check.hom_one_sided_d),
            fmt_num(check.reflection_residual),
            check.ok.to_string(),
        ],
    );
    out
}
