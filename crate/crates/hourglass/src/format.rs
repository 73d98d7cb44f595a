//! CSV emission with six significant digits and the plain-text summary table.

use std::io::Write;
use std::path::Path;

use hourglass_core::dataset::JointLayout;
use hourglass_core::eval::{table_row, EvalReport, PckResult, TABLE_COLUMNS};
use hourglass_core::training::LogRow;

use crate::error::{io_err, Result};

/// `%g`-style formatting with six significant digits; non-finite values print as
/// `nan`, `inf` or `-inf`.
pub fn sig6(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(format!("{x:.decimals$}"))
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(String::new, sig6)
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    }
    let file = std::fs::File::create(path).map_err(io_err(path))?;
    Ok(csv::Writer::from_writer(file))
}

/// Training log: iteration, lr, train_loss, one validation column per stack.
pub fn write_training_log(path: &Path, rows: &[LogRow], num_stacks: usize) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["iteration".to_string(), "lr".into(), "train_loss".into()];
    header.extend((1..=num_stacks).map(|s| format!("val_pck_stack{s}")));
    w.write_record(&header)?;
    for r in rows {
        let mut rec = vec![r.iteration.to_string(), sig6(r.lr), sig6(r.train_loss)];
        rec.extend(r.val_accuracy.iter().map(|&a| opt(a)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// One row per joint, stratum and threshold; undefined accuracies are empty.
pub fn write_eval_report(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["joint", "stratum", "threshold", "pck", "correct", "counted"])?;
    for (stratum, curve) in [
        ("all", &report.curve),
        ("visible", &report.curve_visible),
        ("occluded", &report.curve_occluded),
    ] {
        for r in curve.iter() {
            for (k, name) in report.joint_names.iter().enumerate() {
                w.write_record([
                    name.clone(),
                    stratum.into(),
                    sig6(r.threshold),
                    opt(r.joint(k)),
                    r.correct[k].to_string(),
                    r.counted[k].to_string(),
                ])?;
            }
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Presence precision/recall points per joint and statistic.
pub fn write_presence(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["joint", "statistic", "threshold", "precision", "recall"])?;
    for (stat, curves) in [
        ("mean", &report.presence_mean),
        ("max", &report.presence_max),
    ] {
        for (name, c) in report.joint_names.iter().zip(curves.iter()) {
            for p in &c.points {
                w.write_record([
                    name.clone(),
                    stat.into(),
                    sig6(p.threshold),
                    sig6(p.precision),
                    sig6(p.recall),
                ])?;
            }
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

/// Presence AUC per joint and statistic; empty when only one class occurs.
pub fn write_presence_auc(path: &Path, report: &EvalReport) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["joint", "statistic", "auc"])?;
    for (stat, curves) in [
        ("mean", &report.presence_mean),
        ("max", &report.presence_max),
    ] {
        for (name, c) in report.joint_names.iter().zip(curves.iter()) {
            w.write_record([name.clone(), stat.into(), opt(c.auc)])?;
        }
    }
    w.flush().map_err(io_err(path))?;
    Ok(())
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "-".into(), |v| format!("{:.1}", 100.0 * v))
}

/// One table line in the fixed column order.
pub fn table_line(label: &str, result: &PckResult, layout: &JointLayout) -> String {
    let cells: Vec<String> = table_row(result, layout)
        .iter()
        .map(|&c| format!("{:>8}", pct(c)))
        .collect();
    format!("{label:<12}{}", cells.join(""))
}

pub fn table_header() -> String {
    let cells: Vec<String> = TABLE_COLUMNS.iter().map(|c| format!("{c:>8}")).collect();
    format!("{:<12}{}", "", cells.join(""))
}

/// Human-readable summary of an evaluation.
pub fn summary(report: &EvalReport, layout: &JointLayout) -> String {
    let mut out = String::new();
    let t = report.reference_threshold;
    out.push_str(&format!("PCK@{} (%)\n", sig6(t)));
    out.push_str(&table_header());
    out.push('\n');
    for (label, r) in [
        ("all", &report.all),
        ("visible", &report.visible),
        ("occluded", &report.occluded),
    ] {
        out.push_str(&table_line(label, r, layout));
        out.push('\n');
    }
    out.push_str("\nper-stack total PCK (%):");
    for (s, r) in report.per_stack.iter().enumerate() {
        out.push_str(&format!(" stack{}={}", s + 1, pct(r.total())));
    }
    out.push_str("\n\npresence AUC (%)   mean     max\n");
    for (k, name) in report.joint_names.iter().enumerate() {
        out.push_str(&format!(
            "{name:<16}{:>7}{:>8}\n",
            pct(report.presence_mean[k].auc),
            pct(report.presence_max[k].auc)
        ));
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(io_err(path))?;
    f.write_all(text.as_bytes()).map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn six_significant_digits() {
        assert_eq!(sig6(0.000250000), "0.00025");
        assert_eq!(sig6(1.0 / 3.0), "0.333333");
        assert_eq!(sig6(123456.7), "123457");
        assert_eq!(sig6(1234567.0), "1.23457e+06");
        assert_eq!(sig6(5e-5), "5e-05");
        assert_eq!(sig6(999999.6), "1e+06");
        assert_eq!(sig6(-2.5), "-2.5");
        assert_eq!(sig6(0.0), "0");
        assert_eq!(sig6(100.0), "100");
    }
}
