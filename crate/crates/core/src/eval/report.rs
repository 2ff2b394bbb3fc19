//! Comma-separated report files.
//!
//! Every file starts with the resolved configuration as `# ` comment lines,
//! followed by a fixed header row.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::{ExperimentRow, MaeReport};
use crate::dataset::write_atomic;
use crate::error::Result;

pub const REPORT_HEADER: &str =
    "label,model,dataset,samples,eyes_mae_s,foot_mae_s,hands_mae_s,overall_mae_s,takeover_mae_s";

pub const CURVE_HEADER: &str = "label,seed,epoch,train_loss,eval_overall_mae_s";

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

fn echo(out: &mut String, config: &str) {
    for line in config.lines() {
        let _ = writeln!(out, "# {line}");
    }
}

pub fn report_csv(reports: &[MaeReport], config: &str) -> String {
    let mut out = String::new();
    echo(&mut out, config);
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{:.6},{:.6},{:.6},{:.6},{:.6}",
            quote(&r.label),
            quote(&r.model),
            quote(&r.dataset),
            r.samples,
            r.eyes_mae_s,
            r.foot_mae_s,
            r.hands_mae_s,
            r.overall_mae_s,
            r.takeover_mae_s
        );
    }
    out
}

/// Per-epoch training curves of every seed of every row.
pub fn curves_csv(rows: &[ExperimentRow], config: &str) -> String {
    let mut out = String::new();
    echo(&mut out, config);
    out.push_str(CURVE_HEADER);
    out.push('\n');
    for row in rows {
        for run in &row.runs {
            for e in &run.history.epochs {
                let mae = e
                    .val
                    .as_ref()
                    .map(|v| format!("{:.6}", v.overall_mae_s))
                    .unwrap_or_default();
                let _ = writeln!(
                    out,
                    "{},{},{},{:.6},{}",
                    quote(&row.label),
                    run.seed,
                    e.epoch,
                    e.train_loss,
                    mae
                );
            }
        }
    }
    out
}

pub fn write_report_csv(path: impl AsRef<Path>, reports: &[MaeReport], config: &str) -> Result<()> {
    let body = report_csv(reports, config);
    write_atomic(path.as_ref(), |w| w.write_all(body.as_bytes()))
}

pub fn write_curves_csv(
    path: impl AsRef<Path>,
    rows: &[ExperimentRow],
    config: &str,
) -> Result<()> {
    let body = curves_csv(rows, config);
    write_atomic(path.as_ref(), |w| w.write_all(body.as_bytes()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::ComponentTimes;

    #[test]
    fn layout() {
        let t = ComponentTimes::new(1.0, 2.0, 3.0);
        let r = MaeReport::from_points(&[t], &[t])
            .unwrap()
            .with_label("F+G, full");
        let csv = report_csv(&[r], "seed = 1\nepochs = 2");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "# seed = 1");
        assert_eq!(lines[1], "# epochs = 2");
        assert_eq!(lines[2], REPORT_HEADER);
        assert!(lines[3].starts_with("\"F+G, full\",,,1,0.000000"));
    }

    #[test]
    fn atomic_write() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        write_report_csv(&path, &[], "").unwrap();
        assert_eq!(
            std::fs::read_to_string(&path).unwrap(),
            format!("{REPORT_HEADER}\n")
        );
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
