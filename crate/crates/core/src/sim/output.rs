use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{cartesian_errors, trace_csv, Metrics, SimTrace};
use crate::control::StabilityReport;
use crate::error::{Error, Result};
use crate::model::ManipulatorModel;

fn write(dir: &Path, name: &str, body: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    written.push(path);
    Ok(())
}

/// Writes the trace, metrics, per-joint error series, Cartesian error series
/// and a text summary into `out_dir`. Returns the files written.
pub fn emit_outputs(
    trace: &SimTrace,
    metrics: &Metrics,
    model: &ManipulatorModel,
    title: &str,
    report: Option<&StabilityReport>,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if trace.is_empty() {
        return Err(Error::Contract("non-empty trace required".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let mut written = Vec::new();
    let (main, diag) = trace_csv(trace)?;
    write(out_dir, "trace.csv", &main, &mut written)?;
    write(out_dir, "diagnostics.csv", &diag, &mut written)?;

    let mut m = String::from("joint,max_abs_rad,rms_rad,steady_offset_rad,chattering_nm\n");
    for (i, j) in metrics.joints.iter().enumerate() {
        writeln!(
            m,
            "{},{},{},{},{}",
            i + 1,
            j.max_abs,
            j.rms,
            j.steady_offset,
            j.chattering
        )
        .unwrap();
    }
    write(out_dir, "metrics.csv", &m, &mut written)?;

    for i in 0..trace.n {
        let mut s = String::from("t,error_rad,error_deg\n");
        for (row, e) in trace.rows.iter().zip(trace.error(i)) {
            writeln!(s, "{},{},{}", row.t, e, e.to_degrees()).unwrap();
        }
        write(out_dir, &format!("error_joint_{}.csv", i + 1), &s, &mut written)?;
    }

    let mut c = String::from("t,ex_mm,ey_mm,ez_mm,position_mm,yaw_deg,pitch_deg,roll_deg\n");
    for e in cartesian_errors(trace, model) {
        let p = e.position * 1000.0;
        writeln!(
            c,
            "{},{},{},{},{},{},{},{}",
            e.t,
            p.x,
            p.y,
            p.z,
            p.norm(),
            e.euler.yaw.to_degrees(),
            e.euler.pitch.to_degrees(),
            e.euler.roll.to_degrees()
        )
        .unwrap();
    }
    write(out_dir, "cartesian_error.csv", &c, &mut written)?;

    write(out_dir, "summary.txt", &summary(trace, metrics, title, report), &mut written)?;
    Ok(written)
}

fn summary(trace: &SimTrace, metrics: &Metrics, title: &str, report: Option<&StabilityReport>) -> String {
    let mut s = String::new();
    writeln!(s, "{title}").unwrap();
    writeln!(
        s,
        "{} controller ticks at {} s ({} s)",
        trace.len(),
        trace.period,
        trace.len() as f64 * trace.period
    )
    .unwrap();
    writeln!(s).unwrap();
    writeln!(s, "joint  max|e| (deg)  rms (deg)  offset (deg)  chatter (N·m)").unwrap();
    for (i, j) in metrics.joints.iter().enumerate() {
        writeln!(
            s,
            "{:>5}  {:>12.6}  {:>9.6}  {:>12.6}  {:>13.6}",
            i + 1,
            j.max_abs.to_degrees(),
            j.rms.to_degrees(),
            j.steady_offset.to_degrees(),
            j.chattering
        )
        .unwrap();
    }
    writeln!(s).unwrap();
    writeln!(
        s,
        "max position error: {:.6} mm",
        metrics.max_position_error * 1000.0
    )
    .unwrap();
    let [y, p, r] = metrics.max_euler_error;
    writeln!(
        s,
        "max ZYX error: yaw {:.6} deg, pitch {:.6} deg, roll {:.6} deg",
        y.to_degrees(),
        p.to_degrees(),
        r.to_degrees()
    )
    .unwrap();
    if let Some(rep) = report {
        writeln!(s).unwrap();
        write!(s, "{rep}").unwrap();
    }
    s
}

/// Side-by-side table of two runs, `comparison.csv`.
pub fn emit_comparison(
    names: [&str; 2],
    metrics: [&Metrics; 2],
    out_dir: &Path,
) -> Result<PathBuf> {
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let [a, b] = names;
    let mut s = format!(
        "joint,peak_{a}_rad,peak_{b}_rad,peak_ratio,rms_{a}_rad,rms_{b}_rad,offset_{a}_rad,offset_{b}_rad\n"
    );
    for (i, (x, y)) in metrics[0].joints.iter().zip(&metrics[1].joints).enumerate() {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            i + 1,
            x.max_abs,
            y.max_abs,
            x.max_abs / y.max_abs,
            x.rms,
            y.rms,
            x.steady_offset,
            y.steady_offset
        )
        .unwrap();
    }
    let path = out_dir.join("comparison.csv");
    std::fs::write(&path, s).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
