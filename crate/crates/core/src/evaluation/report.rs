//! Plot-ready CSV output for sweeps and accuracy-coverage curves.

use std::io;

use super::{CurvePoint, SweepRow};

pub const SWEEP_HEADER: [&str; 10] = [
    "cutoff", "A1", "A2", "A3", "A4", "ac_abs", "ac_ans", "ac_comp", "coverage", "ac_eff",
];

pub const CURVE_HEADER: [&str; 3] = ["cutoff", "coverage", "ac_ans"];

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_sweep_csv<W: io::Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SWEEP_HEADER)?;
    for row in rows {
        let c = &row.counts;
        let m = &row.metrics;
        w.write_record([
            row.cutoff.to_string(),
            c.a1.to_string(),
            c.a2.to_string(),
            c.a3.to_string(),
            c.a4.to_string(),
            opt(m.ac_abs),
            opt(m.ac_ans),
            m.ac_comp.to_string(),
            m.coverage.to_string(),
            m.ac_eff.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn sweep_csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_sweep_csv(rows, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}

pub fn write_curve_csv<W: io::Write>(points: &[CurvePoint], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CURVE_HEADER)?;
    for p in points {
        w.write_record([p.cutoff.to_string(), p.coverage.to_string(), p.ac_ans.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn curve_csv_string(points: &[CurvePoint]) -> String {
    let mut buf = Vec::new();
    write_curve_csv(points, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("CSV output is UTF-8")
}
