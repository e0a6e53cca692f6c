//! File formats. Everything is plain CSV with a header row; floats are
//! written with 17 significant digits so values round-trip exactly.

use crate::filtration::Filtration;
use crate::geometry::{Point, PointCloud};
use crate::pathsim::PathSample;
use crate::persistence::{PersistenceDiagram, Weight};
use crate::regen::RegenTrace;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_infinite() && v > 0.0 {
        "inf".to_string()
    } else if v.is_infinite() {
        "-inf".to_string()
    } else {
        "nan".to_string()
    }
}

fn parse_f64(s: &str) -> io::Result<f64> {
    match s.trim() {
        "inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        t => t
            .parse::<f64>()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("bad float {t:?}: {e}"))),
    }
}

fn expect_header(line: Option<&str>, want: &str) -> io::Result<()> {
    match line {
        Some(h) if h.trim() == want => Ok(()),
        other => Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("expected header {want:?}, got {other:?}"),
        )),
    }
}

/// Path CSV: `t,x,y`, one row per sample.
pub fn write_path_csv(path: &PathSample, file: &Path) -> io::Result<()> {
    let mut out = String::from("t,x,y\n");
    for (t, p) in path.times.iter().zip(&path.points) {
        let _ = writeln!(out, "{},{},{}", fmt_f64(*t), fmt_f64(p.x), fmt_f64(p.y));
    }
    std::fs::write(file, out)
}

/// Reads a path CSV back into (times, points).
pub fn read_path_csv(file: &Path) -> io::Result<(Vec<f64>, Vec<Point>)> {
    let text = std::fs::read_to_string(file)?;
    let mut lines = text.lines();
    expect_header(lines.next(), "t,x,y")?;
    let mut times = Vec::new();
    let mut points = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let t = parse_f64(it.next().unwrap_or(""))?;
        let x = parse_f64(it.next().unwrap_or(""))?;
        let y = parse_f64(it.next().unwrap_or(""))?;
        times.push(t);
        points.push(Point::new(x, y));
    }
    Ok((times, points))
}

/// Cloud CSV: `x,y`.
pub fn write_cloud_csv(cloud: &PointCloud, file: &Path) -> io::Result<()> {
    let mut out = String::from("x,y\n");
    for p in &cloud.points {
        let _ = writeln!(out, "{},{}", fmt_f64(p.x), fmt_f64(p.y));
    }
    std::fs::write(file, out)
}

pub fn read_cloud_csv(file: &Path) -> io::Result<PointCloud> {
    let text = std::fs::read_to_string(file)?;
    let mut lines = text.lines();
    expect_header(lines.next(), "x,y")?;
    let mut points = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let x = parse_f64(it.next().unwrap_or(""))?;
        let y = parse_f64(it.next().unwrap_or(""))?;
        points.push(Point::new(x, y));
    }
    Ok(PointCloud::new(points))
}

/// Diagram CSV: `q,birth,death`. Under the reduced degree-0 convention no
/// infinite death is ever emitted for point-cloud diagrams.
pub fn write_diagram_csv(diagram: &PersistenceDiagram, file: &Path) -> io::Result<()> {
    let mut out = String::from("q,birth,death\n");
    for q in 0..2 {
        for &(b, d) in diagram.pairs(q) {
            let _ = writeln!(out, "{q},{},{}", fmt_f64(b), fmt_f64(d));
        }
    }
    std::fs::write(file, out)
}

pub fn read_diagram_csv(file: &Path) -> io::Result<PersistenceDiagram> {
    let text = std::fs::read_to_string(file)?;
    let mut lines = text.lines();
    expect_header(lines.next(), "q,birth,death")?;
    let mut h0 = Vec::new();
    let mut h1 = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let q: usize = it
            .next()
            .unwrap_or("")
            .trim()
            .parse()
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("bad degree: {e}")))?;
        let b = parse_f64(it.next().unwrap_or(""))?;
        let d = parse_f64(it.next().unwrap_or(""))?;
        match q {
            0 => h0.push((b, d)),
            1 => h1.push((b, d)),
            _ => {
                return Err(io::Error::new(
                    io::ErrorKind::InvalidData,
                    format!("unsupported degree {q}"),
                ))
            }
        }
    }
    Ok(PersistenceDiagram::from_pairs(h0, h1))
}

/// Weight CSV: `r,value` breakpoints of the piecewise-linear weight.
pub fn write_weight_csv(weight: &Weight, file: &Path) -> io::Result<()> {
    let mut out = String::from("r,value\n");
    for &(r, v) in &weight.breakpoints {
        let _ = writeln!(out, "{},{}", fmt_f64(r), fmt_f64(v));
    }
    std::fs::write(file, out)
}

pub fn read_weight_csv(file: &Path) -> io::Result<Weight> {
    let text = std::fs::read_to_string(file)?;
    let mut lines = text.lines();
    expect_header(lines.next(), "r,value")?;
    let mut breakpoints = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let r = parse_f64(it.next().unwrap_or(""))?;
        let v = parse_f64(it.next().unwrap_or(""))?;
        breakpoints.push((r, v));
    }
    Weight::new(breakpoints).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
}

/// Filtration debug dump: `value,dim,v0,v1,v2`, unused vertex slots empty.
pub fn write_filtration_csv(filt: &Filtration, file: &Path) -> io::Result<()> {
    let mut out = String::from("value,dim,v0,v1,v2\n");
    for s in &filt.simplices {
        let slot = |k: usize| -> String {
            if s.verts[k] == u32::MAX {
                String::new()
            } else {
                s.verts[k].to_string()
            }
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(s.value),
            s.dim,
            slot(0),
            slot(1),
            slot(2)
        );
    }
    std::fs::write(file, out)
}

/// Trace CSV: `k,tau_k,delta_tau_k,n_candidates,theta_minus,theta_plus`,
/// unavailable windows left empty.
pub fn write_trace_csv(trace: &RegenTrace, file: &Path) -> io::Result<()> {
    let mut out = String::from("k,tau_k,delta_tau_k,n_candidates,theta_minus,theta_plus\n");
    let mut prev = 0.0;
    for c in &trace.cuts {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            c.k,
            fmt_f64(c.time),
            fmt_f64(c.time - prev),
            c.n_candidates,
            opt(c.theta_minus),
            opt(c.theta_plus)
        );
        prev = c.time;
    }
    std::fs::write(file, out)
}
