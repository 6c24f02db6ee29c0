//! Plain-text data products. Every float is written with `{:e}`, the shortest
//! representation that parses back to the same bits.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::diagnostics::{DecayBoundReport, DiagnosticsRecord, WeakResidualReport};
use crate::discretization::VortexSystem;
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::kernels::SmoothingKernel;
use crate::vec2::Vec2;

/// Formats a float for round-trip output; non-finite values become `nan`, `inf`, `-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:e}")
    }
}

fn parse_f64(tok: &str, location: &dyn Fn() -> String) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        location: location(),
        reason: format!("'{tok}' is not a number"),
    })
}

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(BufWriter::new(fs::File::create(path)?))
}

pub fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# filtered-vortex trajectory")?;
    writeln!(w, "# kernel = {}", traj.kernel().name())?;
    writeln!(w, "# eps = {}", fmt_f64(traj.eps()))?;
    if let Some(eta) = traj.first().grid_size() {
        writeln!(w, "# eta = {}", fmt_f64(eta))?;
    }
    writeln!(w, "# columns: t n x y gamma")?;
    let circ = traj.circulations();
    for (i, &t) in traj.times().iter().enumerate() {
        let ts = fmt_f64(t);
        for (n, (p, g)) in traj.positions(i).iter().zip(circ).enumerate() {
            writeln!(w, "{ts} {n} {} {} {}", fmt_f64(p.x), fmt_f64(p.y), fmt_f64(*g))?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory file. The kernel named in the header is rebuilt unless
/// `kernel` overrides it.
pub fn read_trajectory(path: &Path, kernel: Option<SmoothingKernel>) -> Result<Trajectory> {
    let file = fs::File::open(path)?;
    let name = path.display().to_string();
    let mut kernel_spec = None;
    let mut eps = None;
    let mut eta = None;
    let mut frames: Vec<(f64, Vec<Vec2>, Vec<f64>)> = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        let loc = || format!("{name}:{}", lineno + 1);
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                match k.trim() {
                    "kernel" => kernel_spec = Some(v.trim().to_string()),
                    "eps" => eps = Some(parse_f64(v.trim(), &loc)?),
                    "eta" => eta = Some(parse_f64(v.trim(), &loc)?),
                    _ => {}
                }
            }
            continue;
        }
        let cols: Vec<&str> = line.split_whitespace().collect();
        if cols.len() != 5 {
            return Err(Error::Parse { location: loc(), reason: format!("expected 5 columns, found {}", cols.len()) });
        }
        let t = parse_f64(cols[0], &loc)?;
        let n: usize = cols[1].parse().map_err(|_| Error::Parse {
            location: loc(),
            reason: format!("'{}' is not a vortex index", cols[1]),
        })?;
        let p = Vec2::new(parse_f64(cols[2], &loc)?, parse_f64(cols[3], &loc)?);
        let g = parse_f64(cols[4], &loc)?;
        if n == 0 {
            frames.push((t, Vec::new(), Vec::new()));
        }
        let frame = match frames.last_mut() {
            Some(f) if f.0 == t && f.1.len() == n => f,
            _ => {
                return Err(Error::Parse {
                    location: loc(),
                    reason: "rows must list vortices 0, 1, ... for each snapshot in turn".into(),
                })
            }
        };
        frame.1.push(p);
        frame.2.push(g);
    }
    let eps = eps.ok_or_else(|| Error::Parse { location: name.clone(), reason: "missing '# eps = ' header".into() })?;
    let kernel = match kernel {
        Some(k) => k,
        None => {
            let spec = kernel_spec
                .ok_or_else(|| Error::Parse { location: name.clone(), reason: "missing '# kernel = ' header".into() })?;
            SmoothingKernel::from_spec(&spec)?
        }
    };
    let mut frames = frames.into_iter();
    let (t0, p0, circ) = frames
        .next()
        .ok_or_else(|| Error::Parse { location: name.clone(), reason: "no snapshot rows".into() })?;
    let base = VortexSystem::new(p0, circ.clone(), eps, kernel)?.with_time(t0).with_grid_size(eta);
    let mut traj = Trajectory::new(&base);
    for (t, p, g) in frames {
        if g != circ {
            return Err(Error::Parse { location: name.clone(), reason: format!("circulations change at t = {t:e}") });
        }
        traj.push(t, p)?;
    }
    Ok(traj)
}

pub fn write_diagnostics(path: &Path, records: &[DiagnosticsRecord]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# columns: t Q M cx cy H")?;
    for r in records {
        writeln!(
            w,
            "{} {} {} {} {} {}",
            fmt_f64(r.t),
            fmt_f64(r.total_circulation),
            fmt_f64(r.second_moment),
            fmt_f64(r.centroid.x),
            fmt_f64(r.centroid.y),
            fmt_f64(r.hamiltonian.unwrap_or(f64::NAN)),
        )?;
    }
    w.flush()?;
    Ok(())
}

fn read_table(path: &Path, columns: usize) -> Result<Vec<Vec<f64>>> {
    let text = fs::read_to_string(path)?;
    let name = path.display().to_string();
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let loc = || format!("{name}:{}", lineno + 1);
        let row = line.split_whitespace().map(|tok| parse_f64(tok, &loc)).collect::<Result<Vec<_>>>()?;
        if row.len() != columns {
            return Err(Error::Parse { location: loc(), reason: format!("expected {columns} columns, found {}", row.len()) });
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_diagnostics(path: &Path) -> Result<Vec<DiagnosticsRecord>> {
    Ok(read_table(path, 6)?
        .into_iter()
        .map(|r| DiagnosticsRecord {
            t: r[0],
            total_circulation: r[1],
            second_moment: r[2],
            centroid: Vec2::new(r[3], r[4]),
            hamiltonian: r[5].is_finite().then_some(r[5]),
            vmf_samples: Vec::new(),
        })
        .collect())
}

/// Rows `(t, r, M_r)`.
pub fn write_vmf(path: &Path, rows: &[(f64, f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "# columns: t r M_r")?;
    for (t, r, m) in rows {
        writeln!(w, "{} {} {}", fmt_f64(*t), fmt_f64(*r), fmt_f64(*m))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_vmf(path: &Path) -> Result<Vec<(f64, f64, f64)>> {
    Ok(read_table(path, 3)?.into_iter().map(|r| (r[0], r[1], r[2])).collect())
}

fn key_values(pairs: &[(&str, String)]) -> String {
    let mut s = String::new();
    for (k, v) in pairs {
        let _ = writeln!(s, "{k} = {v}");
    }
    s
}

pub fn format_weak_residual(r: &WeakResidualReport) -> String {
    key_values(&[
        ("test_function_id", r.test_function_id.clone()),
        ("filtered", r.filtered.to_string()),
        ("w_linear", fmt_f64(r.w_linear)),
        ("w_nonlinear", fmt_f64(r.w_nonlinear)),
        ("residual", fmt_f64(r.residual)),
        ("quadrature_dt", fmt_f64(r.quadrature_dt)),
        ("n_snapshots", r.n_snapshots.to_string()),
    ])
}

pub fn format_decay_report(r: &DecayBoundReport) -> String {
    let list = |v: &[f64]| v.iter().map(|x| fmt_f64(*x)).collect::<Vec<_>>().join(" ");
    let excluded: Vec<String> = r.excluded.iter().map(|(r, why)| format!("{} ({why})", fmt_f64(*r))).collect();
    key_values(&[
        ("eps", fmt_f64(r.eps)),
        ("c_fit", fmt_f64(r.c_fit)),
        ("c_margin", fmt_f64(r.c_margin)),
        ("radii_used", list(&r.radii_used)),
        ("radii_excluded", excluded.join("; ")),
        ("worst_ratio", fmt_f64(r.worst_ratio)),
        ("worst_t", fmt_f64(r.worst_t)),
        ("worst_r", fmt_f64(r.worst_r)),
        ("pass", r.pass.to_string()),
    ])
}

/// Parses a `key = value` document, ignoring blank lines and `#` comments.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
        .map(|(i, l)| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| Error::Parse { location: format!("line {}", i + 1), reason: "expected 'key = value'".into() })
        })
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes())?;
    w.flush()?;
    Ok(())
}
