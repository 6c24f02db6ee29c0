//! Subcommand implementations. Each returns a library error; `main` maps it to an
//! exit code.

use std::path::{Path, PathBuf};

use filtered_vortex::convergence::run_family;
use filtered_vortex::diagnostics::{
    conserved_quantities, decay_bound_check, vorticity_maximal, weak_residual, BumpTestFunction,
    DecayPolicy, DiagnosticsRecord, TestFunction, TimeWindow,
};
use filtered_vortex::dynamics::integrate;
use filtered_vortex::io;
use filtered_vortex::kernels::{check_admissibility, AdmissibilityConfig, AdmissibilityReport};
use filtered_vortex::{Error, Result, SmoothingKernel, Trajectory, Vec2, VortexSystem};
use serde::Serialize;

use crate::config::{config_error, Config, DiagnosticsSection};

pub const TRAJECTORY_FILE: &str = "trajectory.txt";
pub const DIAGNOSTICS_FILE: &str = "diagnostics.txt";
pub const VMF_FILE: &str = "vmf.txt";
pub const DECAY_FILE: &str = "decay_bound.txt";
pub const WEAK_FILE: &str = "weak_residual.txt";

/// Outcome of a check that ran to completion but did not pass.
#[derive(Debug)]
pub struct CheckFailed(pub String);

pub fn simulate(cfg: &Config, out: &Path) -> Result<()> {
    let system = cfg.system(&mut |w| eprintln!("warning: {w}"))?;
    let radii = &cfg.diagnostics.vmf_radii;
    let with_vmf = system.all_nonnegative() && !radii.is_empty();
    let mut records: Vec<DiagnosticsRecord> = Vec::new();
    let mut vmf = Vec::new();
    let traj = integrate(&system, &cfg.integrator(), &mut |snap: &VortexSystem| {
        records.push(conserved_quantities(snap));
        if with_vmf {
            vmf.extend(vorticity_maximal(snap, radii)?.into_iter().map(|(r, m)| (snap.time(), r, m)));
        }
        Ok(())
    })?;
    io::write_trajectory(&out.join(TRAJECTORY_FILE), &traj)?;
    io::write_diagnostics(&out.join(DIAGNOSTICS_FILE), &records)?;
    if with_vmf {
        io::write_vmf(&out.join(VMF_FILE), &vmf)?;
    }
    eprintln!(
        "simulate: {} vortices, {} snapshots written to {}",
        traj.circulations().len(),
        traj.len(),
        out.display()
    );
    Ok(())
}

pub fn converge(cfg: &Config, out: &Path) -> Result<Option<CheckFailed>> {
    let report = run_family(&cfg.convergence()?)?;
    report.write_dir(out)?;
    for p in &report.pairwise {
        eprintln!("t = {:e}: ||u(eps={:e}) - u(eps={:e})|| = {:e}", p.t, p.eps_a, p.eps_b, p.l2);
    }
    Ok(report.failure.map(CheckFailed))
}

#[derive(Serialize)]
struct KernelCheckReport {
    kernel: String,
    pass: bool,
    admissibility: Option<AdmissibilityReport>,
    profile_checks: Vec<String>,
    failures: Vec<String>,
}

/// Sanity properties of `P_K`: range, monotonicity and limits.
fn profile_checks(kernel: &SmoothingKernel) -> (Vec<String>, Vec<String>) {
    let mut done = Vec::new();
    let mut failures = Vec::new();
    let radii: Vec<f64> = (0..=400).map(|i| 1e-4 * 1e8f64.powf(i as f64 / 400.0)).collect();
    let p: Vec<f64> = radii.iter().map(|&r| kernel.pk(r)).collect();
    if p.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)) {
        done.push("0 <= P_K <= 1".to_string());
    } else {
        failures.push("P_K leaves [0, 1]".to_string());
    }
    if p.windows(2).all(|w| w[1] >= w[0] - 1e-12) {
        done.push("P_K nondecreasing".to_string());
    } else {
        failures.push("P_K decreases somewhere".to_string());
    }
    if (p[p.len() - 1] - 1.0).abs() < 1e-6 && p[0] < 1e-3 {
        done.push("P_K(0+) = 0 and P_K(inf) = 1".to_string());
    } else {
        failures.push(format!("P_K limits off: P(1e-4) = {:e}, P(1e4) = {:e}", p[0], p[p.len() - 1]));
    }
    (done, failures)
}

/// Writes the report as JSON to stdout (and `out/kernel_check.json` when given).
pub fn kernel_check(spec: &str, out: Option<&Path>) -> Result<Option<CheckFailed>> {
    let (admissibility, mut checks, mut failures) = match SmoothingKernel::from_spec(spec) {
        Ok(kernel) => {
            let rep = check_admissibility(&kernel, AdmissibilityConfig::default());
            let (checks, mut failures) = profile_checks(&kernel);
            if !rep.pass {
                failures.push("admissibility conditions not met".to_string());
            }
            (Some(rep), checks, failures)
        }
        Err(Error::KernelRejected(why)) => (None, Vec::new(), vec![format!("kernel rejected: {why}")]),
        Err(e) => return Err(e),
    };
    checks.sort();
    failures.sort();
    let report = KernelCheckReport {
        kernel: spec.to_string(),
        pass: failures.is_empty(),
        admissibility,
        profile_checks: checks,
        failures,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| Error::Diagnostic(format!("cannot serialize the report: {e}")))?;
    println!("{json}");
    if let Some(dir) = out {
        io::write_text(&dir.join("kernel_check.json"), &(json + "\n"))?;
    }
    Ok((!report.pass).then(|| CheckFailed(format!("kernel '{spec}' failed the check"))))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    Conserved,
    Vmf,
    Decay,
    Weak,
}

impl Selection {
    pub const ALL: [Selection; 4] = [Selection::Conserved, Selection::Vmf, Selection::Decay, Selection::Weak];

    pub fn parse_list(s: &str) -> Result<Vec<Selection>> {
        s.split(',')
            .map(|t| match t.trim() {
                "conserved" => Ok(Selection::Conserved),
                "vmf" => Ok(Selection::Vmf),
                "decay" => Ok(Selection::Decay),
                "weak" => Ok(Selection::Weak),
                "all" => Err(Error::invalid("select", "'all' cannot be combined")),
                other => Err(config_error(
                    "select",
                    format!("unknown diagnostic '{other}'; expected conserved, vmf, decay, weak or all"),
                )),
            })
            .collect()
    }
}

/// Default test function: a bump covering every vortex of the first snapshot,
/// windowed over the whole trajectory.
fn default_test_function(traj: &Trajectory) -> Result<Box<dyn TestFunction>> {
    let first = traj.positions(0);
    let circ = traj.circulations();
    let q: f64 = circ.iter().map(|g| g.abs()).sum();
    let mut c = Vec2::ZERO;
    for (p, g) in first.iter().zip(circ) {
        c += *p * (g.abs() / q);
    }
    let reach = first.iter().map(|p| (*p - c).norm()).fold(0.0, f64::max);
    let times = traj.times();
    let w = TimeWindow::new(times[0], times[times.len() - 1], 2)?;
    Ok(Box::new(BumpTestFunction::new(c, 1.0 + 2.0 * reach, 4, w)?))
}

pub fn diagnose(
    trajectory: &Path,
    selection: &[Selection],
    settings: &DiagnosticsSection,
    out: &Path,
) -> Result<Vec<PathBuf>> {
    let traj = io::read_trajectory(trajectory, None)?;
    let mut written = Vec::new();
    let nonnegative = traj.first().all_nonnegative();
    if selection.contains(&Selection::Conserved) {
        let records: Vec<DiagnosticsRecord> = traj.snapshots().map(|s| conserved_quantities(&s)).collect();
        let path = out.join(DIAGNOSTICS_FILE);
        io::write_diagnostics(&path, &records)?;
        written.push(path);
    }
    if selection.contains(&Selection::Vmf) {
        if nonnegative {
            let mut rows = Vec::new();
            for s in traj.snapshots() {
                rows.extend(vorticity_maximal(&s, &settings.vmf_radii)?.into_iter().map(|(r, m)| (s.time(), r, m)));
            }
            let path = out.join(VMF_FILE);
            io::write_vmf(&path, &rows)?;
            written.push(path);
        } else {
            eprintln!("diagnose: skipping vmf, circulations are signed");
        }
    }
    if selection.contains(&Selection::Decay) {
        if nonnegative {
            let policy = DecayPolicy { c_margin: settings.decay_margin };
            match decay_bound_check(&traj, &settings.vmf_radii, policy) {
                Ok(rep) => {
                    let path = out.join(DECAY_FILE);
                    io::write_text(&path, &io::format_decay_report(&rep))?;
                    written.push(path);
                }
                Err(Error::Diagnostic(why)) => eprintln!("diagnose: skipping decay bound, {why}"),
                Err(e) => return Err(e),
            }
        } else {
            eprintln!("diagnose: skipping decay bound, circulations are signed");
        }
    }
    if selection.contains(&Selection::Weak) {
        if traj.len() < 2 {
            eprintln!("diagnose: skipping weak residual, a single snapshot");
        } else {
            let times = traj.times();
            let (psi, filtered) = match &settings.test_function {
                Some(tf) => tf.build(times[0], times[times.len() - 1])?,
                None => (default_test_function(&traj)?, true),
            };
            let rep = weak_residual(&traj, psi.as_ref(), filtered)?;
            let path = out.join(WEAK_FILE);
            io::write_text(&path, &io::format_weak_residual(&rep))?;
            written.push(path);
        }
    }
    Ok(written)
}
