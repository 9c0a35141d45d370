//! Text, JSON and CSV renderings of an [`AnalysisReport`].

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::kbm::CyclePoint;
use crate::pipeline::AnalysisReport;

pub const CYCLE_CSV_HEADER: &str = "t,x1,x2";

pub fn cycle_csv(points: impl IntoIterator<Item = (f64, f64, f64)>) -> String {
    let mut out = String::from(CYCLE_CSV_HEADER);
    out.push('\n');
    for (t, x1, x2) in points {
        let _ = writeln!(out, "{t},{x1},{x2}");
    }
    out
}

pub fn predicted_csv(points: &[CyclePoint]) -> String {
    cycle_csv(points.iter().map(|p| (p.t, p.x1, p.x2)))
}

pub fn to_json(report: &AnalysisReport) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("reports serialize");
    s.push('\n');
    s
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".into(), |x| format!("{x:.6e}"))
}

pub fn render_text(r: &AnalysisReport) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "system: {}", r.system);
    let _ = writeln!(o, "alpha: {} ({})", r.alpha, r.alpha_exact);
    let _ = writeln!(
        o,
        "options: degree {}, {} arithmetic, {} variant, verify {}",
        r.options.degree, r.options.arithmetic, r.options.variant, r.options.verify
    );
    let _ = writeln!(o, "nonlinear degree: {}", r.nonlinear_degree);
    let _ = writeln!(o, "tau = {:.6e}, delta = {:.6e}, discriminant = {:.6e}", r.hopf.tau, r.hopf.delta, r.hopf.discriminant);

    if let Some(f) = &r.failure {
        let _ = writeln!(o, "\nchange of variables: none found");
        let _ = writeln!(o, "  degree {}: rank {} with {} unknowns, {} equations", f.m, f.rank, f.unknowns, f.equations);
    }
    if let Some(c) = &r.change_of_variables {
        let _ = writeln!(o, "\nchange of variables");
        let _ = writeln!(o, "  degree m = {}, (a, b) = ({}, {})", c.m, c.gamma_params[0], c.gamma_params[1]);
        let _ = writeln!(o, "  gamma = {:?}", c.gamma);
        let _ = writeln!(o, "  theta norms = {:?}", c.theta_norms);
        let _ = writeln!(o, "  reduction residual = {:e}", c.reduction_residual);
    }
    if let Some(i) = &r.inversion {
        let slope = |s: &crate::inversion::SlopeEstimate| s.slope.map_or_else(|| "exact".into(), |v| format!("{v:.3}"));
        let _ = writeln!(o, "\ninverse series");
        let _ = writeln!(o, "  xi2 = {:?}", i.xi2);
        let _ = writeln!(o, "  xi3 = {:?}", i.xi3);
        let _ = writeln!(
            o,
            "  residual slope {} (forward), {} (reverse)",
            slope(&i.composition_slope),
            slope(&i.reverse_slope)
        );
        let bound = if i.trust_ball.unbounded { " (no violation found)" } else { "" };
        let _ = writeln!(o, "  trust radius {:.4e}{bound}", i.trust_ball.radius);
    }
    if let Some(g) = &r.g {
        let _ = writeln!(o, "\nsecond-order equation");
        let _ = writeln!(o, "  G2 = {:?}", g.g2);
        let _ = writeln!(o, "  G3 = {:?}", g.g3);
    }
    if let Some(a) = &r.averages {
        let _ = writeln!(o, "  p3 = {:.6e}, q3 = {:.6e}", a.p3, a.q3);
    }
    if let Some(rc) = &r.richardson {
        let _ = writeln!(
            o,
            "  p3 at tau/2 = {:.6e}, extrapolated p3(0) = {:.6e}, change {:.2}%",
            rc.p3_half_tau,
            rc.extrapolated_p3,
            100.0 * rc.relative_change
        );
    }
    if let Some(p) = &r.prediction {
        let _ = writeln!(o, "\nprediction ({} variant)", p.variant);
        let _ = writeln!(o, "  existence: {:?}, stability: {:?} (if the cycle is unique)", p.existence, p.stability);
        let _ = writeln!(o, "  r0 = {}, omega0 = {}", opt(p.r0), opt(p.omega0));
        let _ = writeln!(o, "  z amplitude = {}, x1 amplitude = {}", opt(p.z_amplitude), opt(r.predicted_amplitude));
        let _ = writeln!(o, "  period = {}", opt(p.period));
    }
    if let Some(v) = &r.variants {
        let _ = writeln!(o, "  x1 amplitude by variant: paper {}, rederived {}", opt(v.paper.x1_amplitude), opt(v.rederived.x1_amplitude));
    }
    if r.options.verify {
        let _ = writeln!(o, "\nnumerical check");
        match &r.measurement {
            Some(m) => {
                let _ = writeln!(
                    o,
                    "  cycle: amplitude {:.6e}, rms radius {:.6e}, period {:.6e}",
                    m.amplitude, m.radius_rms, m.period
                );
                let _ = writeln!(
                    o,
                    "  return-map slope {:.6}, stable {}, isolated {}",
                    m.convergence_rate, m.stable, m.isolated
                );
            }
            None => {
                let _ = writeln!(o, "  no cycle found");
            }
        }
        if let Some(c) = &r.comparison {
            let _ = writeln!(o, "  verdict: {:?}", c.verdict);
            let _ = writeln!(o, "  amplitude error {}, period error {}", opt(c.amplitude_rel_err), opt(c.period_rel_err));
            for n in &c.notes {
                let _ = writeln!(o, "  note: {n}");
            }
        }
    }
    if !r.warnings.is_empty() {
        let _ = writeln!(o, "\nwarnings");
        for w in &r.warnings {
            let _ = writeln!(o, "  - {w}");
        }
    }
    o
}

/// Writes `report.json`, `report.txt`, `predicted_cycle.csv` and `measured_cycle.csv`
/// (the CSVs hold only a header when there is no cycle). Returns the written paths.
pub fn write_analysis(dir: &Path, report: &AnalysisReport) -> Result<Vec<PathBuf>> {
    let io = |path: &Path| {
        let p = path.display().to_string();
        move |source| Error::Io { path: p, source }
    };
    std::fs::create_dir_all(dir).map_err(io(dir))?;
    let files = [
        ("report.json", to_json(report)),
        ("report.txt", render_text(report)),
        ("predicted_cycle.csv", predicted_csv(&report.predicted_curve)),
        (
            "measured_cycle.csv",
            cycle_csv(report.measurement.iter().flat_map(|m| m.orbit.iter().copied())),
        ),
    ];
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(io(&path))?;
        written.push(path);
    }
    Ok(written)
}
