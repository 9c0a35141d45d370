//! End-to-end analysis of one parameter value, and sweeps over a grid of them.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::change_of_vars::{
    psi_phi_residual, reduction_residual, solve_change_of_variables, DegreeChoice, SolveOptions,
    DEFAULT_EXTRA_DEGREES,
};
use crate::definition::SystemDefinition;
use crate::error::{Error, NoSolution, Result};
use crate::inversion::{
    composition_residual_slope, invert_to_cubic, reverse_composition_slope, trust_ball, InverseSeries, SlopeEstimate,
    TrustBall,
};
use crate::kbm::{
    averages, cycle_curve, g_coefficients, predict_cycle, predicted_x1_amplitude, Averages, CyclePoint, Existence,
    KbmPrediction, Variant,
};
use crate::matrix::{Mat, Solver};
use crate::oracle::{compare, measure_cycle, ComparisonReport, CycleMeasurement, MeasureOptions, Tolerances};
use crate::scalar::{Rational, Scalar};
use crate::system::{HopfIndicator, PlanarPolySystem, DEFAULT_TAU_THRESHOLD};

/// Environment variable holding the worker count for sweeps.
pub const THREADS_ENV: &str = "HOPF_KBM_THREADS";

/// Relative change of `p₃` between `τ` and `τ/2` above which a warning is issued.
pub const RICHARDSON_WARN: f64 = 0.1;

/// Relative gap between the two amplitude formulas above which a warning is issued.
pub const VARIANT_WARN: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Arithmetic {
    #[default]
    Exact,
    Float,
}

impl fmt::Display for Arithmetic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arithmetic::Exact => "exact",
            Arithmetic::Float => "float",
        })
    }
}

impl FromStr for Arithmetic {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Arithmetic::Exact),
            "float" => Ok(Arithmetic::Float),
            _ => Err(Error::InvalidArgument(format!("unknown arithmetic {s:?}; expected exact or float"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyzeOptions {
    pub degree: DegreeChoice,
    pub extra_degrees: usize,
    pub arithmetic: Arithmetic,
    pub variant: Variant,
    pub verify: bool,
    /// Re-solve at `τ/2` to gauge how far `p₃(τ)` is from its limit.
    pub richardson: bool,
    pub tolerances: Tolerances,
    pub measure: MeasureOptions,
    pub tau_threshold: f64,
    pub curve_samples: usize,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        Self {
            degree: DegreeChoice::Auto,
            extra_degrees: DEFAULT_EXTRA_DEGREES,
            arithmetic: Arithmetic::Exact,
            variant: Variant::default(),
            verify: true,
            richardson: true,
            tolerances: Tolerances::default(),
            measure: MeasureOptions::default(),
            tau_threshold: DEFAULT_TAU_THRESHOLD,
            curve_samples: 256,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptionsEcho {
    pub degree: String,
    pub arithmetic: Arithmetic,
    pub variant: Variant,
    pub verify: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputEcho {
    pub jacobian: Vec<Vec<f64>>,
    pub phi: BTreeMap<String, Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CovSummary {
    pub m: usize,
    pub gamma_params: [f64; 2],
    pub gamma: Vec<Vec<f64>>,
    pub theta_norms: Vec<f64>,
    /// Largest coefficient of `d/dt(Π₁H) - Π₂H`; exactly zero in exact arithmetic.
    pub reduction_residual: f64,
    pub psi_phi_residual: f64,
    pub failed_degrees: Vec<NoSolution>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InversionSummary {
    pub xi2: Vec<Vec<f64>>,
    pub xi3: Vec<Vec<f64>>,
    pub composition_slope: SlopeEstimate,
    pub reverse_slope: SlopeEstimate,
    pub trust_ball: TrustBall,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GSummary {
    pub g2: Vec<f64>,
    pub g3: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RichardsonCheck {
    pub tau_half: f64,
    pub p3_half_tau: f64,
    /// `2 p₃(τ/2) - p₃(τ)`, a first-order estimate of `p₃(0)`.
    pub extrapolated_p3: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantValues {
    pub r0: Option<f64>,
    pub omega0: Option<f64>,
    pub z_amplitude: Option<f64>,
    pub x1_amplitude: Option<f64>,
    pub period: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariantTable {
    pub paper: VariantValues,
    pub rederived: VariantValues,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub system: String,
    pub alpha: f64,
    pub alpha_exact: String,
    pub options: OptionsEcho,
    pub input: InputEcho,
    pub nonlinear_degree: usize,
    pub hopf: HopfIndicator,
    pub change_of_variables: Option<CovSummary>,
    /// Rank report when no admissible change of variables was found.
    pub failure: Option<NoSolution>,
    pub inversion: Option<InversionSummary>,
    pub g: Option<GSummary>,
    pub averages: Option<Averages>,
    pub richardson: Option<RichardsonCheck>,
    pub variants: Option<VariantTable>,
    pub prediction: Option<KbmPrediction>,
    /// `max |x1|` of the predicted cycle in original coordinates.
    pub predicted_amplitude: Option<f64>,
    pub measurement: Option<CycleMeasurement>,
    pub comparison: Option<ComparisonReport>,
    pub warnings: Vec<String>,
    #[serde(skip)]
    pub predicted_curve: Vec<CyclePoint>,
}

struct Stages {
    summary: CovSummary,
    inv: InverseSeries<f64>,
    inversion: InversionSummary,
    g: GSummary,
    averages: Averages,
}

fn solve_stages<T: Solver>(
    system: &PlanarPolySystem<T>,
    options: &AnalyzeOptions,
) -> Result<std::result::Result<Stages, NoSolution>> {
    let solve = SolveOptions { degree: options.degree, extra_degrees: options.extra_degrees };
    let solved = match solve_change_of_variables(system, &solve) {
        Ok(s) => s,
        Err(Error::NoSolution(report)) => return Ok(Err(report)),
        Err(e) => return Err(e),
    };
    let cov = solved.cov;
    let summary = CovSummary {
        m: cov.m,
        gamma_params: [cov.gamma_params.0.to_f64(), cov.gamma_params.1.to_f64()],
        gamma: cov.gamma.to_nested_f64(),
        theta_norms: cov.theta_norms(),
        reduction_residual: reduction_residual(&cov, system),
        psi_phi_residual: psi_phi_residual(&cov, system),
        failed_degrees: solved.failures,
    };
    let inv = invert_to_cubic(&cov)?;
    let inv_f = inv.to_f64();
    let inversion = InversionSummary {
        xi2: inv.xi2.to_nested_f64(),
        xi3: inv.xi3.to_nested_f64(),
        composition_slope: composition_residual_slope(&cov, &inv),
        reverse_slope: reverse_composition_slope(&cov, &inv),
        trust_ball: trust_ball(&cov.to_f64(), &inv_f),
    };
    let g = g_coefficients(system, &cov, &inv)?;
    let averages = averages(&g.g3, &system.delta());
    let g = g.to_f64();
    Ok(Ok(Stages {
        summary,
        inv: inv_f,
        inversion,
        g: GSummary { g2: g.g2, g3: g.g3 },
        averages,
    }))
}

fn stages_for(system: &PlanarPolySystem<Rational>, options: &AnalyzeOptions) -> Result<std::result::Result<Stages, NoSolution>> {
    match options.arithmetic {
        Arithmetic::Exact => solve_stages(system, options),
        Arithmetic::Float => solve_stages(&system.to_f64(), options),
    }
}

fn variant_values(prediction: &KbmPrediction, gamma_inv: &Mat<f64>) -> VariantValues {
    VariantValues {
        r0: prediction.r0,
        omega0: prediction.omega0,
        z_amplitude: prediction.z_amplitude,
        x1_amplitude: predicted_x1_amplitude(gamma_inv, prediction),
        period: prediction.period,
    }
}

/// Starting point for the return-map search.
fn seed_radius(predicted: Option<f64>, tau: f64) -> f64 {
    match predicted {
        Some(a) if a.is_finite() && a > 0.0 => a,
        _ => tau.abs().sqrt().clamp(0.05, 1.0),
    }
}

/// Runs the full pipeline on one system instance.
pub fn analyze_system(
    name: &str,
    alpha: &Rational,
    system: &PlanarPolySystem<Rational>,
    options: &AnalyzeOptions,
) -> Result<AnalysisReport> {
    let hopf = system.hopf_indicator(options.tau_threshold);
    if !hopf.delta_positive {
        return Err(Error::NonPositiveDeterminant(hopf.delta));
    }
    let mut warnings = Vec::new();
    if !hopf.complex_pair {
        warnings.push(format!("eigenvalues are real (tau^2 - 4 delta = {}); no oscillation at the origin", hopf.discriminant));
    }
    if !hopf.near_critical {
        warnings.push(format!(
            "|tau| = {} is not below {}; the small-amplitude expansion may be inaccurate",
            hopf.tau.abs(),
            options.tau_threshold
        ));
    }
    let mut phi = BTreeMap::new();
    for k in 2..=system.degree() {
        phi.insert(k.to_string(), system.phi_or_zero(k).to_nested_f64());
    }
    let mut report = AnalysisReport {
        system: name.to_string(),
        alpha: alpha.to_f64(),
        alpha_exact: alpha.to_string(),
        options: OptionsEcho {
            degree: match options.degree {
                DegreeChoice::Auto => "auto".into(),
                DegreeChoice::Fixed(m) => m.to_string(),
            },
            arithmetic: options.arithmetic,
            variant: options.variant,
            verify: options.verify,
        },
        input: InputEcho { jacobian: system.jacobian().to_nested_f64(), phi },
        nonlinear_degree: system.degree(),
        hopf,
        change_of_variables: None,
        failure: None,
        inversion: None,
        g: None,
        averages: None,
        richardson: None,
        variants: None,
        prediction: None,
        predicted_amplitude: None,
        measurement: None,
        comparison: None,
        warnings,
        predicted_curve: Vec::new(),
    };

    let stages = match stages_for(system, options)? {
        Ok(s) => s,
        Err(failure) => {
            report.warnings.push(format!(
                "no change of variables up to degree {}: rank {} of {} unknowns",
                failure.m, failure.rank, failure.unknowns
            ));
            report.failure = Some(failure);
            return Ok(report);
        }
    };
    let Stages { summary, inv, inversion, g, averages: avg } = stages;
    let gamma_inv = inv.gamma_inv.clone();

    let (tau, delta) = (hopf.tau, hopf.delta);
    let chosen = predict_cycle(tau, delta, avg.p3, avg.q3, options.variant)?;
    let paper = predict_cycle(tau, delta, avg.p3, avg.q3, Variant::Paper)?;
    let rederived = predict_cycle(tau, delta, avg.p3, avg.q3, Variant::Rederived)?;
    let table = VariantTable { paper: variant_values(&paper, &gamma_inv), rederived: variant_values(&rederived, &gamma_inv) };
    if let (Some(a), Some(b)) = (table.paper.x1_amplitude, table.rederived.x1_amplitude) {
        if (a - b).abs() > VARIANT_WARN * b {
            report.warnings.push(format!(
                "amplitude formulas disagree: paper variant {a:.6e}, rederived variant {b:.6e} (delta = {delta}); using {}",
                options.variant
            ));
        }
    }
    if chosen.existence == Existence::Undetermined {
        report.warnings.push("p3 = 0: first-order averaging cannot decide whether a cycle exists".into());
    }

    let predicted_amplitude = predicted_x1_amplitude(&gamma_inv, &chosen);
    if chosen.exists {
        report.predicted_curve = cycle_curve(&gamma_inv, &chosen, options.curve_samples.max(1))?;
        if let (Some(amp), Some(freq)) = (chosen.z_amplitude, chosen.angular_frequency) {
            let reach = amp * freq.abs().max(1.0);
            if !inversion.trust_ball.unbounded && reach > inversion.trust_ball.radius {
                report.warnings.push(format!(
                    "predicted cycle reaches |Y| = {reach:.4e}, beyond the trust radius {:.4e} of the truncated inverse",
                    inversion.trust_ball.radius
                ));
            }
        }
    }

    if options.richardson && avg.p3 != 0.0 && tau != 0.0 {
        let shift = system.tau() / Rational::from_i64(4);
        let half = system.diagonal_shift(&shift);
        if half.delta() > Rational::from_i64(0) {
            let mut quick = *options;
            quick.richardson = false;
            if let Ok(Ok(s)) = stages_for(&half, &quick) {
                let p_half = s.averages.p3;
                let change = (p_half - avg.p3).abs() / avg.p3.abs();
                if change > RICHARDSON_WARN {
                    report.warnings.push(format!(
                        "p3 changes by {:.1}% between tau and tau/2; the limit p3(0) is poorly approximated",
                        100.0 * change
                    ));
                }
                report.richardson = Some(RichardsonCheck {
                    tau_half: half.tau().to_f64(),
                    p3_half_tau: p_half,
                    extrapolated_p3: 2.0 * p_half - avg.p3,
                    relative_change: change,
                });
            }
        }
    }

    if options.verify {
        let sys_f = system.to_f64();
        let seed = seed_radius(predicted_amplitude, tau);
        let measurement = measure_cycle(&sys_f, seed, &options.measure)?;
        let comparison = compare(&chosen, predicted_amplitude, measurement.as_ref(), options.tolerances);
        report.measurement = measurement;
        report.comparison = Some(comparison);
    }

    report.change_of_variables = Some(summary);
    report.inversion = Some(inversion);
    report.g = Some(g);
    report.averages = Some(avg);
    report.variants = Some(table);
    report.prediction = Some(chosen);
    report.predicted_amplitude = predicted_amplitude;
    Ok(report)
}

/// Instantiates the definition at `alpha` and analyzes it.
pub fn run_analyze(definition: &SystemDefinition, alpha: &Rational, options: &AnalyzeOptions) -> Result<AnalysisReport> {
    let system = definition.instantiate(alpha)?;
    analyze_system(&definition.name, alpha, &system, options)
}

/// `steps` equally spaced values from `from` to `to`, both ends included.
pub fn alpha_grid(from: &Rational, to: &Rational, steps: usize) -> Result<Vec<Rational>> {
    match steps {
        0 => Err(Error::InvalidArgument("a sweep needs at least one step".into())),
        1 => Ok(vec![from.clone()]),
        _ => {
            let width = (to.clone() - from.clone()) / Rational::from_i64(steps as i64 - 1);
            Ok((0..steps).map(|i| from.clone() + width.clone() * Rational::from_i64(i as i64)).collect())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub alpha: f64,
    pub report: Option<AnalysisReport>,
    pub error: Option<String>,
}

impl SweepRow {
    /// `alpha,tau,p3,q3,predicted_amplitude,measured_amplitude,rel_err`, empty fields for missing values.
    pub fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        let r = self.report.as_ref();
        let fields = [
            self.alpha.to_string(),
            opt(r.map(|r| r.hopf.tau)),
            opt(r.and_then(|r| r.averages.map(|a| a.p3))),
            opt(r.and_then(|r| r.averages.map(|a| a.q3))),
            opt(r.and_then(|r| r.predicted_amplitude)),
            opt(r.and_then(|r| r.measurement.as_ref().map(|m| m.amplitude))),
            opt(r.and_then(|r| r.comparison.as_ref().and_then(|c| c.amplitude_rel_err))),
        ];
        fields.join(",")
    }
}

pub const SWEEP_CSV_HEADER: &str = "alpha,tau,p3,q3,predicted_amplitude,measured_amplitude,rel_err";

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.csv_line());
        out.push('\n');
    }
    out
}

/// Worker count from [`THREADS_ENV`], if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var(THREADS_ENV).ok()?.trim().parse().ok().filter(|&n| n > 0)
}

/// Analyzes every grid point; a failing row records its error and the sweep continues.
/// Rows come back in grid order.
pub fn run_sweep(
    definition: &SystemDefinition,
    grid: &[Rational],
    options: &AnalyzeOptions,
    threads: Option<usize>,
) -> Result<Vec<SweepRow>> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty alpha grid".into()));
    }
    let work = || {
        grid.par_iter()
            .map(|alpha| match run_analyze(definition, alpha, options) {
                Ok(report) => SweepRow { alpha: alpha.to_f64(), report: Some(report), error: None },
                Err(e) => SweepRow { alpha: alpha.to_f64(), report: None, error: Some(e.to_string()) },
            })
            .collect()
    };
    match threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
            Ok(pool.install(work))
        }
        None => Ok(work()),
    }
}
