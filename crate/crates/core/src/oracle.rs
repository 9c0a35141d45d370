//! Numerical ground truth: integration of the planar system, limit-cycle
//! measurement through a Poincaré return map, and comparison with the prediction.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::kbm::{Existence, KbmPrediction, Stability};
use crate::system::PlanarPolySystem;

type State = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "method", rename_all = "lowercase")]
pub enum Method {
    /// Classical fixed-step Runge-Kutta.
    Rk4 { step: f64 },
    /// Adaptive Dormand-Prince 5(4) with dense output.
    Rk45 { atol: f64, rtol: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Controls {
    pub method: Method,
    /// Integration stops once `|X|` exceeds this.
    pub blowup_bound: f64,
    pub max_steps: usize,
}

impl Default for Controls {
    fn default() -> Self {
        Self { method: Method::Rk45 { atol: 1e-10, rtol: 1e-10 }, blowup_bound: 1e3, max_steps: 10_000_000 }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct IntegratorStats {
    pub steps: usize,
    pub rejected: usize,
    /// Largest scaled error estimate of an accepted step (at most 1 for rk45).
    pub max_error_estimate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub stats: IntegratorStats,
    /// The norm bound was exceeded and the trajectory was cut short.
    pub blew_up: bool,
}

impl Trajectory {
    pub fn last(&self) -> State {
        *self.states.last().expect("trajectory holds its initial state")
    }
}

fn norm(x: State) -> f64 {
    x[0].hypot(x[1])
}

fn axpy(y: State, h: f64, k: State) -> State {
    [y[0] + h * k[0], y[1] + h * k[1]]
}

/// One accepted Dormand-Prince step with its continuous extension.
#[derive(Debug, Clone, Copy)]
struct Segment {
    t0: f64,
    h: f64,
    y1: State,
    rcont: [State; 5],
}

impl Segment {
    fn eval(&self, theta: f64) -> State {
        let th1 = 1.0 - theta;
        let r = &self.rcont;
        let mut out = [0.0; 2];
        for i in 0..2 {
            out[i] = r[0][i] + theta * (r[1][i] + th1 * (r[2][i] + theta * (r[3][i] + th1 * r[4][i])));
        }
        out
    }

    fn at(&self, t: f64) -> State {
        self.eval((t - self.t0) / self.h)
    }

    fn t1(&self) -> f64 {
        self.t0 + self.h
    }
}

mod dp {
    pub const A21: f64 = 1.0 / 5.0;
    pub const A31: f64 = 3.0 / 40.0;
    pub const A32: f64 = 9.0 / 40.0;
    pub const A41: f64 = 44.0 / 45.0;
    pub const A42: f64 = -56.0 / 15.0;
    pub const A43: f64 = 32.0 / 9.0;
    pub const A51: f64 = 19372.0 / 6561.0;
    pub const A52: f64 = -25360.0 / 2187.0;
    pub const A53: f64 = 64448.0 / 6561.0;
    pub const A54: f64 = -212.0 / 729.0;
    pub const A61: f64 = 9017.0 / 3168.0;
    pub const A62: f64 = -355.0 / 33.0;
    pub const A63: f64 = 46732.0 / 5247.0;
    pub const A64: f64 = 49.0 / 176.0;
    pub const A65: f64 = -5103.0 / 18656.0;
    pub const A71: f64 = 35.0 / 384.0;
    pub const A73: f64 = 500.0 / 1113.0;
    pub const A74: f64 = 125.0 / 192.0;
    pub const A75: f64 = -2187.0 / 6784.0;
    pub const A76: f64 = 11.0 / 84.0;
    pub const E1: f64 = 71.0 / 57600.0;
    pub const E3: f64 = -71.0 / 16695.0;
    pub const E4: f64 = 71.0 / 1920.0;
    pub const E5: f64 = -17253.0 / 339200.0;
    pub const E6: f64 = 22.0 / 525.0;
    pub const E7: f64 = -1.0 / 40.0;
    pub const D1: f64 = -12715105075.0 / 11282082432.0;
    pub const D3: f64 = 87487479700.0 / 32700410799.0;
    pub const D4: f64 = -10690763975.0 / 1880347072.0;
    pub const D5: f64 = 701980252875.0 / 199316789632.0;
    pub const D6: f64 = -1453857185.0 / 822651844.0;
    pub const D7: f64 = 69997945.0 / 29380423.0;
}

/// Adaptive Dormand-Prince 5(4) stepper on an autonomous planar field.
struct Dopri<'a> {
    f: &'a dyn Fn(State) -> State,
    t: f64,
    y: State,
    k1: State,
    h: f64,
    atol: f64,
    rtol: f64,
    stats: IntegratorStats,
}

impl<'a> Dopri<'a> {
    fn new(f: &'a dyn Fn(State) -> State, y0: State, atol: f64, rtol: f64) -> Self {
        let k1 = f(y0);
        let scale = |i: usize| atol + rtol * y0[i].abs();
        let d0 = ((y0[0] / scale(0)).powi(2) + (y0[1] / scale(1)).powi(2)).sqrt() / 2f64.sqrt();
        let d1 = ((k1[0] / scale(0)).powi(2) + (k1[1] / scale(1)).powi(2)).sqrt() / 2f64.sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        Self { f, t: 0.0, y: y0, k1, h: h.min(0.1), atol, rtol, stats: IntegratorStats::default() }
    }

    /// Takes one accepted step, never stepping past `t_max`.
    fn step(&mut self, t_max: f64) -> Option<Segment> {
        use dp::*;
        let f = self.f;
        let y = self.y;
        let k1 = self.k1;
        loop {
            let mut h = self.h;
            if self.t + h > t_max {
                h = t_max - self.t;
            }
            if h <= 1e-14 * self.t.abs().max(1.0) {
                return None;
            }
            let k2 = f(axpy(y, h * A21, k1));
            let k3 = f([y[0] + h * (A31 * k1[0] + A32 * k2[0]), y[1] + h * (A31 * k1[1] + A32 * k2[1])]);
            let k4 = f([
                y[0] + h * (A41 * k1[0] + A42 * k2[0] + A43 * k3[0]),
                y[1] + h * (A41 * k1[1] + A42 * k2[1] + A43 * k3[1]),
            ]);
            let k5 = f([
                y[0] + h * (A51 * k1[0] + A52 * k2[0] + A53 * k3[0] + A54 * k4[0]),
                y[1] + h * (A51 * k1[1] + A52 * k2[1] + A53 * k3[1] + A54 * k4[1]),
            ]);
            let k6 = f([
                y[0] + h * (A61 * k1[0] + A62 * k2[0] + A63 * k3[0] + A64 * k4[0] + A65 * k5[0]),
                y[1] + h * (A61 * k1[1] + A62 * k2[1] + A63 * k3[1] + A64 * k4[1] + A65 * k5[1]),
            ]);
            let y1 = [
                y[0] + h * (A71 * k1[0] + A73 * k3[0] + A74 * k4[0] + A75 * k5[0] + A76 * k6[0]),
                y[1] + h * (A71 * k1[1] + A73 * k3[1] + A74 * k4[1] + A75 * k5[1] + A76 * k6[1]),
            ];
            let k7 = f(y1);
            let mut err = 0.0;
            for i in 0..2 {
                let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
                let sc = self.atol + self.rtol * y[i].abs().max(y1[i].abs());
                err += (e / sc).powi(2);
            }
            let err = (err / 2.0).sqrt();
            if !err.is_finite() {
                self.h = h * 0.1;
                self.stats.rejected += 1;
                continue;
            }
            let fac = (0.9 * err.powf(-0.2)).clamp(0.2, 5.0);
            if err > 1.0 {
                self.h = h * fac.min(1.0);
                self.stats.rejected += 1;
                continue;
            }
            let mut rcont = [[0.0; 2]; 5];
            for i in 0..2 {
                let dy = y1[i] - y[i];
                let bspl = h * k1[i] - dy;
                rcont[0][i] = y[i];
                rcont[1][i] = dy;
                rcont[2][i] = bspl;
                rcont[3][i] = dy - h * k7[i] - bspl;
                rcont[4][i] = h * (D1 * k1[i] + D3 * k3[i] + D4 * k4[i] + D5 * k5[i] + D6 * k6[i] + D7 * k7[i]);
            }
            let seg = Segment { t0: self.t, h, y1, rcont };
            self.t += h;
            self.y = y1;
            self.k1 = k7;
            self.h = h * fac;
            self.stats.steps += 1;
            self.stats.max_error_estimate = self.stats.max_error_estimate.max(err);
            return Some(seg);
        }
    }
}

fn rk4_step(f: &dyn Fn(State) -> State, y: State, h: f64) -> State {
    let k1 = f(y);
    let k2 = f(axpy(y, h / 2.0, k1));
    let k3 = f(axpy(y, h / 2.0, k2));
    let k4 = f(axpy(y, h, k3));
    [
        (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]) * h / 6.0,
        (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]) * h / 6.0,
    ]
}

/// Integrates `X' = F(X)` from `x0` over `[0, t_end]`, recording every step.
pub fn integrate(system: &PlanarPolySystem<f64>, x0: State, t_end: f64, controls: &Controls) -> Result<Trajectory> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    if !(x0[0].is_finite() && x0[1].is_finite()) {
        return Err(Error::InvalidArgument("initial state must be finite".into()));
    }
    let f = |x: State| system.rhs(x);
    let mut traj = Trajectory { times: vec![0.0], states: vec![x0], stats: IntegratorStats::default(), blew_up: false };
    match controls.method {
        Method::Rk4 { step } => {
            if !(step > 0.0) {
                return Err(Error::InvalidArgument(format!("rk4 step must be positive, got {step}")));
            }
            let n = (t_end / step).round().max(1.0) as usize;
            let h = t_end / n as f64;
            let mut y = x0;
            // compensated summation keeps round-off below the truncation error at small h
            let mut carry = [0.0; 2];
            for i in 1..=n {
                let inc = rk4_step(&f, y, h);
                for c in 0..2 {
                    let d = inc[c] - carry[c];
                    let s = y[c] + d;
                    carry[c] = (s - y[c]) - d;
                    y[c] = s;
                }
                traj.times.push(i as f64 * h);
                traj.states.push(y);
                traj.stats.steps += 1;
                if !(norm(y) <= controls.blowup_bound) {
                    traj.blew_up = true;
                    break;
                }
            }
        }
        Method::Rk45 { atol, rtol } => {
            let mut stepper = Dopri::new(&f, x0, atol, rtol);
            while stepper.t < t_end {
                if stepper.stats.steps >= controls.max_steps {
                    return Err(Error::InvalidArgument(format!("step budget {} exhausted", controls.max_steps)));
                }
                let Some(seg) = stepper.step(t_end) else { break };
                traj.times.push(seg.t1());
                traj.states.push(seg.y1);
                if !(norm(seg.y1) <= controls.blowup_bound) {
                    traj.blew_up = true;
                    break;
                }
            }
            traj.stats = stepper.stats;
        }
    }
    Ok(traj)
}

/// A Poincaré section: one coordinate vanishes while the other is positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Section {
    /// `x2 = 0, x1 > 0`.
    PositiveX1,
    /// `x1 = 0, x2 > 0`.
    PositiveX2,
}

impl Section {
    fn normal(self) -> usize {
        match self {
            Section::PositiveX1 => 1,
            Section::PositiveX2 => 0,
        }
    }

    fn point(self, s: f64) -> State {
        match self {
            Section::PositiveX1 => [s, 0.0],
            Section::PositiveX2 => [0.0, s],
        }
    }

    fn coordinate(self, x: State) -> f64 {
        x[1 - self.normal()]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Return {
    Hit { s: f64, t: f64 },
    Escaped,
    Lost,
}

/// Options for [`measure_cycle`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeasureOptions {
    pub controls: Controls,
    /// Relative tolerance on the fixed point of the return map.
    pub fixed_point_tol: f64,
    /// Return-map evaluations allowed in the root search.
    pub max_evaluations: usize,
    /// The search for a sign change of `P(s) - s` covers `seed · factor^±k`.
    pub search_factor: f64,
    pub search_steps: usize,
    /// Uniform samples of the measured orbit.
    pub orbit_samples: usize,
    /// `|slope - 1|` below this means the cycle is not isolated.
    pub isolation_tol: f64,
}

impl Default for MeasureOptions {
    fn default() -> Self {
        Self {
            controls: Controls::default(),
            fixed_point_tol: 1e-8,
            max_evaluations: 200,
            search_factor: 1.5,
            search_steps: 8,
            orbit_samples: 256,
            isolation_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleMeasurement {
    /// `max |x1|` over the cycle.
    pub amplitude: f64,
    /// Root mean square of `|X|` over one period, uniform in time.
    pub radius_rms: f64,
    pub period: f64,
    pub stable: bool,
    /// Slope of the return map at the fixed point.
    pub convergence_rate: f64,
    /// The return map is not the identity near the fixed point.
    pub isolated: bool,
    pub section: Section,
    /// Section coordinate of the fixed point.
    pub crossing: f64,
    pub return_map_evaluations: usize,
    #[serde(skip)]
    pub orbit: Vec<(f64, f64, f64)>,
}

struct ReturnMap<'a> {
    f: &'a dyn Fn(State) -> State,
    section: Section,
    direction: f64,
    atol: f64,
    rtol: f64,
    max_time: f64,
    bound: f64,
    evaluations: usize,
}

impl ReturnMap<'_> {
    /// Follows the orbit from the section point `s` to its next crossing in the
    /// same direction. `visit` sees every accepted segment up to the crossing.
    fn run(&mut self, s: f64, mut visit: impl FnMut(&Segment, f64)) -> Return {
        self.evaluations += 1;
        let c = self.section.normal();
        let f = self.f;
        let mut stepper = Dopri::new(f, self.section.point(s), self.atol, self.rtol);
        let floor = 1e-9 * s.abs();
        while let Some(seg) = stepper.step(self.max_time) {
            let a = seg.rcont[0][c] * self.direction;
            let b = seg.y1[c] * self.direction;
            if !(norm(seg.y1) <= self.bound) {
                return Return::Escaped;
            }
            if norm(seg.y1) < floor {
                return Return::Lost;
            }
            if a < 0.0 && b >= 0.0 {
                let (mut lo, mut hi) = (0.0, 1.0);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if seg.eval(mid)[c] * self.direction < 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                let theta = 0.5 * (lo + hi);
                let x = seg.eval(theta);
                let coord = self.section.coordinate(x);
                let t = seg.t0 + theta * seg.h;
                visit(&seg, t);
                if coord > 0.0 {
                    return Return::Hit { s: coord, t };
                }
                continue;
            }
            visit(&seg, seg.t1());
        }
        Return::Lost
    }

    fn map(&mut self, s: f64) -> Return {
        self.run(s, |_, _| {})
    }
}

/// `P(s) - s` classified for the root search: `Some(value)`, or `+∞` on escape.
fn displacement(rm: &mut ReturnMap, s: f64) -> Option<f64> {
    match rm.map(s) {
        Return::Hit { s: p, .. } => Some(p - s),
        Return::Escaped => Some(f64::INFINITY),
        Return::Lost => None,
    }
}

fn choose_section(system: &PlanarPolySystem<f64>, seed: f64) -> Option<(Section, f64)> {
    for section in [Section::PositiveX1, Section::PositiveX2] {
        let x = section.point(seed);
        let v = system.rhs(x)[section.normal()];
        if v.abs() > 1e-9 * seed.max(1e-300) * system.jacobian().max_abs().max(1.0) {
            return Some((section, v.signum()));
        }
    }
    None
}

/// Locates a limit cycle near `seed_radius` and measures it.
///
/// Returns `Ok(None)` when the return map has no fixed point in the searched
/// range (for instance when every orbit decays to the origin).
pub fn measure_cycle(
    system: &PlanarPolySystem<f64>,
    seed_radius: f64,
    options: &MeasureOptions,
) -> Result<Option<CycleMeasurement>> {
    if !(seed_radius > 0.0 && seed_radius.is_finite()) {
        return Err(Error::InvalidArgument(format!("seed radius must be positive, got {seed_radius}")));
    }
    let Method::Rk45 { atol, rtol } = options.controls.method else {
        return Err(Error::InvalidArgument("cycle measurement needs the adaptive integrator".into()));
    };
    let Some((section, direction)) = choose_section(system, seed_radius) else {
        return Err(Error::Measurement(format!(
            "the flow is tangent to both sections at distance {seed_radius} from the origin"
        )));
    };
    let delta = system.delta();
    let linear_period = if delta > 0.0 { 2.0 * std::f64::consts::PI / delta.sqrt() } else { 2.0 * std::f64::consts::PI };
    let f = |x: State| system.rhs(x);
    let mut rm = ReturnMap {
        f: &f,
        section,
        direction,
        atol,
        rtol,
        max_time: 50.0 * linear_period,
        bound: options.controls.blowup_bound,
        evaluations: 0,
    };

    let tol = options.fixed_point_tol;
    let Some(g0) = displacement(&mut rm, seed_radius) else { return Ok(None) };
    let root = if g0.abs() < tol * seed_radius {
        Some(seed_radius)
    } else {
        bracket_and_solve(&mut rm, seed_radius, g0, options)
    };
    let Some(s_star) = root else { return Ok(None) };

    let h = 1e-2 * s_star;
    let (Return::Hit { s: up, .. }, Return::Hit { s: down, .. }) = (rm.map(s_star + h), rm.map(s_star - h)) else {
        return Ok(None);
    };
    let slope = (up - down) / (2.0 * h);

    let mut segments = Vec::new();
    let mut period = 0.0;
    if let Return::Hit { t, .. } = rm.run(s_star, |seg, _| segments.push(*seg)) {
        period = t;
    }
    if !(period > 0.0) || segments.is_empty() {
        return Ok(None);
    }

    let amplitude = segments.iter().map(|seg| max_abs_x1(seg, period)).fold(0.0, f64::max);
    let n = options.orbit_samples.max(1);
    let mut idx = 0;
    let mut orbit = Vec::with_capacity(n);
    let mut sum_sq = 0.0;
    for i in 0..n {
        let t = i as f64 * period / n as f64;
        while idx + 1 < segments.len() && segments[idx].t1() < t {
            idx += 1;
        }
        let x = segments[idx].at(t);
        sum_sq += x[0] * x[0] + x[1] * x[1];
        orbit.push((t, x[0], x[1]));
    }
    Ok(Some(CycleMeasurement {
        amplitude,
        radius_rms: (sum_sq / n as f64).sqrt(),
        period,
        stable: slope.abs() < 1.0,
        convergence_rate: slope,
        isolated: (slope - 1.0).abs() > options.isolation_tol,
        section,
        crossing: s_star,
        return_map_evaluations: rm.evaluations,
        orbit,
    }))
}

/// Max of `|x1|` on the part of a segment before `t_stop`.
fn max_abs_x1(seg: &Segment, t_stop: f64) -> f64 {
    let end = ((t_stop - seg.t0) / seg.h).min(1.0);
    if end <= 0.0 {
        return 0.0;
    }
    const N: usize = 32;
    let val = |th: f64| seg.eval(th)[0].abs();
    let (mut best_th, mut best) = (0.0, val(0.0));
    for i in 1..=N {
        let th = end * i as f64 / N as f64;
        let v = val(th);
        if v > best {
            best = v;
            best_th = th;
        }
    }
    let w = end / N as f64;
    let (mut a, mut b) = ((best_th - w).max(0.0), (best_th + w).min(end));
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        let c = b - inv_phi * (b - a);
        let d = a + inv_phi * (b - a);
        if val(c) > val(d) {
            b = d;
        } else {
            a = c;
        }
    }
    best.max(val(0.5 * (a + b)))
}

/// Searches `seed · factor^k`, nearest first, for a sign change of `P(s) - s`
/// and refines it by bisection with secant steps.
fn bracket_and_solve(rm: &mut ReturnMap, seed: f64, g0: f64, options: &MeasureOptions) -> Option<f64> {
    let factor = options.search_factor;
    let mut bracket = None;
    let (mut out_s, mut out_g) = (seed, g0);
    let (mut in_s, mut in_g) = (seed, g0);
    for _ in 0..options.search_steps {
        if out_g.is_finite() {
            let s = out_s * factor;
            if let Some(g) = displacement(rm, s) {
                if g.signum() != out_g.signum() {
                    bracket = Some((out_s, out_g, s, g));
                    break;
                }
                (out_s, out_g) = (s, g);
            }
        }
        let s = in_s / factor;
        if let Some(g) = displacement(rm, s) {
            if g.signum() != in_g.signum() {
                bracket = Some((s, g, in_s, in_g));
                break;
            }
            (in_s, in_g) = (s, g);
        }
    }
    let (mut lo, mut glo, mut hi, mut ghi) = bracket?;
    while rm.evaluations < options.max_evaluations {
        let mid = if glo.is_finite() && ghi.is_finite() {
            let sec = lo - glo * (hi - lo) / (ghi - glo);
            let inner = lo + 0.05 * (hi - lo)..=hi - 0.05 * (hi - lo);
            if inner.contains(&sec) { sec } else { 0.5 * (lo + hi) }
        } else {
            0.5 * (lo + hi)
        };
        let g = displacement(rm, mid)?;
        if g.abs() < options.fixed_point_tol * mid || (hi - lo) < 1e-12 * mid {
            return Some(mid);
        }
        if g.signum() == glo.signum() {
            (lo, glo) = (mid, g);
        } else {
            (hi, ghi) = (mid, g);
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Tolerances {
    pub amplitude: f64,
    pub period: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { amplitude: 0.05, period: 0.05 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Agreement,
    Disagreement,
    /// No isolated cycle on either side: a center or a non-generic case.
    Degenerate,
    /// The prediction makes no claim, yet an isolated cycle was measured.
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub verdict: Verdict,
    pub passed: bool,
    pub predicted_amplitude: Option<f64>,
    pub measured_amplitude: Option<f64>,
    pub amplitude_rel_err: Option<f64>,
    pub predicted_period: Option<f64>,
    pub measured_period: Option<f64>,
    pub period_rel_err: Option<f64>,
    pub stability_agrees: Option<bool>,
    pub tolerances: Tolerances,
    pub notes: Vec<String>,
}

/// Compares a prediction (with its `max |x1|` amplitude) against a measurement.
pub fn compare(
    prediction: &KbmPrediction,
    predicted_amplitude: Option<f64>,
    measurement: Option<&CycleMeasurement>,
    tolerances: Tolerances,
) -> ComparisonReport {
    let rel = |p: Option<f64>, m: Option<f64>| match (p, m) {
        (Some(p), Some(m)) if m != 0.0 => Some((p - m).abs() / m.abs()),
        _ => None,
    };
    let measured_amplitude = measurement.map(|m| m.amplitude);
    let measured_period = measurement.map(|m| m.period);
    let amplitude_rel_err = rel(predicted_amplitude, measured_amplitude);
    let period_rel_err = rel(prediction.period, measured_period);
    let stability_agrees = match (prediction.stability, measurement) {
        (Stability::Undetermined, _) | (_, None) => None,
        (s, Some(m)) => Some((s == Stability::StableSupercritical) == m.stable),
    };
    let isolated = measurement.filter(|m| m.isolated);
    let mut notes = Vec::new();
    let verdict = match (prediction.existence, isolated, measurement) {
        (Existence::Undetermined, None, _) => Verdict::Degenerate,
        (Existence::Undetermined, Some(_), _) => {
            notes.push("p3 = 0: the averaged cubic term does not decide existence".into());
            Verdict::Inconclusive
        }
        (_, None, Some(_)) => {
            notes.push("periodic orbit found but the return map is the identity: no isolated cycle".into());
            Verdict::Degenerate
        }
        (Existence::SignMismatch, None, None) => Verdict::Agreement,
        (Existence::SignMismatch, Some(_), _) => {
            notes.push("no cycle predicted but an isolated cycle was measured".into());
            Verdict::Disagreement
        }
        (Existence::Exists, None, _) => {
            notes.push("cycle predicted but none was found".into());
            Verdict::Disagreement
        }
        (Existence::Exists, Some(_), _) => {
            let amp_ok = amplitude_rel_err.is_some_and(|e| e <= tolerances.amplitude);
            let per_ok = period_rel_err.is_some_and(|e| e <= tolerances.period);
            if !amp_ok {
                notes.push("amplitude outside tolerance".into());
            }
            if !per_ok {
                notes.push("period outside tolerance".into());
            }
            if stability_agrees == Some(false) {
                notes.push("stability differs".into());
            }
            if amp_ok && per_ok && stability_agrees != Some(false) {
                Verdict::Agreement
            } else {
                Verdict::Disagreement
            }
        }
    };
    ComparisonReport {
        verdict,
        passed: verdict == Verdict::Agreement,
        predicted_amplitude,
        measured_amplitude,
        amplitude_rel_err,
        predicted_period: prediction.period,
        measured_period,
        period_rel_err,
        stability_agrees,
        tolerances,
        notes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Mat;

    fn center() -> PlanarPolySystem<f64> {
        PlanarPolySystem::build(Mat::from_rows(vec![vec![0.0, -1.0], vec![1.0, 0.0]]), vec![]).unwrap()
    }

    fn normal_form(alpha: f64) -> PlanarPolySystem<f64> {
        PlanarPolySystem::build(
            Mat::from_rows(vec![vec![alpha, -1.0], vec![1.0, alpha]]),
            vec![Mat::zeros(2, 3), Mat::from_rows(vec![vec![-1.0, 0.0, -1.0, 0.0], vec![0.0, -1.0, 0.0, -1.0]])],
        )
        .unwrap()
    }

    #[test]
    fn center_returns_after_one_turn() {
        let tr = integrate(&center(), [1.0, 0.0], 2.0 * std::f64::consts::PI, &Controls::default()).unwrap();
        let y = tr.last();
        assert!((y[0] - 1.0).abs() < 1e-8 && y[1].abs() < 1e-8, "{y:?}");
        assert!(tr.times.windows(2).all(|w| w[1] > w[0]));
        assert!(tr.stats.max_error_estimate <= 1.0);
    }

    #[test]
    fn dense_output_is_accurate() {
        let f = |x: State| [-x[1], x[0]];
        let mut st = Dopri::new(&f, [1.0, 0.0], 1e-10, 1e-10);
        while let Some(seg) = st.step(3.0) {
            for k in 0..=10 {
                let t = seg.t0 + seg.h * k as f64 / 10.0;
                let x = seg.at(t);
                assert!((x[0] - t.cos()).abs() < 1e-8 && (x[1] - t.sin()).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn blow_up_is_flagged() {
        // x' = x²: finite-time blow-up at t = 1 from x = 1
        let s = PlanarPolySystem::build(Mat::zeros(2, 2), vec![Mat::from_rows(vec![vec![1.0, 0.0, 0.0], vec![0.0; 3]])])
            .unwrap();
        let tr = integrate(&s, [1.0, 0.0], 2.0, &Controls::default()).unwrap();
        assert!(tr.blew_up);
        assert!(tr.times.last().unwrap() < &1.0);
    }

    #[test]
    fn bad_arguments() {
        assert!(integrate(&center(), [1.0, 0.0], 0.0, &Controls::default()).is_err());
        assert!(measure_cycle(&center(), -1.0, &MeasureOptions::default()).is_err());
    }

    #[test]
    fn normal_form_cycle() {
        let m = measure_cycle(&normal_form(0.04), 0.1, &MeasureOptions::default()).unwrap().unwrap();
        assert!((m.amplitude - 0.2).abs() < 1e-6, "{m:?}");
        assert!((m.period - 2.0 * std::f64::consts::PI).abs() < 1e-6);
        assert!((m.radius_rms - 0.2).abs() < 1e-6);
        assert!(m.stable && m.isolated);
        assert_eq!(m.orbit.len(), 256);
    }

    #[test]
    fn decaying_focus_has_no_cycle() {
        assert!(measure_cycle(&normal_form(-0.04), 0.1, &MeasureOptions::default()).unwrap().is_none());
    }

    #[test]
    fn center_is_not_isolated() {
        let m = measure_cycle(&center(), 0.3, &MeasureOptions::default()).unwrap().unwrap();
        assert!(!m.isolated);
        assert!((m.amplitude - 0.3).abs() < 1e-8);
    }
}
