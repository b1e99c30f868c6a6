//! Closed-form Bell value of the star, angle optimization, critical visibilities and sweeps.
//!
//! All three branches measure the same pair of observables (θ₀, φ₀) and (θ₁, φ₁), and all
//! sources share one visibility v. The value studied is I₁.

use std::fmt::Write as _;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{domain, Result};
use crate::qsim::{simulate_star_factorized, StarStrategy};
use crate::witness::{builtin_fnn_star, CorrelatorPolynomial};

pub const DEFAULT_RESOLUTION: f64 = 0.02;
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
pub const DEFAULT_BISECTION_TOLERANCE: f64 = 1e-6;
/// Optima whose values differ by less than this are reported as equivalent.
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-6;
/// Coarsest step used for the two azimuthal angles when they are searched.
pub const PHI_RESOLUTION: f64 = std::f64::consts::PI / 8.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Closed-form expression; only valid for φ₀ = φ₁ = 0.
    ClosedForm,
    /// Born rule on the simulated network.
    Simulation,
}

/// I₁ for φ = 0 and equal visibilities v:
/// (v²/4)(v sinθ₀(sin²θ₁ − 2 sinθ₀ sinθ₁ − sin²θ₀) − 2 cosθ₀ cosθ₁ − cos²θ₀ + cos²θ₁) − 1/2.
pub fn closed_form_value(theta0: f64, theta1: f64, v: f64) -> Result<f64> {
    check_visibility(v)?;
    let (s0, c0) = theta0.sin_cos();
    let (s1, c1) = theta1.sin_cos();
    let bracket = v * s0 * (s1 * s1 - 2.0 * s0 * s1 - s0 * s0) - 2.0 * c0 * c1 - c0 * c0 + c1 * c1;
    Ok(v * v / 4.0 * bracket - 0.5)
}

fn check_visibility(v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(domain(format!("visibility {v} outside [0, 1]")));
    }
    Ok(())
}

fn i1() -> &'static CorrelatorPolynomial {
    static I1: OnceLock<CorrelatorPolynomial> = OnceLock::new();
    I1.get_or_init(|| builtin_fnn_star(1).expect("I1 is built in"))
}

/// Measurement angles shared by every branch, in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Angles {
    pub theta0: f64,
    pub theta1: f64,
    pub phi0: f64,
    pub phi1: f64,
}

impl Angles {
    pub fn new(theta0: f64, theta1: f64) -> Self {
        Self { theta0, theta1, phi0: 0.0, phi1: 0.0 }
    }

    pub fn with_phi(self, phi0: f64, phi1: f64) -> Self {
        Self { phi0, phi1, ..self }
    }

    pub fn strategy(&self, v: f64) -> StarStrategy {
        StarStrategy::new(self.theta0, self.theta1).with_phi(self.phi0, self.phi1).with_visibility(v)
    }

    fn as_array(&self) -> [f64; 4] {
        [self.theta0, self.theta1, self.phi0, self.phi1]
    }

    fn from_array(a: [f64; 4]) -> Self {
        Self { theta0: a[0], theta1: a[1], phi0: a[2], phi1: a[3] }
    }
}

/// I₁ at the given angles and common visibility.
pub fn witness_value(angles: &Angles, v: f64, backend: Backend) -> Result<f64> {
    check_visibility(v)?;
    match backend {
        Backend::ClosedForm => {
            if angles.phi0 != 0.0 || angles.phi1 != 0.0 {
                return Err(domain("the closed form only covers φ₀ = φ₁ = 0; use the simulation backend"));
            }
            closed_form_value(angles.theta0, angles.theta1, v)
        }
        Backend::Simulation => i1().value(&simulate_star_factorized(&angles.strategy(v))?),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriticalVisibility {
    pub v_crit: f64,
    pub value_at_one: f64,
}

/// Smallest visibility at which I₁ turns positive, by bisection on [0, 1].
pub fn critical_visibility(angles: &Angles, backend: Backend, tol: f64) -> Result<CriticalVisibility> {
    if tol <= 0.0 {
        return Err(domain("bisection tolerance must be positive"));
    }
    let f = |v: f64| witness_value(angles, v, backend);
    let value_at_one = f(1.0)?;
    if value_at_one <= 0.0 {
        return Err(domain(format!(
            "no violation at any visibility: I1 = {value_at_one:.6} at v = 1 for these angles"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if f(lo)? > 0.0 {
        return Ok(CriticalVisibility { v_crit: 0.0, value_at_one });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(CriticalVisibility { v_crit: 0.5 * (lo + hi), value_at_one })
}

#[derive(Clone, Debug)]
pub struct OptimizerConfig {
    /// Candidate values for θ₀, θ₁, φ₀, φ₁. Single-entry `[0.0]` azimuth grids keep the
    /// measurements in the x-z plane and select the closed form.
    pub grids: [Vec<f64>; 4],
    /// Refinement stops once the coordinate step is below this.
    pub tolerance: f64,
}

impl OptimizerConfig {
    /// Uniform grids over [−π, π]; φ is searched at resolution at most π/8 when allowed.
    pub fn new(resolution: f64, tolerance: f64, allow_phi: bool) -> Result<Self> {
        if !(resolution > 0.0) || !(tolerance > 0.0) {
            return Err(domain("resolution and tolerance must be positive"));
        }
        let theta = uniform_grid(resolution);
        let phi = if allow_phi { uniform_grid(resolution.max(PHI_RESOLUTION)) } else { vec![0.0] };
        Ok(Self { grids: [theta.clone(), theta, phi.clone(), phi], tolerance })
    }

    fn allow_phi(&self) -> bool {
        self.grids[2..].iter().any(|g| g.len() > 1 || g.first().is_some_and(|&p| p != 0.0))
    }

    fn backend(&self) -> Backend {
        if self.allow_phi() {
            Backend::Simulation
        } else {
            Backend::ClosedForm
        }
    }
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self::new(DEFAULT_RESOLUTION, DEFAULT_TOLERANCE, false).expect("valid defaults")
    }
}

fn uniform_grid(step: f64) -> Vec<f64> {
    let pi = std::f64::consts::PI;
    let n = (2.0 * pi / step).floor() as usize;
    (0..=n).map(|k| -pi + k as f64 * step).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Optimum {
    pub angles: Angles,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OptimizationReport {
    /// Best refined point; among equivalent optima the lexicographically smallest angles.
    pub best: Optimum,
    /// Every refined optimum within 1e−6 of the best value, in lexicographic order.
    pub equivalent: Vec<Optimum>,
    pub best_grid_value: f64,
    pub backend: Backend,
}

/// Grid search at v = 1 followed by coordinate descent from each grid local maximum.
pub fn optimize_angles(config: &OptimizerConfig) -> Result<OptimizationReport> {
    if config.grids.iter().any(|g| g.is_empty()) {
        return Err(domain("angle grids must not be empty"));
    }
    let backend = config.backend();
    let f = |a: [f64; 4]| witness_value(&Angles::from_array(a), 1.0, backend);
    let shape = [0, 1, 2, 3].map(|axis| config.grids[axis].len());
    let total: usize = shape.iter().product();
    let point = |k: usize| -> [f64; 4] {
        let idx = unravel(k, shape);
        [0, 1, 2, 3].map(|axis| config.grids[axis][idx[axis]])
    };
    let values: Vec<f64> = (0..total).into_par_iter().map(|k| f(point(k))).collect::<Result<_>>()?;
    let best_grid_value = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

    // grid local maxima (axis neighbours, non-periodic) seed the refinement
    let mut seeds: Vec<usize> = (0..total)
        .filter(|&k| {
            let idx = unravel(k, shape);
            (0..4).all(|axis| {
                [-1i64, 1].iter().all(|&d| {
                    let j = idx[axis] as i64 + d;
                    if j < 0 || j >= shape[axis] as i64 {
                        return true;
                    }
                    let mut nb = idx;
                    nb[axis] = j as usize;
                    values[ravel(nb, shape)] <= values[k]
                })
            })
        })
        .collect();
    seeds.sort_by(|&a, &b| values[b].total_cmp(&values[a]).then(a.cmp(&b)));
    seeds.truncate(64);

    let step = config.grids.iter().map(|g| grid_step(g)).fold(f64::INFINITY, f64::min);
    let refined: Vec<Optimum> = seeds
        .par_iter()
        .map(|&k| refine(&f, point(k), values[k], step, config.tolerance, config.allow_phi()))
        .collect::<Result<_>>()?;
    let top = refined.iter().map(|o| o.value).fold(f64::NEG_INFINITY, f64::max);
    let mut equivalent: Vec<Optimum> = Vec::new();
    for o in refined.into_iter().filter(|o| o.value >= top - EQUIVALENCE_TOLERANCE) {
        if !equivalent.iter().any(|e| same_angles(&e.angles, &o.angles)) {
            equivalent.push(o);
        }
    }
    equivalent.sort_by(|a, b| {
        a.angles.as_array().iter().zip(b.angles.as_array().iter()).fold(std::cmp::Ordering::Equal, |acc, (x, y)| {
            acc.then(x.total_cmp(y))
        })
    });
    Ok(OptimizationReport { best: equivalent[0], equivalent, best_grid_value, backend })
}

fn unravel(mut k: usize, shape: [usize; 4]) -> [usize; 4] {
    let mut idx = [0; 4];
    for axis in (0..4).rev() {
        idx[axis] = k % shape[axis];
        k /= shape[axis];
    }
    idx
}

fn ravel(idx: [usize; 4], shape: [usize; 4]) -> usize {
    (0..4).fold(0, |acc, axis| acc * shape[axis] + idx[axis])
}

fn grid_step(grid: &[f64]) -> f64 {
    if grid.len() < 2 {
        return DEFAULT_RESOLUTION;
    }
    grid.windows(2).map(|w| (w[1] - w[0]).abs()).fold(f64::INFINITY, f64::min)
}

fn same_angles(a: &Angles, b: &Angles) -> bool {
    let wrap = |d: f64| {
        let tau = std::f64::consts::TAU;
        let r = d.rem_euclid(tau);
        r.min(tau - r)
    };
    a.as_array().iter().zip(b.as_array().iter()).all(|(x, y)| wrap(x - y) < 1e-3)
}

/// Coordinate ascent: try ±step on each coordinate, halve the step when nothing improves.
fn refine(
    f: &(impl Fn([f64; 4]) -> Result<f64> + Sync),
    start: [f64; 4],
    start_value: f64,
    mut step: f64,
    tolerance: f64,
    allow_phi: bool,
) -> Result<Optimum> {
    let dims = if allow_phi { 4 } else { 2 };
    let (mut x, mut fx) = (start, start_value);
    while step >= tolerance {
        let mut improved = false;
        for axis in 0..dims {
            for sign in [1.0, -1.0] {
                let mut y = x;
                y[axis] += sign * step;
                let fy = f(y)?;
                if fy > fx {
                    (x, fx) = (y, fy);
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(Optimum { angles: Angles::from_array(x), value: fx })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SweepPoint {
    pub theta0: f64,
    pub theta1: f64,
    pub phi0: f64,
    pub phi1: f64,
    pub v: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// Largest value on the grid.
    pub best: SweepPoint,
    /// Critical visibility at these angles, if I₁ is violated at v = 1.
    pub v_crit: Option<f64>,
}

impl SweepResult {
    /// Columns theta0, theta1, phi0, phi1, v, value.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta0,theta1,phi0,phi1,v,value\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                fmt12(p.theta0),
                fmt12(p.theta1),
                fmt12(p.phi0),
                fmt12(p.phi1),
                fmt12(p.v),
                fmt12(p.value)
            );
        }
        out
    }
}

/// 12 significant digits; exponent form below 1e−4 and from 1e15 on.
pub fn fmt12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.11e}").parse().expect("formatted float parses");
    if (1e-4..1e15).contains(&rounded.abs()) {
        format!("{rounded}")
    } else {
        format!("{rounded:e}")
    }
}

pub fn visibility_sweep(angles: &Angles, grid: &[f64], backend: Backend) -> Result<SweepResult> {
    if grid.is_empty() {
        return Err(domain("visibility grid must not be empty"));
    }
    let points = grid
        .iter()
        .map(|&v| {
            Ok(SweepPoint {
                theta0: angles.theta0,
                theta1: angles.theta1,
                phi0: angles.phi0,
                phi1: angles.phi1,
                v,
                value: witness_value(angles, v, backend)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let best = *points.iter().max_by(|a, b| a.value.total_cmp(&b.value)).expect("nonempty grid");
    let v_crit = critical_visibility(angles, backend, DEFAULT_BISECTION_TOLERANCE).ok().map(|c| c.v_crit);
    Ok(SweepResult { points, best, v_crit })
}

/// `n + 1` evenly spaced visibilities from 0 to 1.
pub fn visibility_grid(n: usize) -> Vec<f64> {
    let n = n.max(1);
    (0..=n).map(|k| k as f64 / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::simulate_star;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    #[test]
    fn closed_form_reference_points() {
        assert_abs_diff_eq!(closed_form_value(-1.865, -0.415, 1.0).unwrap(), 0.1859, epsilon = 5e-4);
        assert_abs_diff_eq!(closed_form_value(0.3, 2.0, 0.0).unwrap(), -0.5, epsilon = 1e-15);
        assert!((closed_form_value(0.3, 2.0, 1e-6).unwrap() + 0.5).abs() <= 1e-5);
        assert!(closed_form_value(0.0, 0.0, 1.5).is_err());
        assert!(closed_form_value(0.0, 0.0, -0.1).is_err());
    }

    #[test]
    fn closed_form_agrees_with_full_simulation() {
        let w = builtin_fnn_star(1).unwrap();
        for v in [0.5, 0.9, 1.0] {
            for i in 0..11 {
                for j in 0..11 {
                    let (t0, t1) = (-PI + i as f64 * PI / 5.0, -PI + j as f64 * PI / 5.0);
                    let d = simulate_star(&StarStrategy::new(t0, t1).with_visibility(v)).unwrap();
                    let born = w.value(&d).unwrap();
                    assert_abs_diff_eq!(closed_form_value(t0, t1, v).unwrap(), born, epsilon = 1e-10);
                }
            }
        }
    }

    #[test]
    fn closed_form_backend_refuses_phi() {
        let a = Angles::new(0.1, 0.2).with_phi(0.3, 0.0);
        assert!(witness_value(&a, 1.0, Backend::ClosedForm).is_err());
        assert!(witness_value(&a, 1.0, Backend::Simulation).is_ok());
    }

    #[test]
    fn critical_visibilities() {
        let c = critical_visibility(&Angles::new(-1.865, -0.415), Backend::ClosedForm, 1e-6).unwrap();
        assert_abs_diff_eq!(c.v_crit, 0.882, epsilon = 1e-3);
        let c = critical_visibility(&Angles::new(-1.908, -0.367), Backend::ClosedForm, 1e-6).unwrap();
        assert_abs_diff_eq!(c.v_crit, 0.881, epsilon = 1e-3);
        assert_abs_diff_eq!(c.value_at_one, 0.1843, epsilon = 5e-4);
        let general = Angles::new(FRAC_PI_2, FRAC_PI_2).with_phi(FRAC_PI_4, 3.0 * FRAC_PI_4);
        let c = critical_visibility(&general, Backend::Simulation, 1e-6).unwrap();
        assert_abs_diff_eq!(c.v_crit, 2f64.powf(-1.0 / 6.0), epsilon = 1e-3);
        assert_abs_diff_eq!(c.value_at_one, (2f64.sqrt() - 1.0) / 2.0, epsilon = 1e-6);
        let both = critical_visibility(&Angles::new(-1.865, -0.415), Backend::Simulation, 1e-9).unwrap();
        let closed = critical_visibility(&Angles::new(-1.865, -0.415), Backend::ClosedForm, 1e-9).unwrap();
        assert_abs_diff_eq!(both.v_crit, closed.v_crit, epsilon = 1e-8);
    }

    #[test]
    fn no_violation_is_reported() {
        let err = critical_visibility(&Angles::new(0.0, 0.0), Backend::ClosedForm, 1e-6).unwrap_err();
        assert!(err.to_string().contains("no violation"));
    }

    #[test]
    fn optimizer_finds_known_optimum() {
        let r = optimize_angles(&OptimizerConfig::default()).unwrap();
        assert_abs_diff_eq!(r.best.value, 0.1859, epsilon = 5e-4);
        assert!(r.best.value >= r.best_grid_value);
        assert!(r
            .equivalent
            .iter()
            .any(|o| (o.angles.theta0 + 1.865).abs() < 0.01 && (o.angles.theta1 + 0.415).abs() < 0.01));
        // every reported optimum really is one
        for o in &r.equivalent {
            let v = closed_form_value(o.angles.theta0, o.angles.theta1, 1.0).unwrap();
            assert_abs_diff_eq!(v, r.best.value, epsilon = EQUIVALENCE_TOLERANCE);
        }
    }

    #[test]
    fn optimizer_with_azimuths() {
        let r = optimize_angles(&OptimizerConfig::new(PI / 8.0, 1e-9, true).unwrap()).unwrap();
        assert_eq!(r.backend, Backend::Simulation);
        assert_abs_diff_eq!(r.best.value, (2f64.sqrt() - 1.0) / 2.0, epsilon = 1e-4);
    }

    #[test]
    fn degenerate_grid_returns_its_point() {
        let best = optimize_angles(&OptimizerConfig::default()).unwrap().best;
        let a = best.angles;
        let config = OptimizerConfig {
            grids: [vec![a.theta0], vec![a.theta1], vec![0.0], vec![0.0]],
            tolerance: 1e-8,
        };
        let again = optimize_angles(&config).unwrap();
        assert!((again.best.angles.theta0 - a.theta0).abs() < 1e-6);
        assert!((again.best.angles.theta1 - a.theta1).abs() < 1e-6);
        assert!(again.best.value >= best.value);
    }

    #[test]
    fn sweep_endpoints_and_monotonicity() {
        let a = Angles::new(-1.865, -0.415);
        let s = visibility_sweep(&a, &visibility_grid(100), Backend::ClosedForm).unwrap();
        assert_abs_diff_eq!(s.points[0].value, -0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(s.points[100].value, 0.1859, epsilon = 5e-4);
        assert!(s.points.windows(2).skip(1).all(|w| w[1].value > w[0].value));
        assert_abs_diff_eq!(s.v_crit.unwrap(), 0.882, epsilon = 1e-3);
        let sim = visibility_sweep(&a, &visibility_grid(10), Backend::Simulation).unwrap();
        for (p, q) in sim.points.iter().zip(s.points.iter().step_by(10)) {
            assert_abs_diff_eq!(p.value, q.value, epsilon = 1e-10);
        }
        let csv = s.to_csv();
        assert!(csv.starts_with("theta0,theta1,phi0,phi1,v,value\n"));
        assert_eq!(csv.lines().count(), 102);
    }

    #[test]
    fn twelve_digits() {
        assert_eq!(fmt12(0.1234567890123456), "0.123456789012");
        assert_eq!(fmt12(-0.5), "-0.5");
        assert_eq!(fmt12(1.0), "1");
        assert_eq!(fmt12(-1.3322676295501878e-15), "-1.33226762955e-15");
        assert_eq!(fmt12(2.5e20), "2.5e20");
    }

    proptest! {
        #[test]
        fn closed_form_matches_factorized(t0 in -PI..PI, t1 in -PI..PI, v in 0.0f64..=1.0) {
            let born = witness_value(&Angles::new(t0, t1), v, Backend::Simulation).unwrap();
            prop_assert!((closed_form_value(t0, t1, v).unwrap() - born).abs() < 1e-10);
        }
    }
}
