//! Ground-emulator mathematics: five-bar linkage kinematics, PD force
//! rendering, identification of the rendered spring-damper from released
//! oscillations, and the affine gain calibration.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::Serialize;
use thiserror::Error;

use crate::model::GRAVITY;
use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EmulatorError {
    #[error("invalid linkage: need 0 < l1 < l2, got l1 = {l1}, l2 = {l2}")]
    InvalidGeometry { l1: f64, l2: f64 },
    #[error("invalid gains: {0}")]
    InvalidGains(String),
    #[error("invalid trace: {0}")]
    InvalidTrace(String),
    #[error("trace does not oscillate: {0}")]
    DegenerateTrace(String),
    #[error("fit is overdamped (alpha = {alpha}, beta^2 = {beta_sq})")]
    Overdamped { alpha: f64, beta_sq: f64 },
    #[error("fit did not converge in {iterations} iterations")]
    NoConvergence { iterations: usize },
    #[error("calibration needs at least two distinct {0} values")]
    InsufficientSpread(&'static str),
}

/// Link lengths of the five-bar mechanism, `short < long`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinkageGeometry<T> {
    short_link: T,
    long_link: T,
}

impl<T: Real> LinkageGeometry<T> {
    pub fn new(short_link: T, long_link: T) -> Result<Self, EmulatorError> {
        let ok = short_link.is_finite()
            && long_link.is_finite()
            && short_link > T::zero()
            && short_link < long_link;
        if !ok {
            return Err(EmulatorError::InvalidGeometry {
                l1: short_link.to_f64_lossy(),
                l2: long_link.to_f64_lossy(),
            });
        }
        Ok(Self {
            short_link,
            long_link,
        })
    }

    pub fn short_link(&self) -> T {
        self.short_link
    }
    pub fn long_link(&self) -> T {
        self.long_link
    }

    // Never below l2^2 - l1^2 > 0.
    fn radicand(&self, theta: T) -> T {
        let half_sq = T::lit(0.5) * self.short_link * self.short_link;
        -half_sq + self.long_link * self.long_link + half_sq * (T::lit(2.0) * theta).cos()
    }
}

/// Surface height for motor angle `theta` (rad).
pub fn forward_kinematics<T: Real>(theta: T, geom: &LinkageGeometry<T>) -> T {
    -geom.short_link * theta.cos() + geom.radicand(theta).sqrt()
}

/// `d r / d theta` of [`forward_kinematics`].
pub fn kinematic_jacobian<T: Real>(theta: T, geom: &LinkageGeometry<T>) -> T {
    let l1 = geom.short_link;
    let d_radicand = -l1 * l1 * (T::lit(2.0) * theta).sin();
    l1 * theta.sin() + d_radicand / (T::lit(2.0) * geom.radicand(theta).sqrt())
}

/// Motor torque that renders surface force `force` at angle `theta`.
pub fn motor_torque<T: Real>(force: T, theta: T, geom: &LinkageGeometry<T>) -> T {
    force * kinematic_jacobian(theta, geom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PdGains<T> {
    pub kp: T,
    pub kd: T,
}

impl<T: Real> PdGains<T> {
    pub fn new(kp: T, kd: T) -> Result<Self, EmulatorError> {
        if !(kp.is_finite() && kd.is_finite() && kp >= T::zero() && kd >= T::zero()) {
            return Err(EmulatorError::InvalidGains(format!("kp = {kp}, kd = {kd}")));
        }
        Ok(Self { kp, kd })
    }
}

/// PD rendering force `Kp * delta_r + Kd * r_dot`.
pub fn pd_render_force<T: Real>(delta_r: T, r_dot: T, gains: &PdGains<T>) -> T {
    gains.kp * delta_r + gains.kd * r_dot
}

/// Position samples of a weight oscillating on the emulated ground.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OscillationTrace {
    times: Vec<f64>,
    positions: Vec<f64>,
    mass: f64,
}

pub const MIN_TRACE_SAMPLES: usize = 20;

impl OscillationTrace {
    pub fn new(times: Vec<f64>, positions: Vec<f64>, mass: f64) -> Result<Self, EmulatorError> {
        let bad = |m: String| Err(EmulatorError::InvalidTrace(m));
        if times.len() != positions.len() {
            return bad(format!(
                "{} times but {} positions",
                times.len(),
                positions.len()
            ));
        }
        if times.len() < MIN_TRACE_SAMPLES {
            return bad(format!(
                "need at least {MIN_TRACE_SAMPLES} samples, got {}",
                times.len()
            ));
        }
        if !(mass.is_finite() && mass > 0.0) {
            return bad(format!("mass must be positive, got {mass}"));
        }
        if times.iter().chain(&positions).any(|v| !v.is_finite()) {
            return bad("non-finite sample".into());
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return bad("times must be strictly increasing".into());
        }
        Ok(Self {
            times,
            positions,
            mass,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
    pub fn positions(&self) -> &[f64] {
        &self.positions
    }
    pub fn mass(&self) -> f64 {
        self.mass
    }
    pub fn len(&self) -> usize {
        self.times.len()
    }
    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Drops samples before the first trough (the release point after the
    /// weight is pushed down) and restarts the clock there.
    pub fn trim_to_release(&self) -> Result<Self, EmulatorError> {
        let r = &self.positions;
        let mean = r.iter().sum::<f64>() / r.len() as f64;
        let start = (1..r.len() - 1)
            .find(|&i| r[i] < mean && r[i] <= r[i - 1] && r[i] <= r[i + 1])
            .unwrap_or(0);
        let t0 = self.times[start];
        Self::new(
            self.times[start..].iter().map(|t| t - t0).collect(),
            r[start..].to_vec(),
            self.mass,
        )
    }
}

/// Parameters of `r(t) = A exp(-beta t) cos(sqrt(alpha - beta^2) t + phi) + c`
/// where `c = -g / alpha` unless a free offset is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorParams {
    pub amplitude: f64,
    pub alpha: f64,
    pub beta: f64,
    pub phase: f64,
    /// Free offset; `None` ties the offset to gravity.
    pub offset: Option<f64>,
}

impl OscillatorParams {
    pub fn damped_frequency(&self) -> f64 {
        (self.alpha - self.beta * self.beta).sqrt()
    }

    pub fn offset_value(&self, gravity: f64) -> f64 {
        self.offset.unwrap_or(-gravity / self.alpha)
    }

    pub fn eval(&self, t: f64, gravity: f64) -> f64 {
        self.amplitude
            * (-self.beta * t).exp()
            * (self.damped_frequency() * t + self.phase).cos()
            + self.offset_value(gravity)
    }

    /// Positive amplitude and phase wrapped to `(-pi, pi]`.
    pub fn normalized(mut self) -> Self {
        use std::f64::consts::PI;
        if self.amplitude < 0.0 {
            self.amplitude = -self.amplitude;
            self.phase += PI;
        }
        self.phase = self.phase.rem_euclid(2.0 * PI);
        if self.phase > PI {
            self.phase -= 2.0 * PI;
        }
        self
    }

    fn to_vec(self) -> DVector<f64> {
        let mut v = vec![self.amplitude, self.alpha, self.beta, self.phase];
        if let Some(c) = self.offset {
            v.push(c);
        }
        DVector::from_vec(v)
    }

    fn from_slice(p: &[f64]) -> Self {
        Self {
            amplitude: p[0],
            alpha: p[1],
            beta: p[2],
            phase: p[3],
            offset: p.get(4).copied(),
        }
    }

    fn underdamped(&self) -> bool {
        self.alpha > 0.0 && self.alpha > self.beta * self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub gravity: f64,
    pub free_offset: bool,
    pub max_iterations: usize,
    /// Minimum coefficient of determination for an accepted fit.
    pub min_r_squared: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            gravity: GRAVITY,
            free_offset: false,
            max_iterations: 500,
            min_r_squared: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OscillatorFit {
    pub params: OscillatorParams,
    pub mass: f64,
    pub residual_rms: f64,
    pub r_squared: f64,
    pub iterations: usize,
    pub accepted: bool,
    pub ground_stiffness: f64,
    pub ground_damping: f64,
}

impl OscillatorFit {
    fn new(params: OscillatorParams, mass: f64, rms: f64, r2: f64, iters: usize, min_r2: f64) -> Self {
        Self {
            params,
            mass,
            residual_rms: rms,
            r_squared: r2,
            iterations: iters,
            accepted: r2 >= min_r2,
            ground_stiffness: params.alpha * mass,
            ground_damping: 2.0 * params.beta * mass,
        }
    }
}

/// Noisy samples of the oscillator model at `times`.
pub fn synthetic_trace<R: Rng + ?Sized>(
    params: &OscillatorParams,
    mass: f64,
    times: &[f64],
    noise_std: f64,
    gravity: f64,
    rng: &mut R,
) -> Result<OscillationTrace, EmulatorError> {
    let noise = Normal::new(0.0, noise_std.max(0.0))
        .map_err(|e| EmulatorError::InvalidTrace(e.to_string()))?;
    let positions = times
        .iter()
        .map(|&t| {
            let n = if noise_std > 0.0 { noise.sample(rng) } else { 0.0 };
            params.eval(t, gravity) + n
        })
        .collect();
    OscillationTrace::new(times.to_vec(), positions, mass)
}

fn residuals(trace: &OscillationTrace, p: &OscillatorParams, gravity: f64) -> DVector<f64> {
    DVector::from_iterator(
        trace.len(),
        trace
            .times
            .iter()
            .zip(&trace.positions)
            .map(|(&t, &r)| p.eval(t, gravity) - r),
    )
}

fn jacobian(trace: &OscillationTrace, p: &OscillatorParams, gravity: f64) -> DMatrix<f64> {
    let m = if p.offset.is_some() { 5 } else { 4 };
    let omega = p.damped_frequency();
    let mut j = DMatrix::zeros(trace.len(), m);
    for (i, &t) in trace.times.iter().enumerate() {
        let env = (-p.beta * t).exp();
        let arg = omega * t + p.phase;
        let (s, c) = arg.sin_cos();
        let d_omega = -p.amplitude * env * s * t;
        j[(i, 0)] = env * c;
        j[(i, 1)] = d_omega / (2.0 * omega);
        j[(i, 2)] = -t * p.amplitude * env * c - d_omega * p.beta / omega;
        j[(i, 3)] = -p.amplitude * env * s;
        if p.offset.is_some() {
            j[(i, 4)] = 1.0;
        } else {
            j[(i, 1)] += gravity / (p.alpha * p.alpha);
        }
    }
    j
}

/// Least-squares amplitude and phase for fixed frequency, decay and offset.
fn linear_amp_phase(
    trace: &OscillationTrace,
    uniform_dt: Option<f64>,
    omega: f64,
    beta: f64,
    offset: f64,
) -> Option<(f64, f64, f64)> {
    let (mut scc, mut scs, mut sss, mut szc, mut szs, mut szz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut accumulate = |ec: f64, es: f64, r: f64| {
        let z = r - offset;
        scc += ec * ec;
        scs += ec * es;
        sss += es * es;
        szc += z * ec;
        szs += z * es;
        szz += z * z;
    };
    match uniform_dt {
        // Rotate and decay incrementally instead of calling exp and sin_cos
        // per sample.
        Some(dt) => {
            let t0 = trace.times[0];
            let mut env = (-beta * t0).exp();
            let (mut s, mut c) = (omega * t0).sin_cos();
            let decay = (-beta * dt).exp();
            let (sd, cd) = (omega * dt).sin_cos();
            for &r in &trace.positions {
                accumulate(env * c, env * s, r);
                (c, s) = (c * cd - s * sd, s * cd + c * sd);
                env *= decay;
            }
        }
        None => {
            for (&t, &r) in trace.times.iter().zip(&trace.positions) {
                let env = (-beta * t).exp();
                let (s, c) = (omega * t).sin_cos();
                accumulate(env * c, env * s, r);
            }
        }
    }
    let ata = Matrix2::new(scc, scs, scs, sss);
    let atb = Vector2::new(szc, szs);
    let sol = ata.cholesky()?.solve(&atb);
    let sse = (szz - sol.dot(&atb)).max(0.0);
    // a cos + b sin = A cos(wt + phi) with a = A cos(phi), b = -A sin(phi)
    let amplitude = sol[0].hypot(sol[1]);
    let phase = (-sol[1]).atan2(sol[0]);
    Some((sse, amplitude, phase))
}

/// Starting point for the nonlinear fit from a coarse search over damped
/// frequency and damping ratio, solving amplitude and phase linearly at each
/// grid point.
pub fn initial_guess(
    trace: &OscillationTrace,
    opts: &FitOptions,
) -> Result<OscillatorParams, EmulatorError> {
    let n = trace.len();
    let r = &trace.positions;
    let mean = r.iter().sum::<f64>() / n as f64;
    let spread = r.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
    let scale = r.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    if spread.sqrt() <= 1e-12 * scale.max(1.0) {
        return Err(EmulatorError::DegenerateTrace("signal is constant".into()));
    }
    let tail_start = n - (n / 5).max(2);
    let tail_mean = r[tail_start..].iter().sum::<f64>() / (n - tail_start) as f64;

    let duration = trace.times[n - 1] - trace.times[0];
    let mut dts: Vec<f64> = trace.times.windows(2).map(|w| w[1] - w[0]).collect();
    dts.sort_by(|a, b| a.total_cmp(b));
    let dt = dts[dts.len() / 2];
    let uniform = (dts[dts.len() - 1] - dts[0] <= 1e-9 * dt).then_some(dt);
    let w_lo = 2.0 * std::f64::consts::PI / duration;
    let w_hi = 0.95 * std::f64::consts::PI / dt;
    if w_hi <= w_lo {
        return Err(EmulatorError::DegenerateTrace(
            "trace too short for its sampling rate".into(),
        ));
    }

    let evaluate = |omega: f64, zeta: f64| {
        let beta = zeta * omega;
        let alpha = omega * omega + beta * beta;
        let offset = if opts.free_offset {
            tail_mean
        } else {
            -opts.gravity / alpha
        };
        linear_amp_phase(trace, uniform, omega, beta, offset).map(|(sse, amplitude, phase)| {
            (
                sse,
                OscillatorParams {
                    amplitude,
                    alpha,
                    beta,
                    phase,
                    offset: opts.free_offset.then_some(offset),
                },
            )
        })
    };
    let mut best: Option<(f64, OscillatorParams)> = None;
    let mut keep = |cand: Option<(f64, OscillatorParams)>, at: (f64, f64), loc: &mut (f64, f64)| {
        if let Some((sse, p)) = cand {
            if best.as_ref().is_none_or(|(b, _)| sse < *b) {
                best = Some((sse, p));
                *loc = at;
            }
        }
    };

    // Coarse log-spaced frequency grid, then a finer pass around the best cell.
    const N_OMEGA: usize = 200;
    const N_ZETA: usize = 13;
    const MAX_ZETA: f64 = 0.6;
    let ratio = (w_hi / w_lo).powf(1.0 / (N_OMEGA - 1) as f64);
    let d_zeta = MAX_ZETA / (N_ZETA - 1) as f64;
    let mut loc = (w_lo, 0.0);
    for i in 0..N_OMEGA {
        let omega = w_lo * ratio.powi(i as i32);
        for j in 0..N_ZETA {
            let zeta = d_zeta * j as f64;
            keep(evaluate(omega, zeta), (omega, zeta), &mut loc);
        }
    }
    let (w0, z0) = loc;
    const N_FINE: usize = 15;
    for i in 0..N_FINE {
        let omega = w0 * ratio.powf(2.0 * i as f64 / (N_FINE - 1) as f64 - 1.0);
        for j in 0..N_FINE {
            let zeta = z0 + d_zeta * (2.0 * j as f64 / (N_FINE - 1) as f64 - 1.0);
            if zeta >= 0.0 {
                keep(evaluate(omega, zeta), (omega, zeta), &mut loc);
            }
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| EmulatorError::DegenerateTrace("no oscillation found".into()))
}

/// Levenberg-Marquardt fit of the damped oscillator to a released trace.
pub fn fit_oscillator(
    trace: &OscillationTrace,
    init: Option<OscillatorParams>,
    opts: &FitOptions,
) -> Result<OscillatorFit, EmulatorError> {
    let mut params = match init {
        Some(p) => p,
        None => initial_guess(trace, opts)?,
    };
    if opts.free_offset && params.offset.is_none() {
        params.offset = Some(-opts.gravity / params.alpha);
    } else if !opts.free_offset {
        params.offset = None;
    }
    if !params.underdamped() {
        return Err(EmulatorError::Overdamped {
            alpha: params.alpha,
            beta_sq: params.beta * params.beta,
        });
    }

    let g = opts.gravity;
    let mut r = residuals(trace, &params, g);
    let mut cost = r.norm_squared();
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iterations {
        iterations += 1;
        let j = jacobian(trace, &params, g);
        let jtj = j.transpose() * &j;
        let grad = j.transpose() * &r;
        let current = params.to_vec();
        let mut improved = false;
        let mut small_step = false;
        while lambda < 1e16 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(chol) = a.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let delta = chol.solve(&(-&grad));
            let candidate_vec = &current + &delta;
            let candidate = OscillatorParams::from_slice(candidate_vec.as_slice());
            if !candidate.underdamped() {
                lambda *= 10.0;
                continue;
            }
            let r_new = residuals(trace, &candidate, g);
            let cost_new = r_new.norm_squared();
            if cost_new.is_finite() && cost_new <= cost {
                small_step = delta
                    .iter()
                    .zip(current.iter())
                    .all(|(d, p)| d.abs() <= 1e-12 * (p.abs() + 1e-12));
                let rel_drop = (cost - cost_new) / cost.max(1e-300);
                params = candidate;
                r = r_new;
                cost = cost_new;
                lambda = (lambda / 10.0).max(1e-15);
                improved = true;
                if rel_drop < 1e-14 {
                    small_step = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || small_step || cost == 0.0 {
            // No downhill step left at any damping: a local minimum.
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(EmulatorError::NoConvergence { iterations });
    }
    let params = params.normalized();
    if !params.underdamped() {
        return Err(EmulatorError::Overdamped {
            alpha: params.alpha,
            beta_sq: params.beta * params.beta,
        });
    }
    let n = trace.len() as f64;
    let mean = trace.positions.iter().sum::<f64>() / n;
    let ss_tot: f64 = trace.positions.iter().map(|v| (v - mean).powi(2)).sum();
    let r2 = if ss_tot > 0.0 { 1.0 - cost / ss_tot } else { 0.0 };
    Ok(OscillatorFit::new(
        params,
        trace.mass,
        (cost / n).sqrt(),
        r2,
        iterations,
        opts.min_r_squared,
    ))
}

/// `y = slope * x + intercept` with the fit's coefficient of determination.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AffineMap {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

impl AffineMap {
    pub fn apply(&self, x: f64) -> f64 {
        self.slope * x + self.intercept
    }

    /// Gain that renders target value `y`.
    pub fn inverse(&self, y: f64) -> f64 {
        (y - self.intercept) / self.slope
    }

    fn least_squares(points: &[(f64, f64)], name: &'static str) -> Result<Self, EmulatorError> {
        let n = points.len() as f64;
        let first = points.first().map(|p| p.0);
        let distinct = points
            .iter()
            .any(|p| first.is_some_and(|f| (p.0 - f).abs() > 1e-12 * f.abs().max(1.0)));
        if points.len() < 2 || !distinct {
            return Err(EmulatorError::InsufficientSpread(name));
        }
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let sse: f64 = points
            .iter()
            .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
            .sum();
        let r_squared = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
        Ok(Self {
            slope,
            intercept,
            r_squared,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GainCalibration {
    /// Ground stiffness as a function of `Kp`.
    pub stiffness: AffineMap,
    /// Ground damping as a function of `Kd`.
    pub damping: AffineMap,
}

impl GainCalibration {
    /// Gains expected to render the given ground profile.
    pub fn gains_for(&self, ground_stiffness: f64, ground_damping: f64) -> PdGains<f64> {
        PdGains {
            kp: self.stiffness.inverse(ground_stiffness),
            kd: self.damping.inverse(ground_damping),
        }
    }
}

/// Affine maps `k_g = f(Kp)` and `d_g = f(Kd)` over all accepted fits.
pub fn calibrate_gain_maps(
    fits: &[(PdGains<f64>, OscillatorFit)],
) -> Result<GainCalibration, EmulatorError> {
    let points: Vec<_> = fits
        .iter()
        .filter(|(_, f)| f.accepted)
        .map(|(g, f)| (*g, f.ground_stiffness, f.ground_damping))
        .collect();
    calibrate_points(&points)
}

/// Affine maps from `(gains, ground stiffness, ground damping)` triples.
pub fn calibrate_points(
    points: &[(PdGains<f64>, f64, f64)],
) -> Result<GainCalibration, EmulatorError> {
    let k: Vec<(f64, f64)> = points.iter().map(|(g, k, _)| (g.kp, *k)).collect();
    let d: Vec<(f64, f64)> = points.iter().map(|(g, _, d)| (g.kd, *d)).collect();
    Ok(GainCalibration {
        stiffness: AffineMap::least_squares(&k, "Kp")?,
        damping: AffineMap::least_squares(&d, "Kd")?,
    })
}
