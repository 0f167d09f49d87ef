//! Adaptive Dormand-Prince 5(4) integration of a single smooth phase, with
//! dense output and guarded event localization.
//!
//! A phase runs until the earliest directional zero crossing of any terminal
//! guard, or until `max_phase_duration` elapses. Crossings are found by
//! sampling each guard on the dense interpolant at several points inside every
//! accepted step, so a guard that crosses and re-crosses within one step is
//! still caught at its first crossing. The crossing time is then bisected on
//! the interpolant and the step is re-taken from its start so that the final
//! sample is a genuine Runge-Kutta state on the event surface.

use thiserror::Error;

use crate::real::Real;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IntegrationError {
    #[error("step size collapsed to {step:e} s at t = {time} s")]
    StepUnderflow { time: f64, step: f64 },
    #[error("non-finite state encountered at t = {time} s")]
    NonFiniteState { time: f64 },
    #[error("guard has no {direction:?} sign change on [{lo}, {hi}]")]
    NoSignChange { lo: f64, hi: f64, direction: Direction },
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(String),
}

/// Step control and event tolerances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig<T> {
    pub rel_tol: T,
    pub abs_tol: T,
    pub max_step: T,
    pub event_time_tol: T,
    pub max_phase_duration: T,
}

impl<T: Real> Default for IntegratorConfig<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-8),
            abs_tol: T::lit(1e-10),
            max_step: T::lit(1e-3),
            event_time_tol: T::lit(1e-12),
            max_phase_duration: T::lit(5.0),
        }
    }
}

impl<T: Real> IntegratorConfig<T> {
    pub fn validate(&self) -> Result<(), IntegrationError> {
        let fields = [
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("event_time_tol", self.event_time_tol),
            ("max_phase_duration", self.max_phase_duration),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > T::zero()) {
                return Err(IntegrationError::InvalidConfig(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.rel_tol < T::lit(1e-14) {
            return Err(IntegrationError::InvalidConfig(format!(
                "rel_tol {} is below 1e-14",
                self.rel_tol
            )));
        }
        if self.event_time_tol >= self.max_step {
            return Err(IntegrationError::InvalidConfig(
                "event_time_tol must be smaller than max_step".into(),
            ));
        }
        Ok(())
    }
}

/// Crossing direction a guard must take to fire.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// From positive to non-positive.
    Falling,
    /// From negative to non-negative.
    Rising,
    Either,
}

impl Direction {
    #[inline]
    pub fn crosses<T: Real>(self, before: T, after: T) -> bool {
        let zero = T::zero();
        let falling = before > zero && after <= zero;
        let rising = before < zero && after >= zero;
        match self {
            Direction::Falling => falling,
            Direction::Rising => rising,
            Direction::Either => falling || rising,
        }
    }
}

type Guard<'a, T, const N: usize> = Box<dyn Fn(T, &[T; N]) -> T + 'a>;

/// A guard function of `(t, y)` with its crossing direction. Terminal events
/// end the phase; the others are only recorded.
pub struct EventSpec<'a, T, const N: usize> {
    guard: Guard<'a, T, N>,
    pub direction: Direction,
    pub terminal: bool,
}

impl<'a, T: Real, const N: usize> EventSpec<'a, T, N> {
    pub fn terminal(direction: Direction, guard: impl Fn(T, &[T; N]) -> T + 'a) -> Self {
        Self {
            guard: Box::new(guard),
            direction,
            terminal: true,
        }
    }

    pub fn recording(direction: Direction, guard: impl Fn(T, &[T; N]) -> T + 'a) -> Self {
        Self {
            guard: Box::new(guard),
            direction,
            terminal: false,
        }
    }

    #[inline]
    pub fn eval(&self, t: T, y: &[T; N]) -> T {
        (self.guard)(t, y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventHit<T, const N: usize> {
    pub event: usize,
    pub time: T,
    pub state: [T; N],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseEnd {
    /// Index of the terminal event that fired.
    Event(usize),
    Timeout,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepStats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTrajectory<T, const N: usize> {
    /// Accepted step endpoints, starting with the initial point. The last
    /// sample is the terminal state.
    pub samples: Vec<(T, [T; N])>,
    pub end: PhaseEnd,
    /// Crossings of non-terminal events before the terminal time.
    pub hits: Vec<EventHit<T, N>>,
    pub stats: StepStats,
}

impl<T: Real, const N: usize> PhaseTrajectory<T, N> {
    pub fn terminal(&self) -> (T, [T; N]) {
        *self.samples.last().expect("trajectory has an initial sample")
    }

    pub fn timed_out(&self) -> bool {
        self.end == PhaseEnd::Timeout
    }
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Continuous extension (Hairer, Norsett & Wanner).
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Guard samples per accepted step, used to catch double crossings.
const GUARD_SUBDIVISIONS: usize = 8;
const MIN_STEP: f64 = 1e-15;
const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

/// Dense interpolant over one accepted step.
#[derive(Debug, Clone, Copy)]
pub struct DenseStep<T, const N: usize> {
    t0: T,
    h: T,
    r: [[T; N]; 5],
}

impl<T: Real, const N: usize> DenseStep<T, N> {
    fn new(t0: T, h: T, y0: &[T; N], y1: &[T; N], k: &[[T; N]; 7]) -> Self {
        let mut r = [[T::zero(); N]; 5];
        for i in 0..N {
            let dy = y1[i] - y0[i];
            let bspl = h * k[0][i] - dy;
            r[0][i] = y0[i];
            r[1][i] = dy;
            r[2][i] = bspl;
            r[3][i] = dy - h * k[6][i] - bspl;
            let mut acc = T::zero();
            for (s, d) in D.iter().enumerate() {
                if *d != 0.0 {
                    acc += T::lit(*d) * k[s][i];
                }
            }
            r[4][i] = h * acc;
        }
        Self { t0, h, r }
    }

    pub fn eval(&self, t: T) -> [T; N] {
        let theta = (t - self.t0) / self.h;
        let theta1 = T::one() - theta;
        let mut out = [T::zero(); N];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.r[0][i]
                + theta
                    * (self.r[1][i]
                        + theta1 * (self.r[2][i] + theta * (self.r[3][i] + theta1 * self.r[4][i])));
        }
        out
    }
}

/// Bisection for a directional zero crossing of a scalar function of time on
/// `[lo, hi]`. Returns the right end of the final bracket, which is on the
/// post-crossing side.
pub fn locate_event<T: Real>(
    lo: T,
    hi: T,
    guard: impl Fn(T) -> T,
    direction: Direction,
    time_tol: T,
) -> Result<T, IntegrationError> {
    let mut a = lo;
    let mut b = hi;
    let mut ga = guard(a);
    if !direction.crosses(ga, guard(b)) {
        return Err(IntegrationError::NoSignChange {
            lo: lo.to_f64_lossy(),
            hi: hi.to_f64_lossy(),
            direction,
        });
    }
    let half = T::lit(0.5);
    while b - a > time_tol {
        let mid = a + half * (b - a);
        if mid <= a || mid >= b {
            break;
        }
        let gm = guard(mid);
        if direction.crosses(ga, gm) {
            b = mid;
        } else {
            a = mid;
            ga = gm;
        }
    }
    Ok(b)
}

struct Stepper<F, T, const N: usize> {
    f: F,
    evaluations: usize,
    _t: std::marker::PhantomData<T>,
}

impl<F, T, const N: usize> Stepper<F, T, N>
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
{
    fn eval(&mut self, t: T, y: &[T; N]) -> [T; N] {
        self.evaluations += 1;
        (self.f)(t, y)
    }

    /// One Dormand-Prince step. Returns the 5th-order solution, all seven
    /// stage derivatives and the embedded error vector.
    fn step(&mut self, t: T, y: &[T; N], k1: &[T; N], h: T) -> ([T; N], [[T; N]; 7], [T; N]) {
        let mut k = [[T::zero(); N]; 7];
        k[0] = *k1;
        let mut y_new = *y;
        for s in 1..7 {
            let mut ys = *y;
            for (i, yi) in ys.iter_mut().enumerate() {
                let mut acc = T::zero();
                for (j, kj) in k.iter().enumerate().take(s) {
                    let a = A[s][j];
                    if a != 0.0 {
                        acc += T::lit(a) * kj[i];
                    }
                }
                *yi += h * acc;
            }
            k[s] = self.eval(t + T::lit(C[s]) * h, &ys);
            if s == 6 {
                y_new = ys;
            }
        }
        let mut err = [T::zero(); N];
        for (i, e) in err.iter_mut().enumerate() {
            let mut acc = T::zero();
            for (s, ks) in k.iter().enumerate() {
                if E[s] != 0.0 {
                    acc += T::lit(E[s]) * ks[i];
                }
            }
            *e = h * acc;
        }
        (y_new, k, err)
    }
}

fn error_norm<T: Real, const N: usize>(
    y0: &[T; N],
    y1: &[T; N],
    err: &[T; N],
    cfg: &IntegratorConfig<T>,
) -> T {
    let mut sum = T::zero();
    for i in 0..N {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs().max(y1[i].abs());
        let r = err[i] / sc;
        sum += r * r;
    }
    (sum / T::lit(N as f64)).sqrt()
}

fn all_finite<T: Real, const N: usize>(y: &[T; N]) -> bool {
    y.iter().all(|v| v.is_finite())
}

fn initial_step<F, T, const N: usize>(
    stepper: &mut Stepper<F, T, N>,
    t0: T,
    y0: &[T; N],
    f0: &[T; N],
    cfg: &IntegratorConfig<T>,
) -> T
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
{
    let n = T::lit(N as f64);
    let mut d0 = T::zero();
    let mut d1 = T::zero();
    for i in 0..N {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        d0 += (y0[i] / sc).powi(2);
        d1 += (f0[i] / sc).powi(2);
    }
    d0 = (d0 / n).sqrt();
    d1 = (d1 / n).sqrt();
    let tiny = T::lit(1e-5);
    let mut h0 = if d0 < tiny || d1 < tiny {
        T::lit(1e-6)
    } else {
        T::lit(0.01) * d0 / d1
    };
    h0 = h0.min(cfg.max_step);
    let mut y1 = *y0;
    for i in 0..N {
        y1[i] += h0 * f0[i];
    }
    let f1 = stepper.eval(t0 + h0, &y1);
    let mut d2 = T::zero();
    for i in 0..N {
        let sc = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
        d2 += ((f1[i] - f0[i]) / sc).powi(2);
    }
    d2 = (d2 / n).sqrt() / h0;
    let dmax = d1.max(d2);
    let h1 = if dmax <= T::lit(1e-15) {
        (h0 * T::lit(1e-3)).max(T::lit(1e-6))
    } else {
        (T::lit(0.01) / dmax).powf(T::lit(0.2))
    };
    (T::lit(100.0) * h0).min(h1).min(cfg.max_step)
}

/// Integrates `dy/dt = dynamics(t, y)` from `(t0, y0)` until the first
/// terminal event or until `cfg.max_phase_duration` has elapsed.
pub fn integrate_phase<T, F, const N: usize>(
    t0: T,
    y0: [T; N],
    dynamics: F,
    events: &[EventSpec<'_, T, N>],
    cfg: &IntegratorConfig<T>,
) -> Result<PhaseTrajectory<T, N>, IntegrationError>
where
    T: Real,
    F: FnMut(T, &[T; N]) -> [T; N],
{
    cfg.validate()?;
    if !all_finite(&y0) || !t0.is_finite() {
        return Err(IntegrationError::NonFiniteState {
            time: t0.to_f64_lossy(),
        });
    }
    let mut stepper = Stepper {
        f: dynamics,
        evaluations: 0,
        _t: std::marker::PhantomData,
    };
    let t_end = t0 + cfg.max_phase_duration;
    let min_step = T::lit(MIN_STEP);

    let mut t = t0;
    let mut y = y0;
    let mut k1 = stepper.eval(t, &y);
    if !all_finite(&k1) {
        return Err(IntegrationError::NonFiniteState {
            time: t.to_f64_lossy(),
        });
    }
    let mut h = initial_step(&mut stepper, t, &y, &k1, cfg);
    let mut g_prev: Vec<T> = events.iter().map(|e| e.eval(t, &y)).collect();
    let mut samples = vec![(t, y)];
    let mut hits = Vec::new();
    let mut stats = StepStats::default();
    let mut last_rejected = false;

    loop {
        let remaining = t_end - t;
        if remaining <= T::zero() {
            break;
        }
        h = h.min(cfg.max_step).min(remaining);
        // Land exactly on the end instead of leaving a sliver.
        if remaining - h < min_step {
            h = remaining;
        }
        if h < min_step {
            return Err(IntegrationError::StepUnderflow {
                time: t.to_f64_lossy(),
                step: h.to_f64_lossy(),
            });
        }

        let (y_new, k, err_vec) = stepper.step(t, &y, &k1, h);
        if !all_finite(&y_new) || !all_finite(&k[6]) {
            return Err(IntegrationError::NonFiniteState {
                time: (t + h).to_f64_lossy(),
            });
        }
        let err = error_norm(&y, &y_new, &err_vec, cfg);
        if err > T::one() {
            stats.rejected += 1;
            let fac = (T::lit(SAFETY) * err.powf(T::lit(-0.2))).max(T::lit(FAC_MIN));
            h *= fac;
            last_rejected = true;
            continue;
        }
        stats.accepted += 1;

        let t_new = if h == remaining { t_end } else { t + h };
        let dense = DenseStep::new(t, h, &y, &y_new, &k);

        // Scan guards on the interpolant for the earliest crossings.
        let mut terminal: Option<(usize, T)> = None;
        let mut pending_hits: Vec<EventHit<T, N>> = Vec::new();
        let mut g_end: Vec<T> = Vec::with_capacity(events.len());
        for (idx, ev) in events.iter().enumerate() {
            let mut left_t = t;
            let mut left_g = g_prev[idx];
            let mut right_g = left_g;
            for j in 1..=GUARD_SUBDIVISIONS {
                let (right_t, right_y) = if j == GUARD_SUBDIVISIONS {
                    (t_new, y_new)
                } else {
                    let tj = t + h * T::lit(j as f64 / GUARD_SUBDIVISIONS as f64);
                    (tj, dense.eval(tj))
                };
                right_g = ev.eval(right_t, &right_y);
                if ev.direction.crosses(left_g, right_g) {
                    let tc = locate_event(
                        left_t,
                        right_t,
                        |s| ev.eval(s, &dense.eval(s)),
                        ev.direction,
                        cfg.event_time_tol,
                    )?;
                    if ev.terminal {
                        if terminal.is_none_or(|(_, tt)| tc < tt) {
                            terminal = Some((idx, tc));
                        }
                        break;
                    }
                    pending_hits.push(EventHit {
                        event: idx,
                        time: tc,
                        state: dense.eval(tc),
                    });
                }
                left_t = right_t;
                left_g = right_g;
            }
            g_end.push(right_g);
        }

        if let Some((idx, tc)) = terminal {
            let h_event = tc - t;
            let y_event = if h_event >= min_step {
                stepper.step(t, &y, &k1, h_event).0
            } else {
                dense.eval(tc)
            };
            pending_hits.retain(|hit| hit.time <= tc);
            pending_hits.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite times"));
            hits.extend(pending_hits);
            samples.push((tc, y_event));
            stats.evaluations = stepper.evaluations;
            return Ok(PhaseTrajectory {
                samples,
                end: PhaseEnd::Event(idx),
                hits,
                stats,
            });
        }

        pending_hits.sort_by(|a, b| a.time.partial_cmp(&b.time).expect("finite times"));
        hits.extend(pending_hits);
        samples.push((t_new, y_new));
        g_prev = g_end;
        t = t_new;
        y = y_new;
        k1 = k[6];

        let mut fac = T::lit(SAFETY) * err.max(T::lit(1e-10)).powf(T::lit(-0.2));
        fac = fac.max(T::lit(FAC_MIN)).min(T::lit(FAC_MAX));
        if last_rejected {
            fac = fac.min(T::one());
        }
        last_rejected = false;
        h *= fac;
    }

    stats.evaluations = stepper.evaluations;
    Ok(PhaseTrajectory {
        samples,
        end: PhaseEnd::Timeout,
        hits,
        stats,
    })
}
