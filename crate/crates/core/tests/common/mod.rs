//! Fixed-step RK4 reference for the hopper, written from the equations of
//! motion without touching the library integrator or state machine.

#![allow(dead_code)]

pub const G: f64 = 9.81;

#[derive(Clone, Copy, Debug)]
pub struct Cell {
    pub m_b: f64,
    pub m_t: f64,
    pub l: f64,
    pub k_l: f64,
    pub d_l: f64,
    pub k_g: f64,
    pub d_g: f64,
    pub e_in: f64,
}

impl Cell {
    pub fn new(k_l: f64, d_l: f64, k_g: f64, d_g: f64, e_in: f64) -> Self {
        Self {
            m_b: 2.5,
            m_t: 0.3,
            l: 0.0975,
            k_l,
            d_l,
            k_g,
            d_g,
            e_in,
        }
    }

    pub fn precompression(&self) -> f64 {
        (2.0 * self.e_in / self.k_l).sqrt()
    }
}

/// y = [x_b, v_b, x_t, v_t]
pub fn rhs(c: &Cell, stance: bool, y: &[f64; 4]) -> [f64; 4] {
    let setpoint = if stance { c.l } else { c.l - c.precompression() };
    let f_leg = c.k_l * (setpoint - (y[0] - y[2])) - c.d_l * (y[1] - y[3]);
    let f_ground = if stance { -c.k_g * y[2] - c.d_g * y[3] } else { 0.0 };
    [
        y[1],
        f_leg / c.m_b - G,
        y[3],
        (-f_leg + f_ground) / c.m_t - G,
    ]
}

pub fn rk4(c: &Cell, stance: bool, y: &[f64; 4], h: f64) -> [f64; 4] {
    let add = |a: &[f64; 4], b: &[f64; 4], s: f64| std::array::from_fn(|i| a[i] + s * b[i]);
    let k1 = rhs(c, stance, y);
    let k2 = rhs(c, stance, &add(y, &k1, h / 2.0));
    let k3 = rhs(c, stance, &add(y, &k2, h / 2.0));
    let k4 = rhs(c, stance, &add(y, &k3, h));
    std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

/// Integrates until `guard` changes sign in the requested sense, then
/// refines the crossing by bisection on partial RK4 steps from the last
/// pre-crossing state. Returns (time, state), or None after `limit` seconds.
#[allow(clippy::too_many_arguments)]
pub fn run_until(
    c: &Cell,
    stance: bool,
    t0: f64,
    y0: [f64; 4],
    dt: f64,
    limit: f64,
    rising: bool,
    guard: impl Fn(&[f64; 4]) -> f64,
    mut visit: impl FnMut(f64, &[f64; 4]),
) -> Option<(f64, [f64; 4])> {
    let crossed = |a: f64, b: f64| if rising { a < 0.0 && b >= 0.0 } else { a > 0.0 && b <= 0.0 };
    let (mut t, mut y) = (t0, y0);
    let steps = (limit / dt).ceil() as usize;
    for _ in 0..steps {
        let next = rk4(c, stance, &y, dt);
        if crossed(guard(&y), guard(&next)) {
            let (mut lo, mut hi) = (0.0, dt);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if crossed(guard(&y), guard(&rk4(c, stance, &y, mid))) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            let ye = rk4(c, stance, &y, hi);
            visit(t + hi, &ye);
            return Some((t + hi, ye));
        }
        t += dt;
        y = next;
        visit(t, &y);
    }
    None
}

#[derive(Debug, Clone, PartialEq)]
pub enum OracleEnd {
    Completed,
    StanceTimeout { hop: usize },
    NoRise { hop: usize },
    FlightTimeout,
}

#[derive(Debug, Clone)]
pub struct OracleEpisode {
    pub apexes: Vec<f64>,
    pub end: OracleEnd,
    pub touchdowns: Vec<(f64, [f64; 4])>,
    pub liftoffs: Vec<(f64, [f64; 4])>,
}

impl OracleEpisode {
    pub fn steady_mean(&self, window: usize) -> Option<f64> {
        (self.end == OracleEnd::Completed && self.apexes.len() >= window).then(|| {
            let tail = &self.apexes[self.apexes.len() - window..];
            tail.iter().sum::<f64>() / window as f64
        })
    }
}

/// Hanging drop from toe height `drop`, `hops` full hops.
pub fn episode(c: &Cell, drop: f64, hops: usize, dt: f64) -> OracleEpisode {
    let p = c.precompression();
    let sep = c.l - p + c.m_t * G / c.k_l;
    let mut y = [drop + sep, 0.0, drop, 0.0];
    let mut t = 0.0;
    let mut out = OracleEpisode {
        apexes: Vec::new(),
        end: OracleEnd::Completed,
        touchdowns: Vec::new(),
        liftoffs: Vec::new(),
    };
    let touchdown = |y: &[f64; 4]| y[2];
    match run_until(c, false, t, y, dt, 5.0, false, touchdown, |_, _| {}) {
        Some((te, ye)) => {
            t = te;
            y = ye;
        }
        None => {
            out.end = OracleEnd::FlightTimeout;
            return out;
        }
    }
    let l = c.l;
    for hop in 0..hops {
        out.touchdowns.push((t, y));
        let liftoff = move |y: &[f64; 4]| (y[0] - y[2]) - l;
        match run_until(c, true, t, y, dt, 0.5, true, liftoff, |_, _| {}) {
            Some((te, ye)) => {
                t = te;
                y = ye;
            }
            None => {
                out.end = OracleEnd::StanceTimeout { hop };
                return out;
            }
        }
        out.liftoffs.push((t, y));
        let mut top = y[0];
        match run_until(c, false, t, y, dt, 5.0, false, touchdown, |_, s| top = top.max(s[0])) {
            Some((te, ye)) => {
                t = te;
                y = ye;
            }
            None => {
                out.end = OracleEnd::FlightTimeout;
                return out;
            }
        }
        let apex = top - c.l;
        if apex <= 0.0 {
            out.end = OracleEnd::NoRise { hop };
            return out;
        }
        out.apexes.push(apex);
    }
    out
}
