//! Fixed-step explicit ODE integrators (forward Euler and classic RK4) with
//! dense recording at prescribed observation times.
//!
//! Step sizes are fixed so that forward trajectories can be replayed
//! exactly during backward (adjoint) sweeps.

use ndarray::{Array1, Array2};
use num_complex::Complex64 as C64;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("observation times must be strictly increasing and inside [{t_start}, {t_end}]")]
    BadObservationTimes { t_start: f64, t_end: f64 },
    #[error("substeps_per_interval must be at least 1")]
    ZeroSubsteps,
    #[error("non-finite state encountered at t = {t}")]
    NonFinite { t: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Euler,
    Rk4,
}

/// A time grid: integration runs from `t_start` through each observation
/// time in order, taking `substeps_per_interval` equal steps inside every
/// interval between consecutive recorded times.
#[derive(Debug, Clone)]
pub struct IntegrationPlan {
    pub t_start: f64,
    pub t_end: f64,
    pub observation_times: Vec<f64>,
    pub substeps_per_interval: usize,
    pub method: Method,
}

impl IntegrationPlan {
    /// Uniform grid of `n_obs` observation times `t_n = n·t_end/n_obs`,
    /// n = 1..n_obs, starting from t = 0.
    pub fn uniform(t_end: f64, n_obs: usize, substeps_per_interval: usize, method: Method) -> Self {
        let observation_times =
            (1..=n_obs).map(|n| t_end * n as f64 / n_obs as f64).collect();
        IntegrationPlan { t_start: 0.0, t_end, observation_times, substeps_per_interval, method }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        if self.substeps_per_interval == 0 {
            return Err(IntegrateError::ZeroSubsteps);
        }
        let mut prev = self.t_start;
        let eps = 1e-12 * (1.0 + self.t_end.abs());
        for (i, &t) in self.observation_times.iter().enumerate() {
            let lo = if i == 0 { self.t_start } else { prev };
            if t <= lo || t > self.t_end + eps {
                return Err(IntegrateError::BadObservationTimes {
                    t_start: self.t_start,
                    t_end: self.t_end,
                });
            }
            prev = t;
        }
        Ok(())
    }
}

/// Minimal vector-space interface the steppers need. Implemented for the
/// concrete state representations used in this crate (real coordinate
/// vectors, complex vectors, density matrices).
pub trait OdeState: Clone {
    fn zeros_like(&self) -> Self;
    /// self += c * other
    fn scaled_add_state(&mut self, c: f64, other: &Self);
    fn all_finite(&self) -> bool;
    /// Inner product of the underlying *real* vector space (Re⟨a, b⟩ for
    /// complex states).
    fn real_dot(&self, other: &Self) -> f64;
}

impl OdeState for Array1<f64> {
    fn zeros_like(&self) -> Self {
        Array1::zeros(self.len())
    }
    fn scaled_add_state(&mut self, c: f64, other: &Self) {
        self.scaled_add(c, other);
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
    fn real_dot(&self, other: &Self) -> f64 {
        self.dot(other)
    }
}

impl OdeState for Array1<C64> {
    fn zeros_like(&self) -> Self {
        Array1::zeros(self.len())
    }
    fn scaled_add_state(&mut self, c: f64, other: &Self) {
        self.scaled_add(C64::new(c, 0.0), other);
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
    fn real_dot(&self, other: &Self) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

impl OdeState for Array2<C64> {
    fn zeros_like(&self) -> Self {
        Array2::zeros(self.dim())
    }
    fn scaled_add_state(&mut self, c: f64, other: &Self) {
        self.scaled_add(C64::new(c, 0.0), other);
    }
    fn all_finite(&self) -> bool {
        self.iter().all(|v| v.re.is_finite() && v.im.is_finite())
    }
    fn real_dot(&self, other: &Self) -> f64 {
        self.iter().zip(other.iter()).map(|(a, b)| (a.conj() * b).re).sum()
    }
}

/// One classic RK4 step of size `h` starting from `(t, y)`.
pub fn rk4_step<S: OdeState>(f: &mut impl FnMut(&S, f64) -> S, y: &S, t: f64, h: f64) -> S {
    let k1 = f(y, t);
    let mut y2 = y.clone();
    y2.scaled_add_state(0.5 * h, &k1);
    let k2 = f(&y2, t + 0.5 * h);
    let mut y3 = y.clone();
    y3.scaled_add_state(0.5 * h, &k2);
    let k3 = f(&y3, t + 0.5 * h);
    let mut y4 = y.clone();
    y4.scaled_add_state(h, &k3);
    let k4 = f(&y4, t + h);

    let mut out = y.clone();
    out.scaled_add_state(h / 6.0, &k1);
    out.scaled_add_state(h / 3.0, &k2);
    out.scaled_add_state(h / 3.0, &k3);
    out.scaled_add_state(h / 6.0, &k4);
    out
}

/// One forward Euler step of size `h`.
pub fn euler_step<S: OdeState>(f: &mut impl FnMut(&S, f64) -> S, y: &S, t: f64, h: f64) -> S {
    let k = f(y, t);
    let mut out = y.clone();
    out.scaled_add_state(h, &k);
    out
}

fn step<S: OdeState>(
    method: Method,
    f: &mut impl FnMut(&S, f64) -> S,
    y: &S,
    t: f64,
    h: f64,
) -> S {
    match method {
        Method::Euler => euler_step(f, y, t, h),
        Method::Rk4 => rk4_step(f, y, t, h),
    }
}

/// Propagates `y0` from `plan.t_start` and returns the state at every
/// observation time, in order.
pub fn integrate<S: OdeState>(
    mut f: impl FnMut(&S, f64) -> S,
    y0: &S,
    plan: &IntegrationPlan,
) -> Result<Vec<S>, IntegrateError> {
    plan.validate()?;
    let mut out = Vec::with_capacity(plan.observation_times.len());
    let mut y = y0.clone();
    let mut t_left = plan.t_start;
    for &t_right in &plan.observation_times {
        y = propagate_interval(plan.method, &mut f, y, t_left, t_right, plan.substeps_per_interval)?;
        out.push(y.clone());
        t_left = t_right;
    }
    Ok(out)
}

/// Takes `substeps` equal steps across `[t_left, t_right]`, using exact
/// endpoint arithmetic `t = t_left + i·h` so a replay reproduces the same
/// step times bit-for-bit.
pub fn propagate_interval<S: OdeState>(
    method: Method,
    f: &mut impl FnMut(&S, f64) -> S,
    mut y: S,
    t_left: f64,
    t_right: f64,
    substeps: usize,
) -> Result<S, IntegrateError> {
    let h = (t_right - t_left) / substeps as f64;
    for i in 0..substeps {
        let t = t_left + i as f64 * h;
        y = step(method, f, &y, t, h);
        if !y.all_finite() {
            return Err(IntegrateError::NonFinite { t: t + h });
        }
    }
    Ok(y)
}

/// Like [`propagate_interval`], but also returns the state *before* each
/// substep together with its time — the cache consumed by a backward sweep.
pub fn propagate_interval_traced<S: OdeState>(
    method: Method,
    f: &mut impl FnMut(&S, f64) -> S,
    mut y: S,
    t_left: f64,
    t_right: f64,
    substeps: usize,
) -> Result<(S, Vec<(f64, S)>), IntegrateError> {
    let h = (t_right - t_left) / substeps as f64;
    let mut trace = Vec::with_capacity(substeps);
    for i in 0..substeps {
        let t = t_left + i as f64 * h;
        trace.push((t, y.clone()));
        y = step(method, f, &y, t, h);
        if !y.all_finite() {
            return Err(IntegrateError::NonFinite { t: t + h });
        }
    }
    Ok((y, trace))
}
