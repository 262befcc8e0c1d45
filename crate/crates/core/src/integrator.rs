//! Time stepping with an exact integrating factor for the viscous operator.
//!
//! The viscous semigroup `exp(t(μΔ + (λ+μ)∇div))` is diagonal per mode on
//! the Helmholtz components (`e^{-μ|ξ|²t}` on `Pu`, `e^{-ν|ξ|²t}` on `Qu`).
//! Everything else, including the acoustic coupling, is advanced by an
//! explicit Runge-Kutta method in the Lawson (integrating-factor) form.
//! Both schemes have non-decreasing stage times, so only decaying
//! exponentials are ever applied.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::rhs::{explicit_tendency, ModalState, ScanStats, ViscousFactors};
use crate::spectral::{ScalarField, SpectralGrid};
use crate::state::{validate_state, PerturbationState, PhysicalParams, ValidityReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    /// Heun's third-order method, nodes `(0, 1/3, 2/3)`.
    #[default]
    IfRk3,
    /// Heun's second-order method, nodes `(0, 1)`.
    IfRk2,
}

impl Scheme {
    pub fn order(self) -> u32 {
        match self {
            Scheme::IfRk3 => 3,
            Scheme::IfRk2 => 2,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::IfRk3 => "if_rk3",
            Scheme::IfRk2 => "if_rk2",
        })
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "if_rk3" => Ok(Scheme::IfRk3),
            "if_rk2" => Ok(Scheme::IfRk2),
            other => Err(Error::InvalidParameter(format!(
                "unknown scheme '{other}' (expected if_rk3 or if_rk2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    /// Advective CFL safety factor in `(0, 1]`.
    pub cfl: f64,
    pub dt_max: f64,
    pub t_end: f64,
    pub scheme: Scheme,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            cfl: 0.4,
            dt_max: f64::INFINITY,
            t_end: 1.0,
            scheme: Scheme::IfRk3,
        }
    }
}

impl StepControl {
    pub fn validate(&self) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::InvalidParameter(format!("cfl must lie in (0, 1], got {}", self.cfl)));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::InvalidParameter(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !self.t_end.is_finite() {
            return Err(Error::InvalidParameter("t_end must be finite".into()));
        }
        Ok(())
    }

    fn dt_from_speeds(&self, dx: f64, max_speed: f64, max_fast: f64) -> f64 {
        let bound = self.cfl * dx / (max_speed + max_fast);
        if bound.is_finite() {
            bound.min(self.dt_max)
        } else {
            self.dt_max
        }
    }
}

/// `min(dt_max, cfl·Δx/(max|u| + max c_fast))` with the fast magnetosonic
/// speed `c_fast = sqrt(P'(1+a) + (1+b)²/(1+a))`.
pub fn compute_dt(state: &PerturbationState, params: &PhysicalParams, ctl: &StepControl) -> f64 {
    let mut max_speed = 0.0_f64;
    let mut max_fast = 0.0_f64;
    let (a, b) = (state.a.values(), state.b.values());
    let (ux, uy) = (state.u.x().values(), state.u.y().values());
    for i in 0..a.len() {
        max_speed = max_speed.max(ux[i].hypot(uy[i]));
        max_fast = max_fast.max(params.fast_speed(a[i], b[i]));
    }
    ctl.dt_from_speeds(state.grid().dx(), max_speed, max_fast)
}

/// A state snapshot handed to the observer of [`integrate`].
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub state: PerturbationState,
    /// Transported `δ`, when tracking was requested.
    pub delta: Option<ScalarField>,
    pub step: usize,
}

/// Stepper holding the solution in coefficient space.
#[derive(Debug, Clone)]
pub struct Stepper {
    grid: Arc<SpectralGrid>,
    params: PhysicalParams,
    ctl: StepControl,
    modal: ModalState,
    t: f64,
    last_valid: f64,
    steps: usize,
    factors: Option<(ViscousFactors, ViscousFactors)>,
}

impl Stepper {
    pub fn new(state0: &PerturbationState, params: &PhysicalParams, ctl: &StepControl) -> Result<Self> {
        Self::build(state0, None, params, ctl)
    }

    /// Also transports `δ` by `∂ₜδ + div(δu) + φ div u = 0`.
    pub fn with_delta(
        state0: &PerturbationState,
        delta0: &ScalarField,
        params: &PhysicalParams,
        ctl: &StepControl,
    ) -> Result<Self> {
        crate::spectral::same_grid(state0.grid(), delta0.grid())?;
        Self::build(state0, Some(delta0), params, ctl)
    }

    fn build(
        state0: &PerturbationState,
        delta0: Option<&ScalarField>,
        params: &PhysicalParams,
        ctl: &StepControl,
    ) -> Result<Self> {
        params.validate()?;
        ctl.validate()?;
        let report = validate_state(state0);
        if !report.is_valid() {
            return Err(Error::InvalidState(report));
        }
        Ok(Stepper {
            grid: state0.grid().clone(),
            params: *params,
            ctl: *ctl,
            modal: ModalState::from_state(state0, delta0),
            t: state0.t,
            last_valid: state0.t,
            steps: 0,
            factors: None,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn state(&self) -> PerturbationState {
        self.modal.to_state(&self.grid, self.t)
    }

    pub fn delta(&self) -> Option<ScalarField> {
        self.modal.delta_field(&self.grid)
    }

    pub fn snapshot(&self) -> Snapshot {
        Snapshot {
            state: self.state(),
            delta: self.delta(),
            step: self.steps,
        }
    }

    fn factors(&mut self, h: f64) -> (ViscousFactors, ViscousFactors) {
        let stale = match &self.factors {
            Some((f, _)) => f.h != h / 3.0,
            None => true,
        };
        if stale {
            self.factors = Some((
                ViscousFactors::new(&self.grid, &self.params, h / 3.0),
                ViscousFactors::new(&self.grid, &self.params, h),
            ));
        }
        self.factors.clone().expect("just built")
    }

    fn gate(&self, stats: &ScanStats) -> Result<()> {
        if stats.report.is_valid() {
            Ok(())
        } else {
            Err(Error::ValidityGate {
                t: self.t,
                last_valid_t: self.last_valid,
                report: stats.report,
            })
        }
    }

    /// Advances by one step of size `dt` (or the CFL step when `dt` is
    /// `None`), never past `t_end`. Returns the step taken.
    pub fn advance(&mut self, dt: Option<f64>) -> Result<f64> {
        let (k1, stats) = explicit_tendency(&self.grid, &self.params, &self.modal);
        self.gate(&stats)?;
        let mut h = dt.unwrap_or_else(|| self.ctl.dt_from_speeds(self.grid.dx(), stats.max_speed, stats.max_fast));
        if dt.is_none() {
            let remaining = self.ctl.t_end - self.t;
            if h >= remaining || remaining - h < 1e-9 * h {
                h = remaining;
            }
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidParameter(format!("time step must be positive, got {h}")));
        }
        self.last_valid = self.t;
        let (e_third, e_full) = match self.ctl.scheme {
            Scheme::IfRk3 => self.factors(h),
            Scheme::IfRk2 => {
                let f = ViscousFactors::new(&self.grid, &self.params, h);
                (f.clone(), f)
            }
        };
        let u = &self.modal;
        let next = match self.ctl.scheme {
            Scheme::IfRk3 => {
                let mut u2 = u.plus(h / 3.0, &k1);
                u2.apply_viscous(&e_third);
                let (k2, _) = explicit_tendency(&self.grid, &self.params, &u2);

                let mut u3 = u.clone();
                u3.apply_viscous(&e_third);
                u3.axpy(2.0 * h / 3.0, &k2);
                u3.apply_viscous(&e_third);
                let (mut k3, _) = explicit_tendency(&self.grid, &self.params, &u3);

                let mut out = u.plus(h / 4.0, &k1);
                out.apply_viscous(&e_full);
                k3.apply_viscous(&e_third);
                out.axpy(0.75 * h, &k3);
                out
            }
            Scheme::IfRk2 => {
                let mut u2 = u.plus(h, &k1);
                u2.apply_viscous(&e_full);
                let (k2, _) = explicit_tendency(&self.grid, &self.params, &u2);

                let mut out = u.plus(h / 2.0, &k1);
                out.apply_viscous(&e_full);
                out.axpy(h / 2.0, &k2);
                out
            }
        };
        self.modal = next;
        self.t += h;
        self.steps += 1;
        Ok(h)
    }

    /// Full validity scan of the current state.
    pub fn check(&self) -> Result<ValidityReport> {
        let report = validate_state(&self.state());
        if report.is_valid() {
            Ok(report)
        } else {
            Err(Error::ValidityGate {
                t: self.t,
                last_valid_t: self.last_valid,
                report,
            })
        }
    }
}

/// One step of size `dt` from `state`.
pub fn step(
    state: &PerturbationState,
    dt: f64,
    params: &PhysicalParams,
    ctl: &StepControl,
) -> Result<PerturbationState> {
    let mut s = Stepper::new(state, params, ctl)?;
    s.advance(Some(dt))?;
    s.check()?;
    Ok(s.state())
}

/// Integrates to `ctl.t_end`, calling `observe` on the initial state, every
/// `stride` steps and on the final state at exactly `t_end`.
pub fn integrate<T>(
    state0: &PerturbationState,
    params: &PhysicalParams,
    ctl: &StepControl,
    stride: usize,
    observe: impl FnMut(&Snapshot) -> Result<T>,
) -> Result<Vec<T>> {
    let stepper = Stepper::new(state0, params, ctl)?;
    run(stepper, stride, observe)
}

/// As [`integrate`], also transporting `δ` from `delta0`.
pub fn integrate_with_delta<T>(
    state0: &PerturbationState,
    delta0: &ScalarField,
    params: &PhysicalParams,
    ctl: &StepControl,
    stride: usize,
    observe: impl FnMut(&Snapshot) -> Result<T>,
) -> Result<Vec<T>> {
    let stepper = Stepper::with_delta(state0, delta0, params, ctl)?;
    run(stepper, stride, observe)
}

fn run<T>(
    mut stepper: Stepper,
    stride: usize,
    mut observe: impl FnMut(&Snapshot) -> Result<T>,
) -> Result<Vec<T>> {
    if stride == 0 {
        return Err(Error::InvalidParameter("observer stride must be >= 1".into()));
    }
    let t_end = stepper.ctl.t_end;
    if t_end < stepper.t {
        return Err(Error::InvalidParameter(format!(
            "t_end = {t_end} precedes the initial time {}",
            stepper.t
        )));
    }
    let mut out = vec![observe(&stepper.snapshot())?];
    while stepper.t < t_end {
        stepper.advance(None)?;
        let done = stepper.t >= t_end;
        if done {
            stepper.t = t_end;
            stepper.check()?;
        }
        if done || stepper.steps % stride == 0 {
            out.push(observe(&stepper.snapshot())?);
        }
    }
    Ok(out)
}
