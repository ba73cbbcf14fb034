//! Reference solutions of the source equations, computed without any
//! circuit.
//!
//! Scalar problems have the form
//!
//! ```text
//! y^(n)(t) = R(t, v = y(t), omega = I(t)),   I(t) = int_0^t K(t, s) phi(s, y(s)) ds
//! ```
//!
//! and are stepped with Heun's predictor-corrector while `I` is evaluated by
//! the composite trapezoid rule over the whole stored history. Every step
//! revisits the history, so a run of `N` steps costs `O(N^2)` kernel
//! evaluations; `N = 4000` takes well under a second in release builds.
//!
//! Linear ODE systems are stepped with the same Heun scheme.
//!
//! Nothing here calls into the circuit simulator; only the expression
//! evaluator and [`Waveform`] are shared with it.

use crate::compiler::{EquationSpec, LinearOdeSystem};
use crate::expr::{Bindings, EvalError, Expr, Var};
use crate::waveform::Waveform;
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

const BLOW_UP: f64 = 1e12;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("oracle cannot represent this equation: {0}")]
    Unsupported(String),
    #[error("singular leading coefficient matrix")]
    Singular,
    #[error("{what} failed at t = {t}: {source}")]
    Domain {
        what: &'static str,
        t: f64,
        source: EvalError,
    },
}

/// The memory term `int_0^t K(t, s) phi(s, y(s)) ds`.
#[derive(Debug, Clone, PartialEq)]
pub struct Memory {
    /// Over `t` and `s`.
    pub kernel: Expr,
    /// Over `s` and `v`, with `v` bound to `y(s)`.
    pub integrand: Expr,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarIde {
    /// Over `t`, `v` and `omega`.
    pub rhs: Expr,
    pub memory: Option<Memory>,
    /// `y(0), y'(0), ..., y^(n-1)(0)`; its length is the order.
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdeSpec {
    Scalar(ScalarIde),
    /// Reports the first variable.
    Linear(LinearOdeSystem),
}

fn c(x: f64) -> Expr {
    Expr::num(x)
}

fn v() -> Expr {
    Expr::var(Var::V)
}

fn omega() -> Expr {
    Expr::var(Var::Omega)
}

impl IdeSpec {
    /// `N' = N (a - b N - int_0^t K(t, s) N(s) ds)`.
    pub fn volterra_population(a: f64, b: f64, kernel: Expr, n0: f64) -> Self {
        IdeSpec::Scalar(ScalarIde {
            rhs: v().mul(c(a).sub(c(b).mul(v())).sub(omega())),
            memory: Some(Memory { kernel, integrand: v() }),
            initial: vec![n0],
        })
    }

    /// `u' = int_0^t k(s) u(s) ds`.
    pub fn linear_first_order(k: Expr, u0: f64) -> Self {
        IdeSpec::Scalar(ScalarIde {
            rhs: omega(),
            memory: Some(Memory {
                kernel: k,
                integrand: v(),
            }),
            initial: vec![u0],
        })
    }

    /// `u' = -p(t) u - int_0^t K(t, s) u(s)^2 ds`.
    pub fn turbulent(p: Expr, kernel: Expr, u0: f64) -> Self {
        IdeSpec::Scalar(ScalarIde {
            rhs: p.neg().mul(v()).sub(omega()),
            memory: Some(Memory {
                kernel,
                integrand: v().mul(v()),
            }),
            initial: vec![u0],
        })
    }

    /// `y^(n) = -(1/C) g(t, y, omega) y` with `omega = omega0 + int_0^t f(s, y(s)) ds`.
    ///
    /// `f` may not depend on `omega`: the oracle only handles memory terms
    /// that are plain integrals of the history.
    pub fn memristive(
        capacitance: f64,
        g: &Expr,
        f: &Expr,
        omega0: f64,
        initial: Vec<f64>,
    ) -> Result<Self, OracleError> {
        if f.vars().contains(Var::Omega) {
            return Err(OracleError::Unsupported(format!(
                "state dynamics `{f}` depend on omega"
            )));
        }
        let shifted = g.substitute(Var::Omega, &c(omega0).add(omega()));
        Ok(IdeSpec::Scalar(ScalarIde {
            rhs: c(-1.0 / capacitance).mul(shifted).mul(v()),
            memory: Some(Memory {
                kernel: c(1.0),
                integrand: f.rename(Var::T, Var::S),
            }),
            initial,
        }))
    }

    /// Reference problem for an equation specification.
    pub fn from_equation(spec: &EquationSpec) -> Result<Self, OracleError> {
        Ok(match spec {
            EquationSpec::Linear(sys) => IdeSpec::Linear(sys.clone()),
            EquationSpec::VolterraPopulation(p) => IdeSpec::volterra_population(p.a, p.b, p.kernel.full(), p.n0),
            EquationSpec::LinearFirstOrder(p) => IdeSpec::linear_first_order(p.kernel.clone(), p.u0),
            EquationSpec::Turbulent(p) => IdeSpec::turbulent(p.p.clone(), p.kernel.full(), p.u0),
            EquationSpec::HigherOrder(p) => {
                IdeSpec::memristive(p.capacitance, &p.g, &p.f, p.omega0, p.initial.clone())?
            }
            EquationSpec::HigherOrderComposed(p) => IdeSpec::memristive(
                p.capacitance,
                &p.composed_memductance(),
                &p.f,
                p.omega0,
                p.initial.clone(),
            )?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleRun {
    /// Single channel `output`.
    pub waveform: Waveform,
    /// Time of the first sample dropped after the solution left the
    /// representable range.
    pub blow_up_at: Option<f64>,
}

fn grid(dt: f64, t_end: f64) -> Result<usize, OracleError> {
    if !(dt > 0.0 && dt < t_end && t_end.is_finite()) {
        return Err(OracleError::Grid(format!(
            "need 0 < dt < t_end, got dt = {dt}, t_end = {t_end}"
        )));
    }
    Ok((t_end / dt).round() as usize)
}

fn escaped(y: &[f64]) -> bool {
    y.iter().any(|x| !x.is_finite() || x.abs() > BLOW_UP)
}

pub fn solve_ide(spec: &IdeSpec, dt: f64, t_end: f64) -> Result<OracleRun, OracleError> {
    let steps = grid(dt, t_end)?;
    match spec {
        IdeSpec::Scalar(s) => solve_scalar(s, dt, steps),
        IdeSpec::Linear(s) => solve_linear(s, dt, steps),
    }
}

fn domain(what: &'static str, t: f64) -> impl FnOnce(EvalError) -> OracleError {
    move |source| OracleError::Domain { what, t, source }
}

struct History<'a> {
    memory: Option<&'a Memory>,
    dt: f64,
    /// `phi(s_i, y(s_i))`.
    phi: Vec<f64>,
}

impl History<'_> {
    fn phi_at(&self, s: f64, y: f64) -> Result<f64, OracleError> {
        let Some(m) = self.memory else { return Ok(0.0) };
        let b = Bindings::new().with(Var::S, s).with(Var::V, y);
        m.integrand.eval(&b).map_err(domain("memory integrand", s))
    }

    fn kernel(&self, t: f64, s: f64) -> Result<f64, OracleError> {
        let m = self.memory.expect("only called with a memory term");
        let b = Bindings::new().with(Var::T, t).with(Var::S, s);
        m.kernel.eval(&b).map_err(domain("kernel", t))
    }

    /// Trapezoid weights times kernel times phi over samples `0..len`,
    /// excluding the endpoint `t` itself, which the caller adds.
    fn bulk(&self, t: f64) -> Result<f64, OracleError> {
        if self.memory.is_none() {
            return Ok(0.0);
        }
        let mut sum = 0.0;
        for (i, phi) in self.phi.iter().enumerate() {
            let w = if i == 0 { 0.5 } else { 1.0 };
            sum += w * self.kernel(t, i as f64 * self.dt)? * phi;
        }
        Ok(sum)
    }

    /// `I(t)` from a bulk sum and the endpoint sample `phi(t, y(t))`.
    fn close(&self, t: f64, bulk: f64, phi_end: f64) -> Result<f64, OracleError> {
        if self.memory.is_none() || t == 0.0 {
            return Ok(0.0);
        }
        Ok(self.dt * (bulk + 0.5 * self.kernel(t, t)? * phi_end))
    }
}

fn rhs(s: &ScalarIde, t: f64, y: &[f64], memory: f64, out: &mut [f64]) -> Result<(), OracleError> {
    let n = y.len();
    out[..n - 1].copy_from_slice(&y[1..]);
    let b = Bindings::tvw(t, y[0], memory);
    out[n - 1] = s.rhs.eval(&b).map_err(domain("right-hand side", t))?;
    Ok(())
}

fn solve_scalar(s: &ScalarIde, dt: f64, steps: usize) -> Result<OracleRun, OracleError> {
    let n = s.initial.len();
    if n == 0 {
        return Err(OracleError::Unsupported("order must be at least 1".into()));
    }
    let mut hist = History {
        memory: s.memory.as_ref(),
        dt,
        phi: Vec::with_capacity(steps + 1),
    };
    let mut y = s.initial.clone();
    let mut out = vec![y[0]];
    let mut f0 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut pred = vec![0.0; n];
    let mut blow_up_at = None;

    hist.phi.push(hist.phi_at(0.0, y[0])?);
    let mut memory = 0.0;
    for j in 0..steps {
        let t = j as f64 * dt;
        let t1 = (j + 1) as f64 * dt;
        rhs(s, t, &y, memory, &mut f0)?;
        for i in 0..n {
            pred[i] = y[i] + dt * f0[i];
        }
        // the history sum up to t_j is shared by predictor and corrector
        let bulk = hist.bulk(t1)?;
        let phi_pred = hist.phi_at(t1, pred[0])?;
        let memory_pred = hist.close(t1, bulk, phi_pred)?;
        rhs(s, t1, &pred, memory_pred, &mut f1)?;
        for i in 0..n {
            y[i] += 0.5 * dt * (f0[i] + f1[i]);
        }
        if escaped(&y) {
            blow_up_at = Some(t1);
            break;
        }
        let phi = hist.phi_at(t1, y[0])?;
        memory = hist.close(t1, bulk, phi)?;
        hist.phi.push(phi);
        out.push(y[0]);
    }
    Ok(OracleRun {
        waveform: Waveform::from_columns(0.0, dt, vec![("output".into(), out)]),
        blow_up_at,
    })
}

fn solve_linear(sys: &LinearOdeSystem, dt: f64, steps: usize) -> Result<OracleRun, OracleError> {
    let m = sys.coefficients.len();
    let n = sys.order;
    let lead = DMatrix::from_fn(m, m, |l, i| sys.coefficients[l][i][n]);
    let lu = lead.lu();
    if !lu.is_invertible() {
        return Err(OracleError::Singular);
    }
    // state index i*n + k holds y_i^(k)
    let deriv = |y: &[f64], out: &mut [f64]| {
        let b = DVector::from_fn(m, |l, _| {
            -(0..m)
                .flat_map(|i| (0..n).map(move |k| (i, k)))
                .map(|(i, k)| sys.coefficients[l][i][k] * y[i * n + k])
                .sum::<f64>()
        });
        let top = lu.solve(&b).expect("checked invertible");
        for i in 0..m {
            for k in 0..n - 1 {
                out[i * n + k] = y[i * n + k + 1];
            }
            out[i * n + n - 1] = top[i];
        }
    };
    let mut y: Vec<f64> = (0..m)
        .flat_map(|i| (0..n).map(move |k| (i, k)))
        .map(|(i, k)| sys.initial[i][k])
        .collect();
    let dim = y.len();
    let (mut f0, mut f1, mut pred) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut out = vec![y[0]];
    let mut blow_up_at = None;
    for j in 0..steps {
        deriv(&y, &mut f0);
        for i in 0..dim {
            pred[i] = y[i] + dt * f0[i];
        }
        deriv(&pred, &mut f1);
        for i in 0..dim {
            y[i] += 0.5 * dt * (f0[i] + f1[i]);
        }
        if escaped(&y) {
            blow_up_at = Some((j + 1) as f64 * dt);
            break;
        }
        out.push(y[0]);
    }
    Ok(OracleRun {
        waveform: Waveform::from_columns(0.0, dt, vec![("output".into(), out)]),
        blow_up_at,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub dt: f64,
    pub terminal: f64,
    /// Richardson estimate of the error left in `terminal`, assuming
    /// second order; absent on the first row.
    pub richardson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// From the last three rows; absent when successive differences vanish.
    pub observed_order: Option<f64>,
}

/// Solve at each `dt` and estimate the discretization error.
///
/// `dts` must be strictly decreasing, have at least three entries and divide
/// `t_end` so that every run ends at the same time.
pub fn convergence_study(spec: &IdeSpec, dts: &[f64], t_end: f64) -> Result<ConvergenceTable, OracleError> {
    if dts.len() < 3 {
        return Err(OracleError::Grid("need at least three step sizes".into()));
    }
    if dts.windows(2).any(|w| w[1] >= w[0]) {
        return Err(OracleError::Grid("step sizes must be strictly decreasing".into()));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(dts.len());
    for &dt in dts {
        let steps = grid(dt, t_end)?;
        if ((steps as f64) * dt - t_end).abs() > 1e-9 * t_end {
            return Err(OracleError::Grid(format!("dt = {dt} does not divide t_end = {t_end}")));
        }
        let run = solve_ide(spec, dt, t_end)?;
        if let Some(t) = run.blow_up_at {
            return Err(OracleError::Grid(format!("solution escapes at t = {t} with dt = {dt}")));
        }
        let terminal = run.waveform.last("output").expect("at least one sample");
        let richardson = rows.last().map(|prev| {
            let r = prev.dt / dt;
            (terminal - prev.terminal) / (r * r - 1.0)
        });
        rows.push(ConvergenceRow {
            dt,
            terminal,
            richardson,
        });
    }
    let k = rows.len();
    let d1 = rows[k - 2].terminal - rows[k - 3].terminal;
    let d2 = rows[k - 1].terminal - rows[k - 2].terminal;
    let r = rows[k - 2].dt / rows[k - 1].dt;
    let observed_order = (d1 != 0.0 && d2 != 0.0).then(|| (d1.abs() / d2.abs()).ln() / r.ln());
    Ok(ConvergenceTable { rows, observed_order })
}
