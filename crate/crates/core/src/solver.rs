//! Fixed-step classical Runge-Kutta integration of lowered circuits.

use crate::expr::{EvalError, LnClamp};
use crate::netlist::{DomainFault, OdeSystem};
use crate::waveform::Waveform;
use thiserror::Error;

/// States beyond this magnitude count as a blow-up.
pub const BLOW_UP_THRESHOLD: f64 = 1e12;
pub const DEFAULT_DT: f64 = 1e-3;
pub const DEFAULT_LN_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub ln_floor: f64,
    /// Extra channels to record besides `output`: node names or
    /// `omega:<element>`.
    pub record_channels: Vec<String>,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        Self {
            dt,
            t_end,
            ln_floor: DEFAULT_LN_FLOOR,
            record_channels: Vec::new(),
        }
    }

    pub fn recording(mut self, channels: &[&str]) -> Self {
        self.record_channels = channels.iter().map(|c| c.to_string()).collect();
        self
    }

    /// Number of steps; the grid is `t_i = i*dt`, `i = 0..=steps`.
    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("domain error at step {step} (t = {t}): {fault}")]
    Domain {
        step: usize,
        t: f64,
        fault: Box<DomainFault>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowUp {
    /// Index of the first sample that was not recorded.
    pub step: usize,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub waveform: Waveform,
    pub blow_up: Option<BlowUp>,
    pub ln_clamp_activations: usize,
    /// Steps that began with a negative memductance on some device.
    pub passivity_violation_steps: usize,
}

#[derive(Clone, Copy)]
enum Channel {
    Output,
    Node(usize),
    State(usize),
}

fn resolve(sys: &OdeSystem, name: &str) -> Result<Channel, SolverError> {
    if name == "output" {
        return Ok(Channel::Output);
    }
    if let Some(id) = name.strip_prefix("omega:") {
        return sys
            .omega_state(id)
            .map(Channel::State)
            .ok_or_else(|| SolverError::UnknownChannel(name.into()));
    }
    sys.node_index(name)
        .map(Channel::Node)
        .ok_or_else(|| SolverError::UnknownChannel(name.into()))
}

fn validate(cfg: &SimConfig) -> Result<(), SolverError> {
    let ok = cfg.dt.is_finite() && cfg.t_end.is_finite() && cfg.dt > 0.0 && cfg.dt < cfg.t_end;
    if !ok {
        return Err(SolverError::Config(format!(
            "need 0 < dt < t_end, got dt = {}, t_end = {}",
            cfg.dt, cfg.t_end
        )));
    }
    if !(cfg.ln_floor > 0.0) {
        return Err(SolverError::Config(format!(
            "ln_floor must be positive, got {}",
            cfg.ln_floor
        )));
    }
    Ok(())
}

fn blown(x: &[f64]) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > BLOW_UP_THRESHOLD)
}

/// Integrate `sys` from `t = 0` to `cfg.t_end`.
///
/// The state update uses compensated summation so that rounding stays well
/// below the truncation error even at small `dt`.
pub fn simulate(sys: &OdeSystem, cfg: &SimConfig) -> Result<Simulation, SolverError> {
    validate(cfg)?;
    let mut names = vec!["output".to_string()];
    let mut channels = vec![Channel::Output];
    for c in &cfg.record_channels {
        if c != "output" {
            channels.push(resolve(sys, c)?);
            names.push(c.clone());
        }
    }

    let dim = sys.dimension();
    let steps = cfg.steps();
    let dt = cfg.dt;
    let mut ws = sys.workspace();
    let mut clamp = LnClamp::new(cfg.ln_floor);
    let mut wave = Waveform::new(0.0, dt, names);
    let mut x = sys.initial_state();
    let mut comp = vec![0.0; dim];
    let mut k = [vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]];
    let mut probe = vec![0.0; dim];
    let mut row = vec![0.0; channels.len()];
    let mut passivity = 0;
    let mut blow_up = None;

    for i in 0..=steps {
        let t = i as f64 * dt;
        let domain = |fault: DomainFault| {
            if matches!(fault.source, EvalError::NonFinite(_)) {
                Ok(BlowUp { step: i, t })
            } else {
                Err(SolverError::Domain {
                    step: i,
                    t,
                    fault: Box::new(fault),
                })
            }
        };

        // k1 also leaves the node signals of (t, x) in the workspace
        if let Err(f) = sys.derivatives(t, &x, &mut k[0], &mut ws, &mut clamp) {
            blow_up = Some(domain(f)?);
            break;
        }
        let y = match sys.output_value(t, &ws, &mut clamp) {
            Ok(y) => y,
            Err(f) => {
                blow_up = Some(domain(f)?);
                break;
            }
        };
        for (r, c) in row.iter_mut().zip(&channels) {
            *r = match *c {
                Channel::Output => y,
                Channel::Node(n) => ws.nodes[n],
                Channel::State(s) => x[s],
            };
        }
        wave.push(&row);
        if i == steps {
            break;
        }
        if sys.passivity_violations(&ws) > 0 {
            passivity += 1;
        }

        let stages = [(0.5, 0.5), (0.5, 0.5), (1.0, 1.0)];
        let mut failed = None;
        for (s, (c, a)) in stages.iter().enumerate() {
            let (done, rest) = k.split_at_mut(s + 1);
            for j in 0..dim {
                probe[j] = x[j] + a * dt * done[s][j];
            }
            if let Err(f) = sys.derivatives(t + c * dt, &probe, &mut rest[0], &mut ws, &mut clamp) {
                failed = Some(f);
                break;
            }
        }
        if let Some(f) = failed {
            blow_up = Some(domain(f)?);
            break;
        }

        for j in 0..dim {
            let inc = dt / 6.0 * (k[0][j] + 2.0 * k[1][j] + 2.0 * k[2][j] + k[3][j]);
            // Kahan summation
            let y = inc - comp[j];
            let sum = x[j] + y;
            comp[j] = (sum - x[j]) - y;
            x[j] = sum;
        }
        if blown(&x) {
            blow_up = Some(BlowUp {
                step: i + 1,
                t: (i + 1) as f64 * dt,
            });
            break;
        }
    }

    Ok(Simulation {
        waveform: wave,
        blow_up,
        ln_clamp_activations: clamp.activations,
        passivity_violation_steps: passivity,
    })
}
