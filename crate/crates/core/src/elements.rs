//! Analog computing blocks and their transfer characteristics.
//!
//! All quantities are dimensionless: capacitances, resistances and time are
//! plain reals, with `C = 1` and `R = 1` as the customary defaults.
//! Operational amplifiers are ideal.

use crate::expr::{Bindings, EvalError, Expr};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ElementError {
    #[error("{gains} gains for {inputs} inputs")]
    LengthMismatch { gains: usize, inputs: usize },
    #[error("element has no inputs")]
    NoInputs,
    #[error("capacitance must be positive, got {0}")]
    NonPositiveCapacitance(f64),
    #[error("input resistance must be positive, got {0}")]
    NonPositiveResistance(f64),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Memristive device placed in the input branch of an integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct Memristor {
    /// Memductance `g(t, v, omega)`.
    pub memductance: Expr,
    pub state: MemristorState,
}

#[derive(Debug, Clone, PartialEq)]
pub enum MemristorState {
    /// The device carries its own state variable with `omega' = f(t, v, omega)`.
    Own { dynamics: Expr, omega0: f64 },
    /// The device has no state of its own; its `omega` terminal receives the
    /// memductance value of the named upstream memristive integrator, which
    /// realizes the nested composition `g_n(g_{n-1}(...))`.
    Composed { inner: String },
}

/// One computing block, wired to named signal nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    /// `out = -sum K_i * in_i`.
    Adder {
        out: String,
        /// `(node, K_i)` pairs, `K_i = R_f / R_i`.
        inputs: Vec<(String, f64)>,
    },
    /// `out' = -(1/C) sum in_i / R_i`, `out(0) = ic`.
    Integrator {
        out: String,
        capacitance: f64,
        ic: f64,
        /// `(node, R_i)` pairs.
        inputs: Vec<(String, f64)>,
    },
    /// `out = alpha * in`, `0 < alpha < 1`.
    Potentiometer { out: String, input: String, alpha: f64 },
    /// `out = in_0 * in_1`.
    Multiplier { out: String, inputs: [String; 2] },
    /// `out = signal(t)`, or `signal(t, v)` with `v` bound to `input` when the
    /// generator is driven by another node.
    FunctionGenerator {
        out: String,
        input: Option<String>,
        signal: Expr,
    },
    /// Integrator whose input resistor is replaced by a memristor:
    /// `out' = -(1/C) g(t, v, omega) v` with `v` the input voltage, and
    /// `omega' = f(t, v, omega)`. Without an explicit input the integrator
    /// feeds back its own output.
    MemIntegrator {
        out: String,
        input: Option<String>,
        capacitance: f64,
        ic: f64,
        memristor: Memristor,
    },
}

impl Element {
    pub fn kind(&self) -> ElementKind {
        match self {
            Element::Adder { .. } => ElementKind::Adder,
            Element::Integrator { .. } => ElementKind::Integrator,
            Element::Potentiometer { .. } => ElementKind::Potentiometer,
            Element::Multiplier { .. } => ElementKind::Multiplier,
            Element::FunctionGenerator { .. } => ElementKind::FunctionGenerator,
            Element::MemIntegrator { .. } => ElementKind::MemIntegrator,
        }
    }

    pub fn output(&self) -> &str {
        match self {
            Element::Adder { out, .. }
            | Element::Integrator { out, .. }
            | Element::Potentiometer { out, .. }
            | Element::Multiplier { out, .. }
            | Element::FunctionGenerator { out, .. }
            | Element::MemIntegrator { out, .. } => out,
        }
    }

    /// Nodes read by this element. A self-fed memristive integrator reads
    /// its own output.
    pub fn inputs(&self) -> Vec<&str> {
        match self {
            Element::Adder { inputs, .. } | Element::Integrator { inputs, .. } => {
                inputs.iter().map(|(n, _)| n.as_str()).collect()
            }
            Element::Potentiometer { input, .. } => vec![input.as_str()],
            Element::Multiplier { inputs, .. } => inputs.iter().map(String::as_str).collect(),
            Element::FunctionGenerator { input, .. } => input.iter().map(String::as_str).collect(),
            Element::MemIntegrator { input, out, .. } => {
                vec![input.as_deref().unwrap_or(out.as_str())]
            }
        }
    }

    /// Whether the output is a state variable rather than an instantaneous
    /// function of the inputs.
    pub fn has_memory(&self) -> bool {
        matches!(self, Element::Integrator { .. } | Element::MemIntegrator { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    Adder,
    Integrator,
    Potentiometer,
    Multiplier,
    FunctionGenerator,
    MemIntegrator,
}

/// Adder output `-sum K_i V_i`. A single input with `K = 1` is a sign inverter.
pub fn adder_output(gains: &[f64], inputs: &[f64]) -> Result<f64, ElementError> {
    if gains.len() != inputs.len() {
        return Err(ElementError::LengthMismatch {
            gains: gains.len(),
            inputs: inputs.len(),
        });
    }
    if gains.is_empty() {
        return Err(ElementError::NoInputs);
    }
    Ok(adder_sum(gains.iter().copied().zip(inputs.iter().copied())))
}

/// `-sum K_i V_i` over `(K_i, V_i)` pairs.
pub(crate) fn adder_sum(terms: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    -terms.into_iter().map(|(k, v)| k * v).sum::<f64>()
}

/// `-(1/C) sum V_i / R_i` over `(V_i, R_i)` pairs.
pub(crate) fn integrator_slope(capacitance: f64, terms: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let sum: f64 = terms.into_iter().map(|(v, r)| v / r).sum();
    -sum / capacitance
}

/// Slope of an integrator output, `-(1/C) sum V_i / R_i`.
pub fn integrator_rhs(capacitance: f64, resistances: &[f64], inputs: &[f64]) -> Result<f64, ElementError> {
    if !(capacitance > 0.0) {
        return Err(ElementError::NonPositiveCapacitance(capacitance));
    }
    if resistances.len() != inputs.len() {
        return Err(ElementError::LengthMismatch {
            gains: resistances.len(),
            inputs: inputs.len(),
        });
    }
    if let Some(&r) = resistances.iter().find(|r| !(**r > 0.0)) {
        return Err(ElementError::NonPositiveResistance(r));
    }
    Ok(integrator_slope(
        capacitance,
        inputs.iter().copied().zip(resistances.iter().copied()),
    ))
}

/// Current through a memristive device.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemristorCurrent {
    pub current: f64,
    pub memductance: f64,
    /// Raised when the memductance is negative, i.e. the device would have
    /// to be active.
    pub passivity_violation: bool,
}

/// `i = g(t, v, omega) v`.
pub fn memristor_current(g: &Expr, t: f64, v: f64, omega: f64) -> Result<MemristorCurrent, ElementError> {
    let memductance = g.eval(&Bindings::tvw(t, v, omega))?;
    Ok(MemristorCurrent {
        current: memductance * v,
        memductance,
        passivity_violation: memductance < 0.0,
    })
}

/// `omega' = f(t, v, omega)`.
pub fn memristor_state_rhs(f: &Expr, t: f64, v: f64, omega: f64) -> Result<f64, ElementError> {
    Ok(f.eval(&Bindings::tvw(t, v, omega))?)
}
