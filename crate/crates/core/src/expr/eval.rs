use super::ast::{BinaryOp, Expr, UnaryOp, Var};
use std::fmt;
use thiserror::Error;

/// Values for the expression variables. Unset variables are unbound.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Bindings {
    values: [Option<f64>; 4],
}

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, var: Var, value: f64) -> Self {
        self.set(var, value);
        self
    }

    pub fn set(&mut self, var: Var, value: f64) {
        self.values[var as usize] = Some(value);
    }

    pub fn get(&self, var: Var) -> Option<f64> {
        self.values[var as usize]
    }

    /// Bindings for the `(t, v, omega)` triple used by memristor expressions.
    pub fn tvw(t: f64, v: f64, omega: f64) -> Self {
        Self::new().with(Var::T, t).with(Var::V, v).with(Var::Omega, omega)
    }
}

impl fmt::Display for Bindings {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for var in Var::ALL {
            if let Some(x) = self.get(var) {
                if !first {
                    f.write_str(", ")?;
                }
                first = false;
                write!(f, "{var}={x}")?;
            }
        }
        if first {
            f.write_str("(none)")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("variable `{0}` is unbound")]
    Unbound(Var),
    #[error("ln of non-positive argument {0}")]
    LnDomain(f64),
    #[error("division by zero")]
    DivisionByZero,
    #[error("non-finite result from {0}")]
    NonFinite(&'static str),
}

/// Lower clamp applied to `ln` arguments by the simulator.
///
/// The plain evaluator never clamps; callers that want the clamp opt in
/// through [`Expr::eval_clamped`] and read the activation count afterwards.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LnClamp {
    pub floor: f64,
    pub activations: usize,
}

impl LnClamp {
    pub fn new(floor: f64) -> Self {
        Self { floor, activations: 0 }
    }
}

impl Expr {
    /// Evaluate with IEEE double arithmetic.
    pub fn eval(&self, b: &Bindings) -> Result<f64, EvalError> {
        eval_node(self, b, &mut None)
    }

    /// Evaluate, clamping `ln` arguments below `clamp.floor` to the floor.
    pub fn eval_clamped(&self, b: &Bindings, clamp: &mut LnClamp) -> Result<f64, EvalError> {
        eval_node(self, b, &mut Some(clamp))
    }
}

fn finite(x: f64, what: &'static str) -> Result<f64, EvalError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(EvalError::NonFinite(what))
    }
}

fn eval_node(e: &Expr, b: &Bindings, clamp: &mut Option<&mut LnClamp>) -> Result<f64, EvalError> {
    match e {
        Expr::Const(c) => Ok(*c),
        Expr::Var(v) => b.get(*v).ok_or(EvalError::Unbound(*v)),
        Expr::Unary(op, a) => {
            let x = eval_node(a, b, clamp)?;
            match op {
                UnaryOp::Neg => Ok(-x),
                UnaryOp::Exp => finite(x.exp(), "exp"),
                UnaryOp::Ln => {
                    let arg = match clamp {
                        Some(c) if x < c.floor => {
                            c.activations += 1;
                            c.floor
                        }
                        _ => x,
                    };
                    if arg <= 0.0 {
                        Err(EvalError::LnDomain(arg))
                    } else {
                        finite(arg.ln(), "ln")
                    }
                }
                UnaryOp::Sin => finite(x.sin(), "sin"),
                UnaryOp::Cos => finite(x.cos(), "cos"),
                UnaryOp::Sqrt => finite(x.sqrt(), "sqrt"),
                UnaryOp::Abs => Ok(x.abs()),
            }
        }
        Expr::Binary(op, l, r) => {
            let x = eval_node(l, b, clamp)?;
            let y = eval_node(r, b, clamp)?;
            match op {
                BinaryOp::Add => finite(x + y, "addition"),
                BinaryOp::Sub => finite(x - y, "subtraction"),
                BinaryOp::Mul => finite(x * y, "multiplication"),
                BinaryOp::Div => {
                    if y == 0.0 {
                        Err(EvalError::DivisionByZero)
                    } else {
                        finite(x / y, "division")
                    }
                }
                BinaryOp::Pow => finite(x.powf(y), "power"),
            }
        }
    }
}
