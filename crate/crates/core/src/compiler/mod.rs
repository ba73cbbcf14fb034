//! Netlist synthesis for each supported equation family.
//!
//! | family | equation | circuit |
//! |---|---|---|
//! | [`LinearOdeSystem`] | `sum_i sum_k a[l][i][k] y_i^(k) = 0` | `n*m` integrators, adders only for sign flips |
//! | [`VolterraPopulation`] | `N' = N(a - bN - int K N)` | one memristive integrator |
//! | [`HigherOrder`] | `v^(n) = -(1/C) g v` | memristive integrator plus `n-1` integrators |
//! | [`HigherOrderComposed`] | as above with `g = g_n(...g_1)` | `n` memristive integrators |
//! | [`LinearFirstOrderIde`] | `u' = int k u` | one memristive integrator read through `ln` |
//! | [`TurbulentIde`] | `u' = -p u - int K u^2` | integrating-factor circuit with `1/alpha` recovery |
//!
//! Kernels must factor as `k1(t) k2(s)`; see [`separate_kernel`].

mod linear;
mod memristive;
pub mod spec_file;
mod symbolic;

use crate::expr::{Expr, Var};
use crate::netlist::Netlist;
use thiserror::Error;

pub use linear::compile_linear;
pub use memristive::{
    compile_higher_order, compile_linear_first_order, compile_turbulent, compile_volterra_population,
};
pub use spec_file::{parse_spec, SpecError};
pub use symbolic::{antiderivative, separate_kernel};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompileError {
    #[error(
        "unsupported kernel `{0}`: only kernels separable as k1(t)*k2(s) can be realized by a memristor state variable"
    )]
    NonSeparableKernel(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("leading coefficient matrix is singular; cannot solve for the highest derivative")]
    SingularLeading,
    #[error("invalid specification: {0}")]
    Invalid(String),
}

impl CompileError {
    /// Whether the input is well formed but outside what the circuits realize.
    pub fn is_unsupported(&self) -> bool {
        matches!(self, CompileError::NonSeparableKernel(_) | CompileError::Unsupported(_))
    }
}

/// `sum_i sum_{k=0..=n} a[l][i][k] y_i^(k) = 0` for each equation `l`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOdeSystem {
    pub order: usize,
    /// Indexed `[equation][variable][derivative order]`, square in the
    /// first two indices.
    pub coefficients: Vec<Vec<Vec<f64>>>,
    /// Indexed `[variable][derivative order < n]`.
    pub initial: Vec<Vec<f64>>,
}

/// Memory kernel `K(t, s)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    Separable { k1: Expr, k2: Expr },
    General(Expr),
}

impl Kernel {
    pub fn full(&self) -> Expr {
        match self {
            Kernel::Separable { k1, k2 } => k1.clone().mul(k2.clone()),
            Kernel::General(k) => k.clone(),
        }
    }

    /// `(k1(t), k2(s))`.
    pub fn factors(&self) -> Result<(Expr, Expr), CompileError> {
        match self {
            Kernel::Separable { k1, k2 } => Ok((k1.clone(), k2.clone())),
            Kernel::General(k) => separate_kernel(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VolterraPopulation {
    pub a: f64,
    pub b: f64,
    pub kernel: Kernel,
    pub n0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HigherOrder {
    pub capacitance: f64,
    pub g: Expr,
    pub f: Expr,
    pub omega0: f64,
    /// `v(0) .. v^(n-1)(0)`; its length is the order.
    pub initial: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HigherOrderComposed {
    pub capacitance: f64,
    /// `g_1 .. g_n`, innermost first; the length is the order.
    pub memductances: Vec<Expr>,
    pub f: Expr,
    pub omega0: f64,
    pub initial: Vec<f64>,
}

impl HigherOrderComposed {
    /// `g_n(g_{n-1}(... g_1(t, v, omega)))` with each outer `omega` replaced.
    pub fn composed_memductance(&self) -> Expr {
        let mut it = self.memductances.iter();
        let first = it.next().cloned().unwrap_or_else(|| Expr::var(Var::Omega));
        it.fold(first, |inner, outer| outer.substitute(Var::Omega, &inner))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearFirstOrderIde {
    /// `k(s)`.
    pub kernel: Expr,
    pub u0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TurbulentIde {
    /// `p(t)`.
    pub p: Expr,
    pub kernel: Kernel,
    pub u0: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum EquationSpec {
    Linear(LinearOdeSystem),
    VolterraPopulation(VolterraPopulation),
    HigherOrder(HigherOrder),
    HigherOrderComposed(HigherOrderComposed),
    LinearFirstOrder(LinearFirstOrderIde),
    Turbulent(TurbulentIde),
}

impl EquationSpec {
    pub fn family(&self) -> &'static str {
        match self {
            EquationSpec::Linear(_) => "linear",
            EquationSpec::VolterraPopulation(_) => "volterra",
            EquationSpec::HigherOrder(_) => "higher_order",
            EquationSpec::HigherOrderComposed(_) => "higher_order_composed",
            EquationSpec::LinearFirstOrder(_) => "linear_first_order",
            EquationSpec::Turbulent(_) => "turbulent",
        }
    }
}

/// Dispatch to the matching `compile_*`.
pub fn compile(spec: &EquationSpec) -> Result<Netlist, CompileError> {
    match spec {
        EquationSpec::Linear(s) => compile_linear(s),
        EquationSpec::VolterraPopulation(s) => compile_volterra_population(s),
        EquationSpec::HigherOrder(s) => compile_higher_order(&memristive::Chain::Single(s)),
        EquationSpec::HigherOrderComposed(s) => compile_higher_order(&memristive::Chain::Composed(s)),
        EquationSpec::LinearFirstOrder(s) => compile_linear_first_order(s),
        EquationSpec::Turbulent(s) => compile_turbulent(s),
    }
}

pub use memristive::Chain;
