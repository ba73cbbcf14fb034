//! Scalar expression language for memductances, state dynamics, kernels
//! and time signals.
//!
//! Expressions range over the variables `t`, `s`, `v` and `omega`. Each
//! usage site declares which of them it accepts; the parser rejects the
//! rest. The grammar is in [`parse`].

mod ast;
mod eval;
pub mod parse;

pub use ast::{BinaryOp, Expr, UnaryOp, Var, VarSet};
pub use eval::{Bindings, EvalError, LnClamp};
pub use parse::{parse_expr, ParseError};

/// Allowed-variable sets for the usage sites in this crate.
pub mod scope {
    use super::{Var, VarSet};

    /// Memristor memductance `g` and state dynamics `f`.
    pub fn memristor() -> VarSet {
        VarSet::of(&[Var::T, Var::V, Var::Omega])
    }

    /// Time-only signals: function generators, `k1(t)`, `p(t)`.
    pub fn time() -> VarSet {
        VarSet::of(&[Var::T])
    }

    /// Function generators driven by an input voltage.
    pub fn driven_signal() -> VarSet {
        VarSet::of(&[Var::T, Var::V])
    }

    /// Kernel factor `k2(s)`.
    pub fn history() -> VarSet {
        VarSet::of(&[Var::S])
    }

    /// Two-variable kernel `K(t, s)`.
    pub fn kernel() -> VarSet {
        VarSet::of(&[Var::T, Var::S])
    }

    /// Output transforms and memory-term integrands.
    pub fn readout() -> VarSet {
        VarSet::of(&[Var::T, Var::V])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn arb_expr() -> impl Strategy<Value = Expr> {
        let leaf = prop_oneof![
            (0.0f64..1e6).prop_map(Expr::Const),
            prop::sample::select(Var::ALL.to_vec()).prop_map(Expr::Var),
        ];
        leaf.prop_recursive(5, 48, 2, |inner| {
            prop_oneof![
                (
                    prop::sample::select(vec![
                        UnaryOp::Neg,
                        UnaryOp::Exp,
                        UnaryOp::Ln,
                        UnaryOp::Sin,
                        UnaryOp::Cos,
                        UnaryOp::Sqrt,
                        UnaryOp::Abs
                    ]),
                    inner.clone()
                )
                    .prop_map(|(op, e)| Expr::unary(op, e)),
                (
                    prop::sample::select(vec![
                        BinaryOp::Add,
                        BinaryOp::Sub,
                        BinaryOp::Mul,
                        BinaryOp::Div,
                        BinaryOp::Pow
                    ]),
                    inner.clone(),
                    inner
                )
                    .prop_map(|(op, a, b)| Expr::binary(op, a, b)),
            ]
        })
    }

    proptest! {
        #[test]
        fn print_then_parse_is_identity(e in arb_expr()) {
            let printed = e.to_string();
            let reparsed = parse_expr(&printed, VarSet::all()).unwrap();
            prop_assert_eq!(&reparsed, &e, "printed as {}", printed);
        }

        #[test]
        fn parse_print_parse_round_trip(e in arb_expr()) {
            // parse(print(parse(src))) == parse(src) for sources produced by the printer
            let src = e.to_string();
            let once = parse_expr(&src, VarSet::all()).unwrap();
            let twice = parse_expr(&once.to_string(), VarSet::all()).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn eval_is_deterministic(e in arb_expr(), t in -3.0f64..3.0, v in -3.0f64..3.0) {
            let b = Bindings::new().with(Var::T, t).with(Var::S, t * 0.5).with(Var::V, v).with(Var::Omega, 0.25);
            let first = e.eval(&b);
            let second = e.eval(&b);
            match (first, second) {
                (Ok(x), Ok(y)) => prop_assert_eq!(x.to_bits(), y.to_bits()),
                (a, b) => prop_assert_eq!(a, b),
            }
        }
    }

    #[test]
    fn printer_uses_compact_products() {
        let g = parse_expr("-2 + 0.001*v + exp(-t)*omega", scope::memristor()).unwrap();
        assert_eq!(g.to_string(), "-2 + 0.001*v + exp(-t)*omega");
        let f = parse_expr("exp(t)*t/(1+t)*v", scope::memristor()).unwrap();
        assert_eq!(f.to_string(), "exp(t)*t/(1 + t)*v");
    }

    #[test]
    fn negative_literals_print_reparseably() {
        let e = Expr::num(-0.5).mul(Expr::Var(Var::T)).exp();
        let back = parse_expr(&e.to_string(), VarSet::all()).unwrap();
        assert_eq!(back, e);
    }
}
