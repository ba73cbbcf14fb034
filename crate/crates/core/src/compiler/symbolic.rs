//! Kernel factorization and a small antiderivative table.

use super::CompileError;
use crate::expr::{BinaryOp, Expr, UnaryOp, Var, VarSet};

#[derive(Default)]
struct Factors {
    num: Vec<Expr>,
    den: Vec<Expr>,
}

impl Factors {
    fn product(self) -> Expr {
        let prod = |v: Vec<Expr>| v.into_iter().reduce(Expr::mul);
        match (prod(self.num), prod(self.den)) {
            (None, None) => Expr::num(1.0),
            (Some(n), None) => n,
            (None, Some(d)) => Expr::num(1.0).div(d),
            (Some(n), Some(d)) => n.div(d),
        }
    }
}

fn collect(e: &Expr, inverted: bool, out: &mut Vec<(Expr, bool)>) {
    match e {
        Expr::Binary(BinaryOp::Mul, a, b) => {
            collect(a, inverted, out);
            collect(b, inverted, out);
        }
        Expr::Binary(BinaryOp::Div, a, b) => {
            collect(a, inverted, out);
            collect(b, !inverted, out);
        }
        Expr::Unary(UnaryOp::Neg, a) => {
            out.push((Expr::num(-1.0), false));
            collect(a, inverted, out);
        }
        other => out.push((other.clone(), inverted)),
    }
}

fn sum_terms(e: &Expr, negated: bool, out: &mut Vec<Expr>) {
    match e {
        Expr::Binary(BinaryOp::Add, a, b) => {
            sum_terms(a, negated, out);
            sum_terms(b, negated, out);
        }
        Expr::Binary(BinaryOp::Sub, a, b) => {
            sum_terms(a, negated, out);
            sum_terms(b, !negated, out);
        }
        Expr::Unary(UnaryOp::Neg, a) => sum_terms(a, !negated, out),
        other => out.push(if negated { other.clone().neg() } else { other.clone() }),
    }
}

fn only(e: &Expr, var: Var) -> bool {
    e.vars().is_subset(VarSet::of(&[var]))
}

/// Split one factor into `(t part, s part)`.
fn split_factor(f: &Expr) -> Option<(Option<Expr>, Option<Expr>)> {
    if only(f, Var::T) {
        return Some((Some(f.clone()), None));
    }
    if only(f, Var::S) {
        return Some((None, Some(f.clone())));
    }
    match f {
        // exp(a(t) + b(s)) = exp(a(t)) exp(b(s))
        Expr::Unary(UnaryOp::Exp, arg) => {
            let mut terms = Vec::new();
            sum_terms(arg, false, &mut terms);
            let (mut ts, mut ss) = (Vec::new(), Vec::new());
            for term in terms {
                if only(&term, Var::T) {
                    ts.push(term);
                } else if only(&term, Var::S) {
                    ss.push(term);
                } else {
                    return None;
                }
            }
            let join = |v: Vec<Expr>| v.into_iter().reduce(Expr::add).map(Expr::exp);
            Some((join(ts), join(ss)))
        }
        // (a(t) b(s))^c with constant c
        Expr::Binary(BinaryOp::Pow, base, exponent) if exponent.is_constant() => {
            let (t, s) = separate_kernel(base).ok()?;
            Some((Some(t.pow((**exponent).clone())), Some(s.pow((**exponent).clone()))))
        }
        _ => None,
    }
}

/// Factor `K(t, s)` as `k1(t) * k2(s)`.
///
/// Handles products and quotients of single-variable factors, `exp` of sums
/// of single-variable terms and constant powers of separable bases.
pub fn separate_kernel(kernel: &Expr) -> Result<(Expr, Expr), CompileError> {
    let mut factors = Vec::new();
    collect(kernel, false, &mut factors);
    let (mut t, mut s) = (Factors::default(), Factors::default());
    for (f, inverted) in factors {
        let (ft, fs) = split_factor(&f).ok_or_else(|| CompileError::NonSeparableKernel(kernel.to_string()))?;
        for (part, side) in [(ft, &mut t), (fs, &mut s)] {
            if let Some(p) = part {
                if inverted {
                    side.den.push(p);
                } else {
                    side.num.push(p);
                }
            }
        }
    }
    Ok((t.product(), s.product()))
}

/// `(a, b)` with `e = a t + b`, if `e` is affine in `t`.
fn affine(e: &Expr) -> Option<(f64, f64)> {
    if let Some(c) = e.constant_value() {
        return Some((0.0, c));
    }
    match e {
        Expr::Var(Var::T) => Some((1.0, 0.0)),
        Expr::Unary(UnaryOp::Neg, a) => affine(a).map(|(a, b)| (-a, -b)),
        Expr::Binary(op, l, r) => {
            let (la, lb) = affine(l)?;
            let (ra, rb) = affine(r)?;
            match op {
                BinaryOp::Add => Some((la + ra, lb + rb)),
                BinaryOp::Sub => Some((la - ra, lb - rb)),
                BinaryOp::Mul if la == 0.0 => Some((lb * ra, lb * rb)),
                BinaryOp::Mul if ra == 0.0 => Some((la * rb, lb * rb)),
                BinaryOp::Div if ra == 0.0 && rb != 0.0 => Some((la / rb, lb / rb)),
                _ => None,
            }
        }
        _ => None,
    }
}

fn t() -> Expr {
    Expr::var(Var::T)
}

/// `F(t) = int_0^t p`, with `F(0) = 0`, for integrands built from constants,
/// powers `t^n` (`n > -1`), `exp(a t + b)`, constant multiples, sums and
/// differences.
pub fn antiderivative(p: &Expr) -> Result<Expr, CompileError> {
    let unsupported = || CompileError::Unsupported(format!("no closed-form antiderivative for `{p}`"));
    if let Some(c) = p.constant_value() {
        return Ok(Expr::num(c).mul(t()));
    }
    match p {
        Expr::Var(Var::T) => Ok(t().pow(Expr::num(2.0)).div(Expr::num(2.0))),
        Expr::Unary(UnaryOp::Neg, a) => Ok(antiderivative(a)?.neg()),
        Expr::Unary(UnaryOp::Exp, arg) => {
            let (a, b) = affine(arg).ok_or_else(unsupported)?;
            if a == 0.0 {
                Ok(Expr::num(b.exp()).mul(t()))
            } else {
                // (exp(a t + b) - exp(b)) / a
                let at_zero = if b == 0.0 {
                    Expr::num(1.0)
                } else {
                    Expr::exp(Expr::num(b))
                };
                Ok(p.clone().sub(at_zero).div(Expr::num(a)))
            }
        }
        Expr::Binary(BinaryOp::Pow, base, exponent) if **base == t() => {
            let n = exponent.constant_value().ok_or_else(unsupported)?;
            if n <= -1.0 {
                return Err(unsupported());
            }
            Ok(t().pow(Expr::num(n + 1.0)).div(Expr::num(n + 1.0)))
        }
        Expr::Binary(op @ (BinaryOp::Add | BinaryOp::Sub), a, b) => {
            Ok(Expr::binary(*op, antiderivative(a)?, antiderivative(b)?))
        }
        Expr::Binary(BinaryOp::Mul, a, b) if a.is_constant() => Ok((**a).clone().mul(antiderivative(b)?)),
        Expr::Binary(BinaryOp::Mul, a, b) if b.is_constant() => Ok(antiderivative(a)?.mul((**b).clone())),
        Expr::Binary(BinaryOp::Div, a, b) if b.is_constant() => Ok(antiderivative(a)?.div((**b).clone())),
        _ => Err(unsupported()),
    }
}
