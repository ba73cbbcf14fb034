use std::fmt;

/// Variables an expression may refer to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    T,
    S,
    V,
    Omega,
}

impl Var {
    pub const ALL: [Var; 4] = [Var::T, Var::S, Var::V, Var::Omega];

    pub fn name(self) -> &'static str {
        match self {
            Var::T => "t",
            Var::S => "s",
            Var::V => "v",
            Var::Omega => "omega",
        }
    }

    pub fn from_name(name: &str) -> Option<Var> {
        match name {
            "t" => Some(Var::T),
            "s" => Some(Var::S),
            "v" => Some(Var::V),
            "omega" => Some(Var::Omega),
            _ => None,
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A small set of [`Var`]s.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct VarSet(u8);

impl VarSet {
    pub const EMPTY: VarSet = VarSet(0);

    pub fn of(vars: &[Var]) -> VarSet {
        VarSet(vars.iter().fold(0, |acc, v| acc | v.bit()))
    }

    pub fn all() -> VarSet {
        VarSet::of(&Var::ALL)
    }

    pub fn contains(self, var: Var) -> bool {
        self.0 & var.bit() != 0
    }

    pub fn insert(&mut self, var: Var) {
        self.0 |= var.bit();
    }

    pub fn union(self, other: VarSet) -> VarSet {
        VarSet(self.0 | other.0)
    }

    pub fn is_subset(self, other: VarSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn iter(self) -> impl Iterator<Item = Var> {
        Var::ALL.into_iter().filter(move |v| self.contains(*v))
    }
}

impl fmt::Display for VarSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, v) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            f.write_str(v.name())?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Exp,
    Ln,
    Sin,
    Cos,
    Sqrt,
    Abs,
}

impl UnaryOp {
    /// Function-call spelling, `None` for negation.
    pub fn function_name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Ln => Some("ln"),
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Sqrt => Some("sqrt"),
            UnaryOp::Abs => Some("abs"),
        }
    }

    pub fn from_function_name(name: &str) -> Option<UnaryOp> {
        match name {
            "exp" => Some(UnaryOp::Exp),
            "ln" => Some(UnaryOp::Ln),
            "sin" => Some(UnaryOp::Sin),
            "cos" => Some(UnaryOp::Cos),
            "sqrt" => Some(UnaryOp::Sqrt),
            "abs" => Some(UnaryOp::Abs),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    fn symbol(self) -> &'static str {
        match self {
            BinaryOp::Add => " + ",
            BinaryOp::Sub => " - ",
            BinaryOp::Mul => "*",
            BinaryOp::Div => "/",
            BinaryOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinaryOp::Add | BinaryOp::Sub => 1,
            BinaryOp::Mul | BinaryOp::Div => 2,
            BinaryOp::Pow => 4,
        }
    }
}

/// Scalar expression tree.
///
/// Trees are immutable once built and cheap to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

// Builder names mirror the operators; `Expr` does not implement the ops traits.
#[allow(clippy::should_implement_trait)]
impl Expr {
    /// Numeric literal; negative values are stored as a negated literal so
    /// that printing and reparsing reproduce the same tree.
    pub fn num(x: f64) -> Expr {
        if x.is_sign_negative() && x != 0.0 {
            Expr::Unary(UnaryOp::Neg, Box::new(Expr::Const(-x)))
        } else {
            Expr::Const(x)
        }
    }

    pub fn var(v: Var) -> Expr {
        Expr::Var(v)
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        Expr::Unary(op, Box::new(e))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn neg(self) -> Expr {
        Expr::unary(UnaryOp::Neg, self)
    }

    pub fn exp(self) -> Expr {
        Expr::unary(UnaryOp::Exp, self)
    }

    pub fn ln(self) -> Expr {
        Expr::unary(UnaryOp::Ln, self)
    }

    pub fn add(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, self, rhs)
    }

    pub fn sub(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, self, rhs)
    }

    pub fn mul(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, self, rhs)
    }

    pub fn div(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, self, rhs)
    }

    pub fn pow(self, rhs: Expr) -> Expr {
        Expr::binary(BinaryOp::Pow, self, rhs)
    }

    /// Set of variables occurring anywhere in the tree.
    pub fn vars(&self) -> VarSet {
        let mut set = VarSet::EMPTY;
        self.visit(&mut |e| {
            if let Expr::Var(v) = e {
                set.insert(*v);
            }
        });
        set
    }

    pub fn is_constant(&self) -> bool {
        self.vars().is_empty()
    }

    /// Value of a variable-free tree.
    pub fn constant_value(&self) -> Option<f64> {
        if self.is_constant() {
            self.eval(&super::Bindings::new()).ok()
        } else {
            None
        }
    }

    /// Pre-order traversal.
    pub fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Unary(_, a) => a.visit(f),
            Expr::Binary(_, a, b) => {
                a.visit(f);
                b.visit(f);
            }
        }
    }

    /// Replace every occurrence of `var` with `replacement`.
    pub fn substitute(&self, var: Var, replacement: &Expr) -> Expr {
        match self {
            Expr::Var(v) if *v == var => replacement.clone(),
            Expr::Const(_) | Expr::Var(_) => self.clone(),
            Expr::Unary(op, a) => Expr::unary(*op, a.substitute(var, replacement)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.substitute(var, replacement), b.substitute(var, replacement)),
        }
    }

    /// Rename a variable.
    pub fn rename(&self, from: Var, to: Var) -> Expr {
        self.substitute(from, &Expr::Var(to))
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Const(c) if c.is_sign_negative() => 3,
            Expr::Const(_) | Expr::Var(_) => 5,
            Expr::Unary(UnaryOp::Neg, _) => 3,
            Expr::Unary(_, _) => 5,
            Expr::Binary(op, _, _) => op.precedence(),
        }
    }

    /// Whether this node can stand as an exponent without parentheses.
    fn exponent_safe(&self) -> bool {
        match self {
            Expr::Unary(UnaryOp::Neg, a) => a.exponent_safe(),
            e => e.precedence() == 5,
        }
    }
}

fn write_wrapped(f: &mut fmt::Formatter<'_>, e: &Expr, wrap: bool) -> fmt::Result {
    if wrap {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c}"),
            Expr::Var(v) => f.write_str(v.name()),
            Expr::Unary(UnaryOp::Neg, a) => {
                f.write_str("-")?;
                write_wrapped(f, a, a.precedence() < 3)
            }
            Expr::Unary(op, a) => write!(f, "{}({a})", op.function_name().unwrap_or_default()),
            Expr::Binary(op, a, b) => {
                let p = op.precedence();
                if *op == BinaryOp::Pow {
                    write_wrapped(f, a, a.precedence() < 4)?;
                    f.write_str(op.symbol())?;
                    write_wrapped(f, b, !b.exponent_safe())
                } else {
                    write_wrapped(f, a, a.precedence() < p)?;
                    f.write_str(op.symbol())?;
                    write_wrapped(f, b, b.precedence() <= p)
                }
            }
        }
    }
}
