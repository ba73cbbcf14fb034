//! Equation specification files.
//!
//! One `key=value` pair per line, `#` starts a comment, and values may be
//! double-quoted. The `family` key selects the equation family:
//!
//! ```text
//! family=linear                 # sum_i sum_k a.l.i.k * y_i^(k) = 0
//! equations=1                   # m, default 1
//! order=2                       # n
//! a.1.1.0=-1                    # equation l, variable i, derivative k (1-based l, i)
//! a.1.1.1=1
//! a.1.1.2=1
//! ic.1.0=1                      # y_i^(k)(0), default 0
//!
//! family=volterra               # N' = N(a - bN - int K(t,s) N(s) ds)
//! a=2
//! b=0.001
//! k1="exp(-t)"                  # K = k1(t) k2(s) ...
//! k2="exp(s)*s/(1+s)"
//! kernel="exp(s-t)"             # ... or K(t,s) directly
//! N0=1
//!
//! family=higher_order           # v^(n) = -(1/C) g(t,v,omega) v, omega' = f
//! order=2
//! C=1                           # default 1
//! g="omega"
//! f="v"
//! omega0=0                      # default 0
//! ic.0=1                        # v^(k)(0), default 0
//!
//! family=higher_order_composed  # as above with g = gn(...g1)
//! order=2
//! g1="-2 + 0.001*v + exp(-t)*omega"
//! g2="omega"
//! f="exp(t)*t/(1+t)*v"
//!
//! family=linear_first_order     # u' = int k(s) u(s) ds
//! k="1"
//! u0=1
//!
//! family=turbulent              # u' = -p u - int K(t,s) u(s)^2 ds
//! p="1/8*exp(-2*t)"
//! k1="1/2*exp(-t)"
//! k2="exp(-s)"
//! u0=1
//! ```

use super::{
    EquationSpec, HigherOrder, HigherOrderComposed, Kernel, LinearFirstOrderIde, LinearOdeSystem, TurbulentIde,
    VolterraPopulation,
};
use crate::expr::{parse_expr, scope, Expr, VarSet};
use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub struct SpecError {
    /// 1-based; absent for whole-file problems such as a missing key.
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
}

fn err<T>(line: Option<usize>, message: impl Into<String>) -> Result<T, SpecError> {
    Err(SpecError {
        line,
        message: message.into(),
    })
}

impl Entries {
    fn parse(text: &str) -> Result<Self, SpecError> {
        let mut map = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = strip_comment(raw).trim();
            if content.is_empty() {
                continue;
            }
            let Some((k, v)) = content.split_once('=') else {
                return err(Some(line), format!("expected key=value, found `{content}`"));
            };
            let key = k.trim().to_string();
            let mut value = v.trim();
            if let Some(inner) = value.strip_prefix('"') {
                value = inner.strip_suffix('"').ok_or_else(|| SpecError {
                    line: Some(line),
                    message: "unterminated quote".into(),
                })?;
            }
            if let Some((first, _)) = map.insert(key.clone(), (line, value.to_string())) {
                return err(Some(line), format!("`{key}` already set on line {first}"));
            }
        }
        Ok(Self { map })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.map.remove(key)
    }

    fn require(&mut self, key: &str) -> Result<(usize, String), SpecError> {
        self.take(key)
            .map_or_else(|| err(None, format!("missing key `{key}`")), Ok)
    }

    fn number(&mut self, key: &str) -> Result<f64, SpecError> {
        let (line, v) = self.require(key)?;
        number(line, key, &v)
    }

    fn number_or(&mut self, key: &str, default: f64) -> Result<f64, SpecError> {
        match self.take(key) {
            Some((line, v)) => number(line, key, &v),
            None => Ok(default),
        }
    }

    fn count(&mut self, key: &str, default: Option<usize>) -> Result<usize, SpecError> {
        let (line, v) = match (self.take(key), default) {
            (Some(e), _) => e,
            (None, Some(d)) => return Ok(d),
            (None, None) => return err(None, format!("missing key `{key}`")),
        };
        match v.parse::<usize>() {
            Ok(x) if x >= 1 => Ok(x),
            _ => err(Some(line), format!("`{key}` must be a positive integer, got `{v}`")),
        }
    }

    fn expr(&mut self, key: &str, allowed: VarSet) -> Result<Expr, SpecError> {
        let (line, v) = self.require(key)?;
        parse_expr(&v, allowed).map_err(|e| SpecError {
            line: Some(line),
            message: format!("`{key}`: {e}"),
        })
    }

    fn kernel(&mut self) -> Result<Kernel, SpecError> {
        if let Some(&(line, _)) = self.map.get("kernel") {
            if self.map.contains_key("k1") || self.map.contains_key("k2") {
                return err(Some(line), "give either `kernel` or `k1` and `k2`, not both");
            }
            return Ok(Kernel::General(self.expr("kernel", scope::kernel())?));
        }
        Ok(Kernel::Separable {
            k1: self.expr("k1", scope::time())?,
            k2: self.expr("k2", scope::history())?,
        })
    }

    /// Remaining keys matching `prefix.<indices>`, parsed as numbers.
    fn indexed(&mut self, prefix: &str, arity: usize) -> Result<Vec<(usize, Vec<usize>, f64)>, SpecError> {
        let keys: Vec<String> = self
            .map
            .keys()
            .filter(|k| k.strip_prefix(prefix).is_some_and(|r| r.starts_with('.')))
            .cloned()
            .collect();
        let mut out = Vec::new();
        for key in keys {
            let (line, v) = self.map.remove(&key).expect("listed");
            let idx: Option<Vec<usize>> = key[prefix.len() + 1..].split('.').map(|p| p.parse().ok()).collect();
            match idx {
                Some(idx) if idx.len() == arity => out.push((line, idx, number(line, &key, &v)?)),
                _ => return err(Some(line), format!("malformed key `{key}`")),
            }
        }
        Ok(out)
    }

    fn finish(self) -> Result<(), SpecError> {
        match self.map.iter().min_by_key(|(_, (line, _))| *line) {
            Some((k, (line, _))) => err(Some(*line), format!("unknown key `{k}` for this family")),
            None => Ok(()),
        }
    }
}

fn strip_comment(line: &str) -> &str {
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '"' => quoted = !quoted,
            '#' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn number(line: usize, key: &str, v: &str) -> Result<f64, SpecError> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => err(Some(line), format!("`{key}` must be a finite number, got `{v}`")),
    }
}

fn initial_values(e: &mut Entries, order: usize) -> Result<Vec<f64>, SpecError> {
    let mut ic = vec![0.0; order];
    for (line, idx, x) in e.indexed("ic", 1)? {
        let k = idx[0];
        if k >= order {
            return err(Some(line), format!("ic.{k} exceeds order {order}"));
        }
        ic[k] = x;
    }
    Ok(ic)
}

fn linear(e: &mut Entries) -> Result<EquationSpec, SpecError> {
    let m = e.count("equations", Some(1))?;
    let n = e.count("order", None)?;
    let mut coefficients = vec![vec![vec![0.0; n + 1]; m]; m];
    for (line, idx, x) in e.indexed("a", 3)? {
        let (l, i, k) = (idx[0], idx[1], idx[2]);
        if !(1..=m).contains(&l) || !(1..=m).contains(&i) || k > n {
            return err(
                Some(line),
                format!("a.{l}.{i}.{k} is outside {m} equations of order {n}"),
            );
        }
        coefficients[l - 1][i - 1][k] = x;
    }
    let mut initial = vec![vec![0.0; n]; m];
    for (line, idx, x) in e.indexed("ic", 2)? {
        let (i, k) = (idx[0], idx[1]);
        if !(1..=m).contains(&i) || k >= n {
            return err(Some(line), format!("ic.{i}.{k} is outside {m} variables of order {n}"));
        }
        initial[i - 1][k] = x;
    }
    Ok(EquationSpec::Linear(LinearOdeSystem {
        order: n,
        coefficients,
        initial,
    }))
}

/// Parse a specification file.
pub fn parse_spec(text: &str) -> Result<EquationSpec, SpecError> {
    let mut e = Entries::parse(text)?;
    let (line, family) = e.require("family")?;
    let spec = match family.as_str() {
        "linear" => linear(&mut e)?,
        "volterra" => EquationSpec::VolterraPopulation(VolterraPopulation {
            a: e.number("a")?,
            b: e.number("b")?,
            kernel: e.kernel()?,
            n0: e.number("N0")?,
        }),
        "higher_order" => {
            let order = e.count("order", None)?;
            EquationSpec::HigherOrder(HigherOrder {
                capacitance: e.number_or("C", 1.0)?,
                g: e.expr("g", scope::memristor())?,
                f: e.expr("f", scope::memristor())?,
                omega0: e.number_or("omega0", 0.0)?,
                initial: initial_values(&mut e, order)?,
            })
        }
        "higher_order_composed" => {
            let order = e.count("order", None)?;
            let memductances = (1..=order)
                .map(|k| e.expr(&format!("g{k}"), scope::memristor()))
                .collect::<Result<_, _>>()?;
            EquationSpec::HigherOrderComposed(HigherOrderComposed {
                capacitance: e.number_or("C", 1.0)?,
                memductances,
                f: e.expr("f", scope::memristor())?,
                omega0: e.number_or("omega0", 0.0)?,
                initial: initial_values(&mut e, order)?,
            })
        }
        "linear_first_order" => EquationSpec::LinearFirstOrder(LinearFirstOrderIde {
            kernel: e.expr("k", scope::history())?,
            u0: e.number("u0")?,
        }),
        "turbulent" => EquationSpec::Turbulent(TurbulentIde {
            p: e.expr("p", scope::time())?,
            kernel: e.kernel()?,
            u0: e.number("u0")?,
        }),
        other => return err(Some(line), format!("unknown family `{other}`")),
    };
    e.finish()?;
    Ok(spec)
}
