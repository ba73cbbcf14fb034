//! Line-oriented netlist text format.
//!
//! ```text
//! # comment
//! node y yd_neg
//! adder a1 out=sum in=p:1,y:1             # in=<node>:<K>,...
//! integrator i1 out=yd_neg C=1 ic=0 in=yd_neg:1,y:1   # in=<node>:<R>,...
//! pot k1 out=half in=y alpha=0.5
//! mul x1 out=prod in=a,b
//! fgen g1 out=drive expr="sin(t)"
//! fgen g2 out=z in=v expr="ln(v)"
//! memintegrator m1 out=v C=1 ic=1 g="-2 + 0.001*v" f="v" omega0=0
//! memintegrator m2 out=w in=v C=1 ic=0 g="omega" compose=m1
//! output y transform="ln(v)"
//! ```
//!
//! Expressions are double-quoted. `g` and `f` range over `t`, `v`, `omega`;
//! `fgen` signals over `t` (and `v` when driven); transforms over `t`, `v`.
//! Free-standing `memristor` lines are rejected: a memristor only exists as
//! the input branch of a `memintegrator`.

use super::Netlist;
use crate::elements::{Element, Memristor, MemristorState};
use crate::expr::{parse_expr, scope, Expr, VarSet};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {message}")]
pub struct FormatError {
    pub line: usize,
    pub message: String,
}

fn tokenize(line: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut quoted = false;
    let mut any = false;
    for c in line.chars() {
        match c {
            '"' => {
                quoted = !quoted;
                any = true;
            }
            '#' if !quoted => break,
            c if c.is_whitespace() && !quoted => {
                if any {
                    out.push(std::mem::take(&mut cur));
                    any = false;
                }
            }
            c => {
                cur.push(c);
                any = true;
            }
        }
    }
    if quoted {
        return Err("unterminated quote".into());
    }
    if any {
        out.push(cur);
    }
    Ok(out)
}

struct Fields {
    map: BTreeMap<String, String>,
}

impl Fields {
    fn parse(tokens: &[String]) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for t in tokens {
            let (k, v) = t
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, found `{t}`"))?;
            if map.insert(k.to_string(), v.to_string()).is_some() {
                return Err(format!("duplicate field `{k}`"));
            }
        }
        Ok(Self { map })
    }

    fn take(&mut self, key: &str) -> Result<String, String> {
        self.map.remove(key).ok_or_else(|| format!("missing field `{key}`"))
    }

    fn opt(&mut self, key: &str) -> Option<String> {
        self.map.remove(key)
    }

    fn number(&mut self, key: &str) -> Result<f64, String> {
        number(&self.take(key)?, key)
    }

    fn expr(&mut self, key: &str, allowed: VarSet) -> Result<Expr, String> {
        let src = self.take(key)?;
        expression(&src, key, allowed)
    }

    fn finish(self) -> Result<(), String> {
        match self.map.keys().next() {
            Some(k) => Err(format!("unknown field `{k}`")),
            None => Ok(()),
        }
    }
}

fn number(s: &str, what: &str) -> Result<f64, String> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| format!("`{what}`: invalid number `{s}`"))
}

fn expression(src: &str, what: &str, allowed: VarSet) -> Result<Expr, String> {
    parse_expr(src, allowed).map_err(|e| format!("`{what}`: {e}"))
}

fn weighted(list: &str) -> Result<Vec<(String, f64)>, String> {
    list.split(',')
        .map(|item| {
            let (node, w) = item
                .split_once(':')
                .ok_or_else(|| format!("expected <node>:<weight>, found `{item}`"))?;
            Ok((node.to_string(), number(w, node)?))
        })
        .collect()
}

fn parse_line(n: &mut Netlist, tokens: &[String]) -> Result<(), String> {
    let keyword = tokens[0].as_str();
    if keyword == "node" {
        if tokens.len() < 2 {
            return Err("`node` needs at least one name".into());
        }
        for name in &tokens[1..] {
            n.node(name.clone());
        }
        return Ok(());
    }
    if keyword == "output" {
        let node = tokens.get(1).ok_or("`output` needs a node name")?;
        let mut f = Fields::parse(&tokens[2..])?;
        let transform = f
            .opt("transform")
            .map(|src| expression(&src, "transform", scope::readout()))
            .transpose()?;
        f.finish()?;
        if n.output.is_some() {
            return Err("output declared twice".into());
        }
        n.set_output(node.clone(), transform);
        return Ok(());
    }
    if keyword == "memristor" {
        return Err("free-standing memristors are not supported; use `memintegrator`".into());
    }
    let id = tokens
        .get(1)
        .ok_or_else(|| format!("`{keyword}` needs an element id"))?
        .clone();
    let mut f = Fields::parse(&tokens[2..])?;
    let out = f.take("out")?;
    let element = match keyword {
        "adder" => Element::Adder {
            out,
            inputs: weighted(&f.take("in")?)?,
        },
        "integrator" => Element::Integrator {
            out,
            capacitance: f.number("C")?,
            ic: f.number("ic")?,
            inputs: weighted(&f.take("in")?)?,
        },
        "pot" => Element::Potentiometer {
            out,
            input: f.take("in")?,
            alpha: f.number("alpha")?,
        },
        "mul" => {
            let list = f.take("in")?;
            let parts: Vec<&str> = list.split(',').collect();
            let [a, b] = parts[..] else {
                return Err(format!("`mul` takes exactly two inputs, found {}", parts.len()));
            };
            Element::Multiplier {
                out,
                inputs: [a.to_string(), b.to_string()],
            }
        }
        "fgen" => {
            let input = f.opt("in");
            let allowed = if input.is_some() {
                scope::driven_signal()
            } else {
                scope::time()
            };
            Element::FunctionGenerator {
                out,
                signal: f.expr("expr", allowed)?,
                input,
            }
        }
        "memintegrator" => {
            let input = f.opt("in");
            let capacitance = f.number("C")?;
            let ic = f.number("ic")?;
            let memductance = f.expr("g", scope::memristor())?;
            let state = match f.opt("compose") {
                Some(inner) => MemristorState::Composed { inner },
                None => MemristorState::Own {
                    dynamics: f.expr("f", scope::memristor())?,
                    omega0: f
                        .opt("omega0")
                        .map(|s| number(&s, "omega0"))
                        .transpose()?
                        .unwrap_or(0.0),
                },
            };
            Element::MemIntegrator {
                out,
                input,
                capacitance,
                ic,
                memristor: Memristor { memductance, state },
            }
        }
        other => return Err(format!("unknown element kind `{other}`")),
    };
    f.finish()?;
    if n.elements.contains_key(&id) {
        return Err(format!("duplicate element id `{id}`"));
    }
    n.add(id, element);
    Ok(())
}

/// Parse netlist text. Structural rules are checked separately by
/// [`validate`](super::validate).
pub fn parse_netlist(text: &str) -> Result<Netlist, FormatError> {
    let mut n = Netlist::new();
    for (i, raw) in text.lines().enumerate() {
        let err = |message| FormatError { line: i + 1, message };
        let tokens = tokenize(raw).map_err(err)?;
        if tokens.is_empty() {
            continue;
        }
        parse_line(&mut n, &tokens).map_err(err)?;
    }
    Ok(n)
}

fn list(items: &[(String, f64)]) -> String {
    items
        .iter()
        .map(|(n, w)| format!("{n}:{w}"))
        .collect::<Vec<_>>()
        .join(",")
}

/// Serialize in a canonical order: nodes, elements by id, output.
pub fn write_netlist(n: &Netlist) -> String {
    let mut s = String::new();
    if !n.nodes.is_empty() {
        let names: Vec<&str> = n.nodes.iter().map(String::as_str).collect();
        writeln!(s, "node {}", names.join(" ")).unwrap();
    }
    for (id, e) in &n.elements {
        match e {
            Element::Adder { out, inputs } => writeln!(s, "adder {id} out={out} in={}", list(inputs)),
            Element::Integrator {
                out,
                capacitance,
                ic,
                inputs,
            } => writeln!(
                s,
                "integrator {id} out={out} C={capacitance} ic={ic} in={}",
                list(inputs)
            ),
            Element::Potentiometer { out, input, alpha } => {
                writeln!(s, "pot {id} out={out} in={input} alpha={alpha}")
            }
            Element::Multiplier { out, inputs } => writeln!(s, "mul {id} out={out} in={},{}", inputs[0], inputs[1]),
            Element::FunctionGenerator { out, input, signal } => match input {
                Some(i) => writeln!(s, "fgen {id} out={out} in={i} expr=\"{signal}\""),
                None => writeln!(s, "fgen {id} out={out} expr=\"{signal}\""),
            },
            Element::MemIntegrator {
                out,
                input,
                capacitance,
                ic,
                memristor,
            } => {
                write!(s, "memintegrator {id} out={out}").unwrap();
                if let Some(i) = input {
                    write!(s, " in={i}").unwrap();
                }
                write!(s, " C={capacitance} ic={ic} g=\"{}\"", memristor.memductance).unwrap();
                match &memristor.state {
                    MemristorState::Own { dynamics, omega0 } => writeln!(s, " f=\"{dynamics}\" omega0={omega0}"),
                    MemristorState::Composed { inner } => writeln!(s, " compose={inner}"),
                }
            }
        }
        .unwrap();
    }
    if let Some(o) = &n.output {
        match &o.transform {
            Some(h) => writeln!(s, "output {} transform=\"{h}\"", o.node).unwrap(),
            None => writeln!(s, "output {}", o.node).unwrap(),
        }
    }
    s
}
