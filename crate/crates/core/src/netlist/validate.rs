use super::Netlist;
use crate::elements::{Element, MemristorState};
use crate::expr::{scope, Expr, VarSet};
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Rule {
    UndeclaredNode,
    MultipleDrivers,
    UndrivenNode,
    PortArity,
    NonFiniteParameter,
    NonPositiveCapacitance,
    NonPositiveResistance,
    PotentiometerRange,
    ExpressionScope,
    Composition,
    AlgebraicLoop,
    MissingOutput,
}

impl Rule {
    pub fn name(self) -> &'static str {
        match self {
            Rule::UndeclaredNode => "undeclared-node",
            Rule::MultipleDrivers => "single-driver",
            Rule::UndrivenNode => "undriven-node",
            Rule::PortArity => "port-arity",
            Rule::NonFiniteParameter => "non-finite-parameter",
            Rule::NonPositiveCapacitance => "capacitance-range",
            Rule::NonPositiveResistance => "resistance-range",
            Rule::PotentiometerRange => "potentiometer-range",
            Rule::ExpressionScope => "expression-scope",
            Rule::Composition => "memductance-composition",
            Rule::AlgebraicLoop => "algebraic-loop",
            Rule::MissingOutput => "output",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub element: Option<String>,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.element {
            Some(id) => write!(f, "[{}] {id}: {}", self.rule.name(), self.message),
            None => write!(f, "[{}] {}", self.rule.name(), self.message),
        }
    }
}

struct Report(Vec<Diagnostic>);

impl Report {
    fn push(&mut self, element: Option<&str>, rule: Rule, message: impl Into<String>) {
        self.0.push(Diagnostic {
            element: element.map(str::to_string),
            rule,
            message: message.into(),
        });
    }
}

/// Check every structural rule and collect all violations.
pub fn validate(n: &Netlist) -> Result<(), Vec<Diagnostic>> {
    let mut r = Report(Vec::new());

    let mut drivers: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, e) in &n.elements {
        drivers.entry(e.output()).or_default().push(id);
    }
    for (node, ids) in &drivers {
        if ids.len() > 1 {
            r.push(
                Some(ids[1]),
                Rule::MultipleDrivers,
                format!("node `{node}` is driven by {}", ids.join(", ")),
            );
        }
    }

    for (id, e) in &n.elements {
        let id = id.as_str();
        if !n.nodes.contains(e.output()) {
            r.push(
                Some(id),
                Rule::UndeclaredNode,
                format!("output node `{}` is not declared", e.output()),
            );
        }
        for input in e.inputs() {
            if !n.nodes.contains(input) {
                r.push(
                    Some(id),
                    Rule::UndeclaredNode,
                    format!("input node `{input}` is not declared"),
                );
            } else if !drivers.contains_key(input) {
                r.push(
                    Some(id),
                    Rule::UndrivenNode,
                    format!("input node `{input}` has no driver"),
                );
            }
        }
        check_parameters(id, e, &mut r);
    }

    check_composition(n, &mut r);
    check_algebraic_loops(n, &mut r);

    match &n.output {
        None => r.push(None, Rule::MissingOutput, "no output node declared"),
        Some(out) => {
            if !n.nodes.contains(&out.node) {
                r.push(
                    None,
                    Rule::MissingOutput,
                    format!("output node `{}` is not declared", out.node),
                );
            } else if !drivers.contains_key(out.node.as_str()) {
                r.push(
                    None,
                    Rule::MissingOutput,
                    format!("output node `{}` has no driver", out.node),
                );
            }
            if let Some(t) = &out.transform {
                check_scope(None, "output transform", t, scope::readout(), &mut r);
            }
        }
    }

    if r.0.is_empty() {
        Ok(())
    } else {
        Err(r.0)
    }
}

fn check_scope(id: Option<&str>, what: &str, e: &Expr, allowed: VarSet, r: &mut Report) {
    let used = e.vars();
    if !used.is_subset(allowed) {
        r.push(
            id,
            Rule::ExpressionScope,
            format!("{what} `{e}` uses {used}, allowed {allowed}"),
        );
    }
}

fn check_finite(id: &str, what: &str, x: f64, r: &mut Report) {
    if !x.is_finite() {
        r.push(Some(id), Rule::NonFiniteParameter, format!("{what} is {x}"));
    }
}

fn check_capacitance(id: &str, c: f64, r: &mut Report) {
    if !(c > 0.0) || !c.is_finite() {
        r.push(
            Some(id),
            Rule::NonPositiveCapacitance,
            format!("C must be positive and finite, got {c}"),
        );
    }
}

fn check_parameters(id: &str, e: &Element, r: &mut Report) {
    match e {
        Element::Adder { inputs, .. } => {
            if inputs.is_empty() {
                r.push(Some(id), Rule::PortArity, "adder needs at least one input");
            }
            for (node, k) in inputs {
                check_finite(id, &format!("gain on `{node}`"), *k, r);
            }
        }
        Element::Integrator {
            capacitance,
            ic,
            inputs,
            ..
        } => {
            if inputs.is_empty() {
                r.push(Some(id), Rule::PortArity, "integrator needs at least one input");
            }
            check_capacitance(id, *capacitance, r);
            check_finite(id, "initial condition", *ic, r);
            for (node, res) in inputs {
                if !(*res > 0.0) || !res.is_finite() {
                    r.push(
                        Some(id),
                        Rule::NonPositiveResistance,
                        format!("resistance on `{node}` must be positive and finite, got {res}"),
                    );
                }
            }
        }
        Element::Potentiometer { alpha, .. } => {
            if !(*alpha > 0.0 && *alpha < 1.0) {
                r.push(
                    Some(id),
                    Rule::PotentiometerRange,
                    format!("alpha must lie in (0, 1), got {alpha}"),
                );
            }
        }
        Element::Multiplier { .. } => {}
        Element::FunctionGenerator { input, signal, .. } => {
            let allowed = if input.is_some() {
                scope::driven_signal()
            } else {
                scope::time()
            };
            check_scope(Some(id), "signal", signal, allowed, r);
        }
        Element::MemIntegrator {
            capacitance,
            ic,
            memristor,
            ..
        } => {
            check_capacitance(id, *capacitance, r);
            check_finite(id, "initial condition", *ic, r);
            check_scope(Some(id), "memductance", &memristor.memductance, scope::memristor(), r);
            if let MemristorState::Own { dynamics, omega0 } = &memristor.state {
                check_scope(Some(id), "state dynamics", dynamics, scope::memristor(), r);
                check_finite(id, "omega0", *omega0, r);
            }
        }
    }
}

fn composed_inner(e: &Element) -> Option<&str> {
    match e {
        Element::MemIntegrator { memristor, .. } => match &memristor.state {
            MemristorState::Composed { inner } => Some(inner),
            MemristorState::Own { .. } => None,
        },
        _ => None,
    }
}

fn check_composition(n: &Netlist, r: &mut Report) {
    let mut composed_by: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
    for (id, e) in &n.elements {
        let Some(inner) = composed_inner(e) else { continue };
        match n.elements.get(inner) {
            Some(Element::MemIntegrator { .. }) => composed_by.entry(inner).or_default().push(id),
            Some(_) => r.push(
                Some(id),
                Rule::Composition,
                format!("`{inner}` is not a memristive integrator"),
            ),
            None => r.push(Some(id), Rule::Composition, format!("unknown element `{inner}`")),
        }
    }
    for (inner, outers) in &composed_by {
        if outers.len() > 1 {
            r.push(
                Some(inner),
                Rule::Composition,
                format!("memductance feeds more than one device: {}", outers.join(", ")),
            );
        }
    }
    // every chain must end at a device with its own state
    for id in n.elements.keys() {
        let mut cur = id.as_str();
        let mut steps = 0;
        while let Some(inner) = n.elements.get(cur).and_then(composed_inner) {
            if !n.elements.contains_key(inner) {
                break;
            }
            cur = inner;
            steps += 1;
            if steps > n.elements.len() {
                r.push(Some(id), Rule::Composition, "memductance composition is cyclic");
                break;
            }
        }
    }
}

fn check_algebraic_loops(n: &Netlist, r: &mut Report) {
    let mut graph = DiGraph::<&str, ()>::new();
    let mut index = HashMap::new();
    for (id, e) in &n.elements {
        if !e.has_memory() {
            index.insert(id.as_str(), graph.add_node(id.as_str()));
        }
    }
    for (id, e) in &n.elements {
        let Some(&to) = index.get(id.as_str()) else { continue };
        for input in e.inputs() {
            for (src, _) in n.drivers(input) {
                if let Some(&from) = index.get(src.as_str()) {
                    graph.add_edge(from, to, ());
                }
            }
        }
    }
    for scc in tarjan_scc(&graph) {
        let cyclic = scc.len() > 1 || graph.contains_edge(scc[0], scc[0]);
        if cyclic {
            let mut ids: Vec<&str> = scc.iter().map(|i| graph[*i]).collect();
            ids.sort_unstable();
            r.push(
                Some(ids[0]),
                Rule::AlgebraicLoop,
                format!("feedback loop without an integrator through {}", ids.join(" -> ")),
            );
        }
    }
}
