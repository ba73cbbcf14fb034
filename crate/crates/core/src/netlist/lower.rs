use super::validate::{validate, Diagnostic};
use super::Netlist;
use crate::elements::{adder_sum, integrator_slope, Element, MemristorState};
use crate::expr::{Bindings, EvalError, Expr, LnClamp, Var};
use petgraph::algo::toposort;
use petgraph::graph::DiGraph;
use std::collections::{BTreeMap, HashMap};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    IntegratorOutput,
    MemristorOmega,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSlot {
    pub element: String,
    pub kind: StateKind,
    pub initial: f64,
}

/// Expression failure during evaluation of the lowered system, with the
/// bindings it was evaluated at.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainFault {
    pub element: String,
    pub bindings: Bindings,
    pub source: EvalError,
}

impl fmt::Display for DomainFault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} in `{}` at {}", self.source, self.element, self.bindings)
    }
}

impl std::error::Error for DomainFault {}

#[derive(Debug, Clone, PartialEq)]
enum NodeEval {
    State {
        node: usize,
        state: usize,
    },
    Signal {
        node: usize,
        element: usize,
        input: Option<usize>,
        signal: Expr,
    },
    Adder {
        node: usize,
        terms: Vec<(f64, usize)>,
    },
    Potentiometer {
        node: usize,
        input: usize,
        alpha: f64,
    },
    Multiplier {
        node: usize,
        a: usize,
        b: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
enum Law {
    Integrator {
        capacitance: f64,
        inputs: Vec<(usize, f64)>,
    },
    MemIntegrator {
        capacitance: f64,
        input: usize,
        device: usize,
    },
    Omega {
        device: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum OmegaSource {
    State(usize),
    Inner(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Conductance {
    /// Memductance value of the given device.
    Device(usize),
    /// Unit link inside a composition chain.
    Unit,
}

#[derive(Debug, Clone, PartialEq)]
struct Device {
    element: usize,
    memductance: Expr,
    dynamics: Option<Expr>,
    omega: OmegaSource,
    /// Node bound to `v` in `g` and `f`: the input of the chain root.
    voltage: usize,
    conductance: Conductance,
}

/// Executable form of a netlist: state layout plus a right-hand-side plan.
///
/// States are the integrator outputs in element-id order followed by the
/// memristor state variables in element-id order.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSystem {
    states: Vec<StateSlot>,
    element_ids: Vec<String>,
    node_names: Vec<String>,
    plan: Vec<NodeEval>,
    laws: Vec<Law>,
    devices: Vec<Device>,
    output: usize,
    transform: Option<Expr>,
}

/// Scratch buffers for evaluating an [`OdeSystem`].
#[derive(Debug, Clone)]
pub struct Workspace {
    pub nodes: Vec<f64>,
    memductance: Vec<f64>,
}

/// Validate and lower.
pub fn lower(n: &Netlist) -> Result<OdeSystem, Vec<Diagnostic>> {
    validate(n)?;

    let element_ids: Vec<String> = n.elements.keys().cloned().collect();
    let element_index: HashMap<&str, usize> = element_ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let node_names: Vec<String> = n.nodes.iter().cloned().collect();
    let node_index: HashMap<&str, usize> = node_names.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let node = |name: &str| node_index[name];

    let mut states = Vec::new();
    let mut state_of: HashMap<&str, usize> = HashMap::new();
    for (id, e) in &n.elements {
        let ic = match e {
            Element::Integrator { ic, .. } | Element::MemIntegrator { ic, .. } => *ic,
            _ => continue,
        };
        state_of.insert(id, states.len());
        states.push(StateSlot {
            element: id.clone(),
            kind: StateKind::IntegratorOutput,
            initial: ic,
        });
    }
    let mut omega_of: HashMap<&str, usize> = HashMap::new();
    for (id, e) in &n.elements {
        if let Element::MemIntegrator { memristor, .. } = e {
            if let MemristorState::Own { omega0, .. } = memristor.state {
                omega_of.insert(id, states.len());
                states.push(StateSlot {
                    element: id.clone(),
                    kind: StateKind::MemristorOmega,
                    initial: omega0,
                });
            }
        }
    }

    // Memristive devices, each chain root first and then its composers.
    let mut outer_of: BTreeMap<&str, &str> = BTreeMap::new();
    for (id, e) in &n.elements {
        if let Element::MemIntegrator { memristor, .. } = e {
            if let MemristorState::Composed { inner } = &memristor.state {
                outer_of.insert(inner, id);
            }
        }
    }
    let mut devices: Vec<Device> = Vec::new();
    let mut device_of: HashMap<&str, usize> = HashMap::new();
    for (root_id, e) in &n.elements {
        let Element::MemIntegrator {
            memristor, input, out, ..
        } = e
        else {
            continue;
        };
        let MemristorState::Own { dynamics, .. } = &memristor.state else {
            continue;
        };
        let voltage = node(input.as_deref().unwrap_or(out));
        let first = devices.len();
        device_of.insert(root_id, first);
        devices.push(Device {
            element: element_index[root_id.as_str()],
            memductance: memristor.memductance.clone(),
            dynamics: Some(dynamics.clone()),
            omega: OmegaSource::State(omega_of[root_id.as_str()]),
            voltage,
            conductance: Conductance::Unit,
        });
        let mut cur = root_id.as_str();
        while let Some(&outer) = outer_of.get(cur) {
            let Element::MemIntegrator { memristor, .. } = &n.elements[outer] else {
                unreachable!()
            };
            let inner_device = devices.len() - 1;
            device_of.insert(outer, devices.len());
            devices.push(Device {
                element: element_index[outer],
                memductance: memristor.memductance.clone(),
                dynamics: None,
                omega: OmegaSource::Inner(inner_device),
                voltage,
                conductance: Conductance::Unit,
            });
            cur = outer;
        }
        // the outermost memductance is the one the root integrates
        let last = devices.len() - 1;
        devices[first].conductance = Conductance::Device(last);
    }

    let mut laws = Vec::with_capacity(states.len());
    for slot in &states {
        let e = &n.elements[&slot.element];
        laws.push(match (slot.kind, e) {
            (
                StateKind::IntegratorOutput,
                Element::Integrator {
                    capacitance, inputs, ..
                },
            ) => Law::Integrator {
                capacitance: *capacitance,
                inputs: inputs.iter().map(|(name, r)| (node(name), *r)).collect(),
            },
            (
                StateKind::IntegratorOutput,
                Element::MemIntegrator {
                    capacitance,
                    input,
                    out,
                    ..
                },
            ) => Law::MemIntegrator {
                capacitance: *capacitance,
                input: node(input.as_deref().unwrap_or(out)),
                device: device_of[slot.element.as_str()],
            },
            (StateKind::MemristorOmega, _) => Law::Omega {
                device: device_of[slot.element.as_str()],
            },
            _ => unreachable!("state slots come from integrators"),
        });
    }

    let mut plan = Vec::new();
    for (id, e) in &n.elements {
        if e.has_memory() {
            plan.push(NodeEval::State {
                node: node(e.output()),
                state: state_of[id.as_str()],
            });
        }
    }
    let mut graph = DiGraph::<&str, ()>::new();
    let mut gidx = HashMap::new();
    for (id, e) in &n.elements {
        if !e.has_memory() {
            gidx.insert(id.as_str(), graph.add_node(id.as_str()));
        }
    }
    for (id, e) in &n.elements {
        let Some(&to) = gidx.get(id.as_str()) else { continue };
        for input in e.inputs() {
            for (src, _) in n.drivers(input) {
                if let Some(&from) = gidx.get(src.as_str()) {
                    graph.add_edge(from, to, ());
                }
            }
        }
    }
    let order = toposort(&graph, None).expect("validated netlists have no algebraic loops");
    for gi in order {
        let id = graph[gi];
        plan.push(match &n.elements[id] {
            Element::FunctionGenerator { out, input, signal } => NodeEval::Signal {
                node: node(out),
                element: element_index[id],
                input: input.as_deref().map(node),
                signal: signal.clone(),
            },
            Element::Adder { out, inputs } => NodeEval::Adder {
                node: node(out),
                terms: inputs.iter().map(|(name, k)| (*k, node(name))).collect(),
            },
            Element::Potentiometer { out, input, alpha } => NodeEval::Potentiometer {
                node: node(out),
                input: node(input),
                alpha: *alpha,
            },
            Element::Multiplier { out, inputs } => NodeEval::Multiplier {
                node: node(out),
                a: node(&inputs[0]),
                b: node(&inputs[1]),
            },
            Element::Integrator { .. } | Element::MemIntegrator { .. } => unreachable!(),
        });
    }

    let output = n.output.as_ref().expect("validated");
    Ok(OdeSystem {
        states,
        element_ids,
        plan,
        laws,
        devices,
        output: node(&output.node),
        transform: output.transform.clone(),
        node_names,
    })
}

impl OdeSystem {
    pub fn dimension(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[StateSlot] {
        &self.states
    }

    pub fn initial_state(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.initial).collect()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.node_names.iter().position(|n| n == name)
    }

    pub fn output_node(&self) -> &str {
        &self.node_names[self.output]
    }

    pub fn memristor_count(&self) -> usize {
        self.devices.len()
    }

    pub fn workspace(&self) -> Workspace {
        Workspace {
            nodes: vec![0.0; self.node_names.len()],
            memductance: vec![0.0; self.devices.len()],
        }
    }

    fn fault(&self, element: usize, bindings: Bindings, source: EvalError) -> DomainFault {
        DomainFault {
            element: self.element_ids[element].clone(),
            bindings,
            source,
        }
    }

    /// Evaluate every node signal for state `x` at time `t`.
    pub fn eval_nodes(&self, t: f64, x: &[f64], ws: &mut Workspace, clamp: &mut LnClamp) -> Result<(), DomainFault> {
        let nodes = &mut ws.nodes;
        for step in &self.plan {
            match step {
                NodeEval::State { node, state } => nodes[*node] = x[*state],
                NodeEval::Signal {
                    node,
                    element,
                    input,
                    signal,
                } => {
                    let mut b = Bindings::new().with(Var::T, t);
                    if let Some(i) = input {
                        b.set(Var::V, nodes[*i]);
                    }
                    nodes[*node] = signal.eval_clamped(&b, clamp).map_err(|e| self.fault(*element, b, e))?;
                }
                NodeEval::Adder { node, terms } => {
                    nodes[*node] = adder_sum(terms.iter().map(|(k, i)| (*k, nodes[*i])));
                }
                NodeEval::Potentiometer { node, input, alpha } => nodes[*node] = alpha * nodes[*input],
                NodeEval::Multiplier { node, a, b } => nodes[*node] = nodes[*a] * nodes[*b],
            }
        }
        Ok(())
    }

    /// State derivatives. Leaves node signals and memductances in `ws`.
    pub fn derivatives(
        &self,
        t: f64,
        x: &[f64],
        dx: &mut [f64],
        ws: &mut Workspace,
        clamp: &mut LnClamp,
    ) -> Result<(), DomainFault> {
        self.eval_nodes(t, x, ws, clamp)?;
        for (d, dev) in self.devices.iter().enumerate() {
            let v = ws.nodes[dev.voltage];
            let omega = match dev.omega {
                OmegaSource::State(s) => x[s],
                OmegaSource::Inner(i) => ws.memductance[i],
            };
            let b = Bindings::tvw(t, v, omega);
            ws.memductance[d] = dev
                .memductance
                .eval_clamped(&b, clamp)
                .map_err(|e| self.fault(dev.element, b, e))?;
        }
        for (s, law) in self.laws.iter().enumerate() {
            dx[s] = match law {
                Law::Integrator { capacitance, inputs } => {
                    integrator_slope(*capacitance, inputs.iter().map(|(i, r)| (ws.nodes[*i], *r)))
                }
                Law::MemIntegrator {
                    capacitance,
                    input,
                    device,
                } => {
                    let g = match self.devices[*device].conductance {
                        Conductance::Device(i) => ws.memductance[i],
                        Conductance::Unit => 1.0,
                    };
                    -(g * ws.nodes[*input]) / capacitance
                }
                Law::Omega { device } => {
                    let dev = &self.devices[*device];
                    let dynamics = dev.dynamics.as_ref().expect("omega states belong to chain roots");
                    let b = Bindings::tvw(t, ws.nodes[dev.voltage], x[s]);
                    dynamics
                        .eval_clamped(&b, clamp)
                        .map_err(|e| self.fault(dev.element, b, e))?
                }
            };
        }
        Ok(())
    }

    /// Number of devices whose integrated memductance is negative, based on
    /// the last [`derivatives`](Self::derivatives) call.
    pub fn passivity_violations(&self, ws: &Workspace) -> usize {
        self.devices
            .iter()
            .filter(|d| matches!(d.conductance, Conductance::Device(i) if ws.memductance[i] < 0.0))
            .count()
    }

    /// Output readout from node signals already in `ws`.
    pub fn output_value(&self, t: f64, ws: &Workspace, clamp: &mut LnClamp) -> Result<f64, DomainFault> {
        let v = ws.nodes[self.output];
        match &self.transform {
            None => Ok(v),
            Some(h) => {
                let b = Bindings::new().with(Var::T, t).with(Var::V, v);
                h.eval_clamped(&b, clamp).map_err(|source| DomainFault {
                    element: "output".into(),
                    bindings: b,
                    source,
                })
            }
        }
    }

    /// Index of the omega state of memristive integrator `id`.
    pub fn omega_state(&self, id: &str) -> Option<usize> {
        self.states
            .iter()
            .position(|s| s.kind == StateKind::MemristorOmega && s.element == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::{fixtures, format};

    #[test]
    fn second_order_has_two_states() {
        let sys = lower(&fixtures::second_order(1.0, 0.0)).unwrap();
        assert_eq!(sys.dimension(), 2);
        assert_eq!(sys.states()[0].element, "i1");
        assert_eq!(sys.states()[1].element, "i2");
        assert_eq!(sys.initial_state(), vec![-0.0, 1.0]);
        let sys = lower(&fixtures::second_order_with_adder(1.0, 0.0)).unwrap();
        assert_eq!(sys.dimension(), 2);
    }

    #[test]
    fn memristive_integrator_has_voltage_and_omega() {
        let sys = lower(&fixtures::memristive(
            "-2 + 0.001*v + exp(-t)*omega",
            "exp(t)*t/(1+t)*v",
            1.0,
        ))
        .unwrap();
        assert_eq!(sys.dimension(), 2);
        assert_eq!(sys.states()[0].kind, StateKind::IntegratorOutput);
        assert_eq!(sys.states()[1].kind, StateKind::MemristorOmega);
        assert_eq!(sys.omega_state("m1"), Some(1));
        assert_eq!(sys.memristor_count(), 1);
    }

    #[test]
    fn signal_only_circuit_is_stateless() {
        let sys = lower(&fixtures::signal("1 + t")).unwrap();
        assert_eq!(sys.dimension(), 0);
        let mut ws = sys.workspace();
        let mut clamp = LnClamp::new(1e-9);
        sys.eval_nodes(2.0, &[], &mut ws, &mut clamp).unwrap();
        assert_eq!(sys.output_value(2.0, &ws, &mut clamp), Ok(3.0));
    }

    #[test]
    fn derivatives_follow_transfer_laws() {
        // y'' = -y' + y at y = 2, y' = 3 gives y'' = -1
        let sys = lower(&fixtures::second_order(2.0, 3.0)).unwrap();
        let x = sys.initial_state();
        let mut dx = vec![0.0; 2];
        let mut ws = sys.workspace();
        sys.derivatives(0.0, &x, &mut dx, &mut ws, &mut LnClamp::new(1e-9))
            .unwrap();
        // i1 carries -y', so its slope is -y''
        assert_eq!(dx, vec![1.0, 3.0]);

        let sys = lower(&fixtures::memristive(
            "-2 + 0.001*v + exp(-t)*omega",
            "exp(t)*t/(1+t)*v",
            1.0,
        ))
        .unwrap();
        let mut dx = vec![0.0; 2];
        let mut ws = sys.workspace();
        sys.derivatives(0.0, &sys.initial_state(), &mut dx, &mut ws, &mut LnClamp::new(1e-9))
            .unwrap();
        assert!((dx[0] - 1.999).abs() < 1e-15);
        assert_eq!(dx[1], 0.0);
        assert_eq!(sys.passivity_violations(&ws), 1);
    }

    #[test]
    fn domain_fault_carries_bindings() {
        let sys = lower(&fixtures::memristive("1", "ln(v)", -1.0)).unwrap();
        let mut dx = vec![0.0; 2];
        let mut ws = sys.workspace();
        // clamp disabled by a non-positive floor
        let err = sys
            .derivatives(0.5, &sys.initial_state(), &mut dx, &mut ws, &mut LnClamp::new(0.0))
            .unwrap_err();
        assert_eq!(err.element, "m1");
        assert_eq!(err.bindings.get(Var::V), Some(-1.0));
        assert_eq!(err.bindings.get(Var::T), Some(0.5));
        assert!(matches!(err.source, EvalError::LnDomain(_)));
    }

    #[test]
    fn lowering_is_deterministic_and_survives_reserialization() {
        let n = fixtures::second_order_with_adder(1.0, 0.5);
        let a = lower(&n).unwrap();
        let b = lower(&n).unwrap();
        assert_eq!(a, b);
        let text = format::write_netlist(&n);
        let back = format::parse_netlist(&text).unwrap();
        assert_eq!(lower(&back).unwrap(), a);
    }

    #[test]
    fn invalid_netlists_are_not_lowered() {
        let mut n = fixtures::second_order(1.0, 0.0);
        n.output = None;
        assert!(lower(&n).is_err());
    }
}
