use super::{
    antiderivative, CompileError, HigherOrder, HigherOrderComposed, LinearFirstOrderIde, TurbulentIde,
    VolterraPopulation,
};
use crate::elements::{Element, Memristor, MemristorState};
use crate::expr::{Expr, Var};
use crate::netlist::Netlist;

fn v() -> Expr {
    Expr::var(Var::V)
}

fn omega() -> Expr {
    Expr::var(Var::Omega)
}

fn finite(x: f64, what: &str) -> Result<f64, CompileError> {
    if x.is_finite() {
        Ok(x)
    } else {
        Err(CompileError::Invalid(format!("{what} must be finite, got {x}")))
    }
}

fn memintegrator(out: &str, input: Option<&str>, capacitance: f64, ic: f64, g: Expr, state: MemristorState) -> Element {
    Element::MemIntegrator {
        out: out.into(),
        input: input.map(str::to_string),
        capacitance,
        ic,
        memristor: Memristor { memductance: g, state },
    }
}

fn own(f: Expr, omega0: f64) -> MemristorState {
    MemristorState::Own { dynamics: f, omega0 }
}

/// A single self-fed memristive integrator with `C = 1`.
pub fn compile_volterra_population(spec: &VolterraPopulation) -> Result<Netlist, CompileError> {
    let (k1, k2) = spec.kernel.factors()?;
    let g = Expr::num(-finite(spec.a, "a")?)
        .add(Expr::num(finite(spec.b, "b")?).mul(v()))
        .add(k1.mul(omega()));
    let f = k2.rename(Var::S, Var::T).mul(v());
    let mut n = Netlist::new();
    n.node("v");
    n.add(
        "m1",
        memintegrator("v", None, 1.0, finite(spec.n0, "N0")?, g, own(f, 0.0)),
    );
    n.set_output("v", None);
    Ok(n)
}

/// `u = ln v` turns `v' = omega v`, `omega' = k(t) ln v` into `u' = int k u`.
pub fn compile_linear_first_order(spec: &LinearFirstOrderIde) -> Result<Netlist, CompileError> {
    let v0 = finite(spec.u0, "u0")?.exp();
    if !(v0.is_finite() && v0 > 0.0) {
        return Err(CompileError::Invalid(format!("exp(u0) = {v0} is not representable")));
    }
    let f = spec.kernel.rename(Var::S, Var::T).mul(v().ln());
    let mut n = Netlist::new();
    n.node("v");
    n.add("m1", memintegrator("v", None, 1.0, v0, omega().neg(), own(f, 0.0)));
    n.set_output("v", Some(v().ln()));
    Ok(n)
}

/// Integrating factor `alpha = exp(int_0^t p)`, or `1` when `p` vanishes.
pub fn integrating_factor(p: &Expr) -> Result<Expr, CompileError> {
    if p.constant_value() == Some(0.0) {
        return Ok(Expr::num(1.0));
    }
    Ok(antiderivative(p)?.exp())
}

/// Circuit for `z = alpha u`: a memristive integrator holds `exp(z)`, a
/// driven generator takes its logarithm and a multiplier applies `1/alpha`.
pub fn compile_turbulent(spec: &TurbulentIde) -> Result<Netlist, CompileError> {
    let (k1, k2) = spec.kernel.factors()?;
    let alpha = integrating_factor(&spec.p)?;
    let g = alpha.clone().mul(k1).mul(omega());
    let f = k2
        .rename(Var::S, Var::T)
        .div(alpha.clone().pow(Expr::num(2.0)))
        .mul(v().ln().pow(Expr::num(2.0)));
    let vz0 = finite(spec.u0, "u0")?.exp();
    if !vz0.is_finite() {
        return Err(CompileError::Invalid(format!("exp(u0) overflows for u0 = {}", spec.u0)));
    }
    let mut n = Netlist::new();
    n.node("vz").node("z").node("inv_alpha").node("u");
    n.add("m1", memintegrator("vz", None, 1.0, vz0, g, own(f, 0.0)));
    n.add(
        "g1",
        Element::FunctionGenerator {
            out: "z".into(),
            input: Some("vz".into()),
            signal: v().ln(),
        },
    );
    n.add(
        "g2",
        Element::FunctionGenerator {
            out: "inv_alpha".into(),
            input: None,
            signal: Expr::num(1.0).div(alpha),
        },
    );
    n.add(
        "x1",
        Element::Multiplier {
            out: "u".into(),
            inputs: ["z".into(), "inv_alpha".into()],
        },
    );
    n.set_output("u", None);
    Ok(n)
}

/// Memristor placement for a higher-order chain.
#[derive(Debug, Clone, Copy)]
pub enum Chain<'a> {
    /// Memristor only in the first integrator.
    Single(&'a HigherOrder),
    /// One memristor per integrator, memductances nested.
    Composed(&'a HigherOrderComposed),
}

/// Integrator chain for `v^(n) = -(1/C) g v`.
///
/// The first stage is the memristive integrator fed by `v` and produces
/// `v^(n-1)`; each later stage integrates with a sign flip. For even `n` an
/// inverter follows the first stage so the chain closes on `+v`.
pub fn compile_higher_order(chain: &Chain) -> Result<Netlist, CompileError> {
    let (capacitance, first_g, f, omega0, initial, outer) = match chain {
        Chain::Single(s) => (s.capacitance, &s.g, &s.f, s.omega0, &s.initial, &[][..]),
        Chain::Composed(s) => {
            let (first, rest) = s
                .memductances
                .split_first()
                .ok_or_else(|| CompileError::Invalid("at least one memductance is required".into()))?;
            (s.capacitance, first, &s.f, s.omega0, &s.initial, rest)
        }
    };
    let order = initial.len();
    if order == 0 {
        return Err(CompileError::Invalid("order must be at least 1".into()));
    }
    if matches!(chain, Chain::Composed(_)) && outer.len() + 1 != order {
        return Err(CompileError::Invalid(format!(
            "composed chain of order {order} needs {order} memductances, got {}",
            outer.len() + 1
        )));
    }
    if !(capacitance > 0.0 && capacitance.is_finite()) {
        return Err(CompileError::Invalid(format!(
            "capacitance must be positive, got {capacitance}"
        )));
    }
    for (k, x) in initial.iter().enumerate() {
        finite(*x, &format!("ic.{k}"))?;
    }
    finite(omega0, "omega0")?;

    let mut n = Netlist::new();
    if order == 1 {
        n.node("v");
        n.add(
            "m1",
            memintegrator(
                "v",
                None,
                capacitance,
                initial[0],
                first_g.clone(),
                own(f.clone(), omega0),
            ),
        );
        n.set_output("v", None);
        return Ok(n);
    }

    let name = |j: usize, sign: f64| {
        let base = if j == 0 { "v".to_string() } else { format!("v_d{j}") };
        if sign < 0.0 {
            format!("{base}_neg")
        } else {
            base
        }
    };

    // stage output carries sign * v^(j)
    let top = order - 1;
    let mut node = name(top, 1.0);
    n.node(node.clone());
    n.add(
        "m1",
        memintegrator(
            &node,
            Some("v"),
            capacitance,
            initial[top],
            first_g.clone(),
            own(f.clone(), omega0),
        ),
    );
    let mut sign = 1.0;
    if order % 2 == 0 {
        let inverted = name(top, -1.0);
        n.node(inverted.clone());
        n.add(
            "a1",
            Element::Adder {
                out: inverted.clone(),
                inputs: vec![(node, 1.0)],
            },
        );
        node = inverted;
        sign = -1.0;
    }
    for (stage, j) in (0..top).rev().enumerate() {
        sign = -sign;
        let out = name(j, sign);
        n.node(out.clone());
        let ic = sign * initial[j];
        let id = format!(
            "{}{}",
            if outer.is_empty() { "i" } else { "m" },
            stage + if outer.is_empty() { 1 } else { 2 }
        );
        let element = match outer.get(stage) {
            None => Element::Integrator {
                out: out.clone(),
                capacitance: 1.0,
                ic,
                inputs: vec![(node, 1.0)],
            },
            Some(g) => memintegrator(
                &out,
                Some(&node),
                1.0,
                ic,
                g.clone(),
                MemristorState::Composed {
                    inner: format!("m{}", stage + 1),
                },
            ),
        };
        n.add(id, element);
        node = out;
    }
    debug_assert_eq!(node, "v");
    n.set_output("v", None);
    Ok(n)
}

#[cfg(test)]
mod tests {
    use super::super::Kernel;
    use super::*;
    use crate::elements::ElementKind;
    use crate::expr::{parse_expr, scope};
    use crate::netlist::{format::write_netlist, lower, validate};
    use crate::solver::{simulate, SimConfig};

    fn p(src: &str, scope: crate::expr::VarSet) -> Expr {
        parse_expr(src, scope).unwrap()
    }

    fn population() -> VolterraPopulation {
        VolterraPopulation {
            a: 2.0,
            b: 0.001,
            kernel: Kernel::Separable {
                k1: p("exp(-t)", scope::time()),
                k2: p("exp(s)*s/(1 + s)", scope::history()),
            },
            n0: 1.0,
        }
    }

    fn memductance(n: &Netlist, id: &str) -> String {
        match &n.elements[id] {
            Element::MemIntegrator { memristor, .. } => memristor.memductance.to_string(),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn population_circuit_is_one_memristive_integrator() {
        let n = compile_volterra_population(&population()).unwrap();
        validate(&n).unwrap();
        assert_eq!(n.elements.len(), 1);
        assert_eq!(n.count(ElementKind::MemIntegrator), 1);
        assert_eq!(memductance(&n, "m1"), "-2 + 0.001*v + exp(-t)*omega");
        let Element::MemIntegrator {
            capacitance,
            ic,
            memristor,
            ..
        } = &n.elements["m1"]
        else {
            unreachable!()
        };
        assert_eq!((*capacitance, *ic), (1.0, 1.0));
        match &memristor.state {
            MemristorState::Own { dynamics, omega0 } => {
                assert_eq!(dynamics.to_string(), "exp(t)*t/(1 + t)*v");
                assert_eq!(*omega0, 0.0);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn general_kernels_are_factored_or_rejected() {
        let mut spec = population();
        spec.kernel = Kernel::General(p("exp(-t)*exp(s)*s/(1 + s)", scope::kernel()));
        let n = compile_volterra_population(&spec).unwrap();
        assert_eq!(memductance(&n, "m1"), "-2 + 0.001*v + exp(-t)*omega");
        spec.kernel = Kernel::General(p("exp(-t*s)", scope::kernel()));
        assert!(matches!(
            compile_volterra_population(&spec),
            Err(CompileError::NonSeparableKernel(_))
        ));
    }

    #[test]
    fn kernel_free_population_grows_exponentially() {
        let spec = VolterraPopulation {
            a: 1.0,
            b: 0.0,
            kernel: Kernel::Separable {
                k1: Expr::num(0.0),
                k2: Expr::num(0.0),
            },
            n0: 0.5,
        };
        let sys = lower(&compile_volterra_population(&spec).unwrap()).unwrap();
        let sim = simulate(&sys, &SimConfig::new(1e-3, 1.0)).unwrap();
        assert!((sim.waveform.last("output").unwrap() - 0.5 * 1f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn log_readout_circuit() {
        let spec = LinearFirstOrderIde {
            kernel: p("1", scope::history()),
            u0: 1.0,
        };
        let n = compile_linear_first_order(&spec).unwrap();
        validate(&n).unwrap();
        assert_eq!(memductance(&n, "m1"), "-omega");
        assert_eq!(
            n.output.as_ref().unwrap().transform.as_ref().unwrap().to_string(),
            "ln(v)"
        );
        let text = write_netlist(&n);
        assert!(text.contains("f=\"1*ln(v)\""), "{text}");

        let spec = LinearFirstOrderIde {
            kernel: p("0", scope::history()),
            u0: -0.5,
        };
        let sys = lower(&compile_linear_first_order(&spec).unwrap()).unwrap();
        let sim = simulate(&sys, &SimConfig::new(1e-2, 2.0)).unwrap();
        assert!(sim
            .waveform
            .channel("output")
            .unwrap()
            .iter()
            .all(|u| (u + 0.5).abs() < 1e-12));
        assert_eq!(sim.ln_clamp_activations, 0);
    }

    #[test]
    fn turbulent_circuit_wiring() {
        let spec = TurbulentIde {
            p: p("1/8*exp(-2*t)", scope::time()),
            kernel: Kernel::Separable {
                k1: p("1/2*exp(-t)", scope::time()),
                k2: p("exp(-s)", scope::history()),
            },
            u0: 1.0,
        };
        let n = compile_turbulent(&spec).unwrap();
        validate(&n).unwrap();
        assert_eq!(n.count(ElementKind::MemIntegrator), 1);
        assert_eq!(n.count(ElementKind::Multiplier), 1);
        assert_eq!(n.count(ElementKind::FunctionGenerator), 2);
        assert_eq!(n.output.as_ref().unwrap().node, "u");
    }

    #[test]
    fn undamped_turbulent_circuit_passes_z_through() {
        let spec = TurbulentIde {
            p: Expr::num(0.0),
            kernel: Kernel::Separable {
                k1: Expr::num(0.0),
                k2: Expr::num(1.0),
            },
            u0: 0.7,
        };
        let n = compile_turbulent(&spec).unwrap();
        let Element::FunctionGenerator { signal, .. } = &n.elements["g2"] else {
            unreachable!()
        };
        assert_eq!(signal.to_string(), "1/1");
        let sys = lower(&n).unwrap();
        let sim = simulate(&sys, &SimConfig::new(1e-2, 1.0).recording(&["z"])).unwrap();
        assert_eq!(sim.waveform.channel("output"), sim.waveform.channel("z"));
    }

    #[test]
    fn damping_without_memory_decays_like_closed_form() {
        // u' = -p u, u = u0 exp(-int p)
        let spec = TurbulentIde {
            p: p("1/8*exp(-2*t)", scope::time()),
            kernel: Kernel::Separable {
                k1: Expr::num(0.0),
                k2: p("exp(-s)", scope::history()),
            },
            u0: 1.0,
        };
        let sys = lower(&compile_turbulent(&spec).unwrap()).unwrap();
        let sim = simulate(&sys, &SimConfig::new(1e-3, 4.0)).unwrap();
        let exact = (-(1.0 - (-8f64).exp()) / 16.0).exp();
        assert!((sim.waveform.last("output").unwrap() - exact).abs() < 1e-9);
    }

    fn higher(order: usize) -> HigherOrder {
        HigherOrder {
            capacitance: 1.0,
            g: p("-2 + 0.001*v + exp(-t)*omega", scope::memristor()),
            f: p("exp(t)*t/(1 + t)*v", scope::memristor()),
            omega0: 0.0,
            initial: (0..order).map(|k| 1.0 / (k + 1) as f64).collect(),
        }
    }

    #[test]
    fn first_order_chain_is_the_population_topology() {
        let mut spec = higher(1);
        spec.initial = vec![1.0];
        let chain = compile_higher_order(&Chain::Single(&spec)).unwrap();
        assert_eq!(chain, compile_volterra_population(&population()).unwrap());
    }

    #[test]
    fn chain_resources_and_sign_inverter() {
        for order in 1..=5 {
            let n = compile_higher_order(&Chain::Single(&higher(order))).unwrap();
            validate(&n).unwrap();
            assert_eq!(n.count(ElementKind::MemIntegrator), 1);
            assert_eq!(n.count(ElementKind::Integrator), order - 1);
            assert_eq!(n.count(ElementKind::Adder), usize::from(order % 2 == 0 && order > 1));
            assert_eq!(lower(&n).unwrap().dimension(), order + 1);
        }
    }

    #[test]
    fn chain_initial_conditions_reach_every_derivative() {
        // check v^(j)(0) through the node signs for order 4
        let spec = higher(4);
        let sys = lower(&compile_higher_order(&Chain::Single(&spec)).unwrap()).unwrap();
        let sim = simulate(
            &sys,
            &SimConfig::new(1e-3, 1e-2).recording(&["v", "v_d1_neg", "v_d2", "v_d3"]),
        )
        .unwrap();
        let w = &sim.waveform;
        assert_eq!(w.channel("v").unwrap()[0], 1.0);
        assert_eq!(w.channel("v_d1_neg").unwrap()[0], -0.5);
        assert_eq!(w.channel("v_d2").unwrap()[0], 1.0 / 3.0);
        assert_eq!(w.channel("v_d3").unwrap()[0], 0.25);
    }

    #[test]
    fn composed_chain_has_one_memristor_per_stage() {
        let spec = HigherOrderComposed {
            capacitance: 1.0,
            memductances: vec![
                p("-2 + 0.001*v + exp(-t)*omega", scope::memristor()),
                p("omega", scope::memristor()),
                p("omega^2", scope::memristor()),
            ],
            f: p("v", scope::memristor()),
            omega0: 0.0,
            initial: vec![1.0, 0.0, 0.0],
        };
        let n = compile_higher_order(&Chain::Composed(&spec)).unwrap();
        validate(&n).unwrap();
        assert_eq!(n.count(ElementKind::MemIntegrator), 3);
        assert_eq!(n.count(ElementKind::Integrator), 0);
        let sys = lower(&n).unwrap();
        // three voltages and one memristor state
        assert_eq!(sys.dimension(), 4);
        assert_eq!(sys.memristor_count(), 3);

        let mut short = spec.clone();
        short.memductances.pop();
        assert!(compile_higher_order(&Chain::Composed(&short)).is_err());
    }

    #[test]
    fn pass_through_composition_matches_single_memristor_bitwise() {
        let single = higher(2);
        let composed = HigherOrderComposed {
            capacitance: single.capacitance,
            memductances: vec![single.g.clone(), p("omega", scope::memristor())],
            f: single.f.clone(),
            omega0: single.omega0,
            initial: single.initial.clone(),
        };
        let cfg = SimConfig::new(1e-3, 2.0);
        let a = simulate(
            &lower(&compile_higher_order(&Chain::Single(&single)).unwrap()).unwrap(),
            &cfg,
        )
        .unwrap();
        let b = simulate(
            &lower(&compile_higher_order(&Chain::Composed(&composed)).unwrap()).unwrap(),
            &cfg,
        )
        .unwrap();
        assert_eq!(a.waveform.channel("output"), b.waveform.channel("output"));
    }
}
