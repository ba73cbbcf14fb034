use super::{CompileError, LinearOdeSystem};
use crate::elements::Element;
use crate::expr::Expr;
use crate::netlist::Netlist;
use nalgebra::DMatrix;
use std::collections::BTreeSet;

/// Exhaustive sign search is used up to this many equations.
const SEARCH_LIMIT: usize = 8;

fn check_shape(spec: &LinearOdeSystem) -> Result<(usize, usize), CompileError> {
    let m = spec.coefficients.len();
    let n = spec.order;
    let bad = |msg: String| Err(CompileError::Invalid(msg));
    if n == 0 || m == 0 {
        return bad(format!(
            "need order >= 1 and at least one equation, got n = {n}, m = {m}"
        ));
    }
    for (l, row) in spec.coefficients.iter().enumerate() {
        if row.len() != m {
            return bad(format!("equation {} has {} variables, expected {m}", l + 1, row.len()));
        }
        for (i, a) in row.iter().enumerate() {
            if a.len() != n + 1 {
                return bad(format!(
                    "a.{}.{} has {} orders, expected {}",
                    l + 1,
                    i + 1,
                    a.len(),
                    n + 1
                ));
            }
            if a.iter().any(|x| !x.is_finite()) {
                return bad(format!("a.{}.{} is not finite", l + 1, i + 1));
            }
        }
    }
    if spec.initial.len() != m
        || spec
            .initial
            .iter()
            .any(|ic| ic.len() != n || ic.iter().any(|x| !x.is_finite()))
    {
        return bad(format!("need {n} finite initial values for each of {m} variables"));
    }
    Ok((m, n))
}

/// `c[l][i][k]` with `y_l^(n) = sum_{i,k<n} c[l][i][k] y_i^(k)`.
fn solve_top(spec: &LinearOdeSystem, m: usize, n: usize) -> Result<Vec<Vec<Vec<f64>>>, CompileError> {
    let lead = DMatrix::from_fn(m, m, |l, i| spec.coefficients[l][i][n]);
    let lu = lead.lu();
    if !lu.is_invertible() {
        return Err(CompileError::SingularLeading);
    }
    let xs = (0..n)
        .map(|k| lu.solve(&DMatrix::from_fn(m, m, |l, i| spec.coefficients[l][i][k])))
        .collect::<Option<Vec<_>>>()
        .ok_or(CompileError::SingularLeading)?;
    let mut c: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|l| (0..m).map(|i| xs.iter().map(|x| -x[(l, i)]).collect()).collect())
        .collect();
    if c.iter().flatten().flatten().any(|x| !x.is_finite()) {
        return Err(CompileError::SingularLeading);
    }
    // drop elimination residue
    for row in &mut c {
        let scale = row.iter().flatten().fold(0.0f64, |a, x| a.max(x.abs()));
        for x in row.iter_mut().flatten() {
            if x.abs() <= 1e-13 * scale {
                *x = 0.0;
            }
        }
    }
    Ok(c)
}

/// Node `(i, k)` carries `sign[i] * (-1)^(n-k) * y_i^(k)`.
fn node_sign(sigma: f64, n: usize, k: usize) -> f64 {
    if (n - k).is_multiple_of(2) {
        sigma
    } else {
        -sigma
    }
}

struct Plan {
    sigma: Vec<f64>,
    /// Per equation: fold negative terms into a summing adder, or use shared
    /// per-node inverters.
    summing: Vec<bool>,
}

/// Negative-weight terms of each equation for the given signs.
fn negatives(c: &[Vec<Vec<f64>>], sigma: &[f64], n: usize) -> Vec<Vec<(usize, usize)>> {
    c.iter()
        .enumerate()
        .map(|(l, row)| {
            row.iter()
                .enumerate()
                .flat_map(|(i, ks)| ks.iter().enumerate().map(move |(k, x)| (i, k, *x)))
                .filter(|&(i, k, x)| sigma[l] * x * node_sign(sigma[i], n, k) < 0.0)
                .map(|(i, k, _)| (i, k))
                .collect()
        })
        .collect()
}

fn cost(neg: &[Vec<(usize, usize)>], summing: &[bool]) -> usize {
    let mut inverted = BTreeSet::new();
    let mut adders = 0;
    for (terms, &sum) in neg.iter().zip(summing) {
        if terms.is_empty() {
            continue;
        }
        if sum {
            adders += 1;
        } else {
            inverted.extend(terms.iter().copied());
        }
    }
    adders + inverted.len()
}

/// Choose variable signs and per-equation inversion style to minimise the
/// number of adders. The first variable's sign is fixed so that the output
/// node carries `+y_1`; flipping every sign leaves all weights unchanged.
fn plan(c: &[Vec<Vec<f64>>], m: usize, n: usize) -> Plan {
    let sigma0 = node_sign(1.0, n, 0);
    if m > SEARCH_LIMIT {
        let mut sigma = vec![1.0; m];
        sigma[0] = sigma0;
        return Plan {
            sigma,
            summing: vec![true; m],
        };
    }
    let mut best: Option<(usize, Plan)> = None;
    for sign_mask in 0..(1usize << (m - 1)) {
        let sigma: Vec<f64> = (0..m)
            .map(|i| match i {
                0 => sigma0,
                _ if sign_mask >> (i - 1) & 1 == 1 => -1.0,
                _ => 1.0,
            })
            .collect();
        let neg = negatives(c, &sigma, n);
        for mode_mask in 0..(1usize << m) {
            let summing: Vec<bool> = (0..m).map(|l| mode_mask >> l & 1 == 0).collect();
            let total = cost(&neg, &summing);
            if best.as_ref().is_none_or(|(b, _)| total < *b) {
                best = Some((
                    total,
                    Plan {
                        sigma: sigma.clone(),
                        summing,
                    },
                ));
            }
        }
    }
    best.expect("at least one candidate").1
}

/// Integrator network for a linear ODE system.
///
/// Each variable gets a chain of `n` integrators; summation is done by the
/// multi-input top integrator of each chain. Adders appear only where a term
/// needs a sign flip, either as one summing inverter per equation or as
/// inverters shared between equations.
pub fn compile_linear(spec: &LinearOdeSystem) -> Result<Netlist, CompileError> {
    let (m, n) = check_shape(spec)?;
    let c = solve_top(spec, m, n)?;
    let Plan { sigma, summing } = plan(&c, m, n);

    let base = |i: usize| if m == 1 { "y".to_string() } else { format!("y{}", i + 1) };
    let name = |i: usize, k: usize, sign: f64| {
        let mut s = base(i);
        if k > 0 {
            s.push_str(&format!("_d{k}"));
        }
        if sign < 0.0 {
            s.push_str("_neg");
        }
        s
    };
    let node = |i: usize, k: usize| name(i, k, node_sign(sigma[i], n, k));
    let inverted = |i: usize, k: usize| name(i, k, -node_sign(sigma[i], n, k));

    let mut net = Netlist::new();
    let mut adders = 0;
    let mut integrators = 0;
    let mut shared: BTreeSet<(usize, usize)> = BTreeSet::new();
    let mut ground = false;

    for l in 0..m {
        let mut top_inputs: Vec<(String, f64)> = Vec::new();
        let mut folded: Vec<(String, f64)> = Vec::new();
        for i in 0..m {
            for k in (0..n).rev() {
                let w = sigma[l] * c[l][i][k] * node_sign(sigma[i], n, k);
                if w > 0.0 {
                    top_inputs.push((node(i, k), 1.0 / w));
                } else if w < 0.0 {
                    if summing[l] {
                        folded.push((node(i, k), -w));
                    } else {
                        shared.insert((i, k));
                        top_inputs.push((inverted(i, k), -1.0 / w));
                    }
                }
            }
        }
        if !folded.is_empty() {
            adders += 1;
            let out = format!("{}_fb", base(l));
            net.node(out.clone());
            net.add(
                format!("a{adders}"),
                Element::Adder {
                    out: out.clone(),
                    inputs: folded,
                },
            );
            top_inputs.push((out, 1.0));
        }
        if top_inputs.is_empty() {
            ground = true;
            top_inputs.push(("zero".into(), 1.0));
        }
        for k in (0..n).rev() {
            integrators += 1;
            let out = node(l, k);
            net.node(out.clone());
            let inputs = if k == n - 1 {
                std::mem::take(&mut top_inputs)
            } else {
                vec![(node(l, k + 1), 1.0)]
            };
            net.add(
                format!("i{integrators}"),
                Element::Integrator {
                    out,
                    capacitance: 1.0,
                    ic: node_sign(sigma[l], n, k) * spec.initial[l][k] + 0.0, // no -0 in printed netlists
                    inputs,
                },
            );
        }
    }
    for (i, k) in shared {
        adders += 1;
        let out = inverted(i, k);
        net.node(out.clone());
        net.add(
            format!("a{adders}"),
            Element::Adder {
                out,
                inputs: vec![(node(i, k), 1.0)],
            },
        );
    }
    if ground {
        net.node("zero");
        net.add(
            "gnd",
            Element::FunctionGenerator {
                out: "zero".into(),
                input: None,
                signal: Expr::num(0.0),
            },
        );
    }
    debug_assert_eq!(node_sign(sigma[0], n, 0), 1.0);
    net.set_output(base(0), None);
    Ok(net)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::ElementKind;
    use crate::netlist::{lower, validate};
    use crate::oracle::{solve_ide, IdeSpec};
    use crate::solver::{simulate, SimConfig};
    use proptest::prelude::*;

    fn single(n: usize, a: Vec<f64>, ic: Vec<f64>) -> LinearOdeSystem {
        LinearOdeSystem {
            order: n,
            coefficients: vec![vec![a]],
            initial: vec![ic],
        }
    }

    #[test]
    fn second_order_example_needs_no_adders() {
        // y'' + y' - y = 0
        let net = compile_linear(&single(2, vec![-1.0, 1.0, 1.0], vec![1.0, 0.0])).unwrap();
        validate(&net).unwrap();
        assert_eq!(net.count(ElementKind::Integrator), 2);
        assert_eq!(net.elements.len(), 2);
        // top integrator sums both feedback paths with unit resistors
        match &net.elements["i1"] {
            Element::Integrator { out, inputs, ic, .. } => {
                assert_eq!(out, "y_d1_neg");
                assert_eq!(*ic, -0.0);
                assert_eq!(inputs, &vec![("y_d1_neg".to_string(), 1.0), ("y".to_string(), 1.0)]);
            }
            other => panic!("{other:?}"),
        }
        match &net.elements["i2"] {
            Element::Integrator { out, inputs, ic, .. } => {
                assert_eq!(out, "y");
                assert_eq!(*ic, 1.0);
                assert_eq!(inputs, &vec![("y_d1_neg".to_string(), 1.0)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn decay_is_plain_feedback() {
        let net = compile_linear(&single(1, vec![1.0, 1.0], vec![1.0])).unwrap();
        assert_eq!(net.elements.len(), 1);
        let sim = simulate(&lower(&net).unwrap(), &SimConfig::new(1e-2, 1.0)).unwrap();
        assert!((sim.waveform.last("output").unwrap() - (-1f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn growth_needs_one_inverter() {
        let net = compile_linear(&single(1, vec![-1.0, 1.0], vec![1.0])).unwrap();
        assert_eq!(net.count(ElementKind::Adder), 1);
        let sim = simulate(&lower(&net).unwrap(), &SimConfig::new(1e-2, 1.0)).unwrap();
        assert!((sim.waveform.last("output").unwrap() - 1f64.exp()).abs() < 1e-8);
    }

    #[test]
    fn free_fall_is_grounded() {
        // y'' = 0
        let net = compile_linear(&single(2, vec![0.0, 0.0, 1.0], vec![1.0, 2.0])).unwrap();
        validate(&net).unwrap();
        let sim = simulate(&lower(&net).unwrap(), &SimConfig::new(1e-2, 1.0)).unwrap();
        assert!((sim.waveform.last("output").unwrap() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn coupled_oscillators() {
        // y1'' = -2 y1 + y2, y2'' = y1 - 2 y2
        let spec = LinearOdeSystem {
            order: 2,
            coefficients: vec![
                vec![vec![2.0, 0.0, 1.0], vec![-1.0, 0.0, 0.0]],
                vec![vec![-1.0, 0.0, 0.0], vec![2.0, 0.0, 1.0]],
            ],
            initial: vec![vec![1.0, 0.0], vec![0.0, 0.0]],
        };
        let net = compile_linear(&spec).unwrap();
        validate(&net).unwrap();
        assert_eq!(net.count(ElementKind::Integrator), 4);
        assert!(net.count(ElementKind::Adder) <= 2);
        let sim = simulate(&lower(&net).unwrap(), &SimConfig::new(1e-3, 3.0)).unwrap();
        // normal modes: y1 = (cos t + cos(sqrt(3) t)) / 2
        let t = 3.0f64;
        let exact = (t.cos() + (3f64.sqrt() * t).cos()) / 2.0;
        assert!((sim.waveform.last("output").unwrap() - exact).abs() < 1e-9);
    }

    #[test]
    fn singular_leading_matrix_is_rejected() {
        assert_eq!(
            compile_linear(&single(2, vec![1.0, 1.0, 0.0], vec![1.0, 0.0])),
            Err(CompileError::SingularLeading)
        );
        let spec = LinearOdeSystem {
            order: 1,
            coefficients: vec![
                vec![vec![0.0, 1.0], vec![0.0, 1.0]],
                vec![vec![0.0, 2.0], vec![0.0, 2.0]],
            ],
            initial: vec![vec![1.0], vec![1.0]],
        };
        assert_eq!(compile_linear(&spec), Err(CompileError::SingularLeading));
    }

    #[test]
    fn shape_errors() {
        assert!(matches!(
            compile_linear(&single(2, vec![1.0, 1.0], vec![1.0, 0.0])),
            Err(CompileError::Invalid(_))
        ));
        assert!(matches!(
            compile_linear(&single(1, vec![1.0, 1.0], vec![])),
            Err(CompileError::Invalid(_))
        ));
    }

    fn arb_system() -> impl Strategy<Value = LinearOdeSystem> {
        (1usize..=4, 1usize..=3).prop_flat_map(|(n, m)| {
            (
                prop::collection::vec(prop::collection::vec(prop::collection::vec(-2.0f64..2.0, n), m), m),
                prop::collection::vec(prop::collection::vec(-1.0f64..1.0, n), m),
                prop::collection::vec(0.5f64..2.0, m),
            )
                .prop_map(move |(lower_orders, initial, lead)| {
                    // diagonal leading matrix keeps the system solvable
                    let coefficients = lower_orders
                        .into_iter()
                        .enumerate()
                        .map(|(l, row)| {
                            row.into_iter()
                                .enumerate()
                                .map(|(i, mut a)| {
                                    a.push(if i == l { lead[l] } else { 0.0 });
                                    a
                                })
                                .collect()
                        })
                        .collect();
                    LinearOdeSystem {
                        order: n,
                        coefficients,
                        initial,
                    }
                })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn compiled_systems_validate_and_count_integrators(spec in arb_system()) {
            let net = compile_linear(&spec).unwrap();
            prop_assert!(validate(&net).is_ok());
            prop_assert_eq!(net.count(ElementKind::Integrator), spec.order * spec.coefficients.len());
            prop_assert!(net.count(ElementKind::Adder) <= spec.coefficients.len());
        }

        #[test]
        fn compiled_systems_track_the_oracle(spec in arb_system()) {
            let net = compile_linear(&spec).unwrap();
            let sim = simulate(&lower(&net).unwrap(), &SimConfig::new(1e-3, 1.0)).unwrap();
            let reference = solve_ide(&IdeSpec::Linear(spec), 1e-3, 1.0).unwrap();
            let scale = reference.waveform.channel("output").unwrap().iter().fold(0.0f64, |a, x| a.max(x.abs()));
            let got = sim.waveform.channel("output").unwrap();
            let want = reference.waveform.channel("output").unwrap();
            for (x, y) in got.iter().zip(want) {
                prop_assert!((x - y).abs() <= 1e-4 * scale.max(1.0), "{} vs {}", x, y);
            }
        }
    }
}
