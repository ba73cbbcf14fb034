//! End-to-end checks over the equation files in `data/`: every compiled
//! circuit against the direct integro-differential solver, plus frozen
//! reference values.

use memsolve::compiler::{compile, parse_spec, EquationSpec};
use memsolve::netlist::format::{parse_netlist, write_netlist};
use memsolve::netlist::lower;
use memsolve::oracle::{convergence_study, solve_ide, IdeSpec};
use memsolve::solver::{simulate, SimConfig};
use memsolve::tolerance::{stability_run, ToleranceConfig};
use memsolve::waveform::{relative_error, Waveform};

fn spec(name: &str) -> EquationSpec {
    let path = format!("{}/../../data/{name}.spec", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    parse_spec(&text).unwrap()
}

fn circuit(spec: &EquationSpec, dt: f64, t_end: f64) -> Waveform {
    let net = compile(spec).unwrap();
    let sim = simulate(&lower(&net).unwrap(), &SimConfig::new(dt, t_end)).unwrap();
    assert!(sim.blow_up.is_none());
    sim.waveform
}

fn oracle(spec: &EquationSpec, dt: f64, t_end: f64) -> Waveform {
    let run = solve_ide(&IdeSpec::from_equation(spec).unwrap(), dt, t_end).unwrap();
    assert!(run.blow_up_at.is_none());
    run.waveform
}

fn deviation(name: &str, dt: f64, t_end: f64) -> f64 {
    let s = spec(name);
    relative_error(&circuit(&s, dt, t_end), &oracle(&s, dt, t_end), "output")
        .unwrap()
        .max()
}

#[test]
fn every_family_matches_the_direct_solver() {
    for (name, dt, t_end) in [
        ("linear2", 1e-3, 5.0),
        ("coupled", 1e-3, 5.0),
        ("population", 1e-3, 4.0),
        ("turbulent", 1e-3, 4.0),
        ("cosh", 1e-3, 4.0),
        ("second_order", 1e-3, 3.0),
        ("composed", 1e-3, 3.0),
    ] {
        let d = deviation(name, dt, t_end);
        assert!(d <= 1e-2, "{name}: max relative deviation {d}");
    }
}

// Reference terminal values, frozen from a dt-halving study of the direct
// solver (Richardson-extrapolated; both routes agree to ~1e-10).
const POPULATION_AT_4: f64 = 1.862_182_563;
const TURBULENT_AT_4: f64 = 0.731_355_017;

#[test]
fn population_terminal_value() {
    let s = spec("population");
    let c = circuit(&s, 1e-3, 4.0).last("output").unwrap();
    let o = oracle(&s, 1e-3, 4.0).last("output").unwrap();
    assert!((c - POPULATION_AT_4).abs() < 1e-8 * POPULATION_AT_4, "circuit {c}");
    assert!((o - POPULATION_AT_4).abs() < 1e-7 * POPULATION_AT_4, "oracle {o}");
}

#[test]
fn turbulent_convergence_is_second_order() {
    let ide = IdeSpec::from_equation(&spec("turbulent")).unwrap();
    let table = convergence_study(&ide, &[8e-3, 4e-3, 2e-3, 1e-3], 4.0).unwrap();
    let estimates: Vec<f64> = table.rows.iter().filter_map(|r| r.richardson).map(f64::abs).collect();
    assert!(estimates.windows(2).all(|w| w[1] < w[0]), "{estimates:?}");
    let p = table.observed_order.unwrap();
    assert!((1.8..=2.2).contains(&p), "observed order {p}");
    let last = table.rows.last().unwrap().terminal;
    assert!((last - TURBULENT_AT_4).abs() < 1e-7, "{last}");

    let c = circuit(&spec("turbulent"), 1e-3, 4.0).last("output").unwrap();
    assert!((c - TURBULENT_AT_4).abs() < 1e-6, "circuit {c}");
}

#[test]
fn netlist_text_round_trip_preserves_the_waveform() {
    for name in ["linear2", "population", "turbulent", "composed"] {
        let net = compile(&spec(name)).unwrap();
        let back = parse_netlist(&write_netlist(&net)).unwrap();
        let cfg = SimConfig::new(1e-2, 2.0);
        let a = simulate(&lower(&net).unwrap(), &cfg).unwrap().waveform;
        let b = simulate(&lower(&back).unwrap(), &cfg).unwrap().waveform;
        assert_eq!(a.to_csv_string(), b.to_csv_string(), "{name}");
    }
}

#[test]
fn non_separable_kernel_is_unsupported() {
    let err = compile(&spec("nonseparable")).unwrap_err();
    assert!(err.is_unsupported(), "{err}");
}

#[test]
fn wider_tolerance_gives_larger_error() {
    let net = compile(&spec("population")).unwrap();
    let sim = SimConfig::new(1e-2, 4.0);
    let terminal = |eps: f64| {
        let cfg = ToleranceConfig {
            max_relative_error: eps,
            iterations: 40,
            ..ToleranceConfig::default()
        };
        stability_run(&net, &cfg, &sim).unwrap().terminal_mean().unwrap()
    };
    let (narrow, wide) = (terminal(0.05), terminal(0.10));
    assert!(narrow <= wide, "{narrow} > {wide}");
    assert_eq!(terminal(0.0), 0.0);
}
