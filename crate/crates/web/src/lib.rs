//! WebAssembly bindings for the demo page in `www/`.

use memsolve::compiler::{compile, parse_spec};
use memsolve::netlist::format::{parse_netlist, write_netlist};
use memsolve::netlist::lower;
use memsolve::oracle::{solve_ide, IdeSpec};
use memsolve::solver::{simulate, SimConfig};
use memsolve::tolerance::{stability_run, ToleranceConfig};
use memsolve::waveform::relative_error;
use wasm_bindgen::prelude::*;

/// Samples beyond this are dropped before crossing into JS.
const MAX_POINTS: usize = 2000;

fn stride(len: usize) -> usize {
    len.div_ceil(MAX_POINTS).max(1)
}

fn thin(xs: &[f64], step: usize) -> Vec<f64> {
    xs.iter().step_by(step).copied().collect()
}

#[wasm_bindgen]
#[derive(Debug)]
pub struct Trace {
    t: Vec<f64>,
    y: Vec<f64>,
    passivity_steps: usize,
    truncated_at: Option<f64>,
}

#[wasm_bindgen]
impl Trace {
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }
    pub fn y(&self) -> Vec<f64> {
        self.y.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn passivity_steps(&self) -> usize {
        self.passivity_steps
    }
    /// Time at which the run left the representable range, if it did.
    #[wasm_bindgen(getter)]
    pub fn truncated_at(&self) -> Option<f64> {
        self.truncated_at
    }
}

pub fn run_netlist(text: &str, dt: f64, t_end: f64) -> Result<Trace, String> {
    let net = parse_netlist(text).map_err(|e| e.to_string())?;
    let sys = lower(&net).map_err(|d| d.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))?;
    let sim = simulate(&sys, &SimConfig::new(dt, t_end)).map_err(|e| e.to_string())?;
    let w = &sim.waveform;
    let step = stride(w.len());
    Ok(Trace {
        t: thin(&w.times(), step),
        y: thin(w.channel("output").unwrap_or_default(), step),
        passivity_steps: sim.passivity_violation_steps,
        truncated_at: sim.blow_up.map(|b| b.t),
    })
}

/// Simulate a netlist and return its output node.
#[wasm_bindgen]
pub fn simulate_netlist(text: &str, dt: f64, t_end: f64) -> Result<Trace, JsError> {
    run_netlist(text, dt, t_end).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[derive(Debug)]
pub struct Band {
    t: Vec<f64>,
    mean: Vec<f64>,
    p10: Vec<f64>,
    p90: Vec<f64>,
    lost: usize,
}

#[wasm_bindgen]
impl Band {
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }
    pub fn mean(&self) -> Vec<f64> {
        self.mean.clone()
    }
    pub fn p10(&self) -> Vec<f64> {
        self.p10.clone()
    }
    pub fn p90(&self) -> Vec<f64> {
        self.p90.clone()
    }
    /// Iterations that blew up or failed.
    #[wasm_bindgen(getter)]
    pub fn lost(&self) -> usize {
        self.lost
    }
}

pub fn run_stability(
    text: &str,
    tolerance: f64,
    iterations: usize,
    seed: u32,
    dt: f64,
    t_end: f64,
) -> Result<Band, String> {
    let net = parse_netlist(text).map_err(|e| e.to_string())?;
    let cfg = ToleranceConfig {
        max_relative_error: tolerance,
        iterations,
        master_seed: u64::from(seed),
        ..ToleranceConfig::default()
    };
    let r = stability_run(&net, &cfg, &SimConfig::new(dt, t_end)).map_err(|e| e.to_string())?;
    let step = stride(r.mean.len());
    let t: Vec<f64> = (0..r.mean.len()).map(|j| r.t0 + j as f64 * r.dt).collect();
    Ok(Band {
        t: thin(&t, step),
        mean: thin(&r.mean, step),
        p10: thin(&r.p10, step),
        p90: thin(&r.p90, step),
        lost: r.blown_up + r.failed,
    })
}

/// Mean and 10th/90th percentile relative error under component tolerance.
#[wasm_bindgen]
pub fn stability_band(
    text: &str,
    tolerance: f64,
    iterations: usize,
    seed: u32,
    dt: f64,
    t_end: f64,
) -> Result<Band, JsError> {
    run_stability(text, tolerance, iterations, seed, dt, t_end).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
#[derive(Debug)]
pub struct Comparison {
    t: Vec<f64>,
    circuit: Vec<f64>,
    oracle: Vec<f64>,
    max_deviation: f64,
    netlist: String,
}

#[wasm_bindgen]
impl Comparison {
    pub fn t(&self) -> Vec<f64> {
        self.t.clone()
    }
    pub fn circuit(&self) -> Vec<f64> {
        self.circuit.clone()
    }
    pub fn oracle(&self) -> Vec<f64> {
        self.oracle.clone()
    }
    #[wasm_bindgen(getter)]
    pub fn max_deviation(&self) -> f64 {
        self.max_deviation
    }
    #[wasm_bindgen(getter)]
    pub fn netlist(&self) -> String {
        self.netlist.clone()
    }
}

pub fn run_comparison(spec_text: &str, dt: f64, t_end: f64) -> Result<Comparison, String> {
    let spec = parse_spec(spec_text).map_err(|e| e.to_string())?;
    let net = compile(&spec).map_err(|e| e.to_string())?;
    let sys = lower(&net).map_err(|d| d.iter().map(ToString::to_string).collect::<Vec<_>>().join("\n"))?;
    let circuit = simulate(&sys, &SimConfig::new(dt, t_end))
        .map_err(|e| e.to_string())?
        .waveform;
    let ide = IdeSpec::from_equation(&spec).map_err(|e| e.to_string())?;
    let oracle = solve_ide(&ide, dt, t_end).map_err(|e| e.to_string())?.waveform;
    // Both runs may stop early on blow-up; compare the common prefix.
    let n = circuit.len().min(oracle.len());
    let (c, o) = (
        &circuit.channel("output").unwrap_or_default()[..n],
        &oracle.channel("output").unwrap_or_default()[..n],
    );
    let max_deviation = if circuit.len() == oracle.len() {
        relative_error(&circuit, &oracle, "output")
            .map_err(|e| e.to_string())?
            .max()
    } else {
        c.iter()
            .zip(o)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1e-12))
            .fold(0.0, f64::max)
    };
    let step = stride(n);
    Ok(Comparison {
        t: thin(&circuit.times()[..n], step),
        circuit: thin(c, step),
        oracle: thin(o, step),
        max_deviation,
        netlist: write_netlist(&net),
    })
}

/// Compile an equation spec, simulate the circuit and solve the equation
/// directly on the same grid.
#[wasm_bindgen]
pub fn compare_with_oracle(spec_text: &str, dt: f64, t_end: f64) -> Result<Comparison, JsError> {
    run_comparison(spec_text, dt, t_end).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const POPULATION: &str = "family=volterra\na=2\nb=0.001\nk1=\"exp(-t)\"\nk2=\"exp(s)*s/(1+s)\"\nN0=1\n";

    #[test]
    fn comparison_agrees_and_returns_the_netlist() {
        let c = run_comparison(POPULATION, 1e-2, 4.0).unwrap();
        assert!(c.max_deviation < 1e-2);
        assert!(c.netlist.contains("memintegrator m1"));
        assert_eq!(c.t.len(), 401);
        assert_eq!(c.circuit.len(), c.oracle.len());
    }

    #[test]
    fn netlist_trace_is_thinned() {
        let c = run_comparison(POPULATION, 1e-2, 1.0).unwrap();
        let trace = run_netlist(&c.netlist, 1e-3, 10.0).unwrap();
        assert!(trace.t.len() <= MAX_POINTS + 1);
        assert_eq!(trace.t.len(), trace.y.len());
        assert!(trace.passivity_steps > 0);
    }

    #[test]
    fn errors_are_messages() {
        assert!(run_netlist("node a\nbogus x\n", 1e-2, 1.0)
            .unwrap_err()
            .contains("line 2"));
        assert!(run_comparison("family=volterra\n", 1e-2, 1.0).is_err());
    }

    #[test]
    fn band_shape() {
        let c = run_comparison(POPULATION, 1e-2, 1.0).unwrap();
        let b = run_stability(&c.netlist, 0.1, 8, 7, 1e-2, 2.0).unwrap();
        assert_eq!(b.mean.len(), 201);
        assert!(b.p10.iter().zip(&b.p90).all(|(lo, hi)| lo <= hi));
        assert_eq!(b.lost, 0);
    }
}
