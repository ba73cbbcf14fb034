//! Monte Carlo tolerance analysis: perturb component values, rerun, and
//! summarize the relative error against the nominal circuit.
//!
//! Each iteration draws from its own ChaCha8 stream selected by the
//! iteration index, so results do not depend on how iterations are
//! scheduled.

use crate::elements::{Element, MemristorState};
use crate::expr::{BinaryOp, Expr};
use crate::netlist::{lower, Diagnostic, Netlist};
use crate::solver::{simulate, SimConfig, SolverError};
use crate::waveform::{relative_error, Waveform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution as _, Normal};
use std::fmt::Write as _;
use std::io;
use thiserror::Error;

pub const DEFAULT_SEED: u64 = 0x4d45_4d53_4f4c_5645;
/// A run is unstable when more than this fraction of iterations fail.
pub const UNSTABLE_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    /// Uniform on `[-eps, eps]`.
    Uniform,
    /// Normal with standard deviation `eps/2`, redrawn outside `[-eps, eps]`.
    TruncatedGaussian,
}

impl Distribution {
    pub fn name(self) -> &'static str {
        match self {
            Distribution::Uniform => "uniform",
            Distribution::TruncatedGaussian => "truncated-gaussian",
        }
    }
}

/// Coefficient classes subject to perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Targets {
    /// Adder gains and integrator input resistances.
    pub gains: bool,
    pub capacitance: bool,
    pub potentiometers: bool,
    /// Integrator outputs and memristor states.
    pub initial_conditions: bool,
    /// Numeric literals inside memductance, state-dynamics and generator
    /// expressions. Exponents of `^` are left alone.
    pub expression_literals: bool,
}

impl Default for Targets {
    fn default() -> Self {
        Self {
            gains: true,
            capacitance: true,
            potentiometers: true,
            initial_conditions: true,
            expression_literals: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToleranceConfig {
    pub max_relative_error: f64,
    pub iterations: usize,
    pub master_seed: u64,
    pub distribution: Distribution,
    pub targets: Targets,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            max_relative_error: 0.10,
            iterations: 100,
            master_seed: DEFAULT_SEED,
            distribution: Distribution::Uniform,
            targets: Targets::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ToleranceError {
    #[error("tolerance must lie in [0, 1), got {0}")]
    Tolerance(f64),
    #[error("at least one iteration is required")]
    NoIterations,
    #[error("invalid netlist: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Diagnostic>),
    #[error("nominal simulation failed: {0}")]
    Baseline(#[from] SolverError),
    #[error("nominal simulation blew up at t = {0}")]
    BaselineBlowUp(f64),
}

fn check(cfg: &ToleranceConfig) -> Result<(), ToleranceError> {
    if !(0.0..1.0).contains(&cfg.max_relative_error) {
        return Err(ToleranceError::Tolerance(cfg.max_relative_error));
    }
    if cfg.iterations == 0 {
        return Err(ToleranceError::NoIterations);
    }
    Ok(())
}

struct Sampler {
    rng: ChaCha8Rng,
    eps: f64,
    distribution: Distribution,
}

impl Sampler {
    fn new(cfg: &ToleranceConfig, iteration: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.master_seed);
        rng.set_stream(iteration as u64);
        Self {
            rng,
            eps: cfg.max_relative_error,
            distribution: cfg.distribution,
        }
    }

    fn delta(&mut self) -> f64 {
        if self.eps == 0.0 {
            return 0.0;
        }
        match self.distribution {
            Distribution::Uniform => self.rng.random_range(-self.eps..=self.eps),
            Distribution::TruncatedGaussian => {
                let normal = Normal::new(0.0, self.eps / 2.0).expect("positive deviation");
                loop {
                    let d: f64 = normal.sample(&mut self.rng);
                    if d.abs() <= self.eps {
                        return d;
                    }
                }
            }
        }
    }

    fn scale(&mut self, x: &mut f64) {
        *x *= 1.0 + self.delta();
    }
}

fn perturb_expr(e: &Expr, s: &mut Sampler) -> Expr {
    match e {
        Expr::Const(c) => Expr::Const(c * (1.0 + s.delta())),
        Expr::Var(_) => e.clone(),
        Expr::Unary(op, a) => Expr::unary(*op, perturb_expr(a, s)),
        Expr::Binary(BinaryOp::Pow, a, b) => Expr::binary(BinaryOp::Pow, perturb_expr(a, s), (**b).clone()),
        Expr::Binary(op, a, b) => {
            let a = perturb_expr(a, s);
            Expr::binary(*op, a, perturb_expr(b, s))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perturbed {
    pub netlist: Netlist,
    /// Draws rejected because they broke an element constraint.
    pub redraws: usize,
}

/// Copy of `n` with every targeted coefficient scaled by `1 + delta`.
///
/// Coefficients are visited in element-id order and, within an element, in
/// a fixed field order, so a given `(master_seed, iteration)` always yields
/// the same netlist.
pub fn perturb(n: &Netlist, cfg: &ToleranceConfig, iteration: usize) -> Perturbed {
    let mut out = n.clone();
    let mut redraws = 0;
    if cfg.max_relative_error == 0.0 {
        return Perturbed { netlist: out, redraws };
    }
    let t = cfg.targets;
    let mut s = Sampler::new(cfg, iteration);
    for e in out.elements.values_mut() {
        match e {
            Element::Adder { inputs, .. } => {
                if t.gains {
                    inputs.iter_mut().for_each(|(_, k)| s.scale(k));
                }
            }
            Element::Integrator {
                capacitance,
                ic,
                inputs,
                ..
            } => {
                if t.gains {
                    inputs.iter_mut().for_each(|(_, r)| s.scale(r));
                }
                if t.capacitance {
                    s.scale(capacitance);
                }
                if t.initial_conditions {
                    s.scale(ic);
                }
            }
            Element::Potentiometer { alpha, .. } => {
                if t.potentiometers {
                    let nominal = *alpha;
                    loop {
                        let candidate = nominal * (1.0 + s.delta());
                        if candidate < 1.0 {
                            *alpha = candidate;
                            break;
                        }
                        redraws += 1;
                    }
                }
            }
            Element::Multiplier { .. } => {}
            Element::FunctionGenerator { signal, .. } => {
                if t.expression_literals {
                    *signal = perturb_expr(signal, &mut s);
                }
            }
            Element::MemIntegrator {
                capacitance,
                ic,
                memristor,
                ..
            } => {
                if t.capacitance {
                    s.scale(capacitance);
                }
                if t.initial_conditions {
                    s.scale(ic);
                }
                if t.expression_literals {
                    memristor.memductance = perturb_expr(&memristor.memductance, &mut s);
                }
                if let MemristorState::Own { dynamics, omega0 } = &mut memristor.state {
                    if t.expression_literals {
                        *dynamics = perturb_expr(dynamics, &mut s);
                    }
                    if t.initial_conditions {
                        s.scale(omega0);
                    }
                }
            }
        }
    }
    Perturbed { netlist: out, redraws }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    /// Uses the rayon pool when the `parallel` feature is enabled.
    Parallel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StabilityReport {
    pub t0: f64,
    pub dt: f64,
    pub mean: Vec<f64>,
    pub p10: Vec<f64>,
    pub p90: Vec<f64>,
    pub iterations: usize,
    /// Iterations that ran to the end and enter the statistics.
    pub completed: usize,
    pub blown_up: usize,
    /// Iterations aborted by an expression domain error.
    pub failed: usize,
    pub redraws: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub distribution: Distribution,
    pub unstable: bool,
}

enum Outcome {
    Series(Vec<f64>, usize),
    BlownUp(usize),
    Failed(usize),
}

fn iteration(n: &Netlist, cfg: &ToleranceConfig, sim: &SimConfig, reference: &Waveform, i: usize) -> Outcome {
    let Perturbed { netlist, redraws } = perturb(n, cfg, i);
    let Ok(sys) = lower(&netlist) else {
        return Outcome::Failed(redraws);
    };
    match simulate(&sys, sim) {
        Ok(run) if run.blow_up.is_some() => Outcome::BlownUp(redraws),
        Ok(run) => match relative_error(&run.waveform, reference, "output") {
            Ok(e) => Outcome::Series(e.values, redraws),
            Err(_) => Outcome::Failed(redraws),
        },
        Err(_) => Outcome::Failed(redraws),
    }
}

fn run_all(
    n: &Netlist,
    cfg: &ToleranceConfig,
    sim: &SimConfig,
    reference: &Waveform,
    execution: Execution,
) -> Vec<Outcome> {
    #[cfg(feature = "parallel")]
    if execution == Execution::Parallel {
        use rayon::prelude::*;
        return (0..cfg.iterations)
            .into_par_iter()
            .map(|i| iteration(n, cfg, sim, reference, i))
            .collect();
    }
    let _ = execution;
    (0..cfg.iterations)
        .map(|i| iteration(n, cfg, sim, reference, i))
        .collect()
}

/// Linear-interpolated percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn stability_run(n: &Netlist, cfg: &ToleranceConfig, sim: &SimConfig) -> Result<StabilityReport, ToleranceError> {
    stability_run_with(n, cfg, sim, Execution::Parallel)
}

pub fn stability_run_with(
    n: &Netlist,
    cfg: &ToleranceConfig,
    sim: &SimConfig,
    execution: Execution,
) -> Result<StabilityReport, ToleranceError> {
    check(cfg)?;
    let sys = lower(n).map_err(ToleranceError::Invalid)?;
    let sim = SimConfig {
        record_channels: Vec::new(),
        ..sim.clone()
    };
    let nominal = simulate(&sys, &sim)?;
    if let Some(b) = nominal.blow_up {
        return Err(ToleranceError::BaselineBlowUp(b.t));
    }
    let reference = nominal.waveform;

    let outcomes = run_all(n, cfg, &sim, &reference, execution);
    let (mut blown_up, mut failed, mut redraws) = (0, 0, 0);
    let mut series = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Series(s, r) => {
                series.push(s);
                redraws += r;
            }
            Outcome::BlownUp(r) => {
                blown_up += 1;
                redraws += r;
            }
            Outcome::Failed(r) => {
                failed += 1;
                redraws += r;
            }
        }
    }

    let len = if series.is_empty() { 0 } else { reference.len() };
    let (mut mean, mut p10, mut p90) = (
        Vec::with_capacity(len),
        Vec::with_capacity(len),
        Vec::with_capacity(len),
    );
    let mut column = Vec::with_capacity(series.len());
    for j in 0..len {
        column.clear();
        column.extend(series.iter().map(|s| s[j]));
        mean.push(column.iter().sum::<f64>() / column.len() as f64);
        column.sort_by(f64::total_cmp);
        p10.push(percentile(&column, 0.1));
        p90.push(percentile(&column, 0.9));
    }
    let lost = blown_up + failed;
    Ok(StabilityReport {
        t0: reference.t0,
        dt: reference.dt,
        mean,
        p10,
        p90,
        iterations: cfg.iterations,
        completed: series.len(),
        blown_up,
        failed,
        redraws,
        seed: cfg.master_seed,
        tolerance: cfg.max_relative_error,
        distribution: cfg.distribution,
        unstable: lost as f64 > UNSTABLE_FRACTION * cfg.iterations as f64 || series.is_empty(),
    })
}

impl StabilityReport {
    pub fn terminal_mean(&self) -> Option<f64> {
        self.mean.last().copied()
    }

    /// Columns `t,mean_rel_err,p10,p90`.
    pub fn write_csv<W: io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "mean_rel_err", "p10", "p90"])?;
        for j in 0..self.mean.len() {
            let t = self.t0 + j as f64 * self.dt;
            out.write_record([t, self.mean[j], self.p10[j], self.p90[j]].map(|x| format!("{x:.12e}")))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let terminal = self.terminal_mean().map_or("n/a".to_string(), |x| format!("{x:.6e}"));
        writeln!(s, "status: {}", if self.unstable { "unstable" } else { "stable" }).unwrap();
        writeln!(s, "iterations: {}", self.iterations).unwrap();
        writeln!(s, "completed: {}", self.completed).unwrap();
        writeln!(s, "blown_up: {}", self.blown_up).unwrap();
        writeln!(s, "failed: {}", self.failed).unwrap();
        writeln!(s, "redraws: {}", self.redraws).unwrap();
        writeln!(s, "seed: {}", self.seed).unwrap();
        writeln!(s, "tolerance: {}", self.tolerance).unwrap();
        writeln!(s, "distribution: {}", self.distribution.name()).unwrap();
        writeln!(s, "terminal_mean_rel_err: {terminal}").unwrap();
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::fixtures;
    use proptest::prelude::*;

    fn cfg(eps: f64) -> ToleranceConfig {
        ToleranceConfig {
            max_relative_error: eps,
            iterations: 8,
            ..ToleranceConfig::default()
        }
    }

    fn integrator_values(n: &Netlist) -> Vec<f64> {
        n.elements
            .values()
            .flat_map(|e| match e {
                Element::Integrator {
                    capacitance,
                    ic,
                    inputs,
                    ..
                } => {
                    let mut v = vec![*capacitance, *ic];
                    v.extend(inputs.iter().map(|(_, r)| *r));
                    v
                }
                _ => vec![],
            })
            .collect()
    }

    #[test]
    fn zero_tolerance_is_identity() {
        let n = fixtures::memristive("-2 + 0.001*v + exp(-t)*omega", "exp(t)*t/(1 + t)*v", 1.0);
        assert_eq!(perturb(&n, &cfg(0.0), 3).netlist, n);
        let report = stability_run(&n, &cfg(0.0), &SimConfig::new(1e-2, 1.0)).unwrap();
        assert!(report.mean.iter().all(|&x| x == 0.0));
        assert_eq!(report.completed, 8);
    }

    #[test]
    fn same_seed_and_index_repeat() {
        let n = fixtures::second_order_with_adder(1.0, 0.5);
        let c = cfg(0.1);
        assert_eq!(perturb(&n, &c, 5), perturb(&n, &c, 5));
        assert_ne!(perturb(&n, &c, 5), perturb(&n, &c, 6));
    }

    #[test]
    fn structure_is_unchanged() {
        let n = fixtures::memristive("-2 + 0.001*v^2 + exp(-t)*omega", "exp(t)*t/(1 + t)*v", 1.0);
        let p = perturb(&n, &cfg(0.1), 0).netlist;
        assert_eq!(p.nodes, n.nodes);
        assert_eq!(
            p.elements.keys().collect::<Vec<_>>(),
            n.elements.keys().collect::<Vec<_>>()
        );
        let Element::MemIntegrator { memristor, .. } = &p.elements["m1"] else {
            unreachable!()
        };
        let text = memristor.memductance.to_string();
        assert!(text.contains("v^2"), "{text}");
        assert!(!text.contains("0.001*"), "{text}");
    }

    #[test]
    fn potentiometer_redraws_stay_below_one() {
        let mut n = Netlist::new();
        n.node("a").node("b");
        n.add(
            "g1",
            Element::FunctionGenerator {
                out: "a".into(),
                input: None,
                signal: Expr::num(1.0),
            },
        );
        n.add(
            "k1",
            Element::Potentiometer {
                out: "b".into(),
                input: "a".into(),
                alpha: 0.99,
            },
        );
        n.set_output("b", None);
        let c = ToleranceConfig {
            targets: Targets {
                expression_literals: false,
                ..Targets::default()
            },
            ..cfg(0.5)
        };
        let mut total = 0;
        for i in 0..50 {
            let p = perturb(&n, &c, i);
            let Element::Potentiometer { alpha, .. } = p.netlist.elements["k1"] else {
                unreachable!()
            };
            assert!(alpha < 1.0 && alpha > 0.0);
            total += p.redraws;
        }
        assert!(total > 0);
    }

    #[test]
    fn gaussian_draws_are_truncated() {
        let n = fixtures::second_order(1.0, 1.0);
        let c = ToleranceConfig {
            distribution: Distribution::TruncatedGaussian,
            ..cfg(0.05)
        };
        let base = integrator_values(&n);
        for i in 0..50 {
            for (x, y) in integrator_values(&perturb(&n, &c, i).netlist).iter().zip(&base) {
                assert!((x - y).abs() <= 0.05 * y.abs() + 1e-15);
            }
        }
    }

    #[test]
    fn percentiles_interpolate_linearly() {
        let data: Vec<f64> = (0..11).map(f64::from).collect();
        assert_eq!(percentile(&data, 0.1), 1.0);
        assert_eq!(percentile(&data, 0.9), 9.0);
        assert_eq!(percentile(&[0.0, 1.0], 0.1), 0.1);
        assert_eq!(percentile(&[3.0], 0.9), 3.0);
    }

    #[test]
    fn single_iteration_report_is_that_run() {
        let n = fixtures::second_order_with_adder(1.0, 0.0);
        let c = ToleranceConfig {
            iterations: 1,
            ..cfg(0.1)
        };
        let sim = SimConfig::new(1e-2, 1.0);
        let report = stability_run(&n, &c, &sim).unwrap();
        let nominal = simulate(&lower(&n).unwrap(), &sim).unwrap().waveform;
        let run = simulate(&lower(&perturb(&n, &c, 0).netlist).unwrap(), &sim)
            .unwrap()
            .waveform;
        let e = relative_error(&run, &nominal, "output").unwrap().values;
        assert_eq!(report.mean, e);
        assert_eq!(report.p10, e);
        assert_eq!(report.p90, e);
    }

    #[test]
    fn blow_ups_are_excluded_and_mark_instability() {
        // nominal v' = 0.9 v^2 escapes at t ~ 1.11; perturbed copies may escape
        // before t = 1.05
        let n = fixtures::memristive("-0.9*v", "0", 1.0);
        let c = ToleranceConfig {
            iterations: 20,
            ..cfg(0.2)
        };
        let report = stability_run(&n, &c, &SimConfig::new(1e-3, 1.05)).unwrap();
        assert!(report.blown_up > 0);
        assert_eq!(report.completed + report.blown_up + report.failed, 20);
        assert_eq!(report.unstable, report.blown_up + report.failed > 4);
        assert!(report.summary().contains(&format!("blown_up: {}", report.blown_up)));
    }

    #[test]
    fn report_csv_layout() {
        let n = fixtures::second_order(1.0, 0.0);
        let report = stability_run(&n, &cfg(0.1), &SimConfig::new(0.25, 1.0)).unwrap();
        let text = report.to_csv_string();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,mean_rel_err,p10,p90");
        assert_eq!(lines.len(), 6);
        assert!(lines[1].starts_with("0.000000000000e0,"));
    }

    #[test]
    fn config_is_checked() {
        let n = fixtures::second_order(1.0, 0.0);
        let sim = SimConfig::new(0.1, 1.0);
        assert!(stability_run(&n, &cfg(1.0), &sim).is_err());
        assert!(stability_run(&n, &cfg(-0.1), &sim).is_err());
        let c = ToleranceConfig {
            iterations: 0,
            ..cfg(0.1)
        };
        assert!(stability_run(&n, &c, &sim).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn uniform_draws_stay_in_band(seed in any::<u64>(), i in 0usize..1000, eps in 0.0f64..0.5) {
            let n = fixtures::second_order_with_adder(1.0, 1.0);
            let c = ToleranceConfig { master_seed: seed, ..cfg(eps) };
            let base = integrator_values(&n);
            for (x, y) in integrator_values(&perturb(&n, &c, i).netlist).iter().zip(&base) {
                prop_assert!((x - y).abs() <= eps * y.abs() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn sequential_and_parallel_agree(seed in any::<u64>()) {
            let n = fixtures::second_order_with_adder(1.0, 0.2);
            let c = ToleranceConfig { master_seed: seed, ..cfg(0.1) };
            let sim = SimConfig::new(0.05, 1.0);
            let a = stability_run_with(&n, &c, &sim, Execution::Sequential).unwrap();
            let b = stability_run_with(&n, &c, &sim, Execution::Parallel).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
