//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion. Exits
//! non-zero when any criterion fails.

use memsolve::compiler::{compile, compile_linear, parse_spec, EquationSpec, LinearOdeSystem};
use memsolve::elements::ElementKind;
use memsolve::netlist::format::write_netlist;
use memsolve::netlist::{lower, Netlist};
use memsolve::oracle::{solve_ide, IdeSpec};
use memsolve::solver::{simulate, SimConfig, Simulation};
use memsolve::tolerance::{stability_run, StabilityReport, ToleranceConfig};
use memsolve::waveform::relative_error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::process::Command;
use std::time::{Duration, Instant};

const LINEAR2: &str = include_str!("../../../data/linear2.spec");
const POPULATION: &str = include_str!("../../../data/population.spec");
const TURBULENT: &str = include_str!("../../../data/turbulent.spec");
const COSH: &str = include_str!("../../../data/cosh.spec");
const SECOND_ORDER: &str = include_str!("../../../data/second_order.spec");
const COMPOSED: &str = include_str!("../../../data/composed.spec");

const LINEAR_TOL: f64 = 1e-6;
const LINEAR_BUDGET: Duration = Duration::from_secs(1);
const RK4_RATIO: (f64, f64) = (12.0, 20.0);
const ORACLE_TOL: f64 = 0.01;
const ORACLE_BUDGET: Duration = Duration::from_secs(10);
const POPULATION_BAND: (f64, f64) = (0.05, 0.15);
const TURBULENT_BAND: (f64, f64) = (0.08, 0.18);
const TREND_SLACK: f64 = 0.005;
const COMPOSITION_TOL: f64 = 1e-9;
const RANDOM_SPECS: usize = 50;
const RANDOM_SPEC_SEED: u64 = 0x5eed_0008;

// Stability studies run long enough for the mean error to settle; the
// plateau test looks at the spread over the final quarter.
const STABILITY_DT: f64 = 1e-2;
const STABILITY_T_END: f64 = 20.0;
const PLATEAU_SPREAD: f64 = 0.01;

type Verdict = Result<String, String>;
type Check = fn() -> Verdict;

fn spec(text: &str) -> EquationSpec {
    parse_spec(text).expect("bundled spec parses")
}

fn run(net: &Netlist, dt: f64, t_end: f64) -> Simulation {
    simulate(
        &lower(net).expect("compiled netlist lowers"),
        &SimConfig::new(dt, t_end),
    )
    .expect("simulation")
}

fn linear2_closed_form(t: f64) -> f64 {
    let r1 = (-1.0 + 5f64.sqrt()) / 2.0;
    let r2 = (-1.0 - 5f64.sqrt()) / 2.0;
    let a = -r2 / (r1 - r2);
    let b = r1 / (r1 - r2);
    a * (r1 * t).exp() + b * (r2 * t).exp()
}

fn linear2_max_error(dt: f64) -> f64 {
    let net = compile(&spec(LINEAR2)).unwrap();
    let w = run(&net, dt, 5.0).waveform;
    let y = w.channel("output").unwrap();
    (0..w.len())
        .map(|i| (y[i] - linear2_closed_form(w.time(i))).abs())
        .fold(0.0, f64::max)
}

fn linear_fidelity() -> Verdict {
    let start = Instant::now();
    let err = linear2_max_error(1e-3);
    let elapsed = start.elapsed();
    let detail = format!("max |y - closed form| = {err:.3e} (<= {LINEAR_TOL:e}), {elapsed:.2?} (< {LINEAR_BUDGET:?})");
    if err <= LINEAR_TOL && elapsed < LINEAR_BUDGET {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn rk4_order() -> Verdict {
    let ratio = linear2_max_error(2e-3) / linear2_max_error(1e-3);
    let detail = format!(
        "error ratio dt=2e-3 / dt=1e-3 = {ratio:.3} (in [{}, {}])",
        RK4_RATIO.0, RK4_RATIO.1
    );
    if (RK4_RATIO.0..=RK4_RATIO.1).contains(&ratio) {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence(text: &str, budget: Option<Duration>) -> Verdict {
    let start = Instant::now();
    let s = spec(text);
    let circuit = run(&compile(&s).unwrap(), 1e-3, 4.0);
    let oracle = solve_ide(&IdeSpec::from_equation(&s).unwrap(), 1e-3, 4.0).unwrap();
    let dev = relative_error(&circuit.waveform, &oracle.waveform, "output")
        .unwrap()
        .max();
    let elapsed = start.elapsed();
    let mut detail = format!("max relative deviation {dev:.3e} (<= {ORACLE_TOL})");
    let mut ok = dev <= ORACLE_TOL && circuit.blow_up.is_none() && oracle.blow_up_at.is_none();
    if let Some(b) = budget {
        detail += &format!(", {elapsed:.2?} (< {b:?})");
        ok &= elapsed < b;
    }
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn change_of_variables() -> Verdict {
    let s = spec(COSH);
    let circuit = run(&compile(&s).unwrap(), 1e-3, 4.0);
    let oracle = solve_ide(&IdeSpec::from_equation(&s).unwrap(), 1e-3, 4.0).unwrap();
    let dev = relative_error(&circuit.waveform, &oracle.waveform, "output")
        .unwrap()
        .max();
    let clamps = circuit.ln_clamp_activations;
    let detail = format!("max relative deviation {dev:.3e} (<= {ORACLE_TOL}), ln clamps {clamps} (= 0)");
    if dev <= ORACLE_TOL && clamps == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn stability(text: &str) -> StabilityReport {
    let net = compile(&spec(text)).unwrap();
    stability_run(
        &net,
        &ToleranceConfig::default(),
        &SimConfig::new(STABILITY_DT, STABILITY_T_END),
    )
    .unwrap()
}

fn population_stability() -> Verdict {
    let r = stability(POPULATION);
    let tail = &r.mean[r.mean.len() * 3 / 4..];
    let spread = tail.iter().copied().fold(f64::MIN, f64::max) - tail.iter().copied().fold(f64::MAX, f64::min);
    let terminal = r.terminal_mean().unwrap();
    let detail = format!(
        "terminal mean {terminal:.4} (in [{}, {}]), final-quarter spread {spread:.4} (< {PLATEAU_SPREAD}), horizon {STABILITY_T_END}",
        POPULATION_BAND.0, POPULATION_BAND.1
    );
    if (POPULATION_BAND.0..=POPULATION_BAND.1).contains(&terminal) && spread < PLATEAU_SPREAD && !r.unstable {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn turbulent_stability() -> Verdict {
    let r = stability(TURBULENT);
    let drop = r.mean.windows(2).map(|w| w[0] - w[1]).fold(f64::MIN, f64::max);
    let terminal = r.terminal_mean().unwrap();
    let detail = format!(
        "terminal mean {terminal:.4} (in [{}, {}]), largest step decrease {drop:.2e} (<= {TREND_SLACK}), horizon {STABILITY_T_END}",
        TURBULENT_BAND.0, TURBULENT_BAND.1
    );
    if (TURBULENT_BAND.0..=TURBULENT_BAND.1).contains(&terminal) && drop <= TREND_SLACK && !r.unstable {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Random `m`-variable order-`n` system with a well-conditioned leading matrix.
fn random_linear(rng: &mut ChaCha8Rng) -> LinearOdeSystem {
    let n = rng.random_range(1..=4);
    let m = rng.random_range(1..=3);
    let coefficients = (0..m)
        .map(|l| {
            (0..m)
                .map(|i| {
                    (0..=n)
                        .map(|k| {
                            if k == n {
                                if i == l {
                                    rng.random_range(1.0..3.0)
                                } else {
                                    rng.random_range(-0.2..0.2)
                                }
                            } else if rng.random_bool(0.3) {
                                0.0
                            } else {
                                rng.random_range(-2.0..2.0)
                            }
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let initial = (0..m)
        .map(|_| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    LinearOdeSystem {
        order: n,
        coefficients,
        initial,
    }
}

fn resource_counts() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(RANDOM_SPEC_SEED);
    let mut failures = Vec::new();
    for draw in 0..RANDOM_SPECS {
        let s = random_linear(&mut rng);
        let (n, m) = (s.order, s.coefficients.len());
        let net = match compile_linear(&s) {
            Ok(net) => net,
            Err(e) => {
                failures.push(format!("#{draw} (n={n}, m={m}): {e}"));
                continue;
            }
        };
        let integrators = net.count(ElementKind::Integrator);
        // Every adder negates its weighted sum, so all of them count as sign inverters.
        let inverters = net.count(ElementKind::Adder);
        if integrators != n * m || inverters as f64 > (n * m) as f64 / 2.0 {
            failures.push(format!(
                "#{draw} (n={n}, m={m}): {integrators} integrators, {inverters} inverters"
            ));
        }
    }
    let summary = format!(
        "{}/{RANDOM_SPECS} specs within n*m integrators and n*m/2 inverters",
        RANDOM_SPECS - failures.len()
    );
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(format!("{summary}; violations: {}", failures.join("; ")))
    }
}

fn composition() -> Verdict {
    let single = run(&compile(&spec(SECOND_ORDER)).unwrap(), 1e-3, 3.0);
    let composed = run(&compile(&spec(COMPOSED)).unwrap(), 1e-3, 3.0);
    let dev = relative_error(&composed.waveform, &single.waveform, "output")
        .unwrap()
        .max();
    let detail = format!("max relative difference {dev:.3e} (<= {COMPOSITION_TOL:e})");
    if dev <= COMPOSITION_TOL {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn determinism() -> Verdict {
    let dir = std::env::temp_dir().join(format!("memsolve-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
    let net_path = dir.join("population.net");
    std::fs::write(&net_path, write_netlist(&compile(&spec(POPULATION)).unwrap())).map_err(|e| e.to_string())?;
    let mut reports = Vec::new();
    for (i, threads) in ["1", "4"].iter().enumerate() {
        let out = dir.join(format!("report{i}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_memsolve"))
            .args([
                "stability",
                net_path.to_str().unwrap(),
                "--dt",
                "1e-2",
                "--t-end",
                "4",
                "--seed",
                "42",
                "--quiet",
            ])
            .arg("--out")
            .arg(&out)
            .env("MEMSOLVE_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("memsolve stability exited with {}", status.status));
        }
        reports.push(std::fs::read(&out).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    if reports[0] == reports[1] {
        Ok(format!(
            "two runs (1 and 4 threads) produced identical {}-byte reports",
            reports[0].len()
        ))
    } else {
        Err("report CSVs differ between runs".into())
    }
}

fn passivity() -> Verdict {
    let net = compile(&spec(POPULATION)).unwrap();
    let a = run(&net, 1e-3, 4.0).passivity_violation_steps;
    let b = run(&net, 1e-3, 4.0).passivity_violation_steps;
    let detail = format!("passivity-flag steps {a} and {b}");
    if a > 0 && a == b {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria: [(&str, Check); 11] = [
        ("1 linear ODE fidelity", linear_fidelity),
        ("2 RK4 order", rk4_order),
        ("3 oracle equivalence, population model", || {
            oracle_equivalence(POPULATION, Some(ORACLE_BUDGET))
        }),
        ("4 oracle equivalence, turbulent model", || {
            oracle_equivalence(TURBULENT, None)
        }),
        ("5 change of variables", change_of_variables),
        ("6 stability, population model", population_stability),
        ("7 stability, turbulent model", turbulent_stability),
        ("8 resource counts", resource_counts),
        ("9 memductance composition", composition),
        ("10 determinism", determinism),
        ("11 passivity accounting", passivity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        match check() {
            Ok(detail) => println!("[PASS] {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail}");
            }
        }
    }
    println!("{} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
