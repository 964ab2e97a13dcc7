//! One function per subcommand, each producing an [`Outcome`].

use mvdyn::ergodic::{
    branching_measure, ergodicity_report_with, orbit_sample, recurrence_sample, recurrence_tree,
};
use mvdyn::finiteoracle::run_oracle;
use mvdyn::fractal::{cantor_fp_compare, cantor_map, ifs_overlap_map, Similarity};
use mvdyn::kernel::{check_invariance, kernel_eval, pushforward};
use mvdyn::pcfunc::PCFunction;
use mvdyn::transfer::{
    birkhoff_average, duality_check, fp_apply, koopman_eval, koopman_pc_with_budget, stationary_density,
    ulam_matrix, BirkhoffMode, BirkhoffValue, PowerIterationOptions, StationaryDensity, StationaryMethod,
    DEFAULT_PIECE_BUDGET,
};
use mvdyn::{gallery, Error, MultiSystem, Rational, Scalar};
use serde::Serialize;
use serde_json::{json, Value};

use crate::input;
use crate::output::{self, num};
use crate::{BirkhoffModeArg, CliError, Command, Global};

pub struct Outcome {
    pub system: Option<String>,
    pub params: Value,
    pub result: Value,
    pub csv: Option<String>,
    /// Set when a budget or convergence limit was hit.
    pub warning: Option<String>,
    /// One line for stderr.
    pub summary: Option<String>,
}

impl Outcome {
    fn new(params: &impl Serialize, result: Value) -> Self {
        Outcome {
            system: None,
            params: serde_json::to_value(params).expect("params serialize"),
            result,
            csv: None,
            warning: None,
            summary: None,
        }
    }

    fn csv(mut self, csv: String) -> Self {
        self.csv = Some(csv);
        self
    }
}

pub fn name(command: &Command) -> &'static str {
    match command {
        Command::Eval(_) => "eval",
        Command::Preimage(_) => "preimage",
        Command::Pushforward(_) => "pushforward",
        Command::CheckInvariance(_) => "check-invariance",
        Command::Kernel(_) => "kernel",
        Command::Koopman(_) => "koopman",
        Command::Fp(_) => "fp",
        Command::Duality(_) => "duality",
        Command::Ulam(_) => "ulam",
        Command::Stationary(_) => "stationary",
        Command::Birkhoff(_) => "birkhoff",
        Command::Recurrence(_) => "recurrence",
        Command::Orbit(_) => "orbit",
        Command::Ergodicity(_) => "ergodicity",
        Command::Branching => "branching",
        Command::Cantor(_) => "cantor",
        Command::Ifs(_) => "ifs",
        Command::Oracle(_) => "oracle",
        Command::Gallery(_) => "gallery",
    }
}

fn piece_budget() -> Result<usize, CliError> {
    match std::env::var("MVDYN_PIECE_BUDGET") {
        Ok(v) => v
            .trim()
            .parse()
            .map_err(|_| CliError::Domain(format!("MVDYN_PIECE_BUDGET: `{v}` is not a piece count"))),
        Err(_) => Ok(DEFAULT_PIECE_BUDGET),
    }
}

fn load(global: &Global) -> Result<(String, MultiSystem), CliError> {
    let source = global
        .system
        .clone()
        .ok_or_else(|| CliError::Domain("this command needs --system".into()))?;
    let sys = input::system(&source)?;
    Ok((source, sys))
}

fn one() -> Rational {
    Rational::from_count(1)
}

pub fn run(command: &Command, global: &Global) -> Result<Outcome, CliError> {
    let needs_system = !matches!(
        command,
        Command::Cantor(_) | Command::Ifs(_) | Command::Oracle(_) | Command::Gallery(_)
    );
    if !needs_system {
        return standalone(command, global);
    }
    let (source, sys) = load(global)?;
    let mut outcome = with_system(command, global, &sys)?;
    outcome.system = Some(source);
    Ok(outcome)
}

fn with_system(command: &Command, global: &Global, sys: &MultiSystem) -> Result<Outcome, CliError> {
    Ok(match command {
        Command::Eval(a) => {
            let x = input::rational(&a.x, "x")?;
            let images = sys.evaluate(&x)?;
            Outcome::new(
                a,
                json!({
                    "x": num(&x),
                    "images": images.iter().map(num).collect::<Vec<_>>(),
                    "branch_multiplicity": sys.multiplicity_at(&x),
                }),
            )
        }
        Command::Preimage(a) => {
            let b = input::set(&a.set, "set")?;
            let full = sys.preimage_full(&b);
            let mut result = json!({ "set": b, "preimage": full, "measure": num(&full.measure()) });
            if a.graded {
                result["graded"] = sys
                    .graded_partition(&b)
                    .into_iter()
                    .map(|((k, l), s)| json!({ "k": k, "l": l, "set": s, "measure": num(&s.measure()) }))
                    .collect();
            }
            Outcome::new(a, result)
        }
        Command::Pushforward(a) => {
            let mu = input::function(&a.density, "density")?;
            let b = input::set(&a.set, "set")?;
            let image = pushforward(sys, &mu)?;
            let result = json!({
                "density": output::function(&image),
                "mass": num(&image.integral()),
                "set": b,
                "set_mass": num(&image.integral_over(&b)),
            });
            Outcome::new(a, result).csv(output::plot_rows(&image))
        }
        Command::CheckInvariance(a) => {
            let mu = input::function(&a.density, "density")?;
            let b = input::set(&a.set, "set")?;
            let report = check_invariance(sys, &mu)?;
            let result = json!({
                "is_invariant": report.is_invariant,
                "max_discrepancy": num(&report.max_discrepancy),
                "witness_set": report.witness_set,
                "input_density": output::function(&report.input_density),
                "output_density": output::function(&report.output_density),
                "set": b,
                "set_mass": num(&report.output_density.integral_over(&b)),
            });
            let mut out = Outcome::new(a, result).csv(output::plot_rows(&report.output_density));
            out.summary = Some(format!(
                "{} (max discrepancy {})",
                if report.is_invariant { "invariant" } else { "not invariant" },
                report.max_discrepancy.to_repr()
            ));
            out
        }
        Command::Kernel(a) => {
            let x = input::rational(&a.x, "x")?;
            let b = input::set(&a.set, "set")?;
            Outcome::new(a, json!({ "value": num(&kernel_eval(sys, &x, &b)?) }))
        }
        Command::Koopman(a) => {
            let f = input::function(&a.f, "f")?;
            match koopman_pc_with_budget(sys, &f, piece_budget()?) {
                Ok(uf) => {
                    let mut result = json!({ "function": output::function(&uf), "pieces": uf.piece_count() });
                    if let Some(x) = &a.x {
                        result["value"] = num(&uf.eval(&input::rational(x, "x")?));
                    }
                    Outcome::new(a, result).csv(output::plot_rows(&uf))
                }
                Err(e @ Error::PieceBudget { .. }) => {
                    let mut result = json!({ "function": null });
                    if let Some(x) = &a.x {
                        result["value"] = num(&koopman_eval(sys, &f, &input::rational(x, "x")?)?);
                    }
                    let mut out = Outcome::new(a, result);
                    out.warning = Some(e.to_string());
                    out
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Fp(a) => {
            let f = input::function(&a.f, "f")?;
            let pf = fp_apply(sys, &f)?;
            let mut result = json!({
                "function": output::function(&pf),
                "mass_in": num(&f.integral()),
                "mass_out": num(&pf.integral()),
            });
            if let Some(x) = &a.x {
                result["value"] = num(&pf.eval(&input::rational(x, "x")?));
            }
            Outcome::new(a, result).csv(output::plot_rows(&pf))
        }
        Command::Duality(a) => {
            let f = input::function(&a.f, "f")?;
            let g = input::function(&a.g, "g")?;
            Outcome::new(a, json!({ "residual": num(&duality_check(sys, &f, &g)?) }))
        }
        Command::Ulam(a) => {
            let m = ulam_matrix(sys, a.cells)?;
            let entries: Vec<Value> = (0..m.n())
                .flat_map(|i| m.row(i).iter().map(move |(j, v)| json!([i, j, v.to_repr()])))
                .collect();
            let result = json!({ "header": m.header_json(), "nnz": m.nnz(), "entries": entries });
            Outcome::new(a, result).csv(m.to_csv())
        }
        Command::Stationary(a) => stationary(a, sys)?,
        Command::Birkhoff(a) => {
            let f = input::function(&a.f, "f")?;
            let x = input::rational(&a.x, "x")?;
            let mode = match a.mode {
                BirkhoffModeArg::Exact => BirkhoffMode::Exact { piece_budget: piece_budget()? },
                BirkhoffModeArg::Ulam => BirkhoffMode::Ulam { n_cells: a.cells },
            };
            match birkhoff_average(sys, &f, &x, a.n, mode) {
                Ok(BirkhoffValue::Exact(v)) => Outcome::new(a, json!({ "value": num(&v), "exact": true })),
                Ok(BirkhoffValue::Approx(v)) => Outcome::new(a, json!({ "value": { "float": v }, "exact": false })),
                Err(e @ Error::PieceBudget { .. }) => {
                    let mut out = Outcome::new(a, json!({ "value": null, "exact": true }));
                    out.warning = Some(format!("{e}; rerun with --mode ulam"));
                    out
                }
                Err(e) => return Err(e.into()),
            }
        }
        Command::Recurrence(a) => {
            let b = input::set(&a.set, "set")?;
            match &a.x {
                Some(x) => {
                    let x = input::rational(x, "x")?;
                    let report = recurrence_tree(sys, &x, &b, a.depth, a.budget, a.exact_depth)?;
                    let mut out = Outcome::new(a, serde_json::to_value(&report).expect("reports serialize"));
                    if report.budget_exhausted {
                        out.warning = Some(format!(
                            "node budget {} exhausted; best return count {} is a lower bound",
                            a.budget, report.best_return_count
                        ));
                    }
                    out
                }
                None => {
                    let report =
                        recurrence_sample(sys, &b, a.starts, a.depth, a.budget, global.seed, a.exact_depth)?;
                    Outcome::new(a, serde_json::to_value(&report).expect("reports serialize"))
                }
            }
        }
        Command::Orbit(a) => {
            let x = input::rational(&a.x, "x")?;
            let orbit = orbit_sample(sys, &x, a.n, global.seed, a.exact_depth)?;
            let csv: String = orbit
                .iter()
                .enumerate()
                .map(|(k, p)| format!("{k},{},{}\n", serde_json::to_value(p).expect("points serialize"), output::float(p.to_f64())))
                .collect();
            Outcome::new(a, json!({ "points": orbit })).csv(csv.replace('"', ""))
        }
        Command::Ergodicity(a) => {
            let resolutions: Vec<usize> = input::list(&a.resolutions, "resolutions")?;
            let report = ergodicity_report_with(sys, &resolutions, a.epsilon)?;
            let mut csv = String::from("resolution,pair_measure\n");
            for (n, p) in report.resolutions.iter().zip(&report.pairs) {
                let m = p.as_ref().map_or_else(Rational::default, |p| p.min_measure());
                csv.push_str(&format!("{n},{}\n", m.to_repr()));
            }
            let verdict = serde_json::to_value(report.verdict).expect("verdicts serialize");
            let mut out = Outcome::new(a, serde_json::to_value(&report).expect("reports serialize")).csv(csv);
            out.summary = Some(format!(
                "verdict: {} (fixed-space dimensions {:?})",
                verdict.as_str().unwrap_or_default(),
                report.fixed_space_dimension
            ));
            out
        }
        Command::Branching => {
            let single = sys.multiplicity_partition().cell(1);
            Outcome::new(
                &json!({}),
                json!({
                    "branching_measure": num(&branching_measure(sys)),
                    "single_valued_set": single,
                    "max_multiplicity": sys.max_multiplicity(),
                }),
            )
        }
        Command::Cantor(_) | Command::Ifs(_) | Command::Oracle(_) | Command::Gallery(_) => {
            unreachable!("handled without a system")
        }
    })
}

fn stationary(a: &crate::StationaryArgs, sys: &MultiSystem) -> Result<Outcome, CliError> {
    let method = match &a.verify {
        Some(f) => StationaryMethod::ExactVerify(input::function(f, "verify")?),
        None => {
            let mut opts = PowerIterationOptions::new(a.cells);
            opts.tol = a.tol;
            opts.max_iter = a.max_iter;
            opts.start = a.start.as_deref().map(|s| input::function(s, "start")).transpose()?;
            StationaryMethod::PowerIteration(opts)
        }
    };
    let r = stationary_density(sys, &method)?;
    let (density, csv) = match &r.density {
        StationaryDensity::Exact(f) => (output::function(f), output::plot_rows(f)),
        StationaryDensity::Cells(c) => (json!(c), output::cell_rows(c)),
    };
    let result = json!({
        "method": r.method,
        "density": density,
        "residual": r.residual,
        "exact_residual": r.exact_residual.as_ref().map(num),
        "iterations": r.iterations,
        "converged": r.converged,
        "fixed_space_dimension_estimate": r.fixed_space_dimension_estimate,
    });
    let mut out = Outcome::new(a, result).csv(csv);
    if !r.converged {
        out.warning = Some(format!("no convergence after {} iterations (residual {:e})", r.iterations, r.residual));
    }
    Ok(out)
}

fn standalone(command: &Command, global: &Global) -> Result<Outcome, CliError> {
    Ok(match command {
        Command::Cantor(a) => {
            let alpha = input::rational(&a.alpha, "alpha")?;
            let sys = cantor_map(&alpha)?;
            let mut result = json!({ "alpha": num(&alpha), "system": sys });
            let mut csv = None;
            if a.check_invariance {
                let r = check_invariance(&sys, &PCFunction::constant(one()))?;
                result["invariance"] = json!({
                    "is_invariant": r.is_invariant,
                    "max_discrepancy": num(&r.max_discrepancy),
                    "witness_set": r.witness_set,
                    "output_density": output::function(&r.output_density),
                });
                csv = Some(output::plot_rows(&r.output_density));
            }
            if a.compare_fp {
                let f = input::function(&a.f, "f")?;
                let cmp = cantor_fp_compare(&alpha, &f)?;
                result["comparison"] = serde_json::to_value(&cmp).expect("reports serialize");
                result["comparison"]["discrepancy_float"] = json!(cmp.discrepancy.to_f64());
            }
            let mut out = Outcome::new(a, result);
            out.system = Some(format!("gallery:cantor({})", alpha.to_repr()));
            out.csv = csv;
            out
        }
        Command::Ifs(a) => {
            let maps = a
                .maps
                .split(',')
                .map(|m| {
                    let (r, s) = m
                        .split_once(':')
                        .ok_or_else(|| CliError::Domain(format!("--maps: `{m}` is not `ratio:shift`")))?;
                    Ok(Similarity::new(input::rational(r, "maps")?, input::rational(s, "maps")?)?)
                })
                .collect::<Result<Vec<_>, CliError>>()?;
            let sys = ifs_overlap_map(&maps)?;
            let cells: Vec<Value> = sys
                .multiplicity_partition()
                .cells
                .iter()
                .map(|(s, k)| json!({ "k": k, "set": s, "measure": num(&s.measure()) }))
                .collect();
            let mut result = json!({
                "system": sys,
                "multiplicity_partition": cells,
                "branching_measure": num(&branching_measure(&sys)),
            });
            if a.check_invariance {
                let r = check_invariance(&sys, &PCFunction::constant(one()))?;
                result["invariance"] = json!({
                    "is_invariant": r.is_invariant,
                    "max_discrepancy": num(&r.max_discrepancy),
                    "witness_set": r.witness_set,
                });
            }
            let mut out = Outcome::new(a, result);
            out.system = Some(format!("gallery:ifs_overlap({})", a.maps));
            out
        }
        Command::Oracle(a) => {
            let summary = run_oracle(a.instances, a.n_max, a.m_max, global.seed)?;
            let line = format!("{} agreements, {} disagreements", summary.agreements, summary.disagreements);
            let mut out = Outcome::new(a, serde_json::to_value(&summary).expect("summaries serialize"));
            out.summary = Some(line);
            out
        }
        Command::Gallery(a) => match &a.name {
            Some(name) => {
                let sys: MultiSystem = gallery::by_name(name)?;
                let mut out = Outcome::new(a, serde_json::to_value(&sys).expect("systems serialize"));
                out.system = Some(format!("gallery:{name}"));
                out
            }
            None => {
                let entry = |(n, d): &(&str, &str)| json!({ "name": n, "description": d });
                Outcome::new(
                    a,
                    json!({
                        "named": gallery::NAMED.iter().map(entry).collect::<Vec<_>>(),
                        "auxiliary": gallery::AUXILIARY.iter().map(entry).collect::<Vec<_>>(),
                        "families": gallery::FAMILIES.iter().map(entry).collect::<Vec<_>>(),
                    }),
                )
            }
        },
        _ => unreachable!("needs a system"),
    })
}
