//! Command-line surface: price scenarios, reproduce the built-in desk
//! examples against their golden values, and verify candidate prices.
//!
//! Exit codes: 0 success, 1 golden/verify failure, 2 invalid scenario,
//! 3 infeasible, 4 internal consistency failure.

mod golden;
mod report;

use anyhow::{anyhow, Context};
use chp_core::dual::{price_membership, solve_dual, solve_dual_over, uplift_report};
use chp_core::feasets::{Eps, OpportunitySets, SetChoice};
use chp_core::model::{builtin_example, load_scenario, RoundingPolicy, Scenario};
use chp_core::oracle::{brute_primal, GridSpec};
use chp_core::primal::{solve_primal, SolveError};
use chp_core::rat::{format_exact, parse_decimal, to_f64, Rat};
use clap::{Parser, Subcommand, ValueEnum};
use num_traits::Signed;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

#[derive(Parser)]
#[command(
    name = "chp",
    about = "Pricing engine for non-convex electricity markets"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Chp,
    Mchp,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Rounding {
    Cent,
    Exact,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve a scenario and report prices and uplifts
    Price {
        /// Scenario document path
        #[arg(long, conflicts_with = "builtin")]
        scenario: Option<PathBuf>,
        /// Use built-in example N (1..9)
        #[arg(long)]
        builtin: Option<usize>,
        #[arg(long, value_enum, default_value = "both")]
        method: Method,
        /// Numeric inflation width for the modified sets (default: the
        /// downward limit)
        #[arg(long)]
        epsilon: Option<String>,
        /// Sweep resolution in MWh for opportunity projections
        #[arg(long)]
        resolution: Option<String>,
        /// Override the scenario's price rounding policy
        #[arg(long, value_enum)]
        rounding: Option<Rounding>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
        /// Cross-check the dispatch against the brute-force grid oracle
        #[arg(long)]
        oracle: bool,
        /// Write the report to a file instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run built-in examples against their golden values
    Reproduce {
        /// Example number 1..9, or "all"
        which: String,
    },
    /// Check whether a price vector is dual-optimal and print the certificate
    Verify {
        #[arg(long, conflicts_with = "builtin")]
        scenario: Option<PathBuf>,
        #[arg(long)]
        builtin: Option<usize>,
        #[arg(long, value_enum, default_value = "chp")]
        method: Method,
        /// One price per (period, node), period-major
        #[arg(long, num_args = 1.., required = true)]
        price: Vec<String>,
        #[arg(long)]
        epsilon: Option<String>,
        #[arg(long)]
        resolution: Option<String>,
    },
    /// Print a built-in example as a scenario document
    Export {
        #[arg(long)]
        builtin: usize,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            let root = format!("{e:#}");
            if root.contains("schema violation") || root.contains("invariant violation") {
                ExitCode::from(2)
            } else if root.contains("infeasible") {
                ExitCode::from(3)
            } else {
                ExitCode::from(4)
            }
        }
    }
}

fn load(scenario: &Option<PathBuf>, builtin: &Option<usize>) -> anyhow::Result<Scenario> {
    match (scenario, builtin) {
        (Some(path), None) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("schema violation: cannot read {}", path.display()))?;
            Ok(load_scenario(&text)?)
        }
        (None, Some(n)) => Ok(builtin_example(*n, None)?),
        _ => Err(anyhow!(
            "schema violation: provide exactly one of --scenario or --builtin"
        )),
    }
}

fn parse_eps(epsilon: &Option<String>) -> anyhow::Result<Eps> {
    match epsilon {
        None => Ok(Eps::Limit),
        Some(text) => {
            let v = parse_decimal(text).map_err(|e| anyhow!("schema violation: --epsilon: {e}"))?;
            if !v.is_positive() {
                return Err(anyhow!("schema violation: --epsilon must be positive"));
            }
            Ok(Eps::Value(v))
        }
    }
}

fn parse_resolution(resolution: &Option<String>) -> anyhow::Result<Option<Rat>> {
    match resolution {
        None => Ok(None),
        Some(text) => {
            let v =
                parse_decimal(text).map_err(|e| anyhow!("schema violation: --resolution: {e}"))?;
            if !v.is_positive() {
                return Err(anyhow!("schema violation: --resolution must be positive"));
            }
            Ok(Some(v))
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Price {
            scenario,
            builtin,
            method,
            epsilon,
            resolution,
            rounding,
            format,
            oracle,
            out,
        } => {
            let mut s = load(&scenario, &builtin)?;
            if let Some(r) = rounding {
                s.rounding = match r {
                    Rounding::Cent => RoundingPolicy::CentPrice,
                    Rounding::Exact => RoundingPolicy::Exact,
                };
            }
            let eps = parse_eps(&epsilon)?;
            let res = parse_resolution(&resolution)?;
            let started = Instant::now();
            let primal = solve_primal(&s, None)?;
            let t_primal = started.elapsed();

            let mut chp_doc = None;
            let mut mchp_doc = None;
            let mut chp_value: Option<Rat> = None;
            let mut mchp_value: Option<Rat> = None;

            if method != Method::Mchp {
                let (us, cs) = original_sets(&s);
                let rep = solve_dual_over(&s, &us, &cs)?;
                let up = uplift_report(&s, &us, &cs, &rep.canonical, &primal)?;
                chp_value = Some(rep.dual_value.clone());
                chp_doc = Some(report::method_doc(&rep, &up, &primal.value));
            }
            if method != Method::Chp {
                let opp = OpportunitySets::build(&s, res.clone())?;
                let choice = SetChoice::Modified(eps.clone());
                let rep = solve_dual(&s, &opp, &choice)?;
                let (us, cs) = opp.player_sets(&s, &choice);
                let up = uplift_report(&s, &us, &cs, &rep.canonical, &primal)?;
                mchp_value = Some(rep.dual_value.clone());
                mchp_doc = Some(report::method_doc(&rep, &up, &primal.value));
            }
            let t_total = started.elapsed();

            // internal consistency: the modified gap never exceeds the base one
            if let (Some(base), Some(modif)) = (&chp_value, &mchp_value) {
                let gap = (&primal.value - base).abs();
                let gap_m = (&primal.value - modif).abs();
                if gap_m > gap {
                    return Err(SolveError::Internal(format!(
                        "gap ordering violated: {gap_m} > {gap}"
                    ))
                    .into());
                }
            }

            if oracle {
                let step = res.as_ref().map(to_f64).unwrap_or(1.0);
                let brute =
                    brute_primal(&s, &GridSpec::quantities(step)).map_err(SolveError::Internal)?;
                let exact = match primal.kind {
                    chp_core::primal::ObjectiveKind::CostMin => -to_f64(&primal.value),
                    chp_core::primal::ObjectiveKind::WelfareMax => to_f64(&primal.value),
                };
                // the grid optimum can only fall short of the true optimum
                let slack = exact - brute.value;
                let bound = step * lipschitz_bound(&s);
                eprintln!("oracle: exact {exact:.6}, grid {:.6}", brute.value);
                if !(-1e-6..=bound + 1e-6).contains(&slack) {
                    return Err(SolveError::Internal(format!(
                        "oracle disagreement: exact {exact} vs grid {} exceeds bound {bound}",
                        brute.value
                    ))
                    .into());
                }
            }

            let canonical_json = chp_core::scenario_to_json(&s);
            let doc = report::RunReport {
                scenario_digest: report::digest(&canonical_json),
                periods: s.periods(),
                nodes: s.nodes(),
                rounding: match s.rounding {
                    RoundingPolicy::CentPrice => "cent".into(),
                    RoundingPolicy::Exact => "exact".into(),
                },
                primal: report::primal_doc(&primal),
                chp: chp_doc,
                mchp: mchp_doc,
            };
            let rendered = match format {
                Format::Text => report::render_text(&s, &doc),
                Format::Structured => serde_json::to_string_pretty(&doc)? + "\n",
            };
            match out {
                Some(path) => std::fs::write(&path, rendered)
                    .with_context(|| format!("cannot write {}", path.display()))?,
                None => print!("{rendered}"),
            }
            eprintln!("timings: primal {t_primal:?}, total {t_total:?}");
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Reproduce { which } => {
            let numbers: Vec<usize> = if which == "all" {
                (1..=9).collect()
            } else {
                vec![which
                    .parse()
                    .map_err(|_| anyhow!("schema violation: expected 1..9 or 'all'"))?]
            };
            let mut all_ok = true;
            for n in numbers {
                let outcome = golden::reproduce(n).map_err(SolveError::Internal)?;
                for c in &outcome.checks {
                    let mark = if c.pass { "ok  " } else { "FAIL" };
                    println!("{mark} {} ({})", c.name, c.detail);
                }
                all_ok &= outcome.all_pass();
            }
            Ok(if all_ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            })
        }
        Cmd::Verify {
            scenario,
            builtin,
            method,
            price,
            epsilon,
            resolution,
        } => {
            let s = load(&scenario, &builtin)?;
            let eps = parse_eps(&epsilon)?;
            let res = parse_resolution(&resolution)?;
            let p: Vec<Rat> = price
                .iter()
                .map(|t| parse_decimal(t).map_err(|e| anyhow!("schema violation: --price: {e}")))
                .collect::<Result<_, _>>()?;
            if p.len() != s.price_dim() {
                return Err(anyhow!(
                    "schema violation: price needs {} components for this scenario",
                    s.price_dim()
                ));
            }
            let (us, cs) = match method {
                Method::Chp => original_sets(&s),
                Method::Mchp | Method::Both => {
                    let opp = OpportunitySets::build(&s, res)?;
                    opp.player_sets(&s, &SetChoice::Modified(eps))
                }
            };
            match price_membership(&s, &us, &cs, &p)? {
                Some(cert) => {
                    println!("true");
                    for c in cert {
                        let parts: Vec<String> = c
                            .weights
                            .iter()
                            .map(|(_, q, w)| {
                                format!(
                                    "{} @ [{}]",
                                    format_exact(w),
                                    q.iter().map(format_exact).collect::<Vec<_>>().join(", ")
                                )
                            })
                            .collect();
                        println!("  {}: {}", c.player, parts.join(" + "));
                    }
                }
                None => println!("false"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Export { builtin } => {
            let s = builtin_example(builtin, None)?;
            println!("{}", chp_core::scenario_to_json(&s));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn original_sets(
    s: &Scenario,
) -> (
    Vec<chp_core::curvelib::StatusOutputSet>,
    Vec<chp_core::curvelib::StatusOutputSet>,
) {
    let t = s.periods();
    (
        s.units
            .iter()
            .map(|u| chp_core::curvelib::unit_feasible_set(u, t))
            .collect(),
        s.consumers
            .iter()
            .map(|c| chp_core::curvelib::consumer_feasible_set(c, t))
            .collect(),
    )
}

/// Crude Lipschitz bound on the welfare objective: sum of the steepest
/// marginal prices in play, for the oracle comparison slack.
fn lipschitz_bound(s: &Scenario) -> f64 {
    let mut total = 0.0;
    for u in &s.units {
        total += to_f64(&u.cost.slope_right(&u.g_max)).abs() + 1.0;
    }
    for c in &s.consumers {
        for segs in &c.elastic {
            for seg in segs {
                total += to_f64(&seg.price).abs();
            }
        }
        if let Some(q) = &c.quadratic {
            total += to_f64(&q.linear).abs();
        }
    }
    total
}
