use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use crm_core::axioms::{classify, verify, AxiomSystem, Verdict, VerifyOptions};
use crm_core::contraction::{
    bound_violations, check_fisher, fit, search_fisher, Constants, FisherVariant, Map, MapSpec,
    Scheme,
};
use crm_core::golden;
use crm_core::num::{fmt_num, NumOrStr, DEFAULT_TOL};
use crm_core::orbit::{
    apriori_bound, cauchy_probe, condition_estimate, decay_check, picard, skip_check,
    ConditionEstimate,
};
use crm_core::space::{Point, Space, SpaceDef};

#[derive(Parser)]
#[command(
    name = "crm",
    version,
    about = "Controlled rectangular metric spaces: axioms, contractions, Picard orbits"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check one axiom system on a space definition.
    Verify {
        space: PathBuf,
        /// metric, b-metric:S, rectangular, rect-b:S, controlled-metric, extended-rect-b, controlled-rect
        #[arg(long, default_value = "controlled-rect")]
        system: String,
        #[command(flatten)]
        common: Common,
    },
    /// Run every verifier and check the implications between verdicts.
    Classify {
        space: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Fit or check contraction constants for a mapping.
    Analyze {
        space: PathBuf,
        map: PathBuf,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Run Picard iteration; prints one JSON line per iterate, then a summary.
    Iterate {
        space: PathBuf,
        map: PathBuf,
        #[arg(long)]
        start: String,
        #[arg(long, default_value_t = 1e-8)]
        eps: f64,
        #[arg(long, default_value_t = 100)]
        max_iter: usize,
        #[command(flatten)]
        scheme: SchemeArgs,
        /// Also estimate the alpha-ratio condition at this horizon (needs --scheme).
        #[arg(long)]
        horizon: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Finite-horizon estimate of the alpha-ratio and alpha-limit conditions.
    Conditions {
        space: PathBuf,
        map: PathBuf,
        #[arg(long)]
        start: String,
        #[command(flatten)]
        scheme: SchemeArgs,
        #[arg(long, default_value_t = 64)]
        horizon: usize,
        /// Write the full ratio matrix as CSV `i,m,value`.
        #[arg(long)]
        ratio_csv: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Replay the bundled worked examples against derived values.
    ReproducePaper {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
    /// Override grid_n of every interval in the carrier.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    verbose: bool,
    /// Human-readable output instead of JSON.
    #[arg(long)]
    pretty: bool,
}

#[derive(Args)]
struct SchemeArgs {
    /// banach, kannan, reich or fisher
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    k: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    /// product or sum numerator for the rational scheme
    #[arg(long, default_value = "product")]
    variant: String,
}

impl SchemeArgs {
    fn scheme(&self) -> Result<Option<Scheme>> {
        Ok(match &self.scheme {
            Some(s) => Some(s.parse()?),
            None => None,
        })
    }

    /// Constants supplied on the command line for `scheme`, if complete.
    fn constants(&self, scheme: Scheme) -> Result<Option<Constants>> {
        let variant: FisherVariant = self.variant.parse()?;
        Ok(match scheme {
            Scheme::Banach => self.k.map(|k| Constants::Banach { k }),
            Scheme::Kannan => self.k.map(|k| Constants::Kannan { k }),
            Scheme::Reich => self.lambda.map(|lambda| Constants::Reich { lambda }),
            Scheme::Fisher => match (self.lambda, self.beta) {
                (Some(lambda), Some(beta)) => Some(Constants::Fisher {
                    lambda,
                    beta,
                    variant,
                }),
                _ => None,
            },
        })
    }

    fn require(&self) -> Result<Constants> {
        let scheme = self
            .scheme()?
            .ok_or_else(|| anyhow!("--scheme is required"))?;
        self.constants(scheme)?.ok_or_else(|| {
            anyhow!(match scheme {
                Scheme::Banach | Scheme::Kannan => "--k is required for this scheme",
                Scheme::Reich => "--lambda is required for this scheme",
                Scheme::Fisher => "--lambda and --beta are required for this scheme",
            })
        })
    }
}

impl Common {
    fn opts(&self) -> VerifyOptions {
        VerifyOptions {
            tol: self.tol,
            jobs: self.jobs.max(1),
        }
    }

    fn load(&self, path: &Path) -> Result<Space> {
        let mut def = SpaceDef::from_path(path)?;
        if let Some(n) = self.grid {
            def = def.with_grid(n);
        }
        Ok(Space::new(def)?)
    }
}

fn load_map(space: &Space, path: &Path) -> Result<Map> {
    Ok(Map::new(space, MapSpec::from_path(path)?)?)
}

fn start_point(space: &Space, text: &str) -> Result<Point> {
    space
        .find(&NumOrStr::from(text))
        .map(|i| space.point(i).clone())
        .ok_or_else(|| anyhow!("start `{text}` is not a point of the carrier"))
}

fn emit(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn verdict_code(v: Verdict) -> u8 {
    if v == Verdict::Violated {
        1
    } else {
        0
    }
}

fn run_verify(space: &Path, system: &str, common: &Common) -> Result<u8> {
    let system: AxiomSystem = system.parse()?;
    let space = common.load(space)?;
    let report = verify(&space, system, common.opts())?;
    if common.pretty {
        println!("system      {}", report.system);
        println!("verdict     {}", report.verdict);
        println!("checked     {}", report.checked_count);
        if let Some(m) = report.min_margin {
            println!("min margin  {}", fmt_num(m));
        }
        if let Some(w) = &report.witness {
            println!(
                "witness     x={} y={} via [{}]: {} > {} ({:?})",
                w.x,
                w.y,
                w.intermediates.join(", "),
                fmt_num(w.lhs),
                fmt_num(w.rhs),
                w.clause
            );
        }
    } else {
        emit(&report)?;
    }
    Ok(verdict_code(report.verdict))
}

fn run_classify(space: &Path, common: &Common) -> Result<u8> {
    let space = common.load(space)?;
    let c = classify(&space, common.opts())?;
    if common.pretty {
        for r in &c.reports {
            println!("{:<20} {}", r.system.to_string(), r.verdict);
        }
        for l in &c.lattice {
            println!(
                "{} => {}: {}",
                l.premise,
                l.conclusion,
                if l.holds { "ok" } else { "BROKEN" }
            );
        }
    } else {
        emit(&c)?;
    }
    Ok(if c.lattice_ok() { 0 } else { 1 })
}

fn run_analyze(space: &Path, map: &Path, args: &SchemeArgs, common: &Common) -> Result<u8> {
    let space = common.load(space)?;
    let map = load_map(&space, map)?;
    let variant: FisherVariant = args.variant.parse()?;
    let schemes = match args.scheme()? {
        Some(s) => vec![s],
        None => vec![
            Scheme::Banach,
            Scheme::Kannan,
            Scheme::Reich,
            Scheme::Fisher,
        ],
    };
    let mut out = Vec::new();
    let mut admissible = Vec::new();
    for scheme in schemes {
        let supplied = args.constants(scheme)?;
        let cert = match (scheme, supplied) {
            (
                Scheme::Fisher,
                Some(Constants::Fisher {
                    lambda,
                    beta,
                    variant,
                }),
            ) => Some(check_fisher(
                &space, &map, lambda, beta, variant, common.tol,
            )?),
            (Scheme::Fisher, _) => search_fisher(&space, &map, variant, common.tol)?,
            _ => Some(fit(&space, &map, scheme, common.tol)?),
        };
        let mut entry = json!({ "scheme": scheme.to_string(), "certificate": cert });
        let mut ok = cert.as_ref().is_some_and(|c| c.admissible);
        if let (Some(c), true) = (supplied, scheme != Scheme::Fisher) {
            if !c.in_range() {
                bail!("constants {c:?} are outside the admissible range of {scheme}");
            }
            let bad = bound_violations(&space, &map, c, common.tol)?;
            let first = bad
                .first()
                .map(|&(i, j)| (space.point(i).label.clone(), space.point(j).label.clone()));
            entry["supplied"] = json!({
                "constants": c,
                "violations": bad.len(),
                "first_violation": first,
                "decay_rate": c.decay_rate(),
            });
            ok = bad.is_empty();
        }
        admissible.push(ok);
        out.push(entry);
    }
    if common.pretty {
        for e in &out {
            let c = &e["certificate"];
            println!(
                "{:<8} worst ratio {:<18} pair {:<24} admissible {}",
                e["scheme"].as_str().unwrap_or(""),
                c["worst_ratio"].to_string(),
                c["worst_pair"].to_string(),
                c["admissible"]
            );
            if let Some(s) = e.get("supplied") {
                println!(
                    "         supplied constants: {} violating pairs",
                    s["violations"]
                );
            }
        }
    } else {
        emit(&Value::Array(out))?;
    }
    Ok(if admissible.iter().any(|&a| a) { 0 } else { 1 })
}

fn strip_condition(est: &ConditionEstimate, verbose: bool) -> Result<Value> {
    let mut v = serde_json::to_value(est)?;
    if verbose {
        v["ratio_values"] = serde_json::to_value(&est.ratio_values)?;
    } else if let Some(obj) = v.as_object_mut() {
        obj.remove("estimate_leading_i");
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
fn run_iterate(
    space: &Path,
    map: &Path,
    start: &str,
    eps: f64,
    max_iter: usize,
    args: &SchemeArgs,
    horizon: Option<usize>,
    common: &Common,
) -> Result<u8> {
    let space = common.load(space)?;
    let map = load_map(&space, map)?;
    let x0 = start_point(&space, start)?;
    let trace = picard(&space, &map, &x0, eps, max_iter)?;

    let mut summary = json!({
        "start": x0.label,
        "iterations": trace.iterations(),
        "stop_reason": trace.stop_reason,
        "fixed_point": trace.fixed_point,
        "cycle_detected": trace.cycle_detected,
    });
    if trace.points.len() >= 4 {
        summary["skip_check"] = serde_json::to_value(skip_check(&trace, common.tol.max(eps))?)?;
    }
    if trace.points.len() >= 8 {
        summary["cauchy_probe"] = serde_json::to_value(cauchy_probe(&space, &trace, eps)?)?;
    }
    if let Some(scheme) = args.scheme()? {
        let constants = args.require()?;
        let rate = constants.decay_rate();
        if !trace.step_dists.is_empty() && (0.0..1.0).contains(&rate) {
            summary["decay_check"] = serde_json::to_value(decay_check(&trace, rate, common.tol)?)?;
        }
        if let (Scheme::Banach, Constants::Banach { k }, Some(_)) =
            (scheme, constants, &trace.fixed_point)
        {
            if k > 0.0 && k < 1.0 {
                summary["apriori_bound"] =
                    serde_json::to_value(apriori_bound(&space, &trace, k, common.tol)?)?;
            }
        }
        if let Some(h) = horizon {
            let est = condition_estimate(&space, &map, &x0, constants, h, common.tol)?;
            summary["condition_estimate"] = strip_condition(&est, common.verbose)?;
        }
    } else if horizon.is_some() {
        bail!("--horizon needs --scheme and its constants");
    }

    if common.pretty {
        println!(
            "{:>4}  {:<22} {:<22} {:<22} decay_ratio",
            "n", "x", "step_dist", "skip_dist"
        );
        for r in trace.records() {
            let f = |v: Option<f64>| v.map(fmt_num).unwrap_or_else(|| "-".into());
            println!(
                "{:>4}  {:<22} {:<22} {:<22} {}",
                r.n,
                r.x,
                f(r.step_dist),
                f(r.skip_dist),
                f(r.decay_ratio)
            );
        }
        println!("{}", serde_json::to_string_pretty(&summary)?);
    } else {
        for r in trace.records() {
            emit(&r)?;
        }
        emit(&json!({ "summary": summary }))?;
    }
    Ok(if trace.fixed_point.is_some() { 0 } else { 1 })
}

fn run_conditions(
    space: &Path,
    map: &Path,
    start: &str,
    args: &SchemeArgs,
    horizon: usize,
    ratio_csv: Option<&Path>,
    common: &Common,
) -> Result<u8> {
    let space = common.load(space)?;
    let map = load_map(&space, map)?;
    let x0 = start_point(&space, start)?;
    let constants = args.require()?;
    let est = condition_estimate(&space, &map, &x0, constants, horizon, common.tol)?;
    if let Some(path) = ratio_csv {
        std::fs::write(path, est.ratio_csv())
            .with_context(|| format!("writing {}", path.display()))?;
    }
    let value = strip_condition(&est, common.verbose)?;
    if common.pretty {
        println!(
            "scheme     {} (constant {})",
            est.scheme,
            fmt_num(est.constant)
        );
        println!(
            "horizon    {}  window i in [{}, {})",
            est.horizon, est.window.0, est.window.1
        );
        println!(
            "estimate   {}  threshold {}  holds {}",
            fmt_num(est.estimate),
            fmt_num(est.threshold),
            est.holds
        );
        if common.verbose {
            println!(
                "estimate (leading a(x_i, x_m))  {}",
                fmt_num(est.estimate_leading_i)
            );
        }
        for l in est.alpha_limits.iter().chain(&est.auxiliary_limits) {
            let bound = l.bound.map(fmt_num).unwrap_or_else(|| "finite".into());
            println!(
                "{:<22} {:<20} bound {:<10} holds {}",
                l.name,
                fmt_num(l.estimate),
                bound,
                l.holds
            );
        }
        for n in &est.notes {
            println!("note: {n}");
        }
    } else {
        emit(&value)?;
    }
    Ok(if est.all_hold() { 0 } else { 1 })
}

fn run_reproduce(common: &Common) -> Result<u8> {
    let dir = std::env::var_os("CRM_FIXTURES_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(golden::bundled_dir);
    let rows = golden::replay(&dir)?;
    if common.pretty {
        println!(
            "{:<62} {:<10} {:<18} {:<18} verdict",
            "claim", "published", "computed", "oracle"
        );
        for r in &rows {
            println!(
                "{:<62} {:<10} {:<18} {:<18} {}{}",
                r.claim,
                r.published,
                r.computed,
                r.oracle,
                r.verdict,
                if r.pass { "" } else { "  [FAIL]" }
            );
        }
    } else {
        emit(&rows)?;
    }
    Ok(if rows.iter().all(|r| r.pass) { 0 } else { 1 })
}

fn run(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::Verify {
            space,
            system,
            common,
        } => run_verify(space, system, common),
        Command::Classify { space, common } => run_classify(space, common),
        Command::Analyze {
            space,
            map,
            scheme,
            common,
        } => run_analyze(space, map, scheme, common),
        Command::Iterate {
            space,
            map,
            start,
            eps,
            max_iter,
            scheme,
            horizon,
            common,
        } => run_iterate(space, map, start, *eps, *max_iter, scheme, *horizon, common),
        Command::Conditions {
            space,
            map,
            start,
            scheme,
            horizon,
            ratio_csv,
            common,
        } => run_conditions(
            space,
            map,
            start,
            scheme,
            *horizon,
            ratio_csv.as_deref(),
            common,
        ),
        Command::ReproducePaper { common } => run_reproduce(common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
