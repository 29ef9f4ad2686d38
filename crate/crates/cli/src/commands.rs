use crate::config::{Config, Steps};
use crate::plot::{chart, Series};
use crate::{selftest, AuditArgs, CampaignArgs, Cli, Command, OUTPUT_ENV};
use srk_core::experiments::{
    decreasing_with_tolerance, dist_convergence, dist_csv, evolution_csv, mse_evolution, orders_csv,
    strong_order, two_chain_order, weak_order, Campaign, DistPoint, Evolution, ExperimentError, OrderEstimate,
    Phi,
};
use srk_core::integrators::{IntegratorError, Method, StepperConfig};
use srk_core::limitsde::LimitError;
use srk_core::problem::builtin_problem;
use srk_core::tableau::{builtin, parse_tableau_file, BuiltinTableau, ConditionReport};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ASSERTION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("output error: {0}")]
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Output(_) => EXIT_CONFIG,
            CliError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

fn is_numerical(e: &IntegratorError) -> bool {
    matches!(e, IntegratorError::NonConvergent { .. })
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        let numerical = match &e {
            ExperimentError::Reference(_) | ExperimentError::NoSignal { .. } | ExperimentError::NonPositive(_) => true,
            ExperimentError::Method { source, .. } | ExperimentError::Integrator(source) => is_numerical(source),
            ExperimentError::Limit(LimitError::Integrator(source)) => is_numerical(source),
            _ => false,
        };
        if numerical {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

pub fn run(cli: Cli) -> i32 {
    match execute(cli) {
        Ok(true) => EXIT_OK,
        Ok(false) => EXIT_ASSERTION,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn command_name(c: &Command) -> &'static str {
    match c {
        Command::Audit(_) => "audit",
        Command::Strong(_) => "strong",
        Command::Weak(_) => "weak",
        Command::Dist(_) => "dist",
        Command::Evolution(_) => "evolution",
        Command::Selftest => "selftest",
    }
}

/// Runs a command; `Ok(false)` means an assertion failed.
pub fn execute(cli: Cli) -> Result<bool, CliError> {
    if let Command::Selftest = cli.command {
        return Ok(run_selftest());
    }
    let mut cfg = match &cli.config {
        Some(p) => Config::load(p).map_err(|e| CliError::Config(e.to_string()))?,
        None => Config::default(),
    };
    let name = command_name(&cli.command);
    if let Some(prev) = &cfg.command {
        if prev != name {
            return Err(CliError::Config(format!("config was written for `{prev}`, not `{name}`")));
        }
    }
    cfg.command = Some(name.to_string());
    cfg.manifest = None;
    if let Some(o) = &cli.out {
        cfg.output.dir = Some(o.clone());
    }
    if cli.no_plots {
        cfg.output.plots = Some(false);
    }
    if cli.threads.is_some() {
        cfg.campaign.threads = cli.threads;
    }
    match &cli.command {
        Command::Audit(a) => {
            merge_audit(&mut cfg, a);
            cmd_audit(&cfg)
        }
        Command::Strong(a) => {
            merge_campaign(&mut cfg, &a.campaign)?;
            if a.two_chain {
                cfg.campaign.two_chain = Some(true);
            }
            defaults(&mut cfg, "strong")?;
            cmd_strong(&cfg)
        }
        Command::Weak(a) => {
            merge_campaign(&mut cfg, &a.campaign)?;
            if a.no_crn {
                cfg.campaign.crn = Some(false);
            }
            defaults(&mut cfg, "weak")?;
            cmd_weak(&cfg)
        }
        Command::Dist(a) => {
            merge_campaign(&mut cfg, a)?;
            defaults(&mut cfg, "dist")?;
            cmd_dist(&cfg)
        }
        Command::Evolution(a) => {
            merge_campaign(&mut cfg, &a.campaign)?;
            if a.expect_ordering {
                cfg.checks.ordering = Some(true);
            }
            defaults(&mut cfg, "evolution")?;
            cmd_evolution(&cfg)
        }
        Command::Selftest => unreachable!("handled above"),
    }
}

fn merge_audit(cfg: &mut Config, a: &AuditArgs) {
    let t = &mut cfg.tableau;
    if a.builtin.is_some() {
        t.builtin = a.builtin.clone();
        t.file = None;
    }
    if a.file.is_some() {
        t.file = a.file.clone();
        t.builtin = None;
    }
    if a.additive {
        t.additive = Some(true);
    }
    if a.require.is_some() {
        t.require = a.require.clone();
    }
}

fn split_list(s: &str) -> Vec<String> {
    // commas inside parentheses belong to the item
    let mut out = Vec::new();
    let mut depth = 0;
    let mut cur = String::new();
    for ch in s.chars() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ',' if depth == 0 => {
                out.push(cur.trim().to_string());
                cur.clear();
                continue;
            }
            _ => {}
        }
        cur.push(ch);
    }
    if !cur.trim().is_empty() {
        out.push(cur.trim().to_string());
    }
    out
}

fn merge_campaign(cfg: &mut Config, a: &CampaignArgs) -> Result<(), CliError> {
    if let Some(p) = &a.problem {
        if cfg.problem.name.as_deref() != Some(p) {
            cfg.problem.params.clear();
        }
        cfg.problem.name = Some(p.clone());
    }
    for kv in &a.params {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--param expects name=value, got `{kv}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("--param {k}: `{v}` is not a number")))?;
        cfg.problem.params.insert(k.trim().to_string(), v);
    }
    let c = &mut cfg.campaign;
    if let Some(m) = &a.methods {
        c.methods = Some(split_list(m));
    }
    if let Some(h) = &a.h {
        c.h = Some(Steps::Text(h.clone()));
    }
    if let Some(r) = &a.ref_h {
        c.reference_h = Some(Steps::Text(r.clone()));
    }
    if let Some(p) = &a.phi {
        c.phis = Some(split_list(p));
    }
    macro_rules! take {
        ($($field:ident <- $arg:ident),*) => {
            $(if a.$arg.is_some() { c.$field = a.$arg.clone(); })*
        };
    }
    take!(paths <- paths, seed <- seed, t_end <- t_end, reference_method <- ref_method, kappa <- kappa,
          fp_tol <- fp_tol, fp_max_iter <- fp_max_iter);
    if a.slope_min.is_some() {
        cfg.checks.slope_min = a.slope_min;
    }
    if a.slope_max.is_some() {
        cfg.checks.slope_max = a.slope_max;
    }
    if a.expect_monotone {
        cfg.checks.monotone = Some(true);
    }
    Ok(())
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

/// Fills every unset campaign field with the default of `command`.
fn defaults(cfg: &mut Config, command: &str) -> Result<(), CliError> {
    let problem = cfg.problem.name.get_or_insert_with(|| {
        match command {
            "dist" => "example61",
            _ => "example62",
        }
        .to_string()
    });
    let additive = builtin_problem(problem, &cfg.problem.params)
        .map_err(|e| CliError::Config(e.to_string()))?
        .is_additive();
    let c = &mut cfg.campaign;
    let (methods, h, t_end, paths, reference_h): (&[&str], &str, f64, usize, &str) = match (command, additive) {
        ("strong", true) => (&["trapezoid", "midpoint"], "2^-4..2^-8", 1.0, 1000, "2^-14"),
        ("strong", false) => (&["midpoint"], "2^-4..2^-8", 1.0, 1000, "2^-14"),
        ("weak", true) => (&["trapezoid", "implicit-euler"], "2^-2..2^-6", 0.25, 10000, "2^-14"),
        ("weak", false) => (&["midpoint"], "2^-2..2^-6", 0.25, 10000, "2^-14"),
        ("dist", true) => (&["trapezoid"], "2^-3..2^-7", 0.25, 30000, "2^-14"),
        ("dist", false) => (&["midpoint"], "2^-3..2^-7", 0.25, 30000, "2^-14"),
        ("evolution", true) => (
            &["trapezoid", "midpoint", "theta:0.7071067811865476", "theta:1"],
            "0.01",
            5.0,
            1000,
            "0.001",
        ),
        _ => (&["midpoint"], "0.01", 5.0, 1000, "0.001"),
    };
    c.methods.get_or_insert_with(|| strings(methods));
    c.h.get_or_insert_with(|| Steps::Text(h.to_string()));
    c.t_end.get_or_insert(t_end);
    c.paths.get_or_insert(paths);
    c.seed.get_or_insert(0);
    c.reference_h.get_or_insert_with(|| Steps::Text(reference_h.to_string()));
    c.reference_method
        .get_or_insert_with(|| if additive { "trapezoid" } else { "midpoint" }.to_string());
    c.kappa.get_or_insert(srk_core::noise::DEFAULT_KAPPA);
    let stepper = StepperConfig::default();
    c.fp_tol.get_or_insert(stepper.fp_tol);
    c.fp_max_iter.get_or_insert(stepper.fp_max_iter);
    match command {
        "weak" => {
            c.phis.get_or_insert_with(|| strings(&["exp(-x)"]));
            c.crn.get_or_insert(true);
        }
        "dist" => {
            c.phis.get_or_insert_with(|| strings(&["sin", "sin3"]));
        }
        "strong" => {
            c.two_chain.get_or_insert(false);
        }
        _ => {}
    }
    cfg.output.plots.get_or_insert(true);
    if cfg.output.dir.is_none() {
        cfg.output.dir = Some(
            std::env::var_os(OUTPUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("srk-out")),
        );
    }
    Ok(())
}

/// Builds the campaign of a resolved configuration.
pub fn campaign(cfg: &Config) -> Result<Campaign, CliError> {
    let bad = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
    let c = &cfg.campaign;
    let problem = builtin_problem(cfg.problem.name.as_deref().unwrap_or("example62"), &cfg.problem.params)
        .map_err(|e| bad(&e))?;
    let additive = problem.is_additive();
    let methods = c
        .methods
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|m| Method::parse(m, additive))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| bad(&e))?;
    if methods.is_empty() {
        return Err(CliError::Config("no methods given".into()));
    }
    let ladder = c.h.as_ref().expect("resolved").resolve().map_err(|e| bad(&e))?;
    let reference_h = match c.reference_h.as_ref().expect("resolved").resolve().map_err(|e| bad(&e))?[..] {
        [r] => r,
        _ => return Err(CliError::Config("reference_h must be a single step".into())),
    };
    let mut camp = Campaign::new(problem, methods, ladder, c.t_end.expect("resolved"));
    camp.paths = c.paths.expect("resolved");
    camp.seed = c.seed.expect("resolved");
    camp.reference_h = reference_h;
    camp.reference_method = Some(
        Method::parse(c.reference_method.as_deref().expect("resolved"), additive).map_err(|e| bad(&e))?,
    );
    camp.kappa = c.kappa.expect("resolved");
    camp.stepper = StepperConfig {
        fp_tol: c.fp_tol.expect("resolved"),
        fp_max_iter: c.fp_max_iter.expect("resolved"),
        ..StepperConfig::default()
    };
    camp.stepper.validate().map_err(|e| bad(&e))?;
    camp.threads = c.threads;
    camp.crn = c.crn.unwrap_or(true);
    Ok(camp)
}

fn phis(cfg: &Config) -> Result<Vec<Phi>, CliError> {
    cfg.campaign
        .phis
        .as_deref()
        .unwrap_or_default()
        .iter()
        .map(|p| p.parse::<Phi>().map_err(|e| CliError::Config(e.to_string())))
        .collect()
}

struct Output {
    dir: PathBuf,
    plots: bool,
}

impl Output {
    fn new(cfg: &Config) -> Result<Self, CliError> {
        let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("srk-out"));
        std::fs::create_dir_all(&dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
        Ok(Output {
            dir,
            plots: cfg.output.plots.unwrap_or(true),
        })
    }

    fn write(&self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))?;
        Ok(path)
    }

    fn plot(&self, name: &str, svg: impl FnOnce() -> String) -> Result<(), CliError> {
        if self.plots {
            self.write(name, &svg())?;
        }
        Ok(())
    }

    fn manifest(&self, cfg: &Config) -> Result<(), CliError> {
        self.write("manifest.toml", &cfg.manifest()).map(|_| ())
    }
}

fn load_tableau(cfg: &Config) -> Result<BuiltinTableau, CliError> {
    let t = &cfg.tableau;
    match (&t.builtin, &t.file) {
        (Some(name), _) => builtin(name, t.additive.unwrap_or(false)).map_err(|e| CliError::Config(e.to_string())),
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            parse_tableau_file(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
        }
        (None, None) => Err(CliError::Config("audit needs --builtin or --file".into())),
    }
}

fn cmd_audit(cfg: &Config) -> Result<bool, CliError> {
    let tab = load_tableau(cfg)?;
    let report: ConditionReport = match &tab {
        BuiltinTableau::Multiplicative(t) => t.eta1(),
        BuiltinTableau::Additive(t) => t.eta2(),
    };
    print!("{report}");
    let require = cfg.tableau.require.as_deref().unwrap_or("strong1");
    let ok = match require {
        "none" => true,
        "strong1" => report.strong_order_one(),
        "weak2" => report.strong_order_one() && report.weak_order_two(),
        other => return Err(CliError::Config(format!("unknown condition set `{other}`"))),
    };
    println!("{require}: {}", if ok { "holds" } else { "fails" });
    let mut cfg = cfg.clone();
    cfg.tableau.require = Some(require.to_string());
    if cfg.output.dir.is_none() {
        cfg.output.dir = Some(
            std::env::var_os(OUTPUT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("srk-out")),
        );
    }
    let out = Output::new(&cfg)?;
    out.write("audit.csv", &report.to_csv())?;
    out.manifest(&cfg)?;
    Ok(ok)
}

fn print_orders(estimates: &[OrderEstimate]) {
    println!("{:<36} {:>12} {:>12} {:>12} {:>8}", "method", "h", "error", "stderr", "fit");
    for e in estimates {
        for p in &e.points {
            println!(
                "{:<36} {:>12.6e} {:>12.5e} {:>12.3e} {:>8}",
                e.label,
                p.h,
                p.error,
                p.stderr,
                if p.used_in_fit { "yes" } else { "no" }
            );
        }
        match (e.slope, e.slope_stderr) {
            (Some(s), Some(se)) => println!("{:<36} slope {s:.4} +- {se:.4}", e.label),
            (Some(s), None) => println!("{:<36} slope {s:.4}", e.label),
            _ => println!("{:<36} slope n/a", e.label),
        }
    }
}

fn failures_error(estimates: &[OrderEstimate], paths: usize) -> Option<CliError> {
    let mut msg = String::new();
    for e in estimates {
        for p in e.points.iter().filter(|p| p.failures > 0) {
            let _ = write!(msg, "{} at h = {}: {} of {paths} paths did not converge; ", e.label, p.h, p.failures);
        }
    }
    (!msg.is_empty()).then(|| CliError::Numerical(msg.trim_end_matches("; ").to_string()))
}

fn check_slopes(cfg: &Config, estimates: &[OrderEstimate]) -> bool {
    let (lo, hi) = (cfg.checks.slope_min, cfg.checks.slope_max);
    if lo.is_none() && hi.is_none() {
        return true;
    }
    let mut ok = true;
    for e in estimates {
        let pass = e
            .slope
            .is_some_and(|s| lo.is_none_or(|l| s >= l) && hi.is_none_or(|h| s <= h));
        if !pass {
            println!("assertion failed: {} slope {:?} outside [{lo:?}, {hi:?}]", e.label, e.slope);
            ok = false;
        }
    }
    ok
}

fn orders_plot(title: &str, estimates: &[OrderEstimate], guides: &[f64]) -> String {
    let series: Vec<Series> = estimates
        .iter()
        .map(|e| Series {
            label: e.label.clone(),
            points: e.points.iter().map(|p| (p.h, p.error)).collect(),
        })
        .collect();
    chart(title, "h", "error", &series, true, guides)
}

fn finish_orders(cfg: &Config, camp: &Campaign, estimates: &[OrderEstimate], title: &str, guides: &[f64]) -> Result<bool, CliError> {
    let out = Output::new(cfg)?;
    out.write("orders.csv", &orders_csv(estimates))?;
    out.plot("orders.svg", || orders_plot(title, estimates, guides))?;
    out.manifest(cfg)?;
    print_orders(estimates);
    if let Some(e) = failures_error(estimates, camp.paths) {
        return Err(e);
    }
    Ok(check_slopes(cfg, estimates))
}

fn cmd_strong(cfg: &Config) -> Result<bool, CliError> {
    let camp = campaign(cfg)?;
    if cfg.campaign.two_chain.unwrap_or(false) {
        let est = two_chain_order(&camp)?;
        finish_orders(cfg, &camp, &est, "SRK vs appurtenant gap", &[1.5])
    } else {
        let est = strong_order(&camp)?;
        finish_orders(cfg, &camp, &est, "root-mean-square error", &[1.0])
    }
}

fn cmd_weak(cfg: &Config) -> Result<bool, CliError> {
    let camp = campaign(cfg)?;
    let est = weak_order(&camp, &phis(cfg)?)?;
    finish_orders(cfg, &camp, &est, "weak error", &[1.0, 2.0])
}

fn cmd_dist(cfg: &Config) -> Result<bool, CliError> {
    let camp = campaign(cfg)?;
    let points = dist_convergence(&camp, &phis(cfg)?)?;
    let out = Output::new(cfg)?;
    out.write("dist.csv", &dist_csv(&points))?;
    let mut labels: Vec<&str> = points.iter().map(|p| p.phi.as_str()).collect();
    labels.dedup();
    let by_phi = |phi: &str| -> Vec<&DistPoint> { points.iter().filter(|p| p.phi == phi).collect() };
    out.plot("dist.svg", || {
        let series: Vec<Series> = labels
            .iter()
            .map(|&l| Series {
                label: l.to_string(),
                points: by_phi(l).iter().map(|p| (p.h, p.err)).collect(),
            })
            .collect();
        chart("distance to the limit law", "h", "error", &series, true, &[1.0])
    })?;
    out.manifest(cfg)?;
    println!("{:<10} {:>12} {:>12} {:>12}", "phi", "h", "error", "stderr");
    for p in &points {
        println!("{:<10} {:>12.6e} {:>12.5e} {:>12.3e}", p.phi, p.h, p.err, p.stderr);
    }
    let mut ok = true;
    if cfg.checks.monotone.unwrap_or(false) {
        for &l in &labels {
            let seq: Vec<(f64, f64)> = by_phi(l).iter().map(|p| (p.err, p.stderr)).collect();
            if !decreasing_with_tolerance(&seq) {
                println!("assertion failed: {l} errors do not decrease with h");
                ok = false;
            }
        }
    }
    Ok(ok)
}

fn evolution_plot(ev: &Evolution) -> String {
    let series: Vec<Series> = ev
        .curves
        .iter()
        .map(|c| Series {
            label: c.method.clone(),
            points: c.times.iter().copied().zip(c.rmse.iter().copied()).collect(),
        })
        .collect();
    chart("root-mean-square error over time", "t", "rmse", &series, false, &[])
}

fn cmd_evolution(cfg: &Config) -> Result<bool, CliError> {
    let camp = campaign(cfg)?;
    let ev = mse_evolution(&camp)?;
    let out = Output::new(cfg)?;
    out.write("evolution.csv", &evolution_csv(&ev))?;
    out.plot("evolution.svg", || evolution_plot(&ev))?;
    out.manifest(cfg)?;
    println!("{:<28} {:>14}", "method", "terminal rmse");
    for c in &ev.curves {
        println!("{:<28} {:>14.6e}", c.method, c.terminal());
    }
    println!("terminal order: {}", ev.terminal_order.join(" < "));
    if !ev.eta_order.is_empty() {
        println!("eta2 order:     {}", ev.eta_order.join(" < "));
    }
    let failed: Vec<String> = ev
        .curves
        .iter()
        .filter(|c| c.failures > 0)
        .map(|c| format!("{}: {} of {} paths did not converge", c.method, c.failures, camp.paths))
        .collect();
    if !failed.is_empty() {
        return Err(CliError::Numerical(failed.join("; ")));
    }
    if cfg.checks.ordering.unwrap_or(false) && !ev.ordering_matches() {
        println!("assertion failed: terminal ordering differs from the eta2 ordering");
        return Ok(false);
    }
    Ok(true)
}

fn run_selftest() -> bool {
    let results = selftest::run_all();
    for r in &results {
        println!("{:<20} {}", r.name, if r.passed() { "pass" } else { "FAIL" });
        for f in &r.failures {
            println!("    {f}");
        }
    }
    results.iter().all(|r| r.passed())
}

/// Output directory a resolved configuration writes to.
pub fn output_dir(cfg: &Config) -> Option<&Path> {
    cfg.output.dir.as_deref()
}
