use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use fdsecrecy::channel::{
    capacity_bounds, db_to_linear, rate_user1, rate_user2, CovarianceDesign, ErrorBounds,
    SystemInstance, WorstCaseRates,
};
use fdsecrecy::config::{load_instance, write_instance};
use fdsecrecy::kkt::{kkt_certificate, kkt_residuals, rank_check};
use fdsecrecy::oracle::{random_scalar_instance, robust_soundness, scalar_sum_secrecy_oracle};
use fdsecrecy::perfect::max_sum_secrecy;
use fdsecrecy::power::{power_vs_sinr_sweep, PowerStatus};
use fdsecrecy::region::{region_polygon, GridSpec, RegionResult};
use fdsecrecy::report::{
    fmt_num, polygon_csv, power_csv, region_csv, region_svg, robust_region_csv,
};
use fdsecrecy::robust::robust_max_sum_secrecy;
use fdsecrecy::Error;

#[derive(Parser, Debug)]
#[command(
    version,
    about = "Secrecy rate regions and robust power design for full-duplex MISO wiretap channels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Perfect-CSI secrecy region and maximum sum secrecy rate.
    PerfectRegion(Common),
    /// Worst-case region under norm-bounded channel errors, one per ε.
    RobustRegion(Common),
    /// Minimum total power over a sweep of symmetric SINR floors.
    PowerMin {
        #[command(flatten)]
        common: Common,
        /// SINR floors applied to both users.
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        floors: Vec<f64>,
        /// Eavesdropper SINR cap; `inf` drops the constraint.
        #[arg(long, default_value = "inf")]
        gamma_e: f64,
    },
    /// KKT residuals and rank checks on every converged perfect-CSI cell.
    VerifyKkt(Common),
    /// Cross-checks solver outputs against closed forms, sampling and
    /// brute-force oracles.
    Validate(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Instance file; the built-in two-antenna reference instance at 3 dB
    /// when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Rate grid subdivisions `K,L` (default 40,40; 10,10 for validate).
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, default_value_t = 1e-4)]
    zeta: f64,
    /// Uniform error bounds; the config's bounds when omitted.
    #[arg(long, value_delimiter = ',')]
    eps: Option<Vec<f64>>,
    /// Power budget of both users in dB, overriding the config.
    #[arg(long)]
    power_db: Option<f64>,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Both)]
    format: Format,
}

#[derive(Clone, Copy, Debug, PartialEq, ValueEnum)]
enum Format {
    Csv,
    Svg,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        self != Format::Svg
    }
    fn svg(self) -> bool {
        self != Format::Csv
    }
}

/// Non-error endings that still map to a nonzero exit code.
#[derive(Debug, PartialEq)]
enum Outcome {
    Success,
    Infeasible,
    SolverFailure,
}

struct Run {
    common: Common,
    inst: SystemInstance,
    outputs: Vec<String>,
}

impl Run {
    fn new(common: &Common) -> anyhow::Result<Self> {
        let mut inst = match &common.config {
            Some(p) => load_instance(p).with_context(|| format!("loading {}", p.display()))?,
            None => SystemInstance::reference(3.0),
        };
        if let Some(db) = common.power_db {
            if !db.is_finite() {
                return Err(Error::InvalidArgument("--power-db must be finite".into()).into());
            }
            inst = inst.with_power(db_to_linear(db), db_to_linear(db));
        }
        fs::create_dir_all(&common.out)
            .with_context(|| format!("creating {}", common.out.display()))?;
        Ok(Self {
            common: common.clone(),
            inst,
            outputs: Vec::new(),
        })
    }

    fn grid(&self, default: (usize, usize)) -> anyhow::Result<GridSpec> {
        let (k, l) = match &self.common.grid {
            None => default,
            Some(s) => {
                let parts: Vec<&str> = s.split(',').map(str::trim).collect();
                let parse = |p: &str| p.parse::<usize>().ok();
                match parts.as_slice() {
                    [k, l] => match (parse(k), parse(l)) {
                        (Some(k), Some(l)) => (k, l),
                        _ => bail!(Error::InvalidArgument(format!(
                            "--grid expects K,L, got `{s}`"
                        ))),
                    },
                    _ => bail!(Error::InvalidArgument(format!(
                        "--grid expects K,L, got `{s}`"
                    ))),
                }
            }
        };
        Ok(GridSpec::new(k, l, self.common.zeta)?)
    }

    /// `(label, bounds)` for each requested ε.
    fn eps_list(&self) -> Vec<(String, ErrorBounds)> {
        match &self.common.eps {
            Some(v) => v
                .iter()
                .map(|e| (fmt_num(*e), ErrorBounds::uniform(*e)))
                .collect(),
            None => vec![("config".into(), self.inst.eps)],
        }
    }

    fn write(&mut self, name: &str, body: &str) -> anyhow::Result<()> {
        let path = self.common.out.join(name);
        fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(
        mut self,
        command: &str,
        extra: Value,
        summary: Value,
        start: Instant,
    ) -> anyhow::Result<()> {
        let c = &self.common;
        let manifest = json!({
            "command": command,
            "version": env!("CARGO_PKG_VERSION"),
            "parameters": {
                "config": c.config.as_ref().map(|p| p.display().to_string()),
                "grid": c.grid,
                "zeta": c.zeta,
                "eps": c.eps,
                "power_db": c.power_db,
                "samples": c.samples,
                "seed": c.seed,
                "out": c.out.display().to_string(),
                "format": format!("{:?}", c.format).to_lowercase(),
                "extra": extra,
            },
            "instance": write_instance(&self.inst),
            "outputs": self.outputs,
            "summary": summary,
            "wall_time_s": start.elapsed().as_secs_f64(),
        });
        let body = serde_json::to_string_pretty(&manifest)? + "\n";
        self.write("manifest.json", &body)
    }
}

fn region_summary(r: &RegionResult) -> Value {
    let best = r
        .best_cell()
        .map(|c| json!({ "k": c.k, "l": c.l, "r1": c.r1, "r2": c.r2, "rE": c.re, "sum": c.sum }));
    json!({
        "sum_max": r.sum_max,
        "best": best,
        "converged": r.converged().count(),
        "failed": r.failed_count(),
    })
}

fn region_outcome(results: &[&RegionResult]) -> Outcome {
    if results.iter().any(|r| r.failed_count() > 0) {
        Outcome::SolverFailure
    } else {
        Outcome::Success
    }
}

fn perfect_region(common: &Common) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let mut run = Run::new(common)?;
    let grid = run.grid((40, 40))?;
    let r = max_sum_secrecy(&run.inst, &grid)?;
    let poly = region_polygon(&r);
    if common.format.csv() {
        run.write("perfect_region.csv", &region_csv(&r))?;
        run.write("perfect_polygon.csv", &polygon_csv(&poly))?;
    }
    if common.format.svg() {
        run.write("regions.svg", &region_svg(&[("perfect CSI".into(), poly)]))?;
    }
    println!(
        "sum secrecy rate {} bits/channel use ({} of {} cells converged)",
        fmt_num(r.sum_max),
        r.converged().count(),
        r.cells.len()
    );
    let outcome = region_outcome(&[&r]);
    run.finish("perfect-region", Value::Null, region_summary(&r), start)?;
    Ok(outcome)
}

fn robust_region(common: &Common) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let mut run = Run::new(common)?;
    let grid = run.grid((40, 40))?;
    let mut series = Vec::new();
    let mut results = Vec::new();
    let mut summary = serde_json::Map::new();
    for (label, eps) in run.eps_list() {
        let inst = run.inst.clone().with_eps(eps);
        let r = robust_max_sum_secrecy(&inst, &grid)?;
        let poly = region_polygon(&r);
        if common.format.csv() {
            run.write(
                &format!("robust_eps_{label}.csv"),
                &robust_region_csv(&r, &eps),
            )?;
            run.write(
                &format!("robust_eps_{label}_polygon.csv"),
                &polygon_csv(&poly),
            )?;
        }
        println!(
            "eps = {label}: worst-case sum secrecy rate {} bits/channel use",
            fmt_num(r.sum_max)
        );
        summary.insert(label.clone(), region_summary(&r));
        series.push((format!("eps = {label}"), poly));
        results.push(r);
    }
    if common.format.svg() {
        run.write("regions.svg", &region_svg(&series))?;
    }
    let outcome = region_outcome(&results.iter().collect::<Vec<_>>());
    run.finish("robust-region", Value::Null, Value::Object(summary), start)?;
    Ok(outcome)
}

fn power_min(common: &Common, floors: &[f64], gamma_e: f64) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let mut run = Run::new(common)?;
    let eps = run.eps_list();
    if eps.len() != 1 {
        bail!(Error::InvalidArgument(
            "power-min takes a single --eps value".into()
        ));
    }
    let inst = run.inst.clone().with_eps(eps[0].1);
    let pts = power_vs_sinr_sweep(&inst, floors, gamma_e);
    run.write("power.csv", &power_csv(&pts))?;
    for p in &pts {
        println!(
            "floor {}: {} ({})",
            fmt_num(p.spec.gamma_s1),
            fmt_num(p.total_power),
            p.status.label()
        );
    }
    let outcome = if pts
        .iter()
        .any(|p| matches!(p.status, PowerStatus::Failed(_)))
    {
        Outcome::SolverFailure
    } else if pts
        .iter()
        .all(|p| matches!(p.status, PowerStatus::Infeasible(_)))
    {
        Outcome::Infeasible
    } else {
        Outcome::Success
    };
    let summary = json!({
        "optimal": pts.iter().filter(|p| p.status == PowerStatus::Optimal).count(),
        "infeasible": pts.iter().filter(|p| matches!(p.status, PowerStatus::Infeasible(_))).count(),
    });
    run.finish(
        "power-min",
        json!({ "floors": floors, "gamma_e": fmt_num(gamma_e) }),
        summary,
        start,
    )?;
    Ok(outcome)
}

/// Residual bound for a cell to count as KKT-certified.
const KKT_TOL: f64 = 1e-6;

fn verify_kkt(common: &Common) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let mut run = Run::new(common)?;
    let grid = run.grid((40, 40))?;
    let inst = run.inst.clone().with_eps(ErrorBounds::zero());
    let r = max_sum_secrecy(&inst, &grid)?;
    let mut csv = String::from("k,l,t,kkt_max,rank_user1,rank_user2,note\n");
    let (mut certified, mut no_interior, mut errors, mut rank_fails, mut over_tol) =
        (0, 0, 0, 0, 0);
    let mut worst: f64 = 0.0;
    for c in r.converged() {
        let line = match kkt_certificate(&inst, c.r1_target, c.r2_target, c.t_min) {
            Ok(cert) => {
                let res = kkt_residuals(
                    &inst,
                    c.r1_target,
                    c.r2_target,
                    cert.t,
                    &cert.design,
                    &cert.duals,
                )?;
                let rank = rank_check(&inst, &cert, common.zeta)?;
                certified += 1;
                worst = worst.max(res.max());
                if res.max() > KKT_TOL {
                    over_tol += 1;
                }
                if rank.user1.is_fail() || rank.user2.is_fail() {
                    rank_fails += 1;
                }
                format!(
                    "{},{},{},{},{},{},",
                    c.k,
                    c.l,
                    fmt_num(cert.t),
                    fmt_num(res.max()),
                    rank.user1.label(),
                    rank.user2.label()
                )
            }
            Err(Error::NoStrictlyFeasiblePoint(_)) => {
                no_interior += 1;
                format!("{},{},,,,,no strictly feasible point", c.k, c.l)
            }
            Err(e) => {
                errors += 1;
                format!("{},{},,,,,{}", c.k, c.l, e.to_string().replace(',', ";"))
            }
        };
        csv.push_str(&line);
        csv.push('\n');
    }
    run.write("kkt.csv", &csv)?;
    println!(
        "certified {certified} cells (max residual {}), {over_tol} above {}, {rank_fails} rank failures, \
         {no_interior} without a strictly feasible point, {errors} errors",
        fmt_num(worst),
        fmt_num(KKT_TOL)
    );
    let summary = json!({
        "certified": certified,
        "max_residual": worst,
        "above_tolerance": over_tol,
        "rank_failures": rank_fails,
        "no_strictly_feasible_point": no_interior,
        "errors": errors,
    });
    let outcome = if errors > 0 || rank_fails > 0 || over_tol > 0 {
        Outcome::SolverFailure
    } else {
        Outcome::Success
    };
    run.finish("verify-kkt", Value::Null, summary, start)?;
    Ok(outcome)
}

fn check_line(name: &str, pass: bool, detail: String) -> Value {
    println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    json!({ "check": name, "pass": pass, "detail": detail })
}

fn validate(common: &Common) -> anyhow::Result<Outcome> {
    let start = Instant::now();
    let run = Run::new(common)?;
    let grid = run.grid((10, 10))?;
    let mut checks = Vec::new();

    // Closed-form capacities against the rates of full-power beamforming.
    let nominal = run.inst.clone().with_eps(ErrorBounds::zero());
    let cap = capacity_bounds(&nominal);
    let mrt = CovarianceDesign::mrt(&nominal);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(1e-300);
    let err = rel(rate_user1(&nominal, &mrt), cap.c1).max(rel(rate_user2(&nominal, &mrt), cap.c2));
    checks.push(check_line(
        "capacities",
        err <= 1e-12,
        format!("max relative error {}", fmt_num(err)),
    ));

    // Robust bounds against sampled and grid-searched channel errors.
    let eps_list = match &common.eps {
        Some(_) => run.eps_list(),
        None => vec![("0.03".into(), ErrorBounds::uniform(0.03))],
    };
    for (label, eps) in eps_list {
        let inst = run.inst.clone().with_eps(eps);
        let r = robust_max_sum_secrecy(&inst, &grid)?;
        let mut worst = f64::NEG_INFINITY;
        for (i, c) in r.converged().enumerate() {
            let d = c.design.as_ref().expect("converged cells carry a design");
            let bounds = WorstCaseRates {
                r1_min: c.r1,
                r2_min: c.r2,
                re_max: c.re,
            };
            let rep =
                robust_soundness(&inst, d, bounds, common.samples, common.seed + i as u64, 8)?;
            worst = worst.max(rep.max_violation);
        }
        checks.push(check_line(
            &format!("soundness eps={label}"),
            worst <= 1e-3 && r.failed_count() == 0,
            format!(
                "{} cells, largest violation {} bits, {} failed",
                r.converged().count(),
                fmt_num(worst),
                r.failed_count()
            ),
        ));
    }

    // Single-antenna instances against exhaustive power-split search.
    let mut gap: f64 = 0.0;
    for s in 0..3 {
        let inst = random_scalar_instance(common.seed + s);
        let sdp = max_sum_secrecy(&inst, &GridSpec::new(100, 100, common.zeta)?)?;
        let oracle = scalar_sum_secrecy_oracle(&inst, 100)?;
        gap = gap.max((sdp.sum_max - oracle.sum_max).abs());
    }
    checks.push(check_line(
        "scalar oracle",
        gap <= 0.01,
        format!("3 instances, largest gap {} bits", fmt_num(gap)),
    ));

    let pass = checks.iter().all(|c| c["pass"] == json!(true));
    run.finish(
        "validate",
        Value::Null,
        json!({ "checks": checks, "pass": pass }),
        start,
    )?;
    Ok(if pass {
        Outcome::Success
    } else {
        Outcome::SolverFailure
    })
}

fn exit_code_for(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(
            Error::Infeasible { .. }
            | Error::InfeasibleAtCapacity { .. }
            | Error::Config { .. }
            | Error::InvalidArgument(_)
            | Error::Dimension(_),
        ) => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::PerfectRegion(c) => perfect_region(c),
        Command::RobustRegion(c) => robust_region(c),
        Command::PowerMin {
            common,
            floors,
            gamma_e,
        } => power_min(common, floors, *gamma_e),
        Command::VerifyKkt(c) => verify_kkt(c),
        Command::Validate(c) => validate(c),
    };
    match result {
        Ok(Outcome::Success) => ExitCode::SUCCESS,
        Ok(Outcome::Infeasible) => ExitCode::from(2),
        Ok(Outcome::SolverFailure) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
