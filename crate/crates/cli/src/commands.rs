use std::fmt::Write as _;
use std::fs;

use anyhow::{bail, Context, Result};
use drpp_core::optimality::{proof_applies, search_bipartition, Bipartition};
use drpp_core::pattern::oracle_sweep;
use drpp_core::protocol::{
    plan_extraction, rate_report, run_drpp, threshold_scan, verdict_flip, DrppConfig, Status,
};
use drpp_core::thermal::{critical_error_prob, critical_temperature, pair_purifiable};
use drpp_core::{Family, Graph, ThermalModel};
use serde_json::{json, Value};

use crate::args::{
    GraphArgs, NoiseArgs, OptimalityArgs, RatesArgs, RunArgs, ScanArgs, SimulateArgs,
    ThresholdArgs, VerifyArgs,
};
use crate::UsageError;

/// What a command produced: the echoed configuration, the machine-readable
/// results and the table shown by default.
pub struct Report {
    pub config: Value,
    pub results: Value,
    pub table: String,
}

struct Target {
    graph: Graph,
    family: Option<Family>,
    label: String,
}

fn resolve_graph(args: &GraphArgs) -> Result<Target> {
    if let Some(f) = &args.family {
        let family: Family = f.parse()?;
        return Ok(Target {
            graph: family.build()?,
            label: family.to_string(),
            family: Some(family),
        });
    }
    let Some(given) = &args.graph else {
        bail!(UsageError("one of --graph or --family is required".into()));
    };
    if let Ok(family) = given.parse::<Family>() {
        return Ok(Target {
            graph: family.build()?,
            label: family.to_string(),
            family: Some(family),
        });
    }
    let text = fs::read_to_string(given).map_err(|e| {
        UsageError(format!(
            "{given:?} is neither a graph family nor a readable file: {e}"
        ))
    })?;
    Ok(Target {
        graph: Graph::parse_edge_list(&text).with_context(|| format!("reading {given}"))?,
        family: None,
        label: given.clone(),
    })
}

fn resolve_p(args: &NoiseArgs) -> Result<(f64, Value)> {
    match (args.p, args.temperature, args.coupling) {
        (Some(p), None, None) => {
            if !(0.0..=0.5).contains(&p) {
                bail!(UsageError(format!("--p must lie in [0, 1/2], got {p}")));
            }
            Ok((p, json!({ "p": p })))
        }
        (None, Some(t), Some(b)) => {
            let model = ThermalModel::new(b, t)?;
            let p = model.error_prob();
            Ok((p, json!({ "T": t, "B": b, "p": p })))
        }
        _ => bail!(UsageError("give either --p or both --T and --B".into())),
    }
}

fn run_config(run: &RunArgs, p: f64) -> DrppConfig {
    let mut cfg = DrppConfig::new(p, run.shots, run.seed);
    cfg.pair_target = run.target;
    cfg
}

fn fmt_opt<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map_or_else(|| "-".to_string(), |v| v.to_string())
}

/// Smallest `T` with `(1 - p(T))^2 <= 1/2`, found by bisection.
fn root_find_critical(coupling: f64) -> Result<f64> {
    let excess = |t: f64| -> Result<f64> {
        let q = 1.0 - ThermalModel::new(coupling, t)?.error_prob();
        Ok(q * q - 0.5)
    };
    let (mut lo, mut hi) = (0.0, coupling);
    while excess(hi)? > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn threshold(args: &ThresholdArgs) -> Result<Report> {
    let b = args.coupling;
    let t_crit = critical_temperature(b)?;
    let root = root_find_critical(b)?;
    let p_star = critical_error_prob();

    let mut rows = Vec::new();
    let mut table = String::new();
    writeln!(table, "B        = {b}")?;
    writeln!(table, "T_crit   = {t_crit:.9}  (closed form)")?;
    writeln!(table, "T_root   = {root:.9}  (bisection on (1-p)^2 = 1/2)")?;
    writeln!(table, "p*       = {p_star:.9}")?;
    writeln!(table)?;
    writeln!(
        table,
        "{:>10} {:>12} {:>12} {:>12} {:>11}",
        "T/T_crit", "T", "p", "(1-p)^2", "purifiable"
    )?;
    for ratio in [0.5, 0.9, 0.99, 0.999, 1.0, 1.001, 1.01, 1.1, 2.0] {
        let t = ratio * t_crit;
        let model = ThermalModel::new(b, t)?;
        let p = model.error_prob();
        let fid = (1.0 - p) * (1.0 - p);
        let ok = model.is_purifiable();
        writeln!(
            table,
            "{ratio:>10} {t:>12.6} {p:>12.6} {fid:>12.6} {ok:>11}"
        )?;
        rows.push(json!({ "t_over_t_crit": ratio, "T": t, "p": p, "pair_fidelity": fid, "purifiable": ok }));
    }
    Ok(Report {
        config: json!({ "B": b }),
        results: json!({
            "t_crit": t_crit,
            "t_crit_root_find": root,
            "p_star": p_star,
            "table": rows,
        }),
        table,
    })
}

pub fn simulate(args: &SimulateArgs) -> Result<Report> {
    let target = resolve_graph(&args.graph)?;
    let (p, noise) = resolve_p(&args.noise)?;
    let cfg = run_config(&args.run, p);
    let res = run_drpp(&target.graph, &cfg, target.family.as_ref())?;

    let mut table = String::new();
    writeln!(table, "graph              {}", res.graph)?;
    writeln!(table, "p                  {}", res.p)?;
    writeln!(table, "shots              {}", res.shots)?;
    writeln!(table, "seed               {}", res.seed)?;
    writeln!(table, "status             {}", status_name(res.status))?;
    writeln!(table, "fidelity           {:.6}", res.fidelity)?;
    writeln!(
        table,
        "ci95               [{:.6}, {:.6}]",
        res.ci95[0], res.ci95[1]
    )?;
    writeln!(
        table,
        "expected fidelity  {}",
        fmt_opt(res.expected_fidelity.map(|f| format!("{f:.6}")))
    )?;
    writeln!(table, "recurrence rounds  {}", res.rounds)?;
    writeln!(
        table,
        "pair fidelity      {:.6} -> {:.6} (target {})",
        res.pair_fidelity_raw, res.pair_fidelity, res.pair_target
    )?;
    writeln!(table, "copies consumed    {:.3}", res.copies_consumed)?;
    writeln!(
        table,
        "N_geo              {} (formula {})",
        res.n_geo_plan,
        fmt_opt(res.n_geo_formula)
    )?;
    writeln!(table, "R_2                {:.6e}", res.r2)?;
    writeln!(
        table,
        "R_psi bounds       [{:.6e}, {:.6e}]",
        res.r_psi_bounds[0], res.r_psi_bounds[1]
    )?;
    if let Some(d) = &res.diagnostics {
        writeln!(table, "diagnostics        {d}")?;
    }

    Ok(Report {
        config: json!({
            "graph": target.label,
            "noise": noise,
            "shots": cfg.shots,
            "seed": cfg.seed,
            "pair_target": cfg.pair_target,
        }),
        results: serde_json::to_value(&res)?,
        table,
    })
}

fn status_name(s: Status) -> &'static str {
    match s {
        Status::Ok => "ok",
        Status::PairDistillationFailed => "pair_distillation_failed",
    }
}

fn scan_grid(args: &ScanArgs) -> Result<Vec<f64>> {
    if let Some(grid) = &args.grid {
        return Ok(grid.clone());
    }
    let (Some(steps), Some(from), Some(to)) = (args.steps, args.from, args.to) else {
        bail!(UsageError(
            "give --grid or all of --steps, --from and --to".into()
        ));
    };
    if steps < 2 || !(from < to) {
        bail!(UsageError(
            "--steps must be at least 2 and --from below --to".into()
        ));
    }
    Ok((0..steps)
        .map(|i| from + (to - from) * i as f64 / (steps - 1) as f64)
        .collect())
}

pub fn scan(args: &ScanArgs) -> Result<Report> {
    let target = resolve_graph(&args.graph)?;
    let grid = scan_grid(args)?;
    if let Some(bad) = grid.iter().find(|p| !(0.0..=0.5).contains(*p)) {
        bail!(UsageError(format!("grid point {bad} outside [0, 1/2]")));
    }
    let template = run_config(&args.run, 0.0);
    let rows = threshold_scan(&target.graph, &grid, &template, target.family.as_ref())?;
    let flip = verdict_flip(&rows);

    let mut table = String::new();
    writeln!(
        table,
        "graph {}  shots {}  seed {}",
        target.label, template.shots, template.seed
    )?;
    writeln!(
        table,
        "{:>8} {:>10} {:>10} {:>21} {:>7} {:>11}",
        "p", "T/B", "fidelity", "ci95", "rounds", "purifiable"
    )?;
    for r in &rows {
        writeln!(
            table,
            "{:>8} {:>10} {:>10.6} [{:.6}, {:.6}] {:>7} {:>11}",
            r.p,
            fmt_opt(r.temperature_over_coupling.map(|t| format!("{t:.5}"))),
            r.fidelity,
            r.ci95[0],
            r.ci95[1],
            r.rounds,
            r.purifiable
        )?;
    }
    match flip {
        Some((lo, hi)) => writeln!(
            table,
            "verdict flips between p = {lo} and p = {hi} (p* = {:.6})",
            critical_error_prob()
        )?,
        None => writeln!(table, "verdict does not flip exactly once on this grid")?,
    }

    Ok(Report {
        config: json!({
            "graph": target.label,
            "grid": grid,
            "shots": template.shots,
            "seed": template.seed,
            "pair_target": template.pair_target,
        }),
        results: json!({
            "rows": rows,
            "flip": flip,
            "p_star": critical_error_prob(),
        }),
        table,
    })
}

pub fn rates(args: &RatesArgs) -> Result<Report> {
    let target = resolve_graph(&args.graph)?;
    let (p, noise) = resolve_p(&args.noise)?;
    let r = rate_report(&target.graph, p, target.family.as_ref())?;

    let mut table = String::new();
    writeln!(table, "graph          {}", target.label)?;
    writeln!(table, "p              {p}")?;
    writeln!(table, "purifiable     {}", pair_purifiable(p))?;
    writeln!(table, "N_geo plan     {}", r.n_geo_plan)?;
    writeln!(table, "N_geo formula  {}", fmt_opt(r.n_geo_formula))?;
    writeln!(table, "R_2            {:.6e}", r.r2)?;
    writeln!(
        table,
        "R_psi in       [{:.6e}, {:.6e}]",
        r.r_psi_lower, r.r_psi_upper
    )?;

    Ok(Report {
        config: json!({ "graph": target.label, "noise": noise }),
        results: serde_json::to_value(&r)?,
        table,
    })
}

pub fn plan(args: &GraphArgs) -> Result<Report> {
    let target = resolve_graph(args)?;
    let plan = plan_extraction(&target.graph);
    let formula = target
        .family
        .as_ref()
        .and_then(drpp_core::protocol::n_geo_formula);

    let mut table = String::new();
    writeln!(
        table,
        "graph {}: {} rounds (formula {})",
        target.label,
        plan.n_rounds(),
        fmt_opt(formula)
    )?;
    for (i, round) in plan.rounds().iter().enumerate() {
        let edges: Vec<String> = round
            .iter()
            .map(|x| format!("{}-{}", x.edge.0, x.edge.1))
            .collect();
        writeln!(table, "round {:>3}: {}", i + 1, edges.join(" "))?;
    }

    Ok(Report {
        config: json!({ "graph": target.label }),
        results: json!({
            "n_geo_plan": plan.n_rounds(),
            "n_geo_formula": formula,
            "rounds": plan.rounds(),
        }),
        table,
    })
}

pub fn verify_oracle(args: &VerifyArgs) -> Result<Report> {
    if !(1..=5).contains(&args.max_n) {
        bail!(UsageError(format!(
            "--max-n must lie in 1..=5, got {}",
            args.max_n
        )));
    }
    let report = oracle_sweep(args.max_n, !args.no_six)?;

    let mut table = String::new();
    writeln!(table, "graphs          {}", report.graphs)?;
    writeln!(table, "cz cases        {}", report.cz_cases)?;
    writeln!(table, "measure cases   {}", report.measure_cases)?;
    writeln!(table, "merge cases     {}", report.merge_cases)?;
    writeln!(table, "max distance    {:e}", report.max_distance)?;
    writeln!(table, "max prob error  {:e}", report.max_probability_error)?;
    writeln!(table, "passed          {}", report.passed())?;
    for f in &report.failures {
        writeln!(table, "  {f}")?;
    }

    Ok(Report {
        config: json!({ "max_n": args.max_n, "six_qubit_merges": !args.no_six }),
        results: json!({ "passed": report.passed(), "report": report }),
        table,
    })
}

pub fn check_optimality(args: &OptimalityArgs) -> Result<Report> {
    let target = resolve_graph(&args.graph)?;
    let (p, noise) = resolve_p(&args.noise)?;
    let config =
        json!({ "graph": target.label, "noise": noise, "tol": args.tol, "alice": args.alice });
    let mut table = String::new();

    if let Some(alice) = &args.alice {
        let bip = Bipartition::new(target.graph.n(), alice)?;
        let v = search_bipartition(&target.graph, &bip, p, args.tol)?;
        writeln!(table, "graph {}  p {p}", target.label)?;
        writeln!(
            table,
            "alice {:?}  bob {:?}",
            v.bipartition.alice(),
            v.bipartition.bob()
        )?;
        writeln!(table, "pairs used      {}", v.pair_budget)?;
        writeln!(table, "wiring          {:?}", v.wiring)?;
        writeln!(table, "trace distance  {:e}", v.trace_distance)?;
        writeln!(table, "matches         {}", v.matches)?;
        return Ok(Report {
            config,
            results: serde_json::to_value(&v)?,
            table,
        });
    }

    let verdicts = proof_applies(&target.graph, p, args.tol)?;
    writeln!(table, "graph {}  p {p}", target.label)?;
    writeln!(table, "{:>8} {:>8}  witness", "edge", "applies")?;
    for v in &verdicts {
        let witness = v.witness.as_ref().map_or_else(
            || "-".to_string(),
            |b| format!("{:?} | {:?}", b.alice(), b.bob()),
        );
        writeln!(
            table,
            "{:>8} {:>8}  {witness}",
            format!("{}-{}", v.edge.0, v.edge.1),
            v.applies
        )?;
    }
    Ok(Report {
        config,
        results: json!({ "edges": verdicts }),
        table,
    })
}
