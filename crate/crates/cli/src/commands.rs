use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use catness_core::analytics::{
    derivative_small_omega, fit_scaling, pk_distribution, predict_convergence, ramsey_uncertainty,
    reference_closed_form, reference_ideal_with_limit, ScalingPoint,
};
use catness_core::catness::{commutator_projector, projector_probability, q_prime};
use catness_core::oracle;
use catness_core::trajectory::{default_checkpoints, Simulation, DEFAULT_RUNS};
use catness_core::{build_block_basis, catness, projection_postselect, InitialConvention, TrajectoryConfig};

use crate::config::{parse_list, ConfigFile};
use crate::output::{json_object, num, Artifacts, Cell, Format, Table};
use crate::{
    FitArgs, Initial, ModelArgs, OracleCheckArgs, PkArgs, PredictArgs, ReferencesArgs, SensitivityArgs,
    SimulateArgs, Source,
};

#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Fully resolved `simulate` settings.
#[derive(Debug, Clone, Serialize)]
pub struct SimulateSettings {
    pub trajectory: TrajectoryConfig,
    pub runs: u64,
    pub out: PathBuf,
    pub format: Format,
}

fn load_config(path: &Option<PathBuf>) -> Result<ConfigFile> {
    match path {
        Some(p) => ConfigFile::load(p),
        None => Ok(ConfigFile::default()),
    }
}

fn pick<T: std::str::FromStr>(flag: Option<T>, cfg: &ConfigFile, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => v,
        None => cfg.get(key)?.unwrap_or(default),
    })
}

fn parse_initial(s: &str) -> Result<Initial> {
    match s {
        "gibbs" => Ok(Initial::Gibbs),
        "all-up" | "all_up" => Ok(Initial::AllUp),
        other => Err(usage(format!("initial must be gibbs or all-up, got {other:?}"))),
    }
}

fn parse_format(s: &str) -> Result<Format> {
    match s {
        "csv" => Ok(Format::Csv),
        "jsonl" => Ok(Format::Jsonl),
        other => Err(usage(format!("format must be csv or jsonl, got {other:?}"))),
    }
}

fn trajectory_config(model: &ModelArgs, cfg: &ConfigFile, m: u64, checkpoints: Vec<u64>, seed: u64) -> Result<TrajectoryConfig> {
    let initial = match (model.initial, cfg.raw("initial")) {
        (Some(i), _) => i,
        (None, Some(s)) => parse_initial(s)?,
        (None, None) => Initial::Gibbs,
    };
    Ok(TrajectoryConfig {
        n: pick(model.n, cfg, "n", 15)?,
        beta: pick(model.beta, cfg, "beta", 10.0)?,
        omega_p: pick(model.h, cfg, "h", 0.5)?,
        gt: pick(model.gt, cfg, "gt", 0.222)?,
        m,
        checkpoints,
        master_seed: seed,
        initial: match initial {
            Initial::Gibbs => InitialConvention::Gibbs,
            Initial::AllUp => InitialConvention::AllUp,
        },
    })
}

pub fn resolve_simulate(args: &SimulateArgs) -> Result<SimulateSettings> {
    let cfg = load_config(&args.model.config)?;
    let m = pick(args.m, &cfg, "m", 1000)?;
    let checkpoints = match args.checkpoints.as_deref().or(cfg.raw("checkpoints")) {
        Some(s) => parse_list::<u64>(s).map_err(|e| usage(e.to_string()))?,
        None => default_checkpoints(m),
    };
    let seed = pick(args.seed, &cfg, "seed", 0)?;
    let trajectory = trajectory_config(&args.model, &cfg, m, checkpoints, seed)?.validated()?;
    let format = match (args.format, cfg.raw("format")) {
        (Some(f), _) => f,
        (None, Some(s)) => parse_format(s)?,
        (None, None) => Format::Csv,
    };
    let out = match (&args.out, cfg.raw("out")) {
        (Some(p), _) => p.clone(),
        (None, Some(s)) => PathBuf::from(s),
        (None, None) => PathBuf::from("catness-out"),
    };
    Ok(SimulateSettings { trajectory, runs: pick(args.runs, &cfg, "runs", DEFAULT_RUNS)?, out, format })
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let settings = resolve_simulate(args)?;
    let sim = Simulation::new(settings.trajectory.clone())?;
    if let Some(w) = sim.kraus().warning() {
        eprintln!("warning: {w}");
    }
    let (avg, records) = sim.run_ensemble(settings.runs, false)?;

    let mut art = Artifacts::new(&settings.out, "simulate")?;
    let mut w = art.create("outcomes.jsonl")?;
    for rec in &records {
        for (step, o) in rec.outcomes.iter().enumerate() {
            writeln!(
                w,
                "{{\"trajectory_index\":{},\"step\":{},\"outcome\":{}}}",
                rec.trajectory_index,
                step + 1,
                o
            )?;
        }
    }
    w.flush()?;
    let mut w = art.create("catness.jsonl")?;
    for rec in &records {
        for (c, v) in &rec.catness_at {
            writeln!(
                w,
                "{{\"trajectory_index\":{},\"checkpoint\":{c},\"catness\":{}}}",
                rec.trajectory_index,
                num(*v)
            )?;
        }
    }
    w.flush()?;
    let mut table = Table::new(vec!["N", "checkpoint", "mean", "stderr", "R"]);
    for s in &avg.stats {
        table.push(vec![
            Cell::Int(settings.trajectory.n as i64),
            Cell::Int(s.checkpoint as i64),
            Cell::Float(s.mean),
            Cell::Float(s.stderr),
            Cell::Int(s.runs as i64),
        ]);
    }
    let ensemble = format!("ensemble.{}", settings.format.extension());
    art.write(&ensemble, &table.render(settings.format))?;
    let manifest = art.finish(Some(settings.trajectory.master_seed), &settings)?;
    for s in &avg.stats {
        println!("m={:<6} mean={} stderr={} R={}", s.checkpoint, num(s.mean), num(s.stderr), s.runs);
    }
    println!("wrote {} and data files in {}", manifest.display(), settings.out.display());
    Ok(())
}

pub fn pk(args: &PkArgs) -> Result<()> {
    let dist = pk_distribution(args.n, args.m, args.gt)?;
    let mut table = Table::new(vec!["k", "p"]);
    for (k, p) in dist.probabilities.iter().enumerate() {
        table.push(vec![Cell::Int(k as i64), Cell::Float(*p)]);
    }
    let mut art = Artifacts::new(&args.out, "pk")?;
    art.write(&format!("pk.{}", args.format.extension()), &table.render(args.format))?;
    art.finish(None, &dist_params(args))?;
    let argmax = dist.argmax(1e-12);
    println!("argmax k = {argmax:?}");
    Ok(())
}

#[derive(Serialize)]
struct PkParams {
    n: usize,
    m: u64,
    gt: f64,
    format: Format,
}

fn dist_params(a: &PkArgs) -> PkParams {
    PkParams { n: a.n, m: a.m, gt: a.gt, format: a.format }
}

pub fn predict(args: &PredictArgs) -> Result<()> {
    let p = predict_convergence(args.n, args.m, args.k, args.gt)?;
    let candidates: Vec<String> = p.theta_candidates.iter().map(|t| num(*t)).collect();
    let selected: Vec<String> = p.selected.iter().map(i64::to_string).collect();
    let record = format!(
        "{{\"N\":{},\"m\":{},\"k\":{},\"gt\":{},\"narrow_regime\":{},\"theta_candidates\":[{}],\"selected\":[{}],\"L\":{},\"degenerate\":{}}}",
        p.n,
        p.m,
        p.k,
        num(p.gt),
        p.narrow_regime,
        candidates.join(","),
        selected.join(","),
        p.l().map_or("null".to_string(), |l| l.to_string()),
        p.degenerate
    );
    let mut art = Artifacts::new(&args.out, "predict")?;
    art.write("predict.json", &(record.clone() + "\n"))?;
    art.finish(None, &serde_json::json!({"n": args.n, "m": args.m, "k": args.k, "gt": args.gt}))?;
    println!("{record}");
    Ok(())
}

pub fn references(args: &ReferencesArgs) -> Result<()> {
    let ns: Vec<usize> = parse_list(&args.ns).map_err(|e| usage(e.to_string()))?;
    if ns.is_empty() {
        return Err(usage("--ns is empty"));
    }
    let mut table = Table::new(vec!["N", "ideal", "ideal_half", "closed_form"]);
    for &n in &ns {
        let ideal = reference_ideal_with_limit(n, args.ideal_limit)?;
        table.push(vec![
            Cell::Int(n as i64),
            Cell::Float(ideal),
            Cell::Float(0.5 * ideal),
            Cell::Float(reference_closed_form(n)),
        ]);
    }
    let mut art = Artifacts::new(&args.out, "references")?;
    art.write(&format!("references.{}", args.format.extension()), &table.render(args.format))?;
    art.finish(None, &serde_json::json!({"ns": ns, "ideal_limit": args.ideal_limit, "format": args.format}))?;
    print!("{}", table.render(Format::Csv));
    Ok(())
}

/// Columns never treated as fit targets.
const NON_VALUE_COLUMNS: [&str; 5] = ["N", "checkpoint", "stderr", "R", "k"];

struct CsvData {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn read_csv(paths: &[PathBuf]) -> Result<CsvData> {
    let mut header: Option<Vec<String>> = None;
    let mut rows = Vec::new();
    for path in paths {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let Some(h) = lines.next() else { bail!("{} is empty", path.display()) };
        let h: Vec<String> = h.split(',').map(|s| s.trim().to_string()).collect();
        match &header {
            None => header = Some(h.clone()),
            Some(prev) if *prev != h => bail!("{} has header {:?}, expected {:?}", path.display(), h, prev),
            _ => {}
        }
        for (i, line) in lines.enumerate() {
            let row: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
            if row.len() != h.len() {
                bail!("{} line {}: {} fields, expected {}", path.display(), i + 2, row.len(), h.len());
            }
            rows.push(row);
        }
    }
    Ok(CsvData { header: header.unwrap_or_default(), rows })
}

pub fn fit(args: &FitArgs) -> Result<()> {
    let data = read_csv(&args.inputs)?;
    let col = |name: &str| data.header.iter().position(|h| h == name);
    let n_col = col("N").ok_or_else(|| usage("input has no N column"))?;
    let group_col = col("checkpoint");
    let value_cols: Vec<usize> = match &args.column {
        Some(c) => vec![col(c).ok_or_else(|| usage(format!("no column named {c:?}")))?],
        None => (0..data.header.len())
            .filter(|&i| !NON_VALUE_COLUMNS.contains(&data.header[i].as_str()))
            .collect(),
    };
    if value_cols.is_empty() {
        return Err(usage("no value columns to fit"));
    }
    let stderr_col = col("stderr");

    let mut groups: BTreeMap<i64, Vec<&Vec<String>>> = BTreeMap::new();
    for row in &data.rows {
        let g = match group_col {
            Some(i) => row[i].parse::<i64>().with_context(|| format!("bad checkpoint {:?}", row[i]))?,
            None => -1,
        };
        groups.entry(g).or_default().push(row);
    }

    let mut table = Table::new(vec!["checkpoint", "column", "slope", "intercept", "r_squared", "points"]);
    for (g, rows) in &groups {
        for &vc in &value_cols {
            let points = rows
                .iter()
                .map(|r| {
                    Ok(ScalingPoint {
                        n: r[n_col].parse().with_context(|| format!("bad N {:?}", r[n_col]))?,
                        value: r[vc].parse().with_context(|| format!("bad value {:?}", r[vc]))?,
                        stderr: match stderr_col {
                            Some(i) => r[i].parse().unwrap_or(0.0),
                            None => 0.0,
                        },
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let f = fit_scaling(&points)?;
            table.push(vec![
                Cell::Text(if *g < 0 { String::new() } else { g.to_string() }),
                Cell::Text(data.header[vc].clone()),
                Cell::Float(f.slope),
                Cell::Float(f.intercept),
                Cell::Float(f.r_squared),
                Cell::Int(points.len() as i64),
            ]);
        }
    }
    let mut art = Artifacts::new(&args.out, "fit")?;
    art.write(&format!("fit.{}", args.format.extension()), &table.render(args.format))?;
    art.finish(None, &serde_json::json!({"inputs": args.inputs, "column": args.column, "format": args.format}))?;
    print!("{}", table.render(Format::Csv));
    Ok(())
}

/// Tolerances for `oracle-check`: state, probability, catness.
pub const ORACLE_TOLERANCES: (f64, f64, f64) = (1e-10, 1e-12, 1e-10);

pub fn oracle_check(args: &OracleCheckArgs) -> Result<()> {
    let dev = oracle::compare_with_dense(&[args.n], args.scripts, args.steps, args.seed)?;
    let (ts, tp, tc) = ORACLE_TOLERANCES;
    let pass = dev.state <= ts && dev.probability <= tp && dev.catness <= tc;
    let cells = [
        ("N", Cell::Int(args.n as i64)),
        ("seed", Cell::Int(args.seed as i64)),
        ("steps_compared", Cell::Int(dev.steps as i64)),
        ("state", Cell::Float(dev.state)),
        ("probability", Cell::Float(dev.probability)),
        ("catness", Cell::Float(dev.catness)),
        ("pass", Cell::Text(if pass { "PASS" } else { "FAIL" }.into())),
    ];
    let record = json_object(cells.iter().map(|(k, v)| (*k, v)));
    let mut art = Artifacts::new(&args.out, "oracle-check")?;
    art.write("oracle_check.json", &(record + "\n"))?;
    art.finish(
        Some(args.seed),
        &serde_json::json!({"n": args.n, "scripts": args.scripts, "steps": args.steps}),
    )?;
    println!(
        "{} N={} state {:.3e} probability {:.3e} catness {:.3e}",
        if pass { "PASS" } else { "FAIL" },
        args.n,
        dev.state,
        dev.probability,
        dev.catness
    );
    if !pass {
        bail!("oracle deviations exceed tolerances");
    }
    Ok(())
}

/// Outcomes of one trajectory, in step order, from `outcomes.jsonl`.
pub fn read_outcomes(path: &Path, index: u64) -> Result<Vec<i8>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut steps = Vec::new();
    for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let v: serde_json::Value =
            serde_json::from_str(line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
        if v["trajectory_index"].as_u64() != Some(index) {
            continue;
        }
        let step = v["step"].as_u64().context("missing step")?;
        let o = v["outcome"].as_i64().context("missing outcome")?;
        steps.push((step, o as i8));
    }
    steps.sort_unstable();
    for (expect, (step, _)) in (1u64..).zip(&steps) {
        if *step != expect {
            bail!("trajectory {index} is missing step {expect}");
        }
    }
    Ok(steps.into_iter().map(|(_, o)| o).collect())
}

pub fn sensitivity(args: &SensitivityArgs) -> Result<()> {
    let cfg = load_config(&args.model.config)?;
    let (state, label) = match args.source {
        Source::Projection => {
            let sx = args.sx.ok_or_else(|| usage("--source projection needs --sx"))?;
            let tc = trajectory_config(&args.model, &cfg, 0, vec![], 0)?.validated()?;
            let basis = build_block_basis(tc.n)?;
            let initial = tc.initial_state(&basis)?;
            let (post, _) = projection_postselect(&initial, sx)?;
            (post, format!("projection Sx={sx}"))
        }
        Source::Trajectory => {
            let path = args.outcomes.as_ref().ok_or_else(|| usage("--source trajectory needs --outcomes"))?;
            let mut outcomes = read_outcomes(path, args.index)?;
            if let Some(s) = args.step {
                if s as usize > outcomes.len() {
                    return Err(usage(format!("trajectory {} has only {} steps", args.index, outcomes.len())));
                }
                outcomes.truncate(s as usize);
            }
            let tc = trajectory_config(&args.model, &cfg, outcomes.len() as u64, vec![], 0)?;
            let sim = Simulation::new(tc)?;
            let st = sim.replay(&outcomes)?.materialize();
            (st, format!("trajectory {} after {} steps", args.index, outcomes.len()))
        }
    };
    let eta = commutator_projector(&state);
    let p = projector_probability(&state, &eta);
    let q = q_prime(&state, &eta);
    let dp = derivative_small_omega(&state, &eta, args.t_int);
    let est = ramsey_uncertainty(p, dp, args.t_int, args.total_time)?;
    let cells = [
        ("source", Cell::Text(label)),
        ("catness", Cell::Float(catness(&state).value)),
        ("projector_rank", Cell::Text(eta.rank().to_string())),
        ("p", Cell::Float(est.p)),
        ("q_prime", Cell::Float(q)),
        ("dp_domega", Cell::Float(est.dp_domega)),
        ("t_int", Cell::Float(est.t_int)),
        ("total_time", Cell::Float(est.total_time)),
        ("delta_omega", Cell::Float(est.delta_omega)),
    ];
    let record = json_object(cells.iter().map(|(k, v)| (*k, v)));
    let mut art = Artifacts::new(&args.out, "sensitivity")?;
    art.write("sensitivity.json", &(record.clone() + "\n"))?;
    art.finish(
        None,
        &serde_json::json!({
            "source": args.source, "sx": args.sx, "outcomes": args.outcomes, "index": args.index,
            "step": args.step, "t_int": args.t_int, "total_time": args.total_time,
            "n": args.model.n, "beta": args.model.beta, "h": args.model.h, "gt": args.model.gt,
            "initial": args.model.initial, "config": args.model.config,
        }),
    )?;
    println!("{record}");
    Ok(())
}
