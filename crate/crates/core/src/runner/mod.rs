//! Experiment grids: (method × seed) cells run on a worker pool, each
//! writing its own artifacts; the coordinator writes the tables.

mod config;
mod kernelcheck;
mod svg;

use std::fs;
use std::io::Write;
use std::path::{Path as FsPath, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::drive::{
    diversity_metric, mpc_episode, plan, ArmProblem, Controller, KernelConfig, Method, MpcConfig, PathFollowProblem,
    PlanConfig, PlanResult, Problem, TerrainProblem,
};
use crate::sigcore::{path_to_csv, Path};
use crate::sigkernel::{SigKernelSpec, StaticKernelSpec};
use crate::steinopt::{BandwidthPolicy, InferenceConfig, TraceWriter};
use crate::trajparam::PlanRequest;
use crate::worlds::{Occupancy, PlanarArm, PointMassConfig, TerrainField};
use crate::{Error, Result, VERSION};

pub use config::{parse_bandwidth, parse_seeds, Experiment, RunConfig};
pub use kernelcheck::{fd_kernel_grad, kernel_suite, random_path, relative_error, CheckResult};
pub use svg::{pointmass_svg, terrain_svg};

/// Environment variable capping the worker pool.
pub const THREADS_ENV: &str = "SIGTRAJ_THREADS";

/// Per-run metrics; fields an experiment does not produce stay empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct RunRecord {
    pub run_id: String,
    pub method: String,
    pub seed: u64,
    /// Best particle cost (planning) or accrued episode cost (control).
    pub cost: Option<f64>,
    pub mean_cost: Option<f64>,
    pub steps: Option<usize>,
    pub crashed: Option<bool>,
    pub reached: Option<bool>,
    pub diversity: Option<f64>,
    pub modes: Option<usize>,
    /// Mean normalized target log density over particles.
    pub log_density: Option<f64>,
    /// Seconds; never written to the tables.
    #[serde(skip)]
    pub wall_clock: f64,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub records: Vec<RunRecord>,
    pub checks: Vec<(u64, CheckResult)>,
    pub out_dir: PathBuf,
}

impl RunOutcome {
    /// False only when a kernel check failed.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|(_, c)| c.pass)
    }
}

/// First line of every emitted file, after the format's comment marker.
pub fn meta_line(cfg: &RunConfig, seed: &str) -> String {
    format!("sigtraj {VERSION} config {} seed {seed}", cfg.hash())
}

/// Re-tag an error with the run it came from, keeping its kind.
fn tagged(run_id: &str, e: Error) -> Error {
    let m = |s: String| format!("run {run_id}: {s}");
    match e {
        Error::InvalidInput(s) => Error::InvalidInput(m(s)),
        Error::Numeric(s) => Error::Numeric(m(s)),
        Error::Parse(s) => Error::Parse(m(s)),
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), m(io.to_string()))),
        cap @ Error::Capacity { .. } => Error::Numeric(m(cap.to_string())),
    }
}

fn pool() -> Result<rayon::ThreadPool> {
    let n = match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .ok_or_else(|| Error::invalid(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?,
        Err(_) => 0,
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build()
        .map_err(|e| Error::numeric(format!("cannot start worker pool: {e}")))
}

/// Execute the whole grid and write results.csv, summary.csv, config.json
/// and per-run artifacts under `cfg.output`.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let out = PathBuf::from(&cfg.output);
    fs::create_dir_all(&out)?;
    let world = load_world(cfg)?;
    let pool = pool()?;

    if cfg.experiment == Experiment::Kernelcheck {
        let checks: Vec<(u64, CheckResult)> = pool.install(|| {
            cfg.seeds
                .par_iter()
                .map(|&s| kernel_suite(s, cfg.cases).map(|v| v.into_iter().map(|c| (s, c)).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()
        })?
        .into_iter()
        .flatten()
        .collect();
        write_config(cfg, &out)?;
        write_checks(cfg, &out, &checks)?;
        return Ok(RunOutcome { records: Vec::new(), checks, out_dir: out });
    }

    for d in ["paths", "plots", "traces"] {
        fs::create_dir_all(out.join(d))?;
    }
    let cells: Vec<(String, u64)> = cfg.methods.iter().flat_map(|m| cfg.seeds.iter().map(move |s| (m.clone(), *s))).collect();
    let records = pool.install(|| {
        cells
            .par_iter()
            .map(|(m, s)| {
                let id = format!("{}-{m}-s{s}", cfg.experiment.name());
                log::info!("starting {id}");
                run_cell(cfg, world.as_ref(), m, *s, &id, Some(&out)).map_err(|e| tagged(&id, e))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    write_config(cfg, &out)?;
    write_results(cfg, &out, &records)?;
    write_summary(cfg, &out, &records)?;
    Ok(RunOutcome { records, checks: Vec::new(), out_dir: out })
}

fn load_world(cfg: &RunConfig) -> Result<Option<PointMassConfig>> {
    if cfg.experiment != Experiment::Pointmass {
        return Ok(None);
    }
    let world = match &cfg.env {
        Some(p) => PointMassConfig::from_json(&fs::read_to_string(p).map_err(|e| Error::invalid(format!("cannot read env `{p}`: {e}")))?)?,
        None => {
            if cfg.start.len() != 2 || cfg.goal.len() != 2 {
                return Err(Error::invalid("point-mass start and goal are 2-vectors"));
            }
            PointMassConfig { start: [cfg.start[0], cfg.start[1]], goal: [cfg.goal[0], cfg.goal[1]], ..Default::default() }
        }
    };
    world.validate()?;
    Ok(Some(world))
}

/// One grid cell without writing any artifacts.
pub fn run_one(cfg: &RunConfig, method: &str, seed: u64) -> Result<RunRecord> {
    if cfg.experiment == Experiment::Kernelcheck {
        return Err(Error::invalid("kernel checks are not a grid cell"));
    }
    let world = load_world(cfg)?;
    let id = format!("{}-{method}-s{seed}", cfg.experiment.name());
    run_cell(cfg, world.as_ref(), method, seed, &id, None).map_err(|e| tagged(&id, e))
}

fn run_cell(cfg: &RunConfig, world: Option<&PointMassConfig>, method: &str, seed: u64, id: &str, out: Option<&FsPath>) -> Result<RunRecord> {
    let clock = std::time::Instant::now();
    let stem = format!("{method}-s{seed}");
    let header = meta_line(cfg, &seed.to_string());
    let mut rec = RunRecord { run_id: id.to_string(), method: method.to_string(), seed, ..Default::default() };
    match cfg.experiment {
        Experiment::Pointmass => {
            let world = world.expect("world loaded for point-mass runs");
            let r = mpc_episode(world, Controller::parse(method)?, &mpc_config(cfg)?, seed)?;
            rec.cost = Some(r.cost);
            rec.steps = Some(r.steps);
            rec.crashed = Some(r.crashed);
            rec.reached = Some(r.reached);
            let pos: Vec<[f64; 2]> = r.trajectory.iter().map(|s| s.pos).collect();
            let mut rows = vec![world.start.to_vec()];
            rows.extend(pos.iter().map(|p| p.to_vec()));
            let times = (0..rows.len()).map(|i| i as f64 * world.dt).collect();
            let path = Path::new(times, rows.concat(), 2)?;
            let Some(out) = out else {
                rec.wall_clock = clock.elapsed().as_secs_f64();
                return Ok(rec);
            };
            write_path(&out.join("paths").join(format!("{stem}.csv")), &header, &path)?;
            if cfg.svg {
                fs::write(out.join("plots").join(format!("{stem}.svg")), pointmass_svg(&header, world, &pos))?;
            }
            if cfg.trace {
                let mut f = jsonl(&out.join("traces").join(format!("{stem}.jsonl")), cfg, seed)?;
                for s in &r.trajectory {
                    serde_json::to_writer(&mut f, s)?;
                    f.write_all(b"\n")?;
                }
            }
        }
        Experiment::Terrain2d => {
            let field = TerrainField::halton(cfg.terrain_components, cfg.terrain_sigma, seed)?;
            let req = PlanRequest { start: cfg.start.clone(), goal: cfg.goal.clone(), lower: vec![0.0; 2], upper: vec![1.0; 2] };
            let p = TerrainProblem::new(field, req, cfg.knots, cfg.cost_points, cfg.kernel_points, cfg.box_sigma)?;
            let r = plan_cell(cfg, &p, method, seed, &mut rec, out, &stem)?;
            if let (true, Some(out)) = (cfg.svg, out) {
                let paths: Vec<Path> = r.params.iter().map(|x| p.output_path(x)).collect();
                fs::write(out.join("plots").join(format!("{stem}.svg")), terrain_svg(&header, &p.field, &paths, r.best))?;
            }
        }
        Experiment::Arm => {
            let occ = Occupancy { centers: cfg.obstacles.clone(), sigma: cfg.obstacle_sigma, weight: cfg.obstacle_weight };
            let arm = PlanarArm::new(cfg.arm_links.clone(), occ)?;
            let p = ArmProblem::new(arm, cfg.start.clone(), cfg.goal.clone(), cfg.knots, cfg.cost_points, cfg.kernel_points)?;
            plan_cell(cfg, &p, method, seed, &mut rec, out, &stem)?;
        }
        Experiment::Pathfollow => {
            let p = PathFollowProblem::new(cfg.path_steps, cfg.path_dim, cfg.path_rho, cfg.path_scale, cfg.init_half_width)?;
            let r = plan_cell(cfg, &p, method, seed, &mut rec, out, &stem)?;
            let ld = r.params.iter().map(|x| p.log_density(x)).collect::<Result<Vec<_>>>()?;
            rec.log_density = Some(ld.iter().sum::<f64>() / ld.len() as f64);
        }
        Experiment::Kernelcheck => unreachable!("kernel checks run outside the grid"),
    }
    rec.wall_clock = clock.elapsed().as_secs_f64();
    log::info!("finished {id} in {:.1}s", rec.wall_clock);
    Ok(rec)
}

/// Planner settings for a planning experiment.
pub fn plan_config(cfg: &RunConfig, seed: u64) -> Result<PlanConfig> {
    Ok(PlanConfig {
        particles: cfg.particles,
        inference: InferenceConfig {
            temperature: cfg.temperature,
            step_size: cfg.lr,
            iterations: cfg.iterations,
            ..Default::default()
        },
        kernel: KernelConfig {
            signature: SigKernelSpec::truncated(StaticKernelSpec::squared_exponential(1.0), cfg.sig_degree).with_time_augment(true),
            normalize: cfg.normalize,
            sig_bandwidth: parse_bandwidth(&cfg.sig_bandwidth)?,
            static_bandwidth: parse_bandwidth(&cfg.static_bandwidth)?,
        },
        seed,
    })
}

/// Controller settings for the point-mass experiment.
pub fn mpc_config(cfg: &RunConfig) -> Result<MpcConfig> {
    let sig_bandwidth = match parse_bandwidth(&cfg.sig_bandwidth)? {
        BandwidthPolicy::Fixed { sigma } => sigma,
        _ => return Err(Error::invalid("point-mass control needs a fixed signature bandwidth")),
    };
    let c = MpcConfig {
        horizon: cfg.horizon,
        policies: cfg.particles,
        samples: cfg.samples,
        control_std: cfg.control_std,
        prior_std: cfg.prior_std,
        iterations: cfg.iterations,
        lr: cfg.lr,
        temperature: cfg.temperature,
        sig_degree: cfg.sig_degree,
        kernel_points: cfg.kernel_points,
        sig_bandwidth,
        static_bandwidth: parse_bandwidth(&cfg.static_bandwidth)?,
        mppi_lambda: cfg.mppi_lambda,
        batch: cfg.batch,
        primitives: cfg.primitives,
        ..Default::default()
    };
    c.validate()?;
    Ok(c)
}

/// Signature kernel used to measure diversity of final paths: fixed
/// bandwidth when one is configured, otherwise unit.
fn diversity_kernel(cfg: &RunConfig) -> SigKernelSpec {
    let sigma = match parse_bandwidth(&cfg.sig_bandwidth) {
        Ok(BandwidthPolicy::Fixed { sigma }) => sigma,
        _ => 1.0,
    };
    SigKernelSpec::truncated(StaticKernelSpec::squared_exponential(sigma), cfg.sig_degree).with_time_augment(true)
}

fn plan_cell(
    cfg: &RunConfig,
    p: &dyn Problem,
    method: &str,
    seed: u64,
    rec: &mut RunRecord,
    out: Option<&FsPath>,
    stem: &str,
) -> Result<PlanResult> {
    let r = plan(p, Method::parse(method)?, &plan_config(cfg, seed)?)?;
    rec.cost = Some(r.best_cost());
    rec.mean_cost = Some(r.mean_cost());
    let dec = p.kernel_decoder();
    let kpaths: Vec<Path> = r.params.iter().map(|x| dec.decode(x)).collect();
    if kpaths.len() >= 2 {
        let d = diversity_metric(&kpaths, &diversity_kernel(cfg), cfg.tau)?;
        rec.diversity = Some(d.mean_distance);
        rec.modes = Some(d.modes);
    } else {
        rec.modes = Some(1);
    }
    let Some(out) = out else { return Ok(r) };
    let header = meta_line(cfg, &seed.to_string());
    for (i, x) in r.params.iter().enumerate() {
        write_path(&out.join("paths").join(format!("{stem}-p{i:02}.csv")), &header, &p.output_path(x))?;
    }
    if cfg.trace {
        let mut w = TraceWriter::new(jsonl(&out.join("traces").join(format!("{stem}.jsonl")), cfg, seed)?);
        for t in &r.trace {
            w.write(t)?;
        }
    }
    Ok(r)
}

fn write_path(file: &FsPath, header: &str, path: &Path) -> Result<()> {
    let mut buf = format!("# {header}\n").into_bytes();
    path_to_csv(path, &mut buf)?;
    fs::write(file, buf)?;
    Ok(())
}

/// JSON-lines file whose first line is a metadata object.
fn jsonl(file: &FsPath, cfg: &RunConfig, seed: u64) -> Result<std::io::BufWriter<fs::File>> {
    let mut f = std::io::BufWriter::new(fs::File::create(file)?);
    let meta = serde_json::json!({ "tool": "sigtraj", "version": VERSION, "config_hash": cfg.hash(), "seed": seed });
    serde_json::to_writer(&mut f, &meta)?;
    f.write_all(b"\n")?;
    Ok(f)
}

fn write_config(cfg: &RunConfig, out: &FsPath) -> Result<()> {
    let doc = serde_json::json!({
        "tool": "sigtraj",
        "version": VERSION,
        "config_hash": cfg.hash(),
        "seed": cfg.seeds_label(),
        "config": cfg,
    });
    fs::write(out.join("config.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(())
}

fn fmt_opt<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map(|x| x.to_string()).unwrap_or_default()
}

fn table(cfg: &RunConfig, header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>> {
    let mut buf = format!("# {}\n", meta_line(cfg, &cfg.seeds_label())).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        w.flush()?;
    }
    Ok(buf)
}

fn write_results(cfg: &RunConfig, out: &FsPath, records: &[RunRecord]) -> Result<()> {
    let header = ["run_id", "method", "seed", "cost", "mean_cost", "steps", "crashed", "reached", "diversity", "modes", "log_density"];
    let rows = records
        .iter()
        .map(|r| {
            vec![
                r.run_id.clone(),
                r.method.clone(),
                r.seed.to_string(),
                fmt_opt(&r.cost),
                fmt_opt(&r.mean_cost),
                fmt_opt(&r.steps),
                fmt_opt(&r.crashed),
                fmt_opt(&r.reached),
                fmt_opt(&r.diversity),
                fmt_opt(&r.modes),
                fmt_opt(&r.log_density),
            ]
        })
        .collect();
    fs::write(out.join("results.csv"), table(cfg, &header, rows)?)?;
    Ok(())
}

/// Mean and sample standard deviation of the present values.
fn mean_std(vals: impl Iterator<Item = Option<f64>>) -> (Option<f64>, Option<f64>) {
    let v: Vec<f64> = vals.flatten().collect();
    if v.is_empty() {
        return (None, None);
    }
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let s = if v.len() > 1 { (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt() } else { 0.0 };
    (Some(m), Some(s))
}

/// Per-method aggregate over seeds.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MethodSummary {
    pub method: String,
    pub runs: usize,
    pub cost_mean: Option<f64>,
    pub cost_std: Option<f64>,
    pub steps_mean: Option<f64>,
    pub steps_std: Option<f64>,
    pub crash_rate: Option<f64>,
    pub diversity_mean: Option<f64>,
    pub modes_mean: Option<f64>,
    pub log_density_mean: Option<f64>,
}

pub fn summarize(methods: &[String], records: &[RunRecord]) -> Vec<MethodSummary> {
    methods
        .iter()
        .map(|m| {
            let rs: Vec<&RunRecord> = records.iter().filter(|r| &r.method == m).collect();
            let (cost_mean, cost_std) = mean_std(rs.iter().map(|r| r.cost));
            let (steps_mean, steps_std) = mean_std(rs.iter().map(|r| r.steps.map(|s| s as f64)));
            let crash_rate = mean_std(rs.iter().map(|r| r.crashed.map(|c| c as u8 as f64))).0;
            MethodSummary {
                method: m.clone(),
                runs: rs.len(),
                cost_mean,
                cost_std,
                steps_mean,
                steps_std,
                crash_rate,
                diversity_mean: mean_std(rs.iter().map(|r| r.diversity)).0,
                modes_mean: mean_std(rs.iter().map(|r| r.modes.map(|s| s as f64))).0,
                log_density_mean: mean_std(rs.iter().map(|r| r.log_density)).0,
            }
        })
        .collect()
}

fn write_summary(cfg: &RunConfig, out: &FsPath, records: &[RunRecord]) -> Result<()> {
    let header = [
        "method", "runs", "cost_mean", "cost_std", "steps_mean", "steps_std", "crash_rate", "diversity_mean", "modes_mean",
        "log_density_mean",
    ];
    let rows = summarize(&cfg.methods, records)
        .into_iter()
        .map(|s| {
            vec![
                s.method,
                s.runs.to_string(),
                fmt_opt(&s.cost_mean),
                fmt_opt(&s.cost_std),
                fmt_opt(&s.steps_mean),
                fmt_opt(&s.steps_std),
                fmt_opt(&s.crash_rate),
                fmt_opt(&s.diversity_mean),
                fmt_opt(&s.modes_mean),
                fmt_opt(&s.log_density_mean),
            ]
        })
        .collect();
    fs::write(out.join("summary.csv"), table(cfg, &header, rows)?)?;
    Ok(())
}

fn write_checks(cfg: &RunConfig, out: &FsPath, checks: &[(u64, CheckResult)]) -> Result<()> {
    let header = ["seed", "check", "cases", "max_error", "tolerance", "pass"];
    let rows = checks
        .iter()
        .map(|(s, c)| {
            vec![s.to_string(), c.name.to_string(), c.cases.to_string(), c.max_error.to_string(), c.tolerance.to_string(), c.pass.to_string()]
        })
        .collect();
    fs::write(out.join("results.csv"), table(cfg, &header, rows)?)?;
    let names: Vec<&str> = checks.iter().map(|(_, c)| c.name).fold(Vec::new(), |mut v, n| {
        if !v.contains(&n) {
            v.push(n);
        }
        v
    });
    let rows = names
        .into_iter()
        .map(|n| {
            let cs: Vec<&CheckResult> = checks.iter().filter(|(_, c)| c.name == n).map(|(_, c)| c).collect();
            let max = cs.iter().map(|c| c.max_error).fold(0.0, f64::max);
            let passed = cs.iter().filter(|c| c.pass).count();
            vec![n.to_string(), cs.len().to_string(), passed.to_string(), max.to_string()]
        })
        .collect();
    fs::write(out.join("summary.csv"), table(cfg, &["check", "seeds", "passed", "max_error"], rows)?)?;
    Ok(())
}
