use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use sigtraj::runner::{self, Experiment, RunConfig};
use sigtraj::sigcore::{path_from_csv, path_from_json, signature, Path};
use sigtraj::sigkernel::{kernel_with_grads, normalized, sig_kernel, SigKernelSpec, StaticKernelSpec};

#[derive(Parser)]
#[command(name = "sigtraj", version, about = "Signature-kernel Stein variational trajectory optimization")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment grid (methods × seeds) and write artifacts.
    Run(RunArgs),
    /// Evaluate a signature kernel between two paths.
    Kernel(KernelArgs),
    /// Print the truncated signature of a path.
    Sig(SigArgs),
    /// Show the default configuration of an experiment.
    Defaults {
        experiment: String,
        /// Print the full configuration as JSON.
        #[arg(long)]
        show: bool,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    experiment: Option<String>,
    /// JSON config file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated method list.
    #[arg(long)]
    method: Option<String>,
    /// Inclusive seed range such as 1..5.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    output: Option<String>,
    /// Point-mass environment JSON.
    #[arg(long)]
    env: Option<String>,
    /// Hyperparameter override, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    trace: bool,
    #[arg(long)]
    no_svg: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum StaticArg {
    Linear,
    Se,
}

#[derive(Args)]
struct KernelArgs {
    /// First path (CSV or JSON).
    x: PathBuf,
    /// Second path (CSV or JSON).
    y: PathBuf,
    /// Truncation degree; ignored with --pde.
    #[arg(long, default_value_t = 4)]
    degree: usize,
    /// Solve the kernel PDE instead of truncating.
    #[arg(long)]
    pde: bool,
    #[arg(long, default_value_t = 0)]
    refine: u32,
    #[arg(long = "static", value_enum, default_value = "se")]
    static_kernel: StaticArg,
    #[arg(long, default_value_t = 1.0)]
    bandwidth: f64,
    #[arg(long)]
    time_augment: bool,
    /// Report k(x,y)/sqrt(k(x,x)k(y,y)).
    #[arg(long)]
    normalize: bool,
    /// Also print gradients with respect to both paths.
    #[arg(long)]
    grad: bool,
}

#[derive(Args)]
struct SigArgs {
    path: PathBuf,
    #[arg(long, default_value_t = 2)]
    degree: usize,
}

fn read_path(p: &PathBuf) -> anyhow::Result<Path> {
    let text = fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))?;
    let parsed = if p.extension().is_some_and(|e| e == "json") { path_from_json(&text) } else { path_from_csv(text.as_bytes()) };
    Ok(parsed.with_context(|| format!("in {}", p.display()))?)
}

fn build_config(a: RunArgs) -> anyhow::Result<RunConfig> {
    let mut cfg = match (&a.config, &a.experiment) {
        (Some(file), exp) => {
            let text = fs::read_to_string(file).with_context(|| format!("cannot read {}", file.display()))?;
            let mut v: Value =
                serde_json::from_str(&text).map_err(|e| sigtraj::Error::Parse(format!("{} line {} column {}: {e}", file.display(), e.line(), e.column())))?;
            if let (Some(e), Value::Object(m)) = (exp, &mut v) {
                m.insert("experiment".into(), Value::String(e.clone()));
            }
            RunConfig::from_value(v).with_context(|| format!("in {}", file.display()))?
        }
        (None, Some(e)) => RunConfig::defaults(Experiment::parse(e)?),
        (None, None) => return Err(sigtraj::Error::InvalidInput("give --experiment or --config".into()).into()),
    };
    if let Some(m) = a.method {
        cfg.apply_override(&format!("methods={m}"))?;
    }
    if let Some(s) = a.seeds {
        cfg.apply_override(&format!("seeds={s}"))?;
    }
    if let Some(o) = a.output {
        cfg.output = o;
    }
    if let Some(e) = a.env {
        cfg.env = Some(e);
    }
    for kv in &a.set {
        cfg.apply_override(kv).with_context(|| format!("in --set {kv}"))?;
    }
    cfg.trace |= a.trace;
    if a.no_svg {
        cfg.svg = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn kernel_cmd(a: KernelArgs) -> anyhow::Result<()> {
    let (x, y) = (read_path(&a.x)?, read_path(&a.y)?);
    let st = match a.static_kernel {
        StaticArg::Linear => StaticKernelSpec::linear(),
        StaticArg::Se => StaticKernelSpec::squared_exponential(a.bandwidth),
    };
    let spec = if a.pde { SigKernelSpec::pde(st, a.refine) } else { SigKernelSpec::truncated(st, a.degree) }.with_time_augment(a.time_augment);
    let mut out = json!({});
    if a.grad {
        let e = kernel_with_grads(&x, &y, &spec)?;
        out["value"] = json!(e.value);
        out["grad_x"] = json!(e.grad_x.values);
        out["grad_y"] = json!(e.grad_y.values);
    } else {
        out["value"] = json!(sig_kernel(&x, &y, &spec)?);
    }
    if a.normalize {
        let (kxx, kyy) = (sig_kernel(&x, &x, &spec)?, sig_kernel(&y, &y, &spec)?);
        out["normalized"] = json!(normalized(out["value"].as_f64().unwrap_or(f64::NAN), kxx, kyy));
    }
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.cmd {
        Cmd::Run(a) => {
            let cfg = build_config(a)?;
            let o = runner::run(&cfg)?;
            if cfg.experiment == Experiment::Kernelcheck {
                for (s, c) in &o.checks {
                    println!("{} seed {s}: {} ({} cases, max error {:.3e}, tolerance {:.0e})", if c.pass { "PASS" } else { "FAIL" }, c.name, c.cases, c.max_error, c.tolerance);
                }
                return Ok(if o.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) });
            }
            for s in runner::summarize(&cfg.methods, &o.records) {
                let f = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "-".into());
                println!(
                    "{:<8} runs {} cost {} ± {} steps {} crash {} modes {} log density {}",
                    s.method,
                    s.runs,
                    f(s.cost_mean),
                    f(s.cost_std),
                    f(s.steps_mean),
                    f(s.crash_rate),
                    f(s.modes_mean),
                    f(s.log_density_mean)
                );
            }
            println!("artifacts in {}", o.out_dir.display());
        }
        Cmd::Kernel(a) => kernel_cmd(a)?,
        Cmd::Sig(a) => {
            let p = read_path(&a.path)?;
            let s = signature(&p, a.degree)?;
            println!("{}", serde_json::to_string(&json!({ "dim": s.dim(), "degree": s.degree(), "levels": s.levels() }))?);
        }
        Cmd::Defaults { experiment, show } => {
            let cfg = RunConfig::defaults(Experiment::parse(&experiment)?);
            if show {
                println!("{}", serde_json::to_string_pretty(&cfg)?);
            } else {
                println!("{}: methods {} seeds {} particles {} iterations {} (use --show for every key)", experiment, cfg.methods.join(","), cfg.seeds_label(), cfg.particles, cfg.iterations);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            let invalid = matches!(e.downcast_ref::<sigtraj::Error>(), Some(sigtraj::Error::InvalidInput(_) | sigtraj::Error::Parse(_)));
            ExitCode::from(if invalid { 2 } else { 1 })
        }
    }
}
