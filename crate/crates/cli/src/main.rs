use std::fs::File;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use colsparse::certificates::{check_exact_cert, check_soft_cert, find_exact_cert, find_soft_cert};
use colsparse::experiments::{
    column_ratio, emit_figure_data, generate_instance, l1_alternative_trial, measurement_op, run_sweep, run_trial,
    threshold_table, write_jsonl, write_sweep, ResultTable, JOBS_ENV,
};
use colsparse::rng::{derive_seed, GENERATOR_NAME};
use colsparse::statdim::{m_soft, mu_colstream, phi};
use colsparse::{Algorithm, ConeParams, Figure, InstanceSpec, SolverConfig};

#[derive(Parser)]
#[command(name = "colsparse", version, about = "Column-sparse matrix recovery toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Measurement thresholds: m_soft (α ≥ 0) or the streamlining μ (--rank).
    Statdim(StatdimArgs),
    /// Recover one random instance and print its trial record as JSON.
    Recover(RecoverArgs),
    /// Search for an exact or soft recovery certificate and print the report.
    Cert(CertArgs),
    /// Produce the data behind one figure.
    Sweep(SweepArgs),
    /// Vector ℓ₁: recovery or a vanishing support entry, on random instances.
    L1demo(L1Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum Column {
    Average,
    Large,
}

#[derive(Args)]
struct StatdimArgs {
    #[arg(long)]
    k: usize,
    #[arg(long)]
    s: usize,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha: f64,
    /// z_{i*} / ‖z‖₁; overrides --column.
    #[arg(long)]
    ratio: Option<f64>,
    #[arg(long, value_enum, default_value = "average")]
    column: Column,
    /// Report μ for the streamlined program with the true rank-r range.
    #[arg(long)]
    rank: Option<usize>,
    /// Also evaluate Φ at this τ.
    #[arg(long)]
    tau: Option<f64>,
}

#[derive(Args)]
struct InstanceArgs {
    #[arg(long, default_value_t = 10)]
    k: usize,
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 10)]
    s: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    seed: u64,
}

impl InstanceArgs {
    fn spec(&self) -> InstanceSpec {
        InstanceSpec {
            k: self.k,
            n: self.n,
            s: self.s,
            r: self.r,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct RecoverArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    /// l12, nast, streamline or nuclear.
    #[arg(long, default_value = "l12")]
    algorithm: String,
}

#[derive(Clone, Copy, ValueEnum)]
enum CertKind {
    Exact,
    Soft,
}

#[derive(Args)]
struct CertArgs {
    #[command(flatten)]
    instance: InstanceArgs,
    #[arg(long, value_enum, default_value = "exact")]
    kind: CertKind,
    #[arg(long, default_value_t = std::f64::consts::PI / 10.0)]
    alpha: f64,
    /// Column to certify; defaults to the largest.
    #[arg(long)]
    i_star: Option<usize>,
}

#[derive(Args)]
struct SweepArgs {
    /// fig3 … fig8.
    #[arg(long)]
    figure: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = JOBS_ENV)]
    jobs: Option<usize>,
    /// Comma-separated measurement counts replacing the figure's grid.
    #[arg(long, value_delimiter = ',')]
    m_values: Option<Vec<usize>>,
    /// Comma-separated ranks replacing the figure's ranks.
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
}

#[derive(Args)]
struct L1Args {
    #[arg(long, default_value_t = 200)]
    instances: usize,
    #[arg(long, default_value_t = 60)]
    n: usize,
    #[arg(long, default_value_t = 5)]
    s: usize,
    #[arg(long, default_value_t = 15)]
    m_min: usize,
    #[arg(long, default_value_t = 40)]
    m_max: usize,
    #[arg(long)]
    seed: u64,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Statdim(a) => statdim(a, &mut out),
        Command::Recover(a) => recover(a, &mut out),
        Command::Cert(a) => cert(a, &mut out),
        Command::Sweep(a) => sweep(a, &mut out),
        Command::L1demo(a) => l1demo(a, &mut out),
    }
}

fn statdim(a: StatdimArgs, out: &mut impl Write) -> Result<()> {
    let value = if let Some(r) = a.rank {
        let res = mu_colstream(a.k, a.s, a.n, r)?;
        json!({"k": a.k, "s": a.s, "n": a.n, "rank": r, "mu": res.m_value, "tau_star": res.tau_star})
    } else {
        let ratio = match a.ratio {
            Some(r) => r,
            None => column_ratio(
                match a.column {
                    Column::Average => "average",
                    Column::Large => "large",
                },
                a.s,
            )?,
        };
        let params = ConeParams::new(a.k, a.s, a.n, a.alpha, ratio)?;
        let res = m_soft(&params);
        let mut v = json!({
            "k": a.k, "s": a.s, "n": a.n, "alpha": a.alpha, "ratio": ratio,
            "sigma": params.sigma, "beta": params.beta,
            "m_value": res.m_value, "tau_star": res.tau_star, "unimodal": res.unimodal,
        });
        if let Some(t) = a.tau {
            v["phi_at_tau"] = json!(phi(&params, t));
        }
        v
    };
    writeln!(out, "{value}")?;
    Ok(())
}

fn recover(a: RecoverArgs, out: &mut impl Write) -> Result<()> {
    let algorithm: Algorithm = a.algorithm.parse()?;
    let rec = run_trial(&a.instance.spec(), a.instance.m, 0, algorithm, &Default::default());
    writeln!(out, "{}", serde_json::to_string(&rec)?)?;
    Ok(())
}

fn cert(a: CertArgs, out: &mut impl Write) -> Result<()> {
    let spec = a.instance.spec();
    let inst = generate_instance(&spec)?;
    let op = measurement_op(&spec, a.instance.m)?;
    let cfg = SolverConfig::default();
    let value = match a.kind {
        CertKind::Exact => match find_exact_cert(&op, &inst.polar, &inst.support, &cfg)? {
            Some(p) => json!({"found": true, "report": check_exact_cert(&op, &inst.polar, &inst.support, &p)?}),
            None => json!({"found": false}),
        },
        CertKind::Soft => {
            let w = inst.polar.weights();
            let i_star = match a.i_star {
                Some(i) => i,
                None => (0..w.len()).max_by(|&x, &y| w[x].total_cmp(&w[y])).context("empty instance")?,
            };
            match find_soft_cert(&op, &inst.polar, &inst.support, i_star, a.alpha, &cfg)? {
                Some(p) => {
                    let report = check_soft_cert(&op, &inst.polar, &inst.support, i_star, a.alpha, &p)?;
                    json!({"found": true, "report": serde_json::from_str::<serde_json::Value>(&report.to_json())?})
                }
                None => json!({"found": false, "i_star": i_star}),
            }
        }
    };
    writeln!(out, "{value}")?;
    Ok(())
}

fn sweep(a: SweepArgs, out: &mut impl Write) -> Result<()> {
    let fig: Figure = a.figure.parse()?;
    std::fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    let data_path = a.out.join(format!("{}.csv", fig.name()));
    if let Some(mut cfg) = fig.sweep(a.trials, a.seed) {
        cfg.jobs = a.jobs;
        if let Some(m) = a.m_values {
            cfg.m_values = m;
        }
        if let Some(r) = a.ranks {
            cfg.ranks = r;
        }
        let records = run_sweep(&cfg)?;
        write_sweep(&a.out, &cfg, &records)?;
        let table = ResultTable::from_trials(&records);
        emit_figure_data(&table, fig, File::create(&data_path)?)?;
        let failed = records.iter().filter(|r| r.error.is_some()).count();
        writeln!(
            out,
            "{}",
            json!({"figure": fig.name(), "master_seed": a.seed, "generator": GENERATOR_NAME,
                   "records": records.len(), "failed": failed, "data": data_path})
        )?;
    } else {
        if a.m_values.is_some() || a.ranks.is_some() {
            bail!("{} is computed from thresholds; --m-values and --ranks do not apply", fig.name());
        }
        let table = threshold_table(fig)?;
        table.write_csv(File::create(a.out.join("thresholds.csv"))?)?;
        emit_figure_data(&table, fig, File::create(&data_path)?)?;
        writeln!(
            out,
            "{}",
            json!({"figure": fig.name(), "master_seed": a.seed, "rows": table.len(), "data": data_path})
        )?;
    }
    Ok(())
}

fn l1demo(a: L1Args, out: &mut impl Write) -> Result<()> {
    if a.m_min > a.m_max {
        bail!("--m-min must not exceed --m-max");
    }
    let span = a.m_max - a.m_min + 1;
    let cfg = SolverConfig::default();
    let mut records = Vec::with_capacity(a.instances);
    for i in 0..a.instances {
        let m = a.m_min + i % span;
        records.push(l1_alternative_trial(a.n, a.s, m, derive_seed(a.seed, &[i as u64]), &cfg)?);
    }
    write_jsonl(&mut *out, &records)?;
    let holds = records.iter().filter(|r| r.holds).count();
    let recovered = records.iter().filter(|r| r.rel_error <= 1e-2).count();
    writeln!(
        out,
        "{}",
        json!({"summary": true, "master_seed": a.seed, "instances": records.len(), "recovered": recovered, "alternative_holds": holds})
    )?;
    Ok(())
}
