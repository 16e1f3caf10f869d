use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use isac_core::beamform::write_history_csv;
use isac_core::channel::draw_channels;
use isac_core::driver::{
    angle_grid, ao_solve, beampattern, sweep, ua_bench, write_beampattern_csv, write_trace_csv, AoResult, SweepParam,
    SweepRow, SweepTable, UaChoice,
};
use isac_core::error::{IsacError, Result};
use isac_core::llm::{write_transcript, ChatBackend, HttpBackend, LlmBackendConfig};
use isac_core::scene::{generate_scenario, SystemConfig};

#[derive(Parser)]
#[command(name = "isac", about = "Multi-cell ISAC user association and beamforming")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON configuration; missing keys take defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key, e.g. `--set K=2 --set pt_dbm=26`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve one scenario.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "brute")]
        ua: String,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Sweep one parameter over values, seeds and UA solvers.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// N | M | pt_dbm | epsilon_crb
        #[arg(long)]
        vary: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        seeds: Option<usize>,
        #[arg(long = "ua-list", value_delimiter = ',', default_value = "brute")]
        ua_list: Vec<String>,
    },
    /// Solve one scenario and write the transmit beampattern of every BS.
    Beampattern {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "brute")]
        ua: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Grid points over [0, π].
        #[arg(long)]
        angles: Option<usize>,
    },
    /// UA solvers alone on random SINR tables.
    UaBench {
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        #[arg(long, default_value_t = 6)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        tables: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "ua-list", value_delimiter = ',', default_value = "brute,gs,coalition,stub")]
        ua_list: Vec<String>,
    },
}

fn load_config(c: &Common) -> Result<SystemConfig> {
    let mut cfg = match &c.config {
        Some(p) => SystemConfig::from_json_file(p)?,
        None => SystemConfig::default(),
    };
    for o in &c.overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn backend_for(choices: &[UaChoice]) -> Result<Option<HttpBackend>> {
    if choices.contains(&UaChoice::Llm) {
        Ok(Some(HttpBackend::new(LlmBackendConfig::from_env())?))
    } else {
        Ok(None)
    }
}

fn parse_choices(list: &[String]) -> Result<Vec<UaChoice>> {
    list.iter().map(|s| s.parse()).collect()
}

fn solve_one(c: &Common, ua: &str, seed: Option<u64>) -> Result<(SystemConfig, AoResult)> {
    let mut cfg = load_config(c)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let choice: UaChoice = ua.parse()?;
    let be = backend_for(&[choice])?;
    let scn = generate_scenario(&cfg, cfg.seed)?;
    let ch = draw_channels(&scn, &cfg, cfg.seed);
    let r = ao_solve(&scn, &ch, &cfg, choice, be.as_ref().map(|b| b as &dyn ChatBackend))?;
    std::fs::create_dir_all(&c.out)?;
    if !r.llm_transcript.is_empty() {
        write_transcript(&c.out.join("transcript.jsonl"), &r.llm_transcript)?;
    }
    Ok((cfg, r))
}

fn report(r: &AoResult) {
    println!("UA solver      : {}", r.ua_method);
    println!("assignment     : {:?}", r.u_final.one_based());
    println!("sum rate       : {:.6e}", r.objective());
    println!("AO iterations  : {} (converged: {})", r.iterations, r.converged);
    for b in &r.constraint_report {
        println!(
            "BS {}: power {:.4e}/{:.4e} W, SNR margin {:+.2} dB, CRB {:.4e} (ε {:.3e}), residual {:.1e} [{}]",
            b.bs + 1,
            b.power,
            b.power_budget,
            b.snr_margin_db(),
            b.crb,
            b.epsilon,
            b.residual,
            if b.passes() { "ok" } else { "FAIL" }
        );
    }
}

fn write_run(out: &Path, cfg: &SystemConfig, r: &AoResult) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join("results.csv"))?;
    w.serialize(SweepRow::from_result(SweepParam::N, cfg.n as f64, cfg.seed, cfg.n, r))?;
    w.flush()?;
    write_trace_csv(&out.join("trace.csv"), &r.objective_trace)?;
    for (k, a) in r.admm.iter().enumerate() {
        write_history_csv(&out.join(format!("admm_bs{}.csv", k + 1)), &a.history)?;
    }
    std::fs::write(out.join("config.json"), cfg.to_json_string())?;
    Ok(())
}

fn audit_exit(pass: bool) -> ExitCode {
    if pass {
        ExitCode::SUCCESS
    } else {
        eprintln!("constraint audit failed");
        ExitCode::from(2)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.cmd {
        Cmd::Run { common, ua, seed } => {
            let (cfg, r) = solve_one(&common, &ua, seed)?;
            write_run(&common.out, &cfg, &r)?;
            report(&r);
            Ok(audit_exit(r.audit_passes()))
        }
        Cmd::Beampattern { common, ua, seed, angles } => {
            let (cfg, r) = solve_one(&common, &ua, seed)?;
            let grid = angle_grid(angles.unwrap_or(cfg.angle_grid_points));
            let per_bs = r
                .w_final
                .w
                .iter()
                .map(|w| beampattern(w, cfg.m, cfg.d_over_lambda, &grid))
                .collect::<Result<Vec<_>>>()?;
            write_beampattern_csv(&common.out.join("beampattern.csv"), &grid, &per_bs)?;
            write_run(&common.out, &cfg, &r)?;
            report(&r);
            Ok(audit_exit(r.audit_passes()))
        }
        Cmd::Sweep { common, vary, values, seeds, ua_list } => {
            let cfg = load_config(&common)?;
            let vary: SweepParam = vary.parse()?;
            let choices = parse_choices(&ua_list)?;
            let be = backend_for(&choices)?;
            let table: SweepTable = sweep(
                &cfg,
                vary,
                &values,
                seeds.unwrap_or(cfg.n_seeds),
                &choices,
                be.as_ref().map(|b| b as &dyn ChatBackend),
            )?;
            std::fs::create_dir_all(&common.out)?;
            table.write_csv(&common.out.join("results.csv"))?;
            table.write_means_csv(&common.out.join("means.csv"))?;
            println!(
                "{:>12} {:>14} {:>6} {:>14} {:>14} {:>6}",
                vary.name(),
                "solver",
                "seeds",
                "sum_rate",
                "per_cu",
                "fails"
            );
            for m in table.means() {
                println!(
                    "{:>12} {:>14} {:>6} {:>14.6e} {:>14.6e} {:>6}",
                    m.value, m.solver, m.seeds, m.mean_sum_rate, m.mean_per_cu_rate, m.audit_failures
                );
            }
            Ok(audit_exit(table.rows.iter().all(|r| r.audit_pass)))
        }
        Cmd::UaBench { out, k, n, tables, seed, ua_list } => {
            let choices = parse_choices(&ua_list)?;
            let be = backend_for(&choices)?;
            let rows = ua_bench(k, n, tables, seed, &choices, be.as_ref().map(|b| b as &dyn ChatBackend))?;
            std::fs::create_dir_all(&out)?;
            let mut w = csv::Writer::from_path(out.join("ua_bench.csv"))?;
            for r in &rows {
                w.serialize(r)?;
            }
            w.flush()?;
            for c in &choices {
                let rs: Vec<_> = rows.iter().filter(|r| r.solver == c.tag()).collect();
                let mean = rs.iter().map(|r| r.ratio_to_optimum).sum::<f64>() / rs.len().max(1) as f64;
                let within = rs.iter().filter(|r| r.ratio_to_optimum >= 0.98).count();
                println!("{:>14}: mean ratio {:.4}, within 2% on {}/{}", c.tag(), mean, within, rs.len());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                IsacError::Config(_) => ExitCode::from(64),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
