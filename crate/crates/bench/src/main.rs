use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use jtscd_bench::{mix, run_experiment, write_outputs, ExperimentConfig};
use jtscd_core::citests::{OracleCi, ParCorr};
use jtscd_core::discovery::{run_variant, ColliderRule, DiscoveryConfig, Variant};
use jtscd_core::graph::target_graph;
use jtscd_core::pooling::{pool_data, PoolingOptions};
use jtscd_core::scm::io::{read_collection, write_collection, Sidecar};
use jtscd_core::scm::{generate_random_model, simplified_preset, simulate, ModelParams};

#[derive(Parser)]
#[command(name = "jtscd", version, about = "Causal discovery over multiple time-series datasets with context variables")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum CiArg {
    Parcorr,
    Oracle,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Standard,
    Majority,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a model and write M simulated datasets plus its graphs.
    Simulate {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        m: usize,
        #[arg(long, default_value_t = 200)]
        t: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        burn_in: usize,
        /// Use the two-variable preset instead of a random model.
        #[arg(long)]
        preset: bool,
        #[arg(long, default_value_t = 5)]
        n_system: usize,
        #[arg(long, default_value_t = 1)]
        n_temporal: usize,
        #[arg(long, default_value_t = 2)]
        n_spatial: usize,
        #[arg(long, default_value_t = 2)]
        max_lag: usize,
        #[arg(long, default_value_t = 0.5)]
        frac_observed: f64,
    },
    /// Run one method on a dataset directory and print the graph.
    Discover {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 2)]
        tau_max: usize,
        #[arg(long, value_enum, default_value = "parcorr")]
        ci: CiArg,
        #[arg(long, default_value = "jpcmci+", value_parser = parse_variant)]
        variant: Variant,
        #[arg(long, value_enum, default_value = "standard")]
        collider_rule: RuleArg,
        #[arg(long)]
        max_conds_dim: Option<usize>,
        #[arg(long)]
        always_condition_dummies: bool,
        /// Write the pooled design matrix to this CSV file.
        #[arg(long)]
        dump_pooled: Option<PathBuf>,
        /// Write the graph here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment grid from a JSON config.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    match run(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<ExitCode> {
    match cmd {
        Command::Simulate { out, m, t, seed, burn_in, preset, n_system, n_temporal, n_spatial, max_lag, frac_observed } => {
            let model_seed = mix(&[seed, 0]);
            let data_seed = mix(&[seed, 1]);
            let (spec, gt) = if preset {
                simplified_preset()
            } else {
                let params = ModelParams {
                    n_system,
                    n_temporal_ctx: n_temporal,
                    n_spatial_ctx: n_spatial,
                    max_lag,
                    frac_observed,
                    seed: model_seed,
                    ..Default::default()
                };
                generate_random_model(&params)?
            };
            let dc = simulate(&spec, m, t, burn_in, data_seed)?;
            let mut sidecar = Sidecar::describe(&dc);
            sidecar.spec = Some(spec);
            sidecar.model_seed = (!preset).then_some(model_seed);
            sidecar.data_seed = Some(data_seed);
            sidecar.burn_in = Some(burn_in);
            write_collection(&out, &dc, &sidecar)?;
            fs::write(out.join("ground_truth.txt"), gt.graph().to_string())?;
            fs::write(out.join("target_graph.txt"), target_graph(&gt).to_string())?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Discover {
            data,
            alpha,
            tau_max,
            ci,
            variant,
            collider_rule,
            max_conds_dim,
            always_condition_dummies,
            dump_pooled,
            out,
        } => {
            let cfg = DiscoveryConfig {
                alpha,
                tau_max,
                max_conds_dim,
                collider_rule: match collider_rule {
                    RuleArg::Standard => ColliderRule::Standard,
                    RuleArg::Majority => ColliderRule::Majority,
                },
                always_condition_dummies,
                ..Default::default()
            };
            let (dc, sidecar) = read_collection(&data).with_context(|| format!("reading {}", data.display()))?;
            let pd = pool_data(&dc, &PoolingOptions::new(2 * tau_max))?;
            if let Some(path) = &dump_pooled {
                pd.write_csv(path)?;
            }
            let roles = pd.roles();
            let result = match ci {
                CiArg::Parcorr => run_variant(variant, &ParCorr::new(&pd), &roles, &cfg)?,
                CiArg::Oracle => {
                    let spec = sidecar.spec.ok_or_else(|| anyhow!("the oracle needs the model stored in meta.json"))?;
                    let oracle = OracleCi::projected(&spec.ground_truth()?, true, 2 * tau_max)?;
                    if oracle.layout_roles() != roles {
                        bail!("stored model does not match the data layout");
                    }
                    run_variant(variant, &oracle, &roles, &cfg)?
                }
            };
            let text = result.graph.to_string();
            match out {
                Some(path) => fs::write(path, text)?,
                None => print!("{text}"),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Bench { config, out } => {
            let cfg: ExperimentConfig = match config {
                Some(path) => serde_json::from_str(&fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?)?,
                None => ExperimentConfig::default(),
            };
            let results = run_experiment(&cfg).map_err(|e| anyhow!(e))?;
            write_outputs(&results, &out)?;
            let failed = results.cells.iter().filter(|c| !c.failures.is_empty()).count();
            if failed > 0 {
                eprintln!("{failed} cell(s) had failed runs; see summary.md");
                return Ok(ExitCode::FAILURE);
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
