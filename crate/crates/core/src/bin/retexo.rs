use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};

use retexo::harness::{
    client_volumes_mb, cora_like, emit_figures_data, grid_search, run_on, synth_graph, train_seed, CoraLikeSpec,
    DatasetSource, ExperimentConfig, Family, FigureChannel, GridSpace, Protocol, RunReport, SplitConfig, SynthSpec,
};
use retexo::netsim::{read_event_log, CommLedger, ReportFormat};
use retexo::Error;

const DEFAULT_PATIENCE_STR: &str = "30";

#[derive(Parser)]
#[command(name = "retexo", version, about = "Baseline vs layer-wise GNN training over fully-distributed graphs")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one configuration over several seeds and print a report.
    Run {
        #[command(flatten)]
        exp: ExpArgs,
        /// Write the full JSON report here.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write the first seed's message log here.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Search learning rate and hidden size by validation loss.
    Grid {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long, value_delimiter = ',')]
        lrs: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        hiddens: Option<Vec<usize>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a graph bundle.
    Synth {
        /// Output directory.
        out: PathBuf,
        /// Generate the citation-network surrogate instead of a block model.
        #[arg(long)]
        cora_like: bool,
        #[arg(long, default_value_t = 500)]
        nodes: usize,
        #[arg(long, default_value_t = 5)]
        classes: usize,
        #[arg(long, default_value_t = 0.8)]
        homophily: f64,
        #[arg(long, default_value_t = 32)]
        feature_dim: usize,
        #[arg(long, default_value_t = 6.0)]
        avg_degree: f64,
        #[arg(long, default_value_t = 1.0)]
        feature_noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print communication tables from saved reports or a message log, and
    /// optionally write per-client figure data.
    Report {
        /// Run reports written by `run --out`.
        reports: Vec<PathBuf>,
        /// Message log written by `run --events`.
        #[arg(long)]
        events: Option<PathBuf>,
        #[arg(long, default_value = "csv")]
        format: String,
        #[arg(long)]
        bits: bool,
        /// Directory for `Sno,node` CSVs, one per report.
        #[arg(long)]
        figures: Option<PathBuf>,
        #[arg(long, default_value = "both")]
        channel: String,
    },
}

#[derive(Args)]
struct ExpArgs {
    /// JSON config file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    protocol: Option<String>,
    /// Bundle directory (default: Cora via RETEXO_CORA_DIR, else the surrogate).
    #[arg(long)]
    bundle: Option<PathBuf>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    rounds: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    repeats: Option<usize>,
    /// Stop a model after this many non-improving rounds (30 if no value).
    #[arg(long, num_args = 0..=1, default_missing_value = DEFAULT_PATIENCE_STR)]
    early_stop: Option<usize>,
    #[arg(long)]
    edge_keep: Option<f64>,
    #[arg(long)]
    inductive: bool,
    #[arg(long)]
    bits: bool,
}

impl ExpArgs {
    fn config(&self) -> retexo::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_file(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(a) = &self.arch {
            c.arch = a.parse::<Family>()?;
        }
        if let Some(p) = &self.protocol {
            c.protocol = p.parse::<Protocol>()?;
        }
        if let Some(b) = &self.bundle {
            c.dataset = DatasetSource::Bundle { path: b.clone() };
        }
        macro_rules! set {
            ($($f:ident => $t:ident),*) => { $(if let Some(v) = self.$f { c.$t = v; })* };
        }
        set!(layers => num_layers, rounds => rounds, heads => heads, seed => seed, repeats => repeats, edge_keep => edge_keep);
        if self.lr.is_some() {
            c.lr = self.lr;
        }
        if self.hidden.is_some() {
            c.hidden = self.hidden;
        }
        if let Some(p) = self.early_stop {
            c.patience = Some(p);
        }
        if self.inductive {
            c.split = SplitConfig::Inductive;
        }
        c.bits |= self.bits;
        c.validate()?;
        Ok(c.resolved())
    }
}

fn write(path: &Path, text: &str) -> anyhow::Result<()> {
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn print_summary(r: &RunReport) {
    println!(
        "{} on {}: micro-F1 {:.4} ± {:.4} over {} seed(s), {:.1} s",
        r.label,
        r.dataset,
        r.micro_f1_mean,
        r.micro_f1_std,
        r.seeds.len(),
        r.wall_time_secs
    );
    let l = r.ledger();
    println!("  c2c {} B ({:.4} MB), c2s {} B ({:.4} MB)", l.c2c_bytes, l.c2c_mb, l.c2s_bytes, l.c2s_mb);
    if let (Some(a), Some(b)) = (l.c2c_mbit, l.c2s_mbit) {
        println!("  c2c {a:.4} Mbit, c2s {b:.4} Mbit");
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Command::Run { exp, out, events } => {
            let cfg = exp.config()?;
            let (g, name) = cfg.dataset.load()?;
            let report = run_on(&g, &name, &cfg)?;
            print_summary(&report);
            if let Some(p) = out {
                write(&p, &report.to_json())?;
            }
            if let Some(p) = events {
                let mut logged = cfg.clone();
                logged.log_events = true;
                let (_, trained) = train_seed(&g, &logged, cfg.repeat_seed(0))?;
                trained.ledger().write_event_log(&p)?;
            }
        }
        Command::Grid { exp, lrs, hiddens, out } => {
            let cfg = exp.config()?;
            let mut space = GridSpace::default();
            if let Some(l) = lrs {
                space.lrs = l;
            }
            if let Some(h) = hiddens {
                space.hiddens = h;
            }
            let (g, name) = cfg.dataset.load()?;
            let result = grid_search(&g, &name, &cfg, &space)?;
            for p in &result.evaluated {
                println!("lr {:<6} hidden {:<4} val_loss {:.5}", p.lr, p.hidden, p.val_loss);
            }
            println!("best: lr {} hidden {}", result.best_point.lr, result.best_point.hidden);
            if let Some(p) = out {
                write(&p, &serde_json::to_string_pretty(&result)?)?;
            }
        }
        Command::Synth {
            out,
            cora_like: cora,
            nodes,
            classes,
            homophily,
            feature_dim,
            avg_degree,
            feature_noise,
            seed,
        } => {
            let g = if cora {
                cora_like(&CoraLikeSpec { seed, ..Default::default() })?
            } else {
                synth_graph(&SynthSpec::new(nodes, classes, homophily, feature_dim, avg_degree, seed).with_noise(feature_noise))?
            };
            g.save(&out)?;
            println!(
                "wrote {} nodes, {} directed edge entries, homophily {:.3} to {}",
                g.num_nodes(),
                g.adjacency.directed_edge_count(),
                g.edge_homophily(),
                out.display()
            );
        }
        Command::Report {
            reports,
            events,
            format,
            bits,
            figures,
            channel,
        } => {
            let format: ReportFormat = format.parse()?;
            let channel: FigureChannel = channel.parse()?;
            if let Some(p) = events {
                let log = read_event_log(&p)?;
                let ledger = CommLedger::replay(&log, Default::default());
                print!("{}", ledger.report(format, bits)?);
            }
            let mut loaded = Vec::with_capacity(reports.len());
            for p in &reports {
                let text = std::fs::read_to_string(p).map_err(|e| Error::Io {
                    path: p.clone(),
                    source: e,
                })?;
                loaded.push(RunReport::from_json(&text).map_err(|e| Error::InvalidBundle(format!("{}: {e}", p.display())))?);
            }
            for r in &loaded {
                print_summary(r);
                let v = client_volumes_mb(r, channel);
                if let Some(max) = v.first() {
                    println!("  busiest client {max:.4} MB, median {:.4} MB", v[v.len() / 2]);
                }
            }
            if let Some(dir) = figures {
                for p in emit_figures_data(&loaded, &dir, channel)? {
                    println!("wrote {}", p.display());
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<Error>().map_or(1, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
