use std::fs::File;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::Rng;

use uavloc::harness::{
    cnn_errors, evaluate, generate_dataset, lstm_errors, run_episode, scenario_matrix, train_cnn, train_lstm,
    write_eval_csv, Config, Dataset, EstimatorKind, Models, PredictorKind,
};
use uavloc::learning::Model;
use uavloc::par::Exec;
use uavloc::protocol::{run_exchange, CatcherFsm, UeFsm};
use uavloc::ranging::{gen_zc, measure_range, Correlator, RangingConfig};

#[derive(Parser)]
#[command(name = "uavloc", version, about = "Single-anchor UAV localization simulator")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML config; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for ranging noise, mobility and weight init.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    estimator: Option<EstimatorKind>,
    #[arg(long, global = true)]
    revolutions: Option<usize>,
    /// Run batch work on the calling thread only.
    #[arg(long, global = true)]
    sequential: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate revolutions and write a training dataset.
    GenerateDataset {
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Train the track estimator on a dataset.
    TrainCnn {
        /// Defaults to `<out>/dataset.bin`.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Train the trajectory forecaster on a dataset.
    TrainLstm {
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Run one closed-loop episode.
    Simulate {
        #[arg(long)]
        predictor: Option<String>,
    },
    /// Run the scenario sweeps and write raw per-episode rows.
    Evaluate {
        #[arg(long, default_value_t = 5)]
        episodes: usize,
    },
    /// Estimate fractional delays of noisy reference-signal captures.
    RangeDemo {
        #[arg(long, default_value_t = 200)]
        trials: usize,
    },
    /// Print the identity-capture exchange with a ground UE.
    ProtocolDemo {
        #[arg(long, default_value = "001010123456789")]
        imsi: String,
    },
}

impl Common {
    fn load(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p)?,
            None => Config::default(),
        };
        if let Some(s) = self.seed {
            cfg.episode.seed = s;
            cfg.mobility.seed = s;
            cfg.learning.train.seed = s;
        }
        if let Some(e) = self.estimator {
            cfg.episode.estimator = e;
        }
        if let Some(r) = self.revolutions {
            cfg.episode.revolutions = r;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn exec(&self) -> Exec {
        if self.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        }
    }

    fn out_file(&self, name: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        Ok(self.out.join(name))
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    match v.len() {
        0 => f64::NAN,
        n if n % 2 == 1 => v[n / 2],
        n => 0.5 * (v[n / 2 - 1] + v[n / 2]),
    }
}

fn load_dataset(common: &Common, path: &Option<PathBuf>) -> Result<Dataset> {
    let p = path.clone().unwrap_or_else(|| common.out.join("dataset.bin"));
    Dataset::load(&p).with_context(|| format!("loading dataset {}", p.display()))
}

fn write_curve(report: &uavloc::learning::TrainReport, path: &Path) -> Result<()> {
    report.write_csv(File::create(path)?)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let c = &cli.common;
    let mut cfg = c.load()?;
    let exec = c.exec();
    match cli.command {
        Command::GenerateDataset { samples } => {
            let n = samples.unwrap_or(cfg.dataset.n_samples);
            let ds = generate_dataset(&cfg, n, cfg.episode.seed, exec)?;
            let p = c.out_file("dataset.bin")?;
            ds.save(&p)?;
            println!("wrote {n} samples to {}", p.display());
        }
        Command::TrainCnn { dataset, epochs } => {
            if let Some(e) = epochs {
                cfg.learning.train.epochs = e;
            }
            let ds = load_dataset(c, &dataset)?;
            let t = train_cnn(&cfg, &ds, exec)?;
            let p = c.out_file("cnn.bin")?;
            t.model.save(&p)?;
            write_curve(&t.report, &c.out_file("cnn_curve.csv")?)?;
            let errs = cnn_errors(&t.model, &ds, &t.split.test, exec)?;
            println!(
                "best epoch {}, test median error {:.2} m, median SI {:.3}; wrote {}",
                t.report.best_epoch,
                median(errs.iter().map(|e| e.mean).collect()),
                median(errs.iter().map(|e| e.si).collect()),
                p.display()
            );
        }
        Command::TrainLstm { dataset, epochs } => {
            if let Some(e) = epochs {
                cfg.learning.train.epochs = e;
            }
            let ds = load_dataset(c, &dataset)?;
            let t = train_lstm(&cfg, &ds, exec)?;
            let p = c.out_file("lstm.bin")?;
            t.model.save(&p)?;
            write_curve(&t.report, &c.out_file("lstm_curve.csv")?)?;
            let errs = lstm_errors(&t.model, &ds, &t.split.test, exec)?;
            println!(
                "best epoch {}, test median forecast error {:.2} m; wrote {}",
                t.report.best_epoch,
                median(errs.iter().map(|e| e.mean).collect()),
                p.display()
            );
        }
        Command::Simulate { predictor } => {
            if let Some(p) = predictor {
                cfg.episode.predictor = match p.as_str() {
                    "lstm" => PredictorKind::Lstm,
                    "persistence" => PredictorKind::Persistence,
                    other => anyhow::bail!("unknown predictor {other:?}"),
                };
            }
            let models = Models::from_config(&cfg)?;
            let log = run_episode(&cfg, &models)?;
            log.write_all(&c.out)?;
            print!("{}", log.summary_json());
        }
        Command::Evaluate { episodes } => {
            let models = Models::from_config(&cfg)?;
            let estimators = match c.estimator {
                Some(e) => vec![e],
                None => {
                    let mut v = vec![EstimatorKind::Greedy, EstimatorKind::DpOracle, EstimatorKind::MultilatBaseline];
                    if models.cnn.is_some() {
                        v.insert(0, EstimatorKind::Cnn);
                    }
                    v
                }
            };
            let rows = evaluate(&scenario_matrix(&cfg), &estimators, episodes, &models, exec)?;
            let p = c.out_file("eval.csv")?;
            write_eval_csv(&rows, File::create(&p)?)?;
            println!("wrote {} rows to {}", rows.len(), p.display());
        }
        Command::RangeDemo { trials } => range_demo(&cfg, trials, c)?,
        Command::ProtocolDemo { imsi } => {
            let ue = UeFsm::new(&imsi, "guti-0001", 1)?;
            let catcher = CatcherFsm::new(99, 1)?;
            let out = run_exchange(&ue, &catcher)?;
            let log = out.transcript.to_log();
            std::fs::write(c.out_file("transcript.txt")?, &log)?;
            print!("{log}");
        }
    }
    Ok(())
}

/// Sweeps upsampling factor and SNR; one CSV row per capture.
fn range_demo(cfg: &Config, trials: usize, c: &Common) -> Result<()> {
    let base = cfg.ranging.signal;
    let zc = gen_zc(base.root_q, base.n_zc)?;
    let mut rng = uavloc::rng::from_seed(cfg.episode.seed);
    let mut w = csv::Writer::from_path(c.out_file("range_demo.csv")?)?;
    w.write_record(["true_delay", "estimated_delay", "K", "snr_db"])?;
    for k in [1, 2, 4, 8] {
        let rc = RangingConfig { upsample_k: k, ..base };
        let corr = Correlator::new(zc.len(), k);
        for snr in [0.0, 10.0, 20.0] {
            let mut sq = 0.0;
            for _ in 0..trials {
                let delay = rng.random::<f64>() * 100.0;
                let est = measure_range(&corr, &zc, delay * rc.meters_per_sample(), snr, &rc, &mut rng)?;
                sq += (est.delay_samples - delay).powi(2);
                w.write_record([delay.to_string(), est.delay_samples.to_string(), k.to_string(), snr.to_string()])?;
            }
            println!("K={k} snr={snr:>4} dB rms delay error {:.3} samples", (sq / trials as f64).sqrt());
        }
    }
    w.flush()?;
    Ok(())
}

fn main() {
    if let Err(e) = run(Cli::parse()) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
