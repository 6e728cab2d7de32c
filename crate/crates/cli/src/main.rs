use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tabsynth::balance::{apply_plan, BalancePlan, KeepPolicy, Strategy, TargetPreset};
use tabsynth::classifiers::{self, ClassifierSpec, TrainedModel};
use tabsynth::ctgan::{fit_codecs, train_gan, Codecs, GanConfig, GanModel, TransformedTable};
use tabsynth::data::{
    class_distribution, parse_records, read_dataset, write_dataset, AttackMap, Preprocessor,
};
use tabsynth::eval::{weighted_metrics, ConfusionMatrix};
use tabsynth::gmm::GmmConfig;
use tabsynth::{ClassLabel, FeatureTable};
use tabsynth_cli::config::{ExperimentConfig, Overrides, Profile};
use tabsynth_cli::error::{RunError, RunResult};
use tabsynth_cli::experiment::{run_experiment, ExperimentReport};
use tabsynth_cli::export::export_predictions;
use tabsynth_cli::render::render_tables;

#[derive(Parser, Debug)]
#[command(name = "tabsynth", version, about = "Class balancing and intrusion-detection experiments")]
struct Cli {
    /// Experiment configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    profile: Option<Profile>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true)]
    repeats: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum BalanceKind {
    None,
    Random,
    Ctgan,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse raw records, fit the preprocessor on the training split and
    /// write encoded datasets.
    Ingest {
        #[arg(long)]
        train: PathBuf,
        /// Additional splits to encode with the training fit.
        #[arg(long)]
        test: Vec<PathBuf>,
        #[arg(long)]
        attack_map: Option<PathBuf>,
        /// Label-encode only; skip L2 scaling.
        #[arg(long)]
        no_normalize: bool,
    },
    /// Fit per-column mode codecs on an encoded dataset.
    FitCodecs {
        #[arg(long)]
        data: PathBuf,
    },
    /// Train a conditional GAN on an encoded dataset.
    TrainCtgan {
        #[arg(long)]
        data: PathBuf,
        /// Previously fitted codecs; fitted here otherwise.
        #[arg(long)]
        codecs: Option<PathBuf>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        batch_size: Option<usize>,
    },
    /// Sample rows from a trained GAN.
    Generate {
        #[arg(long)]
        model: PathBuf,
        /// Dataset whose column metadata the output uses.
        #[arg(long)]
        like: PathBuf,
        #[arg(long)]
        n: usize,
        /// Condition every row on this class.
        #[arg(long)]
        label: Option<String>,
    },
    /// Balance an encoded dataset.
    Balance {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        strategy: BalanceKind,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "equalize")]
        preset: Preset,
        #[arg(long)]
        subsample: bool,
    },
    /// Fit one classifier.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// dt, rf, nb, svm, fnn, lstm or cnn with default settings, or a
        /// JSON specification.
        #[arg(long)]
        classifier: String,
    },
    /// Confusion matrix and weighted metrics of a model on a dataset.
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
    /// Run the full experiment grid described by --config.
    Experiment,
    /// Re-render the tables of a finished run.
    Report {
        /// Run directory containing report.json.
        #[arg(long)]
        run: PathBuf,
    },
    /// Per-row predictions and class scores as CSV.
    ExportPredictions {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        data: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Preset {
    Equalize,
    #[value(name = "paper")]
    Reference,
}

fn data_err(path: &Path, e: impl std::fmt::Display) -> RunError {
    RunError::Data(format!("{}: {e}", path.display()))
}

fn open(path: &Path) -> RunResult<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| data_err(path, e))
}

fn create(path: &Path) -> RunResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| data_err(path, e))
}

fn load_table(path: &Path) -> RunResult<FeatureTable> {
    read_dataset(open(path)?).map_err(|e| data_err(path, e))
}

fn load_gan(path: &Path) -> RunResult<GanModel> {
    GanModel::load(&mut open(path)?).map_err(|e| data_err(path, e))
}

fn load_model(path: &Path) -> RunResult<TrainedModel> {
    TrainedModel::load(&mut open(path)?).map_err(|e| data_err(path, e))
}

impl Cli {
    fn overrides(&self) -> Overrides {
        Overrides {
            seed: self.seed,
            out: self.out.clone(),
            profile: self.profile,
            workers: self.workers,
            repeats: self.repeats,
        }
    }

    fn experiment_config(&self) -> RunResult<Option<ExperimentConfig>> {
        self.config
            .as_deref()
            .map(|p| ExperimentConfig::load(p, &self.overrides()))
            .transpose()
    }

    fn seed(&self) -> RunResult<u64> {
        if let Some(s) = self.seed {
            return Ok(s);
        }
        match self.experiment_config()? {
            Some(c) => Ok(c.seed),
            None => Err(RunError::Config("a seed is required (--seed or a config file)".into())),
        }
    }

    fn out_path(&self) -> RunResult<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| RunError::Config("--out is required for this command".into()))
    }

    fn gan_config(&self) -> RunResult<(GanConfig, GmmConfig)> {
        Ok(match self.experiment_config()? {
            Some(c) => (c.effective_gan(), c.gmm),
            None => (GanConfig::default(), GmmConfig::default()),
        })
    }
}

fn parse_spec(s: &str) -> RunResult<ClassifierSpec> {
    if s.trim_start().starts_with('{') {
        return serde_json::from_str(s).map_err(|e| RunError::Config(e.to_string()));
    }
    ClassifierSpec::defaults()
        .into_iter()
        .find(|c| c.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| RunError::Config(format!("unknown classifier {s}")))
}

fn parse_label(s: &str) -> RunResult<ClassLabel> {
    ClassLabel::ALL
        .into_iter()
        .find(|l| l.name().eq_ignore_ascii_case(s))
        .ok_or_else(|| RunError::Config(format!("unknown class {s}")))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> RunResult<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> RunResult<()> {
    match &cli.command {
        Command::Ingest {
            train,
            test,
            attack_map,
            no_normalize,
        } => {
            let out = cli.out_path()?;
            let map = match attack_map {
                Some(p) => AttackMap::parse(&fs::read_to_string(p).map_err(|e| RunError::Config(e.to_string()))?)?,
                None => AttackMap::shipped(),
            };
            let read = |p: &Path| parse_records(open(p)?).map_err(|e| data_err(p, e));
            let records = read(train)?;
            let pre = Preprocessor::fit(&records, map)?;
            let apply = |r: &[_]| if *no_normalize { pre.encode(r) } else { pre.transform(r) };
            fs::create_dir_all(out)?;
            write_json(&out.join("preprocessor.json"), &pre)?;
            for path in std::iter::once(train).chain(test) {
                let table = apply(&read(path)?)?;
                let stem = path.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned());
                let target = out.join(format!("{stem}.csv"));
                let mut w = create(&target)?;
                write_dataset(&mut w, &table)?;
                w.flush()?;
                let dist = class_distribution(&table);
                println!("{}: {} rows", target.display(), dist.total());
                for (label, pct) in ClassLabel::ALL.iter().zip(dist.percentages()) {
                    println!("  {:<7}{:>8}  {:.2}%", label.name(), dist.count(*label), pct);
                }
            }
        }
        Command::FitCodecs { data } => {
            let seed = cli.seed()?;
            let (_, gmm) = cli.gan_config()?;
            let codecs = fit_codecs(&load_table(data)?, &gmm, seed)?;
            write_json(cli.out_path()?, &codecs)?;
        }
        Command::TrainCtgan {
            data,
            codecs,
            epochs,
            batch_size,
        } => {
            let seed = cli.seed()?;
            let out = cli.out_path()?;
            let (mut config, gmm) = cli.gan_config()?;
            if let Some(e) = epochs {
                config.epochs = *e;
            }
            if let Some(b) = batch_size {
                config.batch_size = *b;
            }
            let table = load_table(data)?;
            let codecs: Codecs = match codecs {
                Some(p) => serde_json::from_reader(open(p)?).map_err(|e| data_err(p, e))?,
                None => fit_codecs(&table, &gmm, seed)?,
            };
            let transformed = TransformedTable::new(&codecs, &table, seed)?;
            let model = train_gan(&codecs, &transformed, &config, seed)?;
            let mut w = create(out)?;
            model.save(&mut w)?;
            w.flush()?;
            if let Some(last) = model.history().last() {
                println!("critic {:.6} generator {:.6}", last.critic, last.generator);
            }
        }
        Command::Generate { model, like, n, label } => {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cli.seed()?);
            let label = label.as_deref().map(parse_label).transpose()?;
            let gan = load_gan(model)?;
            let columns = load_table(like)?.columns().to_vec();
            let table = gan.generate_table(*n, label, &columns, &mut rng)?;
            let mut w = create(cli.out_path()?)?;
            write_dataset(&mut w, &table)?;
            w.flush()?;
        }
        Command::Balance {
            data,
            strategy,
            model,
            preset,
            subsample,
        } => {
            let seed = cli.seed()?;
            let table = load_table(data)?;
            let preset = match preset {
                Preset::Equalize => TargetPreset::Equalize,
                Preset::Reference => TargetPreset::Reference,
            };
            let strategy = match strategy {
                BalanceKind::None => Strategy::None,
                BalanceKind::Random => Strategy::RandomOversample,
                BalanceKind::Ctgan => Strategy::Ctgan,
            };
            let plan = BalancePlan {
                strategy,
                targets: (strategy != Strategy::None).then(|| preset.targets(&table.class_counts())),
                keep: if *subsample { KeepPolicy::Subsample } else { KeepPolicy::RetainAll },
                seed,
            };
            let gan = model.as_deref().map(load_gan).transpose()?;
            let (out_table, manifest) = apply_plan(&table, &plan, gan.as_ref())?;
            let out = cli.out_path()?;
            let mut w = create(out)?;
            write_dataset(&mut w, &out_table)?;
            w.flush()?;
            let mut m = create(&out.with_extension("manifest.json"))?;
            manifest.write(&mut m)?;
            m.flush()?;
        }
        Command::Train { data, classifier } => {
            let spec = parse_spec(classifier)?;
            let seed = cli.seed()?;
            let model = classifiers::fit(&spec, &load_table(data)?, seed)?;
            let mut w = create(cli.out_path()?)?;
            model.save(&mut w)?;
            w.flush()?;
        }
        Command::Evaluate { model, data } => {
            let model = load_model(model)?;
            let table = load_table(data)?;
            let pred = model.predict(&table)?;
            let confusion = ConfusionMatrix::from_labels(table.labels(), &pred)?;
            let metrics = weighted_metrics(&confusion)?;
            let names: Vec<&str> = ClassLabel::ALL.iter().map(|l| l.name()).collect();
            let mut stdout = std::io::stdout().lock();
            confusion.write_csv(&mut stdout, &names)?;
            write!(stdout, "{}", metrics.to_key_values(&names))?;
        }
        Command::Experiment => {
            let cfg = cli
                .experiment_config()?
                .ok_or_else(|| RunError::Config("experiment needs --config".into()))?;
            let report = run_experiment(&cfg)?;
            print!("{}", render_tables(&report));
            let failed = report.failed_cells();
            if failed > 0 {
                return Err(RunError::Partial {
                    failed,
                    total: report.cells.len(),
                });
            }
        }
        Command::Report { run } => {
            let path = run.join("report.json");
            let report: ExperimentReport =
                serde_json::from_reader(open(&path)?).map_err(|e| data_err(&path, e))?;
            print!("{}", render_tables(&report));
        }
        Command::ExportPredictions { model, data } => {
            let model = load_model(model)?;
            let table = load_table(data)?;
            let mut w = create(cli.out_path()?)?;
            export_predictions(&model, &table, &mut w)?;
            w.flush()?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
