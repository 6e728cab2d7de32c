//! End-to-end experiment: preprocess, build each training arm, fit every
//! classifier on every arm, evaluate on every test set, compare arms.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::seq::index::sample;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use tabsynth::balance::{apply_plan, BalancePlan, Strategy, Targets};
use tabsynth::classifiers::{self, ClassifierSpec};
use tabsynth::ctgan::{fit_codecs, train_gan, GanModel, TransformedTable};
use tabsynth::data::{parse_records, write_dataset, AttackMap, Preprocessor, RawRecord};
use tabsynth::eval::{compare_experiments, weighted_metrics, ClassMetrics, ConfusionMatrix, MetricReport};
use tabsynth::hash::{derive_seed, sha256_hex};
use tabsynth::{ClassLabel, FeatureTable};

use crate::config::{Arm, ExperimentConfig, Profile};
use crate::error::{RunError, RunResult};
use crate::render::render_tables;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub role: String,
    pub name: String,
    /// SHA-256 of the input file.
    pub sha256: String,
    /// Rows used after any subsampling.
    pub rows: usize,
    pub class_counts: Targets,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum CellOutcome {
    Ok {
        metrics: MetricReport,
        confusion: ConfusionMatrix,
    },
    Failed {
        error: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub arm: Arm,
    pub classifier: String,
    pub test_set: String,
    pub outcome: CellOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestReport {
    pub classifier: String,
    pub test_set: String,
    pub a: Arm,
    pub b: Arm,
    /// Absent when infinite or undefined.
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: Option<f64>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArmCounts {
    pub arm: Arm,
    pub counts: Option<Targets>,
}

/// Everything an experiment produced. Wall-clock timings live in a separate
/// file so the report itself is reproducible byte for byte.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config_hash: String,
    pub seed: u64,
    pub profile: Profile,
    pub repeats: usize,
    pub datasets: Vec<DatasetInfo>,
    pub arms: Vec<Arm>,
    pub classifiers: Vec<String>,
    pub test_sets: Vec<String>,
    pub training_counts: Vec<ArmCounts>,
    pub cells: Vec<CellReport>,
    pub ttests: Vec<TTestReport>,
}

impl ExperimentReport {
    pub fn cell(&self, arm: Arm, classifier: &str, test_set: &str) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.arm == arm && c.classifier == classifier && c.test_set == test_set)
    }

    pub fn failed_cells(&self) -> usize {
        self.cells
            .iter()
            .filter(|c| matches!(c.outcome, CellOutcome::Failed { .. }))
            .count()
    }

    pub fn ttest(&self, classifier: &str, test_set: &str, a: Arm, b: Arm) -> Option<&TTestReport> {
        self.ttests
            .iter()
            .find(|t| t.classifier == classifier && t.test_set == test_set && t.a == a && t.b == b)
    }
}

/// Preprocessed splits plus their provenance.
pub struct Prepared {
    pub preprocessor: Preprocessor,
    pub train: FeatureTable,
    pub tests: Vec<(String, FeatureTable)>,
    pub datasets: Vec<DatasetInfo>,
}

/// Keeps `ceil(fraction * n_c)` records of every class `c`, in input order.
pub fn stratified_subsample(
    records: Vec<RawRecord>,
    map: &AttackMap,
    fraction: f64,
    seed: u64,
) -> tabsynth::Result<Vec<RawRecord>> {
    let mut by_class: [Vec<usize>; ClassLabel::COUNT] = Default::default();
    for (i, r) in records.iter().enumerate() {
        by_class[map.map(&r.attack_name)?.index()].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut keep = Vec::new();
    for rows in &by_class {
        let k = ((rows.len() as f64 * fraction).ceil() as usize).min(rows.len());
        keep.extend(sample(&mut rng, rows.len(), k).into_iter().map(|j| rows[j]));
    }
    keep.sort_unstable();
    let mut taken: Vec<Option<RawRecord>> = records.into_iter().map(Some).collect();
    Ok(keep.into_iter().filter_map(|i| taken[i].take()).collect())
}

fn read_records(path: &Path) -> RunResult<(Vec<RawRecord>, String)> {
    let bytes = fs::read(path).map_err(|e| RunError::Data(format!("{}: {e}", path.display())))?;
    let hash = sha256_hex(&bytes);
    let records = parse_records(bytes.as_slice()).map_err(|e| RunError::Data(format!("{}: {e}", path.display())))?;
    Ok((records, hash))
}

pub fn prepare(cfg: &ExperimentConfig) -> RunResult<Prepared> {
    let map = match &cfg.data.attack_map {
        Some(p) => AttackMap::parse(&fs::read_to_string(p)?).map_err(|e| RunError::Config(e.to_string()))?,
        None => AttackMap::shipped(),
    };
    let (mut train_records, train_hash) = read_records(&cfg.data.train)?;
    if cfg.profile == Profile::Desk {
        let seed = derive_seed(cfg.seed, "desk/subsample");
        train_records = stratified_subsample(train_records, &map, cfg.desk.fraction, seed)?;
    }
    let preprocessor = Preprocessor::fit(&train_records, map)?;
    let apply = |r: &[RawRecord]| {
        if cfg.preprocess.normalize {
            preprocessor.transform(r)
        } else {
            preprocessor.encode(r)
        }
    };
    let train = apply(&train_records)?;
    let info = |role: &str, name: &str, sha256: String, t: &FeatureTable| DatasetInfo {
        role: role.into(),
        name: name.into(),
        sha256,
        rows: t.n_rows(),
        class_counts: t.class_counts(),
    };
    let mut datasets = vec![info("train", "train", train_hash, &train)];
    let mut tests = Vec::new();
    for t in &cfg.data.tests {
        let (recs, hash) = read_records(&t.path)?;
        let table = apply(&recs)?;
        datasets.push(info("test", &t.name, hash, &table));
        tests.push((t.name.clone(), table));
    }
    Ok(Prepared {
        preprocessor,
        train,
        tests,
        datasets,
    })
}

/// Hash of everything that determines results: the configuration without
/// output location or worker count, with file paths replaced by content
/// hashes.
pub fn config_hash(cfg: &ExperimentConfig, datasets: &[DatasetInfo]) -> RunResult<String> {
    let mut v = serde_json::to_value(cfg)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("out");
        obj.remove("workers");
        obj.insert(
            "data".into(),
            serde_json::to_value(
                datasets
                    .iter()
                    .map(|d| (d.role.clone(), d.name.clone(), d.sha256.clone()))
                    .collect::<Vec<_>>(),
            )?,
        );
        if let Some(map) = &cfg.data.attack_map {
            obj.insert("attack_map".into(), sha256_hex(&fs::read(map)?).into());
        }
    }
    Ok(sha256_hex(&serde_json::to_vec(&v)?))
}

/// Key of everything upstream of the classifiers.
fn data_key(cfg: &ExperimentConfig, datasets: &[DatasetInfo]) -> RunResult<String> {
    let v = serde_json::json!({
        "datasets": datasets,
        "seed": cfg.seed,
        "profile": cfg.profile,
        "desk": cfg.desk,
        "preprocess": cfg.preprocess,
        "balance": cfg.balance,
        "gmm": cfg.gmm,
        "ctgan": cfg.effective_gan(),
    });
    Ok(sha256_hex(&serde_json::to_vec(&v)?))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct EvalRecord {
    test_set: String,
    confusion: ConfusionMatrix,
    metrics: MetricReport,
    /// One character per test row: `1` correct, `0` wrong.
    correct: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct CellRecord {
    key: String,
    arm: Arm,
    classifier: usize,
    repeat: usize,
    train_counts: Targets,
    evals: Vec<EvalRecord>,
}

#[derive(Clone, Copy, Debug)]
struct Job {
    arm: Arm,
    classifier: usize,
    repeat: usize,
}

fn cell_key(data_key: &str, job: &Job, spec: &ClassifierSpec, tests: &[String]) -> RunResult<String> {
    let v = serde_json::json!({
        "data": data_key,
        "arm": job.arm,
        "classifier": spec,
        "index": job.classifier,
        "repeat": job.repeat,
        "tests": tests,
    });
    Ok(sha256_hex(&serde_json::to_vec(&v)?))
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect()
}

fn write_file(path: &Path, bytes: &[u8]) -> RunResult<()> {
    fs::write(path, bytes).map_err(|e| RunError::Data(format!("{}: {e}", path.display())))
}

/// Output directory layout.
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    fn dir(&self, sub: &str) -> PathBuf {
        self.root.join(sub)
    }

    pub fn report(&self) -> PathBuf {
        self.root.join("report.json")
    }

    pub fn tables(&self) -> PathBuf {
        self.root.join("tables.txt")
    }

    pub fn model(&self, arm: Arm, name: &str, repeat: usize) -> PathBuf {
        self.dir("models")
            .join(format!("{}-{}-r{repeat}.model", file_safe(arm.label()), file_safe(name)))
    }

    pub fn gan(&self) -> PathBuf {
        self.dir("models").join("ctgan.ckpt")
    }

    fn create(&self) -> RunResult<()> {
        for d in ["cells", "models", "data", "confusion"] {
            fs::create_dir_all(self.dir(d))?;
        }
        Ok(())
    }
}

struct Stage {
    timings: BTreeMap<String, f64>,
}

impl Stage {
    fn time<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        *self.timings.entry(name.to_string()).or_default() += t.elapsed().as_secs_f64();
        out
    }
}

fn gan_model(cfg: &ExperimentConfig, train: &FeatureTable, key: &str, layout: &Layout) -> tabsynth::Result<GanModel> {
    let key_path = layout.gan().with_extension("key");
    if fs::read_to_string(&key_path).ok().as_deref() == Some(key) {
        if let Ok(f) = fs::File::open(layout.gan()) {
            if let Ok(m) = GanModel::load(&mut BufReader::new(f)) {
                return Ok(m);
            }
        }
    }
    let codecs = fit_codecs(train, &cfg.gmm, derive_seed(cfg.seed, "ctgan/codecs"))?;
    let data = TransformedTable::new(&codecs, train, derive_seed(cfg.seed, "ctgan/transform"))?;
    let model = train_gan(&codecs, &data, &cfg.effective_gan(), derive_seed(cfg.seed, "ctgan/train"))?;
    let mut w = BufWriter::new(fs::File::create(layout.gan())?);
    model.save(&mut w)?;
    w.flush()?;
    fs::write(key_path, key)?;
    Ok(model)
}

fn build_arm(
    arm: Arm,
    cfg: &ExperimentConfig,
    train: &FeatureTable,
    key: &str,
    config_hash: &str,
    layout: &Layout,
) -> tabsynth::Result<FeatureTable> {
    let targets = cfg.balance.targets_for(&train.class_counts());
    let (strategy, seed_name) = match arm {
        Arm::Org => (Strategy::None, "balance/none"),
        Arm::RndOSamp => (Strategy::RandomOversample, "balance/random"),
        Arm::CtganSamp => (Strategy::Ctgan, "balance/ctgan"),
    };
    let plan = BalancePlan {
        strategy,
        targets: (strategy != Strategy::None).then_some(targets),
        keep: cfg.balance.keep,
        seed: derive_seed(cfg.seed, seed_name),
    };
    let model = match arm {
        Arm::CtganSamp => Some(gan_model(cfg, train, key, layout)?),
        _ => None,
    };
    let (table, manifest) = apply_plan(train, &plan, model.as_ref())?;
    let stem = layout.dir("data").join(file_safe(arm.label()));
    let mut w = BufWriter::new(fs::File::create(stem.with_extension("csv"))?);
    write_dataset(&mut w, &table)?;
    w.flush()?;
    let sidecar = serde_json::json!({ "config_hash": config_hash, "manifest": manifest });
    fs::write(stem.with_extension("manifest.json"), serde_json::to_vec_pretty(&sidecar)?)?;
    Ok(table)
}

fn run_cell(
    job: &Job,
    spec: &ClassifierSpec,
    name: &str,
    key: &str,
    seed: u64,
    train: &FeatureTable,
    tests: &[(String, FeatureTable)],
    layout: &Layout,
) -> tabsynth::Result<CellRecord> {
    let model = classifiers::fit(spec, train, seed)?;
    let mut w = BufWriter::new(fs::File::create(layout.model(job.arm, name, job.repeat))?);
    model.save(&mut w)?;
    w.flush()?;
    let mut evals = Vec::with_capacity(tests.len());
    for (test_name, table) in tests {
        let pred = model.predict(table)?;
        let confusion = ConfusionMatrix::from_labels(table.labels(), &pred)?;
        let metrics = weighted_metrics(&confusion)?;
        let correct = table
            .labels()
            .iter()
            .zip(&pred)
            .map(|(t, p)| if t == p { '1' } else { '0' })
            .collect();
        evals.push(EvalRecord {
            test_set: test_name.clone(),
            confusion,
            metrics,
            correct,
        });
    }
    Ok(CellRecord {
        key: key.to_string(),
        arm: job.arm,
        classifier: job.classifier,
        repeat: job.repeat,
        train_counts: train.class_counts(),
        evals,
    })
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Per-metric median across repeats; the first repeat's confusion matrix.
fn aggregate(evals: &[&EvalRecord]) -> (MetricReport, ConfusionMatrix) {
    let first = evals[0];
    if evals.len() == 1 {
        return (first.metrics.clone(), first.confusion.clone());
    }
    let med = |f: &dyn Fn(&MetricReport) -> f64| median(evals.iter().map(|e| f(&e.metrics)).collect());
    let per_class = (0..first.metrics.per_class.len())
        .map(|k| {
            let pc = |f: &dyn Fn(&ClassMetrics) -> f64| {
                median(evals.iter().map(|e| f(&e.metrics.per_class[k])).collect())
            };
            ClassMetrics {
                precision: pc(&|c| c.precision),
                recall: pc(&|c| c.recall),
                f1: pc(&|c| c.f1),
                support: first.metrics.per_class[k].support,
                zero_division: evals.iter().any(|e| e.metrics.per_class[k].zero_division),
            }
        })
        .collect();
    let metrics = MetricReport {
        accuracy: med(&|m| m.accuracy),
        precision: med(&|m| m.precision),
        recall: med(&|m| m.recall),
        f1: med(&|m| m.f1),
        per_class,
        zero_division: evals.iter().any(|e| e.metrics.zero_division),
    };
    (metrics, first.confusion.clone())
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

/// Runs the whole grid, writing artifacts under `cfg.out`. Cell failures are
/// recorded in the report; the caller decides the exit status.
pub fn run_experiment(cfg: &ExperimentConfig) -> RunResult<ExperimentReport> {
    cfg.validate()?;
    let layout = Layout { root: cfg.out.clone() };
    layout.create()?;
    let mut stage = Stage {
        timings: BTreeMap::new(),
    };
    let prepared = stage.time("prepare", || prepare(cfg))?;
    let mut pre_json = serde_json::to_vec_pretty(&prepared.preprocessor)?;
    pre_json.push(b'\n');
    write_file(&layout.root.join("preprocessor.json"), &pre_json)?;
    let config_hash = config_hash(cfg, &prepared.datasets)?;
    let dkey = data_key(cfg, &prepared.datasets)?;
    let names = cfg.classifier_names();
    let test_names: Vec<String> = prepared.tests.iter().map(|(n, _)| n.clone()).collect();

    let mut jobs = Vec::new();
    for &arm in &cfg.arms {
        for classifier in 0..cfg.classifiers.len() {
            for repeat in 0..cfg.repeats {
                jobs.push(Job {
                    arm,
                    classifier,
                    repeat,
                });
            }
        }
    }
    let keys: Vec<String> = jobs
        .iter()
        .map(|j| cell_key(&dkey, j, &cfg.classifiers[j.classifier], &test_names))
        .collect::<RunResult<_>>()?;
    let cell_path = |key: &str| layout.dir("cells").join(format!("{key}.json"));
    let mut records: BTreeMap<String, Result<CellRecord, String>> = BTreeMap::new();
    for key in &keys {
        let cached = fs::read(cell_path(key))
            .ok()
            .and_then(|b| serde_json::from_slice::<CellRecord>(&b).ok())
            .filter(|r| &r.key == key);
        if let Some(r) = cached {
            records.insert(key.clone(), Ok(r));
        }
    }

    let mut arm_tables: BTreeMap<Arm, Result<FeatureTable, String>> = BTreeMap::new();
    for &arm in &cfg.arms {
        let needed = jobs
            .iter()
            .zip(&keys)
            .any(|(j, k)| j.arm == arm && !records.contains_key(k));
        if needed {
            let built = stage.time(&format!("arm/{}", arm.label()), || {
                build_arm(arm, cfg, &prepared.train, &dkey, &config_hash, &layout)
            });
            arm_tables.insert(arm, built.map_err(|e| e.to_string()));
        }
    }

    let pending: Vec<(&Job, &String)> = jobs.iter().zip(&keys).filter(|(_, k)| !records.contains_key(*k)).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| RunError::Config(e.to_string()))?;
    let started = Instant::now();
    let fresh: Vec<(String, Result<CellRecord, String>)> = pool.install(|| {
        pending
            .par_iter()
            .map(|&(job, key)| {
                let result = match &arm_tables[&job.arm] {
                    Err(e) => Err(format!("building {} failed: {e}", job.arm)),
                    Ok(train) => {
                        let seed = derive_seed(cfg.seed, &format!("classifier/{}/{}", job.classifier, job.repeat));
                        run_cell(
                            job,
                            &cfg.classifiers[job.classifier],
                            &names[job.classifier],
                            key,
                            seed,
                            train,
                            &prepared.tests,
                            &layout,
                        )
                        .map_err(|e| e.to_string())
                    }
                };
                (key.clone(), result)
            })
            .collect()
    });
    stage.timings.insert("cells".into(), started.elapsed().as_secs_f64());
    for (key, result) in fresh {
        if let Ok(r) = &result {
            write_file(&cell_path(&key), &serde_json::to_vec(r)?)?;
        }
        records.insert(key, result);
    }

    let mut report = ExperimentReport {
        config_hash: config_hash.clone(),
        seed: cfg.seed,
        profile: cfg.profile,
        repeats: cfg.repeats,
        datasets: prepared.datasets.clone(),
        arms: cfg.arms.clone(),
        classifiers: names.clone(),
        test_sets: test_names.clone(),
        training_counts: Vec::new(),
        cells: Vec::new(),
        ttests: Vec::new(),
    };
    let lookup = |arm: Arm, ci: usize, repeat: usize| -> &Result<CellRecord, String> {
        let i = jobs
            .iter()
            .position(|j| j.arm == arm && j.classifier == ci && j.repeat == repeat)
            .expect("job exists");
        &records[&keys[i]]
    };
    for &arm in &cfg.arms {
        let counts = (0..cfg.classifiers.len())
            .find_map(|ci| lookup(arm, ci, 0).as_ref().ok().map(|r| r.train_counts));
        report.training_counts.push(ArmCounts { arm, counts });
    }
    for (ti, test) in test_names.iter().enumerate() {
        for &arm in &cfg.arms {
            for (ci, name) in names.iter().enumerate() {
                let runs: Result<Vec<&EvalRecord>, String> = (0..cfg.repeats)
                    .map(|r| lookup(arm, ci, r).as_ref().map(|c| &c.evals[ti]).map_err(Clone::clone))
                    .collect();
                let outcome = match runs {
                    Ok(evals) => {
                        let (metrics, confusion) = aggregate(&evals);
                        CellOutcome::Ok { metrics, confusion }
                    }
                    Err(error) => CellOutcome::Failed { error },
                };
                report.cells.push(CellReport {
                    arm,
                    classifier: name.clone(),
                    test_set: test.clone(),
                    outcome,
                });
            }
        }
        for (ci, name) in names.iter().enumerate() {
            for (i, &a) in cfg.arms.iter().enumerate() {
                for &b in &cfg.arms[i + 1..] {
                    let pair = (lookup(a, ci, 0), lookup(b, ci, 0));
                    let mut row = TTestReport {
                        classifier: name.clone(),
                        test_set: test.clone(),
                        a,
                        b,
                        t: None,
                        df: None,
                        p: None,
                        error: None,
                    };
                    match pair {
                        (Ok(x), Ok(y)) => {
                            let bits = |s: &str| s.bytes().map(|c| c == b'1').collect::<Vec<bool>>();
                            match compare_experiments(&bits(&x.evals[ti].correct), &bits(&y.evals[ti].correct)) {
                                Ok(t) => {
                                    row.t = finite(t.t);
                                    row.df = finite(t.df);
                                    row.p = finite(t.p);
                                }
                                Err(e) => row.error = Some(e.to_string()),
                            }
                        }
                        _ => row.error = Some("a compared cell failed".into()),
                    }
                    report.ttests.push(row);
                }
            }
        }
    }

    write_outputs(&report, &layout)?;
    let mut timings = serde_json::to_vec_pretty(&stage.timings)?;
    timings.push(b'\n');
    write_file(&layout.root.join("timings.json"), &timings)?;
    Ok(report)
}

fn write_outputs(report: &ExperimentReport, layout: &Layout) -> RunResult<()> {
    let mut json = serde_json::to_vec_pretty(report)?;
    json.push(b'\n');
    write_file(&layout.report(), &json)?;
    let stamp = format!("# config {}\n", report.config_hash);
    write_file(&layout.tables(), format!("{stamp}{}", render_tables(report)).as_bytes())?;

    let mut csv = format!("{stamp}arm,classifier,test_set,status,accuracy,precision,recall,f1\n");
    for c in &report.cells {
        match &c.outcome {
            CellOutcome::Ok { metrics: m, .. } => csv.push_str(&format!(
                "{},{},{},ok,{},{},{},{}\n",
                c.arm, c.classifier, c.test_set, m.accuracy, m.precision, m.recall, m.f1
            )),
            CellOutcome::Failed { .. } => {
                csv.push_str(&format!("{},{},{},failed,,,,\n", c.arm, c.classifier, c.test_set))
            }
        }
    }
    write_file(&layout.root.join("metrics.csv"), csv.as_bytes())?;

    let names: Vec<&str> = ClassLabel::ALL.iter().map(|l| l.name()).collect();
    for c in &report.cells {
        if let CellOutcome::Ok { confusion, .. } = &c.outcome {
            let mut buf = stamp.clone().into_bytes();
            confusion.write_csv(&mut buf, &names)?;
            let file = format!(
                "{}_{}_{}.csv",
                file_safe(&c.test_set),
                file_safe(c.arm.label()),
                file_safe(&c.classifier)
            );
            write_file(&layout.dir("confusion").join(file), &buf)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(vec![3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(vec![4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    #[test]
    fn file_names_are_sanitized() {
        assert_eq!(file_safe("KDDTest+"), "KDDTest_");
        assert_eq!(file_safe("DT#2"), "DT_2");
    }
}
