//! Experiment pipeline and the operations behind the `salfair` binary.
//!
//! Run directory layout, version 1:
//!
//! ```text
//! <run>/
//!   config.json                          effective config
//!   manifest.json                        layout version, completed phi values
//!   checkpoints/phi_<p>/<model>.sfnet    vanilla, cav_project
//!   maps/phi_<p>/<method>/<id>.sfmap     test-split relevance maps
//!   predictions/phi_<p>/<method>.csv     test-split sample tables
//!   reports/phi_<p>/<method>.json        one MetricReport each
//!   tables/phi_<p>.csv                   every method at one phi
//!   metrics.csv                          every report
//!   plotdata/<metric>.csv                method, phi, value, seed
//! ```
//!
//! A run directory can be resumed: phi values listed in the manifest are
//! loaded from their reports instead of recomputed.

use std::collections::BTreeSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attribution::{self, AttributionMethod, DEFAULT_IG_STEPS, DEFAULT_LRP_EPSILON};
use crate::data::{self, LabeledImage, SplitFractions, SyntheticSpec};
use crate::debias::{self, GroupThresholds, DEFAULT_GRID_SIZE};
use crate::error::{Error, Result};
use crate::fairness;
use crate::io::{self, RoiFile};
use crate::metrics::{self, RddtResult, DEFAULT_ALPHA};
use crate::nn::{self, NetBuilder, Shape, TinyNet, TrainConfig};
use crate::types::{MetricName, MetricReport, RelevanceMap, ReportMeta, Roi, SampleRow, SampleTable};

pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "vanilla")]
    Vanilla,
    #[serde(rename = "thropt")]
    ThrOpt,
    #[serde(rename = "cav_project")]
    CavProject,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Vanilla, Method::ThrOpt, Method::CavProject];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::ThrOpt => "thropt",
            Method::CavProject => "cav_project",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Either a synthetic recipe or a dataset directory written by
/// [`io::write_dataset`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSource {
    Path { path: PathBuf },
    Synthetic(SyntheticSpec),
}

/// TinyNet architecture: conv, relu, flatten, dense, relu, dense(2).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub conv_channels: usize,
    pub kernel: usize,
    pub hidden: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            conv_channels: 4,
            kernel: 3,
            hidden: 16,
        }
    }
}

impl ModelConfig {
    pub fn builder(&self, input: Shape) -> NetBuilder {
        NetBuilder::new(input)
            .conv2d(self.conv_channels, self.kernel, 1)
            .relu()
            .flatten()
            .dense(self.hidden)
            .relu()
            .dense(2)
    }
}

/// Experiment description, read from JSON. Every field has a default.
///
/// For a synthetic dataset, `phi_target` and `seed` inside the recipe are
/// replaced per phi. `training.seed` is likewise derived from `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub phi_list: Vec<f64>,
    pub methods: Vec<Method>,
    pub attribution: AttributionMethod,
    /// ROI file; defaults to the synthetic recipe's artifact patch.
    pub roi: Option<PathBuf>,
    pub seed: u64,
    pub training: TrainConfig,
    pub model: ModelConfig,
    pub split: SplitFractions,
    pub alpha: f64,
    pub grid_size: usize,
    pub ig_steps: usize,
    pub lrp_epsilon: f64,
    /// Logit explained by the attribution maps.
    pub target_class: u8,
    /// Layer whose output the concept direction is removed from.
    pub cav_layer: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset: DatasetSource::Synthetic(SyntheticSpec::default()),
            phi_list: vec![0.2, 0.5, 0.8],
            methods: Method::ALL.to_vec(),
            attribution: AttributionMethod::IntegratedGradients,
            roi: None,
            seed: 0,
            training: TrainConfig::default(),
            model: ModelConfig::default(),
            split: SplitFractions::default(),
            alpha: DEFAULT_ALPHA,
            grid_size: DEFAULT_GRID_SIZE,
            ig_steps: DEFAULT_IG_STEPS,
            lrp_epsilon: DEFAULT_LRP_EPSILON,
            target_class: 1,
            cav_layer: 0,
        }
    }
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::from(e).at(path))?;
        Self::from_json(&text).map_err(|e| e.at(path))
    }

    /// Checks everything that does not touch the file system.
    pub fn validate(&self) -> Result<()> {
        if self.phi_list.is_empty() {
            return Err(config_err("phi_list is empty"));
        }
        let mut seen = BTreeSet::new();
        for &phi in &self.phi_list {
            if !(-1.0..=1.0).contains(&phi) {
                return Err(config_err(format!("phi {phi} is outside [-1, 1]")));
            }
            if !seen.insert(phi_label(phi)) {
                return Err(config_err(format!("phi {phi} is listed twice")));
            }
        }
        if self.methods.is_empty() {
            return Err(config_err("methods is empty"));
        }
        if self.methods.iter().collect::<BTreeSet<_>>().len() != self.methods.len() {
            return Err(config_err("methods contains duplicates"));
        }
        if let DatasetSource::Synthetic(spec) = &self.dataset {
            spec.validate()?;
        }
        let t = &self.training;
        if t.epochs == 0 || t.batch_size == 0 || !(t.learning_rate > 0.0) {
            return Err(config_err("training needs epochs >= 1, batch_size >= 1 and learning_rate > 0"));
        }
        let m = &self.model;
        if m.conv_channels == 0 || m.kernel == 0 || m.hidden == 0 {
            return Err(config_err("model sizes must be positive"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(config_err(format!("alpha {} must lie in (0, 1]", self.alpha)));
        }
        if self.grid_size == 0 || self.ig_steps == 0 {
            return Err(config_err("grid_size and ig_steps must be at least 1"));
        }
        if !(self.lrp_epsilon > 0.0) {
            return Err(config_err("lrp_epsilon must be positive"));
        }
        if self.target_class > 1 {
            return Err(config_err("target_class must be 0 or 1"));
        }
        Ok(())
    }
}

/// Directory-safe label for a phi value, e.g. `phi_0.8`.
pub fn phi_label(phi: f64) -> String {
    format!("phi_{}", phi + 0.0)
}

/// Deterministic per-(phi, stream) seed, independent of phi_list order.
fn derive_seed(seed: u64, phi: f64, stream: u64) -> u64 {
    let mut z = seed ^ (phi + 0.0).to_bits().rotate_left(17) ^ stream.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub layout_version: u32,
    pub completed: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub run_dir: PathBuf,
    /// In `phi_list` order, then `methods` order.
    pub reports: Vec<MetricReport>,
}

impl RunSummary {
    pub fn report(&self, method: Method, phi: f64) -> Option<&MetricReport> {
        self.reports
            .iter()
            .find(|r| r.meta.method == method.as_str() && r.meta.phi_target == Some(phi))
    }
}

/// Mean ADR, mean DIF, and RDDT over paired maps, each with its own ROI.
pub fn paired_metrics(pairs: &[(&RelevanceMap, &RelevanceMap, Roi)], alpha: f64) -> Result<(f64, f64, RddtResult)> {
    let mut adr_sum = 0.0;
    let mut dif_sum = 0.0;
    let mut diffs = Vec::with_capacity(pairs.len());
    for (v, d, roi) in pairs {
        adr_sum += metrics::adr(v, d, roi)?;
        dif_sum += metrics::dif(v, d, roi)?;
        diffs.push(metrics::roi_mean(v, roi)? - metrics::roi_mean(d, roi)?);
    }
    let rddt = metrics::rddt_from_differences(&diffs, alpha)?;
    let n = pairs.len() as f64;
    Ok((adr_sum / n, dif_sum / n, rddt))
}

fn mean_rrf<'a>(maps: impl IntoIterator<Item = (&'a RelevanceMap, Roi)>) -> Result<f64> {
    let mut sum = 0.0;
    let mut n = 0usize;
    for (map, roi) in maps {
        sum += metrics::rrf(map, &roi)?;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyTable);
    }
    Ok(sum / n as f64)
}

fn file_stem(name: &str) -> &str {
    name.strip_suffix(&format!(".{}", io::MAP_EXTENSION)).unwrap_or(name)
}

/// Compares two directories of maps with matching file names.
///
/// RRF is averaged over the debiased maps. Writes `report.json` and
/// `report.csv` into `out`.
pub fn cmd_metrics(
    vanilla_dir: impl AsRef<Path>,
    debiased_dir: impl AsRef<Path>,
    roi_file: impl AsRef<Path>,
    out: impl AsRef<Path>,
    alpha: f64,
) -> Result<MetricReport> {
    let (vanilla_dir, debiased_dir) = (vanilla_dir.as_ref(), debiased_dir.as_ref());
    let roi = io::read_roi_file(roi_file)?;
    let names = io::list_maps(vanilla_dir)?;
    let debiased_names: BTreeSet<String> = io::list_maps(debiased_dir)?.into_iter().collect();
    for name in &names {
        if !debiased_names.contains(name) {
            return Err(Error::MissingPair(debiased_dir.join(name).display().to_string()));
        }
    }
    let vanilla_names: BTreeSet<&String> = names.iter().collect();
    if let Some(extra) = debiased_names.iter().find(|n| !vanilla_names.contains(n)) {
        return Err(Error::MissingPair(vanilla_dir.join(extra).display().to_string()));
    }

    let mut loaded = Vec::with_capacity(names.len());
    for name in &names {
        let v = io::read_map(vanilla_dir.join(name))?;
        let d = io::read_map(debiased_dir.join(name))?;
        loaded.push((name, v, d, roi.roi_for(file_stem(name))));
    }
    // per-file checks first so errors name the file
    for (name, v, d, r) in &loaded {
        let at = debiased_dir.join(name);
        metrics::adr(v, d, r).map_err(|e| e.at(&at))?;
        metrics::rrf(d, r).map_err(|e| e.at(&at))?;
    }
    let pairs: Vec<_> = loaded.iter().map(|(_, v, d, r)| (v, d, *r)).collect();
    let (adr, dif, rddt) = paired_metrics(&pairs, alpha)?;
    let rrf = mean_rrf(loaded.iter().map(|(_, _, d, r)| (d, *r)))?;

    let mut report = MetricReport::new(ReportMeta {
        seed: None,
        phi_target: None,
        method: "debiased".into(),
        attribution: "external".into(),
    });
    report.set_real(MetricName::Rrf, rrf);
    report.set_real(MetricName::Adr, adr);
    report.set_real(MetricName::Dif, dif);
    report.set_rddt(rddt);

    let out = out.as_ref();
    fs::create_dir_all(out)?;
    io::write_json(&report, out.join("report.json"))?;
    io::write_reports_csv(std::slice::from_ref(&report), out.join("report.csv"))?;
    Ok(report)
}

struct Pipeline<'a> {
    cfg: &'a ExperimentConfig,
    run_dir: &'a Path,
    /// Loaded once for dataset directories.
    pool: Option<Vec<LabeledImage>>,
    roi: RoiFile,
}

struct Scored {
    table: SampleTable,
    maps: Vec<RelevanceMap>,
}

impl Pipeline<'_> {
    fn phi_dir(&self, kind: &str, phi: f64) -> PathBuf {
        self.run_dir.join(kind).join(phi_label(phi))
    }

    fn dataset(&self, phi: f64) -> Result<Vec<LabeledImage>> {
        let seed = derive_seed(self.cfg.seed, phi, 1);
        match (&self.cfg.dataset, &self.pool) {
            (DatasetSource::Synthetic(spec), _) => data::generate(&SyntheticSpec {
                phi_target: phi,
                seed,
                ..spec.clone()
            }),
            (DatasetSource::Path { .. }, Some(pool)) => data::rebalance_to_phi(pool, phi, seed),
            (DatasetSource::Path { path }, None) => Err(config_err(format!("dataset {} was not loaded", path.display()))),
        }
    }

    fn input_shape(samples: &[LabeledImage]) -> Result<Shape> {
        let first = samples.first().ok_or(Error::EmptyTable)?;
        if let Some(s) = samples.iter().find(|s| (s.height, s.width) != (first.height, first.width)) {
            return Err(crate::error::shape_mismatch(
                format!("{}x{}", first.height, first.width),
                format!("{}x{} for {}", s.height, s.width, s.id),
            ));
        }
        Ok(Shape::image(1, first.height, first.width))
    }

    fn table(net: &TinyNet, samples: &[LabeledImage]) -> Result<SampleTable> {
        let rows = samples
            .par_iter()
            .map(|s| {
                let score = net.score(&s.pixels)? as f32 as f64;
                Ok(SampleRow {
                    id: s.id.clone(),
                    y_true: s.y,
                    y_pred: (score >= 0.5) as u8,
                    pa: s.pa,
                    score,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SampleTable::new(rows)
    }

    fn maps(&self, net: &TinyNet, samples: &[LabeledImage]) -> Result<Vec<RelevanceMap>> {
        let cfg = self.cfg;
        samples
            .par_iter()
            .map(|s| {
                let a = match cfg.attribution {
                    AttributionMethod::IntegratedGradients => {
                        let baseline = vec![0.0; s.pixels.len()];
                        attribution::integrated_gradients(net, &s.pixels, &baseline, cfg.target_class, cfg.ig_steps)?
                    }
                    AttributionMethod::Lrp => attribution::lrp_epsilon(net, &s.pixels, cfg.target_class, cfg.lrp_epsilon)?,
                };
                Ok(a.map)
            })
            .collect()
    }

    fn score(&self, net: &TinyNet, samples: &[LabeledImage]) -> Result<Scored> {
        Ok(Scored {
            table: Self::table(net, samples)?,
            maps: self.maps(net, samples)?,
        })
    }

    fn save_checkpoint(&self, phi: f64, name: &str, net: &TinyNet) -> Result<()> {
        let dir = self.phi_dir("checkpoints", phi);
        fs::create_dir_all(&dir)?;
        let path = dir.join(format!("{name}.sfnet"));
        let file = fs::File::create(&path).map_err(|e| Error::from(e).at(&path))?;
        nn::write_checkpoint(net, std::io::BufWriter::new(file))
    }

    fn save_outputs(&self, phi: f64, method: Method, test: &[LabeledImage], scored: &Scored) -> Result<()> {
        let map_dir = self.phi_dir("maps", phi).join(method.as_str());
        fs::create_dir_all(&map_dir)?;
        for (s, map) in test.iter().zip(&scored.maps) {
            io::write_map(map, map_dir.join(format!("{}.{}", s.id, io::MAP_EXTENSION)))?;
        }
        let pred_dir = self.phi_dir("predictions", phi);
        fs::create_dir_all(&pred_dir)?;
        io::write_table(&scored.table, pred_dir.join(format!("{method}.csv")))
    }

    fn report(&self, phi: f64, method: Method, test: &[LabeledImage], scored: &Scored, vanilla: &Scored) -> Result<MetricReport> {
        let mut report = MetricReport::new(ReportMeta {
            seed: Some(self.cfg.seed),
            phi_target: Some(phi),
            method: method.as_str().into(),
            attribution: self.cfg.attribution.as_str().into(),
        });
        let rois: Vec<Roi> = test.iter().map(|s| self.roi.roi_for(&s.id)).collect();
        report.set_real(MetricName::Rrf, mean_rrf(scored.maps.iter().zip(rois.iter().copied()))?);
        if method != Method::Vanilla {
            let pairs: Vec<_> = vanilla
                .maps
                .iter()
                .zip(&scored.maps)
                .zip(&rois)
                .map(|((v, d), r)| (v, d, *r))
                .collect();
            let (adr, dif, rddt) = paired_metrics(&pairs, self.cfg.alpha)?;
            report.set_real(MetricName::Adr, adr);
            report.set_real(MetricName::Dif, dif);
            report.set_rddt(rddt);
        }
        report.set_real(MetricName::EqualizedOdds, fairness::equalized_odds(&fairness::group_rates(&scored.table)?));
        report.set_real(MetricName::Accuracy, fairness::accuracy(&scored.table)?);
        Ok(report)
    }

    fn run_phi(&self, phi: f64) -> Result<Vec<MetricReport>> {
        let cfg = self.cfg;
        let pool = self.dataset(phi)?;
        let splits = data::split(&pool, cfg.split, derive_seed(cfg.seed, phi, 2))?;
        let shape = Self::input_shape(&pool)?;
        let (h, w) = match shape {
            Shape::Image { height, width, .. } => (height, width),
            Shape::Flat { len } => (1, len),
        };
        self.roi.validate_for(h, w)?;

        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, phi, 3));
        let mut net = cfg.model.builder(shape).build_random(&mut rng)?;
        let inputs: Vec<Vec<f64>> = splits.train.iter().map(|s| s.pixels.clone()).collect();
        let labels: Vec<u8> = splits.train.iter().map(|s| s.y).collect();
        let train_cfg = TrainConfig {
            seed: derive_seed(cfg.seed, phi, 4),
            ..cfg.training
        };
        nn::train(&mut net, &inputs, &labels, &train_cfg)?;
        net.quantize_to_f32();
        self.save_checkpoint(phi, "vanilla", &net)?;

        let vanilla = self.score(&net, &splits.test)?;
        let mut reports = Vec::new();
        for &method in &cfg.methods {
            let scored = match method {
                Method::Vanilla => None,
                Method::ThrOpt => {
                    let debias_table = Self::table(&net, &splits.debias)?;
                    let thresholds: GroupThresholds = debias::fit_thresholds(&debias_table, cfg.grid_size)?;
                    Some(Scored {
                        table: thresholds.apply(&vanilla.table),
                        maps: vanilla.maps.clone(),
                    })
                }
                Method::CavProject => {
                    let balanced = data::undersample_equal_marginals(&splits.debias, 0.0, derive_seed(cfg.seed, phi, 5))?;
                    let acts = balanced
                        .iter()
                        .map(|s| Ok((net.activation_at(&s.pixels, cfg.cav_layer)?, s.pa)))
                        .collect::<Result<Vec<_>>>()?;
                    let cav = debias::fit_cav(&acts, cfg.cav_layer)?;
                    let mut projected = debias::project_out(&net, &cav)?;
                    projected.quantize_to_f32();
                    self.save_checkpoint(phi, method.as_str(), &projected)?;
                    Some(self.score(&projected, &splits.test)?)
                }
            };
            let scored = scored.as_ref().unwrap_or(&vanilla);
            self.save_outputs(phi, method, &splits.test, scored)?;
            reports.push(self.report(phi, method, &splits.test, scored, &vanilla)?);
        }

        let report_dir = self.phi_dir("reports", phi);
        fs::create_dir_all(&report_dir)?;
        for r in &reports {
            io::write_json(r, report_dir.join(format!("{}.json", r.meta.method)))?;
        }
        fs::create_dir_all(self.run_dir.join("tables"))?;
        io::write_reports_csv(&reports, self.run_dir.join("tables").join(format!("{}.csv", phi_label(phi))))?;
        Ok(reports)
    }
}

fn read_report(run_dir: &Path, method: Method, phi: f64) -> Result<MetricReport> {
    let path = run_dir
        .join("reports")
        .join(phi_label(phi))
        .join(format!("{method}.json"));
    if !path.exists() {
        return Err(Error::IncompleteRun(format!("no {method} report at phi {phi}")));
    }
    io::read_json(&path)
}

fn write_manifest(run_dir: &Path, cfg: &ExperimentConfig, done: &BTreeSet<String>) -> Result<()> {
    let completed = cfg
        .phi_list
        .iter()
        .copied()
        .filter(|&p| done.contains(&phi_label(p)))
        .collect();
    io::write_json(
        &Manifest {
            layout_version: LAYOUT_VERSION,
            completed,
        },
        run_dir.join("manifest.json"),
    )
}

/// Runs every phi in the config and writes the run directory.
pub fn cmd_run(cfg: &ExperimentConfig, run_dir: impl AsRef<Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let run_dir = run_dir.as_ref();
    fs::create_dir_all(run_dir)?;

    let config_path = run_dir.join("config.json");
    let manifest_path = run_dir.join("manifest.json");
    let mut done = BTreeSet::new();
    if manifest_path.exists() {
        let previous: ExperimentConfig = io::read_json(&config_path)?;
        if previous != *cfg {
            return Err(config_err(format!(
                "{} holds a run with a different config",
                run_dir.display()
            )));
        }
        let manifest: Manifest = io::read_json(&manifest_path)?;
        if manifest.layout_version != LAYOUT_VERSION {
            return Err(Error::BadHeader(format!(
                "run layout version {} is not {LAYOUT_VERSION}",
                manifest.layout_version
            ))
            .at(&manifest_path));
        }
        done.extend(manifest.completed.iter().map(|&p| phi_label(p)));
    } else {
        io::write_json(cfg, &config_path)?;
        write_manifest(run_dir, cfg, &done)?;
    }

    let roi = match (&cfg.roi, &cfg.dataset) {
        (Some(path), _) => io::read_roi_file(path)?,
        (None, DatasetSource::Synthetic(spec)) => RoiFile::new(spec.patch),
        (None, DatasetSource::Path { .. }) => return Err(config_err("a dataset directory needs an roi file")),
    };
    let pool = match &cfg.dataset {
        DatasetSource::Path { path } => Some(io::read_dataset(path)?),
        DatasetSource::Synthetic(_) => None,
    };
    let pipeline = Pipeline { cfg, run_dir, pool, roi };

    let manifest = Mutex::new(done.clone());
    let per_phi = cfg
        .phi_list
        .par_iter()
        .map(|&phi| {
            if done.contains(&phi_label(phi)) {
                return cfg.methods.iter().map(|&m| read_report(run_dir, m, phi)).collect();
            }
            let reports = pipeline.run_phi(phi)?;
            let mut guard = manifest.lock().expect("manifest lock");
            guard.insert(phi_label(phi));
            write_manifest(run_dir, cfg, &guard)?;
            Ok(reports)
        })
        .collect::<Vec<Result<Vec<MetricReport>>>>();

    let mut reports = Vec::new();
    for r in per_phi {
        reports.extend(r?);
    }
    io::write_reports_csv(&reports, run_dir.join("metrics.csv"))?;
    cmd_plotdata(run_dir, run_dir.join("plotdata"))?;
    Ok(RunSummary {
        run_dir: run_dir.to_path_buf(),
        reports,
    })
}

/// Writes one tidy CSV per registry metric from a completed run's reports.
pub fn cmd_plotdata(run_dir: impl AsRef<Path>, out: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let run_dir = run_dir.as_ref();
    let cfg: ExperimentConfig = io::read_json(run_dir.join("config.json"))?;
    let mut reports = Vec::new();
    for &phi in &cfg.phi_list {
        for &method in &cfg.methods {
            reports.push(read_report(run_dir, method, phi)?);
        }
    }
    let out = out.as_ref();
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for metric in MetricName::ALL {
        let path = out.join(format!("{}.csv", metric.as_str()));
        let mut w = csv::Writer::from_path(&path).map_err(|e| Error::from(e).at(&path))?;
        w.write_record(["method", "phi", "value", "seed"])?;
        for r in &reports {
            if let Some(v) = r.get(metric) {
                w.write_record([
                    r.meta.method.clone(),
                    r.meta.phi_target.map(|p| p.to_string()).unwrap_or_default(),
                    v.to_string(),
                    r.meta.seed.map(|s| s.to_string()).unwrap_or_default(),
                ])?;
            }
        }
        w.flush()?;
        written.push(path);
    }
    Ok(written)
}

/// Generates a synthetic dataset into `out`, plus `roi.json` for its patch.
pub fn cmd_generate(spec: &SyntheticSpec, out: impl AsRef<Path>) -> Result<Vec<LabeledImage>> {
    let out = out.as_ref();
    let samples = data::generate(spec)?;
    io::write_dataset(&samples, out)?;
    io::write_roi_file(&RoiFile::new(spec.patch), out.join("roi.json"))?;
    io::write_json(spec, out.join("spec.json"))?;
    Ok(samples)
}

/// Undersamples a dataset directory to `phi` and writes the subset.
pub fn cmd_rebalance(input: impl AsRef<Path>, phi: f64, seed: u64, out: impl AsRef<Path>) -> Result<Vec<LabeledImage>> {
    if !(-1.0..=1.0).contains(&phi) {
        return Err(config_err(format!("phi {phi} is outside [-1, 1]")));
    }
    let pool = io::read_dataset(input)?;
    let subset = data::rebalance_to_phi(&pool, phi, seed)?;
    io::write_dataset(&subset, out)?;
    Ok(subset)
}

/// Attributes every image of a dataset under a checkpoint. Writes one map
/// per image and a prediction table (threshold 0.5).
pub fn cmd_attribute(
    checkpoint: impl AsRef<Path>,
    dataset: impl AsRef<Path>,
    method: AttributionMethod,
    target_class: u8,
    out: impl AsRef<Path>,
) -> Result<SampleTable> {
    let checkpoint = checkpoint.as_ref();
    let file = fs::File::open(checkpoint).map_err(|e| Error::from(e).at(checkpoint))?;
    let net = nn::read_checkpoint(std::io::BufReader::new(file)).map_err(|e| e.at(checkpoint))?;
    let samples = io::read_dataset(dataset)?;
    let out = out.as_ref();
    fs::create_dir_all(out.join("maps"))?;
    let maps = samples
        .par_iter()
        .map(|s| attribution::attribute(&net, &s.pixels, target_class, method).map(|a| a.map))
        .collect::<Result<Vec<_>>>()?;
    for (s, map) in samples.iter().zip(&maps) {
        io::write_map(map, out.join("maps").join(format!("{}.{}", s.id, io::MAP_EXTENSION)))?;
    }
    let table = Pipeline::table(&net, &samples)?;
    io::write_table(&table, out.join("predictions.csv"))?;
    Ok(table)
}
