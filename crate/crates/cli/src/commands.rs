use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use crowdflow_core::anomaly::{train, write_event, EventRecord, TrainedRegime};
use crowdflow_core::clustering::{ClusterDescriptor, ObservationSet, SemanticGroup};
use crowdflow_core::dataset::{collect_observations, infer_dataset, Dataset};
use crowdflow_core::diagnostics::diagnose;
use crowdflow_core::io::flow_file_name;
use crowdflow_core::model_store::{load_model_file, save_model_file, ModelFile, TrainingFingerprint};
use crowdflow_core::synth::{read_scene_specs, write_scenes};
use crowdflow_core::{DensityRegime, MotionCategory, NormalBounds, NormalizationConfig};
use serde::Serialize;

use crate::config::RunConfig;
use crate::overlay;

fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<()> {
    let mut out = open_output(path)?;
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct KPoint {
    k: usize,
    wcss: f64,
}

#[derive(Serialize)]
struct RegimeReport<'a> {
    regime: DensityRegime,
    observations: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    curve: Vec<KPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elbow_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    chosen_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    descriptors: Option<&'a [ClusterDescriptor]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    groups: Option<&'a [SemanticGroup]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bounds: Option<NormalBounds>,
}

#[derive(Serialize)]
struct TrainReport<'a> {
    seed: u64,
    k_range: [usize; 2],
    restarts: usize,
    normalization: NormalizationConfig,
    frames: usize,
    excluded_frames: usize,
    regimes: Vec<RegimeReport<'a>>,
}

fn regime_report(regime: DensityRegime, n: usize, result: &Result<TrainedRegime, impl ToString>) -> RegimeReport<'_> {
    match result {
        Ok(t) => RegimeReport {
            regime,
            observations: n,
            error: None,
            curve: t.elbow.curve.iter().map(|&(k, wcss)| KPoint { k, wcss }).collect(),
            elbow_k: crowdflow_core::clustering::elbow_from_curve(&t.elbow.curve).ok(),
            chosen_k: Some(t.model.kmeans.k),
            descriptors: Some(&t.model.descriptors),
            groups: Some(&t.model.grouping.groups),
            bounds: Some(t.model.bounds),
        },
        Err(e) => RegimeReport {
            regime,
            observations: n,
            error: Some(e.to_string()),
            curve: Vec::new(),
            elbow_k: None,
            chosen_k: None,
            descriptors: None,
            groups: None,
            bounds: None,
        },
    }
}

pub fn train_cmd(cfg: &RunConfig) -> Result<()> {
    let model_path = cfg.model()?.to_path_buf();
    let dataset = Dataset::open(cfg.dataset_paths()?)?;
    let collected = collect_observations(&dataset, &cfg.normalization, cfg.batch)?;

    let mut per_regime: BTreeMap<DensityRegime, ObservationSet> = collected.per_regime;
    for s in dataset.scenes() {
        per_regime.entry(s.density_regime).or_default();
    }
    let counts: BTreeMap<DensityRegime, usize> = per_regime.iter().map(|(r, s)| (*r, s.len())).collect();
    let results = train(&per_regime, &cfg.training);

    let report = TrainReport {
        seed: cfg.training.seed,
        k_range: [cfg.training.k_min, cfg.training.k_max],
        restarts: cfg.training.restarts,
        normalization: cfg.normalization,
        frames: collected.frames,
        excluded_frames: collected.excluded_frames,
        regimes: results
            .iter()
            .map(|(r, res)| regime_report(*r, counts[r], res))
            .collect(),
    };
    write_json(&report, cfg.report())?;

    let mut models = Vec::new();
    let mut first_err = None;
    for (regime, res) in results {
        match res {
            Ok(t) => models.push(t.model),
            Err(e) => {
                log::warn!("{regime} regime not trained: {e}");
                first_err.get_or_insert((regime, e));
            }
        }
    }
    if models.is_empty() {
        let (regime, e) = first_err.expect("at least one regime");
        return Err(e).with_context(|| format!("training the {regime} regime"));
    }
    let fingerprint = TrainingFingerprint {
        seed: cfg.training.seed,
        k_range: [cfg.training.k_min, cfg.training.k_max],
        restarts: cfg.training.restarts,
        observation_counts: counts,
    };
    save_model_file(&ModelFile::new(models, fingerprint), &model_path)?;
    log::info!("model written to {}", model_path.display());
    Ok(())
}

pub fn infer_cmd(cfg: &RunConfig) -> Result<()> {
    let mut models = load_model_file(cfg.existing_model()?)?;
    if let Some(t) = cfg.threshold_override {
        for m in &mut models.models {
            m.thresholds = t;
        }
    }
    let dataset = Dataset::open(cfg.dataset_paths()?)?;
    if let Some(dir) = cfg.overlays() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut out = open_output(cfg.output())?;
    let mut tally: BTreeMap<MotionCategory, usize> = BTreeMap::new();
    let mut overlays = 0usize;
    let start = Instant::now();
    let frames = infer_dataset(&dataset, &models, cfg.batch, |frame, events| {
        let io_err = |source| crowdflow_core::dataset::DatasetError::Io {
            path: cfg.output().map_or_else(|| "<stdout>".into(), Path::to_path_buf),
            source,
        };
        for e in events {
            write_event(&mut out, e).map_err(io_err)?;
            *tally.entry(e.category).or_default() += 1;
        }
        if let Some(dir) = cfg.overlays() {
            if events.iter().any(|e| e.is_highlighted()) {
                let flow = dataset.load_flow(frame)?;
                let (img, _) = overlay::render(&flow, events);
                let path = dir.join(flow_file_name(frame).replace(".flo", ".ppm"));
                overlay::write_ppm(&img, &path)
                    .map_err(|source| crowdflow_core::dataset::DatasetError::Io { path, source })?;
                overlays += 1;
            }
        }
        Ok(())
    })?;
    out.flush()?;
    let secs = start.elapsed().as_secs_f64();
    let summary: Vec<String> = tally.iter().map(|(c, n)| format!("{c}={n}")).collect();
    eprintln!(
        "{frames} frames in {secs:.3} s ({:.1} frames/s); events: {}; overlays: {overlays}",
        frames as f64 / secs.max(1e-9),
        if summary.is_empty() {
            "none".to_string()
        } else {
            summary.join(" ")
        },
    );
    Ok(())
}

#[derive(Serialize)]
#[serde(untagged)]
enum DiagnoseRegime {
    Done(crowdflow_core::diagnostics::RegimeDiagnostics),
    Failed { regime: DensityRegime, error: String },
}

pub fn diagnose_cmd(cfg: &RunConfig) -> Result<()> {
    let dataset = Dataset::open(cfg.dataset_paths()?)?;
    let collected = collect_observations(&dataset, &cfg.normalization, cfg.batch)?;
    let t = &cfg.training;
    let results = diagnose(&collected.observations, t.k_min, t.k_max, t.seed, t.restarts);
    if results.is_empty() {
        anyhow::bail!("no observations in the training frames");
    }
    if results.values().all(Result::is_err) {
        let (regime, e) = results.into_iter().next().expect("non-empty");
        return Err(e.unwrap_err()).with_context(|| format!("diagnosing the {regime} regime"));
    }
    let out: Vec<DiagnoseRegime> = results
        .into_iter()
        .map(|(regime, r)| match r {
            Ok(d) => DiagnoseRegime::Done(d),
            Err(e) => DiagnoseRegime::Failed {
                regime,
                error: e.to_string(),
            },
        })
        .collect();
    write_json(&out, cfg.output())
}

pub fn synth_cmd(cfg: &RunConfig) -> Result<()> {
    let spec_path = cfg.spec()?;
    let out = cfg.output().ok_or(crate::config::ConfigError::Missing {
        what: "output directory",
        flag: "--output",
    })?;
    let text = fs::read_to_string(spec_path).with_context(|| format!("reading {}", spec_path.display()))?;
    let specs = read_scene_specs(&text)?;
    let manifests = write_scenes(out, &specs, cfg.seed())?;
    let frames: u64 = manifests.iter().map(|m| m.frame_range.end - m.frame_range.start).sum();
    eprintln!(
        "{} scenes, {frames} frames written to {}",
        manifests.len(),
        out.display()
    );
    Ok(())
}

pub fn report_cmd(cfg: &RunConfig) -> Result<()> {
    let file = load_model_file(cfg.existing_model()?)?;
    let mut out = open_output(cfg.output())?;
    let fp = &file.fingerprint;
    writeln!(
        out,
        "model format {} | seed {} | k range {}..={} | restarts {}",
        file.format_version, fp.seed, fp.k_range[0], fp.k_range[1], fp.restarts
    )?;
    for m in &file.models {
        let n = fp.observation_counts.get(&m.regime).copied().unwrap_or(0);
        writeln!(out, "\n[{}] {} observations, k = {}", m.regime, n, m.kmeans.k)?;
        writeln!(
            out,
            "  normal band [{}, {}], normalization {:?} p={}",
            m.bounds.m_min, m.bounds.m_max, m.normalization.scheme, m.normalization.target_size
        )?;
        writeln!(
            out,
            "  thresholds: fast >= {}%, halt <= {}%, slow <= {}%",
            m.thresholds.fast_at, m.thresholds.slow_low, m.thresholds.slow_high
        )?;
        for g in &m.grouping.groups {
            writeln!(
                out,
                "  {:<6} clusters {:?} mean {:.4} std {:.4} n {}",
                g.label.as_str(),
                g.clusters,
                g.descriptor.mean,
                g.descriptor.std,
                g.descriptor.size
            )?;
        }
    }
    if let Some(path) = cfg.events() {
        let reader = BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?);
        let mut tally: BTreeMap<MotionCategory, usize> = BTreeMap::new();
        let mut abnormal_frames = std::collections::BTreeSet::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: EventRecord =
                serde_json::from_str(&line).with_context(|| format!("{} line {}", path.display(), i + 1))?;
            *tally.entry(rec.category).or_default() += 1;
            if rec.category.is_anomalous() {
                abnormal_frames.insert(rec.frame);
            }
        }
        writeln!(out, "\nevents in {}:", path.display())?;
        for c in MotionCategory::ORDERED {
            writeln!(out, "  {:<6} {}", c.as_str(), tally.get(&c).copied().unwrap_or(0))?;
        }
        writeln!(out, "  frames with abnormal events: {}", abnormal_frames.len())?;
    }
    out.flush()?;
    Ok(())
}
