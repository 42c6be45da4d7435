use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::spectral::{lsd, si_sdr, ssim_spec};
use super::stoi::stoi;
use crate::dsp::AudioSegment;
use crate::error::Result;
use crate::harness::read_wav;

/// Which metrics to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricSet {
    pub lsd: bool,
    pub ssim: bool,
    pub stoi: bool,
    pub si_sdr: bool,
}

impl Default for MetricSet {
    fn default() -> Self {
        Self {
            lsd: true,
            ssim: true,
            stoi: true,
            si_sdr: true,
        }
    }
}

/// Scores of one estimate against its clean reference. `pesq_wb` is always
/// null; the column is kept for table compatibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceMetrics {
    pub id: String,
    pub lsd: Option<f64>,
    pub ssim: Option<f64>,
    pub stoi: Option<f64>,
    pub si_sdr: Option<f64>,
    pub pesq_wb: Option<f64>,
}

pub fn score_pair(id: &str, reference: &AudioSegment, estimate: &AudioSegment, set: &MetricSet) -> Result<UtteranceMetrics> {
    Ok(UtteranceMetrics {
        id: id.to_string(),
        lsd: set.lsd.then(|| lsd(reference, estimate)).transpose()?,
        ssim: set.ssim.then(|| ssim_spec(reference, estimate)).transpose()?,
        stoi: set.stoi.then(|| stoi(reference, estimate)).transpose()?,
        si_sdr: set.si_sdr.then(|| si_sdr(reference, estimate)).transpose()?,
        pesq_wb: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: Option<f64>,
    pub std: Option<f64>,
}

impl Summary {
    /// Mean and population standard deviation.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self {
                count: 0,
                mean: None,
                std: None,
            };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Self {
            count: values.len(),
            mean: Some(mean),
            std: Some(var.sqrt()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub utterances: usize,
    pub lsd: Summary,
    pub ssim: Summary,
    pub stoi: Summary,
    pub si_sdr: Summary,
}

impl Aggregate {
    pub fn of(rows: &[UtteranceMetrics]) -> Self {
        let pick = |f: fn(&UtteranceMetrics) -> Option<f64>| -> Vec<f64> { rows.iter().filter_map(f).collect() };
        Self {
            utterances: rows.len(),
            lsd: Summary::of(&pick(|r| r.lsd)),
            ssim: Summary::of(&pick(|r| r.ssim)),
            stoi: Summary::of(&pick(|r| r.stoi)),
            si_sdr: Summary::of(&pick(|r| r.si_sdr)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub config_hash: String,
    pub seed: u64,
    pub corpus_id: String,
    /// Which side each metric treats as the reference.
    pub reference: String,
    pub estimate: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub id: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub meta: ReportMeta,
    /// e.g. "0 utterances"
    pub summary: String,
    pub per_utterance: Vec<UtteranceMetrics>,
    pub aggregate: Aggregate,
    pub failures: Vec<Failure>,
}

impl MetricsReport {
    pub fn new(meta: ReportMeta, per_utterance: Vec<UtteranceMetrics>, failures: Vec<Failure>) -> Self {
        let aggregate = Aggregate::of(&per_utterance);
        let summary = match failures.len() {
            0 => format!("{} utterances", per_utterance.len()),
            f => format!("{} utterances, {f} failed", per_utterance.len()),
        };
        Self {
            meta,
            summary,
            per_utterance,
            aggregate,
            failures,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.failures.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// One row per utterance, then `#mean` and `#std` footer rows.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(["id", "lsd", "ssim", "stoi", "si_sdr", "pesq_wb"])?;
        let cell = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for r in &self.per_utterance {
            w.write_record([r.id.clone(), cell(r.lsd), cell(r.ssim), cell(r.stoi), cell(r.si_sdr), cell(r.pesq_wb)])?;
        }
        let a = &self.aggregate;
        w.write_record([
            "#mean".to_string(),
            cell(a.lsd.mean),
            cell(a.ssim.mean),
            cell(a.stoi.mean),
            cell(a.si_sdr.mean),
            String::new(),
        ])?;
        w.write_record([
            "#std".to_string(),
            cell(a.lsd.std),
            cell(a.ssim.std),
            cell(a.stoi.std),
            cell(a.si_sdr.std),
            String::new(),
        ])?;
        let bytes = w.into_inner().map_err(|e| std::io::Error::other(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write(&self, json_path: &Path, csv_path: &Path) -> Result<()> {
        std::fs::write(json_path, self.to_json()?)?;
        std::fs::write(csv_path, self.to_csv()?)?;
        Ok(())
    }
}

/// A reference/estimate file pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvalItem {
    pub id: String,
    pub reference: PathBuf,
    pub estimate: PathBuf,
}

/// Scores every pair in parallel, in item order. Unreadable or mismatched
/// pairs are listed as failures and skipped.
pub fn evaluate_corpus(items: &[EvalItem], set: &MetricSet, meta: ReportMeta) -> MetricsReport {
    let results: Vec<std::result::Result<UtteranceMetrics, Failure>> = items
        .par_iter()
        .map(|item| {
            let run = || -> Result<UtteranceMetrics> {
                let r = read_wav(&item.reference)?;
                let e = read_wav(&item.estimate)?;
                score_pair(&item.id, &r, &e, set)
            };
            run().map_err(|e| Failure {
                id: item.id.clone(),
                error: e.to_string(),
            })
        })
        .collect();
    let mut rows = vec![];
    let mut failures = vec![];
    for r in results {
        match r {
            Ok(m) => rows.push(m),
            Err(f) => failures.push(f),
        }
    }
    MetricsReport::new(meta, rows, failures)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn meta() -> ReportMeta {
        ReportMeta {
            config_hash: "h".into(),
            seed: 1,
            corpus_id: "c".into(),
            reference: "clean".into(),
            estimate: "restored".into(),
        }
    }

    fn row(id: &str, v: f64) -> UtteranceMetrics {
        UtteranceMetrics {
            id: id.into(),
            lsd: Some(v),
            ssim: Some(v / 2.0),
            stoi: None,
            si_sdr: Some(-v),
            pesq_wb: None,
        }
    }

    #[test]
    fn empty_report_is_marked() {
        let r = evaluate_corpus(&[], &MetricSet::default(), meta());
        assert_eq!(r.summary, "0 utterances");
        assert_eq!(r.aggregate.utterances, 0);
        assert!(r.to_json().unwrap().contains("\"0 utterances\""));
        assert!(r.is_complete());
    }

    #[test]
    fn aggregate_means_match() {
        let rows = vec![row("a", 0.1), row("b", 0.7), row("c", 1.3)];
        let r = MetricsReport::new(meta(), rows.clone(), vec![]);
        let mean = rows.iter().map(|r| r.lsd.unwrap()).sum::<f64>() / 3.0;
        assert!((r.aggregate.lsd.mean.unwrap() - mean).abs() < 1e-12);
        assert_eq!(r.aggregate.stoi.count, 0);
        let csv = r.to_csv().unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 6);
        assert!(lines[4].starts_with("#mean,"));
    }

    #[test]
    fn missing_files_are_failures() {
        let items = vec![EvalItem {
            id: "x".into(),
            reference: PathBuf::from("/nonexistent/a.wav"),
            estimate: PathBuf::from("/nonexistent/b.wav"),
        }];
        let r = evaluate_corpus(&items, &MetricSet::default(), meta());
        assert_eq!(r.failures.len(), 1);
        assert!(!r.is_complete());
    }

    #[test]
    fn identical_pair_and_replay() {
        let dir = tempfile::tempdir().unwrap();
        let mut items = vec![];
        for (i, seed) in [3u64, 4].iter().enumerate() {
            let audio = crate::harness::synth_utterance(44100, 44100, *seed).unwrap();
            let clean = dir.path().join(format!("c{i}.wav"));
            let est = dir.path().join(format!("e{i}.wav"));
            crate::harness::write_wav(&clean, &audio, crate::harness::WavFormat::Float32).unwrap();
            let noisy = AudioSegment::new(audio.samples().iter().map(|v| 0.9 * v).collect(), 44100).unwrap();
            let target = if i == 0 { &audio } else { &noisy };
            crate::harness::write_wav(&est, target, crate::harness::WavFormat::Float32).unwrap();
            items.push(EvalItem {
                id: format!("u{i}"),
                reference: clean,
                estimate: est,
            });
        }
        let a = evaluate_corpus(&items, &MetricSet::default(), meta());
        let first = &a.per_utterance[0];
        assert_eq!(first.lsd, Some(0.0));
        assert_eq!(first.ssim, Some(1.0));
        assert!(first.stoi.unwrap() >= 0.99);
        let b = evaluate_corpus(&items, &MetricSet::default(), meta());
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
        assert_eq!(a.to_csv().unwrap(), b.to_csv().unwrap());
    }
}
