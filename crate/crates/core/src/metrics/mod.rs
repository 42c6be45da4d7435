//! Objective scores: log-spectral distance, spectrogram SSIM, STOI, SI-SDR,
//! and corpus reports.

mod report;
mod spectral;
mod stoi;

pub use report::{
    evaluate_corpus, score_pair, Aggregate, EvalItem, Failure, MetricSet, MetricsReport, ReportMeta, Summary,
    UtteranceMetrics,
};
pub use spectral::{
    lsd, lsd_power, si_sdr, ssim_image, ssim_spec, LSD_FLOOR, METRIC_FFT, METRIC_HOP, SI_SDR_CAP, SSIM_K1, SSIM_K2,
    SSIM_SIGMA, SSIM_WINDOW,
};
pub use stoi::stoi;
