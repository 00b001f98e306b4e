#![allow(dead_code)]

use icubench::experiment::ExperimentConfig;
use icubench::synth::{self, SynthConfig};
use tempfile::TempDir;

/// Writes a synthetic corpus into a fresh temporary directory.
pub fn synth_dir(cfg: &SynthConfig) -> TempDir {
    let dir = tempfile::tempdir().expect("temp dir");
    synth::generate(cfg).expect("generate").write_to_dir(dir.path()).expect("write corpus");
    dir
}

pub fn synth_cfg(n_patients: usize, seed: u64, signal: f64) -> SynthConfig {
    SynthConfig {
        n_patients,
        seed,
        signal_strength: signal,
        ..SynthConfig::default()
    }
}

/// A quick experiment configuration over `data`.
pub fn small_experiment(data: &std::path::Path, out: &std::path::Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        data_dir: data.to_path_buf(),
        out_dir: out.to_path_buf(),
        ..ExperimentConfig::default()
    };
    cfg.hyper.hidden = 8;
    cfg.hyper.ann_hidden = 8;
    cfg.hyper.epochs = 2;
    cfg.hyper.batch_size = 32;
    cfg
}
