//! Synthetic labeled connection logs with controllable class separation.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::flow::{write_conn_log, MultiClass, Proto, RawFlowRecord};
use crate::rng::{derive_seed, seeded};

pub const SYNTH_FILE: &str = "conn.log.labeled";

/// Numeric fields that can carry class signal, in the order they are
/// made informative.
const SIGNAL_FIELDS: [&str; 8] = [
    "orig_bytes",
    "resp_bytes",
    "orig_pkts",
    "resp_pkts",
    "duration",
    "orig_ip_bytes",
    "resp_ip_bytes",
    "resp_p",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    /// 2 (Benign/Malicious) or 7 (the multiclass vocabulary).
    pub classes: usize,
    pub rows_per_class: usize,
    /// How many numeric fields carry class signal (1 to 8).
    pub informative_fields: usize,
    /// Gap between neighboring class centers, in units of `spread`.
    pub separation: f64,
    /// Standard deviation of every informative field within a class.
    pub spread: f64,
    /// Fraction of rows whose label is replaced by a different class.
    pub label_noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            classes: 2,
            rows_per_class: 100,
            informative_fields: 8,
            separation: 8.0,
            spread: 10.0,
            label_noise: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: &str| Err(PipelineError::Config(m.to_string()));
        if self.classes != 2 && self.classes != 7 {
            return bad("classes must be 2 or 7");
        }
        if self.rows_per_class == 0 {
            return bad("rows_per_class must be positive");
        }
        if !(1..=SIGNAL_FIELDS.len()).contains(&self.informative_fields) {
            return bad("informative_fields must be between 1 and 8");
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return bad("label_noise must be in [0, 0.5)");
        }
        if !(self.spread > 0.0 && self.separation >= 0.0) {
            return bad("spread must be positive and separation non-negative");
        }
        Ok(())
    }
}

fn labels_of(classes: usize, c: usize) -> (&'static str, &'static str) {
    if classes == 2 {
        return if c == 0 {
            ("Benign", "-")
        } else {
            ("Malicious", "PartOfAHorizontalPortScan")
        };
    }
    let m = MultiClass::ALL[c];
    let raw = if m == MultiClass::Benign { "Benign" } else { "Malicious" };
    (raw, m.dataset_spelling())
}

/// Generated records, grouped by true class in class order, with their
/// label columns filled in.
pub fn synth_records(spec: &SynthSpec) -> Result<Vec<RawFlowRecord>, PipelineError> {
    spec.validate()?;
    let k = spec.classes;
    let mut layout = seeded(derive_seed(spec.seed, &[0]));
    // Each informative field orders the classes by an independent
    // permutation, so no single field separates every pair on its own.
    let levels: Vec<Vec<usize>> = (0..spec.informative_fields)
        .map(|_| {
            let mut p: Vec<usize> = (0..k).collect();
            p.shuffle(&mut layout);
            p
        })
        .collect();
    let noise = Normal::new(0.0, spec.spread).expect("positive spread");
    let mut rng = seeded(derive_seed(spec.seed, &[1]));
    let mut out = Vec::with_capacity(k * spec.rows_per_class);
    let center = |field: usize, c: usize| (levels[field][c] as f64 + 1.0) * spec.separation * spec.spread;
    let states = ["S0", "SF", "REJ", "OTH"];
    let services = [None, Some("dns"), Some("http")];
    for c in 0..k {
        for i in 0..spec.rows_per_class {
            let mut v = [0.0f64; 8];
            for (f, slot) in v.iter_mut().enumerate() {
                *slot = if f < spec.informative_fields {
                    (center(f, c) + noise.sample(&mut rng)).max(0.0)
                } else {
                    (spec.separation * spec.spread + noise.sample(&mut rng)).max(0.0)
                };
            }
            let shown = if spec.label_noise > 0.0 && rng.random::<f64>() < spec.label_noise {
                (c + rng.random_range(1..k)) % k
            } else {
                c
            };
            let (raw, detailed) = labels_of(k, shown);
            let n = out.len();
            out.push(RawFlowRecord {
                ts: 1_500_000_000.0 + n as f64 * 0.5,
                uid: format!("S{:08x}", n),
                orig_h: format!("192.168.{}.{}", 1 + (i % 200), 1 + (n % 250)),
                orig_p: rng.random_range(1024..65535),
                resp_h: format!("{}.{}.{}.{}", 11 + (n % 200), rng.random_range(0..255), rng.random_range(0..255), 1 + (n % 254)),
                resp_p: 1 + (v[7].round() as u64 % 65535) as u16,
                proto: if rng.random::<bool>() { Proto::Tcp } else { Proto::Udp },
                service: services[rng.random_range(0..services.len())].map(str::to_string),
                duration: Some((v[4] / 100.0 * 1e6).round() / 1e6),
                orig_bytes: Some(v[0].round() as u64),
                resp_bytes: Some(v[1].round() as u64),
                conn_state: states[rng.random_range(0..states.len())].to_string(),
                local_orig: None,
                local_resp: None,
                missed_bytes: Some(0),
                history: Some("S".into()),
                orig_pkts: Some(v[2].round() as u64),
                orig_ip_bytes: Some(v[5].round() as u64),
                resp_pkts: Some(v[3].round() as u64),
                resp_ip_bytes: Some(v[6].round() as u64),
                tunnel_parents: None,
                raw_label: Some(raw.to_string()),
                raw_detailed_label: Some(detailed.to_string()),
            });
        }
    }
    Ok(out)
}

/// Writes one labeled log into `out_dir` and returns its path.
pub fn cmd_synth(spec: &SynthSpec, out_dir: &Path) -> Result<PathBuf, PipelineError> {
    let records = synth_records(spec)?;
    fs::create_dir_all(out_dir).map_err(PipelineError::io(out_dir))?;
    let path = out_dir.join(SYNTH_FILE);
    fs::write(&path, write_conn_log(&records, true)).map_err(PipelineError::io(&path))?;
    Ok(path)
}
