use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::io::{decode_pfm, encode_pfm};
use super::{frame_rng, synth_frame, write_atomic, Image, SynthParams};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.txt";
const MANIFEST_HEADER: &str = "# p2ad dataset v1: <path> <label> <split>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Label {
    Normal,
    Anomalous,
}

impl Label {
    pub fn is_anomalous(self) -> bool {
        self == Label::Anomalous
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Normal => "normal",
            Label::Anomalous => "anomalous",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" | "0" => Ok(Label::Normal),
            "anomalous" | "1" => Ok(Label::Anomalous),
            other => Err(Error::Malformed(format!("unknown label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledFrame {
    pub frame: Image<f32>,
    pub label: Label,
}

/// Labeled frames split into train and test parts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub train: Vec<LabeledFrame>,
    pub test: Vec<LabeledFrame>,
}

/// Synthesize `n_normal + n_anomalous` frames and split each class with a
/// seeded shuffle, `train_fraction` of it (rounded) going to training.
///
/// Frame `i` draws from its own stream `(seed, i)`, so generation order and
/// parallelism do not affect the content.
pub fn make_dataset(
    params: &SynthParams,
    n_normal: usize,
    n_anomalous: usize,
    seed: u64,
    train_fraction: f64,
) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&train_fraction) {
        return Err(Error::contract(format!("train_fraction {train_fraction} outside [0, 1]")));
    }
    params.validate()?;
    let labels: Vec<Label> = std::iter::repeat_n(Label::Normal, n_normal)
        .chain(std::iter::repeat_n(Label::Anomalous, n_anomalous))
        .collect();
    let frames = labels
        .par_iter()
        .enumerate()
        .map(|(i, &label)| {
            let frame = synth_frame(params, label, &mut frame_rng(seed, i as u64))?;
            Ok(LabeledFrame { frame, label })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut split_rng = frame_rng(seed, u64::MAX);
    let mut dataset = Dataset::default();
    for (range, _) in [(0..n_normal, Label::Normal), (n_normal..n_normal + n_anomalous, Label::Anomalous)] {
        let mut idx: Vec<usize> = range.collect();
        idx.shuffle(&mut split_rng);
        let n_train = (idx.len() as f64 * train_fraction).round() as usize;
        let (tr, te) = idx.split_at(n_train);
        let mut tr = tr.to_vec();
        let mut te = te.to_vec();
        tr.sort_unstable();
        te.sort_unstable();
        dataset.train.extend(tr.into_iter().map(|i| frames[i].clone()));
        dataset.test.extend(te.into_iter().map(|i| frames[i].clone()));
    }
    Ok(dataset)
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.train.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn entries(&self) -> impl Iterator<Item = (Split, usize, &LabeledFrame)> {
        let tag = |split| move |(i, f)| (split, i, f);
        self.train.iter().enumerate().map(tag(Split::Train)).chain(self.test.iter().enumerate().map(tag(Split::Test)))
    }

    /// SHA-256 over split, label, size and raw sample bits of every frame.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for (split, _, f) in self.entries() {
            hasher.update(split.as_str().as_bytes());
            hasher.update(f.label.as_str().as_bytes());
            hasher.update((f.frame.width() as u64).to_le_bytes());
            hasher.update((f.frame.height() as u64).to_le_bytes());
            for v in f.frame.data() {
                hasher.update(v.to_le_bytes());
            }
        }
        hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Frames as PFM files under `dir/frames/`, indexed by a line-oriented
    /// manifest `<path> <label> <split>`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        let frames_dir = dir.join("frames");
        std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
        let mut manifest = String::from(MANIFEST_HEADER);
        manifest.push('\n');
        for (split, i, f) in self.entries() {
            let rel = format!("frames/{}_{i:06}.pfm", split.as_str());
            write_atomic(&dir.join(&rel), &encode_pfm(&f.frame))?;
            manifest.push_str(&format!("{rel} {} {}\n", f.label, split.as_str()));
        }
        write_atomic(&dir.join(MANIFEST_FILE), manifest.as_bytes())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let mut ds = Dataset::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split_whitespace().collect();
            let (rel, label, split) = match cols[..] {
                [rel, label] => (rel, label, "test"),
                [rel, label, split] => (rel, label, split),
                _ => {
                    return Err(Error::Malformed(format!(
                        "{}:{}: expected `<path> <label> [split]`",
                        path.display(),
                        n + 1
                    )))
                }
            };
            let frame_path = dir.join(rel);
            let bytes = std::fs::read(&frame_path).map_err(|e| Error::io(&frame_path, e))?;
            let frame = if rel.ends_with(".pgm") { super::io::decode_pgm(&bytes)? } else { decode_pfm(&bytes)? };
            let item = LabeledFrame { frame, label: label.parse()? };
            match split {
                "train" => ds.train.push(item),
                "test" => ds.test.push(item),
                other => return Err(Error::Malformed(format!("unknown split {other:?}"))),
            }
        }
        Ok(ds)
    }
}
