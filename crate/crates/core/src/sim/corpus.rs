use std::fmt;
use std::fs;
use std::path::Path;

use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{generate_trajectory, schedule_collisions, simulate_trace, stream_rng, SimConfig};
use crate::data::{read_trace, write_trace, Trace};
use crate::error::{Error, Result};
use crate::io_util::write_atomic_bytes;

pub const CORPUS_MANIFEST: &str = "corpus.json";

const TRAIN_MIN: f64 = 4.0;
const TEST_COLLISION_MIN: f64 = 10.0;
const TEST_FREE_MIN: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    TrainCollision,
    TestCollision,
    TestFree,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::TrainCollision => "train_collision",
            Split::TestCollision => "test_collision",
            Split::TestFree => "test_free",
        }
    }

    pub fn is_test(self) -> bool {
        self != Split::TrainCollision
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Manifest row for one trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryInfo {
    pub name: String,
    pub path: String,
    pub split: Split,
    pub stiffness_level: u8,
    pub duration_s: f64,
    pub seed: u64,
    pub collisions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub info: EntryInfo,
    pub trace: Trace,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    format: String,
    seed: u64,
    scale: f64,
    sim: SimConfig,
    traces: Vec<EntryInfo>,
}

/// Training trace at level 4 plus collision and collision-free test traces
/// at levels 4, 3 and 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub seed: u64,
    pub scale: f64,
    pub sim: SimConfig,
    pub entries: Vec<CorpusEntry>,
}

impl Corpus {
    pub fn get(&self, split: Split, level: u8) -> Result<&CorpusEntry> {
        self.entries
            .iter()
            .find(|e| e.info.split == split && e.info.stiffness_level == level)
            .ok_or_else(|| Error::Input(format!("corpus has no {split} split at level {level}")))
    }

    pub fn training(&self) -> Vec<&Trace> {
        self.entries.iter().filter(|e| e.info.split == Split::TrainCollision).map(|e| &e.trace).collect()
    }

    pub fn tests(&self) -> impl Iterator<Item = &CorpusEntry> {
        self.entries.iter().filter(|e| e.info.split.is_test())
    }
}

fn layout() -> Vec<(Split, u8, f64)> {
    let mut v = vec![(Split::TrainCollision, 4, TRAIN_MIN)];
    for level in [4, 3, 2] {
        v.push((Split::TestCollision, level, TEST_COLLISION_MIN));
    }
    for level in [4, 3, 2] {
        v.push((Split::TestFree, level, TEST_FREE_MIN));
    }
    v
}

/// Generates the full corpus with every duration multiplied by `scale`.
/// Trace seeds are drawn in a fixed order from `seed`.
pub fn generate_corpus(config: &SimConfig, seed: u64, scale: f64) -> Result<Corpus> {
    config.validate()?;
    if !(scale > 0.0 && scale <= 1.0) {
        return Err(Error::Config(format!("scale must be in (0, 1], got {scale}")));
    }
    let mut rng = stream_rng(seed, 0);
    let plan: Vec<(Split, u8, f64, u64)> =
        layout().into_iter().map(|(s, l, min)| (s, l, min * 60.0 * scale, rng.next_u64())).collect();
    let entries = plan
        .into_par_iter()
        .map(|(split, level, duration_s, trace_seed)| {
            let trajectory = generate_trajectory(duration_s, &config.motion, trace_seed)?;
            let events = match split {
                Split::TestFree => Vec::new(),
                _ => schedule_collisions(duration_s, &config.collision, trace_seed ^ 0x5eed)?,
            };
            let trace = simulate_trace(config, level, &events, &trajectory, trace_seed)?;
            let name = format!("{}_L{level}", split.name());
            Ok(CorpusEntry {
                info: EntryInfo {
                    path: format!("{name}.csv"),
                    name,
                    split,
                    stiffness_level: level,
                    duration_s,
                    seed: trace_seed,
                    collisions: events.len(),
                },
                trace,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Corpus { seed, scale, sim: config.clone(), entries })
}

/// Writes every trace and the manifest into `dir`.
pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for entry in &corpus.entries {
        write_trace(&dir.join(&entry.info.path), &entry.trace)?;
    }
    let manifest = Manifest {
        format: "madcnn-corpus".into(),
        seed: corpus.seed,
        scale: corpus.scale,
        sim: corpus.sim.clone(),
        traces: corpus.entries.iter().map(|e| e.info.clone()).collect(),
    };
    let json = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Format(e.to_string()))?;
    write_atomic_bytes(&dir.join(CORPUS_MANIFEST), &json)
}

/// Reads a corpus written by [`write_corpus`].
pub fn load_corpus(dir: &Path) -> Result<Corpus> {
    let path = dir.join(CORPUS_MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)
        .map_err(|e| Error::Parse { path: path.clone(), line: e.line() as u64, message: e.to_string() })?;
    if manifest.format != "madcnn-corpus" {
        return Err(Error::Format(format!("{} is not a corpus manifest", path.display())));
    }
    let mut entries = Vec::with_capacity(manifest.traces.len());
    for info in manifest.traces {
        let trace = read_trace(&dir.join(&info.path))?;
        if trace.stiffness_level() != info.stiffness_level {
            return Err(Error::Format(format!("{} does not match its manifest stiffness", info.path)));
        }
        entries.push(CorpusEntry { info, trace });
    }
    Ok(Corpus { seed: manifest.seed, scale: manifest.scale, sim: manifest.sim, entries })
}
