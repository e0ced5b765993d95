//! Supervised forecasting pairs and their line-delimited file format.
//!
//! A dataset file is UTF-8 JSON Lines. The first line is a header:
//!
//! ```text
//! {"schema":"degnn.nbody","version":1,"split":"train","count":50,
//!  "base_seed":7,"delta_frames":10,"config":{"n":5,"box":[5,4,3],
//!  "kind":"charged","dt":0.02,"softening":0.1,"heading":null}}
//! ```
//!
//! Every following line is one sample:
//!
//! ```text
//! {"kind":"charged","box":[5,4,3],"n":5,"dt":0.02,"delta_frames":10,
//!  "q":[...],"qdot":[...],"u":[...],"a_ij":[...],"target_q":[...]}
//! ```
//!
//! `q`, `qdot` and `target_q` are flattened `n × dim` arrays (object major).
//! Edges are implicit: all ordered pairs `i ≠ j` with `i` major, and `a_ij`
//! lists their attributes in that order. Floats are written in shortest
//! round-trip form, so a write/read cycle is lossless.

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pointgroup::GroupElement;
use crate::sim::{fully_connected, simulate, BoxSpec, SimConfig, SystemKind, SystemState};

pub const DATASET_SCHEMA: &str = "degnn.nbody";
pub const DATASET_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn seed_offset(self) -> u64 {
        // Disjoint blocks of 2^40 seeds per split.
        match self {
            Split::Train => 0,
            Split::Val => 1 << 40,
            Split::Test => 2 << 40,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: SystemState,
    /// Positions `delta_frames` steps after `input`, flat `n × dim`.
    pub target: Vec<f64>,
}

impl Sample {
    pub fn transformed(&self, e: &GroupElement) -> Result<Sample> {
        Ok(Sample {
            input: self.input.transformed(e)?,
            target: e.apply(&self.target, None)?,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub split: Split,
    pub config: SimConfig,
    pub delta_frames: usize,
    pub base_seed: u64,
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Forecast horizon in time units.
    pub fn horizon(&self) -> f64 {
        self.delta_frames as f64 * self.config.dt
    }

    /// Maps positions, velocities and targets of every sample by `e`.
    pub fn transformed(&self, e: &GroupElement) -> Result<Dataset> {
        Ok(Dataset {
            samples: self
                .samples
                .iter()
                .map(|s| s.transformed(e))
                .collect::<Result<_>>()?,
            ..self.clone()
        })
    }
}

fn make_split(
    cfg: &SimConfig,
    split: Split,
    count: usize,
    delta_frames: usize,
    base_seed: u64,
) -> Result<Dataset> {
    let samples = (0..count as u64)
        .into_par_iter()
        .map(|k| {
            let seed = base_seed.wrapping_add(split.seed_offset()).wrapping_add(k);
            let traj = simulate(cfg, delta_frames + 1, seed)?;
            let mut frames = traj.frames;
            let target = frames.pop().expect("at least one frame").q;
            let input = frames.swap_remove(0);
            Ok(Sample { input, target })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        split,
        config: cfg.clone(),
        delta_frames,
        base_seed,
        samples,
    })
}

/// Generates train/val/test sets with one (frame 0, frame `delta_frames`)
/// pair per trajectory.
pub fn make_dataset(
    cfg: &SimConfig,
    counts: (usize, usize, usize),
    delta_frames: usize,
    base_seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    cfg.validate()?;
    if counts.0 == 0 || counts.1 == 0 || counts.2 == 0 {
        return Err(Error::Config(format!("every split needs samples, got {counts:?}")));
    }
    if delta_frames == 0 {
        return Err(Error::Config("target frame offset must be at least 1".into()));
    }
    Ok((
        make_split(cfg, Split::Train, counts.0, delta_frames, base_seed)?,
        make_split(cfg, Split::Val, counts.1, delta_frames, base_seed)?,
        make_split(cfg, Split::Test, counts.2, delta_frames, base_seed)?,
    ))
}

#[derive(Serialize, Deserialize)]
struct Header {
    schema: String,
    version: u32,
    split: Split,
    count: usize,
    base_seed: u64,
    delta_frames: usize,
    config: SimConfig,
}

#[derive(Serialize, Deserialize)]
struct Record {
    kind: SystemKind,
    #[serde(rename = "box")]
    box_spec: BoxSpec,
    n: usize,
    dt: f64,
    delta_frames: usize,
    q: Vec<f64>,
    qdot: Vec<f64>,
    u: Vec<f64>,
    a_ij: Vec<f64>,
    target_q: Vec<f64>,
}

pub fn write_dataset<W: Write>(mut w: W, ds: &Dataset) -> Result<()> {
    let header = Header {
        schema: DATASET_SCHEMA.to_string(),
        version: DATASET_VERSION,
        split: ds.split,
        count: ds.samples.len(),
        base_seed: ds.base_seed,
        delta_frames: ds.delta_frames,
        config: ds.config.clone(),
    };
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    for s in &ds.samples {
        let rec = Record {
            kind: ds.config.kind,
            box_spec: ds.config.box_spec.clone(),
            n: s.input.n(),
            dt: ds.config.dt,
            delta_frames: ds.delta_frames,
            q: s.input.q.clone(),
            qdot: s.input.qdot.clone(),
            u: s.input.u.clone(),
            a_ij: s.input.edge_attrs.clone(),
            target_q: s.target.clone(),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_dataset<R: BufRead>(r: R) -> Result<Dataset> {
    let mut lines = r.lines().enumerate();
    let bad = |line: usize, reason: String| Error::DatasetFormat {
        line: line + 1,
        reason,
    };
    let (_, first) = lines
        .next()
        .ok_or_else(|| bad(0, "empty file".into()))?;
    let header: Header = serde_json::from_str(&first?).map_err(|e| bad(0, e.to_string()))?;
    if header.schema != DATASET_SCHEMA {
        return Err(bad(0, format!("unknown schema {}", header.schema)));
    }
    if header.version != DATASET_VERSION {
        return Err(bad(0, format!("unsupported version {}", header.version)));
    }
    let cfg = header.config;
    let dim = cfg.dim();
    let edges = fully_connected(cfg.n);

    let mut samples = Vec::with_capacity(header.count);
    for (idx, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| bad(idx, e.to_string()))?;
        if rec.kind != cfg.kind || rec.n != cfg.n || rec.box_spec != cfg.box_spec {
            return Err(bad(idx, "record disagrees with header configuration".into()));
        }
        if rec.delta_frames != header.delta_frames || rec.dt != cfg.dt {
            return Err(bad(idx, "record time settings disagree with header".into()));
        }
        if rec.target_q.len() != cfg.n * dim || rec.a_ij.len() != edges.len() {
            return Err(bad(idx, "array lengths do not match n and dim".into()));
        }
        let mut input = SystemState::new(dim, rec.q, rec.qdot, rec.u).map_err(|e| bad(idx, e.to_string()))?;
        input.edge_attrs = rec.a_ij;
        samples.push(Sample {
            input,
            target: rec.target_q,
        });
    }
    if samples.len() != header.count {
        return Err(bad(
            0,
            format!("header announces {} samples, found {}", header.count, samples.len()),
        ));
    }
    Ok(Dataset {
        split: header.split,
        config: cfg,
        delta_frames: header.delta_frames,
        base_seed: header.base_seed,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SimConfig {
        SimConfig::new(5, BoxSpec::new(vec![5.0, 4.0, 3.0]).unwrap(), SystemKind::Charged)
    }

    #[test]
    fn split_sizes_and_pairs() {
        let (tr, va, te) = make_dataset(&cfg(), (6, 4, 3), 10, 1).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (6, 4, 3));
        assert_eq!(tr.split, Split::Train);
        // target is frame 10 of the same trajectory
        let traj = simulate(&cfg(), 11, 1).unwrap();
        assert_eq!(tr.samples[0].input, traj.frames[0]);
        assert_eq!(tr.samples[0].target, traj.frames[10].q);
        assert!((tr.horizon() - 0.2).abs() < 1e-15);
        // no sample is shared between splits
        for s in &va.samples {
            assert!(tr.samples.iter().all(|t| t.input.q != s.input.q));
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = make_dataset(&cfg(), (3, 2, 2), 5, 42).unwrap();
        let b = make_dataset(&cfg(), (3, 2, 2), 5, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_empty_splits() {
        assert!(make_dataset(&cfg(), (0, 1, 1), 10, 0).is_err());
        assert!(make_dataset(&cfg(), (1, 1, 1), 0, 0).is_err());
    }

    #[test]
    fn file_round_trip_is_lossless() {
        let (tr, _, _) = make_dataset(&cfg(), (4, 1, 1), 3, 9).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &tr).unwrap();
        assert_eq!(buf.iter().filter(|b| **b == b'\n').count(), 5);
        let back = read_dataset(buf.as_slice()).unwrap();
        assert_eq!(back, tr);
    }

    #[test]
    fn malformed_files_report_line() {
        let (tr, _, _) = make_dataset(&cfg(), (2, 1, 1), 3, 9).unwrap();
        let mut buf = Vec::new();
        write_dataset(&mut buf, &tr).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        lines[2] = "{\"kind\":\"charged\"}";
        let err = read_dataset(lines.join("\n").as_bytes()).unwrap_err();
        assert!(matches!(err, Error::DatasetFormat { line: 3, .. }), "{err}");
        let truncated = text.lines().take(2).collect::<Vec<_>>().join("\n");
        assert!(read_dataset(truncated.as_bytes()).is_err());
        assert!(read_dataset("".as_bytes()).is_err());
    }
}
