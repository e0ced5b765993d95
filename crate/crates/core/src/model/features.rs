use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{NodeId, Tape};
use crate::pointgroup::{BlockLayout, Channel};

/// Which edge features feed the message weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureMode {
    /// Positions, velocities and relative position as geometric blocks, plus
    /// the squared distance.
    #[serde(rename = "degnn")]
    Degnn,
    /// Squared distance only.
    #[serde(rename = "En")]
    En,
    /// Squared norms of both positions.
    #[serde(rename = "On")]
    On,
    /// Relative position only.
    #[serde(rename = "Tn")]
    Tn,
    /// Raw positions and velocities without orbit augmentation.
    #[serde(rename = "plain")]
    Plain,
}

impl FeatureMode {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureMode::Degnn => "degnn",
            FeatureMode::En => "En",
            FeatureMode::On => "On",
            FeatureMode::Tn => "Tn",
            FeatureMode::Plain => "plain",
        }
    }

    pub fn all() -> [FeatureMode; 5] {
        [
            FeatureMode::Degnn,
            FeatureMode::En,
            FeatureMode::On,
            FeatureMode::Tn,
            FeatureMode::Plain,
        ]
    }

    /// Geometric blocks and scalar channels, in feature order.
    pub fn layout(self, dim: usize) -> BlockLayout {
        use Channel::{Geometric as G, Scalar as S};
        let channels = match self {
            FeatureMode::Degnn => vec![G, G, G, G, G, S],
            FeatureMode::En => vec![S],
            FeatureMode::On => vec![S, S],
            FeatureMode::Tn => vec![G],
            FeatureMode::Plain => vec![G, G, G, G],
        };
        BlockLayout::new(dim, channels)
    }
}

impl std::fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        FeatureMode::all()
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Config(format!("unknown feature mode {s:?}")))
    }
}

/// Squared norm summed in sorted order, matching the tape.
fn sq_norm(v: &[f64]) -> f64 {
    let mut sq: Vec<f64> = v.iter().map(|x| x * x).collect();
    sq.sort_unstable_by(f64::total_cmp);
    sq.iter().sum()
}

/// Edge features for one ordered pair. Geometric blocks come first, then
/// scalar channels, as described by the returned layout.
pub fn build_features(
    mode: FeatureMode,
    q_i: &[f64],
    q_j: &[f64],
    qdot_i: &[f64],
    qdot_j: &[f64],
) -> (Vec<f64>, BlockLayout) {
    let diff: Vec<f64> = q_i.iter().zip(q_j).map(|(a, b)| a - b).collect();
    let x = match mode {
        FeatureMode::Degnn => [q_i, q_j, qdot_i, qdot_j, &diff, &[sq_norm(&diff)]].concat(),
        FeatureMode::En => vec![sq_norm(&diff)],
        FeatureMode::On => vec![sq_norm(q_i), sq_norm(q_j)],
        FeatureMode::Tn => diff,
        FeatureMode::Plain => [q_i, q_j, qdot_i, qdot_j].concat(),
    };
    (x, mode.layout(q_i.len()))
}

/// Nodes holding the geometric part and the scalar part of an edge's
/// features. Either may be absent.
pub(crate) struct EdgeFeatureNodes {
    pub geometric: Option<NodeId>,
    pub scalars: Option<NodeId>,
}

/// Tape version of [`build_features`]; `diff` is the node for `q_i − q_j`.
pub(crate) fn record_features(
    tape: &mut Tape<'_>,
    mode: FeatureMode,
    pos: (NodeId, NodeId),
    vel: (NodeId, NodeId),
    diff: NodeId,
) -> Result<EdgeFeatureNodes> {
    let (qi, qj) = pos;
    let (vi, vj) = vel;
    let (geometric, scalars) = match mode {
        FeatureMode::Degnn => (
            Some(tape.concat(&[qi, qj, vi, vj, diff])?),
            Some(tape.sq_norm(diff)?),
        ),
        FeatureMode::En => (None, Some(tape.sq_norm(diff)?)),
        FeatureMode::On => {
            let a = tape.sq_norm(qi)?;
            let b = tape.sq_norm(qj)?;
            (None, Some(tape.concat(&[a, b])?))
        }
        FeatureMode::Tn => (Some(diff), None),
        FeatureMode::Plain => (Some(tape.concat(&[qi, qj, vi, vj])?), None),
    };
    Ok(EdgeFeatureNodes {
        geometric,
        scalars,
    })
}
