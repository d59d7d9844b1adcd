use std::fmt;

use crate::linalg::{Mat, Vector};
use crate::model::Dimensions;

use super::MomentsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Control,
    Disturbance,
}

impl Channel {
    pub fn width(&self, dims: &Dimensions) -> usize {
        match self {
            Channel::Control => dims.q,
            Channel::Disturbance => dims.l,
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Channel::Control => "control",
            Channel::Disturbance => "disturbance",
        })
    }
}

/// Feedback `p(k) = G(k) x(k) + Gt(k) E[x(k)] + o(k)`.
///
/// The offset `o(k)` is a deterministic open-loop term. It is zero for the
/// synthesized policies and is used to excite a system started at rest.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearPolicy {
    pub channel: Channel,
    pub gains: Vec<Mat>,
    pub mean_gains: Vec<Mat>,
    pub offsets: Vec<Vector>,
}

impl LinearPolicy {
    pub fn new(channel: Channel, gains: Vec<Mat>, mean_gains: Vec<Mat>) -> Self {
        let offsets = gains.iter().map(|g| Vector::zeros(g.nrows())).collect();
        Self {
            channel,
            gains,
            mean_gains,
            offsets,
        }
    }

    pub fn zero(channel: Channel, dims: &Dimensions) -> Self {
        let p = channel.width(dims);
        let gains = vec![Mat::zeros(p, dims.n); dims.stages()];
        Self::new(channel, gains.clone(), gains)
    }

    /// Pure open-loop sequence `p(k) = o(k)`.
    pub fn open_loop(channel: Channel, dims: &Dimensions, offsets: Vec<Vector>) -> Self {
        Self {
            offsets,
            ..Self::zero(channel, dims)
        }
    }

    pub fn with_offsets(mut self, offsets: Vec<Vector>) -> Self {
        self.offsets = offsets;
        self
    }

    /// Adds `excitation` to the open-loop term at `k = 0`.
    pub fn with_initial_excitation(mut self, excitation: &Vector) -> Self {
        self.offsets[0] += excitation;
        self
    }

    /// `G(k) + Gt(k)`, the gain acting on the mean.
    pub fn mean_gain(&self, k: usize) -> Mat {
        &self.gains[k] + &self.mean_gains[k]
    }

    pub fn has_offsets(&self) -> bool {
        self.offsets.iter().any(|o| o.amax() != 0.0)
    }

    pub fn horizon(&self) -> usize {
        self.gains.len().saturating_sub(1)
    }

    pub fn check(&self, dims: &Dimensions, expected: Channel) -> Result<(), MomentsError> {
        if self.channel != expected {
            return Err(MomentsError::WrongChannel {
                expected,
                found: self.channel,
            });
        }
        let stages = dims.stages();
        for (what, len) in [
            ("gains", self.gains.len()),
            ("mean_gains", self.mean_gains.len()),
            ("offsets", self.offsets.len()),
        ] {
            if len != stages {
                return Err(MomentsError::PolicyLength {
                    channel: self.channel,
                    what,
                    expected: stages,
                    found: len,
                });
            }
        }
        let p = self.channel.width(dims);
        for k in 0..stages {
            for m in [&self.gains[k], &self.mean_gains[k]] {
                if m.shape() != (p, dims.n) {
                    return Err(MomentsError::PolicyShape {
                        channel: self.channel,
                        k,
                        expected: (p, dims.n),
                        found: m.shape(),
                    });
                }
            }
            if self.offsets[k].len() != p {
                return Err(MomentsError::PolicyShape {
                    channel: self.channel,
                    k,
                    expected: (p, 1),
                    found: (self.offsets[k].len(), 1),
                });
            }
        }
        Ok(())
    }
}
