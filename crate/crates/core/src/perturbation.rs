//! Edge perturbation: a fixed random feedforward network over
//! `(uid, eid, sid)` whose outputs are min-max scaled into `[0, 0.2]` across
//! every triple present in the dataset.

use std::collections::BTreeMap;

use rand::Rng;

use crate::error::{Error, Result};
use crate::qos::MinMax;
use crate::rng;

pub const EDGE_PERTURBATION_MAX: f64 = 0.2;

const FEATURES: usize = 16;
const HIDDEN: usize = 32;

/// Sinusoidal feature expansion of the scaled ids, one tanh hidden layer
/// and a scalar output. Weights are drawn once from the seed.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForward {
    freq: [[f64; 3]; FEATURES],
    phase: [f64; FEATURES],
    w1: [[f64; FEATURES]; HIDDEN],
    b1: [f64; HIDDEN],
    w2: [f64; HIDDEN],
    b2: f64,
}

impl FeedForward {
    pub fn new(seed: u64) -> Self {
        let mut rng = rng::stream(seed, "perturbation", 0);
        let mut u = |scale: f64| rng.random_range(-scale..=scale);
        let freq = [(); FEATURES].map(|_| [(); 3].map(|_| u(20.0)));
        let phase = [(); FEATURES].map(|_| u(std::f64::consts::PI));
        let w1_scale = (3.0 / FEATURES as f64).sqrt();
        let w1 = [(); HIDDEN].map(|_| [(); FEATURES].map(|_| u(w1_scale)));
        let b1 = [(); HIDDEN].map(|_| u(0.5));
        let w2_scale = (3.0 / HIDDEN as f64).sqrt();
        let w2 = [(); HIDDEN].map(|_| u(w2_scale));
        let b2 = u(0.1);
        FeedForward {
            freq,
            phase,
            w1,
            b1,
            w2,
            b2,
        }
    }

    pub fn forward(&self, x: [f64; 3]) -> f64 {
        let features: [f64; FEATURES] = std::array::from_fn(|j| {
            let z: f64 = (0..3).map(|i| self.freq[j][i] * x[i]).sum();
            (z + self.phase[j]).sin()
        });
        let mut out = self.b2;
        for h in 0..HIDDEN {
            let z: f64 = self.b1[h]
                + (0..FEATURES)
                    .map(|j| self.w1[h][j] * features[j])
                    .sum::<f64>();
            out += self.w2[h] * z.tanh();
        }
        out
    }
}

/// Id populations used to scale triples into `[0, 1)` before the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdSpace {
    pub users: usize,
    pub servers: usize,
    pub services: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationModel {
    net: FeedForward,
    ids: IdSpace,
    raw: BTreeMap<(u32, u32, u32), f64>,
    range: Option<MinMax>,
}

impl PerturbationModel {
    /// Evaluates the network on every distinct triple and records the output
    /// range used for scaling.
    pub fn fit(
        triples: impl IntoIterator<Item = (u32, u32, u32)>,
        ids: IdSpace,
        seed: u64,
    ) -> Self {
        let net = FeedForward::new(seed);
        let mut raw = BTreeMap::new();
        for triple in triples {
            raw.entry(triple)
                .or_insert_with(|| net.forward(Self::scaled(ids, triple)));
        }
        let range = MinMax::of(raw.values().copied());
        PerturbationModel {
            net,
            ids,
            raw,
            range,
        }
    }

    fn scaled(ids: IdSpace, (u, e, s): (u32, u32, u32)) -> [f64; 3] {
        let frac = |v: u32, n: usize| f64::from(v) / n.max(1) as f64;
        [
            frac(u, ids.users),
            frac(e, ids.servers),
            frac(s, ids.services),
        ]
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn range(&self) -> Option<MinMax> {
        self.range
    }

    pub fn raw_output(&self, uid: u32, eid: u32, sid: u32) -> Result<f64> {
        self.raw
            .get(&(uid, eid, sid))
            .copied()
            .ok_or(Error::UnknownTriple(uid, eid, sid))
    }

    /// Scaled perturbation in `[0, 0.2]`.
    pub fn delta(&self, uid: u32, eid: u32, sid: u32) -> Result<f64> {
        let raw = self.raw_output(uid, eid, sid)?;
        let range = self.range.expect("non-empty after a successful lookup");
        Ok(range.apply(raw) * EDGE_PERTURBATION_MAX)
    }

    pub fn deltas(&self) -> impl Iterator<Item = ((u32, u32, u32), f64)> + '_ {
        self.raw
            .keys()
            .map(|&(u, e, s)| ((u, e, s), self.delta(u, e, s).unwrap()))
    }

    /// Network output for any triple, fitted or not.
    pub fn evaluate(&self, triple: (u32, u32, u32)) -> f64 {
        self.net.forward(Self::scaled(self.ids, triple))
    }
}
