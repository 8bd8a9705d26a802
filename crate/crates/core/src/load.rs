//! Per-server resource utilization over time.
//!
//! A server's state at timestamp `t` holds the utilization triple in effect
//! during `t` (computing, storage, bandwidth) and the last `k` such triples,
//! newest last. The step rule blends remaining supply, assigned demand and
//! current load through softmax normalizations, then scales the resulting
//! ratios by one shared random factor.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::SimConfig;
use crate::entities::{EdgeServer, ServiceSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadParams {
    pub rho_min: f64,
    pub rho_max: f64,
    pub epsilon: f64,
    pub init_min: f64,
    pub init_max: f64,
    pub scale_min: f64,
    pub scale_max: f64,
    pub k: usize,
}

impl From<&SimConfig> for LoadParams {
    fn from(cfg: &SimConfig) -> Self {
        LoadParams {
            rho_min: cfg.rho_min,
            rho_max: cfg.rho_max,
            epsilon: cfg.epsilon,
            init_min: cfg.init_load_min,
            init_max: cfg.init_load_max,
            scale_min: cfg.load_scale_min,
            scale_max: cfg.load_scale_max,
            k: cfg.k,
        }
    }
}

impl Default for LoadParams {
    fn default() -> Self {
        LoadParams::from(&SimConfig::default())
    }
}

impl LoadParams {
    fn clamp(&self, rho: f64) -> f64 {
        rho.clamp(self.rho_min, self.rho_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadState {
    pub eid: u32,
    pub t: u32,
    rho: [f64; 3],
    history: VecDeque<[f64; 3]>,
    capacity: usize,
}

impl LoadState {
    /// State at `t = 0` with each utilization drawn uniformly from the
    /// configured initial range.
    pub fn initial<R: Rng>(eid: u32, params: &LoadParams, rng: &mut R) -> Self {
        let mut draw = || params.clamp(rng.random_range(params.init_min..=params.init_max));
        let rho = [draw(), draw(), draw()];
        Self::from_history(eid, 0, vec![rho], params.k)
    }

    /// Builds a state from explicit history (oldest first); the last entry
    /// is the current utilization. Only the last `k` entries are kept.
    pub fn from_history(eid: u32, t: u32, history: Vec<[f64; 3]>, k: usize) -> Self {
        assert!(!history.is_empty(), "load history needs a current entry");
        let k = k.max(1);
        let skip = history.len().saturating_sub(k);
        let history: VecDeque<_> = history.into_iter().skip(skip).collect();
        LoadState {
            eid,
            t,
            rho: *history.back().unwrap(),
            history,
            capacity: k,
        }
    }

    pub fn rho(&self) -> [f64; 3] {
        self.rho
    }

    pub fn history(&self) -> impl ExactSizeIterator<Item = &[f64; 3]> + '_ {
        self.history.iter()
    }

    /// Mean absolute change of one resource across the history window;
    /// zero with fewer than two entries.
    pub fn mean_abs_change(&self, resource: usize) -> f64 {
        let n = self.history.len();
        if n < 2 {
            return 0.0;
        }
        let total: f64 = self
            .history
            .iter()
            .zip(self.history.iter().skip(1))
            .map(|(a, b)| (b[resource] - a[resource]).abs())
            .sum();
        total / (n - 1) as f64
    }

    /// Mean signed change of one resource across the history window.
    pub fn trend(&self, resource: usize) -> f64 {
        let n = self.history.len();
        if n < 2 {
            return 0.0;
        }
        (self.history[n - 1][resource] - self.history[0][resource]) / (n - 1) as f64
    }

    fn with_current(&self, rho: [f64; 3]) -> Self {
        let mut next = self.clone();
        next.rho = rho;
        *next.history.back_mut().unwrap() = rho;
        next
    }

    fn advanced(&self, rho: [f64; 3]) -> Self {
        let mut next = self.clone();
        next.t += 1;
        next.rho = rho;
        next.history.push_back(rho);
        while next.history.len() > next.capacity {
            next.history.pop_front();
        }
        next
    }
}

/// Summed preference levels of the services assigned to a server at one
/// timestamp.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DemandTotals {
    pub gamma: [u32; 3],
}

impl DemandTotals {
    pub fn add(&mut self, service: &ServiceSpec) {
        for (g, p) in self.gamma.iter_mut().zip(service.pref) {
            *g += p;
        }
    }
}

/// `(1 - rho) * supply` per resource.
pub fn remaining_supply(state: &LoadState, server: &EdgeServer) -> [f64; 3] {
    let rho = state.rho();
    [0, 1, 2].map(|r| (1.0 - rho[r]) * f64::from(server.supply[r]))
}

pub fn softmax3(x: [f64; 3]) -> [f64; 3] {
    let m = x[0].max(x[1]).max(x[2]);
    let e = x.map(|v| (v - m).exp());
    let sum = e[0] + e[1] + e[2];
    e.map(|v| v / sum)
}

/// Relative utilization after serving `demand`: softmax of
/// `softmax(beta - alpha) + rho`, with `alpha` the normalized remaining supply
/// and `beta` the normalized demand.
pub fn relative_utilization(
    state: &LoadState,
    server: &EdgeServer,
    demand: &DemandTotals,
) -> [f64; 3] {
    let alpha = softmax3(remaining_supply(state, server));
    let beta = softmax3(demand.gamma.map(f64::from));
    let diff = softmax3([beta[0] - alpha[0], beta[1] - alpha[1], beta[2] - alpha[2]]);
    let rho = state.rho();
    softmax3([diff[0] + rho[0], diff[1] + rho[1], diff[2] + rho[2]])
}

/// Turns relative utilizations into loads: `clamp(3 * gamma * g)` for one
/// shared scale `g`, so unclamped loads keep the ratios of `gamma`.
pub fn scale_to_loads(gamma: [f64; 3], g: f64, params: &LoadParams) -> [f64; 3] {
    gamma.map(|v| params.clamp(3.0 * v * g))
}

/// Utilizations in effect at `t + 1`.
pub fn step_load<R: Rng>(
    state: &LoadState,
    server: &EdgeServer,
    demand: &DemandTotals,
    params: &LoadParams,
    rng: &mut R,
) -> LoadState {
    let gamma = relative_utilization(state, server, demand);
    let g = rng.random_range(params.scale_min..=params.scale_max);
    state.advanced(scale_to_loads(gamma, g, params))
}

/// Adds an independent `Uniform(-epsilon, epsilon)` shift to each
/// utilization at the start of a step.
pub fn start_of_step_disturbance<R: Rng>(
    state: &LoadState,
    params: &LoadParams,
    rng: &mut R,
) -> LoadState {
    let eps = params.epsilon;
    let shift = [(); 3].map(|_| rng.random_range(-eps..=eps));
    apply_disturbance(state, shift, params)
}

pub fn apply_disturbance(state: &LoadState, shift: [f64; 3], params: &LoadParams) -> LoadState {
    let rho = state.rho();
    state.with_current([0, 1, 2].map(|r| params.clamp(rho[r] + shift[r])))
}
