//! Simulation parameters.
//!
//! Keys in the config file use the parameter names directly
//! (`delta_t = 30`, `t_max = 3600`, `theta_rt = 1.6`, ...). Anything not
//! given falls back to the defaults below.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::{BearingConvention, GeoConstants};

/// How services are drawn for each covered user snapshot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvocationMode {
    /// Every service is invoked once per snapshot.
    Full,
    /// `services_per_snapshot` distinct services are drawn per snapshot.
    #[default]
    Sampled,
}

impl std::str::FromStr for InvocationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full" => Ok(InvocationMode::Full),
            "sampled" => Ok(InvocationMode::Sampled),
            other => Err(Error::Config(format!("unknown invocation mode `{other}`"))),
        }
    }
}

/// Capacity used as the downlink transmission denominator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DownlinkDenominator {
    /// Divide by the bandwidth utilization fraction.
    BandwidthUtilization,
    /// Divide by the server's full bandwidth (exclusive, serial downlink).
    #[default]
    FullBandwidth,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Minimal latitude of the region.
    pub phi_min: f64,
    pub phi_max: f64,
    /// Minimal longitude of the region.
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Coverage radius bounds in meters.
    pub r_min: u32,
    pub r_max: u32,
    pub n_u: usize,
    pub n_s: usize,
    /// Maximal resource level.
    pub p: u32,
    /// Alignment window in seconds.
    pub delta_t: u32,
    /// Cap on local time in seconds.
    pub t_max: u32,
    pub c_min: usize,
    /// Longest allowed run of identical consecutive positions.
    pub s: usize,
    /// Base delay in seconds.
    pub theta_rt: f64,
    /// Base jitter in milliseconds.
    pub theta_nj: f64,
    /// History window length (load and direction).
    pub k: usize,
    /// First packet size in MB.
    pub b_c: f64,
    /// First server bandwidth in Mbps.
    pub b_e: f64,

    pub seed: u64,
    /// Half-width of the uniform load disturbance applied at each step.
    pub epsilon: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub init_load_min: f64,
    pub init_load_max: f64,
    /// Range of the shared scale drawn when turning load ratios into loads.
    pub load_scale_min: f64,
    pub load_scale_max: f64,
    pub mode: InvocationMode,
    pub services_per_snapshot: usize,
    /// Tolerance in degrees for "same position" in the stationary filter.
    pub stationary_epsilon: f64,
    pub earth_radius_m: f64,
    pub bearing_convention: BearingConvention,
    pub downlink_denominator: DownlinkDenominator,
    pub rt_bin_width: f64,
    pub nj_bin_width: f64,
    /// Vehicles and stations produced when running on synthetic inputs.
    pub synth_vehicles: usize,
    pub synth_stations: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            phi_min: 31.050,
            phi_max: 31.372,
            lambda_min: 121.259,
            lambda_max: 121.640,
            r_min: 600,
            r_max: 1200,
            n_u: 2000,
            n_s: 135,
            p: 3,
            delta_t: 30,
            t_max: 3600,
            c_min: 30,
            s: 3,
            theta_rt: 1.6,
            theta_nj: 160.0,
            k: 5,
            b_c: 0.5,
            b_e: 512.0,

            seed: 0,
            epsilon: 0.05,
            rho_min: 0.01,
            rho_max: 0.99,
            init_load_min: 0.05,
            init_load_max: 0.30,
            load_scale_min: 0.1,
            load_scale_max: 0.95,
            mode: InvocationMode::Sampled,
            services_per_snapshot: 1,
            stationary_epsilon: 0.0,
            earth_radius_m: crate::geo::EARTH_RADIUS_M,
            bearing_convention: BearingConvention::EastReferenced,
            downlink_denominator: DownlinkDenominator::FullBandwidth,
            rt_bin_width: 0.05,
            nj_bin_width: 10.0,
            synth_vehicles: 3000,
            synth_stations: 2400,
        }
    }
}

impl SimConfig {
    /// Small configuration that runs in well under a second on synthetic input.
    pub fn desk() -> Self {
        SimConfig {
            n_u: 20,
            synth_vehicles: 50,
            synth_stations: 400,
            ..SimConfig::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: SimConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io_at(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn geo(&self) -> GeoConstants {
        GeoConstants {
            earth_radius_m: self.earth_radius_m,
            ..GeoConstants::default()
        }
    }

    /// Number of alignment windows, i.e. the largest possible per-user
    /// timestamp count.
    pub fn window_count(&self) -> u32 {
        self.t_max / self.delta_t
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: &str| Err(Error::Config(msg.to_string()));
        let finite = [
            self.phi_min,
            self.phi_max,
            self.lambda_min,
            self.lambda_max,
            self.theta_rt,
            self.theta_nj,
            self.b_c,
            self.b_e,
            self.epsilon,
            self.rho_min,
            self.rho_max,
            self.init_load_min,
            self.init_load_max,
            self.load_scale_min,
            self.load_scale_max,
            self.stationary_epsilon,
            self.earth_radius_m,
            self.rt_bin_width,
            self.nj_bin_width,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("all real-valued parameters must be finite");
        }
        if self.phi_min >= self.phi_max {
            return fail("phi_min must be below phi_max");
        }
        if self.lambda_min >= self.lambda_max {
            return fail("lambda_min must be below lambda_max");
        }
        if !(-90.0..=90.0).contains(&self.phi_min) || !(-90.0..=90.0).contains(&self.phi_max) {
            return fail("latitude bounds must lie in [-90, 90]");
        }
        if !(-180.0..=180.0).contains(&self.lambda_min)
            || !(-180.0..=180.0).contains(&self.lambda_max)
        {
            return fail("longitude bounds must lie in [-180, 180]");
        }
        if self.r_min > self.r_max {
            return fail("r_min must not exceed r_max");
        }
        if self.delta_t == 0 {
            return fail("delta_t must be positive");
        }
        if self.t_max < self.delta_t {
            return fail("t_max must be at least delta_t");
        }
        if self.p < 1 {
            return fail("p must be at least 1");
        }
        if self.n_s < 1 {
            return fail("n_s must be at least 1");
        }
        if self.c_min < 1 {
            return fail("c_min must be at least 1");
        }
        if self.k < 2 {
            return fail("k must be at least 2");
        }
        if self.theta_rt <= 0.0 || self.theta_nj <= 0.0 {
            return fail("theta_rt and theta_nj must be positive");
        }
        if self.b_c <= 0.0 || self.b_e <= 0.0 {
            return fail("b_c and b_e must be positive");
        }
        if !(0.0 < self.rho_min && self.rho_min < self.rho_max && self.rho_max < 1.0) {
            return fail("utilization clamp must satisfy 0 < rho_min < rho_max < 1");
        }
        if !(0.0 <= self.init_load_min && self.init_load_min <= self.init_load_max) {
            return fail("initial load range is empty");
        }
        if !(0.0 < self.load_scale_min && self.load_scale_min <= self.load_scale_max) {
            return fail("load scale range must be positive and non-empty");
        }
        if self.epsilon < 0.0 || self.stationary_epsilon < 0.0 {
            return fail("epsilon values must be non-negative");
        }
        if self.earth_radius_m <= 0.0 {
            return fail("earth_radius_m must be positive");
        }
        if self.mode == InvocationMode::Sampled
            && !(1..=self.n_s).contains(&self.services_per_snapshot)
        {
            return fail("services_per_snapshot must lie in [1, n_s]");
        }
        if self.rt_bin_width <= 0.0 || self.nj_bin_width <= 0.0 {
            return fail("histogram bin widths must be positive");
        }
        Ok(())
    }
}
