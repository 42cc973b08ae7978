//! Per-round uplink/downlink rates from a log-distance path-loss link budget,
//! Rayleigh block fading and a CQI spectral-efficiency table.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FadingModel {
    /// No small-scale fading; the link budget alone sets the SNR.
    None,
    /// Unit-mean exponential power gain, constant within a round, i.i.d. across rounds.
    Rayleigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Link {
    Uplink,
    Downlink,
}

impl Link {
    pub fn name(self) -> &'static str {
        match self {
            Link::Uplink => "uplink",
            Link::Downlink => "downlink",
        }
    }
}

/// Coarse channel quality presets, expressed as path-loss exponents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelState {
    Good,
    Normal,
    Poor,
}

impl ChannelState {
    pub const ALL: [ChannelState; 3] =
        [ChannelState::Good, ChannelState::Normal, ChannelState::Poor];

    pub fn pathloss_exponent(self) -> f64 {
        match self {
            ChannelState::Good => 2.0,
            ChannelState::Normal => 4.0,
            ChannelState::Poor => 6.0,
        }
    }
}

impl fmt::Display for ChannelState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ChannelState::Good => "good",
            ChannelState::Normal => "normal",
            ChannelState::Poor => "poor",
        })
    }
}

impl FromStr for ChannelState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "good" => Ok(ChannelState::Good),
            "normal" => Ok(ChannelState::Normal),
            "poor" => Ok(ChannelState::Poor),
            other => Err(format!(
                "unknown channel state '{other}' (expected good, normal or poor)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Dedicated bandwidth for this device, Hz.
    pub bandwidth_hz: f64,
    pub uplink_tx_power_dbm: f64,
    pub downlink_tx_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub distance_m: f64,
    pub pathloss_exponent: f64,
    pub fading: FadingModel,
    /// Path loss at 1 m.
    pub reference_pathloss_db: f64,
}

impl Default for ChannelConfig {
    /// Uncalibrated defaults: 10 MHz at 3.5 GHz (free-space loss at 1 m is
    /// about 43.3 dB), 23 dBm device / 30 dBm AP, thermal noise floor,
    /// 20 m to the access point.
    fn default() -> Self {
        Self {
            bandwidth_hz: 10e6,
            uplink_tx_power_dbm: 23.0,
            downlink_tx_power_dbm: 30.0,
            noise_psd_dbm_hz: -174.0,
            distance_m: 20.0,
            pathloss_exponent: ChannelState::Normal.pathloss_exponent(),
            fading: FadingModel::Rayleigh,
            reference_pathloss_db: 43.3,
        }
    }
}

impl ChannelConfig {
    pub fn validate(&self, path: &str) -> Result<()> {
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("distance_m", self.distance_m),
            ("pathloss_exponent", self.pathloss_exponent),
        ];
        for (field, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(
                    format!("{path}.{field}"),
                    format!("must be a positive finite number, got {value}"),
                ));
            }
        }
        let finite = [
            ("uplink_tx_power_dbm", self.uplink_tx_power_dbm),
            ("downlink_tx_power_dbm", self.downlink_tx_power_dbm),
            ("noise_psd_dbm_hz", self.noise_psd_dbm_hz),
            ("reference_pathloss_db", self.reference_pathloss_db),
        ];
        for (field, value) in finite {
            if !value.is_finite() {
                return Err(Error::validation(
                    format!("{path}.{field}"),
                    "must be finite",
                ));
            }
        }
        Ok(())
    }

    pub fn tx_power_dbm(&self, link: Link) -> f64 {
        match link {
            Link::Uplink => self.uplink_tx_power_dbm,
            Link::Downlink => self.downlink_tx_power_dbm,
        }
    }

    pub fn pathloss_db(&self) -> f64 {
        self.reference_pathloss_db + 10.0 * self.pathloss_exponent * self.distance_m.log10()
    }

    pub fn noise_power_dbm(&self) -> f64 {
        self.noise_psd_dbm_hz + 10.0 * self.bandwidth_hz.log10()
    }

    /// Received SNR in dB for a given small-scale power gain. A zero gain
    /// yields negative infinity, which maps to a zero rate.
    pub fn snr_db(&self, link: Link, fading_gain: f64) -> f64 {
        debug_assert!(fading_gain >= 0.0);
        self.tx_power_dbm(link) - self.pathloss_db() - self.noise_power_dbm()
            + 10.0 * fading_gain.log10()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CqiLevel {
    pub min_snr_db: f64,
    /// bits/s/Hz
    pub spectral_efficiency: f64,
}

/// Piecewise-constant SNR to spectral-efficiency map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<CqiLevel>", into = "Vec<CqiLevel>")]
pub struct MappingTable {
    levels: Vec<CqiLevel>,
}

/// Efficiencies of CQI 1..=15 from the 64QAM CQI table of 3GPP TS 38.214.
const CQI_64QAM_EFFICIENCY: [f64; 15] = [
    0.1523, 0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.9141, 2.4063, 2.7305, 3.3223, 3.9023,
    4.5234, 5.1152, 5.5547,
];

impl MappingTable {
    pub fn new(levels: Vec<CqiLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::MappingTable("table has no rows".into()));
        }
        for (i, level) in levels.iter().enumerate() {
            if !level.min_snr_db.is_finite() || !level.spectral_efficiency.is_finite() {
                return Err(Error::MappingTable(format!(
                    "row {i} has a non-finite value"
                )));
            }
            if level.spectral_efficiency <= 0.0 {
                return Err(Error::MappingTable(format!(
                    "row {i} efficiency must be positive"
                )));
            }
        }
        for (i, pair) in levels.windows(2).enumerate() {
            if pair[1].min_snr_db <= pair[0].min_snr_db
                || pair[1].spectral_efficiency <= pair[0].spectral_efficiency
            {
                return Err(Error::MappingTable(format!(
                    "rows {} and {} are not strictly increasing",
                    i,
                    i + 1
                )));
            }
        }
        Ok(Self { levels })
    }

    /// CQI 1..15 with thresholds from -6 dB to +22 dB in 2 dB steps.
    pub fn cqi_64qam() -> Self {
        let levels = CQI_64QAM_EFFICIENCY
            .iter()
            .enumerate()
            .map(|(i, &eff)| CqiLevel {
                min_snr_db: -6.0 + 2.0 * i as f64,
                spectral_efficiency: eff,
            })
            .collect();
        Self { levels }
    }

    pub fn levels(&self) -> &[CqiLevel] {
        &self.levels
    }

    /// Efficiency of the highest level whose threshold is at or below `snr_db`.
    pub fn spectral_efficiency(&self, snr_db: f64) -> f64 {
        let idx = self.levels.partition_point(|l| l.min_snr_db <= snr_db);
        if idx == 0 {
            0.0
        } else {
            self.levels[idx - 1].spectral_efficiency
        }
    }

    /// Reads a CSV with header `min_snr_db,spectral_efficiency`.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["min_snr_db", "spectral_efficiency"] {
            return Err(Error::MappingTable(format!(
                "expected header 'min_snr_db,spectral_efficiency', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let levels = rdr.deserialize().collect::<Result<Vec<CqiLevel>, _>>()?;
        Self::new(levels)
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_csv_reader(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for level in &self.levels {
            wtr.serialize(level)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl Default for MappingTable {
    fn default() -> Self {
        Self::cqi_64qam()
    }
}

impl TryFrom<Vec<CqiLevel>> for MappingTable {
    type Error = Error;

    fn try_from(levels: Vec<CqiLevel>) -> Result<Self> {
        Self::new(levels)
    }
}

impl From<MappingTable> for Vec<CqiLevel> {
    fn from(table: MappingTable) -> Self {
        table.levels
    }
}

/// `rate = bandwidth * y(snr)`; zero below the lowest threshold.
pub fn rate_from_snr(table: &MappingTable, snr_db: f64, bandwidth_hz: f64) -> f64 {
    table.spectral_efficiency(snr_db) * bandwidth_hz
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    pub snr_up_db: f64,
    pub snr_down_db: f64,
    /// Device to server, bits/s.
    pub rate_up_bps: f64,
    /// Server to device, bits/s.
    pub rate_down_bps: f64,
}

impl ChannelRealization {
    pub fn from_rates(rate_up_bps: f64, rate_down_bps: f64) -> Self {
        Self {
            snr_up_db: f64::NAN,
            snr_down_db: f64::NAN,
            rate_up_bps,
            rate_down_bps,
        }
    }

    pub fn rate(&self, link: Link) -> f64 {
        match link {
            Link::Uplink => self.rate_up_bps,
            Link::Downlink => self.rate_down_bps,
        }
    }

    pub fn has_outage(&self) -> bool {
        self.rate_up_bps <= 0.0 || self.rate_down_bps <= 0.0
    }
}

/// Deterministic RNG stream for one (device, round) cell of a scenario.
pub fn round_rng(seed: u64, device: usize, round: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((device as u64) << 32) | u64::from(round));
    rng
}

pub fn draw_fading_gain<R: Rng + ?Sized>(fading: FadingModel, rng: &mut R) -> f64 {
    match fading {
        FadingModel::None => 1.0,
        FadingModel::Rayleigh => rng.sample(Exp1),
    }
}

/// Samples independent uplink and downlink fading gains and converts them to rates.
pub fn draw_round_channel<R: Rng + ?Sized>(
    config: &ChannelConfig,
    table: &MappingTable,
    rng: &mut R,
) -> ChannelRealization {
    let gain_up = draw_fading_gain(config.fading, rng);
    let gain_down = draw_fading_gain(config.fading, rng);
    realize(config, table, gain_up, gain_down)
}

/// Rates for explicit fading gains.
pub fn realize(
    config: &ChannelConfig,
    table: &MappingTable,
    gain_up: f64,
    gain_down: f64,
) -> ChannelRealization {
    let snr_up_db = config.snr_db(Link::Uplink, gain_up);
    let snr_down_db = config.snr_db(Link::Downlink, gain_down);
    ChannelRealization {
        snr_up_db,
        snr_down_db,
        rate_up_bps: rate_from_snr(table, snr_up_db, config.bandwidth_hz),
        rate_down_bps: rate_from_snr(table, snr_down_db, config.bandwidth_hz),
    }
}
