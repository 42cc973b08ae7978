//! Experiment descriptions: fleet, server, model profile, channels and
//! optimizer parameters, loaded from JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cost_model::{f_min_for_device, DeviceSpec, RoundCostInputs, ServerSpec};
use crate::error::{Error, Result};
use crate::harness::Policy;
use crate::llm_profile::{default_llama_profile, LlmProfile};
use crate::wireless_channel::{
    draw_round_channel, round_rng, ChannelConfig, ChannelRealization, ChannelState, MappingTable,
};

/// Fading redraws allowed before a round is declared unusable.
pub const MAX_OUTAGE_REDRAWS: u32 = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceEntry {
    pub device: DeviceSpec,
    pub channel: ChannelConfig,
}

/// Where the SNR mapping table comes from. Relative paths resolve against
/// the scenario file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TableSource {
    Csv(PathBuf),
    Inline(MappingTable),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub seed: u64,
    pub rounds: u32,
    pub local_epochs: u32,
    pub compression_ratio: f64,
    pub weight: f64,
    pub server: ServerSpec,
    pub profile: LlmProfile,
    pub devices: Vec<DeviceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mapping_table: Option<TableSource>,
    #[serde(default = "default_policies")]
    pub policies: Vec<Policy>,
    #[serde(skip)]
    table: MappingTable,
}

fn default_policies() -> Vec<Policy> {
    vec![Policy::Card, Policy::ServerOnly, Policy::DeviceOnly]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Strictness {
    /// Unknown fields are an error.
    #[default]
    Strict,
    /// Unknown fields are logged and ignored.
    Lenient,
}

impl Scenario {
    /// Five Jetson-class devices sharing an RTX-4060Ti-class edge server.
    pub fn builtin() -> Self {
        Self::builtin_with(ChannelState::Normal)
    }

    pub fn builtin_with(state: ChannelState) -> Self {
        let server = ServerSpec {
            max_freq_hz: 2.46e9,
            flops_per_cycle: 2.0,
            core_count: 3072,
            power_coeff: 1e-25,
        };
        let fleet = [
            ("Device 1", 1.3e9, 2048),
            ("Device 2", 1.0e9, 2048),
            ("Device 3", 0.7e9, 1792),
            ("Device 4", 0.7e9, 1024),
            ("Device 5", 0.5e9, 512),
        ];
        let channel = ChannelConfig {
            pathloss_exponent: state.pathloss_exponent(),
            ..ChannelConfig::default()
        };
        let devices = fleet
            .iter()
            .map(|&(label, freq, cores)| DeviceEntry {
                device: DeviceSpec {
                    label: label.to_string(),
                    gpu_freq_hz: freq,
                    flops_per_cycle: 2.0,
                    core_count: cores,
                },
                channel: channel.clone(),
            })
            .collect();
        Self {
            name: "edge-fleet".to_string(),
            seed: 42,
            rounds: 100,
            local_epochs: 5,
            compression_ratio: 0.1,
            weight: 0.2,
            server,
            profile: default_llama_profile(),
            devices,
            mapping_table: None,
            policies: default_policies(),
            table: MappingTable::default(),
        }
    }

    pub fn table(&self) -> &MappingTable {
        &self.table
    }

    /// Replaces the mapping table with an in-memory one.
    pub fn set_table(&mut self, table: MappingTable) {
        self.mapping_table = Some(TableSource::Inline(table.clone()));
        self.table = table;
    }

    pub fn set_pathloss_exponent(&mut self, exponent: f64) {
        for entry in &mut self.devices {
            entry.channel.pathloss_exponent = exponent;
        }
    }

    pub fn set_channel_state(&mut self, state: ChannelState) {
        self.set_pathloss_exponent(state.pathloss_exponent());
    }

    pub fn load(path: &Path, strictness: Strictness) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        Self::from_json_str(&text, base, strictness).map_err(|e| match e {
            Error::Parse { message, .. } => Error::Parse {
                file: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    /// Parses and validates a scenario; `base_dir` anchors relative table paths.
    pub fn from_json_str(text: &str, base_dir: &Path, strictness: Strictness) -> Result<Self> {
        let mut unknown = Vec::new();
        let mut de = serde_json::Deserializer::from_str(text);
        let mut track = |path: serde_ignored::Path<'_>| unknown.push(path.to_string());
        let ignored = serde_ignored::Deserializer::new(&mut de, &mut track);
        let parsed: Result<Scenario, _> = serde_path_to_error::deserialize(ignored);
        let mut scenario = parsed.map_err(|e| Error::Parse {
            file: PathBuf::from("<scenario>"),
            message: format!("{}: {}", e.path(), e.inner()),
        })?;
        de.end().map_err(|e| Error::Parse {
            file: PathBuf::from("<scenario>"),
            message: e.to_string(),
        })?;
        if !unknown.is_empty() {
            match strictness {
                Strictness::Strict => {
                    return Err(Error::validation(unknown.join(", "), "unknown field"));
                }
                Strictness::Lenient => {
                    for path in &unknown {
                        log::warn!("ignoring unknown scenario field '{path}'");
                    }
                }
            }
        }
        scenario.table = match &scenario.mapping_table {
            None => MappingTable::default(),
            Some(TableSource::Inline(table)) => table.clone(),
            Some(TableSource::Csv(rel)) => {
                let path = base_dir.join(rel);
                MappingTable::from_csv_path(&path).map_err(|e| {
                    Error::validation("mapping_table", format!("{}: {e}", path.display()))
                })?
            }
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes") + "\n"
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json_string())?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(Error::validation("rounds", "must be at least 1"));
        }
        if self.local_epochs == 0 {
            return Err(Error::validation("local_epochs", "must be at least 1"));
        }
        if !(self.compression_ratio > 0.0 && self.compression_ratio <= 1.0) {
            return Err(Error::validation(
                "compression_ratio",
                format!("must be in (0, 1], got {}", self.compression_ratio),
            ));
        }
        if !(0.0..=1.0).contains(&self.weight) {
            return Err(Error::validation(
                "weight",
                format!("must be in [0, 1], got {}", self.weight),
            ));
        }
        if self.devices.is_empty() {
            return Err(Error::validation(
                "devices",
                "at least one device is required",
            ));
        }
        self.server.validate("server")?;
        self.profile.validate()?;
        let mut highest_f_min: f64 = 0.0;
        for (i, entry) in self.devices.iter().enumerate() {
            let path = format!("devices[{i}]");
            entry.device.validate(&format!("{path}.device"))?;
            entry.channel.validate(&format!("{path}.channel"))?;
            let f_min = f_min_for_device(&entry.device, &self.server)
                .map_err(|e| Error::validation(format!("{path}.device"), e.to_string()))?;
            highest_f_min = highest_f_min.max(f_min);
        }
        for (i, policy) in self.policies.iter().enumerate() {
            if let Some(cut) = policy.fixed_cut() {
                if cut > self.profile.num_layers {
                    return Err(Error::validation(
                        format!("policies[{i}]"),
                        format!(
                            "cut layer {cut} exceeds num_layers {}",
                            self.profile.num_layers
                        ),
                    ));
                }
            }
            if let Some(f) = policy.fixed_freq() {
                if !(f >= highest_f_min && f <= self.server.max_freq_hz) {
                    return Err(Error::validation(
                        format!("policies[{i}]"),
                        format!(
                            "frequency {f} Hz outside [{highest_f_min}, {}] for this fleet",
                            self.server.max_freq_hz
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Channel of one (device, round) cell. Rounds whose fading leaves a link
    /// dead are redrawn from the same stream; the redraw count is returned.
    pub fn round_channel(&self, device: usize, round: u32) -> Result<(ChannelRealization, u32)> {
        let config = &self.devices[device].channel;
        let mut rng = round_rng(self.seed, device, round);
        let needs_link = self.profile.has_payload();
        for redraws in 0..=MAX_OUTAGE_REDRAWS {
            let realization = draw_round_channel(config, &self.table, &mut rng);
            if !(needs_link && realization.has_outage()) {
                return Ok((realization, redraws));
            }
        }
        Err(Error::PersistentOutage {
            device,
            round,
            attempts: MAX_OUTAGE_REDRAWS,
        })
    }

    pub fn round_inputs(&self, device: usize, round: u32) -> Result<(RoundCostInputs<'_>, u32)> {
        let (channel, redraws) = self.round_channel(device, round)?;
        Ok((self.inputs_with_channel(device, channel), redraws))
    }

    pub fn inputs_with_channel(
        &self,
        device: usize,
        channel: ChannelRealization,
    ) -> RoundCostInputs<'_> {
        RoundCostInputs {
            profile: &self.profile,
            device: &self.devices[device].device,
            server: &self.server,
            channel,
            local_epochs: self.local_epochs,
            compression_ratio: self.compression_ratio,
            weight: self.weight,
        }
    }
}

impl Default for Scenario {
    fn default() -> Self {
        Self::builtin()
    }
}
