//! Per-round training delay, server energy and the normalized scalar cost.
//!
//! For device `m` in round `n` with cut `c` and server frequency `f`:
//!
//! ```text
//! D(c, f) = T * (eta_D(c) / (f_m delta_m sigma_m) + (eta - eta_D(c)) / (f delta_S sigma_S))
//!         + T * phi * (S(c) / R_up + S~(c) / R_down) + A(c) / R_up + A(c) / R_down
//! E(c, f) = T * xi * f^2 * (eta - eta_D(c)) / (delta_S sigma_S)
//! U(c, f) = w (D - D_min) / (D_max - D_min) + (1 - w) (E - E_min) / (E_max - E_min)
//! ```
//!
//! `D_max`, `E_min` sit at `(c = I, f = F_min)` and `D_min`, `E_max` at
//! `(c = 0, f = F_max)`; they are recomputed for every round because the
//! delay bounds include that round's transmission terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm_profile::LlmProfile;
use crate::wireless_channel::{ChannelRealization, Link};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceSpec {
    pub label: String,
    pub gpu_freq_hz: f64,
    pub flops_per_cycle: f64,
    pub core_count: u32,
}

impl DeviceSpec {
    pub fn flops_per_second(&self) -> f64 {
        self.gpu_freq_hz * self.flops_per_cycle * f64::from(self.core_count)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        check_positive(path, "gpu_freq_hz", self.gpu_freq_hz)?;
        check_positive(path, "flops_per_cycle", self.flops_per_cycle)?;
        if self.core_count == 0 {
            return Err(Error::validation(
                format!("{path}.core_count"),
                "must be positive",
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServerSpec {
    pub max_freq_hz: f64,
    pub flops_per_cycle: f64,
    pub core_count: u32,
    /// Watt per (cycle/s)^3.
    pub power_coeff: f64,
}

impl ServerSpec {
    /// FLOPs per clock cycle across all cores.
    pub fn flops_per_clock(&self) -> f64 {
        self.flops_per_cycle * f64::from(self.core_count)
    }

    pub fn validate(&self, path: &str) -> Result<()> {
        check_positive(path, "max_freq_hz", self.max_freq_hz)?;
        check_positive(path, "flops_per_cycle", self.flops_per_cycle)?;
        check_positive(path, "power_coeff", self.power_coeff)?;
        if self.core_count == 0 {
            return Err(Error::validation(
                format!("{path}.core_count"),
                "must be positive",
            ));
        }
        Ok(())
    }
}

fn check_positive(path: &str, field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::validation(
            format!("{path}.{field}"),
            format!("must be a positive finite number, got {value}"),
        ))
    }
}

/// Lowest server frequency at which the server is at least as fast per FLOP as the device.
pub fn f_min_for_device(device: &DeviceSpec, server: &ServerSpec) -> Result<f64> {
    let f_min = device.flops_per_second() / server.flops_per_clock();
    if f_min > server.max_freq_hz {
        return Err(Error::InfeasibleServer {
            device: device.label.clone(),
            f_min_hz: f_min,
            f_max_hz: server.max_freq_hz,
        });
    }
    Ok(f_min)
}

/// Everything the cost of one (device, round) cell depends on.
#[derive(Debug, Clone, Copy)]
pub struct RoundCostInputs<'a> {
    pub profile: &'a LlmProfile,
    pub device: &'a DeviceSpec,
    pub server: &'a ServerSpec,
    pub channel: ChannelRealization,
    /// Local epochs per round, `T`.
    pub local_epochs: u32,
    /// Compression ratio `phi` applied to smashed data and gradients.
    pub compression_ratio: f64,
    /// Delay weight `w`; energy gets `1 - w`.
    pub weight: f64,
}

/// Transfer times of one round at a given cut.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TransmissionTimes {
    /// Server sends device-side adapters before the first epoch.
    pub adapter_down_s: f64,
    /// Smashed data, once per epoch.
    pub uplink_per_epoch_s: f64,
    /// Activation gradients, once per epoch.
    pub downlink_per_epoch_s: f64,
    /// Device returns its adapters after the last epoch.
    pub adapter_up_s: f64,
}

impl TransmissionTimes {
    pub fn total(&self, local_epochs: u32) -> f64 {
        f64::from(local_epochs) * (self.uplink_per_epoch_s + self.downlink_per_epoch_s)
            + self.adapter_down_s
            + self.adapter_up_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// Device compute per local epoch.
    pub device_compute_s: f64,
    /// Server compute per local epoch.
    pub server_compute_s: f64,
    /// Whole-round transmission.
    pub transmission_s: f64,
    pub total_delay_s: f64,
    pub server_energy_j: f64,
    pub normalized_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormBounds {
    pub d_min_s: f64,
    pub d_max_s: f64,
    pub e_min_j: f64,
    pub e_max_j: f64,
}

impl NormBounds {
    pub fn delay_span(&self) -> f64 {
        self.d_max_s - self.d_min_s
    }

    pub fn energy_span(&self) -> f64 {
        self.e_max_j - self.e_min_j
    }

    pub fn delay_degenerate(&self) -> bool {
        !(self.delay_span() > 0.0)
    }

    pub fn energy_degenerate(&self) -> bool {
        !(self.energy_span() > 0.0)
    }

    /// `(D - D_min) / (D_max - D_min)`, or 0 when the span collapses.
    pub fn normalized_delay(&self, delay_s: f64) -> f64 {
        if self.delay_degenerate() {
            0.0
        } else {
            (delay_s - self.d_min_s) / self.delay_span()
        }
    }

    pub fn normalized_energy(&self, energy_j: f64) -> f64 {
        if self.energy_degenerate() {
            0.0
        } else {
            (energy_j - self.e_min_j) / self.energy_span()
        }
    }
}

fn transfer_time(bits: u64, scaled_bits: f64, rate_bps: f64, link: Link) -> Result<f64> {
    if bits == 0 {
        return Ok(0.0);
    }
    if !(rate_bps > 0.0) {
        return Err(Error::LinkOutage {
            link: link.name(),
            payload_bits: bits,
        });
    }
    Ok(scaled_bits / rate_bps)
}

impl RoundCostInputs<'_> {
    pub fn validate(&self) -> Result<()> {
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
        Ok(())
    }

    fn epochs(&self) -> f64 {
        f64::from(self.local_epochs)
    }

    pub fn f_min(&self) -> Result<f64> {
        f_min_for_device(self.device, self.server)
    }

    pub fn f_max(&self) -> f64 {
        self.server.max_freq_hz
    }

    /// Device compute time per local epoch.
    pub fn device_compute_delay(&self, cut: u32) -> Result<f64> {
        Ok(self.profile.device_flops(cut)? as f64 / self.device.flops_per_second())
    }

    /// Server compute time per local epoch.
    pub fn server_compute_delay(&self, cut: u32, freq_hz: f64) -> Result<f64> {
        Ok(self.profile.server_flops(cut)? as f64 / (freq_hz * self.server.flops_per_clock()))
    }

    pub fn transmission_times(&self, cut: u32) -> Result<TransmissionTimes> {
        let phi = self.compression_ratio;
        let smashed = self.profile.smashed_bits(cut)?;
        let grad = self.profile.grad_bits(cut)?;
        let adapters = self.profile.adapter_bits(cut)?;
        let up = self.channel.rate(Link::Uplink);
        let down = self.channel.rate(Link::Downlink);
        Ok(TransmissionTimes {
            adapter_down_s: transfer_time(adapters, adapters as f64, down, Link::Downlink)?,
            uplink_per_epoch_s: transfer_time(smashed, phi * smashed as f64, up, Link::Uplink)?,
            downlink_per_epoch_s: transfer_time(grad, phi * grad as f64, down, Link::Downlink)?,
            adapter_up_s: transfer_time(adapters, adapters as f64, up, Link::Uplink)?,
        })
    }

    /// Whole-round transmission delay.
    pub fn transmission_delay(&self, cut: u32) -> Result<f64> {
        Ok(self.transmission_times(cut)?.total(self.local_epochs))
    }

    pub fn total_delay(&self, cut: u32, freq_hz: f64) -> Result<f64> {
        let compute = self.device_compute_delay(cut)? + self.server_compute_delay(cut, freq_hz)?;
        Ok(self.epochs() * compute + self.transmission_delay(cut)?)
    }

    /// Server energy over the round: power `xi f^3` times compute time.
    pub fn server_energy(&self, cut: u32, freq_hz: f64) -> Result<f64> {
        let server_flops = self.profile.server_flops(cut)? as f64;
        Ok(
            self.epochs() * self.server.power_coeff * freq_hz * freq_hz * server_flops
                / self.server.flops_per_clock(),
        )
    }

    pub fn norm_bounds(&self) -> Result<NormBounds> {
        let f_min = self.f_min()?;
        let f_max = self.f_max();
        let all_device = self.profile.num_layers;
        Ok(NormBounds {
            d_min_s: self.total_delay(0, f_max)?,
            d_max_s: self.total_delay(all_device, f_min)?,
            e_min_j: self.server_energy(all_device, f_min)?,
            e_max_j: self.server_energy(0, f_max)?,
        })
    }

    pub fn evaluate(&self, bounds: &NormBounds, cut: u32, freq_hz: f64) -> Result<CostBreakdown> {
        let device_compute_s = self.device_compute_delay(cut)?;
        let server_compute_s = self.server_compute_delay(cut, freq_hz)?;
        let transmission_s = self.transmission_delay(cut)?;
        let total_delay_s = self.epochs() * (device_compute_s + server_compute_s) + transmission_s;
        let server_energy_j = self.server_energy(cut, freq_hz)?;
        let normalized_cost = self.weight * bounds.normalized_delay(total_delay_s)
            + (1.0 - self.weight) * bounds.normalized_energy(server_energy_j);
        Ok(CostBreakdown {
            device_compute_s,
            server_compute_s,
            transmission_s,
            total_delay_s,
            server_energy_j,
            normalized_cost,
        })
    }

    /// Scalar cost `U(c, f)`.
    pub fn cost(&self, bounds: &NormBounds, cut: u32, freq_hz: f64) -> Result<f64> {
        Ok(self.evaluate(bounds, cut, freq_hz)?.normalized_cost)
    }

    /// Analytic `dU/df = -a / f^2 + 2 b f` at a fixed cut.
    pub fn cost_slope(&self, bounds: &NormBounds, cut: u32, freq_hz: f64) -> Result<f64> {
        let (a, b) = self.frequency_coefficients(bounds, cut)?;
        Ok(-a / (freq_hz * freq_hz) + 2.0 * b * freq_hz)
    }

    /// Coefficients of the frequency-dependent part of `U(c, f) = const + a / f + b f^2`.
    pub fn frequency_coefficients(&self, bounds: &NormBounds, cut: u32) -> Result<(f64, f64)> {
        let work =
            self.epochs() * self.profile.server_flops(cut)? as f64 / self.server.flops_per_clock();
        let a = if bounds.delay_degenerate() {
            0.0
        } else {
            self.weight * work / bounds.delay_span()
        };
        let b = if bounds.energy_degenerate() {
            0.0
        } else {
            (1.0 - self.weight) * self.server.power_coeff * work / bounds.energy_span()
        };
        Ok((a, b))
    }
}
