//! Round-by-round replay of the split fine-tuning protocol under a policy,
//! with per-stage timings, fleet summaries and CSV output.
//!
//! One round of device `m`:
//!
//! 1. the server picks the cut and splits the adapters (no transfer cost);
//! 2. device-side adapters go down to the device;
//! 3. and 4. `T` local epochs, each: device compute, smashed data up,
//!    server compute, gradients down;
//! 5. the device uploads its adapters.
//!
//! Channel draws depend only on `(seed, device, round)`, so every policy in
//! an experiment sees the same channel in the same cell.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost_model::{RoundCostInputs, TransmissionTimes};
use crate::error::{Error, Result};
use crate::llm_profile::TransformerShape;
use crate::optimizer::{cost_by_cut, decide, CutRule, FreqRule, FrequencyClamp, RoundDecision};
use crate::scenario::Scenario;
use crate::wireless_channel::ChannelRealization;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// Optimal frequency, then best cut.
    Card,
    /// Only the embedding runs on the device (`c = 0`).
    ServerOnly,
    /// Every transformer layer runs on the device (`c = I`).
    DeviceOnly,
    /// Fixed cut with the optimal frequency.
    FixedCut(u32),
    /// Fixed frequency with the best cut.
    FixedFreq(f64),
    Fixed {
        cut: u32,
        freq_hz: f64,
    },
}

impl Policy {
    pub fn rules(self, num_layers: u32) -> (CutRule, FreqRule) {
        match self {
            Policy::Card => (CutRule::Search, FreqRule::Optimal),
            Policy::ServerOnly => (CutRule::Fixed(0), FreqRule::Optimal),
            Policy::DeviceOnly => (CutRule::Fixed(num_layers), FreqRule::Optimal),
            Policy::FixedCut(c) => (CutRule::Fixed(c), FreqRule::Optimal),
            Policy::FixedFreq(f) => (CutRule::Search, FreqRule::Fixed(f)),
            Policy::Fixed { cut, freq_hz } => (CutRule::Fixed(cut), FreqRule::Fixed(freq_hz)),
        }
    }

    pub fn fixed_cut(self) -> Option<u32> {
        match self {
            Policy::FixedCut(c) | Policy::Fixed { cut: c, .. } => Some(c),
            _ => None,
        }
    }

    pub fn fixed_freq(self) -> Option<f64> {
        match self {
            Policy::FixedFreq(f) | Policy::Fixed { freq_hz: f, .. } => Some(f),
            _ => None,
        }
    }

    pub fn decide(self, inputs: &RoundCostInputs<'_>) -> Result<RoundDecision> {
        let (cut_rule, freq_rule) = self.rules(inputs.profile.num_layers);
        decide(inputs, cut_rule, freq_rule)
    }

    /// Parses a comma-separated list such as `card,server-only,fixed-cut:8`.
    pub fn parse_list(list: &str) -> Result<Vec<Policy>, String> {
        list.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect()
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Policy::Card => f.write_str("card"),
            Policy::ServerOnly => f.write_str("server-only"),
            Policy::DeviceOnly => f.write_str("device-only"),
            Policy::FixedCut(c) => write!(f, "fixed-cut:{c}"),
            Policy::FixedFreq(hz) => write!(f, "fixed-freq:{hz}"),
            Policy::Fixed { cut, freq_hz } => write!(f, "fixed:{cut}@{freq_hz}"),
        }
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |what: &str| format!("invalid {what} in policy '{s}'");
        match s {
            "card" => return Ok(Policy::Card),
            "server-only" => return Ok(Policy::ServerOnly),
            "device-only" => return Ok(Policy::DeviceOnly),
            _ => {}
        }
        let (kind, arg) = s
            .split_once(':')
            .ok_or_else(|| format!("unknown policy '{s}' (expected card, server-only, device-only, fixed-cut:C, fixed-freq:HZ or fixed:C@HZ)"))?;
        match kind {
            "fixed-cut" => arg
                .parse()
                .map(Policy::FixedCut)
                .map_err(|_| bad("cut layer")),
            "fixed-freq" => arg
                .parse()
                .map(Policy::FixedFreq)
                .map_err(|_| bad("frequency")),
            "fixed" => {
                let (cut, freq) = arg
                    .split_once('@')
                    .ok_or_else(|| bad("cut@frequency pair"))?;
                Ok(Policy::Fixed {
                    cut: cut.parse().map_err(|_| bad("cut layer"))?,
                    freq_hz: freq.parse().map_err(|_| bad("frequency"))?,
                })
            }
            _ => Err(format!("unknown policy kind '{kind}'")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage {
    AdapterDistribution,
    DeviceCompute,
    Uplink,
    ServerCompute,
    Downlink,
    AdapterUpload,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageEvent {
    pub stage: Stage,
    /// Local epoch for per-epoch stages.
    pub epoch: Option<u32>,
    pub start_s: f64,
    pub end_s: f64,
}

/// Stage durations of one round. Per-epoch fields repeat `local_epochs` times.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub local_epochs: u32,
    pub adapter_down_s: f64,
    /// Forward plus backward on the device, per epoch.
    pub device_compute_s: f64,
    pub uplink_s: f64,
    /// Forward plus backward on the server, per epoch.
    pub server_compute_s: f64,
    pub downlink_s: f64,
    pub adapter_up_s: f64,
}

impl StageTimings {
    fn new(local_epochs: u32, device_s: f64, server_s: f64, tx: TransmissionTimes) -> Self {
        Self {
            local_epochs,
            adapter_down_s: tx.adapter_down_s,
            device_compute_s: device_s,
            uplink_s: tx.uplink_per_epoch_s,
            server_compute_s: server_s,
            downlink_s: tx.downlink_per_epoch_s,
            adapter_up_s: tx.adapter_up_s,
        }
    }

    pub fn total(&self) -> f64 {
        self.adapter_down_s
            + f64::from(self.local_epochs)
                * (self.device_compute_s + self.uplink_s + self.server_compute_s + self.downlink_s)
            + self.adapter_up_s
    }

    /// Sequential event timeline of the round.
    pub fn events(&self) -> Vec<StageEvent> {
        let mut events = Vec::with_capacity(2 + 4 * self.local_epochs as usize);
        let mut clock = 0.0;
        let mut push = |stage, epoch, duration: f64| {
            events.push(StageEvent {
                stage,
                epoch,
                start_s: clock,
                end_s: clock + duration,
            });
            clock += duration;
        };
        push(Stage::AdapterDistribution, None, self.adapter_down_s);
        for epoch in 0..self.local_epochs {
            push(Stage::DeviceCompute, Some(epoch), self.device_compute_s);
            push(Stage::Uplink, Some(epoch), self.uplink_s);
            push(Stage::ServerCompute, Some(epoch), self.server_compute_s);
            push(Stage::Downlink, Some(epoch), self.downlink_s);
        }
        push(Stage::AdapterUpload, None, self.adapter_up_s);
        events
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundTrace {
    pub device: usize,
    pub round: u32,
    pub policy: Policy,
    pub cut_layer: u32,
    pub server_freq_hz: f64,
    pub clamp: FrequencyClamp,
    pub stages: StageTimings,
    pub total_delay_s: f64,
    pub energy_j: f64,
    pub cost_u: f64,
    pub channel: ChannelRealization,
    pub outage_redraws: u32,
}

fn trace_cell(
    inputs: &RoundCostInputs<'_>,
    device: usize,
    round: u32,
    outage_redraws: u32,
    policy: Policy,
) -> Result<RoundTrace> {
    let decision = policy.decide(inputs)?;
    let tx = inputs.transmission_times(decision.cut_layer)?;
    let stages = StageTimings::new(
        inputs.local_epochs,
        decision.breakdown.device_compute_s,
        decision.breakdown.server_compute_s,
        tx,
    );
    Ok(RoundTrace {
        device,
        round,
        policy,
        cut_layer: decision.cut_layer,
        server_freq_hz: decision.server_freq_hz,
        clamp: decision.clamp,
        stages,
        total_delay_s: decision.breakdown.total_delay_s,
        energy_j: decision.breakdown.server_energy_j,
        cost_u: decision.cost,
        channel: inputs.channel,
        outage_redraws,
    })
}

pub fn simulate_round(
    scenario: &Scenario,
    device: usize,
    round: u32,
    policy: Policy,
) -> Result<RoundTrace> {
    let (inputs, redraws) = scenario.round_inputs(device, round)?;
    trace_cell(&inputs, device, round, redraws, policy)
}

/// All policies on one shared channel draw.
fn simulate_cell(
    scenario: &Scenario,
    device: usize,
    round: u32,
    policies: &[Policy],
) -> Result<Vec<RoundTrace>> {
    let (inputs, redraws) = scenario.round_inputs(device, round)?;
    policies
        .iter()
        .map(|&policy| trace_cell(&inputs, device, round, redraws, policy))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySummary {
    pub policy: String,
    /// Device index, or `all` for the fleet.
    pub device: String,
    pub mean_delay_s: f64,
    pub mean_energy_j: f64,
    pub mean_cost_u: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    pub metric: String,
    pub baseline: String,
    pub value_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub policies: Vec<Policy>,
    /// Ordered by (device, round, policy).
    pub traces: Vec<RoundTrace>,
    pub summaries: Vec<PolicySummary>,
    pub reductions: Vec<Reduction>,
}

pub const DELAY_REDUCTION: &str = "delay_reduction";
pub const ENERGY_REDUCTION: &str = "energy_reduction";

#[derive(Default, Clone, Copy)]
struct Accum {
    delay: f64,
    energy: f64,
    cost: f64,
    n: usize,
}

impl Accum {
    fn add(&mut self, t: &RoundTrace) {
        self.delay += t.total_delay_s;
        self.energy += t.energy_j;
        self.cost += t.cost_u;
        self.n += 1;
    }

    fn summary(&self, policy: Policy, device: String) -> PolicySummary {
        let n = self.n as f64;
        PolicySummary {
            policy: policy.to_string(),
            device,
            mean_delay_s: self.delay / n,
            mean_energy_j: self.energy / n,
            mean_cost_u: self.cost / n,
        }
    }
}

impl ExperimentResult {
    fn from_traces(policies: Vec<Policy>, num_devices: usize, traces: Vec<RoundTrace>) -> Self {
        let mut per_device = vec![vec![Accum::default(); num_devices]; policies.len()];
        let mut fleet = vec![Accum::default(); policies.len()];
        for t in &traces {
            let p = policies
                .iter()
                .position(|&p| p == t.policy)
                .expect("trace policy listed");
            per_device[p][t.device].add(t);
            fleet[p].add(t);
        }
        let mut summaries = Vec::new();
        for (p, &policy) in policies.iter().enumerate() {
            for (d, acc) in per_device[p].iter().enumerate() {
                summaries.push(acc.summary(policy, d.to_string()));
            }
            summaries.push(fleet[p].summary(policy, "all".to_string()));
        }

        let mut reductions = Vec::new();
        if let Some(card) = policies.iter().position(|&p| p == Policy::Card) {
            let ours = fleet[card];
            for (p, &policy) in policies.iter().enumerate() {
                if p == card {
                    continue;
                }
                let base = fleet[p];
                reductions.push(Reduction {
                    metric: DELAY_REDUCTION.to_string(),
                    baseline: policy.to_string(),
                    value_pct: 100.0 * (1.0 - ours.delay / base.delay),
                });
                reductions.push(Reduction {
                    metric: ENERGY_REDUCTION.to_string(),
                    baseline: policy.to_string(),
                    value_pct: 100.0 * (1.0 - ours.energy / base.energy),
                });
            }
        }
        Self {
            policies,
            traces,
            summaries,
            reductions,
        }
    }

    pub fn reduction(&self, metric: &str, baseline: Policy) -> Option<f64> {
        let name = baseline.to_string();
        self.reductions
            .iter()
            .find(|r| r.metric == metric && r.baseline == name)
            .map(|r| r.value_pct)
    }

    /// Delay saved against running all layers on the device, percent.
    pub fn delay_reduction_vs_device_only(&self) -> Option<f64> {
        self.reduction(DELAY_REDUCTION, Policy::DeviceOnly)
    }

    /// Server energy saved against offloading all layers, percent.
    pub fn energy_reduction_vs_server_only(&self) -> Option<f64> {
        self.reduction(ENERGY_REDUCTION, Policy::ServerOnly)
    }

    pub fn fleet_summary(&self, policy: Policy) -> Option<&PolicySummary> {
        let name = policy.to_string();
        self.summaries
            .iter()
            .find(|s| s.policy == name && s.device == "all")
    }

    pub fn traces_for(&self, policy: Policy) -> impl Iterator<Item = &RoundTrace> {
        self.traces.iter().filter(move |t| t.policy == policy)
    }

    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut rounds = csv::Writer::from_path(dir.join("rounds.csv"))?;
        for t in &self.traces {
            rounds.serialize(RoundRow::from(t))?;
        }
        rounds.flush()?;
        let mut summary = csv::Writer::from_path(dir.join("summary.csv"))?;
        for s in &self.summaries {
            summary.serialize(s)?;
        }
        summary.flush()?;
        let mut reductions = csv::Writer::from_path(dir.join("reductions.csv"))?;
        // header even when no reductions apply
        reductions.write_record(["metric", "baseline", "value_pct"])?;
        for r in &self.reductions {
            reductions.write_record([
                r.metric.clone(),
                r.baseline.clone(),
                r.value_pct.to_string(),
            ])?;
        }
        reductions.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct RoundRow {
    device: usize,
    round: u32,
    policy: String,
    cut_layer: u32,
    server_freq_hz: f64,
    delay_s: f64,
    energy_j: f64,
    cost_u: f64,
    snr_up_db: f64,
    snr_down_db: f64,
    outage_redraws: u32,
}

impl From<&RoundTrace> for RoundRow {
    fn from(t: &RoundTrace) -> Self {
        Self {
            device: t.device,
            round: t.round,
            policy: t.policy.to_string(),
            cut_layer: t.cut_layer,
            server_freq_hz: t.server_freq_hz,
            delay_s: t.total_delay_s,
            energy_j: t.energy_j,
            cost_u: t.cost_u,
            snr_up_db: t.channel.snr_up_db,
            snr_down_db: t.channel.snr_down_db,
            outage_redraws: t.outage_redraws,
        }
    }
}

/// Runs every policy on every (device, round) cell of the scenario.
pub fn run_experiment(scenario: &Scenario, policies: &[Policy]) -> Result<ExperimentResult> {
    if scenario.rounds == 0 || scenario.devices.is_empty() || policies.is_empty() {
        return Err(Error::EmptyResult);
    }
    let cells: Vec<(usize, u32)> = (0..scenario.devices.len())
        .flat_map(|d| (0..scenario.rounds).map(move |r| (d, r)))
        .collect();
    let traces = cells
        .par_iter()
        .map(|&(device, round)| simulate_cell(scenario, device, round, policies))
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    Ok(ExperimentResult::from_traces(
        policies.to_vec(),
        scenario.devices.len(),
        traces,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    /// Delay weight `w`.
    Weight,
    /// Path-loss exponent of every device.
    Alpha,
    /// Mini-batch size of the default transformer shape.
    Batch,
}

impl FromStr for SweepParam {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "w" | "weight" => Ok(SweepParam::Weight),
            "alpha" => Ok(SweepParam::Alpha),
            "batch" => Ok(SweepParam::Batch),
            other => Err(format!(
                "unknown sweep parameter '{other}' (expected w, alpha or batch)"
            )),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepParam::Weight => "w",
            SweepParam::Alpha => "alpha",
            SweepParam::Batch => "batch",
        })
    }
}

/// Copy of `scenario` with one parameter replaced. A batch sweep rebuilds the
/// profile from the default transformer shape.
pub fn apply_sweep_value(scenario: &Scenario, param: SweepParam, value: f64) -> Result<Scenario> {
    let mut s = scenario.clone();
    match param {
        SweepParam::Weight => s.weight = value,
        SweepParam::Alpha => s.set_pathloss_exponent(value),
        SweepParam::Batch => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(Error::validation(
                    "batch",
                    format!("must be a positive integer, got {value}"),
                ));
            }
            let default_shape = TransformerShape::llama_1b();
            if s.profile != default_shape.profile() {
                log::warn!(
                    "batch sweep replaces the scenario's custom profile with the default shape"
                );
            }
            s.profile = TransformerShape {
                batch_size: value as u64,
                ..default_shape
            }
            .profile();
        }
    }
    s.validate()?;
    Ok(s)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub value: f64,
    pub result: ExperimentResult,
}

pub fn run_sweep(
    scenario: &Scenario,
    param: SweepParam,
    values: &[f64],
    policies: &[Policy],
) -> Result<Vec<SweepPoint>> {
    values
        .iter()
        .map(|&value| {
            let s = apply_sweep_value(scenario, param, value)?;
            Ok(SweepPoint {
                value,
                result: run_experiment(&s, policies)?,
            })
        })
        .collect()
}

/// Writes `sweep.csv` and `sweep_reductions.csv` plus one result directory per value.
pub fn write_sweep_csv(dir: &Path, param: SweepParam, points: &[SweepPoint]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut sweep = csv::Writer::from_path(dir.join("sweep.csv"))?;
    sweep.write_record([
        "param",
        "value",
        "policy",
        "mean_delay_s",
        "mean_energy_j",
        "mean_cost_u",
    ])?;
    let mut reductions = csv::Writer::from_path(dir.join("sweep_reductions.csv"))?;
    reductions.write_record(["param", "value", "metric", "baseline", "value_pct"])?;
    for point in points {
        for s in point.result.summaries.iter().filter(|s| s.device == "all") {
            sweep.write_record([
                param.to_string(),
                point.value.to_string(),
                s.policy.clone(),
                s.mean_delay_s.to_string(),
                s.mean_energy_j.to_string(),
                s.mean_cost_u.to_string(),
            ])?;
        }
        for r in &point.result.reductions {
            reductions.write_record([
                param.to_string(),
                point.value.to_string(),
                r.metric.clone(),
                r.baseline.clone(),
                r.value_pct.to_string(),
            ])?;
        }
        point
            .result
            .write_csv(&dir.join(format!("{param}={}", point.value)))?;
    }
    sweep.flush()?;
    reductions.flush()?;
    Ok(())
}

/// One row per cut layer at the round's optimal frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecisionRow {
    pub cut_layer: u32,
    pub cost_u: f64,
    pub delay_s: f64,
    pub energy_j: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionReport {
    pub decision: RoundDecision,
    pub channel: ChannelRealization,
    pub outage_redraws: u32,
    pub rows: Vec<DecisionRow>,
}

pub fn decision_report(scenario: &Scenario, device: usize, round: u32) -> Result<DecisionReport> {
    if device >= scenario.devices.len() {
        return Err(Error::validation(
            "device",
            format!(
                "index {device} out of range for {} devices",
                scenario.devices.len()
            ),
        ));
    }
    let (inputs, outage_redraws) = scenario.round_inputs(device, round)?;
    let decision = Policy::Card.decide(&inputs)?;
    let (_, costs) = cost_by_cut(&inputs)?;
    let rows = costs
        .iter()
        .enumerate()
        .map(|(c, b)| DecisionRow {
            cut_layer: c as u32,
            cost_u: b.normalized_cost,
            delay_s: b.total_delay_s,
            energy_j: b.server_energy_j,
        })
        .collect();
    Ok(DecisionReport {
        decision,
        channel: inputs.channel,
        outage_redraws,
        rows,
    })
}

pub fn write_decisions_csv<W: std::io::Write>(rows: &[DecisionRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    for row in rows {
        wtr.serialize(row)?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimizer::card_decide;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small(rounds: u32) -> Scenario {
        let mut s = Scenario::builtin();
        s.rounds = rounds;
        s
    }

    #[test]
    fn policy_strings_round_trip() {
        for p in [
            Policy::Card,
            Policy::ServerOnly,
            Policy::DeviceOnly,
            Policy::FixedCut(7),
            Policy::FixedFreq(1.5e9),
            Policy::Fixed {
                cut: 3,
                freq_hz: 2e9,
            },
        ] {
            assert_eq!(p.to_string().parse::<Policy>().unwrap(), p);
        }
        assert_eq!(
            Policy::parse_list("card, server-only,device-only").unwrap(),
            vec![Policy::Card, Policy::ServerOnly, Policy::DeviceOnly]
        );
        assert!("fixed-cut:x".parse::<Policy>().is_err());
        assert!("magic".parse::<Policy>().is_err());
    }

    #[test]
    fn server_only_ships_no_adapters() {
        let s = small(5);
        for round in 0..5 {
            let t = simulate_round(&s, 2, round, Policy::FixedCut(0)).unwrap();
            assert_eq!(t.stages.adapter_down_s, 0.0);
            assert_eq!(t.stages.adapter_up_s, 0.0);
        }
    }

    #[test]
    fn card_trace_delegates_to_card_decide() {
        let s = small(3);
        for device in 0..5 {
            let t = simulate_round(&s, device, 2, Policy::Card).unwrap();
            let (inputs, _) = s.round_inputs(device, 2).unwrap();
            let d = card_decide(&inputs).unwrap();
            assert_eq!(
                (t.cut_layer, t.server_freq_hz, t.cost_u),
                (d.cut_layer, d.server_freq_hz, d.cost)
            );
        }
    }

    #[test]
    fn stage_timings_resum_to_total_delay() {
        let s = small(200);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let policies = [
            Policy::Card,
            Policy::ServerOnly,
            Policy::DeviceOnly,
            Policy::FixedCut(9),
        ];
        for _ in 0..1000 {
            let device = rng.gen_range(0..5);
            let round = rng.gen_range(0..200);
            let policy = policies[rng.gen_range(0..policies.len())];
            let t = simulate_round(&s, device, round, policy).unwrap();
            // Independent re-summation of every event on the timeline.
            let events = t.stages.events();
            let summed: f64 = events.iter().map(|e| e.end_s - e.start_s).sum();
            let rel = (summed - t.total_delay_s).abs() / t.total_delay_s;
            assert!(rel <= 1e-9, "{summed} vs {}", t.total_delay_s);
            assert!((t.stages.total() - t.total_delay_s).abs() / t.total_delay_s <= 1e-9);
            assert_eq!(events.len(), 2 + 4 * 5);
        }
    }

    #[test]
    fn card_dominates_baselines_per_cell() {
        let s = small(20);
        let r =
            run_experiment(&s, &[Policy::Card, Policy::ServerOnly, Policy::DeviceOnly]).unwrap();
        assert_eq!(r.traces.len(), 5 * 20 * 3);
        for cell in r.traces.chunks(3) {
            assert_eq!(cell[0].policy, Policy::Card);
            assert!(cell[0].cost_u <= cell[1].cost_u);
            assert!(cell[0].cost_u <= cell[2].cost_u);
            assert_eq!(cell[0].channel, cell[1].channel);
        }
        let card = r.fleet_summary(Policy::Card).unwrap().mean_cost_u;
        assert!(card <= r.fleet_summary(Policy::ServerOnly).unwrap().mean_cost_u);
        assert!(card <= r.fleet_summary(Policy::DeviceOnly).unwrap().mean_cost_u);
        assert!(r.delay_reduction_vs_device_only().unwrap() > 0.0);
        assert!(r.energy_reduction_vs_server_only().unwrap() > 0.0);
    }

    #[test]
    fn empty_experiment_is_an_error() {
        let mut s = small(1);
        s.rounds = 0;
        assert!(matches!(
            run_experiment(&s, &[Policy::Card]),
            Err(Error::EmptyResult)
        ));
        assert!(matches!(
            run_experiment(&small(1), &[]),
            Err(Error::EmptyResult)
        ));
    }

    #[test]
    fn csv_outputs_have_fixed_headers() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_experiment(&small(2), &[Policy::Card, Policy::DeviceOnly]).unwrap();
        r.write_csv(dir.path()).unwrap();
        let first_line = |name: &str| {
            std::fs::read_to_string(dir.path().join(name))
                .unwrap()
                .lines()
                .next()
                .unwrap()
                .to_string()
        };
        assert_eq!(
            first_line("rounds.csv"),
            "device,round,policy,cut_layer,server_freq_hz,delay_s,energy_j,cost_u,snr_up_db,snr_down_db,outage_redraws"
        );
        assert_eq!(
            first_line("summary.csv"),
            "policy,device,mean_delay_s,mean_energy_j,mean_cost_u"
        );
        assert_eq!(first_line("reductions.csv"), "metric,baseline,value_pct");
    }

    #[test]
    fn full_precision_floats_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let r = run_experiment(&small(2), &[Policy::Card]).unwrap();
        r.write_csv(dir.path()).unwrap();
        let mut rdr = csv::Reader::from_path(dir.path().join("rounds.csv")).unwrap();
        for (rec, t) in rdr.records().zip(&r.traces) {
            let rec = rec.unwrap();
            assert_eq!(
                rec[4].parse::<f64>().unwrap().to_bits(),
                t.server_freq_hz.to_bits()
            );
            assert_eq!(
                rec[5].parse::<f64>().unwrap().to_bits(),
                t.total_delay_s.to_bits()
            );
        }
    }

    #[test]
    fn sweep_changes_the_named_parameter() {
        let s = small(1);
        let w = apply_sweep_value(&s, SweepParam::Weight, 0.7).unwrap();
        assert_eq!(w.weight, 0.7);
        let a = apply_sweep_value(&s, SweepParam::Alpha, 3.0).unwrap();
        assert!(a.devices.iter().all(|d| d.channel.pathloss_exponent == 3.0));
        let b = apply_sweep_value(&s, SweepParam::Batch, 8.0).unwrap();
        assert_eq!(
            b.profile.smashed_bits_per_layer,
            2 * s.profile.smashed_bits_per_layer
        );
        assert!(apply_sweep_value(&s, SweepParam::Weight, 2.0).is_err());
        assert!(apply_sweep_value(&s, SweepParam::Batch, 2.5).is_err());
    }

    #[test]
    fn decision_report_lists_every_cut() {
        let s = small(1);
        let report = decision_report(&s, 4, 0).unwrap();
        assert_eq!(report.rows.len(), 33);
        let best = report
            .rows
            .iter()
            .map(|r| r.cost_u)
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, report.decision.cost);
        assert!(decision_report(&s, 9, 0).is_err());
    }
}
