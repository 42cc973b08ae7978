//! Joint cut-layer and server-frequency decision (CARD).
//!
//! With the cut fixed, `U(f) = const + a / f + b f^2` with `a, b >= 0`, which
//! is convex on `f > 0` and minimized at `f = cbrt(a / 2b)`. Both `a` and `b`
//! carry the same server-FLOP factor, so the unclamped minimizer
//!
//! ```text
//! Q = cbrt(w (E_max - E_min) / (2 xi (1 - w) (D_max - D_min)))
//! ```
//!
//! does not depend on the cut. The frequency is therefore fixed first and
//! the `I + 1` cut candidates are then scanned at that frequency.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost_model::{CostBreakdown, NormBounds, RoundCostInputs};
use crate::error::{Error, Result};
use crate::scenario::Scenario;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrequencyClamp {
    None,
    Min,
    Max,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyChoice {
    pub freq_hz: f64,
    pub clamp: FrequencyClamp,
}

/// How the cut layer of a decision is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutRule {
    Search,
    Fixed(u32),
}

/// How the server frequency of a decision is obtained.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreqRule {
    Optimal,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RoundDecision {
    pub cut_layer: u32,
    pub server_freq_hz: f64,
    pub cost: f64,
    pub breakdown: CostBreakdown,
    pub bounds: NormBounds,
    pub clamp: FrequencyClamp,
}

fn clamp_frequency(q: f64, f_min: f64, f_max: f64) -> FrequencyChoice {
    if q < f_min {
        FrequencyChoice {
            freq_hz: f_min,
            clamp: FrequencyClamp::Min,
        }
    } else if q > f_max {
        FrequencyChoice {
            freq_hz: f_max,
            clamp: FrequencyClamp::Max,
        }
    } else {
        FrequencyChoice {
            freq_hz: q,
            clamp: FrequencyClamp::None,
        }
    }
}

/// Cost-minimizing server frequency in `[F_min, F_max]`, valid for every cut.
///
/// `w = 1` is the delay-only limit and returns `F_max`; `w = 0` returns
/// `F_min`. A collapsed delay span leaves only the energy term (so `F_min`);
/// a collapsed energy span leaves only the delay term (so `F_max`).
pub fn optimal_frequency(
    inputs: &RoundCostInputs<'_>,
    bounds: &NormBounds,
) -> Result<FrequencyChoice> {
    let f_min = inputs.f_min()?;
    let f_max = inputs.f_max();
    let w = inputs.weight;
    let choice = if w >= 1.0 {
        FrequencyChoice {
            freq_hz: f_max,
            clamp: FrequencyClamp::Max,
        }
    } else if w <= 0.0 || bounds.delay_degenerate() {
        FrequencyChoice {
            freq_hz: f_min,
            clamp: FrequencyClamp::Min,
        }
    } else if bounds.energy_degenerate() {
        FrequencyChoice {
            freq_hz: f_max,
            clamp: FrequencyClamp::Max,
        }
    } else {
        let q = (w * bounds.energy_span()
            / (2.0 * inputs.server.power_coeff * (1.0 - w) * bounds.delay_span()))
        .cbrt();
        clamp_frequency(q, f_min, f_max)
    };
    Ok(choice)
}

/// Scans every cut at a fixed frequency; the first (smallest) cut wins ties.
fn search_cut(
    inputs: &RoundCostInputs<'_>,
    bounds: &NormBounds,
    freq_hz: f64,
) -> Result<(u32, CostBreakdown)> {
    let mut best: Option<(u32, CostBreakdown)> = None;
    let mut u_min = f64::INFINITY;
    for cut in 0..=inputs.profile.num_layers {
        let eval = inputs.evaluate(bounds, cut, freq_hz)?;
        if eval.normalized_cost < u_min || best.is_none() {
            u_min = eval.normalized_cost;
            best = Some((cut, eval));
        }
    }
    // num_layers >= 1, so the loop ran at least once.
    Ok(best.expect("at least one cut candidate"))
}

/// Decision under arbitrary cut and frequency rules. Fixed choices must be feasible.
pub fn decide(
    inputs: &RoundCostInputs<'_>,
    cut_rule: CutRule,
    freq_rule: FreqRule,
) -> Result<RoundDecision> {
    inputs.validate()?;
    let bounds = inputs.norm_bounds()?;
    let freq = match freq_rule {
        FreqRule::Optimal => optimal_frequency(inputs, &bounds)?,
        FreqRule::Fixed(f) => {
            let (f_min, f_max) = (inputs.f_min()?, inputs.f_max());
            if !(f >= f_min && f <= f_max) {
                return Err(Error::FrequencyOutOfRange {
                    freq_hz: f,
                    f_min_hz: f_min,
                    f_max_hz: f_max,
                });
            }
            let clamp = if f == f_min {
                FrequencyClamp::Min
            } else if f == f_max {
                FrequencyClamp::Max
            } else {
                FrequencyClamp::None
            };
            FrequencyChoice { freq_hz: f, clamp }
        }
    };
    let (cut_layer, breakdown) = match cut_rule {
        CutRule::Search => search_cut(inputs, &bounds, freq.freq_hz)?,
        CutRule::Fixed(c) => (c, inputs.evaluate(&bounds, c, freq.freq_hz)?),
    };
    Ok(RoundDecision {
        cut_layer,
        server_freq_hz: freq.freq_hz,
        cost: breakdown.normalized_cost,
        breakdown,
        bounds,
        clamp: freq.clamp,
    })
}

/// Closed-form frequency followed by exhaustive cut search.
pub fn card_decide(inputs: &RoundCostInputs<'_>) -> Result<RoundDecision> {
    decide(inputs, CutRule::Search, FreqRule::Optimal)
}

/// Full cost vector `U(c, f*)` for `c = 0..=I`, alongside the frequency used.
pub fn cost_by_cut(inputs: &RoundCostInputs<'_>) -> Result<(FrequencyChoice, Vec<CostBreakdown>)> {
    inputs.validate()?;
    let bounds = inputs.norm_bounds()?;
    let freq = optimal_frequency(inputs, &bounds)?;
    let costs = (0..=inputs.profile.num_layers)
        .map(|c| inputs.evaluate(&bounds, c, freq.freq_hz))
        .collect::<Result<Vec<_>>>()?;
    Ok((freq, costs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDecision {
    pub decision: RoundDecision,
    pub outage_redraws: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FleetSolution {
    /// Indexed `[device][round]`.
    pub decisions: Vec<Vec<CellDecision>>,
    pub total_cost: f64,
}

/// Solves every (device, round) cell independently and sums the costs.
pub fn solve_p1(scenario: &Scenario) -> Result<FleetSolution> {
    let decisions = (0..scenario.devices.len())
        .into_par_iter()
        .map(|device| {
            (0..scenario.rounds)
                .map(|round| {
                    let (inputs, outage_redraws) = scenario.round_inputs(device, round)?;
                    Ok(CellDecision {
                        decision: card_decide(&inputs)?,
                        outage_redraws,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let total_cost = decisions
        .iter()
        .flatten()
        .map(|cell| cell.decision.cost)
        .sum();
    Ok(FleetSolution {
        decisions,
        total_cost,
    })
}
