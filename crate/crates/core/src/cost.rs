//! Analytic MAC counting and energy estimation.
//!
//! The counting convention is frozen in `docs/cost-model.md`; in short:
//! dense forward costs `in * out` MACs per sample, trainable dense backward
//! costs `2 * in * out + out` (weight grad + input grad + bias grad) with the
//! input-gradient term dropped for the first trainable layer, reservoirs
//! cost `T * (h*U + h*h)` forward and nothing backward, counters and pooling
//! cost nothing, and recurrent cells scale with their gate multiplier
//! (RNN/SRNN 1, GRU 3, LSTM 4). Digital energy is `MACs * tdp / throughput`;
//! hybrid energy sums per-event component energies plus the digital readout
//! MACs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gate multiplier families for analytic recurrent-cell costs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecurrentKind {
    Rnn,
    Srnn,
    Gru,
    Lstm,
}

impl RecurrentKind {
    pub fn gate_multiplier(self) -> u64 {
        match self {
            RecurrentKind::Rnn | RecurrentKind::Srnn => 1,
            RecurrentKind::Gru => 3,
            RecurrentKind::Lstm => 4,
        }
    }
}

/// One architecture layer for cost accounting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum LayerSpec {
    /// Fully connected `input -> output`.
    Dense {
        name: String,
        input: usize,
        output: usize,
        trainable: bool,
    },
    /// Fixed random reservoir: `steps * (hidden*input + hidden*hidden)`
    /// forward MACs, zero training MACs.
    Lsm {
        name: String,
        input: usize,
        hidden: usize,
        steps: usize,
    },
    /// Analytic recurrent cell; never executed, only counted.
    Recurrent {
        name: String,
        cell: RecurrentKind,
        input: usize,
        hidden: usize,
        steps: usize,
        trainable: bool,
    },
    /// Spike counter; integer increments, zero MACs.
    Counter { name: String, units: usize },
    /// Pooling over time; comparisons/additions only, zero MACs.
    Pooling { name: String, units: usize },
}

impl LayerSpec {
    pub fn name(&self) -> &str {
        match self {
            LayerSpec::Dense { name, .. }
            | LayerSpec::Lsm { name, .. }
            | LayerSpec::Recurrent { name, .. }
            | LayerSpec::Counter { name, .. }
            | LayerSpec::Pooling { name, .. } => name,
        }
    }

    fn is_trainable(&self) -> bool {
        matches!(
            self,
            LayerSpec::Dense { trainable: true, .. }
                | LayerSpec::Recurrent { trainable: true, .. }
        )
    }
}

/// Per-layer forward/backward MAC counts for one sample pass.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerOps {
    pub name: String,
    pub forward_macs: u64,
    pub backward_macs: u64,
}

/// Forward and training MACs per layer plus totals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpsCount {
    pub layers: Vec<LayerOps>,
    pub total_forward: u64,
    pub total_backward: u64,
}

impl OpsCount {
    pub fn from_layers(layers: Vec<LayerOps>) -> Self {
        let total_forward = layers.iter().map(|l| l.forward_macs).sum();
        let total_backward = layers.iter().map(|l| l.backward_macs).sum();
        Self {
            layers,
            total_forward,
            total_backward,
        }
    }

    /// Single-layer count with given totals (for ratios over published
    /// operand values).
    pub fn from_totals(name: &str, forward: u64, backward: u64) -> Self {
        Self::from_layers(vec![LayerOps {
            name: name.to_string(),
            forward_macs: forward,
            backward_macs: backward,
        }])
    }

    pub fn total(&self) -> u64 {
        self.total_forward + self.total_backward
    }
}

/// Count forward and training MACs for one sample through an architecture.
///
/// The first trainable layer omits the input-gradient term of the backward
/// pass (there is nothing upstream to propagate into).
pub fn count_ops(architecture: &[LayerSpec]) -> OpsCount {
    let first_trainable = architecture.iter().position(LayerSpec::is_trainable);
    let layers = architecture
        .iter()
        .enumerate()
        .map(|(idx, layer)| {
            let is_first_trainable = Some(idx) == first_trainable;
            let (forward, backward) = match layer {
                LayerSpec::Dense {
                    input,
                    output,
                    trainable,
                    ..
                } => {
                    let fwd = (input * output) as u64;
                    let bwd = if *trainable {
                        let weight_grad = fwd;
                        let bias_grad = *output as u64;
                        let input_grad = if is_first_trainable { 0 } else { fwd };
                        weight_grad + bias_grad + input_grad
                    } else {
                        0
                    };
                    (fwd, bwd)
                }
                LayerSpec::Lsm {
                    input,
                    hidden,
                    steps,
                    ..
                } => {
                    let per_step = (hidden * input + hidden * hidden) as u64;
                    (per_step * *steps as u64, 0)
                }
                LayerSpec::Recurrent {
                    cell,
                    input,
                    hidden,
                    steps,
                    trainable,
                    ..
                } => {
                    let m = cell.gate_multiplier();
                    let per_step = m * (hidden * input + hidden * hidden) as u64;
                    let fwd = per_step * *steps as u64;
                    let bwd = if *trainable {
                        // BPTT: weight grads + state/input grads each cost a
                        // full pass per step, plus the gate bias updates
                        (2 * per_step + m * *hidden as u64) * *steps as u64
                    } else {
                        0
                    };
                    (fwd, bwd)
                }
                LayerSpec::Counter { .. } | LayerSpec::Pooling { .. } => (0, 0),
            };
            LayerOps {
                name: layer.name().to_string(),
                forward_macs: forward,
                backward_macs: backward,
            }
        })
        .collect();
    OpsCount::from_layers(layers)
}

/// Which totals a cost ratio compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostKind {
    Forward,
    Training,
    Total,
}

/// Ratio `a / b` of the selected totals.
pub fn cost_ratio(a: &OpsCount, b: &OpsCount, kind: CostKind) -> Result<f64> {
    let pick = |ops: &OpsCount| match kind {
        CostKind::Forward => ops.total_forward,
        CostKind::Training => ops.total_backward,
        CostKind::Total => ops.total(),
    };
    let denom = pick(b);
    if denom == 0 {
        return Err(Error::ZeroCostDenominator);
    }
    Ok(pick(a) as f64 / denom as f64)
}

/// Joules per MAC of a digital accelerator from its thermal design power
/// and peak throughput.
pub fn energy_efficiency(tdp_w: f64, throughput_ops_per_s: f64) -> Result<f64> {
    if throughput_ops_per_s <= 0.0 {
        return Err(Error::ZeroThroughput);
    }
    assert!(tdp_w > 0.0, "TDP must be positive");
    Ok(tdp_w / throughput_ops_per_s)
}

/// Digital accelerator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DigitalModel {
    pub tdp_w: f64,
    pub throughput_ops_per_s: f64,
}

impl DigitalModel {
    /// A100-class accelerator: 300 W TDP, 624 TOPS INT8 peak throughput.
    pub fn a100() -> Self {
        Self {
            tdp_w: 300.0,
            throughput_ops_per_s: 624e12,
        }
    }

    pub fn efficiency_j_per_op(&self) -> Result<f64> {
        energy_efficiency(self.tdp_w, self.throughput_ops_per_s)
    }
}

/// Analogue subsystem components with per-event energies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Array,
    Driver,
    Decoder,
    Adc,
    Mux,
    Lif,
    Counter,
}

impl Component {
    pub fn name(self) -> &'static str {
        match self {
            Component::Array => "array",
            Component::Driver => "driver",
            Component::Decoder => "decoder",
            Component::Adc => "adc",
            Component::Mux => "mux",
            Component::Lif => "lif",
            Component::Counter => "counter",
        }
    }
}

/// Energy model of the hybrid analogue-digital system: per-event energies
/// (J) for the analogue components plus the digital accelerator doing the
/// readout math.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyModel {
    pub digital: DigitalModel,
    pub analogue_j_per_event: BTreeMap<Component, f64>,
}

impl EnergyModel {
    /// Reference per-event energies of the 512x512 in-memory macro driving a
    /// single binary input vector: array 0.17 nJ, line drivers 46.08 pJ,
    /// ADC 5.79 nJ, MUX 7.63 pJ.
    pub fn reference_macro() -> Self {
        let mut analogue = BTreeMap::new();
        analogue.insert(Component::Array, 0.17e-9);
        analogue.insert(Component::Driver, 46.08e-12);
        analogue.insert(Component::Adc, 5.79e-9);
        analogue.insert(Component::Mux, 7.63e-12);
        Self {
            digital: DigitalModel::a100(),
            analogue_j_per_event: analogue,
        }
    }

    /// Add or replace one component energy.
    pub fn with_component(mut self, c: Component, j_per_event: f64) -> Self {
        assert!(j_per_event > 0.0, "component energy must be positive");
        self.analogue_j_per_event.insert(c, j_per_event);
        self
    }
}

/// Event counts consumed by the analogue components plus the MACs the
/// digital side spends on the readout.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HybridEvents {
    pub component_events: BTreeMap<Component, u64>,
    pub readout_macs: u64,
}

impl HybridEvents {
    /// One binary input vector applied to the array: one event on each of
    /// the vector-path components (array, driver, ADC, MUX).
    pub fn single_vector() -> Self {
        let mut component_events = BTreeMap::new();
        for c in [
            Component::Array,
            Component::Driver,
            Component::Adc,
            Component::Mux,
        ] {
            component_events.insert(c, 1);
        }
        Self {
            component_events,
            readout_macs: 0,
        }
    }

    pub fn with_events(mut self, c: Component, events: u64) -> Self {
        self.component_events.insert(c, events);
        self
    }

    pub fn with_readout_macs(mut self, macs: u64) -> Self {
        self.readout_macs = macs;
        self
    }
}

/// Full cost report: MAC counts, digital-only energy, hybrid energy with a
/// component breakdown, and the digital/hybrid ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub ops: OpsCount,
    /// All forward MACs executed digitally.
    pub energy_digital_j: f64,
    /// Hybrid total; equals the sum of the breakdown entries.
    pub energy_hybrid_j: f64,
    /// Component name -> energy in joules ("readout" is the digital part).
    pub breakdown_j: BTreeMap<String, f64>,
    /// energy_digital_j / energy_hybrid_j, when the hybrid total is nonzero.
    pub digital_over_hybrid: Option<f64>,
}

/// Estimate hybrid and digital energy for one pass with the given op counts
/// and component event counts.
pub fn hybrid_energy(
    ops: &OpsCount,
    events: &HybridEvents,
    model: &EnergyModel,
) -> Result<CostReport> {
    let eff = model.digital.efficiency_j_per_op()?;
    let mut breakdown_j = BTreeMap::new();
    let mut hybrid = 0.0f64;
    for (&component, &count) in &events.component_events {
        if count == 0 {
            continue;
        }
        let per_event = model
            .analogue_j_per_event
            .get(&component)
            .copied()
            .ok_or_else(|| Error::MissingComponentEnergy(component.name().to_string()))?;
        let e = per_event * count as f64;
        breakdown_j.insert(component.name().to_string(), e);
        hybrid += e;
    }
    if events.readout_macs > 0 {
        let e = events.readout_macs as f64 * eff;
        breakdown_j.insert("readout".to_string(), e);
        hybrid += e;
    }
    Ok(CostReport {
        ops: ops.clone(),
        energy_digital_j: ops.total_forward as f64 * eff,
        energy_hybrid_j: hybrid,
        digital_over_hybrid: if hybrid > 0.0 {
            Some(ops.total_forward as f64 * eff / hybrid)
        } else {
            None
        },
        breakdown_j,
    })
}

/// Standard architecture of the simulator: reservoir, counter, readout.
pub fn lsm_ann_architecture(
    input: usize,
    hidden: usize,
    steps: usize,
    classes: usize,
) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Lsm {
            name: "lsm".into(),
            input,
            hidden,
            steps,
        },
        LayerSpec::Counter {
            name: "counter".into(),
            units: hidden,
        },
        LayerSpec::Dense {
            name: "readout".into(),
            input: hidden,
            output: classes,
            trainable: true,
        },
    ]
}

/// Fully trainable recurrent baseline with the same dimensions.
pub fn recurrent_ann_architecture(
    cell: RecurrentKind,
    input: usize,
    hidden: usize,
    steps: usize,
    classes: usize,
) -> Vec<LayerSpec> {
    vec![
        LayerSpec::Recurrent {
            name: cell.name().to_string(),
            cell,
            input,
            hidden,
            steps,
            trainable: true,
        },
        LayerSpec::Dense {
            name: "readout".into(),
            input: hidden,
            output: classes,
            trainable: true,
        },
    ]
}

impl RecurrentKind {
    pub fn name(self) -> &'static str {
        match self {
            RecurrentKind::Rnn => "rnn",
            RecurrentKind::Srnn => "srnn",
            RecurrentKind::Gru => "gru",
            RecurrentKind::Lstm => "lstm",
        }
    }
}
