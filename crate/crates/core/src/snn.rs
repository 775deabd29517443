//! Spiking controllers: leaky integrate-and-fire nodes, two-layer per-actuator
//! networks, the flat genome codec, and the controller that turns telemetry
//! into an action array.
//!
//! Each node accumulates `potential = (1 - decay) * potential + sum(w * x)`
//! and fires (outputs 1.0, resetting the potential) whenever the potential
//! reaches its bias threshold. With the all-zero genome every node fires every
//! tick: that degenerate always-expand controller is the known starting point
//! of evolution.

use crate::error::{Error, Result};
use crate::softbody::ActionArray;

/// Leak fraction applied to the membrane potential each tick.
pub const DEFAULT_DECAY: f64 = 0.1;
/// Spike-history window used by the duty-cycle output mode.
pub const FIRE_LOG_WINDOW: usize = 10;
/// Parameters per network: two hidden nodes and one output node, each with two
/// weights and a bias.
pub const PARAMS_PER_NET: usize = 9;

/// How an output node's activity maps to a length target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputMode {
    /// 1.6 on a spike, 0.6 otherwise.
    Binary,
    /// 0.6 plus the output node's recent spike fraction.
    DutyCycle,
}

/// One leaky integrate-and-fire node.
#[derive(Debug, Clone)]
pub struct SpikyNode {
    weights: Vec<f64>,
    bias: f64,
    potential: f64,
    decay: f64,
    fire_log: Vec<bool>,
    fire_cursor: usize,
}

impl SpikyNode {
    pub fn new(weights: Vec<f64>, bias: f64) -> Self {
        SpikyNode::with_window(weights, bias, FIRE_LOG_WINDOW)
    }

    pub fn with_window(weights: Vec<f64>, bias: f64, window: usize) -> Self {
        SpikyNode {
            weights,
            bias,
            potential: 0.0,
            decay: DEFAULT_DECAY,
            fire_log: vec![false; window.max(1)],
            fire_cursor: 0,
        }
    }

    /// Accumulates the weighted input into the decayed potential and fires if
    /// the potential reaches the bias. A spike returns 1.0 and resets the
    /// potential; the result is recorded in the fire log either way.
    pub fn compute(&mut self, inputs: &[f64]) -> Result<f64> {
        if inputs.len() != self.weights.len() {
            return Err(Error::InputLength {
                expected: self.weights.len(),
                actual: inputs.len(),
            });
        }
        let drive: f64 = self.weights.iter().zip(inputs).map(|(w, x)| w * x).sum();
        self.potential = (1.0 - self.decay) * self.potential + drive;
        let spike = self.potential >= self.bias;
        if spike {
            self.potential = 0.0;
        }
        self.fire_log[self.fire_cursor] = spike;
        self.fire_cursor = (self.fire_cursor + 1) % self.fire_log.len();
        Ok(if spike { 1.0 } else { 0.0 })
    }

    /// Fraction of spikes in the fire-log window.
    pub fn duty_cycle(&self) -> f64 {
        let ones = self.fire_log.iter().filter(|&&b| b).count();
        ones as f64 / self.fire_log.len() as f64
    }

    pub fn potential(&self) -> f64 {
        self.potential
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn reset(&mut self) {
        self.potential = 0.0;
        self.fire_log.fill(false);
        self.fire_cursor = 0;
    }
}

/// One per-actuator network: two hidden nodes feeding one output node.
#[derive(Debug, Clone)]
pub struct SpikyNet {
    hidden: [SpikyNode; 2],
    output: SpikyNode,
}

impl SpikyNet {
    /// Builds a network from its nine parameters, laid out as
    /// `[h0.w0, h0.w1, h0.bias, h1.w0, h1.w1, h1.bias, out.w0, out.w1, out.bias]`.
    pub fn from_params(params: &[f64]) -> Result<Self> {
        if params.len() != PARAMS_PER_NET {
            return Err(Error::GenomeLength {
                expected: PARAMS_PER_NET,
                actual: params.len(),
            });
        }
        Ok(SpikyNet {
            hidden: [
                SpikyNode::new(vec![params[0], params[1]], params[2]),
                SpikyNode::new(vec![params[3], params[4]], params[5]),
            ],
            output: SpikyNode::new(vec![params[6], params[7]], params[8]),
        })
    }

    /// The nine parameters in genome layout order.
    pub fn params(&self) -> [f64; PARAMS_PER_NET] {
        let h0 = &self.hidden[0];
        let h1 = &self.hidden[1];
        let o = &self.output;
        [
            h0.weights[0],
            h0.weights[1],
            h0.bias,
            h1.weights[0],
            h1.weights[1],
            h1.bias,
            o.weights[0],
            o.weights[1],
            o.bias,
        ]
    }

    /// Advances the network one tick: hidden spike bits from the two telemetry
    /// inputs, then the output node from the hidden bits, mapped to a length
    /// target by the output mode.
    pub fn compute(&mut self, inputs: (f64, f64), mode: OutputMode) -> f64 {
        let x = [inputs.0, inputs.1];
        let h0 = self.hidden[0].compute(&x).expect("hidden arity is fixed");
        let h1 = self.hidden[1].compute(&x).expect("hidden arity is fixed");
        let spike = self
            .output
            .compute(&[h0, h1])
            .expect("output arity is fixed");
        match mode {
            OutputMode::Binary => {
                if spike >= 1.0 {
                    1.6
                } else {
                    0.6
                }
            }
            OutputMode::DutyCycle => 0.6 + self.output.duty_cycle(),
        }
    }

    pub fn output_node(&self) -> &SpikyNode {
        &self.output
    }

    pub fn reset(&mut self) {
        self.hidden[0].reset();
        self.hidden[1].reset();
        self.output.reset();
    }
}

/// Flat vector of all network parameters, nine per actuator in scan order.
#[derive(Debug, Clone, PartialEq)]
pub struct Genome {
    values: Vec<f64>,
}

impl Genome {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || !values.len().is_multiple_of(PARAMS_PER_NET) {
            return Err(Error::GenomeLength {
                expected: PARAMS_PER_NET * values.len().div_ceil(PARAMS_PER_NET).max(1),
                actual: values.len(),
            });
        }
        Ok(Genome { values })
    }

    pub fn zeros(actuator_count: usize) -> Self {
        Genome {
            values: vec![0.0; PARAMS_PER_NET * actuator_count.max(1)],
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn actuator_count(&self) -> usize {
        self.values.len() / PARAMS_PER_NET
    }

    /// Serializes as a single CSV row of full-precision reals.
    pub fn to_csv_row(&self) -> String {
        self.values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Parses a single CSV row of reals.
    pub fn from_csv_row(row: &str) -> Result<Self> {
        let values: Vec<f64> = row
            .trim()
            .split(',')
            .map(|field| {
                field
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::MalformedGenome(format!("{field:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        Genome::new(values)
    }
}

/// Slices a genome into one network per actuator in scan order.
pub fn decode(genome: &Genome, actuator_count: usize) -> Result<Vec<SpikyNet>> {
    let expected = PARAMS_PER_NET * actuator_count;
    if genome.len() != expected {
        return Err(Error::GenomeLength {
            expected,
            actual: genome.len(),
        });
    }
    genome
        .values()
        .chunks_exact(PARAMS_PER_NET)
        .map(SpikyNet::from_params)
        .collect()
}

/// Re-flattens networks into a genome; inverse of [`decode`].
pub fn encode(nets: &[SpikyNet]) -> Genome {
    let values: Vec<f64> = nets.iter().flat_map(|n| n.params()).collect();
    Genome { values }
}

/// One stateful network per actuator, advanced once per control tick.
#[derive(Debug, Clone)]
pub struct SnnController {
    nets: Vec<SpikyNet>,
    output_mode: OutputMode,
}

impl SnnController {
    pub fn from_genome(
        genome: &Genome,
        actuator_count: usize,
        output_mode: OutputMode,
    ) -> Result<Self> {
        Ok(SnnController {
            nets: decode(genome, actuator_count)?,
            output_mode,
        })
    }

    /// Feeds each actuator's `(d_tl, d_br)` pair to its network and collects
    /// the length targets. Network state advances one tick.
    pub fn step(&mut self, telemetry: &[(f64, f64)]) -> Result<ActionArray> {
        if telemetry.len() != self.nets.len() {
            return Err(Error::TelemetryCount {
                expected: self.nets.len(),
                actual: telemetry.len(),
            });
        }
        let values: Vec<f64> = self
            .nets
            .iter_mut()
            .zip(telemetry)
            .map(|(net, &pair)| net.compute(pair, self.output_mode))
            .collect();
        Ok(ActionArray::new(values))
    }

    /// Clears all potentials and fire logs; parameters are untouched.
    pub fn reset(&mut self) {
        for net in &mut self.nets {
            net.reset();
        }
    }

    pub fn actuator_count(&self) -> usize {
        self.nets.len()
    }

    pub fn output_mode(&self) -> OutputMode {
        self.output_mode
    }

    pub fn nets(&self) -> &[SpikyNet] {
        &self.nets
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn node_spikes_and_resets() {
        let mut node = SpikyNode::new(vec![1.0, 1.0], 1.5);
        let out = node.compute(&[1.0, 1.0]).unwrap();
        assert_eq!(out, 1.0);
        assert_eq!(node.potential(), 0.0);
    }

    #[test]
    fn potential_accumulates_with_leak() {
        let mut node = SpikyNode::new(vec![1.0], 10.0);
        let expected = [1.0, 1.9, 2.71];
        for &e in &expected {
            let out = node.compute(&[1.0]).unwrap();
            assert_eq!(out, 0.0);
            assert_relative_eq!(node.potential(), e, epsilon = 1e-12);
        }
    }

    #[test]
    fn zero_node_spikes_every_tick() {
        let mut node = SpikyNode::new(vec![0.0, 0.0], 0.0);
        for _ in 0..5 {
            assert_eq!(node.compute(&[3.0, -7.0]).unwrap(), 1.0);
        }
        assert_eq!(node.duty_cycle(), 0.5);
    }

    #[test]
    fn leak_recurrence_matches_closed_form() {
        // Constant sub-threshold drive s gives p_t = s (1 - (1-d)^t) / d.
        let s = 0.35;
        let d = DEFAULT_DECAY;
        let mut node = SpikyNode::new(vec![1.0], f64::INFINITY);
        for t in 1..=100 {
            node.compute(&[s]).unwrap();
            let closed = s * (1.0 - (1.0 - d).powi(t)) / d;
            assert_relative_eq!(node.potential(), closed, epsilon = 1e-12);
        }
        // The fixed point s/d stays below an unreachable bias forever.
        assert!(node.potential() < s / d);
    }

    #[test]
    fn input_arity_checked() {
        let mut node = SpikyNode::new(vec![1.0, 1.0], 0.5);
        assert!(matches!(
            node.compute(&[1.0]),
            Err(Error::InputLength {
                expected: 2,
                actual: 1
            })
        ));
    }

    #[test]
    fn duty_cycle_counts_window_fraction() {
        let mut silent = SpikyNode::new(vec![1.0], f64::INFINITY);
        silent.compute(&[0.0]).unwrap();
        assert_eq!(silent.duty_cycle(), 0.0);
        // Drive 1.0 for three ticks then 0.0: exactly 3 spikes in 10 ticks.
        let mut spiky = SpikyNode::new(vec![1.0], 1.0);
        for t in 0..10 {
            let x = if t < 3 { 1.0 } else { 0.0 };
            spiky.compute(&[x]).unwrap();
        }
        assert_relative_eq!(spiky.duty_cycle(), 0.3, epsilon = 1e-12);
    }

    #[test]
    fn alternating_log_gives_half_duty() {
        let mut node = SpikyNode::new(vec![1.0], 1.0);
        // 1, 0, 1, 0, ...: spike on odd ticks via alternating drive.
        for t in 0..10 {
            let x = if t % 2 == 0 { 1.0 } else { 0.0 };
            node.compute(&[x]).unwrap();
        }
        assert_relative_eq!(node.duty_cycle(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn binary_output_maps_spikes() {
        let mut always = SpikyNet::from_params(&[0.0; 9]).unwrap();
        assert_eq!(always.compute((0.3, 0.9), OutputMode::Binary), 1.6);
        let mut never =
            SpikyNet::from_params(&[0.0, 0.0, 1e18, 0.0, 0.0, 1e18, 0.0, 0.0, 1e18]).unwrap();
        assert_eq!(never.compute((0.3, 0.9), OutputMode::Binary), 0.6);
    }

    #[test]
    fn full_duty_cycle_reads_fully_expanded() {
        let mut net = SpikyNet::from_params(&[0.0; 9]).unwrap();
        for _ in 0..FIRE_LOG_WINDOW {
            net.compute((1.0, 1.0), OutputMode::DutyCycle);
        }
        assert_relative_eq!(
            net.compute((1.0, 1.0), OutputMode::DutyCycle),
            1.6,
            epsilon = 1e-12
        );
    }

    #[test]
    fn genome_layout_decodes_in_order() {
        let genome = Genome::new(vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]).unwrap();
        let nets = decode(&genome, 1).unwrap();
        let p = nets[0].params();
        assert_eq!(p, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]);
    }

    #[test]
    fn genome_length_must_divide() {
        assert!(Genome::new(vec![0.0; 71]).is_err());
        let ok = Genome::new(vec![0.0; 72]).unwrap();
        assert!(matches!(
            decode(&ok, 9),
            Err(Error::GenomeLength {
                expected: 81,
                actual: 72
            })
        ));
    }

    #[test]
    fn zero_genome_decodes_to_zero_nets() {
        let genome = Genome::zeros(8);
        assert_eq!(genome.len(), 72);
        let nets = decode(&genome, 8).unwrap();
        assert_eq!(nets.len(), 8);
        for net in &nets {
            assert!(net.params().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn encode_decode_round_trip_random_genomes() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..1000 {
            let n = rng.random_range(1..6usize);
            let values: Vec<f64> = (0..9 * n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let genome = Genome::new(values.clone()).unwrap();
            let nets = decode(&genome, n).unwrap();
            let back = encode(&nets);
            assert_eq!(back.values(), &values[..]);
        }
    }

    #[test]
    fn genome_csv_round_trip() {
        let genome = Genome::new(vec![0.5, -1.25, 3.0, 0.1, 2.0, -0.75, 9.5, 1e-9, -4.0]).unwrap();
        let row = genome.to_csv_row();
        let back = Genome::from_csv_row(&row).unwrap();
        assert_eq!(genome, back);
        assert!(Genome::from_csv_row("1.0,abc").is_err());
    }

    #[test]
    fn zero_genome_controller_always_expands() {
        let genome = Genome::zeros(8);
        let mut controller = SnnController::from_genome(&genome, 8, OutputMode::Binary).unwrap();
        let telemetry = vec![(1.0, 1.0); 8];
        for _ in 0..5 {
            let action = controller.step(&telemetry).unwrap();
            assert!(action.values().iter().all(|&v| v == 1.6));
        }
    }

    #[test]
    fn unreachable_bias_controller_stays_contracted() {
        let values: Vec<f64> = (0..72)
            .map(|i| if (i + 1) % 3 == 0 { 1e18 } else { 0.0 })
            .collect();
        let genome = Genome::new(values).unwrap();
        let mut controller = SnnController::from_genome(&genome, 8, OutputMode::Binary).unwrap();
        let action = controller.step(&[(1.0, 1.0); 8]).unwrap();
        assert!(action.values().iter().all(|&v| v == 0.6));
    }

    #[test]
    fn controller_trace_matches_hand_simulation() {
        // One net: hidden nodes pass the first input through with bias 1.5;
        // output spikes when both hidden fire (weights 1, 1, bias 2).
        let genome = Genome::new(vec![
            1.0, 0.0, 1.5, // h0: drive = d_tl
            1.0, 0.0, 1.5, // h1: same
            1.0, 1.0, 2.0, // out: needs both hidden spikes
        ])
        .unwrap();
        let mut controller = SnnController::from_genome(&genome, 1, OutputMode::Binary).unwrap();
        // Constant telemetry d_tl = 1.0: hidden potential runs 1.0, 1.9 (spike,
        // reset), 1.0, 1.9 (spike), ... so hidden fires on ticks 2, 4, ...
        // The output sees drive 2 on those ticks and spikes immediately.
        let mut actions = Vec::new();
        for _ in 0..5 {
            let a = controller.step(&[(1.0, 0.0)]).unwrap();
            actions.push(a.values()[0]);
        }
        assert_eq!(actions, vec![0.6, 1.6, 0.6, 1.6, 0.6]);
    }

    #[test]
    fn reset_clears_state_idempotently() {
        let genome = Genome::zeros(2);
        let mut controller = SnnController::from_genome(&genome, 2, OutputMode::DutyCycle).unwrap();
        for _ in 0..7 {
            controller.step(&[(1.0, 1.0), (2.0, 2.0)]).unwrap();
        }
        controller.reset();
        for net in controller.nets() {
            assert_eq!(net.output_node().duty_cycle(), 0.0);
            assert_eq!(net.output_node().potential(), 0.0);
        }
        let after_once: Vec<[f64; 9]> = controller.nets().iter().map(|n| n.params()).collect();
        controller.reset();
        let after_twice: Vec<[f64; 9]> = controller.nets().iter().map(|n| n.params()).collect();
        assert_eq!(after_once, after_twice);
    }

    #[test]
    fn identical_controllers_produce_identical_streams() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let values: Vec<f64> = (0..18).map(|_| rng.random_range(-2.0..2.0)).collect();
        let genome = Genome::new(values).unwrap();
        let mut a = SnnController::from_genome(&genome, 2, OutputMode::DutyCycle).unwrap();
        let mut b = SnnController::from_genome(&genome, 2, OutputMode::DutyCycle).unwrap();
        a.reset();
        b.reset();
        for t in 0..50 {
            let telemetry = vec![
                ((t as f64 * 0.13).sin().abs() + 0.5, 1.0),
                (1.0, (t as f64 * 0.31).cos().abs() + 0.5),
            ];
            let va = a.step(&telemetry).unwrap();
            let vb = b.step(&telemetry).unwrap();
            assert_eq!(va.values(), vb.values());
        }
    }

    #[test]
    fn telemetry_count_checked() {
        let genome = Genome::zeros(3);
        let mut controller = SnnController::from_genome(&genome, 3, OutputMode::Binary).unwrap();
        assert!(matches!(
            controller.step(&[(1.0, 1.0)]),
            Err(Error::TelemetryCount {
                expected: 3,
                actual: 1
            })
        ));
    }
}
