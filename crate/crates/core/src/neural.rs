//! Per-feature networks that replace the rescaled inputs of the polynomial
//! head.
//!
//! Every feature `i` gets its own small network mapping the scalar `x_i` to
//! `s` outputs ("subnets"). Outputs are concatenated feature-major, so the
//! head sees `d * s` columns and column `i * s + a` belongs to feature `i`.
//! One bank of networks exists per polynomial order unless the orders are
//! tied, in which case a single bank feeds every order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SpamError};
use crate::poly::explain::{interaction_matrix, Explanation, Term, TermKind};
use crate::poly::forward::{head_logits, HeadBuffers};
use crate::poly::params::{ParamBlocks, SpamParams};

pub const DEEP_HIDDEN: [usize; 3] = [64, 64, 32];
pub const WIDE_HIDDEN: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Linear,
    Relu,
    /// `clip(sum_i exp(w_oi) * (x_i - b_o), 0, 1)`
    Exu,
}

impl Activation {
    /// Index of the linear piece that `z` falls on.
    fn piece(self, z: f64) -> u8 {
        match self {
            Activation::Linear => 0,
            Activation::Relu => u8::from(z > 0.0),
            Activation::Exu => u8::from(z > 0.0) + u8::from(z >= 1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Arch {
    /// `[64, 64, 32]` rectifier layers.
    Deep,
    /// One 1024-unit exponential-unit layer.
    Wide,
    /// A single linear layer, used for identity and reduction checks.
    Linear,
}

impl Arch {
    pub fn parse(tag: &str) -> Result<Self> {
        match tag {
            "deep" => Ok(Arch::Deep),
            "wide" => Ok(Arch::Wide),
            other => Err(SpamError::UnknownArch(other.to_string())),
        }
    }
}

/// Fully connected layer; `weights` is `outputs x inputs`, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub inputs: usize,
    pub outputs: usize,
    pub activation: Activation,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl DenseLayer {
    fn zeros(inputs: usize, outputs: usize, activation: Activation) -> Self {
        Self {
            inputs,
            outputs,
            activation,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn init<R: Rng>(inputs: usize, outputs: usize, activation: Activation, rng: &mut R) -> Self {
        let mut layer = Self::zeros(inputs, outputs, activation);
        match activation {
            Activation::Exu => {
                let slope = Normal::new(4.0, 0.5).expect("valid normal");
                for w in layer.weights.iter_mut() {
                    *w = slope.sample(rng);
                }
                for b in layer.bias.iter_mut() {
                    *b = rng.gen_range(0.0..1.0);
                }
            }
            _ => {
                let a = 1.0 / (inputs as f64).sqrt();
                for w in layer.weights.iter_mut() {
                    *w = rng.gen_range(-a..a);
                }
                for b in layer.bias.iter_mut() {
                    *b = rng.gen_range(-a..a);
                }
            }
        }
        layer
    }

    /// Writes pre-activations and activations for one input vector.
    fn forward(&self, x: &[f64], pre: &mut [f64], out: &mut [f64]) {
        for o in 0..self.outputs {
            let w = &self.weights[o * self.inputs..(o + 1) * self.inputs];
            let z = match self.activation {
                Activation::Exu => w
                    .iter()
                    .zip(x)
                    .map(|(wi, xi)| wi.exp() * (xi - self.bias[o]))
                    .sum::<f64>(),
                _ => self.bias[o] + w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>(),
            };
            pre[o] = z;
            out[o] = match self.activation {
                Activation::Linear => z,
                Activation::Relu => z.max(0.0),
                Activation::Exu => z.clamp(0.0, 1.0),
            };
        }
    }

    /// Accumulates parameter gradients into `grad` and writes the input
    /// gradient into `dx`. `dout` is consumed as scratch.
    fn backward(&self, x: &[f64], pre: &[f64], dout: &mut [f64], grad: &mut DenseLayer, dx: &mut [f64]) {
        for o in 0..self.outputs {
            let gate = match self.activation {
                Activation::Linear => 1.0,
                Activation::Relu => {
                    if pre[o] > 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
                Activation::Exu => {
                    if pre[o] > 0.0 && pre[o] < 1.0 {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            dout[o] *= gate;
        }
        dx.fill(0.0);
        for o in 0..self.outputs {
            let g = dout[o];
            if g == 0.0 {
                continue;
            }
            let row = o * self.inputs..(o + 1) * self.inputs;
            let w = &self.weights[row.clone()];
            let gw = &mut grad.weights[row];
            match self.activation {
                Activation::Exu => {
                    let mut slope_sum = 0.0;
                    for i in 0..self.inputs {
                        let e = w[i].exp();
                        gw[i] += g * e * (x[i] - self.bias[o]);
                        dx[i] += g * e;
                        slope_sum += e;
                    }
                    grad.bias[o] -= g * slope_sum;
                }
                _ => {
                    for i in 0..self.inputs {
                        gw[i] += g * x[i];
                        dx[i] += g * w[i];
                    }
                    grad.bias[o] += g;
                }
            }
        }
    }
}

/// A network from one scalar to `s` outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNet {
    pub layers: Vec<DenseLayer>,
}

/// Intermediate values of one network evaluation, kept for backprop.
#[derive(Debug, Clone, Default)]
pub struct NetTrace {
    /// `acts[0]` is the input, `acts[l + 1]` the output of layer `l`.
    acts: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl FeatureNet {
    fn build<R: Rng>(arch: Arch, subnets: usize, rng: &mut R) -> Self {
        let mut layers = Vec::new();
        let mut width = 1;
        match arch {
            Arch::Deep => {
                for &h in &DEEP_HIDDEN {
                    layers.push(DenseLayer::init(width, h, Activation::Relu, rng));
                    width = h;
                }
            }
            Arch::Wide => {
                layers.push(DenseLayer::init(1, WIDE_HIDDEN, Activation::Exu, rng));
                width = WIDE_HIDDEN;
            }
            Arch::Linear => {}
        }
        layers.push(DenseLayer::init(width, subnets, Activation::Linear, rng));
        Self { layers }
    }

    /// Single linear layer with weight 1 and bias 0 on every output.
    pub fn identity(subnets: usize) -> Self {
        let mut layer = DenseLayer::zeros(1, subnets, Activation::Linear);
        layer.weights.fill(1.0);
        Self {
            layers: vec![layer],
        }
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, x: f64) -> Vec<f64> {
        let mut trace = NetTrace::default();
        self.forward_traced(x, &mut trace);
        trace.acts.pop().unwrap_or_default()
    }

    fn forward_traced(&self, x: f64, trace: &mut NetTrace) {
        let n = self.layers.len();
        trace.acts.resize(n + 1, Vec::new());
        trace.pre.resize(n, Vec::new());
        trace.acts[0].clear();
        trace.acts[0].push(x);
        for (l, layer) in self.layers.iter().enumerate() {
            trace.pre[l].resize(layer.outputs, 0.0);
            let (head, tail) = trace.acts.split_at_mut(l + 1);
            tail[0].resize(layer.outputs, 0.0);
            layer.forward(&head[l], &mut trace.pre[l], &mut tail[0]);
        }
    }

    fn output<'a>(&self, trace: &'a NetTrace) -> &'a [f64] {
        &trace.acts[self.layers.len()]
    }

    fn backward(&self, trace: &NetTrace, dout: &[f64], grad: &mut FeatureNet) {
        let mut upstream = dout.to_vec();
        for l in (0..self.layers.len()).rev() {
            let layer = &self.layers[l];
            let mut dx = vec![0.0; layer.inputs];
            layer.backward(&trace.acts[l], &trace.pre[l], &mut upstream, &mut grad.layers[l], &mut dx);
            upstream = dx;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureNetBank {
    pub arch: Arch,
    pub num_features: usize,
    pub subnets: usize,
    pub degree: usize,
    pub tie_orders: bool,
    /// `nets[g][i]`: group `g` (one per order, or a single shared group),
    /// feature `i`.
    pub nets: Vec<Vec<FeatureNet>>,
}

/// Deterministic bank with untied orders.
pub fn init_bank(arch: &str, d: usize, k: usize, s: usize, seed: u64) -> Result<FeatureNetBank> {
    FeatureNetBank::init(Arch::parse(arch)?, d, k, s, seed, false)
}

impl FeatureNetBank {
    pub fn init(arch: Arch, d: usize, k: usize, s: usize, seed: u64, tie_orders: bool) -> Result<Self> {
        if s == 0 || k == 0 {
            return Err(SpamError::Shape("feature nets need s >= 1 and k >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let groups = if tie_orders { 1 } else { k };
        let nets = (0..groups)
            .map(|_| (0..d).map(|_| FeatureNet::build(arch, s, &mut rng)).collect())
            .collect();
        Ok(Self {
            arch,
            num_features: d,
            subnets: s,
            degree: k,
            tie_orders,
            nets,
        })
    }

    /// Identity nets (`s = 1`): every order sees the raw input.
    pub fn identity(d: usize, k: usize) -> Self {
        Self {
            arch: Arch::Linear,
            num_features: d,
            subnets: 1,
            degree: k,
            tie_orders: false,
            nets: (0..k)
                .map(|_| (0..d).map(|_| FeatureNet::identity(1)).collect())
                .collect(),
        }
    }

    /// Width of the polynomial input, `d * s`.
    pub fn output_dim(&self) -> usize {
        self.num_features * self.subnets
    }

    /// Original feature of an expanded column.
    pub fn feature_of(&self, column: usize) -> usize {
        column / self.subnets
    }

    fn group(&self, order: usize) -> usize {
        if self.tie_orders {
            0
        } else {
            order - 1
        }
    }

    pub fn validate(&self) -> Result<()> {
        let groups = if self.tie_orders { 1 } else { self.degree };
        if self.nets.len() != groups {
            return Err(SpamError::Shape(format!(
                "feature-net bank has {} groups, expected {groups}",
                self.nets.len()
            )));
        }
        for group in &self.nets {
            if group.len() != self.num_features {
                return Err(SpamError::Shape(format!(
                    "feature-net group has {} nets for {} features",
                    group.len(),
                    self.num_features
                )));
            }
            for net in group {
                let mut width = 1;
                for layer in &net.layers {
                    if layer.inputs != width
                        || layer.weights.len() != layer.inputs * layer.outputs
                        || layer.bias.len() != layer.outputs
                    {
                        return Err(SpamError::Shape("inconsistent feature-net layer".into()));
                    }
                    width = layer.outputs;
                }
                if width != self.subnets {
                    return Err(SpamError::Shape(format!(
                        "feature net emits {width} outputs, expected {}",
                        self.subnets
                    )));
                }
            }
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.num_features {
            return Err(SpamError::Shape(format!(
                "input has {} features, feature nets expect {}",
                x.len(),
                self.num_features
            )));
        }
        Ok(())
    }

    pub(crate) fn forward_into(&self, order: usize, x: &[f64], out: &mut [f64]) {
        let s = self.subnets;
        for (i, net) in self.nets[self.group(order)].iter().enumerate() {
            out[i * s..(i + 1) * s].copy_from_slice(&net.forward(x[i]));
        }
    }

    /// Per-feature outputs for `order`, shape `d * s`.
    pub fn feature_map_forward(&self, order: usize, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        if order == 0 || order > self.degree {
            return Err(SpamError::Shape(format!(
                "order {order} outside 1..={}",
                self.degree
            )));
        }
        let mut out = vec![0.0; self.output_dim()];
        self.forward_into(order, x, &mut out);
        Ok(out)
    }

    /// Linear piece of every gated unit of every net at input `x`. Two
    /// parameter settings with equal patterns lie on one smooth piece.
    pub(crate) fn activation_pattern(&self, x: &[f64], out: &mut Vec<u8>) {
        let mut trace = NetTrace::default();
        for group in &self.nets {
            for (net, &xi) in group.iter().zip(x) {
                net.forward_traced(xi, &mut trace);
                for (layer, pre) in net.layers.iter().zip(&trace.pre) {
                    out.extend(pre.iter().map(|&z| layer.activation.piece(z)));
                }
            }
        }
    }

    /// Evaluates every net for every order with traces kept.
    pub(crate) fn trace(&self, x: &[f64], traces: &mut BankTrace) {
        let s = self.subnets;
        let groups = self.nets.len();
        traces.nets.resize_with(groups, Vec::new);
        traces.outputs.resize_with(groups, Vec::new);
        for g in 0..groups {
            traces.nets[g].resize_with(self.num_features, NetTrace::default);
            traces.outputs[g].resize(self.output_dim(), 0.0);
            for (i, net) in self.nets[g].iter().enumerate() {
                net.forward_traced(x[i], &mut traces.nets[g][i]);
                traces.outputs[g][i * s..(i + 1) * s].copy_from_slice(net.output(&traces.nets[g][i]));
            }
        }
    }

    pub(crate) fn outputs_for<'a>(&self, traces: &'a BankTrace, order: usize) -> &'a [f64] {
        &traces.outputs[self.group(order)]
    }

    /// Backpropagates `dz` (gradient w.r.t. the order-`order` outputs).
    pub(crate) fn backward(&self, traces: &BankTrace, order: usize, dz: &[f64], grad: &mut FeatureNetBank) {
        let g = self.group(order);
        let s = self.subnets;
        for (i, net) in self.nets[g].iter().enumerate() {
            let d = &dz[i * s..(i + 1) * s];
            if d.iter().all(|v| *v == 0.0) {
                continue;
            }
            net.backward(&traces.nets[g][i], d, &mut grad.nets[g][i]);
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct BankTrace {
    nets: Vec<Vec<NetTrace>>,
    outputs: Vec<Vec<f64>>,
}

impl ParamBlocks for FeatureNetBank {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for group in &self.nets {
            for net in group {
                for layer in &net.layers {
                    out.push(layer.weights.as_slice());
                    out.push(layer.bias.as_slice());
                }
            }
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for group in self.nets.iter_mut() {
            for net in group.iter_mut() {
                for layer in net.layers.iter_mut() {
                    out.push(layer.weights.as_mut_slice());
                    out.push(layer.bias.as_mut_slice());
                }
            }
        }
        out
    }
}

fn check_pair(params: &SpamParams, bank: &FeatureNetBank) -> Result<()> {
    if params.num_features != bank.output_dim() {
        return Err(SpamError::Shape(format!(
            "head expects {} inputs, feature nets emit {}",
            params.num_features,
            bank.output_dim()
        )));
    }
    if bank.degree < params.degree() {
        return Err(SpamError::Shape(format!(
            "feature nets cover {} orders, head has order {}",
            bank.degree,
            params.degree()
        )));
    }
    Ok(())
}

/// Class logits of a head fed by feature nets. No rescaling is applied to
/// the net outputs.
pub fn neural_spam_forward(params: &SpamParams, bank: &FeatureNetBank, x: &[f64]) -> Result<Vec<f64>> {
    check_pair(params, bank)?;
    bank.check_input(x)?;
    let mut buf = HeadBuffers::new(params);
    let z1 = bank.feature_map_forward(1, x)?;
    for (idx, input) in buf.inputs.iter_mut().enumerate() {
        bank.forward_into(idx + 2, x, input);
    }
    head_logits(params, &params.singular, &z1, &mut buf);
    Ok(buf.logits)
}

/// Exact decomposition of an order <= 2 neural model's logit, with subnet
/// terms summed back onto the original features.
pub fn neural_explain(
    params: &SpamParams,
    bank: &FeatureNetBank,
    x: &[f64],
    class_index: usize,
) -> Result<Explanation> {
    let k = params.degree();
    if k > 2 {
        return Err(SpamError::UnsupportedOrder(k));
    }
    if class_index >= params.num_classes {
        return Err(SpamError::LabelOutOfRange {
            label: class_index,
            classes: params.num_classes,
        });
    }
    let logit = neural_spam_forward(params, bank, x)?[class_index];
    let d = bank.num_features;
    let s = bank.subnets;
    let dim = params.num_features;
    let z1 = bank.feature_map_forward(1, x)?;
    let w1 = params.order1_row(class_index);
    let mut terms = Vec::new();
    for i in 0..d {
        let block = i * s..(i + 1) * s;
        terms.push(Term {
            kind: TermKind::NeuralUnary,
            i,
            j: None,
            contribution: w1[block.clone()].iter().zip(&z1[block]).map(|(a, b)| a * b).sum(),
        });
    }
    if k == 2 {
        let m = interaction_matrix(params, class_index)?;
        let z2 = bank.feature_map_forward(2, x)?;
        let block_sum = |i: usize, j: usize| {
            let mut acc = 0.0;
            for a in i * s..(i + 1) * s {
                for b in j * s..(j + 1) * s {
                    acc += m[a * dim + b] * z2[a] * z2[b];
                }
            }
            acc
        };
        for i in 0..d {
            terms.push(Term {
                kind: TermKind::Diagonal,
                i,
                j: None,
                contribution: block_sum(i, i),
            });
            for j in i + 1..d {
                terms.push(Term {
                    kind: TermKind::NeuralPairwise,
                    i,
                    j: Some(j),
                    contribution: 2.0 * block_sum(i, j),
                });
            }
        }
    }
    let mut e = Explanation {
        class_index,
        bias: params.bias[class_index],
        terms,
        logit,
    };
    e.sort_terms();
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::explain::explain;
    use crate::poly::forward::poly_forward_multiclass;
    use crate::poly::rank::RankSpec;

    fn random_x(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
        (0..d).map(|_| rng.gen_range(0.0..1.0)).collect()
    }

    #[test]
    fn identity_nets_pass_inputs_through() {
        let bank = FeatureNetBank::identity(4, 2);
        let x = [0.1, 0.7, 0.0, 1.0];
        assert_eq!(bank.feature_map_forward(1, &x).unwrap(), x.to_vec());
        assert_eq!(bank.feature_map_forward(2, &x).unwrap(), x.to_vec());
    }

    #[test]
    fn zeroed_last_layer_gives_zero() {
        let mut bank = init_bank("deep", 3, 2, 2, 5).unwrap();
        for group in bank.nets.iter_mut() {
            for net in group.iter_mut() {
                let last = net.layers.last_mut().unwrap();
                last.weights.fill(0.0);
                last.bias.fill(0.0);
            }
        }
        assert_eq!(bank.feature_map_forward(2, &[0.3, 0.4, 0.5]).unwrap(), vec![0.0; 6]);
    }

    #[test]
    fn perturbing_one_feature_changes_one_block() {
        for arch in ["deep", "wide"] {
            let bank = init_bank(arch, 5, 2, 3, 9).unwrap();
            let x = [0.2, 0.4, 0.6, 0.8, 0.5];
            let mut x2 = x;
            x2[2] = 0.9;
            let a = bank.feature_map_forward(1, &x).unwrap();
            let b = bank.feature_map_forward(1, &x2).unwrap();
            for col in 0..15 {
                if bank.feature_of(col) == 2 {
                    continue;
                }
                assert_eq!(a[col], b[col]);
            }
            assert!((6..9).any(|c| a[c] != b[c]), "{arch}");
        }
    }

    #[test]
    fn init_is_deterministic_and_checks_tag() {
        let a = init_bank("wide", 3, 2, 1, 42).unwrap();
        let b = init_bank("wide", 3, 2, 1, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_bank("wide", 3, 2, 1, 43).unwrap());
        assert!(matches!(init_bank("conv", 3, 2, 1, 0), Err(SpamError::UnknownArch(_))));
    }

    #[test]
    fn architecture_sizes() {
        for s in [1, 4] {
            let bank = init_bank("deep", 1, 1, s, 0).unwrap();
            let want = 64 + 64 + 64 * 64 + 64 + 64 * 32 + 32 + 32 * s + s;
            assert_eq!(bank.nets[0][0].num_params(), want);
        }
        let wide = init_bank("wide", 2, 2, 1, 0).unwrap();
        assert_eq!(wide.nets[0][0].layers[0].outputs, 1024);
        assert_eq!(wide.nets.len(), 2);
        let tied = FeatureNetBank::init(Arch::Deep, 2, 3, 1, 0, true).unwrap();
        assert_eq!(tied.nets.len(), 1);
        tied.validate().unwrap();
        assert_eq!(
            tied.feature_map_forward(1, &[0.3, 0.6]).unwrap(),
            tied.feature_map_forward(3, &[0.3, 0.6]).unwrap()
        );
    }

    #[test]
    fn exu_output_is_clipped() {
        let bank = init_bank("wide", 1, 1, 1, 3).unwrap();
        let layer = &bank.nets[0][0].layers[0];
        let mut pre = vec![0.0; layer.outputs];
        let mut out = vec![0.0; layer.outputs];
        for x in [0.0, 0.3, 1.0] {
            layer.forward(&[x], &mut pre, &mut out);
            assert!(out.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(out.iter().any(|v| *v == 0.0 || *v == 1.0));
        }
    }

    #[test]
    fn identity_nets_reduce_to_linear_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = SpamParams::random(4, 2, RankSpec::linear(), &mut rng);
        let bank = FeatureNetBank::identity(4, 1);
        for _ in 0..20 {
            let x = random_x(&mut rng, 4);
            let a = neural_spam_forward(&params, &bank, &x).unwrap();
            let b = poly_forward_multiclass(&params, &x).unwrap();
            for c in 0..2 {
                assert!((a[c] - b[c]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn identity_nets_on_prerescaled_inputs_match_poly_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut params = SpamParams::random(3, 2, RankSpec::new(2, vec![2]).unwrap(), &mut rng);
        params.order1.fill(0.0);
        let bank = FeatureNetBank::identity(3, 2);
        for _ in 0..20 {
            let x = random_x(&mut rng, 3);
            let rescaled: Vec<f64> = x.iter().map(|v| v.sqrt()).collect();
            let a = neural_spam_forward(&params, &bank, &rescaled).unwrap();
            let b = poly_forward_multiclass(&params, &x).unwrap();
            for c in 0..2 {
                assert!((a[c] - b[c]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn explanation_reduces_to_linear_path_under_identity_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let params = SpamParams::random(4, 2, RankSpec::new(2, vec![3]).unwrap(), &mut rng);
        let bank = FeatureNetBank::identity(4, 2);
        let x = random_x(&mut rng, 4);
        let squared: Vec<f64> = x.iter().map(|v| v * v).collect();
        let neural = neural_explain(&params, &bank, &x, 1).unwrap();
        // order-2 terms: the linear path sees sqrt(x^2) = x
        let on_squared = explain(&params, &squared, 1).unwrap();
        let on_raw = explain(&params, &x, 1).unwrap();
        let find = |e: &Explanation, kind: TermKind, i: usize, j: Option<usize>| {
            e.terms
                .iter()
                .find(|t| t.kind == kind && t.i == i && t.j == j)
                .unwrap()
                .contribution
        };
        for i in 0..4 {
            assert_eq!(
                find(&neural, TermKind::NeuralUnary, i, None),
                find(&on_raw, TermKind::Unary, i, None)
            );
            let a = find(&neural, TermKind::Diagonal, i, None);
            let b = find(&on_squared, TermKind::Diagonal, i, None);
            assert!((a - b).abs() <= 1e-12);
            for j in i + 1..4 {
                let a = find(&neural, TermKind::NeuralPairwise, i, Some(j));
                let b = find(&on_squared, TermKind::Pairwise, i, Some(j));
                assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn zero_nets_give_bias_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut params = SpamParams::random(2, 1, RankSpec::new(2, vec![2]).unwrap(), &mut rng);
        params.bias[0] = 0.4;
        let mut bank = FeatureNetBank::identity(2, 2);
        bank.fill_zero();
        let e = neural_explain(&params, &bank, &[0.3, 0.9], 0).unwrap();
        assert_eq!(e.logit, 0.4);
        assert!(e.terms.iter().all(|t| t.contribution == 0.0));
    }

    #[test]
    fn random_nets_are_complete() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for trial in 0..30 {
            let d = 1 + trial % 4;
            let s = 1 + trial % 3;
            let arch = if trial % 2 == 0 { "deep" } else { "wide" };
            let bank = init_bank(arch, d, 2, s, trial as u64).unwrap();
            let params = SpamParams::random(d * s, 2, RankSpec::new(2, vec![3]).unwrap(), &mut rng);
            let x = random_x(&mut rng, d);
            let e = neural_explain(&params, &bank, &x, trial % 2).unwrap();
            assert!(e.completeness_gap() <= 1e-9 * e.logit.abs().max(1.0));
            assert_eq!(e.terms.len(), d + d * (d + 1) / 2);
        }
    }

    #[test]
    fn neural_explain_rejects_order_three() {
        let params = SpamParams::zeros(2, 1, RankSpec::new(3, vec![1, 1]).unwrap());
        let bank = FeatureNetBank::identity(2, 3);
        assert!(matches!(
            neural_explain(&params, &bank, &[0.1, 0.2], 0),
            Err(SpamError::UnsupportedOrder(3))
        ));
    }

    #[test]
    fn shape_errors() {
        let params = SpamParams::zeros(4, 1, RankSpec::new(2, vec![1]).unwrap());
        let bank = FeatureNetBank::identity(2, 2);
        assert!(neural_spam_forward(&params, &bank, &[0.1, 0.2]).is_err());
        assert!(bank.feature_map_forward(1, &[0.1]).is_err());
    }
}
