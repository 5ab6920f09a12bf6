//! Trained model container and its JSON document format.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SpamError};
use crate::matrix::Matrix;
use crate::neural::{neural_spam_forward, FeatureNetBank};
use crate::par;
use crate::poly::explain::{explain, Explanation};
use crate::poly::forward::{head_logits, poly_forward_multiclass, HeadBuffers};
use crate::poly::params::{ParamBlocks, SpamParams};
use crate::poly::rank::RankSpec;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Regression,
    Binary,
    Multiclass,
}

impl Task {
    pub fn as_str(self) -> &'static str {
        match self {
            Task::Regression => "regression",
            Task::Binary => "binary",
            Task::Multiclass => "multiclass",
        }
    }

    /// Number of head outputs for a task with `classes` labels.
    pub fn num_outputs(self, classes: usize) -> usize {
        match self {
            Task::Regression | Task::Binary => 1,
            Task::Multiclass => classes,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModeFlags {
    pub convex: bool,
    pub task: Task,
}

/// Polynomial head plus optional per-feature networks.
#[derive(Debug, Clone, PartialEq)]
pub struct SpamModel {
    pub params: SpamParams,
    pub nets: Option<FeatureNetBank>,
    pub flags: ModeFlags,
}

impl SpamModel {
    pub fn linear(params: SpamParams, task: Task) -> Self {
        Self {
            params,
            nets: None,
            flags: ModeFlags {
                convex: false,
                task,
            },
        }
    }

    pub fn neural(params: SpamParams, nets: FeatureNetBank, task: Task) -> Self {
        Self {
            params,
            nets: Some(nets),
            flags: ModeFlags {
                convex: false,
                task,
            },
        }
    }

    /// Number of raw input features.
    pub fn input_dim(&self) -> usize {
        self.nets
            .as_ref()
            .map_or(self.params.num_features, |b| b.num_features)
    }

    pub fn num_outputs(&self) -> usize {
        self.params.num_classes
    }

    pub fn degree(&self) -> usize {
        self.params.degree()
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if let Some(bank) = &self.nets {
            bank.validate()?;
            if bank.output_dim() != self.params.num_features || bank.degree < self.degree() {
                return Err(SpamError::Shape(format!(
                    "feature nets ({} features x {} subnets, {} orders) do not fit a head of \
                     width {} and order {}",
                    bank.num_features,
                    bank.subnets,
                    bank.degree,
                    self.params.num_features,
                    self.degree()
                )));
            }
        }
        Ok(())
    }

    pub fn logits(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.nets {
            None => poly_forward_multiclass(&self.params, x),
            Some(bank) => neural_spam_forward(&self.params, bank, x),
        }
    }

    pub fn explain(&self, x: &[f64], class_index: usize) -> Result<Explanation> {
        match &self.nets {
            None => explain(&self.params, x, class_index),
            Some(bank) => crate::neural::neural_explain(&self.params, bank, x, class_index),
        }
    }

    fn predict_rows(&self, rows: &[f64], out: &mut Vec<f64>) {
        let d = self.input_dim().max(1);
        let mut buf = HeadBuffers::new(&self.params);
        let mut z1 = vec![0.0; self.params.num_features];
        for x in rows.chunks(d) {
            match &self.nets {
                None => {
                    buf.fill_rescaled(x);
                    z1.copy_from_slice(x);
                }
                Some(bank) => {
                    bank.forward_into(1, x, &mut z1);
                    for (idx, input) in buf.inputs.iter_mut().enumerate() {
                        bank.forward_into(idx + 2, x, input);
                    }
                }
            }
            head_logits(&self.params, &self.params.singular, &z1, &mut buf);
            out.extend_from_slice(&buf.logits);
        }
    }

    fn check_batch(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.input_dim() {
            return Err(SpamError::Shape(format!(
                "batch has {} features, model expects {}",
                x.cols(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// `n x C` logits, row chunks evaluated in parallel when enabled.
    pub fn predict(&self, x: &Matrix) -> Result<Matrix> {
        self.check_batch(x)?;
        let d = self.input_dim().max(1);
        let parts = par::map_chunks(x.as_slice(), d * par::CHUNK_ROWS, |_, rows| {
            let mut out = Vec::with_capacity(rows.len() / d * self.num_outputs());
            self.predict_rows(rows, &mut out);
            out
        });
        Matrix::from_vec(x.rows(), self.num_outputs(), parts.concat())
    }

    pub fn predict_seq(&self, x: &Matrix) -> Result<Matrix> {
        self.check_batch(x)?;
        let mut out = Vec::with_capacity(x.rows() * self.num_outputs());
        self.predict_rows(x.as_slice(), &mut out);
        Matrix::from_vec(x.rows(), self.num_outputs(), out)
    }

    /// Piece of every gated feature-net unit over all rows; empty for linear
    /// models, whose output is smooth in the parameters.
    pub fn activation_pattern(&self, x: &Matrix) -> Result<Vec<u8>> {
        self.check_batch(x)?;
        let mut out = Vec::new();
        if let Some(nets) = &self.nets {
            for r in 0..x.rows() {
                nets.activation_pattern(x.row(r), &mut out);
            }
        }
        Ok(out)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelDocument::from_model(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.into_model()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SpamError::io(path, e))?;
        Self::from_json(&text)
    }
}

impl ParamBlocks for SpamModel {
    fn blocks(&self) -> Vec<&[f64]> {
        let mut out = self.params.blocks();
        if let Some(bank) = &self.nets {
            out.extend(bank.blocks());
        }
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.params.blocks_mut();
        if let Some(bank) = self.nets.as_mut() {
            out.extend(bank.blocks_mut());
        }
        out
    }
}

/// On-disk layout. Matrices are nested row arrays; per-order blocks are
/// keyed by the order as a decimal string.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelDocument {
    pub format_version: u32,
    pub d: usize,
    #[serde(rename = "C")]
    pub num_classes: usize,
    pub rank_spec: RankSpec,
    pub bias: Vec<f64>,
    pub order1: Vec<Vec<f64>>,
    pub bases: BTreeMap<String, Vec<Vec<f64>>>,
    pub singular: BTreeMap<String, Vec<Vec<f64>>>,
    pub mode_flags: ModeFlags,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub feature_nets: Option<FeatureNetBank>,
}

fn to_rows(flat: &[f64], cols: usize) -> Vec<Vec<f64>> {
    if cols == 0 {
        return Vec::new();
    }
    flat.chunks(cols).map(|c| c.to_vec()).collect()
}

fn from_rows(rows: &[Vec<f64>], want_rows: usize, cols: usize, what: &str) -> Result<Vec<f64>> {
    if rows.len() != want_rows && !(cols == 0 && rows.is_empty()) {
        return Err(SpamError::Shape(format!(
            "{what}: expected {want_rows} rows, got {}",
            rows.len()
        )));
    }
    let mut out = Vec::with_capacity(want_rows * cols);
    for (i, r) in rows.iter().enumerate() {
        if r.len() != cols {
            return Err(SpamError::Shape(format!(
                "{what}: row {i} has {} entries, expected {cols}",
                r.len()
            )));
        }
        out.extend_from_slice(r);
    }
    if cols == 0 {
        out.resize(0, 0.0);
    }
    Ok(out)
}

impl ModelDocument {
    pub fn from_model(model: &SpamModel) -> Self {
        let p = &model.params;
        let d = p.num_features;
        let mut bases = BTreeMap::new();
        let mut singular = BTreeMap::new();
        for (order, r) in p.rank_spec.higher_orders() {
            bases.insert(order.to_string(), to_rows(&p.bases[order - 2], d));
            singular.insert(order.to_string(), to_rows(&p.singular[order - 2], r));
        }
        Self {
            format_version: FORMAT_VERSION,
            d,
            num_classes: p.num_classes,
            rank_spec: p.rank_spec.clone(),
            bias: p.bias.clone(),
            order1: to_rows(&p.order1, d),
            bases,
            singular,
            mode_flags: model.flags,
            feature_nets: model.nets.clone(),
        }
    }

    pub fn into_model(self) -> Result<SpamModel> {
        if self.format_version != FORMAT_VERSION {
            return Err(SpamError::Schema(format!(
                "unsupported model format version {}",
                self.format_version
            )));
        }
        // re-run validation, deserialization bypasses the constructor
        let spec = RankSpec::new(self.rank_spec.degree(), self.rank_spec.ranks().to_vec())?;
        if self.num_classes == 0 {
            return Err(SpamError::Shape("C must be >= 1".into()));
        }
        let d = self.d;
        let c = self.num_classes;
        let mut params = SpamParams::zeros(d, c, spec.clone());
        if self.bias.len() != c {
            return Err(SpamError::Shape(format!(
                "bias: expected {c} values, got {}",
                self.bias.len()
            )));
        }
        params.bias = self.bias;
        params.order1 = from_rows(&self.order1, c, d, "order1")?;
        let expected: Vec<String> = spec.higher_orders().map(|(o, _)| o.to_string()).collect();
        for (name, map) in [("bases", &self.bases), ("singular", &self.singular)] {
            if map.keys().cloned().collect::<Vec<_>>() != {
                let mut e = expected.clone();
                e.sort();
                e
            } {
                return Err(SpamError::Shape(format!(
                    "{name}: expected orders {expected:?}, got {:?}",
                    map.keys().collect::<Vec<_>>()
                )));
            }
        }
        for (order, r) in spec.higher_orders() {
            let key = order.to_string();
            params.bases[order - 2] = from_rows(&self.bases[&key], r, d, &format!("bases[{key}]"))?;
            params.singular[order - 2] =
                from_rows(&self.singular[&key], c, r, &format!("singular[{key}]"))?;
        }
        let model = SpamModel {
            params,
            nets: self.feature_nets,
            flags: self.mode_flags,
        };
        model.validate()?;
        if !model.all_finite() {
            return Err(SpamError::NonFinite("model file holds non-finite parameters".into()));
        }
        Ok(model)
    }
}
