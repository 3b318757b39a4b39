use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Zip};
use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Real;
use crate::error::{Error, Result};
use crate::rng::{domain, rng_for};

/// Neighbourhood aggregation family of a GNN.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GnnKind {
    /// Mean over neighbours, concatenated with the node's own row.
    Gcn,
    /// Element-wise max over a learned pooling layer, concatenated with self.
    Sage,
    /// Multi-head attention over neighbours and the node itself.
    Gat,
}

impl GnnKind {
    pub const ALL: [GnnKind; 3] = [GnnKind::Gcn, GnnKind::Sage, GnnKind::Gat];

    pub fn name(self) -> &'static str {
        match self {
            GnnKind::Gcn => "gcn",
            GnnKind::Sage => "sage",
            GnnKind::Gat => "gat",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Arch {
    Mlp,
    Gnn(GnnKind),
    /// One of the K trailing models of a Retexo stack: an aggregation layer
    /// of the given family followed by a dense output layer.
    RetexoBlock(GnnKind),
}

impl fmt::Display for Arch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Arch::Mlp => f.write_str("mlp"),
            Arch::Gnn(k) => f.write_str(k.name()),
            Arch::RetexoBlock(k) => write!(f, "retexo-{}", k.name()),
        }
    }
}

impl FromStr for Arch {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = |k: &str| match k {
            "gcn" => Some(GnnKind::Gcn),
            "sage" | "graphsage" => Some(GnnKind::Sage),
            "gat" => Some(GnnKind::Gat),
            _ => None,
        };
        let lower = s.to_ascii_lowercase();
        if lower == "mlp" {
            return Ok(Arch::Mlp);
        }
        if let Some(rest) = lower.strip_prefix("retexo-") {
            if let Some(k) = kind(rest) {
                return Ok(Arch::RetexoBlock(k));
            }
        }
        kind(&lower)
            .map(Arch::Gnn)
            .ok_or_else(|| Error::Config(format!("unknown architecture {s:?}")))
    }
}

impl Serialize for Arch {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Arch {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Everything needed to rebuild a model's layer stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub arch: Arch,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    /// Number of message-passing layers for `Gnn`; ignored otherwise.
    pub num_layers: usize,
    pub heads: usize,
    pub pool_dim: usize,
    /// `Gnn`: residual on every layer except the first and last.
    /// `RetexoBlock`: the block's own input embedding is added to its output.
    pub residual: bool,
}

impl ModelSpec {
    pub fn mlp(input_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        ModelSpec {
            arch: Arch::Mlp,
            input_dim,
            hidden_dim,
            output_dim,
            num_layers: 2,
            heads: 1,
            pool_dim: 512,
            residual: false,
        }
    }

    pub fn gnn(kind: GnnKind, input_dim: usize, hidden_dim: usize, output_dim: usize, layers: usize) -> Self {
        ModelSpec {
            arch: Arch::Gnn(kind),
            num_layers: layers,
            heads: 8,
            ..ModelSpec::mlp(input_dim, hidden_dim, output_dim)
        }
    }

    pub fn retexo_block(kind: GnnKind, emb_dim: usize, hidden_dim: usize, output_dim: usize) -> Self {
        ModelSpec {
            arch: Arch::RetexoBlock(kind),
            heads: 8,
            ..ModelSpec::mlp(emb_dim, hidden_dim, output_dim)
        }
    }

    pub fn with_heads(mut self, heads: usize) -> Self {
        self.heads = heads;
        self
    }

    pub fn with_pool_dim(mut self, pool_dim: usize) -> Self {
        self.pool_dim = pool_dim;
        self
    }

    pub fn with_residual(mut self, residual: bool) -> Self {
        self.residual = residual;
        self
    }

    fn conv(&self, kind: GnnKind, heads: usize) -> LayerKind {
        match kind {
            GnnKind::Gcn => LayerKind::Gcn,
            GnnKind::Sage => LayerKind::Sage {
                pool_dim: self.pool_dim,
            },
            GnnKind::Gat => LayerKind::Gat { heads },
        }
    }

    /// Expands the spec into its ordered layer list, checking shape rules.
    pub fn layers(&self) -> Result<Vec<LayerSpec>> {
        let (i, h, o) = (self.input_dim, self.hidden_dim, self.output_dim);
        if i == 0 || h == 0 || o == 0 {
            return Err(Error::Shape(format!("zero dimension in {i}x{h}x{o}")));
        }
        let layers = match self.arch {
            Arch::Mlp => vec![
                LayerSpec::new(LayerKind::Dense, i, h, true, false),
                LayerSpec::new(LayerKind::Dense, h, o, false, false),
            ],
            Arch::RetexoBlock(kind) => vec![
                LayerSpec::new(self.conv(kind, self.heads), i, h, true, false),
                LayerSpec::new(LayerKind::Dense, h, o, false, false),
            ],
            Arch::Gnn(kind) => {
                let k = self.num_layers;
                if k == 0 {
                    return Err(Error::Shape("a GNN needs at least one layer".into()));
                }
                (0..k)
                    .map(|l| {
                        let last = l + 1 == k;
                        let heads = if last { 1 } else { self.heads };
                        LayerSpec::new(
                            self.conv(kind, heads),
                            if l == 0 { i } else { h },
                            if last { o } else { h },
                            !last,
                            self.residual && l > 0 && !last,
                        )
                    })
                    .collect()
            }
        };
        for l in &layers {
            if let LayerKind::Gat { heads } = l.kind {
                if heads == 0 || l.out_dim % heads != 0 {
                    return Err(Error::Shape(format!(
                        "attention width {} is not divisible by {heads} heads",
                        l.out_dim
                    )));
                }
            }
            if let LayerKind::Sage { pool_dim: 0 } = l.kind {
                return Err(Error::Shape("pool_dim must be positive".into()));
            }
            if l.residual && l.in_dim != l.out_dim {
                return Err(Error::Shape("residual layer must preserve width".into()));
            }
        }
        if self.residual && matches!(self.arch, Arch::RetexoBlock(_)) && i != o {
            return Err(Error::Shape(
                "residual block needs equal input and output widths".into(),
            ));
        }
        Ok(layers)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerKind {
    Dense,
    Gcn,
    Sage { pool_dim: usize },
    Gat { heads: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    pub in_dim: usize,
    pub out_dim: usize,
    pub relu: bool,
    pub residual: bool,
}

impl LayerSpec {
    pub fn new(kind: LayerKind, in_dim: usize, out_dim: usize, relu: bool, residual: bool) -> Self {
        LayerSpec {
            kind,
            in_dim,
            out_dim,
            relu,
            residual,
        }
    }

    /// Shapes of this layer's tensors, in storage order.
    ///
    /// * Dense: `W (in x out)`, `b (1 x out)`
    /// * Gcn: `W (2in x out)`
    /// * Sage: `W_pool (in x pool)`, `b_pool (1 x pool)`, `W ((in+pool) x out)`
    /// * Gat: `W (in x out)`, `a_src (heads x out/heads)`, `a_dst (heads x out/heads)`
    pub fn tensor_shapes(&self) -> Vec<(usize, usize)> {
        let (i, o) = (self.in_dim, self.out_dim);
        match self.kind {
            LayerKind::Dense => vec![(i, o), (1, o)],
            LayerKind::Gcn => vec![(2 * i, o)],
            LayerKind::Sage { pool_dim } => vec![(i, pool_dim), (1, pool_dim), (i + pool_dim, o)],
            LayerKind::Gat { heads } => vec![(i, o), (heads, o / heads), (heads, o / heads)],
        }
    }

    pub fn num_floats(&self) -> usize {
        self.tensor_shapes().iter().map(|(r, c)| r * c).sum()
    }
}

/// Ordered list of parameter-shaped tensors: weights, gradients or
/// optimiser velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSet<F: Real = f32>(pub Vec<Array2<F>>);

impl<F: Real> ParamSet<F> {
    pub fn zeros_like(other: &ParamSet<F>) -> Self {
        ParamSet(other.0.iter().map(|t| Array2::zeros(t.raw_dim())).collect())
    }

    pub fn num_floats(&self) -> usize {
        self.0.iter().map(|t| t.len()).sum()
    }

    pub fn same_shape(&self, other: &ParamSet<F>) -> bool {
        self.0.len() == other.0.len()
            && self.0.iter().zip(&other.0).all(|(a, b)| a.shape() == b.shape())
    }

    pub fn add_assign(&mut self, other: &ParamSet<F>) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: F) {
        for a in &mut self.0 {
            a.mapv_inplace(|x| x * s);
        }
    }

    pub fn iter_floats(&self) -> impl Iterator<Item = F> + '_ {
        self.0.iter().flat_map(|t| t.iter().copied())
    }

    /// Element-wise arithmetic mean, summing in slice order.
    pub fn mean(sets: &[&ParamSet<F>]) -> Result<ParamSet<F>> {
        let (first, rest) = sets
            .split_first()
            .ok_or_else(|| Error::Shape("cannot average an empty set".into()))?;
        let mut acc = (*first).clone();
        for s in rest {
            if !acc.same_shape(s) {
                return Err(Error::Shape("parameter shapes differ".into()));
            }
            acc.add_assign(s);
        }
        let inv = F::one() / F::from_usize(sets.len()).unwrap();
        for a in &mut acc.0 {
            a.mapv_inplace(|x| x * inv);
        }
        Ok(acc)
    }

    pub fn cast<G: Real>(&self) -> ParamSet<G> {
        ParamSet(
            self.0
                .iter()
                .map(|t| t.mapv(|x| G::from_f64(x.to_f64_lossy()).unwrap()))
                .collect(),
        )
    }

    /// `self += alpha * other`
    pub fn axpy(&mut self, alpha: F, other: &ParamSet<F>) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            Zip::from(a).and(b).for_each(|x, &y| *x += alpha * y);
        }
    }
}

/// A model: its spec, the derived layer list and the parameter tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F: Real = f32> {
    pub spec: ModelSpec,
    pub layers: Vec<LayerSpec>,
    pub params: ParamSet<F>,
}

impl<F: Real> ModelParams<F> {
    /// Glorot-uniform weights, zero biases, keyed on `seed`.
    pub fn init(spec: ModelSpec, seed: u64) -> Result<Self> {
        let layers = spec.layers()?;
        let mut rng = rng_for(&[domain::INIT, seed]);
        let mut tensors = Vec::new();
        for layer in &layers {
            for (t, (r, c)) in layer.tensor_shapes().into_iter().enumerate() {
                let is_bias = matches!(
                    (layer.kind, t),
                    (LayerKind::Dense, 1) | (LayerKind::Sage { .. }, 1)
                );
                let tensor = if is_bias {
                    Array2::zeros((r, c))
                } else {
                    let a = (6.0 / (r + c) as f64).sqrt();
                    Array2::from_shape_simple_fn((r, c), || F::lit(rng.random_range(-a..a)))
                };
                tensors.push(tensor);
            }
        }
        Ok(ModelParams {
            spec,
            layers,
            params: ParamSet(tensors),
        })
    }

    /// Wraps existing tensors, validating them against the spec.
    pub fn from_tensors(spec: ModelSpec, tensors: Vec<Array2<F>>) -> Result<Self> {
        let layers = spec.layers()?;
        let shapes: Vec<_> = layers.iter().flat_map(|l| l.tensor_shapes()).collect();
        if shapes.len() != tensors.len()
            || shapes
                .iter()
                .zip(&tensors)
                .any(|(&(r, c), t)| t.dim() != (r, c))
        {
            return Err(Error::Shape(format!(
                "tensors do not match the layer shapes of {}",
                spec.arch
            )));
        }
        Ok(ModelParams {
            spec,
            layers,
            params: ParamSet(tensors),
        })
    }

    pub fn num_floats(&self) -> usize {
        self.params.num_floats()
    }

    /// Payload size when the whole model is transmitted.
    pub fn num_bytes(&self) -> u64 {
        self.num_floats() as u64 * 4
    }

    pub fn input_dim(&self) -> usize {
        self.spec.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.spec.output_dim
    }

    /// Range of `params.0` owned by layer `l`.
    pub fn layer_tensor_range(&self, l: usize) -> std::ops::Range<usize> {
        let start: usize = self.layers[..l].iter().map(|x| x.tensor_shapes().len()).sum();
        start..start + self.layers[l].tensor_shapes().len()
    }

    pub fn layer_tensors(&self, l: usize) -> &[Array2<F>] {
        &self.params.0[self.layer_tensor_range(l)]
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        ModelParams {
            spec: self.spec,
            layers: self.layers.clone(),
            params: self.params.cast(),
        }
    }

    pub fn same_shape(&self, other: &ModelParams<F>) -> bool {
        self.spec == other.spec && self.params.same_shape(&other.params)
    }
}

/// Element-wise mean of a list of models with identical shapes, reduced in
/// slice order so repeated calls are bit-identical.
pub fn average_models<F: Real>(models: &[ModelParams<F>]) -> Result<ModelParams<F>> {
    let first = models
        .first()
        .ok_or_else(|| Error::Shape("cannot average zero models".into()))?;
    if models.iter().any(|m| !first.same_shape(m)) {
        return Err(Error::Shape("models differ in shape".into()));
    }
    let sets: Vec<&ParamSet<F>> = models.iter().map(|m| &m.params).collect();
    Ok(ModelParams {
        spec: first.spec,
        layers: first.layers.clone(),
        params: ParamSet::mean(&sets)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arch_names_roundtrip() {
        for s in ["mlp", "gcn", "sage", "gat", "retexo-gcn", "retexo-sage", "retexo-gat"] {
            let a: Arch = s.parse().unwrap();
            assert_eq!(a.to_string(), s);
        }
        assert!("cheb".parse::<Arch>().is_err());
    }

    #[test]
    fn gcn_first_layer_is_two_i_h() {
        let m = ModelParams::<f32>::init(ModelSpec::gnn(GnnKind::Gcn, 1000, 256, 7, 2), 0).unwrap();
        assert_eq!(m.layers[0].num_floats(), 2 * 1000 * 256);
        assert_eq!(m.layers[1].in_dim, 256);
        assert_eq!(m.layers[1].out_dim, 7);
    }

    #[test]
    fn gat_heads_must_divide_width() {
        let spec = ModelSpec::gnn(GnnKind::Gat, 5, 10, 3, 2).with_heads(4);
        assert!(spec.layers().is_err());
        let spec = ModelSpec::gnn(GnnKind::Gat, 5, 256, 3, 2);
        let layers = spec.layers().unwrap();
        assert_eq!(layers[0].tensor_shapes()[1], (8, 32));
        // the output layer runs a single head
        assert_eq!(layers[1].kind, LayerKind::Gat { heads: 1 });
    }

    #[test]
    fn residual_only_on_middle_layers() {
        let spec = ModelSpec::gnn(GnnKind::Gcn, 6, 8, 3, 5).with_residual(true);
        let flags: Vec<_> = spec.layers().unwrap().iter().map(|l| l.residual).collect();
        assert_eq!(flags, vec![false, true, true, true, false]);
    }

    #[test]
    fn average_identity_and_symmetry() {
        let p = ModelParams::<f32>::init(ModelSpec::mlp(4, 3, 2), 1).unwrap();
        assert_eq!(average_models(&[p.clone(), p.clone()]).unwrap(), p);
        let mut neg = p.clone();
        neg.params.scale(-1.0);
        let z = average_models(&[p, neg]).unwrap();
        assert!(z.params.iter_floats().all(|x| x == 0.0));
        assert!(average_models::<f32>(&[]).is_err());
    }

    #[test]
    fn average_rejects_mixed_shapes() {
        let a = ModelParams::<f32>::init(ModelSpec::mlp(4, 3, 2), 1).unwrap();
        let b = ModelParams::<f32>::init(ModelSpec::mlp(4, 5, 2), 1).unwrap();
        assert!(average_models(&[a, b]).is_err());
    }
}
