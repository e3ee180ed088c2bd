use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{
    conv2d_named, conv_transpose2d_named, relu, residual_block_named, shape_err, NnError, Predictor, ResidualWeights,
    Tensor, WeightBundle,
};
use crate::grasp::GraspMap;

/// Output heads in plane order: quality, cos 2φ, sin 2φ, width.
pub const HEAD_NAMES: [&str; 4] = ["quality", "cos", "sin", "width"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Conv { filters: usize, kernel: usize, stride: usize, padding: usize },
    /// Two 3×3 convolutions with a ReLU between them, plus the skip.
    Residual { filters: usize },
    TransposeConv { filters: usize, kernel: usize, stride: usize, padding: usize },
    Relu,
}

/// Layer stack followed by four single-filter convolution heads with an odd
/// `head_kernel` and same padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NetworkSpec {
    /// `(channels, height, width)`
    pub input: (usize, usize, usize),
    pub layers: Vec<Layer>,
    pub head_kernel: usize,
}

impl Default for NetworkSpec {
    /// 16@400² (k9), then 32@200², 64@100², 128@50² (k4 s2), six residual
    /// blocks at 128@50², three transpose convolutions back to 16@400².
    fn default() -> Self {
        use Layer::*;
        let down = |filters| Conv { filters, kernel: 4, stride: 2, padding: 1 };
        let up = |filters| TransposeConv { filters, kernel: 4, stride: 2, padding: 1 };
        let mut layers = vec![Conv { filters: 16, kernel: 9, stride: 1, padding: 4 }, Relu];
        for f in [32, 64, 128] {
            layers.extend([down(f), Relu]);
        }
        layers.extend(std::iter::repeat_n(Residual { filters: 128 }, 6));
        for f in [64, 32, 16] {
            layers.extend([up(f), Relu]);
        }
        Self { input: (1, 400, 400), layers, head_kernel: 3 }
    }
}

impl NetworkSpec {
    /// Weight-bearing layers with their names and tensor shapes, in order.
    /// Residual blocks expand to `resN.conv1` and `resN.conv2`.
    pub fn parameters(&self) -> Vec<(String, Vec<usize>)> {
        let mut out = Vec::new();
        let mut push = |name: String, w: Vec<usize>, filters: usize| {
            out.push((format!("{name}.weight"), w));
            out.push((format!("{name}.bias"), vec![filters]));
        };
        let mut c = self.input.0;
        let (mut nc, mut nr, mut nd) = (0, 0, 0);
        for layer in &self.layers {
            match *layer {
                Layer::Conv { filters, kernel, .. } => {
                    nc += 1;
                    push(format!("conv{nc}"), vec![filters, c, kernel, kernel], filters);
                    c = filters;
                }
                Layer::Residual { filters } => {
                    nr += 1;
                    push(format!("res{nr}.conv1"), vec![filters, c, 3, 3], filters);
                    push(format!("res{nr}.conv2"), vec![c, filters, 3, 3], c);
                }
                Layer::TransposeConv { filters, kernel, .. } => {
                    nd += 1;
                    push(format!("deconv{nd}"), vec![c, filters, kernel, kernel], filters);
                    c = filters;
                }
                Layer::Relu => {}
            }
        }
        for head in HEAD_NAMES {
            push(format!("head.{head}"), vec![1, c, self.head_kernel, self.head_kernel], 1);
        }
        out
    }
}

/// He-normal weights and zero biases for every parameter of `spec`.
pub fn random_weights(spec: &NetworkSpec, seed: u64) -> WeightBundle {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bundle = WeightBundle::new();
    for (name, shape) in spec.parameters() {
        let n: usize = shape.iter().product();
        let data = if name.ends_with(".bias") {
            vec![0.0; n]
        } else {
            let fan_in = (shape[1] * shape[2] * shape[3]).max(1);
            let normal = Normal::new(0.0, (2.0 / fan_in as f32).sqrt()).expect("positive std");
            (0..n).map(|_| normal.sample(&mut rng)).collect()
        };
        bundle.insert(name, Tensor::new(shape, data).expect("shape matches data"));
    }
    bundle
}

#[derive(Debug, Clone)]
enum Step {
    Conv { name: String, w: Tensor, b: Tensor, stride: usize, padding: usize },
    Residual { name: String, w1: Tensor, b1: Tensor, w2: Tensor, b2: Tensor },
    TransposeConv { name: String, w: Tensor, b: Tensor, stride: usize, padding: usize },
    Relu { after: String },
}

impl Step {
    fn name(&self) -> &str {
        match self {
            Step::Conv { name, .. } | Step::Residual { name, .. } | Step::TransposeConv { name, .. } => name,
            Step::Relu { after } => after,
        }
    }
}

/// A shape-checked network ready for inference. Immutable; `predict` may be
/// called from many threads at once.
#[derive(Debug, Clone)]
pub struct Network {
    spec: NetworkSpec,
    steps: Vec<Step>,
    heads: Vec<(String, Tensor, Tensor)>,
}

fn fetch(weights: &WeightBundle, layer: &str, shape: &[usize], bias: usize) -> Result<(Tensor, Tensor), NnError> {
    let get = |suffix: &str, want: &[usize]| {
        let key = format!("{layer}.{suffix}");
        let t = weights.get(&key).ok_or_else(|| NnError::MissingWeight(key.clone()))?;
        if t.shape() != want {
            return Err(shape_err(layer, format!("`{key}` has shape {:?}, expected {want:?}", t.shape())));
        }
        Ok(t.clone())
    };
    Ok((get("weight", shape)?, get("bias", &[bias])?))
}

impl NetworkSpec {
    /// Output shape `(channels, height, width)` of every named layer in
    /// order, heads last. Fails at the first layer whose input it cannot
    /// take.
    pub fn shape_chain(&self) -> Result<Vec<(String, (usize, usize, usize))>, NnError> {
        let (mut c, mut h, mut w) = self.input;
        if c == 0 || h == 0 || w == 0 {
            return Err(shape_err("input", "input dimensions must be positive"));
        }
        let mut out = Vec::new();
        let (mut nc, mut nr, mut nd) = (0, 0, 0);
        for layer in &self.layers {
            match *layer {
                Layer::Conv { filters, kernel, stride, padding } => {
                    nc += 1;
                    let name = format!("conv{nc}");
                    if stride == 0 || kernel == 0 || h + 2 * padding < kernel || w + 2 * padding < kernel {
                        return Err(shape_err(&name, format!("kernel {kernel} stride {stride} does not fit {c}@{h}x{w}")));
                    }
                    h = (h + 2 * padding - kernel) / stride + 1;
                    w = (w + 2 * padding - kernel) / stride + 1;
                    c = filters;
                    out.push((name, (c, h, w)));
                }
                Layer::Residual { filters } => {
                    nr += 1;
                    let name = format!("res{nr}");
                    if filters != c {
                        return Err(shape_err(&name, format!("block has {filters} filters but its input has {c} channels")));
                    }
                    out.push((name, (c, h, w)));
                }
                Layer::TransposeConv { filters, kernel, stride, padding } => {
                    nd += 1;
                    let name = format!("deconv{nd}");
                    if stride == 0 || (h - 1) * stride + kernel <= 2 * padding || (w - 1) * stride + kernel <= 2 * padding {
                        return Err(shape_err(&name, format!("kernel {kernel} padding {padding} leaves no output")));
                    }
                    h = (h - 1) * stride + kernel - 2 * padding;
                    w = (w - 1) * stride + kernel - 2 * padding;
                    c = filters;
                    out.push((name, (c, h, w)));
                }
                Layer::Relu => {}
            }
        }
        if self.head_kernel % 2 == 0 {
            return Err(shape_err("head", "head kernel must be odd"));
        }
        if (h, w) != (self.input.1, self.input.2) {
            let last = out.last().map_or("input", |(n, _)| n.as_str());
            return Err(shape_err(
                last,
                format!("network ends at {h}x{w}; heads need the input size {}x{}", self.input.1, self.input.2),
            ));
        }
        for head in HEAD_NAMES {
            out.push((format!("head.{head}"), (1, h, w)));
        }
        Ok(out)
    }
}

/// Validates `weights` against `spec` layer by layer, propagating the
/// activation shape, and returns the network. Errors name the first
/// offending layer.
pub fn build_network(spec: &NetworkSpec, weights: &WeightBundle) -> Result<Network, NnError> {
    let chain = spec.shape_chain()?;
    let mut named = chain.iter();
    let mut c = spec.input.0;
    let mut steps = Vec::with_capacity(spec.layers.len());
    let mut last = String::from("input");
    for layer in &spec.layers {
        if let Layer::Relu = layer {
            steps.push(Step::Relu { after: last.clone() });
            continue;
        }
        let (name, (out_c, _, _)) = named.next().expect("one chain entry per weighted layer");
        let name = name.clone();
        match *layer {
            Layer::Conv { kernel, stride, padding, .. } => {
                let (w, b) = fetch(weights, &name, &[*out_c, c, kernel, kernel], *out_c)?;
                steps.push(Step::Conv { name: name.clone(), w, b, stride, padding });
            }
            Layer::Residual { filters } => {
                let (w1, b1) = fetch(weights, &format!("{name}.conv1"), &[filters, c, 3, 3], filters)?;
                let (w2, b2) = fetch(weights, &format!("{name}.conv2"), &[c, filters, 3, 3], c)?;
                steps.push(Step::Residual { name: name.clone(), w1, b1, w2, b2 });
            }
            Layer::TransposeConv { kernel, stride, padding, .. } => {
                let (w, b) = fetch(weights, &name, &[c, *out_c, kernel, kernel], *out_c)?;
                steps.push(Step::TransposeConv { name: name.clone(), w, b, stride, padding });
            }
            Layer::Relu => unreachable!(),
        }
        c = *out_c;
        last = name;
    }
    let mut heads = Vec::with_capacity(4);
    for (name, _) in named {
        let (w, b) = fetch(weights, name, &[1, c, spec.head_kernel, spec.head_kernel], 1)?;
        heads.push((name.clone(), w, b));
    }
    Ok(Network { spec: spec.clone(), steps, heads })
}

fn check(t: &Tensor, layer: &str) -> Result<(), NnError> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(NnError::NonFinite(layer.to_string()))
    }
}

impl Network {
    pub fn spec(&self) -> &NetworkSpec {
        &self.spec
    }

    /// Runs the forward pass and returns the four raw head planes.
    pub fn forward(&self, input: &Tensor) -> Result<[Tensor; 4], NnError> {
        let (c, h, w) = self.spec.input;
        if input.shape() != [c, h, w] {
            return Err(shape_err("input", format!("expected {:?}, got {:?}", [c, h, w], input.shape())));
        }
        check(input, "input")?;
        let mut x = input.clone();
        for step in &self.steps {
            match step {
                Step::Conv { name, w, b, stride, padding } => x = conv2d_named(name, &x, w, b, *stride, *padding)?,
                Step::TransposeConv { name, w, b, stride, padding } => {
                    x = conv_transpose2d_named(name, &x, w, b, *stride, *padding)?
                }
                Step::Residual { name, w1, b1, w2, b2 } => {
                    x = residual_block_named(name, &x, ResidualWeights { w1, b1, w2, b2 })?
                }
                Step::Relu { .. } => relu(&mut x),
            }
            check(&x, step.name())?;
        }
        let pad = self.spec.head_kernel / 2;
        let mut planes = Vec::with_capacity(4);
        for (name, wt, b) in &self.heads {
            let out = conv2d_named(name, &x, wt, b, 1, pad)?;
            check(&out, name)?;
            planes.push(out);
        }
        Ok(planes.try_into().expect("four heads"))
    }
}

impl Predictor for Network {
    fn predict(&self, input: &Tensor) -> Result<GraspMap, NnError> {
        let [q, cos, sin, width] = self.forward(input)?;
        let (_, h, w) = self.spec.input;
        let mut width = width.into_data();
        width.iter_mut().for_each(|v| *v = v.clamp(0.0, 1.0));
        GraspMap::from_planes(w, h, q.into_data(), cos.into_data(), sin.into_data(), width)
            .map_err(|e| shape_err("head", e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> NetworkSpec {
        NetworkSpec {
            input: (1, 16, 16),
            layers: vec![
                Layer::Conv { filters: 4, kernel: 3, stride: 1, padding: 1 },
                Layer::Relu,
                Layer::Conv { filters: 8, kernel: 4, stride: 2, padding: 1 },
                Layer::Relu,
                Layer::Residual { filters: 8 },
                Layer::TransposeConv { filters: 4, kernel: 4, stride: 2, padding: 1 },
                Layer::Relu,
            ],
            head_kernel: 3,
        }
    }

    #[test]
    fn default_parameter_names() {
        let names: Vec<String> = NetworkSpec::default().parameters().into_iter().map(|(n, _)| n).collect();
        assert_eq!(names.len(), 2 * (4 + 12 + 3 + 4));
        assert_eq!(names[0], "conv1.weight");
        assert!(names.contains(&"res6.conv2.bias".to_string()));
        assert!(names.contains(&"deconv3.weight".to_string()));
        assert_eq!(names.last().unwrap(), "head.width.bias");
    }

    #[test]
    fn small_network_runs() {
        let spec = small_spec();
        let net = build_network(&spec, &random_weights(&spec, 1)).unwrap();
        let x = Tensor::new(vec![1, 16, 16], (0..256).map(|i| (i as f32 * 0.37).sin()).collect()).unwrap();
        let g = net.predict(&x).unwrap();
        assert_eq!((g.width(), g.height()), (16, 16));
        assert!(g.quality.iter().all(|q| (0.0..=1.0).contains(q)));
        assert_eq!(net.predict(&x).unwrap(), g);
        assert!(matches!(net.predict(&Tensor::zeros(&[1, 8, 8])), Err(NnError::Shape { .. })));
    }

    #[test]
    fn zero_weights_give_bias() {
        let spec = small_spec();
        let mut weights = random_weights(&spec, 1);
        let names: Vec<String> = weights.names().map(String::from).collect();
        for n in &names {
            weights.get_mut(n).unwrap().data_mut().fill(0.0);
        }
        weights.get_mut("head.quality.bias").unwrap().data_mut()[0] = 0.3;
        weights.get_mut("head.width.bias").unwrap().data_mut()[0] = 1.7;
        let net = build_network(&spec, &weights).unwrap();
        let g = net.predict(&Tensor::new(vec![1, 16, 16], vec![0.25; 256]).unwrap()).unwrap();
        assert!(g.quality.iter().all(|&q| q == 0.3));
        assert!(g.grasp_width.iter().all(|&w| w == 1.0));
    }

    #[test]
    fn validation_names_layers() {
        let spec = small_spec();
        let mut weights = random_weights(&spec, 1);
        weights.remove("conv2.bias");
        assert_eq!(build_network(&spec, &weights).unwrap_err(), NnError::MissingWeight("conv2.bias".into()));

        let mut bad = small_spec();
        bad.layers[4] = Layer::Residual { filters: 6 };
        let err = build_network(&bad, &random_weights(&spec, 1)).unwrap_err();
        assert!(matches!(err, NnError::Shape { ref layer, .. } if layer == "res1"), "{err}");

        let mut weights = random_weights(&spec, 1);
        weights.insert("deconv1.weight", Tensor::zeros(&[8, 5, 4, 4]));
        let err = build_network(&spec, &weights).unwrap_err();
        assert!(matches!(err, NnError::Shape { ref layer, .. } if layer == "deconv1"), "{err}");
    }

    #[test]
    fn non_finite_is_reported_with_layer() {
        let spec = small_spec();
        let mut weights = random_weights(&spec, 1);
        weights.get_mut("conv2.bias").unwrap().data_mut()[0] = f32::INFINITY;
        let net = build_network(&spec, &weights).unwrap();
        let err = net.predict(&Tensor::zeros(&[1, 16, 16])).unwrap_err();
        assert_eq!(err, NnError::NonFinite("conv2".into()));
    }
}
