use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis};
use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Activation, LayerSpec, NnError, Result};

/// Rows per chunk when predicting without a cache.
const PREDICT_CHUNK: usize = 4096;

/// Affine map followed by an elementwise activation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    /// `fan_in × units`.
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero biases.
    pub fn glorot(fan_in: usize, spec: LayerSpec, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (fan_in + spec.units) as f64).sqrt();
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
        let weights = Array2::from_shape_simple_fn((fan_in, spec.units), || dist.sample(rng));
        Self {
            weights,
            biases: Array1::zeros(spec.units),
            activation: spec.activation,
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weights.nrows()
    }

    pub fn units(&self) -> usize {
        self.weights.ncols()
    }

    pub fn spec(&self) -> LayerSpec {
        LayerSpec::new(self.units(), self.activation)
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.biases.len()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Stack {
    pub layers: Vec<Dense>,
}

struct StackCache {
    input: Array2<f64>,
    /// Pre-activations per layer.
    zs: Vec<Array2<f64>>,
    /// Post-activations per layer.
    acts: Vec<Array2<f64>>,
}

impl Stack {
    pub fn new(fan_in: usize, specs: &[LayerSpec], rng: &mut ChaCha8Rng) -> Self {
        let mut width = fan_in;
        let layers = specs
            .iter()
            .map(|&spec| {
                let layer = Dense::glorot(width, spec, rng);
                width = spec.units;
                layer
            })
            .collect();
        Self { layers }
    }

    pub fn output_width(&self, fan_in: usize) -> usize {
        self.layers.last().map_or(fan_in, Dense::units)
    }

    pub fn specs(&self) -> Vec<LayerSpec> {
        self.layers.iter().map(Dense::spec).collect()
    }

    fn forward(&self, input: Array2<f64>, keep: bool) -> (Array2<f64>, Option<StackCache>) {
        let mut zs = Vec::new();
        let mut acts = Vec::new();
        let mut a = input.clone();
        for layer in &self.layers {
            let mut z = a.dot(&layer.weights);
            z += &layer.biases;
            let act = layer.activation;
            let next = z.mapv(|v| act.apply(v));
            if keep {
                zs.push(z);
                acts.push(next.clone());
            }
            a = next;
        }
        let cache = keep.then_some(StackCache { input, zs, acts });
        (a, cache)
    }

    /// Returns gradients for each layer and the gradient w.r.t. the input.
    fn backward(&self, cache: &StackCache, d_out: Array2<f64>) -> (Vec<DenseGrad>, Array2<f64>) {
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = d_out;
        for (i, layer) in self.layers.iter().enumerate().rev() {
            let act = layer.activation;
            let mut dz = delta;
            dz.zip_mut_with(&cache.zs[i], |d, &z| *d *= act.grad(z));
            let a_prev = if i == 0 { &cache.input } else { &cache.acts[i - 1] };
            grads.push(DenseGrad {
                weights: a_prev.t().dot(&dz),
                biases: dz.sum_axis(Axis(0)),
            });
            delta = dz.dot(&layer.weights.t());
        }
        grads.reverse();
        (grads, delta)
    }
}

/// A sub-network over a selection of the input columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub name: String,
    /// Positions in the network's input row, in branch order.
    pub input_index: Vec<usize>,
    pub stack: Stack,
}

impl Branch {
    pub fn output_width(&self) -> usize {
        self.stack.output_width(self.input_index.len())
    }
}

/// Branches whose concatenated outputs feed a head stack ending in the
/// scalar output unit.
#[derive(Debug, Clone)]
pub struct Network {
    input_columns: Vec<String>,
    branches: Vec<Branch>,
    head: Stack,
    /// Bumped on every mutable access to parameters.
    generation: u64,
}

/// Equality compares architecture and parameters, not the cache generation.
impl PartialEq for Network {
    fn eq(&self, other: &Self) -> bool {
        self.input_columns == other.input_columns && self.branches == other.branches && self.head == other.head
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrad {
    pub weights: Array2<f64>,
    pub biases: Array1<f64>,
}

/// Gradients for every layer, in [`Network::layers`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<DenseGrad>,
}

impl Gradients {
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|g| g.weights.iter().chain(g.biases.iter()).copied())
            .collect()
    }
}

/// Activations retained by a forward pass for backpropagation.
pub struct Cache {
    generation: u64,
    rows: usize,
    branches: Vec<StackCache>,
    head: StackCache,
}

impl Network {
    /// Builds a network with Glorot-uniform weights drawn from `seed`.
    ///
    /// `branches` are `(name, input_index, hidden layers)`; `head` must end in
    /// a single unit.
    pub fn new(
        input_columns: Vec<String>,
        branches: Vec<(String, Vec<usize>, Vec<LayerSpec>)>,
        head: &[LayerSpec],
        seed: u64,
    ) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let branches: Vec<Branch> = branches
            .into_iter()
            .map(|(name, input_index, specs)| Branch {
                stack: Stack::new(input_index.len(), &specs, &mut rng),
                name,
                input_index,
            })
            .collect();
        let fan_in = branches.iter().map(Branch::output_width).sum();
        let head = Stack::new(fan_in, head, &mut rng);
        Self::from_parts(input_columns, branches, head)
    }

    /// Assembles a network from explicit parameters, checking every shape.
    pub fn from_parts(input_columns: Vec<String>, branches: Vec<Branch>, head: Stack) -> Result<Self> {
        if branches.is_empty() {
            return Err(NnError::Config("network needs at least one branch".into()));
        }
        let mut layer = 0;
        for b in &branches {
            if b.input_index.is_empty() {
                return Err(NnError::Config(format!("branch {} has no inputs", b.name)));
            }
            if let Some(&i) = b.input_index.iter().find(|&&i| i >= input_columns.len()) {
                return Err(NnError::Config(format!(
                    "branch {} reads input {i} but the network has {}",
                    b.name,
                    input_columns.len()
                )));
            }
            check_stack(&b.stack, b.input_index.len(), &mut layer)?;
        }
        let fan_in = branches.iter().map(Branch::output_width).sum();
        check_stack(&head, fan_in, &mut layer)?;
        match head.layers.last() {
            Some(l) if l.units() == 1 => {}
            _ => return Err(NnError::Config("head must end in a single output unit".into())),
        }
        Ok(Self {
            input_columns,
            branches,
            head,
            generation: 0,
        })
    }

    pub fn input_columns(&self) -> &[String] {
        &self.input_columns
    }

    pub fn fan_in(&self) -> usize {
        self.input_columns.len()
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn head(&self) -> &Stack {
        &self.head
    }

    /// Width of the concatenated branch outputs.
    pub fn fusion_fan_in(&self) -> usize {
        self.branches.iter().map(Branch::output_width).sum()
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    /// Every layer: branch layers in branch order, then the head.
    pub fn layers(&self) -> impl Iterator<Item = &Dense> {
        self.branches
            .iter()
            .flat_map(|b| b.stack.layers.iter())
            .chain(self.head.layers.iter())
    }

    /// Mutable access to every layer; invalidates outstanding caches.
    pub fn layers_mut(&mut self) -> impl Iterator<Item = &mut Dense> {
        self.generation += 1;
        self.branches
            .iter_mut()
            .flat_map(|b| b.stack.layers.iter_mut())
            .chain(self.head.layers.iter_mut())
    }

    pub fn param_count(&self) -> usize {
        self.layers().map(Dense::param_count).sum()
    }

    pub fn params_flat(&self) -> Vec<f64> {
        self.layers()
            .flat_map(|l| l.weights.iter().chain(l.biases.iter()).copied())
            .collect()
    }

    fn check_input(&self, x: &ArrayView2<f64>) -> Result<()> {
        if x.ncols() != self.fan_in() {
            return Err(NnError::Shape {
                layer: 0,
                what: "input columns",
                expected: self.fan_in(),
                got: x.ncols(),
            });
        }
        Ok(())
    }

    fn run(&self, x: ArrayView2<f64>, keep: bool) -> (Array1<f64>, Option<Cache>) {
        let mut outs = Vec::with_capacity(self.branches.len());
        let mut caches = Vec::with_capacity(self.branches.len());
        for b in &self.branches {
            let input = x.select(Axis(1), &b.input_index);
            let (out, cache) = b.stack.forward(input, keep);
            outs.push(out);
            caches.extend(cache);
        }
        let fused = if outs.len() == 1 {
            outs.pop().expect("one branch")
        } else {
            let views: Vec<_> = outs.iter().map(|o| o.view()).collect();
            concatenate(Axis(1), &views).expect("branch outputs share the row count")
        };
        let (out, head_cache) = self.head.forward(fused, keep);
        let out = out.column(0).to_owned();
        let cache = head_cache.map(|head| Cache {
            generation: self.generation,
            rows: x.nrows(),
            branches: caches,
            head,
        });
        (out, cache)
    }

    /// Batched forward pass keeping activations for [`Network::backward`].
    pub fn forward(&self, x: ArrayView2<f64>) -> Result<(Array1<f64>, Cache)> {
        self.check_input(&x)?;
        let (out, cache) = self.run(x, true);
        Ok((out, cache.expect("cache requested")))
    }

    /// Batched inference.
    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Array1<f64>> {
        self.check_input(&x)?;
        let mut out = Array1::zeros(x.nrows());
        let mut start = 0;
        while start < x.nrows() {
            let end = (start + PREDICT_CHUNK).min(x.nrows());
            let (y, _) = self.run(x.slice(s![start..end, ..]), false);
            out.slice_mut(s![start..end]).assign(&y);
            start = end;
        }
        Ok(out)
    }

    pub fn predict_row(&self, row: &[f64]) -> Result<f64> {
        let x = ArrayView2::from_shape((1, row.len()), row).expect("row vector");
        Ok(self.predict(x)?[0])
    }

    /// Reverse-mode gradients of a scalar loss given `d_out = dLoss/dOutput`
    /// for each row of the batch that produced `cache`.
    pub fn backward(&self, cache: &Cache, d_out: &Array1<f64>) -> Result<Gradients> {
        if cache.generation != self.generation {
            return Err(NnError::StaleCache {
                cache: cache.generation,
                network: self.generation,
            });
        }
        if d_out.len() != cache.rows {
            return Err(NnError::LengthMismatch {
                left: d_out.len(),
                right: cache.rows,
            });
        }
        let d = d_out.view().insert_axis(Axis(1)).to_owned();
        let (head_grads, d_fused) = self.head.backward(&cache.head, d);
        let mut layers = Vec::new();
        let mut col = 0;
        for (b, bc) in self.branches.iter().zip(&cache.branches) {
            let w = b.output_width();
            let d_b = d_fused.slice(s![.., col..col + w]).to_owned();
            col += w;
            let (g, _) = b.stack.backward(bc, d_b);
            layers.extend(g);
        }
        layers.extend(head_grads);
        Ok(Gradients { layers })
    }
}

fn check_stack(stack: &Stack, fan_in: usize, layer: &mut usize) -> Result<()> {
    let mut width = fan_in;
    for l in &stack.layers {
        if l.fan_in() != width {
            return Err(NnError::Shape {
                layer: *layer,
                what: "weight rows",
                expected: width,
                got: l.fan_in(),
            });
        }
        if l.biases.len() != l.units() {
            return Err(NnError::Shape {
                layer: *layer,
                what: "biases",
                expected: l.units(),
                got: l.biases.len(),
            });
        }
        if l.units() == 0 {
            return Err(NnError::Config(format!("layer {} has zero units", *layer)));
        }
        width = l.units();
        *layer += 1;
    }
    Ok(())
}
