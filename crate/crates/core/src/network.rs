//! Fully-connected feed-forward networks evaluated on spatial jets.

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamId, ParamStore, SpatialJet, Tape};
use crate::error::{Error, Result};
use crate::geometry::Rng;

/// Hidden-layer activation. The output layer is always the identity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    /// Piecewise linear; its second derivative is taken as zero everywhere.
    Relu,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    activation: Activation,
    /// `(A_i, b_i)` per layer, `A_i` of shape `N_{i+1} x N_i`.
    layers: Vec<(ParamId, ParamId)>,
}

impl Mlp {
    /// Registers a Glorot-uniform initialized network (zero biases) in `store`.
    pub fn new(
        store: &mut ParamStore,
        name: &str,
        sizes: &[usize],
        activation: Activation,
        rng: &mut Rng,
    ) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::InvalidShape(format!(
                "layer sizes {sizes:?}: need at least two positive entries"
            )));
        }
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = (0..fan_in * fan_out).map(|_| rng.range(-a, a)).collect();
                let wid = store.add(&format!("{name}.A{i}"), fan_out, fan_in, weights);
                let bid = store.add(&format!("{name}.b{i}"), fan_out, 1, vec![0.0; fan_out]);
                (wid, bid)
            })
            .collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            activation,
            layers,
        })
    }

    /// A network with its own parameter store, seeded deterministically.
    pub fn standalone(sizes: &[usize], activation: Activation, seed: u64) -> Result<(Self, ParamStore)> {
        let mut store = ParamStore::new();
        let mut rng = Rng::new(seed, 0);
        let net = Self::new(&mut store, "net", sizes, activation, &mut rng)?;
        Ok((net, store))
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn inputs(&self) -> usize {
        self.sizes[0]
    }

    pub fn outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    pub fn layers(&self) -> &[(ParamId, ParamId)] {
        &self.layers
    }

    /// `sum_i (N_i N_{i+1} + N_{i+1})`.
    pub fn param_count_for(sizes: &[usize]) -> usize {
        sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    pub fn param_count(&self) -> usize {
        Self::param_count_for(&self.sizes)
    }

    /// Evaluates the network on input jets (one row jet per input coordinate).
    /// The result is a matrix jet with one row per output.
    pub fn forward(&self, tape: &mut Tape, store: &ParamStore, inputs: &[SpatialJet]) -> SpatialJet {
        assert_eq!(inputs.len(), self.inputs(), "network input arity");
        let mut h = if inputs.len() == 1 {
            inputs[0].clone()
        } else {
            SpatialJet::stack(tape, inputs)
        };
        let last = self.layers.len() - 1;
        for (i, &(wid, bid)) in self.layers.iter().enumerate() {
            let w = tape.param(store, wid);
            let b = tape.param(store, bid);
            let zu = tape.matmul(w, h.u);
            let u = tape.add(zu, b);
            let grad = h.grad.iter().map(|&g| tape.matmul(w, g)).collect();
            let second = h.second.iter().map(|&s| tape.matmul(w, s)).collect();
            let z = SpatialJet {
                dim: h.dim,
                order: h.order,
                u,
                grad,
                second,
            };
            h = if i == last {
                z
            } else {
                match self.activation {
                    Activation::Tanh => z.tanh(tape),
                    Activation::Relu => z.relu(tape),
                }
            };
        }
        h
    }

    /// Like [`forward`](Self::forward) but split into one row jet per output.
    pub fn forward_rows(&self, tape: &mut Tape, store: &ParamStore, inputs: &[SpatialJet]) -> Vec<SpatialJet> {
        let out = self.forward(tape, store, inputs);
        if self.outputs() == 1 {
            return vec![out];
        }
        (0..self.outputs()).map(|i| out.row(tape, i)).collect()
    }
}
