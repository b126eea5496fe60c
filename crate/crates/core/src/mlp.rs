//! Single-hidden-layer feed-forward network with sigmoid units.
//!
//! Parameters live in one flat vector so that a particle position can be
//! used as a network directly. For each hidden neuron `j` the vector holds
//! its bias followed by its `n` input weights; after the hidden block comes
//! the output bias followed by the `m` hidden-to-output weights.

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Layer sizes `n-m-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Topology {
    n_inputs: usize,
    n_hidden: usize,
}

impl Topology {
    pub fn new(n_inputs: usize, n_hidden: usize) -> Result<Self> {
        if n_inputs == 0 {
            return Err(Error::invalid("n_inputs", "must be at least 1"));
        }
        if n_hidden == 0 {
            return Err(Error::invalid("n_hidden", "must be at least 1"));
        }
        Ok(Self { n_inputs, n_hidden })
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_hidden(&self) -> usize {
        self.n_hidden
    }

    pub fn n_outputs(&self) -> usize {
        1
    }

    /// `(n + 1) * m + (m + 1)`
    pub fn parameter_count(&self) -> usize {
        (self.n_inputs + 1) * self.n_hidden + self.n_hidden + 1
    }
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}-{}-1", self.n_inputs, self.n_hidden)
    }
}

/// Flat parameter vector bound to a topology.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    topology: Topology,
    values: Vec<f64>,
}

impl WeightVector {
    pub fn new(topology: Topology, values: Vec<f64>) -> Result<Self> {
        if values.len() != topology.parameter_count() {
            return Err(Error::DimensionMismatch {
                context: "weight vector",
                expected: topology.parameter_count(),
                found: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("weights", "all weights must be finite"));
        }
        Ok(Self { topology, values })
    }

    pub fn zeros(topology: Topology) -> Self {
        Self {
            topology,
            values: vec![0.0; topology.parameter_count()],
        }
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `n,m,1,w...` using shortest round-trip float formatting.
    pub fn to_csv_line(&self) -> String {
        let t = self.topology;
        let mut fields = vec![
            t.n_inputs.to_string(),
            t.n_hidden.to_string(),
            t.n_outputs().to_string(),
        ];
        fields.extend(self.values.iter().map(|v| v.to_string()));
        fields.join(",")
    }

    pub fn from_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim().split(',').map(str::trim).collect();
        if fields.len() < 3 {
            return Err(Error::invalid("weights", "line lacks a topology triple"));
        }
        let count = |s: &str, name: &'static str| {
            s.parse::<usize>()
                .map_err(|_| Error::invalid(name, format!("`{s}` is not a count")))
        };
        let n = count(fields[0], "n_inputs")?;
        let m = count(fields[1], "n_hidden")?;
        if count(fields[2], "n_outputs")? != 1 {
            return Err(Error::invalid(
                "n_outputs",
                "only single-output networks are supported",
            ));
        }
        let values = fields[3..]
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| Error::invalid("weights", format!("`{s}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(Topology::new(n, m)?, values)
    }
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Forward pass over an unchecked parameter slice. Callers guarantee lengths.
pub(crate) fn forward_raw(topology: Topology, params: &[f64], input: &[f64]) -> f64 {
    let n = topology.n_inputs;
    let m = topology.n_hidden;
    let (hidden, out) = params.split_at((n + 1) * m);
    let mut acc = out[0];
    for (j, w) in hidden.chunks_exact(n + 1).enumerate() {
        let mut s = w[0];
        for (wi, xi) in w[1..].iter().zip(input) {
            s += wi * xi;
        }
        acc += out[j + 1] * sigmoid(s);
    }
    sigmoid(acc)
}

pub(crate) fn mse_raw(topology: Topology, params: &[f64], dataset: &Dataset) -> f64 {
    let sum: f64 = dataset
        .rows()
        .zip(dataset.labels())
        .map(|(x, &y)| {
            let e = forward_raw(topology, params, x) - f64::from(y);
            e * e
        })
        .sum();
    sum / dataset.n_rows() as f64
}

fn check_input(topology: Topology, input: &[f64]) -> Result<()> {
    if input.len() != topology.n_inputs {
        return Err(Error::DimensionMismatch {
            context: "network input",
            expected: topology.n_inputs,
            found: input.len(),
        });
    }
    Ok(())
}

fn check_weights(topology: Topology, weights: &WeightVector) -> Result<()> {
    if weights.topology != topology {
        return Err(Error::DimensionMismatch {
            context: "weight vector",
            expected: topology.parameter_count(),
            found: weights.values.len(),
        });
    }
    Ok(())
}

pub fn forward(topology: Topology, weights: &WeightVector, input: &[f64]) -> Result<f64> {
    check_weights(topology, weights)?;
    check_input(topology, input)?;
    Ok(forward_raw(topology, &weights.values, input))
}

/// Mean squared error between network outputs and 0/1 labels.
pub fn mse_fitness(topology: Topology, weights: &WeightVector, dataset: &Dataset) -> Result<f64> {
    check_weights(topology, weights)?;
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if dataset.n_features() != topology.n_inputs {
        return Err(Error::DimensionMismatch {
            context: "dataset width",
            expected: topology.n_inputs,
            found: dataset.n_features(),
        });
    }
    Ok(mse_raw(topology, &weights.values, dataset))
}

/// Threshold at 0.5, inclusive.
pub fn classify(topology: Topology, weights: &WeightVector, input: &[f64]) -> Result<u8> {
    forward(topology, weights, input).map(threshold)
}

pub fn threshold(output: f64) -> u8 {
    u8::from(output >= 0.5)
}
