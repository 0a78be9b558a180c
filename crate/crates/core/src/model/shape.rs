use std::fmt;

use crate::error::{Error, Result};
use crate::symmat::packed_len;

/// Which scoring head sits on top of the GRU.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HeadKind {
    /// Hidden state extended by a constant 1, scored by inner product with `(W_i, b_i)`.
    Vector,
    /// A dense layer expands the hidden state to `order(order+1)/2` before the inner product.
    Fc { order: usize },
    /// The hidden state is a packed symmetric matrix `A`; items score `yᵀAy`.
    Matrix { order: usize },
}

impl HeadKind {
    pub fn tag(self) -> u8 {
        match self {
            HeadKind::Vector => 0,
            HeadKind::Fc { .. } => 1,
            HeadKind::Matrix { .. } => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Vector => "vector",
            HeadKind::Fc { .. } => "fc",
            HeadKind::Matrix { .. } => "matrix",
        }
    }
}

/// Layer sizes of a session model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ModelShape {
    pub vocab_size: usize,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub head: HeadKind,
}

/// One line of the parameter table printed by `qsrec inspect`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamRow {
    pub name: &'static str,
    pub shape: Vec<usize>,
    pub count: usize,
    pub running_total: usize,
}

impl ModelShape {
    pub fn vector(vocab_size: usize, input_dim: usize, hidden_dim: usize) -> Self {
        ModelShape { vocab_size, input_dim, hidden_dim, head: HeadKind::Vector }
    }

    pub fn fc(vocab_size: usize, input_dim: usize, hidden_dim: usize, order: usize) -> Self {
        ModelShape { vocab_size, input_dim, hidden_dim, head: HeadKind::Fc { order } }
    }

    /// The matrix model's hidden width is forced to `order(order+1)/2`.
    pub fn matrix(vocab_size: usize, input_dim: usize, order: usize) -> Self {
        ModelShape { vocab_size, input_dim, hidden_dim: packed_len(order), head: HeadKind::Matrix { order } }
    }

    /// Width of one row of the output (item) embedding.
    pub fn output_dim(&self) -> usize {
        match self.head {
            HeadKind::Vector => self.hidden_dim,
            HeadKind::Fc { order } => packed_len(order),
            HeadKind::Matrix { order } => order,
        }
    }

    /// `n` as written into checkpoint headers.
    pub fn order(&self) -> usize {
        match self.head {
            HeadKind::Vector => self.hidden_dim,
            HeadKind::Fc { order } | HeadKind::Matrix { order } => order,
        }
    }

    pub fn has_output_bias(&self) -> bool {
        !matches!(self.head, HeadKind::Matrix { .. })
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.input_dim == 0 || self.hidden_dim == 0 {
            return Err(Error::Config(format!("model dimensions must be positive: {self:?}")));
        }
        match self.head {
            HeadKind::Matrix { order } if order == 0 || self.hidden_dim != packed_len(order) => Err(Error::Config(
                format!("matrix head of order {order} needs hidden width {}", packed_len(order)),
            )),
            HeadKind::Fc { order: 0 } => Err(Error::Config("fc head order must be positive".into())),
            _ => Ok(()),
        }
    }

    /// Tensor names and shapes in storage order.
    pub fn tensor_shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (v, d, h) = (self.vocab_size, self.input_dim, self.hidden_dim);
        let mut out = vec![
            ("input_embedding", vec![v, d]),
            ("softmax_W", vec![v, self.output_dim()]),
        ];
        if self.has_output_bias() {
            out.push(("softmax_b", vec![v]));
        }
        if let HeadKind::Fc { order } = self.head {
            out.push(("gru_cell/dense/kernel", vec![h, packed_len(order)]));
            out.push(("gru_cell/dense/bias", vec![packed_len(order)]));
        }
        out.extend([
            ("gru_cell/gates/kernel", vec![d + h, 2 * h]),
            ("gru_cell/gates/bias", vec![2 * h]),
            ("gru_cell/candidate/kernel", vec![d + h, h]),
            ("gru_cell/candidate/bias", vec![h]),
        ]);
        out
    }

    pub fn parameter_table(&self) -> Vec<ParamRow> {
        let mut total = 0;
        self.tensor_shapes()
            .into_iter()
            .map(|(name, shape)| {
                let count = shape.iter().product();
                total += count;
                ParamRow { name, shape, count, running_total: total }
            })
            .collect()
    }

    pub fn parameter_count(&self) -> usize {
        self.tensor_shapes().iter().map(|(_, s)| s.iter().product::<usize>()).sum()
    }
}

impl fmt::Display for ModelShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} head, V={}, input_dim={}, hidden={}, order={}",
            self.head.name(),
            self.vocab_size,
            self.input_dim,
            self.hidden_dim,
            self.order()
        )
    }
}

/// Renders the parameter table: name, shape, params, running total.
pub fn format_parameter_table(rows: &[ParamRow]) -> String {
    let mut out = format!("{:<28} {:>16} {:>12} {:>12}\n", "tensor", "shape", "params", "total");
    for row in rows {
        let shape = match row.shape.as_slice() {
            [n] => format!("({n},)"),
            dims => format!("({})", dims.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ")),
        };
        out.push_str(&format!("{:<28} {:>16} {:>12} {:>12}\n", row.name, shape, row.count, row.running_total));
    }
    out
}
