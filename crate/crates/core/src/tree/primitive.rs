use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Every primitive output is clamped into `[-OUTPUT_BOUND, OUTPUT_BOUND]`.
pub const OUTPUT_BOUND: f64 = 1e12;

/// The function set. All of them are total on finite inputs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Primitive {
    Add,
    Sub,
    Mul,
    /// Analytical quotient `a / sqrt(1 + b²)`.
    Aq,
    Square,
    /// `sqrt(|x|)`.
    Sqrt,
    Abs,
    /// Analytical log `ln(1 + sqrt(x²))`.
    Log,
    Max,
    Min,
    Sin,
    Cos,
    Neg,
    Sigmoid,
}

impl Primitive {
    pub const ALL: [Primitive; 14] = [
        Primitive::Add,
        Primitive::Sub,
        Primitive::Mul,
        Primitive::Aq,
        Primitive::Square,
        Primitive::Sqrt,
        Primitive::Abs,
        Primitive::Log,
        Primitive::Max,
        Primitive::Min,
        Primitive::Sin,
        Primitive::Cos,
        Primitive::Neg,
        Primitive::Sigmoid,
    ];

    pub fn arity(self) -> usize {
        use Primitive::*;
        match self {
            Add | Sub | Mul | Aq | Max | Min => 2,
            Square | Sqrt | Abs | Log | Sin | Cos | Neg | Sigmoid => 1,
        }
    }

    pub fn name(self) -> &'static str {
        use Primitive::*;
        match self {
            Add => "add",
            Sub => "sub",
            Mul => "mul",
            Aq => "AQ",
            Square => "square",
            Sqrt => "sqrt",
            Abs => "abs",
            Log => "log",
            Max => "max",
            Min => "min",
            Sin => "sin",
            Cos => "cos",
            Neg => "neg",
            Sigmoid => "sigmoid",
        }
    }

    /// Case-insensitive lookup by name.
    pub fn from_name(name: &str) -> Result<Self> {
        Primitive::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(name))
            .ok_or_else(|| Error::UnknownPrimitive(name.to_string()))
    }

    /// Scalar semantics, before clamping.
    #[inline]
    fn raw(self, a: f64, b: f64) -> f64 {
        use Primitive::*;
        match self {
            Add => a + b,
            Sub => a - b,
            Mul => a * b,
            Aq => a / (1.0 + b * b).sqrt(),
            Square => a * a,
            Sqrt => a.abs().sqrt(),
            Abs => a.abs(),
            Log => (1.0 + a.abs()).ln(),
            Max => a.max(b),
            Min => a.min(b),
            Sin => a.sin(),
            Cos => a.cos(),
            Neg => -a,
            Sigmoid => 1.0 / (1.0 + (-a).exp()),
        }
    }

    #[inline]
    pub fn apply_scalar(self, a: f64, b: f64) -> f64 {
        clamp_output(self.raw(a, b))
    }

    /// Applies the primitive elementwise, writing the result into `a`.
    /// `b` is ignored for unary primitives.
    pub fn apply_in_place(self, a: &mut [f64], b: &[f64]) {
        if self.arity() == 2 {
            debug_assert_eq!(a.len(), b.len());
            for (x, &y) in a.iter_mut().zip(b) {
                *x = self.apply_scalar(*x, y);
            }
        } else {
            for x in a.iter_mut() {
                *x = self.apply_scalar(*x, 0.0);
            }
        }
    }
}

#[inline]
pub fn clamp_output(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-OUTPUT_BOUND, OUTPUT_BOUND)
    }
}

impl std::fmt::Display for Primitive {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Elementwise semantics of the named primitive over one or two input vectors.
pub fn primitive_semantics(name: &str, inputs: &[&[f64]]) -> Result<Vec<f64>> {
    let p = Primitive::from_name(name)?;
    if inputs.len() != p.arity() {
        return Err(Error::InvalidArgument(format!(
            "`{name}` takes {} inputs, got {}",
            p.arity(),
            inputs.len()
        )));
    }
    let mut out = inputs[0].to_vec();
    if p.arity() == 2 {
        if inputs[1].len() != out.len() {
            return Err(Error::DimensionMismatch {
                expected: out.len(),
                found: inputs[1].len(),
            });
        }
        p.apply_in_place(&mut out, inputs[1]);
    } else {
        p.apply_in_place(&mut out, &[]);
    }
    Ok(out)
}
