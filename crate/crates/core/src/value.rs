//! Runtime values and buffers shared by both interpreters and the codegen
//! differential harness.

use crate::rng::SplitMix64;
use std::fmt;

pub const ELEM_BYTES: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum ElemType {
    I64,
    F64,
}

impl fmt::Display for ElemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ElemType::I64 => write!(f, "i64"),
            ElemType::F64 => write!(f, "f64"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    I64(i64),
    F64(f64),
}

/// Uninitialized-memory pattern: every byte 0xA5. Reads of never-written
/// transient elements observe this instead of a quiet zero.
pub const POISON_BITS: u64 = 0xA5A5A5A5A5A5A5A5;

impl Value {
    pub fn elem_type(&self) -> ElemType {
        match self {
            Value::I64(_) => ElemType::I64,
            Value::F64(_) => ElemType::F64,
        }
    }

    pub fn to_bits(&self) -> u64 {
        match self {
            Value::I64(v) => *v as u64,
            Value::F64(v) => v.to_bits(),
        }
    }

    pub fn from_bits(elem: ElemType, bits: u64) -> Value {
        match elem {
            ElemType::I64 => Value::I64(bits as i64),
            ElemType::F64 => Value::F64(f64::from_bits(bits)),
        }
    }

    pub fn poison(elem: ElemType) -> Value {
        Value::from_bits(elem, POISON_BITS)
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::I64(v) => Some(*v),
            Value::F64(_) => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::F64(v) => Some(*v),
            Value::I64(_) => None,
        }
    }

    /// Truthiness for conditions: nonzero integer.
    pub fn is_truthy(&self) -> bool {
        match self {
            Value::I64(v) => *v != 0,
            Value::F64(v) => *v != 0.0,
        }
    }

    pub fn random(elem: ElemType, rng: &mut SplitMix64) -> Value {
        match elem {
            ElemType::I64 => Value::I64(rng.next_i64_in(-100, 100)),
            ElemType::F64 => Value::F64(rng.next_f64_unit()),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::I64(v) => write!(f, "{v}"),
            Value::F64(v) => write!(f, "{v:?}"),
        }
    }
}

/// A dense container: scalars have empty shape and one element. Element
/// storage is raw bits so integer and float buffers share one layout and
/// comparisons can be bit-exact.
#[derive(Debug, Clone, PartialEq)]
pub struct Buffer {
    pub elem: ElemType,
    pub shape: Vec<i64>,
    pub data: Vec<u64>,
    pub written: Vec<bool>,
}

impl Buffer {
    pub fn new_poisoned(elem: ElemType, shape: Vec<i64>) -> Buffer {
        let len = shape.iter().product::<i64>().max(1) as usize;
        Buffer { elem, shape, data: vec![POISON_BITS; len], written: vec![false; len] }
    }

    pub fn from_values(elem: ElemType, shape: Vec<i64>, values: &[Value]) -> Buffer {
        let mut b = Buffer::new_poisoned(elem, shape);
        assert_eq!(values.len(), b.data.len());
        for (i, v) in values.iter().enumerate() {
            b.data[i] = v.to_bits();
            b.written[i] = true;
        }
        b
    }

    pub fn random(elem: ElemType, shape: Vec<i64>, rng: &mut SplitMix64) -> Buffer {
        let len = shape.iter().product::<i64>().max(1) as usize;
        let values: Vec<Value> = (0..len).map(|_| Value::random(elem, rng)).collect();
        Buffer::from_values(elem, shape, &values)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Row-major linearization; `None` when any index is out of range.
    pub fn linear_index(&self, idx: &[i64]) -> Option<usize> {
        if idx.len() != self.shape.len() {
            return None;
        }
        let mut lin: i64 = 0;
        for (i, d) in idx.iter().zip(&self.shape) {
            if *i < 0 || i >= d {
                return None;
            }
            lin = lin * d + i;
        }
        Some(lin as usize)
    }

    pub fn get_lin(&self, lin: usize) -> Value {
        Value::from_bits(self.elem, self.data[lin])
    }

    pub fn set_lin(&mut self, lin: usize, v: Value) {
        self.data[lin] = v.to_bits();
        self.written[lin] = true;
    }

    pub fn value(&self, idx: &[i64]) -> Option<Value> {
        self.linear_index(idx).map(|l| self.get_lin(l))
    }

    pub fn values(&self) -> Vec<Value> {
        (0..self.len()).map(|l| self.get_lin(l)).collect()
    }
}

/// Elementwise comparison: integers bit-exact, floats within `rel_tol`
/// relative (absolute for magnitudes below 1). Returns the worst deviation,
/// or `None` on shape/type mismatch.
pub fn max_deviation(a: &Buffer, b: &Buffer) -> Option<f64> {
    if a.elem != b.elem || a.shape != b.shape {
        return None;
    }
    let mut worst: f64 = 0.0;
    for (x, y) in a.data.iter().zip(&b.data) {
        match a.elem {
            ElemType::I64 => {
                if x != y {
                    return Some(f64::INFINITY);
                }
            }
            ElemType::F64 => {
                let (fx, fy) = (f64::from_bits(*x), f64::from_bits(*y));
                if fx.to_bits() == fy.to_bits() {
                    continue;
                }
                if fx.is_nan() || fy.is_nan() {
                    return Some(f64::INFINITY);
                }
                let scale = fx.abs().max(fy.abs()).max(1.0);
                worst = worst.max((fx - fy).abs() / scale);
            }
        }
    }
    Some(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn poison_pattern_is_a5_bytes() {
        let b = Buffer::new_poisoned(ElemType::I64, vec![2]);
        assert_eq!(b.data[0].to_le_bytes(), [0xA5; 8]);
        assert!(!b.written[0]);
    }

    #[test]
    fn row_major_linearization() {
        let b = Buffer::new_poisoned(ElemType::F64, vec![2, 3]);
        assert_eq!(b.linear_index(&[0, 0]), Some(0));
        assert_eq!(b.linear_index(&[1, 2]), Some(5));
        assert_eq!(b.linear_index(&[0, 3]), None);
        assert_eq!(b.linear_index(&[2, 0]), None);
        assert_eq!(b.linear_index(&[-1, 0]), None);
    }

    #[test]
    fn scalars_have_one_element() {
        let b = Buffer::new_poisoned(ElemType::F64, vec![]);
        assert_eq!(b.len(), 1);
        assert_eq!(b.linear_index(&[]), Some(0));
    }

    #[test]
    fn deviation_detects_int_differences_exactly() {
        let a = Buffer::from_values(ElemType::I64, vec![2], &[Value::I64(1), Value::I64(2)]);
        let mut b = a.clone();
        assert_eq!(max_deviation(&a, &b), Some(0.0));
        b.set_lin(1, Value::I64(3));
        assert_eq!(max_deviation(&a, &b), Some(f64::INFINITY));
    }

    #[test]
    fn deviation_is_relative_for_floats() {
        let a = Buffer::from_values(ElemType::F64, vec![1], &[Value::F64(100.0)]);
        let b = Buffer::from_values(ElemType::F64, vec![1], &[Value::F64(100.0 + 1e-7)]);
        let d = max_deviation(&a, &b).unwrap();
        assert!(d > 0.0 && d < 1e-8);
    }
}
