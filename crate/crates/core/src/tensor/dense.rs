use std::fmt;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::matrix::Matrix;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Label of a tensor leg.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Leg(String);

impl Leg {
    pub fn new(label: impl Into<String>) -> Self {
        Leg(label.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Leg {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Leg {
    fn from(s: &str) -> Self {
        Leg(s.to_owned())
    }
}

impl From<String> for Leg {
    fn from(s: String) -> Self {
        Leg(s)
    }
}

impl PartialEq<str> for Leg {
    fn eq(&self, other: &str) -> bool {
        self.0 == other
    }
}

/// Multi-index array with named legs, stored row-major (last leg fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct DenseTensor<T> {
    legs: Vec<Leg>,
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T: Scalar> DenseTensor<T> {
    pub fn new<L: Into<Leg>>(legs: Vec<L>, shape: Vec<usize>, data: Vec<T>) -> Result<Self> {
        let legs: Vec<Leg> = legs.into_iter().map(Into::into).collect();
        validate_layout(&legs, &shape)?;
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::dim(format!(
                "shape {shape:?} holds {expected} scalars, got {}",
                data.len()
            )));
        }
        if let Some(index) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { legs, shape, data })
    }

    pub fn zeros<L: Into<Leg>>(legs: Vec<L>, shape: Vec<usize>) -> Result<Self> {
        let n = shape.iter().product();
        Self::new(legs, shape, vec![T::zero(); n])
    }

    /// Scalar (rank-0) tensor.
    pub fn scalar(value: T) -> Self {
        Self { legs: Vec::new(), shape: Vec::new(), data: vec![value] }
    }

    /// Tensor with i.i.d. standard normal entries.
    pub fn random<L: Into<Leg>, R: Rng + ?Sized>(legs: Vec<L>, shape: Vec<usize>, rng: &mut R) -> Result<Self> {
        let n: usize = shape.iter().product();
        let data = (0..n)
            .map(|_| {
                let x: f64 = StandardNormal.sample(rng);
                T::of(x)
            })
            .collect();
        Self::new(legs, shape, data)
    }

    /// Interprets a matrix as a two-leg tensor.
    pub fn from_matrix(m: Matrix<T>, row: impl Into<Leg>, col: impl Into<Leg>) -> Result<Self> {
        let shape = vec![m.rows(), m.cols()];
        Self::new(vec![row.into(), col.into()], shape, m.into_vec())
    }

    #[inline]
    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    #[inline]
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.legs.len()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn position(&self, leg: &str) -> Option<usize> {
        self.legs.iter().position(|l| l == leg)
    }

    pub fn extent(&self, leg: &str) -> Option<usize> {
        self.position(leg).map(|i| self.shape[i])
    }

    fn require(&self, leg: &str) -> Result<usize> {
        self.position(leg)
            .ok_or_else(|| Error::usage(format!("leg '{leg}' not found among {:?}", self.labels())))
    }

    fn labels(&self) -> Vec<&str> {
        self.legs.iter().map(Leg::as_str).collect()
    }

    pub fn relabel(&mut self, old: &str, new: impl Into<Leg>) -> Result<()> {
        let i = self.require(old)?;
        let new = new.into();
        if self.legs.iter().enumerate().any(|(j, l)| j != i && *l == new) {
            return Err(Error::usage(format!("leg '{new}' already present")));
        }
        self.legs[i] = new;
        Ok(())
    }

    /// Reorders legs (materialized transposition).
    pub fn permute(&self, order: &[&str]) -> Result<Self> {
        if order.len() != self.rank() {
            return Err(Error::usage(format!(
                "permutation lists {} legs, tensor has {}",
                order.len(),
                self.rank()
            )));
        }
        let mut axes = Vec::with_capacity(order.len());
        for leg in order {
            let i = self.require(leg)?;
            if axes.contains(&i) {
                return Err(Error::usage(format!("leg '{leg}' repeated in permutation")));
            }
            axes.push(i);
        }
        Ok(self.permute_axes(&axes))
    }

    pub(crate) fn permute_axes(&self, axes: &[usize]) -> Self {
        let legs = axes.iter().map(|&i| self.legs[i].clone()).collect();
        let shape: Vec<usize> = axes.iter().map(|&i| self.shape[i]).collect();
        if axes.iter().enumerate().all(|(k, &i)| k == i) {
            return Self { legs, shape, data: self.data.clone() };
        }
        let data = transpose_data(&self.data, &self.shape, axes);
        Self { legs, shape, data }
    }

    pub fn norm(&self) -> T {
        self.data.iter().map(|&x| x * x).sum::<T>().sqrt()
    }

    pub fn scale(&mut self, s: T) {
        self.data.iter_mut().for_each(|x| *x *= s);
    }

    /// `self += s * other`, aligning `other` by leg labels.
    pub fn axpy(&mut self, s: T, other: &Self) -> Result<()> {
        let labels = self.labels();
        let aligned = other.permute(&labels)?;
        if aligned.shape != self.shape {
            return Err(Error::dim(format!("shapes {:?} and {:?} differ", self.shape, aligned.shape)));
        }
        self.data.iter_mut().zip(&aligned.data).for_each(|(a, &b)| *a += s * b);
        Ok(())
    }

    /// Flattens into a matrix with `row_legs` (in the given order) as rows and
    /// the remaining legs, in tensor order, as columns.
    pub fn to_matrix(&self, row_legs: &[&str]) -> Result<(Matrix<T>, Vec<Leg>, Vec<usize>)> {
        let mut order: Vec<&str> = row_legs.to_vec();
        let rest: Vec<&str> = self.legs.iter().map(Leg::as_str).filter(|l| !row_legs.contains(l)).collect();
        order.extend(rest.iter());
        let p = self.permute(&order)?;
        let rows: usize = p.shape[..row_legs.len()].iter().product();
        let cols: usize = p.shape[row_legs.len()..].iter().product();
        let col_legs = p.legs[row_legs.len()..].to_vec();
        let col_shape = p.shape[row_legs.len()..].to_vec();
        Ok((Matrix::from_vec(rows, cols, p.data)?, col_legs, col_shape))
    }
}

fn validate_layout(legs: &[Leg], shape: &[usize]) -> Result<()> {
    if legs.len() != shape.len() {
        return Err(Error::dim(format!("{} legs but {} extents", legs.len(), shape.len())));
    }
    if let Some(i) = shape.iter().position(|&e| e == 0) {
        return Err(Error::dim(format!("leg '{}' has zero extent", legs[i])));
    }
    for (i, l) in legs.iter().enumerate() {
        if legs[..i].contains(l) {
            return Err(Error::usage(format!("leg label '{l}' is not unique")));
        }
    }
    Ok(())
}

pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        s[i] = s[i + 1] * shape[i + 1];
    }
    s
}

/// Materialized transposition: output axis `k` is input axis `axes[k]`.
pub(crate) fn transpose_data<T: Copy>(data: &[T], shape: &[usize], axes: &[usize]) -> Vec<T> {
    let rank = shape.len();
    let in_strides = strides(shape);
    let out_shape: Vec<usize> = axes.iter().map(|&a| shape[a]).collect();
    let src_strides: Vec<usize> = axes.iter().map(|&a| in_strides[a]).collect();
    let total = data.len();
    let mut out = Vec::with_capacity(total);
    if rank == 0 {
        out.extend_from_slice(data);
        return out;
    }
    // iterate output in row-major order, walking the innermost axis directly
    let inner = out_shape[rank - 1];
    let inner_stride = src_strides[rank - 1];
    let mut idx = vec![0usize; rank - 1];
    let outer_count = total / inner;
    for _ in 0..outer_count {
        let base: usize = idx.iter().zip(&src_strides).map(|(i, s)| i * s).sum();
        if inner_stride == 1 {
            out.extend_from_slice(&data[base..base + inner]);
        } else {
            out.extend((0..inner).map(|j| data[base + j * inner_stride]));
        }
        for ax in (0..rank - 1).rev() {
            idx[ax] += 1;
            if idx[ax] < out_shape[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constructor_rejects_bad_layouts() {
        assert!(matches!(
            DenseTensor::<f64>::new(vec!["a", "b"], vec![2, 2], vec![0.0; 3]),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            DenseTensor::<f64>::new(vec!["a", "a"], vec![2, 2], vec![0.0; 4]),
            Err(Error::Usage(_))
        ));
        assert!(matches!(
            DenseTensor::<f64>::new(vec!["a"], vec![2], vec![0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
    }

    #[test]
    fn permute_matches_index_formula() {
        let data: Vec<f64> = (0..24).map(f64::from).collect();
        let t = DenseTensor::new(vec!["i", "j", "k"], vec![2, 3, 4], data).unwrap();
        let p = t.permute(&["k", "i", "j"]).unwrap();
        assert_eq!(p.shape(), &[4, 2, 3]);
        for i in 0..2 {
            for j in 0..3 {
                for k in 0..4 {
                    let src = t.data()[i * 12 + j * 4 + k];
                    let dst = p.data()[k * 6 + i * 3 + j];
                    assert_eq!(src, dst);
                }
            }
        }
    }

    #[test]
    fn relabel_refuses_duplicates() {
        let mut t = DenseTensor::<f64>::zeros(vec!["a", "b"], vec![1, 2]).unwrap();
        assert!(t.relabel("a", "b").is_err());
        t.relabel("a", "c").unwrap();
        assert_eq!(t.position("c"), Some(0));
    }
}
