//! Dense points of the iterate space.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A finite vector in `R^n`, `n >= 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::EmptyPoint);
        }
        if let Some(&bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                source_name: "point coordinate",
                value: bad,
            });
        }
        Ok(Point(coords))
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Point(vec![0.0; dim])
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self> {
        Self::new(coords.to_vec())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        euclidean_norm(self)
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&v| v == 0.0)
    }

    pub fn dot(&self, other: &Point) -> Result<f64> {
        check_dims(self, other)?;
        Ok(self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum())
    }

    /// `self - other`.
    pub fn sub(&self, other: &Point) -> Result<Point> {
        vec_axpy(-1.0, other, self)
    }

    pub fn scaled(&self, a: f64) -> Point {
        Point(self.0.iter().map(|v| a * v).collect())
    }

    /// `‖self - other‖` without allocating.
    pub fn distance(&self, other: &Point) -> Result<f64> {
        check_dims(self, other)?;
        Ok(self
            .0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Copy of `self` with coordinate `i` shifted by `h`.
    pub(crate) fn shifted(&self, i: usize, h: f64) -> Vec<f64> {
        let mut v = self.0.clone();
        v[i] += h;
        v
    }

    /// Builds a point from arithmetic results, rejecting overflow.
    pub(crate) fn from_arith(coords: Vec<f64>, what: &'static str) -> Result<Point> {
        if let Some(&bad) = coords.iter().find(|c| !c.is_finite()) {
            return Err(Error::NonFinite {
                source_name: what,
                value: bad,
            });
        }
        Ok(Point(coords))
    }
}

impl Index<usize> for Point {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl TryFrom<Vec<f64>> for Point {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Point::new(v)
    }
}

impl From<Point> for Vec<f64> {
    fn from(p: Point) -> Vec<f64> {
        p.0
    }
}

fn check_dims(x: &Point, y: &Point) -> Result<()> {
    if x.dim() != y.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            actual: y.dim(),
        });
    }
    Ok(())
}

/// `a·x + y`, componentwise.
pub fn vec_axpy(a: f64, x: &Point, y: &Point) -> Result<Point> {
    check_dims(x, y)?;
    let coords = x.0.iter().zip(&y.0).map(|(xi, yi)| a * xi + yi).collect();
    Point::from_arith(coords, "axpy")
}

pub fn euclidean_norm(x: &Point) -> f64 {
    x.0.iter().map(|v| v * v).sum::<f64>().sqrt()
}
