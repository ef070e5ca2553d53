use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elliptical patch shape: the symmetric positive-definite matrix
/// `[[a, c], [c, b]]` with the patch being `{ d : d^T S d <= 1 }` around the
/// keypoint center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Ellipse {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        let e = Ellipse { a, b, c };
        e.validate()?;
        Ok(e)
    }

    /// Circle of the given radius.
    pub fn circle(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::invalid("circle radius must be positive"));
        }
        let a = 1.0 / (radius * radius);
        Ok(Ellipse { a, b: a, c: 0.0 })
    }

    pub fn validate(&self) -> Result<()> {
        let finite = self.a.is_finite() && self.b.is_finite() && self.c.is_finite();
        if !finite || self.a <= 0.0 || self.b <= 0.0 || self.det() <= 0.0 {
            return Err(Error::invalid(format!(
                "ellipse ({}, {}, {}) is not positive definite",
                self.a, self.b, self.c
            )));
        }
        Ok(())
    }

    #[inline]
    pub fn det(&self) -> f64 {
        self.a * self.b - self.c * self.c
    }

    /// Patch area, `pi / sqrt(det S)`.
    pub fn area(&self) -> f64 {
        std::f64::consts::PI / self.det().sqrt()
    }

    /// Half extents of the axis-aligned bounding box.
    pub fn half_extent(&self) -> (f64, f64) {
        let det = self.det();
        ((self.b / det).sqrt(), (self.a / det).sqrt())
    }

    /// The same shape scaled by `factor` about its center.
    pub fn magnified(&self, factor: f64) -> Ellipse {
        let s = 1.0 / (factor * factor);
        Ellipse {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
        }
    }

    /// Image of the patch under the linear map `m`: `m^-T S m^-1`.
    pub fn mapped(&self, m: &nalgebra::Matrix2<f64>) -> Result<Ellipse> {
        let inv = m
            .try_inverse()
            .ok_or_else(|| Error::degenerate("patch transformation is singular"))?;
        let s = nalgebra::Matrix2::new(self.a, self.c, self.c, self.b);
        let w = inv.transpose() * s * inv;
        Ellipse::new(w[(0, 0)], w[(1, 1)], 0.5 * (w[(0, 1)] + w[(1, 0)]))
    }

    #[inline]
    pub fn contains_offset(&self, dx: f64, dy: f64) -> bool {
        self.a * dx * dx + 2.0 * self.c * dx * dy + self.b * dy * dy <= 1.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    pub ellipse: Option<Ellipse>,
    pub scale: Option<f64>,
}

impl Keypoint {
    pub fn new(x: f64, y: f64) -> Self {
        Keypoint {
            x,
            y,
            ellipse: None,
            scale: None,
        }
    }

    pub fn with_ellipse(mut self, ellipse: Ellipse) -> Self {
        self.ellipse = Some(ellipse);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite()) {
            return Err(Error::invalid("keypoint coordinates must be finite"));
        }
        if let Some(e) = &self.ellipse {
            e.validate()?;
        }
        if let Some(s) = self.scale {
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("keypoint scale must be positive"));
            }
        }
        Ok(())
    }

    #[inline]
    pub fn distance_to(&self, other: &Keypoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Keypoints of both images of a pair plus the image dimensions.
#[derive(Clone, Debug, PartialEq)]
pub struct PairContext {
    pub keypoints1: Vec<Keypoint>,
    pub keypoints2: Vec<Keypoint>,
    pub width1: f64,
    pub height1: f64,
    pub width2: f64,
    pub height2: f64,
}

impl PairContext {
    pub fn new(
        keypoints1: Vec<Keypoint>,
        keypoints2: Vec<Keypoint>,
        size1: (f64, f64),
        size2: (f64, f64),
    ) -> Result<Self> {
        let ctx = PairContext {
            keypoints1,
            keypoints2,
            width1: size1.0,
            height1: size1.1,
            width2: size2.0,
            height2: size2.1,
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<()> {
        for d in [self.width1, self.height1, self.width2, self.height2] {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::invalid("image dimensions must be positive"));
            }
        }
        for kp in self.keypoints1.iter().chain(&self.keypoints2) {
            kp.validate()?;
        }
        Ok(())
    }

    /// Checks that the keypoint counts agree with an `n x m` matrix.
    pub fn check_shape(&self, n: usize, m: usize) -> Result<()> {
        if self.keypoints1.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: self.keypoints1.len(),
            });
        }
        if self.keypoints2.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                actual: self.keypoints2.len(),
            });
        }
        Ok(())
    }

    /// The same pair with the image roles swapped.
    pub fn swapped(&self) -> PairContext {
        PairContext {
            keypoints1: self.keypoints2.clone(),
            keypoints2: self.keypoints1.clone(),
            width1: self.width2,
            height1: self.height2,
            width2: self.width1,
            height2: self.height1,
        }
    }
}
