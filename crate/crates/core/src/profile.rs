//! Piecewise profiles with exact derivatives.
//!
//! A closed-form profile is a list of ordered breakpoints and one piece per
//! interval. Each piece is a constant plus a sum of terms
//! `c (-z)^beta exp(lambda z)` with `beta` in `{0, 1/2, 1}`; every bound
//! formula used by the crate is of that form. Terms with `beta > 0` must
//! only be active on `z <= 0`.
//!
//! Sampled profiles hold values on a uniform grid. At grid nodes the
//! derivatives are the second-order central differences used by the
//! solvers; between nodes a cubic Hermite interpolant (node slopes from
//! central differences) is used, whose first derivative is accurate to
//! `O(h^2)` and second derivative to `O(h)`.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProfileError {
    #[error("derivative of order {order} requested exactly at breakpoint {at}")]
    BreakpointDerivative { at: f64, order: u8 },
    #[error("derivative order {0} not supported")]
    Order(u8),
    #[error("invalid profile: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Power {
    Zero,
    Half,
    One,
}

impl Power {
    fn value(self) -> f64 {
        match self {
            Power::Zero => 0.0,
            Power::Half => 0.5,
            Power::One => 1.0,
        }
    }
}

/// `coef * (-z)^power * exp(rate * z)`
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Term {
    pub coef: f64,
    pub power: Power,
    pub rate: f64,
}

impl Term {
    pub fn exp(coef: f64, rate: f64) -> Self {
        Self {
            coef,
            power: Power::Zero,
            rate,
        }
    }

    /// `coef * (-z) * exp(rate z)`; note `z e^{rate z}` is `Term::linear(-c, rate)`.
    pub fn linear(coef: f64, rate: f64) -> Self {
        Self {
            coef,
            power: Power::One,
            rate,
        }
    }

    pub fn sqrt(coef: f64, rate: f64) -> Self {
        Self {
            coef,
            power: Power::Half,
            rate,
        }
    }

    /// Value and first two derivatives.
    pub fn eval3(&self, z: f64) -> [f64; 3] {
        let e = (self.rate * z).exp();
        let l = self.rate;
        let c = self.coef;
        match self.power {
            Power::Zero => [c * e, c * l * e, c * l * l * e],
            Power::One => {
                let y = -z;
                [
                    c * y * e,
                    c * e * (l * y - 1.0),
                    c * e * (l * l * y - 2.0 * l),
                ]
            }
            Power::Half => {
                let y = -z;
                if y <= 0.0 {
                    return [0.0, f64::NAN, f64::NAN];
                }
                let r = y.sqrt();
                [
                    c * r * e,
                    c * e * (l * r - 0.5 / r),
                    c * e * (l * l * r - l / r - 0.25 / (y * r)),
                ]
            }
        }
    }

    /// `|coef| (-z)^beta exp(rate z)`, the term's magnitude.
    pub fn magnitude(&self, z: f64) -> f64 {
        let y = (-z).max(0.0);
        self.coef.abs() * y.powf(self.power.value()) * (self.rate * z).exp()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Piece {
    pub constant: f64,
    pub terms: Vec<Term>,
}

impl Piece {
    pub fn constant(c: f64) -> Self {
        Self {
            constant: c,
            terms: Vec::new(),
        }
    }

    pub fn new(constant: f64, terms: Vec<Term>) -> Self {
        Self { constant, terms }
    }

    pub fn eval3(&self, z: f64) -> [f64; 3] {
        let mut out = [self.constant, 0.0, 0.0];
        for t in &self.terms {
            let v = t.eval3(z);
            out[0] += v[0];
            out[1] += v[1];
            out[2] += v[2];
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedProfile {
    breakpoints: Vec<f64>,
    pieces: Vec<Piece>,
}

impl ClosedProfile {
    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Piece>) -> Result<Self, ProfileError> {
        if pieces.len() != breakpoints.len() + 1 {
            return Err(ProfileError::Invalid(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len() + 1,
                pieces.len()
            )));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ProfileError::Invalid("breakpoints not increasing".into()));
        }
        Ok(Self {
            breakpoints,
            pieces,
        })
    }

    pub fn constant(c: f64) -> Self {
        Self {
            breakpoints: Vec::new(),
            pieces: vec![Piece::constant(c)],
        }
    }

    /// Two pieces split at `at`.
    pub fn split(at: f64, left: Piece, right: Piece) -> Self {
        Self {
            breakpoints: vec![at],
            pieces: vec![left, right],
        }
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Piece] {
        &self.pieces
    }

    fn piece_index(&self, z: f64, side: Side) -> usize {
        match side {
            Side::Right => self.breakpoints.partition_point(|&b| b <= z),
            Side::Left => self.breakpoints.partition_point(|&b| b < z),
        }
    }

    pub fn eval3_side(&self, z: f64, side: Side) -> [f64; 3] {
        self.pieces[self.piece_index(z, side)].eval3(z)
    }

    /// Sum of term magnitudes of the active piece: a bound on the distance
    /// to the piece's constant.
    pub fn tail_bound(&self, z: f64) -> f64 {
        self.pieces[self.piece_index(z, Side::Right)]
            .terms
            .iter()
            .map(|t| t.magnitude(z))
            .sum()
    }

    /// Constant of the leftmost piece (the limit at minus infinity when all
    /// its terms decay).
    pub fn left_constant(&self) -> f64 {
        self.pieces[0].constant
    }

    /// Largest jump between one-sided values over all breakpoints.
    pub fn continuity_defect(&self) -> f64 {
        self.breakpoints
            .iter()
            .map(|&b| {
                (self.eval3_side(b, Side::Left)[0] - self.eval3_side(b, Side::Right)[0]).abs()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampledProfile {
    start: f64,
    spacing: f64,
    values: Vec<f64>,
    #[serde(skip)]
    slopes: Vec<f64>,
    #[serde(skip)]
    curvatures: Vec<f64>,
}

impl SampledProfile {
    pub fn new(start: f64, spacing: f64, values: Vec<f64>) -> Result<Self, ProfileError> {
        if values.len() < 3 {
            return Err(ProfileError::Invalid("need at least 3 samples".into()));
        }
        if !(spacing > 0.0) {
            return Err(ProfileError::Invalid("spacing must be positive".into()));
        }
        let n = values.len();
        let mut slopes = vec![0.0; n];
        let mut curvatures = vec![0.0; n];
        for i in 1..n - 1 {
            slopes[i] = (values[i + 1] - values[i - 1]) / (2.0 * spacing);
            curvatures[i] = (values[i + 1] - 2.0 * values[i] + values[i - 1]) / (spacing * spacing);
        }
        slopes[0] = (values[1] - values[0]) / spacing;
        slopes[n - 1] = (values[n - 1] - values[n - 2]) / spacing;
        curvatures[0] = curvatures[1];
        curvatures[n - 1] = curvatures[n - 2];
        Ok(Self {
            start,
            spacing,
            values,
            slopes,
            curvatures,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn positions(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| self.start + self.spacing * i as f64)
    }

    pub fn end(&self) -> f64 {
        self.start + self.spacing * (self.values.len() - 1) as f64
    }

    pub fn eval3(&self, z: f64) -> [f64; 3] {
        let n = self.values.len();
        if z <= self.start {
            return [self.values[0], 0.0, 0.0];
        }
        if z >= self.end() {
            return [self.values[n - 1], 0.0, 0.0];
        }
        let x = (z - self.start) / self.spacing;
        let i = x.round();
        if (x - i).abs() < 1e-7 {
            let i = i as usize;
            return [self.values[i], self.slopes[i], self.curvatures[i]];
        }
        let j = (x.floor() as usize).min(n - 2);
        let t = x - j as f64;
        let h = self.spacing;
        let (p0, p1) = (self.values[j], self.values[j + 1]);
        let (m0, m1) = (self.slopes[j] * h, self.slopes[j + 1] * h);
        let (t2, t3) = (t * t, t * t * t);
        let v = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
            + (t3 - 2.0 * t2 + t) * m0
            + (-2.0 * t3 + 3.0 * t2) * p1
            + (t3 - t2) * m1;
        let d1 = (6.0 * t2 - 6.0 * t) * p0
            + (3.0 * t2 - 4.0 * t + 1.0) * m0
            + (-6.0 * t2 + 6.0 * t) * p1
            + (3.0 * t2 - 2.0 * t) * m1;
        let d2 = (12.0 * t - 6.0) * p0
            + (6.0 * t - 4.0) * m0
            + (-12.0 * t + 6.0) * p1
            + (6.0 * t - 2.0) * m1;
        [v, d1 / h, d2 / (h * h)]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PiecewiseProfile {
    Closed(ClosedProfile),
    Sampled(SampledProfile),
}

impl PiecewiseProfile {
    pub fn constant(c: f64) -> Self {
        PiecewiseProfile::Closed(ClosedProfile::constant(c))
    }

    pub fn breakpoints(&self) -> &[f64] {
        match self {
            PiecewiseProfile::Closed(p) => p.breakpoints(),
            PiecewiseProfile::Sampled(_) => &[],
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        self.eval3_side(z, Side::Right)[0]
    }

    /// Value or derivative of order 0, 1, 2. Derivatives at a breakpoint
    /// need a side: use [`PiecewiseProfile::eval_side`].
    pub fn eval(&self, z: f64, order: u8) -> Result<f64, ProfileError> {
        if order > 2 {
            return Err(ProfileError::Order(order));
        }
        if order >= 1 && self.breakpoints().contains(&z) {
            return Err(ProfileError::BreakpointDerivative { at: z, order });
        }
        Ok(self.eval3_side(z, Side::Right)[order as usize])
    }

    pub fn eval_side(&self, z: f64, order: u8, side: Side) -> Result<f64, ProfileError> {
        if order > 2 {
            return Err(ProfileError::Order(order));
        }
        Ok(self.eval3_side(z, side)[order as usize])
    }

    pub fn eval3_side(&self, z: f64, side: Side) -> [f64; 3] {
        match self {
            PiecewiseProfile::Closed(p) => p.eval3_side(z, side),
            PiecewiseProfile::Sampled(p) => p.eval3(z),
        }
    }

    pub fn tail_bound(&self, z: f64) -> f64 {
        match self {
            PiecewiseProfile::Closed(p) => p.tail_bound(z),
            PiecewiseProfile::Sampled(_) => 0.0,
        }
    }

    pub fn is_closed(&self) -> bool {
        matches!(self, PiecewiseProfile::Closed(_))
    }
}
