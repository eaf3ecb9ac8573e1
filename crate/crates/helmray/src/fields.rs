//! Wave-speed models, sources, boundary data, and analytic reference wave
//! fields.

pub mod bessel;

use crate::{CGrad, Complex64, Point};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FieldError {
    #[error("point {0:?} outside gridded speed coverage")]
    OutsideGrid(Point),
    #[error("gridded speed needs at least 2 samples per axis, got {0}")]
    GridTooSmall(usize),
    #[error("gridded speed sample {index} is not positive: {value}")]
    NonPositiveSample { index: usize, value: f64 },
    #[error("speed grid file: {0}")]
    GridFormat(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("Hankel reference evaluated at its source point {0:?}")]
    AtSource(Point),
}

/// Parameters of the Gaussian-lens speed
/// `c(x) = base - amplitude * exp(-sharpness*((y-y0)^2 + (x + skew*y - x0)^2))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianLens {
    pub base: f64,
    pub amplitude: f64,
    pub sharpness: f64,
    pub x0: f64,
    pub y0: f64,
    pub skew: f64,
}

impl Default for GaussianLens {
    fn default() -> Self {
        GaussianLens { base: 1.0, amplitude: 0.5, sharpness: 100.0, x0: 0.7, y0: 0.4, skew: 0.5 }
    }
}

/// Node-centered samples on a uniform grid with multilinear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedGrid {
    pub dim: usize,
    pub counts: [usize; 3],
    pub lower: Point,
    pub upper: Point,
    pub values: Vec<f64>,
}

impl SpeedGrid {
    pub fn new(
        dim: usize,
        counts: [usize; 3],
        lower: Point,
        upper: Point,
        values: Vec<f64>,
    ) -> Result<Self, FieldError> {
        let mut c = counts;
        for a in dim..3 {
            c[a] = 1;
        }
        for a in 0..dim {
            if c[a] < 2 {
                return Err(FieldError::GridTooSmall(c[a]));
            }
        }
        let expected: usize = c[..dim].iter().product();
        if values.len() != expected {
            return Err(FieldError::GridFormat(format!(
                "expected {expected} samples, got {}",
                values.len()
            )));
        }
        for (i, &v) in values.iter().enumerate() {
            if !(v > 0.0) {
                return Err(FieldError::NonPositiveSample { index: i, value: v });
            }
        }
        Ok(SpeedGrid { dim, counts: c, lower, upper, values })
    }

    fn spacing(&self, a: usize) -> f64 {
        (self.upper[a] - self.lower[a]) / (self.counts[a] - 1) as f64
    }

    fn sample(&self, i: [usize; 3]) -> f64 {
        self.values[i[0] + self.counts[0] * (i[1] + self.counts[1] * i[2])]
    }

    pub fn eval(&self, x: &Point) -> Result<f64, FieldError> {
        let mut base = [0usize; 3];
        let mut frac = [0.0f64; 3];
        for a in 0..self.dim {
            let tol = 1e-9 * (self.upper[a] - self.lower[a]).abs();
            if x[a] < self.lower[a] - tol || x[a] > self.upper[a] + tol {
                return Err(FieldError::OutsideGrid(*x));
            }
            let t = ((x[a] - self.lower[a]) / self.spacing(a)).clamp(0.0, (self.counts[a] - 1) as f64);
            let i = (t.floor() as usize).min(self.counts[a] - 2);
            base[a] = i;
            frac[a] = t - i as f64;
        }
        let mut value = 0.0;
        for corner in 0..(1usize << self.dim) {
            let mut w = 1.0;
            let mut idx = [0usize; 3];
            for a in 0..self.dim {
                if (corner >> a) & 1 == 1 {
                    w *= frac[a];
                    idx[a] = base[a] + 1;
                } else {
                    w *= 1.0 - frac[a];
                    idx[a] = base[a];
                }
            }
            value += w * self.sample(idx);
        }
        Ok(value)
    }

    /// Text format: header `d n_1 .. n_d lo_1 .. lo_d hi_1 .. hi_d`
    /// followed by row-major (x fastest) samples, whitespace-separated.
    pub fn read<R: BufRead>(reader: R) -> Result<Self, FieldError> {
        let mut tokens = Vec::new();
        for line in reader.lines() {
            let line = line?;
            for tok in line.split_whitespace() {
                tokens.push(tok.to_string());
            }
        }
        let mut it = tokens.iter();
        let mut next_f64 = |what: &str| -> Result<f64, FieldError> {
            it.next()
                .ok_or_else(|| FieldError::GridFormat(format!("missing {what}")))?
                .parse::<f64>()
                .map_err(|e| FieldError::GridFormat(format!("bad {what}: {e}")))
        };
        let dim = next_f64("dimension")? as usize;
        if dim != 2 && dim != 3 {
            return Err(FieldError::GridFormat(format!("dimension must be 2 or 3, got {dim}")));
        }
        let mut counts = [1usize; 3];
        for count in counts.iter_mut().take(dim) {
            *count = next_f64("count")? as usize;
        }
        let mut lower = [0.0; 3];
        let mut upper = [0.0; 3];
        for v in lower.iter_mut().take(dim) {
            *v = next_f64("lower bound")?;
        }
        for v in upper.iter_mut().take(dim) {
            *v = next_f64("upper bound")?;
        }
        let n: usize = counts[..dim].iter().product();
        let mut values = Vec::with_capacity(n);
        for _ in 0..n {
            values.push(next_f64("sample")?);
        }
        if it.next().is_some() {
            return Err(FieldError::GridFormat("trailing tokens after samples".into()));
        }
        SpeedGrid::new(dim, counts, lower, upper, values)
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<(), FieldError> {
        write!(w, "{}", self.dim)?;
        for a in 0..self.dim {
            write!(w, " {}", self.counts[a])?;
        }
        for a in 0..self.dim {
            write!(w, " {:.17e}", self.lower[a])?;
        }
        for a in 0..self.dim {
            write!(w, " {:.17e}", self.upper[a])?;
        }
        writeln!(w)?;
        for (i, v) in self.values.iter().enumerate() {
            if i > 0 && i % 8 == 0 {
                writeln!(w)?;
            }
            write!(w, "{:.17e} ", v)?;
        }
        writeln!(w)?;
        Ok(())
    }
}

/// Wave speed model with positive bounds.
#[derive(Debug, Clone, PartialEq)]
pub enum WaveSpeed {
    Constant(f64),
    GaussianLens(GaussianLens),
    Gridded(SpeedGrid),
}

impl WaveSpeed {
    pub fn eval(&self, x: &Point) -> Result<f64, FieldError> {
        match self {
            WaveSpeed::Constant(c) => Ok(*c),
            WaveSpeed::GaussianLens(p) => {
                let u = x[1] - p.y0;
                let v = x[0] + p.skew * x[1] - p.x0;
                Ok(p.base - p.amplitude * (-p.sharpness * (u * u + v * v)).exp())
            }
            WaveSpeed::Gridded(g) => g.eval(x),
        }
    }

    /// (c_min, c_max) over the whole model.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            WaveSpeed::Constant(c) => (*c, *c),
            WaveSpeed::GaussianLens(p) => (p.base - p.amplitude, p.base),
            WaveSpeed::Gridded(g) => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for &v in &g.values {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                (lo, hi)
            }
        }
    }
}

/// One plane-wave component `amplitude * exp(i*k*d.x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlaneWaveTerm {
    pub amplitude: Complex64,
    pub direction: Point,
    pub wavenumber: f64,
}

/// One point-source component `amplitude * H0^(1)(k |x - source|)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HankelTerm {
    pub amplitude: Complex64,
    pub source: Point,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceKind {
    PlaneWaveSum(Vec<PlaneWaveTerm>),
    HankelSum(Vec<HankelTerm>),
}

/// Analytic reference wave field at a fixed frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceField {
    pub frequency: f64,
    pub kind: ReferenceKind,
}

impl ReferenceField {
    pub fn plane_waves(frequency: f64, terms: Vec<PlaneWaveTerm>) -> Self {
        ReferenceField { frequency, kind: ReferenceKind::PlaneWaveSum(terms) }
    }

    pub fn hankels(frequency: f64, terms: Vec<HankelTerm>) -> Self {
        ReferenceField { frequency, kind: ReferenceKind::HankelSum(terms) }
    }

    pub fn eval(&self, x: &Point) -> Result<Complex64, FieldError> {
        match &self.kind {
            ReferenceKind::PlaneWaveSum(terms) => Ok(terms
                .iter()
                .map(|t| {
                    let phase = t.wavenumber * dot(&t.direction, x);
                    t.amplitude * Complex64::new(0.0, phase).exp()
                })
                .sum()),
            ReferenceKind::HankelSum(terms) => {
                let mut sum = Complex64::new(0.0, 0.0);
                for t in terms {
                    let r = dist(x, &t.source);
                    if r <= 0.0 {
                        return Err(FieldError::AtSource(*x));
                    }
                    sum += t.amplitude * bessel::hankel0_first_kind(self.frequency * r);
                }
                Ok(sum)
            }
        }
    }

    /// Analytic gradient, hard-coded per variant.
    pub fn gradient(&self, x: &Point) -> Result<CGrad, FieldError> {
        let mut g = [Complex64::new(0.0, 0.0); 3];
        match &self.kind {
            ReferenceKind::PlaneWaveSum(terms) => {
                for t in terms {
                    let phase = t.wavenumber * dot(&t.direction, x);
                    let v = t.amplitude * Complex64::new(0.0, phase).exp();
                    for (a, ga) in g.iter_mut().enumerate() {
                        *ga += Complex64::new(0.0, t.wavenumber * t.direction[a]) * v;
                    }
                }
            }
            ReferenceKind::HankelSum(terms) => {
                let k = self.frequency;
                for t in terms {
                    let r = dist(x, &t.source);
                    if r <= 0.0 {
                        return Err(FieldError::AtSource(*x));
                    }
                    // d/dr H0(kr) = -k H1(kr)
                    let radial = -t.amplitude * k * bessel::hankel1_first_kind(k * r);
                    for (a, ga) in g.iter_mut().enumerate() {
                        *ga += radial * ((x[a] - t.source[a]) / r);
                    }
                }
            }
        }
        Ok(g)
    }

    /// Impedance boundary data `g = grad(u).n + i*(omega/c(x))*u`.
    pub fn impedance_data(
        &self,
        ws: &WaveSpeed,
        x: &Point,
        normal: &Point,
    ) -> Result<Complex64, FieldError> {
        let u = self.eval(x)?;
        let grad = self.gradient(x)?;
        let c = ws.eval(x)?;
        let dn: Complex64 = (0..3).map(|a| grad[a] * normal[a]).sum();
        Ok(dn + Complex64::new(0.0, self.frequency / c) * u)
    }

    /// Normal derivative `grad(u).n` (Neumann data).
    pub fn normal_derivative(&self, x: &Point, normal: &Point) -> Result<Complex64, FieldError> {
        let grad = self.gradient(x)?;
        Ok((0..3).map(|a| grad[a] * normal[a]).sum())
    }
}

/// Narrow Gaussian source `1e4 * exp(-1e4 |x - x0|^2)`; underflows to zero
/// far from the center.
pub fn gaussian_source(x: &Point, x0: &Point) -> f64 {
    let d2: f64 = (0..3).map(|a| (x[a] - x0[a]) * (x[a] - x0[a])).sum();
    1e4 * (-1e4 * d2).exp()
}

/// Volume source term for the Helmholtz problem.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceTerm {
    Zero,
    Gaussian { center: Point },
}

impl SourceTerm {
    pub fn eval(&self, x: &Point) -> f64 {
        match self {
            SourceTerm::Zero => 0.0,
            SourceTerm::Gaussian { center } => gaussian_source(x, center),
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, SourceTerm::Zero)
    }
}

pub fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn dist(a: &Point, b: &Point) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}
