//! Uniform periodic grids on the 2-torus and the conservative difference
//! operators used throughout the crate.
//!
//! All fields are cell-centred and stored row-major (`index = j * nx + i`,
//! `i` along x). Inner products and norms use cell-sum quadrature, under
//! which [`divergence`] is exactly the negative adjoint of [`gradient`] and
//! [`div_flux`] telescopes to a zero cell sum.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Smallest admissible cell count per axis.
pub const MIN_CELLS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusGrid {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
}

impl TorusGrid {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Self> {
        if nx < MIN_CELLS || ny < MIN_CELLS {
            return Err(Error::InvalidGrid(format!(
                "cell counts {nx}x{ny} below minimum {MIN_CELLS}"
            )));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "extents must be positive and finite, got lx={lx}, ly={ly}"
            )));
        }
        Ok(Self { nx, ny, lx, ly })
    }

    /// Unit torus `[0,1)^2` with `n` cells per side.
    pub fn unit(n: usize) -> Result<Self> {
        Self::new(n, n, 1.0, 1.0)
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }
    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn cell_area(&self) -> f64 {
        self.hx() * self.hy()
    }
    pub fn area(&self) -> f64 {
        self.lx * self.ly
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// Cell centre of `(i, j)`.
    #[inline]
    pub fn center(&self, i: usize, j: usize) -> (f64, f64) {
        ((i as f64 + 0.5) * self.hx(), (j as f64 + 0.5) * self.hy())
    }

    #[inline]
    fn east(&self, i: usize) -> usize {
        if i + 1 == self.nx {
            0
        } else {
            i + 1
        }
    }
    #[inline]
    fn west(&self, i: usize) -> usize {
        if i == 0 {
            self.nx - 1
        } else {
            i - 1
        }
    }
    #[inline]
    fn north(&self, j: usize) -> usize {
        if j + 1 == self.ny {
            0
        } else {
            j + 1
        }
    }
    #[inline]
    fn south(&self, j: usize) -> usize {
        if j == 0 {
            self.ny - 1
        } else {
            j - 1
        }
    }

    /// True when both grids describe the same discrete torus.
    pub fn same_as(&self, other: &TorusGrid) -> bool {
        self == other
    }
}

fn check_same(a: &TorusGrid, b: &TorusGrid) -> Result<()> {
    if a.same_as(b) {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

/// Scalar quantity sampled at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: TorusGrid,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::FieldShape {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(k) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("scalar field value at index {k}")));
        }
        Ok(Self { grid, values })
    }

    pub(crate) fn from_vec_unchecked(grid: TorusGrid, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), grid.len());
        Self { grid, values }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: TorusGrid, c: f64) -> Self {
        Self {
            grid,
            values: vec![c; grid.len()],
        }
    }

    /// Samples `f(x, y)` at cell centres.
    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (x, y) = grid.center(i, j);
                values.push(f(x, y));
            }
        }
        Self { grid, values }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Plain sum of cell values.
    pub fn cell_sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * other`
    pub fn add_scaled(&self, c: f64, other: &ScalarField) -> Result<Self> {
        check_same(&self.grid, &other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(a, b)| a + c * b)
                .collect(),
        })
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        self.add_scaled(-1.0, other)
    }

    /// Periodic translation: output `(i, j)` takes input `(i - di, j - dj)`.
    pub fn shifted(&self, di: usize, dj: usize) -> Self {
        let g = self.grid;
        let mut out = vec![0.0; g.len()];
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let si = (i + g.nx() - di % g.nx()) % g.nx();
                let sj = (j + g.ny() - dj % g.ny()) % g.ny();
                out[g.index(i, j)] = self.values[g.index(si, sj)];
            }
        }
        Self { grid: g, values: out }
    }
}

/// Two-component vector quantity sampled at cell centres.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2 {
    grid: TorusGrid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl VectorField2 {
    pub fn new(grid: TorusGrid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        for comp in [&x, &y] {
            if comp.len() != grid.len() {
                return Err(Error::FieldShape {
                    expected: grid.len(),
                    got: comp.len(),
                });
            }
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("vector field component".into()));
        }
        Ok(Self { grid, x, y })
    }

    pub(crate) fn from_vecs_unchecked(grid: TorusGrid, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { grid, x, y }
    }

    pub fn zeros(grid: TorusGrid) -> Self {
        Self {
            grid,
            x: vec![0.0; grid.len()],
            y: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: TorusGrid, vx: f64, vy: f64) -> Self {
        Self {
            grid,
            x: vec![vx; grid.len()],
            y: vec![vy; grid.len()],
        }
    }

    pub fn from_fn(grid: TorusGrid, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        let mut x = Vec::with_capacity(grid.len());
        let mut y = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let (px, py) = grid.center(i, j);
                let (vx, vy) = f(px, py);
                x.push(vx);
                y.push(vy);
            }
        }
        Self { grid, x, y }
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }
    pub fn x(&self) -> &[f64] {
        &self.x
    }
    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn is_finite(&self) -> bool {
        self.x.iter().chain(&self.y).all(|v| v.is_finite())
    }

    /// Pointwise Euclidean magnitude.
    pub fn magnitude(&self) -> ScalarField {
        ScalarField::from_vec_unchecked(
            self.grid,
            self.x
                .iter()
                .zip(&self.y)
                .map(|(a, b)| a.hypot(*b))
                .collect(),
        )
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            x: self.x.iter().map(|v| c * v).collect(),
            y: self.y.iter().map(|v| c * v).collect(),
        }
    }

    pub fn shifted(&self, di: usize, dj: usize) -> Self {
        let sx = ScalarField::from_vec_unchecked(self.grid, self.x.clone()).shifted(di, dj);
        let sy = ScalarField::from_vec_unchecked(self.grid, self.y.clone()).shifted(di, dj);
        Self {
            grid: self.grid,
            x: sx.values,
            y: sy.values,
        }
    }
}

/// Centred second-order periodic gradient.
pub fn gradient(f: &ScalarField) -> VectorField2 {
    let g = f.grid;
    let (rx, ry) = (0.5 / g.hx(), 0.5 / g.hy());
    let v = &f.values;
    let mut gx = vec![0.0; g.len()];
    let mut gy = vec![0.0; g.len()];
    for j in 0..g.ny() {
        let (jn, js) = (g.north(j), g.south(j));
        for i in 0..g.nx() {
            let k = g.index(i, j);
            gx[k] = (v[g.index(g.east(i), j)] - v[g.index(g.west(i), j)]) * rx;
            gy[k] = (v[g.index(i, jn)] - v[g.index(i, js)]) * ry;
        }
    }
    VectorField2::from_vecs_unchecked(g, gx, gy)
}

/// Centred periodic divergence; the exact negative adjoint of [`gradient`].
pub fn divergence(v: &VectorField2) -> ScalarField {
    let g = v.grid;
    let (rx, ry) = (0.5 / g.hx(), 0.5 / g.hy());
    let mut out = vec![0.0; g.len()];
    for j in 0..g.ny() {
        let (jn, js) = (g.north(j), g.south(j));
        for i in 0..g.nx() {
            let dx = (v.x[g.index(g.east(i), j)] - v.x[g.index(g.west(i), j)]) * rx;
            let dy = (v.y[g.index(i, jn)] - v.y[g.index(i, js)]) * ry;
            out[g.index(i, j)] = dx + dy;
        }
    }
    ScalarField::from_vec_unchecked(g, out)
}

/// Face-based discretisation of `z -> div(g grad z)`.
///
/// Face coefficients are arithmetic means of the two adjacent cells. The
/// face weights are stored pre-divided by `h^2`, so [`apply`](Self::apply)
/// is a pure stencil sweep; the operator is symmetric and negative
/// semi-definite with constants in its kernel.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    grid: TorusGrid,
    /// weight of the face between `(i, j)` and `(i + 1, j)`
    east: Vec<f64>,
    /// weight of the face between `(i, j)` and `(i, j + 1)`
    north: Vec<f64>,
}

impl DiffusionOperator {
    /// Builds the operator for coefficient `g + shift` (the shift is the
    /// regularisation ν). Rejects negative or non-finite coefficients.
    pub fn new(g: &ScalarField, shift: f64) -> Result<Self> {
        if let Some(k) = g.values.iter().position(|v| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::NegativeCoefficient {
                index: k,
                value: g.values[k],
            });
        }
        if !(shift >= 0.0 && shift.is_finite()) {
            return Err(Error::NegativeCoefficient {
                index: usize::MAX,
                value: shift,
            });
        }
        let grid = g.grid;
        let (wx, wy) = (1.0 / (grid.hx() * grid.hx()), 1.0 / (grid.hy() * grid.hy()));
        let v = &g.values;
        let mut east = vec![0.0; grid.len()];
        let mut north = vec![0.0; grid.len()];
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let k = grid.index(i, j);
                let ke = grid.index(grid.east(i), j);
                let kn = grid.index(i, grid.north(j));
                east[k] = (0.5 * (v[k] + v[ke]) + shift) * wx;
                north[k] = (0.5 * (v[k] + v[kn]) + shift) * wy;
            }
        }
        Ok(Self { grid, east, north })
    }

    pub fn grid(&self) -> &TorusGrid {
        &self.grid
    }

    /// `out = div(g grad z)`; flux differences telescope so `sum(out)` is
    /// zero up to roundoff.
    pub fn apply(&self, z: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let (nx, ny) = (g.nx(), g.ny());
        for j in 0..ny {
            let js = g.south(j);
            for i in 0..nx {
                let k = j * nx + i;
                let kw = j * nx + g.west(i);
                let ke = j * nx + g.east(i);
                let ks = js * nx + i;
                let kn = g.north(j) * nx + i;
                let fe = self.east[k] * (z[ke] - z[k]);
                let fw = self.east[kw] * (z[k] - z[kw]);
                let fnn = self.north[k] * (z[kn] - z[k]);
                let fs = self.north[ks] * (z[k] - z[ks]);
                out[k] = (fe - fw) + (fnn - fs);
            }
        }
    }

    /// Diagonal of the operator (non-positive).
    pub fn diagonal(&self) -> Vec<f64> {
        let g = &self.grid;
        let mut d = vec![0.0; g.len()];
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let k = g.index(i, j);
                d[k] = -(self.east[k]
                    + self.east[g.index(g.west(i), j)]
                    + self.north[k]
                    + self.north[g.index(i, g.south(j))]);
            }
        }
        d
    }
}

/// Conservative `div(g grad z)` with arithmetic-mean face coefficients.
pub fn div_flux(g: &ScalarField, z: &ScalarField) -> Result<ScalarField> {
    check_same(&g.grid, &z.grid)?;
    let op = DiffusionOperator::new(g, 0.0)?;
    let mut out = vec![0.0; z.grid.len()];
    op.apply(&z.values, &mut out);
    Ok(ScalarField::from_vec_unchecked(z.grid, out))
}

/// Cell-sum inner product `sum f g hx hy`.
pub fn inner_product(f: &ScalarField, g: &ScalarField) -> f64 {
    debug_assert!(f.grid.same_as(&g.grid));
    f.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>() * f.grid.cell_area()
}

pub fn vector_inner_product(u: &VectorField2, v: &VectorField2) -> f64 {
    debug_assert!(u.grid.same_as(&v.grid));
    let sx: f64 = u.x.iter().zip(&v.x).map(|(a, b)| a * b).sum();
    let sy: f64 = u.y.iter().zip(&v.y).map(|(a, b)| a * b).sum();
    (sx + sy) * u.grid.cell_area()
}

pub fn l2_norm(f: &ScalarField) -> f64 {
    inner_product(f, f).sqrt()
}

pub fn vector_l2_norm(v: &VectorField2) -> f64 {
    vector_inner_product(v, v).sqrt()
}

pub fn h1_seminorm(f: &ScalarField) -> f64 {
    vector_l2_norm(&gradient(f))
}

pub fn mean_value(f: &ScalarField) -> f64 {
    f.cell_sum() * f.grid.cell_area() / f.grid.area()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_spacings() {
        let g = TorusGrid::new(64, 64, 1.0, 1.0).unwrap();
        assert_eq!(g.hx(), 1.0 / 64.0);
        assert_eq!(g.hy(), 1.0 / 64.0);
        let g = TorusGrid::new(4, 8, 2.0, 1.0).unwrap();
        assert_eq!(g.hx(), 0.5);
        assert_eq!(g.hy(), 0.125);
    }

    #[test]
    fn grid_rejects_bad_input() {
        assert!(TorusGrid::new(3, 4, 1.0, 1.0).is_err());
        assert!(TorusGrid::new(4, 4, 0.0, 1.0).is_err());
        assert!(TorusGrid::new(4, 4, 1.0, -2.0).is_err());
        assert!(TorusGrid::new(4, 4, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn field_rejects_wrong_length_and_nan() {
        let g = TorusGrid::unit(4).unwrap();
        assert!(ScalarField::new(g, vec![0.0; 15]).is_err());
        let mut v = vec![0.0; 16];
        v[3] = f64::NAN;
        assert!(ScalarField::new(g, v).is_err());
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let g = TorusGrid::new(8, 6, 1.3, 0.7).unwrap();
        let grad = gradient(&ScalarField::constant(g, 2.5));
        assert!(grad.x().iter().chain(grad.y()).all(|v| *v == 0.0));
    }

    #[test]
    fn gradient_spike_stencil() {
        let g = TorusGrid::unit(8).unwrap();
        let mut f = ScalarField::zeros(g);
        f.values_mut()[g.index(3, 4)] = 1.0;
        let grad = gradient(&f);
        let h = g.hx();
        // d/dx at (2,4) sees the spike as its east neighbour, at (4,4) as west
        assert_eq!(grad.x()[g.index(2, 4)], 1.0 / (2.0 * h));
        assert_eq!(grad.x()[g.index(4, 4)], -1.0 / (2.0 * h));
        assert_eq!(grad.x()[g.index(3, 4)], 0.0);
        let nonzero = grad.x().iter().filter(|v| **v != 0.0).count();
        assert_eq!(nonzero, 2);
    }

    #[test]
    fn gradient_of_sine_is_second_order() {
        let lx = 2.0;
        let mut errs = Vec::new();
        for n in [32usize, 64, 128] {
            let g = TorusGrid::new(n, 4, lx, 1.0).unwrap();
            let k = 2.0 * PI / lx;
            let f = ScalarField::from_fn(g, |x, _| (k * x).sin());
            let grad = gradient(&f);
            let mut err: f64 = 0.0;
            for j in 0..g.ny() {
                for i in 0..g.nx() {
                    let (x, _) = g.center(i, j);
                    err = err.max((grad.x()[g.index(i, j)] - k * (k * x).cos()).abs());
                }
            }
            errs.push(err);
        }
        for w in errs.windows(2) {
            let rate = (w[0] / w[1]).log2();
            assert!((rate - 2.0).abs() < 0.05, "rate {rate}");
        }
    }

    #[test]
    fn divergence_of_constant_vanishes() {
        let g = TorusGrid::unit(8).unwrap();
        let d = divergence(&VectorField2::constant(g, 1.5, -2.0));
        assert!(d.values().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn laplacian_of_trig_product() {
        // div(grad f) is the wide-stencil Laplacian; exact symbol is
        // -(sin(k h)/h)^2 per axis, so the error against -2 k^2 f is O(h^2)
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let g = TorusGrid::unit(n).unwrap();
            let k = 2.0 * PI;
            let f = ScalarField::from_fn(g, |x, y| (k * x).sin() * (k * y).sin());
            let lap = divergence(&gradient(&f));
            let exact = f.scaled(-2.0 * k * k);
            errs.push(lap.sub(&exact).unwrap().max_abs());
        }
        for w in errs.windows(2) {
            assert!(((w[0] / w[1]).log2() - 2.0).abs() < 0.1);
        }
    }

    #[test]
    fn div_flux_constant_coefficient_is_five_point_laplacian() {
        let g = TorusGrid::new(6, 5, 1.0, 2.0).unwrap();
        let z = ScalarField::from_fn(g, |x, y| (3.0 * x).sin() + x * y);
        let out = div_flux(&ScalarField::constant(g, 1.0), &z).unwrap();
        let (hx, hy) = (g.hx(), g.hy());
        for j in 0..g.ny() {
            for i in 0..g.nx() {
                let c = z.at(i, j);
                let lap = (z.at((i + 1) % 6, j) - 2.0 * c + z.at((i + 5) % 6, j)) / (hx * hx)
                    + (z.at(i, (j + 1) % 5) - 2.0 * c + z.at(i, (j + 4) % 5)) / (hy * hy);
                assert!((out.at(i, j) - lap).abs() <= 1e-12 * lap.abs().max(1.0));
            }
        }
    }

    #[test]
    fn div_flux_zero_coefficient_and_negative_rejection() {
        let g = TorusGrid::unit(8).unwrap();
        let z = ScalarField::from_fn(g, |x, y| x * x - y);
        let out = div_flux(&ScalarField::zeros(g), &z).unwrap();
        assert!(out.values().iter().all(|v| *v == 0.0));
        let mut neg = ScalarField::constant(g, 1.0);
        neg.values_mut()[5] = -1e-3;
        assert!(matches!(
            div_flux(&neg, &z),
            Err(Error::NegativeCoefficient { index: 5, .. })
        ));
    }

    #[test]
    fn norms_of_simple_fields() {
        let g = TorusGrid::unit(16).unwrap();
        let c = ScalarField::constant(g, -3.0);
        assert!((l2_norm(&c) - 3.0).abs() < 1e-14);
        assert!((mean_value(&c) + 3.0).abs() < 1e-14);
        let g = TorusGrid::unit(256).unwrap();
        let s = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        assert!((l2_norm(&s) - 0.5f64.sqrt()).abs() < 1e-12);
        let grad = gradient(&ScalarField::from_fn(g, |x, y| (x * 7.0).exp() * y));
        let gx = ScalarField::new(g, grad.x().to_vec()).unwrap();
        assert!(mean_value(&gx).abs() < 1e-10);
    }

    #[test]
    fn h1_of_sine() {
        // |grad sin(2 pi x)| integrates to 2 pi^2; discrete symbol sin(kh)/h
        let g = TorusGrid::unit(512).unwrap();
        let s = ScalarField::from_fn(g, |x, _| (2.0 * PI * x).sin());
        let expect = (2.0 * PI * PI).sqrt();
        assert!((h1_seminorm(&s) - expect).abs() / expect < 1e-3);
    }
}
