//! Tensor-grid fields with polynomial-growth weighted norms.
//!
//! A [`GridField`] stores `K` values per node of a box grid `Π [-X_i, X_i]`.
//! Inside the box it is multilinear and reproduces node values exactly.
//! Outside the box the value at the clamped point is rescaled by
//! `(1+|x|^m)/(1+|x_c|^m)`, which keeps the extension inside the `C_m` class.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Maximum grid dimension; tensor grids beyond this are not tractable anyway.
pub const MAX_GRID_DIM: usize = 6;

/// `1 + |x|^m` with the Euclidean norm. For `m = 0` the weight is 1, so
/// `|φ|_{C_0}` is the plain sup norm.
pub fn growth_weight(x: &[f64], m: f64) -> f64 {
    if m == 0.0 {
        return 1.0;
    }
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    1.0 + r.powf(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    /// Half-widths `X_i` of the box.
    pub x_max: Vec<f64>,
    /// Node count per axis.
    pub nodes: Vec<usize>,
}

impl Grid {
    pub fn new(x_max: Vec<f64>, nodes: Vec<usize>) -> Result<Self> {
        let grid = Self { x_max, nodes };
        grid.validate()?;
        Ok(grid)
    }

    /// Same half-width and node count on every axis.
    pub fn cube(dim: usize, x_max: f64, nodes: usize) -> Result<Self> {
        Self::new(vec![x_max; dim], vec![nodes; dim])
    }

    pub fn validate(&self) -> Result<()> {
        if self.x_max.is_empty() {
            return invalid("grid must have at least one axis");
        }
        if self.x_max.len() > MAX_GRID_DIM {
            return invalid(format!("grid dimension is limited to {MAX_GRID_DIM}"));
        }
        if self.x_max.len() != self.nodes.len() {
            return invalid("grid x_max and nodes must have the same length");
        }
        if self.nodes.iter().any(|&n| n < 2) {
            return invalid("each grid axis needs at least two nodes");
        }
        if self.x_max.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            return invalid("grid half-widths must be positive");
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        2.0 * self.x_max[axis] / (self.nodes[axis] - 1) as f64
    }

    pub fn axis_coord(&self, axis: usize, i: usize) -> f64 {
        -self.x_max[axis] + i as f64 * self.spacing(axis)
    }

    /// Multi-index of flat node `k`; the last axis varies fastest.
    pub fn multi_index(&self, mut k: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dim()];
        for axis in (0..self.dim()).rev() {
            idx[axis] = k % self.nodes[axis];
            k /= self.nodes[axis];
        }
        idx
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.nodes).fold(0, |acc, (i, n)| acc * n + i)
    }

    pub fn point(&self, k: usize) -> Vec<f64> {
        self.multi_index(k)
            .iter()
            .enumerate()
            .map(|(axis, &i)| self.axis_coord(axis, i))
            .collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|k| self.point(k)).collect()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().zip(&self.x_max).all(|(v, xm)| v.abs() <= *xm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    pub grid: Grid,
    /// Values per node, `components` entries each, node-major.
    pub values: Vec<f64>,
    pub components: usize,
    pub growth_order: f64,
}

impl GridField {
    pub fn from_values(grid: Grid, components: usize, values: Vec<f64>, growth_order: f64) -> Result<Self> {
        grid.validate()?;
        if components == 0 {
            return invalid("field needs at least one component");
        }
        if values.len() != grid.len() * components {
            return invalid(format!(
                "expected {} values, got {}",
                grid.len() * components,
                values.len()
            ));
        }
        if growth_order < 0.0 {
            return invalid("growth order must be >= 0");
        }
        Ok(Self {
            grid,
            values,
            components,
            growth_order,
        })
    }

    pub fn zeros(grid: Grid, components: usize, growth_order: f64) -> Result<Self> {
        let n = grid.len() * components;
        Self::from_values(grid, components, vec![0.0; n], growth_order)
    }

    /// Samples `f` at every node.
    pub fn from_fn<F>(grid: Grid, components: usize, growth_order: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64>,
    {
        let mut values = Vec::with_capacity(grid.len() * components);
        for k in 0..grid.len() {
            let v = f(&grid.point(k));
            if v.len() != components {
                return invalid("sampling function returned the wrong number of components");
            }
            values.extend(v);
        }
        Self::from_values(grid, components, values, growth_order)
    }

    pub fn scalar_from_fn<F>(grid: Grid, growth_order: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        Self::from_fn(grid, 1, growth_order, |x| vec![f(x)])
    }

    pub fn node_value(&self, k: usize) -> &[f64] {
        &self.values[k * self.components..(k + 1) * self.components]
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.grid == other.grid
    }

    /// Interpolated value; writes `components` entries into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.grid.dim();
        debug_assert_eq!(x.len(), d);
        out.iter_mut().for_each(|o| *o = 0.0);

        let mut base = [0usize; MAX_GRID_DIM];
        let mut frac = [0f64; MAX_GRID_DIM];
        let mut clamped = [0f64; MAX_GRID_DIM];
        let mut outside = false;
        for axis in 0..d {
            let xm = self.grid.x_max[axis];
            let xc = x[axis].clamp(-xm, xm);
            outside |= xc != x[axis];
            let n = self.grid.nodes[axis];
            let mut pos = (xc + xm) / self.grid.spacing(axis);
            let near = pos.round();
            if (pos - near).abs() < 1e-10 {
                pos = near;
            }
            let i = (pos.floor() as isize).clamp(0, n as isize - 2) as usize;
            base[axis] = i;
            frac[axis] = pos - i as f64;
            clamped[axis] = xc;
        }

        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0usize;
            for axis in 0..d {
                let bit = (corner >> (d - 1 - axis)) & 1;
                w *= if bit == 1 { frac[axis] } else { 1.0 - frac[axis] };
                flat = flat * self.grid.nodes[axis] + base[axis] + bit;
            }
            if w == 0.0 {
                continue;
            }
            let v = self.node_value(flat);
            for (o, vi) in out.iter_mut().zip(v) {
                *o += w * vi;
            }
        }

        if outside && self.growth_order > 0.0 {
            let scale = growth_weight(x, self.growth_order) / growth_weight(&clamped[..d], self.growth_order);
            out.iter_mut().for_each(|o| *o *= scale);
        }
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.components];
        self.eval_into(x, &mut out);
        out
    }

    pub fn eval_scalar(&self, x: &[f64]) -> f64 {
        let mut out = [0.0];
        if self.components == 1 {
            self.eval_into(x, &mut out);
            out[0]
        } else {
            self.eval(x)[0]
        }
    }

    /// `|φ|_{C_m}`: max over nodes of `|φ(x)|_K / (1+|x|^m)`.
    pub fn weighted_norm(&self) -> f64 {
        (0..self.grid.len())
            .map(|k| {
                let v = self.node_value(k);
                let norm = if self.components == 1 {
                    v[0].abs()
                } else {
                    v.iter().map(|a| a * a).sum::<f64>().sqrt()
                };
                let x = self.grid.point(k);
                norm / growth_weight(&x, self.growth_order)
            })
            .fold(0.0, f64::max)
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn scale(&self, c: f64) -> GridField {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= c);
        out
    }

    fn zip_with(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        if !self.same_grid(other) || self.components != other.components {
            return invalid("fields live on different grids or have different component counts");
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| f(*a, *b)).collect();
        Ok(GridField { values, ..self.clone() })
    }
}

/// `|u|_{C_m} + | |v|_K |_{C_m}` for a scalar `u` and a `K`-valued `v` on one grid.
pub fn g_pair_norm(u: &GridField, v: &GridField) -> Result<f64> {
    if !u.same_grid(v) {
        return invalid("u and v must share a grid");
    }
    if u.components != 1 {
        return invalid("u must be scalar");
    }
    if u.growth_order != v.growth_order {
        return invalid("u and v must share the growth order");
    }
    Ok(u.weighted_norm() + v.weighted_norm())
}
