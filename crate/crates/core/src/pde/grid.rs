use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Minimum nodes per axis: one-sided second-derivative stencils need four.
pub const MIN_NODES_PER_AXIS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Low,
    High,
}

impl Side {
    /// Sign of the outward normal component.
    pub fn outward(self) -> f64 {
        match self {
            Side::Low => -1.0,
            Side::High => 1.0,
        }
    }

    /// Step direction pointing into the domain.
    pub fn inward_step(self) -> isize {
        match self {
            Side::Low => 1,
            Side::High => -1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NodeKind {
    Interior,
    Face,
    EdgeOrCorner,
}

/// Uniform tensor grid on a box `Π [a_i, b_i]`, nodes on the boundary
/// included. Node numbering is row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct RectGrid {
    lower: Vec<f64>,
    upper: Vec<f64>,
    dims: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
}

impl RectGrid {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, dims: Vec<usize>) -> Result<Self> {
        let n = dims.len();
        if n == 0 || lower.len() != n || upper.len() != n {
            return Err(Error::Grid("lower, upper and dims must have the same positive length".into()));
        }
        if let Some(&m) = dims.iter().find(|&&m| m < MIN_NODES_PER_AXIS) {
            return Err(Error::Grid(format!(
                "grid too small: {m} nodes on an axis, need at least {MIN_NODES_PER_AXIS}"
            )));
        }
        if let Some(i) = (0..n).find(|&i| !(upper[i] > lower[i]) || !lower[i].is_finite() || !upper[i].is_finite()) {
            return Err(Error::Grid(format!("axis {i} has an empty extent [{}, {}]", lower[i], upper[i])));
        }
        let spacing = (0..n).map(|i| (upper[i] - lower[i]) / (dims[i] - 1) as f64).collect();
        let mut strides = vec![1; n];
        for a in (0..n.saturating_sub(1)).rev() {
            strides[a] = strides[a + 1] * dims[a + 1];
        }
        Ok(RectGrid {
            lower,
            upper,
            dims,
            spacing,
            strides,
        })
    }

    /// Same number of nodes `m` on every axis.
    pub fn cube(lower: Vec<f64>, upper: Vec<f64>, m: usize) -> Result<Self> {
        let n = lower.len();
        Self::new(lower, upper, vec![m; n])
    }

    pub fn n(&self) -> usize {
        self.dims.len()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().copied().fold(0.0, f64::max)
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn center(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Radius of the largest ball about the center contained in the box.
    pub fn inradius(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(a, b)| 0.5 * (b - a))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        self.strides
            .iter()
            .zip(&self.dims)
            .map(|(&s, &m)| (node / s) % m)
            .collect()
    }

    pub fn node_of(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    #[inline]
    pub fn axis_index(&self, node: usize, axis: usize) -> usize {
        (node / self.strides[axis]) % self.dims[axis]
    }

    /// Node reached by moving `steps` along `axis`; caller guarantees it is
    /// inside the grid.
    #[inline]
    pub fn shift(&self, node: usize, axis: usize, steps: isize) -> usize {
        (node as isize + steps * self.strides[axis] as isize) as usize
    }

    pub fn coords(&self, node: usize) -> Vec<f64> {
        (0..self.n())
            .map(|a| self.lower[a] + self.axis_index(node, a) as f64 * self.spacing[a])
            .collect()
    }

    /// Boundary side of `node` along `axis`, if any.
    #[inline]
    pub fn side(&self, node: usize, axis: usize) -> Option<Side> {
        let i = self.axis_index(node, axis);
        if i == 0 {
            Some(Side::Low)
        } else if i + 1 == self.dims[axis] {
            Some(Side::High)
        } else {
            None
        }
    }

    pub fn boundary_sides(&self, node: usize) -> Vec<(usize, Side)> {
        (0..self.n()).filter_map(|a| self.side(node, a).map(|s| (a, s))).collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        (0..self.n()).any(|a| self.side(node, a).is_some())
    }

    pub fn kind(&self, node: usize) -> NodeKind {
        match self.boundary_sides(node).len() {
            0 => NodeKind::Interior,
            1 => NodeKind::Face,
            _ => NodeKind::EdgeOrCorner,
        }
    }

    /// Unit outward normal; at edges and corners the normalized average of
    /// the adjoining face normals. `None` for interior nodes.
    pub fn outward_normal(&self, node: usize) -> Option<Vec<f64>> {
        let sides = self.boundary_sides(node);
        if sides.is_empty() {
            return None;
        }
        let s = 1.0 / (sides.len() as f64).sqrt();
        let mut nu = vec![0.0; self.n()];
        for (a, side) in sides {
            nu[a] = side.outward() * s;
        }
        Some(nu)
    }

    /// Multilinear interpolation of nodal `values` at `point` (clamped to the box).
    pub fn interpolate(&self, values: &[f64], point: &[f64]) -> f64 {
        let n = self.n();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for a in 0..n {
            let s = ((point[a] - self.lower[a]) / self.spacing[a]).clamp(0.0, (self.dims[a] - 1) as f64);
            let i = (s.floor() as usize).min(self.dims[a] - 2);
            base[a] = i;
            frac[a] = s - i as f64;
        }
        let mut total = 0.0;
        for corner in 0..(1usize << n) {
            let mut w = 1.0;
            let mut node = 0;
            for a in 0..n {
                let bit = (corner >> a) & 1;
                w *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                node += (base[a] + bit) * self.strides[a];
            }
            if w != 0.0 {
                total += w * values[node];
            }
        }
        total
    }
}

/// Nodal values on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    pub grid: Arc<RectGrid>,
    pub values: Vec<f64>,
}

impl Field {
    pub fn new(grid: Arc<RectGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::Grid(format!(
                "field has {} values for {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Grid(format!("field value at node {i} is not finite")));
        }
        Ok(Field { grid, values })
    }

    pub fn from_fn(grid: Arc<RectGrid>, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(&grid.coords(i))).collect();
        Field { grid, values }
    }

    pub fn max_abs_diff(&self, other: &Field) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

fn join(v: impl IntoIterator<Item = String>) -> String {
    v.into_iter().collect::<Vec<_>>().join(",")
}

/// Field dump: a `# grid ...` header, then `i1,..,in,x1,..,xn,u` per node.
pub fn field_to_csv(field: &Field) -> String {
    let g = &field.grid;
    let mut out = String::new();
    writeln!(
        out,
        "# grid n={} dims={} origin={} spacing={}",
        g.n(),
        join(g.dims().iter().map(|d| d.to_string())),
        join(g.lower().iter().map(|x| format!("{x:?}"))),
        join(g.spacing().iter().map(|x| format!("{x:?}"))),
    )
    .unwrap();
    for (node, u) in field.values.iter().enumerate() {
        let idx = g.multi_index(node);
        let x = g.coords(node);
        writeln!(
            out,
            "{},{},{u:?}",
            join(idx.iter().map(|i| i.to_string())),
            join(x.iter().map(|v| format!("{v:?}"))),
        )
        .unwrap();
    }
    out
}
