//! Residual and Jacobian of the discretized Neumann problem on a box grid.

use std::sync::Arc;

use super::grid::{Field, RectGrid};
use super::problem::{Equation, ProblemSpec};
use super::stencil::{self, Stencil};
use crate::compound::{admissibility_margin, f_value, f_value_and_gradient, Margin};
use crate::error::{Error, Result};
use crate::par::{self, Execution};

/// Compressed-row sparse matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    /// Builds from per-row `(col, value)` lists; duplicate columns are summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < ncols);
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        SparseMatrix {
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, v)| v)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.row(i).map(|(c, v)| v * x[c]).sum()).collect()
    }

    pub(crate) fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows()).flat_map(move |i| self.row(i).map(move |(c, v)| (i, c, v)))
    }
}

/// Output of one assembly pass.
#[derive(Clone, Debug)]
pub struct Assembly {
    pub residual: Vec<f64>,
    /// `true` for rows carrying the boundary condition.
    pub boundary_rows: Vec<bool>,
    pub interior_norm: f64,
    pub boundary_norm: f64,
    /// Minimum over interior rows.
    pub margin: Margin,
    /// `max |ψ̃|` over interior rows, used to scale the interior tolerance.
    pub psi_scale: f64,
    pub jacobian: Option<SparseMatrix>,
}

impl Assembly {
    pub fn norm(&self) -> f64 {
        self.interior_norm.max(self.boundary_norm)
    }
}

pub(crate) struct RowOut {
    pub r: f64,
    pub boundary: bool,
    pub margin: Option<Margin>,
    pub psi_abs: f64,
    pub row: Vec<(usize, f64)>,
}

pub(crate) fn collect_rows(ncols: usize, rows: Vec<RowOut>, want_jacobian: bool) -> Assembly {
    let mut residual = Vec::with_capacity(rows.len());
    let mut boundary_rows = Vec::with_capacity(rows.len());
    let (mut ni, mut nb, mut psi_scale) = (0.0f64, 0.0f64, 0.0f64);
    let mut margin = Margin {
        raw: f64::INFINITY,
        scaled: f64::INFINITY,
    };
    let mut jrows = Vec::with_capacity(if want_jacobian { rows.len() } else { 0 });
    for out in rows {
        if out.boundary {
            nb = nb.max(out.r.abs());
        } else {
            ni = ni.max(out.r.abs());
        }
        if let Some(m) = out.margin {
            margin.raw = margin.raw.min(m.raw);
            margin.scaled = margin.scaled.min(m.scaled);
        }
        psi_scale = psi_scale.max(out.psi_abs);
        residual.push(out.r);
        boundary_rows.push(out.boundary);
        if want_jacobian {
            jrows.push(out.row);
        }
    }
    Assembly {
        residual,
        boundary_rows,
        interior_norm: ni,
        boundary_norm: nb,
        margin,
        psi_scale,
        jacobian: want_jacobian.then(|| SparseMatrix::from_rows(ncols, jrows)),
    }
}

fn push_scaled(row: &mut Vec<(usize, f64)>, st: &Stencil, c: f64) {
    row.extend(st.iter().map(|&(i, w)| (i, c * w)));
}

fn node_row(grid: &RectGrid, values: &[f64], node: usize, eq: &Equation, want_jacobian: bool) -> Result<RowOut> {
    let n = grid.n();
    let x = grid.coords(node);
    let u = values[node];
    let mut row = Vec::new();

    if let Some(nst) = stencil::normal_derivative(grid, node) {
        let nu = grid.outward_normal(node).expect("boundary node has a normal");
        let (phi, phi_u) = eq.phi(&x, u, &nu)?;
        if want_jacobian {
            push_scaled(&mut row, &nst, 1.0);
            row.push((node, -phi_u));
        }
        return Ok(RowOut {
            r: stencil::apply(&nst, values) - phi,
            boundary: true,
            margin: None,
            psi_abs: 0.0,
            row,
        });
    }

    let sig = &eq.prob.sig;
    let h = stencil::hessian_values(grid, values, node);
    let (f, g) = if want_jacobian {
        let (f, g) = f_value_and_gradient(&h, sig)?;
        (f, Some(g))
    } else {
        (f_value(&h, sig)?, None)
    };
    let margin = admissibility_margin(&h, sig)?;
    let p = stencil::gradient_values(grid, values, node);
    let src = eq.psi(&x, u, &p)?;

    if let Some(g) = g {
        for a in 0..n {
            push_scaled(&mut row, &stencil::second_derivative(grid, node, a), g.get(a, a));
            for b in (a + 1)..n {
                push_scaled(&mut row, &stencil::mixed_derivative(grid, node, a, b), 2.0 * g.get(a, b));
            }
        }
        row.push((node, -src.d_u));
        for (a, &dp) in src.d_p.iter().enumerate() {
            if dp != 0.0 {
                push_scaled(&mut row, &stencil::first_derivative(grid, node, a), -dp);
            }
        }
    }
    Ok(RowOut {
        r: f - src.value,
        boundary: false,
        margin: Some(margin),
        psi_abs: src.value.abs(),
        row,
    })
}

pub(crate) fn assemble_values(
    grid: &RectGrid,
    values: &[f64],
    eq: &Equation,
    want_jacobian: bool,
    exec: Execution,
) -> Result<Assembly> {
    if values.len() != grid.len() {
        return Err(Error::Grid(format!("{} values for {} nodes", values.len(), grid.len())));
    }
    if eq.prob.sig.n != grid.n() {
        return Err(Error::Grid(format!(
            "grid dimension {} does not match problem dimension {}",
            grid.n(),
            eq.prob.sig.n
        )));
    }
    let rows = par::try_map_indexed(exec, grid.len(), |node| {
        node_row(grid, values, node, eq, want_jacobian).map_err(|e| e.at_node(node))
    })?;
    Ok(collect_rows(grid.len(), rows, want_jacobian))
}

/// Residual (and optionally Jacobian) of the target problem under an
/// explicit execution policy.
pub fn assemble(field: &Field, prob: &ProblemSpec, want_jacobian: bool, exec: Execution) -> Result<Assembly> {
    assemble_values(&field.grid, &field.values, &Equation::target(prob), want_jacobian, exec)
}

/// Interior rows `F(D²u) - ψ̃(x,u,Du)`, boundary rows `u_ν - φ(x,u)`.
pub fn residual(field: &Field, prob: &ProblemSpec) -> Result<Field> {
    let a = assemble_values(&field.grid, &field.values, &Equation::target(prob), false, Execution::default())?;
    Ok(Field {
        grid: Arc::clone(&field.grid),
        values: a.residual,
    })
}

/// Linearization of [`residual`] at `field`.
pub fn jacobian(field: &Field, prob: &ProblemSpec) -> Result<SparseMatrix> {
    let a = assemble_values(&field.grid, &field.values, &Equation::target(prob), true, Execution::default())?;
    Ok(a.jacobian.expect("jacobian requested"))
}
