//! Finite-difference stencils for `Du` and `D²u`.
//!
//! Central differences in the interior; along an axis on which the node sits
//! on the boundary, second-order one-sided stencils pointing inward. Mixed
//! derivatives are tensor products of the two first-derivative stencils, so
//! every stencil is exact on quadratics.

use smallvec::SmallVec;

use super::grid::{Field, RectGrid};
use crate::error::{Error, Result};
use crate::symfun::SymMatrix;

/// `(node, weight)` pairs.
pub type Stencil = SmallVec<[(usize, f64); 9]>;

pub fn first_derivative(grid: &RectGrid, node: usize, axis: usize) -> Stencil {
    let h = grid.spacing()[axis];
    let mut s = Stencil::new();
    match grid.side(node, axis) {
        None => {
            s.push((grid.shift(node, axis, 1), 0.5 / h));
            s.push((grid.shift(node, axis, -1), -0.5 / h));
        }
        Some(side) => {
            let d = side.inward_step();
            // derivative along +axis; the inward direction is d
            let sgn = d as f64;
            s.push((node, sgn * -1.5 / h));
            s.push((grid.shift(node, axis, d), sgn * 2.0 / h));
            s.push((grid.shift(node, axis, 2 * d), sgn * -0.5 / h));
        }
    }
    s
}

pub fn second_derivative(grid: &RectGrid, node: usize, axis: usize) -> Stencil {
    let h2 = grid.spacing()[axis].powi(2);
    let mut s = Stencil::new();
    match grid.side(node, axis) {
        None => {
            s.push((grid.shift(node, axis, -1), 1.0 / h2));
            s.push((node, -2.0 / h2));
            s.push((grid.shift(node, axis, 1), 1.0 / h2));
        }
        Some(side) => {
            let d = side.inward_step();
            s.push((node, 2.0 / h2));
            s.push((grid.shift(node, axis, d), -5.0 / h2));
            s.push((grid.shift(node, axis, 2 * d), 4.0 / h2));
            s.push((grid.shift(node, axis, 3 * d), -1.0 / h2));
        }
    }
    s
}

/// `∂²/∂x_a∂x_b`, `a != b`.
pub fn mixed_derivative(grid: &RectGrid, node: usize, a: usize, b: usize) -> Stencil {
    let sa = first_derivative(grid, node, a);
    let mut out = Stencil::new();
    for &(na, wa) in &sa {
        // the b-stencil is taken at the shifted node, with the same
        // one-sided/central choice as at `node` (sides along b don't change
        // when moving along a)
        for (nb, wb) in first_derivative(grid, na, b) {
            out.push((nb, wa * wb));
        }
    }
    out
}

/// Outward normal derivative stencil at a boundary node (averaged normal at
/// edges and corners). `None` for interior nodes.
pub fn normal_derivative(grid: &RectGrid, node: usize) -> Option<Stencil> {
    let sides = grid.boundary_sides(node);
    if sides.is_empty() {
        return None;
    }
    let s = 1.0 / (sides.len() as f64).sqrt();
    let mut out = Stencil::new();
    for (axis, side) in sides {
        for (nd, w) in first_derivative(grid, node, axis) {
            out.push((nd, side.outward() * s * w));
        }
    }
    Some(out)
}

#[inline]
pub fn apply(stencil: &Stencil, values: &[f64]) -> f64 {
    stencil.iter().map(|&(i, w)| w * values[i]).sum()
}

fn check_node(grid: &RectGrid, node: usize) -> Result<()> {
    if node >= grid.len() {
        return Err(Error::IndexOutOfRange {
            index: node,
            len: grid.len(),
        });
    }
    Ok(())
}

pub(crate) fn hessian_values(grid: &RectGrid, values: &[f64], node: usize) -> SymMatrix {
    let n = grid.n();
    SymMatrix::from_fn(n, |a, b| {
        if a == b {
            apply(&second_derivative(grid, node, a), values)
        } else {
            apply(&mixed_derivative(grid, node, a, b), values)
        }
    })
}

pub(crate) fn gradient_values(grid: &RectGrid, values: &[f64], node: usize) -> Vec<f64> {
    (0..grid.n())
        .map(|a| apply(&first_derivative(grid, node, a), values))
        .collect()
}

/// Discrete `D²u` at `node`.
pub fn hessian_at(field: &Field, node: usize) -> Result<SymMatrix> {
    check_node(&field.grid, node)?;
    Ok(hessian_values(&field.grid, &field.values, node))
}

/// Discrete `Du` at `node`.
pub fn gradient_at(field: &Field, node: usize) -> Result<Vec<f64>> {
    check_node(&field.grid, node)?;
    Ok(gradient_values(&field.grid, &field.values, node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::Arc;

    fn grid3(m: usize) -> Arc<RectGrid> {
        Arc::new(RectGrid::cube(vec![0.0, -0.5, 0.2], vec![1.0, 0.7, 1.3], m).unwrap())
    }

    #[test]
    fn quadratics_are_exact_everywhere() {
        let g = grid3(6);
        let f = Field::from_fn(g.clone(), |x| x[0] * x[0]);
        let b = Field::from_fn(g.clone(), |x| x[0] * x[1]);
        for node in 0..g.len() {
            let h = hessian_at(&f, node).unwrap();
            let expect = SymMatrix::from_diagonal(&[2.0, 0.0, 0.0]);
            for i in 0..3 {
                for j in 0..3 {
                    assert!((h.get(i, j) - expect.get(i, j)).abs() < 1e-9, "node {node}");
                }
            }
            let hb = hessian_at(&b, node).unwrap();
            assert!((hb.get(0, 1) - 1.0).abs() < 1e-11);
            assert!(hb.get(0, 0).abs() < 1e-9 && hb.get(2, 2).abs() < 1e-9);
        }
    }

    #[test]
    fn gradient_exact_on_quadratics() {
        let g = grid3(5);
        let cases: [(&dyn Fn(&[f64]) -> f64, &dyn Fn(&[f64]) -> Vec<f64>); 3] = [
            (&|x| 2.0 * x[0] - x[2] + 0.5, &|_| vec![2.0, 0.0, -1.0]),
            (&|x| x[1] * x[1], &|x| vec![0.0, 2.0 * x[1], 0.0]),
            (&|x| x[0] * x[2] + x[1], &|x| vec![x[2], 1.0, x[0]]),
        ];
        for (f, df) in cases {
            let field = Field::from_fn(g.clone(), f);
            for node in 0..g.len() {
                let got = gradient_at(&field, node).unwrap();
                let want = df(&g.coords(node));
                for a in 0..3 {
                    assert!((got[a] - want[a]).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn second_derivative_truncation_bound() {
        // h²/12 · max|u''''| with u = sin(x1): relative bound 2.5e-4 at h = 0.05
        let g = Arc::new(RectGrid::new(vec![0.5, 0.0], vec![1.5, 1.0], vec![21, 5]).unwrap());
        let f = Field::from_fn(g.clone(), |x| x[0].sin());
        for node in 0..g.len() {
            if g.side(node, 0).is_some() {
                continue;
            }
            let x = g.coords(node)[0];
            let uxx = hessian_at(&f, node).unwrap().get(0, 0);
            assert!((uxx + x.sin()).abs() <= 2.5e-4 * x.sin().abs());
        }
    }

    #[test]
    fn normal_derivative_of_linear() {
        let g = grid3(5);
        let f = Field::from_fn(g.clone(), |x| 3.0 * x[0] - 2.0 * x[1] + x[2]);
        for node in 0..g.len() {
            if let (Some(st), Some(nu)) = (normal_derivative(&g, node), g.outward_normal(node)) {
                let want = 3.0 * nu[0] - 2.0 * nu[1] + nu[2];
                assert!((apply(&st, &f.values) - want).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn out_of_range_node() {
        let g = grid3(5);
        let f = Field::from_fn(g.clone(), |_| 0.0);
        assert!(hessian_at(&f, g.len()).is_err());
    }
}
