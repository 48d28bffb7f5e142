//! Finite-difference grids over the patch union and fields that live on them.
//!
//! Every patch carries its own uniform node set including both endpoints, so
//! each interior interface holds two collocated degrees of freedom: the left
//! trace (last node of patch `i`) and the right trace (first node of patch
//! `i + 1`). Fields store both traces and never average them.

use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::landscape::Landscape;
use crate::scalar::Scalar;

/// How finely to resolve each patch.
#[derive(Debug, Clone, PartialEq)]
pub enum Resolution<T> {
    /// Target spacing; each patch gets `round(length / h)` subintervals.
    Spacing(T),
    /// The same number of subintervals in every patch.
    Uniform(usize),
    /// Explicit subinterval counts, one per patch.
    PerPatch(Vec<usize>),
}

pub const MIN_SUBINTERVALS: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    boundaries: Vec<T>,
    counts: Vec<usize>,
    offsets: Vec<usize>,
}

pub fn build_grid<T: Scalar>(landscape: &Landscape<T>, resolution: &Resolution<T>) -> Result<Grid<T>> {
    let n = landscape.n();
    let counts = match resolution {
        Resolution::Spacing(h) => {
            if !(*h > T::zero()) {
                return Err(Error::validation("resolution", "spacing must be positive"));
            }
            let mut counts = Vec::with_capacity(n);
            for i in 0..n {
                let len = landscape.patch_length(i);
                let ratio = len / *h;
                // allow for rounding in len/h
                if ratio < T::lit(MIN_SUBINTERVALS as f64) * (T::one() - T::lit(1e-9)) {
                    return Err(Error::GridTooCoarse {
                        patch: i,
                        length: len.to_f64().unwrap_or(f64::NAN),
                    });
                }
                counts.push(ratio.round().to_usize().unwrap_or(MIN_SUBINTERVALS));
            }
            counts
        }
        Resolution::Uniform(m) => vec![*m; n],
        Resolution::PerPatch(c) => {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    what: "resolution.per_patch",
                    expected: n,
                    got: c.len(),
                });
            }
            c.clone()
        }
    };
    Grid::from_counts(landscape.boundaries().to_vec(), counts)
}

impl<T: Scalar> Grid<T> {
    fn from_counts(boundaries: Vec<T>, counts: Vec<usize>) -> Result<Self> {
        for (i, &c) in counts.iter().enumerate() {
            if c < MIN_SUBINTERVALS {
                return Err(Error::GridTooCoarse {
                    patch: i,
                    length: (boundaries[i + 1] - boundaries[i]).to_f64().unwrap_or(f64::NAN),
                });
            }
        }
        let mut offsets = Vec::with_capacity(counts.len() + 1);
        let mut acc = 0;
        for &c in &counts {
            offsets.push(acc);
            acc += c + 1;
        }
        offsets.push(acc);
        Ok(Self {
            boundaries,
            counts,
            offsets,
        })
    }

    /// The same subdivision laid over different patch boundaries.
    pub fn with_boundaries(&self, boundaries: Vec<T>) -> Result<Self> {
        let landscape = Landscape::new(boundaries)?;
        if landscape.n() != self.n() {
            return Err(Error::GridMismatch);
        }
        Self::from_counts(landscape.boundaries().to_vec(), self.counts.clone())
    }

    pub fn n(&self) -> usize {
        self.counts.len()
    }

    pub fn boundaries(&self) -> &[T] {
        &self.boundaries
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn subintervals(&self, patch: usize) -> usize {
        self.counts[patch]
    }

    pub fn spacing(&self, patch: usize) -> T {
        (self.boundaries[patch + 1] - self.boundaries[patch]) / T::from_usize_lossy(self.counts[patch])
    }

    pub fn min_spacing(&self) -> T {
        (0..self.n()).map(|i| self.spacing(i)).fold(T::infinity(), T::min)
    }

    pub fn max_spacing(&self) -> T {
        (0..self.n()).map(|i| self.spacing(i)).fold(T::zero(), T::max)
    }

    pub fn node(&self, patch: usize, j: usize) -> T {
        if j == self.counts[patch] {
            self.boundaries[patch + 1]
        } else {
            self.boundaries[patch] + T::from_usize_lossy(j) * self.spacing(patch)
        }
    }

    /// Index of node `j` of `patch` among all degrees of freedom.
    pub fn dof(&self, patch: usize, j: usize) -> usize {
        self.offsets[patch] + j
    }

    pub fn patch_range(&self, patch: usize) -> std::ops::Range<usize> {
        self.offsets[patch]..self.offsets[patch + 1]
    }

    /// Total number of degrees of freedom, both traces counted.
    pub fn total_dofs(&self) -> usize {
        self.offsets[self.n()]
    }

    /// Degrees of freedom once right traces are eliminated.
    pub fn reduced_dofs(&self) -> usize {
        self.counts.iter().sum::<usize>() + 1
    }

    /// Reduced index of node `j` of `patch`. Right traces map onto the left
    /// trace of the same interface.
    pub fn reduced_index(&self, patch: usize, j: usize) -> usize {
        let before: usize = self.counts[..patch].iter().sum();
        before + j
    }

    /// Patch that owns reduced index `r` (interface DOFs belong to the left patch).
    pub fn reduced_owner(&self, r: usize) -> usize {
        let mut acc = 0;
        for (i, &c) in self.counts.iter().enumerate() {
            acc += c;
            if r <= acc {
                return i;
            }
        }
        self.n() - 1
    }

    /// Trapezoid weight of every degree of freedom within its patch.
    pub fn quadrature(&self) -> Vec<T> {
        let half = T::lit(0.5);
        let mut q = Vec::with_capacity(self.total_dofs());
        for i in 0..self.n() {
            let h = self.spacing(i);
            let m = self.counts[i];
            for j in 0..=m {
                q.push(if j == 0 || j == m { half * h } else { h });
            }
        }
        q
    }

    /// Patch index and coordinate of every degree of freedom.
    pub fn nodes(&self) -> Vec<(usize, T)> {
        let mut out = Vec::with_capacity(self.total_dofs());
        for i in 0..self.n() {
            for j in 0..=self.counts[i] {
                out.push((i, self.node(i, j)));
            }
        }
        out
    }

    /// Multiplier linking every degree of freedom to its reduced index:
    /// `u[dof] = multiplier[dof] * reduced[reduced_index]`.
    pub fn reduction_map(&self, p: &[T]) -> Result<(Vec<usize>, Vec<T>)> {
        if p.len() + 1 != self.n() {
            return Err(Error::DimensionMismatch {
                what: "jump ratios",
                expected: self.n() - 1,
                got: p.len(),
            });
        }
        let mut index = Vec::with_capacity(self.total_dofs());
        let mut mult = Vec::with_capacity(self.total_dofs());
        let mut base = 0;
        for i in 0..self.n() {
            for j in 0..=self.counts[i] {
                index.push(base + j);
                mult.push(if j == 0 && i > 0 { p[i - 1] } else { T::one() });
            }
            base += self.counts[i];
        }
        Ok((index, mult))
    }
}

/// A function sampled at every degree of freedom of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseField<T> {
    grid: Grid<T>,
    values: Vec<T>,
}

impl<T: Scalar> PiecewiseField<T> {
    pub fn new(grid: Grid<T>, values: Vec<T>) -> Result<Self> {
        if values.len() != grid.total_dofs() {
            return Err(Error::DimensionMismatch {
                what: "field values",
                expected: grid.total_dofs(),
                got: values.len(),
            });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: &Grid<T>) -> Self {
        Self {
            values: vec![T::zero(); grid.total_dofs()],
            grid: grid.clone(),
        }
    }

    pub fn from_fn(grid: &Grid<T>, mut f: impl FnMut(usize, T) -> T) -> Self {
        let values = grid.nodes().into_iter().map(|(i, x)| f(i, x)).collect();
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Builds a field from `f(patch, local_node_index)`.
    pub fn from_fn_indexed(grid: &Grid<T>, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut values = Vec::with_capacity(grid.total_dofs());
        for i in 0..grid.n() {
            for j in 0..=grid.counts[i] {
                values.push(f(i, j));
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    /// Constant `c[i]` on patch `i`.
    pub fn piecewise_constant(grid: &Grid<T>, c: &[T]) -> Result<Self> {
        if c.len() != grid.n() {
            return Err(Error::DimensionMismatch {
                what: "patch constants",
                expected: grid.n(),
                got: c.len(),
            });
        }
        Ok(Self::from_fn(grid, |i, _| c[i]))
    }

    /// Expands a reduced vector using the jump ratios `p`.
    pub fn from_reduced(grid: &Grid<T>, p: &[T], reduced: &[T]) -> Result<Self> {
        if reduced.len() != grid.reduced_dofs() {
            return Err(Error::DimensionMismatch {
                what: "reduced vector",
                expected: grid.reduced_dofs(),
                got: reduced.len(),
            });
        }
        let (index, mult) = grid.reduction_map(p)?;
        let values = index.iter().zip(&mult).map(|(&r, &c)| c * reduced[r]).collect();
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    /// Reduced vector: every node except the right traces.
    pub fn to_reduced(&self) -> Vec<T> {
        let mut out = Vec::with_capacity(self.grid.reduced_dofs());
        for i in 0..self.grid.n() {
            let start = if i == 0 { 0 } else { 1 };
            out.extend_from_slice(&self.patch(i)[start..]);
        }
        out
    }

    pub fn grid(&self) -> &Grid<T> {
        &self.grid
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn patch(&self, i: usize) -> &[T] {
        &self.values[self.grid.patch_range(i)]
    }

    /// `value(x_i⁻)`, the trace from patch `i` at its right end.
    pub fn left_trace(&self, interface: usize) -> T {
        *self.patch(interface).last().expect("non-empty patch")
    }

    /// `value(x_i⁺)`, the trace from patch `i + 1` at its left end.
    pub fn right_trace(&self, interface: usize) -> T {
        self.patch(interface + 1)[0]
    }

    pub fn is_jump_consistent(&self, p: &[T], rel_tol: T) -> bool {
        p.len() + 1 == self.grid.n()
            && p.iter().enumerate().all(|(i, &pi)| {
                let expect = pi * self.left_trace(i);
                (self.right_trace(i) - expect).abs() <= rel_tol * expect.abs().max(self.right_trace(i).abs())
            })
    }

    pub fn max(&self) -> T {
        self.values.iter().fold(T::neg_infinity(), |m, &x| m.max(x))
    }

    pub fn min(&self) -> T {
        self.values.iter().fold(T::infinity(), |m, &x| m.min(x))
    }

    pub fn map(&self, mut f: impl FnMut(usize, T, T) -> T) -> Self {
        let values = self
            .grid
            .nodes()
            .into_iter()
            .zip(&self.values)
            .map(|((i, x), &v)| f(i, x, v))
            .collect();
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn zip_map(&self, other: &Self, mut f: impl FnMut(T, T) -> T) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self {
            grid: self.grid.clone(),
            values,
        })
    }

    /// Sup-norm distance to another field on the same grid.
    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .values
            .iter()
            .zip(&other.values)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())))
    }

    /// Second-order nodal derivative: central differences inside each patch
    /// and one-sided three-point stencils at both patch ends.
    pub fn derivative(&self) -> Self {
        let mut out = Vec::with_capacity(self.values.len());
        let two = T::lit(2.0);
        let three = T::lit(3.0);
        let four = T::lit(4.0);
        for i in 0..self.grid.n() {
            let u = self.patch(i);
            let h = self.grid.spacing(i);
            let m = u.len() - 1;
            for j in 0..=m {
                let du = if j == 0 {
                    (-three * u[0] + four * u[1] - u[2]) / (two * h)
                } else if j == m {
                    (three * u[m] - four * u[m - 1] + u[m - 2]) / (two * h)
                } else {
                    (u[j + 1] - u[j - 1]) / (two * h)
                };
                out.push(du);
            }
        }
        Self {
            grid: self.grid.clone(),
            values: out,
        }
    }

    /// Writes `patch_index,x,value` rows with a header line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "patch_index,x,value")?;
        for ((i, x), v) in self.grid.nodes().into_iter().zip(&self.values) {
            writeln!(w, "{},{},{}", i, fmt_num(x), fmt_num(*v))?;
        }
        Ok(())
    }
}

/// Composite trapezoid integral over the patch union.
pub fn integrate_field<T: Scalar>(field: &PiecewiseField<T>) -> T {
    field
        .grid
        .quadrature()
        .iter()
        .zip(&field.values)
        .map(|(&q, &v)| q * v)
        .sum()
}

/// Trapezoid integral of a field restricted to nodes `j0..=j1` of one patch.
pub fn integrate_patch_range<T: Scalar>(field: &PiecewiseField<T>, patch: usize, j0: usize, j1: usize) -> T {
    if j1 <= j0 {
        return T::zero();
    }
    let u = field.patch(patch);
    let h = field.grid.spacing(patch);
    let half = T::lit(0.5);
    let inner: T = u[j0 + 1..j1].iter().copied().sum();
    h * (half * (u[j0] + u[j1]) + inner)
}

/// 17 significant digits, round-trip exact for `f64`.
pub fn fmt_num<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(lengths: &[f64], res: Resolution<f64>) -> Grid<f64> {
        build_grid(&Landscape::from_lengths(lengths).unwrap(), &res).unwrap()
    }

    #[test]
    fn single_patch_nodes() {
        let g = grid(&[1.0], Resolution::Spacing(0.25));
        let xs: Vec<f64> = g.nodes().into_iter().map(|(_, x)| x).collect();
        assert_eq!(xs, vec![0.0, 0.25, 0.5, 0.75, 1.0]);
    }

    #[test]
    fn two_patches_duplicate_interface() {
        let g = grid(&[1.0, 1.0], Resolution::Spacing(0.25));
        assert_eq!(g.total_dofs(), 10);
        assert_eq!(g.node(0, 4), 1.0);
        assert_eq!(g.node(1, 0), 1.0);
        assert_eq!(g.reduced_dofs(), 9);
        assert_eq!(g.reduced_index(1, 0), g.reduced_index(0, 4));
    }

    #[test]
    fn two_patches_half_spacing_is_too_coarse() {
        let l = Landscape::from_lengths(&[1.0, 1.0]).unwrap();
        assert!(matches!(
            build_grid(&l, &Resolution::Spacing(0.5)),
            Err(Error::GridTooCoarse { patch: 0, .. })
        ));
    }

    #[test]
    fn spacing_counts() {
        let g = grid(&[1.0, 2.0, 1.0], Resolution::Spacing(0.1));
        assert_eq!(g.counts(), &[10, 20, 10]);
        assert_eq!(g.total_dofs(), 11 + 21 + 11);
    }

    #[test]
    fn integration_examples() {
        let g = grid(&[2.0], Resolution::Uniform(8));
        let one = PiecewiseField::piecewise_constant(&g, &[1.0]).unwrap();
        assert_relative_eq!(integrate_field(&one), 2.0, max_relative = 1e-15);

        let g = grid(&[1.0, 1.0], Resolution::Uniform(8));
        let k = PiecewiseField::piecewise_constant(&g, &[1.0, 3.0]).unwrap();
        assert_relative_eq!(integrate_field(&k), 4.0, max_relative = 1e-15);

        let g = grid(&[1.0], Resolution::Uniform(10));
        let ramp = PiecewiseField::from_fn(&g, |_, x| x);
        assert_relative_eq!(integrate_field(&ramp), 0.5, max_relative = 1e-15);
    }

    #[test]
    fn derivative_exact_for_quadratics() {
        let g = grid(&[1.0, 2.0], Resolution::Uniform(6));
        let f = PiecewiseField::from_fn(&g, |i, x| if i == 0 { x * x } else { 3.0 - x * x / 2.0 });
        let df = f.derivative();
        for ((i, x), v) in g.nodes().into_iter().zip(df.values()) {
            let expect = if i == 0 { 2.0 * x } else { -x };
            assert_relative_eq!(*v, expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn reduced_roundtrip_is_jump_consistent() {
        let g = grid(&[1.0, 1.0, 1.0], Resolution::Uniform(5));
        let p = [2.0, 0.25];
        let red: Vec<f64> = (0..g.reduced_dofs()).map(|r| 1.0 + r as f64).collect();
        let f = PiecewiseField::from_reduced(&g, &p, &red).unwrap();
        assert!(f.is_jump_consistent(&p, 1e-12));
        assert_eq!(f.right_trace(0), 2.0 * f.left_trace(0));
        assert_eq!(f.to_reduced(), red);
    }

    #[test]
    fn csv_header_and_rows() {
        let g = grid(&[1.0], Resolution::Uniform(4));
        let f = PiecewiseField::piecewise_constant(&g, &[2.0]).unwrap();
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("patch_index,x,value"));
        assert_eq!(
            lines.next(),
            Some("0,0.0000000000000000e0,2.0000000000000000e0")
        );
        assert_eq!(text.lines().count(), 6);
    }
}
