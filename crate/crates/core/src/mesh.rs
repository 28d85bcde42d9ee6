//! Uniform box meshes, trapezoid quadrature, central-difference gradients
//! and nodal functions with zero trace.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Default cap on the total number of mesh nodes.
pub const DEFAULT_NODE_CAP: usize = 1 << 22;

/// A point of the computational domain. Unused trailing coordinates are 0.
pub type Point = [f64; 2];

/// A nodal gradient. In 1D only the first component is meaningful.
pub type Vector = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Self {
        Interval { lo, hi }
    }

    pub fn len(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Tensor-product grid over a box in one or two dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct DomainMesh {
    intervals: Vec<Interval>,
    nodes_per_axis: Vec<usize>,
    spacing: Vec<f64>,
    coords: Vec<Point>,
    boundary: Vec<bool>,
    weights: Vec<f64>,
}

impl DomainMesh {
    pub fn new(intervals: &[Interval], nodes_per_axis: &[usize]) -> Result<Self> {
        Self::with_cap(intervals, nodes_per_axis, DEFAULT_NODE_CAP)
    }

    /// Builds the mesh, refusing node counts above `cap`.
    pub fn with_cap(intervals: &[Interval], nodes_per_axis: &[usize], cap: usize) -> Result<Self> {
        let dim = intervals.len();
        if dim == 0 || dim > 2 {
            return Err(Error::Domain(format!("mesh dimension must be 1 or 2, got {dim}")));
        }
        if nodes_per_axis.len() != dim {
            return Err(Error::Shape { expected: dim, found: nodes_per_axis.len() });
        }
        for (axis, iv) in intervals.iter().enumerate() {
            if !(iv.lo.is_finite() && iv.hi.is_finite()) || iv.hi <= iv.lo {
                return Err(Error::Domain(format!("interval on axis {axis} is degenerate: [{}, {}]", iv.lo, iv.hi)));
            }
            if nodes_per_axis[axis] < 3 {
                return Err(Error::Domain(format!("axis {axis} needs at least 3 nodes, got {}", nodes_per_axis[axis])));
            }
        }
        let total = nodes_per_axis.iter().try_fold(1usize, |acc, &n| acc.checked_mul(n)).unwrap_or(usize::MAX);
        if total > cap {
            return Err(Error::Resource(format!("{total} nodes requested, cap is {cap}")));
        }

        let spacing: Vec<f64> =
            intervals.iter().zip(nodes_per_axis).map(|(iv, &n)| iv.len() / (n - 1) as f64).collect();

        // 1D trapezoid weights per axis; tensor product for 2D.
        let axis_weights: Vec<Vec<f64>> = nodes_per_axis
            .iter()
            .zip(&spacing)
            .map(|(&n, &h)| (0..n).map(|i| if i == 0 || i == n - 1 { 0.5 * h } else { h }).collect())
            .collect();

        let mut coords = Vec::with_capacity(total);
        let mut boundary = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let nx = nodes_per_axis[0];
        let ny = if dim == 2 { nodes_per_axis[1] } else { 1 };
        for j in 0..ny {
            for i in 0..nx {
                let x = intervals[0].lo + i as f64 * spacing[0];
                let on_x = i == 0 || i == nx - 1;
                if dim == 1 {
                    coords.push([x, 0.0]);
                    boundary.push(on_x);
                    weights.push(axis_weights[0][i]);
                } else {
                    let y = intervals[1].lo + j as f64 * spacing[1];
                    let on_y = j == 0 || j == ny - 1;
                    coords.push([x, y]);
                    boundary.push(on_x || on_y);
                    weights.push(axis_weights[0][i] * axis_weights[1][j]);
                }
            }
        }

        Ok(DomainMesh {
            intervals: intervals.to_vec(),
            nodes_per_axis: nodes_per_axis.to_vec(),
            spacing,
            coords,
            boundary,
            weights,
        })
    }

    pub fn dim(&self) -> usize {
        self.intervals.len()
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn intervals(&self) -> &[Interval] {
        &self.intervals
    }

    pub fn nodes_per_axis(&self) -> &[usize] {
        &self.nodes_per_axis
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Largest spacing over all axes.
    pub fn max_spacing(&self) -> f64 {
        self.spacing.iter().cloned().fold(0.0, f64::max)
    }

    pub fn coords(&self) -> &[Point] {
        &self.coords
    }

    pub fn coord(&self, node: usize) -> Point {
        self.coords[node]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn volume(&self) -> f64 {
        self.intervals.iter().map(Interval::len).product()
    }

    pub fn diameter(&self) -> f64 {
        self.intervals.iter().map(|iv| iv.len() * iv.len()).sum::<f64>().sqrt()
    }

    pub fn center(&self) -> Point {
        let mut c = [0.0; 2];
        for (axis, iv) in self.intervals.iter().enumerate() {
            c[axis] = 0.5 * (iv.lo + iv.hi);
        }
        c
    }

    pub fn distance(&self, node: usize, x0: &Point) -> f64 {
        let x = &self.coords[node];
        (0..self.dim()).map(|a| (x[a] - x0[a]) * (x[a] - x0[a])).sum::<f64>().sqrt()
    }

    /// Whether `x0` lies in the closed box.
    pub fn contains(&self, x0: &Point) -> bool {
        self.intervals.iter().enumerate().all(|(a, iv)| x0[a] >= iv.lo && x0[a] <= iv.hi)
    }

    /// Indices of nodes within closed distance `radius` of `x0`.
    pub fn nodes_within(&self, x0: &Point, radius: f64) -> Vec<usize> {
        (0..self.len()).filter(|&k| self.distance(k, x0) <= radius).collect()
    }

    /// Nearest node to `x0`.
    pub fn nearest_node(&self, x0: &Point) -> usize {
        (0..self.len()).min_by(|&a, &b| self.distance(a, x0).total_cmp(&self.distance(b, x0))).unwrap_or(0)
    }

    fn index(&self, i: usize, j: usize) -> usize {
        i + self.nodes_per_axis[0] * j
    }

    fn axis_position(&self, node: usize, axis: usize) -> usize {
        let nx = self.nodes_per_axis[0];
        if axis == 0 {
            node % nx
        } else {
            node / nx
        }
    }

    fn step(&self, node: usize, axis: usize, forward: bool) -> usize {
        let nx = self.nodes_per_axis[0];
        let (i, j) = (node % nx, node / nx);
        match (axis, forward) {
            (0, true) => self.index(i + 1, j),
            (0, false) => self.index(i - 1, j),
            (_, true) => self.index(i, j + 1),
            (_, false) => self.index(i, j - 1),
        }
    }

    /// Stencil of the derivative along `axis` at `node` as (node, coefficient) pairs:
    /// central at interior positions, one-sided at the ends of the axis.
    fn stencil(&self, node: usize, axis: usize) -> [(usize, f64); 2] {
        let n = self.nodes_per_axis[axis];
        let h = self.spacing[axis];
        let pos = self.axis_position(node, axis);
        if pos == 0 {
            [(self.step(node, axis, true), 1.0 / h), (node, -1.0 / h)]
        } else if pos == n - 1 {
            [(node, 1.0 / h), (self.step(node, axis, false), -1.0 / h)]
        } else {
            [(self.step(node, axis, true), 0.5 / h), (self.step(node, axis, false), -0.5 / h)]
        }
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::Shape { expected: self.len(), found });
        }
        Ok(())
    }

    /// Discrete gradient of nodal values.
    pub fn gradient(&self, u: &[f64]) -> Result<Vec<Vector>> {
        self.check_len(u.len())?;
        let mut out = vec![[0.0; 2]; self.len()];
        for (k, g) in out.iter_mut().enumerate() {
            for (axis, ga) in g.iter_mut().enumerate().take(self.dim()) {
                *ga = self.stencil(k, axis).iter().map(|&(m, c)| c * u[m]).sum();
            }
        }
        Ok(out)
    }

    /// Transpose of [`DomainMesh::gradient`]: returns `Gᵀ field`.
    pub fn gradient_adjoint(&self, field: &[Vector]) -> Result<Vec<f64>> {
        self.check_len(field.len())?;
        let mut out = vec![0.0; self.len()];
        for (k, v) in field.iter().enumerate() {
            for (axis, &va) in v.iter().enumerate().take(self.dim()) {
                for (m, c) in self.stencil(k, axis) {
                    out[m] += c * va;
                }
            }
        }
        Ok(out)
    }

    /// Quadrature-weighted sum of nodal values.
    pub fn integrate(&self, f: &[f64]) -> Result<f64> {
        self.check_len(f.len())?;
        let mut acc = 0.0;
        for (k, (&v, &w)) in f.iter().zip(&self.weights).enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { field: "integrand".into(), node: k });
            }
            acc += w * v;
        }
        Ok(acc)
    }

    /// Quadrature inner product `Σ w u v`.
    pub fn inner(&self, u: &[f64], v: &[f64]) -> f64 {
        self.weights.iter().zip(u.iter().zip(v)).map(|(w, (a, b))| w * a * b).sum()
    }

    /// Quadrature 2-norm.
    pub fn l2_norm(&self, u: &[f64]) -> f64 {
        self.inner(u, u).sqrt()
    }

    /// Sample a function of position at every node.
    pub fn sample(&self, f: impl Fn(&Point) -> f64) -> Vec<f64> {
        self.coords.iter().map(f).collect()
    }
}

/// Euclidean length of a nodal gradient.
pub fn magnitude(v: &Vector) -> f64 {
    (v[0] * v[0] + v[1] * v[1]).sqrt()
}

/// Nodal function vanishing on the boundary of its mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    values: Vec<f64>,
}

impl GridFunction {
    pub fn zeros(mesh: &DomainMesh) -> Self {
        GridFunction { values: vec![0.0; mesh.len()] }
    }

    /// Samples `f` at interior nodes; boundary nodes are set to zero.
    pub fn from_fn(mesh: &DomainMesh, f: impl Fn(&Point) -> f64) -> Self {
        let values = (0..mesh.len()).map(|k| if mesh.is_boundary(k) { 0.0 } else { f(&mesh.coord(k)) }).collect();
        GridFunction { values }
    }

    /// Wraps nodal values, rejecting nonzero boundary data.
    pub fn from_values(mesh: &DomainMesh, values: Vec<f64>) -> Result<Self> {
        mesh.check_len(values.len())?;
        for (k, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite { field: "u".into(), node: k });
            }
            if mesh.is_boundary(k) && v != 0.0 {
                return Err(Error::Domain(format!("boundary node {k} carries nonzero value {v}")));
            }
        }
        Ok(GridFunction { values })
    }

    /// Wraps nodal values after zeroing the boundary.
    pub fn with_zero_trace(mesh: &DomainMesh, mut values: Vec<f64>) -> Result<Self> {
        mesh.check_len(values.len())?;
        for (k, v) in values.iter_mut().enumerate() {
            if mesh.is_boundary(k) {
                *v = 0.0;
            }
        }
        Ok(GridFunction { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        GridFunction { values: self.values.iter().map(|v| c * v).collect() }
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &GridFunction) -> Self {
        GridFunction { values: self.values.iter().zip(&other.values).map(|(a, b)| a + c * b).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Writes `x[,y],value` rows.
    pub fn write_csv<W: Write>(&self, mesh: &DomainMesh, out: W) -> Result<()> {
        write_nodal_csv(mesh, &[("value", &self.values)], out)
    }

    /// Reads rows written by [`GridFunction::write_csv`]; coordinates must match the mesh.
    pub fn read_csv<R: Read>(mesh: &DomainMesh, input: R) -> Result<Self> {
        let values = read_nodal_csv(mesh, input)?;
        GridFunction::from_values(mesh, values)
    }
}

const AXIS_NAMES: [&str; 2] = ["x", "y"];

/// Writes one row per node: coordinates followed by the named columns.
pub fn write_nodal_csv<W: Write>(mesh: &DomainMesh, columns: &[(&str, &[f64])], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = AXIS_NAMES[..mesh.dim()].iter().map(|s| s.to_string()).collect();
    header.extend(columns.iter().map(|(n, _)| n.to_string()));
    w.write_record(&header).map_err(|e| Error::Io(e.to_string()))?;
    for k in 0..mesh.len() {
        let x = mesh.coord(k);
        let mut row: Vec<String> = (0..mesh.dim()).map(|a| x[a].to_string()).collect();
        for (_, col) in columns {
            row.push(col[k].to_string());
        }
        w.write_record(&row).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

/// Parses a single-value nodal CSV against `mesh`.
pub fn read_nodal_csv<R: Read>(mesh: &DomainMesh, input: R) -> Result<Vec<f64>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let dim = mesh.dim();
    if headers.len() != dim + 1 {
        return Err(Error::Parse(format!("expected {} columns, found {}", dim + 1, headers.len())));
    }
    for (a, name) in AXIS_NAMES[..dim].iter().enumerate() {
        if headers.get(a) != Some(*name) {
            return Err(Error::Parse(format!("column {a} must be `{name}`")));
        }
    }
    let tol = 1e-9 * mesh.diameter().max(1.0);
    let mut values = Vec::with_capacity(mesh.len());
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        if k >= mesh.len() {
            return Err(Error::Shape { expected: mesh.len(), found: k + 1 });
        }
        let parse = |i: usize| -> Result<f64> {
            record
                .get(i)
                .ok_or_else(|| Error::Parse(format!("row {k} is short")))?
                .trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {k}, column {i}: {e}")))
        };
        let x = mesh.coord(k);
        for (a, xa) in x.iter().enumerate().take(dim) {
            let c = parse(a)?;
            if !((c - xa).abs() <= tol) {
                return Err(Error::Parse(format!("row {k}: coordinate {c} does not match mesh node {xa}")));
            }
        }
        values.push(parse(dim)?);
    }
    if values.len() != mesh.len() {
        return Err(Error::Shape { expected: mesh.len(), found: values.len() });
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize) -> DomainMesh {
        DomainMesh::new(&[Interval::new(0.0, 1.0)], &[n]).unwrap()
    }

    #[test]
    fn trapezoid_weights_1d() {
        let m = unit(3);
        assert_eq!(m.weights(), &[0.25, 0.5, 0.25]);
        let m = DomainMesh::new(&[Interval::new(0.0, 2.0)], &[5]).unwrap();
        assert!((m.weights().iter().sum::<f64>() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_weights_2d() {
        let iv = Interval::new(0.0, 1.0);
        let m = DomainMesh::new(&[iv, iv], &[3, 3]).unwrap();
        assert!((m.weights()[0] - 1.0 / 16.0).abs() < 1e-15);
        assert!((m.weights()[4] - 0.25).abs() < 1e-15);
        assert!((m.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let boundary = m.boundary_mask().iter().filter(|b| **b).count();
        assert_eq!(boundary, 8);
        assert!(!m.is_boundary(4));
    }

    #[test]
    fn rejects_bad_meshes() {
        assert!(matches!(DomainMesh::new(&[Interval::new(1.0, 1.0)], &[5]), Err(Error::Domain(_))));
        assert!(DomainMesh::new(&[Interval::new(0.0, 1.0)], &[2]).is_err());
        let iv = Interval::new(0.0, 1.0);
        assert!(matches!(DomainMesh::with_cap(&[iv, iv], &[100, 100], 1000), Err(Error::Resource(_))));
    }

    #[test]
    fn gradient_is_exact_for_affine_data() {
        let m = unit(11);
        let u = m.sample(|x| x[0]);
        let g = m.gradient(&u).unwrap();
        for v in &g {
            assert!((v[0] - 1.0).abs() < 1e-12);
        }
        let zero = m.gradient(&[0.0; 11]).unwrap();
        assert!(zero.iter().all(|v| v[0] == 0.0));
    }

    #[test]
    fn central_difference_of_square() {
        let m = unit(11);
        let u = m.sample(|x| x[0] * x[0]);
        let g = m.gradient(&u).unwrap();
        assert!((g[5][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn adjoint_matches_transpose() {
        let iv = Interval::new(0.0, 1.0);
        let m = DomainMesh::new(&[iv, Interval::new(-1.0, 0.5)], &[5, 4]).unwrap();
        let u: Vec<f64> = (0..m.len()).map(|k| ((k * 7 % 11) as f64).sin()).collect();
        let field: Vec<Vector> = (0..m.len()).map(|k| [(k as f64).cos(), (2.0 * k as f64).sin()]).collect();
        let gu = m.gradient(&u).unwrap();
        let lhs: f64 = gu.iter().zip(&field).map(|(a, b)| a[0] * b[0] + a[1] * b[1]).sum();
        let gt = m.gradient_adjoint(&field).unwrap();
        let rhs: f64 = gt.iter().zip(&u).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12 * (1.0 + lhs.abs()));
    }

    #[test]
    fn integrate_examples() {
        let m = unit(101);
        assert!((m.integrate(&vec![1.0; 101]).unwrap() - 1.0).abs() < 1e-12);
        assert!((m.integrate(&m.sample(|x| x[0])).unwrap() - 0.5).abs() < 1e-12);
        assert!((m.integrate(&m.sample(|x| x[0] * x[0])).unwrap() - 1.0 / 3.0).abs() < 1e-4);
        let mut bad = vec![0.0; 101];
        bad[7] = f64::NAN;
        assert_eq!(m.integrate(&bad), Err(Error::NonFinite { field: "integrand".into(), node: 7 }));
    }

    #[test]
    fn grid_function_enforces_zero_trace() {
        let m = unit(5);
        let u = GridFunction::from_fn(&m, |_| 1.0);
        assert_eq!(u.values(), &[0.0, 1.0, 1.0, 1.0, 0.0]);
        assert!(GridFunction::from_values(&m, vec![1.0, 0.0, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let iv = Interval::new(0.0, 1.0);
        let m = DomainMesh::new(&[iv, iv], &[4, 5]).unwrap();
        let u = GridFunction::from_fn(&m, |x| (3.0 * x[0]).sin() * x[1]);
        let mut buf = Vec::new();
        u.write_csv(&m, &mut buf).unwrap();
        let back = GridFunction::read_csv(&m, buf.as_slice()).unwrap();
        assert_eq!(back, u);
        assert!(GridFunction::read_csv(&m, "x,y,value\n0,0,1\n".as_bytes()).is_err());
    }

    proptest::proptest! {
        #[test]
        fn integrate_is_monotone(vals in proptest::collection::vec(-5.0f64..5.0, 9),
                                 bumps in proptest::collection::vec(0.0f64..3.0, 9)) {
            let m = unit(9);
            let g: Vec<f64> = vals.iter().zip(&bumps).map(|(a, b)| a + b).collect();
            proptest::prop_assert!(m.integrate(&vals).unwrap() <= m.integrate(&g).unwrap() + 1e-15);
        }
    }
}
