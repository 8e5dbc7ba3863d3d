//! Structured triangular fine mesh, nested coarse grid, coarse neighborhoods,
//! freezing-pipe node sets and the layered material raster.
//!
//! Fine node `(i, j)` has index `i + j * (nx + 1)`. Fine quad `(i, j)` has
//! index `q = i + j * nx` and is split along its lower-left to upper-right
//! diagonal into triangles `2q` (below the diagonal) and `2q + 1` (above).

use crate::error::{Error, Result};

pub type Point = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Left,
    Right,
    Bottom,
    Top,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Left, Side::Right, Side::Bottom, Side::Top];

    pub fn name(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
            Side::Bottom => "bottom",
            Side::Top => "top",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BoundaryNodes {
    pub left: Vec<usize>,
    pub right: Vec<usize>,
    pub bottom: Vec<usize>,
    pub top: Vec<usize>,
}

impl BoundaryNodes {
    pub fn side(&self, side: Side) -> &[usize] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
            Side::Bottom => &self.bottom,
            Side::Top => &self.top,
        }
    }
}

/// Per-triangle P1 geometry: area and the constant gradients of the three
/// barycentric shape functions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriangleGeometry {
    pub area: f64,
    pub grad: [[f64; 2]; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary: BoundaryNodes,
}

pub fn build_fine_mesh(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Mesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!(
            "mesh cell counts must be positive, got {nx}x{ny}"
        )));
    }
    if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "domain extents must be positive, got {lx}x{ly}"
        )));
    }
    let hx = lx / nx as f64;
    let hy = ly / ny as f64;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            // exact end coordinates so boundary tests are robust
            let x = if i == nx { lx } else { i as f64 * hx };
            let y = if j == ny { ly } else { j as f64 * hy };
            nodes.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| i + j * (nx + 1);
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (a, b, c, d) = (id(i, j), id(i + 1, j), id(i + 1, j + 1), id(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    let boundary = BoundaryNodes {
        left: (0..=ny).map(|j| id(0, j)).collect(),
        right: (0..=ny).map(|j| id(nx, j)).collect(),
        bottom: (0..=nx).map(|i| id(i, 0)).collect(),
        top: (0..=nx).map(|i| id(i, ny)).collect(),
    };
    Ok(Mesh {
        nx,
        ny,
        lx,
        ly,
        nodes,
        triangles,
        boundary,
    })
}

impl Mesh {
    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn hx(&self) -> f64 {
        self.lx / self.nx as f64
    }

    pub fn hy(&self) -> f64 {
        self.ly / self.ny as f64
    }

    #[inline]
    pub fn node_index(&self, i: usize, j: usize) -> usize {
        i + j * (self.nx + 1)
    }

    /// Grid coordinates `(i, j)` of a node.
    #[inline]
    pub fn node_ij(&self, node: usize) -> (usize, usize) {
        (node % (self.nx + 1), node / (self.nx + 1))
    }

    /// Grid coordinates of the quad that holds a triangle.
    #[inline]
    pub fn triangle_quad(&self, tri: usize) -> (usize, usize) {
        let q = tri / 2;
        (q % self.nx, q / self.nx)
    }

    pub fn signed_area(&self, tri: usize) -> f64 {
        let [a, b, c] = self.triangles[tri];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        0.5 * ((pb[0] - pa[0]) * (pc[1] - pa[1]) - (pc[0] - pa[0]) * (pb[1] - pa[1]))
    }

    pub fn centroid(&self, tri: usize) -> Point {
        let [a, b, c] = self.triangles[tri];
        let (pa, pb, pc) = (self.nodes[a], self.nodes[b], self.nodes[c]);
        [
            (pa[0] + pb[0] + pc[0]) / 3.0,
            (pa[1] + pb[1] + pc[1]) / 3.0,
        ]
    }

    pub fn geometry(&self, tri: usize) -> Result<TriangleGeometry> {
        let [a, b, c] = self.triangles[tri];
        triangle_geometry([self.nodes[a], self.nodes[b], self.nodes[c]])
            .ok_or_else(|| Error::DegenerateTriangle {
                triangle: tri,
                area: self.signed_area(tri),
            })
    }

    /// Geometry of every triangle, computed once.
    pub fn all_geometry(&self) -> Result<Vec<TriangleGeometry>> {
        (0..self.n_triangles()).map(|t| self.geometry(t)).collect()
    }

    /// Mean of the three nodal values of `field` on each triangle.
    pub fn cell_average(&self, field: &[f64]) -> Vec<f64> {
        self.triangles
            .iter()
            .map(|&[a, b, c]| (field[a] + field[b] + field[c]) / 3.0)
            .collect()
    }

    /// Constant P1 gradient of a nodal field on each triangle.
    pub fn cell_gradients(&self, geometry: &[TriangleGeometry], field: &[f64]) -> Vec<[f64; 2]> {
        self.triangles
            .iter()
            .zip(geometry)
            .map(|(tri, g)| {
                let mut out = [0.0; 2];
                for (k, &n) in tri.iter().enumerate() {
                    out[0] += g.grad[k][0] * field[n];
                    out[1] += g.grad[k][1] * field[n];
                }
                out
            })
            .collect()
    }

    pub fn is_boundary_node(&self, node: usize) -> bool {
        let (i, j) = self.node_ij(node);
        i == 0 || j == 0 || i == self.nx || j == self.ny
    }
}

/// Area and shape-function gradients of a counter-clockwise triangle. `None`
/// when the signed area is not positive.
pub fn triangle_geometry(p: [Point; 3]) -> Option<TriangleGeometry> {
    let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let mut grad = [[0.0; 2]; 3];
    for k in 0..3 {
        let (j, l) = ((k + 1) % 3, (k + 2) % 3);
        grad[k] = [(p[j][1] - p[l][1]) / det, (p[l][0] - p[j][0]) / det];
    }
    Some(TriangleGeometry {
        area: 0.5 * det,
        grad,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoarseGrid {
    pub nx: usize,
    pub ny: usize,
    /// Fine cells per coarse cell along x and y.
    pub rx: usize,
    pub ry: usize,
    pub vertices: Vec<Point>,
    /// Fine node index of each coarse vertex.
    pub vertex_nodes: Vec<usize>,
    /// Fine triangles of each coarse cell.
    pub cells: Vec<Vec<usize>>,
}

pub fn build_coarse_grid(mesh: &Mesh, nx: usize, ny: usize) -> Result<CoarseGrid> {
    if nx == 0 || ny == 0 {
        return Err(Error::InvalidArgument(format!(
            "coarse cell counts must be positive, got {nx}x{ny}"
        )));
    }
    if mesh.nx % nx != 0 || mesh.ny % ny != 0 {
        return Err(Error::InvalidArgument(format!(
            "coarse grid {nx}x{ny} does not nest in fine grid {}x{}",
            mesh.nx, mesh.ny
        )));
    }
    let (rx, ry) = (mesh.nx / nx, mesh.ny / ny);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    let mut vertex_nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for jc in 0..=ny {
        for ic in 0..=nx {
            let node = mesh.node_index(ic * rx, jc * ry);
            vertex_nodes.push(node);
            vertices.push(mesh.nodes[node]);
        }
    }
    let mut cells = Vec::with_capacity(nx * ny);
    for jc in 0..ny {
        for ic in 0..nx {
            let mut tris = Vec::with_capacity(2 * rx * ry);
            for j in jc * ry..(jc + 1) * ry {
                for i in ic * rx..(ic + 1) * rx {
                    let q = i + j * mesh.nx;
                    tris.push(2 * q);
                    tris.push(2 * q + 1);
                }
            }
            cells.push(tris);
        }
    }
    Ok(CoarseGrid {
        nx,
        ny,
        rx,
        ry,
        vertices,
        vertex_nodes,
        cells,
    })
}

impl CoarseGrid {
    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len()
    }

    #[inline]
    pub fn vertex_index(&self, ic: usize, jc: usize) -> usize {
        ic + jc * (self.nx + 1)
    }

    #[inline]
    pub fn vertex_ij(&self, v: usize) -> (usize, usize) {
        (v % (self.nx + 1), v / (self.nx + 1))
    }

    /// Coarse cell holding a fine triangle.
    pub fn cell_of_triangle(&self, mesh: &Mesh, tri: usize) -> usize {
        let (i, j) = mesh.triangle_quad(tri);
        i / self.rx + (j / self.ry) * self.nx
    }
}

/// Coarse neighborhood of one coarse vertex: the union of the (1, 2 or 4)
/// coarse cells that touch it. Always a rectangle of fine nodes
/// `[i0, i1] x [j0, j1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Neighborhood {
    pub vertex: usize,
    pub i0: usize,
    pub i1: usize,
    pub j0: usize,
    pub j1: usize,
    pub coarse_cells: Vec<usize>,
    /// All fine nodes of the neighborhood, ascending (row-major local order).
    pub nodes: Vec<usize>,
    /// Nodes off the polygon boundary of the neighborhood.
    pub interior: Vec<usize>,
    /// Nodes on the polygon boundary, including any part lying on the domain
    /// boundary.
    pub boundary: Vec<usize>,
    /// Boundary nodes not on the domain boundary's open part: where the
    /// partition-of-unity function of this neighborhood vanishes.
    pub cut: Vec<usize>,
    pub triangles: Vec<usize>,
    /// Fine pipe nodes inside the neighborhood (global indices).
    pub pipe_nodes: Vec<usize>,
}

impl Neighborhood {
    pub fn width(&self) -> usize {
        self.i1 - self.i0 + 1
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Local index of a global fine node, if it lies in this neighborhood.
    #[inline]
    pub fn local_index(&self, mesh: &Mesh, node: usize) -> Option<usize> {
        let (i, j) = mesh.node_ij(node);
        if i < self.i0 || i > self.i1 || j < self.j0 || j > self.j1 {
            return None;
        }
        Some((i - self.i0) + (j - self.j0) * self.width())
    }

    pub fn contains_node(&self, mesh: &Mesh, node: usize) -> bool {
        self.local_index(mesh, node).is_some()
    }

    pub fn has_pipe(&self) -> bool {
        !self.pipe_nodes.is_empty()
    }

    /// Whether the node sits on the part of the neighborhood boundary that is
    /// interior to the domain.
    pub fn is_cut_node(&self, mesh: &Mesh, node: usize) -> bool {
        let (i, j) = mesh.node_ij(node);
        (i == self.i0 && self.i0 > 0)
            || (i == self.i1 && self.i1 < mesh.nx)
            || (j == self.j0 && self.j0 > 0)
            || (j == self.j1 && self.j1 < mesh.ny)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborhoodMap {
    pub neighborhoods: Vec<Neighborhood>,
}

pub fn build_neighborhoods(mesh: &Mesh, coarse: &CoarseGrid) -> Result<NeighborhoodMap> {
    if mesh.nx != coarse.nx * coarse.rx || mesh.ny != coarse.ny * coarse.ry {
        return Err(Error::InvalidArgument(
            "coarse grid was built for a different fine mesh".into(),
        ));
    }
    let mut neighborhoods = Vec::with_capacity(coarse.n_vertices());
    for v in 0..coarse.n_vertices() {
        let (ic, jc) = coarse.vertex_ij(v);
        let cx0 = ic.saturating_sub(1);
        let cx1 = ic.min(coarse.nx - 1);
        let cy0 = jc.saturating_sub(1);
        let cy1 = jc.min(coarse.ny - 1);
        let mut coarse_cells = Vec::new();
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                coarse_cells.push(cx + cy * coarse.nx);
            }
        }
        let (i0, i1) = (cx0 * coarse.rx, (cx1 + 1) * coarse.rx);
        let (j0, j1) = (cy0 * coarse.ry, (cy1 + 1) * coarse.ry);
        let mut nb = Neighborhood {
            vertex: v,
            i0,
            i1,
            j0,
            j1,
            coarse_cells,
            nodes: Vec::new(),
            interior: Vec::new(),
            boundary: Vec::new(),
            cut: Vec::new(),
            triangles: Vec::new(),
            pipe_nodes: Vec::new(),
        };
        for j in j0..=j1 {
            for i in i0..=i1 {
                let node = mesh.node_index(i, j);
                nb.nodes.push(node);
                if i == i0 || i == i1 || j == j0 || j == j1 {
                    nb.boundary.push(node);
                    if nb.is_cut_node(mesh, node) {
                        nb.cut.push(node);
                    }
                } else {
                    nb.interior.push(node);
                }
            }
        }
        for &c in &nb.coarse_cells {
            nb.triangles.extend_from_slice(&coarse.cells[c]);
        }
        nb.triangles.sort_unstable();
        neighborhoods.push(nb);
    }
    Ok(NeighborhoodMap { neighborhoods })
}

impl NeighborhoodMap {
    pub fn len(&self) -> usize {
        self.neighborhoods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neighborhoods.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Neighborhood> {
        self.neighborhoods.iter()
    }

    /// Record the pipe nodes falling inside each neighborhood.
    pub fn attach_pipes(&mut self, mesh: &Mesh, pipes: &PipeLayout) {
        for nb in &mut self.neighborhoods {
            nb.pipe_nodes = pipes
                .all_nodes()
                .filter(|&n| nb.contains_node(mesh, n))
                .collect();
            nb.pipe_nodes.sort_unstable();
        }
    }

    pub fn n_with_pipes(&self) -> usize {
        self.neighborhoods.iter().filter(|nb| nb.has_pipe()).count()
    }
}

impl<'a> IntoIterator for &'a NeighborhoodMap {
    type Item = &'a Neighborhood;
    type IntoIter = std::slice::Iter<'a, Neighborhood>;

    fn into_iter(self) -> Self::IntoIter {
        self.neighborhoods.iter()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipeLayout {
    pub centers: Vec<Point>,
    pub radius: f64,
    /// Fine nodes of each pipe, ascending.
    pub pipe_nodes: Vec<Vec<usize>>,
}

impl PipeLayout {
    pub fn empty() -> Self {
        PipeLayout {
            centers: Vec::new(),
            radius: 0.0,
            pipe_nodes: Vec::new(),
        }
    }

    pub fn all_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        self.pipe_nodes.iter().flatten().copied()
    }

    pub fn n_nodes(&self) -> usize {
        self.pipe_nodes.iter().map(Vec::len).sum()
    }

    pub fn mask(&self, n_nodes: usize) -> Vec<bool> {
        let mut mask = vec![false; n_nodes];
        for n in self.all_nodes() {
            mask[n] = true;
        }
        mask
    }
}

/// Resolve pipe centers to the fine nodes within `radius` of each center.
pub fn locate_pipe_nodes(mesh: &Mesh, centers: &[Point], radius: f64) -> Result<PipeLayout> {
    if !(radius > 0.0) {
        return Err(Error::Config(format!("pipe radius must be positive, got {radius}")));
    }
    let (hx, hy) = (mesh.hx(), mesh.hy());
    let mut owner = vec![usize::MAX; mesh.n_nodes()];
    let mut pipe_nodes = Vec::with_capacity(centers.len());
    for (p, c) in centers.iter().enumerate() {
        if !(c[0] >= 0.0 && c[0] <= mesh.lx && c[1] >= 0.0 && c[1] <= mesh.ly) {
            return Err(Error::Config(format!(
                "pipe {p} center ({}, {}) lies outside the domain",
                c[0], c[1]
            )));
        }
        let lo_i = ((c[0] - radius) / hx).floor().max(0.0) as usize;
        let hi_i = (((c[0] + radius) / hx).ceil() as usize).min(mesh.nx);
        let lo_j = ((c[1] - radius) / hy).floor().max(0.0) as usize;
        let hi_j = (((c[1] + radius) / hy).ceil() as usize).min(mesh.ny);
        let mut nodes = Vec::new();
        for j in lo_j..=hi_j {
            for i in lo_i..=hi_i {
                let n = mesh.node_index(i, j);
                let q = mesh.nodes[n];
                let d2 = (q[0] - c[0]).powi(2) + (q[1] - c[1]).powi(2);
                if d2 <= radius * radius * (1.0 + 1e-12) {
                    if owner[n] != usize::MAX {
                        return Err(Error::Config(format!(
                            "pipes {} and {p} overlap at fine node {n}",
                            owner[n]
                        )));
                    }
                    owner[n] = p;
                    nodes.push(n);
                }
            }
        }
        if nodes.is_empty() {
            return Err(Error::Config(format!(
                "pipe {p} at ({}, {}) captures no fine node; radius {radius} is below grid resolution",
                c[0], c[1]
            )));
        }
        pipe_nodes.push(nodes);
    }
    Ok(PipeLayout {
        centers: centers.to_vec(),
        radius,
        pipe_nodes,
    })
}

/// Default freezing-pipe layout: two horizontal rows of ten pipes at
/// y = 2.4 m and y = 3.6 m, evenly spaced over x in [1.2, 10.8] m.
pub fn default_pipe_centers() -> Vec<Point> {
    let mut centers = Vec::with_capacity(20);
    for y in [2.4, 3.6] {
        for k in 0..10 {
            centers.push([1.2 + k as f64 * (10.8 - 1.2) / 9.0, y]);
        }
    }
    centers
}

/// Horizontal material stripes: each entry `(y_start, layer)` assigns
/// `layer` to every cell whose centroid lies at or above `y_start` and below
/// the next stripe's start. Layers are zero based.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStripes {
    pub stripes: Vec<(f64, usize)>,
}

impl LayerStripes {
    pub fn uniform(layer: usize) -> Self {
        LayerStripes {
            stripes: vec![(0.0, layer)],
        }
    }

    /// Default layered section: four stripes cycling through three soils.
    pub fn default_layers() -> Self {
        LayerStripes {
            stripes: vec![(0.0, 2), (1.75, 1), (3.0, 0), (4.25, 1)],
        }
    }

    pub fn validate(&self, n_layers: usize) -> Result<()> {
        if self.stripes.is_empty() {
            return Err(Error::Config("at least one layer stripe is required".into()));
        }
        for w in self.stripes.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::Config("layer stripes must have increasing y_start".into()));
            }
        }
        if let Some(&(_, l)) = self.stripes.iter().find(|(_, l)| *l >= n_layers) {
            return Err(Error::Config(format!(
                "layer stripe refers to layer {} but only {n_layers} are defined",
                l + 1
            )));
        }
        Ok(())
    }

    pub fn layer_at(&self, y: f64) -> usize {
        let mut layer = self.stripes[0].1;
        for &(start, l) in &self.stripes {
            if y >= start {
                layer = l;
            }
        }
        layer
    }

    /// Layer id of every fine triangle.
    pub fn rasterize(&self, mesh: &Mesh) -> Vec<usize> {
        (0..mesh.n_triangles())
            .map(|t| self.layer_at(mesh.centroid(t)[1]))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_is_two_triangles() {
        let m = build_fine_mesh(1, 1, 1.0, 1.0).unwrap();
        assert_eq!(m.n_nodes(), 4);
        assert_eq!(m.n_triangles(), 2);
        let area: f64 = (0..2).map(|t| m.signed_area(t)).sum();
        assert!((area - 1.0).abs() < 1e-14);
    }

    #[test]
    fn mesh_counts() {
        let m = build_fine_mesh(2, 1, 2.0, 1.0).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles()), (6, 4));
        let m = build_fine_mesh(120, 120, 12.0, 6.0).unwrap();
        assert_eq!((m.n_nodes(), m.n_triangles()), (14641, 28800));
        let area: f64 = (0..m.n_triangles()).map(|t| m.signed_area(t)).sum();
        assert!((area - 72.0).abs() / 72.0 < 1e-10);
        assert!((0..m.n_triangles()).all(|t| m.signed_area(t) > 0.0));
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(build_fine_mesh(0, 3, 1.0, 1.0).is_err());
        assert!(build_fine_mesh(3, 3, -1.0, 1.0).is_err());
        assert!(build_fine_mesh(3, 3, 1.0, 0.0).is_err());
    }

    #[test]
    fn boundary_tags() {
        let m = build_fine_mesh(3, 2, 3.0, 2.0).unwrap();
        assert_eq!(m.boundary.left, vec![0, 4, 8]);
        assert_eq!(m.boundary.right, vec![3, 7, 11]);
        assert_eq!(m.boundary.bottom, vec![0, 1, 2, 3]);
        assert_eq!(m.boundary.top, vec![8, 9, 10, 11]);
    }

    #[test]
    fn reference_triangle_gradients() {
        let g = triangle_geometry([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(g.area, 0.5);
        assert_eq!(g.grad, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
        assert!(triangle_geometry([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_none());
        assert!(triangle_geometry([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).is_none());
    }

    #[test]
    fn coarse_grid_counts() {
        let m = build_fine_mesh(120, 120, 12.0, 6.0).unwrap();
        let c = build_coarse_grid(&m, 24, 12).unwrap();
        assert_eq!((c.n_vertices(), c.n_cells()), (325, 288));
        assert!(c.cells.iter().all(|cell| cell.len() == 2 * 5 * 10));

        let m = build_fine_mesh(4, 4, 1.0, 1.0).unwrap();
        let c = build_coarse_grid(&m, 2, 2).unwrap();
        assert_eq!((c.n_vertices(), c.n_cells()), (9, 4));
        assert!(build_coarse_grid(&m, 3, 2).is_err());
    }

    #[test]
    fn neighborhood_shapes() {
        let m = build_fine_mesh(4, 4, 1.0, 1.0).unwrap();
        let c = build_coarse_grid(&m, 2, 2).unwrap();
        let map = build_neighborhoods(&m, &c).unwrap();
        assert_eq!(map.len(), 9);
        let center = &map.neighborhoods[4];
        assert_eq!(center.coarse_cells.len(), 4);
        assert_eq!(center.nodes.len(), 25);
        assert_eq!(center.interior.len(), 9);
        assert_eq!(center.boundary.len(), 16);
        assert!(center.cut.is_empty());
        let corner = &map.neighborhoods[0];
        assert_eq!(corner.coarse_cells, vec![0]);
        // the two far edges are cut, the two domain edges are not
        assert_eq!(corner.cut.len(), 5);
        let edge = &map.neighborhoods[1];
        assert_eq!(edge.coarse_cells.len(), 2);

        let m = build_fine_mesh(120, 120, 12.0, 6.0).unwrap();
        let c = build_coarse_grid(&m, 24, 12).unwrap();
        assert_eq!(build_neighborhoods(&m, &c).unwrap().len(), 325);
    }

    #[test]
    fn neighborhood_partition_and_membership() {
        let m = build_fine_mesh(12, 8, 3.0, 2.0).unwrap();
        let c = build_coarse_grid(&m, 4, 2).unwrap();
        let map = build_neighborhoods(&m, &c).unwrap();
        // each fine cell belongs to the neighborhoods of its coarse cell's 4 vertices
        let mut count = vec![0usize; m.n_triangles()];
        for nb in &map {
            let mut all: Vec<usize> = nb.interior.iter().chain(&nb.boundary).copied().collect();
            all.sort_unstable();
            assert_eq!(all, nb.nodes);
            for &t in &nb.triangles {
                count[t] += 1;
            }
        }
        assert!(count.iter().all(|&k| k == 4));
    }

    #[test]
    fn interior_neighborhood_boundary_is_closed_loop() {
        let m = build_fine_mesh(8, 8, 1.0, 1.0).unwrap();
        let c = build_coarse_grid(&m, 4, 4).unwrap();
        let map = build_neighborhoods(&m, &c).unwrap();
        let nb = &map.neighborhoods[c.vertex_index(2, 2)];
        let on_boundary = |n: usize| nb.boundary.contains(&n);
        for &n in &nb.boundary {
            let (i, j) = m.node_ij(n);
            let cand = [(i + 1, j), (i.wrapping_sub(1), j), (i, j + 1), (i, j.wrapping_sub(1))];
            let k = cand
                .iter()
                .filter(|&&(a, b)| a <= m.nx && b <= m.ny && on_boundary(m.node_index(a, b)))
                .count();
            assert_eq!(k, 2, "node {n}");
        }
    }

    #[test]
    fn pipe_snapping() {
        let m = build_fine_mesh(10, 10, 1.0, 1.0).unwrap();
        let p = locate_pipe_nodes(&m, &[[0.3, 0.4]], 0.05).unwrap();
        assert_eq!(p.pipe_nodes, vec![vec![m.node_index(3, 4)]]);
        assert!(locate_pipe_nodes(&m, &[[1.3, 0.4]], 0.05).is_err());
        assert!(locate_pipe_nodes(&m, &[[0.35, 0.45]], 0.01).is_err());
        assert!(locate_pipe_nodes(&m, &[[0.3, 0.4], [0.35, 0.4]], 0.1).is_err());
    }

    #[test]
    fn default_pipes_on_reference_grid() {
        let m = build_fine_mesh(120, 120, 12.0, 6.0).unwrap();
        let r = m.hx().hypot(m.hy());
        let p = locate_pipe_nodes(&m, &default_pipe_centers(), r).unwrap();
        assert_eq!(p.pipe_nodes.len(), 20);
        assert!(p.n_nodes() >= 20);
    }

    #[test]
    fn stripes() {
        let s = LayerStripes::default_layers();
        assert_eq!(s.layer_at(0.1), 2);
        assert_eq!(s.layer_at(2.0), 1);
        assert_eq!(s.layer_at(3.5), 0);
        assert_eq!(s.layer_at(5.9), 1);
        assert!(s.validate(3).is_ok());
        assert!(s.validate(2).is_err());
    }
}
