//! Thin-wire structures, their segmentation into triangle basis functions, and
//! the nesting relation between a child mesh and a parent mesh.

use nalgebra::Vector3;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::scalar::Float;

pub type Point3<T> = Vector3<T>;

/// Ordered wire path with a constant radius.
#[derive(Debug, Clone, PartialEq)]
pub struct WirePolyline<T: Float> {
    vertices: Vec<Point3<T>>,
    radius: T,
}

impl<T: Float> WirePolyline<T> {
    pub fn new(vertices: Vec<Point3<T>>, radius: T) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidGeometry(format!(
                "polyline needs at least 2 vertices, got {}",
                vertices.len()
            )));
        }
        if !(radius > T::zero()) {
            return Err(Error::InvalidGeometry("wire radius must be positive".into()));
        }
        for (i, w) in vertices.windows(2).enumerate() {
            if (w[1] - w[0]).norm() <= T::zero() {
                return Err(Error::InvalidGeometry(format!("vertices {i} and {} coincide", i + 1)));
            }
        }
        Ok(Self { vertices, radius })
    }

    pub fn vertices(&self) -> &[Point3<T>] {
        &self.vertices
    }

    pub fn radius(&self) -> T {
        self.radius
    }

    pub fn length(&self) -> T {
        self.vertices
            .windows(2)
            .fold(T::zero(), |acc, w| acc + (w[1] - w[0]).norm())
    }
}

/// Which half of a triangle function lives on a segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    /// `1 - u`: the basis function's node is the segment start.
    Falling = 0,
    /// `u`: the basis function's node is the segment end.
    Rising = 1,
}

impl Shape {
    #[inline]
    pub fn value<T: Float>(self, u: T) -> T {
        match self {
            Shape::Falling => T::one() - u,
            Shape::Rising => u,
        }
    }

    /// Sign of the derivative along the segment, in units of `1/length`.
    #[inline]
    pub fn slope_sign<T: Float>(self) -> T {
        match self {
            Shape::Falling => -T::one(),
            Shape::Rising => T::one(),
        }
    }

    #[inline]
    pub fn index(self) -> usize {
        self as usize
    }
}

/// Straight piece of a mesh between two consecutive nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T: Float> {
    pub start: Point3<T>,
    pub end: Point3<T>,
    pub length: T,
    pub tangent: Vector3<T>,
}

impl<T: Float> Segment<T> {
    pub fn new(start: Point3<T>, end: Point3<T>) -> Self {
        let d = end - start;
        let length = d.norm();
        Self {
            start,
            end,
            length,
            tangent: d / length,
        }
    }

    #[inline]
    pub fn point_at(&self, u: T) -> Point3<T> {
        self.start + (self.end - self.start) * u
    }

    /// Distance from `p` to the closest point of the segment.
    pub fn distance_to(&self, p: &Point3<T>) -> T {
        let s = (p - self.start).dot(&self.tangent);
        let s = s.max(T::zero()).min(self.length);
        (p - (self.start + self.tangent * s)).norm()
    }

    /// Lexicographic key over the endpoint coordinates.
    pub(crate) fn key(&self) -> [T; 6] {
        [
            self.start.x,
            self.start.y,
            self.start.z,
            self.end.x,
            self.end.y,
            self.end.z,
        ]
    }
}

/// Segmented wire. Basis function `m` is the triangle centred on node `m + 1`,
/// so the current vanishes at both wire ends.
#[derive(Debug, Clone, PartialEq)]
pub struct WireMesh<T: Float> {
    polyline: WirePolyline<T>,
    nodes: Vec<Point3<T>>,
    segments: Vec<Segment<T>>,
    id: MeshId,
}

/// Content hash identifying a mesh (node coordinates and radius).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MeshId(pub String);

impl std::fmt::Display for MeshId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl<T: Float> WireMesh<T> {
    /// Builds a mesh whose nodes are exactly `nodes`.
    pub fn from_nodes(nodes: Vec<Point3<T>>, radius: T) -> Result<Self> {
        let polyline = WirePolyline::new(nodes.clone(), radius)?;
        Self::with_polyline(polyline, nodes)
    }

    /// Splits every polyline edge into equal pieces no longer than `max_segment_length`.
    pub fn from_polyline(polyline: WirePolyline<T>, max_segment_length: T) -> Result<Self> {
        if !(max_segment_length > T::zero()) {
            return Err(Error::InvalidParameter(
                "maximum segment length must be positive".into(),
            ));
        }
        let mut nodes = vec![polyline.vertices[0]];
        for w in polyline.vertices.windows(2) {
            let len = (w[1] - w[0]).norm();
            let pieces = (len / max_segment_length).ceil().to_f64_lossy().max(1.0) as usize;
            for i in 1..=pieces {
                let u = T::of_usize(i) / T::of_usize(pieces);
                nodes.push(if i == pieces { w[1] } else { w[0] + (w[1] - w[0]) * u });
            }
        }
        Self::with_polyline(polyline, nodes)
    }

    fn with_polyline(polyline: WirePolyline<T>, nodes: Vec<Point3<T>>) -> Result<Self> {
        if nodes.len() < 3 {
            return Err(Error::InvalidGeometry(format!(
                "mesh needs at least 3 nodes for one basis function, got {}",
                nodes.len()
            )));
        }
        let segments: Vec<_> = nodes.windows(2).map(|w| Segment::new(w[0], w[1])).collect();
        let radius = polyline.radius;
        for (i, s) in segments.iter().enumerate() {
            if !(s.length > T::zero()) {
                return Err(Error::InvalidGeometry(format!("segment {i} has zero length")));
            }
            if !(radius < s.length) {
                return Err(Error::InvalidGeometry(format!(
                    "radius {} is not below segment {i} length {} (thin-wire limit)",
                    radius.to_f64_lossy(),
                    s.length.to_f64_lossy()
                )));
            }
        }
        let id = hash_mesh(&nodes, radius);
        Ok(Self {
            polyline,
            nodes,
            segments,
            id,
        })
    }

    pub fn polyline(&self) -> &WirePolyline<T> {
        &self.polyline
    }

    pub fn radius(&self) -> T {
        self.polyline.radius
    }

    pub fn nodes(&self) -> &[Point3<T>] {
        &self.nodes
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn id(&self) -> &MeshId {
        &self.id
    }

    /// Number of triangle basis functions (interior nodes).
    pub fn basis_count(&self) -> usize {
        self.nodes.len() - 2
    }

    /// Segments carrying basis function `m`, with the local shape on each.
    #[inline]
    pub fn support(&self, m: usize) -> [(usize, Shape); 2] {
        [(m, Shape::Rising), (m + 1, Shape::Falling)]
    }

    /// Basis functions living on segment `s` (at most two).
    pub fn basis_on_segment(&self, s: usize) -> impl Iterator<Item = (usize, Shape)> {
        let n = self.basis_count();
        let falling = (s >= 1 && s - 1 < n).then(|| (s - 1, Shape::Falling));
        let rising = (s < n).then_some((s, Shape::Rising));
        falling.into_iter().chain(rising)
    }

    /// Contiguous sub-mesh made of `count` segments starting at `first`.
    /// Node coordinates are copied bit-for-bit, so the result nests exactly.
    pub fn submesh(&self, first: usize, count: usize) -> Result<Self> {
        if count < 2 || first + count > self.segments.len() {
            return Err(Error::InvalidParameter(format!(
                "sub-mesh [{first}, {first}+{count}) invalid for {} segments",
                self.segments.len()
            )));
        }
        Self::from_nodes(self.nodes[first..=first + count].to_vec(), self.radius())
    }

    /// Minimum distance from `p` to the wire axis.
    pub fn distance_to_axis(&self, p: &Point3<T>) -> T {
        self.segments
            .iter()
            .map(|s| s.distance_to(p))
            .fold(T::max_value().unwrap_or(T::one()), |a, b| a.min(b))
    }
}

fn hash_mesh<T: Float>(nodes: &[Point3<T>], radius: T) -> MeshId {
    let mut h = Sha256::new();
    h.update(radius.to_f64_lossy().to_le_bytes());
    for p in nodes {
        for c in p.iter() {
            h.update(c.to_f64_lossy().to_le_bytes());
        }
    }
    let digest = h.finalize();
    MeshId(digest.iter().take(12).map(|b| format!("{b:02x}")).collect())
}

/// Straight dipole along z, centred at the origin, uniformly segmented.
///
/// Node `i` sits at `z = (i - n/2) * (length / n)`, so dipoles sharing a segment
/// length produce bit-identical coordinates on their common part.
pub fn make_dipole<T: Float>(length: T, radius: T, n_segments: usize) -> Result<WireMesh<T>> {
    if !(length > T::zero()) {
        return Err(Error::InvalidGeometry("dipole length must be positive".into()));
    }
    if !(radius > T::zero()) {
        return Err(Error::InvalidGeometry("wire radius must be positive".into()));
    }
    if n_segments < 3 {
        return Err(Error::InvalidGeometry(format!(
            "dipole needs at least 3 segments, got {n_segments}"
        )));
    }
    let h = length / T::of_usize(n_segments);
    if !(radius < h) {
        return Err(Error::InvalidGeometry(format!(
            "radius {} must be below the segment length {}",
            radius.to_f64_lossy(),
            h.to_f64_lossy()
        )));
    }
    let half = T::of_usize(n_segments) / T::lit(2.0);
    let nodes = (0..=n_segments)
        .map(|i| Vector3::new(T::zero(), T::zero(), (T::of_usize(i) - half) * h))
        .collect();
    WireMesh::from_nodes(nodes, radius)
}

/// Correspondence between a child mesh's basis functions and a parent's.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NestingMap {
    pub parent: MeshId,
    pub child: MeshId,
    pub index_map: Vec<Option<usize>>,
}

impl NestingMap {
    pub fn is_complete(&self) -> bool {
        self.index_map.iter().all(Option::is_some)
    }

    pub fn mapped(&self) -> Vec<usize> {
        self.index_map.iter().flatten().copied().collect()
    }

    pub fn is_order_preserving(&self) -> bool {
        self.mapped().windows(2).all(|w| w[0] < w[1])
    }
}

/// Maps each child basis function onto the parent basis function whose three
/// support nodes coincide with its own (same orientation) within `tol`.
pub fn nest<T: Float>(child: &WireMesh<T>, parent: &WireMesh<T>, tol: T) -> NestingMap {
    let close = |a: &Point3<T>, b: &Point3<T>| (a - b).norm() <= tol;
    let pn = parent.nodes();
    let index_map = (0..child.basis_count())
        .map(|mu| {
            let c = &child.nodes()[mu..mu + 3];
            (0..parent.basis_count()).find(|&m| {
                let p = &pn[m..m + 3];
                close(&c[0], &p[0]) && close(&c[1], &p[1]) && close(&c[2], &p[2])
            })
        })
        .collect();
    NestingMap {
        parent: parent.id().clone(),
        child: child.id().clone(),
        index_map,
    }
}
