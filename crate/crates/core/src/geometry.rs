//! Structured meshes on an interval or an axis-aligned rectangle.
//!
//! A mesh stores physical nodes in row-major order (`index = j * nx + i`) and
//! reserves two ghost layers beyond every boundary so that the fourth-order
//! stencils can be closed with boundary conditions. In one dimension the
//! `y` axis has a single row and carries no ghosts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ghost layers allocated on every side of the grid.
pub const GHOST_LAYERS: usize = 2;

/// Minimum number of nodes per axis accepted by [`Mesh::build`].
pub const MIN_RESOLUTION: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DomainKind {
    Interval,
    Rectangle,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Segment {
    /// `x = 0`
    Left,
    /// `x = Lx`
    Right,
    /// `y = 0`
    Bottom,
    /// `y = Ly`
    Top,
}

impl Segment {
    pub fn outward_normal(self) -> [f64; 2] {
        match self {
            Segment::Left => [-1.0, 0.0],
            Segment::Right => [1.0, 0.0],
            Segment::Bottom => [0.0, -1.0],
            Segment::Top => [0.0, 1.0],
        }
    }

    /// Unit tangent `τ = (-ν₂, ν₁)`.
    pub fn tangent(self) -> [f64; 2] {
        let n = self.outward_normal();
        [-n[1], n[0]]
    }

    /// Axis the normal points along.
    pub fn normal_axis(self) -> usize {
        match self {
            Segment::Left | Segment::Right => 0,
            Segment::Bottom | Segment::Top => 1,
        }
    }

    /// `+1` when the outward normal points along the positive axis.
    pub fn normal_sign(self) -> isize {
        match self {
            Segment::Left | Segment::Bottom => -1,
            Segment::Right | Segment::Top => 1,
        }
    }

    pub fn all_for(kind: DomainKind) -> &'static [Segment] {
        match kind {
            DomainKind::Interval => &[Segment::Left, Segment::Right],
            DomainKind::Rectangle => {
                &[Segment::Left, Segment::Right, Segment::Bottom, Segment::Top]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundaryRole {
    /// `u = ∂ν u = 0`
    Clamped,
    /// Free edge with septic velocity feedback in the shear condition.
    FreeDamped,
    /// `u = 0`, `Δu = -D(∂ν uₜ)`.
    HingedDamped,
}

/// Boundary configuration of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Configuration {
    /// Hinged-dissipative on an interval.
    #[serde(rename = "HD1D")]
    Hd1d,
    /// Hinged-dissipative on a rectangle.
    #[serde(rename = "HD2D")]
    Hd2d,
    /// Free-clamped-dissipative beam.
    #[serde(rename = "FCD1D")]
    Fcd1d,
}

impl Configuration {
    pub fn is_hinged(self) -> bool {
        matches!(self, Configuration::Hd1d | Configuration::Hd2d)
    }

    pub fn domain_kind(self) -> DomainKind {
        match self {
            Configuration::Hd2d => DomainKind::Rectangle,
            _ => DomainKind::Interval,
        }
    }
}

/// Geometric description of the domain and its boundary partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub kind: DomainKind,
    pub extents: Vec<f64>,
    pub partition: BTreeMap<Segment, BoundaryRole>,
}

impl DomainSpec {
    /// Interval `[0, length]` hinged at both ends.
    pub fn hinged_interval(length: f64) -> Self {
        Self::uniform(
            DomainKind::Interval,
            vec![length],
            BoundaryRole::HingedDamped,
        )
    }

    /// Rectangle `[0, lx] × [0, ly]` hinged on every edge.
    pub fn hinged_rectangle(lx: f64, ly: f64) -> Self {
        Self::uniform(
            DomainKind::Rectangle,
            vec![lx, ly],
            BoundaryRole::HingedDamped,
        )
    }

    /// Beam clamped at `x = 0` and free (damped) at `x = length`.
    pub fn cantilever(length: f64) -> Self {
        let mut partition = BTreeMap::new();
        partition.insert(Segment::Left, BoundaryRole::Clamped);
        partition.insert(Segment::Right, BoundaryRole::FreeDamped);
        Self {
            kind: DomainKind::Interval,
            extents: vec![length],
            partition,
        }
    }

    /// Default domain partition for a configuration.
    pub fn for_configuration(configuration: Configuration, extents: Vec<f64>) -> Self {
        match configuration {
            Configuration::Fcd1d => {
                let mut spec = Self::cantilever(extents.first().copied().unwrap_or(1.0));
                spec.extents = extents;
                spec
            }
            c => Self::uniform(c.domain_kind(), extents, BoundaryRole::HingedDamped),
        }
    }

    fn uniform(kind: DomainKind, extents: Vec<f64>, role: BoundaryRole) -> Self {
        let partition = Segment::all_for(kind).iter().map(|&s| (s, role)).collect();
        Self {
            kind,
            extents,
            partition,
        }
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => 2,
        }
    }

    pub fn validate_extents(&self) -> Result<()> {
        if self.extents.len() != self.dim() {
            return Err(Error::InvalidDomain(format!(
                "{:?} needs {} extent(s), got {}",
                self.kind,
                self.dim(),
                self.extents.len()
            )));
        }
        if let Some(bad) = self.extents.iter().find(|&&e| !(e.is_finite() && e > 0.0)) {
            return Err(Error::InvalidDomain(format!(
                "extent {bad} must be positive"
            )));
        }
        Ok(())
    }

    /// The boundary configuration implied by the partition.
    ///
    /// HD needs every segment hinged-damped; FCD exists only on the interval
    /// with one clamped and one free-damped end.
    pub fn configuration(&self) -> Result<Configuration> {
        let segments = Segment::all_for(self.kind);
        if self.partition.len() != segments.len()
            || segments.iter().any(|s| !self.partition.contains_key(s))
        {
            return Err(Error::InconsistentPartition(format!(
                "{:?} needs a role for each of {:?}",
                self.kind, segments
            )));
        }
        let roles: Vec<BoundaryRole> = segments.iter().map(|s| self.partition[s]).collect();
        if roles.iter().all(|&r| r == BoundaryRole::HingedDamped) {
            return Ok(match self.kind {
                DomainKind::Interval => Configuration::Hd1d,
                DomainKind::Rectangle => Configuration::Hd2d,
            });
        }
        if self.kind == DomainKind::Interval {
            let clamped = roles
                .iter()
                .filter(|&&r| r == BoundaryRole::Clamped)
                .count();
            let free = roles
                .iter()
                .filter(|&&r| r == BoundaryRole::FreeDamped)
                .count();
            if clamped == 1 && free == 1 {
                return Ok(Configuration::Fcd1d);
            }
        }
        Err(Error::InconsistentPartition(format!(
            "roles {:?} match neither HD (all hinged) nor FCD (interval, one clamped + one free end)",
            roles
        )))
    }
}

/// Classification of a node of the extended grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeClass {
    Interior,
    Boundary(Segment),
    /// Node shared by two edges of the rectangle.
    Corner(Segment, Segment),
    Ghost(u8),
    /// Outside the allocated extended grid.
    Outside,
}

/// Outcome of [`check_star_shaped`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StarShapedReport {
    pub min_over_boundary: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    kind: DomainKind,
    configuration: Configuration,
    nodes: [usize; 2],
    spacing: [f64; 2],
    extents: [f64; 2],
    partition: BTreeMap<Segment, BoundaryRole>,
    area_weights: Vec<f64>,
}

impl Mesh {
    /// Build a uniform mesh with `resolution` nodes per axis (boundary
    /// nodes included). For an interval only `resolution[0]` is read.
    pub fn build(spec: &DomainSpec, resolution: &[usize]) -> Result<Self> {
        spec.validate_extents()?;
        let configuration = spec.configuration()?;
        let dim = spec.dim();
        if resolution.len() < dim {
            return Err(Error::InvalidDomain(format!(
                "need {dim} resolution value(s), got {}",
                resolution.len()
            )));
        }
        for (axis, &n) in resolution.iter().take(dim).enumerate() {
            if n < MIN_RESOLUTION {
                return Err(Error::ResolutionTooSmall {
                    axis,
                    got: n,
                    min: MIN_RESOLUTION,
                });
            }
        }
        let nodes = [resolution[0], if dim == 2 { resolution[1] } else { 1 }];
        let extents = [
            spec.extents[0],
            if dim == 2 { spec.extents[1] } else { 0.0 },
        ];
        let spacing = [
            extents[0] / (nodes[0] - 1) as f64,
            if dim == 2 {
                extents[1] / (nodes[1] - 1) as f64
            } else {
                1.0
            },
        ];
        let wx = trapezoid_weights(nodes[0], spacing[0]);
        let wy = if dim == 2 {
            trapezoid_weights(nodes[1], spacing[1])
        } else {
            vec![1.0]
        };
        let mut area_weights = Vec::with_capacity(nodes[0] * nodes[1]);
        for wyj in &wy {
            for wxi in &wx {
                area_weights.push(wxi * wyj);
            }
        }
        Ok(Self {
            kind: spec.kind,
            configuration,
            nodes,
            spacing,
            extents,
            partition: spec.partition.clone(),
            area_weights,
        })
    }

    pub fn kind(&self) -> DomainKind {
        self.kind
    }

    pub fn configuration(&self) -> Configuration {
        self.configuration
    }

    pub fn dim(&self) -> usize {
        match self.kind {
            DomainKind::Interval => 1,
            DomainKind::Rectangle => 2,
        }
    }

    pub fn nx(&self) -> usize {
        self.nodes[0]
    }

    pub fn ny(&self) -> usize {
        self.nodes[1]
    }

    pub fn nodes(&self) -> [usize; 2] {
        self.nodes
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn extents(&self) -> [f64; 2] {
        self.extents
    }

    pub fn len(&self) -> usize {
        self.nodes[0] * self.nodes[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn role(&self, segment: Segment) -> Option<BoundaryRole> {
        self.partition.get(&segment).copied()
    }

    pub fn segments(&self) -> &'static [Segment] {
        Segment::all_for(self.kind)
    }

    pub fn domain_spec(&self) -> DomainSpec {
        DomainSpec {
            kind: self.kind,
            extents: self.extents[..self.dim()].to_vec(),
            partition: self.partition.clone(),
        }
    }

    /// Domain measure (length or area).
    pub fn measure(&self) -> f64 {
        match self.kind {
            DomainKind::Interval => self.extents[0],
            DomainKind::Rectangle => self.extents[0] * self.extents[1],
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nodes[0] + i
    }

    #[inline]
    pub fn ij(&self, index: usize) -> (usize, usize) {
        (index % self.nodes[0], index / self.nodes[0])
    }

    pub fn coords(&self, i: usize, j: usize) -> [f64; 2] {
        self.coords_ext(i as isize, j as isize)
    }

    /// Coordinates of a node of the extended grid (ghosts included).
    pub fn coords_ext(&self, i: isize, j: isize) -> [f64; 2] {
        let y = if self.dim() == 2 {
            j as f64 * self.spacing[1]
        } else {
            0.0
        };
        [i as f64 * self.spacing[0], y]
    }

    /// Extended grid shape `(nx + 4, ny + 4)`; the `y` extent is `1` in 1D.
    pub fn ext_dims(&self) -> [usize; 2] {
        let g = 2 * GHOST_LAYERS;
        [
            self.nodes[0] + g,
            if self.dim() == 2 {
                self.nodes[1] + g
            } else {
                1
            },
        ]
    }

    pub fn ext_len(&self) -> usize {
        let d = self.ext_dims();
        d[0] * d[1]
    }

    /// Storage index of an extended-grid node; `None` outside the allocation.
    #[inline]
    pub fn ext_index(&self, i: isize, j: isize) -> Option<usize> {
        let g = GHOST_LAYERS as isize;
        let d = self.ext_dims();
        let ii = i + g;
        let jj = if self.dim() == 2 { j + g } else { j };
        if ii < 0 || jj < 0 || ii >= d[0] as isize || jj >= d[1] as isize {
            return None;
        }
        Some(jj as usize * d[0] + ii as usize)
    }

    pub fn classify(&self, i: isize, j: isize) -> NodeClass {
        if self.ext_index(i, j).is_none() {
            return NodeClass::Outside;
        }
        let nx = self.nodes[0] as isize;
        let ny = self.nodes[1] as isize;
        let dx = if i < 0 {
            -i
        } else if i >= nx {
            i - nx + 1
        } else {
            0
        };
        let dy = if j < 0 {
            -j
        } else if j >= ny {
            j - ny + 1
        } else {
            0
        };
        let layer = dx.max(dy);
        if layer > 0 {
            return NodeClass::Ghost(layer as u8);
        }
        let on_x = if i == 0 {
            Some(Segment::Left)
        } else if i == nx - 1 {
            Some(Segment::Right)
        } else {
            None
        };
        if self.dim() == 1 {
            return on_x.map_or(NodeClass::Interior, NodeClass::Boundary);
        }
        let on_y = if j == 0 {
            Some(Segment::Bottom)
        } else if j == ny - 1 {
            Some(Segment::Top)
        } else {
            None
        };
        match (on_x, on_y) {
            (None, None) => NodeClass::Interior,
            (Some(a), None) | (None, Some(a)) => NodeClass::Boundary(a),
            (Some(a), Some(b)) => NodeClass::Corner(a, b),
        }
    }

    /// Trapezoid area (or length) weight of every physical node.
    pub fn area_weights(&self) -> &[f64] {
        &self.area_weights
    }

    /// Nodes of `segment` ordered along the edge, corners included.
    pub fn segment_nodes(&self, segment: Segment) -> Result<Vec<(usize, usize)>> {
        if !self.segments().contains(&segment) {
            return Err(Error::SegmentNotInMesh(segment));
        }
        let [nx, ny] = self.nodes;
        Ok(match segment {
            Segment::Left => (0..ny).map(|j| (0, j)).collect(),
            Segment::Right => (0..ny).map(|j| (nx - 1, j)).collect(),
            Segment::Bottom => (0..nx).map(|i| (i, 0)).collect(),
            Segment::Top => (0..nx).map(|i| (i, ny - 1)).collect(),
        })
    }

    /// Arc-length weights matching [`Mesh::segment_nodes`]: trapezoid along
    /// each edge with corner weight zero. On an interval the single endpoint
    /// has weight one (point evaluation).
    pub fn segment_weights(&self, segment: Segment) -> Result<Vec<f64>> {
        let nodes = self.segment_nodes(segment)?;
        if self.dim() == 1 {
            return Ok(vec![1.0]);
        }
        let h = self.spacing[1 - segment.normal_axis()];
        let n = nodes.len();
        Ok((0..n)
            .map(|k| if k == 0 || k == n - 1 { 0.0 } else { h })
            .collect())
    }

    /// Spacing along the normal of `segment`.
    pub fn normal_spacing(&self, segment: Segment) -> f64 {
        self.spacing[segment.normal_axis()]
    }

    /// Step `k` nodes from `(i, j)` along the outward normal of `segment`
    /// (negative `k` steps inward).
    pub fn step_normal(&self, segment: Segment, i: isize, j: isize, k: isize) -> (isize, isize) {
        let s = segment.normal_sign() * k;
        match segment.normal_axis() {
            0 => (i + s, j),
            _ => (i, j + s),
        }
    }

    /// Mesh with twice the resolution; coarse node `(i, j)` sits at fine
    /// node `(2i, 2j)`.
    pub fn refined(&self) -> Result<Self> {
        let res: Vec<usize> = (0..self.dim())
            .map(|a| 2 * (self.nodes[a] - 1) + 1)
            .collect();
        Mesh::build(&self.domain_spec(), &res)
    }

    /// Iterator over physical node indices that are not on the boundary.
    pub fn interior_nodes(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let [nx, ny] = self.nodes;
        let (j0, j1) = if self.dim() == 2 { (1, ny - 1) } else { (0, 1) };
        (j0..j1).flat_map(move |j| (1..nx - 1).map(move |i| (i, j)))
    }
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    (0..n)
        .map(|k| if k == 0 || k == n - 1 { 0.5 * h } else { h })
        .collect()
}

/// Evaluate the star-shaped condition `(x - x₀)·ν ≥ 0` over the boundary.
///
/// On straight edges `(x - x₀)·ν` is constant along each edge, so the minimum
/// over boundary nodes is the minimum over edges.
pub fn check_star_shaped(spec: &DomainSpec, anchor: [f64; 2]) -> StarShapedReport {
    let mut min = f64::INFINITY;
    for &segment in Segment::all_for(spec.kind) {
        let axis = segment.normal_axis();
        let edge = match segment {
            Segment::Left | Segment::Bottom => 0.0,
            Segment::Right | Segment::Top => spec.extents.get(axis).copied().unwrap_or(0.0),
        };
        let value = (edge - anchor[axis]) * segment.outward_normal()[axis];
        min = min.min(value);
    }
    StarShapedReport {
        min_over_boundary: min,
        satisfied: min >= 0.0,
    }
}

/// The flux multiplier field `h(x) = x - x₀` sampled at every physical node.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxField {
    pub anchor: [f64; 2],
    pub values: Vec<[f64; 2]>,
}

impl FluxField {
    pub fn new(mesh: &Mesh, anchor: [f64; 2]) -> Self {
        let values = (0..mesh.len())
            .map(|k| {
                let (i, j) = mesh.ij(k);
                let x = mesh.coords(i, j);
                let mut h = [x[0] - anchor[0], x[1] - anchor[1]];
                if mesh.dim() == 1 {
                    h[1] = 0.0;
                }
                h
            })
            .collect();
        Self { anchor, values }
    }

    pub fn at(&self, index: usize) -> [f64; 2] {
        self.values[index]
    }
}
