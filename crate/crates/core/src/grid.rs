//! Structured rectangular grid with square cells.
//!
//! Nodes are numbered row-major from the bottom-left corner, `j * (nx + 1) + i`.
//! Elements likewise, `j * nx + i`. Element nodes run counterclockwise starting
//! at the bottom-left corner.

use serde::{Deserialize, Serialize};

use crate::error::{Result, TopOptError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct GridSpec<T> {
    pub nx: usize,
    pub ny: usize,
    pub lx: T,
    pub ly: T,
}

impl<T: Scalar> GridSpec<T> {
    pub fn new(nx: usize, ny: usize, lx: T, ly: T) -> Self {
        Self { nx, ny, lx, ly }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.ny < 2 {
            return Err(TopOptError::Config(format!(
                "grid needs at least 2 elements per axis, got {}x{}",
                self.nx, self.ny
            )));
        }
        if !(self.lx > T::zero() && self.ly > T::zero()) || !self.lx.is_finite() || !self.ly.is_finite() {
            return Err(TopOptError::Config("domain side lengths must be positive".into()));
        }
        let hx = self.lx / T::from_usize_lossy(self.nx);
        let hy = self.ly / T::from_usize_lossy(self.ny);
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(8.0));
        if (hx - hy).abs() > tol * hx.max(hy) {
            return Err(TopOptError::Config(format!(
                "cells must be square: lx/nx = {hx}, ly/ny = {hy}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    spec: GridSpec<T>,
    h: T,
}

impl<T: Scalar> Grid<T> {
    pub fn new(spec: GridSpec<T>) -> Result<Self> {
        spec.validate()?;
        let h = spec.lx / T::from_usize_lossy(spec.nx);
        Ok(Self { spec, h })
    }

    /// Unit-aspect grid on `[0, nx*h] x [0, ny*h]` with `h = 1/max(nx, ny)`.
    pub fn unit(nx: usize, ny: usize) -> Result<Self> {
        let m = T::from_usize_lossy(nx.max(ny));
        Self::new(GridSpec::new(
            nx,
            ny,
            T::from_usize_lossy(nx) / m,
            T::from_usize_lossy(ny) / m,
        ))
    }

    pub fn spec(&self) -> &GridSpec<T> {
        &self.spec
    }
    pub fn nx(&self) -> usize {
        self.spec.nx
    }
    pub fn ny(&self) -> usize {
        self.spec.ny
    }
    pub fn lx(&self) -> T {
        self.spec.lx
    }
    pub fn ly(&self) -> T {
        self.spec.ly
    }
    pub fn h(&self) -> T {
        self.h
    }
    pub fn cell_area(&self) -> T {
        self.h * self.h
    }
    pub fn area(&self) -> T {
        self.spec.lx * self.spec.ly
    }
    pub fn n_nodes(&self) -> usize {
        (self.spec.nx + 1) * (self.spec.ny + 1)
    }
    pub fn n_elems(&self) -> usize {
        self.spec.nx * self.spec.ny
    }

    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        j * (self.spec.nx + 1) + i
    }

    #[inline]
    pub fn elem(&self, i: usize, j: usize) -> usize {
        j * self.spec.nx + i
    }

    #[inline]
    pub fn elem_ij(&self, e: usize) -> (usize, usize) {
        (e % self.spec.nx, e / self.spec.nx)
    }

    #[inline]
    pub fn node_ij(&self, n: usize) -> (usize, usize) {
        (n % (self.spec.nx + 1), n / (self.spec.nx + 1))
    }

    /// Counterclockwise corner nodes of element `e`.
    #[inline]
    pub fn elem_nodes(&self, e: usize) -> [usize; 4] {
        let (i, j) = self.elem_ij(e);
        let n0 = self.node(i, j);
        let n3 = self.node(i, j + 1);
        [n0, n0 + 1, n3 + 1, n3]
    }

    pub fn node_coords(&self, n: usize) -> [T; 2] {
        let (i, j) = self.node_ij(n);
        [T::from_usize_lossy(i) * self.h, T::from_usize_lossy(j) * self.h]
    }

    pub fn centroid(&self, e: usize) -> [T; 2] {
        let (i, j) = self.elem_ij(e);
        let half = T::lit(0.5);
        [
            (T::from_usize_lossy(i) + half) * self.h,
            (T::from_usize_lossy(j) + half) * self.h,
        ]
    }

    /// Number of element edges along `edge`.
    pub fn edge_len_cells(&self, edge: Edge) -> usize {
        match edge {
            Edge::Left | Edge::Right => self.spec.ny,
            Edge::Bottom | Edge::Top => self.spec.nx,
        }
    }

    /// Node at position `k` (0-based, increasing coordinate) along `edge`.
    pub fn edge_node(&self, edge: Edge, k: usize) -> usize {
        match edge {
            Edge::Left => self.node(0, k),
            Edge::Right => self.node(self.spec.nx, k),
            Edge::Bottom => self.node(k, 0),
            Edge::Top => self.node(k, self.spec.ny),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Edge {
    Left,
    Right,
    Bottom,
    Top,
}

/// Which right-hand side a traction contributes to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LoadCase {
    In,
    Out,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SegmentKind<T> {
    /// Both displacement components fixed to zero.
    Clamp,
    /// Normal displacement component fixed to zero.
    RollerNormal,
    /// Traction per unit length.
    Traction { load: LoadCase, value: [T; 2] },
    Temperature { value: T },
    Insulated,
}

impl<T> SegmentKind<T> {
    fn is_dirichlet(&self) -> bool {
        matches!(
            self,
            SegmentKind::Clamp | SegmentKind::RollerNormal | SegmentKind::Temperature { .. }
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub edge: Edge,
    /// Fractions of the edge length, measured in increasing coordinate.
    pub start: T,
    pub end: T,
    pub kind: SegmentKind<T>,
}

impl<T: Scalar> Segment<T> {
    pub fn new(edge: Edge, start: T, end: T, kind: SegmentKind<T>) -> Self {
        Self { edge, start, end, kind }
    }

    pub fn full(edge: Edge, kind: SegmentKind<T>) -> Self {
        Self::new(edge, T::zero(), T::one(), kind)
    }

    /// Node positions `lo..=hi` along the edge after snapping to the nearest node.
    /// A nonempty segment never collapses to a single node.
    pub fn snapped(&self, grid: &Grid<T>) -> (usize, usize) {
        let n = T::from_usize_lossy(grid.edge_len_cells(self.edge));
        let snap = |f: T| (f * n).round().to_usize().unwrap_or(0);
        let (lo, hi) = (snap(self.start), snap(self.end));
        if lo == hi && self.end > self.start {
            // too short for the mesh: keep one cell around the midpoint
            let last = grid.edge_len_cells(self.edge) - 1;
            let mid = ((self.start + self.end) * T::lit(0.5) * n).floor().to_usize().unwrap_or(0).min(last);
            return (mid, mid + 1);
        }
        (lo, hi)
    }
}

pub type BoundarySpec<T> = Vec<Segment<T>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldKind {
    /// Two displacement components per node.
    Vector,
    /// One temperature per node.
    Scalar,
}

impl FieldKind {
    pub fn dofs_per_node(self) -> usize {
        match self {
            FieldKind::Vector => 2,
            FieldKind::Scalar => 1,
        }
    }
}

/// One element edge on the boundary carrying a traction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LoadedEdge<T> {
    pub nodes: [usize; 2],
    pub length: T,
    pub load: LoadCase,
    pub value: [T; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedBoundary<T> {
    /// Constrained dofs with prescribed values, sorted by dof.
    pub dirichlet: Vec<(usize, T)>,
    pub loaded_edges: Vec<LoadedEdge<T>>,
}

impl<T: Scalar> ResolvedBoundary<T> {
    /// Consistent nodal load vector for one load case (trapezoid rule per edge).
    pub fn load_vector(&self, n_nodes: usize, field: FieldKind, load: LoadCase) -> Vec<T> {
        let dpn = field.dofs_per_node();
        let mut f = vec![T::zero(); n_nodes * dpn];
        let half = T::lit(0.5);
        for le in self.loaded_edges.iter().filter(|le| le.load == load) {
            for &n in &le.nodes {
                for c in 0..dpn {
                    f[n * dpn + c] += le.value[c] * le.length * half;
                }
            }
        }
        f
    }

    pub fn total_loaded_length(&self, load: LoadCase) -> T {
        self.loaded_edges
            .iter()
            .filter(|e| e.load == load)
            .map(|e| e.length)
            .sum()
    }
}

/// Resolves boundary segments into constrained dofs and loaded edges.
pub fn resolve_boundary<T: Scalar>(
    grid: &Grid<T>,
    bcs: &[Segment<T>],
    field: FieldKind,
) -> Result<ResolvedBoundary<T>> {
    let dpn = field.dofs_per_node();
    let mut fixed: Vec<Option<T>> = vec![None; grid.n_nodes() * dpn];
    let mut loaded_edges = Vec::new();

    for (idx, seg) in bcs.iter().enumerate() {
        let ok = |v: T| v >= T::zero() && v <= T::one();
        if !(ok(seg.start) && ok(seg.end) && seg.start <= seg.end) {
            return Err(TopOptError::Config(format!(
                "boundary segment {idx}: start/end must satisfy 0 <= start <= end <= 1"
            )));
        }
        match (&seg.kind, field) {
            (SegmentKind::Clamp | SegmentKind::RollerNormal | SegmentKind::Traction { .. }, FieldKind::Scalar)
            | (SegmentKind::Temperature { .. }, FieldKind::Vector) => {
                return Err(TopOptError::Config(format!(
                    "boundary segment {idx}: kind {:?} does not apply to this field",
                    kind_name(&seg.kind)
                )));
            }
            _ => {}
        }
        let (lo, hi) = seg.snapped(grid);
        let mut set = |dof: usize, value: T| -> Result<()> {
            match fixed[dof] {
                Some(prev) if prev != value => Err(TopOptError::Config(format!(
                    "boundary segment {idx}: conflicting prescribed values at dof {dof}"
                ))),
                _ => {
                    fixed[dof] = Some(value);
                    Ok(())
                }
            }
        };
        match seg.kind {
            SegmentKind::Clamp => {
                for k in lo..=hi {
                    let n = grid.edge_node(seg.edge, k);
                    set(2 * n, T::zero())?;
                    set(2 * n + 1, T::zero())?;
                }
            }
            SegmentKind::RollerNormal => {
                let comp = match seg.edge {
                    Edge::Left | Edge::Right => 0,
                    Edge::Bottom | Edge::Top => 1,
                };
                for k in lo..=hi {
                    set(2 * grid.edge_node(seg.edge, k) + comp, T::zero())?;
                }
            }
            SegmentKind::Temperature { value } => {
                for k in lo..=hi {
                    set(grid.edge_node(seg.edge, k), value)?;
                }
            }
            SegmentKind::Traction { load, value } => {
                for k in lo..hi {
                    loaded_edges.push(LoadedEdge {
                        nodes: [grid.edge_node(seg.edge, k), grid.edge_node(seg.edge, k + 1)],
                        length: grid.h(),
                        load,
                        value,
                    });
                }
            }
            SegmentKind::Insulated => {}
        }
    }

    // Dirichlet and traction segments on the same edge may touch but not overlap.
    for (a_idx, a) in bcs.iter().enumerate() {
        if !a.kind.is_dirichlet() {
            continue;
        }
        for (b_idx, b) in bcs.iter().enumerate() {
            if !matches!(b.kind, SegmentKind::Traction { .. }) || a.edge != b.edge {
                continue;
            }
            let (a0, a1) = a.snapped(grid);
            let (b0, b1) = b.snapped(grid);
            if a0.max(b0) < a1.min(b1) {
                return Err(TopOptError::Config(format!(
                    "boundary segments {a_idx} and {b_idx} overlap: Dirichlet and traction parts must be disjoint"
                )));
            }
        }
    }

    let dirichlet = fixed
        .into_iter()
        .enumerate()
        .filter_map(|(d, v)| v.map(|v| (d, v)))
        .collect();
    Ok(ResolvedBoundary { dirichlet, loaded_edges })
}

fn kind_name<T>(k: &SegmentKind<T>) -> &'static str {
    match k {
        SegmentKind::Clamp => "clamp",
        SegmentKind::RollerNormal => "roller-normal",
        SegmentKind::Traction { .. } => "traction",
        SegmentKind::Temperature { .. } => "temperature",
        SegmentKind::Insulated => "insulated",
    }
}
