use crate::{Error, ParticleTable, Result, Vec3};

/// Relative margin added to the tight bounding cube of the root.
const ROOT_MARGIN: f64 = 1e-6;

/// Splitting stops at this depth even if a leaf is still over capacity.
/// Distinct positions closer than `root_size · 2⁻⁴⁸` end up sharing a leaf.
const MAX_DEPTH: u32 = 48;

#[derive(Clone, Debug, PartialEq)]
pub(crate) enum NodeKind {
    /// `ids[start..end]` of the owning tree.
    Leaf { start: usize, end: usize },
    Internal { children: [Option<u32>; 8] },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub min: Vec3,
    pub max: Vec3,
    pub count: usize,
    pub(crate) kind: NodeKind,
}

impl Cell {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }

    /// Squared Euclidean distance from `p` to this box (zero inside).
    #[inline]
    pub fn distance_sq(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for a in 0..3 {
            let d = if p[a] < self.min[a] {
                self.min[a] - p[a]
            } else if p[a] > self.max[a] {
                p[a] - self.max[a]
            } else {
                0.0
            };
            d2 += d * d;
        }
        d2
    }
}

/// Axis-aligned octree over particle positions.
///
/// Cells live in an arena with the root at index 0. Leaf particle ids are
/// contiguous ranges of a single permuted id array.
#[derive(Clone, Debug, PartialEq)]
pub struct Octree {
    cells: Vec<Cell>,
    ids: Vec<usize>,
    leaf_capacity: usize,
}

impl Octree {
    pub fn build(table: &ParticleTable, leaf_capacity: usize) -> Result<Self> {
        Self::from_positions(table.positions(), leaf_capacity)
    }

    pub fn from_positions(positions: &[Vec3], leaf_capacity: usize) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::InvalidArgument("cannot build an octree over zero particles".into()));
        }
        if leaf_capacity == 0 {
            return Err(Error::InvalidArgument("leaf capacity must be at least 1".into()));
        }
        if let Some(i) = positions.iter().position(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::Particle {
                index: i,
                reason: "non-finite position".into(),
            });
        }

        let mut lo = positions[0];
        let mut hi = positions[0];
        for p in positions {
            lo = lo.inf(p);
            hi = hi.sup(p);
        }
        let center = (lo + hi) * 0.5;
        let extent = (hi - lo).max();
        let half = if extent > 0.0 {
            0.5 * extent * (1.0 + ROOT_MARGIN)
        } else {
            ROOT_MARGIN * center.amax().max(1.0)
        };
        let half = Vec3::repeat(half);

        let mut tree = Octree {
            cells: Vec::new(),
            ids: (0..positions.len()).collect(),
            leaf_capacity,
        };
        tree.build_cell(positions, center - half, center + half, 0, positions.len(), 0);
        Ok(tree)
    }

    fn build_cell(&mut self, pos: &[Vec3], min: Vec3, max: Vec3, start: usize, end: usize, depth: u32) -> u32 {
        let index = self.cells.len() as u32;
        self.cells.push(Cell {
            min,
            max,
            count: end - start,
            kind: NodeKind::Leaf { start, end },
        });

        let slice = &self.ids[start..end];
        let coincident = slice.iter().all(|&i| pos[i] == pos[slice[0]]);
        if end - start <= self.leaf_capacity || coincident || depth >= MAX_DEPTH {
            return index;
        }

        let mid = (min + max) * 0.5;
        let octant = |p: &Vec3| -> usize {
            (p[0] >= mid[0]) as usize | ((p[1] >= mid[1]) as usize) << 1 | ((p[2] >= mid[2]) as usize) << 2
        };
        // Stable counting sort by octant keeps construction deterministic.
        let mut buckets: [Vec<usize>; 8] = Default::default();
        for &i in &self.ids[start..end] {
            buckets[octant(&pos[i])].push(i);
        }
        let mut children = [None; 8];
        let mut cursor = start;
        for (o, bucket) in buckets.iter().enumerate() {
            self.ids[cursor..cursor + bucket.len()].copy_from_slice(bucket);
            let (s, e) = (cursor, cursor + bucket.len());
            cursor = e;
            if s == e {
                continue;
            }
            let mut cmin = min;
            let mut cmax = max;
            for a in 0..3 {
                if o >> a & 1 == 1 {
                    cmin[a] = mid[a];
                } else {
                    cmax[a] = mid[a];
                }
            }
            children[o] = Some(self.build_cell(pos, cmin, cmax, s, e, depth + 1));
        }
        self.cells[index as usize].kind = NodeKind::Internal { children };
        index
    }

    pub fn root(&self) -> &Cell {
        &self.cells[0]
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn leaf_capacity(&self) -> usize {
        self.leaf_capacity
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Child cells of `cell`, in octant order.
    pub fn children(&self, cell: &Cell) -> impl Iterator<Item = &Cell> {
        let kids = match &cell.kind {
            NodeKind::Internal { children } => *children,
            NodeKind::Leaf { .. } => [None; 8],
        };
        kids.into_iter().flatten().map(move |c| &self.cells[c as usize])
    }

    /// Particle ids held directly by a leaf (empty for internal cells).
    pub fn leaf_ids(&self, cell: &Cell) -> &[usize] {
        match cell.kind {
            NodeKind::Leaf { start, end } => &self.ids[start..end],
            NodeKind::Internal { .. } => &[],
        }
    }

    pub(crate) fn cell(&self, index: u32) -> &Cell {
        &self.cells[index as usize]
    }
}
