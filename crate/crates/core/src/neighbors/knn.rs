use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use super::Octree;
use crate::{Error, MetricTensor, ParticleTable, Policy, Result};

/// Relative slack on the λ_min box bound. The bound must never exceed a
/// computed ξ for a point inside the box, so it is shaved below rounding.
const BOUND_SLACK: f64 = 1e-9;

/// One entry of a neighbour list.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Neighbor {
    pub id: usize,
    /// Squared metric distance from the query particle.
    pub xi: f64,
}

/// Total order used for ranking: `(ξ, id)` lexicographic.
#[inline]
fn rank(a: &Neighbor, b: &Neighbor) -> Ordering {
    a.xi.total_cmp(&b.xi).then(a.id.cmp(&b.id))
}

#[derive(Clone, Copy)]
struct Ranked(Neighbor);

impl PartialEq for Ranked {
    fn eq(&self, other: &Self) -> bool {
        rank(&self.0, &other.0) == Ordering::Equal
    }
}
impl Eq for Ranked {}
impl PartialOrd for Ranked {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Ranked {
    fn cmp(&self, other: &Self) -> Ordering {
        rank(&self.0, &other.0)
    }
}

#[derive(Clone, Copy, PartialEq)]
struct CellBound {
    bound: f64,
    cell: u32,
}
impl Eq for CellBound {}
impl PartialOrd for CellBound {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for CellBound {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then(self.cell.cmp(&other.cell))
    }
}

fn check_query(table: &ParticleTable, i: usize, k: usize) -> Result<()> {
    if i >= table.len() {
        return Err(Error::InvalidArgument(format!(
            "particle id {i} out of range (n = {})",
            table.len()
        )));
    }
    if k == 0 || k > table.len() {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={}",
            table.len()
        )));
    }
    Ok(())
}

/// The `k` nearest particles to particle `i` under `metric`.
///
/// Particle `i` itself always occupies rank 0 with `ξ = 0`; the remaining
/// `k − 1` entries are the other particles ordered by `(ξ, id)`.
pub fn knn_query(
    tree: &Octree,
    table: &ParticleTable,
    i: usize,
    k: usize,
    metric: &MetricTensor,
) -> Result<Vec<Neighbor>> {
    check_query(table, i, k)?;
    if tree.len() != table.len() {
        return Err(Error::InvalidArgument(format!(
            "octree indexes {} particles, table has {}",
            tree.len(),
            table.len()
        )));
    }
    let pos = table.positions();
    let x = pos[i];
    let mut out = Vec::with_capacity(k);
    out.push(Neighbor { id: i, xi: 0.0 });
    let want = k - 1;
    if want == 0 {
        return Ok(out);
    }

    let lam = metric.min_eigenvalue() * (1.0 - BOUND_SLACK);
    let mut best: BinaryHeap<Ranked> = BinaryHeap::with_capacity(want + 1);
    let mut frontier: BinaryHeap<Reverse<CellBound>> = BinaryHeap::new();
    frontier.push(Reverse(CellBound { bound: 0.0, cell: 0 }));

    while let Some(Reverse(CellBound { bound, cell })) = frontier.pop() {
        if best.len() == want && bound > best.peek().map_or(f64::INFINITY, |w| w.0.xi) {
            break;
        }
        let cell = tree.cell(cell);
        match &cell.kind {
            super::octree::NodeKind::Leaf { .. } => {
                for &j in tree.leaf_ids(cell) {
                    if j == i {
                        continue;
                    }
                    let cand = Neighbor {
                        id: j,
                        xi: metric.distance_sq(&x, &pos[j]),
                    };
                    if best.len() < want {
                        best.push(Ranked(cand));
                    } else if rank(&cand, &best.peek().expect("heap is full").0) == Ordering::Less {
                        best.pop();
                        best.push(Ranked(cand));
                    }
                }
            }
            super::octree::NodeKind::Internal { children } => {
                for c in children.iter().flatten() {
                    let bound = lam * tree.cell(*c).distance_sq(&x);
                    if best.len() == want && bound > best.peek().map_or(f64::INFINITY, |w| w.0.xi) {
                        continue;
                    }
                    frontier.push(Reverse(CellBound { bound, cell: *c }));
                }
            }
        }
    }

    let mut rest: Vec<Neighbor> = best.into_iter().map(|r| r.0).collect();
    rest.sort_by(rank);
    out.extend(rest);
    Ok(out)
}

/// O(n) reference scan with the same ranking rule as [`knn_query`].
pub fn brute_force_query(
    table: &ParticleTable,
    i: usize,
    k: usize,
    metric: &MetricTensor,
) -> Result<Vec<Neighbor>> {
    check_query(table, i, k)?;
    let pos = table.positions();
    let mut all: Vec<Neighbor> = (0..table.len())
        .filter(|&j| j != i)
        .map(|j| Neighbor {
            id: j,
            xi: metric.distance_sq(&pos[i], &pos[j]),
        })
        .collect();
    all.sort_by(rank);
    all.truncate(k - 1);
    all.insert(0, Neighbor { id: i, xi: 0.0 });
    Ok(all)
}

/// Which metric applies to each query particle.
#[derive(Clone, Copy, Debug)]
pub enum MetricField<'a> {
    Global(&'a MetricTensor),
    PerParticle(&'a [MetricTensor]),
}

impl<'a> MetricField<'a> {
    pub fn get(&self, i: usize) -> &'a MetricTensor {
        match self {
            MetricField::Global(m) => m,
            MetricField::PerParticle(ms) => &ms[i],
        }
    }
}

/// The k-NN relation: for each particle an ordered list of `k` ids.
#[derive(Clone, Debug, PartialEq)]
pub struct NeighborRelation {
    k: usize,
    ids: Vec<usize>,
    xi: Vec<f64>,
}

impl NeighborRelation {
    /// Assembles a relation from per-particle lists, checking the
    /// reflexivity and ordering invariants.
    pub fn from_lists(k: usize, lists: Vec<Vec<Neighbor>>) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        let n = lists.len();
        let mut ids = Vec::with_capacity(n * k);
        let mut xi = Vec::with_capacity(n * k);
        for (i, list) in lists.into_iter().enumerate() {
            if list.len() != k {
                return Err(Error::InvalidArgument(format!(
                    "neighbour list of {i} has {} entries, expected {k}",
                    list.len()
                )));
            }
            if list[0].id != i || list[0].xi != 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "neighbour list of {i} must start with itself"
                )));
            }
            if list.windows(2).any(|w| w[1].xi < w[0].xi) {
                return Err(Error::InvalidArgument(format!(
                    "neighbour list of {i} is not sorted by distance"
                )));
            }
            if let Some(bad) = list.iter().find(|nb| nb.id >= n) {
                return Err(Error::InvalidArgument(format!(
                    "neighbour list of {i} references unknown id {}",
                    bad.id
                )));
            }
            ids.extend(list.iter().map(|nb| nb.id));
            xi.extend(list.iter().map(|nb| nb.xi));
        }
        Ok(Self { k, ids, xi })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of particles.
    pub fn len(&self) -> usize {
        self.ids.len() / self.k
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.ids[i * self.k..(i + 1) * self.k]
    }

    pub fn distances(&self, i: usize) -> &[f64] {
        &self.xi[i * self.k..(i + 1) * self.k]
    }

    /// ξ of the farthest (k-th) neighbour of `i`.
    pub fn xi_max(&self, i: usize) -> f64 {
        self.xi[(i + 1) * self.k - 1]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).contains(&j)
    }

    /// All ordered pairs `(i, j)` with `j ∈ N_k(i)`.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |i| self.neighbors(i).iter().map(move |&j| (i, j)))
    }
}

/// k-NN lists for every particle.
pub fn knn_all(
    tree: &Octree,
    table: &ParticleTable,
    k: usize,
    metrics: MetricField<'_>,
    policy: Policy,
) -> Result<NeighborRelation> {
    if let MetricField::PerParticle(ms) = metrics {
        if ms.len() != table.len() {
            return Err(Error::InvalidArgument(format!(
                "{} metrics for {} particles",
                ms.len(),
                table.len()
            )));
        }
    }
    let lists = policy.try_map(table.len(), |i| knn_query(tree, table, i, k, metrics.get(i)))?;
    NeighborRelation::from_lists(k, lists)
}
