use super::NeighborRelation;

/// Symmetric closure of a k-NN relation: `E = N ∪ Nᵀ`.
///
/// Stored in compressed rows; each row is sorted by id.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EffectiveNeighbors {
    offsets: Vec<usize>,
    ids: Vec<usize>,
}

impl EffectiveNeighbors {
    pub fn len(&self) -> usize {
        self.offsets.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `E(i)`, ascending by id.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.ids[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Total number of ordered pairs.
    pub fn pair_count(&self) -> usize {
        self.ids.len()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.len()).flat_map(move |i| self.neighbors(i).iter().map(move |&j| (i, j)))
    }

    /// Builds rows directly from adjacency lists; rows are sorted and
    /// deduplicated but not symmetrised.
    pub(crate) fn from_rows(rows: Vec<Vec<usize>>) -> Self {
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        offsets.push(0);
        let mut ids = Vec::new();
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            ids.extend_from_slice(&row);
            offsets.push(ids.len());
        }
        Self { offsets, ids }
    }
}

pub fn symmetric_closure(rel: &NeighborRelation) -> EffectiveNeighbors {
    let n = rel.len();
    let mut rows: Vec<Vec<usize>> = (0..n).map(|i| rel.neighbors(i).to_vec()).collect();
    for (i, j) in rel.pairs() {
        if i != j {
            rows[j].push(i);
        }
    }
    EffectiveNeighbors::from_rows(rows)
}
