//! Sparse implicit-feedback storage.
//!
//! Rows are kept in compressed sparse row form: one row per user, item
//! indices strictly increasing, counts strictly positive. Unobserved pairs are
//! implicit zeros and are never materialized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One observed entry of a row: `(item_index, count)`.
pub type Entry = (u32, u32);

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionStore {
    n_users: usize,
    n_items: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    counts: Vec<u32>,
}

impl InteractionStore {
    /// Builds a store from per-user rows, validating every invariant.
    pub fn from_rows(n_users: usize, n_items: usize, rows: Vec<Vec<Entry>>) -> Result<Self> {
        if n_users == 0 || n_items == 0 {
            return Err(Error::InvalidInteractions(format!(
                "shape must be positive, got {n_users}x{n_items}"
            )));
        }
        if rows.len() != n_users {
            return Err(Error::DimensionMismatch {
                context: "interaction rows",
                expected: n_users,
                actual: rows.len(),
            });
        }
        let nnz = rows.iter().map(Vec::len).sum();
        let mut indptr = Vec::with_capacity(n_users + 1);
        let mut indices = Vec::with_capacity(nnz);
        let mut counts = Vec::with_capacity(nnz);
        indptr.push(0);
        for (u, row) in rows.into_iter().enumerate() {
            let mut prev: Option<u32> = None;
            for (item, count) in row {
                if item as usize >= n_items {
                    return Err(Error::InvalidInteractions(format!(
                        "user {u}: item {item} >= n_items {n_items}"
                    )));
                }
                if prev.is_some_and(|p| item <= p) {
                    return Err(Error::InvalidInteractions(format!(
                        "user {u}: item indices not strictly increasing at {item}"
                    )));
                }
                if count == 0 {
                    return Err(Error::InvalidInteractions(format!(
                        "user {u}: explicit zero count for item {item}"
                    )));
                }
                prev = Some(item);
                indices.push(item);
                counts.push(count);
            }
            indptr.push(indices.len());
        }
        Ok(Self {
            n_users,
            n_items,
            indptr,
            indices,
            counts,
        })
    }

    /// Builds a store from unordered `(user, item, count)` triplets.
    /// Duplicate pairs have their counts summed.
    pub fn from_triplets(
        n_users: usize,
        n_items: usize,
        triplets: impl IntoIterator<Item = (u32, u32, u32)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<Entry>> = vec![Vec::new(); n_users];
        for (u, i, c) in triplets {
            let row = rows.get_mut(u as usize).ok_or(Error::IndexOutOfRange {
                kind: "user",
                index: u as usize,
                len: n_users,
            })?;
            row.push((i, c));
        }
        for row in &mut rows {
            row.sort_unstable_by_key(|&(i, _)| i);
            row.dedup_by(|later, earlier| {
                if later.0 == earlier.0 {
                    earlier.1 += later.1;
                    true
                } else {
                    false
                }
            });
        }
        Self::from_rows(n_users, n_items, rows)
    }

    pub fn n_users(&self) -> usize {
        self.n_users
    }

    pub fn n_items(&self) -> usize {
        self.n_items
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Fraction of observed cells.
    pub fn density(&self) -> f64 {
        self.nnz() as f64 / (self.n_users as f64 * self.n_items as f64)
    }

    /// Item indices of user `u`'s row.
    pub fn row_items(&self, u: usize) -> &[u32] {
        &self.indices[self.indptr[u]..self.indptr[u + 1]]
    }

    /// Counts of user `u`'s row, aligned with [`row_items`](Self::row_items).
    pub fn row_counts(&self, u: usize) -> &[u32] {
        &self.counts[self.indptr[u]..self.indptr[u + 1]]
    }

    pub fn row(&self, u: usize) -> impl ExactSizeIterator<Item = Entry> + '_ {
        self.row_items(u)
            .iter()
            .copied()
            .zip(self.row_counts(u).iter().copied())
    }

    pub fn row_len(&self, u: usize) -> usize {
        self.indptr[u + 1] - self.indptr[u]
    }

    /// Count for `(u, i)`, zero when unobserved.
    pub fn get(&self, u: usize, i: usize) -> u32 {
        let items = self.row_items(u);
        match items.binary_search(&(i as u32)) {
            Ok(pos) => self.row_counts(u)[pos],
            Err(_) => 0,
        }
    }

    /// Iterates `(user, item, count)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (u32, u32, u32)> + '_ {
        (0..self.n_users).flat_map(move |u| self.row(u).map(move |(i, c)| (u as u32, i, c)))
    }

    /// Item-major view: row `i` of the result lists the users of item `i`.
    pub fn transpose(&self) -> Self {
        let mut col_counts = vec![0usize; self.n_items];
        for &i in &self.indices {
            col_counts[i as usize] += 1;
        }
        let mut indptr = Vec::with_capacity(self.n_items + 1);
        indptr.push(0);
        for c in &col_counts {
            indptr.push(indptr.last().unwrap() + c);
        }
        let mut cursor = indptr[..self.n_items].to_vec();
        let mut indices = vec![0u32; self.nnz()];
        let mut counts = vec![0u32; self.nnz()];
        // users visited in ascending order keep each column sorted
        for (u, i, c) in self.iter() {
            let slot = &mut cursor[i as usize];
            indices[*slot] = u;
            counts[*slot] = c;
            *slot += 1;
        }
        Self {
            n_users: self.n_items,
            n_items: self.n_users,
            indptr,
            indices,
            counts,
        }
    }

    /// Per-user rows as owned vectors.
    pub fn to_rows(&self) -> Vec<Vec<Entry>> {
        (0..self.n_users).map(|u| self.row(u).collect()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unsorted_and_zero_entries() {
        assert!(InteractionStore::from_rows(1, 3, vec![vec![(2, 1), (1, 1)]]).is_err());
        assert!(InteractionStore::from_rows(1, 3, vec![vec![(1, 1), (1, 1)]]).is_err());
        assert!(InteractionStore::from_rows(1, 3, vec![vec![(1, 0)]]).is_err());
        assert!(InteractionStore::from_rows(1, 3, vec![vec![(3, 1)]]).is_err());
        assert!(InteractionStore::from_rows(0, 3, vec![]).is_err());
    }

    #[test]
    fn triplets_merge_duplicates() {
        let s = InteractionStore::from_triplets(2, 3, [(1, 2, 1), (0, 1, 4), (1, 2, 2)]).unwrap();
        assert_eq!(s.get(1, 2), 3);
        assert_eq!(s.get(0, 1), 4);
        assert_eq!(s.get(0, 0), 0);
        assert_eq!(s.nnz(), 2);
    }

    #[test]
    fn transpose_round_trips() {
        let s = InteractionStore::from_triplets(3, 4, [(0, 3, 1), (2, 0, 5), (1, 3, 2), (0, 0, 1)])
            .unwrap();
        let t = s.transpose();
        assert_eq!(t.n_users(), 4);
        assert_eq!(t.row_items(3), &[0, 1]);
        assert_eq!(t.row_counts(0), &[1, 5]);
        assert_eq!(t.transpose(), s);
    }
}
