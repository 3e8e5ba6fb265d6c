use std::collections::HashMap;

use crate::domain::Lattice;
use crate::error::{Error, Result};

/// Truncated occupation-number basis: all `n` in `{0..n_max}^L` with
/// `sum n <= total_cap`, ordered by total particle number then
/// lexicographically, so the vacuum has index 0. A signed basis is the
/// tensor product with the two-state sign space `{|0>, |1>}`, indexed as
/// `occupation_index * 2 + bit`.
#[derive(Debug, Clone)]
pub struct FockBasis {
    lattice: Lattice,
    n_max: u32,
    total_cap: u32,
    signed: bool,
    states: Vec<Vec<u32>>,
    index: HashMap<Vec<u32>, usize>,
}

impl FockBasis {
    pub fn new(lattice: Lattice, n_max: u32, total_cap: u32, signed: bool) -> Result<Self> {
        let l = lattice.sites();
        let mut states = Vec::new();
        for total in 0..=total_cap {
            let mut cur = vec![0u32; l];
            fill(&mut cur, 0, total, n_max, &mut states);
        }
        if states.len() > 2_000_000 {
            return Err(Error::Limit(format!(
                "Fock basis with L={l}, n_max={n_max}, N_max={total_cap} has {} states",
                states.len()
            )));
        }
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(Self {
            lattice,
            n_max,
            total_cap,
            signed,
            states,
            index,
        })
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn total_cap(&self) -> u32 {
        self.total_cap
    }

    pub fn is_signed(&self) -> bool {
        self.signed
    }

    /// Number of occupation vectors.
    pub fn occupation_count(&self) -> usize {
        self.states.len()
    }

    /// Vector-space dimension, doubled when signed.
    pub fn dim(&self) -> usize {
        self.states.len() * if self.signed { 2 } else { 1 }
    }

    pub fn occupations(&self) -> &[Vec<u32>] {
        &self.states
    }

    pub fn occupation(&self, occ_index: usize) -> &[u32] {
        &self.states[occ_index]
    }

    pub fn index_of(&self, occ: &[u32]) -> Option<usize> {
        self.index.get(occ).copied()
    }

    /// Full index of `(occupation, sign bit)`; the bit is ignored when unsigned.
    pub fn state_index(&self, occ: &[u32], bit: usize) -> Option<usize> {
        let i = self.index_of(occ)?;
        Some(if self.signed { 2 * i + bit } else { i })
    }

    /// Occupation index and sign bit of a full index.
    pub fn split(&self, state: usize) -> (usize, usize) {
        if self.signed {
            (state / 2, state % 2)
        } else {
            (state, 0)
        }
    }

    /// Occupation vector of a list of site indices.
    pub fn occupation_of_positions(&self, positions: &[usize]) -> Result<Vec<u32>> {
        let l = self.lattice.sites();
        let mut occ = vec![0u32; l];
        for &p in positions {
            if p >= l {
                return Err(Error::InvalidArgument(format!(
                    "site {p} outside lattice of {l} sites"
                )));
            }
            occ[p] += 1;
        }
        Ok(occ)
    }
}

fn fill(cur: &mut Vec<u32>, site: usize, remaining: u32, n_max: u32, out: &mut Vec<Vec<u32>>) {
    if site + 1 == cur.len() {
        if remaining <= n_max {
            cur[site] = remaining;
            out.push(cur.clone());
            cur[site] = 0;
        }
        return;
    }
    for k in (0..=remaining.min(n_max)).rev() {
        cur[site] = k;
        fill(cur, site + 1, remaining - k, n_max, out);
    }
    cur[site] = 0;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binom(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn counts_match_stars_and_bars() {
        let lat = Lattice::new(4, 0.25).unwrap();
        // per-site cap not binding: sum_{N<=6} C(N+3, 3) = C(10, 4)
        let b = FockBasis::new(lat, 6, 6, false).unwrap();
        assert_eq!(b.dim(), binom(10, 4));
        let s = FockBasis::new(lat, 6, 6, true).unwrap();
        assert_eq!(s.dim(), 2 * binom(10, 4));
    }

    #[test]
    fn per_site_cap_is_respected() {
        let lat = Lattice::new(2, 0.5).unwrap();
        let b = FockBasis::new(lat, 1, 2, false).unwrap();
        assert_eq!(
            b.occupations(),
            &[vec![0, 0], vec![1, 0], vec![0, 1], vec![1, 1]]
        );
    }

    #[test]
    fn index_is_a_bijection_with_vacuum_first() {
        let lat = Lattice::new(3, 1.0 / 3.0).unwrap();
        let b = FockBasis::new(lat, 3, 5, true).unwrap();
        assert_eq!(b.occupation(0), &[0, 0, 0]);
        for (i, occ) in b.occupations().iter().enumerate() {
            assert_eq!(b.index_of(occ), Some(i));
            assert_eq!(b.split(b.state_index(occ, 1).unwrap()), (i, 1));
        }
        assert_eq!(b.index_of(&[4, 0, 0]), None);
        assert_eq!(b.index_of(&[2, 2, 2]), None);
    }
}
