use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{Kernel2, Lattice};
use crate::error::{check_len, Error, Result};

use super::{cable_mean, check_kernel, check_site, check_time, propagator_kk};

pub const PAIRING_MAX_ORDER: usize = 8;

/// A partial matching of `{0..m}`: disjoint pairs plus the unmatched
/// singletons.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairingTerm {
    pub pairs: Vec<(usize, usize)>,
    pub singles: Vec<usize>,
}

impl PairingTerm {
    pub fn descriptor(&self) -> String {
        let mut s: String = self
            .pairs
            .iter()
            .map(|(a, b)| format!("({a},{b})"))
            .collect();
        s.push('|');
        s.push_str(
            &self
                .singles
                .iter()
                .map(|i| i.to_string())
                .collect::<Vec<_>>()
                .join(","),
        );
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairingContribution {
    pub term: PairingTerm,
    pub arc_factors: Vec<f64>,
    pub single_factors: Vec<f64>,
    pub product: f64,
}

/// All partial matchings of `{0..m}`, by recursive first-element matching.
pub fn enumerate_pairings(m: usize) -> Vec<PairingTerm> {
    fn go(
        rest: &[usize],
        pairs: &mut Vec<(usize, usize)>,
        singles: &mut Vec<usize>,
        out: &mut Vec<PairingTerm>,
    ) {
        let Some((&first, tail)) = rest.split_first() else {
            out.push(PairingTerm {
                pairs: pairs.clone(),
                singles: singles.clone(),
            });
            return;
        };
        singles.push(first);
        go(tail, pairs, singles, out);
        singles.pop();
        for (k, &partner) in tail.iter().enumerate() {
            let mut remaining = tail.to_vec();
            remaining.remove(k);
            pairs.push((first, partner));
            go(&remaining, pairs, singles, out);
            pairs.pop();
        }
    }
    let idx: Vec<usize> = (0..m).collect();
    let mut out = Vec::new();
    go(&idx, &mut Vec::new(), &mut Vec::new(), &mut out);
    out
}

/// Every pairing with its arc and single-line factors.
pub fn cable_pairing_terms(
    lat: &Lattice,
    positions: &[usize],
    z: &[f64],
    r: &Kernel2,
    t: f64,
) -> Result<Vec<PairingContribution>> {
    let m = positions.len();
    if m > PAIRING_MAX_ORDER {
        return Err(Error::Limit(format!(
            "pairing sum supports at most {PAIRING_MAX_ORDER} points, got {m}"
        )));
    }
    check_len(lat.sites(), z.len())?;
    check_kernel(lat, r)?;
    check_time(t)?;
    for &p in positions {
        check_site(lat, p)?;
    }
    let line = cable_mean(lat, z, t)?;
    let mut arcs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let terms = enumerate_pairings(m);
    let mut out = Vec::with_capacity(terms.len());
    for term in terms {
        let mut arc_factors = Vec::with_capacity(term.pairs.len());
        for &(a, b) in &term.pairs {
            let key = (positions[a], positions[b]);
            let v = match arcs.get(&key) {
                Some(&v) => v,
                None => {
                    let v = propagator_kk(lat, key.0, key.1, r, t)?;
                    arcs.insert(key, v);
                    v
                }
            };
            arc_factors.push(v);
        }
        let single_factors: Vec<f64> = term.singles.iter().map(|&i| line[positions[i]]).collect();
        let product = arc_factors.iter().chain(&single_factors).product();
        out.push(PairingContribution {
            term,
            arc_factors,
            single_factors,
            product,
        });
    }
    Ok(out)
}

/// `E prod_k X_t(p_k)` for the cable equation with pair noise kernel `R`,
/// summed over all pairings.
pub fn cable_pairing_sum(
    lat: &Lattice,
    positions: &[usize],
    z: &[f64],
    r: &Kernel2,
    t: f64,
) -> Result<f64> {
    let terms = cable_pairing_terms(lat, positions, z, r, t)?;
    let products: Vec<f64> = terms.iter().map(|c| c.product).collect();
    Ok(crate::stats::pairwise_sum(&products))
}

/// CSV columns: pairing, arc_factors, single_factors, product.
pub fn write_pairing_terms<W: Write>(terms: &[PairingContribution], w: W) -> Result<()> {
    let join = |xs: &[f64]| {
        xs.iter()
            .map(|v| format!("{v:.17e}"))
            .collect::<Vec<_>>()
            .join(";")
    };
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["pairing", "arc_factors", "single_factors", "product"])?;
    for c in terms {
        wtr.write_record([
            c.term.descriptor(),
            join(&c.arc_factors),
            join(&c.single_factors),
            format!("{:.17e}", c.product),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial_sum(m: usize) -> usize {
        // telephone numbers: T(m) = T(m-1) + (m-1) T(m-2)
        let mut t = vec![1usize, 1];
        for k in 2..=m {
            t.push(t[k - 1] + (k - 1) * t[k - 2]);
        }
        t[m]
    }

    #[test]
    fn counts_are_telephone_numbers() {
        for m in 0..=8 {
            assert_eq!(
                enumerate_pairings(m).len(),
                double_factorial_sum(m),
                "m={m}"
            );
        }
    }

    #[test]
    fn pairings_partition_indices() {
        for term in enumerate_pairings(6) {
            let mut seen: Vec<usize> = term.singles.clone();
            for (a, b) in &term.pairs {
                assert!(a < b);
                seen.push(*a);
                seen.push(*b);
            }
            seen.sort();
            assert_eq!(seen, (0..6).collect::<Vec<_>>());
        }
    }

    #[test]
    fn order_limit() {
        let lat = Lattice::new(4, 0.25).unwrap();
        let r = Kernel2::zeros(4);
        let err = cable_pairing_sum(&lat, &[0; 9], &[1.0; 4], &r, 0.1).unwrap_err();
        assert!(matches!(err, Error::Limit(_)));
    }

    #[test]
    fn csv_has_one_row_per_pairing() {
        let lat = Lattice::new(4, 0.25).unwrap();
        let r = Kernel2::constant(4, 0.5);
        let terms = cable_pairing_terms(&lat, &[0, 1, 2], &[1.0, 2.0, 3.0, 4.0], &r, 0.2).unwrap();
        let mut buf = Vec::new();
        write_pairing_terms(&terms, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 4);
        assert!(text.lines().nth(1).unwrap().starts_with("\"|0,1,2\""));
    }
}
