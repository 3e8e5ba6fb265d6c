//! The lattice rate table: every reaction channel of every model, evaluated
//! on an occupation vector. The Fock oracle assembles its process generators
//! from this table and the Gillespie simulator samples from it, so the two
//! agree state by state.
//!
//! Rates per channel:
//!
//! | event | rate |
//! |---|---|
//! | hop to each neighbor | `D / eps^2` per particle |
//! | jump `i -> j` | `eps R_ij` per particle |
//! | death at `i` | `mu_i` per particle |
//! | spontaneous birth at `i` | `eps mu_i` |
//! | bud from `i` into `j` | `eps beta_ij` per parent |
//! | ordered pair `(i, j)` annihilates | `R_ij` |
//! | ordered pair `(i, j)`, `j` assassinated | `beta_ij` |
//! | ordered pair `(i, j)` amalgamates into `k` | `eps R_ijk` |
//! | fission at `i`, sign flips | `gamma_i` per particle |
//!
//! Pair channels on one site count `n_i (n_i - 1)` ordered pairs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "channel", rename_all = "snake_case")]
pub enum ChannelKind {
    Hop {
        from: usize,
        to: usize,
    },
    Jump {
        from: usize,
        to: usize,
    },
    Death {
        site: usize,
    },
    SpontaneousBirth {
        site: usize,
    },
    Bud {
        parent: usize,
        daughter: usize,
    },
    Annihilate {
        first: usize,
        second: usize,
    },
    Assassinate {
        survivor: usize,
        victim: usize,
    },
    Amalgamate {
        first: usize,
        second: usize,
        into: usize,
    },
    Fission {
        site: usize,
    },
}

impl ChannelKind {
    /// Apply to an occupation vector. Returns whether the system sign flips.
    /// The caller guarantees the channel is enabled (its rate was positive).
    pub fn apply(&self, occ: &mut [u32]) -> bool {
        match *self {
            ChannelKind::Hop { from, to } | ChannelKind::Jump { from, to } => {
                occ[from] -= 1;
                occ[to] += 1;
                false
            }
            ChannelKind::Death { site } => {
                occ[site] -= 1;
                false
            }
            ChannelKind::SpontaneousBirth { site } => {
                occ[site] += 1;
                false
            }
            ChannelKind::Bud { daughter, .. } => {
                occ[daughter] += 1;
                false
            }
            ChannelKind::Annihilate { first, second } => {
                occ[first] -= 1;
                occ[second] -= 1;
                false
            }
            ChannelKind::Assassinate { victim, .. } => {
                occ[victim] -= 1;
                false
            }
            ChannelKind::Amalgamate {
                first,
                second,
                into,
            } => {
                occ[first] -= 1;
                occ[second] -= 1;
                occ[into] += 1;
                false
            }
            ChannelKind::Fission { site } => {
                occ[site] += 1;
                true
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ChannelKind::Hop { .. } => "hop",
            ChannelKind::Jump { .. } => "jump",
            ChannelKind::Death { .. } => "death",
            ChannelKind::SpontaneousBirth { .. } => "spontaneous_birth",
            ChannelKind::Bud { .. } => "bud",
            ChannelKind::Annihilate { .. } => "annihilate",
            ChannelKind::Assassinate { .. } => "assassinate",
            ChannelKind::Amalgamate { .. } => "amalgamate",
            ChannelKind::Fission { .. } => "fission",
        }
    }

    /// Sites involved, `;`-separated, for event logs.
    pub fn sites_label(&self) -> String {
        match *self {
            ChannelKind::Hop { from, to } | ChannelKind::Jump { from, to } => {
                format!("{from};{to}")
            }
            ChannelKind::Death { site }
            | ChannelKind::SpontaneousBirth { site }
            | ChannelKind::Fission { site } => site.to_string(),
            ChannelKind::Bud { parent, daughter } => format!("{parent};{daughter}"),
            ChannelKind::Annihilate { first, second } => format!("{first};{second}"),
            ChannelKind::Assassinate { survivor, victim } => format!("{survivor};{victim}"),
            ChannelKind::Amalgamate {
                first,
                second,
                into,
            } => format!("{first};{second};{into}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub kind: ChannelKind,
    pub rate: f64,
}

#[inline]
fn ordered_pairs(occ: &[u32], i: usize, j: usize) -> f64 {
    let ni = occ[i] as f64;
    if i == j {
        ni * (ni - 1.0)
    } else {
        ni * occ[j] as f64
    }
}

/// Enabled channels of `spec` at occupation `occ`, in a fixed order.
/// Channels with zero rate are omitted.
pub fn channels(spec: &ModelSpec, occ: &[u32], out: &mut Vec<Channel>) -> Result<()> {
    out.clear();
    let l = spec.sites();
    if occ.len() != l {
        return Err(Error::LengthMismatch {
            expected: l,
            got: occ.len(),
        });
    }
    let lat = &spec.lattice;
    let eps = lat.spacing();
    let mut push = |kind: ChannelKind, rate: f64| {
        if rate != 0.0 {
            out.push(Channel { kind, rate });
        }
    };

    if spec.diffusion != 0.0 {
        let hop = spec.diffusion / (eps * eps);
        for i in 0..l {
            if occ[i] > 0 {
                let r = hop * occ[i] as f64;
                push(
                    ChannelKind::Hop {
                        from: i,
                        to: lat.right(i),
                    },
                    r,
                );
                push(
                    ChannelKind::Hop {
                        from: i,
                        to: lat.left(i),
                    },
                    r,
                );
            }
        }
    }

    match spec.kind {
        ModelKind::JumpDiffusion => {
            let r = spec.pair()?;
            for i in 0..l {
                if occ[i] == 0 {
                    continue;
                }
                for j in 0..l {
                    if j != i {
                        push(
                            ChannelKind::Jump { from: i, to: j },
                            eps * r.get(i, j) * occ[i] as f64,
                        );
                    }
                }
            }
        }
        ModelKind::DiffusionAnnihilation | ModelKind::CableDual => {
            let r = spec.pair()?;
            for i in 0..l {
                for j in 0..l {
                    let pairs = ordered_pairs(occ, i, j);
                    if pairs > 0.0 {
                        push(
                            ChannelKind::Annihilate {
                                first: i,
                                second: j,
                            },
                            r.get(i, j) * pairs,
                        );
                    }
                }
            }
        }
        ModelKind::Bbd => {
            let mu = spec.mu()?;
            let beta = spec.beta()?;
            for i in 0..l {
                if occ[i] == 0 {
                    continue;
                }
                let n = occ[i] as f64;
                push(ChannelKind::Death { site: i }, mu[i] * n);
                for j in 0..l {
                    push(
                        ChannelKind::Bud {
                            parent: i,
                            daughter: j,
                        },
                        eps * beta.get(i, j) * n,
                    );
                }
            }
        }
        ModelKind::Sba => {
            let mu = spec.mu()?;
            let beta = spec.beta()?;
            for i in 0..l {
                push(ChannelKind::SpontaneousBirth { site: i }, eps * mu[i]);
            }
            for i in 0..l {
                for j in 0..l {
                    let pairs = ordered_pairs(occ, i, j);
                    if pairs > 0.0 {
                        push(
                            ChannelKind::Assassinate {
                                survivor: i,
                                victim: j,
                            },
                            beta.get(i, j) * pairs,
                        );
                    }
                }
            }
        }
        ModelKind::FissionAmalgamation => {
            let gamma = spec.gamma()?;
            let r3 = spec.amalgamation()?;
            for i in 0..l {
                if occ[i] > 0 {
                    push(ChannelKind::Fission { site: i }, gamma[i] * occ[i] as f64);
                }
            }
            for i in 0..l {
                for j in 0..l {
                    let pairs = ordered_pairs(occ, i, j);
                    if pairs > 0.0 {
                        for k in 0..l {
                            push(
                                ChannelKind::Amalgamate {
                                    first: i,
                                    second: j,
                                    into: k,
                                },
                                eps * r3.get(i, j, k) * pairs,
                            );
                        }
                    }
                }
            }
        }
    }
    Ok(())
}

/// Sum of channel rates in list order.
pub fn total_rate(chs: &[Channel]) -> f64 {
    chs.iter().map(|c| c.rate).sum()
}

/// Feynman-Kac potential `V` evaluated on an occupation vector.
///
/// * jump-diffusion: `0`
/// * cable: `-N + sum_{a != b} R(q_a, q_b)`
/// * BBD: `sum_a mu(q_a) - eps sum mu + sum_a eps sum_p beta(q_a, p) - sum_{a != b} beta(q_a, q_b)`
/// * fission-amalgamation: `sum_a gamma(q_a) + sum_{a != b} eps sum_r R(q_a, q_b, r)`
pub fn potential(spec: &ModelSpec, occ: &[u32]) -> Result<f64> {
    let l = spec.sites();
    if occ.len() != l {
        return Err(Error::LengthMismatch {
            expected: l,
            got: occ.len(),
        });
    }
    let lat = &spec.lattice;
    let eps = lat.spacing();
    match spec.kind {
        ModelKind::JumpDiffusion => Ok(0.0),
        ModelKind::CableDual => {
            let r = spec.pair()?;
            let n: f64 = occ.iter().map(|&v| v as f64).sum();
            let mut pair_sum = 0.0;
            for i in 0..l {
                for j in 0..l {
                    pair_sum += ordered_pairs(occ, i, j) * r.get(i, j);
                }
            }
            Ok(-n + pair_sum)
        }
        ModelKind::Bbd => {
            let mu = spec.mu()?;
            let beta = spec.beta()?;
            let mut v = -lat.integral(mu);
            for i in 0..l {
                let n = occ[i] as f64;
                if n > 0.0 {
                    let row: f64 = (0..l).map(|j| beta.get(i, j)).sum();
                    v += n * (mu[i] + eps * row);
                }
            }
            for i in 0..l {
                for j in 0..l {
                    v -= ordered_pairs(occ, i, j) * beta.get(i, j);
                }
            }
            Ok(v)
        }
        ModelKind::FissionAmalgamation => {
            let gamma = spec.gamma()?;
            let r3 = spec.amalgamation()?;
            let mut v = 0.0;
            for i in 0..l {
                v += gamma[i] * occ[i] as f64;
            }
            for i in 0..l {
                for j in 0..l {
                    let pairs = ordered_pairs(occ, i, j);
                    if pairs > 0.0 {
                        v += pairs * r3.row_total(lat, i, j);
                    }
                }
            }
            Ok(v)
        }
        ModelKind::DiffusionAnnihilation | ModelKind::Sba => Err(Error::InvalidArgument(format!(
            "model {} defines no Feynman-Kac potential",
            spec.kind
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Field, Kernel2, Kernel3, Lattice};

    fn lat3() -> Lattice {
        Lattice::new(3, 1.0 / 3.0).unwrap()
    }

    #[test]
    fn empty_bbd_has_no_events() {
        let lat = lat3();
        let spec =
            ModelSpec::bbd(lat, Field::constant(&lat, 0.7), Kernel2::constant(3, 0.4)).unwrap();
        let mut out = Vec::new();
        channels(&spec, &[0, 0, 0], &mut out).unwrap();
        assert!(out.is_empty());
        assert_eq!(total_rate(&out), 0.0);
    }

    #[test]
    fn empty_sba_rate_is_integrated_mu() {
        let lat = lat3();
        let mu = Field(vec![0.3, 0.6, 0.9]);
        let spec = ModelSpec::sba(lat, mu, Kernel2::constant(3, 0.4)).unwrap();
        let mut out = Vec::new();
        channels(&spec, &[0, 0, 0], &mut out).unwrap();
        let expected = (0.3 + 0.6 + 0.9) / 3.0;
        assert!((total_rate(&out) - expected).abs() < 1e-15);
    }

    #[test]
    fn same_site_pair_counts_twice() {
        let lat = lat3();
        let r = Kernel2::from_fn(3, true, |i, j| 0.1 + (i + j) as f64).unwrap();
        let spec = ModelSpec::diffusion_annihilation(lat, 0.0, r.clone()).unwrap();
        let mut out = Vec::new();
        channels(&spec, &[0, 2, 0], &mut out).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(
            out[0].kind,
            ChannelKind::Annihilate {
                first: 1,
                second: 1
            }
        );
        assert_eq!(out[0].rate, 2.0 * r.get(1, 1));
    }

    #[test]
    fn cable_potential_values() {
        let lat = lat3();
        let zero = ModelSpec::cable_dual(lat, Kernel2::zeros(3)).unwrap();
        assert_eq!(potential(&zero, &[0, 0, 0]).unwrap(), 0.0);
        assert_eq!(potential(&zero, &[1, 2, 1]).unwrap(), -4.0);
        let r = ModelSpec::cable_dual(lat, Kernel2::constant(3, 0.25)).unwrap();
        // two particles: two ordered pairs
        assert_eq!(potential(&r, &[1, 0, 1]).unwrap(), -2.0 + 0.5);
    }

    #[test]
    fn bbd_vacuum_potential() {
        let lat = lat3();
        let mu = Field(vec![0.3, 0.6, 0.9]);
        let spec = ModelSpec::bbd(lat, mu, Kernel2::constant(3, 0.4)).unwrap();
        let v = potential(&spec, &[0, 0, 0]).unwrap();
        assert!((v + (0.3 + 0.6 + 0.9) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn potential_undefined_for_pure_processes() {
        let lat = lat3();
        let spec = ModelSpec::diffusion_annihilation(lat, 1.0, Kernel2::zeros(3)).unwrap();
        assert!(potential(&spec, &[1, 0, 0]).is_err());
    }

    #[test]
    fn fission_flips_sign_and_grows() {
        let lat = lat3();
        let spec =
            ModelSpec::fission_amalgamation(lat, Field::constant(&lat, 1.0), Kernel3::zeros(3))
                .unwrap();
        let mut out = Vec::new();
        channels(&spec, &[0, 1, 0], &mut out).unwrap();
        assert_eq!(out.len(), 1);
        let mut occ = [0, 1, 0];
        assert!(out[0].kind.apply(&mut occ));
        assert_eq!(occ, [0, 2, 0]);
    }

    #[test]
    fn negative_rates_are_named() {
        let lat = lat3();
        let mut r = Kernel2::constant(3, 0.5);
        r.set(1, 2, -0.1);
        let spec = ModelSpec::jump_diffusion(lat, 1.0, r).unwrap();
        let err = spec.validate_rates().unwrap_err().to_string();
        assert!(err.contains("R[1][2]"), "{err}");
    }
}
