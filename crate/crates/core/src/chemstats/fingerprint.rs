use serde::{Deserialize, Serialize};

use super::ChemError;
use crate::molparse::MoleculeGraph;

pub const DEFAULT_NBITS: usize = 2048;
pub const DEFAULT_RADIUS: usize = 2;

/// Folded circular-environment bit vector.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    words: Vec<u64>,
    nbits: usize,
    pub radius: usize,
}

impl Fingerprint {
    pub fn empty(nbits: usize, radius: usize) -> Result<Self, ChemError> {
        if nbits == 0 || !nbits.is_power_of_two() {
            return Err(ChemError::Width(nbits));
        }
        Ok(Fingerprint {
            words: vec![0; nbits.div_ceil(64)],
            nbits,
            radius,
        })
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn set(&mut self, bit: usize) {
        self.words[bit / 64] |= 1 << (bit % 64);
    }

    pub fn get(&self, bit: usize) -> bool {
        self.words[bit / 64] >> (bit % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nbits).filter(|&b| self.get(b))
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn combine(seed: u64, values: impl IntoIterator<Item = u64>) -> u64 {
    values.into_iter().fold(mix(seed), |h, v| mix(h ^ v))
}

/// Per-atom environment identifiers after each round, round 0 first.
pub fn environment_ids(g: &MoleculeGraph, radius: usize) -> Vec<Vec<u64>> {
    let mut ids: Vec<u64> = g
        .atoms()
        .iter()
        .enumerate()
        .map(|(i, a)| {
            combine(
                0,
                [
                    a.element as u64,
                    g.degree(i) as u64,
                    u64::from(a.hydrogens),
                    u64::from(a.aromatic),
                ],
            )
        })
        .collect();
    let mut rounds = vec![ids.clone()];
    for round in 1..=radius {
        ids = (0..g.atom_count())
            .map(|i| {
                let mut env: Vec<(u8, u64)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&(v, bi)| (g.bonds()[bi].label(), ids[v]))
                    .collect();
                env.sort_unstable();
                combine(
                    round as u64,
                    std::iter::once(ids[i]).chain(env.into_iter().flat_map(|(l, h)| [u64::from(l), h])),
                )
            })
            .collect();
        rounds.push(ids.clone());
    }
    rounds
}

/// ECFP-style fingerprint: every environment identifier of every round is
/// folded into `nbits` by modulo.
pub fn morgan_fingerprint(g: &MoleculeGraph, radius: usize, nbits: usize) -> Result<Fingerprint, ChemError> {
    let mut fp = Fingerprint::empty(nbits, radius)?;
    for round in environment_ids(g, radius) {
        for id in round {
            fp.set((id % nbits as u64) as usize);
        }
    }
    Ok(fp)
}

/// `|A∩B| / |A∪B|`, 1 when both are empty.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, ChemError> {
    if a.nbits != b.nbits {
        return Err(ChemError::WidthMismatch(a.nbits, b.nbits));
    }
    let (mut inter, mut union) = (0u32, 0u32);
    for (x, y) in a.words.iter().zip(&b.words) {
        inter += (x & y).count_ones();
        union += (x | y).count_ones();
    }
    Ok(if union == 0 { 1.0 } else { f64::from(inter) / f64::from(union) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molparse::parse_str;

    fn fp(s: &str) -> Fingerprint {
        morgan_fingerprint(&parse_str(s).unwrap(), 2, 2048).unwrap()
    }

    #[test]
    fn spelling_invariant() {
        assert_eq!(fp("OCC"), fp("CCO"));
        assert_eq!(fp("Cc1ccccc1O"), fp("Oc1ccccc1C"));
    }

    #[test]
    fn methane_and_water_disjoint_at_radius_zero() {
        let c = morgan_fingerprint(&parse_str("C").unwrap(), 0, 2048).unwrap();
        let o = morgan_fingerprint(&parse_str("O").unwrap(), 0, 2048).unwrap();
        assert_eq!(c.count_ones(), 1);
        assert_eq!(o.count_ones(), 1);
        assert_eq!(tanimoto(&c, &o).unwrap(), 0.0);
    }

    #[test]
    fn tanimoto_cases() {
        let mut a = Fingerprint::empty(64, 0).unwrap();
        let mut b = Fingerprint::empty(64, 0).unwrap();
        assert_eq!(tanimoto(&a, &b).unwrap(), 1.0);
        a.set(3);
        b.set(3);
        b.set(9);
        assert_eq!(tanimoto(&a, &b).unwrap(), 0.5);
        let mut c = Fingerprint::empty(64, 0).unwrap();
        c.set(10);
        assert_eq!(tanimoto(&a, &c).unwrap(), 0.0);
        assert!(tanimoto(&a, &Fingerprint::empty(128, 0).unwrap()).is_err());
        assert!(Fingerprint::empty(100, 0).is_err());
    }
}
