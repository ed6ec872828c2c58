use rand::seq::SliceRandom;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Seeded partition of rows into named splits.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitPlan {
    pub seed: u64,
    pub fractions: Vec<(String, f64)>,
    /// Split index (into `fractions`) for every row.
    pub assignment: Vec<usize>,
}

impl SplitPlan {
    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn split_index(&self, name: &str) -> Option<usize> {
        self.fractions.iter().position(|(n, _)| n == name)
    }

    /// Rows of split `k`, ascending.
    pub fn rows_of(&self, k: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a == k)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn rows(&self, name: &str) -> Option<Vec<usize>> {
        self.split_index(name).map(|k| self.rows_of(k))
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.fractions.len()];
        for &a in &self.assignment {
            sizes[a] += 1;
        }
        sizes
    }
}

#[derive(Serialize, Deserialize)]
struct SplitPlanWire {
    seed: u64,
    fractions: Vec<(String, f64)>,
    assignment: Vec<String>,
}

impl Serialize for SplitPlan {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SplitPlanWire {
            seed: self.seed,
            fractions: self.fractions.clone(),
            assignment: self.assignment.iter().map(|&k| self.fractions[k].0.clone()).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for SplitPlan {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let wire = SplitPlanWire::deserialize(deserializer)?;
        let assignment = wire
            .assignment
            .iter()
            .map(|name| {
                wire.fractions
                    .iter()
                    .position(|(n, _)| n == name)
                    .ok_or_else(|| serde::de::Error::custom(format!("unknown split `{name}`")))
            })
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(SplitPlan {
            seed: wire.seed,
            fractions: wire.fractions,
            assignment,
        })
    }
}

pub fn split(data: &Dataset, fractions: &[(&str, f64)], seed: u64) -> Result<SplitPlan> {
    split_rows(data.n(), fractions, seed)
}

/// Shuffles `0..n` with the seeded generator and cuts the permutation at
/// cumulative boundaries. Every split but the last gets `⌊f·n⌋` rows; the
/// last one takes the remainder.
pub fn split_rows(n: usize, fractions: &[(&str, f64)], seed: u64) -> Result<SplitPlan> {
    if fractions.is_empty() {
        return Err(Error::InvalidParameter("no split fractions".into()));
    }
    if let Some((name, f)) = fractions.iter().find(|(_, f)| !(*f > 0.0) || !f.is_finite()) {
        return Err(Error::InvalidParameter(format!("split `{name}` has fraction {f}")));
    }
    let total: f64 = fractions.iter().map(|(_, f)| f).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("split fractions sum to {total}")));
    }

    // The epsilon keeps products such as 0.29 * 100 from flooring to 28.
    let mut sizes: Vec<usize> = fractions[..fractions.len() - 1]
        .iter()
        .map(|(_, f)| (f * n as f64 + 1e-9).floor() as usize)
        .collect();
    let used: usize = sizes.iter().sum();
    if used > n {
        return Err(Error::InvalidParameter("split sizes exceed row count".into()));
    }
    sizes.push(n - used);
    if let Some(k) = sizes.iter().position(|&s| s == 0) {
        return Err(Error::EmptySplit(fractions[k].0.to_string()));
    }

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rng_from_seed(derive_seed(seed, stream::SPLIT));
    order.shuffle(&mut rng);

    let mut assignment = vec![0; n];
    let mut start = 0;
    for (k, &size) in sizes.iter().enumerate() {
        for &row in &order[start..start + size] {
            assignment[row] = k;
        }
        start += size;
    }
    Ok(SplitPlan {
        seed,
        fractions: fractions.iter().map(|(n, f)| (n.to_string(), *f)).collect(),
        assignment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const THIRDS: [(&str, f64); 3] = [("train", 0.6), ("cal", 0.2), ("test", 0.2)];

    #[test]
    fn sizes_follow_floor_rule() {
        let plan = split_rows(10, &THIRDS, 7).unwrap();
        assert_eq!(plan.sizes(), vec![6, 2, 2]);
        let plan = split_rows(11, &THIRDS, 7).unwrap();
        assert_eq!(plan.sizes(), vec![6, 2, 3]);
    }

    #[test]
    fn same_seed_same_assignment() {
        let f = [("a", 0.5), ("b", 0.5)];
        assert_eq!(split_rows(5, &f, 3).unwrap(), split_rows(5, &f, 3).unwrap());
    }

    #[test]
    fn empty_split_is_an_error() {
        let f = [("a", 0.25), ("b", 0.25), ("c", 0.25), ("d", 0.25)];
        assert!(matches!(split_rows(3, &f, 1).unwrap_err(), Error::EmptySplit(_)));
    }

    #[test]
    fn bad_fractions_rejected() {
        assert!(split_rows(10, &[("a", 0.5), ("b", 0.6)], 1).is_err());
        assert!(split_rows(10, &[("a", 1.2), ("b", -0.2)], 1).is_err());
    }

    #[test]
    fn json_uses_split_names() {
        let plan = split_rows(4, &[("x", 0.5), ("y", 0.5)], 2).unwrap();
        let json = serde_json::to_value(&plan).unwrap();
        assert_eq!(json["seed"], 2);
        assert!(json["assignment"].as_array().unwrap().iter().all(|v| v == "x" || v == "y"));
        let back: SplitPlan = serde_json::from_value(json).unwrap();
        assert_eq!(back, plan);
    }

    proptest! {
        #[test]
        fn partition_property(n in 8usize..400, seed in any::<u64>()) {
            let f = [("a", 0.25), ("b", 0.25), ("c", 0.25), ("d", 0.25)];
            let plan = split_rows(n, &f, seed).unwrap();
            let mut all: Vec<usize> = (0..4).flat_map(|k| plan.rows_of(k)).collect();
            all.sort_unstable();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            prop_assert_eq!(plan.clone(), split_rows(n, &f, seed).unwrap());
        }
    }
}
