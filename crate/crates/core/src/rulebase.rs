//! Rule-base construction: index matrices, fuzzy partitions, and consequent
//! parameter storage.
//!
//! An index matrix maps each (rule, feature) slot to a 1-based fuzzy-set
//! index. Three constructions are supported:
//!
//! * compact (`CoCo`): one rule per set, `R = S`, rule i uses set i on every
//!   feature;
//! * fully combined (`FuCo`): every combination of sets, `R = S^D`;
//! * enhanced (`En`): each compact rule plus, per feature, the cyclic +-1
//!   perturbations of its set index, `R = (2D + 1) * S`.
//!
//! The enhanced base grows linearly with dimension while still covering the
//! neighborhood of every compact rule, which is what the rule-extraction
//! phase prunes.

use crate::error::{Error, Result};
use crate::scalar::Real;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RuleBaseKind {
    CoCo,
    FuCo,
    En,
    /// A pruned subset of one of the canonical constructions.
    Custom,
}

/// R x D table of 1-based fuzzy-set indices.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexMatrix {
    kind: RuleBaseKind,
    rules: usize,
    features: usize,
    entries: Vec<u32>,
}

impl IndexMatrix {
    pub fn kind(&self) -> RuleBaseKind {
        self.kind
    }

    pub fn rules(&self) -> usize {
        self.rules
    }

    pub fn features(&self) -> usize {
        self.features
    }

    /// Set index (1-based) used by rule `r` on feature `d`.
    pub fn get(&self, r: usize, d: usize) -> u32 {
        self.entries[r * self.features + d]
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.entries[r * self.features..(r + 1) * self.features]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[u32]> {
        self.entries.chunks(self.features)
    }

    /// New matrix containing only the listed rows, in the given order.
    pub fn retain_rows(&self, keep: &[usize]) -> IndexMatrix {
        let mut entries = Vec::with_capacity(keep.len() * self.features);
        for &r in keep {
            entries.extend_from_slice(self.row(r));
        }
        IndexMatrix {
            kind: RuleBaseKind::Custom,
            rules: keep.len(),
            features: self.features,
            entries,
        }
    }
}

/// Compact rule base: S x D matrix with row i constant at i + 1.
pub fn build_coco(sets: usize, features: usize) -> Result<IndexMatrix> {
    if sets == 0 || features == 0 {
        return Err(Error::InvalidArgument(format!(
            "compact rule base needs positive dimensions, got S={sets}, D={features}"
        )));
    }
    let mut entries = Vec::with_capacity(sets * features);
    for s in 1..=sets as u32 {
        entries.extend(std::iter::repeat(s).take(features));
    }
    Ok(IndexMatrix {
        kind: RuleBaseKind::CoCo,
        rules: sets,
        features,
        entries,
    })
}

/// Row-count guard for the fully combined base; it is a small-dimension
/// demonstration artifact, not a high-dimensional tool.
pub const FUCO_RULE_LIMIT: u128 = 1_000_000;

/// Fully combined rule base: all S^D set combinations in lexicographic order
/// with the last column varying fastest.
pub fn build_fuco(sets: usize, features: usize) -> Result<IndexMatrix> {
    if sets == 0 || features == 0 {
        return Err(Error::InvalidArgument(format!(
            "fully combined rule base needs positive dimensions, got S={sets}, D={features}"
        )));
    }
    let rules = (sets as u128)
        .checked_pow(features as u32)
        .filter(|&r| r <= FUCO_RULE_LIMIT)
        .ok_or(Error::Capacity {
            requested: (sets as u128).checked_pow(features as u32).unwrap_or(u128::MAX),
            limit: FUCO_RULE_LIMIT,
        })? as usize;
    let mut entries = Vec::with_capacity(rules * features);
    let mut row = vec![1u32; features];
    loop {
        entries.extend_from_slice(&row);
        // Odometer increment, last position fastest.
        let mut d = features;
        loop {
            if d == 0 {
                return Ok(IndexMatrix {
                    kind: RuleBaseKind::FuCo,
                    rules,
                    features,
                    entries,
                });
            }
            d -= 1;
            if row[d] < sets as u32 {
                row[d] += 1;
                break;
            }
            row[d] = 1;
        }
    }
}

/// Enhanced rule base: for each base set s, the constant-s rule followed by
/// the rules that perturb one feature's set index to s - 1 and then to s + 1,
/// cyclically (0 wraps to S, S + 1 wraps to 1). `(2D + 1) * S` rows in total;
/// with S = 2 the two perturbation directions coincide and the duplicates are
/// kept so the row count stays `(2D + 1) * S`.
pub fn build_enfrb(sets: usize, features: usize) -> Result<IndexMatrix> {
    if sets < 2 {
        return Err(Error::InvalidArgument(format!(
            "enhanced rule base needs at least 2 sets per feature, got S={sets}"
        )));
    }
    if features == 0 {
        return Err(Error::InvalidArgument(
            "enhanced rule base needs at least one feature".into(),
        ));
    }
    let s_u32 = sets as u32;
    let rules = (2 * features + 1) * sets;
    let mut entries = Vec::with_capacity(rules * features);
    for s in 1..=s_u32 {
        let down = if s == 1 { s_u32 } else { s - 1 };
        let up = if s == s_u32 { 1 } else { s + 1 };
        entries.extend(std::iter::repeat(s).take(features));
        for perturbed in [down, up] {
            for d in 0..features {
                for j in 0..features {
                    entries.push(if j == d { perturbed } else { s });
                }
            }
        }
    }
    Ok(IndexMatrix {
        kind: RuleBaseKind::En,
        rules,
        features,
        entries,
    })
}

/// Per-feature banks of Gaussian membership centers. The spread is fixed
/// at 1, so the partition is fully described by its centers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FuzzyPartition<F> {
    features: usize,
    sets: usize,
    /// Row-major, `centers[d * sets + s]` is the center of set s on feature d.
    centers: Vec<F>,
}

impl<F: Real> FuzzyPartition<F> {
    pub fn num_features(&self) -> usize {
        self.features
    }

    pub fn num_sets(&self) -> usize {
        self.sets
    }

    /// Center of the (1-based) set used by a rule slot.
    pub fn center(&self, feature: usize, set_1based: u32) -> F {
        self.centers[feature * self.sets + (set_1based as usize - 1)]
    }

    pub fn feature_centers(&self, feature: usize) -> &[F] {
        &self.centers[feature * self.sets..(feature + 1) * self.sets]
    }

    pub fn centers(&self) -> &[F] {
        &self.centers
    }

    pub fn centers_mut(&mut self) -> &mut [F] {
        &mut self.centers
    }

    /// Partition over a subset of the features, in the given order.
    pub fn select_features(&self, keep: &[usize]) -> FuzzyPartition<F> {
        let mut centers = Vec::with_capacity(keep.len() * self.sets);
        for &d in keep {
            centers.extend_from_slice(self.feature_centers(d));
        }
        FuzzyPartition {
            features: keep.len(),
            sets: self.sets,
            centers,
        }
    }

    pub fn from_centers(features: usize, sets: usize, centers: Vec<F>) -> Result<Self> {
        if centers.len() != features * sets {
            return Err(Error::ShapeMismatch(format!(
                "expected {features}x{sets} centers, got {}",
                centers.len()
            )));
        }
        Ok(FuzzyPartition {
            features,
            sets,
            centers,
        })
    }
}

/// Evenly places `sets` centers per feature on `[min, max]` of that feature
/// in the (already normalized) training matrix, endpoints inclusive.
///
/// With a single set the center sits at the midpoint; a constant feature gets
/// all centers at its value.
pub fn place_centers<F: Real>(train_features: &[Vec<F>], sets: usize) -> Result<FuzzyPartition<F>> {
    if sets == 0 {
        return Err(Error::InvalidArgument("need at least one fuzzy set".into()));
    }
    let Some(first) = train_features.first() else {
        return Err(Error::InvalidArgument(
            "cannot place centers on an empty training set".into(),
        ));
    };
    let features = first.len();
    let mut centers = Vec::with_capacity(features * sets);
    for d in 0..features {
        let mut lo = train_features[0][d];
        let mut hi = lo;
        for row in train_features {
            let v = row[d];
            if v < lo {
                lo = v;
            }
            if v > hi {
                hi = v;
            }
        }
        if sets == 1 {
            centers.push((lo + hi) / (F::one() + F::one()));
        } else {
            let span = hi - lo;
            let steps = F::from(sets - 1).unwrap();
            for s in 0..sets {
                centers.push(lo + span * F::from(s).unwrap() / steps);
            }
        }
    }
    Ok(FuzzyPartition {
        features,
        sets,
        centers,
    })
}

/// First-order consequent coefficients `p[r][d][c]`; `d = 0` is the bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConsequentBank<F> {
    rules: usize,
    features: usize,
    classes: usize,
    values: Vec<F>,
}

impl<F: Real> ConsequentBank<F> {
    pub fn rules(&self) -> usize {
        self.rules
    }

    pub fn features(&self) -> usize {
        self.features
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    #[inline]
    pub fn idx(&self, r: usize, d: usize, c: usize) -> usize {
        (r * (self.features + 1) + d) * self.classes + c
    }

    /// Coefficient for rule `r`, feature slot `d` (0 = bias), class `c`.
    pub fn get(&self, r: usize, d: usize, c: usize) -> F {
        self.values[self.idx(r, d, c)]
    }

    pub fn set(&mut self, r: usize, d: usize, c: usize, v: F) {
        let i = self.idx(r, d, c);
        self.values[i] = v;
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [F] {
        &mut self.values
    }

    /// Coefficients of one rule as a `(D + 1) x C` row-major slice.
    pub fn rule(&self, r: usize) -> &[F] {
        let w = (self.features + 1) * self.classes;
        &self.values[r * w..(r + 1) * w]
    }

    /// New bank containing only the listed rules, in the given order.
    pub fn retain_rules(&self, keep: &[usize]) -> ConsequentBank<F> {
        let mut values = Vec::with_capacity(keep.len() * (self.features + 1) * self.classes);
        for &r in keep {
            values.extend_from_slice(self.rule(r));
        }
        ConsequentBank {
            rules: keep.len(),
            features: self.features,
            classes: self.classes,
            values,
        }
    }

    pub fn from_values(rules: usize, features: usize, classes: usize, values: Vec<F>) -> Result<Self> {
        if values.len() != rules * (features + 1) * classes {
            return Err(Error::ShapeMismatch(format!(
                "expected {rules}x{}x{classes} consequents, got {}",
                features + 1,
                values.len()
            )));
        }
        Ok(ConsequentBank {
            rules,
            features,
            classes,
            values,
        })
    }
}

/// All-zero consequent bank of shape `R x (D + 1) x C`.
pub fn init_consequents<F: Real>(rules: usize, features: usize, classes: usize) -> ConsequentBank<F> {
    ConsequentBank {
        rules,
        features,
        classes,
        values: vec![F::zero(); rules * (features + 1) * classes],
    }
}
