//! Train/test partitions of Ω under the four protocols.
//!
//! Randomized protocols draw from `SplitMix64::new(seed)` and Fisher–Yates
//! over a canonically sorted candidate list, so a manifest is a pure function
//! of `(n_max, protocol, seed)`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{all_keys, AdditionKey};
use crate::error::{Error, Result};
use crate::io_util::{read_file, write_atomic};
use crate::rng::SplitMix64;

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", content = "params", rename_all = "snake_case")]
pub enum SplitProtocol {
    Commutativity { train_fraction: f64 },
    RandomPair { train_fraction: f64 },
    UniformRandom { test_fraction: f64 },
    IntegerExclusion { intervals: Vec<[u32; 2]> },
}

impl SplitProtocol {
    pub fn name(&self) -> &'static str {
        match self {
            SplitProtocol::Commutativity { .. } => "commutativity",
            SplitProtocol::RandomPair { .. } => "random_pair",
            SplitProtocol::UniformRandom { .. } => "uniform_random",
            SplitProtocol::IntegerExclusion { .. } => "integer_exclusion",
        }
    }

    /// Whether the partition depends on the seed.
    pub fn is_randomized(&self) -> bool {
        !matches!(self, SplitProtocol::IntegerExclusion { .. })
    }

    /// Builds the manifest this protocol describes.
    pub fn apply(&self, n_max: u32, seed: u64) -> Result<SplitManifest> {
        match self {
            SplitProtocol::Commutativity { train_fraction } => commutativity_split(n_max, *train_fraction, seed),
            SplitProtocol::RandomPair { train_fraction } => random_pair_split(n_max, *train_fraction, seed),
            SplitProtocol::UniformRandom { test_fraction } => uniform_random_split(n_max, *test_fraction, seed),
            SplitProtocol::IntegerExclusion { intervals } => integer_exclusion_split(n_max, intervals),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitManifest {
    pub n_max: u32,
    pub protocol: SplitProtocol,
    pub seed: u64,
    /// Role of every key, indexed by [`AdditionKey::index`].
    assignment: Vec<Role>,
}

impl SplitManifest {
    pub fn from_assignment(n_max: u32, protocol: SplitProtocol, seed: u64, assignment: Vec<Role>) -> Result<Self> {
        let side = n_max as usize + 1;
        if assignment.len() != side * side {
            return Err(Error::InvalidArgument(format!(
                "assignment has {} entries, expected {}",
                assignment.len(),
                side * side
            )));
        }
        if !assignment.contains(&Role::Train) {
            return Err(Error::EmptyTrainingSet);
        }
        Ok(Self { n_max, protocol, seed, assignment })
    }

    pub fn role(&self, key: AdditionKey) -> Role {
        self.assignment[key.index(self.n_max)]
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn keys_with(&self, role: Role) -> impl Iterator<Item = AdditionKey> + '_ {
        all_keys(self.n_max).filter(move |k| self.role(*k) == role)
    }

    pub fn train_keys(&self) -> Vec<AdditionKey> {
        self.keys_with(Role::Train).collect()
    }

    pub fn test_keys(&self) -> Vec<AdditionKey> {
        self.keys_with(Role::Test).collect()
    }

    pub fn train_count(&self) -> usize {
        self.assignment.iter().filter(|r| **r == Role::Train).count()
    }

    pub fn test_count(&self) -> usize {
        self.len() - self.train_count()
    }

    /// Returns a copy with one key moved to `role`.
    pub fn with_role(&self, key: AdditionKey, role: Role) -> Result<Self> {
        if !key.in_range(self.n_max) {
            return Err(Error::KeyOutOfRange { n: key.n, m: key.m, n_max: self.n_max });
        }
        let mut out = self.clone();
        out.assignment[key.index(self.n_max)] = role;
        Ok(out)
    }

    fn to_file(&self) -> ManifestFile {
        ManifestFile {
            schema_version: MANIFEST_SCHEMA_VERSION,
            n_max: self.n_max,
            protocol: self.protocol.clone(),
            seed: self.seed,
            train: self.train_keys(),
            test: self.test_keys(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(&self.to_file()).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ManifestFile = serde_json::from_str(text)?;
        if file.schema_version != MANIFEST_SCHEMA_VERSION {
            return Err(Error::SchemaMismatch { expected: MANIFEST_SCHEMA_VERSION, found: file.schema_version });
        }
        let n_max = file.n_max;
        let side = n_max as usize + 1;
        let mut slots: Vec<Option<Role>> = vec![None; side * side];
        for (keys, role) in [(&file.train, Role::Train), (&file.test, Role::Test)] {
            for &k in keys {
                if !k.in_range(n_max) {
                    return Err(Error::KeyOutOfRange { n: k.n, m: k.m, n_max });
                }
                let slot = &mut slots[k.index(n_max)];
                if slot.is_some() {
                    return Err(Error::DuplicateKey { n: k.n, m: k.m });
                }
                *slot = Some(role);
            }
        }
        let missing: Vec<AdditionKey> = all_keys(n_max).filter(|k| slots[k.index(n_max)].is_none()).collect();
        if let Some(first) = missing.first() {
            return Err(Error::IncompleteCover { missing: missing.len(), n: first.n, m: first.m });
        }
        let assignment = slots.into_iter().map(|r| r.expect("covered")).collect();
        Self::from_assignment(n_max, file.protocol, file.seed, assignment)
    }
}

#[derive(Serialize, Deserialize)]
struct ManifestFile {
    schema_version: u32,
    n_max: u32,
    protocol: SplitProtocol,
    seed: u64,
    train: Vec<AdditionKey>,
    test: Vec<AdditionKey>,
}

pub fn save_manifest(manifest: &SplitManifest, path: &Path) -> Result<()> {
    write_atomic(path, manifest.to_json().as_bytes())
}

pub fn load_manifest(path: &Path) -> Result<SplitManifest> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|e| Error::Malformed(e.to_string()))?;
    SplitManifest::from_json(&text)
}

fn omega_size(n_max: u32) -> usize {
    let side = n_max as usize + 1;
    side * side
}

/// Round-half-up of `fraction · total`.
fn round_count(fraction: f64, total: usize) -> usize {
    (fraction * total as f64 + 0.5).floor() as usize
}

/// Off-diagonal unordered pairs `{n, m}` with `n < m`, sorted.
fn unordered_pairs(n_max: u32) -> Vec<AdditionKey> {
    all_keys(n_max).filter(|k| k.n < k.m).collect()
}

/// Number of keys the commutativity protocol can place in training: N(N+1)/2.
pub fn max_commutativity_train(n_max: u32) -> usize {
    n_max as usize * (n_max as usize + 1) / 2
}

/// Diagonal keys and the dual of every training key go to test.
///
/// The training set holds `min(round(f·|Ω|), N(N+1)/2)` keys: with the
/// diagonal excluded and duals coupled, N(N+1)/2 is the 50 % ceiling.
pub fn commutativity_split(n_max: u32, train_fraction: f64, seed: u64) -> Result<SplitManifest> {
    let max = max_commutativity_train(n_max);
    if !(train_fraction > 0.0 && train_fraction <= 0.5) {
        return Err(Error::InfeasibleSplit(format!(
            "commutativity train_fraction {train_fraction} outside (0, 0.5]; at most {max} keys (N(N+1)/2) can be trained"
        )));
    }
    let want = round_count(train_fraction, omega_size(n_max)).min(max);
    if want == 0 {
        return Err(Error::EmptyTrainingSet);
    }
    let mut pairs = unordered_pairs(n_max);
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut pairs);
    let mut assignment = vec![Role::Test; omega_size(n_max)];
    for pair in &pairs[..want] {
        let key = if rng.coin() { *pair } else { pair.dual() };
        assignment[key.index(n_max)] = Role::Train;
    }
    SplitManifest::from_assignment(n_max, SplitProtocol::Commutativity { train_fraction }, seed, assignment)
}

/// Sampled pairs contribute both orientations to training; the diagonal and
/// all unsampled pairs go to test. At least one off-diagonal pair stays in test.
pub fn random_pair_split(n_max: u32, train_fraction: f64, seed: u64) -> Result<SplitManifest> {
    let omega = omega_size(n_max);
    let pairs_total = max_commutativity_train(n_max);
    let lo = 2.0 / omega as f64;
    let hi = 2.0 * (pairs_total as f64 - 1.0) / omega as f64;
    let bounds = || format!("achievable train_fraction range for N={n_max} is [{lo:.6}, {hi:.6}]");
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InfeasibleSplit(format!("train_fraction {train_fraction} outside (0, 1); {}", bounds())));
    }
    let keys = round_count(train_fraction, omega) & !1;
    let want = keys / 2;
    if want == 0 || want >= pairs_total {
        return Err(Error::InfeasibleSplit(format!(
            "train_fraction {train_fraction} asks for {keys} keys ({want} pairs of {pairs_total}); {}",
            bounds()
        )));
    }
    let mut pairs = unordered_pairs(n_max);
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut pairs);
    let mut assignment = vec![Role::Test; omega];
    for pair in &pairs[..want] {
        assignment[pair.index(n_max)] = Role::Train;
        assignment[pair.dual().index(n_max)] = Role::Train;
    }
    SplitManifest::from_assignment(n_max, SplitProtocol::RandomPair { train_fraction }, seed, assignment)
}

/// A uniform sample of `round(test_fraction·|Ω|)` keys goes to test.
pub fn uniform_random_split(n_max: u32, test_fraction: f64, seed: u64) -> Result<SplitManifest> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InfeasibleSplit(format!("test_fraction {test_fraction} outside [0, 1)")));
    }
    let omega = omega_size(n_max);
    let want = round_count(test_fraction, omega);
    if want >= omega {
        return Err(Error::EmptyTrainingSet);
    }
    let mut keys: Vec<AdditionKey> = all_keys(n_max).collect();
    let mut rng = SplitMix64::new(seed);
    rng.shuffle(&mut keys);
    let mut assignment = vec![Role::Train; omega];
    for key in &keys[..want] {
        assignment[key.index(n_max)] = Role::Test;
    }
    SplitManifest::from_assignment(n_max, SplitProtocol::UniformRandom { test_fraction }, seed, assignment)
}

pub fn validate_intervals(n_max: u32, intervals: &[[u32; 2]]) -> Result<()> {
    if intervals.is_empty() {
        return Err(Error::InvalidArgument("no excluded intervals".into()));
    }
    for (i, &[lo, hi]) in intervals.iter().enumerate() {
        if lo > hi || hi > n_max {
            return Err(Error::InvalidArgument(format!("interval [{lo},{hi}] not within [0,{n_max}]")));
        }
        if i > 0 && lo <= intervals[i - 1][1] {
            return Err(Error::InvalidArgument(format!(
                "interval [{lo},{hi}] overlaps or precedes [{},{}]",
                intervals[i - 1][0],
                intervals[i - 1][1]
            )));
        }
    }
    Ok(())
}

/// Every key touching an excluded integer goes to test; the rest train.
pub fn integer_exclusion_split(n_max: u32, intervals: &[[u32; 2]]) -> Result<SplitManifest> {
    validate_intervals(n_max, intervals)?;
    let excluded = |v: u32| intervals.iter().any(|&[lo, hi]| (lo..=hi).contains(&v));
    if (0..=n_max).all(excluded) {
        return Err(Error::EmptyTrainingSet);
    }
    let assignment = all_keys(n_max)
        .map(|k| if excluded(k.n) || excluded(k.m) { Role::Test } else { Role::Train })
        .collect();
    SplitManifest::from_assignment(
        n_max,
        SplitProtocol::IntegerExclusion { intervals: intervals.to_vec() },
        0,
        assignment,
    )
}

/// Parses "33-37,62-68" or "13" into sorted closed intervals.
pub fn parse_intervals(text: &str) -> Result<Vec<[u32; 2]>> {
    let bad = |s: &str| Error::InvalidArgument(format!("bad interval {s:?}"));
    let mut out = Vec::new();
    for part in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => (a.trim().parse().map_err(|_| bad(part))?, b.trim().parse().map_err(|_| bad(part))?),
            None => {
                let v: u32 = part.parse().map_err(|_| bad(part))?;
                (v, v)
            }
        };
        out.push([lo, hi]);
    }
    Ok(out)
}
