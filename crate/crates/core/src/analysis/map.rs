use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{all_keys, AdditionKey};
use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::splits::{Role, SplitManifest};
use crate::train::TrialResult;

pub const DEFAULT_CELL_SIZE: u32 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellState {
    TrainRight,
    TrainWrong,
    TestRight,
    TestWrong,
}

impl CellState {
    pub fn new(role: Role, correct: bool) -> Self {
        match (role, correct) {
            (Role::Train, true) => CellState::TrainRight,
            (Role::Train, false) => CellState::TrainWrong,
            (Role::Test, true) => CellState::TestRight,
            (Role::Test, false) => CellState::TestWrong,
        }
    }

    pub fn rgb(self) -> [u8; 3] {
        match self {
            CellState::TrainRight => [200, 200, 200],
            CellState::TrainWrong => [255, 0, 0],
            CellState::TestRight => [135, 206, 250],
            CellState::TestWrong => [0, 0, 139],
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellCounts {
    pub train_right: usize,
    pub train_wrong: usize,
    pub test_right: usize,
    pub test_wrong: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LearningMap {
    pub n_max: u32,
    cells: Vec<CellState>,
}

impl LearningMap {
    pub fn cell(&self, key: AdditionKey) -> Option<CellState> {
        key.in_range(self.n_max).then(|| self.cells[key.index(self.n_max)])
    }

    pub fn counts(&self) -> CellCounts {
        let mut c = CellCounts::default();
        for s in &self.cells {
            match s {
                CellState::TrainRight => c.train_right += 1,
                CellState::TrainWrong => c.train_wrong += 1,
                CellState::TestRight => c.test_right += 1,
                CellState::TestWrong => c.test_wrong += 1,
            }
        }
        c
    }
}

/// Combines the manifest roles with the trial's per-key correctness.
pub fn learning_map(manifest: &SplitManifest, trial: &TrialResult) -> Result<LearningMap> {
    if manifest.n_max != trial.n_max {
        return Err(Error::CoverageMismatch(format!(
            "manifest is for N={}, trial for N={}",
            manifest.n_max, trial.n_max
        )));
    }
    let preds = super::indexed(trial)?;
    let cells = all_keys(manifest.n_max)
        .zip(preds)
        .map(|(key, p)| {
            let role = manifest.role(key);
            if p.role.is_some_and(|r| r != role) {
                return Err(Error::CoverageMismatch(format!("{key} has role {:?} in the trial but {role:?} in the manifest", p.role)));
            }
            Ok(CellState::new(role, p.correct()))
        })
        .collect::<Result<_>>()?;
    Ok(LearningMap { n_max: manifest.n_max, cells })
}

/// Binary PPM with one `cell`×`cell` block per key; n grows rightward and m
/// upward, so (0,0) sits in the bottom-left corner.
pub fn render_map(map: &LearningMap, cell: u32) -> Result<Vec<u8>> {
    if cell == 0 {
        return Err(Error::InvalidArgument("cell size must be at least 1".into()));
    }
    let side = (map.n_max + 1) as usize;
    let cs = cell as usize;
    let px = side * cs;
    let mut out = format!("P6\n{px} {px}\n255\n").into_bytes();
    out.reserve(px * px * 3);
    for y in 0..px {
        let m = (side - 1 - y / cs) as u32;
        for x in 0..px {
            let n = (x / cs) as u32;
            out.extend_from_slice(&map.cells[AdditionKey::new(n, m).index(map.n_max)].rgb());
        }
    }
    Ok(out)
}

pub fn write_map(map: &LearningMap, cell: u32, path: &Path) -> Result<()> {
    write_atomic(path, &render_map(map, cell)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use super::super::fixtures;
    use crate::splits::SplitProtocol;

    fn trial(_n: u32, wrong: &[(u32, u32)], manifest: &SplitManifest) -> TrialResult {
        let w: Vec<((u32, u32), u32)> = wrong.iter().map(|&(n, m)| ((n, m), n + m + 1)).collect();
        fixtures::trial(manifest, &w)
    }

    fn n1_manifest() -> SplitManifest {
        // Train (0,0),(1,1)... keys in index order: (0,0),(0,1),(1,0),(1,1).
        let roles = vec![Role::Train, Role::Test, Role::Train, Role::Test];
        SplitManifest::from_assignment(1, SplitProtocol::UniformRandom { test_fraction: 0.5 }, 0, roles).unwrap()
    }

    #[test]
    fn hand_built_two_by_two() {
        let man = n1_manifest();
        let map = learning_map(&man, &trial(1, &[(1, 0), (0, 1)], &man)).unwrap();
        assert_eq!(map.cell(AdditionKey::new(0, 0)), Some(CellState::TrainRight));
        assert_eq!(map.cell(AdditionKey::new(0, 1)), Some(CellState::TestWrong));
        assert_eq!(map.cell(AdditionKey::new(1, 0)), Some(CellState::TrainWrong));
        assert_eq!(map.cell(AdditionKey::new(1, 1)), Some(CellState::TestRight));

        let ppm = render_map(&map, 1).unwrap();
        let header = b"P6\n2 2\n255\n";
        assert_eq!(&ppm[..header.len()], header);
        let px: Vec<[u8; 3]> = ppm[header.len()..].chunks(3).map(|c| [c[0], c[1], c[2]]).collect();
        // Top row is m=1: (0,1) then (1,1); bottom row m=0: (0,0) then (1,0).
        assert_eq!(
            px,
            vec![
                CellState::TestWrong.rgb(),
                CellState::TestRight.rgb(),
                CellState::TrainRight.rgb(),
                CellState::TrainWrong.rgb()
            ]
        );
        assert_eq!(render_map(&map, 4).unwrap().len(), header.len() + 8 * 8 * 3);
        assert_eq!(render_map(&map, 4).unwrap(), render_map(&map, 4).unwrap());
    }

    #[test]
    fn counts_reconcile_with_manifest() {
        let man = n1_manifest();
        let map = learning_map(&man, &trial(1, &[(0, 1)], &man)).unwrap();
        let c = map.counts();
        assert_eq!(c.train_right + c.train_wrong, man.train_count());
        assert_eq!(c.test_right + c.test_wrong, man.test_count());
        assert_eq!(c.train_wrong, 0);
    }

    #[test]
    fn coverage_errors() {
        let man = n1_manifest();
        let mut t = trial(1, &[], &man);
        t.predictions.pop();
        assert!(matches!(learning_map(&man, &t), Err(Error::CoverageMismatch(_))));
        let mut t = trial(1, &[], &man);
        t.predictions[0].role = Some(Role::Test);
        assert!(matches!(learning_map(&man, &t), Err(Error::CoverageMismatch(_))));
        let mut t = trial(1, &[], &man);
        t.predictions[1] = t.predictions[0].clone();
        assert!(matches!(learning_map(&man, &t), Err(Error::CoverageMismatch(_))));
        assert!(render_map(&learning_map(&man, &trial(1, &[], &man)).unwrap(), 0).is_err());
    }
}
