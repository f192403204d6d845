//! The block-rotation task: trial schedules, block and gap geometry, the
//! two-round state machine and scoring.
//!
//! A block occupies a 2×2 footprint with three filled cells (a vertical domino
//! plus one protruding cell). It hovers over a line of [`LINE_WIDTH`] cells
//! whose holes match exactly one of the block's two orientations. Every value
//! here is an immutable snapshot; transitions return new states.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::{rng_from_seed, SimRng};

pub const LINE_WIDTH: usize = 4;
pub const DEFAULT_TRIALS: usize = 16;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GameError {
    #[error("invalid trial count {0}: must be a positive multiple of 4")]
    InvalidTrialCount(usize),
    #[error("invalid state: block fits the gap in {fits} of 2 orientations")]
    InvalidState { fits: usize },
    #[error("block in trial {0} has already dropped")]
    AlreadyDropped(usize),
    #[error("trial {0} has not finished")]
    NotDropped(usize),
}

/// Binary decision conveyed through every channel. Encodes to 1 for rotate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Rotate,
    NoRotate,
}

impl Decision {
    pub fn as_bit(self) -> u8 {
        match self {
            Decision::Rotate => 1,
            Decision::NoRotate => 0,
        }
    }

    pub fn from_bit(bit: bool) -> Self {
        if bit {
            Decision::Rotate
        } else {
            Decision::NoRotate
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Decision::Rotate => Decision::NoRotate,
            Decision::NoRotate => Decision::Rotate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    #[serde(rename = "0")]
    Upright,
    #[serde(rename = "180")]
    Flipped,
}

impl Orientation {
    pub fn toggled(self) -> Self {
        match self {
            Orientation::Upright => Orientation::Flipped,
            Orientation::Flipped => Orientation::Upright,
        }
    }
}

/// Cell grid, row 0 on top.
pub type Cells = [[bool; 2]; 2];

fn rotate_cells(c: &Cells) -> Cells {
    [[c[1][1], c[1][0]], [c[0][1], c[0][0]]]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockShape {
    /// Occupancy in the upright orientation.
    pub cells: Cells,
    pub orientation: Orientation,
}

const X: bool = true;
const O: bool = false;

/// Every 3-cell shape in a 2×2 footprint. All differ from their 180° rotation.
pub const SHAPE_CATALOG: [Cells; 4] = [
    [[X, O], [X, X]],
    [[O, X], [X, X]],
    [[X, X], [X, O]],
    [[X, X], [O, X]],
];

impl BlockShape {
    pub fn new(cells: Cells) -> Self {
        Self {
            cells,
            orientation: Orientation::Upright,
        }
    }

    pub fn oriented_cells(&self) -> Cells {
        match self.orientation {
            Orientation::Upright => self.cells,
            Orientation::Flipped => rotate_cells(&self.cells),
        }
    }

    pub fn rotated(&self) -> Self {
        Self {
            cells: self.cells,
            orientation: self.orientation.toggled(),
        }
    }

    pub fn bottom_row(&self) -> [bool; 2] {
        self.oriented_cells()[1]
    }

    pub fn is_rotation_asymmetric(&self) -> bool {
        self.cells != rotate_cells(&self.cells)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapLine {
    pub occupancy: Vec<bool>,
}

impl GapLine {
    /// The line whose holes are exactly the bottom cells of `block` placed at `column`.
    pub fn matching(block: &BlockShape, column: usize) -> Self {
        let bottom = block.bottom_row();
        let occupancy = (0..LINE_WIDTH)
            .map(|j| !(j >= column && j < column + 2 && bottom[j - column]))
            .collect();
        Self { occupancy }
    }

    /// True when dropping `block` at `column` fills every hole without collision.
    pub fn is_filled_by(&self, block: &BlockShape, column: usize) -> bool {
        let bottom = block.bottom_row();
        self.occupancy.iter().enumerate().all(|(j, &occupied)| {
            let covered = j >= column && j < column + 2 && bottom[j - column];
            occupied != covered
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FallStage {
    Top,
    Halfway,
    Dropped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialState {
    pub trial_index: usize,
    pub round: u8,
    pub block: BlockShape,
    pub column: usize,
    pub gap: GapLine,
    pub fall_stage: FallStage,
    /// Ground truth fixed at generation: whether the initial orientation must be rotated.
    pub requires_rotation: bool,
}

impl TrialState {
    pub fn new(trial_index: usize, cells: Cells, column: usize, requires_rotation: bool) -> Self {
        let block = BlockShape::new(cells);
        let target = if requires_rotation {
            block.rotated()
        } else {
            block
        };
        Self {
            trial_index,
            round: 1,
            block,
            column,
            gap: GapLine::matching(&target, column),
            fall_stage: FallStage::Top,
            requires_rotation,
        }
    }

    pub fn fits_now(&self) -> bool {
        self.gap.is_filled_by(&self.block, self.column)
    }

    pub fn is_dropped(&self) -> bool {
        self.fall_stage == FallStage::Dropped
    }
}

/// Returns the action that makes the block fit from its current orientation.
pub fn correct_action(state: &TrialState) -> Result<Decision, GameError> {
    let as_is = state.gap.is_filled_by(&state.block, state.column);
    let rotated = state.gap.is_filled_by(&state.block.rotated(), state.column);
    match (as_is, rotated) {
        (true, false) => Ok(Decision::NoRotate),
        (false, true) => Ok(Decision::Rotate),
        (a, b) => Err(GameError::InvalidState {
            fits: usize::from(a) + usize::from(b),
        }),
    }
}

/// Applies the Receiver's decision: toggles orientation on rotate and drops the block one stage.
pub fn apply_decision(state: &TrialState, decision: Decision) -> Result<TrialState, GameError> {
    let mut next = state.clone();
    if decision == Decision::Rotate {
        next.block = state.block.rotated();
    }
    match state.fall_stage {
        FallStage::Top => {
            next.fall_stage = FallStage::Halfway;
            next.round = 2;
        }
        FallStage::Halfway => next.fall_stage = FallStage::Dropped,
        FallStage::Dropped => return Err(GameError::AlreadyDropped(state.trial_index)),
    }
    Ok(next)
}

pub fn score_trial(state: &TrialState) -> Result<u32, GameError> {
    if !state.is_dropped() {
        return Err(GameError::NotDropped(state.trial_index));
    }
    Ok(u32::from(state.fits_now()))
}

pub fn score_session<'a, I>(finals: I) -> Result<u32, GameError>
where
    I: IntoIterator<Item = &'a TrialState>,
{
    finals.into_iter().map(score_trial).sum()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialSchedule {
    pub seed: u64,
    pub trials: Vec<TrialState>,
}

impl TrialSchedule {
    pub fn rotation_count(&self) -> usize {
        self.trials.iter().filter(|t| t.requires_rotation).count()
    }
}

/// Builds a schedule whose halves each hold equal numbers of rotation and non-rotation trials.
pub fn generate_schedule(seed: u64, n_trials: usize) -> Result<TrialSchedule, GameError> {
    if n_trials == 0 || n_trials % 4 != 0 {
        return Err(GameError::InvalidTrialCount(n_trials));
    }
    let mut rng: SimRng = rng_from_seed(seed);
    let half = n_trials / 2;
    let mut pattern = Vec::with_capacity(n_trials);
    for _ in 0..2 {
        let mut part: Vec<bool> = (0..half).map(|i| i < half / 2).collect();
        part.shuffle(&mut rng);
        pattern.extend(part);
    }
    let trials = pattern
        .into_iter()
        .enumerate()
        .map(|(i, requires_rotation)| {
            let cells = SHAPE_CATALOG[rng.random_range(0..SHAPE_CATALOG.len())];
            let column = rng.random_range(0..=LINE_WIDTH - 2);
            TrialState::new(i, cells, column, requires_rotation)
        })
        .collect();
    Ok(TrialSchedule { seed, trials })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Sender,
    Receiver,
}

/// What a participant's screen shows. Receiver views never carry the gap line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ViewModel {
    pub role: Role,
    pub trial_index: usize,
    pub round: u8,
    pub fall_stage: FallStage,
    pub block: Cells,
    pub column: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gap: Option<GapLine>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub outcome: Option<bool>,
}

impl ViewModel {
    /// Correct action derivable from the view alone; `None` without a gap.
    pub fn correct_action(&self) -> Option<Decision> {
        let gap = self.gap.as_ref()?;
        let shown = BlockShape::new(self.block);
        let as_is = gap.is_filled_by(&shown, self.column);
        let rotated = gap.is_filled_by(&shown.rotated(), self.column);
        match (as_is, rotated) {
            (true, false) => Some(Decision::NoRotate),
            (false, true) => Some(Decision::Rotate),
            _ => None,
        }
    }
}

pub fn render_view(state: &TrialState, role: Role) -> ViewModel {
    ViewModel {
        role,
        trial_index: state.trial_index,
        round: state.round,
        fall_stage: state.fall_stage,
        block: state.block.oriented_cells(),
        column: state.column,
        gap: match role {
            Role::Sender => Some(state.gap.clone()),
            Role::Receiver => None,
        },
        outcome: state.is_dropped().then(|| state.fits_now()),
    }
}
