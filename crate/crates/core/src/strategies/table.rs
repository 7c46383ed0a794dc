//! Strategy selection from coarse object properties, and the gripper
//! applicability matrix.

use serde::{Deserialize, Serialize};

use crate::error::StrategyError;
use crate::world::{GripperKind, GripperModel, ObjectSpec, Surface};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SizeClass {
    Small,
    Medium,
    Large,
}

/// Character of the surface facing the camera.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopSurface {
    Flat,
    /// A small flat top, as on a component.
    Even,
    Curved,
}

/// Properties the task planner knows about an object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ObjectProps {
    pub size: SizeClass,
    pub top: TopSurface,
    #[serde(default)]
    pub laminated_sides: bool,
    #[serde(default)]
    pub cluttered: bool,
    #[serde(default)]
    pub delicate: bool,
    #[serde(default)]
    pub heavy: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StrategyId {
    A,
    B,
    C,
}

impl StrategyId {
    pub fn gripper(self) -> GripperKind {
        match self {
            StrategyId::A => GripperKind::A,
            StrategyId::B => GripperKind::B,
            StrategyId::C => GripperKind::C,
        }
    }
}

impl std::fmt::Display for StrategyId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Proposed strategies for an object, preferred first.
pub fn select_strategy(p: &ObjectProps) -> Result<Vec<StrategyId>, StrategyError> {
    use StrategyId::*;
    let small_or_medium = matches!(p.size, SizeClass::Small | SizeClass::Medium);
    let flat_top = matches!(p.top, TopSurface::Flat | TopSurface::Even);
    if p.delicate {
        return if p.size == SizeClass::Large && p.top != TopSurface::Curved { Ok(vec![C]) } else { Ok(vec![A]) };
    }
    if p.top == TopSurface::Curved {
        return match (p.size, p.cluttered) {
            (SizeClass::Large, _) => Err(StrategyError::NoApplicableStrategy),
            (SizeClass::Small, true) => Ok(vec![B]),
            (SizeClass::Medium, true) => Ok(vec![A]),
            (SizeClass::Small, false) => Ok(vec![A, B]),
            (SizeClass::Medium, false) => Ok(vec![A]),
        };
    }
    if flat_top && p.laminated_sides && small_or_medium {
        return Ok(vec![A, C]);
    }
    if flat_top && (p.size != SizeClass::Small || p.heavy) {
        return Ok(vec![C]);
    }
    if flat_top && p.size == SizeClass::Small {
        return Ok(if p.cluttered { vec![B] } else { vec![A] });
    }
    Err(StrategyError::NoApplicableStrategy)
}

/// Object classes (columns) of the applicability matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableColumn {
    Small,
    Medium,
    Large,
    FlatInsideSmall,
    FlatInsideLarge,
    AnyShapeOneFlat,
    AnyShape,
}

impl TableColumn {
    pub const ALL: [TableColumn; 7] = [
        TableColumn::Small,
        TableColumn::Medium,
        TableColumn::Large,
        TableColumn::FlatInsideSmall,
        TableColumn::FlatInsideLarge,
        TableColumn::AnyShapeOneFlat,
        TableColumn::AnyShape,
    ];
}

/// Gripper/skill rows of the applicability matrix.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TableRow {
    StandardTwoFinger,
    StandardSuctionSingle,
    StandardSuctionMulti,
    A,
    B,
    C,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Vision {
    Accurate,
    Inaccurate,
}

/// Conditions attached to partially applicable cells.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Footnote {
    /// The object fits the gripper's opening width.
    FitsOpening = 1,
    /// The surface is flat.
    FlatSurface = 2,
    /// The flat surface leaves room for position error.
    RoomForError = 3,
    /// The object is not heavy.
    NotHeavy = 4,
    /// The surface accommodates all cups.
    FitsAllCups = 5,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Cell {
    Yes,
    No,
    If(&'static [Footnote]),
}

use Cell::{If, No, Yes};
use Footnote::*;

const F1: Cell = If(&[FitsOpening]);
const F2: Cell = If(&[FlatSurface]);
const F3: Cell = If(&[RoomForError]);
const F4: Cell = If(&[NotHeavy]);
const F24: Cell = If(&[FlatSurface, NotHeavy]);
const F34: Cell = If(&[RoomForError, NotHeavy]);
const F5: Cell = If(&[FitsAllCups]);
const F35: Cell = If(&[RoomForError, FitsAllCups]);

/// `(AV, IV)` pairs in [`TableColumn::ALL`] order.
const MATRIX: [(TableRow, [(Cell, Cell); 7]); 6] = [
    (TableRow::StandardTwoFinger, [(Yes, No), (Yes, No), (F1, No), (No, No), (No, No), (No, No), (No, No)]),
    (TableRow::StandardSuctionSingle, [(No, No), (F24, F24), (No, No), (Yes, Yes), (No, No), (F4, F34), (No, No)]),
    (TableRow::StandardSuctionMulti, [(No, No), (F2, F2), (F2, F2), (No, No), (Yes, No), (F5, F35), (No, No)]),
    (TableRow::A, [(Yes, Yes), (Yes, Yes), (F1, F1), (No, No), (No, No), (No, No), (No, No)]),
    (TableRow::B, [(Yes, Yes), (F1, F1), (No, No), (No, No), (No, No), (No, No), (No, No)]),
    (TableRow::C, [(No, No), (F2, F2), (F2, F2), (Yes, Yes), (Yes, Yes), (Yes, F3), (No, No)]),
];

pub fn table_cell(row: TableRow, column: TableColumn, vision: Vision) -> Cell {
    let entry = MATRIX.iter().find(|(r, _)| *r == row).expect("every row is tabulated");
    let i = TableColumn::ALL.iter().position(|c| *c == column).expect("every column is tabulated");
    match vision {
        Vision::Accurate => entry.1[i].0,
        Vision::Inaccurate => entry.1[i].1,
    }
}

impl From<StrategyId> for TableRow {
    fn from(s: StrategyId) -> Self {
        match s {
            StrategyId::A => TableRow::A,
            StrategyId::B => TableRow::B,
            StrategyId::C => TableRow::C,
        }
    }
}

/// Clearance kept between the object and the open fingers, m.
const FIT_MARGIN: f64 = 0.004;
/// Room around the cups demanded for position error, m.
const ERROR_ROOM: f64 = 0.02;

pub fn footnote_holds(f: Footnote, obj: &ObjectSpec, gripper: &GripperModel) -> bool {
    let props = obj.props;
    let short = obj.true_dims.min();
    let long = obj.true_dims.max();
    let cups_span = gripper.cup_spacing * (gripper.cup_count.max(1) - 1) as f64 + gripper.cup_diameter;
    match f {
        FitsOpening => gripper.is_finger() && short + FIT_MARGIN <= gripper.max_opening,
        FlatSurface => obj.surface == Surface::Flat,
        RoomForError => long >= cups_span + ERROR_ROOM && short >= gripper.cup_diameter + ERROR_ROOM,
        NotHeavy => !props.is_some_and(|p| p.heavy),
        FitsAllCups => long >= cups_span && short >= gripper.cup_diameter,
    }
}

pub fn cell_holds(cell: Cell, obj: &ObjectSpec, gripper: &GripperModel) -> bool {
    match cell {
        Yes => true,
        No => false,
        If(notes) => notes.iter().all(|&f| footnote_holds(f, obj, gripper)),
    }
}

/// Whether `strategy` is proposed for `obj` and checked in one of its
/// matrix columns under the given vision quality.
pub fn applicable(strategy: StrategyId, obj: &ObjectSpec, gripper: &GripperModel, vision: Vision) -> bool {
    let Some(props) = obj.props else { return false };
    let Ok(proposed) = select_strategy(&props) else { return false };
    proposed.contains(&strategy)
        && obj.table2.iter().any(|&col| cell_holds(table_cell(strategy.into(), col, vision), obj, gripper))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn props(size: SizeClass, top: TopSurface) -> ObjectProps {
        ObjectProps { size, top, laminated_sides: false, cluttered: false, delicate: false, heavy: false }
    }

    #[test]
    fn device_objects_map_to_their_grippers() {
        use StrategyId::*;
        let battery = ObjectProps { cluttered: true, ..props(SizeClass::Small, TopSurface::Curved) };
        assert_eq!(select_strategy(&battery).unwrap(), vec![B]);
        let magnetron = ObjectProps { laminated_sides: true, ..props(SizeClass::Small, TopSurface::Even) };
        assert_eq!(select_strategy(&magnetron).unwrap(), vec![A, C]);
        let display = ObjectProps { heavy: true, ..props(SizeClass::Large, TopSurface::Flat) };
        assert_eq!(select_strategy(&display).unwrap(), vec![C]);
        let bulb = ObjectProps { delicate: true, ..props(SizeClass::Large, TopSurface::Curved) };
        assert_eq!(select_strategy(&bulb).unwrap(), vec![A]);
        let psu = ObjectProps { heavy: true, ..props(SizeClass::Medium, TopSurface::Flat) };
        assert_eq!(select_strategy(&psu).unwrap(), vec![C]);
        let cover = props(SizeClass::Large, TopSurface::Flat);
        assert_eq!(select_strategy(&cover).unwrap(), vec![C]);
    }

    #[test]
    fn large_curved_objects_have_no_strategy() {
        assert_eq!(
            select_strategy(&props(SizeClass::Large, TopSurface::Curved)),
            Err(StrategyError::NoApplicableStrategy)
        );
    }

    #[test]
    fn matrix_rows_match_the_summary() {
        use TableColumn::*;
        assert_eq!(table_cell(TableRow::A, Small, Vision::Inaccurate), Yes);
        assert_eq!(table_cell(TableRow::StandardTwoFinger, Small, Vision::Inaccurate), No);
        assert_eq!(table_cell(TableRow::B, Medium, Vision::Accurate), F1);
        assert_eq!(table_cell(TableRow::C, AnyShapeOneFlat, Vision::Inaccurate), F3);
        assert_eq!(table_cell(TableRow::C, FlatInsideLarge, Vision::Inaccurate), Yes);
        assert_eq!(table_cell(TableRow::StandardSuctionMulti, FlatInsideLarge, Vision::Inaccurate), No);
        for row in [TableRow::A, TableRow::B, TableRow::C] {
            for v in [Vision::Accurate, Vision::Inaccurate] {
                assert_eq!(table_cell(row, AnyShape, v), No);
            }
        }
    }
}
