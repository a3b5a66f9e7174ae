//! Geometry and indexing of the layered zone lattice.
//!
//! The operating area is an `n × n` lattice of square zones of side `tau`
//! metres, repeated over `layers` altitude layers. Rows run along `x`,
//! columns along `y`. Every zone is a half-open square so that each point
//! maps to exactly one zone.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_BAND_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GridError {
    #[error("grid side n must be at least 1")]
    EmptyGrid,
    #[error("zone side tau must be positive and finite, got {0}")]
    BadTau(f64),
    #[error("layer count must be at least 1")]
    NoLayers,
    #[error("band fraction must lie strictly between 0 and 0.5, got {0}")]
    BadBand(f64),
    #[error("position ({x}, {y}) on layer {layer} is outside the grid")]
    OutOfBounds { x: f64, y: f64, layer: usize },
    #[error("index ({a}, {b}) out of range for grid side {n}")]
    IndexOutOfRange { a: usize, b: usize, n: usize },
}

/// Shape of the zone lattice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub tau: f64,
    pub layers: usize,
    #[serde(default = "default_band")]
    pub band_fraction: f64,
}

fn default_band() -> f64 {
    DEFAULT_BAND_FRACTION
}

impl GridSpec {
    pub fn new(n: usize, tau: f64, layers: usize) -> Result<Self, GridError> {
        Self::with_band(n, tau, layers, DEFAULT_BAND_FRACTION)
    }

    pub fn with_band(
        n: usize,
        tau: f64,
        layers: usize,
        band_fraction: f64,
    ) -> Result<Self, GridError> {
        let g = GridSpec { n, tau, layers, band_fraction };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), GridError> {
        if self.n == 0 {
            return Err(GridError::EmptyGrid);
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(GridError::BadTau(self.tau));
        }
        if self.layers == 0 {
            return Err(GridError::NoLayers);
        }
        if !(self.band_fraction > 0.0 && self.band_fraction < 0.5) {
            return Err(GridError::BadBand(self.band_fraction));
        }
        Ok(())
    }

    /// Side length of the whole area in metres.
    pub fn extent(&self) -> f64 {
        self.n as f64 * self.tau
    }

    pub fn zones_per_layer(&self) -> usize {
        self.n * self.n
    }

    pub fn contains(&self, z: ZoneId) -> bool {
        z.row < self.n && z.col < self.n && z.layer < self.layers
    }

    /// All zones of one layer in row-major order.
    pub fn zones_in_layer(&self, layer: usize) -> impl Iterator<Item = ZoneId> + '_ {
        let n = self.n;
        (0..n * n).map(move |i| ZoneId::new(i / n, i % n, layer))
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct ZoneId {
    pub row: usize,
    pub col: usize,
    pub layer: usize,
}

impl ZoneId {
    pub const fn new(row: usize, col: usize, layer: usize) -> Self {
        ZoneId { row, col, layer }
    }

    /// Same cell on another layer.
    pub fn on_layer(self, layer: usize) -> Self {
        ZoneId { layer, ..self }
    }

    /// True for 4-neighbours on the same layer.
    pub fn is_plane_adjacent(&self, other: &ZoneId) -> bool {
        self.layer == other.layer && self.row.abs_diff(other.row) + self.col.abs_diff(other.col) == 1
    }
}

impl fmt::Display for ZoneId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.row, self.col, self.layer)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub layer: usize,
}

impl Position {
    pub const fn new(x: f64, y: f64, layer: usize) -> Self {
        Position { x, y, layer }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TransferDirection {
    /// From the lower-indexed zone of the pair to the higher one.
    LeftToRight,
    RightToLeft,
}

/// A capacity-1 buffer cell on the edge between two plane-adjacent zones.
///
/// Each edge carries two of them, one per direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TransferArea {
    /// Zone the lane is entered from.
    pub entry: ZoneId,
    /// Zone the lane leads into.
    pub exit: ZoneId,
}

impl TransferArea {
    pub fn between(entry: ZoneId, exit: ZoneId) -> Option<Self> {
        entry.is_plane_adjacent(&exit).then_some(TransferArea { entry, exit })
    }

    pub fn direction(&self) -> TransferDirection {
        if self.entry < self.exit {
            TransferDirection::LeftToRight
        } else {
            TransferDirection::RightToLeft
        }
    }

    /// The lane running the opposite way on the same edge.
    pub fn reverse(&self) -> Self {
        TransferArea { entry: self.exit, exit: self.entry }
    }

    /// Stable ordinal of the edge, shared by both lanes of a pair.
    pub fn edge_ordinal(&self, n: usize) -> usize {
        let lo = self.entry.min(self.exit);
        // zone ordinal first, then whether the edge points down or right
        let base = drone_zone_value(lo.row, lo.col, n).unwrap_or(usize::MAX / 4);
        let down = usize::from(self.entry.row != self.exit.row);
        base * 2 + down
    }
}

impl fmt::Display for TransferArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "T[{}->{}]", self.entry, self.exit)
    }
}

pub fn zone_of_position(p: Position, g: &GridSpec) -> Result<ZoneId, GridError> {
    let extent = g.extent();
    let inside = p.x.is_finite()
        && p.y.is_finite()
        && (0.0..=extent).contains(&p.x)
        && (0.0..=extent).contains(&p.y)
        && p.layer < g.layers;
    if !inside {
        return Err(GridError::OutOfBounds { x: p.x, y: p.y, layer: p.layer });
    }
    // the far edge x = n·tau belongs to the last zone
    let idx = |v: f64| ((v / g.tau).floor() as usize).min(g.n - 1);
    Ok(ZoneId::new(idx(p.x), idx(p.y), p.layer))
}

pub fn zone_center(z: ZoneId, g: &GridSpec) -> Position {
    Position::new(
        (z.row as f64 + 0.5) * g.tau,
        (z.col as f64 + 0.5) * g.tau,
        z.layer,
    )
}

/// True when `p` is within `band_fraction · tau` of a boundary shared by two
/// zones. The outer edge of the grid has no neighbour and never counts.
pub fn in_collision_band(p: Position, g: &GridSpec) -> Result<bool, GridError> {
    zone_of_position(p, g)?;
    let band = g.band_fraction * g.tau;
    let near_interior = |v: f64| {
        let k = (v / g.tau).round();
        k >= 1.0 && k <= (g.n - 1) as f64 && (v - k * g.tau).abs() < band
    };
    Ok(near_interior(p.x) || near_interior(p.y))
}

/// Ordinal of cell `(a, b)` in diagonal enumeration order.
///
/// Cells are numbered diagonal by diagonal (`a + b` ascending), and by
/// ascending `a` within a diagonal. The lower triangle is numbered directly;
/// the upper triangle is the point reflection of the lower one.
pub fn drone_zone_value(a: usize, b: usize, n: usize) -> Result<usize, GridError> {
    if a >= n || b >= n {
        return Err(GridError::IndexOutOfRange { a, b, n });
    }
    if a + b >= n {
        let mirrored = drone_zone_value(n - 1 - a, n - 1 - b, n)?;
        return Ok(n * n - 1 - mirrored);
    }
    let d = a + b;
    let k = d * (d + 1) / 2;
    Ok(if d != 0 { k + a } else { k + b })
}

/// Inverse of [`drone_zone_value`].
pub fn zone_at_ordinal(ordinal: usize, n: usize) -> Option<(usize, usize)> {
    if ordinal >= n * n {
        return None;
    }
    let lower_cells = n * (n + 1) / 2;
    let lower = |k: usize| {
        // largest d with d(d+1)/2 <= k
        let mut d = (((8 * k + 1) as f64).sqrt() as usize).saturating_sub(1) / 2;
        while (d + 1) * (d + 2) / 2 <= k {
            d += 1;
        }
        while d * (d + 1) / 2 > k {
            d -= 1;
        }
        let a = k - d * (d + 1) / 2;
        (a, d - a)
    };
    if ordinal < lower_cells {
        Some(lower(ordinal))
    } else {
        let (a, b) = lower(n * n - 1 - ordinal);
        Some((n - 1 - a, n - 1 - b))
    }
}

/// Enumerates the `n × n` cells diagonal by diagonal, by brute force.
pub fn diagonal_enumeration_oracle(n: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(n * n);
    for d in 0..(2 * n).saturating_sub(1) {
        for a in 0..n {
            if d >= a && d - a < n {
                out.push((a, d - a));
            }
        }
    }
    out
}

/// In-layer 4-neighbourhood plus the zones directly above and below.
pub fn neighbors_of(z: ZoneId, g: &GridSpec) -> BTreeSet<ZoneId> {
    let mut out = BTreeSet::new();
    if z.row > 0 {
        out.insert(ZoneId::new(z.row - 1, z.col, z.layer));
    }
    if z.row + 1 < g.n {
        out.insert(ZoneId::new(z.row + 1, z.col, z.layer));
    }
    if z.col > 0 {
        out.insert(ZoneId::new(z.row, z.col - 1, z.layer));
    }
    if z.col + 1 < g.n {
        out.insert(ZoneId::new(z.row, z.col + 1, z.layer));
    }
    if z.layer > 0 {
        out.insert(z.on_layer(z.layer - 1));
    }
    if z.layer + 1 < g.layers {
        out.insert(z.on_layer(z.layer + 1));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn g3() -> GridSpec {
        GridSpec::new(3, 10.0, 1).unwrap()
    }

    #[test]
    fn spec_validation() {
        assert_eq!(GridSpec::new(0, 1.0, 1), Err(GridError::EmptyGrid));
        assert!(matches!(GridSpec::new(2, 0.0, 1), Err(GridError::BadTau(_))));
        assert_eq!(GridSpec::new(2, 1.0, 0), Err(GridError::NoLayers));
        assert!(GridSpec::with_band(2, 1.0, 1, 0.5).is_err());
        assert!(GridSpec::with_band(2, 1.0, 1, 0.0).is_err());
    }

    #[test]
    fn zone_lookup() {
        let g = g3();
        assert_eq!(zone_of_position(Position::new(0.0, 0.0, 0), &g), Ok(ZoneId::new(0, 0, 0)));
        assert_eq!(zone_of_position(Position::new(10.0, 0.0, 0), &g), Ok(ZoneId::new(1, 0, 0)));
        assert_eq!(zone_of_position(Position::new(25.5, 14.2, 0), &g), Ok(ZoneId::new(2, 1, 0)));
        assert_eq!(zone_of_position(Position::new(30.0, 30.0, 0), &g), Ok(ZoneId::new(2, 2, 0)));
        assert!(matches!(
            zone_of_position(Position::new(30.1, 0.0, 0), &g),
            Err(GridError::OutOfBounds { .. })
        ));
        assert!(zone_of_position(Position::new(1.0, 1.0, 1), &g).is_err());
        assert!(zone_of_position(Position::new(-0.1, 1.0, 0), &g).is_err());
    }

    #[test]
    fn collision_band() {
        let g = g3();
        assert!(!in_collision_band(Position::new(15.0, 15.0, 0), &g).unwrap());
        assert!(in_collision_band(Position::new(9.6, 5.0, 0), &g).unwrap());
        // outer edge is not a shared boundary
        assert!(!in_collision_band(Position::new(0.3, 5.0, 0), &g).unwrap());
        assert!(!in_collision_band(Position::new(29.8, 5.0, 0), &g).unwrap());
        let single = GridSpec::new(1, 10.0, 1).unwrap();
        assert!(!in_collision_band(Position::new(5.0, 5.0, 0), &single).unwrap());
        assert!(in_collision_band(Position::new(40.0, 0.0, 0), &g).is_err());
    }

    #[test]
    fn zone_value_examples() {
        assert_eq!(drone_zone_value(0, 0, 3), Ok(0));
        assert_eq!(drone_zone_value(1, 1, 3), Ok(4));
        assert_eq!(drone_zone_value(2, 2, 3), Ok(8));
        assert_eq!(drone_zone_value(2, 1, 3), Ok(7));
        assert_eq!(
            drone_zone_value(3, 0, 3),
            Err(GridError::IndexOutOfRange { a: 3, b: 0, n: 3 })
        );
    }

    #[test]
    fn oracle_examples() {
        assert_eq!(diagonal_enumeration_oracle(1), vec![(0, 0)]);
        assert_eq!(diagonal_enumeration_oracle(2), vec![(0, 0), (0, 1), (1, 0), (1, 1)]);
        assert_eq!(diagonal_enumeration_oracle(3)[7], (2, 1));
    }

    #[test]
    fn zone_value_matches_oracle_up_to_40() {
        for n in 1..=40 {
            let cells = diagonal_enumeration_oracle(n);
            assert_eq!(cells.len(), n * n);
            for (ordinal, &(a, b)) in cells.iter().enumerate() {
                assert_eq!(drone_zone_value(a, b, n), Ok(ordinal), "n={n} cell=({a},{b})");
                assert_eq!(zone_at_ordinal(ordinal, n), Some((a, b)));
            }
            assert_eq!(zone_at_ordinal(n * n, n), None);
        }
    }

    #[test]
    fn neighbourhoods() {
        let g = g3();
        let corner = neighbors_of(ZoneId::new(0, 0, 0), &g);
        assert_eq!(
            corner.into_iter().collect::<Vec<_>>(),
            vec![ZoneId::new(0, 1, 0), ZoneId::new(1, 0, 0)]
        );
        assert_eq!(neighbors_of(ZoneId::new(1, 1, 0), &g).len(), 4);
        let g2 = GridSpec::new(3, 10.0, 2).unwrap();
        let up = neighbors_of(ZoneId::new(1, 1, 1), &g2);
        assert_eq!(up.len(), 5);
        assert!(up.contains(&ZoneId::new(1, 1, 0)));
    }

    #[test]
    fn transfer_lanes() {
        let a = ZoneId::new(0, 0, 0);
        let b = ZoneId::new(0, 1, 0);
        let lane = TransferArea::between(a, b).unwrap();
        assert_eq!(lane.direction(), TransferDirection::LeftToRight);
        assert_eq!(lane.reverse().direction(), TransferDirection::RightToLeft);
        assert_eq!(lane.edge_ordinal(3), lane.reverse().edge_ordinal(3));
        assert!(TransferArea::between(a, ZoneId::new(1, 1, 0)).is_none());
    }

    fn grid_strategy() -> impl Strategy<Value = GridSpec> {
        (1usize..8, 1.0f64..50.0, 1usize..4, 0.01f64..0.49)
            .prop_map(|(n, tau, l, b)| GridSpec::with_band(n, tau, l, b).unwrap())
    }

    proptest! {
        #[test]
        fn center_maps_back(g in grid_strategy(), r in 0usize..8, c in 0usize..8, l in 0usize..4) {
            let z = ZoneId::new(r % g.n, c % g.n, l % g.layers);
            prop_assert_eq!(zone_of_position(zone_center(z, &g), &g), Ok(z));
        }

        #[test]
        fn band_reflection_symmetric(g in grid_strategy(), fx in 0.0f64..=1.0, fy in 0.0f64..=1.0) {
            let e = g.extent();
            let p = Position::new(fx * e, fy * e, 0);
            let q = Position::new(e - p.x, p.y, 0);
            prop_assert_eq!(in_collision_band(p, &g).unwrap(), in_collision_band(q, &g).unwrap());
        }

        #[test]
        fn neighbour_relation_symmetric(g in grid_strategy(), r in 0usize..8, c in 0usize..8, l in 0usize..4) {
            let z = ZoneId::new(r % g.n, c % g.n, l % g.layers);
            for nb in neighbors_of(z, &g) {
                prop_assert!(g.contains(nb));
                prop_assert!(neighbors_of(nb, &g).contains(&z));
            }
        }
    }
}
