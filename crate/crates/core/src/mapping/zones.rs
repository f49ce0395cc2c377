use serde::{Deserialize, Serialize};

use super::MappingError;

/// Zone index: 0..=3 concentric bands (0 innermost), 4 left rectangle, 5 right rectangle.
pub type Zone = u8;

pub const ZONE_LEFT: Zone = 4;
pub const ZONE_RIGHT: Zone = 5;

/// Three elliptical rings around a target plus two lateral rectangles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZoneLayout {
    /// (ml, ap) in degrees.
    pub center: (f64, f64),
    /// Ring semi-axes (ml, ap), strictly ascending.
    pub radii: [(f64, f64); 3],
    /// ML distance from centre beyond which the rectangles apply.
    pub rect_ml_bound: f64,
}

impl Default for ZoneLayout {
    fn default() -> Self {
        Self::circular(2.0, 4.0, 6.0, 9.0)
    }
}

impl ZoneLayout {
    pub fn circular(r1: f64, r2: f64, r3: f64, rect: f64) -> Self {
        Self {
            center: (0.0, 0.0),
            radii: [(r1, r1), (r2, r2), (r3, r3)],
            rect_ml_bound: rect,
        }
    }

    /// Five reference layouts used by tests and the console.
    pub fn presets() -> [ZoneLayout; 5] {
        [
            Self::circular(2.0, 4.0, 6.0, 8.0),
            Self::circular(1.0, 2.5, 5.0, 7.5),
            Self {
                center: (0.0, 0.0),
                radii: [(3.0, 1.5), (5.0, 3.0), (7.0, 4.5)],
                rect_ml_bound: 8.5,
            },
            Self {
                center: (0.0, 0.0),
                radii: [(1.5, 3.0), (3.0, 5.0), (4.0, 7.5)],
                rect_ml_bound: 6.0,
            },
            Self {
                center: (1.5, 4.0),
                radii: [(2.0, 3.0), (3.5, 4.5), (5.0, 6.5)],
                rect_ml_bound: 7.0,
            },
        ]
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        let mut prev = (0.0, 0.0);
        for &(ml, ap) in &self.radii {
            if !(ml.is_finite() && ap.is_finite()) || ml <= prev.0 || ap <= prev.1 {
                return Err(MappingError::LayoutInvalid("radii must be positive and strictly ascending"));
            }
            prev = (ml, ap);
        }
        if !(self.rect_ml_bound > self.radii[2].0) {
            return Err(MappingError::LayoutInvalid("rect_ml_bound must exceed the outer ML radius"));
        }
        Ok(())
    }
}

/// Classify a trunk projection. Rectangles take priority; ring boundaries
/// belong to the inner zone.
pub fn allocate_zone(pos: (f64, f64), layout: &ZoneLayout) -> Zone {
    let dml = pos.0 - layout.center.0;
    let dap = pos.1 - layout.center.1;
    if dml.abs() > layout.rect_ml_bound {
        return if dml < 0.0 { ZONE_LEFT } else { ZONE_RIGHT };
    }
    layout
        .radii
        .iter()
        .position(|&(rml, rap)| (dml / rml).powi(2) + (dap / rap).powi(2) <= 1.0)
        .map_or(3, |i| i as Zone)
}
