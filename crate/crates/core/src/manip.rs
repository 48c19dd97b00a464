//! Chart manipulation steps shared by the planner and the executor.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::chart::{Anchor, Axis, Guideline, Intensity, Mark, RowId};
use crate::task::DeriveSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RearrangeMode {
    Align,
    Stack,
    Sort,
}

/// How growth derivations compare the last and first value of a window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GrowthMode {
    #[default]
    Ratio,
    Delta,
}

impl GrowthMode {
    fn is_default(&self) -> bool {
        *self == GrowthMode::Ratio
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "lowercase")]
pub enum Manip {
    /// Set the intensity of `rows`. With `reset`, previous intensities are
    /// cleared first; otherwise the step adds to them.
    Highlight {
        rows: BTreeSet<RowId>,
        intensity: Intensity,
        #[serde(default)]
        reset: bool,
    },
    Annotate {
        anchor: Anchor,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        guideline: Option<Guideline>,
    },
    /// Set the domain of one axis. Rescaling x refits y to the visible data
    /// that falls inside the new x domain.
    Rescale { axis: Axis, domain: [f64; 2] },
    Rearrange {
        mode: RearrangeMode,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        key: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ascending: Option<bool>,
    },
    Reduce {
        #[serde(rename = "keepRows")]
        keep_rows: BTreeSet<RowId>,
    },
    Derive {
        spec: DeriveSpec,
        name: String,
        #[serde(default, skip_serializing_if = "GrowthMode::is_default")]
        growth: GrowthMode,
    },
    Reencode {
        #[serde(rename = "targetMark")]
        target_mark: Mark,
    },
}

impl Manip {
    pub fn kind(&self) -> ManipKind {
        match self {
            Manip::Highlight { .. } => ManipKind::Highlight,
            Manip::Annotate { .. } => ManipKind::Annotate,
            Manip::Rescale { .. } => ManipKind::Rescale,
            Manip::Rearrange { .. } => ManipKind::Rearrange,
            Manip::Reduce { .. } => ManipKind::Reduce,
            Manip::Derive { .. } => ManipKind::Derive,
            Manip::Reencode { .. } => ManipKind::Reencode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ManipKind {
    Highlight,
    Annotate,
    Rescale,
    Rearrange,
    Reduce,
    Derive,
    Reencode,
}

impl ManipKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ManipKind::Highlight => "highlight",
            ManipKind::Annotate => "annotate",
            ManipKind::Rescale => "rescale",
            ManipKind::Rearrange => "rearrange",
            ManipKind::Reduce => "reduce",
            ManipKind::Derive => "derive",
            ManipKind::Reencode => "reencode",
        }
    }
}

impl fmt::Display for ManipKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Which part of the task a step was compiled from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Filter,
    Encoding,
    Derive,
    Identify,
    Annotate,
}

impl Origin {
    /// Bottom-up level: filters and encodings, then derivations, then
    /// identification output.
    pub fn level(&self) -> u8 {
        match self {
            Origin::Filter | Origin::Encoding => 0,
            Origin::Derive => 1,
            Origin::Identify | Origin::Annotate => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManipStep {
    #[serde(flatten)]
    pub manip: Manip,
    pub origin: Origin,
}

impl ManipStep {
    pub fn new(manip: Manip, origin: Origin) -> Self {
        ManipStep { manip, origin }
    }

    pub fn kind(&self) -> ManipKind {
        self.manip.kind()
    }
}

/// Number formatting for annotation text: integers without a fraction,
/// everything else to two decimals.
pub fn format_value(v: f64) -> String {
    if (v - v.round()).abs() < 1e-9 {
        crate::task::format_number(v.round())
    } else {
        format!("{v:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let step = ManipStep::new(Manip::Reencode { target_mark: Mark::Bar }, Origin::Encoding);
        let v = serde_json::to_value(&step).unwrap();
        assert_eq!(v["kind"], "reencode");
        assert_eq!(v["params"]["targetMark"], "bar");
        assert_eq!(v["origin"], "encoding");
        let back: ManipStep = serde_json::from_value(v).unwrap();
        assert_eq!(back, step);
    }

    #[test]
    fn values() {
        assert_eq!(format_value(3.0), "3");
        assert_eq!(format_value(2.345), "2.35");
        assert_eq!(format_value(-0.0), "0");
    }
}
