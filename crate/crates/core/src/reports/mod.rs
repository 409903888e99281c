// SPDX-License-Identifier: MIT OR Apache-2.0

//! Probe-accuracy breakdowns, accuracy-curve exports and segmentation
//! heatmaps.

mod accuracy;
mod curves;
mod html;

pub use accuracy::{
    accuracy_breakdown, AccuracyCurve, CurvePoint, Scheme, CLASS_FIRST, CLASS_LAST, CLASS_MIDDLE,
    CLASS_OTHER, CLASS_OVERALL,
};
pub use curves::{curves_csv, export_curves};
pub use html::{cell_color, render_segmentation, segmentation_html};
