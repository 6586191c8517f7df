//! Shared inputs for the criterion benchmarks under `benches/`.

use mlai_core::detection::BoundingBox;
use mlai_core::imaging::Frame;
use mlai_core::sim::{demo_scenario, render_sensor_view, Scenario};
use mlai_core::types::SensorId;

/// The demo scenario and its tracking-sensor view at `frame`.
pub fn demo_view(frame: u64) -> (Scenario, Frame) {
    let scn = demo_scenario();
    let img = render_sensor_view(&scn, SensorId(1), frame).expect("demo renders");
    (scn, img)
}

/// Target box of the demo scenario at frame 0, in tracker pixels.
pub fn demo_target_box() -> BoundingBox {
    let scn = demo_scenario();
    scn.target(scn.tracked_target).expect("demo target").bbox_at(0)
}
