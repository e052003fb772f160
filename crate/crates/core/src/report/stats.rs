use std::fmt::Write;
use std::time::Duration;

use crate::pipeline::{CampaignResult, View};
use crate::raster::Rect;
use crate::search::SearchOutcome;

/// What the statistics block says about one view besides the search outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsContext {
    pub view: View,
    /// Original frame size.
    pub image_size: [u32; 2],
    /// Size after optional downscaling; equals `image_size` otherwise.
    pub working_size: [u32; 2],
    pub face: Rect,
    pub spot_size: [u32; 2],
}

/// Per-view section of the statistics block.
pub fn emit_view_stats(outcome: &SearchOutcome, ctx: &StatsContext) -> String {
    let title = ctx.view.title();
    let [w, h] = ctx.image_size;
    let [ww, wh] = ctx.working_size;
    let mut s = String::new();
    let _ = writeln!(s, "{title} Initial Image:");
    let _ = writeln!(s, "- Image Size: [{w}, {h}, {ww}, {wh}]");
    let _ = writeln!(s, "- Face Location: {}", ctx.face);
    let _ = writeln!(s, "- Lightspot rescaled to: [{},{}]", ctx.spot_size[0], ctx.spot_size[1]);
    let _ = writeln!(s, "- Number of iterations on LPO {title}: {}", outcome.iterations);
    let _ = writeln!(s, "- Lowest Confidence Index LPO {title}: {}", outcome.lowest_confidence_index);
    let _ = writeln!(
        s,
        "- Lowest Confidence Value LPO {title}: [{}]",
        outcome.best_confidence * 100.0
    );
    if let Some(trace) = outcome.trace.as_ref().filter(|t| !t.is_empty()) {
        let _ = writeln!(s, "- Trace LPO {title}:");
        for t in trace {
            let centers: Vec<String> = t.placement.centers.iter().map(|c| format!("[{},{}]", c[0], c[1])).collect();
            let _ = writeln!(s, "  {} {} {}", t.index, centers.join(" "), t.confidence);
        }
    }
    s
}

/// The whole block: header, then one section per view.
pub fn emit_stats(time_taken: Duration, pixel_increment: u32, views: &[(StatsContext, &SearchOutcome)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "The Statistics");
    let _ = writeln!(s, "-----");
    let _ = writeln!(s, "Time Taken (LPO): {}", time_taken.as_secs_f64());
    let _ = writeln!(s, "Pixel Increment Size: {pixel_increment}");
    for (ctx, outcome) in views {
        s.push_str(&emit_view_stats(outcome, ctx));
    }
    s
}

/// Statistics block for a campaign record. Search time comes from the
/// record's timing section.
pub fn campaign_statistics(result: &CampaignResult) -> String {
    let total: f64 = result.timing.search_seconds.values().sum();
    let views: Vec<(StatsContext, &SearchOutcome)> = result
        .views
        .iter()
        .map(|v| {
            (
                StatsContext {
                    view: v.view,
                    image_size: v.original_size,
                    working_size: v.image_size,
                    face: v.face,
                    spot_size: v.spot_size,
                },
                &v.search,
            )
        })
        .collect();
    emit_stats(
        Duration::from_secs_f64(total.max(0.0)),
        result.config.search.pixel_increment,
        &views,
    )
}
