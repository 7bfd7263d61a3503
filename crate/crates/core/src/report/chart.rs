//! Grouped bar chart of intent distributions as plain SVG. Every bar is a
//! `<rect>`; axes and labels use other elements.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::Intent;
use crate::metrics::IntentCounts;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChartError {
    #[error("group {group}: success count {success} exceeds overall count {overall} for {intent}")]
    SuccessExceedsOverall { group: String, intent: Intent, overall: u64, success: u64 },
    #[error("chart has no intents")]
    NoIntents,
    #[error("chart dimensions too small")]
    TooSmall,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChartScale {
    /// Raw counts.
    #[default]
    Count,
    /// Counts divided by the group's overall total.
    Share,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartGroup {
    pub label: String,
    pub overall: IntentCounts,
    pub success: IntentCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChartSpec {
    pub title: String,
    pub intents: Vec<Intent>,
    pub groups: Vec<ChartGroup>,
    pub colors: Vec<String>,
    pub width: u32,
    pub height: u32,
    #[serde(default)]
    pub scale: ChartScale,
}

pub const PALETTE: [&str; 8] = ["#4c72b0", "#dd8452", "#55a868", "#c44e52", "#8172b3", "#937860", "#da8bc3", "#8c8c8c"];

const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 70.0;
const OVERALL_OPACITY: &str = "0.35";

impl ChartSpec {
    pub fn new(title: impl Into<String>, intents: Vec<Intent>, groups: Vec<ChartGroup>) -> ChartSpec {
        ChartSpec {
            title: title.into(),
            intents,
            colors: PALETTE.iter().map(|c| c.to_string()).collect(),
            groups,
            width: 800,
            height: 420,
            scale: ChartScale::Count,
        }
    }

    pub fn validate(&self) -> Result<(), ChartError> {
        if self.intents.is_empty() {
            return Err(ChartError::NoIntents);
        }
        if (self.width as f64) < MARGIN_LEFT + MARGIN_RIGHT + 10.0 || (self.height as f64) < MARGIN_TOP + MARGIN_BOTTOM + 10.0 {
            return Err(ChartError::TooSmall);
        }
        for g in &self.groups {
            for intent in &self.intents {
                let overall = count(&g.overall, intent);
                let success = count(&g.success, intent);
                if success > overall {
                    return Err(ChartError::SuccessExceedsOverall {
                        group: g.label.clone(),
                        intent: intent.clone(),
                        overall,
                        success,
                    });
                }
            }
        }
        Ok(())
    }

    /// Plotted (overall, success) values for one group and intent.
    pub fn values(&self, group: &ChartGroup, intent: &Intent) -> (f64, f64) {
        let (o, s) = (count(&group.overall, intent) as f64, count(&group.success, intent) as f64);
        match self.scale {
            ChartScale::Count => (o, s),
            ChartScale::Share => {
                let total: u64 = self.intents.iter().map(|i| count(&group.overall, i)).sum();
                if total == 0 {
                    (0.0, 0.0)
                } else {
                    (o / total as f64, s / total as f64)
                }
            }
        }
    }

    fn color(&self, k: usize) -> &str {
        if self.colors.is_empty() {
            PALETTE[k % PALETTE.len()]
        } else {
            &self.colors[k % self.colors.len()]
        }
    }
}

fn count(c: &IntentCounts, i: &Intent) -> u64 {
    c.get(i).copied().unwrap_or(0)
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Axis top: the smallest 1/2/5 x 10^k at or above `max`.
fn nice_ceiling(max: f64) -> f64 {
    if max <= 0.0 {
        return 1.0;
    }
    let mag = 10f64.powf(max.log10().floor());
    for step in [1.0, 2.0, 5.0, 10.0] {
        if step * mag >= max - 1e-12 * mag {
            return step * mag;
        }
    }
    10.0 * mag
}

pub fn render_distribution_chart(spec: &ChartSpec) -> Result<String, ChartError> {
    spec.validate()?;
    let (w, h) = (spec.width as f64, spec.height as f64);
    let plot_w = w - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = h - MARGIN_TOP - MARGIN_BOTTOM;
    let base_y = MARGIN_TOP + plot_h;
    let max = spec
        .groups
        .iter()
        .flat_map(|g| spec.intents.iter().map(move |i| spec.values(g, i).0))
        .fold(0.0, f64::max);
    let top = nice_ceiling(max);
    let px = |v: f64| v / top * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="11">"#,
        spec.width, spec.height, spec.width, spec.height
    );
    let _ = writeln!(s, r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(&spec.title));

    // axes and ticks
    let _ = writeln!(s, r#"<line x1="{MARGIN_LEFT:.2}" y1="{MARGIN_TOP:.2}" x2="{MARGIN_LEFT:.2}" y2="{base_y:.2}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{MARGIN_LEFT:.2}" y1="{base_y:.2}" x2="{:.2}" y2="{base_y:.2}" stroke="black"/>"#, w - MARGIN_RIGHT);
    for k in 0..=4 {
        let v = top * k as f64 / 4.0;
        let y = base_y - px(v);
        let label = match spec.scale {
            ChartScale::Count if top >= 4.0 => format!("{v:.0}"),
            _ => format!("{v:.2}"),
        };
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_LEFT:.2}" y2="{y:.2}" stroke="black"/>"#, MARGIN_LEFT - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{label}</text>"#, MARGIN_LEFT - 6.0, y + 4.0);
    }

    let cluster_w = plot_w / spec.intents.len() as f64;
    let slots = spec.groups.len().max(1) as f64 + 1.0;
    let bar_w = cluster_w / slots;
    for (ii, intent) in spec.intents.iter().enumerate() {
        let cluster_x = MARGIN_LEFT + ii as f64 * cluster_w;
        for (gi, group) in spec.groups.iter().enumerate() {
            let x = cluster_x + bar_w * (gi as f64 + 0.5);
            let (overall, success) = spec.values(group, intent);
            let color = spec.color(gi);
            for (v, opacity) in [(overall, OVERALL_OPACITY), (success, "1")] {
                let bh = px(v);
                let _ = writeln!(
                    s,
                    r#"<rect x="{x:.2}" y="{:.2}" width="{bar_w:.2}" height="{bh:.2}" fill="{color}" fill-opacity="{opacity}"><title>{} {}: {}</title></rect>"#,
                    base_y - bh,
                    esc(&group.label),
                    esc(intent.as_str()),
                    if opacity == "1" { format!("success {v}") } else { format!("overall {v}") },
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            cluster_x + cluster_w / 2.0,
            base_y + 16.0,
            esc(intent.as_str())
        );
    }

    // legend as colored text
    let mut lx = MARGIN_LEFT;
    let ly = h - 20.0;
    for (gi, group) in spec.groups.iter().enumerate() {
        let _ = writeln!(s, r#"<text x="{lx:.2}" y="{ly:.2}" fill="{}">&#9632; {}</text>"#, spec.color(gi), esc(&group.label));
        lx += 12.0 + 7.0 * group.label.chars().count() as f64 + 14.0;
    }
    let _ = writeln!(s, r##"<text x="{:.2}" y="{ly:.2}" text-anchor="end" fill="#555">faded: overall, solid: success</text>"##, w - MARGIN_RIGHT);
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use regex::Regex;

    fn spec(overall: u64, success: u64) -> ChartSpec {
        let a = Intent::new("A");
        ChartSpec::new(
            "t",
            vec![a.clone()],
            vec![ChartGroup {
                label: "g".into(),
                overall: IntentCounts::from([(a.clone(), overall)]),
                success: IntentCounts::from([(a, success)]),
            }],
        )
    }

    fn heights(svg: &str) -> Vec<f64> {
        Regex::new(r#"<rect [^>]*height="([0-9.]+)""#)
            .unwrap()
            .captures_iter(svg)
            .map(|c| c[1].parse().unwrap())
            .collect()
    }

    #[test]
    fn two_rects_half_height() {
        let svg = render_distribution_chart(&spec(4, 2)).unwrap();
        let h = heights(&svg);
        assert_eq!(h.len(), 2);
        assert!((h[1] * 2.0 - h[0]).abs() < 0.02);
        assert!(svg.contains(r#"fill-opacity="0.35""#));
    }

    #[test]
    fn deterministic_and_zero_safe() {
        let s = spec(4, 2);
        assert_eq!(render_distribution_chart(&s).unwrap(), render_distribution_chart(&s).unwrap());
        let svg = render_distribution_chart(&spec(0, 0)).unwrap();
        assert_eq!(heights(&svg), [0.0, 0.0]);
        assert!(svg.contains("<line"));
    }

    #[test]
    fn rejects_success_above_overall() {
        assert!(matches!(render_distribution_chart(&spec(1, 2)), Err(ChartError::SuccessExceedsOverall { .. })));
    }

    #[test]
    fn escapes_labels() {
        let mut s = spec(1, 1);
        s.title = "a<b & c".into();
        assert!(render_distribution_chart(&s).unwrap().contains("a&lt;b &amp; c"));
    }

    #[test]
    fn share_scale() {
        let a = Intent::new("A");
        let b = Intent::new("B");
        let mut s = ChartSpec::new(
            "t",
            vec![a.clone(), b.clone()],
            vec![ChartGroup {
                label: "g".into(),
                overall: IntentCounts::from([(a.clone(), 3), (b.clone(), 1)]),
                success: IntentCounts::from([(a.clone(), 1)]),
            }],
        );
        s.scale = ChartScale::Share;
        assert_eq!(s.values(&s.groups[0], &a), (0.75, 0.25));
    }

    #[test]
    fn nice_axis() {
        assert_eq!(nice_ceiling(0.0), 1.0);
        assert_eq!(nice_ceiling(4.0), 5.0);
        assert_eq!(nice_ceiling(10.0), 10.0);
        assert_eq!(nice_ceiling(130.0), 200.0);
        assert!((nice_ceiling(0.37) - 0.5).abs() < 1e-12);
    }
}
