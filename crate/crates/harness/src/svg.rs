use std::fmt::Write as _;
use std::path::Path;

use copcs_core::dynamics::{EventKind, RobotId};
use copcs_core::{ExecutionTrace, Point, Scenario};

/// Line colors per UAV, cycled.
const UAV_COLORS: [&str; 6] = ["#d62728", "#1f77b4", "#ff7f0e", "#9467bd", "#17becf", "#e377c2"];

/// Map view of a mission: area bounds, white task circles, green road nodes, black road and UGV
/// drive segments, one colored line per UAV flight and a marker with its start time at every
/// recharge. Every drawn element carries a `class` naming what it is.
pub fn render_svg(scenario: &Scenario, trace: Option<&ExecutionTrace>) -> String {
    let (w, h) = (scenario.area.width_m, scenario.area.height_m);
    let scale = 800.0 / w.max(h);
    let p = |pt: &Point| (pt.x * scale, (h - pt.y) * scale);
    let r = 6.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.1}" height="{:.1}" viewBox="0 0 {:.1} {:.1}">"#,
        w * scale,
        h * scale,
        w * scale,
        h * scale
    );
    let _ = writeln!(out, r##"<rect class="area" x="0" y="0" width="{:.1}" height="{:.1}" fill="#dddddd" stroke="black"/>"##, w * scale, h * scale);
    for e in scenario.road.edges() {
        let (a, b) = (p(&scenario.road.nodes()[e.a]), p(&scenario.road.nodes()[e.b]));
        let _ = writeln!(out, r##"<line class="road" x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#888888" stroke-dasharray="4 3"/>"##, a.0, a.1, b.0, b.1);
    }

    if let Some(trace) = trace {
        for ev in &trace.events {
            let (a, b) = (p(&ev.from), p(&ev.to));
            match (ev.kind, ev.robot) {
                (EventKind::Fly | EventKind::Visit, RobotId::Uav(i)) if ev.from != ev.to => {
                    let color = UAV_COLORS[i % UAV_COLORS.len()];
                    let _ = writeln!(
                        out,
                        r#"<line class="uav-path uav-{i}" x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/>"#,
                        a.0, a.1, b.0, b.1
                    );
                }
                (EventKind::Drive, RobotId::Ugv(i)) if ev.from != ev.to => {
                    let _ = writeln!(
                        out,
                        r#"<line class="ugv-path ugv-{i}" x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black" stroke-width="3"/>"#,
                        a.0, a.1, b.0, b.1
                    );
                }
                _ => {}
            }
        }
    }

    for (i, node) in scenario.road.nodes().iter().enumerate() {
        let c = p(node);
        let _ = writeln!(out, r##"<circle class="road-node" data-node="{i}" cx="{:.1}" cy="{:.1}" r="{r}" fill="#2ca02c" stroke="black"/>"##, c.0, c.1);
    }
    for t in &scenario.tasks {
        let c = p(&t.position);
        let _ = writeln!(out, r#"<circle class="task" data-task="{}" cx="{:.1}" cy="{:.1}" r="{r}" fill="white" stroke="black"/>"#, t.index, c.0, c.1);
    }
    if let Some(trace) = trace {
        for rv in &trace.rendezvous {
            let c = p(&rv.ugv_position);
            let _ = writeln!(
                out,
                r##"<g class="recharge" data-uav="{}" data-ugv="{}"><rect x="{:.1}" y="{:.1}" width="8" height="8" fill="#ffd700" stroke="black"/><text x="{:.1}" y="{:.1}" font-size="10">{:.0} s</text></g>"##,
                rv.uav,
                rv.ugv,
                c.0 - 4.0,
                c.1 - 4.0,
                c.0 + 6.0,
                c.1 - 6.0,
                rv.start
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

pub fn export_trace_svg(scenario: &Scenario, trace: Option<&ExecutionTrace>, path: impl AsRef<Path>) -> std::io::Result<()> {
    std::fs::write(path, render_svg(scenario, trace))
}
