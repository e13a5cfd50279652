//! SVG frames of a trajectory file plus an HTML index that plays them.
//!
//! By default both instances share one panel: two robot glyphs in distinct
//! colors, each instance's humans in its color at reduced opacity, the goal
//! and both robot trails. Side-by-side mode draws one panel per instance.
//! Encoding the frames to video is left to external tools.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use contrast_core::crowdnav::Vec2;

use crate::error::{CliError, Result};
use crate::trajfile::TrajectoryFile;

const SCALE: f64 = 40.0;
const MARGIN: f64 = 20.0;
const COLORS: [&str; 2] = ["#1f77b4", "#e6550d"];
const HUMAN_OPACITY: f64 = 0.35;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Layout {
    #[default]
    Overlay,
    SideBySide,
}

#[derive(Debug, Clone)]
pub struct Rendered {
    pub frames: Vec<PathBuf>,
    pub index: PathBuf,
}

struct Frame {
    robots: [Vec2; 2],
    /// Per instance: (position, radius) of each human.
    humans: [Vec<(Vec2, f64)>; 2],
}

fn frames_of(file: &TrajectoryFile) -> Vec<Frame> {
    let sc = &file.header.scenario;
    let radii: Vec<f64> = sc.humans.iter().map(|h| h.radius).collect();
    let start: Vec<(Vec2, f64)> = sc.humans.iter().map(|h| (h.position, h.radius)).collect();
    let mut out = vec![Frame {
        robots: [sc.robot.position, sc.robot.position],
        humans: [start.clone(), start],
    }];
    for r in &file.records {
        let point = |s: &[crate::trajfile::Num]| Vec2::new(s[0].0, s[1].0);
        let humans = [0, 1].map(|i| {
            r.humans[i]
                .iter()
                .zip(&radii)
                .map(|(h, &rad)| (Vec2::new(h[0].0, h[1].0), rad))
                .collect()
        });
        out.push(Frame {
            robots: [point(&r.state_1), point(&r.state_2)],
            humans,
        });
    }
    out
}

struct Panel {
    x0: f64,
    height: f64,
}

impl Panel {
    fn px(&self, p: Vec2) -> (f64, f64) {
        (self.x0 + MARGIN + p.x * SCALE, MARGIN + (self.height - p.y) * SCALE)
    }
}

fn draw_panel(
    svg: &mut String,
    file: &TrajectoryFile,
    frames: &[Frame],
    k: usize,
    panel: &Panel,
    instances: &[usize],
) {
    let sc = &file.header.scenario;
    let (w, h) = (sc.arena.width * SCALE, sc.arena.height * SCALE);
    let _ = writeln!(
        svg,
        r##"<rect x="{:.1}" y="{MARGIN:.1}" width="{w:.1}" height="{h:.1}" fill="#fafafa" stroke="#333"/>"##,
        panel.x0 + MARGIN
    );
    let (gx, gy) = panel.px(sc.robot.goal);
    let _ = writeln!(
        svg,
        r##"<circle class="goal" cx="{gx:.3}" cy="{gy:.3}" r="{:.3}" fill="#2ca02c" fill-opacity="0.25" stroke="#2ca02c" stroke-dasharray="4 2"/>"##,
        sc.goal_radius * SCALE
    );
    for &i in instances {
        for (p, r) in &frames[k].humans[i] {
            let (x, y) = panel.px(*p);
            let _ = writeln!(
                svg,
                r#"<circle class="human" data-instance="{}" cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="{}" fill-opacity="{HUMAN_OPACITY}"/>"#,
                i + 1,
                r * SCALE,
                COLORS[i]
            );
        }
    }
    for &i in instances {
        let trail: Vec<String> = frames[..=k]
            .iter()
            .map(|f| {
                let (x, y) = panel.px(f.robots[i]);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="trail" points="{}" fill="none" stroke="{}" stroke-width="2" stroke-opacity="0.7"/>"#,
            trail.join(" "),
            COLORS[i]
        );
    }
    for &i in instances {
        let (x, y) = panel.px(frames[k].robots[i]);
        let _ = writeln!(
            svg,
            r##"<circle class="robot" data-instance="{}" data-x="{:?}" data-y="{:?}" cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="{}" stroke="#000"/>"##,
            i + 1,
            frames[k].robots[i].x,
            frames[k].robots[i].y,
            sc.robot.radius * SCALE,
            COLORS[i]
        );
    }
}

fn frame_svg(file: &TrajectoryFile, frames: &[Frame], k: usize, layout: Layout) -> String {
    let sc = &file.header.scenario;
    let panel_w = sc.arena.width * SCALE + 2.0 * MARGIN;
    let panels = match layout {
        Layout::Overlay => 1.0,
        Layout::SideBySide => 2.0,
    };
    let width = panel_w * panels;
    let height = sc.arena.height * SCALE + 2.0 * MARGIN + 40.0;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"#
    );
    match layout {
        Layout::Overlay => draw_panel(
            &mut svg,
            file,
            frames,
            k,
            &Panel { x0: 0.0, height: sc.arena.height },
            &[0, 1],
        ),
        Layout::SideBySide => {
            for i in 0..2 {
                draw_panel(
                    &mut svg,
                    file,
                    frames,
                    k,
                    &Panel { x0: panel_w * i as f64, height: sc.arena.height },
                    &[i],
                );
            }
        }
    }
    let last = frames.len() - 1;
    let status = if k == last {
        format!(
            " — {} / {}",
            file.footer.terminal[0], file.footer.terminal[1]
        )
    } else {
        String::new()
    };
    let text_y = sc.arena.height * SCALE + 2.0 * MARGIN + 20.0;
    let _ = writeln!(
        svg,
        r##"<text x="{MARGIN}" y="{text_y:.1}" font-family="sans-serif" font-size="14"><tspan fill="{}">{}</tspan> vs <tspan fill="{}">{}</tspan> · {} · step {k}/{last}{status}</text>"##,
        COLORS[0],
        escape(&file.header.pair[0]),
        COLORS[1],
        escape(&file.header.pair[1]),
        escape(&file.header.scenario_id),
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn index_html(file: &TrajectoryFile, names: &[String]) -> String {
    let list = names
        .iter()
        .map(|n| format!("\"{n}\""))
        .collect::<Vec<_>>()
        .join(",");
    format!(
        r#"<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>{a} vs {b} — {s}</title></head>
<body style="font-family:sans-serif">
<h3>{a} vs {b} — {s} (total reward {total:?})</h3>
<img id="frame" src="{first}">
<div><button id="play">play</button>
<input id="slider" type="range" min="0" max="{max}" value="0" style="width:480px"> <span id="label"></span></div>
<script>
const frames = [{list}];
let k = 0, timer = null;
const img = document.getElementById("frame"), slider = document.getElementById("slider"),
      label = document.getElementById("label"), play = document.getElementById("play");
function show(i) {{ k = i; img.src = frames[k]; slider.value = k; label.textContent = k + "/" + (frames.length - 1); }}
slider.oninput = () => show(+slider.value);
play.onclick = () => {{
  if (timer) {{ clearInterval(timer); timer = null; play.textContent = "play"; return; }}
  play.textContent = "pause";
  timer = setInterval(() => show((k + 1) % frames.length), 250);
}};
show(0);
</script>
</body></html>
"#,
        a = escape(&file.header.pair[0]),
        b = escape(&file.header.pair[1]),
        s = escape(&file.header.scenario_id),
        total = file.footer.total_reward.0,
        first = names[0],
        max = names.len() - 1,
    )
}

/// Writes `frame_NNNN.svg` for every step plus the initial state, and
/// `index.html`, into `out_dir`. Only reads the trajectory file.
pub fn render(path: &Path, out_dir: &Path, layout: Layout) -> Result<Rendered> {
    let file = TrajectoryFile::read(path)?;
    render_file(&file, out_dir, layout)
}

pub fn render_file(file: &TrajectoryFile, out_dir: &Path, layout: Layout) -> Result<Rendered> {
    fs::create_dir_all(out_dir).map_err(CliError::io(out_dir))?;
    let frames = frames_of(file);
    let width = frames.len().to_string().len().max(4);
    let mut names = Vec::with_capacity(frames.len());
    let mut paths = Vec::with_capacity(frames.len());
    for k in 0..frames.len() {
        let name = format!("frame_{k:0width$}.svg");
        let p = out_dir.join(&name);
        fs::write(&p, frame_svg(file, &frames, k, layout)).map_err(CliError::io(&p))?;
        names.push(name);
        paths.push(p);
    }
    let index = out_dir.join("index.html");
    fs::write(&index, index_html(file, &names)).map_err(CliError::io(&index))?;
    Ok(Rendered {
        frames: paths,
        index,
    })
}
