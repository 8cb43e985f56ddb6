use std::fmt::Write as _;

use t4d_core::registered::extract_trajectories;
use t4d_core::load_lips;

use crate::evaluate::{load_sequence, pair_sequences};
use crate::{write_file, CliError, CliResult, PlotArgs};

const WIDTH: f64 = 900.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 160.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

/// y-coordinate series for each lip landmark, upper lip first.
pub struct LipCurves {
    pub landmarks: [usize; 6],
    pub gt: Vec<Vec<f64>>,
    pub pred: Vec<Vec<f64>>,
    pub fps: f64,
}

fn ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

pub fn render_svg(c: &LipCurves) -> String {
    let frames = c.gt.iter().chain(&c.pred).map(Vec::len).max().unwrap_or(0);
    let t_max = frames.saturating_sub(1) as f64 / c.fps;
    let (mut y_lo, mut y_hi) = c
        .gt
        .iter()
        .chain(&c.pred)
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &y| (a.min(y), b.max(y)));
    if !y_lo.is_finite() {
        (y_lo, y_hi) = (0.0, 1.0);
    }
    let pad = ((y_hi - y_lo) * 0.05).max(0.5);
    y_lo -= pad;
    y_hi += pad;
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let sx = |t: f64| {
        if t_max > 0.0 {
            LEFT + plot_w * t / t_max
        } else {
            LEFT + 0.5 * plot_w
        }
    };
    let sy = |y: f64| TOP + plot_h * (y_hi - y) / (y_hi - y_lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let (x0, x1, y0, y1) = (LEFT, LEFT + plot_w, TOP, TOP + plot_h);
    let _ = writeln!(s, r#"<g stroke="black" fill="none"><line x1="{x0}" y1="{y1}" x2="{x1}" y2="{y1}"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>"#);
    for t in ticks(0.0, t_max, if t_max > 0.0 { 5 } else { 0 }) {
        let x = sx(t);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{y1}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{t:.2}</text>"#,
            y1 + 5.0,
            y1 + 20.0
        );
    }
    for y in ticks(y_lo, y_hi, 5) {
        let py = sy(y);
        let _ = writeln!(
            s,
            r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{y:.2}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">time (s)</text>"#,
        LEFT + 0.5 * plot_w,
        HEIGHT - 8.0
    );
    let _ = writeln!(
        s,
        r#"<text transform="translate(16 {:.2}) rotate(-90)" text-anchor="middle">y (mm)</text>"#,
        TOP + 0.5 * plot_h
    );

    for (kind, series) in [("gt", &c.gt), ("pred", &c.pred)] {
        let dash = if kind == "pred" { r#" stroke-dasharray="6 4""# } else { "" };
        for (n, ys) in series.iter().enumerate() {
            let color = COLORS[n % COLORS.len()];
            let lm = c.landmarks[n];
            if ys.len() == 1 {
                let fill = if kind == "gt" { color } else { "white" };
                let _ = writeln!(
                    s,
                    r#"<circle class="{kind}" data-landmark="{lm}" cx="{:.3}" cy="{:.3}" r="4" stroke="{color}" fill="{fill}"/>"#,
                    sx(0.0),
                    sy(ys[0])
                );
                continue;
            }
            let pts: Vec<String> = ys
                .iter()
                .enumerate()
                .map(|(i, &y)| format!("{:.3},{:.3}", sx(i as f64 / c.fps), sy(y)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline class="{kind}" data-landmark="{lm}" fill="none" stroke="{color}" stroke-width="1.5"{dash} points="{}"/>"#,
                pts.join(" ")
            );
        }
    }

    let lx = WIDTH - RIGHT + 15.0;
    for (n, lm) in c.landmarks.iter().enumerate() {
        let y = TOP + 18.0 * n as f64;
        let lip = if n < 3 { "upper" } else { "lower" };
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{y}" x2="{:.1}" y2="{y}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{lip} {lm}</text>"#,
            lx + 20.0,
            COLORS[n],
            lx + 26.0,
            y + 4.0
        );
    }
    let y = TOP + 18.0 * 6.5;
    let _ = writeln!(
        s,
        r#"<line x1="{lx}" y1="{y}" x2="{:.1}" y2="{y}" stroke="black"/><text x="{:.1}" y="{:.1}">ground truth</text>"#,
        lx + 20.0,
        lx + 26.0,
        y + 4.0
    );
    let y = y + 18.0;
    let _ = writeln!(
        s,
        r#"<line x1="{lx}" y1="{y}" x2="{:.1}" y2="{y}" stroke="black" stroke-dasharray="6 4"/><text x="{:.1}" y="{:.1}">prediction</text>"#,
        lx + 20.0,
        lx + 26.0,
        y + 4.0
    );
    s.push_str("</svg>\n");
    s
}

pub fn run(args: &PlotArgs) -> CliResult<()> {
    let pairs = pair_sequences(&args.input)?;
    if pairs.len() != 1 {
        return Err(CliError::input(format!(
            "plot-lips takes one sequence, found {}",
            pairs.len()
        )));
    }
    let gt = load_sequence(&pairs[0].gt, &args.input).map_err(|e| e.context("ground truth"))?;
    let pred = load_sequence(&pairs[0].pred, &args.input).map_err(|e| e.context("prediction"))?;
    gt.check_registered_pair(&pred)?;
    let lips = load_lips(&args.lips, gt.frames()[0].vertex_count())
        .map_err(|e| CliError::from(e).context(&args.lips.display().to_string()))?;
    let ys = |seq| -> CliResult<Vec<Vec<f64>>> {
        Ok(extract_trajectories(seq, &lips)?
            .trajectories
            .iter()
            .map(|t| t.points().iter().map(|p| p.y).collect())
            .collect())
    };
    let curves = LipCurves {
        landmarks: lips.ordered(),
        gt: ys(&gt)?,
        pred: ys(&pred)?,
        fps: args.input.fps,
    };
    write_file(&args.out, &render_svg(&curves))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curves(t: usize, f: impl Fn(usize) -> f64) -> LipCurves {
        let series: Vec<Vec<f64>> = (0..6).map(|_| (0..t).map(&f).collect()).collect();
        LipCurves {
            landmarks: [0, 1, 2, 3, 4, 5],
            gt: series.clone(),
            pred: series,
            fps: 30.0,
        }
    }

    #[test]
    fn one_frame_draws_markers() {
        let svg = render_svg(&curves(1, |_| 2.0));
        assert_eq!(svg.matches("<circle").count(), 12);
        assert!(!svg.contains("<polyline"));
    }

    #[test]
    fn gt_solid_pred_dashed() {
        let svg = render_svg(&curves(10, |i| i as f64));
        let gt: Vec<&str> = svg.lines().filter(|l| l.contains(r#"class="gt""#)).collect();
        let pred: Vec<&str> = svg.lines().filter(|l| l.contains(r#"class="pred""#)).collect();
        assert_eq!((gt.len(), pred.len()), (6, 6));
        assert!(gt.iter().all(|l| !l.contains("dasharray")));
        assert!(pred.iter().all(|l| l.contains("dasharray")));
    }
}
