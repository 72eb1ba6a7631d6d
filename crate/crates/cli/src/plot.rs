//! Rollout CSV -> SVG rendering, with no plotting dependency: the chart is
//! assembled as plain SVG 1.1 text. Identical input bytes produce identical
//! output bytes.

use std::path::Path;

#[derive(Debug, Clone)]
pub struct RolloutPoint {
    pub t: f64,
    pub target: f64,
    pub prediction: f64,
    pub is_test: bool,
}

/// Parse a `t,target,prediction,split_tag` CSV body.
pub fn parse_rollout_csv(text: &str) -> Result<Vec<RolloutPoint>, String> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if lineno == 0 {
            if line != "t,target,prediction,split_tag" {
                return Err(format!("unexpected rollout header {line:?}"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(format!("line {}: expected 4 fields", lineno + 1));
        }
        let parse = |s: &str| -> Result<f64, String> {
            s.parse::<f64>()
                .map_err(|e| format!("line {}: {e}", lineno + 1))
        };
        rows.push(RolloutPoint {
            t: parse(fields[0])?,
            target: parse(fields[1])?,
            prediction: parse(fields[2])?,
            is_test: fields[3] == "test",
        });
    }
    if rows.is_empty() {
        return Err("rollout CSV has no data rows".into());
    }
    Ok(rows)
}

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 60.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Render one rollout chart: dashed target curve, solid prediction curve, and
/// a dashed vertical line at the first test index (the train/test boundary).
pub fn render_rollout_svg(points: &[RolloutPoint], title: &str) -> String {
    let t_min = points.iter().map(|p| p.t).fold(f64::INFINITY, f64::min);
    let t_max = points.iter().map(|p| p.t).fold(f64::NEG_INFINITY, f64::max);
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for p in points {
        y_min = y_min.min(p.target).min(p.prediction);
        y_max = y_max.max(p.target).max(p.prediction);
    }
    if y_max == y_min {
        y_max += 0.5;
        y_min -= 0.5;
    }
    let pad = 0.05 * (y_max - y_min);
    let (y_min, y_max) = (y_min - pad, y_max + pad);

    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let x_of = |t: f64| MARGIN_L + (t - t_min) / (t_max - t_min).max(1e-12) * plot_w;
    let y_of = |v: f64| MARGIN_T + (y_max - v) / (y_max - y_min) * plot_h;

    let polyline = |get: &dyn Fn(&RolloutPoint) -> f64| -> String {
        points
            .iter()
            .map(|p| format!("{},{}", fmt(x_of(p.t)), fmt(y_of(get(p)))))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"20\" font-family=\"monospace\" font-size=\"14\">{}</text>\n",
        fmt(MARGIN_L),
        title
    ));
    svg.push_str(&format!(
        "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#444444\"/>\n",
        fmt(MARGIN_L),
        fmt(MARGIN_T),
        fmt(plot_w),
        fmt(plot_h)
    ));
    // y-axis extremes.
    svg.push_str(&format!(
        "<text x=\"4\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{}</text>\n",
        fmt(y_of(y_max) + 4.0),
        fmt(y_max)
    ));
    svg.push_str(&format!(
        "<text x=\"4\" y=\"{}\" font-family=\"monospace\" font-size=\"11\">{}</text>\n",
        fmt(y_of(y_min) + 4.0),
        fmt(y_min)
    ));

    // Train/test boundary at the first test index.
    if let Some(first_test) = points.iter().find(|p| p.is_test) {
        let x = fmt(x_of(first_test.t));
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"red\" stroke-dasharray=\"6,4\"/>\n",
            fmt(MARGIN_T),
            fmt(MARGIN_T + plot_h)
        ));
    }

    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#ff7f0e\" stroke-dasharray=\"5,3\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        polyline(&|p| p.target)
    ));
    svg.push_str(&format!(
        "<polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"1.5\" points=\"{}\"/>\n",
        polyline(&|p| p.prediction)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" fill=\"#ff7f0e\">target</text>\n",
        fmt(WIDTH - 150.0),
        fmt(MARGIN_T + 14.0)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-family=\"monospace\" font-size=\"11\" fill=\"#1f77b4\">prediction</text>\n",
        fmt(WIDTH - 150.0),
        fmt(MARGIN_T + 28.0)
    ));
    svg.push_str("</svg>\n");
    svg
}

/// Render every `rollout_epoch*.csv` in `run_dir` to an SVG alongside it.
/// Returns the rendered file names.
pub fn plot_run_dir(run_dir: &Path) -> Result<Vec<String>, String> {
    let mut csvs: Vec<std::path::PathBuf> = std::fs::read_dir(run_dir)
        .map_err(|e| format!("cannot read {}: {e}", run_dir.display()))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .map(|n| n.starts_with("rollout_epoch") && n.ends_with(".csv"))
                .unwrap_or(false)
        })
        .collect();
    csvs.sort();
    if csvs.is_empty() {
        return Err(format!(
            "no rollout_epoch*.csv files in {}",
            run_dir.display()
        ));
    }
    let mut rendered = Vec::new();
    for csv_path in csvs {
        let text = std::fs::read_to_string(&csv_path)
            .map_err(|e| format!("{}: {e}", csv_path.display()))?;
        let points =
            parse_rollout_csv(&text).map_err(|e| format!("{}: {e}", csv_path.display()))?;
        let stem = csv_path.file_stem().unwrap().to_string_lossy().to_string();
        let svg = render_rollout_svg(&points, &stem);
        let out_path = csv_path.with_extension("svg");
        std::fs::write(&out_path, svg).map_err(|e| format!("{}: {e}", out_path.display()))?;
        rendered.push(out_path.file_name().unwrap().to_string_lossy().to_string());
    }
    Ok(rendered)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fixture() -> String {
        let mut csv = String::from("t,target,prediction,split_tag\n");
        for t in 4..90 {
            let target = (t as f64 * 0.1).sin() * 0.5 + 0.5;
            let pred = target + 0.01;
            let tag = if t < 60 { "train" } else { "test" };
            csv.push_str(&format!("{t},{target},{pred},{tag}\n"));
        }
        csv
    }

    #[test]
    fn svg_has_one_point_per_window() {
        let points = parse_rollout_csv(&fixture()).unwrap();
        assert_eq!(points.len(), 86);
        let svg = render_rollout_svg(&points, "fixture");
        for line in svg.lines().filter(|l| l.starts_with("<polyline")) {
            let pts = line.split("points=\"").nth(1).unwrap();
            let pts = pts.split('"').next().unwrap();
            assert_eq!(pts.split(' ').count(), 86);
        }
    }

    #[test]
    fn split_line_sits_at_first_test_index() {
        let points = parse_rollout_csv(&fixture()).unwrap();
        let svg = render_rollout_svg(&points, "fixture");
        // t range 4..=89, first test t = 60.
        let expected_x = 60.0 + (60.0 - 4.0) / (89.0 - 4.0) * (860.0 - 60.0 - 20.0);
        let needle = format!("<line x1=\"{:.2}\"", expected_x);
        assert!(svg.contains(&needle), "missing {needle}");
    }

    #[test]
    fn rendering_is_deterministic() {
        let points = parse_rollout_csv(&fixture()).unwrap();
        let a = render_rollout_svg(&points, "fixture");
        let b = render_rollout_svg(&points, "fixture");
        assert_eq!(a, b);
        assert!(a.is_ascii());
    }

    #[test]
    fn bad_csv_is_rejected() {
        assert!(parse_rollout_csv("nope\n1,2,3,train\n").is_err());
        assert!(parse_rollout_csv("t,target,prediction,split_tag\n1,2\n").is_err());
        assert!(parse_rollout_csv("t,target,prediction,split_tag\n").is_err());
    }
}
