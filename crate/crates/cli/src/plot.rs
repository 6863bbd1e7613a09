//! Planar trajectory plots over the cell partition.

use std::fmt::Write;

use pwaq_core::linalg::Vector;
use pwaq_core::model::PwaSystem;
use pwaq_core::optim::LpOptions;

use crate::CliError;

const SIZE: f64 = 480.0;
const PAD: f64 = 24.0;
const FILLS: [&str; 6] = ["#e8eef7", "#f7ece8", "#eaf5e8", "#f5f2e1", "#efe8f5", "#e4f2f2"];

/// Vertices in counter-clockwise order around their centroid.
fn ordered(mut pts: Vec<Vector>) -> Vec<Vector> {
    let n = pts.len() as f64;
    let cx = pts.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = pts.iter().map(|p| p[1]).sum::<f64>() / n;
    pts.sort_by(|a, b| {
        let ta = (a[1] - cy).atan2(a[0] - cx);
        let tb = (b[1] - cy).atan2(b[0] - cx);
        ta.total_cmp(&tb)
    });
    pts
}

/// SVG document with every cell drawn as a polygon and the states joined
/// as a polyline. Only planar systems with a bounded state space.
pub fn trajectory_svg(sys: &PwaSystem, states: &[Vector], lp: &LpOptions) -> Result<String, CliError> {
    if sys.state_dim() != 2 {
        return Err(CliError::validation("SVG output needs a planar system"));
    }
    let (lo, hi) = sys
        .total_space()
        .bounding_box(lp)
        .map_err(|_| CliError::validation("SVG output needs a bounded state space"))?;
    let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
    let scale = (SIZE - 2.0 * PAD) / span;
    let px = |x: f64| PAD + (x - lo[0]) * scale;
    // flip y so the plot reads like the usual axes
    let py = |y: f64| SIZE - PAD - (y - lo[1]) * scale;
    let mut out = String::new();
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(out, r#"<rect width="{SIZE}" height="{SIZE}" fill="white"/>"#);
    for (i, c) in sys.cells().iter().enumerate() {
        let verts = c.region.intersect(sys.total_space()).and_then(|r| r.vertices(lp));
        let Ok(verts) = verts else { continue };
        if verts.len() < 3 {
            continue;
        }
        let pts = ordered(verts.iter().cloned().collect());
        let path: Vec<String> = pts.iter().map(|p| format!("{:.3},{:.3}", px(p[0]), py(p[1]))).collect();
        let _ = writeln!(
            out,
            r##"<polygon points="{}" fill="{}" stroke="#777" stroke-width="1"/>"##,
            path.join(" "),
            FILLS[i % FILLS.len()]
        );
        let cx = pts.iter().map(|p| p[0]).sum::<f64>() / pts.len() as f64;
        let cy = pts.iter().map(|p| p[1]).sum::<f64>() / pts.len() as f64;
        let _ = writeln!(
            out,
            r##"<text x="{:.3}" y="{:.3}" font-size="12" fill="#555" text-anchor="middle">{}</text>"##,
            px(cx),
            py(cy),
            i + 1
        );
    }
    if !states.is_empty() {
        let path: Vec<String> = states.iter().map(|p| format!("{:.3},{:.3}", px(p[0]), py(p[1]))).collect();
        let _ = writeln!(out, r##"<polyline points="{}" fill="none" stroke="#c0392b" stroke-width="1.5"/>"##, path.join(" "));
        let s = &states[0];
        let _ = writeln!(out, r##"<circle cx="{:.3}" cy="{:.3}" r="3" fill="#c0392b"/>"##, px(s[0]), py(s[1]));
    }
    out.push_str("</svg>\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use pwaq_core::linalg::Mat;
    use pwaq_core::model::Cell;
    use pwaq_core::polytope::HPolytope;

    #[test]
    fn square_partition_renders() {
        let sq = HPolytope::hypercube(2, 1.0);
        let cell = Cell { region: sq.clone(), a: Mat::identity(2, 2) * 0.5, b: Mat::zeros(2, 1), f: Vector::zeros(2), d: Mat::zeros(2, 0) };
        let sys = PwaSystem::new(2, 1, 0, sq, vec![cell]).unwrap();
        let states = vec![Vector::from_vec(vec![1.0, 1.0]), Vector::from_vec(vec![0.5, 0.5])];
        let svg = trajectory_svg(&sys, &states, &LpOptions::default()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polygon").count(), 1);
        // (1, 1) maps to the top-right corner of the plot area
        assert!(svg.contains("456.000,24.000"));
    }
}
