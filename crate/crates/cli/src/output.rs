//! CSV and SVG writers. Numbers use Rust's shortest round-trip formatting,
//! so identical runs give byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crossdiff::diagnostics::DiagnosticRecord;
use crossdiff::mesh_fe::NodalField;

use crate::error::CliError;

pub const CSV_HEADER: &str = "# crossdiff v1";
pub const PROFILE_COLUMNS: &str = "x,u1,u2";
pub const DIAGNOSTIC_COLUMNS: &str =
    "n,t,mass1,mass2,entropy1,entropy2,grad1,grad2,overlap,min1,min2,fp_iters";

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::io(path, e))
}

/// One row per node, restricted to `[left, right]` when `window` is set.
pub fn profile_csv(u1: &NodalField, u2: &NodalField, window: Option<(f64, f64)>) -> String {
    let mut s = format!("{CSV_HEADER}\n{PROFILE_COLUMNS}\n");
    let mesh = u1.mesh();
    for (j, (a, b)) in u1.values().iter().zip(u2.values()).enumerate() {
        let x = mesh.node(j);
        if let Some((l, r)) = window {
            if x < l || x > r {
                continue;
            }
        }
        let _ = writeln!(s, "{x},{a},{b}");
    }
    s
}

/// Every `every`-th record, always including the last one.
pub fn diagnostics_csv(records: &[DiagnosticRecord], every: usize) -> String {
    let mut s = format!("{CSV_HEADER}\n{DIAGNOSTIC_COLUMNS}\n");
    let every = every.max(1);
    let last = records.len().saturating_sub(1);
    for (i, r) in records.iter().enumerate() {
        if i % every != 0 && i != last {
            continue;
        }
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.step,
            r.time,
            r.mass[0],
            r.mass[1],
            r.entropy[0],
            r.entropy[1],
            r.grad_sq[0],
            r.grad_sq[1],
            r.overlap,
            r.min[0],
            r.min[1],
            r.fp_iters
        );
    }
    s
}

/// Profile CSV of the particle densities, with an extra header line.
pub fn particle_csv(n: usize, seed: u64, density: &[NodalField; 2]) -> String {
    let body = profile_csv(&density[0], &density[1], None);
    let rest = body.strip_prefix(CSV_HEADER).unwrap_or(&body);
    format!("{CSV_HEADER}\n# particles n={n} seed={seed} species=2{rest}")
}

/// Polyline plot of both species with labelled axes.
pub fn profile_svg(title: &str, u1: &NodalField, u2: &NodalField) -> String {
    const W: f64 = 640.0;
    const H: f64 = 400.0;
    const PAD: f64 = 50.0;
    let mesh = u1.mesh();
    let (x0, x1) = (mesh.left(), mesh.right());
    let ymin = u1.min().min(u2.min()).min(0.0);
    let mut ymax = u1.max().max(u2.max());
    if !(ymax > ymin) {
        ymax = ymin + 1.0;
    }
    let sx = |x: f64| PAD + (x - x0) / (x1 - x0) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - ymin) / (ymax - ymin) * (H - 2.0 * PAD);
    let line = |f: &NodalField| {
        f.values()
            .iter()
            .enumerate()
            .map(|(j, &v)| format!("{:.2},{:.2}", sx(mesh.node(j)), sy(v)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        escape(title)
    );
    // axes
    let _ = writeln!(
        s,
        r#"<polyline points="{PAD},{PAD} {PAD},{b} {r},{b}" fill="none" stroke="black"/>"#,
        b = H - PAD,
        r = W - PAD
    );
    for (v, x) in [(x0, sx(x0)), (x1, sx(x1))] {
        let _ = writeln!(
            s,
            r#"<text x="{x}" y="{}" font-size="12" text-anchor="middle">{v}</text>"#,
            H - PAD + 16.0
        );
    }
    for v in [ymin, ymax] {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end">{v:.4}</text>"#,
            PAD - 6.0,
            sy(v) + 4.0
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">x</text>"#,
        W / 2.0,
        H - 12.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">u</text>"#,
        H / 2.0,
        H / 2.0
    );
    for (f, colour, label, dy) in [(u1, "#1f77b4", "u1", 0.0), (u2, "#d62728", "u2", 16.0)] {
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"#,
            line(f)
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="12" fill="{colour}">{label}</text>"#,
            W - PAD - 30.0,
            PAD + dy
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// File-name tag for a snapshot time, e.g. `t0.05`.
pub fn time_tag(t: f64) -> String {
    format!("t{t}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crossdiff::mesh_fe::{interpolate, Mesh1D};

    fn fields() -> (NodalField, NodalField) {
        let mesh = Mesh1D::new(0.0, 1.0, 10).unwrap();
        (
            interpolate(|x| x, &mesh).unwrap(),
            interpolate(|x| 1.0 - x, &mesh).unwrap(),
        )
    }

    #[test]
    fn profile_has_one_row_per_node() {
        let (u1, u2) = fields();
        let csv = profile_csv(&u1, &u2, None);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], CSV_HEADER);
        assert_eq!(lines[1], PROFILE_COLUMNS);
        assert_eq!(lines.len(), 2 + 11);
        assert_eq!(lines[2], "0,0,1");
        assert_eq!(lines[12], "1,1,0");
    }

    #[test]
    fn zoom_window_is_inclusive() {
        let (u1, u2) = fields();
        let csv = profile_csv(&u1, &u2, Some((0.3, 0.5)));
        // nodes 0.3, 0.4, 0.5 up to round-off in the node coordinate
        let rows = csv.lines().skip(2).count();
        assert!((2..=3).contains(&rows), "{csv}");
    }

    #[test]
    fn particle_header() {
        let (u1, u2) = fields();
        let csv = particle_csv(500, 7, &[u1, u2]);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(CSV_HEADER));
        assert_eq!(lines.next(), Some("# particles n=500 seed=7 species=2"));
        assert_eq!(lines.next(), Some(PROFILE_COLUMNS));
    }

    #[test]
    fn svg_has_two_polylines() {
        let (u1, u2) = fields();
        let svg = profile_svg("a<b", &u1, &u2);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<polyline").count(), 3);
        assert!(svg.contains("a&lt;b"));
    }
}
