use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

/// ω(s) against a sampled lower bound on the modulus of a map, on an s-grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub rows: Vec<(f64, f64, f64)>,
}

impl Curve {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,omega,mod_lower\n");
        for (s, w, m) in &self.rows {
            let _ = writeln!(out, "{s},{w},{m}");
        }
        out
    }

    /// Line for ω and markers for the estimate, on shared linear axes.
    pub fn to_svg(&self) -> String {
        let (w, h, pad) = (640.0, 400.0, 48.0);
        let s_max = self.rows.iter().map(|r| r.0).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
        let y_max = self.rows.iter().map(|r| r.1.max(r.2)).filter(|v| v.is_finite()).fold(0.0, f64::max);
        let y_max = if y_max > 0.0 { y_max } else { 1.0 };
        let px = |s: f64| pad + (w - 2.0 * pad) * s / s_max;
        let py = |v: f64| h - pad - (h - 2.0 * pad) * v / y_max;
        let mut out = String::new();
        let _ =
            writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
        let _ = writeln!(out, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<path d="M{pad},{} H{} M{pad},{} V{pad}" stroke="black" fill="none"/>"#,
            h - pad,
            w - pad,
            h - pad
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" font-size="12" text-anchor="end">s = {s_max}</text>"#,
            w - pad,
            h - pad + 18.0
        );
        let _ = writeln!(out, r#"<text x="{}" y="{}" font-size="12">{y_max}</text>"#, 4.0, pad - 6.0);
        let _ = writeln!(out, r#"<text x="{pad}" y="20" font-size="14">{}</text>"#, escape(&self.label));
        let line: Vec<String> = self.rows.iter().map(|r| format!("{:.3},{:.3}", px(r.0), py(r.1))).collect();
        let _ =
            writeln!(out, r#"<polyline points="{}" stroke="steelblue" stroke-width="2" fill="none"/>"#, line.join(" "));
        for (s, _, m) in &self.rows {
            let _ = writeln!(out, r#"<circle cx="{:.3}" cy="{:.3}" r="3" fill="firebrick"/>"#, px(*s), py(*m));
        }
        let _ = writeln!(out, r#"<text x="{}" y="40" font-size="12" fill="steelblue">ω(s)</text>"#, w - pad - 120.0);
        let _ = writeln!(
            out,
            r#"<text x="{}" y="56" font-size="12" fill="firebrick">sampled lower bound</text>"#,
            w - pad - 120.0
        );
        out.push_str("</svg>\n");
        out
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_plotted_point_is_in_the_csv() {
        let c = Curve { label: "x <2".into(), rows: vec![(0.5, 0.5, 0.25), (1.0, 1.0, 0.75), (2.0, 2.0, 1.5)] };
        let csv = c.to_csv();
        assert_eq!(csv.lines().count(), 4);
        let svg = c.to_svg();
        assert_eq!(svg.matches("<circle").count(), c.rows.len());
        assert!(svg.contains("x &lt;2"));
        for (s, w, m) in &c.rows {
            assert!(csv.contains(&format!("{s},{w},{m}")));
        }
    }
}
