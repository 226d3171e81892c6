//! Mean curve over the aligned, unit-scaled inputs as a plain SVG.

use std::fmt::Write;

use num_complex::Complex64;

const SIZE: f64 = 600.0;
const MARGIN: f64 = 0.08;

/// `mean` is drawn on top; all curves start at the origin.
pub fn render(mean: &[Complex64], curves: &[(String, Vec<Complex64>)]) -> String {
    let all = mean.iter().chain(curves.iter().flat_map(|(_, c)| c.iter()));
    let (mut lo, mut hi) = (Complex64::new(f64::INFINITY, f64::INFINITY), Complex64::new(f64::NEG_INFINITY, f64::NEG_INFINITY));
    for p in all {
        lo = Complex64::new(lo.re.min(p.re), lo.im.min(p.im));
        hi = Complex64::new(hi.re.max(p.re), hi.im.max(p.im));
    }
    if !lo.re.is_finite() {
        lo = Complex64::new(0.0, 0.0);
        hi = Complex64::new(1.0, 1.0);
    }
    let span = (hi.re - lo.re).max(hi.im - lo.im).max(1e-9);
    let pad = MARGIN * span;
    let extent = span + 2.0 * pad;
    let scale = SIZE / extent;
    let x0 = lo.re - pad - 0.5 * (span - (hi.re - lo.re));
    let y1 = hi.im + pad + 0.5 * (span - (hi.im - lo.im));
    let map = |p: &Complex64| ((p.re - x0) * scale, (y1 - p.im) * scale);
    let points = |c: &[Complex64]| {
        c.iter()
            .map(|p| {
                let (x, y) = map(p);
                format!("{x:.2},{y:.2}")
            })
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (id, c) in curves {
        let _ = writeln!(
            out,
            r##"<polyline fill="none" stroke="#9aa5b1" stroke-width="1" points="{}"><title>{}</title></polyline>"##,
            points(c),
            escape(id)
        );
    }
    let _ = writeln!(
        out,
        r##"<polyline fill="none" stroke="#c0392b" stroke-width="2.5" points="{}"><title>mean</title></polyline>"##,
        points(mean)
    );
    if let Some(start) = mean.first() {
        let (x, y) = map(start);
        let _ = writeln!(out, r##"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="#c0392b"/>"##);
    }
    let _ = writeln!(
        out,
        r##"<text x="10" y="20" font-family="sans-serif" font-size="14" fill="#333">mean of {} curves</text>"##,
        curves.len()
    );
    out.push_str("</svg>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_all_curves() {
        let mean = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let curves = vec![("a<b".to_string(), vec![Complex64::new(0.0, 0.0), Complex64::new(0.9, 0.1)])];
        let svg = render(&mean, &curves);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("a&lt;b"));
        assert!(svg.starts_with("<svg"));
    }
}
