//! Self-contained SVG rendering and plot-data CSVs.

use std::fmt::Write;

use crate::diagnostics::Residual;
use crate::effects::EffectPath;
use crate::forecast::ForecastPath;

const CELL: f64 = 40.0;
const MARGIN: f64 = 50.0;

fn blend(from: (u8, u8, u8), to: (u8, u8, u8), t: f64) -> String {
    let mix = |a: u8, b: u8| (a as f64 + (b as f64 - a as f64) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(from.0, to.0),
        mix(from.1, to.1),
        mix(from.2, to.2)
    )
}

/// Diverging colour for `value` on the symmetric scale `[-bound, bound]`.
fn diverging(value: f64, bound: f64) -> String {
    const WHITE: (u8, u8, u8) = (247, 247, 247);
    const BLUE: (u8, u8, u8) = (33, 102, 172);
    const RED: (u8, u8, u8) = (178, 24, 43);
    let t = if bound > 0.0 {
        (value / bound).clamp(-1.0, 1.0)
    } else {
        0.0
    };
    if t < 0.0 {
        blend(WHITE, BLUE, -t)
    } else {
        blend(WHITE, RED, t)
    }
}

/// Heatmap with cohorts as rows and development periods as columns.
pub fn residual_heatmap(residuals: &[Residual]) -> String {
    let max_k = residuals.iter().map(|r| r.k).max().unwrap_or(0);
    let max_j = residuals.iter().map(|r| r.j).max().unwrap_or(0);
    let bound = residuals
        .iter()
        .map(|r| r.residual.abs())
        .fold(0.0, f64::max);
    let width = MARGIN * 2.0 + CELL * (max_j + 1) as f64 + 80.0;
    let height = MARGIN * 2.0 + CELL * (max_k + 1) as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" font-family="sans-serif" font-size="11">"##
    );
    let _ = writeln!(
        s,
        r##"<text x="{MARGIN}" y="20">scaled deviance residuals (rows: cohort, columns: development)</text>"##
    );
    for j in 0..=max_j {
        let x = MARGIN + CELL * j as f64 + CELL / 2.0;
        let _ = writeln!(
            s,
            r##"<text x="{x:.1}" y="{:.1}" text-anchor="middle">{j}</text>"##,
            MARGIN - 5.0
        );
    }
    for k in 0..=max_k {
        let y = MARGIN + CELL * k as f64 + CELL / 2.0 + 4.0;
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{y:.1}" text-anchor="end">{k}</text>"##,
            MARGIN - 5.0
        );
    }
    for r in residuals {
        let x = MARGIN + CELL * r.j as f64;
        let y = MARGIN + CELL * r.k as f64;
        let _ = writeln!(
            s,
            r##"<rect class="cell" x="{x:.1}" y="{y:.1}" width="{CELL}" height="{CELL}" fill="{}" stroke="#ffffff"><title>({}, {}): {:.2}</title></rect>"##,
            diverging(r.residual, bound),
            r.k,
            r.j,
            r.residual
        );
    }
    let lx = MARGIN + CELL * (max_j + 1) as f64 + 20.0;
    let steps = 10;
    for i in 0..=steps {
        let v = bound - 2.0 * bound * i as f64 / steps as f64;
        let y = MARGIN + i as f64 * 12.0;
        let _ = writeln!(
            s,
            r##"<rect class="legend" x="{lx:.1}" y="{y:.1}" width="14" height="12" fill="{}"/>"##,
            diverging(v, bound)
        );
    }
    for (i, v) in [(0, bound), (5, 0.0), (10, -bound)] {
        let y = MARGIN + i as f64 * 12.0 + 10.0;
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{y:.1}">{v:.2}</text>"##,
            lx + 18.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// CSV rows `index,value,lo80,hi80,lo95,hi95`; bounds are empty on observed points.
pub fn effect_csv(observed: &EffectPath, forecast: Option<&ForecastPath>) -> String {
    let mut s = String::from("index,value,lo80,hi80,lo95,hi95\n");
    for (i, v) in observed.index.iter().zip(&observed.value) {
        let _ = writeln!(s, "{i},{v:.6},,,,");
    }
    if let Some(f) = forecast {
        for (n, i) in f.index.iter().enumerate() {
            let (v, w80, w95) = (f.mean[n], f.half_width_80[n], f.half_width_95[n]);
            let _ = writeln!(
                s,
                "{i},{v:.6},{:.6},{:.6},{:.6},{:.6}",
                v - w80,
                v + w80,
                v - w95,
                v + w95
            );
        }
    }
    s
}

/// Line plot of an effect path; extrapolated points are drawn dashed after
/// a vertical split marker, with 80% and 95% bands.
pub fn effect_plot(title: &str, observed: &EffectPath, forecast: Option<&ForecastPath>) -> String {
    let points: Vec<(f64, f64)> = observed
        .index
        .iter()
        .zip(&observed.value)
        .filter(|(_, v)| v.is_finite())
        .map(|(&i, &v)| (i as f64, v))
        .collect();
    let mut lo = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let mut hi = points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    if let Some(f) = forecast {
        for n in 0..f.index.len() {
            lo = lo.min(f.mean[n] - f.half_width_95[n]);
            hi = hi.max(f.mean[n] + f.half_width_95[n]);
        }
    }
    let x_min = points.first().map(|p| p.0).unwrap_or(0.0);
    let x_max = forecast
        .and_then(|f| f.index.last().map(|&i| i as f64))
        .or(points.last().map(|p| p.0))
        .unwrap_or(1.0);
    if !lo.is_finite() || !hi.is_finite() {
        lo = -1.0;
        hi = 1.0;
    }
    if hi - lo < 1e-12 {
        lo -= 0.5;
        hi += 0.5;
    }
    let (w, h) = (480.0, 300.0);
    let span_x = (x_max - x_min).max(1.0);
    let sx = |x: f64| MARGIN + (x - x_min) / span_x * (w - 2.0 * MARGIN);
    let sy = |y: f64| h - MARGIN - (y - lo) / (hi - lo) * (h - 2.0 * MARGIN);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="11">"##
    );
    let _ = writeln!(s, r##"<text x="{MARGIN}" y="20">{title}</text>"##);
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#000000"/>"##,
        h - MARGIN,
        w - MARGIN,
        h - MARGIN
    );
    let _ = writeln!(
        s,
        r##"<text x="{:.1}" y="{:.1}">{:.6}</text><text x="{:.1}" y="{:.1}">{:.6}</text>"##,
        4.0,
        sy(hi) + 4.0,
        hi,
        4.0,
        sy(lo) + 4.0,
        lo
    );
    let poly = |pts: &[(f64, f64)]| -> String {
        pts.iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect::<Vec<_>>()
            .join(" ")
    };
    if let Some(f) = forecast {
        let split = points.last().map(|p| p.0).unwrap_or(x_min);
        let _ = writeln!(
            s,
            r##"<line class="split" x1="{:.2}" y1="{MARGIN}" x2="{:.2}" y2="{:.1}" stroke="#999999" stroke-dasharray="2,2"/>"##,
            sx(split),
            sx(split),
            h - MARGIN
        );
        for (widths, colour) in [(&f.half_width_95, "#c6dbef"), (&f.half_width_80, "#9ecae1")] {
            let upper: Vec<(f64, f64)> = f
                .index
                .iter()
                .enumerate()
                .map(|(n, &i)| (i as f64, f.mean[n] + widths[n]))
                .collect();
            let mut band = upper.clone();
            band.extend(
                f.index
                    .iter()
                    .enumerate()
                    .rev()
                    .map(|(n, &i)| (i as f64, f.mean[n] - widths[n])),
            );
            let _ = writeln!(
                s,
                r##"<polygon points="{}" fill="{colour}"/>"##,
                poly(&band)
            );
        }
        let mut tail: Vec<(f64, f64)> = points.last().copied().into_iter().collect();
        tail.extend(f.index.iter().zip(&f.mean).map(|(&i, &v)| (i as f64, v)));
        let _ = writeln!(
            s,
            r##"<polyline class="extrapolated" points="{}" fill="none" stroke="#cb181d" stroke-dasharray="5,3"/>"##,
            poly(&tail)
        );
    }
    let _ = writeln!(
        s,
        r##"<polyline class="observed" points="{}" fill="none" stroke="#08306b"/>"##,
        poly(&points)
    );
    for &(x, y) in &points {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="#08306b"/>"##,
            sx(x),
            sy(y)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heatmap_has_one_rect_per_cell() {
        let res: Vec<Residual> = (0..3)
            .map(|i| Residual {
                k: i,
                j: 1,
                residual: i as f64 - 1.0,
                deviance: 0.0,
            })
            .collect();
        let svg = residual_heatmap(&res);
        assert_eq!(svg.matches(r##"class="cell""##).count(), 3);
        assert!(svg.contains("1.00") && svg.contains("-1.00"));
        assert_eq!(svg, residual_heatmap(&res));
    }

    #[test]
    fn diverging_scale_endpoints() {
        assert_eq!(diverging(0.0, 1.0), "#f7f7f7");
        assert_eq!(diverging(1.0, 1.0), "#b2182b");
        assert_eq!(diverging(-2.0, 1.0), "#2166ac");
    }

    #[test]
    fn effect_csv_marks_extrapolation() {
        let obs = EffectPath::new(1, vec![0.0, 1.0]);
        let f = ForecastPath {
            index: vec![3],
            mean: vec![2.0],
            half_width_80: vec![0.5],
            half_width_95: vec![1.0],
        };
        assert_eq!(
            effect_csv(&obs, Some(&f)),
            "index,value,lo80,hi80,lo95,hi95\n1,0.000000,,,,\n2,1.000000,,,,\n3,2.000000,1.500000,2.500000,1.000000,3.000000\n"
        );
        let svg = effect_plot("c", &obs, Some(&f));
        assert!(svg.contains(r##"class="split""##) && svg.contains(r##"class="extrapolated""##));
    }
}
