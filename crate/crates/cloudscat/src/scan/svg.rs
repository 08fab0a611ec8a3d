//! Native SVG plot emission: line plots, heatmaps, and polar cuts.
//! Output is deterministic (fixed canvas, fixed decimal formatting, no
//! timestamps), so plots can be golden-file tested and checksummed.

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 76.0;
const MARGIN_R: f64 = 170.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 62.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Viridis-like stops, dark to bright.
const COLOR_STOPS: [(f64, [u8; 3]); 5] = [
    (0.00, [0x44, 0x01, 0x54]),
    (0.25, [0x3b, 0x52, 0x8b]),
    (0.50, [0x21, 0x91, 0x8c]),
    (0.75, [0x5e, 0xc9, 0x62]),
    (1.00, [0xfd, 0xe7, 0x25]),
];

#[derive(Debug, Clone, Copy)]
pub struct Series<'a> {
    pub label: &'a str,
    pub y: &'a [f64],
}

fn px(v: f64) -> String {
    format!("{v:.2}")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Tick positions at "nice" steps (1, 2, 5 times a power of ten).
fn nice_ticks(min: f64, max: f64) -> Vec<f64> {
    let span = max - min;
    if !(span.is_finite() && span > 0.0) {
        return vec![min];
    }
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let step = if norm < 1.5 {
        1.0
    } else if norm < 3.5 {
        2.0
    } else if norm < 7.5 {
        5.0
    } else {
        10.0
    } * mag;
    let mut ticks = Vec::new();
    let mut t = (min / step).ceil() * step;
    while t <= max + step * 1e-9 {
        ticks.push(if t == 0.0 { 0.0 } else { t });
        t += step;
    }
    ticks
}

fn tick_label(t: f64) -> String {
    // Shortest round-trip formatting keeps nice steps compact (0.5, 2, 10).
    format!("{t}")
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return (0.0, 1.0);
    }
    if lo == hi {
        let pad = if lo == 0.0 { 0.5 } else { lo.abs() * 0.05 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn header(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n\
         <rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n\
         <text x=\"{tx}\" y=\"26\" text-anchor=\"middle\" font-size=\"16\">{t}</text>\n",
        w = px(WIDTH),
        h = px(HEIGHT),
        tx = px((MARGIN_L + WIDTH - MARGIN_R) / 2.0),
        t = escape(title),
    )
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn sx(&self, v: f64) -> f64 {
        MARGIN_L + (v - self.x_min) / (self.x_max - self.x_min) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn sy(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_B
            - (v - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - MARGIN_T - MARGIN_B)
    }

    fn axes(&self, x_label: &str, y_label: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>\n",
            px(MARGIN_L),
            px(MARGIN_T),
            px(WIDTH - MARGIN_L - MARGIN_R),
            px(HEIGHT - MARGIN_T - MARGIN_B)
        ));
        for t in nice_ticks(self.x_min, self.x_max) {
            let x = self.sx(t);
            out.push_str(&format!(
                "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n\
                 <text x=\"{x0}\" y=\"{yl}\" text-anchor=\"middle\">{l}</text>\n",
                x0 = px(x),
                y0 = px(HEIGHT - MARGIN_B),
                y1 = px(HEIGHT - MARGIN_B + 6.0),
                yl = px(HEIGHT - MARGIN_B + 22.0),
                l = tick_label(t)
            ));
        }
        for t in nice_ticks(self.y_min, self.y_max) {
            let y = self.sy(t);
            out.push_str(&format!(
                "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
                 <text x=\"{xl}\" y=\"{yt}\" text-anchor=\"end\">{l}</text>\n",
                x0 = px(MARGIN_L - 6.0),
                x1 = px(MARGIN_L),
                y0 = px(y),
                xl = px(MARGIN_L - 10.0),
                yt = px(y + 4.0),
                l = tick_label(t)
            ));
        }
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\">{l}</text>\n",
            x = px((MARGIN_L + WIDTH - MARGIN_R) / 2.0),
            y = px(HEIGHT - 14.0),
            l = escape(x_label)
        ));
        out.push_str(&format!(
            "<text x=\"18\" y=\"{y}\" text-anchor=\"middle\" transform=\"rotate(-90 18 {y})\">{l}</text>\n",
            y = px((MARGIN_T + HEIGHT - MARGIN_B) / 2.0),
            l = escape(y_label)
        ));
        out
    }
}

fn legend(labels: &[&str]) -> String {
    let mut out = String::new();
    for (i, label) in labels.iter().enumerate() {
        let y = MARGIN_T + 14.0 + 20.0 * i as f64;
        out.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"{c}\" stroke-width=\"2\"/>\n\
             <text x=\"{xt}\" y=\"{yt}\">{l}</text>\n",
            x0 = px(WIDTH - MARGIN_R + 12.0),
            x1 = px(WIDTH - MARGIN_R + 38.0),
            y = px(y),
            xt = px(WIDTH - MARGIN_R + 44.0),
            yt = px(y + 4.0),
            c = PALETTE[i % PALETTE.len()],
            l = escape(label)
        ));
    }
    out
}

/// Multi-series line plot over a shared abscissa.
pub fn line_plot(title: &str, x_label: &str, y_label: &str, x: &[f64], series: &[Series]) -> String {
    assert!(!x.is_empty() && !series.is_empty());
    for s in series {
        assert_eq!(s.y.len(), x.len(), "series '{}' length mismatch", s.label);
    }
    let (x_min, x_max) = range_of(x.iter().copied());
    let (y_min, y_max) = range_of(series.iter().flat_map(|s| s.y.iter().copied()));
    let frame = Frame { x_min, x_max, y_min, y_max };
    let mut out = header(title);
    out.push_str(&frame.axes(x_label, y_label));
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = x
            .iter()
            .zip(s.y)
            .map(|(xi, yi)| format!("{},{}", px(frame.sx(*xi)), px(frame.sy(*yi))))
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\" points=\"{p}\"/>\n",
            c = PALETTE[i % PALETTE.len()],
            p = pts.join(" ")
        ));
    }
    let labels: Vec<&str> = series.iter().map(|s| s.label).collect();
    out.push_str(&legend(&labels));
    out.push_str("</svg>\n");
    out
}

fn colormap(t: f64) -> String {
    let t = t.clamp(0.0, 1.0);
    let mut lo = COLOR_STOPS[0];
    let mut hi = COLOR_STOPS[COLOR_STOPS.len() - 1];
    for w in COLOR_STOPS.windows(2) {
        if t >= w[0].0 && t <= w[1].0 {
            lo = w[0];
            hi = w[1];
            break;
        }
    }
    let f = if hi.0 > lo.0 { (t - lo.0) / (hi.0 - lo.0) } else { 0.0 };
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(lo.1[0], hi.1[0]),
        mix(lo.1[1], hi.1[1]),
        mix(lo.1[2], hi.1[2])
    )
}

/// Heatmap of `values[iy * x.len() + ix]` with `y[0]` at the bottom.
/// Returns the SVG and the (min, max) of the color scale.
pub fn heatmap(
    title: &str,
    x_label: &str,
    y_label: &str,
    x: &[f64],
    y: &[f64],
    values: &[f64],
) -> (String, f64, f64) {
    assert_eq!(values.len(), x.len() * y.len());
    let (v_min, v_max) = range_of(values.iter().copied());
    let span = if v_max > v_min { v_max - v_min } else { 1.0 };
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let cw = plot_w / x.len() as f64;
    let ch = plot_h / y.len() as f64;
    let mut out = header(title);
    for (iy, _) in y.iter().enumerate() {
        for (ix, _) in x.iter().enumerate() {
            let v = values[iy * x.len() + ix];
            let color = colormap((v - v_min) / span);
            out.push_str(&format!(
                "<rect class=\"cell\" x=\"{x0}\" y=\"{y0}\" width=\"{w}\" height=\"{h}\" fill=\"{c}\"/>\n",
                x0 = px(MARGIN_L + cw * ix as f64),
                y0 = px(HEIGHT - MARGIN_B - ch * (iy + 1) as f64),
                w = px(cw + 0.5),
                h = px(ch + 0.5),
                c = color
            ));
        }
    }
    let (x_min, x_max) = range_of(x.iter().copied());
    let (y_min, y_max) = range_of(y.iter().copied());
    let frame = Frame { x_min, x_max, y_min, y_max };
    out.push_str(&frame.axes(x_label, y_label));
    // Colorbar with min/max annotations.
    let bar_x = WIDTH - MARGIN_R + 24.0;
    let bar_h = plot_h * 0.6;
    let n_sw = 16;
    for i in 0..n_sw {
        let t = (i as f64 + 0.5) / n_sw as f64;
        out.push_str(&format!(
            "<rect x=\"{x}\" y=\"{y}\" width=\"18\" height=\"{h}\" fill=\"{c}\"/>\n",
            x = px(bar_x),
            y = px(MARGIN_T + bar_h * (1.0 - (i + 1) as f64 / n_sw as f64)),
            h = px(bar_h / n_sw as f64 + 0.5),
            c = colormap(t)
        ));
    }
    out.push_str(&format!(
        "<text x=\"{x}\" y=\"{y0}\">{hi:.3}</text>\n<text x=\"{x}\" y=\"{y1}\">{lo:.3}</text>\n",
        x = px(bar_x + 24.0),
        y0 = px(MARGIN_T + 10.0),
        y1 = px(MARGIN_T + bar_h),
        hi = v_max,
        lo = v_min
    ));
    out.push_str("</svg>\n");
    (out, v_min, v_max)
}

/// Polar plot of periodic angular cuts; angle zero points up, angles
/// increase clockwise. Radii must be nonnegative.
pub fn polar_plot(title: &str, angles: &[f64], series: &[Series]) -> String {
    assert!(!angles.is_empty() && !series.is_empty());
    for s in series {
        assert_eq!(s.y.len(), angles.len(), "series '{}' length mismatch", s.label);
    }
    let r_max = series
        .iter()
        .flat_map(|s| s.y.iter().copied())
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max)
        .max(1e-300);
    let cx = (MARGIN_L + WIDTH - MARGIN_R) / 2.0;
    let cy = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0 + 8.0;
    let r_px = ((WIDTH - MARGIN_L - MARGIN_R).min(HEIGHT - MARGIN_T - MARGIN_B)) / 2.0 - 10.0;
    let mut out = header(title);
    for frac in [0.25, 0.5, 0.75, 1.0] {
        out.push_str(&format!(
            "<circle cx=\"{x}\" cy=\"{y}\" r=\"{r}\" fill=\"none\" stroke=\"#cccccc\"/>\n",
            x = px(cx),
            y = px(cy),
            r = px(r_px * frac)
        ));
        out.push_str(&format!(
            "<text x=\"{x}\" y=\"{y}\" font-size=\"10\" fill=\"#666666\">{v:.3e}</text>\n",
            x = px(cx + 4.0),
            y = px(cy - r_px * frac - 2.0),
            v = r_max * frac
        ));
    }
    for i in 0..8 {
        let a = std::f64::consts::FRAC_PI_4 * i as f64;
        out.push_str(&format!(
            "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y1}\" stroke=\"#eeeeee\"/>\n",
            x0 = px(cx),
            y0 = px(cy),
            x1 = px(cx + r_px * a.sin()),
            y1 = px(cy - r_px * a.cos())
        ));
    }
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = angles
            .iter()
            .zip(s.y)
            .map(|(a, r)| {
                let rr = r_px * (r / r_max).clamp(0.0, 1.0);
                format!("{},{}", px(cx + rr * a.sin()), px(cy - rr * a.cos()))
            })
            .collect();
        out.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"1.5\" points=\"{p}\"/>\n",
            c = PALETTE[i % PALETTE.len()],
            p = pts.join(" ")
        ));
    }
    let labels: Vec<&str> = series.iter().map(|s| s.label).collect();
    out.push_str(&legend(&labels));
    out.push_str("</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ticks_land_on_nice_steps() {
        assert_eq!(nice_ticks(-10.0, 10.0), vec![-10.0, -5.0, 0.0, 5.0, 10.0]);
        assert_eq!(nice_ticks(0.0, 1.0), vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]);
        assert_eq!(nice_ticks(0.0, 6.283), vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
    }

    #[test]
    fn line_plot_is_deterministic_and_complete() {
        let x = [0.0, 1.0, 2.0, 3.0];
        let s = [
            Series { label: "total", y: &[1.0, 3.0, 2.0, 0.5] },
            Series { label: "coherent <1>", y: &[0.5, 1.0, 0.8, 0.2] },
        ];
        let a = line_plot("spectrum", "detuning", "cross section", &x, &s);
        let b = line_plot("spectrum", "detuning", "cross section", &x, &s);
        assert_eq!(a, b);
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(a.contains("coherent &lt;1&gt;"));
        assert!(a.starts_with("<svg"));
        assert!(a.ends_with("</svg>\n"));
    }

    #[test]
    fn flat_series_does_not_divide_by_zero() {
        let x = [0.0, 1.0];
        let s = [Series { label: "flat", y: &[2.0, 2.0] }];
        let svg = line_plot("flat", "x", "y", &x, &s);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn heatmap_reports_the_color_range_and_covers_all_cells() {
        let x = [0.0, 1.0, 2.0];
        let y = [0.0, 1.0];
        let v = [0.0, 0.5, 1.0, 1.5, 2.0, 2.5];
        let (svg, lo, hi) = heatmap("map", "x", "y", &x, &y, &v);
        assert_eq!(lo, 0.0);
        assert_eq!(hi, 2.5);
        assert_eq!(svg.matches("class=\"cell\"").count(), 6);
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn colormap_endpoints_match_the_stops() {
        assert_eq!(colormap(0.0), "#440154");
        assert_eq!(colormap(1.0), "#fde725");
        assert_eq!(colormap(0.5), "#21918c");
    }

    #[test]
    fn polar_plot_handles_zero_radius() {
        let angles: Vec<f64> = (0..16).map(|i| i as f64 * std::f64::consts::PI / 8.0).collect();
        let zero = vec![0.0; 16];
        let svg = polar_plot("pattern", &angles, &[Series { label: "dark", y: &zero }]);
        assert!(!svg.contains("NaN"));
        assert_eq!(svg.matches("<circle").count(), 4);
    }
}
