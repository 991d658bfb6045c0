//! Minimal static SVG line plots rendered from tabular data. No styling
//! beyond what a quick offline look at a loss or error curve needs.

/// One named line of (x, y) samples.
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

fn nice_ticks(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if !(hi > lo) {
        return vec![lo];
    }
    let raw = (hi - lo) / n as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 2.5, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|s| *s >= raw)
        .unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-12 * step {
        out.push(t);
        t += step;
    }
    out
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-3 {
        format!("{v:.1e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

impl Plot {
    /// Renders the plot as a standalone SVG document.
    pub fn render(&self) -> String {
        let map_y = |y: f64| if self.log_y { y.max(1e-300).log10() } else { y };
        let mut xs: Vec<f64> = Vec::new();
        let mut ys: Vec<f64> = Vec::new();
        for s in &self.series {
            for &(x, y) in &s.points {
                if self.log_y && y <= 0.0 {
                    continue;
                }
                if x.is_finite() && y.is_finite() {
                    xs.push(x);
                    ys.push(map_y(y));
                }
            }
        }
        let (x_lo, x_hi) = bounds(&xs);
        let (y_lo, y_hi) = bounds(&ys);
        let px = |x: f64| {
            MARGIN_L + (x - x_lo) / (x_hi - x_lo).max(1e-300) * (WIDTH - MARGIN_L - MARGIN_R)
        };
        let py = |y: f64| {
            HEIGHT - MARGIN_B
                - (map_y(y) - y_lo) / (y_hi - y_lo).max(1e-300)
                    * (HEIGHT - MARGIN_T - MARGIN_B)
        };

        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\" font-size=\"12\">\n"
        ));
        svg.push_str(&format!(
            "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
             <text x=\"{:.0}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
            MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
            escape(&self.title)
        ));
        // axes
        svg.push_str(&format!(
            "<line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n\
             <line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n",
            l = MARGIN_L,
            r = WIDTH - MARGIN_R,
            t = MARGIN_T,
            b = HEIGHT - MARGIN_B
        ));
        for tx in nice_ticks(x_lo, x_hi, 6) {
            let x = px(tx);
            svg.push_str(&format!(
                "<line x1=\"{x:.1}\" y1=\"{b}\" x2=\"{x:.1}\" y2=\"{b2}\" stroke=\"black\"/>\n\
                 <text x=\"{x:.1}\" y=\"{ty}\" text-anchor=\"middle\">{}</text>\n",
                fmt_tick(tx),
                b = HEIGHT - MARGIN_B,
                b2 = HEIGHT - MARGIN_B + 5.0,
                ty = HEIGHT - MARGIN_B + 20.0
            ));
        }
        for ty in nice_ticks(y_lo, y_hi, 6) {
            let y = HEIGHT
                - MARGIN_B
                - (ty - y_lo) / (y_hi - y_lo).max(1e-300) * (HEIGHT - MARGIN_T - MARGIN_B);
            let label = if self.log_y { format!("1e{}", fmt_tick(ty)) } else { fmt_tick(ty) };
            svg.push_str(&format!(
                "<line x1=\"{l2}\" y1=\"{y:.1}\" x2=\"{l}\" y2=\"{y:.1}\" stroke=\"black\"/>\n\
                 <text x=\"{tx}\" y=\"{yt:.1}\" text-anchor=\"end\">{label}</text>\n",
                l = MARGIN_L,
                l2 = MARGIN_L - 5.0,
                tx = MARGIN_L - 8.0,
                yt = y + 4.0
            ));
        }
        svg.push_str(&format!(
            "<text x=\"{:.0}\" y=\"{:.0}\" text-anchor=\"middle\">{}</text>\n",
            MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        ));
        svg.push_str(&format!(
            "<text x=\"18\" y=\"{:.0}\" text-anchor=\"middle\" \
             transform=\"rotate(-90 18 {:.0})\">{}</text>\n",
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
            escape(&self.y_label)
        ));
        // data
        for (i, s) in self.series.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let path: Vec<String> = s
                .points
                .iter()
                .filter(|(x, y)| x.is_finite() && y.is_finite() && (!self.log_y || *y > 0.0))
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            if path.len() > 1 {
                svg.push_str(&format!(
                    "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" \
                     stroke-width=\"1.5\"/>\n",
                    path.join(" ")
                ));
            } else if path.len() == 1 {
                let xy: Vec<&str> = path[0].split(',').collect();
                svg.push_str(&format!(
                    "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                    xy[0], xy[1]
                ));
            }
            let ly = MARGIN_T + 16.0 * i as f64 + 10.0;
            svg.push_str(&format!(
                "<line x1=\"{x0}\" y1=\"{ly:.1}\" x2=\"{x1}\" y2=\"{ly:.1}\" \
                 stroke=\"{color}\" stroke-width=\"2\"/>\n\
                 <text x=\"{xt}\" y=\"{yt:.1}\">{}</text>\n",
                escape(&s.label),
                x0 = WIDTH - MARGIN_R + 8.0,
                x1 = WIDTH - MARGIN_R + 28.0,
                xt = WIDTH - MARGIN_R + 33.0,
                yt = ly + 4.0
            ));
        }
        svg.push_str("</svg>\n");
        svg
    }
}

fn bounds(v: &[f64]) -> (f64, f64) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
