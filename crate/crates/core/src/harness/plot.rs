//! SVG figures. Closed-form curves are solid, Monte Carlo bounds dashed.

use std::ops::Range;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};
use crate::harness::report::{Metric, RateReport};

const SIZE: (u32, u32) = (960, 640);

struct Curve {
    label: String,
    color: RGBColor,
    dashed: bool,
    points: Vec<(f64, f64)>,
}

fn plot_err<E: std::fmt::Display>(e: E) -> Error {
    Error::Plot(e.to_string())
}

fn color(i: usize) -> RGBColor {
    let c = Palette99::pick(i).to_rgba();
    RGBColor(c.0, c.1, c.2)
}

fn padded(lo: f64, hi: f64) -> Range<f64> {
    if !(lo.is_finite() && hi.is_finite()) {
        return 0.0..1.0;
    }
    let span = (hi - lo).abs().max(1e-9);
    (lo - 0.05 * span)..(hi + 0.05 * span)
}

fn draw(path: &Path, caption: &str, x_desc: &str, y_desc: &str, curves: &[Curve]) -> Result<()> {
    let pts = curves.iter().flat_map(|c| c.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(caption, ("sans-serif", 22))
        .margin(16)
        .x_label_area_size(44)
        .y_label_area_size(64)
        .build_cartesian_2d(padded(x0, x1), padded(y0, y1))
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc(x_desc)
        .y_desc(y_desc)
        .draw()
        .map_err(plot_err)?;
    for c in curves {
        let style = c.color.stroke_width(2);
        let legend_color = c.color;
        let anno = if c.dashed {
            chart
                .draw_series(DashedLineSeries::new(c.points.iter().copied(), 8, 5, style))
                .map_err(plot_err)?
        } else {
            chart
                .draw_series(LineSeries::new(c.points.iter().copied(), style))
                .map_err(plot_err)?
        };
        anno.label(c.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], legend_color.stroke_width(2)));
        if c.points.len() == 1 {
            chart
                .draw_series(c.points.iter().map(|&p| Circle::new(p, 4, c.color.filled())))
                .map_err(plot_err)?;
        }
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperRight)
        .draw()
        .map_err(plot_err)?;
    root.present().map_err(plot_err)?;
    Ok(())
}

fn label(r: &RateReport) -> String {
    format!("{} @ {} km/h", r.scheme, r.velocity_kmh)
}

fn per_symbol(
    reports: &[RateReport],
    f: impl Fn(&RateReport, usize, Metric) -> Option<f64>,
    metrics: &[Metric],
) -> Vec<Curve> {
    let mut curves = Vec::new();
    for (i, r) in reports.iter().enumerate() {
        for &m in metrics {
            let points: Vec<(f64, f64)> = (1..=r.frame_length)
                .filter_map(|s| f(r, s, m).map(|v| (s as f64, v)))
                .collect();
            if !points.is_empty() {
                curves.push(Curve {
                    label: format!("{} {}", label(r), m),
                    color: color(i),
                    dashed: m == Metric::RateMc,
                    points,
                });
            }
        }
    }
    curves
}

/// Write the three standard figures into `dir`; returns the files written.
pub fn emit_plots(reports: &[RateReport], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();

    let rates = per_symbol(
        reports,
        |r, s, m| r.symbol_rate(s, m),
        &[Metric::RateClosed, Metric::RateMc],
    );
    if !rates.is_empty() {
        let p = dir.join("rate_vs_symbol.svg");
        draw(&p, "Sum rate per symbol", "symbol index", "bit/s/Hz", &rates)?;
        written.push(p);
    }

    let nmse = per_symbol(
        reports,
        |r, s, _| r.nmse(s).filter(|v| *v > 0.0).map(|v| 10.0 * v.log10()),
        &[Metric::Nmse],
    );
    if !nmse.is_empty() {
        let p = dir.join("nmse_vs_symbol.svg");
        draw(&p, "Prediction NMSE", "symbol index", "NMSE (dB)", &nmse)?;
        written.push(p);
    }

    let mut schemes: Vec<&str> = Vec::new();
    for r in reports {
        if !schemes.contains(&r.scheme.as_str()) {
            schemes.push(&r.scheme);
        }
    }
    let mut avg = Vec::new();
    for (i, s) in schemes.iter().enumerate() {
        for m in [Metric::RateClosed, Metric::RateMc] {
            let points: Vec<(f64, f64)> = reports
                .iter()
                .filter(|r| r.scheme == *s)
                .filter_map(|r| r.frame_average(m).map(|v| (r.velocity_kmh, v)))
                .collect();
            if !points.is_empty() {
                avg.push(Curve {
                    label: format!("{s} {m}"),
                    color: color(i),
                    dashed: m == Metric::RateMc,
                    points,
                });
            }
        }
    }
    if !avg.is_empty() {
        let p = dir.join("avg_rate_vs_velocity.svg");
        draw(
            &p,
            "Frame-average rate",
            "velocity (km/h)",
            "bit/s/Hz per subcarrier",
            &avg,
        )?;
        written.push(p);
    }
    Ok(written)
}
