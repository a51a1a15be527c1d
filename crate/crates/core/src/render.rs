//! Static renderings: treemap and timeline SVG, plus the JSON documents
//! (treemap geometry, timeline points, stats) the UI consumes.
//!
//! All output is deterministic: numbers are printed with fixed precision and
//! every collection is iterated in a defined order.

use std::fmt::Write as _;

use chrono::{Datelike, Months, NaiveDate};
use serde_json::{json, Value};

use crate::model::{format_utc, Category};
use crate::query::{Stats, TimePoint, SECONDS_PER_DAY};
use crate::treemap::{color_of, Scale, TreemapRect};

const FONT: &str = "font-family=\"sans-serif\" font-size=\"11\"";

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            // not allowed in XML 1.0
            c if (c as u32) < 0x20 && !matches!(c, '\t' | '\n' | '\r') => out.push('\u{fffd}'),
            c => out.push(c),
        }
    }
    out
}

/// Fixed three-decimal form with `-0.000` normalized.
fn num(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".to_owned()
    } else {
        s
    }
}

fn human_size(bytes: u64) -> String {
    const UNITS: [&str; 4] = ["KiB", "MiB", "GiB", "TiB"];
    if bytes < 1024 {
        return format!("{bytes} B");
    }
    let mut v = bytes as f64 / 1024.0;
    let mut unit = 0;
    while v >= 1024.0 && unit + 1 < UNITS.len() {
        v /= 1024.0;
        unit += 1;
    }
    format!("{v:.1} {}", UNITS[unit])
}

fn truncate(s: &str, max: usize) -> String {
    if s.chars().count() <= max {
        s.to_owned()
    } else {
        let mut t: String = s.chars().take(max - 3).collect();
        t.push_str("...");
        t
    }
}

/// Treemap as an SVG document, one `<rect>` per file with a tooltip
/// naming the file, its folder, size, category and element count.
pub fn treemap_svg(rects: &[TreemapRect<'_>], width: f64, height: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = num(width),
        h = num(height)
    );
    s.push_str("<g stroke=\"#333333\" stroke-width=\"0.5\">\n");
    for r in rects {
        let f = r.node.file;
        let category = f.data_category.map_or("none", Category::label);
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\"><title>{}\nfolder: {}\nsize: {} ({} bytes)\ncategory: {}\nelements: {}</title></rect>",
            num(r.x),
            num(r.y),
            num(r.w),
            num(r.h),
            color_of(&r.node),
            esc(&f.file_name),
            esc(if f.folder.is_empty() { "/" } else { &f.folder }),
            human_size(f.size_bytes),
            f.size_bytes,
            category,
            f.element_count
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// Treemap layout as a JSON document for the UI.
pub fn treemap_geometry(rects: &[TreemapRect<'_>], width: f64, height: f64, scale: Scale) -> Value {
    let rects: Vec<Value> = rects
        .iter()
        .map(|r| {
            let f = r.node.file;
            json!({
                "dataset_id": f.dataset_id,
                "name": f.file_name,
                "folder": f.folder,
                "size_bytes": f.size_bytes,
                "element_count": f.element_count,
                "data_category": f.data_category,
                "weight": r.node.weight,
                "color": color_of(&r.node).to_string(),
                "x": r.x,
                "y": r.y,
                "w": r.w,
                "h": r.h,
            })
        })
        .collect();
    json!({
        "viewport": {"width": width, "height": height},
        "scale": scale,
        "rects": rects,
    })
}

/// One stacked panel of the timeline.
#[derive(Debug, Clone)]
pub struct TimelinePanel<'a> {
    pub label: String,
    pub points: Vec<TimePoint<'a>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimelineOptions {
    pub width: f64,
    pub panel_height: f64,
    /// First and last day shown, in the same (offset) calendar as the
    /// points. Defaults to the extent of the points.
    pub from: Option<NaiveDate>,
    pub to: Option<NaiveDate>,
    /// Applied by the caller when projecting; only used for the axis note.
    pub tz_offset_seconds: i32,
    pub radius: f64,
}

impl Default for TimelineOptions {
    fn default() -> Self {
        TimelineOptions {
            width: 960.0,
            panel_height: 240.0,
            from: None,
            to: None,
            tz_offset_seconds: 0,
            radius: 2.5,
        }
    }
}

const MARGIN_LEFT: f64 = 56.0;
const MARGIN_RIGHT: f64 = 16.0;
const PANEL_TOP: f64 = 22.0;
const PANEL_BOTTOM: f64 = 26.0;
const LEGEND_HEIGHT: f64 = 24.0;

fn epoch_day(d: NaiveDate) -> i64 {
    i64::from(d.num_days_from_ce()) - 719_163
}

fn day_date(day: i64) -> NaiveDate {
    NaiveDate::from_num_days_from_ce_opt((day + 719_163) as i32).unwrap_or(NaiveDate::MIN)
}

/// Day range shown on the x axis, inclusive.
fn day_range(panels: &[TimelinePanel<'_>], opts: &TimelineOptions) -> (i64, i64) {
    let days = panels.iter().flat_map(|p| p.points.iter().map(|t| t.day));
    let (lo, hi) = days.fold((i64::MAX, i64::MIN), |(lo, hi), d| (lo.min(d), hi.max(d)));
    let lo = opts.from.map(epoch_day).unwrap_or(if lo == i64::MAX { 0 } else { lo });
    let hi = opts.to.map(epoch_day).unwrap_or(if hi == i64::MIN { lo } else { hi });
    (lo, hi.max(lo))
}

/// Month ticks between two days, thinned so at most ~24 get a label.
fn month_ticks(lo: i64, hi: i64) -> Vec<(i64, String)> {
    let mut months = Vec::new();
    let mut m = day_date(lo).with_day(1).expect("day 1 exists");
    while epoch_day(m) <= hi {
        if epoch_day(m) >= lo {
            months.push(m);
        }
        m = match m.checked_add_months(Months::new(1)) {
            Some(next) => next,
            None => break,
        };
    }
    let step = [1i64, 2, 3, 6, 12, 24, 60, 120]
        .into_iter()
        .find(|s| months.len() as i64 / s <= 24)
        .unwrap_or(240);
    months
        .into_iter()
        .filter(|d| (i64::from(d.year()) * 12 + i64::from(d.month0())) % step == 0)
        .map(|d| {
            let label = if d.month() == 1 { d.format("%Y") } else { d.format("%b") };
            (epoch_day(d), label.to_string())
        })
        .collect()
}

/// Date × time-of-day scatter plot, one panel per entry of `panels`
/// sharing the same x axis. Circles are outlined in their category color.
pub fn timeline_svg(panels: &[TimelinePanel<'_>], opts: &TimelineOptions) -> String {
    let (lo, hi) = day_range(panels, opts);
    let plot_w = (opts.width - MARGIN_LEFT - MARGIN_RIGHT).max(1.0);
    let plot_h = (opts.panel_height - PANEL_TOP - PANEL_BOTTOM).max(1.0);
    let n_days = (hi - lo + 1) as f64;
    let x_of = |day: i64, sec: u32| {
        MARGIN_LEFT + ((day - lo) as f64 + f64::from(sec) / SECONDS_PER_DAY as f64) / n_days * plot_w
    };
    let total_h = LEGEND_HEIGHT + opts.panel_height * panels.len().max(1) as f64;
    let ticks = month_ticks(lo, hi);

    let mut s = String::new();
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">",
        w = num(opts.width),
        h = num(total_h)
    );
    s.push_str("<rect x=\"0\" y=\"0\" width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n");

    // legend
    let _ = write!(s, "<g {FONT}>");
    for (i, c) in Category::ALL.iter().enumerate() {
        let x = MARGIN_LEFT + i as f64 * 88.0;
        let _ = write!(
            s,
            "<circle cx=\"{}\" cy=\"12.000\" r=\"4\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\"/><text x=\"{}\" y=\"16.000\">{}</text>",
            num(x),
            c.color(),
            num(x + 8.0),
            esc(c.label())
        );
    }
    s.push_str("</g>\n");

    let offset_note = match opts.tz_offset_seconds {
        0 => "UTC".to_owned(),
        o => format!(
            "UTC{}{:02}:{:02}",
            if o < 0 { '-' } else { '+' },
            o.abs() / 3600,
            o.abs() % 3600 / 60
        ),
    };
    let empty = [TimelinePanel {
        label: String::new(),
        points: Vec::new(),
    }];
    let panels = if panels.is_empty() { &empty[..] } else { panels };
    for (i, panel) in panels.iter().enumerate() {
        let top = LEGEND_HEIGHT + i as f64 * opts.panel_height + PANEL_TOP;
        let bottom = top + plot_h;
        let _ = writeln!(s, "<g class=\"panel\">");
        let _ = writeln!(
            s,
            "<text x=\"{}\" y=\"{}\" {FONT} font-weight=\"bold\">{} ({} elements)</text>",
            num(MARGIN_LEFT),
            num(top - 6.0),
            esc(&panel.label),
            panel.points.len()
        );
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"#999999\"/>",
            num(MARGIN_LEFT),
            num(top),
            num(plot_w),
            num(plot_h)
        );
        let _ = write!(s, "<g {FONT} fill=\"#555555\">");
        for h in [0u32, 6, 12, 18, 24] {
            let y = top + f64::from(h) / 24.0 * plot_h;
            let _ = write!(
                s,
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{h:02}:00</text>",
                num(MARGIN_LEFT - 4.0),
                num(y + 4.0)
            );
        }
        let _ = write!(
            s,
            "<text x=\"4\" y=\"{}\" font-size=\"9\">{}</text>",
            num(bottom + 20.0),
            offset_note
        );
        for (day, label) in &ticks {
            let x = x_of(*day, 0);
            let _ = write!(
                s,
                "<line x1=\"{x}\" y1=\"{}\" x2=\"{x}\" y2=\"{}\" stroke=\"#dddddd\"/><text x=\"{x}\" y=\"{}\" text-anchor=\"middle\">{}</text>",
                num(top),
                num(bottom),
                num(bottom + 14.0),
                esc(label),
                x = num(x)
            );
        }
        s.push_str("</g>\n<g fill=\"none\" stroke-width=\"1\">\n");
        for p in &panel.points {
            if p.day < lo || p.day > hi {
                continue;
            }
            let e = p.element;
            let y = top + f64::from(p.second_of_day) / SECONDS_PER_DAY as f64 * plot_h;
            let when = e.time.map(|t| format_utc(&t)).unwrap_or_default();
            let _ = writeln!(
                s,
                "<circle cx=\"{}\" cy=\"{}\" r=\"{}\" stroke=\"{}\"><title>{} | {} | {}</title></circle>",
                num(x_of(p.day, p.second_of_day)),
                num(y),
                num(opts.radius),
                e.category.color(),
                when,
                e.category.label(),
                esc(&truncate(&e.text, 120))
            );
        }
        s.push_str("</g>\n</g>\n");
    }
    s.push_str("</svg>\n");
    s
}

/// Timeline points per panel as a JSON document for the UI.
pub fn timeline_geometry(panels: &[TimelinePanel<'_>], tz_offset_seconds: i32) -> Value {
    let panels: Vec<Value> = panels
        .iter()
        .map(|p| {
            let points: Vec<Value> = p
                .points
                .iter()
                .map(|t| {
                    json!({
                        "element_id": t.element.id,
                        "day": t.day,
                        "second_of_day": t.second_of_day,
                        "category": t.element.category,
                    })
                })
                .collect();
            json!({"label": p.label, "points": points})
        })
        .collect();
    json!({"tz_offset_seconds": tz_offset_seconds, "panels": panels})
}

/// Stats as a JSON document with every map in sorted order.
pub fn stats_json(stats: &Stats) -> Value {
    let per_category: serde_json::Map<String, Value> = stats
        .per_category
        .iter()
        .map(|(c, n)| (c.as_str().to_owned(), json!(n)))
        .collect();
    json!({
        "total_elements": stats.total_elements,
        "total_size_bytes": stats.total_size_bytes,
        "per_category": per_category,
        "per_service": stats.per_service,
        "per_file": stats.files(),
        "time_extent": stats.time_extent.map(|(a, b)| [format_utc(&a), format_utc(&b)]),
    })
}

/// Stats as an aligned text table; category rows always in the fixed
/// category order.
pub fn stats_table(stats: &Stats) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<20} {:>10}", "category", "elements");
    for (c, n) in &stats.per_category {
        let _ = writeln!(s, "{:<20} {:>10}", c.label(), n);
    }
    let _ = writeln!(s, "{:<20} {:>10}", "total", stats.total_elements);
    s.push('\n');
    let _ = writeln!(s, "{:<20} {:>10}", "service", "elements");
    for (svc, n) in &stats.per_service {
        let _ = writeln!(s, "{:<20} {:>10}", svc, n);
    }
    s.push('\n');
    let _ = writeln!(s, "files with selected elements: {}", stats.per_file.len());
    let _ = writeln!(s, "size of those files: {} bytes", stats.total_size_bytes);
    match stats.time_extent {
        Some((a, b)) => {
            let _ = writeln!(s, "time extent: {} .. {}", format_utc(&a), format_utc(&b));
        }
        None => s.push_str("time extent: none\n"),
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{element_id, DataElement, Dataset, FileElement};
    use crate::query::{merge, partition_by_dataset, Selection};
    use crate::treemap::{layout, nodes_for};
    use chrono::DateTime;

    fn dataset(id: &str, times: &[i64]) -> Dataset {
        let mut file = FileElement::new(id, "messages/a&b.json", 2048);
        file.data_category = Some(Category::Messages);
        file.element_count = times.len() as u64;
        let photo = FileElement::new(id, "photos/p.jpg", 512);
        let elements = times
            .iter()
            .enumerate()
            .map(|(i, t)| DataElement {
                id: element_id("facebook", "messages/a&b.json", i as u64, "x"),
                time: DateTime::from_timestamp(*t, 0),
                text: format!("<msg {i}>"),
                category: Category::Messages,
                subcategory: String::new(),
                source_file: "messages/a&b.json".into(),
                dataset_id: String::new(),
            })
            .collect();
        Dataset::new(
            id,
            "facebook",
            DateTime::from_timestamp(0, 0).unwrap(),
            vec![file, photo],
            elements,
        )
        .unwrap()
    }

    #[test]
    fn single_file_treemap_is_one_full_rect() {
        let mut ds = dataset("a", &[1_546_346_096]);
        let files: Vec<FileElement> = ds.files()[..1].to_vec();
        ds = Dataset::new("a", "facebook", ds.ingested_at, files, ds.elements().to_vec()).unwrap();
        let rects = layout(&nodes_for(ds.files(), Scale::Size), 100.0, 100.0).unwrap();
        let svg = treemap_svg(&rects, 100.0, 100.0);
        assert_eq!(svg.matches("<rect ").count(), 1);
        assert!(svg.contains("x=\"0.000\" y=\"0.000\" width=\"100.000\" height=\"100.000\" fill=\"#e7298a\""));
        assert!(svg.contains("<title>a&amp;b.json\nfolder: messages/\nsize: 2.0 KiB (2048 bytes)\ncategory: Messages\nelements: 1</title>"));
    }

    #[test]
    fn treemap_outputs_are_deterministic() {
        let ds = dataset("a", &[1, 2, 3]);
        let rects = layout(&nodes_for(ds.files(), Scale::Size), 300.0, 200.0).unwrap();
        assert_eq!(treemap_svg(&rects, 300.0, 200.0), treemap_svg(&rects, 300.0, 200.0));
        let geo = treemap_geometry(&rects, 300.0, 200.0, Scale::Size);
        assert_eq!(geo["rects"].as_array().unwrap().len(), 2);
        assert_eq!(geo["rects"][1]["color"], "#ffffff");
        assert_eq!(geo["scale"], "size");
    }

    #[test]
    fn split_timeline_has_one_panel_per_dataset() {
        let a = dataset("a", &[1_546_346_096, 1_300_000_000]);
        let b = dataset("b", &[1_400_000_000]);
        let view = merge([&a, &b]).unwrap();
        let panels: Vec<TimelinePanel> = partition_by_dataset(&view, &Selection::all(), 0)
            .into_iter()
            .map(|(d, points)| TimelinePanel {
                label: d.dataset_id.clone(),
                points,
            })
            .collect();
        let svg = timeline_svg(&panels, &TimelineOptions::default());
        assert_eq!(svg.matches("class=\"panel\"").count(), 2);
        assert_eq!(svg.matches("<circle cx").count(), 3 + Category::ALL.len());
        assert!(svg.contains("&lt;msg 0&gt;"));
        assert_eq!(svg, timeline_svg(&panels, &TimelineOptions::default()));
        let geo = timeline_geometry(&panels, 0);
        assert_eq!(geo["panels"][0]["points"].as_array().unwrap().len(), 2);
    }

    #[test]
    fn timeline_range_clips_points() {
        let a = dataset("a", &[1_546_346_096, 1_300_000_000]);
        let view = merge([&a]).unwrap();
        let (_, points) = partition_by_dataset(&view, &Selection::all(), 0).remove(0);
        let opts = TimelineOptions {
            from: NaiveDate::from_ymd_opt(2018, 6, 1),
            to: NaiveDate::from_ymd_opt(2019, 6, 1),
            ..TimelineOptions::default()
        };
        let svg = timeline_svg(
            &[TimelinePanel {
                label: "a".into(),
                points,
            }],
            &opts,
        );
        assert_eq!(svg.matches("<title>").count(), 1);
        assert!(svg.contains(">2019<"));
    }

    #[test]
    fn month_ticks_thin_out() {
        let d = |y, m, dd| epoch_day(NaiveDate::from_ymd_opt(y, m, dd).unwrap());
        let short = month_ticks(d(2019, 1, 15), d(2019, 4, 2));
        assert_eq!(
            short.iter().map(|t| t.1.as_str()).collect::<Vec<_>>(),
            ["Feb", "Mar", "Apr"]
        );
        let long = month_ticks(d(2008, 1, 1), d(2019, 12, 31));
        assert!(long.len() <= 24 && long.len() >= 6, "{long:?}");
        assert_eq!(long.iter().filter(|t| t.1.len() == 4).count(), 12);
    }

    #[test]
    fn stats_rendering() {
        let a = dataset("a", &[1_546_346_096]);
        let view = merge([&a]).unwrap();
        let stats = crate::query::compute_stats(&view, &Selection::all());
        let v = stats_json(&stats);
        assert_eq!(v["per_category"]["Messages"], 1);
        assert_eq!(v["per_file"][0]["path"], "messages/a&b.json");
        assert_eq!(v["time_extent"][0], "2019-01-01T12:34:56Z");
        let table = stats_table(&stats);
        assert!(table.starts_with("category"));
        assert!(table.contains("Posts and Comments"));
        assert_eq!(stats_table(&Stats::default()).matches(" 0\n").count(), 12);
    }
}
