//! Flat squarified treemap over file elements.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Color, FileElement, WHITE};

#[derive(Debug, Error, PartialEq)]
pub enum LayoutError {
    #[error("viewport must have a positive area, got {0}x{1}")]
    EmptyViewport(f64, f64),
    #[error("nothing to lay out")]
    NoNodes,
    #[error("every node has zero weight; switch the scale attribute")]
    AllZeroWeights,
    #[error("weight {0} is not a finite non-negative number")]
    InvalidWeight(f64),
}

/// Which file attribute sizes a tile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Size,
    Count,
}

impl FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "size" => Ok(Scale::Size),
            "count" => Ok(Scale::Count),
            other => Err(format!("unknown scale {other:?} (expected size or count)")),
        }
    }
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Size => "size",
            Scale::Count => "count",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreemapNode<'a> {
    pub file: &'a FileElement,
    pub weight: f64,
}

impl<'a> TreemapNode<'a> {
    pub fn new(file: &'a FileElement, scale: Scale) -> Self {
        let weight = match scale {
            Scale::Size => file.size_bytes as f64,
            Scale::Count => file.element_count as f64,
        };
        TreemapNode { file, weight }
    }

    fn tie_key(&self) -> (&str, &str, &str) {
        (&self.file.folder, &self.file.file_name, &self.file.dataset_id)
    }
}

pub fn nodes_for<'a>(files: impl IntoIterator<Item = &'a FileElement>, scale: Scale) -> Vec<TreemapNode<'a>> {
    files.into_iter().map(|f| TreemapNode::new(f, scale)).collect()
}

/// Category color for files holding data elements, white otherwise.
pub fn color_of(node: &TreemapNode<'_>) -> Color {
    node.file.data_category.map_or(WHITE, |c| c.color())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TreemapRect<'a> {
    pub node: TreemapNode<'a>,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl TreemapRect<'_> {
    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Long side over short side; infinite for degenerate tiles.
    pub fn aspect_ratio(&self) -> f64 {
        let (lo, hi) = if self.w < self.h {
            (self.w, self.h)
        } else {
            (self.h, self.w)
        };
        if lo > 0.0 {
            hi / lo
        } else {
            f64::INFINITY
        }
    }
}

/// Largest aspect ratio among tiles with positive area.
pub fn worst_aspect_ratio(rects: &[TreemapRect<'_>]) -> f64 {
    rects
        .iter()
        .filter(|r| r.area() > 0.0)
        .map(TreemapRect::aspect_ratio)
        .fold(1.0, f64::max)
}

#[derive(Debug, Clone, Copy)]
struct Region {
    x: f64,
    y: f64,
    w: f64,
    h: f64,
}

/// Descending weight, ties by folder, name, dataset.
fn sorted_nodes<'a>(nodes: &[TreemapNode<'a>]) -> Result<Vec<TreemapNode<'a>>, LayoutError> {
    if let Some(bad) = nodes.iter().find(|n| !(n.weight.is_finite() && n.weight >= 0.0)) {
        return Err(LayoutError::InvalidWeight(bad.weight));
    }
    let mut sorted = nodes.to_vec();
    sorted.sort_by(|a, b| {
        b.weight
            .partial_cmp(&a.weight)
            .unwrap_or(Ordering::Equal)
            .then_with(|| a.tie_key().cmp(&b.tie_key()))
    });
    Ok(sorted)
}

fn check_inputs(nodes: &[TreemapNode<'_>], width: f64, height: f64) -> Result<(), LayoutError> {
    if !(width > 0.0 && height > 0.0 && width.is_finite() && height.is_finite()) {
        return Err(LayoutError::EmptyViewport(width, height));
    }
    if nodes.is_empty() {
        return Err(LayoutError::NoNodes);
    }
    Ok(())
}

/// Worst aspect ratio of a row with the given area stats laid along `side`.
fn row_worst(min: f64, max: f64, sum: f64, side: f64) -> f64 {
    let s2 = side * side;
    let sum2 = sum * sum;
    f64::max(s2 * max / sum2, sum2 / (s2 * min))
}

/// Places one row of areas against the shorter side of `region` and
/// returns the region left over.
fn place_row<'a>(row: &[(TreemapNode<'a>, f64)], region: Region, out: &mut Vec<TreemapRect<'a>>) -> Region {
    let sum: f64 = row.iter().map(|(_, a)| a).sum();
    if region.w >= region.h {
        // column on the left, stacked top to bottom
        let thickness = sum / region.h;
        let mut y = region.y;
        for &(node, area) in row {
            let len = area / thickness;
            out.push(TreemapRect {
                node,
                x: region.x,
                y,
                w: thickness,
                h: len,
            });
            y += len;
        }
        Region {
            x: region.x + thickness,
            y: region.y,
            w: (region.w - thickness).max(0.0),
            h: region.h,
        }
    } else {
        // row on top, left to right
        let thickness = sum / region.w;
        let mut x = region.x;
        for &(node, area) in row {
            let len = area / thickness;
            out.push(TreemapRect {
                node,
                x,
                y: region.y,
                w: len,
                h: thickness,
            });
            x += len;
        }
        Region {
            x: region.x,
            y: region.y + thickness,
            w: region.w,
            h: (region.h - thickness).max(0.0),
        }
    }
}

fn zero_rects<'a>(zeros: &[TreemapNode<'a>], width: f64, height: f64, out: &mut Vec<TreemapRect<'a>>) {
    out.extend(zeros.iter().map(|&node| TreemapRect {
        node,
        x: width,
        y: height,
        w: 0.0,
        h: 0.0,
    }));
}

/// Positive nodes paired with their target area, then zero-weight nodes.
type Split<'a> = (Vec<(TreemapNode<'a>, f64)>, Vec<TreemapNode<'a>>);

fn split_weights<'a>(nodes: &[TreemapNode<'a>], width: f64, height: f64) -> Result<Split<'a>, LayoutError> {
    check_inputs(nodes, width, height)?;
    let sorted = sorted_nodes(nodes)?;
    let total: f64 = sorted.iter().map(|n| n.weight).sum();
    if total <= 0.0 {
        return Err(LayoutError::AllZeroWeights);
    }
    let scale = width * height / total;
    let (positive, zeros): (Vec<_>, Vec<_>) = sorted.into_iter().partition(|n| n.weight > 0.0);
    Ok((positive.into_iter().map(|n| (n, n.weight * scale)).collect(), zeros))
}

/// Squarified layout of `nodes` in a `width` × `height` viewport anchored at
/// the origin. Rects come out in descending weight order; zero-weight nodes
/// get empty rects at the far corner, after all others.
pub fn layout<'a>(nodes: &[TreemapNode<'a>], width: f64, height: f64) -> Result<Vec<TreemapRect<'a>>, LayoutError> {
    let (items, zeros) = split_weights(nodes, width, height)?;
    let mut out = Vec::with_capacity(nodes.len());
    let mut region = Region {
        x: 0.0,
        y: 0.0,
        w: width,
        h: height,
    };
    let mut start = 0;
    while start < items.len() {
        let side = region.w.min(region.h);
        let (mut min, mut max, mut sum) = (items[start].1, items[start].1, items[start].1);
        let mut end = start + 1;
        while end < items.len() {
            let a = items[end].1;
            let current = row_worst(min, max, sum, side);
            let next = row_worst(min.min(a), max.max(a), sum + a, side);
            if next > current {
                break;
            }
            min = min.min(a);
            max = max.max(a);
            sum += a;
            end += 1;
        }
        region = place_row(&items[start..end], region, &mut out);
        start = end;
    }
    zero_rects(&zeros, width, height, &mut out);
    Ok(out)
}

/// Every node in a single row along the shorter viewport side. Reference
/// point for judging the squarified layout.
pub fn slice_layout<'a>(
    nodes: &[TreemapNode<'a>],
    width: f64,
    height: f64,
) -> Result<Vec<TreemapRect<'a>>, LayoutError> {
    let (items, zeros) = split_weights(nodes, width, height)?;
    let mut out = Vec::with_capacity(nodes.len());
    place_row(
        &items,
        Region {
            x: 0.0,
            y: 0.0,
            w: width,
            h: height,
        },
        &mut out,
    );
    zero_rects(&zeros, width, height, &mut out);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Category;
    use proptest::prelude::*;

    fn files(weights: &[u64]) -> Vec<FileElement> {
        weights
            .iter()
            .enumerate()
            .map(|(i, w)| FileElement::new("ds", &format!("f{i:03}.json"), *w))
            .collect()
    }

    fn overlap(a: &TreemapRect, b: &TreemapRect) -> f64 {
        let dx = (a.x + a.w).min(b.x + b.w) - a.x.max(b.x);
        let dy = (a.y + a.h).min(b.y + b.h) - a.y.max(b.y);
        dx.max(0.0) * dy.max(0.0)
    }

    fn check(weights: &[u64], w: f64, h: f64) {
        let fs = files(weights);
        let nodes = nodes_for(&fs, Scale::Size);
        let rects = layout(&nodes, w, h).unwrap();
        assert_eq!(rects.len(), weights.len());
        let total_w: f64 = weights.iter().map(|&x| x as f64).sum();
        let total_a: f64 = rects.iter().map(TreemapRect::area).sum();
        assert!(((total_a - w * h) / (w * h)).abs() < 1e-6);
        for r in &rects {
            let expected = r.node.weight / total_w;
            let got = r.area() / total_a;
            if expected > 0.0 {
                assert!(((got - expected) / expected).abs() < 1e-9, "{got} vs {expected}");
            } else {
                assert_eq!(r.area(), 0.0);
            }
            let eps = 1e-9 * (w + h);
            assert!(r.w >= 0.0 && r.h >= 0.0);
            assert!(r.x >= -eps && r.y >= -eps && r.x + r.w <= w + eps && r.y + r.h <= h + eps);
        }
        for i in 0..rects.len() {
            for j in i + 1..rects.len() {
                assert!(overlap(&rects[i], &rects[j]) <= 1e-9);
            }
        }
    }

    #[test]
    fn single_node_fills_viewport() {
        let fs = files(&[42]);
        let rects = layout(&nodes_for(&fs, Scale::Size), 100.0, 100.0).unwrap();
        let r = rects[0];
        assert_eq!((r.x, r.y, r.w, r.h), (0.0, 0.0, 100.0, 100.0));
    }

    #[test]
    fn reference_weights_in_six_by_four() {
        let weights = [6, 6, 4, 3, 2, 2, 1];
        check(&weights, 6.0, 4.0);
        let fs = files(&weights);
        let rects = layout(&nodes_for(&fs, Scale::Size), 6.0, 4.0).unwrap();
        let mut areas: Vec<f64> = rects.iter().map(TreemapRect::area).collect();
        areas.sort_by(|a, b| b.partial_cmp(a).unwrap());
        for (got, want) in areas.iter().zip([6.0, 6.0, 4.0, 3.0, 2.0, 2.0, 1.0]) {
            assert!(((got - want) / want).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_weights_are_last_and_empty() {
        let fs = files(&[0, 5, 0, 3]);
        let rects = layout(&nodes_for(&fs, Scale::Size), 10.0, 10.0).unwrap();
        assert_eq!(rects.len(), 4);
        assert!(rects[2..].iter().all(|r| r.area() == 0.0));
        assert_eq!(rects[2].node.file.file_name, "f000.json");
        check(&[0, 5, 0, 3], 10.0, 10.0);
    }

    #[test]
    fn errors() {
        let fs = files(&[0, 0]);
        assert_eq!(
            layout(&nodes_for(&fs, Scale::Size), 10.0, 10.0),
            Err(LayoutError::AllZeroWeights)
        );
        assert_eq!(layout(&[], 10.0, 10.0), Err(LayoutError::NoNodes));
        let fs = files(&[1]);
        assert!(matches!(
            layout(&nodes_for(&fs, Scale::Size), 0.0, 10.0),
            Err(LayoutError::EmptyViewport(..))
        ));
        let bad = [TreemapNode {
            file: &fs[0],
            weight: f64::NAN,
        }];
        assert!(matches!(layout(&bad, 1.0, 1.0), Err(LayoutError::InvalidWeight(_))));
    }

    #[test]
    fn ties_break_by_path() {
        let fs = files(&[5, 5, 5]);
        let rects = layout(&nodes_for(&fs, Scale::Size), 9.0, 3.0).unwrap();
        let names: Vec<_> = rects.iter().map(|r| r.node.file.file_name.as_str()).collect();
        assert_eq!(names, ["f000.json", "f001.json", "f002.json"]);
    }

    #[test]
    fn colors_follow_data_category() {
        let mut fs = files(&[1, 1, 1]);
        fs[0].data_category = Some(Category::Messages);
        fs[0].element_count = 3;
        fs[1].data_category = Some(Category::Messages);
        fs[1].element_count = 1;
        let nodes = nodes_for(&fs, Scale::Size);
        assert_eq!(color_of(&nodes[0]), Category::Messages.color());
        assert_eq!(color_of(&nodes[0]), color_of(&nodes[1]));
        assert_eq!(color_of(&nodes[2]), WHITE);
        let by_count = nodes_for(&fs, Scale::Count);
        assert_eq!(by_count[0].weight, 3.0);
        assert_eq!(by_count[2].weight, 0.0);
    }

    proptest! {
        #[test]
        fn invariants_on_random_weights(
            weights in prop::collection::vec(0u64..1_000_000, 1..200),
            w in 1.0f64..2000.0,
            h in 1.0f64..2000.0,
        ) {
            prop_assume!(weights.iter().any(|&x| x > 0));
            check(&weights, w, h);
        }

        #[test]
        fn squarified_beats_single_slice(
            weights in prop::collection::vec(1u64..10_000, 1..200),
            w in 1.0f64..2000.0,
            h in 1.0f64..2000.0,
        ) {
            let fs = files(&weights);
            let nodes = nodes_for(&fs, Scale::Size);
            let squarified = worst_aspect_ratio(&layout(&nodes, w, h).unwrap());
            let slice = worst_aspect_ratio(&slice_layout(&nodes, w, h).unwrap());
            prop_assert!(squarified <= slice * (1.0 + 1e-9), "{} > {}", squarified, slice);
        }

        #[test]
        fn deterministic(weights in prop::collection::vec(0u64..100, 1..50)) {
            prop_assume!(weights.iter().any(|&x| x > 0));
            let fs = files(&weights);
            let nodes = nodes_for(&fs, Scale::Size);
            prop_assert_eq!(layout(&nodes, 640.0, 480.0).unwrap(), layout(&nodes, 640.0, 480.0).unwrap());
        }
    }
}
