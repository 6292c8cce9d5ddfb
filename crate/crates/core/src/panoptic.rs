//! Panoptic quality over dense (class, instance) label maps.
//!
//! Matching follows the standard protocol: a predicted and a ground-truth
//! segment of the same class match iff their IoU is strictly greater than
//! 0.5, which makes matches unique. Ground-truth void pixels are excluded
//! from IoU denominators, and an unmatched prediction whose overlap with void
//! exceeds half its area is not counted as a false positive. Per class:
//!
//! ```text
//! PQ = sum(IoU) / (TP + FP/2 + FN/2)    RQ = TP / (TP + FP/2 + FN/2)
//! SQ = sum(IoU) / TP                     PQ = RQ * SQ   (TP > 0)
//! ```

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

/// Class id reserved for unlabeled pixels.
pub const VOID_CLASS: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PanopticError {
    #[error("map dimensions differ: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },
    #[error("cell buffer holds {got} entries for a {expected}-pixel map")]
    CellCountMismatch { expected: usize, got: usize },
    #[error("run [{start}, {start}+{len}) escapes a {size}-pixel map")]
    RunOutOfBounds { start: usize, len: usize, size: usize },
    #[error("run [{start}, {start}+{len}) overlaps an already painted segment")]
    OverlappingRun { start: usize, len: usize },
}

/// Dense per-pixel (class id, instance id) map in row-major order. Stuff
/// classes use a single instance id; instance ids are unique within a class.
#[derive(Debug, Clone, PartialEq)]
pub struct PanopticMap {
    width: usize,
    height: usize,
    cells: Vec<(u32, u32)>,
}

impl PanopticMap {
    /// An all-void map.
    pub fn filled_void(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            cells: vec![(VOID_CLASS, 0); width * height],
        }
    }

    pub fn from_cells(
        width: usize,
        height: usize,
        cells: Vec<(u32, u32)>,
    ) -> Result<Self, PanopticError> {
        if cells.len() != width * height {
            return Err(PanopticError::CellCountMismatch {
                expected: width * height,
                got: cells.len(),
            });
        }
        Ok(Self {
            width,
            height,
            cells,
        })
    }

    /// Paint a run of pixels with a segment; refuses to overwrite non-void
    /// pixels so run-length inputs with overlaps are rejected.
    pub fn paint_run(
        &mut self,
        start: usize,
        len: usize,
        class: u32,
        instance: u32,
    ) -> Result<(), PanopticError> {
        let size = self.cells.len();
        if start + len > size {
            return Err(PanopticError::RunOutOfBounds { start, len, size });
        }
        if self.cells[start..start + len]
            .iter()
            .any(|(c, _)| *c != VOID_CLASS)
        {
            return Err(PanopticError::OverlappingRun { start, len });
        }
        for cell in &mut self.cells[start..start + len] {
            *cell = (class, instance);
        }
        Ok(())
    }

    pub fn set_cell(&mut self, index: usize, class: u32, instance: u32) {
        self.cells[index] = (class, instance);
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn cells(&self) -> &[(u32, u32)] {
        &self.cells
    }

    /// Segments present in the map with their pixel counts (void excluded).
    pub fn segment_areas(&self) -> BTreeMap<(u32, u32), u64> {
        let mut areas = BTreeMap::new();
        for (class, instance) in &self.cells {
            if *class != VOID_CLASS {
                *areas.entry((*class, *instance)).or_insert(0u64) += 1;
            }
        }
        areas
    }
}

/// Matching counts and summed IoU for one class.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassStats {
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub iou_sum: f64,
}

impl ClassStats {
    fn denominator(&self) -> f64 {
        self.true_positives as f64
            + self.false_positives as f64 / 2.0
            + self.false_negatives as f64 / 2.0
    }

    pub fn pq(&self) -> f64 {
        let d = self.denominator();
        if d == 0.0 {
            0.0
        } else {
            self.iou_sum / d
        }
    }

    pub fn rq(&self) -> f64 {
        let d = self.denominator();
        if d == 0.0 {
            0.0
        } else {
            self.true_positives as f64 / d
        }
    }

    pub fn sq(&self) -> f64 {
        if self.true_positives == 0 {
            0.0
        } else {
            self.iou_sum / self.true_positives as f64
        }
    }

    pub fn is_empty(&self) -> bool {
        self.true_positives == 0 && self.false_positives == 0 && self.false_negatives == 0
    }

    pub fn merge(&mut self, other: &ClassStats) {
        self.true_positives += other.true_positives;
        self.false_positives += other.false_positives;
        self.false_negatives += other.false_negatives;
        self.iou_sum += other.iou_sum;
    }
}

/// Per-class statistics, additive across images.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PqStats {
    pub per_class: BTreeMap<u32, ClassStats>,
}

/// Class-averaged metrics over a class subset.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PqSummary {
    pub pq: f64,
    pub rq: f64,
    pub sq: f64,
    /// Number of classes that contributed (nonzero TP+FP+FN).
    pub classes: usize,
}

impl PqStats {
    pub fn class(&self, class: u32) -> ClassStats {
        self.per_class.get(&class).copied().unwrap_or_default()
    }

    /// Counts and IoU sums are additive, so aggregation over images is
    /// order-independent.
    pub fn merge(&mut self, other: &PqStats) {
        for (class, stats) in &other.per_class {
            self.per_class.entry(*class).or_default().merge(stats);
        }
    }

    /// Average PQ/RQ/SQ over the classes in `classes` that actually appear.
    pub fn averaged(&self, classes: impl IntoIterator<Item = u32>) -> PqSummary {
        let mut pq = 0.0;
        let mut rq = 0.0;
        let mut sq = 0.0;
        let mut n = 0usize;
        for class in classes {
            let stats = self.class(class);
            if stats.is_empty() {
                continue;
            }
            pq += stats.pq();
            rq += stats.rq();
            sq += stats.sq();
            n += 1;
        }
        if n == 0 {
            PqSummary {
                pq: 0.0,
                rq: 0.0,
                sq: 0.0,
                classes: 0,
            }
        } else {
            PqSummary {
                pq: pq / n as f64,
                rq: rq / n as f64,
                sq: sq / n as f64,
                classes: n,
            }
        }
    }

    /// All class ids present in the stats.
    pub fn classes(&self) -> Vec<u32> {
        self.per_class.keys().copied().collect()
    }
}

/// Match predicted segments against ground truth and accumulate per-class
/// statistics.
pub fn match_and_score(pred: &PanopticMap, gt: &PanopticMap) -> Result<PqStats, PanopticError> {
    if pred.width != gt.width || pred.height != gt.height {
        return Err(PanopticError::DimensionMismatch {
            left_w: pred.width,
            left_h: pred.height,
            right_w: gt.width,
            right_h: gt.height,
        });
    }

    let pred_areas = pred.segment_areas();
    let gt_areas = gt.segment_areas();

    // Pairwise intersections in one pass; None encodes void.
    type Key = Option<(u32, u32)>;
    let mut intersections: BTreeMap<(Key, Key), u64> = BTreeMap::new();
    for (p, g) in pred.cells.iter().zip(&gt.cells) {
        let pk = (p.0 != VOID_CLASS).then_some(*p);
        let gk = (g.0 != VOID_CLASS).then_some(*g);
        *intersections.entry((pk, gk)).or_insert(0) += 1;
    }

    let void_overlap = |seg: (u32, u32)| -> u64 {
        intersections
            .get(&(Some(seg), None))
            .copied()
            .unwrap_or(0)
    };

    let mut stats = PqStats::default();
    let mut pred_matched: BTreeMap<(u32, u32), bool> =
        pred_areas.keys().map(|k| (*k, false)).collect();
    let mut gt_matched: BTreeMap<(u32, u32), bool> = gt_areas.keys().map(|k| (*k, false)).collect();

    for ((pk, gk), inter) in &intersections {
        let (Some(pseg), Some(gseg)) = (pk, gk) else {
            continue;
        };
        if pseg.0 != gseg.0 {
            continue;
        }
        // Ground-truth void under this prediction leaves the denominator.
        let union =
            pred_areas[pseg] + gt_areas[gseg] - inter - void_overlap(*pseg);
        let iou = *inter as f64 / union as f64;
        if iou > 0.5 {
            let entry = stats.per_class.entry(pseg.0).or_default();
            entry.true_positives += 1;
            entry.iou_sum += iou;
            pred_matched.insert(*pseg, true);
            gt_matched.insert(*gseg, true);
        }
    }

    for (seg, matched) in &gt_matched {
        if !matched {
            stats.per_class.entry(seg.0).or_default().false_negatives += 1;
        }
    }
    for (seg, matched) in &pred_matched {
        if *matched {
            continue;
        }
        // Mostly-void predictions are ignored rather than penalized.
        if void_overlap(*seg) as f64 > 0.5 * pred_areas[seg] as f64 {
            continue;
        }
        stats.per_class.entry(seg.0).or_default().false_positives += 1;
    }

    Ok(stats)
}

/// Open-world report: known-class and unknown-class summaries, plus the
/// closed-to-open PQ drop when a paired closed-world run is supplied.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OpenWorldReport {
    pub known: PqSummary,
    pub unknown: PqSummary,
    /// TP + FP + FN of the unknown class; 0 flags an all-zero unknown row.
    pub unknown_segments: u64,
    /// `PQ_closed - PQ_open` over known classes.
    pub delta_pq: Option<f64>,
}

pub fn open_world_report(
    open: &PqStats,
    known_classes: &[u32],
    unknown_class: u32,
    closed: Option<&PqStats>,
) -> OpenWorldReport {
    let known = open.averaged(known_classes.iter().copied());
    let unknown = open.averaged([unknown_class]);
    let u = open.class(unknown_class);
    OpenWorldReport {
        known,
        unknown,
        unknown_segments: u.true_positives + u.false_positives + u.false_negatives,
        delta_pq: closed.map(|c| c.averaged(known_classes.iter().copied()).pq - known.pq),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Paint `len` pixels starting at `start` (row-major) on a fresh map.
    fn strip_map(size: usize, runs: &[(usize, usize, u32, u32)]) -> PanopticMap {
        let mut m = PanopticMap::filled_void(size, 1);
        for (start, len, class, inst) in runs {
            m.paint_run(*start, *len, *class, *inst).unwrap();
        }
        m
    }

    #[test]
    fn identical_maps_score_one() {
        let gt = strip_map(100, &[(0, 40, 1, 1), (40, 60, 2, 1)]);
        let stats = match_and_score(&gt, &gt).unwrap();
        for class in [1, 2] {
            let s = stats.class(class);
            assert_eq!(s.true_positives, 1);
            assert_eq!(s.false_positives, 0);
            assert_eq!(s.false_negatives, 0);
            assert!((s.pq() - 1.0).abs() < 1e-12);
            assert!((s.rq() - 1.0).abs() < 1e-12);
            assert!((s.sq() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn sixty_percent_overlap_hand_example() {
        // GT segment of 100 px; prediction covers 60 of them and nothing
        // else: IoU = 60/100 = 0.6, a match. PQ = 0.6, RQ = 1, SQ = 0.6.
        let gt = strip_map(120, &[(0, 100, 7, 1)]);
        let pred = strip_map(120, &[(0, 60, 7, 1)]);
        let stats = match_and_score(&pred, &gt).unwrap();
        let s = stats.class(7);
        assert_eq!(
            (s.true_positives, s.false_positives, s.false_negatives),
            (1, 0, 0)
        );
        assert!((s.pq() - 0.6).abs() < 1e-12);
        assert!((s.rq() - 1.0).abs() < 1e-12);
        assert!((s.sq() - 0.6).abs() < 1e-12);
        // PQ = RQ * SQ when TP > 0.
        assert!((s.pq() - s.rq() * s.sq()).abs() < 1e-12);
    }

    #[test]
    fn exact_half_iou_is_not_a_match() {
        // Prediction covers 50 of 100 GT pixels and nothing else: IoU is
        // exactly 0.5, which the strict inequality rejects: FP plus FN.
        let gt = strip_map(120, &[(0, 100, 3, 1)]);
        let pred = strip_map(120, &[(0, 50, 3, 1)]);
        let stats = match_and_score(&pred, &gt).unwrap();
        let s = stats.class(3);
        assert_eq!(
            (s.true_positives, s.false_positives, s.false_negatives),
            (0, 1, 1)
        );
        assert_eq!(s.pq(), 0.0);
    }

    #[test]
    fn void_overlap_excluded_from_union_and_fp() {
        // 40 GT px of class 1, then void; a 80-px prediction covering all 40
        // plus 40 void px has union 80 - 40(void) = 40... IoU = 40/40 = 1.
        let mut gt = PanopticMap::filled_void(100, 1);
        gt.paint_run(0, 40, 1, 1).unwrap();
        let pred = strip_map(100, &[(0, 80, 1, 1)]);
        let stats = match_and_score(&pred, &gt).unwrap();
        let s = stats.class(1);
        assert_eq!(s.true_positives, 1);
        assert!((s.iou_sum - 1.0).abs() < 1e-12);

        // A prediction sitting mostly (> 50%) on void is not an FP.
        let mut gt2 = PanopticMap::filled_void(100, 1);
        gt2.paint_run(0, 10, 2, 1).unwrap();
        let pred2 = strip_map(100, &[(20, 60, 9, 1)]);
        let stats2 = match_and_score(&pred2, &gt2).unwrap();
        assert!(stats2.class(9).is_empty());
        // Exactly 50% void: counted as FP (strict >).
        let mut gt3 = PanopticMap::filled_void(100, 1);
        gt3.paint_run(0, 30, 2, 1).unwrap();
        let pred3 = strip_map(100, &[(10, 40, 9, 1)]); // 20 on class 2, 20 on void
        let stats3 = match_and_score(&pred3, &gt3).unwrap();
        assert_eq!(stats3.class(9).false_positives, 1);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let a = PanopticMap::filled_void(10, 10);
        let b = PanopticMap::filled_void(10, 9);
        assert!(matches!(
            match_and_score(&a, &b),
            Err(PanopticError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn paint_run_validates() {
        let mut m = PanopticMap::filled_void(10, 1);
        assert!(matches!(
            m.paint_run(8, 5, 1, 1),
            Err(PanopticError::RunOutOfBounds { .. })
        ));
        m.paint_run(0, 5, 1, 1).unwrap();
        assert!(matches!(
            m.paint_run(4, 2, 2, 1),
            Err(PanopticError::OverlappingRun { .. })
        ));
    }

    #[test]
    fn aggregation_is_order_independent_and_additive() {
        let gt1 = strip_map(60, &[(0, 30, 1, 1)]);
        let pred1 = strip_map(60, &[(0, 24, 1, 1)]);
        let gt2 = strip_map(60, &[(0, 30, 1, 4), (30, 20, 2, 1)]);
        let pred2 = strip_map(60, &[(5, 25, 1, 9)]);
        let s1 = match_and_score(&pred1, &gt1).unwrap();
        let s2 = match_and_score(&pred2, &gt2).unwrap();
        let mut ab = s1.clone();
        ab.merge(&s2);
        let mut ba = s2.clone();
        ba.merge(&s1);
        assert_eq!(ab, ba);
        // Single-image aggregation equals the per-image stats.
        let mut single = PqStats::default();
        single.merge(&s1);
        assert_eq!(single, s1);
        // Class 1 counts added across images.
        assert_eq!(
            ab.class(1).true_positives,
            s1.class(1).true_positives + s2.class(1).true_positives
        );
    }

    #[test]
    fn open_world_report_rows() {
        let gt = strip_map(100, &[(0, 40, 1, 1), (40, 40, 2, 1)]);
        let pred = strip_map(100, &[(0, 40, 1, 1), (40, 40, 2, 1)]);
        let stats = match_and_score(&pred, &gt).unwrap();
        // No unknown segments anywhere: zeros with a zero count annotation.
        let report = open_world_report(&stats, &[1, 2], 99, None);
        assert_eq!(report.unknown_segments, 0);
        assert_eq!(report.unknown.pq, 0.0);
        assert_eq!(report.unknown.classes, 0);
        assert!((report.known.pq - 1.0).abs() < 1e-12);
        assert_eq!(report.delta_pq, None);

        // Identical closed and open runs: delta PQ = 0.
        let report = open_world_report(&stats, &[1, 2], 99, Some(&stats));
        assert_eq!(report.delta_pq, Some(0.0));
    }

    #[test]
    fn sq_above_half_when_matched() {
        // Matched IoU is > 0.5 by construction, so SQ lands in (0.5, 1].
        let gt = strip_map(100, &[(0, 90, 5, 1)]);
        let pred = strip_map(100, &[(0, 50, 5, 1)]);
        let stats = match_and_score(&pred, &gt).unwrap();
        let s = stats.class(5);
        if s.true_positives > 0 {
            assert!(s.sq() > 0.5 && s.sq() <= 1.0);
        }
        // PQ always within [0, 1].
        assert!(s.pq() >= 0.0 && s.pq() <= 1.0);
    }
}
