use std::collections::BTreeSet;

use proptest::prelude::*;

use canopy_delta::annotations::{split_dataset, InstanceMask};
use canopy_delta::changedet::{match_epochs, verdict_counts, MatchCriterion, MatchOptions, MatchStrategy};
use canopy_delta::detections::{assemble_scene, TileFrame, TreeInstance};
use canopy_delta::geometry::Point;
use canopy_delta::metrics::{
    average_precision, evaluate, iou_box, iou_mask, BoxXywh, EvalConfig, EvalImage, GroundTruth, Interpolation,
    PrCurve, Prediction,
};
use canopy_delta::raster::{
    lonlat_to_tile, plan_tiles, stretch_to_8bit, tile_bounds, Crs, GeoTransform, SampleType, SceneDescriptor,
    TileIndex, TILE_SIZE,
};
use canopy_delta::training::{box_loss, BoxCoefficients, BoxLossForm, BoxLossParams};

fn pip(ring: &[Point], x: f64, y: f64) -> bool {
    let mut inside = false;
    for i in 0..ring.len() {
        let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
        if (a[1] > y) != (b[1] > y) && x < a[0] + (y - a[1]) * (b[0] - a[0]) / (b[1] - a[1]) {
            inside = !inside;
        }
    }
    inside
}

fn ring_strategy(lo: f64, hi: f64) -> impl Strategy<Value = Vec<Point>> {
    prop::collection::vec([lo..hi, lo..hi], 3..=12)
}

fn box_strategy() -> impl Strategy<Value = BoxXywh> {
    (0.0..100.0, 0.0..100.0, 0.5..40.0, 0.5..40.0).prop_map(|(x, y, w, h)| BoxXywh::new(x, y, w, h))
}

const UTM43: Crs = Crs::Utm { zone: 43, north: true };

fn square(id: String, epoch: &str, c: Point, half: f64) -> TreeInstance {
    let (x, y) = (350_000.0 + c[0], 2_546_000.0 + c[1]);
    let ring = [[x - half, y - half], [x + half, y - half], [x + half, y + half], [x - half, y + half]];
    TreeInstance::from_projected(id, "tree", &ring, UTM43, 0.9, epoch, vec![]).unwrap()
}

fn trees(epoch: &'static str, pts: Vec<Point>) -> Vec<TreeInstance> {
    pts.into_iter().enumerate().map(|(i, c)| square(format!("{epoch}-{i}"), epoch, c, 0.5)).collect()
}

fn opts(max_dist: f64, strategy: MatchStrategy) -> MatchOptions {
    MatchOptions { max_dist, strategy, criterion: MatchCriterion::Centroid }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    // ---- raster geometry

    #[test]
    fn point_lies_in_its_tile(lon in -180.0..180.0f64, lat in -85.05..85.05f64, z in 0u8..=19) {
        let t = lonlat_to_tile(lon, lat, z).unwrap();
        prop_assert!(t.x < 1 << z && t.y < 1 << z);
        prop_assert!(tile_bounds(t).contains(lon, lat, 1e-9));
    }

    #[test]
    fn neighbouring_tiles_share_edges(z in 1u8..=19, fx in 0.0..1.0f64, fy in 0.0..1.0f64) {
        let n = 1u32 << z;
        let x = ((fx * (n - 1) as f64) as u32).min(n - 2);
        let y = ((fy * (n - 1) as f64) as u32).min(n - 2);
        let here = tile_bounds(TileIndex::new(z, x, y).unwrap());
        let right = tile_bounds(TileIndex::new(z, x + 1, y).unwrap());
        let below = tile_bounds(TileIndex::new(z, x, y + 1).unwrap());
        prop_assert_eq!(here.east, right.west);
        prop_assert_eq!(here.south, below.north);
    }

    #[test]
    fn planned_tiles_are_unique(lon in 72.0..73.0f64, lat in 22.0..24.0f64, w in 1usize..1500, h in 1usize..1500, gsd in 0.3..1.0f64) {
        let o = Crs::Utm { zone: 43, north: true }.from_lonlat(lon, lat);
        let desc = SceneDescriptor {
            width: w,
            height: h,
            band_count: 1,
            sample_type: SampleType::U16,
            transform: GeoTransform::north_up(o[0], o[1], gsd, 32643).unwrap(),
            acquisition_date: "2018-03-02".into(),
            nominal_gsd: gsd,
        };
        let tiles = plan_tiles(&desc, 18).unwrap();
        let unique: BTreeSet<_> = tiles.iter().collect();
        prop_assert!(!tiles.is_empty());
        prop_assert_eq!(unique.len(), tiles.len());
    }

    #[test]
    fn pixel_geo_round_trip(
        ox in -1e6..1e6f64, oy in -1e6..1e6f64,
        pw in 0.1..10.0f64, ph in 0.1..10.0f64,
        rr in -0.5..0.5f64, cr in -0.5..0.5f64,
        col in -1000.0..20000.0f64, row in -1000.0..20000.0f64,
    ) {
        let gt = GeoTransform {
            origin_x: ox, pixel_width: pw, row_rotation: rr,
            origin_y: oy, col_rotation: cr, pixel_height: -ph, epsg: 32643,
        };
        prop_assume!((pw * -ph - rr * cr).abs() > 1e-3);
        let [x, y] = gt.pixel_to_geo(col, row);
        let [c, r] = gt.geo_to_pixel(x, y).unwrap();
        prop_assert!((c - col).abs() < 1e-6 && (r - row).abs() < 1e-6);
    }

    #[test]
    fn stretch_is_monotone(samples in prop::collection::vec(any::<u16>(), 2..300), lo in 0.0..40.0f64, hi in 60.0..100.0f64) {
        let mut sorted = samples.clone();
        sorted.sort_unstable();
        let out = stretch_to_8bit(&sorted, lo, hi).unwrap();
        prop_assert!(out.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn georeference_hits_tile_corners(lon in -179.0..179.0f64, lat in -80.0..80.0f64, z in 10u8..=19) {
        let t = lonlat_to_tile(lon, lat, z).unwrap();
        let b = tile_bounds(t);
        let frame = TileFrame::from_tile(t, Crs::utm_for(lon, lat).epsg()).unwrap();
        let s = TILE_SIZE as f64;
        for (col, row, want) in [(0.0, 0.0, [b.west, b.north]), (s, s, [b.east, b.south]), (s, 0.0, [b.east, b.north])] {
            let got = frame.pixel_to_lonlat(col, row);
            prop_assert!((got[0] - want[0]).abs() < 1e-9 && (got[1] - want[1]).abs() < 1e-9);
        }
    }

    // ---- masks

    #[test]
    fn mask_matches_point_in_polygon(ring in ring_strategy(-4.0, 36.0)) {
        let m = InstanceMask::rasterize(&ring, 32, 32, "img");
        for r in 0..32 {
            for c in 0..32 {
                prop_assert_eq!(m.get(c, r), pip(&ring, c as f64 + 0.5, r as f64 + 0.5));
            }
        }
    }

    #[test]
    fn mask_translates_with_polygon(ring in ring_strategy(0.0, 30.0), dx in -8i32..8, dy in -8i32..8) {
        let moved: Vec<Point> = ring.iter().map(|p| [p[0] + dx as f64, p[1] + dy as f64]).collect();
        let a = InstanceMask::rasterize(&ring, 40, 40, "a");
        let b = InstanceMask::rasterize(&moved, 40, 40, "b");
        for r in 0..40i32 {
            for c in 0..40i32 {
                let (c2, r2) = (c + dx, r + dy);
                if (0..40).contains(&c2) && (0..40).contains(&r2) {
                    prop_assert_eq!(a.get(c as usize, r as usize), b.get(c2 as usize, r2 as usize));
                }
            }
        }
    }

    // ---- metrics

    #[test]
    fn box_iou_symmetric_and_bounded(a in box_strategy(), b in box_strategy()) {
        let ab = iou_box(&a, &b).unwrap();
        prop_assert_eq!(ab, iou_box(&b, &a).unwrap());
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert!((iou_box(&a, &a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn mask_iou_equals_box_iou_for_rectangles(a in (0usize..30, 0usize..30, 1usize..20, 1usize..20), b in (0usize..30, 0usize..30, 1usize..20, 1usize..20)) {
        let rect = |(x, y, w, h): (usize, usize, usize, usize)| {
            (InstanceMask::from_fn(64, 64, "i", move |c, r| c >= x && c < x + w && r >= y && r < y + h),
             BoxXywh::new(x as f64, y as f64, w as f64, h as f64))
        };
        let ((ma, ba), (mb, bb)) = (rect(a), rect(b));
        let im = iou_mask(&ma, &mb).unwrap();
        prop_assert_eq!(im, iou_mask(&mb, &ma).unwrap());
        prop_assert_eq!(im, iou_box(&ba, &bb).unwrap());
    }

    #[test]
    fn ap_monotone_in_extra_detections(outcomes in prop::collection::vec((0.01..0.99f64, any::<bool>()), 0..25), extra_gt in 0usize..5) {
        let num_gt = outcomes.iter().filter(|o| o.1).count() + extra_gt;
        prop_assume!(num_gt > 0);
        let ap = |o: &[(f64, bool)], g: usize| {
            average_precision(&PrCurve::from_outcomes(o, g, 0.5), Interpolation::Coco101).unwrap()
        };
        let base = ap(&outcomes, num_gt);
        prop_assert!((0.0..=1.0).contains(&base));
        if extra_gt > 0 {
            // A new top-scored detection that claims one of the unmatched truths.
            let mut top = outcomes.clone();
            top.push((1.0, true));
            prop_assert!(ap(&top, num_gt) >= base - 1e-12);
        }
        let mut bottom = outcomes.clone();
        bottom.push((0.0, false));
        prop_assert!(ap(&bottom, num_gt) <= base + 1e-12);
    }

    #[test]
    fn strict_threshold_never_scores_higher(gts in prop::collection::vec(box_strategy(), 1..8), preds in prop::collection::vec((box_strategy(), 0.0..1.0f64), 0..12), jitter in prop::collection::vec((-3.0..3.0f64, -3.0..3.0f64), 12)) {
        // Half the predictions are perturbed copies of ground truth.
        let predictions = preds.iter().enumerate().map(|(i, (b, s))| {
            let bbox = if i % 2 == 0 {
                let g = gts[i % gts.len()];
                BoxXywh::new(g.x + jitter[i].0, g.y + jitter[i].1, g.w, g.h)
            } else { *b };
            Prediction { class: "tree".into(), score: *s, bbox, mask: None }
        }).collect();
        let image = EvalImage {
            image_id: "i".into(),
            ground_truth: gts.iter().map(|b| GroundTruth { class: "tree".into(), bbox: *b, mask: None }).collect(),
            predictions,
        };
        let cfg = EvalConfig { thresholds: vec![0.5, 0.95], interpolation: Interpolation::Coco101 };
        let s = evaluate(&[image], &cfg).unwrap();
        let per = &s.box_metrics.per_threshold;
        prop_assert!(per[1].map.unwrap() <= per[0].map.unwrap() + 1e-12);
    }

    // ---- training math

    #[test]
    fn box_loss_nonnegative_and_permutation_invariant(
        cells in prop::collection::vec((any::<bool>(), prop::array::uniform4(-3.0..3.0f64), prop::array::uniform4(-3.0..3.0f64)), 8),
        smooth in any::<bool>(),
        rot in 0usize..8,
    ) {
        let params = |resp: Vec<bool>| BoxLossParams {
            grid_size: 2, anchors_per_cell: 2, responsible: resp,
            coefficients: BoxCoefficients { coord: 5.0, ..Default::default() },
            form: if smooth { BoxLossForm::SmoothL1 } else { BoxLossForm::Squared },
        };
        let resp: Vec<bool> = cells.iter().map(|c| c.0).collect();
        let pred: Vec<[f64; 4]> = cells.iter().map(|c| c.1).collect();
        let target: Vec<[f64; 4]> = cells.iter().map(|c| c.2).collect();
        let l = box_loss(&params(resp.clone()), &pred, &target).unwrap();
        prop_assert!(l >= 0.0);
        prop_assert_eq!(box_loss(&params(resp.clone()), &pred, &pred).unwrap(), 0.0);

        fn rotate<T: Clone>(v: &[T], k: usize) -> Vec<T> {
            let mut v = v.to_vec();
            v.rotate_left(k);
            v
        }
        let lr = box_loss(&params(rotate(&resp, rot)), &rotate(&pred, rot), &rotate(&target, rot)).unwrap();
        prop_assert!((lr - l).abs() <= 1e-12 * l.max(1e-300));
    }

    // ---- split

    #[test]
    fn split_partitions(n in 1usize..200, seed in any::<u64>()) {
        let ids: Vec<String> = (0..n).map(|i| format!("18/{i}/{}", i * 7 % 13)).collect();
        let s = split_dataset(&ids, (0.7, 0.2, 0.1), seed).unwrap();
        let all: BTreeSet<&String> = s.train.iter().chain(&s.val).chain(&s.test).collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), n);
        prop_assert_eq!(&s, &split_dataset(&ids, (0.7, 0.2, 0.1), seed).unwrap());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    // ---- deduplication

    #[test]
    fn dedupe_is_idempotent_and_monotone(
        boxes in prop::collection::vec(([0.0..20.0f64, 0.0..20.0f64], 0.5..2.5f64), 1..14),
        t_lo in 0.1..0.5f64, dt in 0.0..0.5f64,
    ) {
        let inst: Vec<TreeInstance> = boxes.iter().enumerate()
            .map(|(i, (c, h))| square(format!("e:18/1/1:{i}"), "e", *c, *h)).collect();
        let once = assemble_scene(&inst, t_lo).unwrap();
        let twice = assemble_scene(&once, t_lo).unwrap();
        prop_assert_eq!(&once, &twice);
        let strict = assemble_scene(&inst, t_lo + dt).unwrap();
        prop_assert!(once.len() <= strict.len());
    }

    // ---- change detection

    #[test]
    fn change_conserves_and_swaps(
        a in prop::collection::vec([0.0..15.0f64, 0.0..15.0f64], 0..15),
        b in prop::collection::vec([0.0..15.0f64, 0.0..15.0f64], 0..15),
        d1 in 0.2..3.0f64, dd in 0.0..3.0f64,
    ) {
        let (ea, lb) = (trees("2011", a.clone()), trees("2018", b.clone()));
        for strategy in [MatchStrategy::Greedy, MatchStrategy::Optimal] {
            let fwd = verdict_counts(&match_epochs(&ea, &lb, &opts(d1, strategy)).unwrap());
            prop_assert_eq!(fwd.persisted + fwd.lost, a.len());
            prop_assert_eq!(fwd.persisted + fwd.gained, b.len());
            if strategy == MatchStrategy::Greedy {
                let (la, eb) = (trees("2018", a.clone()), trees("2011", b.clone()));
                let back = verdict_counts(&match_epochs(&eb, &la, &opts(d1, strategy)).unwrap());
                prop_assert_eq!(back.persisted, fwd.persisted);
                prop_assert_eq!(back.gained, fwd.lost);
                prop_assert_eq!(back.lost, fwd.gained);
            }
        }
        let near = verdict_counts(&match_epochs(&ea, &lb, &opts(d1, MatchStrategy::Optimal)).unwrap());
        let far = verdict_counts(&match_epochs(&ea, &lb, &opts(d1 + dd, MatchStrategy::Optimal)).unwrap());
        prop_assert!(far.persisted >= near.persisted);
    }
}
