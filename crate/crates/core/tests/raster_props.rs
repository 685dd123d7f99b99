use std::fs;

use lulc_core::io::{raster_paths, read_raster, write_raster};
use lulc_core::raster::rasterize_polygon_with;
use lulc_core::{rasterize_polygon, GeoTransform, RasterData, RasterGrid, RegionPolygon, Workers};
use proptest::prelude::*;

fn cfg(cases: u32) -> ProptestConfig {
    ProptestConfig {
        cases,
        ..ProptestConfig::default()
    }
}

fn data_strategy(n: usize) -> impl Strategy<Value = RasterData> {
    prop_oneof![
        proptest::collection::vec(any::<u8>(), n).prop_map(RasterData::U8),
        proptest::collection::vec(any::<u16>(), n).prop_map(RasterData::U16),
        proptest::collection::vec(-1.0e6f32..1.0e6, n).prop_map(RasterData::F32),
    ]
}

fn grid_strategy() -> impl Strategy<Value = RasterGrid> {
    (
        1usize..7,
        1usize..7,
        1usize..4,
        -1.0e6..1.0e6f64,
        -1.0e6..1.0e6f64,
        0.5..60.0f64,
    )
        .prop_flat_map(|(w, h, b, ox, oy, px)| (Just((w, h, b, ox, oy, px)), data_strategy(w * h * b), any::<bool>()))
        .prop_map(|((w, h, b, ox, oy, px), data, with_nodata)| {
            let nodata = with_nodata.then_some(0.0);
            let names = (0..b).map(|i| format!("band_{i}")).collect();
            RasterGrid::with_metadata(
                w,
                h,
                b,
                nodata,
                GeoTransform::north_up(ox, oy, px, -px),
                "EPSG:32640",
                names,
                data,
            )
            .unwrap()
        })
}

proptest! {
    #![proptest_config(cfg(1000))]

    #[test]
    fn raster_round_trip_is_byte_identical(grid in grid_strategy()) {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("a");
        let b = dir.path().join("b");
        write_raster(&grid, &a).unwrap();
        let back = read_raster(&a).unwrap();
        prop_assert_eq!(&back, &grid);
        write_raster(&back, &b).unwrap();
        let (ha, da) = raster_paths(&a);
        let (hb, db) = raster_paths(&b);
        prop_assert_eq!(fs::read(ha).unwrap(), fs::read(hb).unwrap());
        prop_assert_eq!(fs::read(da).unwrap(), fs::read(db).unwrap());
    }

    #[test]
    fn pixel_center_round_trips(
        ox in -1.0e6..1.0e6f64,
        oy in -1.0e6..1.0e6f64,
        pw in 0.5..100.0f64,
        ph in 0.5..100.0f64,
        flip_w in any::<bool>(),
        flip_h in any::<bool>(),
        rot in (-0.3..0.3f64, -0.3..0.3f64),
        col in 0usize..50,
        row in 0usize..50,
    ) {
        let pw = if flip_w { -pw } else { pw };
        let ph = if flip_h { -ph } else { ph };
        let gt = GeoTransform::from_array([ox, pw, rot.0 * pw.abs(), oy, rot.1 * ph.abs(), ph]);
        prop_assume!(gt.determinant().abs() > 0.05 * (pw * ph).abs());
        let g = RasterGrid::new(50, 50, 1, gt, "c", RasterData::U8(vec![0; 2500])).unwrap();
        let (x, y) = g.pixel_to_map(col as i64, row as i64).unwrap();
        prop_assert_eq!(g.map_to_pixel(x, y).unwrap(), Some((col, row)));
    }
}

fn ring(points: &[(f64, f64)]) -> Vec<[f64; 2]> {
    let mut r: Vec<[f64; 2]> = points.iter().map(|&(x, y)| [x, y]).collect();
    r.push(r[0]);
    r
}

fn brute_mask(poly: &RegionPolygon, grid: &RasterGrid) -> Vec<bool> {
    let gt = grid.geotransform();
    (0..grid.pixel_count())
        .map(|i| {
            let (x, y) = gt.apply((i % grid.width()) as f64 + 0.5, (i / grid.width()) as f64 + 0.5);
            poly.contains(x, y)
        })
        .collect()
}

fn test_grid(w: usize, h: usize, gt: GeoTransform) -> RasterGrid {
    RasterGrid::new(w, h, 1, gt, "c", RasterData::U8(vec![0; w * h])).unwrap()
}

fn vertex() -> impl Strategy<Value = (f64, f64)> {
    // extent of the 24x18 test grid is x 0..240, y -180..0; polygons may spill over
    (-40.0..280.0f64, -220.0..40.0f64)
}

proptest! {
    #![proptest_config(cfg(1000))]

    #[test]
    fn scanline_matches_point_in_polygon(
        verts in proptest::collection::vec(vertex(), 3..9),
        snap in any::<bool>(),
    ) {
        // snapping vertices to the 5 m lattice puts many edges exactly on pixel centers
        let verts: Vec<(f64, f64)> = if snap {
            verts.iter().map(|&(x, y)| ((x / 5.0).round() * 5.0, (y / 5.0).round() * 5.0)).collect()
        } else {
            verts
        };
        let poly = RegionPolygon::new("p", "P", vec![ring(&verts)]).unwrap();
        let grid = test_grid(24, 18, GeoTransform::north_up(0.0, 0.0, 10.0, -10.0));
        let expect = brute_mask(&poly, &grid);
        prop_assert_eq!(rasterize_polygon(&poly, &grid).unwrap(), expect.clone());
        prop_assert_eq!(rasterize_polygon_with(&poly, &grid, Workers::Auto).unwrap(), expect);
    }

    #[test]
    fn hole_is_subtracted(
        x0 in 0.0..100.0f64,
        y0 in -170.0..-100.0f64,
        hole in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 3..7),
    ) {
        let (x1, y1) = (x0 + 120.0, y0 + 90.0);
        let outer = ring(&[(x0, y0), (x1, y0), (x1, y1), (x0, y1)]);
        let inner: Vec<(f64, f64)> = hole
            .iter()
            .map(|&(u, v)| (x0 + 1.0 + u * 118.0, y0 + 1.0 + v * 88.0))
            .collect();
        let inner = ring(&inner);
        let grid = test_grid(24, 18, GeoTransform::north_up(0.0, 0.0, 10.0, -10.0));
        let with_hole = rasterize_polygon(&RegionPolygon::new("a", "A", vec![outer.clone(), inner.clone()]).unwrap(), &grid).unwrap();
        let outer_only = rasterize_polygon(&RegionPolygon::new("o", "O", vec![outer]).unwrap(), &grid).unwrap();
        let hole_only = rasterize_polygon(&RegionPolygon::new("h", "H", vec![inner]).unwrap(), &grid).unwrap();
        for i in 0..grid.pixel_count() {
            prop_assert_eq!(with_hole[i], outer_only[i] && !hole_only[i], "pixel {}", i);
        }
    }

    #[test]
    fn rotated_and_flipped_grids_match_point_in_polygon(
        verts in proptest::collection::vec(vertex(), 3..7),
        rot in -2.0..2.0f64,
        flip in any::<bool>(),
    ) {
        let pw = if flip { -10.0 } else { 10.0 };
        let ox = if flip { 240.0 } else { 0.0 };
        let gt = GeoTransform::from_array([ox, pw, rot, 0.0, rot, -10.0]);
        let grid = test_grid(24, 18, gt);
        let poly = RegionPolygon::new("p", "P", vec![ring(&verts)]).unwrap();
        prop_assert_eq!(rasterize_polygon(&poly, &grid).unwrap(), brute_mask(&poly, &grid));
    }
}

#[test]
fn rasterize_large_extent_stays_exact() {
    // georeferenced origin: crossings far from zero
    let gt = GeoTransform::north_up(500_000.0, 2_600_000.0, 10.0, -10.0);
    let grid = test_grid(400, 300, gt);
    let poly = RegionPolygon::new(
        "m",
        "Muscat",
        vec![ring(&[
            (500_123.4, 2_597_001.0),
            (503_777.7, 2_598_500.0),
            (502_000.0, 2_599_950.0),
            (500_010.0, 2_599_000.0),
        ])],
    )
    .unwrap();
    let mask = rasterize_polygon(&poly, &grid).unwrap();
    assert_eq!(mask, brute_mask(&poly, &grid));
    assert!(mask.iter().filter(|&&m| m).count() > 10_000);
}
