use crate::projection::Conic2D;

/// Screen tiles with the ids of the particles overlapping each one.
#[derive(Clone, Debug, PartialEq)]
pub struct TileGrid {
    tile_size: usize,
    width: usize,
    height: usize,
    tiles_x: usize,
    tiles_y: usize,
    lists: Vec<Vec<u32>>,
}

impl TileGrid {
    /// Empty grid covering a `width × height` image.
    pub fn new(width: usize, height: usize, tile_size: usize) -> Self {
        let tile_size = tile_size.max(1);
        let tiles_x = width.div_ceil(tile_size);
        let tiles_y = height.div_ceil(tile_size);
        Self {
            tile_size,
            width,
            height,
            tiles_x,
            tiles_y,
            lists: vec![Vec::new(); tiles_x * tiles_y],
        }
    }

    pub fn tile_size(&self) -> usize {
        self.tile_size
    }

    pub fn tiles_x(&self) -> usize {
        self.tiles_x
    }

    pub fn tiles_y(&self) -> usize {
        self.tiles_y
    }

    pub fn tile_count(&self) -> usize {
        self.lists.len()
    }

    pub fn list(&self, tile: usize) -> &[u32] {
        &self.lists[tile]
    }

    pub fn list_at(&self, tx: usize, ty: usize) -> &[u32] {
        &self.lists[ty * self.tiles_x + tx]
    }

    pub fn lists(&self) -> &[Vec<u32>] {
        &self.lists
    }

    /// Pixel coordinates covered by `tile`, clipped to the image.
    pub fn tile_pixels(&self, tile: usize) -> impl Iterator<Item = (usize, usize)> {
        let (tx, ty) = (tile % self.tiles_x, tile / self.tiles_x);
        let x0 = tx * self.tile_size;
        let y0 = ty * self.tile_size;
        let x1 = (x0 + self.tile_size).min(self.width);
        let y1 = (y0 + self.tile_size).min(self.height);
        (y0..y1).flat_map(move |y| (x0..x1).map(move |x| (x, y)))
    }

    /// Half-open tile ranges overlapped by the square of half-width `radius`
    /// around `center`, or `None` when it misses the image.
    fn tile_range(&self, center: (f64, f64), radius: f64) -> Option<((usize, usize), (usize, usize))> {
        let ts = self.tile_size as f64;
        let span = |c: f64, n: usize| {
            let lo = ((c - radius) / ts).floor().max(0.0);
            let hi = ((c + radius) / ts).ceil().min(n as f64);
            (lo < hi).then_some((lo as usize, hi as usize))
        };
        Some((span(center.0, self.tiles_x)?, span(center.1, self.tiles_y)?))
    }
}

/// Appends every particle with a valid conic and positive extent to each tile
/// its extent square overlaps, then orders each tile by `(depth_key, id)`.
pub fn bin_particles(conics: &[Conic2D], extents: &[f64], depth_keys: &[f64], mut grid: TileGrid) -> TileGrid {
    assert_eq!(conics.len(), extents.len(), "conics and extents must align");
    assert_eq!(conics.len(), depth_keys.len(), "conics and depth keys must align");
    for (id, (conic, &radius)) in conics.iter().zip(extents).enumerate() {
        if !conic.valid || !(radius > 0.0) || !radius.is_finite() {
            continue;
        }
        let Some(((x0, x1), (y0, y1))) = grid.tile_range((conic.mean.x, conic.mean.y), radius) else {
            continue;
        };
        for ty in y0..y1 {
            for tx in x0..x1 {
                let t = ty * grid.tiles_x + tx;
                grid.lists[t].push(id as u32);
            }
        }
    }
    for list in &mut grid.lists {
        list.sort_by(|&a, &b| {
            depth_keys[a as usize]
                .total_cmp(&depth_keys[b as usize])
                .then(a.cmp(&b))
        });
    }
    grid
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};
    use proptest::prelude::*;

    fn conic(x: f64, y: f64) -> Conic2D {
        Conic2D::new(Vector2::new(x, y), Matrix2::identity())
    }

    fn occupied(grid: &TileGrid, id: u32) -> usize {
        grid.lists().iter().filter(|l| l.contains(&id)).count()
    }

    #[test]
    fn centered_in_one_tile() {
        let grid = bin_particles(&[conic(24.0, 24.0)], &[5.0], &[1.0], TileGrid::new(64, 64, 16));
        assert_eq!(occupied(&grid, 0), 1);
        assert_eq!(grid.list_at(1, 1), &[0]);
    }

    #[test]
    fn tile_corner_touches_four() {
        let grid = bin_particles(&[conic(32.0, 16.0)], &[1.0], &[1.0], TileGrid::new(64, 64, 16));
        assert_eq!(occupied(&grid, 0), 4);
        for (tx, ty) in [(1, 0), (2, 0), (1, 1), (2, 1)] {
            assert_eq!(grid.list_at(tx, ty), &[0]);
        }
    }

    #[test]
    fn invalid_and_culled_are_skipped() {
        let conics = [Conic2D::invalid(), conic(8.0, 8.0), conic(-100.0, 8.0)];
        let grid = bin_particles(&conics, &[3.0, 0.0, 3.0], &[1.0; 3], TileGrid::new(64, 64, 16));
        assert!(grid.lists().iter().all(|l| l.is_empty()));
    }

    #[test]
    fn lists_sorted_by_depth_then_id() {
        let conics = [conic(8.0, 8.0); 4];
        let grid = bin_particles(&conics, &[3.0; 4], &[2.0, 1.0, 2.0, 0.5], TileGrid::new(16, 16, 16));
        assert_eq!(grid.list(0), &[3, 1, 0, 2]);
    }

    #[test]
    fn partial_tiles_clip_pixels() {
        let grid = TileGrid::new(20, 18, 16);
        assert_eq!((grid.tiles_x(), grid.tiles_y()), (2, 2));
        assert_eq!(grid.tile_pixels(3).count(), 4 * 2);
        let total: usize = (0..grid.tile_count()).map(|t| grid.tile_pixels(t).count()).sum();
        assert_eq!(total, 20 * 18);
    }

    proptest! {
        #[test]
        fn binned_tiles_intersect_extent(x in -20.0f64..100.0, y in -20.0f64..100.0, r in 0.1f64..40.0) {
            let grid = bin_particles(&[conic(x, y)], &[r], &[0.0], TileGrid::new(80, 72, 16));
            for t in 0..grid.tile_count() {
                let (tx, ty) = ((t % grid.tiles_x()) as f64 * 16.0, (t / grid.tiles_x()) as f64 * 16.0);
                let overlaps = x + r >= tx && x - r <= tx + 16.0 && y + r >= ty && y - r <= ty + 16.0;
                if !grid.list(t).is_empty() {
                    prop_assert!(overlaps);
                }
                // Every tile strictly inside the square must be present.
                if x - r < tx && x + r > tx + 16.0 && y - r < ty && y + r > ty + 16.0 {
                    prop_assert!(!grid.list(t).is_empty());
                }
            }
        }
    }
}
