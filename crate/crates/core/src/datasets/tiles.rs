use serde::Serialize;

/// Partition of an image's column-major pixel indices into rectangular
/// blocks, one block per circuit parameter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TileMap {
    pub rows: usize,
    pub cols: usize,
    /// Block grid, (block rows, block cols).
    pub grid: (usize, usize),
    pub tiles: Vec<Vec<usize>>,
}

impl TileMap {
    pub fn q(&self) -> usize {
        self.tiles.len()
    }

    pub fn input_dim(&self) -> usize {
        self.rows * self.cols
    }
}

/// Splits `rows × cols` pixels into `q` rectangular tiles.
///
/// The block grid is the factorisation `gr × gc = q` with `gr ≤ gc` and `gr`
/// as large as possible (q = 2 gives left/right halves). Block sizes differ
/// by at most one, larger blocks first, so 28 splits into 10, 9, 9. Tiles are
/// ordered column-major over the grid and hold column-major pixel indices
/// `c * rows + r`.
pub fn make_tilemap(rows: usize, cols: usize, q: usize) -> Result<TileMap, String> {
    if q == 0 {
        return Err("tile count must be positive".into());
    }
    let gr = (1..=q)
        .filter(|d| q.is_multiple_of(*d) && d * d <= q)
        .max()
        .unwrap_or(1);
    let gc = q / gr;
    if gr > rows || gc > cols {
        return Err(format!("cannot cut a {rows}x{cols} image into {gr}x{gc} tiles"));
    }
    let row_bounds = bounds(rows, gr);
    let col_bounds = bounds(cols, gc);
    let mut tiles = Vec::with_capacity(q);
    for bc in 0..gc {
        for br in 0..gr {
            let mut tile = Vec::new();
            for c in col_bounds[bc]..col_bounds[bc + 1] {
                for r in row_bounds[br]..row_bounds[br + 1] {
                    tile.push(c * rows + r);
                }
            }
            tiles.push(tile);
        }
    }
    Ok(TileMap {
        rows,
        cols,
        grid: (gr, gc),
        tiles,
    })
}

fn bounds(n: usize, parts: usize) -> Vec<usize> {
    let (base, extra) = (n / parts, n % parts);
    let mut out = vec![0];
    for k in 0..parts {
        out.push(out[k] + base + usize::from(k < extra));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_partition(t: &TileMap) {
        let mut seen = vec![false; t.input_dim()];
        for tile in &t.tiles {
            for &j in tile {
                assert!(!seen[j], "index {j} in two tiles");
                seen[j] = true;
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn partitions_for_standard_counts() {
        for q in [1, 2, 4, 9, 16] {
            let t = make_tilemap(28, 28, q).unwrap();
            assert_eq!(t.q(), q);
            assert_partition(&t);
        }
    }

    #[test]
    fn four_quadrants() {
        let t = make_tilemap(28, 28, 4).unwrap();
        assert!(t.tiles.iter().all(|tile| tile.len() == 196));
        // top-left quadrant: rows 0..14 of columns 0..14
        assert_eq!(t.tiles[0][..14], (0..14).collect::<Vec<_>>()[..]);
        assert_eq!(t.tiles[0][14], 28);
        // second tile is the bottom-left quadrant
        assert_eq!(t.tiles[1][0], 14);
    }

    #[test]
    fn halves_are_contiguous() {
        let t = make_tilemap(28, 28, 2).unwrap();
        assert_eq!(t.grid, (1, 2));
        assert_eq!(t.tiles[0], (0..392).collect::<Vec<_>>());
        assert_eq!(t.tiles[1], (392..784).collect::<Vec<_>>());
    }

    #[test]
    fn single_tile() {
        let t = make_tilemap(28, 28, 1).unwrap();
        assert_eq!(t.tiles[0].len(), 784);
    }

    #[test]
    fn nine_tiles_are_ragged() {
        let t = make_tilemap(28, 28, 9).unwrap();
        let sizes: Vec<usize> = t.tiles.iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![100, 90, 90, 90, 81, 81, 90, 81, 81]);
    }

    #[test]
    fn rejects_zero() {
        assert!(make_tilemap(28, 28, 0).is_err());
        assert!(make_tilemap(2, 2, 9).is_err());
    }
}
