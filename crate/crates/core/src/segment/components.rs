use super::ObjectRegion;
use crate::geometry::Rect;
use crate::mask::ForegroundMask;

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn new() -> Self {
        // label 0 is background
        Self { parent: vec![0] }
    }

    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let grand = self.parent[self.parent[x as usize] as usize];
            self.parent[x as usize] = grand;
            x = grand;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// 8-connected labelling. Returns one label per pixel (0 = background,
/// components numbered 1.. in raster order of their first pixel) and the
/// number of components.
pub fn label_components(mask: &ForegroundMask) -> (Vec<u32>, u32) {
    let w = mask.width() as usize;
    let h = mask.height() as usize;
    let bits = mask.bits();
    let mut labels = vec![0u32; w * h];
    let mut sets = DisjointSet::new();

    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !bits[i] {
                continue;
            }
            // Already-visited neighbours: W, NW, N, NE.
            let mut label = 0u32;
            let mut join = |n: u32, sets: &mut DisjointSet| {
                if n != 0 {
                    label = if label == 0 { n } else { sets.union(label, n) };
                }
            };
            if x > 0 {
                join(labels[i - 1], &mut sets);
            }
            if y > 0 {
                let up = i - w;
                if x > 0 {
                    join(labels[up - 1], &mut sets);
                }
                join(labels[up], &mut sets);
                if x + 1 < w {
                    join(labels[up + 1], &mut sets);
                }
            }
            labels[i] = if label == 0 { sets.make() } else { label };
        }
    }

    // Compact roots to 1..=n in order of first appearance.
    let mut compact = vec![0u32; sets.parent.len()];
    let mut count = 0u32;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = sets.find(*l) as usize;
        if compact[root] == 0 {
            count += 1;
            compact[root] = count;
        }
        *l = compact[root];
    }
    (labels, count)
}

/// Connected foreground components with at least `min_area` pixels, sorted
/// by the top-left corner of their boxes (row first, then column).
pub fn connected_components(mask: &ForegroundMask, min_area: u32) -> Vec<ObjectRegion> {
    let w = mask.width() as usize;
    let (labels, count) = label_components(mask);
    if count == 0 {
        return Vec::new();
    }

    #[derive(Clone, Copy)]
    struct Extent {
        x0: usize,
        y0: usize,
        x1: usize,
        y1: usize,
        pixels: u32,
    }
    let mut extents = vec![
        Extent {
            x0: usize::MAX,
            y0: usize::MAX,
            x1: 0,
            y1: 0,
            pixels: 0,
        };
        count as usize + 1
    ];
    for (i, &l) in labels.iter().enumerate() {
        if l == 0 {
            continue;
        }
        let (x, y) = (i % w, i / w);
        let e = &mut extents[l as usize];
        e.x0 = e.x0.min(x);
        e.y0 = e.y0.min(y);
        e.x1 = e.x1.max(x);
        e.y1 = e.y1.max(y);
        e.pixels += 1;
    }

    let mut rows: Vec<Option<Vec<u32>>> = extents
        .iter()
        .enumerate()
        .map(|(l, e)| (l > 0 && e.pixels >= min_area).then(|| vec![0u32; e.y1 - e.y0 + 1]))
        .collect();
    for (i, &l) in labels.iter().enumerate() {
        if let Some(r) = rows[l as usize].as_mut() {
            r[i / w - extents[l as usize].y0] += 1;
        }
    }

    let mut regions: Vec<ObjectRegion> = rows
        .into_iter()
        .enumerate()
        .filter_map(|(l, r)| {
            let e = extents[l];
            r.map(|r| {
                let bbox = Rect::new(
                    e.x0 as u32,
                    e.y0 as u32,
                    (e.x1 - e.x0 + 1) as u32,
                    (e.y1 - e.y0 + 1) as u32,
                );
                ObjectRegion::from_row_counts(bbox, r)
            })
        })
        .collect();
    regions.sort_by_key(|r| (r.bbox().y, r.bbox().x));
    regions
}
