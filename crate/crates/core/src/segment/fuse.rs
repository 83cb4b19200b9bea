use super::ObjectRegion;

/// Merges regions whose boxes lie within `max_gap` pixels of each other
/// (largest per-axis gap, zero when overlapping), transitively, until no two
/// remaining boxes are that close. Output is sorted like
/// [`connected_components`](super::connected_components).
pub fn fuse_regions(regions: &[ObjectRegion], max_gap: u32) -> Vec<ObjectRegion> {
    let mut current: Vec<ObjectRegion> = regions.to_vec();
    loop {
        let n = current.len();
        let mut group: Vec<usize> = (0..n).collect();
        fn root(group: &mut [usize], mut i: usize) -> usize {
            while group[i] != i {
                group[i] = group[group[i]];
                i = group[i];
            }
            i
        }
        let mut merged_any = false;
        for i in 0..n {
            for j in i + 1..n {
                if current[i].bbox().gap(&current[j].bbox()) <= max_gap {
                    let (a, b) = (root(&mut group, i), root(&mut group, j));
                    if a != b {
                        group[a.max(b)] = a.min(b);
                        merged_any = true;
                    }
                }
            }
        }
        if !merged_any {
            break;
        }
        let mut out: Vec<Option<ObjectRegion>> = vec![None; n];
        for (i, region) in current.iter().enumerate() {
            let r = root(&mut group, i);
            match out[r].as_mut() {
                Some(acc) => acc.absorb(region),
                None => out[r] = Some(region.clone()),
            }
        }
        // Union boxes can now reach regions that were out of range; repeat.
        current = out.into_iter().flatten().collect();
    }
    current.sort_by_key(|r| (r.bbox().y, r.bbox().x));
    current
}
