//! Four-path semi-global cost aggregation.
//!
//! Along each path r the per-pixel recurrence is
//! L_r(p,d) = C(p,d) + min(L_r(p-r,d), L_r(p-r,d+-1)+P1, min_k L_r(p-r,k)+P2)
//!            - min_k L_r(p-r,k)
//! with L_r = C at the first pixel. The aggregated volume is the sum over the
//! two horizontal and two vertical directions. Horizontal paths parallelize
//! over rows and vertical paths over columns, with additions in a fixed
//! order, so the result is independent of thread scheduling.

use rayon::prelude::*;

use crate::stereo::cost::CostVolume;

#[inline]
fn step_into(cur: &mut [u32], costs: &[u16], prev: &[u32], p1: u32, p2: u32) {
    let nd = cur.len();
    let mut min_prev = u32::MAX;
    for &v in prev {
        min_prev = min_prev.min(v);
    }
    let cap = min_prev + p2;
    for d in 0..nd {
        let mut best = prev[d];
        if d > 0 {
            best = best.min(prev[d - 1] + p1);
        }
        if d + 1 < nd {
            best = best.min(prev[d + 1] + p1);
        }
        best = best.min(cap);
        cur[d] = costs[d] as u32 + best - min_prev;
    }
}

/// Aggregate `cv` with penalties (p1, p2). Penalties are taken as given;
/// config-level validation enforces p2 > p1 > 0 for production use.
pub fn sgm_aggregate(cv: &CostVolume<u16>, p1: u32, p2: u32) -> CostVolume<u32> {
    let (w, h, nd) = (cv.width, cv.height, cv.disp_count);
    let mut out = CostVolume::<u32>::new(w, h, cv.min_disp, nd);

    // horizontal paths, both directions per row
    out.costs
        .par_chunks_mut(w * nd)
        .enumerate()
        .for_each(|(y, orow)| {
            let crow = &cv.costs[y * w * nd..(y + 1) * w * nd];
            let mut prev = vec![0u32; nd];
            let mut cur = vec![0u32; nd];
            // left -> right
            for x in 0..w {
                let c = &crow[x * nd..(x + 1) * nd];
                if x == 0 {
                    for d in 0..nd {
                        cur[d] = c[d] as u32;
                    }
                } else {
                    step_into(&mut cur, c, &prev, p1, p2);
                }
                for d in 0..nd {
                    orow[x * nd + d] += cur[d];
                }
                std::mem::swap(&mut prev, &mut cur);
            }
            // right -> left
            for x in (0..w).rev() {
                let c = &crow[x * nd..(x + 1) * nd];
                if x == w - 1 {
                    for d in 0..nd {
                        cur[d] = c[d] as u32;
                    }
                } else {
                    step_into(&mut cur, c, &prev, p1, p2);
                }
                for d in 0..nd {
                    orow[x * nd + d] += cur[d];
                }
                std::mem::swap(&mut prev, &mut cur);
            }
        });

    // vertical paths: row-sequential, column-parallel
    for top_down in [true, false] {
        let mut prev = vec![0u32; w * nd];
        let mut cur = vec![0u32; w * nd];
        let ys: Vec<usize> = if top_down {
            (0..h).collect()
        } else {
            (0..h).rev().collect()
        };
        for (step, &y) in ys.iter().enumerate() {
            let crow = &cv.costs[y * w * nd..(y + 1) * w * nd];
            let orow = &mut out.costs[y * w * nd..(y + 1) * w * nd];
            let prev_ref = &prev;
            cur.par_chunks_mut(nd)
                .zip(orow.par_chunks_mut(nd))
                .enumerate()
                .for_each(|(x, (cpx, opx))| {
                    let c = &crow[x * nd..(x + 1) * nd];
                    if step == 0 {
                        for d in 0..nd {
                            cpx[d] = c[d] as u32;
                        }
                    } else {
                        step_into(cpx, c, &prev_ref[x * nd..(x + 1) * nd], p1, p2);
                    }
                    for d in 0..nd {
                        opx[d] += cpx[d];
                    }
                });
            std::mem::swap(&mut prev, &mut cur);
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn volume_from(costs: Vec<u16>, w: usize, h: usize, nd: usize) -> CostVolume<u16> {
        CostVolume {
            width: w,
            height: h,
            min_disp: 0,
            disp_count: nd,
            costs,
        }
    }

    /// Independent oracle: enumerate every label sequence along the path.
    /// U(i,d) = min over sequences ending in d of sum C + sum T with
    /// T(a,b) = 0 / P1 / P2 for |a-b| = 0 / 1 / >=2, and the implementation's
    /// normalized value is U(i,d) - min_k U(i-1,k).
    pub(crate) fn oracle_aggregate(cv: &CostVolume<u16>, p1: u32, p2: u32) -> CostVolume<u32> {
        let (w, h, nd) = (cv.width, cv.height, cv.disp_count);
        let trans = |a: usize, b: usize| -> u32 {
            let diff = a.abs_diff(b);
            match diff {
                0 => 0,
                1 => p1,
                _ => p2,
            }
        };
        // brute-force U along a pixel sequence
        let path_l = |pixels: &[(usize, usize)]| -> Vec<Vec<u32>> {
            let n = pixels.len();
            // enumerate label sequences incrementally: U[i][d]
            let mut u = vec![vec![u32::MAX; nd]; n];
            // all D^k sequences via odometer
            let mut labels = vec![0usize; n];
            loop {
                // evaluate every prefix of this sequence
                let mut cost = 0u32;
                for i in 0..n {
                    let (x, y) = pixels[i];
                    cost += cv.at(x, y, labels[i]) as u32;
                    if i > 0 {
                        cost += trans(labels[i - 1], labels[i]);
                    }
                    if cost < u[i][labels[i]] {
                        u[i][labels[i]] = cost;
                    }
                }
                // odometer increment
                let mut k = 0;
                loop {
                    if k == n {
                        return (0..n)
                            .map(|i| {
                                if i == 0 {
                                    u[0].clone()
                                } else {
                                    let m = *u[i - 1].iter().min().unwrap();
                                    u[i].iter().map(|&v| v - m).collect()
                                }
                            })
                            .collect();
                    }
                    labels[k] += 1;
                    if labels[k] < nd {
                        break;
                    }
                    labels[k] = 0;
                    k += 1;
                }
            }
        };
        let mut out = CostVolume::<u32>::new(w, h, cv.min_disp, nd);
        let mut paths: Vec<Vec<(usize, usize)>> = Vec::new();
        for y in 0..h {
            paths.push((0..w).map(|x| (x, y)).collect()); // left -> right
            paths.push((0..w).rev().map(|x| (x, y)).collect()); // right -> left
        }
        for x in 0..w {
            paths.push((0..h).map(|y| (x, y)).collect()); // top -> bottom
            paths.push((0..h).rev().map(|y| (x, y)).collect()); // bottom -> top
        }
        for path in paths {
            let l = path_l(&path);
            for (i, &(x, y)) in path.iter().enumerate() {
                for d in 0..nd {
                    let idx = out.idx(x, y, d);
                    out.costs[idx] += l[i][d];
                }
            }
        }
        out
    }

    #[test]
    fn zero_penalties_reduce_to_raw_argmin() {
        // P1 = P2 = 0: path terms cancel and the aggregated argmin equals
        // the raw-cost argmin at every pixel
        let mut costs = Vec::new();
        let mut s = 99u32;
        for _ in 0..6 * 4 * 3 {
            s = s.wrapping_mul(1664525).wrapping_add(1013904223);
            costs.push((s >> 26) as u16);
        }
        let cv = volume_from(costs, 6, 4, 3);
        let agg = sgm_aggregate(&cv, 0, 0);
        for y in 0..4 {
            for x in 0..6 {
                let raw = cv.pixel(x, y);
                let a = agg.pixel(x, y);
                let raw_arg = (0..3).min_by_key(|&d| raw[d]).unwrap();
                let agg_arg = (0..3).min_by_key(|&d| a[d]).unwrap();
                assert_eq!(raw_arg, agg_arg, "at ({x},{y}): raw {raw:?} agg {a:?}");
            }
        }
    }

    #[test]
    fn single_row_matches_hand_oracle() {
        // N=4 pixels, D=3, P1=1, P2=2 against the exhaustive 3^4 enumeration
        let costs: Vec<u16> = vec![
            3, 7, 2, /* x=0 */
            1, 0, 4, /* x=1 */
            5, 2, 2, /* x=2 */
            0, 6, 1, /* x=3 */
        ];
        let cv = volume_from(costs, 4, 1, 3);
        let agg = sgm_aggregate(&cv, 1, 2);
        let oracle = oracle_aggregate(&cv, 1, 2);
        assert_eq!(agg.costs, oracle.costs);
    }

    #[test]
    fn constant_volume_stays_constant_per_pixel() {
        let cv = volume_from(vec![4u16; 5 * 3 * 4], 5, 3, 4);
        let agg = sgm_aggregate(&cv, 2, 7);
        for y in 0..3 {
            for x in 0..5 {
                let p = agg.pixel(x, y);
                assert!(p.iter().all(|&v| v == p[0]), "pixel ({x},{y}): {p:?}");
            }
        }
    }

    #[test]
    fn random_volumes_match_oracle() {
        let mut s = 7u32;
        for trial in 0..50 {
            let (w, h, nd) = (
                2 + (trial % 5),
                1 + (trial % 4),
                2 + (trial % 3),
            );
            let mut costs = Vec::with_capacity(w * h * nd);
            for _ in 0..w * h * nd {
                s = s.wrapping_mul(1664525).wrapping_add(1013904223);
                costs.push((s >> 25) as u16);
            }
            let cv = volume_from(costs, w, h, nd);
            let p1 = 1 + (trial as u32 % 7);
            let p2 = p1 + 1 + (trial as u32 % 9);
            let agg = sgm_aggregate(&cv, p1, p2);
            let oracle = oracle_aggregate(&cv, p1, p2);
            assert_eq!(agg.costs, oracle.costs, "trial {trial} ({w}x{h}x{nd})");
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut costs = Vec::new();
        let mut s = 3u32;
        for _ in 0..64 * 48 * 16 {
            s = s.wrapping_mul(1664525).wrapping_add(1013904223);
            costs.push((s >> 26) as u16);
        }
        let cv = volume_from(costs, 64, 48, 16);
        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            pool.install(|| sgm_aggregate(&cv, 8, 32))
        };
        assert_eq!(run(1).costs, run(4).costs);
    }
}
