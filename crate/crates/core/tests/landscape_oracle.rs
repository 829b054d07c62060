use std::collections::HashSet;

use proptest::prelude::*;
use ssd_core::landscape::seeded_rng;
use ssd_core::{AdjacencyStats, LandCode, LandGrid, Neighborhood, Species};

fn grid_strategy() -> impl Strategy<Value = LandGrid> {
    (1usize..16, 1usize..16).prop_flat_map(|(r, c)| {
        prop::collection::vec(0i64..4, r * c).prop_map(move |codes| {
            let codes = codes
                .into_iter()
                .map(|k| LandCode::from_code(k).unwrap())
                .collect();
            LandGrid::new(r, c, 10.0, codes).unwrap()
        })
    })
}

fn neighbors(grid: &LandGrid, r: usize, c: usize, hood: Neighborhood) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            if (dr, dc) == (0, 0) || (hood == Neighborhood::VonNeumann && dr != 0 && dc != 0) {
                continue;
            }
            let (rr, cc) = (r as i64 + dr, c as i64 + dc);
            if rr >= 0 && cc >= 0 && (rr as usize) < grid.nrows() && (cc as usize) < grid.ncols() {
                out.push((rr as usize, cc as usize));
            }
        }
    }
    out
}

fn brute_stats(grid: &LandGrid) -> AdjacencyStats {
    let mut s = AdjacencyStats::default();
    for r in 0..grid.nrows() {
        for c in 0..grid.ncols() {
            let fertile = neighbors(grid, r, c, Neighborhood::Moore)
                .into_iter()
                .filter(|&(rr, cc)| grid.get(rr, cc) == LandCode::Fertile)
                .count();
            match grid.get(r, c) {
                LandCode::Black => {
                    s.c_black += 1;
                    s.g_black += fertile;
                }
                LandCode::White => {
                    s.c_white += 1;
                    s.g_white += fertile;
                }
                _ => {}
            }
        }
    }
    s
}

fn brute_frontier(grid: &LandGrid, species: Species, hood: Neighborhood) -> HashSet<usize> {
    let mut out = HashSet::new();
    for r in 0..grid.nrows() {
        for c in 0..grid.ncols() {
            if grid.get(r, c) == LandCode::Fertile
                && neighbors(grid, r, c, hood)
                    .into_iter()
                    .any(|(rr, cc)| grid.get(rr, cc) == species.code())
            {
                out.insert(r * grid.ncols() + c);
            }
        }
    }
    out
}

fn hood() -> impl Strategy<Value = Neighborhood> {
    prop_oneof![Just(Neighborhood::Moore), Just(Neighborhood::VonNeumann)]
}

proptest! {
    #[test]
    fn adjacency_matches_brute_force(grid in grid_strategy()) {
        let stats = grid.adjacency_stats();
        let oracle = brute_stats(&grid);
        prop_assert_eq!(stats, oracle);
        for species in Species::BOTH {
            let d = stats.growth_reduction(species);
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }

    #[test]
    fn frontier_matches_brute_force(grid in grid_strategy(), hood in hood()) {
        for species in Species::BOTH {
            let got: HashSet<usize> = grid.frontier(species, hood).into_iter().collect();
            prop_assert_eq!(got, brute_frontier(&grid, species, hood));
        }
    }

    #[test]
    fn growth_fills_only_frontier_cells(grid in grid_strategy(), n in 0usize..40, seed in any::<u64>(), hood in hood()) {
        let frontier = brute_frontier(&grid, Species::Black, hood);
        let mut after = grid.clone();
        let grown = after.allocate_growth(Species::Black, n, 7, hood, &mut seeded_rng(seed, 1));
        prop_assert_eq!(grown, n.min(frontier.len()));
        let changed: Vec<usize> = (0..grid.len()).filter(|&i| grid.codes()[i] != after.codes()[i]).collect();
        prop_assert_eq!(changed.len(), grown);
        for i in changed {
            prop_assert!(frontier.contains(&i));
            prop_assert_eq!(after.codes()[i], LandCode::Black);
            prop_assert_eq!(after.ages()[i], Some(7));
        }
    }

    #[test]
    fn shared_growth_respects_both_frontiers(grid in grid_strategy(), nb in 0usize..30, nw in 0usize..30, seed in any::<u64>()) {
        let hood = Neighborhood::Moore;
        let fb = brute_frontier(&grid, Species::Black, hood);
        let fw = brute_frontier(&grid, Species::White, hood);
        let mut after = grid.clone();
        let realized = after.allocate_growth_shared(&[(Species::Black, nb), (Species::White, nw)], 3, hood, &mut seeded_rng(seed, 1));
        let before = grid.census();
        let now = after.census();
        prop_assert_eq!(now.get(LandCode::Black) - before.get(LandCode::Black), realized[0]);
        prop_assert_eq!(now.get(LandCode::White) - before.get(LandCode::White), realized[1]);
        prop_assert!(realized[0] <= nb && realized[1] <= nw);
        for i in 0..grid.len() {
            if grid.codes()[i] != after.codes()[i] {
                let frontier = if after.codes()[i] == LandCode::Black { &fb } else { &fw };
                prop_assert!(frontier.contains(&i));
            }
        }
        // A species only falls short once its own frontier is used up.
        let union: HashSet<usize> = fb.union(&fw).copied().collect();
        let claimed = realized[0] + realized[1];
        if realized[0] < nb {
            prop_assert!(fb.iter().all(|&i| after.codes()[i] != LandCode::Fertile));
        }
        if realized[1] < nw {
            prop_assert!(fw.iter().all(|&i| after.codes()[i] != LandCode::Fertile));
        }
        prop_assert!(claimed <= union.len());
    }

    #[test]
    fn decay_removes_the_oldest_cells(ages in prop::collection::vec(0u32..6, 1..60), n in 0usize..70, seed in any::<u64>()) {
        let len = ages.len();
        let mut grid = LandGrid::filled(1, len, 1.0, LandCode::Fertile).unwrap();
        for (c, &a) in ages.iter().enumerate() {
            grid.set(0, c, LandCode::White, a);
        }
        let before = grid.clone();
        let removed = grid.allocate_decay(Species::White, n, &mut seeded_rng(seed, 1));
        prop_assert_eq!(removed, n.min(len));
        let gone: Vec<u32> = (0..len).filter(|&i| grid.codes()[i] == LandCode::Fertile).map(|i| ages[i]).collect();
        let kept: Vec<u32> = (0..len).filter(|&i| grid.codes()[i] == LandCode::White).map(|i| ages[i]).collect();
        prop_assert_eq!(gone.len(), removed);
        if let (Some(&newest_gone), Some(&oldest_kept)) = (gone.iter().max(), kept.iter().min()) {
            prop_assert!(newest_gone <= oldest_kept);
        }
        for i in 0..len {
            if grid.codes()[i] == LandCode::Fertile {
                prop_assert_eq!(grid.ages()[i], None);
            } else {
                prop_assert_eq!(grid.ages()[i], before.ages()[i]);
            }
        }
    }

    #[test]
    fn refinement_preserves_area_shares(grid in grid_strategy(), k in 1usize..4) {
        let fine = grid.refine(k).unwrap();
        prop_assert_eq!(fine.nrows(), grid.nrows() * k);
        prop_assert_eq!(fine.cell_size_m(), grid.cell_size_m() / k as f64);
        for code in LandCode::ALL {
            prop_assert_eq!(fine.census().get(code), grid.census().get(code) * k * k);
        }
        for r in 0..fine.nrows() {
            for c in 0..fine.ncols() {
                prop_assert_eq!(fine.get(r, c), grid.get(r / k, c / k));
            }
        }
    }
}

#[test]
fn shared_growth_favours_neither_species() {
    // A single fertile column between a black and a white half: every
    // frontier cell is contested by both species.
    let (nrows, ncols) = (40, 3);
    let mut wins = [0usize; 2];
    for seed in 0..400 {
        let mut grid = LandGrid::filled(nrows, ncols, 1.0, LandCode::Fertile).unwrap();
        for r in 0..nrows {
            grid.set(r, 0, LandCode::Black, 0);
            grid.set(r, 2, LandCode::White, 0);
        }
        let realized = grid.allocate_growth_shared(
            &[(Species::Black, 30), (Species::White, 30)],
            1,
            Neighborhood::Moore,
            &mut seeded_rng(seed, 1),
        );
        assert_eq!(realized[0] + realized[1], nrows);
        assert!(realized[0].abs_diff(realized[1]) <= 1, "{realized:?}");
        wins[0] += realized[0];
        wins[1] += realized[1];
    }
    assert_eq!(wins[0] + wins[1], 400 * nrows);
    assert_eq!(wins[0], wins[1], "{wins:?}");
}
