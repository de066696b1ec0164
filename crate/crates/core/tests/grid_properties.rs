use std::collections::VecDeque;

use gridres_core::grid::{Bus, Line, LineMask, Source, SourceKind};
use gridres_core::{FragilityCurve, Mode, Network};
use proptest::prelude::*;

fn curve() -> FragilityCurve {
    FragilityCurve::new(0.01, 30.0, 60.0, 1.0).unwrap()
}

/// Random multigraph on `n` buses; bus 0 hosts the substation and every bus
/// with an odd index is critical when `with_loads` is set. Critical loads
/// must be reachable, so a spanning path 0-1-..-n-1 is always present.
fn network(n: usize, extra: &[(usize, usize)], with_loads: bool) -> Network {
    let buses = (0..n)
        .map(|i| Bus {
            id: format!("b{i}"),
            load_kw: 1.0,
            is_critical: with_loads && i % 2 == 1,
            weight: 1.0,
        })
        .collect();
    let mut lines: Vec<Line> = (1..n)
        .map(|i| Line {
            id: format!("p{i}"),
            from_bus: format!("b{}", i - 1),
            to_bus: format!("b{i}"),
            is_tie: false,
            is_switchable: false,
            fragility: curve(),
        })
        .collect();
    for (k, &(a, b)) in extra.iter().enumerate() {
        if a % n != b % n {
            lines.push(Line {
                id: format!("x{k}"),
                from_bus: format!("b{}", a % n),
                to_bus: format!("b{}", b % n),
                is_tie: false,
                is_switchable: false,
                fragility: curve(),
            });
        }
    }
    let sources = vec![Source { bus: "b0".into(), kind: SourceKind::Substation, capacity_kw: 1e6, smart_only: false }];
    Network::new(buses, lines, sources, Mode::Base).unwrap()
}

fn bfs_reachable(net: &Network, failed: &LineMask, from: usize) -> Vec<bool> {
    let n = net.buses().len();
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([from]);
    seen[from] = true;
    while let Some(v) = queue.pop_front() {
        for l in 0..net.lines().len() {
            if failed.contains(l) {
                continue;
            }
            let (a, b) = net.line_ends(l);
            let w = if a == v { b } else if b == v { a } else { continue };
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    seen
}

fn arb_case() -> impl Strategy<Value = (usize, Vec<(usize, usize)>, Vec<bool>)> {
    (3usize..12, proptest::collection::vec((0usize..12, 0usize..12), 0..15)).prop_flat_map(|(n, extra)| {
        let n_lines = n - 1 + extra.iter().filter(|(a, b)| a % n != b % n).count();
        (Just(n), Just(extra), proptest::collection::vec(proptest::bool::weighted(0.3), n_lines))
    })
}

proptest! {
    #[test]
    fn islands_partition_matches_reachability((n, extra, bits) in arb_case()) {
        let net = network(n, &extra, false);
        let failed = LineMask::from_bools(bits);
        let none = LineMask::empty(net.lines().len());
        let islands = net.islands(&failed, &none);
        let members = islands.members();
        let mut seen = vec![0usize; n];
        for group in &members {
            for &b in group {
                seen[b] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for v in 0..n {
            let reach = bfs_reachable(&net, &failed, v);
            for (w, &r) in reach.iter().enumerate() {
                prop_assert_eq!(r, islands.component_of(v) == islands.component_of(w));
            }
        }
    }

    #[test]
    fn more_failures_never_help((n, extra, bits) in arb_case(), more in proptest::collection::vec(proptest::bool::weighted(0.3), 30)) {
        let net = network(n, &extra, true);
        let none = LineMask::empty(net.lines().len());
        let failed = LineMask::from_bools(bits.clone());
        let worse = LineMask::from_bools(bits.iter().zip(more.iter().cycle()).map(|(a, b)| *a || *b).collect());
        let src = net.active_sources(Mode::Base);

        prop_assert!(net.islands(&worse, &none).count() >= net.islands(&failed, &none).count());
        let before = net.energized_critical_loads(&failed, &none, &src).unwrap();
        let after = net.energized_critical_loads(&worse, &none, &src).unwrap();
        prop_assert!(after.is_subset(&before));

        let targets = net.critical_buses().to_vec();
        let p_before = net.count_simple_paths(&failed, &[0], &targets, u64::MAX).count;
        let p_after = net.count_simple_paths(&worse, &[0], &targets, u64::MAX).count;
        prop_assert!(p_after <= p_before);
    }

    #[test]
    fn tree_has_one_path_per_reachable_target(n in 2usize..15, bits in proptest::collection::vec(proptest::bool::weighted(0.3), 14)) {
        let net = network(n, &[], false);
        let failed = LineMask::from_bools(bits[..n - 1].to_vec());
        let all: Vec<usize> = (0..n).collect();
        let reach = bfs_reachable(&net, &failed, 0);
        let got = net.count_simple_paths(&failed, &[0], &all, u64::MAX);
        prop_assert_eq!(got.count, reach.iter().filter(|&&r| r).count() as u64);
        prop_assert!(!got.saturated);
    }
}
