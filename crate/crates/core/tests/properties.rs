//! Property suites over randomized inputs. Structured generators live in
//! `common`; proptest drives them through seeds so failures shrink to a
//! reproducible seed.

mod common;

use std::collections::HashMap;

use common::*;
use proptest::prelude::*;
use quasisure::deflator::{follmer_extend, is_supermartingale_deflator, Deflator};
use quasisure::models::tree::PasteKernel;
use quasisure::na1::{na1_check, node_feasibility, NodeFeasibility};
use quasisure::pathspace::{time_change, time_change_inverse, Lifetime};
use quasisure::superhedge::{dual_enumerate, sublinear_price_tree, Claim, ClaimKind};
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn absorption_survives_killing(seed in any::<u64>(), dim in 1usize..3, t in 0.0f64..6.0) {
        let mut r = rng(seed);
        let p = random_path(dim, &mut r);
        let killed = p.kill_at(t);
        let mut dead = false;
        for i in 0..killed.len() {
            match killed.value(i) {
                None => dead = true,
                Some(_) => prop_assert!(!dead),
            }
        }
        prop_assert_eq!(killed.kill_at(t), killed.clone());
        // Killing never extends a lifetime.
        match (killed.lifetime(), p.lifetime()) {
            (Lifetime::Infinite, Lifetime::Finite(_)) => prop_assert!(false),
            (Lifetime::Finite(a), Lifetime::Finite(b)) => prop_assert!(a <= b),
            _ => {}
        }
    }

    #[test]
    fn time_change_is_a_bijection(z in 0.05f64..20.0, t in 0.0f64..12.0, immortal in any::<bool>()) {
        let z = if immortal { f64::INFINITY } else { z };
        let u = time_change(z, t).unwrap();
        prop_assert!(u < z || (immortal && u == t));
        let back = time_change_inverse(z, u).unwrap();
        prop_assert!((back - t).abs() <= 1e-8 * t.max(1.0));
    }

    #[test]
    fn metric_axioms_on_random_paths(seed in any::<u64>(), dim in 1usize..3) {
        let mut r = rng(seed);
        let p = random_path(dim, &mut r);
        let q = random_path(dim, &mut r);
        let s = random_path(dim, &mut r);
        let dpq = p.distance(&q);
        prop_assert!(dpq >= 0.0);
        prop_assert!((dpq - q.distance(&p)).abs() <= 1e-12);
        prop_assert_eq!(p.distance(&p), 0.0);
        prop_assert!(p.distance(&s) <= dpq + q.distance(&s) + 1e-12);
    }

    #[test]
    fn feasibility_decision_is_scale_invariant(seed in any::<u64>(), lambda in 0.01f64..100.0) {
        let mut r = rng(seed);
        let d = 1 + r.gen_range(0..2usize);
        let s_v: Vec<f64> = (0..d).map(|_| 20.0 + 100.0 * r.gen::<f64>()).collect();
        let m = 2 + r.gen_range(0..3usize);
        let children: Vec<Vec<f64>> = (0..m)
            .map(|_| s_v.iter().map(|x| x * (0.7 + 0.6 * r.gen::<f64>())).collect())
            .collect();
        let base = node_feasibility(&s_v, &children).unwrap();
        // Skip hair-thin margins where scaling can flip the threshold.
        prop_assume!(base.margin().abs() > 1e-7);
        let scaled_sv: Vec<f64> = s_v.iter().map(|x| lambda * x).collect();
        let scaled_children: Vec<Vec<f64>> = children
            .iter()
            .map(|c| c.iter().map(|x| lambda * x).collect())
            .collect();
        let scaled = node_feasibility(&scaled_sv, &scaled_children).unwrap();
        prop_assert_eq!(
            matches!(base, NodeFeasibility::Feasible { .. }),
            matches!(scaled, NodeFeasibility::Feasible { .. })
        );
    }

    #[test]
    fn tower_rule_on_random_trees(seed in any::<u64>()) {
        let mut r = rng(seed);
        let fam = random_tree(&TreeGenConfig::feasible(1), &mut r);
        prop_assume!(fam.terminal_level() >= 2);
        let strike = fam.node(0).s[0];
        let g = |n: &quasisure::models::tree::TreeNode| (n.s[0] - strike).max(0.0);
        for model in 0..fam.models().len() {
            let one_pass = fam.expect_terminal(model, g);
            let level = 1 + (seed as usize) % (fam.terminal_level() - 1).max(1);
            let two_pass: f64 = fam
                .nodes_at_level(level)
                .iter()
                .map(|&v| {
                    let p = fam.reach_prob(model, v);
                    if p == 0.0 {
                        return 0.0;
                    }
                    let cond = fam.condition(v).unwrap();
                    let idx = cond.model_map.iter().position(|&m| m == model).unwrap();
                    p * cond.family.expect_terminal(idx, g)
                })
                .sum();
            prop_assert!((one_pass - two_pass).abs() <= 1e-12 * one_pass.abs().max(1.0));
        }
    }

    #[test]
    fn pasting_own_conditionals_is_identity(seed in any::<u64>()) {
        let mut r = rng(seed);
        let fam = random_tree(&TreeGenConfig::feasible(1), &mut r);
        prop_assume!(fam.terminal_level() >= 2);
        let model = r.gen_range(0..fam.models().len());
        let s = 1 + r.gen_range(0..fam.terminal_level() - 1);
        let mut kernel = PasteKernel::default();
        for &v in &fam.nodes_at_level(s) {
            kernel.0.insert(v, fam.subtree_law(model, v));
        }
        let pasted = fam.paste(model, s, &kernel).unwrap();
        for node in fam.nodes() {
            if fam.reach_prob(model, node.id) == 0.0 {
                continue;
            }
            prop_assert_eq!(pasted.transition(node.id), fam.model(model).transition(node.id));
        }
    }

    #[test]
    fn root_functional_is_sublinear_and_monotone(seed in any::<u64>()) {
        let mut r = rng(seed);
        let fam = random_tree(&TreeGenConfig::feasible(1), &mut r);
        let f = random_claim(&fam, &mut r);
        let g = random_claim(&fam, &mut r);
        let table = |h: &dyn Fn(&quasisure::models::tree::TreeNode) -> f64| -> Claim {
            let values: HashMap<usize, f64> = fam
                .nodes()
                .iter()
                .filter(|n| fam.is_terminal(n.id))
                .map(|n| (n.id, h(n)))
                .collect();
            Claim::new(ClaimKind::Table { values })
        };
        let price = |c: &Claim| sublinear_price_tree(&fam, c).unwrap().root_value();
        let pf = price(&f);
        let pg = price(&g);
        // Subadditivity.
        let sum = table(&|n| f.eval_node(n) + g.eval_node(n));
        prop_assert!(price(&sum) <= pf + pg + 1e-9);
        // Positive homogeneity.
        let lam = 0.3 + 2.0 * r.gen::<f64>();
        let scaled = table(&|n| lam * f.eval_node(n));
        prop_assert!((price(&scaled) - lam * pf).abs() <= 1e-9 * (1.0 + lam * pf.abs()));
        // Monotonicity.
        let bigger = table(&|n| f.eval_node(n) + 0.5);
        prop_assert!(price(&bigger) >= pf - 1e-10);
    }

    #[test]
    fn primal_dominates_dual_oracle(seed in any::<u64>()) {
        let mut r = rng(seed);
        let fam = random_tree(&TreeGenConfig::feasible(1), &mut r);
        let claim = random_claim(&fam, &mut r);
        let primal = sublinear_price_tree(&fam, &claim).unwrap().root_value();
        let dual = dual_enumerate(&fam, &claim, 0.05).unwrap();
        prop_assert!(primal >= dual - 1e-9);
        let max_f = max_supported_payoff(&fam, &claim);
        prop_assert!(primal - dual <= 0.05 * max_f + 1e-9);
    }

    #[test]
    fn follmer_extension_conserves_mass_and_support(seed in any::<u64>()) {
        let mut r = rng(seed);
        let fam = random_tree(&TreeGenConfig::feasible(1), &mut r);
        let model = r.gen_range(0..fam.models().len());
        // Supermartingale deflator by construction.
        let mut y = vec![0.0; fam.nodes().len()];
        y[0] = 1.0;
        let mut order: Vec<usize> = (0..fam.nodes().len()).collect();
        order.sort_by_key(|&id| fam.node(id).level);
        for &id in &order {
            let node = fam.node(id);
            if node.children.is_empty() {
                continue;
            }
            let probs = fam.model(model).transition(id).unwrap();
            let raw: Vec<f64> = node.children.iter().map(|_| 0.1 + r.gen::<f64>()).collect();
            let mean: f64 = raw.iter().zip(probs).map(|(a, b)| a * b).sum();
            let theta = 0.7 + 0.3 * r.gen::<f64>();
            for (&c, rawc) in node.children.iter().zip(&raw) {
                y[c] = if mean > 0.0 { rawc * y[id] * theta / mean } else { y[id] };
            }
        }
        let deflator = Deflator::new(y).unwrap();
        prop_assert!(is_supermartingale_deflator(&fam, model, &deflator).is_supermartingale);
        let killed = follmer_extend(&fam, model, &deflator).unwrap();
        for node in fam.nodes() {
            let Some(w) = killed.node_weights(node.id) else { continue };
            let total: f64 = w.children.iter().sum::<f64>() + w.cemetery;
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let probs = fam.model(model).transition(node.id).unwrap();
            for (qc, pc) in w.children.iter().zip(probs) {
                prop_assert_eq!(*qc > 0.0, *pc > 0.0);
            }
        }
    }

    #[test]
    fn covariation_hedge_matches_envelope_slope(seed in any::<u64>()) {
        use quasisure::deflator::KilledMeasure;
        use quasisure::superhedge::{
            covariation_estimate, extract_strategy_covariation, extract_strategy_envelope,
        };
        let mut r = rng(seed);
        let fam = random_tree(&TreeGenConfig::feasible(1), &mut r);
        let claim = random_claim(&fam, &mut r);
        let zp = sublinear_price_tree(&fam, &claim).unwrap();
        let env = extract_strategy_envelope(&fam, &zp).unwrap();
        let killed = KilledMeasure::new(&fam, zp.weights.clone()).unwrap();
        let cov = extract_strategy_covariation(&fam, &zp, &killed).unwrap();
        for node in fam.nodes() {
            let (Some(a), Some(b)) = (env.hedge(node.id), cov.hedge(node.id)) else {
                continue;
            };
            let est = covariation_estimate(&fam, &zp.values, &killed, node.id).unwrap();
            // Where the optimizing measure gives the asset one-step
            // variance, both routes name the same slope.
            if est.c_s[0][0] > 1e-8 {
                prop_assert!(
                    (a[0] - b[0]).abs() <= 1e-9 * (1.0 + a[0].abs()),
                    "node {}: envelope {} vs covariation {}", node.id, a[0], b[0]
                );
            }
        }
    }

    #[test]
    fn na1_outcomes_are_mutually_exclusive(seed in any::<u64>()) {
        let mut r = rng(seed);
        let fam = random_tree(&TreeGenConfig::mixed(1), &mut r);
        let report = na1_check(&fam).unwrap();
        if report.holds {
            prop_assert!(report.certificate.is_none());
            prop_assert_eq!(report.measures.len(), fam.models().len());
        } else {
            prop_assert!(report.certificate.is_some());
            prop_assert!(report.measures.is_empty());
            let cert = report.certificate.as_ref().unwrap();
            prop_assert!(quasisure::na1::certificate_validate(&fam, cert));
        }
    }
}
