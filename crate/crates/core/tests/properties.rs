use std::fmt::Write as _;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use strongfm::fixtures::COREBOOT_FM;
use strongfm::stats::{median_and_coverage, spearman_rho, wilcoxon_signed_rank, Alternative};
use strongfm::synth::random_cnf;
use strongfm::{
    analyze_formula, emit_dimacs, enumerate_models, export_graph, parse_dimacs, parse_fm,
    parse_fm_to_cnf, ExtractOptions, GraphFormat,
};

/// Random feature model text with at most `max_features` features.
fn random_fm_text(seed: u64, max_features: usize) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Per feature: child features, declaration keyword and child groups.
    let mut children: Vec<Vec<usize>> = vec![Vec::new()];
    let mut keyword: Vec<&str> = vec!["feature"];
    let mut groups: Vec<Vec<(bool, Vec<usize>)>> = vec![Vec::new()];
    let mut count = 1;
    while count < max_features {
        let parent = rng.gen_range(0..count);
        if keyword[parent].starts_with('-') {
            continue;
        }
        if count + 2 <= max_features && rng.gen_bool(0.25) {
            let size = rng.gen_range(2..=3.min(max_features - count));
            let members: Vec<usize> = (count..count + size).collect();
            for _ in 0..size {
                children.push(Vec::new());
                groups.push(Vec::new());
                keyword.push("-member");
            }
            groups[parent].push((rng.gen_bool(0.5), members));
            count += size;
        } else {
            children.push(Vec::new());
            groups.push(Vec::new());
            keyword.push(if rng.gen_bool(0.4) {
                "mandatory"
            } else {
                "optional"
            });
            children[parent].push(count);
            count += 1;
        }
    }

    fn emit(
        out: &mut String,
        i: usize,
        depth: usize,
        children: &[Vec<usize>],
        keyword: &[&str],
        groups: &[Vec<(bool, Vec<usize>)>],
    ) {
        let _ = writeln!(out, "{}{} F{i}", "  ".repeat(depth), keyword[i]);
        for &c in &children[i] {
            emit(out, c, depth + 1, children, keyword, groups);
        }
        for (alternative, members) in &groups[i] {
            let names: Vec<String> = members.iter().map(|m| format!("F{m}")).collect();
            let kind = if *alternative { "alternative" } else { "or" };
            let _ = writeln!(
                out,
                "{}{kind} {{ {} }}",
                "  ".repeat(depth + 1),
                names.join(" ")
            );
        }
    }
    let mut text = String::new();
    emit(&mut text, 0, 0, &children, &keyword, &groups);

    let atom = |rng: &mut ChaCha8Rng| {
        let name = format!("F{}", rng.gen_range(0..count));
        if rng.gen_bool(0.3) {
            format!("!{name}")
        } else {
            name
        }
    };
    for _ in 0..rng.gen_range(0..=3) {
        let (a, b, c) = (atom(&mut rng), atom(&mut rng), atom(&mut rng));
        let expr = match rng.gen_range(0..4) {
            0 => format!("{a} => {b}"),
            1 => format!("{a} => {b} | {c}"),
            2 => format!("!({a} & {b}) | {c}"),
            _ => format!("({a} | {b}) => !{c}"),
        };
        let _ = writeln!(text, "constraint {expr}");
    }
    text
}

fn assignments(n: usize) -> impl Iterator<Item = Vec<bool>> {
    (0u32..1 << n).map(move |bits| (0..n).map(|i| bits >> i & 1 == 1).collect())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fm_encoding_matches_semantics(seed in any::<u64>(), size in 1usize..=12) {
        let text = random_fm_text(seed, size);
        let fm = parse_fm(&text).unwrap();
        let cnf = parse_fm_to_cnf(&text).unwrap();
        prop_assert_eq!(cnf.num_vars() as usize, fm.features.len());
        for a in assignments(fm.features.len()) {
            prop_assert_eq!(fm.is_valid_configuration(&a), cnf.eval(&a), "{}", text);
        }
    }

    #[test]
    fn dimacs_round_trip(seed in any::<u64>(), n in 1u32..30, ratio in 0.0f64..5.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random_cnf(&mut rng, n, ratio, 3);
        let text = emit_dimacs(&f);
        let back = parse_dimacs(&text).unwrap();
        prop_assert_eq!(&back, &f);
        prop_assert_eq!(emit_dimacs(&back), text);
    }

    #[test]
    fn spearman_is_invariant_under_monotone_maps(
        xs in prop::collection::vec(-50i32..50, 4..30),
        ys in prop::collection::vec(-50i32..50, 4..30),
    ) {
        let n = xs.len().min(ys.len());
        let x: Vec<f64> = xs[..n].iter().map(|&v| f64::from(v)).collect();
        let y: Vec<f64> = ys[..n].iter().map(|&v| f64::from(v)).collect();
        let rho = spearman_rho(&x, &y).unwrap();
        let x2: Vec<f64> = x.iter().map(|v| v.powi(3) + 7.0).collect();
        let y2: Vec<f64> = y.iter().map(|v| (v / 10.0).exp()).collect();
        let rho2 = spearman_rho(&x2, &y2).unwrap();
        match (rho, rho2) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
        if let Some(r) = rho {
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn wilcoxon_relabeling_symmetry(
        pairs in prop::collection::vec((0i32..20, 0i32..20), 1..70),
    ) {
        let a: Vec<f64> = pairs.iter().map(|p| f64::from(p.0)).collect();
        let b: Vec<f64> = pairs.iter().map(|p| f64::from(p.1)).collect();
        let ab = wilcoxon_signed_rank(&a, &b, Alternative::AGreater).unwrap();
        let ba = wilcoxon_signed_rank(&b, &a, Alternative::BGreater).unwrap();
        prop_assert_eq!(ab.p_value.to_bits(), ba.p_value.to_bits());
        prop_assert!((0.0..=1.0).contains(&ab.p_value));
        prop_assert!((ab.effect_size - ab.z_value / (ab.n_effective.max(1) as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn coverage_is_permutation_invariant_and_scale_equivariant(
        values in prop::collection::vec(-1000i32..1000, 1..60),
        scale in 1u32..50,
        seed in any::<u64>(),
    ) {
        use rand::seq::SliceRandom;
        let v: Vec<f64> = values.iter().map(|&x| f64::from(x)).collect();
        let s = median_and_coverage(&v).unwrap();
        prop_assert!(s.ci_low <= s.median && s.median <= s.ci_high);
        let mut shuffled = v.clone();
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(median_and_coverage(&shuffled).unwrap(), s.clone());
        let c = f64::from(scale) / 4.0;
        let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
        let t = median_and_coverage(&scaled).unwrap();
        prop_assert!((t.median - c * s.median).abs() < 1e-9);
        prop_assert!((t.ci_low - c * s.ci_low).abs() < 1e-9);
        prop_assert!((t.ci_high - c * s.ci_high).abs() < 1e-9);
    }
}

#[test]
fn coreboot_dimacs_emission_is_idempotent() {
    let f = parse_fm_to_cnf(COREBOOT_FM).unwrap();
    let once = emit_dimacs(&f);
    let again = emit_dimacs(&parse_dimacs(&once).unwrap());
    assert_eq!(once, again);
    assert!(once.contains("c 1 COREBOOT"));
}

#[test]
fn coreboot_model_count_matches_semantics() {
    let fm = parse_fm(COREBOOT_FM).unwrap();
    let cnf = parse_fm_to_cnf(COREBOOT_FM).unwrap();
    let expected = assignments(fm.features.len())
        .filter(|a| fm.is_valid_configuration(a))
        .count();
    let enumerated = enumerate_models(&cnf, 25).unwrap().count();
    assert!(expected > 0);
    assert_eq!(enumerated, expected);
}

#[test]
fn coreboot_graphml_is_well_formed() {
    let f = parse_fm_to_cnf(COREBOOT_FM).unwrap();
    let g = analyze_formula(&f, ExtractOptions::default()).unwrap();
    let xml = export_graph(&g, GraphFormat::GraphMl);
    let doc = roxmltree::Document::parse(&xml).unwrap();
    let nodes = doc.descendants().filter(|n| n.has_tag_name("node")).count();
    let edges: Vec<_> = doc
        .descendants()
        .filter(|n| n.has_tag_name("edge"))
        .collect();
    assert_eq!(nodes, g.nodes.len());
    assert_eq!(edges.len(), g.dep_arcs.len() + g.conflict_edges.len());
    let excludes = edges
        .iter()
        .filter(|e| e.children().any(|d| d.text() == Some("excludes")))
        .count();
    assert_eq!(excludes, g.conflict_edges.len());
}
