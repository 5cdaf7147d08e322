mod common;

use std::collections::{BTreeMap, HashMap};

use mlrepair_core::fuzz::{random_edit, random_program, rename_source};
use mlrepair_core::harness::load_corpus;
use mlrepair_core::lang::*;
use mlrepair_core::patch::signature::similarity;
use mlrepair_core::patch::*;
use mlrepair_core::PatchError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn renamed_pair(base: &Program, target: &Program, literals: bool) -> (Program, Program) {
    let mut names = BTreeMap::new();
    let b = parse(&rename_source(&pretty_print(base), &mut names, literals)).unwrap();
    let t = parse(&rename_source(&pretty_print(target), &mut names, literals)).unwrap();
    (b, t)
}

fn sorted_signatures(p: &Patch) -> Vec<String> {
    let mut v: Vec<String> = p.chunks.iter().map(|c| chunk_signature(c).to_string()).collect();
    v.sort();
    v
}

/// Textbook recursive forest edit distance, memoized; exponential without
/// the memo but fine on the small trees used here.
fn naive_ted(a: &[SigTree], b: &[SigTree], memo: &mut HashMap<(Vec<SigTree>, Vec<SigTree>), usize>) -> usize {
    let size = |f: &[SigTree]| f.iter().map(SigTree::size).sum::<usize>();
    if a.is_empty() || b.is_empty() {
        return size(a) + size(b);
    }
    let key = (a.to_vec(), b.to_vec());
    if let Some(&d) = memo.get(&key) {
        return d;
    }
    let (v, w) = (a.last().unwrap(), b.last().unwrap());
    let (ra, rb) = (&a[..a.len() - 1], &b[..b.len() - 1]);
    let mut a_minus_v = ra.to_vec();
    a_minus_v.extend(v.children.iter().cloned());
    let mut b_minus_w = rb.to_vec();
    b_minus_w.extend(w.children.iter().cloned());
    let del = naive_ted(&a_minus_v, b, memo) + 1;
    let ins = naive_ted(a, &b_minus_w, memo) + 1;
    let sub = naive_ted(ra, rb, memo) + naive_ted(&v.children, &w.children, memo) + usize::from(v.label != w.label);
    let d = del.min(ins).min(sub);
    memo.insert(key, d);
    d
}

fn brute_ted(a: &SigTree, b: &SigTree) -> usize {
    naive_ted(std::slice::from_ref(a), std::slice::from_ref(b), &mut HashMap::new())
}

fn random_tree(rng: &mut impl Rng, budget: &mut usize) -> SigTree {
    let label = ["a", "b", "c"][rng.gen_range(0..3)];
    *budget = budget.saturating_sub(1);
    let mut children = Vec::new();
    while *budget > 0 && rng.gen_bool(0.5) {
        children.push(random_tree(rng, budget));
    }
    SigTree::node(label, children)
}

fn patch_between(base: &str, target: &str) -> (Program, Patch) {
    let b = parse(base).unwrap();
    let t = parse(target).unwrap();
    let p = ast_diff(&b, &t);
    (b, p)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn diff_apply_roundtrip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_program(&mut rng);
        let target = random_edit(&base, &mut rng);
        let patch = ast_diff(&base, &target);
        prop_assert_eq!(patch.is_empty(), base == target);
        let applied = apply_patch(&base, &patch).unwrap();
        prop_assert_eq!(pretty_print(&applied), pretty_print(&target));
        prop_assert_eq!(applied, target);
    }

    #[test]
    fn ted_matches_brute_force(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut na, mut nb) = (rng.gen_range(1..8usize), rng.gen_range(1..8usize));
        let a = random_tree(&mut rng, &mut na);
        let b = random_tree(&mut rng, &mut nb);
        prop_assert_eq!(tree_edit_distance(&a, &b), brute_ted(&a, &b));
        prop_assert_eq!(tree_edit_distance(&a, &b), tree_edit_distance(&b, &a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn classification_survives_renaming(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_program(&mut rng);
        let target = random_edit(&base, &mut rng);
        let before = classify(&ast_diff(&base, &target), &base);
        let (rb, rt) = renamed_pair(&base, &target, false);
        prop_assert_eq!(before, classify(&ast_diff(&rb, &rt), &rb));
    }

    #[test]
    fn signatures_survive_renaming_and_literals(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_program(&mut rng);
        let target = random_edit(&base, &mut rng);
        let (rb, rt) = renamed_pair(&base, &target, true);
        prop_assert_eq!(sorted_signatures(&ast_diff(&base, &target)), sorted_signatures(&ast_diff(&rb, &rt)));
    }

    #[test]
    fn related_pair_dominates_similarity(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = loop {
            let p = random_program(&mut rng);
            if p.functions.len() >= 2 {
                break p;
            }
        };
        let guard = |msg: &str, cond: bool| {
            Stmt::new(StmtKind::If(Expr::Bool(cond), Block::new(vec![Stmt::new(StmtKind::Abort(msg.into()))]), None))
        };
        let mut twins = base.clone();
        for f in &mut twins.functions {
            f.body.stmts.insert(0, guard("guard", false));
        }
        twins.renumber();
        let similar = classify(&ast_diff(&base, &twins), &base).unwrap();
        prop_assert!(matches!(similar, PatchClass::SimilarExact | PatchClass::Similar));

        let mut related = twins.clone();
        let body = &mut related.functions[0].body.stmts;
        let at = body.len() - 1;
        body.insert(at, guard("more", true));
        related.renumber();
        let patch = ast_diff(&base, &related);
        prop_assert_eq!(patch.chunks.len(), base.functions.len() + 1);
        prop_assert_eq!(classify(&patch, &base).unwrap(), PatchClass::Relevant);
    }

    #[test]
    fn similarity_is_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = random_program(&mut rng);
        let patch = ast_diff(&base, &random_edit(&base, &mut rng));
        for a in &patch.chunks {
            for b in &patch.chunks {
                prop_assert_eq!(chunks_similar(a, b, 0.7), chunks_similar(b, a, 0.7));
                prop_assert_eq!(chunks_related(a, b, &base), chunks_related(b, a, &base));
            }
        }
    }
}

#[test]
fn corpus_pairs_roundtrip() {
    for bug in load_corpus(&common::corpus_dir()).unwrap() {
        let patch = bug.ground_truth();
        assert_eq!(apply_patch(&bug.buggy, &patch).unwrap(), bug.fixed, "{}", bug.id);
        assert!(ast_diff(&bug.buggy, &bug.buggy).is_empty());
        assert_eq!(
            apply_patch(&bug.buggy, &ast_diff(&bug.buggy, &bug.buggy)).unwrap(),
            bug.buggy
        );
    }
}

#[test]
fn wrong_base_is_rejected() {
    let a = common::bug("twin_guard");
    let b = common::bug("dup_flag");
    assert!(matches!(
        apply_patch(&b.buggy, &a.ground_truth()),
        Err(PatchError::FingerprintMismatch { .. })
    ));
}

#[test]
fn single_statement_fix_changes_one_line() {
    let b = common::bug("single_relop");
    let patch = b.ground_truth();
    assert_eq!(patch.chunks.len(), 1);
    assert_eq!(patch.chunks[0].action, Action::Update);
    let (before, after) = (
        pretty_print(&b.buggy),
        pretty_print(&apply_patch(&b.buggy, &patch).unwrap()),
    );
    let changed: Vec<usize> = before
        .lines()
        .zip(after.lines())
        .enumerate()
        .filter(|(_, (x, y))| x != y)
        .map(|(i, _)| i + 1)
        .collect();
    assert_eq!(before.lines().count(), after.lines().count());
    assert_eq!(changed, [b.meta.faulty_lines[0].line as usize]);
}

#[test]
fn replaced_statement_is_one_chunk() {
    let (_, p) = patch_between(
        "fn f(x: int) -> int { let a: int = x; a = a + 1; return a; }",
        "fn f(x: int) -> int { let a: int = x; abort(\"no\"); return a; }",
    );
    assert_eq!(p.chunks.len(), 1);
    assert_eq!(p.chunks[0].action, Action::Replace);
}

#[test]
fn twin_guard_chunks_share_a_signature() {
    let b = common::bug("twin_guard");
    let patch = b.ground_truth();
    assert_eq!(patch.chunks.len(), 2);
    assert_ne!(patch.chunks[0].location.func, patch.chunks[1].location.func);
    assert_eq!(chunk_signature(&patch.chunks[0]), chunk_signature(&patch.chunks[1]));
    assert_eq!(chunks_similar(&patch.chunks[0], &patch.chunks[1], 0.7), (true, 1.0));
    assert!(!chunks_related(&patch.chunks[0], &patch.chunks[1], &b.buggy));
}

const MAXLIKE: &str = "fn f(b: int, c: int) -> int {
  let m: int = 0;
  return m;
}
";

#[test]
fn identifiers_are_abstracted() {
    let with = |cond: &str| {
        let (_, p) = patch_between(
            MAXLIKE,
            &MAXLIKE.replace(
                "  return m;",
                &format!("  if ({cond}) {{\n    m = 1;\n  }}\n  return m;"),
            ),
        );
        p
    };
    let (x, y) = (with("b > m"), with("c > m"));
    assert_eq!(chunk_signature(&x.chunks[0]), chunk_signature(&y.chunks[0]));
    let (_, del) = patch_between(MAXLIKE, "fn f(b: int, c: int) -> int {\n  return 0;\n}\n");
    assert_ne!(chunk_signature(&x.chunks[0]), chunk_signature(&del.chunks[0]));
}

#[test]
fn one_extra_statement_is_still_similar() {
    let block = |extra: bool| {
        let body = if extra {
            "    m = 1;\n    m = m + 1;\n"
        } else {
            "    m = 1;\n"
        };
        let (_, p) = patch_between(
            MAXLIKE,
            &MAXLIKE.replace("  return m;", &format!("  if (b > c) {{\n{body}  }}\n  return m;")),
        );
        p.chunks[0].clone()
    };
    let (a, b) = (block(false), block(true));
    let (sa, sb) = (chunk_signature(&a), chunk_signature(&b));
    let expect = 1.0 - brute_ted(&sa, &sb) as f64 / (sa.size() + sb.size()) as f64;
    let (similar, sim) = chunks_similar(&a, &b, 0.7);
    assert!((sim - expect).abs() < 1e-12);
    assert!((similarity(&sa, &sb) - expect).abs() < 1e-12);
    assert!(similar && (0.7..1.0).contains(&sim), "{sim}");
}

#[test]
fn action_kind_gates_similarity() {
    let (_, ins) = patch_between(
        MAXLIKE,
        &MAXLIKE.replace("  return m;", "  if (b > c) {\n    m = 1;\n  }\n  return m;"),
    );
    let (_, upd) = patch_between(MAXLIKE, &MAXLIKE.replace("return m;", "return m + 1;"));
    assert!(!chunks_similar(&ins.chunks[0], &upd.chunks[0], 0.7).0);
}

#[test]
fn related_chunk_examples() {
    let d = common::bug("define_call");
    let patch = d.ground_truth();
    let def = patch
        .chunks
        .iter()
        .find(|c| c.location.function_level)
        .expect("function chunk");
    let call = patch.chunks.iter().find(|c| !c.location.function_level).unwrap();
    assert!(chunks_related(def, call, &d.buggy));

    let g = common::bug("guard_cond");
    let patch = g.ground_truth();
    assert_eq!(patch.chunks.len(), 2);
    assert!(chunks_related(&patch.chunks[0], &patch.chunks[1], &g.buggy));
}

#[test]
fn classifier_examples() {
    for (id, class) in [
        ("twin_guard", PatchClass::SimilarExact),
        ("dup_flag", PatchClass::Relevant),
        ("define_call", PatchClass::Relevant),
        ("other_a", PatchClass::Other),
        ("single_relop", PatchClass::SingleLocation),
    ] {
        let b = common::bug(id);
        assert_eq!(classify(&b.ground_truth(), &b.buggy).unwrap(), class, "{id}");
    }
    let b = common::bug("twin_guard");
    assert!(matches!(
        classify(&ast_diff(&b.buggy, &b.buggy), &b.buggy),
        Err(PatchError::EmptyPatch)
    ));
}

const PAIR: &str = "fn g(x: int) -> int {
  let a: int = x;
  return a;
}

fn h(y: int) -> int {
  let b: int = y;
  return b;
}
";

#[test]
fn similar_pair_plus_related_pair_is_relevant() {
    let guarded = PAIR
        .replace(
            "  let a: int = x;",
            "  if (x < 0) {\n    abort(\"bad\");\n  }\n  let a: int = x;",
        )
        .replace(
            "  let b: int = y;",
            "  if (y < 0) {\n    abort(\"bad\");\n  }\n  let b: int = y;",
        );
    let (base, twins) = patch_between(PAIR, &guarded);
    assert_eq!(classify(&twins, &base).unwrap(), PatchClass::SimilarExact);
    let more = guarded.replace("  return a;", "  a = a + 1;\n  return a;");
    let (base, p) = patch_between(PAIR, &more);
    assert_eq!(p.chunks.len(), 3);
    assert_eq!(classify(&p, &base).unwrap(), PatchClass::Relevant);
}

#[test]
fn unrelated_different_actions_are_other() {
    let edited = PAIR
        .replace(
            "  let a: int = x;\n  return a;",
            "  let a: int = x;\n  if (x < 0) {\n    abort(\"bad\");\n  }\n  return a;",
        )
        .replace("  return b;", "  return b * 2;");
    let (base, p) = patch_between(PAIR, &edited);
    assert_eq!(p.chunks.len(), 2);
    assert_eq!(classify(&p, &base).unwrap(), PatchClass::Other);
}

#[test]
fn corpus_labels_match_classifier() {
    for bug in load_corpus(&common::corpus_dir()).unwrap() {
        assert_eq!(
            classify(&bug.ground_truth(), &bug.buggy).unwrap(),
            bug.meta.expected_class,
            "{}",
            bug.id
        );
    }
}
