//! Acceptance suite, part 1: numeric, state-machine, metric, and
//! gold-extraction criteria. Each test prints one PASS line on success.

use std::collections::BTreeSet;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use schemalink_core::catalog::{build_profiles, load_catalog_str, EvidenceLevel, SchemaCatalog};
use schemalink_core::consolidate::{bucketize, credibility, tally, BucketedSets};
use schemalink_core::dbadapter::MemoryAdapter;
use schemalink_core::evalmetrics::{aggregate, score_sets, Granularity};
use schemalink_core::grounding::SelectionSet;
use schemalink_core::llmio::{ToolCall, Usage};
use schemalink_core::refine::{dispatch_tool, RefinementState};
use schemalink_core::sqlgold::{extract_gold, SqlDialect};
use schemalink_core::{ItemKind, SchemaItemId};

// ---------------------------------------------------------------------------
// Criterion 1: credibility exactness against a Monte Carlo oracle

#[test]
fn criterion_1_credibility_exactness() {
    let start = Instant::now();
    const DRAWS: u32 = 1_000_000;

    let pairs: Vec<(u32, u32)> = (0..=12u32)
        .flat_map(|m| (0..=m).map(move |n| (n, m)))
        .collect();
    assert_eq!(pairs.len(), 91);

    use rayon::prelude::*;
    let worst = pairs
        .par_iter()
        .map(|&(n, m)| {
            let closed = credibility(n, m).unwrap();
            // independent oracle: sample Beta(n+1, m-n+1) directly
            let dist =
                rand_distr::Beta::new((n + 1) as f64, (m - n + 1) as f64).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(42 + (n as u64) * 100 + m as u64);
            let mut hits = 0u32;
            for _ in 0..DRAWS {
                if dist.sample(&mut rng) > 0.5 {
                    hits += 1;
                }
            }
            let mc = hits as f64 / DRAWS as f64;
            (closed - mc).abs()
        })
        .reduce(|| 0.0f64, f64::max);
    assert!(
        worst <= 2e-3,
        "worst closed-form vs Monte Carlo gap {worst} exceeds 2e-3"
    );

    // reflection identity holds exactly (dyadic rationals in f64)
    for m in 0..=12u32 {
        for n in 0..=m {
            let sum = credibility(n, m).unwrap() + credibility(m - n, m).unwrap();
            assert_eq!(sum, 1.0, "reflection identity broke at n={n} m={m}");
        }
    }

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 30, "criterion 1 took {elapsed:?}");
    println!("ACCEPTANCE 1 credibility-exactness: PASS ({elapsed:?})");
}

// ---------------------------------------------------------------------------
// Criterion 2: paper-anchored bucketing at K=4, tau_req=0.85

fn tiny_catalog() -> SchemaCatalog {
    load_catalog_str(
        r#"
database = "db"
[[tables]]
name = "t0"
columns = [{ name = "a" }]
[[tables]]
name = "t3"
columns = [{ name = "a" }]
[[tables]]
name = "t4"
columns = [{ name = "a" }]
"#,
    )
    .unwrap()
}

#[test]
fn criterion_2_paper_anchored_bucketing() {
    let catalog = tiny_catalog();
    // M = 4 selection paths; table t3 supported by 3, t4 by all 4, t0 by none
    let selections: Vec<SelectionSet> = (0..4)
        .map(|i| {
            let mut s = SelectionSet::new(i as u32 + 1);
            if i < 3 {
                s.tables.insert(SchemaItemId::table("db", "t3"));
            }
            s.tables.insert(SchemaItemId::table("db", "t4"));
            s
        })
        .collect();
    let tallies = tally(&selections, &catalog);
    assert_eq!(tallies.get("db.t3").unwrap().n, 3);
    assert_eq!(tallies.get("db.t4").unwrap().n, 4);

    // closed-form anchors: 26/32 and 31/32
    assert_eq!(credibility(3, 4).unwrap(), 26.0 / 32.0);
    assert_eq!(credibility(4, 4).unwrap(), 31.0 / 32.0);

    let buckets = bucketize(&tallies, 0.85, &catalog).unwrap();
    let t3 = SchemaItemId::table("db", "t3");
    let t4 = SchemaItemId::table("db", "t4");
    let t0 = SchemaItemId::table("db", "t0");
    assert!(
        buckets.uncertain.contains(&t3),
        "n=3/M=4 (c=0.8125) must be uncertain"
    );
    assert!(
        buckets.required.contains(&t4),
        "n=4/M=4 (c=0.96875) must be required"
    );
    assert!(buckets.candidate.contains(&t0), "n=0 must be candidate");
    println!("ACCEPTANCE 2 paper-anchored-bucketing: PASS");
}

// ---------------------------------------------------------------------------
// Criterion 3: state-machine soundness under fuzzing

fn fuzz_catalog() -> SchemaCatalog {
    load_catalog_str(
        r#"
database = "db"
[[tables]]
name = "ta"
columns = [{ name = "c1" }, { name = "c2" }, { name = "c3" }]
[[tables]]
name = "tb"
columns = [{ name = "c1" }, { name = "c2" }, { name = "c3" }]
[[tables]]
name = "tc"
columns = [{ name = "c1" }, { name = "c2" }, { name = "c3" }]
"#,
    )
    .unwrap()
}

type Snapshot = (
    BTreeSet<SchemaItemId>,
    BTreeSet<SchemaItemId>,
    BTreeSet<SchemaItemId>,
    BTreeSet<SchemaItemId>,
    Vec<(SchemaItemId, String)>,
);

/// The only legal mutations: U->kept, U->rejected (non-empty reason),
/// C->kept. Everything else must leave the snapshot unchanged.
fn check_transition(before: &Snapshot, after: &Snapshot) {
    let (req_b, unc_b, cand_b, kept_b, rej_b) = before;
    let (req_a, unc_a, cand_a, kept_a, rej_a) = after;
    assert_eq!(req_b, req_a, "required set mutated");
    if before == after {
        return;
    }
    let kept_new: Vec<_> = kept_a.difference(kept_b).cloned().collect();
    let rej_new: Vec<_> = rej_a
        .iter()
        .filter(|r| !rej_b.contains(r))
        .cloned()
        .collect();
    assert_eq!(
        kept_new.len() + rej_new.len(),
        1,
        "a single call decided more than one item"
    );
    assert!(rej_a.len() >= rej_b.len(), "rejected entries vanished");
    if let Some(item) = kept_new.first() {
        // source must be exactly one of uncertain/candidate
        let from_unc = unc_b.contains(item) && !unc_a.contains(item);
        let from_cand = cand_b.contains(item) && !cand_a.contains(item);
        assert!(from_unc ^ from_cand, "keep of `{item}` has no legal source");
    }
    if let Some((item, reason)) = rej_new.first() {
        assert!(
            unc_b.contains(item) && !unc_a.contains(item),
            "discard of `{item}` did not come from uncertain"
        );
        assert!(!reason.trim().is_empty(), "discard recorded without reason");
        assert_eq!(cand_b, cand_a, "discard touched candidates");
    }
}

#[test]
fn criterion_3_state_machine_soundness() {
    let start = Instant::now();
    let catalog = fuzz_catalog();
    let adapter = MemoryAdapter::new();
    let store = build_profiles(&catalog, &adapter, EvidenceLevel::L1, 8).unwrap();
    let items: Vec<SchemaItemId> = catalog.all_items().cloned().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    let tool_names = [
        "keep",
        "discard",
        "list_tables",
        "list_columns",
        "get_field_stats",
        "probe_sql",
        "discard", // weight decisions higher
        "keep",
    ];
    let reasons = ["", "irrelevant to the question", "duplicate join key", " "];

    for seq in 0..10_000u32 {
        // random initial partition of the universe
        let mut buckets = BucketedSets {
            required: BTreeSet::new(),
            uncertain: BTreeSet::new(),
            candidate: BTreeSet::new(),
            tau_req: 0.85,
        };
        for item in &items {
            match rng.gen_range(0..3) {
                0 => buckets.required.insert(item.clone()),
                1 => buckets.uncertain.insert(item.clone()),
                _ => buckets.candidate.insert(item.clone()),
            };
        }
        let mut state = RefinementState::new(&buckets, 8);
        let ops = rng.gen_range(1..=20);
        for op in 0..ops {
            let name = tool_names[rng.gen_range(0..tool_names.len())];
            let item = &items[rng.gen_range(0..items.len())];
            let arguments = match name {
                "keep" => serde_json::json!({ "item": item.short_name() }),
                "discard" => serde_json::json!({
                    "item": item.short_name(),
                    "reason": reasons[rng.gen_range(0..reasons.len())],
                }),
                "list_columns" => serde_json::json!({ "table": item.table.clone() }),
                "get_field_stats" => serde_json::json!({ "field": item.short_name() }),
                "probe_sql" => serde_json::json!({ "sql": "SELECT 1" }),
                _ => serde_json::json!({}),
            };
            let call = ToolCall {
                id: format!("{seq}-{op}"),
                name: name.to_string(),
                arguments,
            };
            let before = state.membership_snapshot();
            let result = dispatch_tool(&mut state, &call, &catalog, &store, &adapter);
            let after = state.membership_snapshot();
            if result.is_error {
                assert_eq!(before, after, "a failed tool call mutated the sets");
            } else if matches!(name, "keep" | "discard") {
                check_transition(&before, &after);
            } else {
                assert_eq!(before, after, "evidence tool `{name}` mutated the sets");
            }
            state.assert_disjoint().unwrap();
        }

        // final-schema identity at finalize
        let linked = state.finalize();
        let mut expected: BTreeSet<SchemaItemId> = BTreeSet::new();
        expected.extend(state.required.iter().cloned());
        expected.extend(state.kept.iter().cloned());
        expected.extend(state.uncertain.iter().cloned());
        for item in &expected {
            assert!(linked.items.contains(item), "finalize lost `{item}`");
        }
        for extra in linked.items.difference(&expected) {
            // the only additions allowed are parent tables of linked fields
            assert_eq!(extra.kind, ItemKind::Table);
            assert!(
                linked
                    .items
                    .iter()
                    .any(|i| i.kind == ItemKind::Field && &i.parent_table() == extra),
                "finalize invented `{extra}`"
            );
        }
        for r in &linked.dropped {
            assert!(
                !linked.items.contains(&r.item),
                "dropped item `{}` still linked",
                r.item
            );
            assert!(!r.reason.trim().is_empty());
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "criterion 3 took {elapsed:?}");
    println!("ACCEPTANCE 3 state-machine-soundness: PASS ({elapsed:?})");
}

// ---------------------------------------------------------------------------
// Criterion 4: metric oracle equivalence

#[test]
fn criterion_4_metric_oracle_equivalence() {
    let start = Instant::now();
    let universe: Vec<String> = (0..30).map(|i| format!("db.t.c{i}")).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut scores = Vec::new();
    let mut saw_empty_gold = false;
    let mut saw_empty_pred = false;

    for case in 0..1_000u32 {
        let (gold, pred): (BTreeSet<String>, BTreeSet<String>) = match case {
            // force the degenerate rules to be exercised
            0 => (BTreeSet::new(), universe.iter().take(3).cloned().collect()),
            1 => (universe.iter().take(3).cloned().collect(), BTreeSet::new()),
            _ => {
                let pick = |rng: &mut ChaCha8Rng| -> BTreeSet<String> {
                    universe
                        .iter()
                        .filter(|_| rng.gen_bool(0.3))
                        .cloned()
                        .collect()
                };
                (pick(&mut rng), pick(&mut rng))
            }
        };
        saw_empty_gold |= gold.is_empty();
        saw_empty_pred |= pred.is_empty();

        let s = score_sets(&case.to_string(), &gold, &pred, Granularity::Field);

        // naive independent recomputation
        let mut tp = 0u32;
        for g in &gold {
            if pred.contains(g) {
                tp += 1;
            }
        }
        let r = if gold.is_empty() { 0.0 } else { f64::from(tp) / gold.len() as f64 };
        let p = if pred.is_empty() { 0.0 } else { f64::from(tp) / pred.len() as f64 };
        let f1 = if r + p == 0.0 { 0.0 } else { 2.0 * r * p / (r + p) };
        let strict = u8::from(!gold.is_empty() && tp as usize == gold.len());
        assert_eq!(s.tp, tp, "case {case}");
        assert_eq!(s.recall, r, "case {case}");
        assert_eq!(s.precision, p, "case {case}");
        assert_eq!(s.f1, f1, "case {case}");
        assert_eq!(s.strict, strict, "case {case}");
        assert!(s.recall >= f64::from(s.strict), "strict exceeds recall");
        scores.push(s);
    }
    assert!(saw_empty_gold && saw_empty_pred);

    let report = aggregate(&scores, &[Usage::new(1, 1)]).unwrap();
    assert!(report.srr <= report.nsr + 1e-12, "SRR must not exceed NSR");

    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "criterion 4 took {elapsed:?}");
    println!("ACCEPTANCE 4 metric-oracle-equivalence: PASS ({elapsed:?})");
}

// ---------------------------------------------------------------------------
// Criterion 5: hand-labeled gold-extraction corpus

fn corpus_catalog() -> SchemaCatalog {
    load_catalog_str(
        r#"
database = "shop"
[[tables]]
name = "customers"
columns = [
  { name = "id" }, { name = "name" }, { name = "city" }, { name = "created_at" },
]
[[tables]]
name = "orders"
columns = [
  { name = "id" }, { name = "customer_id" }, { name = "total" },
  { name = "placed_at" }, { name = "status" },
]
[[tables]]
name = "order_items"
columns = [
  { name = "id" }, { name = "order_id" }, { name = "product_id" },
  { name = "quantity" }, { name = "price" },
]
[[tables]]
name = "products"
columns = [
  { name = "id" }, { name = "name" }, { name = "category" }, { name = "price" },
]
[[tables]]
name = "stores"
columns = [{ name = "id" }, { name = "city" }]
"#,
    )
    .unwrap()
}

struct CorpusCase {
    /// base query, alias-rewritten variant, fully-qualified variant
    variants: [&'static str; 3],
    tables: &'static [&'static str],
    fields: &'static [&'static str],
}

fn corpus() -> Vec<CorpusCase> {
    vec![
        // 1. single column
        CorpusCase {
            variants: [
                "SELECT name FROM customers",
                "SELECT c.name FROM customers c",
                "SELECT customers.name FROM customers",
            ],
            tables: &["shop.customers"],
            fields: &["shop.customers.name"],
        },
        // 2. projection + filter
        CorpusCase {
            variants: [
                "SELECT id, total FROM orders WHERE status = 'open'",
                "SELECT o.id, o.total FROM orders o WHERE o.status = 'open'",
                "SELECT orders.id, orders.total FROM orders WHERE orders.status = 'open'",
            ],
            tables: &["shop.orders"],
            fields: &["shop.orders.id", "shop.orders.status", "shop.orders.total"],
        },
        // 3. two-table join
        CorpusCase {
            variants: [
                "SELECT c.name, o.total FROM customers c JOIN orders o ON c.id = o.customer_id",
                "SELECT x.name, y.total FROM customers x JOIN orders y ON x.id = y.customer_id",
                "SELECT customers.name, orders.total FROM customers JOIN orders ON customers.id = orders.customer_id",
            ],
            tables: &["shop.customers", "shop.orders"],
            fields: &[
                "shop.customers.id",
                "shop.customers.name",
                "shop.orders.customer_id",
                "shop.orders.total",
            ],
        },
        // 4. group by + having
        CorpusCase {
            variants: [
                "SELECT customer_id, SUM(total) FROM orders GROUP BY customer_id HAVING SUM(total) > 100",
                "SELECT o.customer_id, SUM(o.total) FROM orders o GROUP BY o.customer_id HAVING SUM(o.total) > 100",
                "SELECT orders.customer_id, SUM(orders.total) FROM orders GROUP BY orders.customer_id HAVING SUM(orders.total) > 100",
            ],
            tables: &["shop.orders"],
            fields: &["shop.orders.customer_id", "shop.orders.total"],
        },
        // 5. order by an output alias
        CorpusCase {
            variants: [
                "SELECT total AS t FROM orders ORDER BY t",
                "SELECT o.total AS t FROM orders o ORDER BY t",
                "SELECT orders.total AS t FROM orders ORDER BY t",
            ],
            tables: &["shop.orders"],
            fields: &["shop.orders.total"],
        },
        // 6. CTE lineage back to physical fields
        CorpusCase {
            variants: [
                "WITH big AS (SELECT customer_id, SUM(total) AS s FROM orders GROUP BY customer_id) \
                 SELECT c.name, big.s FROM customers c JOIN big ON c.id = big.customer_id",
                "WITH big AS (SELECT o.customer_id, SUM(o.total) AS s FROM orders o GROUP BY o.customer_id) \
                 SELECT cu.name, b.s FROM customers cu JOIN big b ON cu.id = b.customer_id",
                "WITH big AS (SELECT orders.customer_id, SUM(orders.total) AS s FROM orders GROUP BY orders.customer_id) \
                 SELECT customers.name, big.s FROM customers JOIN big ON customers.id = big.customer_id",
            ],
            tables: &["shop.customers", "shop.orders"],
            fields: &[
                "shop.customers.id",
                "shop.customers.name",
                "shop.orders.customer_id",
                "shop.orders.total",
            ],
        },
        // 7. IN subquery
        CorpusCase {
            variants: [
                "SELECT name FROM customers WHERE id IN (SELECT customer_id FROM orders WHERE total > 50)",
                "SELECT c.name FROM customers c WHERE c.id IN (SELECT o.customer_id FROM orders o WHERE o.total > 50)",
                "SELECT customers.name FROM customers WHERE customers.id IN \
                 (SELECT orders.customer_id FROM orders WHERE orders.total > 50)",
            ],
            tables: &["shop.customers", "shop.orders"],
            fields: &[
                "shop.customers.id",
                "shop.customers.name",
                "shop.orders.customer_id",
                "shop.orders.total",
            ],
        },
        // 8. correlated EXISTS
        CorpusCase {
            variants: [
                "SELECT name FROM customers c WHERE EXISTS (SELECT 1 FROM orders o WHERE o.customer_id = c.id)",
                "SELECT cu.name FROM customers cu WHERE EXISTS (SELECT 1 FROM orders ord WHERE ord.customer_id = cu.id)",
                "SELECT customers.name FROM customers WHERE EXISTS \
                 (SELECT 1 FROM orders WHERE orders.customer_id = customers.id)",
            ],
            tables: &["shop.customers", "shop.orders"],
            fields: &[
                "shop.customers.id",
                "shop.customers.name",
                "shop.orders.customer_id",
            ],
        },
        // 9. star expansion
        CorpusCase {
            variants: [
                "SELECT * FROM stores",
                "SELECT s.* FROM stores s",
                "SELECT stores.id, stores.city FROM stores",
            ],
            tables: &["shop.stores"],
            fields: &["shop.stores.city", "shop.stores.id"],
        },
        // 10. qualified star over a join
        CorpusCase {
            variants: [
                "SELECT o.* FROM orders o JOIN customers c ON o.customer_id = c.id",
                "SELECT ord.* FROM orders ord JOIN customers cst ON ord.customer_id = cst.id",
                "SELECT orders.* FROM orders JOIN customers ON orders.customer_id = customers.id",
            ],
            tables: &["shop.customers", "shop.orders"],
            fields: &[
                "shop.customers.id",
                "shop.orders.customer_id",
                "shop.orders.id",
                "shop.orders.placed_at",
                "shop.orders.status",
                "shop.orders.total",
            ],
        },
        // 11. UNION across tables
        CorpusCase {
            variants: [
                "SELECT city FROM customers UNION SELECT city FROM stores",
                "SELECT c.city FROM customers c UNION SELECT s.city FROM stores s",
                "SELECT customers.city FROM customers UNION SELECT stores.city FROM stores",
            ],
            tables: &["shop.customers", "shop.stores"],
            fields: &["shop.customers.city", "shop.stores.city"],
        },
        // 12. UNION + ORDER BY output column
        CorpusCase {
            variants: [
                "SELECT city FROM customers UNION SELECT city FROM stores ORDER BY city",
                "SELECT c.city FROM customers c UNION SELECT s.city FROM stores s ORDER BY city",
                "SELECT customers.city FROM customers UNION SELECT stores.city FROM stores ORDER BY city",
            ],
            tables: &["shop.customers", "shop.stores"],
            fields: &["shop.customers.city", "shop.stores.city"],
        },
        // 13. derived table
        CorpusCase {
            variants: [
                "SELECT d.s FROM (SELECT customer_id, SUM(total) AS s FROM orders GROUP BY customer_id) d \
                 WHERE d.customer_id = 7",
                "SELECT dd.s FROM (SELECT o.customer_id, SUM(o.total) AS s FROM orders o GROUP BY o.customer_id) dd \
                 WHERE dd.customer_id = 7",
                "SELECT d.s FROM (SELECT orders.customer_id, SUM(orders.total) AS s FROM orders \
                 GROUP BY orders.customer_id) d WHERE d.customer_id = 7",
            ],
            tables: &["shop.orders"],
            fields: &["shop.orders.customer_id", "shop.orders.total"],
        },
        // 14. three-way join through a bridge table
        CorpusCase {
            variants: [
                "SELECT p.name FROM products p JOIN order_items oi ON oi.product_id = p.id \
                 JOIN orders o ON oi.order_id = o.id WHERE o.status = 'paid'",
                "SELECT pr.name FROM products pr JOIN order_items it ON it.product_id = pr.id \
                 JOIN orders ord ON it.order_id = ord.id WHERE ord.status = 'paid'",
                "SELECT products.name FROM products JOIN order_items ON order_items.product_id = products.id \
                 JOIN orders ON order_items.order_id = orders.id WHERE orders.status = 'paid'",
            ],
            tables: &["shop.order_items", "shop.orders", "shop.products"],
            fields: &[
                "shop.order_items.order_id",
                "shop.order_items.product_id",
                "shop.orders.id",
                "shop.orders.status",
                "shop.products.id",
                "shop.products.name",
            ],
        },
        // 15. unqualified columns in a single-table scope
        CorpusCase {
            variants: [
                "SELECT name, category FROM products WHERE price > 10",
                "SELECT p.name, p.category FROM products p WHERE p.price > 10",
                "SELECT products.name, products.category FROM products WHERE products.price > 10",
            ],
            tables: &["shop.products"],
            fields: &[
                "shop.products.category",
                "shop.products.name",
                "shop.products.price",
            ],
        },
        // 16. USING join counts the key on both sides
        CorpusCase {
            variants: [
                "SELECT name FROM customers JOIN stores USING (city)",
                "SELECT c.name FROM customers c JOIN stores s USING (city)",
                "SELECT customers.name FROM customers JOIN stores USING (city)",
            ],
            tables: &["shop.customers", "shop.stores"],
            fields: &[
                "shop.customers.city",
                "shop.customers.name",
                "shop.stores.city",
            ],
        },
        // 17. CASE + BETWEEN
        CorpusCase {
            variants: [
                "SELECT CASE WHEN total BETWEEN 10 AND 20 THEN 'mid' ELSE 'other' END FROM orders",
                "SELECT CASE WHEN o.total BETWEEN 10 AND 20 THEN 'mid' ELSE 'other' END FROM orders o",
                "SELECT CASE WHEN orders.total BETWEEN 10 AND 20 THEN 'mid' ELSE 'other' END FROM orders",
            ],
            tables: &["shop.orders"],
            fields: &["shop.orders.total"],
        },
        // 18. window function
        CorpusCase {
            variants: [
                "SELECT id, SUM(total) OVER (PARTITION BY customer_id ORDER BY placed_at) FROM orders",
                "SELECT o.id, SUM(o.total) OVER (PARTITION BY o.customer_id ORDER BY o.placed_at) FROM orders o",
                "SELECT orders.id, SUM(orders.total) OVER (PARTITION BY orders.customer_id \
                 ORDER BY orders.placed_at) FROM orders",
            ],
            tables: &["shop.orders"],
            fields: &[
                "shop.orders.customer_id",
                "shop.orders.id",
                "shop.orders.placed_at",
                "shop.orders.total",
            ],
        },
        // 19. correlated scalar subquery in the projection
        CorpusCase {
            variants: [
                "SELECT c.name, (SELECT MAX(total) FROM orders o WHERE o.customer_id = c.id) FROM customers c",
                "SELECT cu.name, (SELECT MAX(total) FROM orders ord WHERE ord.customer_id = cu.id) FROM customers cu",
                "SELECT customers.name, (SELECT MAX(orders.total) FROM orders \
                 WHERE orders.customer_id = customers.id) FROM customers",
            ],
            tables: &["shop.customers", "shop.orders"],
            fields: &[
                "shop.customers.id",
                "shop.customers.name",
                "shop.orders.customer_id",
                "shop.orders.total",
            ],
        },
        // 20. chained CTEs
        CorpusCase {
            variants: [
                "WITH a AS (SELECT customer_id FROM orders), b AS (SELECT customer_id FROM a) \
                 SELECT customer_id FROM b",
                "WITH a AS (SELECT o.customer_id FROM orders o), b AS (SELECT a.customer_id FROM a) \
                 SELECT b.customer_id FROM b",
                "WITH a AS (SELECT orders.customer_id FROM orders), b AS (SELECT a.customer_id FROM a) \
                 SELECT b.customer_id FROM b",
            ],
            tables: &["shop.orders"],
            fields: &["shop.orders.customer_id"],
        },
        // 21. IN list + LIKE
        CorpusCase {
            variants: [
                "SELECT id FROM products WHERE category IN ('x', 'y') AND name LIKE 'A%'",
                "SELECT p.id FROM products p WHERE p.category IN ('x', 'y') AND p.name LIKE 'A%'",
                "SELECT products.id FROM products WHERE products.category IN ('x', 'y') AND products.name LIKE 'A%'",
            ],
            tables: &["shop.products"],
            fields: &[
                "shop.products.category",
                "shop.products.id",
                "shop.products.name",
            ],
        },
        // 22. COUNT(*) references the table but no field
        CorpusCase {
            variants: [
                "SELECT COUNT(*) FROM orders",
                "SELECT COUNT(*) FROM orders o",
                "SELECT COUNT(*) FROM orders",
            ],
            tables: &["shop.orders"],
            fields: &[],
        },
        // 23. arithmetic over two fields
        CorpusCase {
            variants: [
                "SELECT quantity * price FROM order_items",
                "SELECT oi.quantity * oi.price FROM order_items oi",
                "SELECT order_items.quantity * order_items.price FROM order_items",
            ],
            tables: &["shop.order_items"],
            fields: &["shop.order_items.price", "shop.order_items.quantity"],
        },
    ]
}

#[test]
fn criterion_5_gold_extraction_corpus() {
    let start = Instant::now();
    let catalog = corpus_catalog();
    let cases = corpus();
    assert!(cases.len() >= 20);

    for (i, case) in cases.iter().enumerate() {
        let expected_tables: BTreeSet<String> =
            case.tables.iter().map(|s| s.to_string()).collect();
        let expected_fields: BTreeSet<String> =
            case.fields.iter().map(|s| s.to_string()).collect();
        for (v, sql) in case.variants.iter().enumerate() {
            let g = extract_gold(sql, &catalog, SqlDialect::Ansi)
                .unwrap_or_else(|e| panic!("case {} variant {v}: {e}\n{sql}", i + 1));
            let tables: BTreeSet<String> =
                g.tables.iter().map(|t| t.canonical.clone()).collect();
            let fields: BTreeSet<String> =
                g.fields.iter().map(|f| f.canonical.clone()).collect();
            assert_eq!(
                tables, expected_tables,
                "case {} variant {v} tables\n{sql}", i + 1
            );
            assert_eq!(
                fields, expected_fields,
                "case {} variant {v} fields\n{sql}", i + 1
            );
        }
    }
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 10, "criterion 5 took {elapsed:?}");
    println!(
        "ACCEPTANCE 5 gold-extraction-corpus: PASS ({} queries x 3 variants, {elapsed:?})",
        cases.len()
    );
}
