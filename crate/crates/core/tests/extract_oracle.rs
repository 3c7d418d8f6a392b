//! Extraction properties checked against the independent brute-force
//! oracle over generated statement corpora.

use std::collections::BTreeSet;

use provtap_core::model::SqlObject;
use provtap_core::sql::{extract, parse};
use provtap_core::testkit::{
    corpus_schema, oracle_extract, random_statement, wrap_in_derived, Rng,
};

fn assert_matches_oracle(sql: &str) {
    let schema = corpus_schema();
    let stmt = parse(sql).unwrap_or_else(|e| panic!("parse failed for {sql:?}: {e}"));
    let got = extract(&stmt, &schema).unwrap_or_else(|e| panic!("extract failed for {sql:?}: {e}"));
    let want =
        oracle_extract(sql, &schema).unwrap_or_else(|e| panic!("oracle failed for {sql:?}: {e}"));
    assert_eq!(got.reads, want.reads, "reads diverge for {sql:?}");
    assert_eq!(got.used, want.used, "used diverge for {sql:?}");
    assert_eq!(got.writes, want.writes, "writes diverge for {sql:?}");
}

#[test]
fn oracle_equivalence_on_generated_corpus() {
    let mut rng = Rng::new(0x5eed_0001);
    let mut checked = 0;
    while checked < 250 {
        let generated = random_statement(&mut rng);
        assert_matches_oracle(&generated.sql);
        checked += 1;
    }
}

#[test]
fn alias_erasure_on_generated_selects() {
    let schema = corpus_schema();
    let mut rng = Rng::new(0x5eed_0002);
    let mut checked = 0;
    while checked < 220 {
        let generated = random_statement(&mut rng);
        if !generated.wrappable {
            continue;
        }
        let original = extract(&parse(&generated.sql).unwrap(), &schema)
            .unwrap_or_else(|e| panic!("extract failed for {:?}: {e}", generated.sql));
        let renamed = extract(&parse(&generated.aliased).unwrap(), &schema)
            .unwrap_or_else(|e| panic!("extract failed for {:?}: {e}", generated.aliased));
        assert_eq!(
            (original.reads, original.used, original.writes),
            (renamed.reads, renamed.used, renamed.writes),
            "alias renaming changed extraction: {:?} vs {:?}",
            generated.sql,
            generated.aliased
        );
        checked += 1;
    }
}

#[test]
fn ephemeral_blindness_on_generated_statements() {
    let schema = corpus_schema();
    let mut rng = Rng::new(0x5eed_0003);
    for _ in 0..220 {
        let generated = random_statement(&mut rng);
        let original = extract(&parse(&generated.sql).unwrap(), &schema).unwrap();
        let relit = extract(&parse(&generated.relit).unwrap(), &schema).unwrap();
        assert_eq!(
            (original.reads, original.used, original.writes),
            (relit.reads, relit.used, relit.writes),
            "literal changes altered extraction: {:?} vs {:?}",
            generated.sql,
            generated.relit
        );
    }
}

#[test]
fn nesting_flattening_leaves_extraction_unchanged() {
    let schema = corpus_schema();
    let mut rng = Rng::new(0x5eed_0004);
    let mut checked = 0;
    while checked < 120 {
        let generated = random_statement(&mut rng);
        if !generated.wrappable {
            continue;
        }
        let original = extract(&parse(&generated.sql).unwrap(), &schema).unwrap();
        let wrapped_sql = wrap_in_derived(&generated.sql);
        let wrapped = extract(&parse(&wrapped_sql).unwrap(), &schema)
            .unwrap_or_else(|e| panic!("extract failed for {wrapped_sql:?}: {e}"));
        assert_eq!(
            original.reads, wrapped.reads,
            "wrapping changed reads: {wrapped_sql:?}"
        );
        assert_eq!(
            original.used, wrapped.used,
            "wrapping changed used: {wrapped_sql:?}"
        );
        checked += 1;
    }
}

#[test]
fn oracle_agrees_on_handwritten_edge_cases() {
    for sql in [
        "SELECT employee_id, CONCAT(firstname, lastname) FROM employees WHERE MAX(salary) > 1000000",
        "SELECT name AS n FROM customers ORDER BY n",
        "SELECT * FROM products",
        "SELECT products.*, title AS t FROM products WHERE price > 10",
        "SELECT p.title FROM products AS p INNER JOIN orders o ON p.id = o.id WHERE o.total > 5",
        "SELECT x FROM (SELECT salary AS x FROM employees) d",
        "SELECT total FROM orders WHERE customer_id IN (SELECT id FROM customers WHERE name = 'a')",
        "UPDATE products SET stock = stock + 1 WHERE id = 3",
        "INSERT INTO orders (id, total) VALUES (1, 2)",
        "INSERT INTO products VALUES (1, 'x', 2, 3)",
    ] {
        assert_matches_oracle(sql);
    }
}

// A frozen, hand-computed anchor so the oracle itself is checked against
// something that is not code.
#[test]
fn frozen_expectations_anchor_the_oracle() {
    let schema = corpus_schema();
    let sql = "SELECT p.title, UPPER(name) AS n FROM products p, customers \
               WHERE p.price > 10 AND customers.id IN (SELECT customer_id FROM orders) \
               ORDER BY n";
    let want_reads: BTreeSet<SqlObject> = [
        "products",
        "products.title",
        "customers",
        "customers.name",
        "orders",
        "orders.customer_id",
    ]
    .iter()
    .map(|s| SqlObject::parse(s).unwrap())
    .collect();
    let want_used: BTreeSet<SqlObject> = ["products.price", "customers.id", "customers.name"]
        .iter()
        .map(|s| SqlObject::parse(s).unwrap())
        .collect();

    let got = extract(&parse(sql).unwrap(), &schema).unwrap();
    assert_eq!(got.reads, want_reads);
    assert_eq!(got.used, want_used);
    assert!(got.writes.is_empty());

    let oracle = oracle_extract(sql, &schema).unwrap();
    assert_eq!(oracle.reads, want_reads);
    assert_eq!(oracle.used, want_used);
}
