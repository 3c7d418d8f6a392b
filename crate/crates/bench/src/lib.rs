//! Shared fixtures for the criterion benches.

use provtap_core::model::{ProvEvent, WorkerId};
use provtap_core::schema::Schema;
use provtap_core::testkit::CORPUS_SCHEMA;

pub fn schema() -> Schema {
    Schema::parse_str(CORPUS_SCHEMA).expect("corpus schema is valid")
}

pub fn worker() -> WorkerId {
    WorkerId::new(41).expect("positive")
}

/// A storefront-shaped statement mix.
pub const STATEMENTS: &[&str] = &[
    "SELECT title, price FROM products WHERE id = 7",
    "SELECT employee_id, CONCAT(firstname, lastname) FROM employees WHERE MAX(salary) > 1000000",
    "SELECT c.name, o.total FROM customers AS c INNER JOIN orders AS o ON c.id = o.customer_id",
    "SELECT x FROM (SELECT employee_id AS x FROM employees) WHERE x > 10",
    "UPDATE products SET stock = stock + 1 WHERE id = 4",
    "INSERT INTO orders (id, customer_id, total) VALUES (1, 2, 3)",
];

/// The event stream of one typical unit of work.
pub fn unit_events(worker: WorkerId, uuid: uuid::Uuid) -> Vec<ProvEvent> {
    use provtap_core::model::SqlObject;
    let mut events = vec![ProvEvent::UnitStart {
        worker,
        uuid,
        remote_addr: "203.0.113.7:41200".parse().expect("literal"),
    }];
    for spec in ["products", "products.title", "products.price"] {
        events.push(ProvEvent::SqlRead {
            worker,
            object: SqlObject::parse(spec).expect("valid"),
        });
    }
    events.push(ProvEvent::SqlUsed {
        worker,
        object: SqlObject::parse("products.id").expect("valid"),
    });
    events.push(ProvEvent::ResponseImpact {
        worker,
        rows: 3,
        bytes: 90,
    });
    events.push(ProvEvent::UnitEnd { worker, uuid });
    events
}
