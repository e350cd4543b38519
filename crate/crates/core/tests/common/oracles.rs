//! Brute-force reference implementations used as test oracles.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use infer_bench::report::ParetoPoint;
use infer_bench::task::TaskInstance;

/// LCS by memoized recursion on suffix pairs.
pub fn lcs(a: &[u8], b: &[u8]) -> usize {
    fn go(a: &[u8], b: &[u8], i: usize, j: usize, memo: &mut BTreeMap<(usize, usize), usize>) -> usize {
        if i == a.len() || j == b.len() {
            return 0;
        }
        if let Some(&v) = memo.get(&(i, j)) {
            return v;
        }
        let v = if a[i] == b[j] {
            1 + go(a, b, i + 1, j + 1, memo)
        } else {
            go(a, b, i + 1, j, memo).max(go(a, b, i, j + 1, memo))
        };
        memo.insert((i, j), v);
        v
    }
    go(a, b, 0, 0, &mut BTreeMap::new())
}

/// LCS-based F1 straight from precision and recall.
pub fn rouge_l(h: &[u8], r: &[u8]) -> f64 {
    if h.is_empty() || r.is_empty() {
        return 0.0;
    }
    let l = lcs(h, r) as f64;
    if l == 0.0 {
        return 0.0;
    }
    let p = l / h.len() as f64;
    let rc = l / r.len() as f64;
    2.0 * p * rc / (p + rc)
}

/// O(n^2) pairwise domination check.
pub fn frontier(points: &[ParetoPoint]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| {
            let p = points[i];
            !points.iter().any(|q| {
                q.quality >= p.quality && q.cost <= p.cost && (q.quality > p.quality || q.cost < p.cost)
            })
        })
        .collect()
}

/// A three-row SQLite database: items(id, name, price).
pub fn sql_fixture(dir: &Path) -> PathBuf {
    let db = dir.join("shop.sqlite");
    let conn = rusqlite::Connection::open(&db).unwrap();
    conn.execute_batch(
        "CREATE TABLE items (id INTEGER PRIMARY KEY, name TEXT, price REAL);
         INSERT INTO items VALUES (1, 'apple', 1.5), (2, 'pear', 2.0), (3, 'plum', 0.5);",
    )
    .unwrap();
    db
}

pub fn sql_instance(id: &str, db: &Path, gold: &str) -> TaskInstance {
    let mut aux = BTreeMap::new();
    aux.insert("db_path".to_string(), db.display().to_string());
    aux.insert("gold_sql".to_string(), gold.to_string());
    TaskInstance {
        id: id.to_string(),
        prompt: String::new(),
        references: vec![gold.to_string()],
        aux,
    }
}

/// Outputs for the fixture with known verdicts: a, c match; b, d miss.
pub fn sql_cases(db: &Path) -> (Vec<TaskInstance>, Vec<(String, String)>, Vec<(&'static str, f64)>) {
    let instances = vec![
        sql_instance("a", db, "SELECT name FROM items"),
        sql_instance("b", db, "SELECT name FROM items ORDER BY price"),
        sql_instance("c", db, "SELECT count(*) FROM items"),
        sql_instance("d", db, "SELECT name FROM items WHERE price > 1"),
    ];
    let outputs = vec![
        // same rows, other order; gold has no ORDER BY
        ("a".to_string(), "```sql\nSELECT name FROM items ORDER BY name DESC;\n```".to_string()),
        // gold is ordered and the prediction's order differs
        ("b".to_string(), "SELECT name FROM items ORDER BY name".to_string()),
        ("c".to_string(), "The answer is SELECT COUNT(id) FROM items; done".to_string()),
        ("d".to_string(), "SELECT nme FROM items".to_string()),
    ];
    let expected = vec![("a", 1.0), ("b", 0.0), ("c", 1.0), ("d", 0.0)];
    (instances, outputs, expected)
}
