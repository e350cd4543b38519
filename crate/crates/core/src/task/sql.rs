//! Text-to-SQL scored by execution accuracy against SQLite databases.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use regex::Regex;
use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};

use crate::config::TaskKind;

use super::{pair_outputs, str_field, PromptTemplate, QualityScore, Task, TaskError, TaskInstance};

pub const AUX_DB_PATH: &str = "db_path";
pub const AUX_GOLD_SQL: &str = "gold_sql";

pub struct SqlTask {
    pub template: PromptTemplate,
}

impl Task for SqlTask {
    fn kind(&self) -> TaskKind {
        TaskKind::Sql
    }

    fn instance_from_record(
        &self,
        id: String,
        record: &serde_json::Value,
        dataset_dir: &Path,
    ) -> Result<TaskInstance, String> {
        let question = str_field(record, "question")?;
        let db_path = str_field(record, "db_path")?;
        let gold_sql = str_field(record, "gold_sql")?;
        let db_path = if Path::new(db_path).is_absolute() {
            db_path.to_string()
        } else {
            dataset_dir.join(db_path).display().to_string()
        };
        let schema = read_schema(&db_path).unwrap_or_default();
        let mut vars = HashMap::new();
        vars.insert("question", question.to_string());
        vars.insert("schema", schema);
        let mut aux = BTreeMap::new();
        aux.insert(AUX_DB_PATH.to_string(), db_path);
        aux.insert(AUX_GOLD_SQL.to_string(), gold_sql.to_string());
        Ok(TaskInstance {
            id,
            prompt: self.template.render(&vars)?,
            references: vec![gold_sql.to_string()],
            aux,
        })
    }

    fn quality_metrics(
        &self,
        outputs: &[(String, String)],
        instances: &[TaskInstance],
    ) -> Result<Vec<QualityScore>, TaskError> {
        Ok(vec![score_sql_execution(outputs, instances)?])
    }
}

fn open_read_only(path: &str) -> Result<Connection, TaskError> {
    let err = |e: rusqlite::Error| TaskError::Database {
        path: path.to_string(),
        message: e.to_string(),
    };
    let conn = Connection::open_with_flags(
        path,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )
    .map_err(err)?;
    // Opening is lazy; touch the schema so unreadable files fail here.
    conn.query_row("SELECT count(*) FROM sqlite_master", [], |r| r.get::<_, i64>(0))
        .map_err(err)?;
    Ok(conn)
}

fn read_schema(path: &str) -> Option<String> {
    let conn = open_read_only(path).ok()?;
    let mut stmt = conn
        .prepare("SELECT sql FROM sqlite_master WHERE type = 'table' AND sql IS NOT NULL ORDER BY name")
        .ok()?;
    let rows = stmt
        .query_map([], |r| r.get::<_, String>(0))
        .ok()?
        .filter_map(Result::ok)
        .collect::<Vec<_>>();
    Some(rows.join(";\n"))
}

/// One result cell in a form that compares across integer/real storage.
fn canonical_cell(v: ValueRef<'_>) -> String {
    match v {
        ValueRef::Null => "N".to_string(),
        ValueRef::Integer(i) => format!("n{i}"),
        ValueRef::Real(f) => {
            if f.fract() == 0.0 && f.abs() < 9.0e15 {
                format!("n{}", f as i64)
            } else {
                format!("r{f}")
            }
        }
        ValueRef::Text(t) => format!("t{}", String::from_utf8_lossy(t)),
        ValueRef::Blob(b) => format!("b{}", b.iter().map(|x| format!("{x:02x}")).collect::<String>()),
    }
}

/// Executes `sql` and returns its rows in canonical form.
pub fn execute_rows(conn: &Connection, sql: &str) -> Result<Vec<Vec<String>>, rusqlite::Error> {
    let mut stmt = conn.prepare(sql)?;
    if !stmt.readonly() {
        return Err(rusqlite::Error::InvalidQuery);
    }
    let columns = stmt.column_count();
    let mut rows = stmt.query([])?;
    let mut out = Vec::new();
    while let Some(row) = rows.next()? {
        let mut cells = Vec::with_capacity(columns);
        for i in 0..columns {
            cells.push(canonical_cell(row.get_ref(i)?));
        }
        out.push(cells);
    }
    Ok(out)
}

/// True when `sql` has an ORDER BY outside any parentheses or literals.
pub fn has_top_level_order_by(sql: &str) -> bool {
    let mut depth = 0i32;
    let mut scrubbed = String::with_capacity(sql.len());
    let mut quote: Option<char> = None;
    for c in sql.chars() {
        match quote {
            Some(q) => {
                if c == q {
                    quote = None;
                }
                scrubbed.push(' ');
            }
            None => match c {
                '\'' | '"' | '`' => {
                    quote = Some(c);
                    scrubbed.push(' ');
                }
                '(' => {
                    depth += 1;
                    scrubbed.push(' ');
                }
                ')' => {
                    depth -= 1;
                    scrubbed.push(' ');
                }
                _ if depth > 0 => scrubbed.push(' '),
                _ => scrubbed.push(c),
            },
        }
    }
    static_order_by().is_match(&scrubbed)
}

fn static_order_by() -> &'static Regex {
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\border\s+by\b").unwrap())
}

/// Pulls the SQL statement out of a model response.
pub fn extract_sql(text: &str) -> String {
    if let Some(start) = text.find("```") {
        let after = &text[start + 3..];
        if let Some(end) = after.find("```") {
            let block = &after[..end];
            // Drop an info string such as `sql` on the opening fence line.
            let body = match block.split_once('\n') {
                Some((first, rest)) if !first.trim().contains(' ') => rest,
                _ => block,
            };
            return body.trim().to_string();
        }
    }
    static RE: std::sync::OnceLock<Regex> = std::sync::OnceLock::new();
    let re = RE.get_or_init(|| Regex::new(r"(?i)\b(SELECT|WITH|INSERT|UPDATE|DELETE)\b").unwrap());
    if let Some(m) = re.find(text) {
        let tail = &text[m.start()..];
        let stmt = match tail.find(';') {
            Some(end) => &tail[..=end],
            None => tail,
        };
        return stmt.trim().to_string();
    }
    text.trim().to_string()
}

/// Whether the predicted query returns the same result as the gold query.
pub fn results_match(gold_sql: &str, gold: &[Vec<String>], mut pred: Vec<Vec<String>>) -> bool {
    if has_top_level_order_by(gold_sql) {
        return gold == pred.as_slice();
    }
    let mut gold = gold.to_vec();
    gold.sort();
    pred.sort();
    gold == pred
}

pub fn score_sql_execution(
    outputs: &[(String, String)],
    instances: &[TaskInstance],
) -> Result<QualityScore, TaskError> {
    let mut values = Vec::new();
    for (inst, text) in pair_outputs(outputs, instances) {
        let db_path = inst.aux.get(AUX_DB_PATH).ok_or_else(|| TaskError::Database {
            path: String::new(),
            message: format!("instance {} has no db_path", inst.id),
        })?;
        let gold_sql = inst.aux.get(AUX_GOLD_SQL).ok_or_else(|| TaskError::Database {
            path: db_path.clone(),
            message: format!("instance {} has no gold_sql", inst.id),
        })?;
        let conn = open_read_only(db_path)?;
        let gold = execute_rows(&conn, gold_sql).map_err(|e| TaskError::Database {
            path: db_path.clone(),
            message: format!("gold query for {} failed: {e}", inst.id),
        })?;
        let predicted = extract_sql(text);
        let hit = match execute_rows(&conn, &predicted) {
            Ok(rows) => results_match(gold_sql, &gold, rows),
            Err(_) => false,
        };
        values.push((inst.id.clone(), if hit { 1.0 } else { 0.0 }));
    }
    Ok(QualityScore::from_values("execution_accuracy", values))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fence_stripping() {
        assert_eq!(extract_sql("```sql\nSELECT 1\n```"), "SELECT 1");
        assert_eq!(extract_sql("```\nSELECT 2\n```"), "SELECT 2");
    }

    #[test]
    fn keyword_scan() {
        assert_eq!(extract_sql("Sure! SELECT name FROM t;"), "SELECT name FROM t;");
        assert_eq!(extract_sql("select a from b; -- done"), "select a from b;");
    }

    #[test]
    fn passthrough() {
        assert_eq!(extract_sql("  no query here "), "no query here");
    }

    #[test]
    fn order_by_detection() {
        assert!(has_top_level_order_by("SELECT a FROM t ORDER BY a"));
        assert!(!has_top_level_order_by("SELECT a FROM (SELECT a FROM t ORDER BY a)"));
        assert!(!has_top_level_order_by("SELECT 'order by' FROM t"));
        assert!(!has_top_level_order_by("SELECT a FROM t"));
    }
}
