//! Embedded relational experience store.
//!
//! The core schema ships as migration files; hardware and skills may add
//! their own tables through [`SchemaExtension`]s. Execution rows are
//! append-only and carry their matrices as packed blobs.

use std::collections::BTreeSet;
use std::path::Path;
use std::sync::{Mutex, MutexGuard};

use rusqlite::{params, Connection, OptionalExtension, Row};
use serde::{Deserialize, Serialize};

use super::{CallProfileMatrix, ExecutionRecord, MemoryError, SensorMatrix, SubjectKind};

const MIGRATIONS: &[(u32, &str, &str)] = &[(1, "core", include_str!("../../migrations/0001_core.sql"))];

const CORE_TABLES: &[&str] = &[
    "hardware",
    "behaviours",
    "skills",
    "executions",
    "schema_extensions",
    "extension_tables",
    "schema_migrations",
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionFilter {
    pub subject: Option<String>,
    pub success: Option<bool>,
    pub limit: Option<usize>,
}

impl ExecutionFilter {
    pub fn subject(subject: impl Into<String>) -> Self {
        ExecutionFilter {
            subject: Some(subject.into()),
            ..Self::default()
        }
    }

    pub fn with_success(mut self, success: bool) -> Self {
        self.success = Some(success);
        self
    }

    pub fn with_limit(mut self, limit: usize) -> Self {
        self.limit = Some(limit);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Integer,
    Real,
    Text,
    Blob,
}

impl ColumnType {
    fn sql(self) -> &'static str {
        match self {
            ColumnType::Integer => "INTEGER",
            ColumnType::Real => "REAL",
            ColumnType::Text => "TEXT",
            ColumnType::Blob => "BLOB",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDefinition {
    pub name: String,
    #[serde(rename = "type")]
    pub column_type: ColumnType,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableDefinition {
    pub name: String,
    pub columns: Vec<ColumnDefinition>,
}

/// Additional tables contributed by a hardware component or skill.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemaExtension {
    pub owner: String,
    pub version: u32,
    pub tables: Vec<TableDefinition>,
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

impl SchemaExtension {
    fn check(&self) -> Result<(), MemoryError> {
        let bad = |m: String| Err(MemoryError::MalformedSchema(m));
        if self.owner.is_empty() {
            return bad("empty owner".into());
        }
        let mut tables = BTreeSet::new();
        for t in &self.tables {
            if !is_identifier(&t.name) {
                return bad(format!("bad table name {:?}", t.name));
            }
            if CORE_TABLES.contains(&t.name.as_str()) {
                return bad(format!("{} is a core table", t.name));
            }
            if !tables.insert(t.name.as_str()) {
                return bad(format!("table {} defined twice", t.name));
            }
            let mut cols = BTreeSet::new();
            for c in &t.columns {
                if !is_identifier(&c.name) || c.name.eq_ignore_ascii_case("id") {
                    return bad(format!("bad column name {:?} in {}", c.name, t.name));
                }
                if !cols.insert(c.name.to_ascii_lowercase()) {
                    return bad(format!("column {} defined twice in {}", c.name, t.name));
                }
            }
        }
        Ok(())
    }
}

/// Handle to the experience database. Writes are serialized through one connection.
#[derive(Debug)]
pub struct Store {
    conn: Mutex<Connection>,
}

impl Store {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, MemoryError> {
        let conn = Connection::open(path)?;
        conn.pragma_update(None, "journal_mode", "WAL")?;
        conn.pragma_update(None, "synchronous", "NORMAL")?;
        Self::init(conn)
    }

    pub fn open_in_memory() -> Result<Self, MemoryError> {
        Self::init(Connection::open_in_memory()?)
    }

    fn init(conn: Connection) -> Result<Self, MemoryError> {
        conn.pragma_update(None, "foreign_keys", "ON")?;
        conn.execute_batch(
            "CREATE TABLE IF NOT EXISTS schema_migrations (
                 version INTEGER PRIMARY KEY,
                 name    TEXT NOT NULL
             );",
        )?;
        for (version, name, sql) in MIGRATIONS {
            let applied: bool = conn
                .query_row(
                    "SELECT 1 FROM schema_migrations WHERE version = ?1",
                    [version],
                    |_| Ok(true),
                )
                .optional()?
                .unwrap_or(false);
            if !applied {
                let tx = conn.unchecked_transaction()?;
                tx.execute_batch(sql)?;
                tx.execute(
                    "INSERT INTO schema_migrations (version, name) VALUES (?1, ?2)",
                    params![version, name],
                )?;
                tx.commit()?;
            }
        }
        Ok(Store { conn: Mutex::new(conn) })
    }

    fn conn(&self) -> MutexGuard<'_, Connection> {
        self.conn.lock().expect("store connection poisoned")
    }

    pub fn applied_migrations(&self) -> Result<Vec<u32>, MemoryError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT version FROM schema_migrations ORDER BY version")?;
        let rows = stmt.query_map([], |r| r.get(0))?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    /// Appends `record` and returns its new id.
    pub fn persist_execution(&self, record: &ExecutionRecord) -> Result<i64, MemoryError> {
        if record.id.is_some() {
            return Err(MemoryError::AppendOnly);
        }
        record.validate()?;
        let hardware = serde_json::to_string(&record.hardware_config)?;
        let situation = record.situation.map(|s| serde_json::to_string(&s)).transpose()?;
        let conn = self.conn();
        conn.execute(
            "INSERT INTO executions (subject, subject_kind, start_tick, end_tick, success,
                 hardware, situation, failure, tick_length, sensor, profile)
             VALUES (?1, ?2, ?3, ?4, ?5, ?6, ?7, ?8, ?9, ?10, ?11)",
            params![
                record.subject,
                record.subject_kind.as_str(),
                record.start_tick as i64,
                record.end_tick as i64,
                record.success,
                hardware,
                situation,
                record.failure,
                record.sensor.tick_length,
                record.sensor.to_blob(),
                record.profile.to_blob(),
            ],
        )?;
        Ok(conn.last_insert_rowid())
    }

    pub fn fetch_execution(&self, id: i64) -> Result<Option<ExecutionRecord>, MemoryError> {
        let conn = self.conn();
        let mut stmt = conn.prepare(&format!("{SELECT_EXECUTION} WHERE id = ?1"))?;
        let raw = stmt.query_row([id], RawExecution::from_row).optional()?;
        raw.map(RawExecution::decode).transpose()
    }

    /// Records matching every set filter field, newest start tick first.
    pub fn fetch_executions(&self, filter: &ExecutionFilter) -> Result<Vec<ExecutionRecord>, MemoryError> {
        if filter.subject.as_deref() == Some("") {
            return Err(MemoryError::MalformedFilter("empty subject".into()));
        }
        if filter.limit == Some(0) {
            return Err(MemoryError::MalformedFilter("limit must be positive".into()));
        }
        let limit = filter.limit.map(|l| l.min(i64::MAX as usize) as i64).unwrap_or(-1);
        let conn = self.conn();
        let mut stmt = conn.prepare(&format!(
            "{SELECT_EXECUTION}
             WHERE (?1 IS NULL OR subject = ?1) AND (?2 IS NULL OR success = ?2)
             ORDER BY start_tick DESC, id DESC
             LIMIT ?3"
        ))?;
        let rows = stmt.query_map(params![filter.subject, filter.success, limit], RawExecution::from_row)?;
        let mut out = Vec::new();
        for raw in rows {
            out.push(raw?.decode()?);
        }
        Ok(out)
    }

    pub fn execution_count(&self) -> Result<usize, MemoryError> {
        let n: i64 = self.conn().query_row("SELECT COUNT(*) FROM executions", [], |r| r.get(0))?;
        Ok(n as usize)
    }

    /// Attempts to overwrite the outcome of a persisted execution; always rejected.
    pub fn update_execution_success(&self, id: i64, success: bool) -> Result<(), MemoryError> {
        self.conn()
            .execute("UPDATE executions SET success = ?2 WHERE id = ?1", params![id, success])?;
        Ok(())
    }

    pub fn put_hardware(&self, name: &str, kind: &str, channels_json: &str) -> Result<(), MemoryError> {
        self.conn().execute(
            "INSERT INTO hardware (name, kind, channels) VALUES (?1, ?2, ?3)
             ON CONFLICT(name) DO UPDATE SET kind = excluded.kind, channels = excluded.channels",
            params![name, kind, channels_json],
        )?;
        Ok(())
    }

    pub fn put_behaviour(&self, id: &str, descriptor_json: &str, program_json: Option<&str>) -> Result<(), MemoryError> {
        self.conn().execute(
            "INSERT INTO behaviours (id, descriptor, program) VALUES (?1, ?2, ?3)
             ON CONFLICT(id) DO UPDATE SET descriptor = excluded.descriptor, program = excluded.program",
            params![id, descriptor_json, program_json],
        )?;
        Ok(())
    }

    pub fn put_skill(&self, id: &str, definition_json: &str) -> Result<(), MemoryError> {
        self.conn().execute(
            "INSERT INTO skills (id, definition) VALUES (?1, ?2)
             ON CONFLICT(id) DO UPDATE SET definition = excluded.definition",
            params![id, definition_json],
        )?;
        Ok(())
    }

    pub fn skill(&self, id: &str) -> Result<Option<String>, MemoryError> {
        Ok(self
            .conn()
            .query_row("SELECT definition FROM skills WHERE id = ?1", [id], |r| r.get(0))
            .optional()?)
    }

    pub fn skills(&self) -> Result<Vec<(String, String)>, MemoryError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT id, definition FROM skills ORDER BY id")?;
        let rows = stmt.query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    pub fn behaviour_descriptor(&self, id: &str) -> Result<Option<String>, MemoryError> {
        Ok(self
            .conn()
            .query_row("SELECT descriptor FROM behaviours WHERE id = ?1", [id], |r| r.get(0))
            .optional()?)
    }

    /// Registered programs as `(id, program document)`.
    pub fn programs(&self) -> Result<Vec<(String, String)>, MemoryError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT id, program FROM behaviours WHERE program IS NOT NULL ORDER BY id")?;
        let rows = stmt.query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?;
        Ok(rows.collect::<Result<_, _>>()?)
    }

    fn check_extension_access(conn: &Connection, table: &str, columns: &[&str]) -> Result<(), MemoryError> {
        if !is_identifier(table) || !columns.iter().all(|c| is_identifier(c)) {
            return Err(MemoryError::MalformedSchema(format!("bad identifier in access to {table}")));
        }
        let known: Option<String> = conn
            .query_row(
                "SELECT owner FROM extension_tables WHERE table_name = ?1",
                [table],
                |r| r.get(0),
            )
            .optional()?;
        if known.is_none() {
            return Err(MemoryError::MalformedSchema(format!("{table} is not an extension table")));
        }
        Ok(())
    }

    /// Appends a row of text values to an extension table.
    pub fn insert_row(&self, table: &str, values: &[(&str, &str)]) -> Result<i64, MemoryError> {
        let conn = self.conn();
        let columns: Vec<&str> = values.iter().map(|(c, _)| *c).collect();
        Self::check_extension_access(&conn, table, &columns)?;
        let names: Vec<String> = columns.iter().map(|c| format!("\"{c}\"")).collect();
        let marks: Vec<String> = (1..=values.len()).map(|i| format!("?{i}")).collect();
        conn.execute(
            &format!("INSERT INTO \"{table}\" ({}) VALUES ({})", names.join(", "), marks.join(", ")),
            rusqlite::params_from_iter(values.iter().map(|(_, v)| *v)),
        )?;
        Ok(conn.last_insert_rowid())
    }

    /// Text columns of an extension table's rows, newest first, optionally
    /// restricted to rows where `filter.0 = filter.1`.
    pub fn rows(
        &self,
        table: &str,
        columns: &[&str],
        filter: Option<(&str, &str)>,
    ) -> Result<Vec<Vec<Option<String>>>, MemoryError> {
        let conn = self.conn();
        let mut touched = columns.to_vec();
        if let Some((c, _)) = filter {
            touched.push(c);
        }
        Self::check_extension_access(&conn, table, &touched)?;
        let names: Vec<String> = columns.iter().map(|c| format!("\"{c}\"")).collect();
        let mut sql = format!("SELECT {} FROM \"{table}\"", names.join(", "));
        if let Some((c, _)) = filter {
            sql.push_str(&format!(" WHERE \"{c}\" = ?1"));
        }
        sql.push_str(" ORDER BY id DESC");
        let mut stmt = conn.prepare(&sql)?;
        let read = |r: &rusqlite::Row<'_>| (0..columns.len()).map(|i| r.get(i)).collect::<Result<Vec<_>, _>>();
        let rows = match filter {
            Some((_, v)) => stmt.query_map([v], read)?.collect::<Result<Vec<_>, _>>()?,
            None => stmt.query_map([], read)?.collect::<Result<Vec<_>, _>>()?,
        };
        Ok(rows)
    }

    /// Highest installed version of `owner`'s schema extension.
    pub fn extension_version(&self, owner: &str) -> Result<Option<u32>, MemoryError> {
        Ok(self.conn().query_row(
            "SELECT MAX(version) FROM schema_extensions WHERE owner = ?1",
            [owner],
            |r| r.get(0),
        )?)
    }

    /// Installs `ext`; idempotent per `(owner, version)`.
    pub fn install_schema(&self, ext: &SchemaExtension) -> Result<(), MemoryError> {
        ext.check()?;
        let mut conn = self.conn();
        let tx = conn.transaction()?;
        let installed: Option<u32> = tx.query_row(
            "SELECT MAX(version) FROM schema_extensions WHERE owner = ?1",
            [&ext.owner],
            |r| r.get(0),
        )?;
        match installed {
            Some(v) if v == ext.version => return Ok(()),
            Some(v) if v > ext.version => {
                return Err(MemoryError::Downgrade {
                    owner: ext.owner.clone(),
                    installed: v,
                    requested: ext.version,
                })
            }
            _ => {}
        }
        for table in &ext.tables {
            let owner: Option<String> = tx
                .query_row(
                    "SELECT owner FROM extension_tables WHERE table_name = ?1",
                    [&table.name],
                    |r| r.get(0),
                )
                .optional()?;
            match owner {
                Some(o) if o != ext.owner => {
                    return Err(MemoryError::SchemaConflict {
                        table: table.name.clone(),
                        owner: o,
                    })
                }
                Some(_) => {
                    let existing = table_columns(&tx, &table.name)?;
                    for col in &table.columns {
                        if !existing.iter().any(|c| c.eq_ignore_ascii_case(&col.name)) {
                            tx.execute_batch(&format!(
                                "ALTER TABLE \"{}\" ADD COLUMN \"{}\" {}",
                                table.name,
                                col.name,
                                col.column_type.sql()
                            ))?;
                        }
                    }
                }
                None => {
                    let cols: Vec<String> = std::iter::once("id INTEGER PRIMARY KEY".to_string())
                        .chain(
                            table
                                .columns
                                .iter()
                                .map(|c| format!("\"{}\" {}", c.name, c.column_type.sql())),
                        )
                        .collect();
                    tx.execute_batch(&format!("CREATE TABLE \"{}\" ({})", table.name, cols.join(", ")))?;
                    tx.execute(
                        "INSERT INTO extension_tables (table_name, owner) VALUES (?1, ?2)",
                        params![table.name, ext.owner],
                    )?;
                }
            }
        }
        tx.execute(
            "INSERT INTO schema_extensions (owner, version, definition) VALUES (?1, ?2, ?3)",
            params![ext.owner, ext.version, serde_json::to_string(ext)?],
        )?;
        tx.commit()?;
        Ok(())
    }

    /// Column names of a table, in declaration order.
    pub fn columns_of(&self, table: &str) -> Result<Vec<String>, MemoryError> {
        table_columns(&self.conn(), table)
    }

    pub fn installed_extensions(&self) -> Result<Vec<(String, u32)>, MemoryError> {
        let conn = self.conn();
        let mut stmt = conn.prepare("SELECT owner, version FROM schema_extensions ORDER BY owner, version")?;
        let rows = stmt.query_map([], |r| Ok((r.get(0)?, r.get(1)?)))?;
        Ok(rows.collect::<Result<_, _>>()?)
    }
}

fn table_columns(conn: &Connection, table: &str) -> Result<Vec<String>, MemoryError> {
    let mut stmt = conn.prepare("SELECT name FROM pragma_table_info(?1)")?;
    let rows = stmt.query_map([table], |r| r.get(0))?;
    Ok(rows.collect::<Result<_, _>>()?)
}

const SELECT_EXECUTION: &str = "SELECT id, subject, subject_kind, start_tick, end_tick, success,
    hardware, situation, failure, tick_length, sensor, profile FROM executions";

struct RawExecution {
    id: i64,
    subject: String,
    subject_kind: String,
    start_tick: i64,
    end_tick: i64,
    success: bool,
    hardware: String,
    situation: Option<String>,
    failure: Option<String>,
    tick_length: f64,
    sensor: Vec<u8>,
    profile: Vec<u8>,
}

impl RawExecution {
    fn from_row(r: &Row<'_>) -> rusqlite::Result<Self> {
        Ok(RawExecution {
            id: r.get(0)?,
            subject: r.get(1)?,
            subject_kind: r.get(2)?,
            start_tick: r.get(3)?,
            end_tick: r.get(4)?,
            success: r.get(5)?,
            hardware: r.get(6)?,
            situation: r.get(7)?,
            failure: r.get(8)?,
            tick_length: r.get(9)?,
            sensor: r.get(10)?,
            profile: r.get(11)?,
        })
    }

    fn decode(self) -> Result<ExecutionRecord, MemoryError> {
        let mut sensor = SensorMatrix::from_blob(&self.sensor)?;
        sensor.tick_length = self.tick_length;
        let subject_kind = SubjectKind::parse(&self.subject_kind)
            .ok_or_else(|| MemoryError::Storage(format!("unknown subject kind {:?}", self.subject_kind)))?;
        Ok(ExecutionRecord {
            id: Some(self.id),
            subject: self.subject,
            subject_kind,
            start_tick: self.start_tick as u64,
            end_tick: self.end_tick as u64,
            success: self.success,
            sensor,
            profile: CallProfileMatrix::from_blob(&self.profile)?,
            hardware_config: serde_json::from_str(&self.hardware)?,
            situation: self.situation.as_deref().map(serde_json::from_str).transpose()?,
            failure: self.failure,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{ScenarioId, Situation};

    fn record(subject: &str, start: u64, success: bool) -> ExecutionRecord {
        ExecutionRecord {
            id: None,
            subject: subject.into(),
            subject_kind: SubjectKind::Skill,
            start_tick: start,
            end_tick: start + 2,
            success,
            sensor: SensorMatrix::new(vec!["a".into()], 2, vec![0.25, -1.5]).unwrap(),
            profile: CallProfileMatrix::new(vec!["f".into()], 2, vec![1, 0]).unwrap(),
            hardware_config: ["left_arm".to_string()].into_iter().collect(),
            situation: Some(Situation::new(ScenarioId::Book, start)),
            failure: None,
        }
    }

    #[test]
    fn persist_then_fetch_round_trips() {
        let store = Store::open_in_memory().unwrap();
        let r = record("book_grasping", 3, true);
        let id = store.persist_execution(&r).unwrap();
        let back = store.fetch_execution(id).unwrap().unwrap();
        assert_eq!(back, ExecutionRecord { id: Some(id), ..r });
        assert!(store.fetch_execution(id + 100).unwrap().is_none());
    }

    #[test]
    fn filters_are_conjunctive_and_ordered() {
        let store = Store::open_in_memory().unwrap();
        for i in 0..20 {
            store.persist_execution(&record("a", i, i % 2 == 0)).unwrap();
            store.persist_execution(&record("b", i, true)).unwrap();
        }
        let ok = store.fetch_executions(&ExecutionFilter::subject("a").with_success(true)).unwrap();
        assert_eq!(ok.len(), 10);
        assert!(ok.iter().all(|r| r.subject == "a" && r.success));
        let newest = store.fetch_executions(&ExecutionFilter::subject("a").with_limit(5)).unwrap();
        let starts: Vec<u64> = newest.iter().map(|r| r.start_tick).collect();
        assert_eq!(starts, vec![19, 18, 17, 16, 15]);
        assert!(matches!(
            store.fetch_executions(&ExecutionFilter::default().with_limit(0)),
            Err(MemoryError::MalformedFilter(_))
        ));
    }

    #[test]
    fn executions_reject_updates() {
        let store = Store::open_in_memory().unwrap();
        let id = store.persist_execution(&record("a", 0, false)).unwrap();
        assert!(matches!(store.update_execution_success(id, true), Err(MemoryError::AppendOnly)));
        let persisted = store.fetch_execution(id).unwrap().unwrap();
        assert!(!persisted.success);
        assert!(matches!(store.persist_execution(&persisted), Err(MemoryError::AppendOnly)));
    }

    #[test]
    fn rejects_misaligned_record() {
        let store = Store::open_in_memory().unwrap();
        let mut r = record("a", 0, true);
        r.profile = CallProfileMatrix::zeros(vec!["f".into()], 3);
        assert!(matches!(store.persist_execution(&r), Err(MemoryError::InvalidRecord(_))));
    }

    fn ext(owner: &str, version: u32, table: &str, cols: &[&str]) -> SchemaExtension {
        SchemaExtension {
            owner: owner.into(),
            version,
            tables: vec![TableDefinition {
                name: table.into(),
                columns: cols
                    .iter()
                    .map(|c| ColumnDefinition {
                        name: c.to_string(),
                        column_type: ColumnType::Real,
                    })
                    .collect(),
            }],
        }
    }

    #[test]
    fn schema_extension_lifecycle() {
        let store = Store::open_in_memory().unwrap();
        let v1 = ext("left_hand", 1, "hand_calibration", &["offset"]);
        store.install_schema(&v1).unwrap();
        store.install_schema(&v1).unwrap();
        assert_eq!(store.installed_extensions().unwrap(), vec![("left_hand".into(), 1)]);

        let v2 = ext("left_hand", 2, "hand_calibration", &["offset", "gain"]);
        store.install_schema(&v2).unwrap();
        store.install_schema(&v2).unwrap();
        assert_eq!(store.columns_of("hand_calibration").unwrap(), vec!["id", "offset", "gain"]);
        assert_eq!(store.extension_version("left_hand").unwrap(), Some(2));

        assert!(matches!(store.install_schema(&v1), Err(MemoryError::Downgrade { .. })));
        let other = ext("camera", 1, "hand_calibration", &["x"]);
        assert!(matches!(store.install_schema(&other), Err(MemoryError::SchemaConflict { .. })));
        let core = ext("camera", 1, "executions", &["x"]);
        assert!(matches!(store.install_schema(&core), Err(MemoryError::MalformedSchema(_))));
    }

    #[test]
    fn extension_rows_round_trip() {
        let store = Store::open_in_memory().unwrap();
        let ext = SchemaExtension {
            owner: "notes".into(),
            version: 1,
            tables: vec![TableDefinition {
                name: "notes".into(),
                columns: vec![
                    ColumnDefinition { name: "topic".into(), column_type: ColumnType::Text },
                    ColumnDefinition { name: "body".into(), column_type: ColumnType::Text },
                ],
            }],
        };
        store.install_schema(&ext).unwrap();
        store.insert_row("notes", &[("topic", "a"), ("body", "first")]).unwrap();
        store.insert_row("notes", &[("topic", "a"), ("body", "second")]).unwrap();
        store.insert_row("notes", &[("topic", "b"), ("body", "third")]).unwrap();
        let rows = store.rows("notes", &["body"], Some(("topic", "a"))).unwrap();
        assert_eq!(rows, vec![vec![Some("second".to_string())], vec![Some("first".to_string())]]);
        assert!(store.insert_row("executions", &[("subject", "x")]).is_err());
        assert!(store.rows("notes", &["body; DROP"], None).is_err());
    }

    #[test]
    fn file_store_survives_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("memory.db");
        let id = {
            let store = Store::open(&path).unwrap();
            store.persist_execution(&record("a", 1, true)).unwrap()
        };
        let store = Store::open(&path).unwrap();
        assert_eq!(store.applied_migrations().unwrap(), vec![1]);
        assert_eq!(store.fetch_execution(id).unwrap().unwrap().subject, "a");
    }
}
