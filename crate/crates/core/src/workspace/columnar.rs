//! Typed columnar intermediates stored as Parquet files.

use std::collections::BTreeMap;
use std::fs::File;
use std::path::Path;
use std::sync::Arc;

use arrow_array::{Array, ArrayRef, BooleanArray, Float64Array, Int64Array, RecordBatch, StringArray};
use arrow_schema::{DataType, Field, Schema};
use parquet::arrow::arrow_reader::ParquetRecordBatchReaderBuilder;
use parquet::arrow::ArrowWriter;
use parquet::file::metadata::KeyValue;
use parquet::file::properties::WriterProperties;
use serde::{Deserialize, Serialize};

use super::{Result, WorkspaceError};
use crate::iot::Table;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnType {
    Int64,
    Float64,
    Utf8,
    Boolean,
}

impl ColumnType {
    fn arrow(self) -> DataType {
        match self {
            ColumnType::Int64 => DataType::Int64,
            ColumnType::Float64 => DataType::Float64,
            ColumnType::Utf8 => DataType::Utf8,
            ColumnType::Boolean => DataType::Boolean,
        }
    }

    fn from_arrow(dt: &DataType) -> Option<Self> {
        match dt {
            DataType::Int64 => Some(ColumnType::Int64),
            DataType::Float64 => Some(ColumnType::Float64),
            DataType::Utf8 => Some(ColumnType::Utf8),
            DataType::Boolean => Some(ColumnType::Boolean),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Null,
    Int64(i64),
    Float64(f64),
    Utf8(String),
    Boolean(bool),
}

impl Cell {
    pub fn column_type(&self) -> Option<ColumnType> {
        match self {
            Cell::Null => None,
            Cell::Int64(_) => Some(ColumnType::Int64),
            Cell::Float64(_) => Some(ColumnType::Float64),
            Cell::Utf8(_) => Some(ColumnType::Utf8),
            Cell::Boolean(_) => Some(ColumnType::Boolean),
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Utf8(s) => Some(s),
            _ => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Null => String::new(),
            Cell::Int64(i) => i.to_string(),
            Cell::Float64(f) => f.to_string(),
            Cell::Utf8(s) => s.clone(),
            Cell::Boolean(b) => b.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnDef {
    pub name: String,
    pub column_type: ColumnType,
}

impl ColumnDef {
    pub fn new(name: impl Into<String>, column_type: ColumnType) -> Self {
        ColumnDef { name: name.into(), column_type }
    }
}

/// Row-major table with a fixed, typed column set. All columns are
/// nullable.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnarTable {
    columns: Vec<ColumnDef>,
    rows: Vec<Vec<Cell>>,
    /// File-level key/value metadata.
    pub metadata: BTreeMap<String, String>,
}

impl ColumnarTable {
    pub fn with_columns(columns: Vec<ColumnDef>) -> Self {
        ColumnarTable { columns, rows: Vec::new(), metadata: BTreeMap::new() }
    }

    /// Builds a table inferring column types from the first non-null cell
    /// of each column. An empty row set has no schema and is refused.
    pub fn from_rows(names: &[&str], rows: Vec<Vec<Cell>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(WorkspaceError::SchemaRequired);
        }
        let columns = names
            .iter()
            .enumerate()
            .map(|(i, name)| {
                let ty = rows.iter().find_map(|r| r.get(i).and_then(Cell::column_type)).unwrap_or(ColumnType::Utf8);
                ColumnDef::new(*name, ty)
            })
            .collect();
        let mut table = Self::with_columns(columns);
        for row in rows {
            table.push_row(row)?;
        }
        Ok(table)
    }

    pub fn columns(&self) -> &[ColumnDef] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn push_row(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(WorkspaceError::TypeMismatch(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        for (cell, col) in row.iter().zip(&self.columns) {
            if let Some(ty) = cell.column_type() {
                if ty != col.column_type {
                    return Err(WorkspaceError::TypeMismatch(format!(
                        "column {:?} is {:?}, got {:?}",
                        col.name, col.column_type, ty
                    )));
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    /// Appends every row of `other`, which must have the same columns.
    pub fn extend(&mut self, other: ColumnarTable) -> Result<()> {
        if other.columns != self.columns {
            return Err(WorkspaceError::TypeMismatch("column sets differ".into()));
        }
        self.rows.extend(other.rows);
        Ok(())
    }

    /// Stringly-typed view for the tabular readers.
    pub fn to_text_table(&self) -> Table {
        Table::new(
            self.columns.iter().map(|c| c.name.clone()).collect(),
            self.rows.iter().map(|r| r.iter().map(Cell::render).collect()).collect(),
        )
    }

    fn to_batch(&self) -> Result<(Arc<Schema>, RecordBatch)> {
        let fields: Vec<Field> = self.columns.iter().map(|c| Field::new(&c.name, c.column_type.arrow(), true)).collect();
        let schema = Arc::new(Schema::new(fields));
        let arrays: Vec<ArrayRef> = self
            .columns
            .iter()
            .enumerate()
            .map(|(i, c)| -> ArrayRef {
                let cells = self.rows.iter().map(|r| &r[i]);
                match c.column_type {
                    ColumnType::Int64 => Arc::new(
                        cells.map(|x| if let Cell::Int64(v) = x { Some(*v) } else { None }).collect::<Int64Array>(),
                    ),
                    ColumnType::Float64 => Arc::new(
                        cells.map(|x| if let Cell::Float64(v) = x { Some(*v) } else { None }).collect::<Float64Array>(),
                    ),
                    ColumnType::Utf8 => Arc::new(
                        cells.map(|x| if let Cell::Utf8(v) = x { Some(v.as_str()) } else { None }).collect::<StringArray>(),
                    ),
                    ColumnType::Boolean => Arc::new(
                        cells.map(|x| if let Cell::Boolean(v) = x { Some(*v) } else { None }).collect::<BooleanArray>(),
                    ),
                }
            })
            .collect();
        let batch = RecordBatch::try_new(schema.clone(), arrays)?;
        Ok((schema, batch))
    }
}

/// Writes `table` to `path` as a Parquet file.
pub fn write_columnar(path: &Path, table: &ColumnarTable) -> Result<()> {
    let (schema, batch) = table.to_batch()?;
    let kv: Vec<KeyValue> = table.metadata.iter().map(|(k, v)| KeyValue::new(k.clone(), v.clone())).collect();
    let props = WriterProperties::builder().set_key_value_metadata((!kv.is_empty()).then_some(kv)).build();
    let tmp = path.with_extension("parquet.tmp");
    let mut writer = ArrowWriter::try_new(File::create(&tmp)?, schema, Some(props))?;
    if batch.num_rows() > 0 {
        writer.write(&batch)?;
    }
    writer.close()?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Reads a Parquet file written by [`write_columnar`] (or any file whose
/// columns are Int64, Float64, Utf8 or Boolean).
pub fn read_columnar(path: &Path) -> Result<ColumnarTable> {
    let builder = ParquetRecordBatchReaderBuilder::try_new(File::open(path)?)?;
    let metadata = builder
        .metadata()
        .file_metadata()
        .key_value_metadata()
        .map(|kvs| {
            kvs.iter()
                .filter(|kv| kv.key != "ARROW:schema")
                .filter_map(|kv| Some((kv.key.clone(), kv.value.clone()?)))
                .collect()
        })
        .unwrap_or_default();
    let schema = builder.schema().clone();
    let columns = schema
        .fields()
        .iter()
        .map(|f| {
            ColumnType::from_arrow(f.data_type())
                .map(|t| ColumnDef::new(f.name().clone(), t))
                .ok_or_else(|| WorkspaceError::TypeMismatch(format!("unsupported column type {}", f.data_type())))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut table = ColumnarTable::with_columns(columns);
    table.metadata = metadata;
    for batch in builder.build()? {
        let batch = batch?;
        let n = batch.num_rows();
        let mut rows = vec![Vec::with_capacity(table.columns.len()); n];
        for (i, col) in table.columns.iter().enumerate() {
            let array = batch.column(i);
            for (r, row) in rows.iter_mut().enumerate() {
                row.push(if array.is_null(r) {
                    Cell::Null
                } else {
                    match col.column_type {
                        ColumnType::Int64 => Cell::Int64(downcast::<Int64Array>(array)?.value(r)),
                        ColumnType::Float64 => Cell::Float64(downcast::<Float64Array>(array)?.value(r)),
                        ColumnType::Utf8 => Cell::Utf8(downcast::<StringArray>(array)?.value(r).to_string()),
                        ColumnType::Boolean => Cell::Boolean(downcast::<BooleanArray>(array)?.value(r)),
                    }
                });
            }
        }
        table.rows.extend(rows);
    }
    Ok(table)
}

fn downcast<T: 'static>(array: &ArrayRef) -> Result<&T> {
    array.as_any().downcast_ref::<T>().ok_or_else(|| WorkspaceError::TypeMismatch("unexpected array type".into()))
}
