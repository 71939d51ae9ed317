//! Sweep records and their CSV form.
//!
//! The first header cell is the versioned schema id (`mu_sweep.v1`); its column
//! holds the row index. The last column is `status`, `ok` or the solver error.
//! Numbers are written with 17 significant digits.

use std::io::{Read, Write};

use anyhow::{anyhow, bail, Context};

#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub values: Vec<f64>,
    pub error: Option<String>,
}

impl Row {
    pub fn ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub schema: String,
    pub columns: Vec<String>,
    pub rows: Vec<Row>,
}

impl Table {
    pub fn new(schema: &str, columns: &[&str]) -> Self {
        Self {
            schema: schema.to_string(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, values: Vec<f64>) {
        assert_eq!(values.len(), self.columns.len(), "row width");
        self.rows.push(Row { values, error: None });
    }

    /// A failed row: the key columns are kept, the rest are NaN.
    pub fn push_failed(&mut self, keys: &[f64], error: String) {
        let mut values = keys.to_vec();
        values.resize(self.columns.len(), f64::NAN);
        self.rows.push(Row {
            values,
            error: Some(error),
        });
    }

    pub fn column_index(&self, name: &str) -> anyhow::Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| anyhow!("{}: no column `{name}`", self.schema))
    }

    /// Values of `name` over the successful rows.
    pub fn column(&self, name: &str) -> anyhow::Result<Vec<f64>> {
        let k = self.column_index(name)?;
        Ok(self.rows.iter().filter(|r| r.ok()).map(|r| r.values[k]).collect())
    }

    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.ok()).count()
    }

    pub fn write_csv<W: Write>(&self, w: W) -> anyhow::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![self.schema.clone()];
        header.extend(self.columns.iter().cloned());
        header.push("status".into());
        out.write_record(&header)?;
        for (i, row) in self.rows.iter().enumerate() {
            let mut rec = vec![i.to_string()];
            rec.extend(row.values.iter().map(|v| format!("{v:.16e}")));
            rec.push(row.error.clone().unwrap_or_else(|| "ok".into()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    pub fn read_csv<R: Read>(r: R) -> anyhow::Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 2 || &header[header.len() - 1] != "status" {
            bail!("not a sweep table: header must start with a schema id and end with `status`");
        }
        let schema = header[0].to_string();
        let columns: Vec<String> = header.iter().skip(1).take(header.len() - 2).map(String::from).collect();
        let mut rows = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let values = (1..rec.len() - 1)
                .map(|k| {
                    rec[k]
                        .parse::<f64>()
                        .with_context(|| format!("row {line}, column `{}`", header[k].to_string()))
                })
                .collect::<anyhow::Result<Vec<_>>>()?;
            let status = &rec[rec.len() - 1];
            rows.push(Row {
                values,
                error: (status != "ok").then(|| status.to_string()),
            });
        }
        Ok(Self { schema, columns, rows })
    }
}
