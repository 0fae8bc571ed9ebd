//! Trajectory CSV files: a header of `role:name` channel names, one row per
//! time step. Roles are `u` (input), `y` (output), `w` (measured disturbance)
//! and `e` (innovations). Values are written in shortest round-trip form.

use std::path::Path;

use ddkf::Trajectory;
use nalgebra::DMatrix;

use crate::error::{CliError, CliResult};
use crate::output::write_atomic;

pub const ROLES: [&str; 4] = ["u", "y", "w", "e"];

/// Channels of one file grouped by role, in column order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrajectoryFile {
    pub u: Option<Trajectory>,
    pub y: Option<Trajectory>,
    pub w: Option<Trajectory>,
    pub e: Option<Trajectory>,
}

impl TrajectoryFile {
    pub fn get(&self, role: &str) -> Option<&Trajectory> {
        match role {
            "u" => self.u.as_ref(),
            "y" => self.y.as_ref(),
            "w" => self.w.as_ref(),
            "e" => self.e.as_ref(),
            _ => None,
        }
    }

    fn slot(&mut self, role: &str) -> &mut Option<Trajectory> {
        match role {
            "u" => &mut self.u,
            "y" => &mut self.y,
            "w" => &mut self.w,
            _ => &mut self.e,
        }
    }

    /// The channels of `role`, or a schema error naming `path`.
    pub fn require(&self, role: &str, path: &Path) -> CliResult<&Trajectory> {
        self.get(role)
            .ok_or_else(|| CliError::Schema(format!("{} has no '{role}:' columns", path.display())))
    }

    pub fn len(&self) -> usize {
        ROLES.iter().filter_map(|r| self.get(r)).map(Trajectory::len).next().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn parse_trajectories(text: &str, dt: Option<f64>) -> CliResult<TrajectoryFile> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| CliError::Schema(format!("unreadable CSV header: {e}")))?
        .clone();
    let mut columns: Vec<(String, String)> = Vec::with_capacity(header.len());
    for h in header.iter() {
        let (role, name) = h
            .split_once(':')
            .filter(|(r, n)| ROLES.contains(r) && !n.is_empty())
            .ok_or_else(|| CliError::Schema(format!("column '{h}' lacks a u:/y:/w:/e: role prefix")))?;
        columns.push((role.to_string(), name.to_string()));
    }
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); columns.len()];
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::Schema(format!("CSV row {}: {e}", row + 2)))?;
        for (col, field) in record.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::Schema(format!("CSV row {}, column {}: '{field}' is not a number", row + 2, col + 1)))?;
            values[col].push(v);
        }
    }
    let len = values.first().map_or(0, Vec::len);
    let mut file = TrajectoryFile::default();
    for role in ROLES {
        let idx: Vec<usize> = (0..columns.len()).filter(|&i| columns[i].0 == role).collect();
        if idx.is_empty() {
            continue;
        }
        let samples = DMatrix::from_fn(idx.len(), len, |i, t| values[idx[i]][t]);
        let names = idx.iter().map(|&i| columns[i].1.clone()).collect();
        *file.slot(role) = Some(Trajectory::new(samples, names, dt)?);
    }
    Ok(file)
}

pub fn read_trajectories(path: &Path, dt: Option<f64>) -> CliResult<TrajectoryFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_trajectories(&text, dt)
}

/// CSV text for `(role, trajectory)` parts of equal length.
pub fn format_trajectories(parts: &[(&str, &Trajectory)]) -> CliResult<String> {
    let len = parts.first().map_or(0, |(_, t)| t.len());
    if parts.iter().any(|(r, t)| t.len() != len || !ROLES.contains(r)) {
        return Err(CliError::Schema("trajectories to write differ in length or role".into()));
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let header: Vec<String> = parts
        .iter()
        .flat_map(|(r, t)| t.channel_names().iter().map(move |n| format!("{r}:{n}")))
        .collect();
    let csv_err = |e: csv::Error| CliError::Schema(format!("CSV encoding: {e}"));
    w.write_record(&header).map_err(csv_err)?;
    for k in 0..len {
        let row: Vec<String> = parts
            .iter()
            .flat_map(|(_, t)| t.samples().column(k).iter().map(|v| format!("{v:?}")).collect::<Vec<_>>())
            .collect();
        w.write_record(&row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Schema(format!("CSV encoding: {e}")))?;
    Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
}

pub fn write_trajectories(path: &Path, parts: &[(&str, &Trajectory)]) -> CliResult<()> {
    write_atomic(path, format_trajectories(parts)?.as_bytes())
}
