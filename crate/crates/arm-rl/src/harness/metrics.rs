//! Per-episode training metrics and their CSV serialization.
//!
//! The schema is one header row plus one row per finished episode:
//! `trial,episode,env_step,episode_return,episode_length,mean_step_reward,epsilon,mean_loss`.
//! All fields are plain numbers (no quoting needed); `epsilon` is empty for
//! agents without an exploration schedule and `mean_loss` is empty for
//! episodes during which no gradient update ran. Floats use Rust's shortest
//! round-trip formatting, so parsing a written file reproduces the values
//! bit for bit.

use std::fs;
use std::path::Path;

pub const CSV_HEADER: &str =
    "trial,episode,env_step,episode_return,episode_length,mean_step_reward,epsilon,mean_loss";

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    /// Trial index, 0-based.
    pub trial: usize,
    /// Episode index within the trial, 1-based.
    pub episode: usize,
    /// Cumulative environment steps in this trial when the episode ended.
    pub env_step: usize,
    pub episode_return: f64,
    pub episode_length: usize,
    pub mean_step_reward: f64,
    /// Exploration rate at episode end (DQN only).
    pub epsilon: Option<f64>,
    /// Mean loss over the gradient updates that ran during this episode.
    pub mean_loss: Option<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("CSV line {line}: {message}")]
    Parse { line: usize, message: String },
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl MetricsRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{}",
            self.trial,
            self.episode,
            self.env_step,
            self.episode_return,
            self.episode_length,
            self.mean_step_reward,
            fmt_opt(self.epsilon),
            fmt_opt(self.mean_loss),
        )
    }

    fn from_fields(fields: &[&str]) -> Result<Self, String> {
        if fields.len() != 8 {
            return Err(format!("expected 8 fields, found {}", fields.len()));
        }
        let int = |i: usize, name: &str| -> Result<usize, String> {
            fields[i]
                .parse()
                .map_err(|_| format!("field {name}: `{}` is not an integer", fields[i]))
        };
        let float = |i: usize, name: &str| -> Result<f64, String> {
            fields[i]
                .parse()
                .map_err(|_| format!("field {name}: `{}` is not a number", fields[i]))
        };
        let opt_float = |i: usize, name: &str| -> Result<Option<f64>, String> {
            if fields[i].is_empty() {
                Ok(None)
            } else {
                float(i, name).map(Some)
            }
        };
        Ok(MetricsRow {
            trial: int(0, "trial")?,
            episode: int(1, "episode")?,
            env_step: int(2, "env_step")?,
            episode_return: float(3, "episode_return")?,
            episode_length: int(4, "episode_length")?,
            mean_step_reward: float(5, "mean_step_reward")?,
            epsilon: opt_float(6, "epsilon")?,
            mean_loss: opt_float(7, "mean_loss")?,
        })
    }
}

/// Serialize rows (header included) to one CSV string.
pub fn to_csv(rows: &[MetricsRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for row in rows {
        out.push_str(&row.to_csv_line());
        out.push('\n');
    }
    out
}

/// Write rows to `path`, creating parent directories as needed.
pub fn write_csv(path: &Path, rows: &[MetricsRow]) -> Result<(), MetricsError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, to_csv(rows))?;
    Ok(())
}

/// Parse CSV text; errors carry 1-based line numbers.
pub fn parse_csv(text: &str) -> Result<Vec<MetricsRow>, MetricsError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == CSV_HEADER => {}
        Some((_, header)) => {
            return Err(MetricsError::Parse {
                line: 1,
                message: format!("unexpected header `{header}`"),
            })
        }
        None => {
            return Err(MetricsError::Parse {
                line: 1,
                message: "empty file".into(),
            })
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let row = MetricsRow::from_fields(&fields)
            .map_err(|message| MetricsError::Parse { line: i + 1, message })?;
        rows.push(row);
    }
    Ok(rows)
}

/// Read and parse a metrics CSV file.
pub fn read_csv(path: &Path) -> Result<Vec<MetricsRow>, MetricsError> {
    parse_csv(&fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(trial: usize, episode: usize) -> MetricsRow {
        MetricsRow {
            trial,
            episode,
            env_step: episode * 150,
            episode_return: -1.0 / 3.0 * episode as f64,
            episode_length: 150,
            mean_step_reward: -1.0 / 450.0 * episode as f64,
            epsilon: (trial == 0).then_some(0.505),
            mean_loss: (episode > 1).then_some(1e-17),
        }
    }

    #[test]
    fn rows_round_trip_bit_exactly() {
        let rows: Vec<MetricsRow> = (0..2).flat_map(|t| (1..5).map(move |e| row(t, e))).collect();
        let text = to_csv(&rows);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed, rows);
        // Bit-exact on the awkward floats too.
        assert_eq!(
            parsed[1].episode_return.to_bits(),
            rows[1].episode_return.to_bits()
        );
    }

    #[test]
    fn optional_fields_serialize_as_empty() {
        let r = MetricsRow {
            epsilon: None,
            mean_loss: None,
            ..row(0, 1)
        };
        let line = r.to_csv_line();
        assert!(line.ends_with(",,"), "line was `{line}`");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = format!("{CSV_HEADER}\n0,1,150,-1,150,-0.006,,\nnot,a,row\n");
        match parse_csv(&text) {
            Err(MetricsError::Parse { line: 3, .. }) => {}
            other => panic!("expected parse error at line 3, got {other:?}"),
        }
        let bad_number = format!("{CSV_HEADER}\n0,1,150,abc,150,-0.006,,\n");
        match parse_csv(&bad_number) {
            Err(MetricsError::Parse { line: 2, message }) => {
                assert!(message.contains("episode_return"), "message: {message}");
            }
            other => panic!("expected parse error at line 2, got {other:?}"),
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(matches!(
            parse_csv("a,b,c\n"),
            Err(MetricsError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/metrics.csv");
        let rows = vec![row(0, 1), row(0, 2)];
        write_csv(&path, &rows).unwrap();
        assert_eq!(read_csv(&path).unwrap(), rows);
    }
}
