use std::io::{Read, Write};

use super::log::{reader, write_preamble};
use super::ObservationLog;
use crate::error::{Error, Result};
use crate::model::{PageId, PostId};
use crate::sim::World;
use crate::time::{SimTime, StepGrid};

/// Cumulative engagement of a surviving post at each grid offset.
///
/// Removed posts have no series, mirroring the source platform.
pub fn extract_time_series(
    world: &World,
    post_id: PostId,
    grid: &StepGrid,
) -> Result<Vec<(u64, u64)>> {
    let post = world.post(post_id).ok_or(Error::UnknownPost(post_id))?;
    if post.removal.is_some() {
        return Err(Error::SeriesUnavailable(post_id));
    }
    Ok(grid
        .offsets()
        .iter()
        .map(|&o| (o, post.curve.cumulative_at(o)))
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SeriesRow {
    pub post_id: PostId,
    pub page_id: PageId,
    pub created_at: SimTime,
    /// One cumulative total per grid offset.
    pub values: Vec<u64>,
}

impl SeriesRow {
    pub fn long_run(&self) -> u64 {
        self.values.last().copied().unwrap_or(0)
    }
}

/// Time series of the posts present at follow-up, sorted by post id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeSeriesSet {
    pub grid: StepGrid,
    pub rows: Vec<SeriesRow>,
}

impl TimeSeriesSet {
    /// Series for every post the log saw present at follow-up. A post the
    /// world removes only after the follow-up still counts as a survivor.
    pub fn from_world(world: &World, log: &ObservationLog, grid: &StepGrid) -> Result<Self> {
        let mut rows = Vec::new();
        for (&id, f) in log.followup() {
            if !f.present {
                continue;
            }
            let post = world.post(id).ok_or(Error::UnknownPost(id))?;
            let values = grid
                .offsets()
                .iter()
                .map(|&o| post.curve.cumulative_at(o))
                .collect();
            rows.push(SeriesRow {
                post_id: id,
                page_id: post.page_id,
                created_at: post.created_at,
                values,
            });
        }
        Ok(Self {
            grid: grid.clone(),
            rows,
        })
    }

    pub fn get(&self, id: PostId) -> Option<&SeriesRow> {
        self.rows
            .binary_search_by_key(&id, |r| r.post_id)
            .ok()
            .map(|i| &self.rows[i])
    }
}

/// Writes `timeseries.csv`: `post_id,page_id,created_at_min,t<offset>...`.
pub fn write_timeseries_csv<W: Write>(
    mut out: W,
    preamble: &str,
    set: &TimeSeriesSet,
) -> Result<()> {
    write_preamble(&mut out, preamble, "timeseries.csv")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![
        "post_id".to_string(),
        "page_id".into(),
        "created_at_min".into(),
    ];
    header.extend(set.grid.offsets().iter().map(|o| format!("t{o}")));
    w.write_record(&header)?;
    let mut rec = Vec::with_capacity(header.len());
    for r in &set.rows {
        rec.clear();
        rec.push(r.post_id.0.to_string());
        rec.push(r.page_id.0.to_string());
        rec.push(r.created_at.0.to_string());
        rec.extend(r.values.iter().map(u64::to_string));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io("timeseries.csv", e))
}

/// Reads `timeseries.csv`; the grid comes from the `t<offset>` headers.
pub fn read_timeseries_csv<R: Read>(input: R) -> Result<TimeSeriesSet> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    if headers.len() < 4
        || &headers[0] != "post_id"
        || &headers[1] != "page_id"
        || &headers[2] != "created_at_min"
    {
        return Err(Error::config(
            "timeseries.csv: expected post_id,page_id,created_at_min,t<offset>...",
        ));
    }
    let offsets = headers
        .iter()
        .skip(3)
        .map(|h| {
            h.strip_prefix('t')
                .and_then(|n| n.parse::<u64>().ok())
                .ok_or_else(|| Error::config(format!("timeseries.csv: bad offset column {h:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = StepGrid::new(offsets)?;
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| -> Result<u64> {
            rec.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| {
                Error::config(format!("timeseries.csv line {line}: bad field {}", i + 1))
            })
        };
        let values = (3..rec.len()).map(num).collect::<Result<Vec<_>>>()?;
        if values.len() != grid.len() || values.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::config(format!(
                "timeseries.csv line {line}: series must have one non-decreasing value per offset"
            )));
        }
        rows.push(SeriesRow {
            post_id: PostId(num(0)?),
            page_id: PageId(num(1)?),
            created_at: SimTime(num(2)?),
            values,
        });
    }
    rows.sort_by_key(|r| r.post_id);
    Ok(TimeSeriesSet { grid, rows })
}
