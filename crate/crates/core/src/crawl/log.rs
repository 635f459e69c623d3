use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::CrawlKind;
use crate::error::{Error, Result};
use crate::model::{EngagementCounts, PageId, PostId};
use crate::time::SimTime;

/// One engagement snapshot of one post.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Observation {
    pub post_id: PostId,
    pub page_id: PageId,
    pub created_at: SimTime,
    pub crawl_kind: CrawlKind,
    pub observed_at: SimTime,
    pub counts: EngagementCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FollowupRecord {
    pub present: bool,
    /// Zero when the post is absent.
    pub counts: EngagementCounts,
}

/// Snapshots ordered by `(observed_at, post_id)` plus follow-up presence.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationLog {
    observations: Vec<Observation>,
    followup: BTreeMap<PostId, FollowupRecord>,
}

impl ObservationLog {
    pub fn new(
        mut observations: Vec<Observation>,
        followup: BTreeMap<PostId, FollowupRecord>,
    ) -> Self {
        observations.sort_by_key(|o| (o.observed_at, o.post_id));
        Self {
            observations,
            followup,
        }
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn followup(&self) -> &BTreeMap<PostId, FollowupRecord> {
        &self.followup
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty() && self.followup.is_empty()
    }
}

#[derive(Serialize, Deserialize)]
struct ObservationRow {
    post_id: u64,
    page_id: u64,
    crawl_kind: String,
    observed_at_min: u64,
    reactions: u64,
    shares: u64,
    comments: u64,
    created_at_min: u64,
}

#[derive(Serialize, Deserialize)]
struct FollowupRow {
    post_id: u64,
    present: u8,
    reactions: u64,
    shares: u64,
    comments: u64,
}

pub(crate) fn write_preamble<W: Write>(out: &mut W, preamble: &str, path: &str) -> Result<()> {
    writeln!(out, "# {preamble}").map_err(|e| Error::io(path, e))
}

/// Writes `observations.csv`.
pub fn write_observations_csv<W: Write>(
    mut out: W,
    preamble: &str,
    log: &ObservationLog,
) -> Result<()> {
    write_preamble(&mut out, preamble, "observations.csv")?;
    let mut w = csv::Writer::from_writer(out);
    for o in log.observations() {
        w.serialize(ObservationRow {
            post_id: o.post_id.0,
            page_id: o.page_id.0,
            crawl_kind: o.crawl_kind.name().to_string(),
            observed_at_min: o.observed_at.0,
            reactions: o.counts.reactions,
            shares: o.counts.shares,
            comments: o.counts.comments,
            created_at_min: o.created_at.0,
        })?;
    }
    w.flush().map_err(|e| Error::io("observations.csv", e))
}

/// Writes `followup.csv`.
pub fn write_followup_csv<W: Write>(
    mut out: W,
    preamble: &str,
    log: &ObservationLog,
) -> Result<()> {
    write_preamble(&mut out, preamble, "followup.csv")?;
    let mut w = csv::Writer::from_writer(out);
    for (id, f) in log.followup() {
        w.serialize(FollowupRow {
            post_id: id.0,
            present: f.present as u8,
            reactions: f.counts.reactions,
            shares: f.counts.shares,
            comments: f.counts.comments,
        })?;
    }
    w.flush().map_err(|e| Error::io("followup.csv", e))
}

pub(crate) fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input)
}

/// Strict reader for `observations.csv`; any bad row is an error.
pub fn read_observations_csv<R: Read>(input: R) -> Result<Vec<Observation>> {
    let mut out = Vec::new();
    for row in reader(input).deserialize::<ObservationRow>() {
        let r = row?;
        out.push(Observation {
            post_id: PostId(r.post_id),
            page_id: PageId(r.page_id),
            created_at: SimTime(r.created_at_min),
            crawl_kind: r.crawl_kind.parse()?,
            observed_at: SimTime(r.observed_at_min),
            counts: EngagementCounts::new(r.reactions, r.shares, r.comments),
        });
    }
    Ok(out)
}

/// Strict reader for `followup.csv`.
pub fn read_followup_csv<R: Read>(input: R) -> Result<BTreeMap<PostId, FollowupRecord>> {
    let mut out = BTreeMap::new();
    for row in reader(input).deserialize::<FollowupRow>() {
        let r = row?;
        if r.present > 1 {
            return Err(Error::config(format!(
                "post {}: present must be 0 or 1",
                r.post_id
            )));
        }
        out.insert(
            PostId(r.post_id),
            FollowupRecord {
                present: r.present == 1,
                counts: EngagementCounts::new(r.reactions, r.shares, r.comments),
            },
        );
    }
    Ok(out)
}
