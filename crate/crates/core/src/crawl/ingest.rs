use std::collections::{BTreeMap, HashSet};
use std::io::Read;

use super::log::{reader, FollowupRecord, Observation, ObservationLog};
use super::CrawlKind;
use crate::error::{Error, Result};
use crate::model::{read_pages_csv, EngagementCounts, PageId, PageProfile, PostId};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IngestOptions {
    /// Abort when more than this share of data rows is rejected.
    pub max_reject_rate: f64,
}

impl Default for IngestOptions {
    fn default() -> Self {
        Self {
            max_reject_rate: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectedRow {
    pub file: &'static str,
    pub line: u64,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct IngestOutcome {
    pub log: ObservationLog,
    pub pages: Vec<PageProfile>,
    pub rejected: Vec<RejectedRow>,
    pub total_rows: usize,
}

struct Parsed {
    line: u64,
    obs: Observation,
}

fn column(headers: &csv::StringRecord, file: &str, name: &str) -> Result<usize> {
    headers
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| Error::config(format!("{file}: missing column {name:?}")))
}

/// Reads snapshot exports into an [`ObservationLog`].
///
/// Bad rows (malformed fields, unknown pages, counts that decrease for a
/// post, inconsistent post metadata) are collected rather than fatal; the
/// whole ingest aborts only if their share exceeds the configured limit.
pub fn ingest_snapshots<O: Read, F: Read, P: Read>(
    observations: O,
    followup: F,
    pages: P,
    options: IngestOptions,
) -> Result<IngestOutcome> {
    let pages = read_pages_csv(pages)?;
    let known_pages: HashSet<PageId> = pages.iter().map(|p| p.page_id).collect();
    let mut rejected = Vec::new();
    let mut total_rows = 0usize;

    const OBS: &str = "observations.csv";
    let mut rdr = reader(observations);
    let headers = rdr.headers()?.clone();
    let cols = [
        "post_id",
        "page_id",
        "crawl_kind",
        "observed_at_min",
        "reactions",
        "shares",
        "comments",
        "created_at_min",
    ]
    .map(|c| column(&headers, OBS, c));
    let cols = cols.into_iter().collect::<Result<Vec<_>>>()?;

    let mut parsed: Vec<Parsed> = Vec::new();
    for rec in rdr.records() {
        total_rows += 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                let line = e.position().map_or(0, |p| p.line());
                rejected.push(RejectedRow {
                    file: OBS,
                    line,
                    reason: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        match parse_observation(&rec, &cols) {
            Ok(obs) if !known_pages.contains(&obs.page_id) => rejected.push(RejectedRow {
                file: OBS,
                line,
                reason: format!("unknown page_id {}", obs.page_id),
            }),
            Ok(obs) if obs.observed_at < obs.created_at => rejected.push(RejectedRow {
                file: OBS,
                line,
                reason: "observed before creation".into(),
            }),
            Ok(obs) => parsed.push(Parsed { line, obs }),
            Err(reason) => rejected.push(RejectedRow {
                file: OBS,
                line,
                reason,
            }),
        }
    }

    parsed.sort_by_key(|p| (p.obs.post_id, p.obs.observed_at, p.line));
    let mut accepted: Vec<Observation> = Vec::with_capacity(parsed.len());
    let mut last_of: BTreeMap<PostId, Observation> = BTreeMap::new();
    for p in parsed {
        let o = p.obs;
        if let Some(prev) = last_of.get(&o.post_id) {
            let reason = if prev.page_id != o.page_id || prev.created_at != o.created_at {
                Some(format!("post {} changes page_id or created_at", o.post_id))
            } else if prev.observed_at == o.observed_at {
                Some(format!(
                    "duplicate observation of post {} at {}",
                    o.post_id, o.observed_at
                ))
            } else if !prev.counts.dominated_by(&o.counts) {
                Some(format!(
                    "non-monotone counts for post {}: {:?} then {:?}",
                    o.post_id, prev.counts, o.counts
                ))
            } else {
                None
            };
            if let Some(reason) = reason {
                rejected.push(RejectedRow {
                    file: OBS,
                    line: p.line,
                    reason,
                });
                continue;
            }
        }
        last_of.insert(o.post_id, o);
        accepted.push(o);
    }

    const FOL: &str = "followup.csv";
    let mut rdr = reader(followup);
    let headers = rdr.headers()?.clone();
    let fcols = ["post_id", "present", "reactions", "shares", "comments"]
        .map(|c| column(&headers, FOL, c))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let mut follow: BTreeMap<PostId, FollowupRecord> = BTreeMap::new();
    for rec in rdr.records() {
        total_rows += 1;
        let rec = match rec {
            Ok(r) => r,
            Err(e) => {
                rejected.push(RejectedRow {
                    file: FOL,
                    line: e.position().map_or(0, |p| p.line()),
                    reason: format!("malformed row: {e}"),
                });
                continue;
            }
        };
        let line = rec.position().map_or(0, |p| p.line());
        let reason = match parse_followup(&rec, &fcols) {
            Err(reason) => Some(reason),
            Ok((id, _)) if follow.contains_key(&id) => {
                Some(format!("duplicate follow-up for post {id}"))
            }
            Ok((id, f)) => match last_of.get(&id) {
                Some(prev) if f.present && !prev.counts.dominated_by(&f.counts) => Some(format!(
                    "non-monotone counts for post {id}: follow-up {:?} below {:?}",
                    f.counts, prev.counts
                )),
                _ => {
                    follow.insert(id, f);
                    None
                }
            },
        };
        if let Some(reason) = reason {
            rejected.push(RejectedRow {
                file: FOL,
                line,
                reason,
            });
        }
    }

    for r in &rejected {
        log::warn!("{} line {}: {}", r.file, r.line, r.reason);
    }
    if total_rows > 0 && rejected.len() as f64 / total_rows as f64 > options.max_reject_rate {
        return Err(Error::IngestAborted {
            rejected: rejected.len(),
            total: total_rows,
            limit: options.max_reject_rate * 100.0,
            first: rejected
                .first()
                .map(|r| format!("{} line {}: {}", r.file, r.line, r.reason))
                .unwrap_or_default(),
        });
    }
    Ok(IngestOutcome {
        log: ObservationLog::new(accepted, follow),
        pages,
        rejected,
        total_rows,
    })
}

fn field<T: std::str::FromStr>(
    rec: &csv::StringRecord,
    idx: usize,
    name: &str,
) -> std::result::Result<T, String> {
    let raw = rec
        .get(idx)
        .ok_or_else(|| format!("missing field {name}"))?;
    raw.parse().map_err(|_| format!("bad {name} {raw:?}"))
}

fn parse_observation(
    rec: &csv::StringRecord,
    c: &[usize],
) -> std::result::Result<Observation, String> {
    let kind: CrawlKind = rec
        .get(c[2])
        .ok_or("missing field crawl_kind")?
        .parse()
        .map_err(|e: Error| e.to_string())?;
    Ok(Observation {
        post_id: PostId(field(rec, c[0], "post_id")?),
        page_id: PageId(field(rec, c[1], "page_id")?),
        crawl_kind: kind,
        observed_at: SimTime(field(rec, c[3], "observed_at_min")?),
        counts: EngagementCounts::new(
            field(rec, c[4], "reactions")?,
            field(rec, c[5], "shares")?,
            field(rec, c[6], "comments")?,
        ),
        created_at: SimTime(field(rec, c[7], "created_at_min")?),
    })
}

fn parse_followup(
    rec: &csv::StringRecord,
    c: &[usize],
) -> std::result::Result<(PostId, FollowupRecord), String> {
    let present: u8 = field(rec, c[1], "present")?;
    if present > 1 {
        return Err(format!("present must be 0 or 1, got {present}"));
    }
    Ok((
        PostId(field(rec, c[0], "post_id")?),
        FollowupRecord {
            present: present == 1,
            counts: EngagementCounts::new(
                field(rec, c[2], "reactions")?,
                field(rec, c[3], "shares")?,
                field(rec, c[4], "comments")?,
            ),
        },
    ))
}
