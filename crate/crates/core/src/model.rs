//! Domain types shared by the simulator and the analysis pipeline.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PostId(pub u64);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PageId(pub u64);

impl fmt::Display for PostId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

impl fmt::Display for PageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Interaction counts as exposed by the monitoring API.
///
/// Engagement is the sum of reactions, shares and top-level comments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct EngagementCounts {
    pub reactions: u64,
    pub shares: u64,
    pub comments: u64,
}

impl EngagementCounts {
    pub const ZERO: EngagementCounts = EngagementCounts {
        reactions: 0,
        shares: 0,
        comments: 0,
    };

    pub fn new(reactions: u64, shares: u64, comments: u64) -> Self {
        Self {
            reactions,
            shares,
            comments,
        }
    }

    pub fn total(&self) -> u64 {
        self.reactions
            .saturating_add(self.shares)
            .saturating_add(self.comments)
    }

    /// True if no component of `self` exceeds the matching component of `later`.
    pub fn dominated_by(&self, later: &EngagementCounts) -> bool {
        self.reactions <= later.reactions
            && self.shares <= later.shares
            && self.comments <= later.comments
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Partisanship {
    FarLeft,
    SlightlyLeft,
    Center,
    SlightlyRight,
    FarRight,
}

impl Partisanship {
    pub const ALL: [Partisanship; 5] = [
        Partisanship::FarLeft,
        Partisanship::SlightlyLeft,
        Partisanship::Center,
        Partisanship::SlightlyRight,
        Partisanship::FarRight,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Partisanship::FarLeft => "FarLeft",
            Partisanship::SlightlyLeft => "SlightlyLeft",
            Partisanship::Center => "Center",
            Partisanship::SlightlyRight => "SlightlyRight",
            Partisanship::FarRight => "FarRight",
        }
    }
}

impl fmt::Display for Partisanship {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Partisanship {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Partisanship::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::config(format!("unknown partisanship label {s:?}")))
    }
}

/// A publisher page and the labels attached to it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PageProfile {
    pub page_id: PageId,
    pub partisanship: Partisanship,
    pub misinformation: bool,
    pub posts_per_day: f64,
    pub audience_scale: f64,
}

impl PageProfile {
    pub fn validate(&self) -> Result<()> {
        if !(self.posts_per_day > 0.0 && self.posts_per_day.is_finite()) {
            return Err(Error::config(format!(
                "page {}: posts_per_day must be positive",
                self.page_id
            )));
        }
        if !(self.audience_scale > 0.0 && self.audience_scale.is_finite()) {
            return Err(Error::config(format!(
                "page {}: audience_scale must be positive",
                self.page_id
            )));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct PageRow {
    page_id: u64,
    partisanship: String,
    misinformation: u8,
    posts_per_day: f64,
    audience_scale: f64,
}

/// Writes `pages.csv`. `preamble` becomes a leading `#` comment line.
pub fn write_pages_csv<W: Write>(out: W, preamble: &str, pages: &[PageProfile]) -> Result<()> {
    let mut out = out;
    writeln!(out, "# {preamble}").map_err(|e| Error::io("pages.csv", e))?;
    let mut w = csv::Writer::from_writer(out);
    for p in pages {
        w.serialize(PageRow {
            page_id: p.page_id.0,
            partisanship: p.partisanship.name().to_string(),
            misinformation: p.misinformation as u8,
            posts_per_day: p.posts_per_day,
            audience_scale: p.audience_scale,
        })?;
    }
    w.flush().map_err(|e| Error::io("pages.csv", e))?;
    Ok(())
}

/// Reads `pages.csv`, rejecting duplicate ids and invalid labels.
pub fn read_pages_csv<R: Read>(input: R) -> Result<Vec<PageProfile>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(input);
    let mut pages = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for row in rdr.deserialize::<PageRow>() {
        let row = row?;
        let misinformation = match row.misinformation {
            0 => false,
            1 => true,
            other => {
                return Err(Error::config(format!(
                    "page {}: misinformation must be 0 or 1, got {other}",
                    row.page_id
                )))
            }
        };
        let page = PageProfile {
            page_id: PageId(row.page_id),
            partisanship: row.partisanship.parse()?,
            misinformation,
            posts_per_day: row.posts_per_day,
            audience_scale: row.audience_scale,
        };
        page.validate()?;
        if !seen.insert(page.page_id) {
            return Err(Error::config(format!("duplicate page_id {}", page.page_id)));
        }
        pages.push(page);
    }
    Ok(pages)
}
