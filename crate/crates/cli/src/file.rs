//! The JSON auction file.
//!
//! ```json
//! {
//!   "goods": 2,
//!   "M": 100,
//!   "bidders": [{ "name": "Alice", "bids": [["6", "6", 1], ["0", "4", 1]] }],
//!   "target": [1, 1],
//!   "priority": [[1, "Alice"]]
//! }
//! ```
//!
//! Bid values are non-negative decimals with at most one fractional digit,
//! written as strings (integers may also be bare numbers). The last entry of
//! each bid is a non-zero integer weight.

use std::collections::HashSet;

use num_traits::Zero;
use productmix::{BidList, Scalar};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AuctionFile {
    pub goods: usize,
    pub max_value: Option<i64>,
    pub bidders: Vec<BidList>,
    pub target: Vec<i64>,
    /// `(good, bidder name)` pairs.
    pub priority: Option<Vec<(usize, String)>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    goods: usize,
    #[serde(rename = "M", default)]
    max_value: Option<i64>,
    bidders: Vec<RawBidder>,
    target: Vec<i64>,
    #[serde(default)]
    priority: Option<Vec<(usize, String)>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBidder {
    name: String,
    bids: Vec<Vec<Value>>,
}

fn compact<T: Serialize + ?Sized>(v: &T) -> String {
    serde_json::to_string(v).expect("serialisable")
}

fn parse_error(field: String, msg: impl Into<String>) -> CliError {
    CliError::Parse(format!("{field}: {}", msg.into()))
}

/// Parses `"12"`, `"12.5"` or a bare integer.
pub fn parse_value(v: &Value) -> Result<Scalar, String> {
    let text = match v {
        Value::String(s) => s.clone(),
        Value::Number(n) if n.is_i64() || n.is_u64() => n.to_string(),
        other => return Err(format!("expected a decimal string, found {other}")),
    };
    let (whole, frac) = match text.split_once('.') {
        Some((w, f)) => (w, Some(f)),
        None => (text.as_str(), None),
    };
    let digits = |s: &str| !s.is_empty() && s.bytes().all(|b| b.is_ascii_digit());
    if !digits(whole) || !frac.is_none_or(|f| f.len() == 1 && digits(f)) {
        return Err(format!("{text:?} is not a non-negative decimal with at most one fractional digit"));
    }
    let whole: i64 = whole.parse().map_err(|_| format!("{text:?} is out of range"))?;
    let tenths: i64 = frac.map_or(0, |f| f.parse().expect("one digit"));
    whole
        .checked_mul(10)
        .and_then(|w| w.checked_add(tenths))
        .map(|t| Scalar::new(t, 10))
        .ok_or_else(|| format!("{text:?} is out of range"))
}

/// Exact decimal text for a value whose denominator divides 10, else `a/b`.
pub fn format_value(v: &Scalar) -> String {
    if v.is_integer() {
        return v.to_integer().to_string();
    }
    if 10 % v.denom() == 0 {
        let tenths = (v * Scalar::from_integer(10)).to_integer();
        let sign = if tenths < 0 { "-" } else { "" };
        return format!("{sign}{}.{}", tenths.abs() / 10, tenths.abs() % 10);
    }
    v.to_string()
}

/// JSON number when integral, decimal string otherwise.
pub fn value_json(v: &Scalar) -> Value {
    match v.is_integer().then(|| v.to_integer()) {
        Some(i) => Value::from(i),
        None => Value::from(format_value(v)),
    }
}

impl AuctionFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let raw: RawFile = serde_json::from_str(text).map_err(|e| {
            CliError::Parse(format!("line {} column {}: {e}", e.line(), e.column()))
        })?;
        let n = raw.goods;
        if n == 0 || n > productmix::GoodSet::MAX_GOODS {
            return Err(parse_error("goods".into(), format!("must be in 1..={}", productmix::GoodSet::MAX_GOODS)));
        }
        if let Some(m) = raw.max_value {
            if m < 4 || m % 2 != 0 {
                return Err(parse_error("M".into(), "must be even and at least 4"));
            }
        }
        if raw.target.len() != n {
            return Err(parse_error("target".into(), format!("expected {n} entries, found {}", raw.target.len())));
        }
        if let Some(i) = raw.target.iter().position(|&t| t < 0) {
            return Err(parse_error(format!("target[{i}]"), "must be non-negative"));
        }
        let mut names = HashSet::new();
        let mut bidders = Vec::with_capacity(raw.bidders.len());
        for (j, b) in raw.bidders.iter().enumerate() {
            if !names.insert(b.name.as_str()) {
                return Err(parse_error(format!("bidders[{j}].name"), format!("duplicate name {:?}", b.name)));
            }
            let mut weighted = Vec::with_capacity(b.bids.len());
            for (k, bid) in b.bids.iter().enumerate() {
                let field = format!("bidders[{j}].bids[{k}]");
                if bid.len() != n + 1 {
                    return Err(parse_error(field, format!("expected {n} values and a weight, found {} entries", bid.len())));
                }
                let values = bid[..n]
                    .iter()
                    .enumerate()
                    .map(|(i, v)| parse_value(v).map_err(|e| parse_error(format!("{field}[{i}]"), e)))
                    .collect::<Result<Vec<_>, _>>()?;
                let weight = bid[n]
                    .as_i64()
                    .ok_or_else(|| parse_error(format!("{field}[{n}]"), "weight must be an integer"))?;
                if weight == 0 {
                    return Err(parse_error(format!("{field}[{n}]"), "weight must be non-zero"));
                }
                weighted.push((values, weight));
            }
            let list = BidList::from_weighted(b.name.clone(), weighted)
                .map_err(|e| parse_error(format!("bidders[{j}]"), e.to_string()))?;
            bidders.push(list);
        }
        if let Some(priority) = &raw.priority {
            for (k, (good, name)) in priority.iter().enumerate() {
                if *good > n {
                    return Err(parse_error(format!("priority[{k}]"), format!("no good {good}")));
                }
                if !names.contains(name.as_str()) && name != productmix::allocation::AUCTIONEER {
                    return Err(parse_error(format!("priority[{k}]"), format!("unknown bidder {name:?}")));
                }
            }
        }
        Ok(AuctionFile {
            goods: n,
            max_value: raw.max_value,
            bidders,
            target: raw.target,
            priority: raw.priority,
        })
    }

    /// JSON with one bid per line; equal consecutive unit bids are merged
    /// into one weighted entry.
    pub fn to_json(&self) -> String {
        let mut out = format!("{{\n  \"goods\": {},\n", self.goods);
        if let Some(m) = self.max_value {
            out += &format!("  \"M\": {m},\n");
        }
        out += "  \"bidders\": [";
        for (j, list) in self.bidders.iter().enumerate() {
            let mut merged: Vec<(Vec<Scalar>, i64)> = Vec::new();
            for bid in &list.bids {
                match merged.last_mut() {
                    Some((v, w)) if v.as_slice() == bid.values() && w.signum() == bid.weight() => {
                        *w += bid.weight()
                    }
                    _ => merged.push((bid.values().to_vec(), bid.weight())),
                }
            }
            out += if j == 0 { "\n" } else { ",\n" };
            out += &format!("    {{ \"name\": {}, \"bids\": [", compact(&list.owner));
            for (k, (v, w)) in merged.iter().enumerate() {
                let entry: Vec<Value> = v
                    .iter()
                    .map(|x| Value::from(format_value(x)))
                    .chain([Value::from(*w)])
                    .collect();
                out += if k == 0 { "\n" } else { ",\n" };
                out += &format!("      {}", compact(&entry));
            }
            out += if merged.is_empty() { "] }" } else { "\n    ] }" };
        }
        out += if self.bidders.is_empty() { "],\n" } else { "\n  ],\n" };
        out += &format!("  \"target\": {}", compact(&self.target));
        if let Some(p) = &self.priority {
            out += &format!(",\n  \"priority\": {}", compact(p));
        }
        out + "\n}\n"
    }

    /// Largest bid value, rounded up.
    pub fn max_bid_value(&self) -> i64 {
        self.bidders
            .iter()
            .flat_map(|l| &l.bids)
            .map(|b| b.max_value())
            .fold(Scalar::zero(), Scalar::max)
            .ceil()
            .to_integer()
    }
}
