//! Line-delimited JSON wire protocol spoken with external backends.
//!
//! Each request and response is one UTF-8 JSON object on its own line.
//! Responses are matched to requests by `id`, which strictly increases within
//! a session. Unknown fields are ignored on both sides.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::Example;

/// A request sent to the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Request {
    pub id: u64,
    #[serde(flatten)]
    pub body: RequestBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase")]
pub enum RequestBody {
    Evaluate {
        round: usize,
        subset_ids: Vec<String>,
        examples: Vec<Example>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        split: Option<String>,
    },
    Generate {
        round: usize,
        seed_ids: Vec<String>,
        seed_examples: Vec<Example>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<String>,
    },
    Embed {
        ids: Vec<String>,
        texts: Vec<String>,
    },
}

impl RequestBody {
    pub fn op(&self) -> &'static str {
        match self {
            RequestBody::Evaluate { .. } => "evaluate",
            RequestBody::Generate { .. } => "generate",
            RequestBody::Embed { .. } => "embed",
        }
    }
}

/// A response read from the backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub id: u64,
    #[serde(flatten)]
    pub body: ResponseBody,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResponseBody {
    Metric {
        metric: f64,
    },
    Pool {
        pool: Vec<Example>,
    },
    Vectors {
        vectors: Vec<Vec<f64>>,
    },
    /// A backend-side failure reported in-band.
    Error {
        error: String,
    },
}

impl Request {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("requests always serialize")
    }

    pub fn parse(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::MalformedResponse {
            line: line.to_string(),
            reason: e.to_string(),
        })
    }
}

impl Response {
    pub fn to_line(&self) -> String {
        serde_json::to_string(self).expect("responses always serialize")
    }

    pub fn parse(line: &str) -> Result<Self> {
        serde_json::from_str(line).map_err(|e| Error::MalformedResponse {
            line: line.to_string(),
            reason: e.to_string(),
        })
    }
}
