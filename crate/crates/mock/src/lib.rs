//! Reference implementation of the geopub deposition protocol.
//!
//! [`MockService`] holds the protocol state machine and can be driven
//! directly; [`start`] puts it behind a loopback or network HTTP listener
//! with request counting and fault injection.

mod http;
mod service;

pub use http::{
    parse_head, start, start_with_snapshot, ChunkedReader, EndpointMatcher, Fault, Head, Listen,
    RunningService, StartError,
};
pub use service::{classify, Endpoint, MockService, Reply, Request, ServiceConfig, State, GB, MB};
