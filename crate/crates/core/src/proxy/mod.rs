//! Database capture agent: the transparent relay proxy, the isolated
//! extractor invocation, the wire protocol helpers, and the deterministic
//! database stub used for testing and benchmarks.

pub mod extractor;
pub mod protocol;
pub mod server;
pub mod stub;

pub use extractor::{run_extractor, ExtractOutcome, ExtractorConfig};
pub use protocol::{handshake_line, parse_status, DbStatus};
pub use server::{serve, sibling_extractor, ProxyConfig, ProxyServer};
pub use stub::{respond, serve as serve_stub, StubConfig, StubServer};
