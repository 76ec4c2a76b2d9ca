//! `serve`: run the authority's ingest/publish API until interrupted.

use lumitrace_core::protocol::wire::AuthorityServer;
use lumitrace_core::protocol::AuthorityStore;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Address to listen on; port 0 picks a free port.
    #[arg(long, default_value = "127.0.0.1:0")]
    addr: String,

    /// Bearer credential hospitals must present on `submit-report`.
    #[arg(long)]
    credential: String,
}

pub fn run(args: &Args, config: &RunConfig) -> Result<(), CliError> {
    let store = AuthorityStore::new(config.protocol.publish_bucket_s);
    let server = AuthorityServer::bind(&args.addr, &args.credential, store)
        .map_err(|e| CliError::input(format!("{}: {e}", args.addr)))?;
    let addr = server
        .local_addr()
        .map_err(|e| CliError::internal(e.to_string()))?;
    eprintln!("listening on {addr}");
    server
        .run()
        .map_err(|e| CliError::internal(format!("server failed: {e}")))
}
