use tracing_subscriber::EnvFilter;

fn main() {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .init();
    let code = rewoo::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
