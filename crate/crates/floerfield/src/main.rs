fn main() { std::process::exit(floerfield::cli::run_from_env()); }
