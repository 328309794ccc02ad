fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    std::process::exit(metaphor_forge::cli::main_with_args(std::env::args_os()));
}
