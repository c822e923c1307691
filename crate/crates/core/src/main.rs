fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("CHORDKIT_LOG", "warn")).init();
    std::process::exit(chordkit::cli::run(std::env::args_os()));
}
