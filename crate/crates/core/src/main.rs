fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FISHDIP_LOG_LEVEL", "info")).init();
    std::process::exit(fishdip::cli::main_with_args(std::env::args_os()));
}
