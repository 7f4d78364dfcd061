fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter("ABSCISSA_LOG")).init();
    std::process::exit(abscissa_core::cli::main_with_args(std::env::args_os()));
}
