fn main() {
    std::process::exit(loopforge_cli::app::run(std::env::args_os()));
}
