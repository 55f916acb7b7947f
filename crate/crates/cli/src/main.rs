fn main() {
    std::process::exit(occplan_cli::run(std::env::args_os()));
}
