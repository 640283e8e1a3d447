fn main() {
    std::process::exit(gapdefect_cli::run(std::env::args_os()));
}
