fn main() {
    std::process::exit(qlan_cli::run(std::env::args_os()));
}
