fn main() {
    std::process::exit(peer_contracts::cli::run(std::env::args_os()));
}
