fn main() {
    std::process::exit(mediated_gossip::cli::main_with(std::env::args()));
}
