fn main() {
    std::process::exit(lagfactor_core::cli::parse_and_dispatch(std::env::args()));
}
