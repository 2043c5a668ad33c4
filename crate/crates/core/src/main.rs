fn main() {
    std::process::exit(stereosim::run_cli());
}
