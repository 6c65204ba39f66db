fn main() {
    std::process::exit(extruflow::cli::run());
}
