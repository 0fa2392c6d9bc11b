fn main() {
    std::process::exit(vidquiz::cli::main());
}
