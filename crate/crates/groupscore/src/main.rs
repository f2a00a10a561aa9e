fn main() {
    std::process::exit(groupscore::cli::main());
}
