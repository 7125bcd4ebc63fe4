fn main() {
    std::process::exit(cascade_node_cli::run(std::env::args_os()));
}
