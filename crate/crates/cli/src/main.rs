fn main() {
    std::process::exit(addlab_tool::run(std::env::args_os().collect()));
}
