fn main() {
    std::process::exit(entcap::run());
}
