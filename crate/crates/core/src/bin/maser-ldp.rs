fn main() {
    std::process::exit(maser_ldp::cli::run(std::env::args_os()));
}
