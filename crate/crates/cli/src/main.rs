fn main() {
    std::process::exit(weyl_lab::cli_main(std::env::args_os()));
}
