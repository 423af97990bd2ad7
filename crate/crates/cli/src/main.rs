fn main() {
    std::process::exit(jmgt_cli::run_command(std::env::args_os()));
}
