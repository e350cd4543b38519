fn main() {
    let status = infer_bench::cli::run_cli(std::env::args_os());
    std::process::exit(status.code());
}
