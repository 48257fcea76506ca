fn main() {
    let code = sstdpn::cli::run(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
