fn main() {
    let (mut out, mut err) = (std::io::stdout(), std::io::stderr());
    let mut io = gsexp_cli::Io {
        out: &mut out,
        err: &mut err,
    };
    std::process::exit(gsexp_cli::main_with_args(std::env::args_os(), &mut io));
}
