fn main() {
    std::process::exit(coupon_embed_cli::main_with_args(std::env::args_os()));
}
