fn main() {
    let budget = std::env::var("SSMLAB_BUDGET").ok();
    let code = ssmlab_cli::run(
        std::env::args_os(),
        budget.as_deref(),
        &mut std::io::stdout().lock(),
        &mut std::io::stderr().lock(),
    );
    std::process::exit(code);
}
