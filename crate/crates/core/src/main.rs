use std::io::Write;

fn main() {
    let args: Vec<std::ffi::OsString> = std::env::args_os().collect();
    let verbose = args.iter().filter_map(|a| a.to_str()).map(|a| match a {
        "--verbose" => 1,
        s if s.starts_with('-') && !s.starts_with("--") && s[1..].chars().all(|c| c == 'v') => s.len() - 1,
        _ => 0,
    });
    let level = match verbose.sum::<usize>() {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = inkeval::cli::run(args);
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    std::process::exit(outcome.code);
}
