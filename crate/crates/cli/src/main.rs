mod config;
mod output;
mod run;

fn main() {
    std::process::exit(run::main_with(std::env::args_os()));
}
