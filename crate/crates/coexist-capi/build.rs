use cbindgen::{Builder, Config};

fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let header = format!("{crate_dir}/include/coexist.h");
    let config = Config::from_file(format!("{crate_dir}/cbindgen.toml")).unwrap_or_default();
    if let Ok(bindings) = Builder::new().with_crate(&crate_dir).with_config(config).generate() {
        bindings.write_to_file(header);
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
