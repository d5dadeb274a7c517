use std::path::Path;

fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").unwrap();
    let config = cbindgen::Config::from_file(Path::new(&crate_dir).join("cbindgen.toml"))
        .expect("cbindgen.toml must parse");
    match cbindgen::generate_with_config(&crate_dir, config) {
        Ok(bindings) => {
            bindings.write_to_file(Path::new(&crate_dir).join("include").join("kreach.h"));
        }
        // Header rot is caught by the committed_header_lists_every_symbol test.
        Err(err) => println!("cargo:warning=skipping header generation: {err}"),
    }
}
