#[cfg(feature = "ffi-headers")]
mod ffi_headers {
    use std::env;

    pub fn generate_headers() {
        let crate_dir = env::var("CARGO_MANIFEST_DIR").expect("CARGO_MANIFEST_DIR is set by cargo");
        cbindgen::generate(&crate_dir)
            .expect("unable to generate C bindings")
            .write_to_file(format!("{crate_dir}/include/mattekit.h"));
    }
}

fn main() {
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    #[cfg(feature = "ffi-headers")]
    ffi_headers::generate_headers();
}
