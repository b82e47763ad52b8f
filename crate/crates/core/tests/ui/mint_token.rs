use sths_core::dataset::OracleToken;

fn main() {
    let _ = OracleToken { _private: () };
}
