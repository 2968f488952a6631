//! Holds the `acceptance` test target, which prints one PASS/FAIL line per
//! acceptance criterion: `cargo test -p sqd-validation --test acceptance`.
