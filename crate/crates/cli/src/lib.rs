//! Experiment runner library behind the `soadv` binary.
