//! Deliberately empty: this package only exists to host the criterion
//! benchmarks under `benches/`. Shared fixtures live next to the benchmarks
//! themselves so the library target stays dependency-free.
