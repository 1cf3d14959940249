//! Transmit-side chain: Gray QAM, LDPC coding and the resource grid.

mod grid;
mod ldpc;
mod qam;

pub use grid::{
    build_grid, extract_data_res, extract_data_res_with_inner, GridConfig, RxGrid, TxGrid, DEFAULT_PILOT_SEED,
};
pub use ldpc::{Decoded, LdpcCode, CHECK_DEGREE, MIN_SUM_SCALE, VAR_DEGREE};
pub use qam::{demap_maxlog, qam_map, Modulation};
