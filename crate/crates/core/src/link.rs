//! End-to-end link: random info bits, LDPC encoding, QAM mapping, grid
//! construction, channel and noise.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{apply_channel_awgn, ebno_to_n0, frequency_response, realize_channel, ChannelModel};
use crate::phy::{build_grid, qam_map, GridConfig, LdpcCode, Modulation, RxGrid};
use crate::{Error, Result};

/// Everything that defines a data domain apart from the SNR.
#[derive(Clone, Debug, PartialEq)]
pub struct Domain {
    pub grid: GridConfig,
    pub modulation: Modulation,
    pub channel: ChannelModel,
    pub num_rx: usize,
    pub ldpc_seed: u64,
}

/// Short, stable description of a domain used for logs and fingerprints.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DomainTag {
    pub modulation: String,
    pub scs_khz: String,
    pub channel: String,
}

impl Domain {
    pub fn tag(&self) -> DomainTag {
        DomainTag {
            modulation: self.modulation.name().into(),
            scs_khz: format!("{}", self.grid.scs_khz),
            channel: self.channel.name().into(),
        }
    }
}

/// One transmitted and received resource grid with its ground truth.
#[derive(Clone, Debug)]
pub struct Block {
    pub info: Vec<u8>,
    /// Coded bits in canonical data-RE order.
    pub coded: Vec<u8>,
    pub rx: RxGrid,
    /// Frequency response `[N_rx, S]`.
    pub h: Vec<Complex64>,
    pub n0: f64,
}

#[derive(Clone, Debug)]
pub struct Link {
    domain: Domain,
    code: LdpcCode,
}

impl Link {
    /// One codeword fills every data RE of one grid.
    pub fn new(domain: Domain) -> Result<Self> {
        domain.grid.validate()?;
        if domain.num_rx == 0 {
            return Err(Error::Config("at least one receive antenna is required".into()));
        }
        let n = domain.grid.data_re_count() * domain.modulation.bits_per_symbol();
        let code = LdpcCode::regular(n, domain.ldpc_seed)?;
        Ok(Self { domain, code })
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn code(&self) -> &LdpcCode {
        &self.code
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.domain.modulation.bits_per_symbol()
    }

    pub fn n0(&self, ebno_db: f64) -> Result<f64> {
        ebno_to_n0(ebno_db, self.bits_per_symbol(), self.code.rate())
    }

    /// Draws info bits, then the channel, then the noise, all from `rng`.
    pub fn transmit<R: Rng + ?Sized>(&self, ebno_db: f64, rng: &mut R) -> Result<Block> {
        self.transmit_n0(self.n0(ebno_db)?, rng)
    }

    pub fn transmit_n0<R: Rng + ?Sized>(&self, n0: f64, rng: &mut R) -> Result<Block> {
        let info: Vec<u8> = (0..self.code.k()).map(|_| rng.random_range(0..2u8)).collect();
        let coded = self.code.encode(&info)?;
        let symbols = qam_map(&coded, self.domain.modulation)?;
        let tx = build_grid(&symbols, &self.domain.grid)?;
        let real = realize_channel(&self.domain.channel, self.domain.num_rx, rng);
        let h = frequency_response(&real, &self.domain.grid);
        let rx = apply_channel_awgn(&tx, &h, self.domain.num_rx, n0, rng)?;
        Ok(Block { info, coded, rx, h, n0 })
    }
}
