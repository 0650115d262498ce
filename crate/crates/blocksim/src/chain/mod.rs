//! Hash-linked blocks, proof of work, fork choice and reorgs.

mod block;
mod store;

pub use block::{
    check_pow, mine_block, tx_commitment, Block, BlockHeader, BlockId, BlockTemplate, Mined,
    RewardSchedule, Target,
};
pub use store::{
    retarget, BlockError, ChainParams, ChainStore, ConnectOutcome, RetargetParams,
};
