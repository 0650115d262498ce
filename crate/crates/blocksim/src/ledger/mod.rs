//! Keys, addresses, transactions and the unspent-output set.

mod encoding;
mod keys;
mod tx;
mod utxo;

pub use encoding::{sha256, Encoder};
pub use keys::{Address, KeyPair, PublicKey, SecretKey, SigScheme, Signature};
pub use tx::{pay, Amount, OutPoint, Transaction, TxError, TxId, TxInput, TxOutput, COIN};
pub use utxo::{validate_transaction, UndoEntry, UtxoSet, UtxoView, ValidationError};
