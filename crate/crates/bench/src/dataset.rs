//! Synthetic transfer datasets.
//!
//! Accounts are `AccountId::from_index(i)` for `i in 0..accounts`, each
//! funded with the same initial free balance. Transactions are drawn from a
//! Xoshiro256** generator seeded through `seed_from_u64` (SplitMix64
//! expansion of the seed). A uniform index below `n` is `(next_u64 * n) >> 64`.
//! Each transfer draws its origin uniformly, then its destination uniformly
//! among the other `n - 1` accounts, and moves a fixed amount.

use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;
use taintexec::primitives::codec::{CodecError, Decode, Encode, Reader};
use taintexec::runtime::balances::{AccountBalance, Balance, BALANCE_OF};
use taintexec::{AccountId, TaintState, Transaction};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DatasetSpec {
    pub accounts: usize,
    pub transactions: usize,
    pub initial_balance: Balance,
    pub transfer_amount: Balance,
    pub seed: u64,
}

impl DatasetSpec {
    pub const MILLIONAIRE_BALANCE: Balance = 1_000_000_000_000;
    pub const MILLIONAIRE_AMOUNT: Balance = 10;

    /// Every account is funded far beyond what the queue could ever move out
    /// of it, so all transfers succeed.
    pub fn millionaire(accounts: usize, transactions: usize, seed: u64) -> Self {
        DatasetSpec {
            accounts,
            transactions,
            initial_balance: Self::MILLIONAIRE_BALANCE,
            transfer_amount: Self::MILLIONAIRE_AMOUNT,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        if self.transactions > 0 && self.accounts < 2 {
            return Err(BenchError::InvalidSpec(format!(
                "{} transactions need at least 2 accounts, got {}",
                self.transactions, self.accounts
            )));
        }
        if u32::try_from(self.transactions).is_err() || u32::try_from(self.accounts).is_err() {
            return Err(BenchError::InvalidSpec("counts must fit in u32".into()));
        }
        let total = self.initial_balance.checked_mul(self.accounts as u128);
        if total.is_none() {
            return Err(BenchError::InvalidSpec("total issuance overflows u128".into()));
        }
        Ok(())
    }

    /// True if no sequence of the generated transfers can run out of funds.
    pub fn is_millionaire(&self) -> bool {
        (self.transactions as u128)
            .checked_mul(self.transfer_amount)
            .is_some_and(|moved| moved <= self.initial_balance)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub genesis: Vec<(AccountId, AccountBalance)>,
    pub queue: Vec<Transaction>,
}

fn uniform(rng: &mut Xoshiro256StarStar, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}

pub fn generate_dataset(spec: &DatasetSpec) -> Result<Dataset, BenchError> {
    spec.validate()?;
    let accounts: Vec<AccountId> = (0..spec.accounts as u64).map(AccountId::from_index).collect();
    let genesis = accounts.iter().map(|a| (*a, AccountBalance::free(spec.initial_balance))).collect();

    let mut rng = Xoshiro256StarStar::seed_from_u64(spec.seed);
    let queue = (0..spec.transactions as u64)
        .map(|id| {
            let n = accounts.len();
            let origin = uniform(&mut rng, n);
            let dest = (origin + 1 + uniform(&mut rng, n - 1)) % n;
            Transaction::transfer(id, accounts[origin], accounts[dest], spec.transfer_amount)
        })
        .collect();
    Ok(Dataset { genesis, queue })
}

impl Dataset {
    /// A fresh, untainted state holding the genesis balances.
    pub fn genesis_state(&self) -> TaintState {
        let state = TaintState::new();
        for (who, balance) in &self.genesis {
            BALANCE_OF.insert_unchecked(&state, who, balance);
        }
        state
    }

    pub fn total_issuance(&self) -> Balance {
        self.genesis.iter().map(|(_, b)| b.free).sum()
    }
}

/// Sum of the free balances of every genesis account plus every transfer
/// destination.
pub fn total_free(dataset: &Dataset, state: &TaintState) -> Balance {
    let mut accounts: Vec<AccountId> = dataset.genesis.iter().map(|(a, _)| *a).collect();
    for tx in &dataset.queue {
        let taintexec::runtime::Call::Balances(taintexec::runtime::balances::Call::Transfer { dest, .. }) = &tx.call;
        accounts.push(*dest);
        accounts.push(tx.origin);
    }
    accounts.sort_unstable();
    accounts.dedup();
    accounts.iter().map(|a| BALANCE_OF.peek(state, a).expect("valid balance").free).sum()
}

/// `genesis: count u32 ‖ (account [32] ‖ free u128 ‖ reserved u128)*`, then
/// `queue: count u32 ‖ transaction*`.
impl Encode for Dataset {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.genesis.encode_to(out);
        self.queue.encode_to(out);
    }
}

impl Decode for Dataset {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(Dataset { genesis: Vec::decode_from(r)?, queue: Vec::decode_from(r)? })
    }
}
