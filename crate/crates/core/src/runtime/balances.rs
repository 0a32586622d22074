//! Account balances and the transfer call.

use crate::primitives::codec::{CodecError, Decode, Encode, Reader};
use crate::primitives::{AccountId, StateKey};

use super::{DispatchError, ExecContext, StorageMap};

pub const MODULE: &str = "balances";

pub const INSUFFICIENT_FUNDS: &str = "Does not have enough funds.";
pub const BALANCE_OVERFLOW: &str = "Balance overflow.";

pub type Balance = u128;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AccountBalance {
    /// The amount that is free and allowed to be transferred out.
    pub free: Balance,
    /// The amount reserved by other modules.
    pub reserved: Balance,
}

impl AccountBalance {
    pub fn free(free: Balance) -> Self {
        AccountBalance { free, reserved: 0 }
    }
}

impl Encode for AccountBalance {
    fn encode_to(&self, out: &mut Vec<u8>) {
        self.free.encode_to(out);
        self.reserved.encode_to(out);
    }
}

impl Decode for AccountBalance {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        Ok(AccountBalance { free: Balance::decode_from(r)?, reserved: Balance::decode_from(r)? })
    }
}

/// `AccountId -> AccountBalance`.
pub const BALANCE_OF: StorageMap<AccountId, AccountBalance> = StorageMap::new(MODULE, "balance_of");

pub fn balance_key(who: &AccountId) -> StateKey {
    BALANCE_OF.key_for(who)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Call {
    Transfer { dest: AccountId, value: Balance },
}

impl Call {
    pub fn access_hints(&self, origin: &AccountId) -> Vec<StateKey> {
        match self {
            Call::Transfer { dest, .. } => vec![balance_key(origin), balance_key(dest)],
        }
    }

    pub(super) fn execute(&self, origin: &AccountId, ctx: &mut ExecContext<'_>) -> Result<(), DispatchError> {
        match self {
            Call::Transfer { dest, value } => transfer(ctx, origin, dest, *value),
        }
    }
}

fn transfer(ctx: &mut ExecContext<'_>, origin: &AccountId, dest: &AccountId, value: Balance) -> Result<(), DispatchError> {
    let mut balance = BALANCE_OF.read(ctx, origin)?;
    let Some(remaining) = balance.free.checked_sub(value) else {
        return Err(DispatchError::Logic(INSUFFICIENT_FUNDS));
    };
    balance.free = remaining;
    BALANCE_OF.write(ctx, origin, &balance)?;
    BALANCE_OF.mutate(ctx, dest, |b| {
        b.free = b.free.checked_add(value).ok_or(BALANCE_OVERFLOW)?;
        Ok(())
    })
}

impl Encode for Call {
    fn encode_to(&self, out: &mut Vec<u8>) {
        match self {
            Call::Transfer { dest, value } => {
                out.push(0);
                dest.encode_to(out);
                value.encode_to(out);
            }
        }
    }
}

impl Decode for Call {
    fn decode_from(r: &mut Reader<'_>) -> Result<Self, CodecError> {
        match u8::decode_from(r)? {
            0 => Ok(Call::Transfer { dest: AccountId::decode_from(r)?, value: Balance::decode_from(r)? }),
            v => Err(CodecError::InvalidVariant { what: "balances call", value: v as u64 }),
        }
    }
}
