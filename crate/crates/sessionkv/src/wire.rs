//! Wire encoding of kernel messages for the UDP transport: a small
//! length-prefixed binary format, no external schema.

use sessionkv_core::data::Data;
use sessionkv_core::kernel::{ClientId, Key, Message, OpId, ReplicaId, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodeError;

impl std::fmt::Display for DecodeError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "malformed wire message")
    }
}

impl std::error::Error for DecodeError {}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_len(out: &mut Vec<u8>, n: usize) {
    out.extend_from_slice(&(n as u32).to_le_bytes());
}

fn encode_data(out: &mut Vec<u8>, d: &Data) {
    match d {
        Data::Unit => out.push(0),
        Data::Nat(n) => {
            out.push(1);
            put_u64(out, *n);
        }
        Data::Tuple(items) => {
            out.push(2);
            put_len(out, items.len());
            items.iter().for_each(|i| encode_data(out, i));
        }
        Data::Set(items) => {
            out.push(3);
            put_len(out, items.len());
            items.iter().for_each(|i| encode_data(out, i));
        }
        Data::Map(entries) => {
            out.push(4);
            put_len(out, entries.len());
            for (k, v) in entries {
                encode_data(out, k);
                encode_data(out, v);
            }
        }
        Data::List(items) => {
            out.push(5);
            put_len(out, items.len());
            items.iter().for_each(|i| encode_data(out, i));
        }
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn byte(&mut self) -> Result<u8, DecodeError> {
        let b = *self.buf.get(self.pos).ok_or(DecodeError)?;
        self.pos += 1;
        Ok(b)
    }

    fn u64(&mut self) -> Result<u64, DecodeError> {
        let end = self.pos.checked_add(8).ok_or(DecodeError)?;
        let bytes = self.buf.get(self.pos..end).ok_or(DecodeError)?;
        self.pos = end;
        Ok(u64::from_le_bytes(bytes.try_into().unwrap()))
    }

    fn len(&mut self) -> Result<usize, DecodeError> {
        let end = self.pos.checked_add(4).ok_or(DecodeError)?;
        let bytes = self.buf.get(self.pos..end).ok_or(DecodeError)?;
        self.pos = end;
        Ok(u32::from_le_bytes(bytes.try_into().unwrap()) as usize)
    }

    fn data(&mut self) -> Result<Data, DecodeError> {
        Ok(match self.byte()? {
            0 => Data::Unit,
            1 => Data::Nat(self.u64()?),
            2 => {
                let n = self.len()?;
                Data::Tuple((0..n).map(|_| self.data()).collect::<Result<_, _>>()?)
            }
            3 => {
                let n = self.len()?;
                Data::Set((0..n).map(|_| self.data()).collect::<Result<_, _>>()?)
            }
            4 => {
                let n = self.len()?;
                Data::Map(
                    (0..n)
                        .map(|_| Ok((self.data()?, self.data()?)))
                        .collect::<Result<_, DecodeError>>()?,
                )
            }
            5 => {
                let n = self.len()?;
                Data::List((0..n).map(|_| self.data()).collect::<Result<_, _>>()?)
            }
            _ => return Err(DecodeError),
        })
    }
}

pub fn encode_message(m: &Message) -> Vec<u8> {
    let mut out = Vec::new();
    match m {
        Message::GetReq { from, to, op, key, payload } => {
            out.push(0);
            put_u64(&mut out, from.0);
            put_u64(&mut out, to.0);
            put_u64(&mut out, op.client.0);
            put_u64(&mut out, op.sequence);
            put_u64(&mut out, key.0);
            encode_data(&mut out, payload);
        }
        Message::GetRes { from, to, op, key, value, payload } => {
            out.push(1);
            put_u64(&mut out, from.0);
            put_u64(&mut out, to.0);
            put_u64(&mut out, op.client.0);
            put_u64(&mut out, op.sequence);
            put_u64(&mut out, key.0);
            put_u64(&mut out, value.0);
            encode_data(&mut out, payload);
        }
        Message::PutReq { from, to, key, value, payload } => {
            out.push(2);
            put_u64(&mut out, from.0);
            put_u64(&mut out, to.0);
            put_u64(&mut out, key.0);
            put_u64(&mut out, value.0);
            encode_data(&mut out, payload);
        }
    }
    out
}

pub fn decode_message(buf: &[u8]) -> Result<Message, DecodeError> {
    let mut r = Reader { buf, pos: 0 };
    let msg = match r.byte()? {
        0 => Message::GetReq {
            from: ClientId(r.u64()?),
            to: ReplicaId(r.u64()?),
            op: OpId { client: ClientId(r.u64()?), sequence: r.u64()? },
            key: Key(r.u64()?),
            payload: r.data()?,
        },
        1 => Message::GetRes {
            from: ReplicaId(r.u64()?),
            to: ClientId(r.u64()?),
            op: OpId { client: ClientId(r.u64()?), sequence: r.u64()? },
            key: Key(r.u64()?),
            value: Value(r.u64()?),
            payload: r.data()?,
        },
        2 => Message::PutReq {
            from: ClientId(r.u64()?),
            to: ReplicaId(r.u64()?),
            key: Key(r.u64()?),
            value: Value(r.u64()?),
            payload: r.data()?,
        },
        _ => return Err(DecodeError),
    };
    if r.pos == buf.len() {
        Ok(msg)
    } else {
        Err(DecodeError)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::{BTreeMap, BTreeSet};

    #[test]
    fn messages_round_trip() {
        let payload = Data::Tuple(vec![
            Data::Nat(3),
            Data::Set(BTreeSet::from([Data::Nat(1), Data::pair(Data::Nat(2), Data::Unit)])),
            Data::Map(BTreeMap::from([(Data::Nat(1), Data::Nat(9))])),
            Data::List(vec![Data::Unit]),
        ]);
        let messages = [
            Message::GetReq {
                from: ClientId(1),
                to: ReplicaId(2),
                op: OpId { client: ClientId(1), sequence: 4 },
                key: Key(0),
                payload: payload.clone(),
            },
            Message::GetRes {
                from: ReplicaId(2),
                to: ClientId(1),
                op: OpId { client: ClientId(1), sequence: 4 },
                key: Key(0),
                value: Value(17),
                payload: payload.clone(),
            },
            Message::PutReq {
                from: ClientId(1),
                to: ReplicaId(2),
                key: Key(5),
                value: Value(9),
                payload,
            },
        ];
        for m in messages {
            assert_eq!(decode_message(&encode_message(&m)).unwrap(), m);
        }
    }

    #[test]
    fn junk_is_rejected() {
        assert!(decode_message(&[]).is_err());
        assert!(decode_message(&[9, 1, 2]).is_err());
        let mut ok = encode_message(&Message::PutReq {
            from: ClientId(1),
            to: ReplicaId(1),
            key: Key(0),
            value: Value(0),
            payload: Data::Unit,
        });
        ok.push(0); // trailing garbage
        assert!(decode_message(&ok).is_err());
    }
}
