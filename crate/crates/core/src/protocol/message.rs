//! Wire framing: {length le32}{tag u8}{session id le32}{time step le32}
//! {payload}. The length covers everything after the length field.

use std::io::{Read, Write};

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Hash)]
#[repr(u8)]
pub enum Tag {
    StateShare = 1,
    TripleShare = 2,
    BeaverOpen = 3,
    GarbledCircuit = 4,
    GarblerInputLabels = 5,
    OtRequest = 6,
    OtResponse = 7,
    OutputDecode = 8,
    MaskedResult = 9,
}

impl Tag {
    pub fn from_u8(v: u8) -> Result<Self> {
        Ok(match v {
            1 => Tag::StateShare,
            2 => Tag::TripleShare,
            3 => Tag::BeaverOpen,
            4 => Tag::GarbledCircuit,
            5 => Tag::GarblerInputLabels,
            6 => Tag::OtRequest,
            7 => Tag::OtResponse,
            8 => Tag::OutputDecode,
            9 => Tag::MaskedResult,
            other => {
                return Err(Error::Protocol {
                    step: 0,
                    message: format!("unknown message tag {other}"),
                })
            }
        })
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Tag::StateShare => "STATE_SHARE",
            Tag::TripleShare => "TRIPLE_SHARE",
            Tag::BeaverOpen => "BEAVER_OPEN",
            Tag::GarbledCircuit => "GARBLED_CIRCUIT",
            Tag::GarblerInputLabels => "GARBLER_INPUT_LABELS",
            Tag::OtRequest => "OT_REQUEST",
            Tag::OtResponse => "OT_RESPONSE",
            Tag::OutputDecode => "OUTPUT_DECODE",
            Tag::MaskedResult => "MASKED_RESULT",
        }
    }
}

#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Frame {
    pub tag: Tag,
    pub session_id: u32,
    pub time_step: u32,
    pub payload: Vec<u8>,
}

/// Frames larger than this are rejected as corrupt rather than allocated.
pub const MAX_FRAME_BYTES: usize = 1 << 26;

impl Frame {
    pub fn encode(&self) -> Vec<u8> {
        let body_len = 1 + 4 + 4 + self.payload.len();
        let mut out = Vec::with_capacity(4 + body_len);
        out.extend_from_slice(&(body_len as u32).to_le_bytes());
        out.push(self.tag as u8);
        out.extend_from_slice(&self.session_id.to_le_bytes());
        out.extend_from_slice(&self.time_step.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 13 {
            return Err(Error::Protocol {
                step: 0,
                message: format!("frame too short ({} bytes)", bytes.len()),
            });
        }
        let body_len = u32::from_le_bytes(bytes[..4].try_into().unwrap()) as usize;
        if bytes.len() != 4 + body_len {
            return Err(Error::Protocol {
                step: 0,
                message: format!(
                    "frame length field says {body_len}, buffer holds {}",
                    bytes.len() - 4
                ),
            });
        }
        let tag = Tag::from_u8(bytes[4])?;
        let session_id = u32::from_le_bytes(bytes[5..9].try_into().unwrap());
        let time_step = u32::from_le_bytes(bytes[9..13].try_into().unwrap());
        Ok(Frame {
            tag,
            session_id,
            time_step,
            payload: bytes[13..].to_vec(),
        })
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<()> {
        w.write_all(&self.encode())?;
        Ok(())
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut len = [0u8; 4];
        r.read_exact(&mut len)?;
        let body_len = u32::from_le_bytes(len) as usize;
        if !(9..=MAX_FRAME_BYTES).contains(&body_len) {
            return Err(Error::Protocol {
                step: 0,
                message: format!("implausible frame length {body_len}"),
            });
        }
        let mut body = vec![0u8; body_len];
        r.read_exact(&mut body)?;
        let mut full = len.to_vec();
        full.append(&mut body);
        Frame::decode(&full)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_all_tags() {
        for raw in 1..=9u8 {
            let f = Frame {
                tag: Tag::from_u8(raw).unwrap(),
                session_id: 7,
                time_step: 42,
                payload: vec![raw, 0, 255],
            };
            let bytes = f.encode();
            assert_eq!(u32::from_le_bytes(bytes[..4].try_into().unwrap()), 12);
            assert_eq!(Frame::decode(&bytes).unwrap(), f);
            let mut cursor = std::io::Cursor::new(bytes);
            assert_eq!(Frame::read_from(&mut cursor).unwrap(), f);
        }
    }

    #[test]
    fn rejects_unknown_tag_and_bad_length() {
        assert!(Tag::from_u8(0).is_err());
        assert!(Tag::from_u8(10).is_err());
        let f = Frame {
            tag: Tag::StateShare,
            session_id: 1,
            time_step: 0,
            payload: vec![],
        };
        let mut bytes = f.encode();
        bytes[4] = 200; // unknown tag
        assert!(Frame::decode(&bytes).is_err());
        bytes[4] = 1;
        bytes[0] = 99; // wrong length
        assert!(Frame::decode(&bytes).is_err());
        assert!(Frame::decode(&[1, 2]).is_err());
    }
}
