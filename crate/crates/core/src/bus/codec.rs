//! Length-prefixed framing: a 4-byte big-endian payload length followed by
//! the envelope as a UTF-8 JSON document.

use super::{schema, BusError, Envelope};

/// Largest accepted payload length.
pub const MAX_FRAME_LEN: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub enum Decoded {
    /// Not enough bytes yet to know the frame length.
    Incomplete,
    Envelope(Envelope),
}

/// Encodes a schema-valid envelope into one frame.
pub fn encode_frame(envelope: &Envelope) -> Result<Vec<u8>, BusError> {
    schema::validate(envelope)?;
    let body = serde_json::to_vec(envelope).map_err(|e| BusError::Malformed(e.to_string()))?;
    if body.len() > MAX_FRAME_LEN {
        return Err(BusError::FrameTooLarge(body.len()));
    }
    let mut out = Vec::with_capacity(4 + body.len());
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
    Ok(out)
}

/// Decodes exactly one frame. Fewer than four bytes is `Incomplete`; a
/// declared length that disagrees with the bytes supplied is an error.
pub fn decode_frame(bytes: &[u8]) -> Result<Decoded, BusError> {
    let Some(declared) = declared_len(bytes) else {
        return Ok(Decoded::Incomplete);
    };
    let actual = bytes.len() - 4;
    if declared != actual {
        return Err(BusError::LengthMismatch { declared, actual });
    }
    decode_body(&bytes[4..]).map(Decoded::Envelope)
}

fn declared_len(bytes: &[u8]) -> Option<usize> {
    let head: [u8; 4] = bytes.get(..4)?.try_into().ok()?;
    Some(u32::from_be_bytes(head) as usize)
}

fn decode_body(body: &[u8]) -> Result<Envelope, BusError> {
    let envelope: Envelope =
        serde_json::from_slice(body).map_err(|e| BusError::Malformed(e.to_string()))?;
    schema::validate(&envelope)?;
    Ok(envelope)
}

/// Streaming decoder for a byte stream carrying consecutive frames.
#[derive(Debug, Default)]
pub struct FrameReader {
    buf: Vec<u8>,
}

impl FrameReader {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Bytes received but not yet consumed by a complete frame.
    pub fn buffered(&self) -> usize {
        self.buf.len()
    }

    /// Next complete frame, if any. A bad frame is consumed and reported so
    /// the stream can continue; an oversized length prefix is fatal for the
    /// stream since the frame boundary is lost.
    pub fn next_frame(&mut self) -> Option<Result<Envelope, BusError>> {
        let declared = declared_len(&self.buf)?;
        if declared > MAX_FRAME_LEN {
            self.buf.clear();
            return Some(Err(BusError::FrameTooLarge(declared)));
        }
        if self.buf.len() < 4 + declared {
            return None;
        }
        let frame: Vec<u8> = self.buf.drain(..4 + declared).collect();
        Some(decode_body(&frame[4..]))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bus::{schema::GripperCmd, GRIPPER_CMD};

    fn sample() -> Envelope {
        Envelope::new(
            GRIPPER_CMD,
            "client-1",
            7,
            0.1 + 0.2,
            &GripperCmd {
                aperture_fraction: 1.0 / 3.0,
            },
        )
    }

    #[test]
    fn roundtrip_is_exact() {
        let e = sample();
        let frame = encode_frame(&e).unwrap();
        assert_eq!(
            u32::from_be_bytes(frame[..4].try_into().unwrap()) as usize,
            frame.len() - 4
        );
        assert_eq!(decode_frame(&frame).unwrap(), Decoded::Envelope(e));
    }

    #[test]
    fn framing_errors() {
        assert_eq!(decode_frame(&[]).unwrap(), Decoded::Incomplete);
        assert_eq!(decode_frame(&[0, 0, 1]).unwrap(), Decoded::Incomplete);
        let mut frame = encode_frame(&sample()).unwrap();
        frame.push(b' ');
        assert!(matches!(
            decode_frame(&frame),
            Err(BusError::LengthMismatch { .. })
        ));
        frame.truncate(frame.len() - 3);
        assert!(matches!(
            decode_frame(&frame),
            Err(BusError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn unknown_topic_is_rejected() {
        let mut e = sample();
        e.topic = "/nope".into();
        assert_eq!(
            encode_frame(&e).unwrap_err(),
            BusError::UnknownTopic("/nope".into())
        );
        let body = serde_json::to_vec(&e).unwrap();
        let mut frame = (body.len() as u32).to_be_bytes().to_vec();
        frame.extend(body);
        assert_eq!(
            decode_frame(&frame).unwrap_err(),
            BusError::UnknownTopic("/nope".into())
        );
    }

    #[test]
    fn reader_reassembles_split_stream() {
        let a = encode_frame(&sample()).unwrap();
        let mut second = sample();
        second.seq = 8;
        let b = encode_frame(&second).unwrap();
        let stream: Vec<u8> = a.iter().chain(b.iter()).copied().collect();
        let mut reader = FrameReader::new();
        let mut got = Vec::new();
        for chunk in stream.chunks(5) {
            reader.push(chunk);
            while let Some(r) = reader.next_frame() {
                got.push(r.unwrap());
            }
        }
        assert_eq!(got, vec![sample(), second]);
        assert_eq!(reader.buffered(), 0);
    }

    #[test]
    fn reader_skips_bad_frame() {
        let junk = b"{not json";
        let mut reader = FrameReader::new();
        reader.push(&(junk.len() as u32).to_be_bytes());
        reader.push(junk);
        reader.push(&encode_frame(&sample()).unwrap());
        assert!(reader.next_frame().unwrap().is_err());
        assert_eq!(reader.next_frame().unwrap().unwrap(), sample());
    }
}
