//! Newline-delimited JSON wire protocol between detector, planner and actuator.
//!
//! ```text
//! {"type":"frame","t":0,"fixation":[4,4],"detections":[{"bbox":[x,y,w,h],"confidence":0.9,"class":"person"}]}
//! {"type":"action","t":0,"fixation":[1,1]}
//! ```
//!
//! Encoders return one record without the trailing newline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::Fixation;
use crate::ingest::Detection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameMessage {
    pub t: u64,
    pub fixation: Fixation,
    pub detections: Vec<Detection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionMessage {
    pub t: u64,
    pub fixation: Fixation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Message {
    Frame(FrameMessage),
    Action(ActionMessage),
}

/// A record that could not be decoded. The stream it came from stays usable.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("malformed record ({reason}): {line}")]
pub struct ProtocolError {
    pub line: String,
    pub reason: String,
}

impl ProtocolError {
    fn new(line: &[u8], reason: impl Into<String>) -> Self {
        Self {
            line: String::from_utf8_lossy(line).into_owned(),
            reason: reason.into(),
        }
    }
}

fn trim_line(line: &[u8]) -> &[u8] {
    let mut end = line.len();
    while end > 0 && matches!(line[end - 1], b'\n' | b'\r') {
        end -= 1;
    }
    &line[..end]
}

/// Decodes any message.
pub fn parse_message(line: &[u8]) -> Result<Message, ProtocolError> {
    let body = trim_line(line);
    let text = std::str::from_utf8(body).map_err(|e| ProtocolError::new(body, format!("invalid UTF-8: {e}")))?;
    serde_json::from_str(text).map_err(|e| ProtocolError::new(body, e.to_string()))
}

/// Decodes a frame record into its detections, fixation and timestep.
pub fn parse_frame_message(line: &[u8]) -> Result<FrameMessage, ProtocolError> {
    match parse_message(line)? {
        Message::Frame(f) => Ok(f),
        Message::Action(_) => Err(ProtocolError::new(trim_line(line), "expected a frame record, got an action")),
    }
}

pub fn parse_action_message(line: &[u8]) -> Result<ActionMessage, ProtocolError> {
    match parse_message(line)? {
        Message::Action(a) => Ok(a),
        Message::Frame(_) => Err(ProtocolError::new(trim_line(line), "expected an action record, got a frame")),
    }
}

pub fn encode_message(msg: &Message) -> Vec<u8> {
    serde_json::to_vec(msg).expect("protocol messages always serialize")
}

pub fn encode_action_message(t: u64, fixation: Fixation) -> Vec<u8> {
    encode_message(&Message::Action(ActionMessage { t, fixation }))
}

pub fn encode_frame_message(t: u64, fixation: Fixation, detections: &[Detection]) -> Vec<u8> {
    encode_message(&Message::Frame(FrameMessage {
        t,
        fixation,
        detections: detections.to_vec(),
    }))
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::grid::Block;
    use crate::ingest::BBox;

    #[test]
    fn action_wire_format() {
        let bytes = encode_action_message(3, Block::new(1, 7));
        assert_eq!(bytes, br#"{"type":"action","t":3,"fixation":[1,7]}"#);
        assert_eq!(
            parse_action_message(&bytes).unwrap(),
            ActionMessage {
                t: 3,
                fixation: Block::new(1, 7)
            }
        );
    }

    #[test]
    fn parses_frame_with_two_detections() {
        let line = br#"{"type":"frame","t":12,"fixation":[4,4],"detections":[{"bbox":[0.1,0.2,0.3,0.4],"confidence":0.93,"class":"person"},{"bbox":[0.5,0.5,0.1,0.1],"confidence":0.4,"class":"dog"}]}"#;
        let f = parse_frame_message(line).unwrap();
        assert_eq!(f.t, 12);
        assert_eq!(f.fixation, Block::new(4, 4));
        assert_eq!(f.detections.len(), 2);
        assert_eq!(f.detections[0].bbox, BBox::new(0.1, 0.2, 0.3, 0.4));
        assert_eq!(f.detections[1].class_name, "dog");
    }

    #[test]
    fn empty_detections_and_newlines() {
        let f = parse_frame_message(b"{\"type\":\"frame\",\"t\":0,\"fixation\":[0,0],\"detections\":[]}\r\n").unwrap();
        assert!(f.detections.is_empty());
    }

    #[test]
    fn truncated_record_is_recoverable() {
        let lines: [&[u8]; 3] = [
            br#"{"type":"frame","t":0,"fixation":[0,0],"detections":[]}"#,
            br#"{"type":"frame","t":1,"fixation":[0,"#,
            br#"{"type":"frame","t":2,"fixation":[0,0],"detections":[]}"#,
        ];
        let parsed: Vec<_> = lines.iter().map(|l| parse_frame_message(l)).collect();
        assert!(parsed[0].is_ok());
        let err = parsed[1].as_ref().unwrap_err();
        assert_eq!(err.line, r#"{"type":"frame","t":1,"fixation":[0,"#);
        assert_eq!(parsed[2].as_ref().unwrap().t, 2);
    }

    #[test]
    fn rejects_wrong_kind_and_bad_utf8() {
        assert!(parse_frame_message(br#"{"type":"action","t":0,"fixation":[0,0]}"#).is_err());
        assert!(parse_frame_message(b"\xff\xfe").is_err());
        assert!(parse_frame_message(br#"{"type":"frame","t":-1,"fixation":[0,0],"detections":[]}"#).is_err());
    }

    fn arb_frame() -> impl Strategy<Value = FrameMessage> {
        let det = (
            prop::array::uniform4(0.0f64..=1.0),
            0.0f64..=1.0,
            "[a-z]{1,8}( [a-z]{1,4})?",
        )
            .prop_map(|(b, c, class)| Detection::new(BBox::from(b), c, class));
        (any::<u64>(), 0usize..10_000, 0usize..10_000, prop::collection::vec(det, 0..6)).prop_map(
            |(t, k, l, detections)| FrameMessage {
                t,
                fixation: Block::new(k, l),
                detections,
            },
        )
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn frame_round_trip(frame in arb_frame()) {
            let bytes = encode_frame_message(frame.t, frame.fixation, &frame.detections);
            prop_assert!(!bytes.contains(&b'\n'));
            prop_assert_eq!(parse_frame_message(&bytes).unwrap(), frame);
        }

        #[test]
        fn action_round_trip(t: u64, k in 0usize..100_000, l in 0usize..100_000) {
            let bytes = encode_action_message(t, Block::new(k, l));
            let a = parse_action_message(&bytes).unwrap();
            prop_assert_eq!((a.t, a.fixation), (t, Block::new(k, l)));
        }
    }
}
