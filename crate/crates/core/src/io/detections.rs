//! Head detections as JSON Lines.
//!
//! One object per line:
//! `{"frame": n, "boxes": [{"x_min":..,"y_min":..,"x_max":..,"y_max":..,"score":..}, ...]}`

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boxes::HeadBox;

#[derive(Debug, Error)]
pub enum DetectionError {
    #[error("line {line}: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: frame {frame} does not follow frame {previous}")]
    OutOfOrder { line: usize, previous: u64, frame: u64 },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
struct BoxRecord {
    x_min: f32,
    y_min: f32,
    x_max: f32,
    y_max: f32,
    #[serde(default = "default_score")]
    score: f32,
}

fn default_score() -> f32 {
    1.0
}

#[derive(Debug, Serialize, Deserialize)]
struct FrameRecord {
    frame: u64,
    boxes: Vec<BoxRecord>,
}

/// All surviving boxes of one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectionFrame {
    pub frame: u64,
    pub boxes: Vec<HeadBox>,
}

/// Sequential reader over a detections stream. Boxes are clamped to the
/// frame resolution; degenerate boxes are dropped and counted.
pub struct DetectionReader<R> {
    source: R,
    resolution: (u32, u32),
    line_no: usize,
    last_frame: Option<u64>,
    dropped: usize,
    buf: String,
}

impl<R: BufRead> DetectionReader<R> {
    pub fn new(source: R, resolution: (u32, u32)) -> Self {
        Self {
            source,
            resolution,
            line_no: 0,
            last_frame: None,
            dropped: 0,
            buf: String::new(),
        }
    }

    /// Number of degenerate boxes dropped so far.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    fn next_frame(&mut self) -> Result<Option<DetectionFrame>, DetectionError> {
        loop {
            self.buf.clear();
            if self.source.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let line = self.buf.trim();
            if line.is_empty() {
                continue;
            }
            let record: FrameRecord = serde_json::from_str(line).map_err(|e| DetectionError::ParseError {
                line: self.line_no,
                message: e.to_string(),
            })?;
            if let Some(previous) = self.last_frame {
                if record.frame <= previous {
                    return Err(DetectionError::OutOfOrder {
                        line: self.line_no,
                        previous,
                        frame: record.frame,
                    });
                }
            }
            self.last_frame = Some(record.frame);

            let (w, h) = self.resolution;
            let mut boxes = Vec::with_capacity(record.boxes.len());
            for b in record.boxes {
                let hb = HeadBox::new(b.x_min, b.y_min, b.x_max, b.y_max)
                    .with_confidence(b.score)
                    .with_frame(record.frame)
                    .clamped(w, h);
                if hb.is_degenerate(w, h) {
                    self.dropped += 1;
                    log::warn!(
                        "line {}: dropping degenerate box in frame {}",
                        self.line_no,
                        record.frame
                    );
                } else {
                    boxes.push(hb);
                }
            }
            return Ok(Some(DetectionFrame {
                frame: record.frame,
                boxes,
            }));
        }
    }
}

impl<R: BufRead> Iterator for DetectionReader<R> {
    type Item = Result<DetectionFrame, DetectionError>;

    fn next(&mut self) -> Option<Self::Item> {
        self.next_frame().transpose()
    }
}

pub fn read_detections<R: BufRead>(source: R, resolution: (u32, u32)) -> DetectionReader<R> {
    DetectionReader::new(source, resolution)
}

/// Write one detections line.
pub fn write_detection_frame<W: Write>(sink: &mut W, frame: u64, boxes: &[HeadBox]) -> io::Result<()> {
    let record = FrameRecord {
        frame,
        boxes: boxes
            .iter()
            .map(|b| BoxRecord {
                x_min: b.x_min,
                y_min: b.y_min,
                x_max: b.x_max,
                y_max: b.y_max,
                score: b.confidence,
            })
            .collect(),
    };
    serde_json::to_writer(&mut *sink, &record)?;
    sink.write_all(b"\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read_all(text: &str) -> (Result<Vec<DetectionFrame>, DetectionError>, usize) {
        let mut reader = read_detections(text.as_bytes(), (100, 100));
        let frames: Result<Vec<_>, _> = reader.by_ref().collect();
        (frames, reader.dropped())
    }

    #[test]
    fn empty_frame() {
        let (frames, dropped) = read_all("{\"frame\":0,\"boxes\":[]}\n");
        assert_eq!(
            frames.unwrap(),
            vec![DetectionFrame {
                frame: 0,
                boxes: vec![]
            }]
        );
        assert_eq!(dropped, 0);
    }

    #[test]
    fn degenerate_box_dropped_and_counted() {
        let text = r#"{"frame":1,"boxes":[{"x_min":5,"y_min":0,"x_max":5,"y_max":10,"score":0.9},{"x_min":0,"y_min":0,"x_max":4,"y_max":4,"score":0.8}]}"#;
        let (frames, dropped) = read_all(text);
        let frames = frames.unwrap();
        assert_eq!(dropped, 1);
        assert_eq!(frames[0].boxes.len(), 1);
        assert_eq!(frames[0].boxes[0].confidence, 0.8);
        assert_eq!(frames[0].boxes[0].frame_index, 1);
    }

    #[test]
    fn out_of_order() {
        let (frames, _) = read_all("{\"frame\":5,\"boxes\":[]}\n{\"frame\":3,\"boxes\":[]}\n");
        assert!(matches!(
            frames,
            Err(DetectionError::OutOfOrder {
                line: 2,
                previous: 5,
                frame: 3
            })
        ));
    }

    #[test]
    fn repeated_frame_is_out_of_order() {
        let (frames, _) = read_all("{\"frame\":2,\"boxes\":[]}\n{\"frame\":2,\"boxes\":[]}\n");
        assert!(matches!(frames, Err(DetectionError::OutOfOrder { .. })));
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let (frames, _) = read_all("{\"frame\":0,\"boxes\":[]}\n\nnot json\n");
        assert!(matches!(frames, Err(DetectionError::ParseError { line: 3, .. })));
    }

    #[test]
    fn boxes_clamped_to_resolution() {
        let text = r#"{"frame":0,"boxes":[{"x_min":-10,"y_min":90,"x_max":10,"y_max":120,"score":1}]}"#;
        let (frames, _) = read_all(text);
        let b = frames.unwrap()[0].boxes[0];
        assert_eq!((b.x_min, b.y_min, b.x_max, b.y_max), (0.0, 90.0, 10.0, 100.0));
    }

    #[test]
    fn write_then_read() {
        let boxes = vec![HeadBox::new(1.0, 2.0, 11.0, 12.0).with_confidence(0.5)];
        let mut buf = Vec::new();
        write_detection_frame(&mut buf, 7, &boxes).unwrap();
        let frames: Vec<_> = read_detections(&buf[..], (100, 100)).collect::<Result<_, _>>().unwrap();
        assert_eq!(frames[0].frame, 7);
        assert_eq!(frames[0].boxes[0], boxes[0].with_frame(7));
    }
}
