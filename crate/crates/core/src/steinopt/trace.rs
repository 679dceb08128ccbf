use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::Result;

/// One optimizer iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iter: usize,
    pub costs: Vec<f64>,
    pub score_norms: Vec<f64>,
    pub bandwidth: f64,
    pub anneal: f64,
}

/// JSON-lines sink for [`TraceRecord`]s.
pub struct TraceWriter<W: Write> {
    out: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(out: W) -> Self {
        TraceWriter { out }
    }

    pub fn write(&mut self, rec: &TraceRecord) -> Result<()> {
        serde_json::to_writer(&mut self.out, rec)?;
        self.out.write_all(b"\n")?;
        Ok(())
    }

    pub fn into_inner(self) -> W {
        self.out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_line_per_record() {
        let mut w = TraceWriter::new(Vec::new());
        for iter in 0..3 {
            w.write(&TraceRecord { iter, costs: vec![1.0], score_norms: vec![0.5], bandwidth: 1.5, anneal: 1.0 })
                .unwrap();
        }
        let text = String::from_utf8(w.into_inner()).unwrap();
        assert_eq!(text.lines().count(), 3);
        let r: TraceRecord = serde_json::from_str(text.lines().nth(1).unwrap()).unwrap();
        assert_eq!(r.iter, 1);
    }
}
