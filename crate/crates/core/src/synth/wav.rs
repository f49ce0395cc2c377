use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use super::{AudioBlock, SynthError, SAMPLE_RATE};

fn spec() -> hound::WavSpec {
    hound::WavSpec {
        channels: 2,
        sample_rate: SAMPLE_RATE as u32,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    }
}

fn to_i16(x: f32) -> i16 {
    (x.clamp(-1.0, 1.0) * 32767.0).round() as i16
}

/// Streaming 48 kHz 16-bit stereo WAV writer.
pub struct WavSink {
    writer: hound::WavWriter<BufWriter<File>>,
}

impl WavSink {
    pub fn create(path: impl AsRef<Path>) -> Result<Self, SynthError> {
        Ok(Self {
            writer: hound::WavWriter::create(path, spec())?,
        })
    }

    pub fn write_block(&mut self, block: &AudioBlock) -> Result<(), SynthError> {
        for [l, r] in block.frames {
            self.writer.write_sample(to_i16(l))?;
            self.writer.write_sample(to_i16(r))?;
        }
        Ok(())
    }

    pub fn finalize(self) -> Result<(), SynthError> {
        self.writer.finalize()?;
        Ok(())
    }
}

pub fn write_wav(path: impl AsRef<Path>, blocks: &[AudioBlock]) -> Result<(), SynthError> {
    let mut sink = WavSink::create(path)?;
    for b in blocks {
        sink.write_block(b)?;
    }
    sink.finalize()
}

/// Stereo frames of a 16-bit WAV, scaled to [-1, 1].
pub fn read_wav(path: impl AsRef<Path>) -> Result<Vec<[f32; 2]>, SynthError> {
    let mut reader = hound::WavReader::open(path)?;
    let samples: Vec<i16> = reader.samples::<i16>().collect::<Result<_, _>>()?;
    Ok(samples
        .chunks_exact(2)
        .map(|c| [f32::from(c[0]) / 32767.0, f32::from(c[1]) / 32767.0])
        .collect())
}
