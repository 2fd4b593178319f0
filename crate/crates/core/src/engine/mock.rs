//! Deterministic placeholder outputs: text naming the spec and input hashes,
//! or a small valid media file stamped with the same metadata.

use sha2::{Digest, Sha256};

use super::adapter::{AdapterCall, AdapterError, AdapterOutput};
use crate::media::{ContentHash, FormatTag};
use crate::modality::BaseModality;

pub const IMAGE_SIDE: u32 = 64;
pub const AUDIO_RATE: u32 = 8_000;
pub const AUDIO_SAMPLES: u32 = 2_000;

pub(crate) fn stamp(call: &AdapterCall) -> String {
    let inputs: Vec<String> = call.inputs.iter().map(|v| v.content_hash().to_string()).collect();
    format!(
        "mock {} output; params {}; inputs [{}]",
        call.spec.spec_id,
        ContentHash::of_params(&call.params),
        inputs.join(", ")
    )
}

pub(crate) fn output_for(call: &AdapterCall) -> Result<AdapterOutput, AdapterError> {
    let stamp = stamp(call);
    let base = call.spec.output_modality().base();
    let Some(format) = FormatTag::default_for(base) else {
        return Ok(AdapterOutput::text(stamp));
    };
    let bytes = match base {
        BaseModality::Image | BaseModality::Sketch => png(&stamp)?,
        BaseModality::Video => mp4(&stamp),
        BaseModality::ThreeD => glb(&stamp),
        BaseModality::Audio => wav(&stamp),
        BaseModality::Text => unreachable!("text has no blob format"),
    };
    Ok(AdapterOutput::Blob { bytes, format })
}

fn seed(stamp: &str) -> [u8; 32] {
    Sha256::digest(stamp.as_bytes()).into()
}

pub fn png(stamp: &str) -> Result<Vec<u8>, AdapterError> {
    let seed = seed(stamp);
    let side = IMAGE_SIDE as usize;
    let mut pixels = Vec::with_capacity(side * side * 3);
    for y in 0..side {
        for x in 0..side {
            pixels.push(seed[0].wrapping_add((x * 4) as u8));
            pixels.push(seed[1].wrapping_add((y * 4) as u8));
            pixels.push(seed[2] ^ ((x ^ y) as u8));
        }
    }
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, IMAGE_SIDE, IMAGE_SIDE);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        encoder
            .add_text_chunk("Comment".to_string(), stamp.to_string())
            .map_err(|e| AdapterError::new(e.to_string()))?;
        let mut writer = encoder.write_header().map_err(|e| AdapterError::new(e.to_string()))?;
        writer.write_image_data(&pixels).map_err(|e| AdapterError::new(e.to_string()))?;
    }
    Ok(out)
}

fn box_bytes(kind: &[u8; 4], body: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + body.len());
    out.extend_from_slice(&((8 + body.len()) as u32).to_be_bytes());
    out.extend_from_slice(kind);
    out.extend_from_slice(body);
    out
}

/// An `ftyp` box followed by a `free` box carrying the stamp.
pub fn mp4(stamp: &str) -> Vec<u8> {
    let mut ftyp = Vec::new();
    ftyp.extend_from_slice(b"isom");
    ftyp.extend_from_slice(&0x200u32.to_be_bytes());
    ftyp.extend_from_slice(b"isommp41");
    let mut out = box_bytes(b"ftyp", &ftyp);
    out.extend(box_bytes(b"free", stamp.as_bytes()));
    out
}

/// A binary glTF 2.0 container with a JSON chunk and no geometry.
pub fn glb(stamp: &str) -> Vec<u8> {
    let json = serde_json::json!({"asset": {"version": "2.0", "generator": "mosaic mock", "extras": {"stamp": stamp}}});
    let mut chunk = serde_json::to_vec(&json).expect("json");
    while !chunk.len().is_multiple_of(4) {
        chunk.push(b' ');
    }
    let total = 12 + 8 + chunk.len();
    let mut out = Vec::with_capacity(total);
    out.extend_from_slice(b"glTF");
    out.extend_from_slice(&2u32.to_le_bytes());
    out.extend_from_slice(&(total as u32).to_le_bytes());
    out.extend_from_slice(&(chunk.len() as u32).to_le_bytes());
    out.extend_from_slice(b"JSON");
    out.extend_from_slice(&chunk);
    out
}

/// Quarter-second mono 16-bit tone; pitch derives from the stamp.
pub fn wav(stamp: &str) -> Vec<u8> {
    let seed = seed(stamp);
    let freq = 220.0 + f64::from(u16::from_le_bytes([seed[0], seed[1]]) % 660);
    let mut data = Vec::with_capacity(AUDIO_SAMPLES as usize * 2);
    for i in 0..AUDIO_SAMPLES {
        let t = f64::from(i) / f64::from(AUDIO_RATE);
        let s = (t * freq * std::f64::consts::TAU).sin() * 0.3 * f64::from(i16::MAX);
        data.extend_from_slice(&(s.round() as i16).to_le_bytes());
    }
    let mut note = stamp.as_bytes().to_vec();
    if note.len() % 2 == 1 {
        note.push(0);
    }

    let mut fmt = Vec::with_capacity(16);
    fmt.extend_from_slice(&1u16.to_le_bytes()); // PCM
    fmt.extend_from_slice(&1u16.to_le_bytes()); // mono
    fmt.extend_from_slice(&AUDIO_RATE.to_le_bytes());
    fmt.extend_from_slice(&(AUDIO_RATE * 2).to_le_bytes());
    fmt.extend_from_slice(&2u16.to_le_bytes());
    fmt.extend_from_slice(&16u16.to_le_bytes());

    let mut body = Vec::new();
    body.extend_from_slice(b"WAVE");
    for (id, chunk) in [(b"fmt ", &fmt), (b"note", &note), (b"data", &data)] {
        body.extend_from_slice(id);
        body.extend_from_slice(&(chunk.len() as u32).to_le_bytes());
        body.extend_from_slice(chunk);
    }
    let mut out = Vec::with_capacity(8 + body.len());
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(body.len() as u32).to_le_bytes());
    out.extend(body);
    out
}
