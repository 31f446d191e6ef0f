/// MSB-first bit writer. The final partial byte is zero padded.
#[derive(Default)]
pub struct BitWriter {
    buf: Vec<u8>,
    acc: u64,
    nbits: u32,
    written: u64,
}

impl BitWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_prefix(prefix: &[u8]) -> Self {
        Self { buf: prefix.to_vec(), ..Self::default() }
    }

    /// Appends the low `width` bits of `value`, most significant first.
    pub fn write(&mut self, value: u64, width: u32) {
        debug_assert!(width <= 32);
        if width == 0 {
            return;
        }
        let masked = value & ((1u64 << width) - 1);
        self.acc = (self.acc << width) | masked;
        self.nbits += width;
        self.written += width as u64;
        while self.nbits >= 8 {
            self.nbits -= 8;
            self.buf.push((self.acc >> self.nbits) as u8);
        }
        self.acc &= (1u64 << self.nbits) - 1;
    }

    /// Number of payload bits written so far, padding excluded.
    pub fn bits_written(&self) -> u64 {
        self.written
    }

    pub fn finish(mut self) -> Vec<u8> {
        if self.nbits > 0 {
            self.buf.push((self.acc << (8 - self.nbits)) as u8);
        }
        self.buf
    }
}

pub struct BitReader<'a> {
    data: &'a [u8],
    pos: u64,
}

impl<'a> BitReader<'a> {
    pub fn new(data: &'a [u8]) -> Self {
        Self { data, pos: 0 }
    }

    pub fn remaining(&self) -> u64 {
        self.data.len() as u64 * 8 - self.pos
    }

    pub fn read(&mut self, width: u32) -> Option<u64> {
        if width == 0 {
            return Some(0);
        }
        if self.remaining() < width as u64 {
            return None;
        }
        let mut out = 0u64;
        for _ in 0..width {
            let byte = self.data[(self.pos / 8) as usize];
            let bit = (byte >> (7 - (self.pos % 8))) & 1;
            out = (out << 1) | bit as u64;
            self.pos += 1;
        }
        Some(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn msb_first_layout() {
        let mut w = BitWriter::new();
        w.write(0b10, 2);
        w.write(0b1, 1);
        w.write(0xAB, 8);
        assert_eq!(w.bits_written(), 11);
        let bytes = w.finish();
        assert_eq!(bytes, vec![0b1011_0101, 0b0110_0000]);
        let mut r = BitReader::new(&bytes);
        assert_eq!(r.read(2), Some(0b10));
        assert_eq!(r.read(1), Some(1));
        assert_eq!(r.read(8), Some(0xAB));
        assert_eq!(r.read(8), None);
    }
}
