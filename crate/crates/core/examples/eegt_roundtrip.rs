//! Writes a synthetic dataset to EEGT, reads the header and the full file
//! back, and shows that a truncated copy is rejected with a byte offset.

use sstdpn::data::{load_eegt, read_eegt_header, save_eegt, synth_generate, SynthSpec};

fn main() -> sstdpn::Result<()> {
    let spec = SynthSpec {
        m_train: 40,
        m_test: 12,
        channels: 6,
        samples: 256,
        classes: 3,
        sampling_rate: 128.0,
        snr: 0.8,
        seed: 42,
    };
    let (train, _) = synth_generate(&spec)?;
    let dir = std::env::temp_dir().join("sstdpn-eegt-example");
    std::fs::create_dir_all(&dir).map_err(|e| sstdpn::Error::Io {
        path: dir.clone(),
        source: e,
    })?;
    let path = dir.join("train.eegt");
    save_eegt(&train, &path)?;

    let header = read_eegt_header(&path)?;
    println!("{header:#?}");
    let back = load_eegt(&path)?;
    println!("round trip identical: {}", back == train);
    println!("class counts: {:?}", back.class_counts());

    let bytes = std::fs::read(&path).expect("just written");
    let cut = dir.join("truncated.eegt");
    std::fs::write(&cut, &bytes[..bytes.len() - 100]).expect("temp dir is writable");
    match load_eegt(&cut) {
        Ok(_) => println!("truncated file unexpectedly loaded"),
        Err(e) => println!("truncated file: {e}"),
    }
    Ok(())
}
