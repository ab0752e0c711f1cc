//! Writes an environment pair to the text format and reads it back bit-exactly.
use oorl::envfile::EnvFile;
use oorl::envgen::generate_env_pair;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let pair = generate_env_pair(3, 2, 2, 0.3, 11)?;
    let text = EnvFile::from_pair(&pair)?.to_text();
    print!("{text}");
    let back = EnvFile::parse(&text)?.to_pair()?;
    assert_eq!(back.online.kernel(), pair.online.kernel());
    assert_eq!(back.offline.kernel(), pair.offline.kernel());
    assert_eq!(back.online.reward(), pair.online.reward());
    println!("round trip is exact");
    Ok(())
}
