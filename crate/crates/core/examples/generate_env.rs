//! Samples an online/offline pair, reports how far the offline kernel moved and
//! what that does to the optimal value, then saves the pair to disk.
use oorl::envfile::EnvFile;
use oorl::envgen::generate_env_pair;
use oorl::mdp::{evaluate_policy, optimal_policy, optimal_values};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    for delta in [0.0, 0.2, 1.0] {
        let pair = generate_env_pair(5, 10, 3, delta, 1)?;
        let v_on = optimal_values(&pair.online).get(1, 0);
        // the online-optimal policy evaluated in the shifted environment
        let v_off = evaluate_policy(&pair.offline, &optimal_policy(&pair.online))?.get(1, 0);
        println!(
            "delta = {delta:<4} max row l1 = {:.3}  |theta shift|_2 = {:.3}  V*_1 online {v_on:.3}, same policy offline {v_off:.3}",
            pair.realized_l1(),
            pair.theta_shift_l2()
        );
    }

    let pair = generate_env_pair(5, 10, 3, 0.2, 1)?;
    let path = std::env::temp_dir().join("oorl_example.env");
    EnvFile::from_pair(&pair)?.write(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}
