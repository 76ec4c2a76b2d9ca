//! `idgen`: derive ephemeral IDs. Emits vector-file lines,
//! `hex(preimage_27B),hex(id_4B)`, for a single packet or a seeded batch.

use lumitrace_core::identity::{
    encode_preimage, ephemeral_id, BatteryStatus, DeviceId, DEVICE_ID_LEN,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::RunConfig;
use crate::{CliError, Output};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// 18-byte secret device ID as 36 hex characters.
    #[arg(long, default_value = "000000000000000000000000000000000000")]
    device_id: String,

    /// Battery status byte.
    #[arg(long, default_value_t = 0)]
    battery: u8,

    /// Packet timestamp in UNIX seconds; floored to the rotation epoch.
    #[arg(long, default_value_t = 0)]
    timestamp: u64,

    /// Rotation epoch in seconds; defaults to the configured value.
    #[arg(long)]
    epoch: Option<u64>,

    /// Emit this many seeded random vectors instead of a single packet.
    #[arg(long)]
    vectors: Option<usize>,
}

pub fn run(
    args: &Args,
    config: &RunConfig,
    seed: Option<u64>,
    output: &mut Output,
) -> Result<(), CliError> {
    let epoch = args.epoch.unwrap_or(config.beacon.rotation_epoch_s);
    if epoch == 0 {
        return Err(CliError::input("rotation epoch must be positive"));
    }
    let mut lines = String::new();
    match args.vectors {
        None => {
            let device_id = DeviceId::from_hex(&args.device_id)
                .map_err(|e| CliError::input(format!("--device-id: {e}")))?;
            let preimage =
                encode_preimage(device_id, BatteryStatus::new(args.battery), args.timestamp, epoch);
            lines.push_str(&format!(
                "{},{}\n",
                preimage.to_hex(),
                ephemeral_id(&preimage).to_hex()
            ));
        }
        Some(count) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.unwrap_or(0));
            for _ in 0..count {
                let mut id_bytes = [0u8; DEVICE_ID_LEN];
                rng.fill(&mut id_bytes);
                let battery = BatteryStatus::new(rng.random());
                let timestamp: u64 = rng.random_range(0..(1u64 << 40));
                let preimage =
                    encode_preimage(DeviceId::from_bytes(id_bytes), battery, timestamp, epoch);
                lines.push_str(&format!(
                    "{},{}\n",
                    preimage.to_hex(),
                    ephemeral_id(&preimage).to_hex()
                ));
            }
        }
    }
    output.write_all(&lines)
}
