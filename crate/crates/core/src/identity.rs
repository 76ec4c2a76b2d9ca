//! Beacon packet construction and ephemeral-ID derivation.
//!
//! A beacon's broadcast identity is the SHA-256 digest of a 27-byte
//! preimage (secret device ID, battery byte, epoch-quantized timestamp),
//! XOR-folded down to 4 bytes. The secret device ID is the only secret
//! input, so the construction behaves as a prefix-keyed hash.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::energy::EnergyState;
use crate::radio::TxPower;

pub const DEVICE_ID_LEN: usize = 18;
pub const PREIMAGE_LEN: usize = 27;
pub const EPHEMERAL_ID_LEN: usize = 4;
pub const MAC_LEN: usize = 6;

/// Supercap voltage range mapped onto the battery byte.
pub const BATTERY_QUANT_MIN_V: f64 = 1.8;
pub const BATTERY_QUANT_MAX_V: f64 = 5.5;

/// Default ID rotation period. The broadcast identity is stable within one
/// epoch and rotates at epoch boundaries.
pub const DEFAULT_ROTATION_EPOCH_S: u64 = 900;

#[derive(Debug, Error)]
pub enum IdentityError {
    #[error("expected {expected} bytes, got {actual}")]
    BadLength { expected: usize, actual: usize },
    #[error("invalid hex string: {0}")]
    BadHex(String),
}

fn decode_hex_exact<const N: usize>(s: &str) -> Result<[u8; N], IdentityError> {
    let bytes = hex::decode(s.trim()).map_err(|e| IdentityError::BadHex(e.to_string()))?;
    let actual = bytes.len();
    bytes
        .try_into()
        .map_err(|_| IdentityError::BadLength { expected: N, actual })
}

macro_rules! hex_serde {
    ($ty:ident, $len:expr) => {
        impl Serialize for $ty {
            fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
                s.serialize_str(&self.to_hex())
            }
        }
        impl<'de> Deserialize<'de> for $ty {
            fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                $ty::from_hex(&s).map_err(D::Error::custom)
            }
        }
        impl $ty {
            pub fn to_hex(&self) -> String {
                hex::encode(self.0)
            }
            pub fn from_hex(s: &str) -> Result<Self, IdentityError> {
                Ok($ty(decode_hex_exact::<$len>(s)?))
            }
            pub const fn from_bytes(bytes: [u8; $len]) -> Self {
                $ty(bytes)
            }
            pub const fn as_bytes(&self) -> &[u8; $len] {
                &self.0
            }
        }
    };
}

/// 18-byte secret beacon identifier, known only to the beacon and the
/// authority.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct DeviceId([u8; DEVICE_ID_LEN]);

hex_serde!(DeviceId, DEVICE_ID_LEN);

impl std::fmt::Debug for DeviceId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        // Secret material: never printed.
        write!(f, "DeviceId(..)")
    }
}

/// Fixed 6-byte beacon hardware address.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Mac([u8; MAC_LEN]);

hex_serde!(Mac, MAC_LEN);

impl std::fmt::Display for Mac {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// 4-byte rotating broadcast identifier, the unit of matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EphemeralId([u8; EPHEMERAL_ID_LEN]);

hex_serde!(EphemeralId, EPHEMERAL_ID_LEN);

impl std::fmt::Display for EphemeralId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.to_hex())
    }
}

/// One-byte quantized energy level carried in every packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BatteryStatus(u8);

impl BatteryStatus {
    pub const fn new(byte: u8) -> Self {
        BatteryStatus(byte)
    }

    /// Total, monotone map from supercap voltage onto the byte range.
    pub fn from_supercap_voltage(v: f64) -> Self {
        let frac = ((v - BATTERY_QUANT_MIN_V) / (BATTERY_QUANT_MAX_V - BATTERY_QUANT_MIN_V))
            .clamp(0.0, 1.0);
        BatteryStatus((255.0 * frac).round() as u8)
    }

    pub const fn as_byte(self) -> u8 {
        self.0
    }
}

/// The 27 bytes hashed into an ephemeral ID: 18-byte device ID, 1-byte
/// battery status, 8-byte big-endian timestamp quantized to the epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketPreimage {
    pub device_id: DeviceId,
    pub battery: BatteryStatus,
    /// Already quantized to an epoch boundary.
    pub timestamp_s: u64,
}

impl PacketPreimage {
    pub fn to_bytes(&self) -> [u8; PREIMAGE_LEN] {
        let mut out = [0u8; PREIMAGE_LEN];
        out[..DEVICE_ID_LEN].copy_from_slice(self.device_id.as_bytes());
        out[DEVICE_ID_LEN] = self.battery.as_byte();
        out[DEVICE_ID_LEN + 1..].copy_from_slice(&self.timestamp_s.to_be_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8; PREIMAGE_LEN]) -> Self {
        let mut device = [0u8; DEVICE_ID_LEN];
        device.copy_from_slice(&bytes[..DEVICE_ID_LEN]);
        let mut ts = [0u8; 8];
        ts.copy_from_slice(&bytes[DEVICE_ID_LEN + 1..]);
        PacketPreimage {
            device_id: DeviceId::from_bytes(device),
            battery: BatteryStatus::new(bytes[DEVICE_ID_LEN]),
            timestamp_s: u64::from_be_bytes(ts),
        }
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.to_bytes())
    }

    pub fn from_hex(s: &str) -> Result<Self, IdentityError> {
        Ok(Self::from_bytes(&decode_hex_exact::<PREIMAGE_LEN>(s)?))
    }
}

/// Build the packet preimage, flooring the timestamp to its epoch so the
/// derived ID is stable within the epoch.
pub fn encode_preimage(
    device_id: DeviceId,
    battery: BatteryStatus,
    timestamp_s: u64,
    epoch_s: u64,
) -> PacketPreimage {
    assert!(epoch_s > 0, "rotation epoch must be positive");
    PacketPreimage {
        device_id,
        battery,
        timestamp_s: timestamp_s / epoch_s * epoch_s,
    }
}

/// XOR-fold a 32-byte digest down to 4 bytes: halves are XOR-combined
/// iteratively, 32 -> 16 -> 8 -> 4.
pub fn fold_hash(digest: &[u8]) -> Result<EphemeralId, IdentityError> {
    if digest.len() != 32 {
        return Err(IdentityError::BadLength {
            expected: 32,
            actual: digest.len(),
        });
    }
    let mut buf = [0u8; 32];
    buf.copy_from_slice(digest);
    let mut len = 32;
    while len > EPHEMERAL_ID_LEN {
        let half = len / 2;
        for i in 0..half {
            buf[i] ^= buf[half + i];
        }
        len = half;
    }
    let mut id = [0u8; EPHEMERAL_ID_LEN];
    id.copy_from_slice(&buf[..EPHEMERAL_ID_LEN]);
    Ok(EphemeralId(id))
}

/// Full derivation: SHA-256 over the 27-byte preimage, folded to 4 bytes.
pub fn ephemeral_id(preimage: &PacketPreimage) -> EphemeralId {
    let digest = Sha256::digest(preimage.to_bytes());
    fold_hash(&digest).expect("sha256 digests are 32 bytes")
}

/// Static configuration of one beacon.
#[derive(Debug, Clone)]
pub struct BeaconConfig {
    pub device_id: DeviceId,
    pub mac: Mac,
    pub adv_interval_ms: f64,
    pub tx: TxPower,
    pub rotation_epoch_s: u64,
}

/// The over-the-air payload a scanner observes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BroadcastPayload {
    pub mac: Mac,
    pub ephemeral_id: EphemeralId,
}

/// Produce the current broadcast payload, or `None` while the beacon is out
/// of energy.
pub fn make_broadcast(
    config: &BeaconConfig,
    clock_s: u64,
    energy: &EnergyState,
) -> Option<BroadcastPayload> {
    if !energy.alive {
        return None;
    }
    let battery = BatteryStatus::from_supercap_voltage(energy.supercap_v);
    let preimage = encode_preimage(config.device_id, battery, clock_s, config.rotation_epoch_s);
    Some(BroadcastPayload {
        mac: config.mac,
        ephemeral_id: ephemeral_id(&preimage),
    })
}
