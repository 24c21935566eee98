//! Deterministic, seeded generator of labeled packet traces.
//!
//! A trace is a nominal prefix followed by attack stages. Nominal traffic
//! repeats a small set of client-server exchange patterns with fixed field
//! values, so its encoded matrix has low numerical rank; a configurable
//! fraction of rare benign one-off events (pings, bulk transfers, lookups)
//! is mixed in. Each attack stage interleaves its packets among fresh
//! nominal traffic, keeping attacks a sparse minority.
//!
//! The generator is a pure function of its config: a single ChaCha8 stream
//! seeded from `config.seed` drives every draw in a fixed order, so equal
//! configs give byte-for-byte equal traces. The emitted records use the
//! same CSV-facing record type the encoder consumes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::PacketRecord;

/// Source addresses used by the three attack kinds, one per stage slot.
/// They are outside both nominal address blocks so no nominal packet can
/// ever carry them.
const ATTACK_HOSTS: [&str; 3] = ["198.51.100.21", "198.51.100.22", "198.51.100.23"];

/// The portmapper/daemon port probed and exploited by the second and third
/// default stages.
const DAEMON_PORT: u16 = 111;

/// Spacing between timestamps; the value is cosmetic, the encoder ignores
/// time.
const TICK_SECONDS: f64 = 0.001;

/// What an attack stage does.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttackKind {
    /// One external source sends ICMP to every internal host in turn.
    IpSweep,
    /// One external source probes the daemon port across internal hosts.
    PortProbe,
    /// A previously unseen host sends low-volume, oddly sized packets to
    /// the daemon port of a single victim.
    Exploit,
}

impl AttackKind {
    pub fn token(&self) -> &'static str {
        match self {
            AttackKind::IpSweep => "ip_sweep",
            AttackKind::PortProbe => "port_probe",
            AttackKind::Exploit => "exploit",
        }
    }
}

/// One attack stage: how many attack packets and how many nominal packets
/// ride along per attack packet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub kind: AttackKind,
    pub attack_packets: usize,
    pub interleave_ratio: f64,
}

/// A service the nominal network runs: server port and protocol label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServiceSpec {
    pub port: u16,
    pub protocol: String,
}

/// Full description of a synthetic scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub n_hosts_internal: usize,
    pub n_hosts_external: usize,
    pub nominal_packets: usize,
    pub rare_benign_rate: f64,
    pub stage_specs: Vec<StageSpec>,
    pub services: Vec<ServiceSpec>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 7,
            n_hosts_internal: 10,
            n_hosts_external: 4,
            nominal_packets: 2400,
            rare_benign_rate: 0.02,
            stage_specs: vec![
                StageSpec {
                    kind: AttackKind::IpSweep,
                    attack_packets: 120,
                    interleave_ratio: 4.0,
                },
                StageSpec {
                    kind: AttackKind::PortProbe,
                    attack_packets: 90,
                    interleave_ratio: 4.0,
                },
                StageSpec {
                    kind: AttackKind::Exploit,
                    attack_packets: 45,
                    interleave_ratio: 6.0,
                },
            ],
            services: vec![
                ServiceSpec {
                    port: 80,
                    protocol: "HTTP".to_string(),
                },
                ServiceSpec {
                    port: 23,
                    protocol: "TELNET".to_string(),
                },
                ServiceSpec {
                    port: 21,
                    protocol: "FTP".to_string(),
                },
                ServiceSpec {
                    port: 8088,
                    protocol: "TCP".to_string(),
                },
            ],
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        // Each side lives in one /24, so host counts are capped at 250.
        for (label, count) in [
            ("n_hosts_internal", self.n_hosts_internal),
            ("n_hosts_external", self.n_hosts_external),
        ] {
            if count == 0 || count > 250 {
                return Err(Error::InvalidConfig(format!(
                    "{label} must be between 1 and 250, got {count}"
                )));
            }
        }
        if self.nominal_packets == 0 {
            return Err(Error::InvalidConfig(
                "nominal_packets must be at least 1".to_string(),
            ));
        }
        if !(self.rare_benign_rate.is_finite() && (0.0..=1.0).contains(&self.rare_benign_rate)) {
            return Err(Error::InvalidConfig(format!(
                "rare_benign_rate must lie in [0, 1], got {}",
                self.rare_benign_rate
            )));
        }
        if self.services.is_empty() {
            return Err(Error::InvalidConfig(
                "at least one service is required".to_string(),
            ));
        }
        for (i, stage) in self.stage_specs.iter().enumerate() {
            if stage.attack_packets == 0 {
                return Err(Error::InvalidConfig(format!(
                    "stage {} has zero attack packets",
                    i + 1
                )));
            }
            if !(stage.interleave_ratio.is_finite() && stage.interleave_ratio >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "stage {} interleave_ratio must be finite and nonnegative, got {}",
                    i + 1,
                    stage.interleave_ratio
                )));
            }
        }
        Ok(())
    }
}

/// A contiguous packet range `[start, end)` with a name. The window named
/// `y0` is the attack-free training prefix; stages are `stage1`, `stage2`,
/// and so on in emission order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NamedWindow {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

/// A generated trace: records, one ground-truth label per record (true =
/// attack), and the named windows partitioning it.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTrace {
    pub records: Vec<PacketRecord>,
    pub labels: Vec<bool>,
    pub windows: Vec<NamedWindow>,
}

impl SyntheticTrace {
    pub fn window(&self, name: &str) -> Option<&NamedWindow> {
        self.windows.iter().find(|w| w.name == name)
    }
}

/// One fixed nominal exchange: every emission of a pattern produces an
/// identical record apart from the timestamp, which keeps the encoded
/// nominal matrix low-rank by construction.
struct Pattern {
    src_ip: String,
    dst_ip: String,
    src_port: Option<u16>,
    dst_port: Option<u16>,
    protocol: String,
    length: u64,
}

impl Pattern {
    fn record(&self, timestamp: f64) -> PacketRecord {
        PacketRecord {
            timestamp,
            src_ip: self.src_ip.clone(),
            dst_ip: self.dst_ip.clone(),
            src_port: self.src_port,
            dst_port: self.dst_port,
            protocol: self.protocol.clone(),
            length: self.length,
        }
    }
}

struct Emitter {
    rng: ChaCha8Rng,
    internal: Vec<String>,
    external: Vec<String>,
    patterns: Vec<Pattern>,
    rare_rate: f64,
    clock: usize,
}

impl Emitter {
    fn new(config: &ScenarioConfig) -> Emitter {
        let internal: Vec<String> = (0..config.n_hosts_internal)
            .map(|i| format!("10.1.1.{}", i + 1))
            .collect();
        let external: Vec<String> = (0..config.n_hosts_external)
            .map(|i| format!("203.0.113.{}", i + 1))
            .collect();

        // Two clients (one internal, one external) per service, each with a
        // request and a response pattern: four fixed patterns per service.
        let mut patterns = Vec::new();
        for (si, service) in config.services.iter().enumerate() {
            let server = internal[si % internal.len()].clone();
            let clients = [
                internal[(si + 1) % internal.len()].clone(),
                external[si % external.len()].clone(),
            ];
            for (ci, client) in clients.iter().enumerate() {
                let ephemeral = 49152 + 17 * (2 * si + ci) as u16;
                patterns.push(Pattern {
                    src_ip: client.clone(),
                    dst_ip: server.clone(),
                    src_port: Some(ephemeral),
                    dst_port: Some(service.port),
                    protocol: service.protocol.clone(),
                    length: 64 + 4 * si as u64,
                });
                patterns.push(Pattern {
                    src_ip: server.clone(),
                    dst_ip: client.clone(),
                    src_port: Some(service.port),
                    dst_port: Some(ephemeral),
                    protocol: service.protocol.clone(),
                    length: 512 + 96 * si as u64,
                });
            }
        }

        Emitter {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            internal,
            external,
            patterns,
            rare_rate: config.rare_benign_rate,
            clock: 0,
        }
    }

    fn tick(&mut self) -> f64 {
        let t = self.clock as f64 * TICK_SECONDS;
        self.clock += 1;
        t
    }

    fn internal_host(&mut self) -> String {
        let i = self.rng.random_range(0..self.internal.len());
        self.internal[i].clone()
    }

    /// A nominal packet: usually a repeat of a fixed pattern, occasionally
    /// a rare benign one-off between random hosts.
    fn nominal(&mut self) -> PacketRecord {
        if self.rng.random::<f64>() < self.rare_rate {
            return self.rare_benign();
        }
        let i = self.rng.random_range(0..self.patterns.len());
        let t = self.tick();
        self.patterns[i].record(t)
    }

    /// Rare but legitimate events: a ping between two internal hosts, a
    /// bulk file transfer, or a lookup at an external resolver. Random host
    /// pairs make these columns novel without being attacks.
    fn rare_benign(&mut self) -> PacketRecord {
        let kind = self.rng.random_range(0..3u8);
        let src = self.internal_host();
        match kind {
            0 => {
                let mut dst = self.internal_host();
                if dst == src && self.internal.len() > 1 {
                    let offset = self.rng.random_range(1..self.internal.len());
                    let at = self.internal.iter().position(|h| *h == src).unwrap();
                    dst = self.internal[(at + offset) % self.internal.len()].clone();
                }
                let t = self.tick();
                PacketRecord {
                    timestamp: t,
                    src_ip: src,
                    dst_ip: dst,
                    src_port: None,
                    dst_port: None,
                    protocol: "ICMP".to_string(),
                    length: 84,
                }
            }
            1 => {
                let dst = self.internal_host();
                let t = self.tick();
                PacketRecord {
                    timestamp: t,
                    src_ip: src,
                    dst_ip: dst,
                    src_port: Some(51000),
                    dst_port: Some(20),
                    protocol: "FTP".to_string(),
                    length: 1500,
                }
            }
            _ => {
                let i = self.rng.random_range(0..self.external.len());
                let dst = self.external[i].clone();
                let t = self.tick();
                PacketRecord {
                    timestamp: t,
                    src_ip: src,
                    dst_ip: dst,
                    src_port: Some(52000),
                    dst_port: Some(53),
                    protocol: "TCP".to_string(),
                    length: 72,
                }
            }
        }
    }

    /// The `ordinal`-th attack packet of a stage. Novelty is expressed in
    /// header features: unseen source addresses, the daemon port, protocols
    /// the nominal services never use, and atypical lengths.
    fn attack(&mut self, stage_index: usize, kind: AttackKind, ordinal: usize) -> PacketRecord {
        let src = ATTACK_HOSTS[stage_index % ATTACK_HOSTS.len()].to_string();
        let t = self.tick();
        match kind {
            AttackKind::IpSweep => PacketRecord {
                timestamp: t,
                src_ip: src,
                dst_ip: self.internal[ordinal % self.internal.len()].clone(),
                src_port: None,
                dst_port: None,
                protocol: "ICMP".to_string(),
                length: 60,
            },
            AttackKind::PortProbe => PacketRecord {
                timestamp: t,
                src_ip: src,
                dst_ip: self.internal[ordinal % self.internal.len()].clone(),
                src_port: Some(53000 + (ordinal % 7) as u16),
                dst_port: Some(DAEMON_PORT),
                protocol: "Portmap".to_string(),
                length: 112,
            },
            AttackKind::Exploit => PacketRecord {
                timestamp: t,
                src_ip: src,
                dst_ip: self.internal[0].clone(),
                src_port: Some(54000 + (ordinal % 3) as u16),
                dst_port: Some(DAEMON_PORT),
                protocol: "sadmind".to_string(),
                length: 1200 + 61 * (ordinal % 5) as u64,
            },
        }
    }
}

/// Generates the trace described by `config`: the `y0` nominal window, then
/// one window per stage with attack packets scattered uniformly among
/// interleaved nominal traffic.
pub fn generate(config: &ScenarioConfig) -> Result<SyntheticTrace> {
    config.validate()?;
    let mut emitter = Emitter::new(config);
    let mut records = Vec::new();
    let mut labels = Vec::new();
    let mut windows = Vec::new();

    for _ in 0..config.nominal_packets {
        records.push(emitter.nominal());
        labels.push(false);
    }
    windows.push(NamedWindow {
        name: "y0".to_string(),
        start: 0,
        end: records.len(),
    });

    for (stage_index, stage) in config.stage_specs.iter().enumerate() {
        let start = records.len();
        let normals = (stage.attack_packets as f64 * stage.interleave_ratio).ceil() as usize;
        let window_len = stage.attack_packets + normals;

        // Scatter the attack positions by a partial shuffle of the window
        // slots; sorting keeps emission order equal to position order.
        let mut slots: Vec<usize> = (0..window_len).collect();
        for k in 0..stage.attack_packets {
            let swap_with = emitter.rng.random_range(k..window_len);
            slots.swap(k, swap_with);
        }
        let mut attack_positions = slots[..stage.attack_packets].to_vec();
        attack_positions.sort_unstable();

        let mut next_attack = 0;
        let mut ordinal = 0;
        for position in 0..window_len {
            if next_attack < attack_positions.len() && attack_positions[next_attack] == position {
                records.push(emitter.attack(stage_index, stage.kind, ordinal));
                labels.push(true);
                next_attack += 1;
                ordinal += 1;
            } else {
                records.push(emitter.nominal());
                labels.push(false);
            }
        }
        windows.push(NamedWindow {
            name: format!("stage{}", stage_index + 1),
            start,
            end: records.len(),
        });
    }

    Ok(SyntheticTrace {
        records,
        labels,
        windows,
    })
}
