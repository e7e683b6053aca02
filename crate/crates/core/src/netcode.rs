//! Bit-level model of the two-phase exchange.
//!
//! Phase 1: the BS sends private parts on ZF beams and the concatenated
//! common parts on the common beam, while each MS sends its uplink to its
//! SBS. Phase 2: each SBS broadcasts `downlink ⊕ uplink`, and the BS and the
//! MS each strip the part they already know. Delivery is gated on the
//! optimizers' feasibility reports, with no noise simulated.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bs_power::BsPowerSolution;
use crate::channel::ChannelRealization;
use crate::error::{Error, Result};
use crate::rate_model::{mac_feasible, RateRequirements};
use crate::sbs_power::{eta_feasible, EtaSolution};
use crate::sdp::SolveStatus;

/// Rate slack tolerated when checking phase-2 feasibility.
const RATE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Origin {
    BsToMs1,
    BsToMs2,
    Ms1ToBs,
    Ms2ToBs,
    /// XOR broadcast of an SBS.
    Coded,
}

impl Origin {
    pub fn downlink(i: usize) -> Origin {
        [Origin::BsToMs1, Origin::BsToMs2][i]
    }

    pub fn uplink(i: usize) -> Origin {
        [Origin::Ms1ToBs, Origin::Ms2ToBs][i]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub bits: Vec<bool>,
    pub origin: Origin,
}

impl Message {
    pub fn new(bits: Vec<bool>, origin: Origin) -> Self {
        Self { bits, origin }
    }

    /// Parses a string of `0` and `1`.
    pub fn parse(s: &str, origin: Origin) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::InvalidInput(format!("not a bit: {other:?}"))),
            })
            .collect::<Result<_>>()?;
        Ok(Self { bits, origin })
    }

    pub fn random<R: Rng + ?Sized>(len: usize, origin: Origin, rng: &mut R) -> Self {
        Self {
            bits: (0..len).map(|_| rng.gen()).collect(),
            origin,
        }
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }
}

impl std::fmt::Display for Message {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in &self.bits {
            f.write_str(if *b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Private prefix of `⌈α·len⌉` bits and the common suffix.
pub fn split_message(m: &Message, alpha: f64) -> Result<(Message, Message)> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(format!(
            "split factor {alpha} outside [0, 1]"
        )));
    }
    // the small offset keeps products like 0.3·10 from rounding up to 4
    let k = ((alpha * m.len() as f64) - 1e-9).ceil().max(0.0) as usize;
    let k = k.min(m.len());
    Ok((
        Message::new(m.bits[..k].to_vec(), m.origin),
        Message::new(m.bits[k..].to_vec(), m.origin),
    ))
}

/// Concatenated common message with its part boundary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommonMessage {
    pub bits: Vec<bool>,
    pub boundary: Option<usize>,
}

pub fn concat_common(c1: &Message, c2: &Message) -> CommonMessage {
    let mut bits = c1.bits.clone();
    bits.extend_from_slice(&c2.bits);
    CommonMessage {
        bits,
        boundary: Some(c1.len()),
    }
}

pub fn extract_common(c: &CommonMessage) -> Result<(Message, Message)> {
    Ok((extract_part(c, 0)?, extract_part(c, 1)?))
}

/// The part SBS `i` forwards to its MS.
pub fn extract_part(c: &CommonMessage, i: usize) -> Result<Message> {
    let b = c
        .boundary
        .ok_or_else(|| Error::Protocol("common message lacks its part boundary".into()))?;
    if b > c.bits.len() {
        return Err(Error::Protocol(format!(
            "boundary {b} beyond common message of {} bits",
            c.bits.len()
        )));
    }
    let bits = match i {
        0 => c.bits[..b].to_vec(),
        1 => c.bits[b..].to_vec(),
        _ => return Err(Error::Protocol(format!("no common part {i}"))),
    };
    Ok(Message::new(bits, Origin::downlink(i)))
}

fn padded(bits: &[bool], len: usize) -> Vec<bool> {
    let mut out = bits.to_vec();
    out.resize(len, false);
    out
}

fn xor(a: &[bool], b: &[bool]) -> Vec<bool> {
    a.iter().zip(b).map(|(x, y)| x ^ y).collect()
}

/// Zero-pads the uplink at the tail to the downlink length and XORs.
pub fn xor_encode(dl: &Message, ul: &Message) -> Result<Message> {
    if ul.len() > dl.len() {
        return Err(Error::UplinkLongerThanDownlink {
            uplink: ul.len(),
            downlink: dl.len(),
        });
    }
    Ok(Message::new(
        xor(&dl.bits, &padded(&ul.bits, dl.len())),
        Origin::Coded,
    ))
}

/// Returns `(uplink recovered at the BS, downlink recovered at the MS)`.
pub fn recover_at_endnodes(
    broadcast: &Message,
    known_dl: &Message,
    known_ul: &Message,
    ul_len: usize,
) -> Result<(Message, Message)> {
    if broadcast.len() != known_dl.len() {
        return Err(Error::LengthMismatch {
            expected: known_dl.len(),
            actual: broadcast.len(),
        });
    }
    if known_ul.len() != ul_len || ul_len > broadcast.len() {
        return Err(Error::LengthMismatch {
            expected: ul_len,
            actual: known_ul.len(),
        });
    }
    let mut ul = xor(&broadcast.bits, &known_dl.bits);
    ul.truncate(ul_len);
    let dl = xor(&broadcast.bits, &padded(&known_ul.bits, broadcast.len()));
    Ok((
        Message::new(ul, known_ul.origin),
        Message::new(dl, known_dl.origin),
    ))
}

/// Bits carried per period: `round(rate)`.
pub fn bits_for_rate(rate: f64) -> usize {
    rate.round().max(0.0) as usize
}

/// Outcome of [`exhaustive_round_trip`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct XorCheck {
    pub max_bits: usize,
    pub pairs: u64,
    pub errors: u64,
}

/// XOR-encodes and recovers every downlink of up to `max_bits` bits against
/// every uplink no longer than it, counting pairs that fail to round-trip.
pub fn exhaustive_round_trip(max_bits: usize) -> XorCheck {
    let message = |value: u64, len: usize, origin: Origin| {
        Message::new((0..len).map(|k| value >> k & 1 == 1).collect(), origin)
    };
    let mut check = XorCheck {
        max_bits,
        pairs: 0,
        errors: 0,
    };
    for dl_len in 0..=max_bits {
        for dv in 0..1u64 << dl_len {
            let dl = message(dv, dl_len, Origin::BsToMs1);
            for ul_len in 0..=dl_len {
                for uv in 0..1u64 << ul_len {
                    let ul = message(uv, ul_len, Origin::Ms1ToBs);
                    check.pairs += 1;
                    let exact = xor_encode(&dl, &ul)
                        .and_then(|b| recover_at_endnodes(&b, &dl, &ul, ul_len))
                        .is_ok_and(|(u, d)| u.bits == ul.bits && d.bits == dl.bits);
                    if !exact {
                        check.errors += 1;
                    }
                }
            }
        }
    }
    check
}

/// The four messages of one period.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Payloads {
    pub downlink: [Message; 2],
    pub uplink: [Message; 2],
}

impl Payloads {
    pub fn random<R: Rng + ?Sized>(rates: &RateRequirements, rng: &mut R) -> Self {
        let mut gen = |r: f64, o: Origin| Message::random(bits_for_rate(r), o, rng);
        let downlink = [
            gen(rates.r_d[0], Origin::BsToMs1),
            gen(rates.r_d[1], Origin::BsToMs2),
        ];
        let uplink = [
            gen(rates.r_u[0], Origin::Ms1ToBs),
            gen(rates.r_u[1], Origin::Ms2ToBs),
        ];
        Self { downlink, uplink }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub seed_id: u64,
    pub alpha: [f64; 2],
    /// SBS `i` decodes its phase-1 streams.
    pub phase1_feasible: [bool; 2],
    /// The BS decodes both phase-2 broadcasts.
    pub phase2_feasible: bool,
    pub downlink_delivered: [bool; 2],
    pub uplink_delivered: [bool; 2],
    pub downlink_bits: [usize; 2],
    pub uplink_bits: [usize; 2],
    /// Bits a wired backhaul delivers in the same period.
    pub wired_downlink_bits: [usize; 2],
    pub wired_uplink_bits: [usize; 2],
    /// Every flow is delivered exactly when both optimizers reported
    /// feasibility.
    pub consistent: bool,
}

impl ProtocolReport {
    pub fn all_delivered(&self) -> bool {
        self.downlink_delivered
            .iter()
            .chain(&self.uplink_delivered)
            .all(|d| *d)
    }

    pub fn wired_equivalent(&self) -> bool {
        self.downlink_bits == self.wired_downlink_bits && self.uplink_bits == self.wired_uplink_bits
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }
}

/// Runs both phases for one realization.
pub fn simulate_two_phase(
    ch: &ChannelRealization,
    rates: &RateRequirements,
    bs: &BsPowerSolution,
    eta: &EtaSolution,
    payloads: &Payloads,
    sigma2: f64,
    p_s: f64,
) -> Result<ProtocolReport> {
    let alpha = bs.alpha;

    let (rx_p, rx_c) = bs.received_powers(ch)?;
    let gamma_p = rx_p.map(|p| p / sigma2);
    let gamma_c = rx_c.map(|p| p / sigma2);
    let mac = mac_feasible(gamma_p, gamma_c, ch.gamma_m(), rates, alpha);
    let bs_ok = bs.status == SolveStatus::Optimal;
    let phase1 = [bs_ok && mac[0], bs_ok && mac[1]];
    let phase2 = eta.status == SolveStatus::Optimal
        && eta_feasible(ch, rates, [eta.eta1, eta.eta2], p_s, sigma2, RATE_SLACK);

    // BS side of phase 1
    let (p1, c1) = split_message(&payloads.downlink[0], alpha.alpha1)?;
    let (p2, c2) = split_message(&payloads.downlink[1], alpha.alpha2)?;
    let common = concat_common(&c1, &c2);
    let private = [p1, p2];

    let mut report = ProtocolReport {
        seed_id: ch.seed_id,
        alpha: alpha.as_array(),
        phase1_feasible: phase1,
        phase2_feasible: phase2,
        downlink_delivered: [false; 2],
        uplink_delivered: [false; 2],
        downlink_bits: [0; 2],
        uplink_bits: [0; 2],
        wired_downlink_bits: payloads.downlink.each_ref().map(Message::len),
        wired_uplink_bits: payloads.uplink.each_ref().map(Message::len),
        consistent: false,
    };

    for i in 0..2 {
        if !phase1[i] {
            continue;
        }
        // SBS i reassembles its downlink and holds the MS uplink
        let mut dl_bits = private[i].bits.clone();
        dl_bits.extend(extract_part(&common, i)?.bits);
        let dl = Message::new(dl_bits, Origin::downlink(i));
        let ul = payloads.uplink[i].clone();
        let broadcast = xor_encode(&dl, &ul)?;
        if !phase2 {
            continue;
        }
        let (ul_at_bs, _) = recover_at_endnodes(&broadcast, &payloads.downlink[i], &ul, ul.len())?;
        let (_, dl_at_ms) = recover_at_endnodes(&broadcast, &dl, &payloads.uplink[i], ul.len())?;
        if dl_at_ms == payloads.downlink[i] {
            report.downlink_delivered[i] = true;
            report.downlink_bits[i] = dl_at_ms.len();
        }
        if ul_at_bs == payloads.uplink[i] {
            report.uplink_delivered[i] = true;
            report.uplink_bits[i] = ul_at_bs.len();
        }
    }
    let feasible = phase1[0] && phase1[1] && phase2;
    report.consistent = report.all_delivered() == feasible;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bs_power::optimize_alpha;
    use crate::channel::{sample_rayleigh, ScenarioConfig};
    use crate::sbs_power::solve_eta;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn msg(s: &str) -> Message {
        Message::parse(s, Origin::BsToMs1).unwrap()
    }

    fn all_messages(len: usize) -> impl Iterator<Item = Message> {
        (0u32..(1 << len)).map(move |v| {
            Message::new((0..len).map(|b| v >> b & 1 == 1).collect(), Origin::BsToMs1)
        })
    }

    #[test]
    fn split_examples() {
        let (p, c) = split_message(&msg("10110100"), 0.5).unwrap();
        assert_eq!((p.len(), c.len()), (4, 4));
        let (p, c) = split_message(&msg("10110"), 0.5).unwrap();
        assert_eq!((p.to_string(), c.to_string()), ("101".into(), "10".into()));
        let (p, c) = split_message(&msg("10110"), 1.0).unwrap();
        assert_eq!((p.len(), c.len()), (5, 0));
        let (p, _) = split_message(&msg("1011011011"), 0.3).unwrap();
        assert_eq!(p.len(), 3);
        assert!(split_message(&msg("1"), 1.5).is_err());
    }

    #[test]
    fn concat_examples() {
        let c = concat_common(&msg("10"), &msg("011"));
        assert_eq!(c.boundary, Some(2));
        assert_eq!(
            Message::new(c.bits.clone(), Origin::Coded).to_string(),
            "10011"
        );
        let (a, b) = extract_common(&c).unwrap();
        assert_eq!((a.to_string(), b.to_string()), ("10".into(), "011".into()));
        let c = concat_common(&msg(""), &msg("011"));
        assert_eq!(extract_part(&c, 1).unwrap().to_string(), "011");
        let broken = CommonMessage {
            bits: vec![true],
            boundary: None,
        };
        assert!(matches!(extract_common(&broken), Err(Error::Protocol(_))));
    }

    #[test]
    fn xor_examples() {
        let b = xor_encode(&msg("1011"), &msg("01")).unwrap();
        assert_eq!(b.to_string(), "1111");
        assert_eq!(
            xor_encode(&msg("1011"), &msg("1011")).unwrap().to_string(),
            "0000"
        );
        assert_eq!(
            xor_encode(&msg("1011"), &msg("")).unwrap().to_string(),
            "1011"
        );
        assert!(matches!(
            xor_encode(&msg("1"), &msg("01")),
            Err(Error::UplinkLongerThanDownlink {
                uplink: 2,
                downlink: 1
            })
        ));

        let (ul, dl) = recover_at_endnodes(&b, &msg("1011"), &msg("01"), 2).unwrap();
        assert_eq!(
            (ul.to_string(), dl.to_string()),
            ("01".into(), "1011".into())
        );
        let (_, dl) = recover_at_endnodes(&msg("1011"), &msg("1011"), &msg(""), 0).unwrap();
        assert_eq!(dl.to_string(), "1011");
        assert!(matches!(
            recover_at_endnodes(&msg("101"), &msg("1011"), &msg("01"), 2),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn exhaustive_xor_round_trip() {
        let mut checked = 0u64;
        for dl_len in 0..=10 {
            for dl in all_messages(dl_len) {
                for ul_len in 0..=dl_len.min(4) {
                    for ul in all_messages(ul_len) {
                        let b = xor_encode(&dl, &ul).unwrap();
                        let (u, d) = recover_at_endnodes(&b, &dl, &ul, ul_len).unwrap();
                        assert_eq!(u.bits, ul.bits);
                        assert_eq!(d.bits, dl.bits);
                        checked += 1;
                    }
                }
            }
        }
        assert!(checked > 30_000);
    }

    #[test]
    fn exhaustive_check_counts_pairs() {
        // Σₙ 2ⁿ(2ⁿ⁺¹ − 1) for n = 0..3
        assert_eq!(
            exhaustive_round_trip(3),
            XorCheck {
                max_bits: 3,
                pairs: 155,
                errors: 0
            }
        );
    }

    proptest! {
        #[test]
        fn random_xor_round_trip(dl in proptest::collection::vec(any::<bool>(), 0..200), cut in 0.0f64..=1.0) {
            let dl = Message::new(dl, Origin::BsToMs2);
            let ul_len = (cut * dl.len() as f64) as usize;
            let ul = Message::new(dl.bits.iter().rev().take(ul_len).copied().collect(), Origin::Ms2ToBs);
            let b = xor_encode(&dl, &ul).unwrap();
            let (u, d) = recover_at_endnodes(&b, &dl, &ul, ul_len).unwrap();
            prop_assert_eq!(u, ul);
            prop_assert_eq!(d, dl);
        }

        #[test]
        fn split_concat_round_trip(a in proptest::collection::vec(any::<bool>(), 0..64),
                                   b in proptest::collection::vec(any::<bool>(), 0..64),
                                   k in 0usize..=100) {
            let alpha = k as f64 / 100.0;
            let m = Message::new(a.clone(), Origin::BsToMs1);
            let (p, c) = split_message(&m, alpha).unwrap();
            prop_assert_eq!([p.bits, c.bits.clone()].concat(), a);
            let other = Message::new(b, Origin::BsToMs2);
            let joined = concat_common(&c, &other);
            let (x, y) = extract_common(&joined).unwrap();
            prop_assert_eq!(x.bits, c.bits);
            prop_assert_eq!(y.bits, other.bits);
        }
    }

    fn feasible_instance(
        id: u64,
    ) -> (
        ChannelRealization,
        RateRequirements,
        BsPowerSolution,
        EtaSolution,
    ) {
        let cfg = ScenarioConfig::default();
        let ch = sample_rayleigh(id, &cfg);
        let rates = RateRequirements::from_scenario(&cfg);
        let bs = optimize_alpha(&ch, &rates, 1.0, 0.25).unwrap();
        let eta = solve_eta(&ch, &rates, cfg.sbs_power(), 1.0).unwrap();
        (ch, rates, bs, eta)
    }

    #[test]
    fn feasible_instances_deliver_wired_bit_counts() {
        let cfg = ScenarioConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for id in 0..10 {
            let (ch, rates, bs, eta) = feasible_instance(id);
            let payloads = Payloads::random(&rates, &mut rng);
            let r = simulate_two_phase(&ch, &rates, &bs, &eta, &payloads, 1.0, cfg.sbs_power())
                .unwrap();
            assert!(r.all_delivered(), "{r:?}");
            assert!(r.wired_equivalent());
            assert!(r.consistent);
            assert_eq!(r.wired_downlink_bits, [4, 4]);
            let line = r.to_json_line();
            assert_eq!(serde_json::from_str::<ProtocolReport>(&line).unwrap(), r);
        }
    }

    #[test]
    fn failed_bs_solution_blocks_delivery() {
        let cfg = ScenarioConfig::default();
        let (ch, rates, mut bs, eta) = feasible_instance(1);
        bs.status = SolveStatus::MaxIterations;
        let payloads = Payloads::random(&rates, &mut ChaCha8Rng::seed_from_u64(1));
        let r =
            simulate_two_phase(&ch, &rates, &bs, &eta, &payloads, 1.0, cfg.sbs_power()).unwrap();
        assert_eq!(r.downlink_delivered, [false, false]);
        assert!(r.consistent);
    }

    #[test]
    fn underpowered_phase2_blocks_delivery() {
        let cfg = ScenarioConfig::default();
        let (ch, rates, bs, mut eta) = feasible_instance(2);
        eta.eta1 = 1.0;
        eta.eta2 = 1.0;
        let payloads = Payloads::random(&rates, &mut ChaCha8Rng::seed_from_u64(2));
        let r =
            simulate_two_phase(&ch, &rates, &bs, &eta, &payloads, 1.0, cfg.sbs_power()).unwrap();
        if !r.phase2_feasible {
            assert!(!r.all_delivered());
        }
        assert!(r.consistent);
    }

    #[test]
    fn shaved_common_beam_breaks_phase1() {
        let cfg = ScenarioConfig::default();
        let (ch, rates, mut bs, eta) = feasible_instance(3);
        bs.w_c = bs.w_c.scale_real(0.5);
        bs.p1 *= 0.5;
        bs.p2 *= 0.5;
        let payloads = Payloads::random(&rates, &mut ChaCha8Rng::seed_from_u64(3));
        let r =
            simulate_two_phase(&ch, &rates, &bs, &eta, &payloads, 1.0, cfg.sbs_power()).unwrap();
        assert_eq!(r.phase1_feasible, [false, false]);
        assert_eq!(r.uplink_bits, [0, 0]);
        assert!(r.consistent);
    }
}
