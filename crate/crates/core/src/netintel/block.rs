use std::fmt;
use std::net::{IpAddr, Ipv4Addr, Ipv6Addr};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// True for addresses that never identify an external sender: private,
/// loopback, link-local, shared (CGNAT), unspecified, multicast, broadcast
/// and the IPv6 equivalents. IPv4-mapped IPv6 addresses are judged by their
/// IPv4 part.
pub fn is_reserved(ip: IpAddr) -> bool {
    match ip {
        IpAddr::V4(v4) => is_reserved_v4(v4),
        IpAddr::V6(v6) => {
            if let Some(v4) = v6.to_ipv4_mapped() {
                return is_reserved_v4(v4);
            }
            let seg0 = v6.segments()[0];
            v6.is_loopback()
                || v6.is_unspecified()
                || v6.is_multicast()
                || (seg0 & 0xfe00) == 0xfc00
                || (seg0 & 0xffc0) == 0xfe80
        }
    }
}

fn is_reserved_v4(ip: Ipv4Addr) -> bool {
    let [a, b, ..] = ip.octets();
    ip.is_private()
        || ip.is_loopback()
        || ip.is_link_local()
        || ip.is_multicast()
        || ip.is_broadcast()
        || a == 0
        || (a == 100 && (b & 0xc0) == 64)
        || a >= 240
}

/// Inclusive address range of one family. Parsed from CIDR notation or built
/// from explicit endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct IpBlock {
    start: IpAddr,
    end: IpAddr,
}

pub(crate) fn to_u128(ip: IpAddr) -> u128 {
    match ip {
        IpAddr::V4(v4) => u32::from(v4) as u128,
        IpAddr::V6(v6) => u128::from(v6),
    }
}

fn family_bits(ip: IpAddr) -> u32 {
    if ip.is_ipv4() {
        32
    } else {
        128
    }
}

fn from_u128(v: u128, v4: bool) -> IpAddr {
    if v4 {
        IpAddr::V4(Ipv4Addr::from(v as u32))
    } else {
        IpAddr::V6(Ipv6Addr::from(v))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockError(pub String);

impl fmt::Display for BlockError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for BlockError {}

impl IpBlock {
    pub fn from_range(start: IpAddr, end: IpAddr) -> Result<Self, BlockError> {
        if start.is_ipv4() != end.is_ipv4() {
            return Err(BlockError(format!(
                "{start} and {end} are different families"
            )));
        }
        if to_u128(start) > to_u128(end) {
            return Err(BlockError(format!("range start {start} after end {end}")));
        }
        Ok(IpBlock { start, end })
    }

    pub fn start(&self) -> IpAddr {
        self.start
    }

    pub fn end(&self) -> IpAddr {
        self.end
    }

    pub fn is_ipv4(&self) -> bool {
        self.start.is_ipv4()
    }

    /// Number of addresses minus one, comparable within a family.
    pub fn span(&self) -> u128 {
        to_u128(self.end) - to_u128(self.start)
    }

    pub fn contains(&self, ip: IpAddr) -> bool {
        ip.is_ipv4() == self.is_ipv4()
            && (to_u128(self.start)..=to_u128(self.end)).contains(&to_u128(ip))
    }

    /// Prefix length when the range is exactly one CIDR block.
    pub fn prefix_len(&self) -> Option<u32> {
        let bits = family_bits(self.start);
        let size = self.span().checked_add(1);
        let host_bits = match size {
            None => 128,
            Some(s) if s.is_power_of_two() => s.trailing_zeros(),
            Some(_) => return None,
        };
        let aligned = host_bits == 128 || to_u128(self.start) & ((1u128 << host_bits) - 1) == 0;
        aligned.then_some(bits - host_bits)
    }
}

impl FromStr for IpBlock {
    type Err = BlockError;

    /// Accepts `addr/len`, a bare address (a single-host block) or `start-end`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('-') {
            let start = a
                .trim()
                .parse()
                .map_err(|_| BlockError(format!("bad address {a:?}")))?;
            let end = b
                .trim()
                .parse()
                .map_err(|_| BlockError(format!("bad address {b:?}")))?;
            return IpBlock::from_range(start, end);
        }
        let (addr, len) = match s.split_once('/') {
            Some((a, l)) => (a, Some(l)),
            None => (s, None),
        };
        let ip: IpAddr = addr
            .parse()
            .map_err(|_| BlockError(format!("bad address {addr:?}")))?;
        let bits = family_bits(ip);
        let len: u32 = match len {
            None => bits,
            Some(l) => l
                .parse()
                .map_err(|_| BlockError(format!("bad prefix length {l:?}")))?,
        };
        if len > bits {
            return Err(BlockError(format!("prefix length /{len} invalid for {ip}")));
        }
        let host = bits - len;
        let mask: u128 = if host == 128 {
            u128::MAX
        } else {
            (1u128 << host) - 1
        };
        let base = to_u128(ip) & !mask;
        let v4 = ip.is_ipv4();
        Ok(IpBlock {
            start: from_u128(base, v4),
            end: from_u128(base | mask, v4),
        })
    }
}

impl fmt::Display for IpBlock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.prefix_len() {
            Some(len) => write!(f, "{}/{}", self.start, len),
            None => write!(f, "{}-{}", self.start, self.end),
        }
    }
}

impl Serialize for IpBlock {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for IpBlock {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ip(s: &str) -> IpAddr {
        s.parse().unwrap()
    }

    #[test]
    fn reserved_space() {
        for r in [
            "10.0.0.1",
            "172.20.1.1",
            "192.168.0.9",
            "127.0.0.1",
            "169.254.3.3",
            "100.64.0.1",
            "0.0.0.0",
            "224.0.0.5",
            "255.255.255.255",
            "::1",
            "::",
            "fd00::1",
            "fe80::1",
            "ff02::1",
            "::ffff:10.1.2.3",
        ] {
            assert!(is_reserved(ip(r)), "{r}");
        }
        for p in [
            "167.89.1.2",
            "8.8.8.8",
            "100.128.0.1",
            "2607:f8b0::1",
            "::ffff:8.8.8.8",
        ] {
            assert!(!is_reserved(ip(p)), "{p}");
        }
    }

    #[test]
    fn cidr_parsing() {
        let b: IpBlock = "167.89.0.0/17".parse().unwrap();
        assert_eq!(b.start(), ip("167.89.0.0"));
        assert_eq!(b.end(), ip("167.89.127.255"));
        assert!(b.contains(ip("167.89.1.2")));
        assert!(!b.contains(ip("167.89.128.0")));
        assert_eq!(b.to_string(), "167.89.0.0/17");

        let host_bits_set: IpBlock = "10.1.2.3/8".parse().unwrap();
        assert_eq!(host_bits_set.to_string(), "10.0.0.0/8");

        let all: IpBlock = "::/0".parse().unwrap();
        assert_eq!(all.prefix_len(), Some(0));
        assert_eq!(all.to_string(), "::/0");
        assert!("1.2.3.4/33".parse::<IpBlock>().is_err());
        assert!("2001:db8::/129".parse::<IpBlock>().is_err());
        assert!("nope/8".parse::<IpBlock>().is_err());
    }

    #[test]
    fn ranges() {
        let r: IpBlock = "1.0.0.0-1.0.0.255".parse().unwrap();
        assert_eq!(r.to_string(), "1.0.0.0/24");
        let odd: IpBlock = "1.0.0.1-1.0.0.5".parse().unwrap();
        assert_eq!(odd.to_string(), "1.0.0.1-1.0.0.5");
        assert!("1.0.0.5-1.0.0.1".parse::<IpBlock>().is_err());
        assert!("1.0.0.1-::1".parse::<IpBlock>().is_err());
        assert!(!r.contains(ip("::1")));
    }

    #[test]
    fn serde_as_string() {
        let b: IpBlock = "2001:db8::/32".parse().unwrap();
        let j = serde_json::to_string(&b).unwrap();
        assert_eq!(j, "\"2001:db8::/32\"");
        assert_eq!(serde_json::from_str::<IpBlock>(&j).unwrap(), b);
    }
}
