//! Transformation-chain DSL: parsing, canonical formatting, set files, and
//! built-in presets.
//!
//! A chain is an ASCII expression of consecutively applied primitives:
//!
//! ```text
//! chain := "id" | prim ("+" prim)*
//! prim  := "hflip" | "vflip" | "bgr"
//!        | ("left" | "right" | "up" | "down") INT
//!        | ("rotcw" | "rotccw") DEC
//!        | "zoom" DEC
//!        | "gamma" DEC
//! ```
//!
//! `INT` is a positive integer and `DEC` a positive decimal; neither allows
//! leading zeros (other than a literal `0.` integer part), whitespace, or
//! signs. The ASCII tokens stand in for the usual arrow notation: `hflip` ⇔,
//! `vflip` ↕, `left`/`right`/`up`/`down` ←/→/↑/↓, `rotcw`/`rotccw` ↻/↺,
//! `zoom` ×, `gamma` γ, `bgr` BGR.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

/// A single image transformation.
///
/// `Shift` uses pixel offsets with positive `dx` pointing right and positive
/// `dy` pointing up. `Rotate` degrees are positive clockwise and must lie in
/// (-360, 360) excluding 0. `Zoom` magnifies by `factor > 1` and re-crops to
/// the original size. `Gamma` raises each pixel to the power `gamma > 0`.
#[derive(Debug, Clone, PartialEq)]
pub enum PrimitiveTransform {
    HFlip,
    VFlip,
    ChannelReverse,
    Shift { dx: i32, dy: i32 },
    Rotate { degrees: f64 },
    Zoom { factor: f64 },
    Gamma { gamma: f64 },
    Identity,
}

impl PrimitiveTransform {
    /// True for primitives that leave every image unchanged.
    pub fn is_identity(&self) -> bool {
        matches!(self, PrimitiveTransform::Identity)
    }
}

/// An ordered sequence of primitives applied left to right. The empty chain
/// is the identity and formats as `"id"`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransformChain {
    primitives: Vec<PrimitiveTransform>,
}

impl TransformChain {
    /// Builds a chain, normalizing it into the grammar-producible form:
    /// explicit `Identity` primitives are dropped and a diagonal
    /// `Shift { dx, dy }` with both offsets nonzero is split into the
    /// equivalent horizontal-then-vertical pair. Both rewrites are pixel
    /// exact (edge replication acts per axis), and they keep the canonical
    /// text round trip structural: `parse(format(chain)) == chain`.
    pub fn new(primitives: Vec<PrimitiveTransform>) -> Self {
        let mut normalized = Vec::with_capacity(primitives.len());
        for p in primitives {
            match p {
                PrimitiveTransform::Identity => {}
                PrimitiveTransform::Shift { dx, dy } if dx != 0 && dy != 0 => {
                    normalized.push(PrimitiveTransform::Shift { dx, dy: 0 });
                    normalized.push(PrimitiveTransform::Shift { dx: 0, dy });
                }
                other => normalized.push(other),
            }
        }
        TransformChain {
            primitives: normalized,
        }
    }

    /// The identity chain (no primitives).
    pub fn identity() -> Self {
        TransformChain::default()
    }

    pub fn primitives(&self) -> &[PrimitiveTransform] {
        &self.primitives
    }

    pub fn is_identity(&self) -> bool {
        self.primitives.is_empty()
    }

    /// Canonical text form: lowercase, `+`-joined, `"id"` when empty.
    pub fn canonical(&self) -> String {
        format_chain(self)
    }
}

impl fmt::Display for TransformChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.canonical())
    }
}

/// A named, ordered collection of non-identity chains. The identity chain is
/// never stored: every consumer treats it as the implicit variant 0.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSet {
    name: String,
    chains: Vec<TransformChain>,
}

impl TransformSet {
    /// Builds a set, rejecting identity chains and duplicates (compared by
    /// canonical text form).
    pub fn new(name: impl Into<String>, chains: Vec<TransformChain>) -> Result<Self, SetError> {
        let mut seen = BTreeSet::new();
        for (i, chain) in chains.iter().enumerate() {
            if chain.is_identity() {
                return Err(SetError::ExplicitIdentity { line: i + 1 });
            }
            let canonical = chain.canonical();
            if !seen.insert(canonical.clone()) {
                return Err(SetError::DuplicateChain {
                    line: i + 1,
                    canonical,
                });
            }
        }
        Ok(TransformSet {
            name: name.into(),
            chains,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn chains(&self) -> &[TransformChain] {
        &self.chains
    }

    /// Number of explicit (non-identity) chains.
    pub fn len(&self) -> usize {
        self.chains.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chains.is_empty()
    }

    /// Set-file rendering: optional `name:` header, one canonical chain per
    /// line, LF endings. `parse_set_file` inverts it.
    pub fn to_file_text(&self) -> String {
        let mut out = String::new();
        if !self.name.is_empty() {
            out.push_str("name: ");
            out.push_str(&self.name);
            out.push('\n');
        }
        for chain in &self.chains {
            out.push_str(&chain.canonical());
            out.push('\n');
        }
        out
    }
}

/// Chain-expression parse failure, with the byte offset of the offending
/// token in the input.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at byte {offset}: {message}")]
pub struct ChainParseError {
    pub offset: usize,
    pub message: String,
}

impl ChainParseError {
    fn new(offset: usize, message: impl Into<String>) -> Self {
        ChainParseError {
            offset,
            message: message.into(),
        }
    }
}

/// Set-file or preset lookup failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SetError {
    #[error("line {line}: {source}")]
    Chain {
        line: usize,
        #[source]
        source: ChainParseError,
    },
    #[error("line {line}: identity is implicit and may not be listed")]
    ExplicitIdentity { line: usize },
    #[error("line {line}: duplicate chain `{canonical}`")]
    DuplicateChain { line: usize, canonical: String },
    #[error("unknown preset `{0}` (expected one of {})", PRESET_NAMES.join(", "))]
    UnknownPreset(String),
}

const KIND_INT: u8 = 0; // positive integer magnitude
const KIND_DEC: u8 = 1; // positive decimal magnitude
const KIND_NONE: u8 = 2; // no magnitude

// Longest keywords first so e.g. "rotccw" is not cut short at "rotcw".
const KEYWORDS: &[(&str, u8)] = &[
    ("rotccw", KIND_DEC),
    ("rotcw", KIND_DEC),
    ("hflip", KIND_NONE),
    ("vflip", KIND_NONE),
    ("right", KIND_INT),
    ("gamma", KIND_DEC),
    ("left", KIND_INT),
    ("down", KIND_INT),
    ("zoom", KIND_DEC),
    ("bgr", KIND_NONE),
    ("up", KIND_INT),
];

/// Parses a chain expression. Consecutive shifts are kept verbatim, in input
/// order; nothing is merged or reordered.
pub fn parse_chain(text: &str) -> Result<TransformChain, ChainParseError> {
    if text.is_empty() {
        return Err(ChainParseError::new(0, "empty chain expression"));
    }
    if text == "id" {
        return Ok(TransformChain::identity());
    }
    let bytes = text.as_bytes();
    let mut primitives = Vec::new();
    let mut pos = 0;
    loop {
        let (prim, next) = parse_primitive(text, pos)?;
        primitives.push(prim);
        if next == bytes.len() {
            break;
        }
        if bytes[next] != b'+' {
            return Err(ChainParseError::new(
                next,
                format!("expected `+` or end of chain, found `{}`", &text[next..next + 1]),
            ));
        }
        pos = next + 1;
        if pos == bytes.len() {
            return Err(ChainParseError::new(pos, "expected transformation after `+`"));
        }
    }
    Ok(TransformChain::new(primitives))
}

fn parse_primitive(text: &str, pos: usize) -> Result<(PrimitiveTransform, usize), ChainParseError> {
    let rest = &text[pos..];
    let (keyword, kind) = KEYWORDS
        .iter()
        .find(|(kw, _)| rest.starts_with(kw))
        .copied()
        .ok_or_else(|| ChainParseError::new(pos, "unknown transformation token"))?;
    let mag_pos = pos + keyword.len();
    match kind {
        KIND_NONE => {
            let prim = match keyword {
                "hflip" => PrimitiveTransform::HFlip,
                "vflip" => PrimitiveTransform::VFlip,
                "bgr" => PrimitiveTransform::ChannelReverse,
                _ => unreachable!(),
            };
            Ok((prim, mag_pos))
        }
        KIND_INT => {
            let (value, next) = scan_int(text, mag_pos, keyword)?;
            let offset = value as i32;
            let prim = match keyword {
                "left" => PrimitiveTransform::Shift { dx: -offset, dy: 0 },
                "right" => PrimitiveTransform::Shift { dx: offset, dy: 0 },
                "up" => PrimitiveTransform::Shift { dx: 0, dy: offset },
                "down" => PrimitiveTransform::Shift { dx: 0, dy: -offset },
                _ => unreachable!(),
            };
            Ok((prim, next))
        }
        KIND_DEC => {
            let (value, next) = scan_dec(text, mag_pos, keyword)?;
            let prim = match keyword {
                "rotcw" | "rotccw" => {
                    if value >= 360.0 {
                        return Err(ChainParseError::new(
                            mag_pos,
                            "rotation angle must be less than 360 degrees",
                        ));
                    }
                    let degrees = if keyword == "rotcw" { value } else { -value };
                    PrimitiveTransform::Rotate { degrees }
                }
                "zoom" => {
                    if value <= 1.0 {
                        return Err(ChainParseError::new(mag_pos, "zoom factor must exceed 1"));
                    }
                    PrimitiveTransform::Zoom { factor: value }
                }
                "gamma" => PrimitiveTransform::Gamma { gamma: value },
                _ => unreachable!(),
            };
            Ok((prim, next))
        }
        _ => unreachable!(),
    }
}

fn scan_digits(text: &str, pos: usize) -> usize {
    text[pos..]
        .bytes()
        .take_while(|b| b.is_ascii_digit())
        .count()
}

fn scan_int(text: &str, pos: usize, keyword: &str) -> Result<(u32, usize), ChainParseError> {
    let len = scan_digits(text, pos);
    if len == 0 {
        return Err(ChainParseError::new(
            pos,
            format!("`{keyword}` requires an integer magnitude"),
        ));
    }
    let digits = &text[pos..pos + len];
    if len > 1 && digits.starts_with('0') {
        return Err(ChainParseError::new(pos, "leading zeros are not allowed"));
    }
    let value: u32 = digits
        .parse()
        .map_err(|_| ChainParseError::new(pos, "integer magnitude out of range"))?;
    if value == 0 {
        return Err(ChainParseError::new(pos, "magnitude must be nonzero"));
    }
    Ok((value, pos + len))
}

fn scan_dec(text: &str, pos: usize, keyword: &str) -> Result<(f64, usize), ChainParseError> {
    let int_len = scan_digits(text, pos);
    if int_len == 0 {
        return Err(ChainParseError::new(
            pos,
            format!("`{keyword}` requires a decimal magnitude"),
        ));
    }
    let int_digits = &text[pos..pos + int_len];
    if int_len > 1 && int_digits.starts_with('0') {
        return Err(ChainParseError::new(pos, "leading zeros are not allowed"));
    }
    let mut end = pos + int_len;
    if text.as_bytes().get(end) == Some(&b'.') {
        let frac_len = scan_digits(text, end + 1);
        if frac_len == 0 {
            return Err(ChainParseError::new(
                end,
                "decimal point must be followed by digits",
            ));
        }
        end += 1 + frac_len;
    }
    let value: f64 = text[pos..end]
        .parse()
        .map_err(|_| ChainParseError::new(pos, "malformed decimal magnitude"))?;
    if value == 0.0 {
        return Err(ChainParseError::new(pos, "magnitude must be nonzero"));
    }
    Ok((value, end))
}

/// Emits the canonical text form of a chain: lowercase tokens, no whitespace,
/// `+`-joined, `"id"` for the empty chain. Satisfies
/// `format(parse(s)) == canonical(s)` for every grammatical `s`.
pub fn format_chain(chain: &TransformChain) -> String {
    if chain.primitives.is_empty() {
        return "id".to_string();
    }
    let mut tokens = Vec::with_capacity(chain.primitives.len() + 1);
    for prim in &chain.primitives {
        match prim {
            PrimitiveTransform::HFlip => tokens.push("hflip".to_string()),
            PrimitiveTransform::VFlip => tokens.push("vflip".to_string()),
            PrimitiveTransform::ChannelReverse => tokens.push("bgr".to_string()),
            PrimitiveTransform::Shift { dx, dy } => {
                // Chains built through `TransformChain::new` carry single-axis
                // shifts; a raw diagonal shift still renders losslessly as
                // its split form.
                if *dx > 0 {
                    tokens.push(format!("right{dx}"));
                } else if *dx < 0 {
                    tokens.push(format!("left{}", -dx));
                }
                if *dy > 0 {
                    tokens.push(format!("up{dy}"));
                } else if *dy < 0 {
                    tokens.push(format!("down{}", -dy));
                }
            }
            PrimitiveTransform::Rotate { degrees } => {
                if *degrees >= 0.0 {
                    tokens.push(format!("rotcw{degrees}"));
                } else {
                    tokens.push(format!("rotccw{}", -degrees));
                }
            }
            PrimitiveTransform::Zoom { factor } => tokens.push(format!("zoom{factor}")),
            PrimitiveTransform::Gamma { gamma } => tokens.push(format!("gamma{gamma}")),
            PrimitiveTransform::Identity => {}
        }
    }
    tokens.join("+")
}

/// Parses a transformation-set file: UTF-8, LF endings, one chain per line,
/// `#`-prefixed comment lines and blank lines ignored, optional first content
/// line `name: <id>`. Explicit `id` lines are rejected (the identity variant
/// is always implicit), as are duplicate chains.
pub fn parse_set_file(text: &str) -> Result<TransformSet, SetError> {
    let mut name = String::new();
    let mut chains = Vec::new();
    let mut seen = BTreeSet::new();
    let mut saw_content = false;
    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw_line;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if !saw_content {
            saw_content = true;
            if let Some(rest) = line.strip_prefix("name:") {
                name = rest.trim().to_string();
                continue;
            }
        }
        if line == "id" {
            return Err(SetError::ExplicitIdentity { line: line_no });
        }
        let chain = parse_chain(line).map_err(|source| SetError::Chain {
            line: line_no,
            source,
        })?;
        let canonical = chain.canonical();
        if !seen.insert(canonical.clone()) {
            return Err(SetError::DuplicateChain {
                line: line_no,
                canonical,
            });
        }
        chains.push(chain);
    }
    Ok(TransformSet { name, chains })
}

/// Built-in preset names, each shipped as a set file under `presets/`.
pub const PRESET_NAMES: [&str; 6] = [
    "cifar10",
    "cifar100",
    "svhn",
    "imagenet",
    "stl10_wrn",
    "stl10_elu",
];

/// Explicit chain counts of the built-in presets, keyed like [`PRESET_NAMES`].
/// The identity variant is implicit on top of these in every pipeline.
pub const PRESET_CHAIN_COUNTS: [usize; 6] = [12, 39, 16, 23, 33, 12];

/// Returns a built-in transformation set by preset name.
pub fn builtin_preset(name: &str) -> Result<TransformSet, SetError> {
    let text = match name {
        "cifar10" => include_str!("../presets/cifar10.txt"),
        "cifar100" => include_str!("../presets/cifar100.txt"),
        "svhn" => include_str!("../presets/svhn.txt"),
        "imagenet" => include_str!("../presets/imagenet.txt"),
        "stl10_wrn" => include_str!("../presets/stl10_wrn.txt"),
        "stl10_elu" => include_str!("../presets/stl10_elu.txt"),
        other => return Err(SetError::UnknownPreset(other.to_string())),
    };
    parse_set_file(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(text: &str) -> TransformChain {
        parse_chain(text).unwrap()
    }

    #[test]
    fn parses_flip_and_shifts() {
        let c = chain("hflip+right5+up2");
        assert_eq!(
            c.primitives(),
            &[
                PrimitiveTransform::HFlip,
                PrimitiveTransform::Shift { dx: 5, dy: 0 },
                PrimitiveTransform::Shift { dx: 0, dy: 2 },
            ]
        );
    }

    #[test]
    fn parses_gamma() {
        let c = chain("gamma0.8");
        assert_eq!(c.primitives(), &[PrimitiveTransform::Gamma { gamma: 0.8 }]);
    }

    #[test]
    fn unknown_token_reports_offset() {
        let err = parse_chain("diag3").unwrap_err();
        assert_eq!(err.offset, 0);
        let err = parse_chain("hflip+diag3").unwrap_err();
        assert_eq!(err.offset, 6);
    }

    #[test]
    fn rejects_whitespace_and_leading_zeros() {
        assert!(parse_chain("HFLIP + right05").is_err());
        assert!(parse_chain("hflip +right5").is_err());
        assert!(parse_chain("right05").is_err());
        assert!(parse_chain("gamma00.8").is_err());
    }

    #[test]
    fn rejects_bad_magnitudes() {
        assert!(parse_chain("left").is_err());
        assert!(parse_chain("left0").is_err());
        assert!(parse_chain("zoom1.0").is_err());
        assert!(parse_chain("zoom0.9").is_err());
        assert!(parse_chain("gamma0").is_err());
        assert!(parse_chain("gamma0.0").is_err());
        assert!(parse_chain("rotcw0").is_err());
        assert!(parse_chain("rotcw360").is_err());
        assert!(parse_chain("gamma1.").is_err());
        assert!(parse_chain("gamma.5").is_err());
    }

    #[test]
    fn gamma_one_parses() {
        // gamma1.0 is a legal no-op; only zero and negative are rejected.
        let c = chain("gamma1.0");
        assert_eq!(c.primitives(), &[PrimitiveTransform::Gamma { gamma: 1.0 }]);
        assert_eq!(c.canonical(), "gamma1");
    }

    #[test]
    fn id_only_as_whole_chain() {
        assert!(chain("id").is_identity());
        assert!(parse_chain("id+hflip").is_err());
        assert!(parse_chain("hflip+id").is_err());
    }

    #[test]
    fn trailing_plus_rejected() {
        let err = parse_chain("hflip+").unwrap_err();
        assert_eq!(err.offset, 6);
    }

    #[test]
    fn formats_canonically() {
        assert_eq!(format_chain(&chain("hflip")), "hflip");
        assert_eq!(format_chain(&TransformChain::identity()), "id");
        assert_eq!(format_chain(&chain("rotccw10.5+zoom1.1")), "rotccw10.5+zoom1.1");
        // Non-canonical but grammatical input normalizes.
        assert_eq!(format_chain(&chain("zoom1.10")), "zoom1.1");
    }

    #[test]
    fn new_normalizes_identity_and_diagonal_shift() {
        let c = TransformChain::new(vec![
            PrimitiveTransform::Identity,
            PrimitiveTransform::Shift { dx: 2, dy: -3 },
        ]);
        assert_eq!(
            c.primitives(),
            &[
                PrimitiveTransform::Shift { dx: 2, dy: 0 },
                PrimitiveTransform::Shift { dx: 0, dy: -3 },
            ]
        );
        assert_eq!(c.canonical(), "right2+down3");
        assert_eq!(parse_chain(&c.canonical()).unwrap(), c);
    }

    #[test]
    fn set_file_basics() {
        let set = parse_set_file("hflip\nright5\n").unwrap();
        assert_eq!(set.len(), 2);
        assert_eq!(set.name(), "");

        let set = parse_set_file("# comment\nname: demo\n\nhflip\n").unwrap();
        assert_eq!(set.name(), "demo");
        assert_eq!(set.len(), 1);
    }

    #[test]
    fn set_file_rejects_identity_line() {
        let err = parse_set_file("hflip\nid\n").unwrap_err();
        assert!(matches!(err, SetError::ExplicitIdentity { line: 2 }));
    }

    #[test]
    fn set_file_rejects_duplicates() {
        let err = parse_set_file("hflip\nzoom1.10\nzoom1.1\n").unwrap_err();
        assert!(matches!(err, SetError::DuplicateChain { line: 3, .. }));
    }

    #[test]
    fn set_file_reports_line_of_bad_chain() {
        let err = parse_set_file("hflip\n\n# c\nwhat\n").unwrap_err();
        match err {
            SetError::Chain { line, source } => {
                assert_eq!(line, 4);
                assert_eq!(source.offset, 0);
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn presets_resolve() {
        for (name, count) in PRESET_NAMES.iter().zip(PRESET_CHAIN_COUNTS) {
            let set = builtin_preset(name).unwrap();
            assert_eq!(set.name(), *name);
            assert_eq!(set.len(), count, "preset {name}");
        }
        assert!(matches!(
            builtin_preset("mnist"),
            Err(SetError::UnknownPreset(_))
        ));
    }

    #[test]
    fn svhn_first_chain_matches_notation() {
        let set = builtin_preset("svhn").unwrap();
        assert_eq!(set.chains()[0].canonical(), "left3+down5");
    }

    #[test]
    fn imagenet_contains_zoom_gamma_chain() {
        let set = builtin_preset("imagenet").unwrap();
        assert!(set
            .chains()
            .iter()
            .any(|c| c.canonical() == "zoom1.1+gamma0.8"));
    }

    #[test]
    fn set_round_trips_through_file_text() {
        let set = builtin_preset("cifar10").unwrap();
        let text = set.to_file_text();
        let reparsed = parse_set_file(&text).unwrap();
        assert_eq!(set, reparsed);
    }
}
