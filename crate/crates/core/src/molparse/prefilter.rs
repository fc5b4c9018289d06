use serde::{Deserialize, Serialize};

/// Why a string failed the textual prefilter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrefilterFailure {
    Empty,
    LeadingBondOrClose,
    UnbalancedParentheses,
    UnpairedRingClosure,
}

/// Cheap pairing check run before any graph is built: parentheses balance,
/// every ring label occurs an even number of times and the string does not
/// open with a bond or `)`.
///
/// Single pass, constant state: a depth counter and a parity bit per label.
pub fn syntactic_prefilter(s: &str) -> Result<(), PrefilterFailure> {
    let bytes = s.as_bytes();
    match bytes.first() {
        None => return Err(PrefilterFailure::Empty),
        Some(b'=' | b'#' | b')') => return Err(PrefilterFailure::LeadingBondOrClose),
        _ => {}
    }
    let mut depth: i64 = 0;
    let mut parity: u128 = 0;
    let mut i = 0;
    while i < bytes.len() {
        match bytes[i] {
            b'(' => depth += 1,
            b')' => {
                depth -= 1;
                if depth < 0 {
                    return Err(PrefilterFailure::UnbalancedParentheses);
                }
            }
            d @ b'0'..=b'9' => parity ^= 1 << (d - b'0'),
            b'%' => {
                // two-digit label %nn
                match (bytes.get(i + 1), bytes.get(i + 2)) {
                    (Some(a @ b'0'..=b'9'), Some(b @ b'0'..=b'9')) => {
                        let label = 10 + (a - b'0') as u32 * 10 + (b - b'0') as u32;
                        parity ^= 1 << label;
                        i += 2;
                    }
                    _ => return Err(PrefilterFailure::UnpairedRingClosure),
                }
            }
            _ => {}
        }
        i += 1;
    }
    if depth != 0 {
        return Err(PrefilterFailure::UnbalancedParentheses);
    }
    if parity != 0 {
        return Err(PrefilterFailure::UnpairedRingClosure);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(syntactic_prefilter("c1ccccc1"), Ok(()));
        assert_eq!(syntactic_prefilter("C1CC"), Err(PrefilterFailure::UnpairedRingClosure));
        assert_eq!(syntactic_prefilter("CC(C"), Err(PrefilterFailure::UnbalancedParentheses));
    }

    #[test]
    fn edge_cases() {
        assert_eq!(syntactic_prefilter(""), Err(PrefilterFailure::Empty));
        assert_eq!(syntactic_prefilter("=CC"), Err(PrefilterFailure::LeadingBondOrClose));
        assert_eq!(syntactic_prefilter(")C("), Err(PrefilterFailure::LeadingBondOrClose));
        assert_eq!(syntactic_prefilter("C)C(C"), Err(PrefilterFailure::UnbalancedParentheses));
        assert_eq!(syntactic_prefilter("C1CC2CC1C2"), Ok(()));
        assert_eq!(syntactic_prefilter("C1CC1C1CC1"), Ok(()));
        assert_eq!(syntactic_prefilter("C%12CC%12"), Ok(()));
        assert_eq!(syntactic_prefilter("C%1CC"), Err(PrefilterFailure::UnpairedRingClosure));
    }
}
