/// Gestational-week suffix codes, longest first so that matching picks the
/// longest suffix.
pub const TIMEPOINT_CODES: [(&str, u8); 7] = [
    ("XXVIII", 28),
    ("XXXII", 32),
    ("XXIV", 24),
    ("XXX", 30),
    ("XVI", 16),
    ("XII", 12),
    ("VI", 6),
];

/// Weeks of the sampling schedule in chronological order.
pub const WEEKS: [u8; 7] = [6, 12, 16, 24, 28, 30, 32];

/// Suffix code for a scheduled week.
pub fn week_code(week: u8) -> Option<&'static str> {
    TIMEPOINT_CODES.iter().find(|(_, w)| *w == week).map(|(c, _)| *c)
}

/// Splits a feature name into `(analyte, week)`.
///
/// Only the closed code set is recognized; names without a matching suffix
/// (or consisting solely of a code) have no week.
///
/// ```
/// use labrisk::dataio::decode_timepoint;
/// assert_eq!(decode_timepoint("CysCVI"), ("CysC".to_string(), Some(6)));
/// assert_eq!(decode_timepoint("Age"), ("Age".to_string(), None));
/// ```
pub fn decode_timepoint(name: &str) -> (String, Option<u8>) {
    for (code, week) in TIMEPOINT_CODES {
        if let Some(analyte) = name.strip_suffix(code) {
            if !analyte.is_empty() {
                return (analyte.to_string(), Some(week));
            }
        }
    }
    (name.to_string(), None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn table_examples() {
        assert_eq!(decode_timepoint("CysCVI"), ("CysC".into(), Some(6)));
        assert_eq!(decode_timepoint("UWBCXXX"), ("UWBC".into(), Some(30)));
        assert_eq!(decode_timepoint("NLRXXIV"), ("NLR".into(), Some(24)));
        assert_eq!(decode_timepoint("HbXXXII"), ("Hb".into(), Some(32)));
        assert_eq!(decode_timepoint("NeuXVI"), ("Neu".into(), Some(16)));
        assert_eq!(decode_timepoint("CrXXVIII"), ("Cr".into(), Some(28)));
        assert_eq!(decode_timepoint("WBCXII"), ("WBC".into(), Some(12)));
        assert_eq!(decode_timepoint("Age"), ("Age".into(), None));
    }

    #[test]
    fn bare_code_is_not_decoded() {
        assert_eq!(decode_timepoint("XXX"), ("XXX".into(), None));
    }

    #[test]
    fn codes_round_trip() {
        for w in WEEKS {
            let code = week_code(w).unwrap();
            assert_eq!(decode_timepoint(&format!("Plt{code}")), ("Plt".into(), Some(w)));
        }
        assert_eq!(week_code(7), None);
    }

    proptest! {
        // Analytes ending in a Roman letter can absorb part of a code
        // ("X" + "VI" reads as "XVI"), so the generator avoids them.
        #[test]
        fn decode_inverts_construction(analyte in "[A-Za-z0-9]{0,8}[a-zA-HJ-UWYZ0-9]", wi in 0usize..7) {
            let w = WEEKS[wi];
            let name = format!("{analyte}{}", week_code(w).unwrap());
            prop_assert_eq!(decode_timepoint(&name), (analyte, Some(w)));
        }
    }
}
