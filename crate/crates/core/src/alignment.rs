//! Frame-level and lattice-level alignments and their collapse mappings.

use crate::error::{Error, Result};
use crate::vocab::{TokenId, TokenSeq};

/// One alignment label: a regular token or the blank.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Symbol {
    Token(TokenId),
    Blank,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlignmentKind {
    Ctc,
    Rnnt,
}

/// A label sequence over `V ∪ {blank}`.
///
/// CTC alignments have exactly one label per frame. Transducer alignments
/// have one blank per frame plus one label per emitted token.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Alignment {
    labels: Vec<Symbol>,
    kind: AlignmentKind,
}

impl Alignment {
    /// CTC alignment over `frames` frames.
    pub fn ctc(labels: Vec<Symbol>, frames: usize) -> Result<Self> {
        if labels.len() != frames {
            return Err(Error::usage(format!(
                "ctc alignment has {} labels for {frames} frames",
                labels.len()
            )));
        }
        Ok(Alignment {
            labels,
            kind: AlignmentKind::Ctc,
        })
    }

    /// Transducer alignment over `frames` frames: exactly `frames` blanks.
    pub fn rnnt(labels: Vec<Symbol>, frames: usize) -> Result<Self> {
        let blanks = labels.iter().filter(|s| **s == Symbol::Blank).count();
        if blanks != frames {
            return Err(Error::usage(format!(
                "rnnt alignment has {blanks} blanks for {frames} frames"
            )));
        }
        Ok(Alignment {
            labels,
            kind: AlignmentKind::Rnnt,
        })
    }

    pub fn kind(&self) -> AlignmentKind {
        self.kind
    }

    pub fn labels(&self) -> &[Symbol] {
        &self.labels
    }

    /// Applies the collapse mapping matching this alignment's kind.
    pub fn collapse(&self) -> TokenSeq {
        match self.kind {
            AlignmentKind::Ctc => ctc_collapse(&self.labels),
            AlignmentKind::Rnnt => rnnt_collapse(&self.labels),
        }
    }
}

/// Merges each run of identical tokens into one, then drops blanks.
/// A blank between two identical tokens keeps both.
pub fn ctc_collapse(labels: &[Symbol]) -> TokenSeq {
    let mut out = Vec::new();
    let mut prev = Symbol::Blank;
    for &s in labels {
        if let Symbol::Token(t) = s {
            if prev != s {
                out.push(t);
            }
        }
        prev = s;
    }
    out.into()
}

/// Drops blanks; repeats are kept.
pub fn rnnt_collapse(labels: &[Symbol]) -> TokenSeq {
    labels
        .iter()
        .filter_map(|s| match s {
            Symbol::Token(t) => Some(*t),
            Symbol::Blank => None,
        })
        .collect::<Vec<_>>()
        .into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use Symbol::{Blank as B, Token as T};

    const A: Symbol = T(0);
    const BB: Symbol = T(1);

    #[test]
    fn ctc_worked_example() {
        let z = [A, A, B, A, B, BB, BB];
        assert_eq!(ctc_collapse(&z), TokenSeq::from(vec![0, 0, 1]));
    }

    #[test]
    fn ctc_all_blank_is_empty() {
        assert!(ctc_collapse(&[B, B, B]).is_empty());
    }

    #[test]
    fn ctc_blank_separates_repeats() {
        assert_eq!(
            ctc_collapse(&[B, BB, BB, B, BB]),
            TokenSeq::from(vec![1, 1])
        );
    }

    #[test]
    fn rnnt_keeps_repeats() {
        assert_eq!(rnnt_collapse(&[A, B, A, B]), TokenSeq::from(vec![0, 0]));
        assert!(rnnt_collapse(&[B, B]).is_empty());
        assert_eq!(
            rnnt_collapse(&[BB, A, B, BB, B, B]),
            TokenSeq::from(vec![1, 0, 1])
        );
    }

    #[test]
    fn constructors_check_shape() {
        assert!(Alignment::ctc(vec![A, B], 3).is_err());
        assert!(Alignment::rnnt(vec![A, B], 2).is_err());
        let a = Alignment::rnnt(vec![A, B, A, B], 2).unwrap();
        assert_eq!(a.collapse(), TokenSeq::from(vec![0, 0]));
        let c = Alignment::ctc(vec![A, A, B], 3).unwrap();
        assert_eq!(c.collapse(), TokenSeq::from(vec![0]));
    }

    fn symbol() -> impl Strategy<Value = Symbol> {
        prop_oneof![Just(B), (0usize..3).prop_map(T)]
    }

    proptest! {
        #[test]
        fn ctc_output_has_no_blank_and_is_idempotent(z in prop::collection::vec(symbol(), 0..12)) {
            let y = ctc_collapse(&z);
            // Re-embed with separating blanks; collapsing again is a fixed point.
            let mut embedded = Vec::new();
            for &t in y.iter() {
                embedded.push(T(t));
                embedded.push(B);
            }
            prop_assert_eq!(ctc_collapse(&embedded), y);
        }

        #[test]
        fn rnnt_length_identity(z in prop::collection::vec(symbol(), 0..12)) {
            let blanks = z.iter().filter(|s| **s == B).count();
            prop_assert_eq!(rnnt_collapse(&z).len() + blanks, z.len());
        }
    }
}
