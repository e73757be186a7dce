use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::scene::{Annotation, Level};

/// Phrases that would give away where the answer is. Prompts must not
/// contain any of them (case-insensitive substring match).
pub const BANNED_PHRASES: [&str; 6] = ["left", "right", "top", "bottom", "corner", "coordinates"];

pub fn has_positional_cue(prompt: &str) -> bool {
    let lower = prompt.to_lowercase();
    BANNED_PHRASES.iter().any(|b| lower.contains(b))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Template {
    LineReading,
    LetterCount,
    WordRecognition,
}

impl Template {
    pub const ALL: [Template; 3] = [Template::LineReading, Template::LetterCount, Template::WordRecognition];

    /// Annotation level the question is about.
    pub fn level(self) -> Level {
        match self {
            Template::LineReading => Level::Line,
            Template::LetterCount => Level::Paragraph,
            Template::WordRecognition => Level::Word,
        }
    }
}

/// Case-sensitive count of `c` in `text`.
pub fn count_letter(text: &str, c: char) -> usize {
    text.chars().filter(|&x| x == c).count()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Question {
    pub template: Template,
    pub text: String,
    pub gold: String,
}

/// Builds a question about `target` whose answer is unambiguous among the
/// scene's `all` annotations. `None` if the template cannot single it out.
pub fn instantiate<R: Rng>(
    template: Template,
    target: &Annotation,
    all: &[Annotation],
    rng: &mut R,
) -> Option<Question> {
    if target.level != template.level() {
        return None;
    }
    let peers = || all.iter().filter(move |a| a.level == target.level);
    let (text, gold) = match template {
        Template::LineReading => {
            let mut words = target.text.split(' ');
            let first = words.next()?;
            words.next()?;
            let same = peers().filter(|l| l.text.split(' ').next() == Some(first)).count();
            if same != 1 {
                return None;
            }
            (
                format!("What does the line beginning with \"{first}\" say?"),
                target.text.clone(),
            )
        }
        Template::LetterCount => {
            let last = target.text.rsplit(' ').next()?;
            let same = peers().filter(|p| p.text.rsplit(' ').next() == Some(last)).count();
            if same != 1 {
                return None;
            }
            let mut letters: Vec<char> = target.text.chars().filter(|c| c.is_alphabetic()).collect();
            letters.sort_unstable();
            letters.dedup();
            let c = *letters.choose(rng)?;
            (
                format!("How many times does the letter \"{c}\" appear in the paragraph ending with \"{last}\"?"),
                count_letter(&target.text, c).to_string(),
            )
        }
        Template::WordRecognition => {
            let first = target.text.chars().next()?;
            let len = target.text.chars().count();
            let same = peers()
                .filter(|w| w.text.chars().next() == Some(first) && w.text.chars().count() == len)
                .count();
            if same != 1 {
                return None;
            }
            (
                format!("Which {len}-character word in the image starts with \"{first}\"?"),
                target.text.clone(),
            )
        }
    };
    Some(Question {
        template,
        text,
        gold,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::BBox;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ann(level: Level, text: &str) -> Annotation {
        Annotation {
            level,
            text: text.into(),
            bbox: BBox::new(0, 0, 1, 1).unwrap(),
        }
    }

    #[test]
    fn counting_is_case_sensitive() {
        assert_eq!(count_letter("a cat and a bat", 'a'), 5);
        assert_eq!(count_letter("Anna", 'a'), 1);
    }

    #[test]
    fn line_reading() {
        let all = [ann(Level::Line, "OPEN LATE"), ann(Level::Line, "BUS")];
        let q = instantiate(Template::LineReading, &all[0], &all, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(q.text, "What does the line beginning with \"OPEN\" say?");
        assert_eq!(q.gold, "OPEN LATE");
        // single-word lines would give the answer away
        assert!(instantiate(Template::LineReading, &all[1], &all, &mut ChaCha8Rng::seed_from_u64(0)).is_none());
    }

    #[test]
    fn ambiguous_targets_are_refused() {
        let all = [ann(Level::Line, "OPEN LATE"), ann(Level::Line, "OPEN DOOR")];
        assert!(instantiate(Template::LineReading, &all[0], &all, &mut ChaCha8Rng::seed_from_u64(0)).is_none());
        let words = [ann(Level::Word, "CAT"), ann(Level::Word, "CUP")];
        assert!(instantiate(Template::WordRecognition, &words[0], &words, &mut ChaCha8Rng::seed_from_u64(0)).is_none());
    }

    #[test]
    fn letter_count_gold_matches_oracle() {
        let all = [ann(Level::Paragraph, "BANANA BREAD"), ann(Level::Paragraph, "TEA")];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let q = instantiate(Template::LetterCount, &all[0], &all, &mut rng).unwrap();
            let letter = q.text.split('"').nth(1).unwrap().chars().next().unwrap();
            let expected = "BANANA BREAD".chars().filter(|&c| c == letter).count();
            assert_eq!(q.gold, expected.to_string());
            assert!(!has_positional_cue(&q.text));
        }
    }

    #[test]
    fn audit() {
        assert!(has_positional_cue("What is in the Top-left area?"));
        assert!(has_positional_cue("Give the COORDINATES"));
        assert!(!has_positional_cue("Which 4-character word in the image starts with \"B\"?"));
    }
}
