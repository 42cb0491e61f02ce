//! Built-in value domains for named slot kinds.

pub const PERSON_NAMES: &[&str] = &[
    "Rahim", "Karim", "Sikder", "Jamal", "Mina", "Raju", "Salma", "Hasan", "Nadia", "Farid",
    "Rina", "Tariq", "Ayesha", "Kamal", "Sumon", "Lina", "Babul", "Shirin", "Anis", "Popy",
    "Rafiq", "Tania", "Masud", "Jui",
];

/// (singular, plural)
pub const OBJECT_NOUNS: &[(&str, &str)] = &[
    ("apple", "apples"),
    ("banana", "bananas"),
    ("mango", "mangos"),
    ("orange", "oranges"),
    ("guava", "guavas"),
    ("lemon", "lemons"),
    ("pear", "pears"),
    ("plum", "plums"),
    ("peach", "peaches"),
    ("cherry", "cherries"),
    ("grape", "grapes"),
    ("papaya", "papayas"),
    ("lychee", "lychees"),
    ("coconut", "coconuts"),
    ("melon", "melons"),
    ("jackfruit", "jackfruits"),
];

pub const DIRECTIONS: &[&str] = &["north", "south", "east", "west"];

/// Alphabet for text-category codes.
pub const CODE_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";

pub fn plural_of(singular: &str) -> Option<&'static str> {
    OBJECT_NOUNS
        .iter()
        .find(|(s, _)| s.eq_ignore_ascii_case(singular))
        .map(|(_, p)| *p)
}
