//! Small reference taxonomies used by tests, demos, and the bundled
//! datasets.

use crate::outline::{outline_to_taxonomy, parse_outline};
use crate::taxonomy::{Entity, Taxonomy};

/// Aerial and grappling maneuvers, 14 entities over four levels.
pub const MANEUVER_OUTLINE: &str = "\
1. maneuver
1.1 straight-arm
1.2 flight maneuver
1.2.1 loop
1.2.1.1 inside loop
1.2.1.2 outside loop
1.2.2 slip
1.2.3 bank
1.2.3.1 chandelle
1.2.3.2 vertical bank
1.2.4 roll
1.2.4.1 barrel roll
1.2.4.2 snap roll
1.3 clinch";

/// Entity list for the maneuver taxonomy, in prompt order.
pub const MANEUVER_ENTITIES: [&str; 14] = [
    "outside loop",
    "roll",
    "vertical bank",
    "bank",
    "barrel roll",
    "flight maneuver",
    "straight-arm",
    "clinch",
    "chandelle",
    "inside loop",
    "loop",
    "slip",
    "snap roll",
    "maneuver",
];

/// Net-winged insects, 12 entities over four levels.
pub const NEUROPTERON_OUTLINE: &str = "\
1. neuropteron
1.1 snakefly
1.2 spongefly
1.3 lacewing
1.3.1 brown lacewing
1.3.2 green lacewing
1.3.2.1 goldeneye
1.4 ant lion
1.5 dobson
1.6 alderfly
1.7 fish fly
1.8 mantispid";

pub const NEUROPTERON_ENTITIES: [&str; 12] = [
    "ant lion",
    "neuropteron",
    "snakefly",
    "fish fly",
    "brown lacewing",
    "green lacewing",
    "goldeneye",
    "alderfly",
    "lacewing",
    "spongefly",
    "mantispid",
    "dobson",
];

/// Eating utensils, 14 entities over three levels.
pub const CUTLERY_OUTLINE: &str = "\
1. cutlery
1.1 spoon
1.1.1 teaspoon
1.1.2 tablespoon
1.1.3 soupspoon
1.1.4 tea maker
1.2 fork
1.2.1 dessert fork
1.2.2 carving fork
1.3 table knife
1.3.1 fish knife
1.3.2 butter knife
1.3.3 steak knife
1.3.4 case knife";

pub const CUTLERY_ENTITIES: [&str; 14] = [
    "fish knife",
    "spoon",
    "carving fork",
    "tea maker",
    "cutlery",
    "butter knife",
    "teaspoon",
    "table knife",
    "dessert fork",
    "steak knife",
    "soupspoon",
    "fork",
    "tablespoon",
    "case knife",
];

fn from_outline(text: &str) -> Taxonomy {
    let (outline, _) = parse_outline(text).expect("fixture outline parses");
    outline_to_taxonomy(&outline).expect("fixture outline is a tree")
}

fn entities(names: &[&str]) -> Vec<Entity> {
    names
        .iter()
        .map(|n| Entity::new(n).expect("fixture names are non-empty"))
        .collect()
}

pub fn maneuver() -> Taxonomy {
    from_outline(MANEUVER_OUTLINE)
}

pub fn maneuver_entities() -> Vec<Entity> {
    entities(&MANEUVER_ENTITIES)
}

pub fn neuropteron() -> Taxonomy {
    from_outline(NEUROPTERON_OUTLINE)
}

pub fn neuropteron_entities() -> Vec<Entity> {
    entities(&NEUROPTERON_ENTITIES)
}

pub fn cutlery() -> Taxonomy {
    from_outline(CUTLERY_OUTLINE)
}

pub fn cutlery_entities() -> Vec<Entity> {
    entities(&CUTLERY_ENTITIES)
}
