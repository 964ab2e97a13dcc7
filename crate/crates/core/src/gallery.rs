//! Named example systems.

use crate::error::{Error, Result};
use crate::fractal::{cantor_map, ifs_overlap_map, Similarity};
use crate::mvmap::{AffineBranch, MultiSystem};
use crate::scalar::Scalar;

fn branch<T: Scalar>(lo: (i64, i64), hi: (i64, i64), slope: (i64, i64), offset: (i64, i64)) -> AffineBranch<T> {
    AffineBranch::on(T::ratio(lo.0, lo.1), T::ratio(hi.0, hi.1), T::ratio(slope.0, slope.1), T::ratio(offset.0, offset.1))
        .expect("gallery domains are valid")
}

fn build<T: Scalar>(branches: Vec<AffineBranch<T>>) -> MultiSystem<T> {
    MultiSystem::uniform(branches).expect("gallery systems are valid")
}

/// `S(x) = {x, 1 − x}`.
pub fn example1<T: Scalar>() -> MultiSystem<T> {
    build(vec![branch((0, 1), (1, 1), (1, 1), (0, 1)), branch((0, 1), (1, 1), (-1, 1), (1, 1))])
}

/// `{2x, 1 − 2x}` on `[0, ½]`, `{2x − 1}` on `(½, 1]`.
pub fn example2<T: Scalar>() -> MultiSystem<T> {
    build(vec![
        branch((0, 1), (1, 2), (2, 1), (0, 1)),
        branch((0, 1), (1, 2), (-2, 1), (1, 1)),
        branch((1, 2), (1, 1), (2, 1), (-1, 1)),
    ])
}

/// `{3x/2}` on `[0, ⅓)`, both branches on `[⅓, ⅔]`, `{3x/2 − ½}` on `(⅔, 1]`.
pub fn example3<T: Scalar>() -> MultiSystem<T> {
    build(vec![branch((0, 1), (2, 3), (3, 2), (0, 1)), branch((1, 3), (1, 1), (3, 2), (-1, 2))])
}

/// Example 2 with the identity added as a third branch everywhere.
pub fn example4<T: Scalar>() -> MultiSystem<T> {
    build(vec![
        branch((0, 1), (1, 2), (2, 1), (0, 1)),
        branch((0, 1), (1, 2), (-2, 1), (1, 1)),
        branch((0, 1), (1, 1), (1, 1), (0, 1)),
        branch((1, 2), (1, 1), (2, 1), (-1, 1)),
    ])
}

/// The ergodic worked example, branch-identical to [`example2`].
pub fn example5<T: Scalar>() -> MultiSystem<T> {
    example2()
}

pub fn identity<T: Scalar>() -> MultiSystem<T> {
    build(vec![branch((0, 1), (1, 1), (1, 1), (0, 1))])
}

/// `x ↦ 2x mod 1` as two full branches.
pub fn doubling<T: Scalar>() -> MultiSystem<T> {
    build(vec![branch((0, 1), (1, 2), (2, 1), (0, 1)), branch((1, 2), (1, 1), (2, 1), (-1, 1))])
}

/// The five worked examples.
pub const NAMED: [(&str, &str); 5] = [
    ("example1", "S(x) = {x, 1-x}"),
    ("example2", "{2x, 1-2x} on [0,1/2], {2x-1} on (1/2,1]"),
    ("example3", "{3x/2} on [0,1/3), {3x/2, 3x/2-1/2} on [1/3,2/3], {3x/2-1/2} on (2/3,1]"),
    ("example4", "{2x, 1-2x, x} on [0,1/2], {2x-1, x} on (1/2,1]"),
    ("example5", "ergodic map, branch-identical to example2"),
];

/// Single-valued reference maps.
pub const AUXILIARY: [(&str, &str); 2] = [("identity", "S(x) = {x}"), ("doubling", "S(x) = {2x mod 1}")];

pub const FAMILIES: [(&str, &str); 2] = [
    ("cantor(p/q)", "Cantor-intersection map, alpha in [1/3, 2/3]"),
    ("ifs_overlap(r:s,...)", "overlap map of the similarities x -> r*x + s"),
];

fn parse_call<'a>(name: &'a str, family: &str) -> Option<&'a str> {
    let rest = name.strip_prefix(family)?;
    if let Some(arg) = rest.strip_prefix(':') {
        return Some(arg);
    }
    rest.strip_prefix('(')?.strip_suffix(')')
}

/// Looks up a gallery system by name, e.g. `example3`, `cantor(2/5)`,
/// `cantor:1/2` or `ifs_overlap(2/3:0,2/3:1/3)`.
pub fn by_name<T: Scalar>(name: &str) -> Result<MultiSystem<T>> {
    let name = name.trim();
    match name {
        "example1" => return Ok(example1()),
        "example2" => return Ok(example2()),
        "example3" => return Ok(example3()),
        "example4" => return Ok(example4()),
        "example5" => return Ok(example5()),
        "identity" => return Ok(identity()),
        "doubling" => return Ok(doubling()),
        _ => {}
    }
    if let Some(arg) = parse_call(name, "cantor") {
        return cantor_map(&T::parse_repr(arg)?);
    }
    if let Some(arg) = parse_call(name, "ifs_overlap") {
        let maps = arg
            .split(',')
            .map(|m| {
                let (r, s) = m
                    .split_once(':')
                    .ok_or_else(|| Error::Malformed(format!("similarity `{m}` is not `ratio:shift`")))?;
                Similarity::new(T::parse_repr(r)?, T::parse_repr(s)?)
            })
            .collect::<Result<Vec<_>>>()?;
        return ifs_overlap_map(&maps);
    }
    Err(Error::UnknownSystem(name.to_string()))
}
