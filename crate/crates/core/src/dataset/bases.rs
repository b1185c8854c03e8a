//! The shipped base rods: structurally distinct specs whose size classes
//! are varied to form the corpus.

use serde::{Deserialize, Serialize};

use crate::taxonomy::{AttrRef, LinkingRodSpec, SizeClass};

/// A structural template plus the size attributes its variants enumerate.
/// Attributes not listed in `varied` keep the template's class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseRod {
    /// Three-letter id prefix, e.g. `AAJ`.
    pub code: String,
    pub spec: LinkingRodSpec,
    pub varied: Vec<AttrRef>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Shaft {
    Cuboid,
    Arc,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Holes {
    /// Equal inner diameters: first/second pivot hole.
    Equal,
    /// Distinct inner diameters: larger/smaller pivot hole.
    Distinct,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Extra {
    None,
    Rib,
    ShaftHole(&'static str),
}

fn template(shaft: Shaft, holes: Holes, extra: Extra, separate: bool) -> (LinkingRodSpec, Vec<AttrRef>) {
    use SizeClass::*;
    let mut spec = LinkingRodSpec::new().with_structure("link", "main structure", "binary link");
    let mut varied = Vec::new();
    match shaft {
        Shaft::Cuboid => {
            spec = spec
                .with_structure("shaft", "main structure", "cuboid")
                .with_size("shaft", "length", Medium)
                .with_size("shaft", "width", Medium)
                .with_size("shaft", "thickness", Medium);
            varied.extend([AttrRef::new("shaft", "width"), AttrRef::new("shaft", "thickness")]);
        }
        Shaft::Arc => {
            spec = spec
                .with_structure("shaft", "main structure", "arc-shaped vertical slab")
                .with_size("shaft", "radius", Large)
                .with_size("shaft", "length", Medium)
                .with_size("shaft", "thickness", Large)
                .with_structure("shaft", "cross section", "rectangle");
            varied.extend([AttrRef::new("shaft", "radius"), AttrRef::new("shaft", "thickness")]);
        }
    }
    varied.push(AttrRef::new("shaft", "length"));

    let (a, b, id_a, id_b) = match holes {
        Holes::Equal => ("first pivot hole", "second pivot hole", Large, Large),
        Holes::Distinct => ("larger pivot hole", "smaller pivot hole", Large, Small),
    };
    for (hole, id) in [(a, id_a), (b, id_b)] {
        spec = spec
            .with_size(hole, "inner diameter", id)
            .with_size(hole, "outer diameter", Large)
            .with_size(hole, "depth", Large);
        if separate {
            spec = spec.with_structure(hole, "type", "separate type");
        }
    }
    varied.extend([AttrRef::new(a, "depth"), AttrRef::new(b, "depth")]);
    if holes == Holes::Distinct {
        varied.push(AttrRef::new(a, "outer diameter"));
    }

    match extra {
        Extra::None => {}
        Extra::Rib => {
            spec = spec
                .with_structure("shaft", "additional feature", "inner edge convex")
                .with_size("inner edge convex", "thickness", Medium);
            varied.push(AttrRef::new("inner edge convex", "thickness"));
        }
        Extra::ShaftHole(direction) => {
            spec = spec
                .with_structure("shaft", "additional feature", "shaft hole")
                .with_structure("shaft hole", "direction", direction)
                .with_size("shaft hole", "diameter", Medium);
            varied.push(AttrRef::new("shaft hole", "diameter"));
        }
    }
    (spec, varied)
}

/// The 15 shipped bases `AAA`..`AAO`. `AAJ` is the all-large arc-slab rod
/// with equal pivot holes.
pub fn default_bases() -> Vec<BaseRod> {
    use Extra::*;
    use Holes::*;
    use Shaft::*;
    let table: [(Shaft, Holes, Extra, bool); 15] = [
        (Cuboid, Equal, None, false),
        (Arc, Distinct, None, false),
        (Cuboid, Equal, ShaftHole("z direction"), false),
        (Cuboid, Equal, Rib, false),
        (Cuboid, Distinct, None, false),
        (Cuboid, Distinct, ShaftHole("x direction"), false),
        (Cuboid, Equal, None, true),
        (Cuboid, Equal, ShaftHole("y direction"), false),
        (Arc, Equal, Rib, false),
        (Arc, Equal, None, false),
        (Arc, Equal, ShaftHole("z direction"), false),
        (Arc, Distinct, Rib, false),
        (Arc, Equal, None, true),
        (Cuboid, Distinct, Rib, true),
        (Arc, Distinct, ShaftHole("y direction"), false),
    ];
    table
        .iter()
        .enumerate()
        .map(|(i, &(shaft, holes, extra, separate))| {
            let (spec, varied) = template(shaft, holes, extra, separate);
            BaseRod { code: format!("AA{}", (b'A' + i as u8) as char), spec, varied }
        })
        .collect()
}
