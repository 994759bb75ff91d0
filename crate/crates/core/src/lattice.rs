//! Kagome geometry on finite tori and cylinders.
//!
//! Sites carry a cell coordinate `(m1, m2)` and a sublattice label. Inside a
//! cell the three orbitals sit at reduced coordinates
//!
//! ```text
//!   A = (0, 0),   B = (1/2, 1/2),   C = (0, 1/2)
//! ```
//!
//! with respect to primitive vectors `e1`, `e2` enclosing 120 degrees. All
//! displacements are stored in half-cell units (twice the reduced
//! coordinates) so they stay integral.
//!
//! Hexagon `h` is anchored at cell `m` and visits its six sites
//! counterclockwise, starting from the A site at its lower left:
//!
//! ```text
//!   1: A(m)   2: C(m - e2)   3: B(m - e2)   4: A(m + e1)   5: C(m + e1)   6: B(m)
//! ```
//!
//! Local positions `i` and `i + 3` are C2 partners about the hexagon centre.
//! Every NN, NNN and third-neighbour bond is generated from exactly one
//! hexagon as the pair `(i, i + 1)`, `(i, i + 2)` or `(i, i + 3)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sublattice offsets in half-cell units.
const SUBLATTICE_OFFSET: [[i64; 2]; 3] = [[0, 0], [1, 1], [0, 1]];

/// Hexagon member offsets in half-cell units relative to the anchor cell.
pub const HEXAGON_OFFSETS: [[i64; 2]; 6] = [[0, 0], [0, -1], [1, -1], [2, 0], [2, 1], [1, 1]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Boundary {
    #[serde(rename = "torus")]
    Torus,
    /// Open along `e1`, periodic along `e2`.
    #[serde(rename = "cylinder-open-a1")]
    Cylinder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
    C,
}

impl Sublattice {
    pub const ALL: [Sublattice; 3] = [Sublattice::A, Sublattice::B, Sublattice::C];

    pub fn ordinal(self) -> usize {
        self as usize
    }

    fn from_half_parity(x: i64, y: i64) -> Sublattice {
        match (x.rem_euclid(2), y.rem_euclid(2)) {
            (0, 0) => Sublattice::A,
            (1, 1) => Sublattice::B,
            (0, 1) => Sublattice::C,
            _ => unreachable!("no kagome site at half-cell parity ({x}, {y})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SiteIndex {
    pub cell: (usize, usize),
    pub sublattice: Sublattice,
    pub flat: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NeighborKind {
    #[serde(rename = "nn")]
    Nearest,
    #[serde(rename = "nnn")]
    NextNearest,
    #[serde(rename = "third")]
    ThirdInHexagon,
}

impl NeighborKind {
    pub const ALL: [NeighborKind; 3] = [
        NeighborKind::Nearest,
        NeighborKind::NextNearest,
        NeighborKind::ThirdInHexagon,
    ];

    /// Separation of the two hexagon positions joined by this bond.
    pub fn position_step(self) -> usize {
        match self {
            NeighborKind::Nearest => 1,
            NeighborKind::NextNearest => 2,
            NeighborKind::ThirdInHexagon => 3,
        }
    }
}

/// One bond instance. On the smallest tori the same unordered site pair can
/// occur twice (through different hexagons); each instance is kept, matching
/// the Bloch Hamiltonian on the corresponding momentum grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    /// Unwrapped displacement from `a` to `b` in half-cell units.
    pub disp: [i64; 2],
    /// Originating hexagon anchor cell (flat cell index `m1 * L2 + m2`).
    pub plaquette: usize,
    /// Local position of `a` inside the originating hexagon (0-based).
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hexagon {
    pub id: usize,
    pub anchor: (usize, usize),
    /// Sites at local positions 1..6 (stored 0-based).
    pub sites: [usize; 6],
}

#[derive(Debug, Clone)]
pub struct Lattice {
    l1: usize,
    l2: usize,
    boundary: Boundary,
    sites: Vec<SiteIndex>,
    hexagons: Vec<Hexagon>,
    nn: Vec<Bond>,
    nnn: Vec<Bond>,
    third: Vec<Bond>,
    /// For each site, the (hexagon id, 0-based local position) memberships.
    memberships: Vec<Vec<(usize, usize)>>,
}

/// Builds a kagome lattice of `l1 x l2` unit cells.
pub fn build_lattice(l1: usize, l2: usize, boundary: Boundary) -> Result<Lattice> {
    if l1 < 2 || l2 < 2 {
        return Err(Error::DegenerateSize { l1, l2 });
    }
    let mut sites = Vec::with_capacity(3 * l1 * l2);
    for m1 in 0..l1 {
        for m2 in 0..l2 {
            for sub in Sublattice::ALL {
                let flat = 3 * (m1 * l2 + m2) + sub.ordinal();
                sites.push(SiteIndex {
                    cell: (m1, m2),
                    sublattice: sub,
                    flat,
                });
            }
        }
    }

    let mut lattice = Lattice {
        l1,
        l2,
        boundary,
        sites,
        hexagons: Vec::new(),
        nn: Vec::new(),
        nnn: Vec::new(),
        third: Vec::new(),
        memberships: vec![Vec::new(); 3 * l1 * l2],
    };

    for m1 in 0..l1 {
        for m2 in 0..l2 {
            let plaquette = m1 * l2 + m2;
            let anchor = [2 * m1 as i64, 2 * m2 as i64];
            let unwrapped: Vec<[i64; 2]> = HEXAGON_OFFSETS
                .iter()
                .map(|o| [anchor[0] + o[0], anchor[1] + o[1]])
                .collect();
            let members: Vec<usize> = unwrapped.iter().map(|x| lattice.site_at_half(*x)).collect();
            let complete = match boundary {
                Boundary::Torus => true,
                Boundary::Cylinder => unwrapped
                    .iter()
                    .all(|x| x[0].div_euclid(2 * l1 as i64) == 0),
            };
            if complete {
                let id = lattice.hexagons.len();
                let mut six = [0usize; 6];
                six.copy_from_slice(&members);
                for (pos, &s) in six.iter().enumerate() {
                    lattice.memberships[s].push((id, pos));
                }
                lattice.hexagons.push(Hexagon {
                    id,
                    anchor: (m1, m2),
                    sites: six,
                });
            }
            for kind in NeighborKind::ALL {
                let step = kind.position_step();
                let count = if kind == NeighborKind::ThirdInHexagon { 3 } else { 6 };
                for p in 0..count {
                    let q = (p + step) % 6;
                    let (xa, xb) = (unwrapped[p], unwrapped[q]);
                    if boundary == Boundary::Cylinder
                        && xa[0].div_euclid(2 * l1 as i64) != xb[0].div_euclid(2 * l1 as i64)
                    {
                        continue;
                    }
                    let bond = Bond {
                        a: members[p],
                        b: members[q],
                        disp: [xb[0] - xa[0], xb[1] - xa[1]],
                        plaquette,
                        position: p,
                    };
                    match kind {
                        NeighborKind::Nearest => lattice.nn.push(bond),
                        NeighborKind::NextNearest => lattice.nnn.push(bond),
                        NeighborKind::ThirdInHexagon => lattice.third.push(bond),
                    }
                }
            }
        }
    }
    Ok(lattice)
}

impl Lattice {
    pub fn l1(&self) -> usize {
        self.l1
    }

    pub fn l2(&self) -> usize {
        self.l2
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_torus(&self) -> bool {
        self.boundary == Boundary::Torus
    }

    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn num_cells(&self) -> usize {
        self.l1 * self.l2
    }

    pub fn sites(&self) -> &[SiteIndex] {
        &self.sites
    }

    pub fn site(&self, flat: usize) -> &SiteIndex {
        &self.sites[flat]
    }

    pub fn flat_index(&self, m1: usize, m2: usize, sub: Sublattice) -> usize {
        3 * ((m1 % self.l1) * self.l2 + (m2 % self.l2)) + sub.ordinal()
    }

    pub fn hexagons(&self) -> &[Hexagon] {
        &self.hexagons
    }

    /// The six sites of hexagon `h` in local order 1..6.
    pub fn hexagon_sites(&self, h: usize) -> Result<[SiteIndex; 6]> {
        let hex = self.hexagons.get(h).ok_or(Error::InvalidHexagon {
            id: h,
            count: self.hexagons.len(),
        })?;
        Ok(hex.sites.map(|s| self.sites[s]))
    }

    /// Hexagon memberships of a site as (hexagon id, 0-based local position).
    pub fn memberships(&self, site: usize) -> &[(usize, usize)] {
        &self.memberships[site]
    }

    pub fn neighbor_pairs(&self, kind: NeighborKind) -> &[Bond] {
        match kind {
            NeighborKind::Nearest => &self.nn,
            NeighborKind::NextNearest => &self.nnn,
            NeighborKind::ThirdInHexagon => &self.third,
        }
    }

    /// All bond instances with their kind.
    pub fn all_bonds(&self) -> impl Iterator<Item = (NeighborKind, &Bond)> {
        NeighborKind::ALL
            .into_iter()
            .flat_map(move |k| self.neighbor_pairs(k).iter().map(move |b| (k, b)))
    }

    /// Position of a site in half-cell units inside the fundamental domain.
    pub fn half_position(&self, flat: usize) -> [i64; 2] {
        let s = &self.sites[flat];
        let o = SUBLATTICE_OFFSET[s.sublattice.ordinal()];
        [2 * s.cell.0 as i64 + o[0], 2 * s.cell.1 as i64 + o[1]]
    }

    /// Cartesian embedding with `e1 = (sqrt3/2, 1/2)` and `e2 = (-sqrt3/2, 1/2)`.
    pub fn cartesian(&self, flat: usize) -> [f64; 2] {
        let [x, y] = self.half_position(flat);
        let (r1, r2) = (x as f64 / 2.0, y as f64 / 2.0);
        let s3 = 3f64.sqrt() / 2.0;
        [s3 * (r1 - r2), 0.5 * (r1 + r2)]
    }

    /// Wraps an unwrapped half-cell coordinate back to a site of the torus.
    pub fn site_at_half(&self, x: [i64; 2]) -> usize {
        let sub = Sublattice::from_half_parity(x[0], x[1]);
        let o = SUBLATTICE_OFFSET[sub.ordinal()];
        let m1 = (x[0] - o[0]).div_euclid(2).rem_euclid(self.l1 as i64) as usize;
        let m2 = (x[1] - o[1]).div_euclid(2).rem_euclid(self.l2 as i64) as usize;
        self.flat_index(m1, m2, sub)
    }

    /// Number of times the segment from `a` along `disp` wraps each periodic
    /// direction.
    pub fn winding(&self, a: usize, disp: [i64; 2]) -> [i64; 2] {
        let x = self.half_position(a);
        [
            (x[0] + disp[0]).div_euclid(2 * self.l1 as i64),
            (x[1] + disp[1]).div_euclid(2 * self.l2 as i64),
        ]
    }

    /// Translates a site by whole cells.
    pub fn translate(&self, flat: usize, d1: i64, d2: i64) -> usize {
        let s = &self.sites[flat];
        let m1 = (s.cell.0 as i64 + d1).rem_euclid(self.l1 as i64) as usize;
        let m2 = (s.cell.1 as i64 + d2).rem_euclid(self.l2 as i64) as usize;
        self.flat_index(m1, m2, s.sublattice)
    }

    /// Hexagons sharing at least one site with `h`, excluding `h`.
    pub fn adjacent_hexagons(&self, h: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self.hexagons[h]
            .sites
            .iter()
            .flat_map(|&s| self.memberships[s].iter().map(|&(g, _)| g))
            .filter(|&g| g != h)
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Nearest-neighbour sites of `site`, one entry per NN bond instance.
    pub fn nn_neighbors(&self, site: usize) -> Vec<usize> {
        self.nn
            .iter()
            .filter_map(|b| {
                if b.a == site {
                    Some(b.b)
                } else if b.b == site {
                    Some(b.a)
                } else {
                    None
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Value {
        let sites: Vec<serde_json::Value> = self
            .sites
            .iter()
            .map(|s| {
                serde_json::json!({
                    "flat": s.flat,
                    "cell": [s.cell.0, s.cell.1],
                    "sublattice": s.sublattice,
                    "position": self.cartesian(s.flat),
                })
            })
            .collect();
        let pairs = |kind| -> Vec<[usize; 2]> {
            self.neighbor_pairs(kind).iter().map(|b| [b.a, b.b]).collect()
        };
        serde_json::json!({
            "L1": self.l1,
            "L2": self.l2,
            "boundary": self.boundary,
            "sites": sites,
            "hexagons": self.hexagons.iter().map(|h| h.sites.to_vec()).collect::<Vec<_>>(),
            "bonds": {
                "nn": pairs(NeighborKind::Nearest),
                "nnn": pairs(NeighborKind::NextNearest),
                "third": pairs(NeighborKind::ThirdInHexagon),
            },
        })
    }
}
