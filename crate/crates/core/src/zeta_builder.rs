//! The leveling construction over a finite lattice window.
//!
//! `Omega_n` grows from `Omega_0 = {0}` by one orbit step
//! (`y -> g y`, `y -> x + y + x'` for `g` in `E_n` and `x, x'` in `F_n`) plus
//! the defect set `D_n`, all intersected with the window. The level of `y` is
//! the first `n` with `y` in `Omega_n`, and `zeta(y)` averages the first
//! `l(y)` members of the family.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::farey_walk::Variant;
use crate::fast::{self, FastMeasure, Frac, Mat};
use crate::group_measures::{rational_text, GroupMeasure};
use crate::modular_group::{word_ball, GroupElement, LatticeVector, PslClass};
use crate::witness;

/// Walk length used for the `n`-th family member: `zeta_n = mu_{steps(n)}`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WalkSchedule {
    /// `steps(n) = n`.
    Identity,
    /// `steps(n) = c n^2`.
    Quadratic(u32),
}

impl WalkSchedule {
    pub fn steps(self, n: usize) -> usize {
        match self {
            WalkSchedule::Identity => n,
            WalkSchedule::Quadratic(c) => c as usize * n * n,
        }
    }
}

impl fmt::Display for WalkSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            WalkSchedule::Identity => f.write_str("identity"),
            WalkSchedule::Quadratic(c) => write!(f, "quadratic:{c}"),
        }
    }
}

impl FromStr for WalkSchedule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        if s == "identity" {
            return Ok(WalkSchedule::Identity);
        }
        s.strip_prefix("quadratic:")
            .and_then(|c| c.parse::<u32>().ok())
            .filter(|&c| c > 0)
            .map(WalkSchedule::Quadratic)
            .ok_or_else(|| Error::Parse(format!("unknown schedule {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LevelConfig {
    /// Window `‖y‖∞ <= radius`.
    pub radius: i64,
    /// Interior is `0 < ‖y‖∞ <= radius - margin`.
    pub margin: i64,
    pub n_max: u8,
    pub family: Variant,
    pub schedule: WalkSchedule,
}

impl LevelConfig {
    /// Default margin keeps `g y` (`g` in `E_1`) and `y + a` (`a` in the box
    /// of radius 2) inside the window for interior `y`.
    pub fn new(radius: i64, n_max: u8, family: Variant) -> Self {
        LevelConfig {
            radius,
            margin: default_margin(radius),
            n_max,
            family,
            schedule: WalkSchedule::Identity,
        }
    }

    pub fn interior_radius(&self) -> i64 {
        self.radius - self.margin
    }

    pub fn steps(&self, n: usize) -> usize {
        self.schedule.steps(n)
    }
}

pub fn default_margin(radius: i64) -> i64 {
    radius - (radius - 2) / 2
}

pub fn enumerate_e(n: usize) -> Vec<PslClass> {
    word_ball(n).iter().cloned().collect()
}

/// The box `‖a‖∞ <= n`, rows by `m` then `n`.
pub fn enumerate_f(n: i64) -> Vec<LatticeVector> {
    box_offsets(n)
        .into_iter()
        .map(|(m, k)| LatticeVector::new(m, k))
        .collect()
}

pub fn box_offsets(n: i64) -> Vec<(i64, i64)> {
    let mut out = Vec::with_capacity(((2 * n + 1) * (2 * n + 1)) as usize);
    for m in -n..=n {
        for k in -n..=n {
            out.push((m, k));
        }
    }
    out
}

/// Number of `(x, x')` in `F_1 x F_1` with `x + x' = a`.
pub fn pair_multiplicity(a: (i64, i64)) -> u64 {
    let one = |t: i64| (3 - t.abs()).max(0) as u64;
    one(a.0) * one(a.1)
}

fn fast_ball(n: usize) -> Vec<Mat> {
    word_ball(n)
        .iter()
        .map(|g| fast::from_element(g.representative()))
        .collect()
}

const UNSET: u8 = u8::MAX;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MarkMode {
    Saturated,
    Sources,
    Targets,
}

impl fmt::Display for MarkMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MarkMode::Saturated => "saturated",
            MarkMode::Sources => "sources",
            MarkMode::Targets => "targets",
        })
    }
}

/// What one level of the recursion did.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LevelLog {
    pub n: u8,
    pub mode: MarkMode,
    pub orbit_marked: u64,
    /// Orbit images that left the window; only counted when iterating sources.
    pub exits: Option<u64>,
    pub defect_marked: u64,
    pub omega_size: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LevelTable {
    config: LevelConfig,
    levels: Vec<u8>,
    log: Vec<LevelLog>,
}

/// `zeta_n` at a lattice point through the fixed-width kernel.
fn zeta_fast(y: (i64, i64), steps: usize, family: Variant) -> FastMeasure {
    fast::mu(y.0 as i128, y.1 as i128, steps, family)
}

fn act(g: &Mat, y: (i64, i64)) -> (i64, i64) {
    let (m, n) = fast::act(g, (y.0 as i128, y.1 as i128));
    (m as i64, n as i64)
}

/// Is `max_g ‖zeta(g y) - g zeta(y)‖ + max_a ‖zeta(y + a) - zeta(y)‖ >= 1/n`?
fn in_defect_set(
    y: (i64, i64),
    n: usize,
    steps: usize,
    family: Variant,
    e: &[Mat],
    sums: &[(i64, i64)],
) -> bool {
    let here = zeta_fast(y, steps, family);
    let n = n as u128;
    let mut best_a = Frac::ZERO;
    for g in e {
        let d = zeta_fast(act(g, y), steps, family).l1(&here.translate(g));
        if d > best_a {
            best_a = d;
            if best_a.at_least_inverse(n) {
                return true;
            }
        }
    }
    let mut best_b = Frac::ZERO;
    for a in sums {
        let z = (y.0 + a.0, y.1 + a.1);
        if z == (0, 0) {
            continue;
        }
        let d = zeta_fast(z, steps, family).l1(&here);
        if d > best_b {
            best_b = d;
            if (best_a + best_b).at_least_inverse(n) {
                return true;
            }
        }
    }
    false
}

/// Windowed `D_n(g; x, x')` for one triple, through the reference arithmetic.
pub fn compute_d(
    n: usize,
    g: &GroupElement,
    x: &LatticeVector,
    x1: &LatticeVector,
    radius: i64,
    family: Variant,
    schedule: WalkSchedule,
) -> Vec<LatticeVector> {
    let threshold = BigRational::new(1.into(), BigInt::from(n));
    let steps = schedule.steps(n);
    let a = x.add(x1);
    box_offsets(radius)
        .into_par_iter()
        .filter_map(|(m, k)| {
            let y = LatticeVector::new(m, k);
            if y.is_zero() || y.add(&a).is_zero() {
                return None;
            }
            let d = witness::pair_defect(g, x, x1, &y, steps, family).ok()?;
            (d >= threshold).then_some(y)
        })
        .collect()
}

impl LevelTable {
    pub fn config(&self) -> &LevelConfig {
        &self.config
    }

    pub fn log(&self) -> &[LevelLog] {
        &self.log
    }

    fn side(&self) -> i64 {
        2 * self.config.radius + 1
    }

    fn index(&self, y: (i64, i64)) -> Option<usize> {
        let r = self.config.radius;
        if y.0.abs() > r || y.1.abs() > r {
            return None;
        }
        Some(((y.0 + r) * self.side() + (y.1 + r)) as usize)
    }

    fn point(&self, i: usize) -> (i64, i64) {
        let r = self.config.radius;
        let side = self.side();
        ((i as i64) / side - r, (i as i64) % side - r)
    }

    /// `Some(l)` inside the table; `None` for points beyond `n_max` or outside
    /// the window.
    pub fn level(&self, y: (i64, i64)) -> Option<u8> {
        self.index(y)
            .map(|i| self.levels[i])
            .filter(|&l| l != UNSET)
    }

    /// Level with "beyond the table" read as `n_max + 1`; `None` outside the window.
    pub fn level_or_beyond(&self, y: (i64, i64)) -> Option<u8> {
        self.index(y).map(|i| {
            let l = self.levels[i];
            if l == UNSET {
                self.config.n_max + 1
            } else {
                l
            }
        })
    }

    pub fn in_interior(&self, y: (i64, i64)) -> bool {
        let h = y.0.abs().max(y.1.abs());
        h > 0 && h <= self.config.interior_radius()
    }

    /// Points of `Omega_n` in the window.
    pub fn omega(&self, n: u8) -> Vec<(i64, i64)> {
        (0..self.levels.len())
            .filter(|&i| self.levels[i] <= n)
            .map(|i| self.point(i))
            .collect()
    }

    pub fn interior_points(&self) -> Vec<(i64, i64)> {
        let r = self.config.interior_radius();
        box_offsets(r)
            .into_iter()
            .filter(|&y| y != (0, 0))
            .collect()
    }

    /// Histogram of interior levels, beyond-table as `n_max + 1`.
    pub fn interior_histogram(&self) -> BTreeMap<u8, u64> {
        let mut out = BTreeMap::new();
        for y in self.interior_points() {
            *out.entry(self.level_or_beyond(y).unwrap()).or_insert(0) += 1;
        }
        out
    }

    /// Writes the versioned text form: header then `m n l` for every point
    /// with a level in the table, sorted by `m` then `n`.
    pub fn write_to<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        out.write_all(self.header().as_bytes())?;
        let mut line = String::new();
        for (i, &l) in self.levels.iter().enumerate() {
            if l == UNSET {
                continue;
            }
            let (m, n) = self.point(i);
            line.clear();
            let _ = writeln!(line, "{m} {n} {l}");
            out.write_all(line.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ascii")
    }

    /// SHA-256 of the text form, hex encoded.
    pub fn digest(&self) -> String {
        struct Hasher(Sha256);
        impl std::io::Write for Hasher {
            fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
                self.0.update(buf);
                Ok(buf.len())
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        let mut h = Hasher(Sha256::new());
        self.write_to(&mut h).expect("hashing never fails");
        h.0.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }

    fn header(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        let _ = writeln!(s, "# corona-witness level table v1");
        let _ = writeln!(s, "# box {}", c.radius);
        let _ = writeln!(s, "# margin {}", c.margin);
        let _ = writeln!(s, "# nmax {}", c.n_max);
        let _ = writeln!(s, "# family {}", c.family);
        let _ = writeln!(s, "# schedule {}", c.schedule);
        let _ = writeln!(
            s,
            "# exhaustion E_n=psl-word-ball{{S,T,T^-1}}(n) F_n=linf-box(n)"
        );
        let _ = writeln!(s, "# zeta0 equals zeta1");
        for e in &self.log {
            let exits = e.exits.map_or("unknown".to_string(), |x| x.to_string());
            let _ = writeln!(
                s,
                "# level {} mode {} orbit {} exits {} defect {} omega {}",
                e.n, e.mode, e.orbit_marked, exits, e.defect_marked, e.omega_size
            );
        }
        s
    }

    /// Parses the text form back.
    pub fn read(text: &str) -> Result<LevelTable> {
        let bad = |what: &str| Error::LevelTable(what.to_string());
        let mut lines = text.lines().peekable();
        if lines.next() != Some("# corona-witness level table v1") {
            return Err(bad("missing version line"));
        }
        let mut field = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| bad("truncated header"))?;
            line.strip_prefix(&format!("# {key} "))
                .map(str::to_string)
                .ok_or_else(|| bad(&format!("expected {key}")))
        };
        let num = |s: String| s.parse::<i64>().map_err(|_| bad("bad number"));
        let radius = num(field("box")?)?;
        let margin = num(field("margin")?)?;
        let n_max = u8::try_from(num(field("nmax")?)?).map_err(|_| bad("bad nmax"))?;
        let family: Variant = field("family")?.parse()?;
        let schedule: WalkSchedule = field("schedule")?.parse()?;
        field("exhaustion")?;
        field("zeta0")?;
        let config = LevelConfig {
            radius,
            margin,
            n_max,
            family,
            schedule,
        };
        let side = (2 * radius + 1) as usize;
        let mut table = LevelTable {
            config,
            levels: vec![UNSET; side * side],
            log: Vec::new(),
        };
        for line in lines {
            if let Some(rest) = line.strip_prefix("# level ") {
                let f: Vec<&str> = rest.split(' ').collect();
                if f.len() != 11 {
                    return Err(bad("bad level log line"));
                }
                let n64 = |s: &str| s.parse::<u64>().map_err(|_| bad("bad log number"));
                let mode = match f[2] {
                    "saturated" => MarkMode::Saturated,
                    "sources" => MarkMode::Sources,
                    "targets" => MarkMode::Targets,
                    _ => return Err(bad("bad mode")),
                };
                table.log.push(LevelLog {
                    n: f[0].parse().map_err(|_| bad("bad level"))?,
                    mode,
                    orbit_marked: n64(f[4])?,
                    exits: if f[6] == "unknown" {
                        None
                    } else {
                        Some(n64(f[6])?)
                    },
                    defect_marked: n64(f[8])?,
                    omega_size: n64(f[10])?,
                });
                continue;
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(bad("expected `m n l`"));
            }
            let m = num(parts[0].to_string())?;
            let n = num(parts[1].to_string())?;
            let l = u8::try_from(num(parts[2].to_string())?).map_err(|_| bad("bad level"))?;
            if l > n_max {
                return Err(bad("level above nmax"));
            }
            let i = table
                .index((m, n))
                .ok_or_else(|| bad("point outside box"))?;
            table.levels[i] = l;
        }
        Ok(table)
    }

    /// `zeta(y)`: the average of `zeta_0, ..., zeta_{l(y)-1}` with `zeta_0 = zeta_1`.
    pub fn zeta(&self, y: &LatticeVector) -> Result<GroupMeasure> {
        let l = self.known_level(y)? as usize;
        let c = &self.config;
        let members: Vec<GroupMeasure> = (0..l)
            .map(|k| witness::zeta_n(y, c.steps(k.max(1)), c.family))
            .collect::<Result<_>>()?;
        GroupMeasure::average(&members)
    }

    fn known_level(&self, y: &LatticeVector) -> Result<u8> {
        let unknown = || Error::LevelUnknown(y.m.to_string(), y.n.to_string());
        if y.is_zero() {
            return Err(Error::ExcludedPoint("y = 0"));
        }
        let p = (
            i64::try_from(&y.m).map_err(|_| unknown())?,
            i64::try_from(&y.n).map_err(|_| unknown())?,
        );
        self.level(p).ok_or_else(unknown)
    }

    /// `‖g zeta(y) - zeta(g y)‖ + ‖zeta(x + y + x') - zeta(y)‖`.
    pub fn epsilon(
        &self,
        g: &GroupElement,
        x: &LatticeVector,
        x1: &LatticeVector,
        y: &LatticeVector,
    ) -> Result<BigRational> {
        let here = self.zeta(y)?;
        let moved = self.zeta(&g.act_lattice(y))?;
        let shifted = self.zeta(&y.add(x).add(x1))?;
        Ok(here.translate(g).l1_distance(&moved) + shifted.l1_distance(&here))
    }

    fn zeta_fast(&self, y: (i64, i64)) -> Option<FastMeasure> {
        let l = self.level(y)? as usize;
        if y == (0, 0) {
            return None;
        }
        let c = &self.config;
        if l == 1 {
            return Some(zeta_fast(y, c.steps(1), c.family));
        }
        let members: Vec<FastMeasure> = (0..l)
            .map(|k| zeta_fast(y, c.steps(k.max(1)), c.family))
            .collect();
        Some(FastMeasure::average(&members))
    }
}

/// Runs the recursion for `n = 1..=n_max`.
pub fn build_levels(config: LevelConfig) -> Result<LevelTable> {
    if config.radius < 2 {
        return Err(Error::WindowTooSmall(config.radius.max(0) as u64));
    }
    assert!(config.n_max >= 1, "build_levels needs n_max >= 1");
    assert!(config.n_max < UNSET, "n_max too large");
    let side = (2 * config.radius + 1) as usize;
    let mut table = LevelTable {
        config,
        levels: vec![UNSET; side * side],
        log: Vec::new(),
    };
    let origin = table.index((0, 0)).unwrap();
    table.levels[origin] = 0;
    let ball = word_ball(config.n_max as usize);
    for n in 1..=config.n_max {
        let e: Vec<Mat> = ball
            .truncate(n as usize)
            .iter()
            .map(|g| fast::from_element(g.representative()))
            .collect();
        let sums = box_offsets(2 * n as i64);
        let prev = n - 1;
        let unset = table.levels.iter().filter(|&&l| l == UNSET).count();
        let sources = table.levels.len() - unset;

        let (mode, marked, exits): (MarkMode, Vec<usize>, Option<u64>) = if unset == 0 {
            (MarkMode::Saturated, Vec::new(), None)
        } else if sources <= unset {
            let per_source: Vec<(Vec<usize>, u64)> = (0..table.levels.len())
                .into_par_iter()
                .filter(|&i| table.levels[i] <= prev)
                .map(|i| {
                    let y = table.point(i);
                    let mut hits = Vec::new();
                    let mut out = 0u64;
                    let images = e
                        .iter()
                        .map(|g| act(g, y))
                        .chain(sums.iter().map(|a| (y.0 + a.0, y.1 + a.1)));
                    for z in images {
                        match table.index(z) {
                            Some(j) if table.levels[j] == UNSET => hits.push(j),
                            Some(_) => {}
                            None => out += 1,
                        }
                    }
                    (hits, out)
                })
                .collect();
            let exits = per_source.iter().map(|(_, o)| o).sum();
            let mut hits: Vec<usize> = per_source.into_iter().flat_map(|(h, _)| h).collect();
            hits.sort_unstable();
            hits.dedup();
            (MarkMode::Sources, hits, Some(exits))
        } else {
            let hits: Vec<usize> = (0..table.levels.len())
                .into_par_iter()
                .filter(|&i| table.levels[i] == UNSET)
                .filter(|&i| {
                    let z = table.point(i);
                    let from_prev = |w: (i64, i64)| matches!(table.index(w), Some(j) if table.levels[j] <= prev);
                    e.iter().any(|g| from_prev(act(g, z)))
                        || sums.iter().any(|a| from_prev((z.0 - a.0, z.1 - a.1)))
                })
                .collect();
            (MarkMode::Targets, hits, None)
        };
        for &i in &marked {
            table.levels[i] = n;
        }

        let steps = config.steps(n as usize);
        let in_d: Vec<usize> = (0..table.levels.len())
            .into_par_iter()
            .filter(|&i| table.levels[i] == UNSET)
            .filter(|&i| in_defect_set(table.point(i), n as usize, steps, config.family, &e, &sums))
            .collect();
        for &i in &in_d {
            table.levels[i] = n;
        }
        let omega_size = table.levels.iter().filter(|&&l| l <= n).count() as u64;
        table.log.push(LevelLog {
            n,
            mode,
            orbit_marked: marked.len() as u64,
            exits,
            defect_marked: in_d.len() as u64,
            omega_size,
        });
    }
    Ok(table)
}

/// Outcome of the structural check `pair_defect < 1/n` below the level.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StructureReport {
    /// `(y, n)` pairs with `l(y) > n >= 1` that were examined.
    pub pairs: u64,
    /// Individual `(g, x, x')` evaluations those pairs stand for.
    pub triples: u64,
    pub violations: Vec<String>,
}

/// For interior `y` with `l(y) > n >= 1` and every `(g, x, x')` in
/// `E_1 x F_1 x F_1`, checks `pair_defect < 1/n` with the reference
/// arithmetic.
pub fn check_structure(table: &LevelTable) -> StructureReport {
    let c = *table.config();
    let e1 = enumerate_e(1);
    let sums = box_offsets(2);
    let jobs: Vec<((i64, i64), usize)> = table
        .interior_points()
        .into_iter()
        .flat_map(|y| {
            let l = table.level_or_beyond(y).unwrap() as usize;
            (1..l.min(c.n_max as usize + 1)).map(move |n| (y, n))
        })
        .collect();
    let triples_per_pair: u64 = (e1.len() * 81) as u64;
    let violations: Vec<String> = jobs
        .par_iter()
        .filter_map(|&(y, n)| {
            let yv = LatticeVector::new(y.0, y.1);
            let steps = c.steps(n);
            let a_max = e1
                .iter()
                .map(|g| witness::group_defect(g.representative(), &yv, steps, c.family).unwrap())
                .max()
                .unwrap();
            let b_max = sums
                .iter()
                .filter(|a| (y.0 + a.0, y.1 + a.1) != (0, 0))
                .map(|a| {
                    witness::shift_defect(&LatticeVector::new(a.0, a.1), &yv, steps, c.family)
                        .unwrap()
                })
                .max()
                .unwrap_or_else(BigRational::zero);
            let total = a_max + b_max;
            let threshold = BigRational::new(1.into(), BigInt::from(n));
            (total >= threshold)
                .then(|| format!("y=({},{}) n={n} defect={}", y.0, y.1, rational_text(&total)))
        })
        .collect();
    StructureReport {
        pairs: jobs.len() as u64,
        triples: jobs.len() as u64 * triples_per_pair,
        violations,
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ShiftReport {
    pub checked: u64,
    pub violations: Vec<String>,
}

/// `|l(g y) - l(y)| <= 1` and `|l(y + a) - l(y)| <= 1` for interior `y` with
/// `l(y) > 1`, `g` in `E_1` and `a = x + x'`.
pub fn check_level_shift(table: &LevelTable) -> ShiftReport {
    let e1 = fast_ball(1);
    let sums = box_offsets(2);
    let results: Vec<(u64, Vec<String>)> = table
        .interior_points()
        .par_iter()
        .filter_map(|&y| {
            let ly = table.level_or_beyond(y).unwrap();
            if ly <= 1 {
                return None;
            }
            let mut checked = 0u64;
            let mut bad = Vec::new();
            let images = e1
                .iter()
                .map(|g| act(g, y))
                .chain(sums.iter().map(|a| (y.0 + a.0, y.1 + a.1)));
            for z in images {
                if z == (0, 0) {
                    continue;
                }
                let lz = table
                    .level_or_beyond(z)
                    .expect("interior images stay in the window");
                checked += 1;
                if ly.abs_diff(lz) > 1 {
                    bad.push(format!(
                        "y=({},{}) l={ly} image=({},{}) l={lz}",
                        y.0, y.1, z.0, z.1
                    ));
                }
            }
            Some((checked, bad))
        })
        .collect();
    ShiftReport {
        checked: results.iter().map(|r| r.0).sum(),
        violations: results.into_iter().flat_map(|r| r.1).collect(),
    }
}

/// Largest `epsilon` for one `(g, a)` within one cohort, with the smallest
/// maximizing `y`.
#[derive(Clone, Copy, Debug)]
struct Extreme {
    value: Frac,
    at: (i64, i64),
}

impl Extreme {
    fn merge(self, other: Extreme) -> Extreme {
        match self.value.cmp(&other.value) {
            std::cmp::Ordering::Greater => self,
            std::cmp::Ordering::Less => other,
            std::cmp::Ordering::Equal => {
                if self.at <= other.at {
                    self
                } else {
                    other
                }
            }
        }
    }
}

#[derive(Clone, Debug, Default)]
struct ScanAcc {
    /// Indexed by `(level, g index, a index)`, flattened.
    extremes: Vec<Option<Extreme>>,
    /// `level -> value -> multiplicity` over all `(y, g, x, x')`.
    hist: BTreeMap<u8, BTreeMap<Frac, u64>>,
    skipped: u64,
}

impl ScanAcc {
    fn merge(mut self, other: ScanAcc) -> ScanAcc {
        if self.extremes.len() < other.extremes.len() {
            self.extremes.resize(other.extremes.len(), None);
        }
        for (mine, theirs) in self.extremes.iter_mut().zip(other.extremes) {
            if let Some(v) = theirs {
                *mine = Some(mine.map_or(v, |e| e.merge(v)));
            }
        }
        for (l, h) in other.hist {
            let mine = self.hist.entry(l).or_default();
            for (v, c) in h {
                *mine.entry(v).or_insert(0) += c;
            }
        }
        self.skipped += other.skipped;
        self
    }
}

/// One CSV row: the cohort maximum of `epsilon` for one triple.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EpsilonRow {
    pub g: String,
    pub x: (i64, i64),
    pub x1: (i64, i64),
    pub y: (i64, i64),
    pub level: u8,
    pub eps: (u128, u128),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CohortStats {
    pub level: u8,
    pub count: u64,
    pub min: String,
    pub median: String,
    pub max: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct EpsilonScan {
    pub family: Variant,
    pub rows: Vec<EpsilonRow>,
    pub cohorts: Vec<CohortStats>,
    /// Interior points whose level, or a needed neighbour's level, is beyond the table.
    pub skipped: u64,
}

fn frac_text(f: Frac) -> String {
    let (n, d) = f.key();
    format!("{n}/{d}")
}

/// `(g, x, x')` as written in the CSV.
pub type TripleKey = (String, (i64, i64), (i64, i64));

impl EpsilonScan {
    /// Per-triple cohort maxima in increasing level order.
    pub fn maxima_by_triple(&self) -> BTreeMap<TripleKey, Vec<(u8, Frac)>> {
        let mut out: BTreeMap<_, Vec<(u8, Frac)>> = BTreeMap::new();
        for r in &self.rows {
            out.entry((r.g.clone(), r.x, r.x1))
                .or_default()
                .push((r.level, Frac::new(r.eps.0, r.eps.1)));
        }
        for v in out.values_mut() {
            v.sort_by_key(|e| e.0);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("family,g,x,x1',y_m,y_n,l,eps_num,eps_den\n");
        for r in &self.rows {
            let _ = writeln!(
                s,
                "{},\"{}\",\"({},{})\",\"({},{})\",{},{},{},{},{}",
                self.family,
                r.g,
                r.x.0,
                r.x.1,
                r.x1.0,
                r.x1.1,
                r.y.0,
                r.y.1,
                r.level,
                r.eps.0,
                r.eps.1
            );
        }
        s
    }
}

/// `epsilon` over every interior point and every `(g, x, x')` in
/// `E_1 x F_1 x F_1`, through the fixed-width kernel.
pub fn epsilon_scan(table: &LevelTable) -> EpsilonScan {
    let e1_classes = enumerate_e(1);
    let e1: Vec<Mat> = e1_classes
        .iter()
        .map(|g| fast::from_element(g.representative()))
        .collect();
    let sums = box_offsets(2);
    let mult: Vec<u64> = sums.iter().map(|&a| pair_multiplicity(a)).collect();
    let r = table.config().interior_radius();
    let acc = (-r..=r)
        .into_par_iter()
        .flat_map_iter(|m| (-r..=r).map(move |n| (m, n)).filter(|&y| y != (0, 0)))
        .fold(ScanAcc::default, |mut acc, y| {
            let Some(ly) = table.level(y) else {
                acc.skipped += 1;
                return acc;
            };
            let here = table.zeta_fast(y).unwrap();
            let mut group = Vec::with_capacity(e1.len());
            for g in &e1 {
                match table.zeta_fast(act(g, y)) {
                    Some(m) => group.push(here.translate(g).l1(&m)),
                    None => {
                        acc.skipped += 1;
                        return acc;
                    }
                }
            }
            let mut shift: Vec<Option<Frac>> = Vec::with_capacity(sums.len());
            for a in &sums {
                let z = (y.0 + a.0, y.1 + a.1);
                if z == (0, 0) {
                    shift.push(None);
                    continue;
                }
                match table.zeta_fast(z) {
                    Some(m) => shift.push(Some(m.l1(&here))),
                    None => {
                        acc.skipped += 1;
                        return acc;
                    }
                }
            }
            let block = e1.len() * sums.len();
            let base = ly as usize * block;
            if acc.extremes.len() < base + block {
                acc.extremes.resize(base + block, None);
            }
            let mut local: Vec<(Frac, u64)> = Vec::with_capacity(block);
            for (gi, ga) in group.iter().enumerate() {
                for (ai, sb) in shift.iter().enumerate() {
                    let Some(sb) = sb else { continue };
                    let value = *ga + *sb;
                    local.push((value, mult[ai]));
                    let ext = Extreme { value, at: y };
                    let slot = &mut acc.extremes[base + gi * sums.len() + ai];
                    *slot = Some(slot.map_or(ext, |e| e.merge(ext)));
                }
            }
            local.sort_by_key(|e| e.0);
            let hist = acc.hist.entry(ly).or_default();
            let mut i = 0;
            while i < local.len() {
                let mut c = 0;
                let mut j = i;
                while j < local.len() && local[j].0 == local[i].0 {
                    c += local[j].1;
                    j += 1;
                }
                *hist.entry(local[i].0).or_insert(0) += c;
                i = j;
            }
            acc
        })
        .reduce(ScanAcc::default, ScanAcc::merge);

    let f1 = box_offsets(1);
    let mut rows = Vec::new();
    for (gi, g) in e1_classes.iter().enumerate() {
        for &x in &f1 {
            for &x1 in &f1 {
                let a = (x.0 + x1.0, x.1 + x1.1);
                let ai = sums.iter().position(|&s| s == a).unwrap();
                let block = e1.len() * sums.len();
                let found = acc.extremes.iter().enumerate().filter_map(|(i, e)| {
                    let e = e.as_ref()?;
                    (i % block == gi * sums.len() + ai).then(|| ((i / block) as u8, e))
                });
                for (l, ext) in found {
                    rows.push(EpsilonRow {
                        g: g.to_string(),
                        x,
                        x1,
                        y: ext.at,
                        level: l,
                        eps: ext.value.key(),
                    });
                }
            }
        }
    }
    let cohorts = acc
        .hist
        .iter()
        .map(|(&level, h)| {
            let count: u64 = h.values().sum();
            let mid = (count - 1) / 2;
            let mut seen = 0;
            let mut median = Frac::ZERO;
            for (v, c) in h {
                if seen + c > mid {
                    median = *v;
                    break;
                }
                seen += c;
            }
            CohortStats {
                level,
                count,
                min: frac_text(*h.keys().next().unwrap()),
                median: frac_text(median),
                max: frac_text(*h.keys().next_back().unwrap()),
            }
        })
        .collect();
    EpsilonScan {
        family: table.config().family,
        rows,
        cohorts,
        skipped: acc.skipped,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(family: Variant, schedule: WalkSchedule, radius: i64, n_max: u8) -> LevelTable {
        let mut c = LevelConfig::new(radius, n_max, family);
        c.schedule = schedule;
        build_levels(c).unwrap()
    }

    #[test]
    fn exhaustion_examples() {
        assert_eq!(enumerate_e(0), vec![PslClass::identity()]);
        assert_eq!(enumerate_f(0), vec![LatticeVector::zero()]);
        assert_eq!(enumerate_f(1).len(), 9);
        assert_eq!(enumerate_e(1).len(), 4);
        let total: u64 = box_offsets(2).into_iter().map(pair_multiplicity).sum();
        assert_eq!(total, 81);
    }

    #[test]
    fn schedule_text() {
        for s in [WalkSchedule::Identity, WalkSchedule::Quadratic(8)] {
            assert_eq!(s.to_string().parse::<WalkSchedule>().unwrap(), s);
        }
        assert!("quadratic:0".parse::<WalkSchedule>().is_err());
        assert_eq!(WalkSchedule::Quadratic(3).steps(4), 48);
    }

    #[test]
    fn trivial_triple_has_empty_defect_set() {
        let id = GroupElement::identity();
        let z = LatticeVector::zero();
        for f in Variant::ALL {
            assert!(compute_d(3, &id, &z, &z, 6, f, WalkSchedule::Identity).is_empty());
        }
    }

    #[test]
    fn naive_axis_points_are_in_the_defect_set() {
        let d = compute_d(
            8,
            &GroupElement::identity(),
            &LatticeVector::new(0, 1),
            &LatticeVector::zero(),
            30,
            Variant::Naive,
            WalkSchedule::Identity,
        );
        for big in 1..=30 {
            assert!(d.contains(&LatticeVector::new(big, 0)), "({big},0)");
        }
    }

    #[test]
    fn tiny_window_is_rejected() {
        let c = LevelConfig::new(1, 2, Variant::Tails);
        assert_eq!(build_levels(c), Err(Error::WindowTooSmall(1)));
    }

    #[test]
    fn first_member_is_dirac_so_everything_is_level_one() {
        let t = small(Variant::Symmetrized, WalkSchedule::Identity, 12, 3);
        for y in t.interior_points() {
            assert_eq!(t.level(y), Some(1));
        }
        assert_eq!(t.level((0, 0)), Some(0));
    }

    #[test]
    fn levels_are_monotone_and_follow_the_recursion() {
        let t = small(Variant::Symmetrized, WalkSchedule::Quadratic(4), 20, 3);
        for n in 1..3u8 {
            let a = t.omega(n);
            let b = t.omega(n + 1);
            assert!(a.iter().all(|y| b.contains(y)));
        }
        // Omega_1 contains the box of radius 2 (x + 0 + x' images of the origin).
        for y in box_offsets(2) {
            assert!(t.level(y).unwrap() <= 1);
        }
        // Every point of level 1 outside the orbit of the origin is in D_1.
        let e1 = enumerate_e(1);
        let f1 = enumerate_f(1);
        let c = *t.config();
        for y in t.omega(1) {
            if y.0.abs().max(y.1.abs()) <= 2 {
                continue;
            }
            let yv = LatticeVector::new(y.0, y.1);
            let hit = e1.iter().any(|g| {
                f1.iter().any(|x| {
                    f1.iter().any(|x1| {
                        witness::pair_defect(g.representative(), x, x1, &yv, c.steps(1), c.family)
                            .map(|d| d >= BigRational::from_integer(1.into()))
                            .unwrap_or(false)
                    })
                })
            });
            assert!(hit, "{y:?}");
        }
    }

    #[test]
    fn structure_and_shift_hold_on_a_scheduled_window() {
        let t = small(Variant::Symmetrized, WalkSchedule::Quadratic(4), 24, 3);
        let s = check_structure(&t);
        assert!(s.violations.is_empty(), "{:?}", s.violations);
        let shift = check_level_shift(&t);
        assert!(shift.violations.is_empty(), "{:?}", shift.violations);
    }

    #[test]
    fn text_round_trip_and_digest() {
        let t = small(Variant::Tails, WalkSchedule::Quadratic(2), 10, 2);
        let text = t.to_text();
        assert!(text.starts_with("# corona-witness level table v1\n# box 10\n"));
        let back = LevelTable::read(&text).unwrap();
        assert_eq!(back, t);
        assert_eq!(back.digest(), t.digest());
        assert!(LevelTable::read("# something else\n").is_err());
    }

    #[test]
    fn digest_is_thread_count_independent() {
        let pool = |k| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(k)
                .build()
                .unwrap()
        };
        let a = pool(1)
            .install(|| small(Variant::Symmetrized, WalkSchedule::Quadratic(2), 16, 3).digest());
        let b = pool(4)
            .install(|| small(Variant::Symmetrized, WalkSchedule::Quadratic(2), 16, 3).digest());
        assert_eq!(a, b);
    }

    #[test]
    fn zeta_examples() {
        let t = small(Variant::Symmetrized, WalkSchedule::Quadratic(2), 16, 3);
        let c = *t.config();
        for y in t.interior_points().into_iter().take(200) {
            let yv = LatticeVector::new(y.0, y.1);
            let z = t.zeta(&yv).unwrap();
            assert!(num_traits::One::is_one(&z.mass()));
            match t.level(y).unwrap() {
                1 => assert_eq!(z, witness::zeta_n(&yv, c.steps(1), c.family).unwrap()),
                2 => assert_eq!(z, witness::zeta_n(&yv, c.steps(1), c.family).unwrap()),
                3 => {
                    let one = witness::zeta_n(&yv, c.steps(1), c.family).unwrap();
                    let two = witness::zeta_n(&yv, c.steps(2), c.family).unwrap();
                    assert_eq!(z, GroupMeasure::average(&[one.clone(), one, two]).unwrap());
                }
                _ => {}
            }
        }
        assert!(matches!(
            t.zeta(&LatticeVector::new(100, 0)),
            Err(Error::LevelUnknown(_, _))
        ));
        let g = GroupElement::identity();
        let z = LatticeVector::zero();
        assert!(t
            .epsilon(&g, &z, &z, &LatticeVector::new(3, 1))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn epsilon_scan_matches_reference() {
        let t = small(Variant::Symmetrized, WalkSchedule::Quadratic(2), 14, 3);
        let scan = epsilon_scan(&t);
        assert_eq!(scan.skipped, 0);
        for row in scan.rows.iter().step_by(7) {
            let g: GroupElement = row.g.parse().unwrap();
            let x = LatticeVector::new(row.x.0, row.x.1);
            let x1 = LatticeVector::new(row.x1.0, row.x1.1);
            let y = LatticeVector::new(row.y.0, row.y.1);
            let reference = t.epsilon(&g, &x, &x1, &y).unwrap();
            assert_eq!(Frac::new(row.eps.0, row.eps.1).to_big(), reference);
            // The row is the cohort maximum.
            for z in t.interior_points() {
                if t.level(z) != Some(row.level)
                    || (z.0 + row.x.0 + row.x1.0, z.1 + row.x.1 + row.x1.1) == (0, 0)
                {
                    continue;
                }
                let other = t
                    .epsilon(&g, &x, &x1, &LatticeVector::new(z.0, z.1))
                    .unwrap();
                assert!(other <= reference);
            }
        }
        let total: u64 = scan.cohorts.iter().map(|c| c.count).sum();
        assert!(total > 0);
    }
}
