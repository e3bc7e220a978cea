//! The certification suite: one check per acceptance criterion, plus the
//! report files written by the `certify` command.

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::fmt::Write as _;
use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::One;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::farey_walk::{depth, mediant_vertices, walk, FareyEdge, Variant};
use crate::fast::{self, Frac, Mat};
use crate::group_measures::{rational_text, GroupMeasure};
use crate::higson::{count_bound_violations, equivariance_check, higson_scan, AnnulusMax};
use crate::modular_group::{word_ball, GroupElement, LatticeVector, PslClass};
use crate::projective_line::ProjectivePoint;
use crate::suites::{self, Suite};
use crate::witness;
use crate::zeta_builder::{
    box_offsets, build_levels, check_level_shift, check_structure, epsilon_scan, EpsilonScan,
    LevelConfig, LevelTable,
};

pub const SCHEMA: &str = "corona-witness/1";

const DECAY_BASELINE: &str = include_str!("../baselines/symmetrized_decay.txt");
const EPSILON_BASELINE: &str = include_str!("../baselines/epsilon_cohorts.txt");

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionReport {
    fn new(id: u8, name: &str, passed: bool, detail: String) -> Self {
        CriterionReport {
            id,
            name: name.to_string(),
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        format!(
            "[{verdict}] criterion {:>2} {}: {}",
            self.id, self.name, self.detail
        )
    }
}

/// Problem sizes for one run.
#[derive(Clone, Debug)]
pub struct Sizes {
    pub triples: usize,
    pub triple_ball: usize,
    pub ball_oracle: usize,
    pub equivariance_ball: usize,
    pub equivariance_vectors: usize,
    pub higson_radius: i64,
    pub annuli: Vec<i64>,
    pub measure_cases: usize,
    pub walk_bound: i64,
    pub depth_bound: i64,
    pub decay_ns: Vec<usize>,
    pub ray_length: usize,
    pub generic: usize,
    pub cf: usize,
    pub levels: LevelConfig,
}

impl Sizes {
    pub fn full() -> Sizes {
        Sizes {
            triples: 1000,
            triple_ball: 6,
            ball_oracle: 8,
            equivariance_ball: 3,
            equivariance_vectors: 10_000,
            higson_radius: 2000,
            annuli: vec![64, 128, 256, 512],
            measure_cases: 500,
            walk_bound: 200,
            depth_bound: 500,
            decay_ns: vec![4, 8, 16, 32, 64],
            ray_length: suites::RAY_LENGTH as usize,
            generic: suites::GENERIC_SIZE,
            cf: suites::CF_SIZE,
            levels: LevelConfig::new(4096, 8, Variant::Symmetrized),
        }
    }

    pub fn quick() -> Sizes {
        Sizes {
            triples: 200,
            triple_ball: 4,
            ball_oracle: 6,
            equivariance_ball: 2,
            equivariance_vectors: 500,
            higson_radius: 200,
            annuli: vec![16, 32],
            measure_cases: 100,
            walk_bound: 40,
            depth_bound: 80,
            decay_ns: vec![4, 8, 16],
            ray_length: 100,
            generic: 20,
            cf: 20,
            levels: LevelConfig::new(64, 4, Variant::Symmetrized),
        }
    }
}

#[derive(Clone, Debug)]
pub struct CertifyConfig {
    pub quick: bool,
    pub seed: u64,
    pub sizes: Sizes,
}

impl CertifyConfig {
    pub fn full(seed: u64) -> Self {
        CertifyConfig {
            quick: false,
            seed,
            sizes: Sizes::full(),
        }
    }

    pub fn quick(seed: u64) -> Self {
        CertifyConfig {
            quick: true,
            seed,
            sizes: Sizes::quick(),
        }
    }
}

/// Runs criteria on demand and shares the level table between the two
/// criteria that need it.
pub struct Certifier {
    pub config: CertifyConfig,
    table: OnceLock<LevelTable>,
    scan: OnceLock<EpsilonScan>,
    higson_rows: OnceLock<Vec<AnnulusMax>>,
    defect_rows: OnceLock<Vec<DefectRow>>,
    decay: OnceLock<DecayMaxima>,
}

/// Files written by `certify`, keyed by file name.
pub type Artifacts = BTreeMap<String, String>;

impl Certifier {
    pub fn new(config: CertifyConfig) -> Self {
        Certifier {
            config,
            table: OnceLock::new(),
            scan: OnceLock::new(),
            higson_rows: OnceLock::new(),
            defect_rows: OnceLock::new(),
            decay: OnceLock::new(),
        }
    }

    fn rng(&self, salt: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15) ^ salt)
    }

    pub fn criterion(&self, id: u8) -> CriterionReport {
        match id {
            1 => self.group_exactness(),
            2 => self.ball_oracle(),
            3 => self.phi_equivariance(),
            4 => self.higson_bound(),
            5 => self.measure_calculus(),
            6 => self.walk_oracle(),
            7 => self.negative_control(),
            8 => self.candidate_decay(),
            9 => self.leveling_structure(),
            10 => self.final_defect_trend(),
            11 => determinism(self.config.seed),
            _ => panic!("no criterion {id}"),
        }
    }

    /// Criteria 1 to 10 and the report files they produce.
    pub fn run_core(&self) -> (Vec<CriterionReport>, Artifacts) {
        let reports: Vec<CriterionReport> = (1..=10).map(|id| self.criterion(id)).collect();
        let artifacts = self.artifacts(&reports);
        (reports, artifacts)
    }

    pub fn artifacts(&self, reports: &[CriterionReport]) -> Artifacts {
        let mut files = Artifacts::new();
        let table = self.table();
        let scan = self.scan();
        let summary = json!({
            "schema": SCHEMA,
            "quick": self.config.quick,
            "seed": self.config.seed,
            "criteria": reports,
            "note": "suprema are over the declared sample suites and lattice window only",
            "levels": {
                "box": table.config().radius,
                "margin": table.config().margin,
                "nmax": table.config().n_max,
                "family": table.config().family.name(),
                "schedule": table.config().schedule.to_string(),
                "digest": table.digest(),
                "log": table.log(),
                "interior_histogram": table.interior_histogram(),
            },
            "epsilon": {
                "family": scan.family.name(),
                "skipped": scan.skipped,
                "cohorts": scan.cohorts,
            },
            "decay": self.decay_maxima().to_json(),
        });
        files.insert(
            "summary.json".into(),
            serde_json::to_string_pretty(&summary).expect("json") + "\n",
        );
        files.insert("higson.csv".into(), higson_csv(self.higson_rows()));
        files.insert("defect.csv".into(), defect_csv(self.defect_rows()));
        files.insert("epsilon.csv".into(), scan.to_csv());
        files
    }

    pub fn table(&self) -> &LevelTable {
        self.table.get_or_init(|| {
            build_levels(self.config.sizes.levels).expect("window holds the first level")
        })
    }

    fn scan(&self) -> &EpsilonScan {
        self.scan.get_or_init(|| epsilon_scan(self.table()))
    }

    fn higson_rows(&self) -> &Vec<AnnulusMax> {
        self.higson_rows.get_or_init(|| {
            let mut radii = self.config.sizes.annuli.clone();
            radii.push(2 * radii.last().unwrap());
            offsets_f2()
                .into_iter()
                .filter(|&a| a != (0, 0))
                .flat_map(|a| higson_scan(a, &radii))
                .collect()
        })
    }

    fn defect_rows(&self) -> &Vec<DefectRow> {
        self.defect_rows.get_or_init(|| {
            let s = &self.config.sizes;
            let mut rows = suite_rows(Variant::Naive, &suites::axis(), &s.decay_ns, "axis");
            rows.extend(self.decay_maxima().rows.iter().cloned());
            rows
        })
    }

    fn decay_maxima(&self) -> &DecayMaxima {
        self.decay.get_or_init(|| {
            let s = &self.config.sizes;
            let mut points: Vec<(Suite, LatticeVector)> = Vec::new();
            for suite in Suite::ALL {
                let pts = match suite {
                    Suite::Axis => suites::axis(),
                    Suite::Ray => (1..=s.ray_length as i64)
                        .map(|k| LatticeVector::new(k, k))
                        .collect(),
                    Suite::Generic => {
                        suites::generic(self.config.seed, s.generic, suites::GENERIC_RADIUS)
                    }
                    Suite::CfBounded => {
                        suites::cf_bounded(self.config.seed, s.cf, suites::CF_DEPTH)
                    }
                };
                points.extend(pts.into_iter().map(|p| (suite, p)));
            }
            decay_maxima(&points, &s.decay_ns)
        })
    }

    fn group_exactness(&self) -> CriterionReport {
        let s = &self.config.sizes;
        let ball: Vec<PslClass> = word_ball(s.triple_ball).iter().cloned().collect();
        let mut rng = self.rng(1);
        let mut failures = 0;
        for _ in 0..s.triples {
            let pick =
                |r: &mut ChaCha8Rng| ball[r.gen_range(0..ball.len())].representative().clone();
            let (g, h, k) = (pick(&mut rng), pick(&mut rng), pick(&mut rng));
            let left = g.compose(&h).compose(&k);
            let right = g.compose(&h.compose(&k));
            if left != right
                || !left.determinant().is_one()
                || !g.compose(&h).determinant().is_one()
            {
                failures += 1;
            }
        }
        let s_ = GroupElement::s();
        let t = GroupElement::t();
        let minus = GroupElement::new(-1, 0, 0, -1).unwrap();
        let st = s_.compose(&t);
        let identities = s_.compose(&s_) == minus
            && st.pow(3) == minus
            && st.pow(6).is_identity()
            && s_.compose(&s_).psl().is_identity();
        CriterionReport::new(
            1,
            "group exactness",
            failures == 0 && identities,
            format!(
                "{} triples from word_ball({}), {failures} failures; S^2=-I, (ST)^3=-I, (ST)^6=I, S^2=1 in PSL: {identities}",
                s.triples, s.triple_ball
            ),
        )
    }

    fn ball_oracle(&self) -> CriterionReport {
        let r = self.config.sizes.ball_oracle;
        let ball = word_ball(r);
        let ours: Vec<usize> = (0..=r).map(|k| ball.truncate(k).len()).collect();
        let oracle = oracle::ball_sizes_by_words(r);
        CriterionReport::new(
            2,
            "ball oracle",
            ours == oracle,
            format!("|word_ball(r)| for r=0..{r}: {ours:?}, word-product oracle {oracle:?}"),
        )
    }

    fn phi_equivariance(&self) -> CriterionReport {
        let s = &self.config.sizes;
        let ball: Vec<PslClass> = word_ball(s.equivariance_ball).iter().cloned().collect();
        let mut rng = self.rng(3);
        let vectors: Vec<LatticeVector> = (0..s.equivariance_vectors)
            .map(|_| loop {
                let m = rng.gen_range(-1_000_000i64..=1_000_000);
                let n = rng.gen_range(-1_000_000i64..=1_000_000);
                if m != 0 || n != 0 {
                    break LatticeVector::new(m, n);
                }
            })
            .collect();
        let failures: usize = vectors
            .par_iter()
            .map(|v| {
                ball.iter()
                    .filter(|g| !equivariance_check(g.representative(), v).unwrap())
                    .count()
            })
            .sum();
        CriterionReport::new(
            3,
            "phi equivariance",
            failures == 0,
            format!(
                "{} classes x {} vectors, {failures} failures",
                ball.len(),
                vectors.len()
            ),
        )
    }

    fn higson_bound(&self) -> CriterionReport {
        let s = &self.config.sizes;
        let offsets = offsets_f2();
        let violations = count_bound_violations(s.higson_radius, &offsets);
        let rows = self.higson_rows();
        let mut ratio_failures = Vec::new();
        for &a in offsets.iter().filter(|&&a| a != (0, 0)) {
            for &r in &s.annuli {
                let at = |radius: i64| {
                    rows.iter()
                        .find(|x| x.a == a && x.radius == radius)
                        .unwrap()
                };
                let (inner, outer) = (at(r), at(2 * r));
                // max(R) / max(2R) >= 2
                if inner.num * outer.den < 2 * outer.num * inner.den {
                    ratio_failures.push(format!("a=({},{}) R={r}", a.0, a.1));
                }
            }
        }
        CriterionReport::new(
            4,
            "higson bound",
            violations == 0 && ratio_failures.is_empty(),
            format!(
                "{violations} bound violations for 0<|x|<={} and a in F_2; annulus ratio failures: {}",
                s.higson_radius,
                if ratio_failures.is_empty() { "none".into() } else { ratio_failures.join(" ") }
            ),
        )
    }

    fn measure_calculus(&self) -> CriterionReport {
        let n = self.config.sizes.measure_cases;
        let ball: Vec<PslClass> = word_ball(5).iter().cloned().collect();
        let mut rng = self.rng(5);
        let random_measure = |r: &mut ChaCha8Rng| {
            let k = r.gen_range(1..=8);
            let list: Vec<PslClass> = (0..k)
                .map(|_| ball[r.gen_range(0..ball.len())].clone())
                .collect();
            GroupMeasure::uniform(list).unwrap()
        };
        let mut failures = 0;
        for _ in 0..n {
            let mu = random_measure(&mut rng);
            let nu = random_measure(&mut rng);
            let g = ball[rng.gen_range(0..ball.len())].representative().clone();
            let (gm, gn) = (mu.translate(&g), nu.translate(&g));
            let ok = gm.l1_distance(&gn) == mu.l1_distance(&nu)
                && [&mu, &nu, &gm, &gn].iter().all(|m| m.mass().is_one())
                && GroupMeasure::average(&[mu.clone(), nu.clone()])
                    .unwrap()
                    .mass()
                    .is_one();
            if !ok {
                failures += 1;
            }
        }
        CriterionReport::new(
            5,
            "measure calculus",
            failures == 0,
            format!("{n} random (g, mu, nu), {failures} failures"),
        )
    }

    fn walk_oracle(&self) -> CriterionReport {
        let s = &self.config.sizes;
        let paths = oracle::farey_dual_paths(s.walk_bound);
        let mut targets = Vec::new();
        for q in 1..=s.walk_bound {
            for p in -s.walk_bound..=s.walk_bound {
                if p.gcd(&q) == 1 {
                    targets.push((p, q));
                }
            }
        }
        let mismatches: Vec<String> = targets
            .par_iter()
            .filter_map(|&(p, q)| {
                let t = ProjectivePoint::normalize(p, q).unwrap();
                let ours: Vec<(i64, i64)> = mediant_vertices(&t)
                    .iter()
                    .map(|v| (i64::try_from(v.m()).unwrap(), i64::try_from(v.n()).unwrap()))
                    .collect();
                let expected = paths.get(&(p, q)).cloned().unwrap_or_default();
                let chain_ok = walk(&t, Variant::Naive)
                    .all(|step| FareyEdge::from_matrix(&step.edge).cross().is_one());
                let depth_ok = depth(&t) == BigInt::from(ours.len());
                (ours != expected || !chain_ok || !depth_ok).then(|| format!("{p}/{q}"))
            })
            .collect();
        let d = s.depth_bound;
        let depth_failures: Vec<String> = (1..=d)
            .into_par_iter()
            .flat_map_iter(|q| {
                (-d..=d).filter_map(move |p| {
                    if p.gcd(&q) != 1 {
                        return None;
                    }
                    let t = ProjectivePoint::normalize(p, q).unwrap();
                    let k = u64::try_from(depth(&t)).unwrap();
                    let height = p.unsigned_abs().max(q as u64);
                    (!oracle::golden_power_at_least(k + 2, height)).then(|| format!("{p}/{q}"))
                })
            })
            .collect();
        let passed = mismatches.is_empty() && depth_failures.is_empty();
        CriterionReport::new(
            6,
            "walk oracle",
            passed,
            format!(
                "{} fractions with |num|,den <= {} against the Farey dual-graph BFS, {} mismatches; depth >= log_phi(height) - 2 for height <= {d}: {} failures",
                targets.len(),
                s.walk_bound,
                mismatches.len(),
                depth_failures.len()
            ),
        )
    }

    fn negative_control(&self) -> CriterionReport {
        let s = &self.config.sizes;
        let control = witness::pair_defect(
            &GroupElement::identity(),
            &LatticeVector::new(0, 1),
            &LatticeVector::zero(),
            &LatticeVector::new(1_000_000, 0),
            8,
            Variant::Naive,
        )
        .unwrap();
        let expected = BigRational::new(7.into(), 4.into());
        let rows = suite_rows(Variant::Naive, &suites::axis(), &s.decay_ns, "axis");
        let mut by_n: BTreeMap<usize, Frac> = BTreeMap::new();
        for r in &rows {
            let e = by_n.entry(r.n).or_insert(Frac::ZERO);
            *e = (*e).max(r.value);
        }
        let non_decaying = by_n.values().all(|v| *v >= Frac::new(1, 1));
        let maxima: Vec<String> = by_n
            .iter()
            .map(|(n, v)| format!("n={n}:{}", frac_text(*v)))
            .collect();
        CriterionReport::new(
            7,
            "negative control",
            control == expected && non_decaying,
            format!(
                "naive pair_defect at y=(10^6,0), x=(0,1), n=8: {}; axis maxima {}; naive family reported {}",
                rational_text(&control),
                maxima.join(" "),
                if non_decaying { "NON-DECAYING" } else { "decaying" }
            ),
        )
    }

    fn candidate_decay(&self) -> CriterionReport {
        let s = &self.config.sizes;
        let d = self.decay_maxima();
        let maxima: Vec<Frac> = s.decay_ns.iter().map(|n| d.overall[n].value).collect();
        let non_increasing = maxima.windows(2).all(|w| w[1] <= w[0]);
        let first_n = if s.decay_ns.contains(&8) {
            8
        } else {
            s.decay_ns[0]
        };
        let last_n = *s.decay_ns.last().unwrap();
        let halved = {
            let (a, b) = (d.overall[&first_n].value, d.overall[&last_n].value);
            b + b <= a
        };
        let reference_ok = d.reference_agrees;
        let baseline = if self.config.quick {
            BTreeMap::new()
        } else {
            parse_baseline(DECAY_BASELINE)
        };
        let regressions: Vec<String> = s
            .decay_ns
            .iter()
            .filter_map(|n| {
                let pinned = baseline.get(&(*n as u64))?;
                (d.overall[n].value > *pinned).then(|| format!("n={n}"))
            })
            .collect();
        let text = |m: &BTreeMap<usize, DecayMax>| {
            s.decay_ns
                .iter()
                .map(|n| {
                    let e = &m[n];
                    format!("n={n}:{}@({},{})", frac_text(e.value), e.y.0, e.y.1)
                })
                .collect::<Vec<_>>()
                .join(" ")
        };
        CriterionReport::new(
            8,
            "candidate-family decay",
            non_increasing && halved && reference_ok && regressions.is_empty(),
            format!(
                "symmetrized max pair_defect over {} points: {}; non-increasing: {non_increasing}; n={last_n} <= half n={first_n}: {halved}; reference recheck: {reference_ok}; baseline regressions: {}; far field |y|>=1000 (diagnostic): {}",
                d.points,
                text(&d.overall),
                if regressions.is_empty() { "none".into() } else { regressions.join(" ") },
                text(&d.far),
            ),
        )
    }

    fn leveling_structure(&self) -> CriterionReport {
        let table = self.table();
        let structure = check_structure(table);
        let shift = check_level_shift(table);
        let passed = structure.violations.is_empty() && shift.violations.is_empty();
        let c = table.config();
        let vacuous = structure.pairs == 0 && shift.checked == 0;
        let mut detail = format!(
            "box {} nmax {} schedule {}: interior levels {:?}; structural checks {} (y,n) pairs = {} triples, {} violations; level-shift checks {}, {} violations",
            c.radius,
            c.n_max,
            c.schedule,
            table.interior_histogram(),
            structure.pairs,
            structure.triples,
            structure.violations.len(),
            shift.checked,
            shift.violations.len()
        );
        if vacuous {
            detail.push_str("; vacuous: no interior point has level above 1");
        }
        if let Some(v) = structure.violations.first().or(shift.violations.first()) {
            let _ = write!(detail, "; first violation {v}");
        }
        CriterionReport::new(9, "leveling structure", passed, detail)
    }

    fn final_defect_trend(&self) -> CriterionReport {
        let scan = self.scan();
        let by_triple = scan.maxima_by_triple();
        let mut failing = 0;
        let mut worst: Option<String> = None;
        for ((g, x, x1), maxima) in &by_triple {
            let tail: Vec<Frac> = maxima
                .iter()
                .filter(|(l, _)| *l >= 3)
                .map(|e| e.1)
                .collect();
            let monotone = tail.windows(2).all(|w| w[1] <= w[0]);
            let first = maxima.first().unwrap().1;
            let last = maxima.last().unwrap().1;
            let halved = last + last <= first;
            if !(monotone && halved) {
                failing += 1;
                if worst.is_none() {
                    worst = Some(format!(
                        "g={g} x=({},{}) x'=({},{}) cohort maxima {}",
                        x.0,
                        x.1,
                        x1.0,
                        x1.1,
                        maxima
                            .iter()
                            .map(|(l, v)| format!("L={l}:{}", frac_text(*v)))
                            .collect::<Vec<_>>()
                            .join(" ")
                    ));
                }
            }
        }
        let baseline = if self.config.quick {
            BTreeMap::new()
        } else {
            parse_baseline(EPSILON_BASELINE)
        };
        let mut regressions = Vec::new();
        let mut overall: BTreeMap<u8, Frac> = BTreeMap::new();
        for row in &scan.rows {
            let v = Frac::new(row.eps.0, row.eps.1);
            let e = overall.entry(row.level).or_insert(Frac::ZERO);
            *e = (*e).max(v);
        }
        for (l, v) in &overall {
            if let Some(pinned) = baseline.get(&(*l as u64)) {
                if v > pinned {
                    regressions.push(format!("L={l}"));
                }
            }
        }
        let cohorts: Vec<String> = overall
            .iter()
            .map(|(l, v)| format!("L={l}:{}", frac_text(*v)))
            .collect();
        CriterionReport::new(
            10,
            "final defect trend",
            failing == 0 && regressions.is_empty(),
            format!(
                "{} triples, {} cohorts (max over triples {}), {failing} triples fail the trend; baseline regressions: {}{}",
                by_triple.len(),
                overall.len(),
                cohorts.join(" "),
                if regressions.is_empty() { "none".into() } else { regressions.join(" ") },
                worst.map(|w| format!("; first failing {w}")).unwrap_or_default()
            ),
        )
    }
}

/// Quick certification at one and eight worker threads must produce
/// identical files.
pub fn determinism(seed: u64) -> CriterionReport {
    let run = |jobs: usize| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .expect("thread pool");
        pool.install(|| Certifier::new(CertifyConfig::quick(seed)).run_core().1)
    };
    let one = run(1);
    let eight = run(8);
    let differing: Vec<&String> = one
        .keys()
        .filter(|k| one.get(*k) != eight.get(*k))
        .collect();
    let same = one == eight;
    CriterionReport::new(
        11,
        "determinism",
        same,
        format!(
            "quick certify files {:?} with 1 and 8 threads: {}",
            one.keys().collect::<Vec<_>>(),
            if same {
                "byte-identical".to_string()
            } else {
                format!("differ in {differing:?}")
            }
        ),
    )
}

pub fn offsets_f2() -> Vec<(i64, i64)> {
    box_offsets(2)
}

fn frac_text(f: Frac) -> String {
    let (n, d) = f.key();
    format!("{n}/{d}")
}

fn parse_baseline(text: &str) -> BTreeMap<u64, Frac> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .filter_map(|l| {
            let (k, v) = l.split_once(char::is_whitespace)?;
            let (n, d) = v.trim().split_once('/')?;
            Some((k.parse().ok()?, Frac::new(n.parse().ok()?, d.parse().ok()?)))
        })
        .collect()
}

/// One `defect.csv` row: the maximum over `(x, x')` in `F_1 x F_1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DefectRow {
    pub family: Variant,
    pub suite: &'static str,
    pub g: String,
    pub y: (BigInt, BigInt),
    pub n: usize,
    pub value: Frac,
}

pub fn defect_csv(rows: &[DefectRow]) -> String {
    let mut s = String::from("family,g,t_or_y,n,defect_num,defect_den\n");
    for r in rows {
        let (num, den) = r.value.key();
        let _ = writeln!(
            s,
            "{},\"{}\",\"({},{})\",{},{num},{den}",
            r.family, r.g, r.y.0, r.y.1, r.n
        );
    }
    s
}

pub fn higson_csv(rows: &[AnnulusMax]) -> String {
    let mut s = String::from("R,a1,a2,max_dev_sq_num,max_dev_sq_den,argmax_m,argmax_n\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            r.radius, r.a.0, r.a.1, r.num, r.den, r.argmax.0, r.argmax.1
        );
    }
    s
}

fn to_i128(v: &LatticeVector) -> (i128, i128) {
    (
        i128::try_from(&v.m).expect("suite point fits in i128"),
        i128::try_from(&v.n).expect("suite point fits in i128"),
    )
}

/// Per `g` in `E_1`: `‖zeta_n(g y) - g zeta_n(y)‖`; and the largest
/// `‖zeta_n(y + a) - zeta_n(y)‖` over `a = x + x'`, with its maximizer.
fn split_defects(
    y: (i128, i128),
    n: usize,
    family: Variant,
    e1: &[Mat],
) -> (Vec<Frac>, Frac, (i128, i128)) {
    let here = fast::mu(y.0, y.1, n, family);
    let group = e1
        .iter()
        .map(|g| {
            let gy = fast::act(g, y);
            fast::mu(gy.0, gy.1, n, family).l1(&here.translate(g))
        })
        .collect();
    let mut best = (Frac::ZERO, (0, 0));
    for (a1, a2) in box_offsets(2) {
        let a = (a1 as i128, a2 as i128);
        let z = (y.0 + a.0, y.1 + a.1);
        if z == (0, 0) {
            continue;
        }
        let d = fast::mu(z.0, z.1, n, family).l1(&here);
        if d > best.0 {
            best = (d, a);
        }
    }
    (group, best.0, best.1)
}

/// Rows `(family, g, y, n)` with the defect maximized over `F_1 x F_1`.
pub fn suite_rows(
    family: Variant,
    points: &[LatticeVector],
    ns: &[usize],
    suite: &'static str,
) -> Vec<DefectRow> {
    let e1_classes: Vec<PslClass> = word_ball(1).iter().cloned().collect();
    let e1: Vec<Mat> = e1_classes
        .iter()
        .map(|g| fast::from_element(g.representative()))
        .collect();
    points
        .par_iter()
        .flat_map_iter(|y| {
            let yy = to_i128(y);
            let e1 = &e1;
            let e1_classes = &e1_classes;
            ns.iter().flat_map(move |&n| {
                let (group, shift, _) = split_defects(yy, n, family, e1);
                group
                    .into_iter()
                    .zip(e1_classes.iter())
                    .map(|(gd, g)| DefectRow {
                        family,
                        suite,
                        g: g.to_string(),
                        y: (y.m.clone(), y.n.clone()),
                        n,
                        value: gd + shift,
                    })
                    .collect::<Vec<_>>()
            })
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct DecayMax {
    pub value: Frac,
    pub y: (i128, i128),
    pub g: usize,
    pub a: (i128, i128),
}

/// Maxima of the symmetrized pair defect per `n`, over all sample points and
/// over the far part `‖y‖∞ >= 1000`.
#[derive(Clone, Debug)]
pub struct DecayMaxima {
    pub points: usize,
    pub overall: BTreeMap<usize, DecayMax>,
    pub far: BTreeMap<usize, DecayMax>,
    pub rows: Vec<DefectRow>,
    /// The maximizing defects recomputed with the reference arithmetic agree.
    pub reference_agrees: bool,
}

impl DecayMaxima {
    fn to_json(&self) -> serde_json::Value {
        let side = |m: &BTreeMap<usize, DecayMax>| {
            m.iter()
                .map(|(n, e)| {
                    json!({
                        "n": n,
                        "max": frac_text(e.value),
                        "y": [e.y.0.to_string(), e.y.1.to_string()],
                    })
                })
                .collect::<Vec<_>>()
        };
        json!({
            "family": "symmetrized",
            "points": self.points,
            "overall": side(&self.overall),
            "far_field": side(&self.far),
        })
    }
}

fn better(a: DecayMax, b: DecayMax) -> DecayMax {
    match a.value.cmp(&b.value) {
        std::cmp::Ordering::Greater => a,
        std::cmp::Ordering::Less => b,
        std::cmp::Ordering::Equal => {
            if (a.y, a.g, a.a) <= (b.y, b.g, b.a) {
                a
            } else {
                b
            }
        }
    }
}

pub fn decay_maxima(points: &[(Suite, LatticeVector)], ns: &[usize]) -> DecayMaxima {
    let family = Variant::Symmetrized;
    let e1_classes: Vec<PslClass> = word_ball(1).iter().cloned().collect();
    let e1: Vec<Mat> = e1_classes
        .iter()
        .map(|g| fast::from_element(g.representative()))
        .collect();
    type Acc = BTreeMap<(bool, usize), DecayMax>;
    let per_point: Vec<(Acc, Vec<DefectRow>)> = points
        .par_iter()
        .map(|(suite, y)| {
            let yy = to_i128(y);
            let far = y.linf() >= BigInt::from(1000);
            let mut acc = Acc::new();
            let mut rows = Vec::new();
            for &n in ns {
                let (group, shift, a) = split_defects(yy, n, family, &e1);
                let (gi, gd) = group.iter().enumerate().fold((0, Frac::ZERO), |b, (i, v)| {
                    if *v > b.1 {
                        (i, *v)
                    } else {
                        b
                    }
                });
                let m = DecayMax {
                    value: gd + shift,
                    y: yy,
                    g: gi,
                    a,
                };
                for key in [(false, n), (true, n)] {
                    if key.0 && !far {
                        continue;
                    }
                    let e = acc
                        .remove(&key)
                        .map_or(m.clone(), |old| better(old, m.clone()));
                    acc.insert(key, e);
                }
                if *suite == Suite::Axis {
                    for (g, v) in e1_classes.iter().zip(&group) {
                        rows.push(DefectRow {
                            family,
                            suite: suite.name(),
                            g: g.to_string(),
                            y: (y.m.clone(), y.n.clone()),
                            n,
                            value: *v + shift,
                        });
                    }
                }
            }
            (acc, rows)
        })
        .collect();
    let mut merged = Acc::new();
    let mut rows = Vec::new();
    for (acc, r) in per_point {
        for (k, v) in acc {
            let e = merged.remove(&k).map_or(v.clone(), |old| better(old, v));
            merged.insert(k, e);
        }
        rows.extend(r);
    }
    let overall: BTreeMap<usize, DecayMax> = merged
        .iter()
        .filter(|(k, _)| !k.0)
        .map(|(k, v)| (k.1, v.clone()))
        .collect();
    let far = merged
        .iter()
        .filter(|(k, _)| k.0)
        .map(|(k, v)| (k.1, v.clone()))
        .collect();
    let reference_agrees = overall.iter().all(|(&n, e)| {
        let g = e1_classes[e.g].representative();
        let y = LatticeVector::new(e.y.0, e.y.1);
        let x = LatticeVector::new(e.a.0, e.a.1);
        let pair = witness::pair_defect(g, &x, &LatticeVector::zero(), &y, n, family).unwrap();
        pair == e.value.to_big()
    });
    DecayMaxima {
        points: points.len(),
        overall,
        far,
        rows,
        reference_agrees,
    }
}

/// Independent checks used by the criteria above.
pub mod oracle {
    use super::*;

    type M = [i64; 4];

    fn mul(x: &M, y: &M) -> M {
        [
            x[0] * y[0] + x[1] * y[2],
            x[0] * y[1] + x[1] * y[3],
            x[2] * y[0] + x[3] * y[2],
            x[2] * y[1] + x[3] * y[3],
        ]
    }

    fn sign_free(x: M) -> M {
        let neg = [-x[0], -x[1], -x[2], -x[3]];
        x.max(neg)
    }

    /// `|ball(k)|` for `k = 0..=r`, by multiplying out every word over
    /// `{S, T, T^-1}` of length at most `r` and deduplicating up to sign.
    pub fn ball_sizes_by_words(r: usize) -> Vec<usize> {
        let gens: [M; 3] = [[0, -1, 1, 0], [1, 1, 0, 1], [1, -1, 0, 1]];
        let mut seen: HashSet<M> = HashSet::new();
        let mut words: Vec<M> = vec![[1, 0, 0, 1]];
        let mut sizes = Vec::with_capacity(r + 1);
        seen.insert(sign_free([1, 0, 0, 1]));
        sizes.push(seen.len());
        for _ in 0..r {
            let mut next = Vec::with_capacity(words.len() * 3);
            for w in &words {
                for g in &gens {
                    let p = mul(w, g);
                    seen.insert(sign_free(p));
                    next.push(p);
                }
            }
            words = next;
            sizes.push(seen.len());
        }
        sizes
    }

    fn point(m: i64, n: i64) -> (i64, i64) {
        let g = m.gcd(&n);
        let (m, n) = (m / g, n / g);
        if n < 0 || (n == 0 && m < 0) {
            (-m, -n)
        } else {
            (m, n)
        }
    }

    fn height(p: (i64, i64)) -> i64 {
        p.0.abs().max(p.1.abs())
    }

    /// Breadth-first search over edges of the Farey tessellation, starting
    /// from the edge `{inf, 0}`; two edges are adjacent when they bound a
    /// common triangle. For each reduced `p/q` with height `<= bound` the
    /// result holds the third vertices of the triangles on the shortest
    /// route, ending with the first triangle that has `p/q` as a vertex.
    pub fn farey_dual_paths(bound: i64) -> HashMap<(i64, i64), Vec<(i64, i64)>> {
        type Edge = ((i64, i64), (i64, i64));
        type Parents = HashMap<Edge, Option<(Edge, (i64, i64))>>;
        let key = |u: (i64, i64), v: (i64, i64)| if u <= v { (u, v) } else { (v, u) };
        let start: Edge = key((1, 0), (0, 1));
        let mut parent: Parents = HashMap::new();
        parent.insert(start, None);
        let mut paths: HashMap<(i64, i64), Vec<(i64, i64)>> = HashMap::new();
        let mut queue = VecDeque::from([start]);
        let route = |parent: &Parents, mut e: Edge| {
            let mut out = Vec::new();
            while let Some(Some((prev, w))) = parent.get(&e) {
                out.push(*w);
                e = *prev;
            }
            out.reverse();
            out
        };
        while let Some(e) = queue.pop_front() {
            let (u, v) = e;
            for sign in [1, -1] {
                let w = point(u.0 + sign * v.0, u.1 + sign * v.1);
                if height(w) > bound {
                    continue;
                }
                for child in [key(u, w), key(v, w)] {
                    if parent.contains_key(&child) {
                        continue;
                    }
                    parent.insert(child, Some((e, w)));
                    queue.push_back(child);
                }
                if !paths.contains_key(&w) && w != (1, 0) && w != (0, 1) {
                    let mut p = route(&parent, e);
                    p.push(w);
                    paths.insert(w, p);
                }
            }
        }
        paths
    }

    /// Is `phi^k >= h` for the golden ratio `phi`? Uses
    /// `phi^k = F_k phi + F_{k-1}`, so the test is
    /// `F_k sqrt(5) >= 2h - F_k - 2 F_{k-1}`, squared when the right side is positive.
    pub fn golden_power_at_least(k: u64, h: u64) -> bool {
        let h = h as u128;
        if k == 0 {
            return h <= 1;
        }
        let (mut prev, mut cur) = (0u128, 1u128);
        for _ in 1..k {
            let next = prev + cur;
            prev = cur;
            cur = next;
            if cur >= h {
                return true;
            }
        }
        let rhs = 2 * h as i128 - cur as i128 - 2 * prev as i128;
        rhs <= 0 || 5 * cur * cur >= (rhs * rhs) as u128
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_oracle_small() {
        assert_eq!(oracle::ball_sizes_by_words(2), vec![1, 4, 10]);
    }

    #[test]
    fn dual_paths_small() {
        let paths = oracle::farey_dual_paths(10);
        assert_eq!(paths[&(2, 3)], vec![(1, 1), (1, 2), (2, 3)]);
        assert_eq!(paths[&(1, 1)], vec![(1, 1)]);
        assert_eq!(paths[&(-1, 1)], vec![(-1, 1)]);
        assert_eq!(paths[&(5, 1)].len(), 5);
    }

    #[test]
    fn golden_powers() {
        // phi^2 = 2.618..., phi^5 = 11.09...
        assert!(oracle::golden_power_at_least(2, 2));
        assert!(!oracle::golden_power_at_least(2, 3));
        assert!(oracle::golden_power_at_least(5, 11));
        assert!(!oracle::golden_power_at_least(5, 12));
        assert!(oracle::golden_power_at_least(0, 1));
        for k in 1..60u64 {
            let phi = (1.0 + 5f64.sqrt()) / 2.0;
            let v = phi.powi(k as i32);
            if (v - v.round()).abs() > 1e-3 && v < 1e9 {
                assert!(
                    oracle::golden_power_at_least(k, v.floor() as u64),
                    "k={k} v={v}"
                );
                assert!(
                    !oracle::golden_power_at_least(k, v.floor() as u64 + 1),
                    "k={k} v={v} up"
                );
            }
        }
    }

    #[test]
    fn baseline_parsing() {
        let b = parse_baseline("# comment\n4 3/2\n\n8 1/1\n");
        assert_eq!(b[&4], Frac::new(3, 2));
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn quick_criteria_pass_where_expected() {
        let c = Certifier::new(CertifyConfig::quick(0));
        for id in [1, 2, 3, 4, 5, 6, 7] {
            let r = c.criterion(id);
            assert!(r.passed, "{}", r.line());
        }
    }
}
