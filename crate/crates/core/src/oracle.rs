//! Brute-force reference values by adaptive Gauss-Kronrod quadrature.
//!
//! Nothing here shares code with the closed forms in [`crate::kernel`]; the
//! integrands are evaluated pointwise and split at their singular points.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::geometry::Point;
use crate::kernel::{
    log_double_integral, log_integral, log_integral_closed, simple_layer_entry, Segment, INV_2PI,
};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn kronrod(f: &mut impl FnMut(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Budget {
    tol: f64,
    // errors below this are rounding noise of the whole integral
    floor: f64,
}

fn adapt(
    f: &mut impl FnMut(f64) -> f64,
    a: f64,
    b: f64,
    whole: (f64, f64),
    budget: Budget,
    depth: u32,
) -> f64 {
    let (k, err) = whole;
    if err <= budget.tol || err <= budget.floor || err <= 1e-15 * k.abs() || depth >= 60 {
        return k;
    }
    let m = 0.5 * (a + b);
    let left = kronrod(f, a, m);
    let right = kronrod(f, m, b);
    let half = |b: &Budget| Budget {
        tol: 0.5 * b.tol,
        floor: b.floor,
    };
    adapt(f, a, m, left, half(&budget), depth + 1) + adapt(f, m, b, right, half(&budget), depth + 1)
}

/// `int_a^b f` by adaptive G7-K15 to relative tolerance `tol`. The interval
/// is split at `breaks`; every piece is halved and each half graded
/// cubically toward its outer end, which absorbs logarithmic endpoint
/// singularities.
pub fn integrate(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    let gap = 1e-10 * (b - a);
    let mut inner: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > a + gap && x < b - gap)
        .collect();
    inner.sort_by(f64::total_cmp);
    inner.dedup_by(|x, y| *x - *y < gap);
    let mut pts = vec![a];
    pts.extend(inner);
    pts.push(b);
    // (singular end, length with sign toward the interior)
    let halves: Vec<(f64, f64)> = pts
        .windows(2)
        .flat_map(|w| {
            let m = 0.5 * (w[0] + w[1]);
            [(w[0], m - w[0]), (w[1], m - w[1])]
        })
        .collect();
    let mut g = |(p, h): (f64, f64), u: f64| {
        let x = p + h * u * u * u;
        let v = if x == p { 0.0 } else { f(x) };
        // an integrable singularity hit exactly carries no mass
        if v.is_finite() {
            3.0 * h.abs() * u * u * v
        } else {
            0.0
        }
    };
    let first: Vec<(f64, f64)> = halves
        .iter()
        .map(|&half| kronrod(&mut |u| g(half, u), 0.0, 1.0))
        .collect();
    let scale = first.iter().map(|p| p.0.abs()).sum::<f64>().max(1e-300);
    let abs_tol = tol * scale / first.len() as f64;
    halves
        .iter()
        .zip(first)
        .map(|(&half, whole)| {
            let budget = Budget {
                tol: abs_tol,
                floor: 1e-17 * scale,
            };
            adapt(&mut |u| g(half, u), 0.0, 1.0, whole, budget, 0)
        })
        .sum()
}

fn projection(x: Point, seg: &Segment) -> f64 {
    ((x - seg.a).dot(seg.tangent) / seg.len).clamp(0.0, 1.0)
}

/// `int_seg ln|x - y| ds_y`.
pub fn log_integral_oracle(x: Point, seg: &Segment) -> f64 {
    let t0 = projection(x, seg);
    seg.len
        * integrate(
            |t| (x - seg.point_at(t)).norm().ln(),
            0.0,
            1.0,
            &[t0],
            1e-14,
        )
}

/// `int_si int_sj ln|x - y| ds_y ds_x`.
pub fn log_double_integral_oracle(si: &Segment, sj: &Segment) -> f64 {
    let mut breaks = vec![projection(sj.a, si), projection(sj.b, si)];
    // points of si closest to sj
    for t in [0.0, 1.0] {
        breaks.push(projection(sj.point_at(projection(si.point_at(t), sj)), si));
    }
    si.len
        * integrate(
            |t| log_integral_oracle(si.point_at(t), sj),
            0.0,
            1.0,
            &breaks,
            1e-13,
        )
}

pub fn simple_layer_entry_oracle(si: &Segment, sj: &Segment) -> f64 {
    -INV_2PI * log_double_integral_oracle(si, sj)
}

/// `int_a^b int_a^b |f(s) - f(t)|^2 / |s - t|^2` on a straight interval,
/// with the inner integral split at the diagonal and at `breaks`.
pub fn slobodeckij_oracle(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64]) -> f64 {
    let q = |s: f64, t: f64| {
        if s == t {
            0.0
        } else {
            let d = (f(s) - f(t)) / (s - t);
            d * d
        }
    };
    integrate(
        |s| {
            let mut br = breaks.to_vec();
            br.push(s);
            integrate(|t| q(s, t), a, b, &br, 1e-12)
        },
        a,
        b,
        breaks,
        1e-11,
    )
}

/// One closed-form value compared with its oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleCheck {
    pub name: String,
    pub computed: f64,
    pub oracle: f64,
}

impl OracleCheck {
    pub fn relative_error(&self) -> f64 {
        (self.computed - self.oracle).abs() / self.oracle.abs().max(1e-300)
    }
}

fn random_point(rng: &mut StdRng, r: f64) -> Point {
    Point::new(rng.gen_range(-r..r), rng.gen_range(-r..r))
}

fn random_direction(rng: &mut StdRng) -> Point {
    let a: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    Point::new(a.cos(), a.sin())
}

/// Random segment pairs in the normalized region: separated, sharing an
/// endpoint at a random angle, and collinear (adjacent, gapped or equal).
pub fn random_segment_pairs(count: usize, seed: u64) -> Vec<(Segment, Segment)> {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let kind = out.len() % 4;
        let a = random_point(&mut rng, 0.25);
        let la = rng.gen_range(0.005..0.2);
        let da = random_direction(&mut rng);
        let si = Segment::new(a, a + da * la);
        let lb = rng.gen_range(0.005..0.2);
        let sj = match kind {
            0 => {
                let b = random_point(&mut rng, 0.25);
                Segment::new(b, b + random_direction(&mut rng) * lb)
            }
            1 => {
                let angle: f64 = rng.gen_range(0.05..std::f64::consts::PI - 0.05);
                let rot = Point::new(
                    da.x * angle.cos() - da.y * angle.sin(),
                    da.x * angle.sin() + da.y * angle.cos(),
                );
                Segment::new(si.b, si.b + rot * lb)
            }
            2 => {
                let gap = if rng.gen_bool(0.5) {
                    0.0
                } else {
                    rng.gen_range(0.0..0.1)
                };
                let start = si.b + da * gap;
                Segment::new(start, start + da * lb)
            }
            _ => si,
        };
        // crossing pairs are not mesh pairs
        if kind == 0 && segments_cross(&si, &sj) {
            continue;
        }
        out.push((si, sj));
    }
    out
}

fn segments_cross(s: &Segment, t: &Segment) -> bool {
    crate::geometry::segment_segment_distance(s.a, s.b, t.a, t.b) < 1e-3
}

/// Oracle comparisons for the kernel closed forms on `pairs` random
/// segment pairs, plus the reference matrix entries.
pub fn oracle_suite(pairs: usize, seed: u64) -> Vec<OracleCheck> {
    let mut out = reference_entries();
    for (k, (si, sj)) in random_segment_pairs(pairs, seed).iter().enumerate() {
        out.push(OracleCheck {
            name: format!("pair {k}: double log integral"),
            computed: log_double_integral(si, sj),
            oracle: log_double_integral_oracle(si, sj),
        });
        let x = sj.point_at(0.37);
        out.push(OracleCheck {
            name: format!("pair {k}: single log integral"),
            computed: log_integral(x, si),
            oracle: log_integral_oracle(x, si),
        });
        let y = si.point_at(0.5) + si.normal * (0.3 * si.len);
        out.push(OracleCheck {
            name: format!("pair {k}: closed single log integral"),
            computed: log_integral_closed(y, sj),
            oracle: log_integral_oracle(y, sj),
        });
    }
    out
}

/// The three closed-form reference entries against the oracle.
pub fn reference_entries() -> Vec<OracleCheck> {
    let pi = std::f64::consts::PI;
    let ln2 = std::f64::consts::LN_2;
    let unit = Segment::new(Point::new(0.0, 0.0), Point::new(1.0, 0.0));
    let next = Segment::new(Point::new(1.0, 0.0), Point::new(2.0, 0.0));
    let h0 = Segment::new(Point::new(0.0, 0.0), Point::new(0.5, 0.0));
    let h1 = Segment::new(Point::new(0.5, 0.0), Point::new(1.0, 0.0));
    let den = |entry: fn(&Segment, &Segment) -> f64| {
        entry(&h0, &h0) + entry(&h1, &h1) - 2.0 * entry(&h0, &h1)
    };
    vec![
        OracleCheck {
            name: "self entry, unit segment".into(),
            computed: simple_layer_entry(&unit, &unit),
            oracle: 3.0 / (4.0 * pi),
        },
        OracleCheck {
            name: "self entry, oracle".into(),
            computed: simple_layer_entry_oracle(&unit, &unit),
            oracle: 3.0 / (4.0 * pi),
        },
        OracleCheck {
            name: "adjacent collinear entry".into(),
            computed: simple_layer_entry(&unit, &next),
            oracle: (1.5 - 2.0 * ln2) / (2.0 * pi),
        },
        OracleCheck {
            name: "adjacent collinear entry, oracle".into(),
            computed: simple_layer_entry_oracle(&unit, &next),
            oracle: (1.5 - 2.0 * ln2) / (2.0 * pi),
        },
        OracleCheck {
            name: "two-level Haar denominator".into(),
            computed: den(simple_layer_entry),
            oracle: ln2 / (2.0 * pi),
        },
        OracleCheck {
            name: "two-level Haar denominator, oracle".into(),
            computed: den(simple_layer_entry_oracle),
            oracle: ln2 / (2.0 * pi),
        },
    ]
}
