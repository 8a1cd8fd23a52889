//! Centerline curves parameterized by arc length.
//!
//! Control points are first interpolated with a natural cubic spline in
//! chord-length parameter. That curve is integrated with Gauss-Legendre
//! quadrature and re-sampled at uniform arc-length knots no more than 1 m
//! apart; the stored curve is the cubic Hermite spline through those knots
//! with unit tangents, so its parameter is arc length to high accuracy.

use crate::geometry::Vec2;

/// Maximum knot spacing of the re-fitted curve, meters.
pub const MAX_KNOT_SPACING: f64 = 1.0;

/// Knots per bounding circle in the projection search.
const CHUNK: usize = 16;

/// Chunks per outer bounding circle.
const GROUP: usize = 16;

const GL_NODES: [f64; 8] = [
    -0.960_289_856_497_536_3,
    -0.796_666_477_413_626_7,
    -0.525_532_409_916_329,
    -0.183_434_642_495_649_8,
    0.183_434_642_495_649_8,
    0.525_532_409_916_329,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 8] = [
    0.101_228_536_290_376_26,
    0.222_381_034_453_374_48,
    0.313_706_645_877_887_3,
    0.362_683_783_378_362,
    0.362_683_783_378_362,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_48,
    0.101_228_536_290_376_26,
];

/// Integrate `f` over `[a, b]` with `pieces` composite 8-point Gauss-Legendre panels.
pub fn gauss_legendre(a: f64, b: f64, pieces: usize, f: impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / pieces as f64;
    let half = 0.5 * h;
    let mut total = 0.0;
    for k in 0..pieces {
        let mid = a + h * k as f64 + half;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            total += w * f(mid + half * x);
        }
    }
    total * half
}

/// Natural cubic spline through 2D points, parameterized by cumulative chord length.
#[derive(Debug, Clone)]
pub(crate) struct ChordSpline {
    params: Vec<f64>,
    points: Vec<Vec2>,
    second: Vec<Vec2>,
}

impl ChordSpline {
    /// Returns `None` if fewer than two points or if consecutive points coincide.
    pub(crate) fn fit(points: &[Vec2]) -> Option<Self> {
        if points.len() < 2 {
            return None;
        }
        let mut params = Vec::with_capacity(points.len());
        params.push(0.0);
        for w in points.windows(2) {
            let chord = w[0].distance(w[1]);
            if !(chord > 1e-9) {
                return None;
            }
            params.push(params.last().unwrap() + chord);
        }
        let n = points.len();
        let mut second = vec![Vec2::ZERO; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives (Thomas algorithm).
            let m = n - 2;
            let mut diag = vec![0.0; m];
            let mut upper = vec![0.0; m];
            let mut rhs = vec![Vec2::ZERO; m];
            for i in 1..n - 1 {
                let h0 = params[i] - params[i - 1];
                let h1 = params[i + 1] - params[i];
                diag[i - 1] = 2.0 * (h0 + h1);
                upper[i - 1] = h1;
                rhs[i - 1] = ((points[i + 1] - points[i]) * (1.0 / h1)
                    - (points[i] - points[i - 1]) * (1.0 / h0))
                    * 6.0;
            }
            for i in 1..m {
                let lower = params[i + 1] - params[i];
                let factor = lower / diag[i - 1];
                diag[i] -= factor * upper[i - 1];
                let prev = rhs[i - 1];
                rhs[i] = rhs[i] - prev * factor;
            }
            second[m] = rhs[m - 1] * (1.0 / diag[m - 1]);
            for i in (0..m - 1).rev() {
                second[i + 1] = (rhs[i] - second[i + 2] * upper[i]) * (1.0 / diag[i]);
            }
        }
        Some(Self {
            params,
            points: points.to_vec(),
            second,
        })
    }

    pub(crate) fn segments(&self) -> usize {
        self.points.len() - 1
    }

    pub(crate) fn param_range(&self, seg: usize) -> (f64, f64) {
        (self.params[seg], self.params[seg + 1])
    }

    fn locate(&self, seg: usize, t: f64) -> (f64, f64, f64) {
        let (t0, t1) = self.param_range(seg);
        let h = t1 - t0;
        let a = (t1 - t) / h;
        let b = (t - t0) / h;
        (a, b, h)
    }

    pub(crate) fn derivative(&self, seg: usize, t: f64) -> Vec2 {
        let (a, b, h) = self.locate(seg, t);
        let (p0, p1) = (self.points[seg], self.points[seg + 1]);
        let (m0, m1) = (self.second[seg], self.second[seg + 1]);
        (p1 - p0) * (1.0 / h) - m0 * ((3.0 * a * a - 1.0) * h / 6.0)
            + m1 * ((3.0 * b * b - 1.0) * h / 6.0)
    }

    pub(crate) fn speed(&self, seg: usize, t: f64) -> f64 {
        self.derivative(seg, t).norm()
    }

    pub(crate) fn position(&self, seg: usize, t: f64) -> Vec2 {
        let (a, b, h) = self.locate(seg, t);
        let (p0, p1) = (self.points[seg], self.points[seg + 1]);
        let (m0, m1) = (self.second[seg], self.second[seg + 1]);
        p0 * a + p1 * b + (m0 * (a * a * a - a) + m1 * (b * b * b - b)) * (h * h / 6.0)
    }

    fn arc_length(&self, seg: usize, t0: f64, t1: f64) -> f64 {
        gauss_legendre(t0, t1, 4, |t| self.speed(seg, t))
    }

    fn segment_lengths(&self) -> Vec<f64> {
        (0..self.segments())
            .map(|s| {
                let (t0, t1) = self.param_range(s);
                self.arc_length(s, t0, t1)
            })
            .collect()
    }

    /// Parameter within `seg` at which the arc length from the segment start equals `target`.
    fn param_at_length(&self, seg: usize, target: f64, seg_len: f64) -> f64 {
        let (t0, t1) = self.param_range(seg);
        let mut lo = t0;
        let mut hi = t1;
        let mut t = t0 + (target / seg_len).clamp(0.0, 1.0) * (t1 - t0);
        for _ in 0..60 {
            let f = self.arc_length(seg, t0, t) - target;
            if f.abs() < 1e-12 {
                break;
            }
            if f > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let next = t - f / self.speed(seg, t);
            t = if next > lo && next < hi {
                next
            } else {
                0.5 * (lo + hi)
            };
            if hi - lo < 1e-13 {
                break;
            }
        }
        t
    }
}

/// Cubic Hermite curve through knots spaced uniformly in arc length.
#[derive(Debug, Clone, PartialEq)]
pub struct ArcLengthSpline {
    length: f64,
    spacing: f64,
    knots: Vec<Vec2>,
    tangents: Vec<Vec2>,
    chunks: Vec<(Vec2, f64)>,
    groups: Vec<(Vec2, f64)>,
}

impl ArcLengthSpline {
    /// Fit the curve through `points` and re-sample it by arc length.
    /// Returns `None` for degenerate input (fewer than two distinct points).
    pub fn fit(points: &[Vec2]) -> Option<Self> {
        let source = ChordSpline::fit(points)?;
        let seg_lengths = source.segment_lengths();
        let length: f64 = seg_lengths.iter().sum();
        if !(length > 1e-6) {
            return None;
        }
        let count = (length / MAX_KNOT_SPACING).ceil().max(1.0) as usize;
        let spacing = length / count as f64;

        let mut knots = Vec::with_capacity(count + 1);
        let mut tangents = Vec::with_capacity(count + 1);
        let mut seg = 0;
        let mut seg_start = 0.0;
        for j in 0..=count {
            let s = if j == count {
                length
            } else {
                spacing * j as f64
            };
            while seg + 1 < source.segments() && s > seg_start + seg_lengths[seg] {
                seg_start += seg_lengths[seg];
                seg += 1;
            }
            let t = if j == count {
                source.param_range(seg).1
            } else {
                source.param_at_length(seg, s - seg_start, seg_lengths[seg])
            };
            knots.push(source.position(seg, t));
            tangents.push(source.derivative(seg, t).normalized());
        }
        Some(Self::from_knots(length, spacing, knots, tangents))
    }

    fn from_knots(length: f64, spacing: f64, knots: Vec<Vec2>, tangents: Vec<Vec2>) -> Self {
        let chunks = knots
            .chunks(CHUNK)
            .map(|c| {
                let (mut lo, mut hi) = (c[0], c[0]);
                for p in c {
                    lo = Vec2::new(lo.x.min(p.x), lo.y.min(p.y));
                    hi = Vec2::new(hi.x.max(p.x), hi.y.max(p.y));
                }
                let center = lo.lerp(hi, 0.5);
                let radius = c.iter().map(|p| p.distance(center)).fold(0.0, f64::max);
                (center, radius)
            })
            .collect::<Vec<_>>();
        let groups = chunks
            .chunks(GROUP)
            .map(|g: &[(Vec2, f64)]| {
                let (mut lo, mut hi) = (g[0].0, g[0].0);
                for (c, _) in g {
                    lo = Vec2::new(lo.x.min(c.x), lo.y.min(c.y));
                    hi = Vec2::new(hi.x.max(c.x), hi.y.max(c.y));
                }
                let center = lo.lerp(hi, 0.5);
                let radius = g
                    .iter()
                    .map(|(c, r)| c.distance(center) + r)
                    .fold(0.0, f64::max);
                (center, radius)
            })
            .collect();
        Self {
            length,
            spacing,
            knots,
            tangents,
            chunks,
            groups,
        }
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn knot_spacing(&self) -> f64 {
        self.spacing
    }

    pub fn knots(&self) -> &[Vec2] {
        &self.knots
    }

    fn segment(&self, p: f64) -> (usize, f64) {
        let last = self.knots.len() - 2;
        let seg = ((p / self.spacing).floor().max(0.0) as usize).min(last);
        let u = (p - seg as f64 * self.spacing) / self.spacing;
        (seg, u)
    }

    /// Position, first and second derivative with respect to arc length.
    /// `p` must already be inside `[0, length]`.
    pub fn eval(&self, p: f64) -> (Vec2, Vec2, Vec2) {
        let (seg, u) = self.segment(p);
        let h = self.spacing;
        let (p0, p1) = (self.knots[seg], self.knots[seg + 1]);
        let (t0, t1) = (self.tangents[seg] * h, self.tangents[seg + 1] * h);
        let (u2, u3) = (u * u, u * u * u);
        let pos = p0 * (2.0 * u3 - 3.0 * u2 + 1.0)
            + t0 * (u3 - 2.0 * u2 + u)
            + p1 * (-2.0 * u3 + 3.0 * u2)
            + t1 * (u3 - u2);
        let d1 = (p0 * (6.0 * u2 - 6.0 * u)
            + t0 * (3.0 * u2 - 4.0 * u + 1.0)
            + p1 * (-6.0 * u2 + 6.0 * u)
            + t1 * (3.0 * u2 - 2.0 * u))
            * (1.0 / h);
        let d2 = (p0 * (12.0 * u - 6.0)
            + t0 * (6.0 * u - 4.0)
            + p1 * (-12.0 * u + 6.0)
            + t1 * (6.0 * u - 2.0))
            * (1.0 / (h * h));
        (pos, d1, d2)
    }

    pub fn position(&self, p: f64) -> Vec2 {
        self.eval(p).0
    }

    pub fn heading(&self, p: f64) -> Vec2 {
        self.eval(p).1.normalized()
    }

    pub fn curvature(&self, p: f64) -> f64 {
        let (_, d1, d2) = self.eval(p);
        d1.cross(d2) / d1.norm().powi(3)
    }

    /// Length of the curve between parameters `a < b`, by quadrature.
    pub fn integrated_length(&self, a: f64, b: f64) -> f64 {
        let pieces = (((b - a) / self.spacing).ceil() as usize).max(1) * 2;
        gauss_legendre(a, b, pieces, |p| self.eval(p).1.norm())
    }

    /// Index of the knot nearest to `point`, identical to a full scan over
    /// all knots (ties resolved to the lowest index).
    pub fn nearest_knot(&self, point: Vec2) -> usize {
        let bound = |(c, r): &(Vec2, f64)| {
            let b = (point.distance(*c) - r).max(0.0);
            b * b
        };
        let seed = (0..self.groups.len())
            .min_by(|&a, &b| bound(&self.groups[a]).total_cmp(&bound(&self.groups[b])))
            .unwrap_or(0);
        let mut best = (f64::INFINITY, usize::MAX);
        let groups = std::iter::once(seed).chain((0..self.groups.len()).filter(|&g| g != seed));
        for g in groups {
            if bound(&self.groups[g]) > best.0 {
                continue;
            }
            let first = g * GROUP;
            let last = (first + GROUP).min(self.chunks.len());
            for chunk in first..last {
                if bound(&self.chunks[chunk]) > best.0 {
                    continue;
                }
                let start = chunk * CHUNK;
                let end = (start + CHUNK).min(self.knots.len());
                for idx in start..end {
                    let d2 = (self.knots[idx] - point).norm_squared();
                    if d2 < best.0 || (d2 == best.0 && idx < best.1) {
                        best = (d2, idx);
                    }
                }
            }
        }
        best.1
    }

    /// Arc length of the point on the curve closest to `point`: knot scan
    /// followed by safeguarded Newton refinement of the stationarity condition.
    pub fn project(&self, point: Vec2) -> f64 {
        let idx = self.nearest_knot(point);
        let center = idx as f64 * self.spacing;
        let lo = (center - self.spacing).max(0.0);
        let hi = (center + self.spacing).min(self.length);
        self.refine(point, lo, hi, center.min(self.length))
    }

    fn refine(&self, point: Vec2, mut lo: f64, mut hi: f64, start: f64) -> f64 {
        // g(p) = (phi(p) - point) . phi'(p) vanishes at a local minimum of distance.
        let g = |p: f64| {
            let (pos, d1, d2) = self.eval(p);
            let r = pos - point;
            (r.dot(d1), d1.norm_squared() + r.dot(d2))
        };
        let (g_lo, _) = g(lo);
        let (g_hi, _) = g(hi);
        if g_lo >= 0.0 && g_hi <= 0.0 {
            // Distance is not unimodal here; fall back to the closer end point.
            let d_lo = (self.position(lo) - point).norm_squared();
            let d_hi = (self.position(hi) - point).norm_squared();
            return if d_hi < d_lo { hi } else { lo };
        }
        if g_lo >= 0.0 {
            return lo;
        }
        if g_hi <= 0.0 {
            return hi;
        }
        let mut p = start.clamp(lo, hi);
        for _ in 0..100 {
            let (gv, dg) = g(p);
            if gv == 0.0 {
                return p;
            }
            if gv < 0.0 {
                lo = p;
            } else {
                hi = p;
            }
            let newton = if dg > 0.0 { p - gv / dg } else { f64::NAN };
            let next = if newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            let step = (next - p).abs();
            p = next;
            if step <= 1e-9 || hi - lo <= 1e-9 {
                break;
            }
        }
        p
    }
}
