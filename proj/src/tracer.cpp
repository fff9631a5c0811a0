#include "tracekit/tracer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <limits>

namespace tracekit {

std::string to_string(TurnPolicy p) {
  switch (p) {
    case TurnPolicy::black: return "black";
    case TurnPolicy::white: return "white";
    case TurnPolicy::majority: return "majority";
    case TurnPolicy::minority: return "minority";
  }
  return "?";
}

TurnPolicy turn_policy_from_string(const std::string& s) {
  if (s == "black") return TurnPolicy::black;
  if (s == "white") return TurnPolicy::white;
  if (s == "majority") return TurnPolicy::majority;
  if (s == "minority") return TurnPolicy::minority;
  throw Error("unknown turn policy '" + s + "' (expected black, white, majority or minority)");
}

void TraceParams::validate() const {
  if (threshold < 0 || threshold > 256) throw Error("threshold must be in 0..256");
  if (turdsize < 0) throw Error("turdsize must be >= 0");
  if (!(alphamax >= 0)) throw Error("alphamax must be >= 0");
  if (!(opttolerance > 0)) throw Error("opttolerance must be > 0");
}

long signed_area2(const PathLoop& loop) {
  // Shoelace in y-down coordinates, negated so counterclockwise-on-screen is positive.
  long s = 0;
  const auto& v = loop.vertices;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    s += static_cast<long>(a.x) * b.y - static_cast<long>(b.x) * a.y;
  }
  return -s;
}

namespace {

inline int sign(double x) { return (x > 0) - (x < 0); }
inline int isign(int x) { return (x > 0) - (x < 0); }
inline int mod(int a, int n) { return a >= n ? a % n : a >= 0 ? a : n - 1 - (-1 - a) % n; }
inline int floordiv(int a, int n) { return a >= 0 ? a / n : -1 - (-1 - a) / n; }
inline double sq(double x) { return x * x; }

// ---------------------------------------------------------------------------
// Decomposition. Works on a y-up copy of the bitmap so that the walk matches
// the reference formulation; points are flipped on output.

class WorkBitmap {
 public:
  WorkBitmap(const Bitmap& b) : w_(b.width()), h_(b.height()), px_(static_cast<std::size_t>(w_) * h_) {
    for (int y = 0; y < h_; ++y)
      for (int x = 0; x < w_; ++x) px_[idx(x, y)] = b.get(x, h_ - 1 - y) ? 1 : 0;
  }
  int w() const { return w_; }
  int h() const { return h_; }
  bool get(int x, int y) const { return x >= 0 && y >= 0 && x < w_ && y < h_ && px_[idx(x, y)]; }
  void flip(int x, int y) { px_[idx(x, y)] ^= 1; }

  // Next black pixel at or after (x, y) scanning rows downward (y-up rows from the top).
  bool find_next(int& x, int& y) const {
    for (; y >= 0; --y, x = 0)
      for (; x < w_; ++x)
        if (px_[idx(x, y)]) return true;
    return false;
  }

 private:
  std::size_t idx(int x, int y) const { return static_cast<std::size_t>(y) * w_ + x; }
  int w_, h_;
  std::vector<std::uint8_t> px_;
};

bool majority(const WorkBitmap& bm, int x, int y) {
  for (int i = 2; i < 5; ++i) {
    int ct = 0;
    for (int a = -i + 1; a <= i - 1; ++a) {
      ct += bm.get(x + a, y + i - 1) ? 1 : -1;
      ct += bm.get(x + i - 1, y + a - 1) ? 1 : -1;
      ct += bm.get(x + a - 1, y - i) ? 1 : -1;
      ct += bm.get(x - i, y + a) ? 1 : -1;
    }
    if (ct > 0) return true;
    if (ct < 0) return false;
  }
  return false;
}

struct RawPath {
  std::vector<IPoint> pt;  // y-up
  long area = 0;
};

RawPath find_path(const WorkBitmap& bm, int x0, int y0, char sgn, TurnPolicy policy) {
  RawPath p;
  int x = x0, y = y0, dirx = 0, diry = -1;
  while (true) {
    p.pt.push_back({x, y});
    x += dirx;
    y += diry;
    p.area += static_cast<long>(x) * diry;
    if (x == x0 && y == y0) break;
    const bool c = bm.get(x + (dirx + diry - 1) / 2, y + (diry - dirx - 1) / 2);
    const bool d = bm.get(x + (dirx - diry - 1) / 2, y + (diry + dirx - 1) / 2);
    int tmp;
    if (c && !d) {
      const bool right = (policy == TurnPolicy::black && sgn == '+') || (policy == TurnPolicy::white && sgn == '-') ||
                         (policy == TurnPolicy::majority && majority(bm, x, y)) ||
                         (policy == TurnPolicy::minority && !majority(bm, x, y));
      if (right) {
        tmp = dirx;
        dirx = diry;
        diry = -tmp;
      } else {
        tmp = dirx;
        dirx = -diry;
        diry = tmp;
      }
    } else if (c) {
      tmp = dirx;
      dirx = diry;
      diry = -tmp;
    } else if (!d) {
      tmp = dirx;
      dirx = -diry;
      diry = tmp;
    }
  }
  return p;
}

// Inverts every pixel enclosed by the path (row spans between path x and a reference column).
void xor_path(WorkBitmap& bm, const RawPath& p) {
  if (p.pt.empty()) return;
  int y1 = p.pt.back().y;
  const int xa = p.pt[0].x;
  for (const auto& q : p.pt) {
    if (q.y != y1) {
      const int row = std::min(q.y, y1);
      for (int x = std::min(q.x, xa); x < std::max(q.x, xa); ++x) bm.flip(x, row);
      y1 = q.y;
    }
  }
}

// ---------------------------------------------------------------------------
// Polygon stages.

struct Sums {
  double x = 0, y = 0, x2 = 0, xy = 0, y2 = 0;
};

std::vector<Sums> calc_sums(const std::vector<IPoint>& pt) {
  const int n = static_cast<int>(pt.size());
  std::vector<Sums> s(n + 1);
  for (int i = 0; i < n; ++i) {
    const double x = pt[i].x - pt[0].x, y = pt[i].y - pt[0].y;
    s[i + 1] = {s[i].x + x, s[i].y + y, s[i].x2 + x * x, s[i].xy + x * y, s[i].y2 + y * y};
  }
  return s;
}

inline int xprod(IPoint a, IPoint b) { return a.x * b.y - a.y * b.x; }

inline bool cyclic(int a, int b, int c) { return a <= c ? (a <= b && b < c) : (a <= b || b < c); }

std::vector<int> calc_lon(const std::vector<IPoint>& pt) {
  constexpr int kInfty = 10000000;
  const int n = static_cast<int>(pt.size());
  std::vector<int> pivk(n), nc(n), lon(n);

  int k = 0;
  for (int i = n - 1; i >= 0; --i) {
    if (pt[i].x != pt[k].x && pt[i].y != pt[k].y) k = i + 1;
    nc[i] = k;
  }

  for (int i = n - 1; i >= 0; --i) {
    int ct[4] = {0, 0, 0, 0};
    int dir = (3 + 3 * (pt[mod(i + 1, n)].x - pt[i].x) + (pt[mod(i + 1, n)].y - pt[i].y)) / 2;
    ct[dir]++;
    IPoint constraint[2] = {{0, 0}, {0, 0}};
    k = nc[i];
    int k1 = i;
    bool found = false;
    while (true) {
      dir = (3 + 3 * isign(pt[k].x - pt[k1].x) + isign(pt[k].y - pt[k1].y)) / 2;
      ct[dir]++;
      if (ct[0] && ct[1] && ct[2] && ct[3]) {
        pivk[i] = k1;
        found = true;
        break;
      }
      const IPoint cur{pt[k].x - pt[i].x, pt[k].y - pt[i].y};
      if (xprod(constraint[0], cur) < 0 || xprod(constraint[1], cur) > 0) break;
      if (std::abs(cur.x) > 1 || std::abs(cur.y) > 1) {
        IPoint off{cur.x + ((cur.y >= 0 && (cur.y > 0 || cur.x < 0)) ? 1 : -1),
                   cur.y + ((cur.x <= 0 && (cur.x < 0 || cur.y < 0)) ? 1 : -1)};
        if (xprod(constraint[0], off) >= 0) constraint[0] = off;
        off = {cur.x + ((cur.y <= 0 && (cur.y < 0 || cur.x < 0)) ? 1 : -1),
               cur.y + ((cur.x >= 0 && (cur.x > 0 || cur.y < 0)) ? 1 : -1)};
        if (xprod(constraint[1], off) <= 0) constraint[1] = off;
      }
      k1 = k;
      k = nc[k1];
      if (!cyclic(k, i, k1)) break;
    }
    if (found) continue;
    // k1 satisfied the constraints, k does not: find the last point between them that does.
    const IPoint dk{isign(pt[k].x - pt[k1].x), isign(pt[k].y - pt[k1].y)};
    const IPoint cur{pt[k1].x - pt[i].x, pt[k1].y - pt[i].y};
    const int a = xprod(constraint[0], cur), b = xprod(constraint[0], dk);
    const int c = xprod(constraint[1], cur), d = xprod(constraint[1], dk);
    int j = kInfty;
    if (b < 0) j = floordiv(a, -b);
    if (d > 0) j = std::min(j, floordiv(-c, d));
    pivk[i] = mod(k1 + j, n);
  }

  int j = pivk[n - 1];
  lon[n - 1] = j;
  for (int i = n - 2; i >= 0; --i) {
    if (cyclic(i + 1, pivk[i], j)) j = pivk[i];
    lon[i] = j;
  }
  for (int i = n - 1; cyclic(mod(i + 1, n), j, lon[i]); --i) lon[i] = j;
  return lon;
}

double penalty3(const std::vector<IPoint>& pt, const std::vector<Sums>& sums, int i, int j) {
  const int n = static_cast<int>(pt.size());
  int r = 0;
  if (j >= n) {
    j -= n;
    r = 1;
  }
  double x, y, x2, xy, y2, k;
  if (r == 0) {
    x = sums[j + 1].x - sums[i].x;
    y = sums[j + 1].y - sums[i].y;
    x2 = sums[j + 1].x2 - sums[i].x2;
    xy = sums[j + 1].xy - sums[i].xy;
    y2 = sums[j + 1].y2 - sums[i].y2;
    k = j + 1 - i;
  } else {
    x = sums[j + 1].x - sums[i].x + sums[n].x;
    y = sums[j + 1].y - sums[i].y + sums[n].y;
    x2 = sums[j + 1].x2 - sums[i].x2 + sums[n].x2;
    xy = sums[j + 1].xy - sums[i].xy + sums[n].xy;
    y2 = sums[j + 1].y2 - sums[i].y2 + sums[n].y2;
    k = j + 1 - i + n;
  }
  const double px = (pt[i].x + pt[j].x) / 2.0 - pt[0].x;
  const double py = (pt[i].y + pt[j].y) / 2.0 - pt[0].y;
  const double ey = (pt[j].x - pt[i].x);
  const double ex = -(pt[j].y - pt[i].y);
  const double a = ((x2 - 2 * x * px) / k + px * px);
  const double b = ((xy - x * py - y * px) / k + px * py);
  const double c = ((y2 - 2 * y * py) / k + py * py);
  const double s = ex * ex * a + 2 * ex * ey * b + ey * ey * c;
  return std::sqrt(std::max(s, 0.0));
}

// Optimal polygon through vertex 0 (non-cyclic dynamic program).
struct Anchored {
  std::vector<int> po;
  double penalty = 0;
};

Anchored best_polygon_at_zero(const std::vector<IPoint>& pt, const std::vector<int>& lon) {
  const int n = static_cast<int>(pt.size());
  const auto sums = calc_sums(pt);
  std::vector<double> pen(n + 1);
  std::vector<int> prev(n + 1), clip0(n), clip1(n + 1), seg0(n + 1), seg1(n + 1);

  for (int i = 0; i < n; ++i) {
    int c = mod(lon[mod(i - 1, n)] - 1, n);
    if (c == i) c = mod(i + 1, n);
    clip0[i] = c < i ? n : c;
  }
  int j = 1;
  for (int i = 0; i < n; ++i)
    while (j <= clip0[i]) clip1[j++] = i;

  int i = 0;
  for (j = 0; i < n; ++j) {
    seg0[j] = i;
    i = clip0[i];
  }
  seg0[j] = n;
  const int m = j;

  i = n;
  for (j = m; j > 0; --j) {
    seg1[j] = i;
    i = clip1[i];
  }
  seg1[0] = 0;

  pen[0] = 0;
  for (j = 1; j <= m; ++j) {
    for (i = seg1[j]; i <= seg0[j]; ++i) {
      double best = -1;
      for (int k = seg0[j - 1]; k >= clip1[i]; --k) {
        const double thispen = penalty3(pt, sums, k, i) + pen[k];
        if (best < 0 || thispen < best) {
          prev[i] = k;
          best = thispen;
        }
      }
      pen[i] = best;
    }
  }

  Anchored out;
  out.po.resize(m);
  out.penalty = pen[n];
  for (i = n, j = m - 1; i > 0; --j) {
    i = prev[i];
    out.po[j] = i;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Geometry helpers for vertex adjustment, smoothing and curve optimization.

using Quad = double[3][3];

double quadform(const Quad& q, Point w) {
  const double v[3] = {w.x, w.y, 1.0};
  double s = 0;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) s += v[i] * q[i][j] * v[j];
  return s;
}

void pointslope(const std::vector<IPoint>& pt, const std::vector<Sums>& sums, int i, int j, Point& ctr, Point& dir) {
  const int n = static_cast<int>(pt.size());
  int r = 0;
  while (j >= n) {
    j -= n;
    r += 1;
  }
  while (i >= n) {
    i -= n;
    r -= 1;
  }
  while (j < 0) {
    j += n;
    r -= 1;
  }
  while (i < 0) {
    i += n;
    r += 1;
  }
  const double x = sums[j + 1].x - sums[i].x + r * sums[n].x;
  const double y = sums[j + 1].y - sums[i].y + r * sums[n].y;
  const double x2 = sums[j + 1].x2 - sums[i].x2 + r * sums[n].x2;
  const double xy = sums[j + 1].xy - sums[i].xy + r * sums[n].xy;
  const double y2 = sums[j + 1].y2 - sums[i].y2 + r * sums[n].y2;
  const double k = j + 1 - i + r * n;

  ctr = {x / k, y / k};
  double a = (x2 - x * x / k) / k;
  const double b = (xy - x * y / k) / k;
  double c = (y2 - y * y / k) / k;
  const double lambda2 = (a + c + std::sqrt((a - c) * (a - c) + 4 * b * b)) / 2;
  a -= lambda2;
  c -= lambda2;
  double l;
  if (std::fabs(a) >= std::fabs(c)) {
    l = std::sqrt(a * a + b * b);
    if (l != 0) dir = {-b / l, a / l};
  } else {
    l = std::sqrt(c * c + b * b);
    if (l != 0) dir = {-c / l, b / l};
  }
  if (l == 0) dir = {0, 0};
}

IPoint dorth_infty(Point p0, Point p2) { return {-sign(p2.y - p0.y), sign(p2.x - p0.x)}; }

double dpara(Point p0, Point p1, Point p2) {
  return (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
}

double ddenom(Point p0, Point p2) {
  const IPoint r = dorth_infty(p0, p2);
  return r.y * (p2.x - p0.x) - r.x * (p2.y - p0.y);
}

double cprod(Point p0, Point p1, Point p2, Point p3) {
  return (p1.x - p0.x) * (p3.y - p2.y) - (p3.x - p2.x) * (p1.y - p0.y);
}

double iprod(Point p0, Point p1, Point p2) { return (p1.x - p0.x) * (p2.x - p0.x) + (p1.y - p0.y) * (p2.y - p0.y); }

double iprod1(Point p0, Point p1, Point p2, Point p3) {
  return (p1.x - p0.x) * (p3.x - p2.x) + (p1.y - p0.y) * (p3.y - p2.y);
}

double ddist(Point p, Point q) { return std::sqrt(sq(p.x - q.x) + sq(p.y - q.y)); }

Point bezier(double t, Point p0, Point p1, Point p2, Point p3) {
  const double s = 1 - t;
  return {s * s * s * p0.x + 3 * (s * s * t) * p1.x + 3 * (t * t * s) * p2.x + t * t * t * p3.x,
          s * s * s * p0.y + 3 * (s * s * t) * p1.y + 3 * (t * t * s) * p2.y + t * t * t * p3.y};
}

// Parameter in [0, 1] where the Bezier is tangent to q0q1, or -1.
double tangent(Point p0, Point p1, Point p2, Point p3, Point q0, Point q1) {
  const double A = cprod(p0, p1, q0, q1), B = cprod(p1, p2, q0, q1), C = cprod(p2, p3, q0, q1);
  const double a = A - 2 * B + C, b = -2 * A + 2 * B, c = A;
  const double d = b * b - 4 * a * c;
  if (a == 0 || d < 0) return -1.0;
  const double s = std::sqrt(d);
  const double r1 = (-b + s) / (2 * a), r2 = (-b - s) / (2 * a);
  if (r1 >= 0 && r1 <= 1) return r1;
  if (r2 >= 0 && r2 <= 1) return r2;
  return -1.0;
}

struct Opti {
  double pen = 0;
  Point c[2];
  double t = 0, s = 0, alpha = 0;
};

constexpr double kCos179 = -0.999847695156;

bool opti_penalty(const Curve& cv, int i, int j, Opti& res, double opttolerance, const std::vector<int>& convc,
                  const std::vector<double>& areac) {
  const int m = static_cast<int>(cv.size());
  const auto V = [&](int k) { return cv.segments[k].vertex; };
  const auto C2 = [&](int k) { return cv.segments[k].c[2]; };
  if (i == j) return false;

  int k = i;
  const int i1 = mod(i + 1, m);
  int k1 = mod(k + 1, m);
  const int conv = convc[k1];
  if (conv == 0) return false;
  double d = ddist(V(i), V(i1));
  for (k = k1; k != j; k = k1) {
    k1 = mod(k + 1, m);
    const int k2 = mod(k + 2, m);
    if (convc[k1] != conv) return false;
    if (sign(cprod(V(i), V(i1), V(k1), V(k2))) != conv) return false;
    if (iprod1(V(i), V(i1), V(k1), V(k2)) < d * ddist(V(k1), V(k2)) * kCos179) return false;
  }

  const Point p0 = C2(mod(i, m));
  Point p1 = V(mod(i + 1, m));
  Point p2 = V(mod(j, m));
  const Point p3 = C2(mod(j, m));

  double area = areac[j] - areac[i];
  area -= dpara(V(0), C2(i), C2(j)) / 2;
  if (i >= j) area += areac[m];

  const double A1 = dpara(p0, p1, p2), A2 = dpara(p0, p1, p3), A3 = dpara(p0, p2, p3);
  const double A4 = A1 + A3 - A2;
  if (A2 == A1) return false;
  double t = A3 / (A3 - A4);
  const double s = A2 / (A2 - A1);
  const double A = A2 * t / 2.0;
  if (A == 0.0) return false;

  const double R = area / A;
  const double alpha = 2 - std::sqrt(4 - R / 0.3);
  res.c[0] = lerp(t * alpha, p0, p1);
  res.c[1] = lerp(s * alpha, p3, p2);
  res.alpha = alpha;
  res.t = t;
  res.s = s;
  p1 = res.c[0];
  p2 = res.c[1];
  res.pen = 0;

  for (k = mod(i + 1, m); k != j; k = k1) {
    k1 = mod(k + 1, m);
    t = tangent(p0, p1, p2, p3, V(k), V(k1));
    if (t < -.5) return false;
    const Point pt = bezier(t, p0, p1, p2, p3);
    d = ddist(V(k), V(k1));
    if (d == 0.0) return false;
    const double d1 = dpara(V(k), V(k1), pt) / d;
    if (std::fabs(d1) > opttolerance) return false;
    if (iprod(V(k), V(k1), pt) < 0 || iprod(V(k1), V(k), pt) < 0) return false;
    res.pen += sq(d1);
  }

  for (k = i; k != j; k = k1) {
    k1 = mod(k + 1, m);
    t = tangent(p0, p1, p2, p3, C2(k), C2(k1));
    if (t < -.5) return false;
    const Point pt = bezier(t, p0, p1, p2, p3);
    d = ddist(C2(k), C2(k1));
    if (d == 0.0) return false;
    double d1 = dpara(C2(k), C2(k1), pt) / d;
    double d2 = dpara(C2(k), C2(k1), V(k1)) / d;
    d2 *= 0.75 * cv.segments[k1].alpha;
    if (d2 < 0) {
      d1 = -d1;
      d2 = -d2;
    }
    if (d1 < d2 - opttolerance) return false;
    if (d1 < d2) res.pen += sq(d1 - d2);
  }
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------

std::vector<PathLoop> decompose_paths(const Bitmap& bmp, const TraceParams& params) {
  params.validate();
  WorkBitmap bm(bmp);
  const int H = bm.h();
  std::vector<PathLoop> out;
  int x = 0, y = H - 1;
  while (bm.find_next(x, y)) {
    const char sgn = bmp.get(x, H - 1 - y) ? '+' : '-';
    RawPath raw = find_path(bm, x, y + 1, sgn, params.turnpolicy);
    xor_path(bm, raw);
    if (raw.area < params.turdsize) continue;
    PathLoop loop;
    loop.sign = sgn;
    loop.area = raw.area;
    loop.vertices.reserve(raw.pt.size());
    for (const auto& p : raw.pt) loop.vertices.push_back({p.x, H - p.y});
    // The walk runs the same way round for both signs; holes are reversed
    // (keeping the first vertex) so orientation encodes the sign.
    if (sgn == '-') std::reverse(loop.vertices.begin() + 1, loop.vertices.end());
    out.push_back(std::move(loop));
  }
  return out;
}

std::vector<int> longest_straight(const PathLoop& loop) {
  if (loop.vertices.size() < 4) throw Error("degenerate loop: fewer than 4 edges");
  return calc_lon(loop.vertices);
}

double segment_penalty(const PathLoop& loop, int i, int j) {
  const int n = static_cast<int>(loop.vertices.size());
  if (i < 0 || i >= n || j <= i || j > i + n) throw Error("segment_penalty: index out of range");
  return penalty3(loop.vertices, calc_sums(loop.vertices), i, j);
}

Polygon best_polygon(const PathLoop& loop) {
  const auto& pt = loop.vertices;
  const int n = static_cast<int>(pt.size());
  if (n < 4) throw Error("degenerate loop: fewer than 4 edges");
  const auto lon = calc_lon(pt);

  // Every polygon has a corner in [0, clip0(0)]: the segment covering vertex 0
  // could start at 0 instead. Try each such anchor, keeping only anchors that
  // attain the fewest segments.
  const auto clip = [&](int i) {
    int c = mod(lon[mod(i - 1, n)] - 1, n);
    if (c == i) c = mod(i + 1, n);
    return c;
  };
  const auto greedy_count = [&](int s) {
    int i = 0, count = 0;
    while (i < n) {
      const int c = mod(clip(mod(i + s, n)) - s, n);
      i = c < i || c == 0 ? n : c;
      ++count;
    }
    return count;
  };
  int last = clip(0);
  if (last == 0) last = n - 1;
  std::vector<int> counts;
  int best_count = std::numeric_limits<int>::max();
  for (int s = 0; s <= last; ++s) {
    counts.push_back(greedy_count(s));
    best_count = std::min(best_count, counts.back());
  }

  Polygon best;
  double best_pen = std::numeric_limits<double>::infinity();
  std::vector<IPoint> rpt(n);
  std::vector<int> rlon(n);
  for (int s = 0; s <= last; ++s) {
    if (counts[s] != best_count) continue;
    for (int i = 0; i < n; ++i) {
      rpt[i] = pt[(i + s) % n];
      rlon[i] = mod(lon[(i + s) % n] - s, n);
    }
    const Anchored a = best_polygon_at_zero(rpt, rlon);
    if (best.indices.empty() || a.penalty < best_pen - 1e-9 * std::max(1.0, best_pen)) {
      best_pen = a.penalty;
      best.indices.clear();
      for (int v : a.po) best.indices.push_back((v + s) % n);
      std::sort(best.indices.begin(), best.indices.end());
    }
  }
  return best;
}

std::vector<Point> adjust_vertices(const PathLoop& loop, const Polygon& polygon) {
  const auto& pt = loop.vertices;
  const int n = static_cast<int>(pt.size());
  const int m = static_cast<int>(polygon.indices.size());
  if (m < 2 || n < 4) throw Error("adjust_vertices: degenerate polygon");
  const auto& po = polygon.indices;
  const auto sums = calc_sums(pt);
  const int x0 = pt[0].x, y0 = pt[0].y;

  std::vector<Point> ctr(m), dir(m), out(m);
  std::vector<std::array<std::array<double, 3>, 3>> q(m);
  for (int i = 0; i < m; ++i) {
    int j = po[mod(i + 1, m)];
    j = mod(j - po[i], n) + po[i];
    pointslope(pt, sums, po[i], j, ctr[i], dir[i]);
  }
  for (int i = 0; i < m; ++i) {
    const double d = sq(dir[i].x) + sq(dir[i].y);
    if (d == 0.0) {
      for (auto& row : q[i]) row.fill(0);
    } else {
      double v[3] = {dir[i].y, -dir[i].x, 0};
      v[2] = -v[1] * ctr[i].y - v[0] * ctr[i].x;
      for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 3; ++k) q[i][l][k] = v[l] * v[k] / d;
    }
  }

  for (int i = 0; i < m; ++i) {
    Quad Q;
    Point w;
    const Point s{static_cast<double>(pt[po[i]].x - x0), static_cast<double>(pt[po[i]].y - y0)};
    const int j = mod(i - 1, m);
    for (int l = 0; l < 3; ++l)
      for (int k = 0; k < 3; ++k) Q[l][k] = q[j][l][k] + q[i][l][k];

    while (true) {
      const double det = Q[0][0] * Q[1][1] - Q[0][1] * Q[1][0];
      if (det != 0.0) {
        w.x = (-Q[0][2] * Q[1][1] + Q[1][2] * Q[0][1]) / det;
        w.y = (Q[0][2] * Q[1][0] - Q[1][2] * Q[0][0]) / det;
        break;
      }
      // Parallel lines: add an orthogonal axis through the vertex.
      double v[3];
      if (Q[0][0] > Q[1][1]) {
        v[0] = -Q[0][1];
        v[1] = Q[0][0];
      } else if (Q[1][1] != 0.0) {
        v[0] = -Q[1][1];
        v[1] = Q[1][0];
      } else {
        v[0] = 1;
        v[1] = 0;
      }
      const double d = sq(v[0]) + sq(v[1]);
      v[2] = -v[1] * s.y - v[0] * s.x;
      for (int l = 0; l < 3; ++l)
        for (int k = 0; k < 3; ++k) Q[l][k] += v[l] * v[k] / d;
    }
    if (std::fabs(w.x - s.x) <= .5 && std::fabs(w.y - s.y) <= .5) {
      out[i] = {w.x + x0, w.y + y0};
      continue;
    }

    // Minimum lies outside the unit square: search its boundary.
    double min = quadform(Q, s);
    double xmin = s.x, ymin = s.y;
    if (Q[0][0] != 0.0) {
      for (int z = 0; z < 2; ++z) {
        w.y = s.y - 0.5 + z;
        w.x = -(Q[0][1] * w.y + Q[0][2]) / Q[0][0];
        const double cand = quadform(Q, w);
        if (std::fabs(w.x - s.x) <= .5 && cand < min) {
          min = cand;
          xmin = w.x;
          ymin = w.y;
        }
      }
    }
    if (Q[1][1] != 0.0) {
      for (int z = 0; z < 2; ++z) {
        w.x = s.x - 0.5 + z;
        w.y = -(Q[1][0] * w.x + Q[1][2]) / Q[1][1];
        const double cand = quadform(Q, w);
        if (std::fabs(w.y - s.y) <= .5 && cand < min) {
          min = cand;
          xmin = w.x;
          ymin = w.y;
        }
      }
    }
    for (int l = 0; l < 2; ++l)
      for (int k = 0; k < 2; ++k) {
        w = {s.x - 0.5 + l, s.y - 0.5 + k};
        const double cand = quadform(Q, w);
        if (cand < min) {
          min = cand;
          xmin = w.x;
          ymin = w.y;
        }
      }
    out[i] = {xmin + x0, ymin + y0};
  }
  return out;
}

Curve smooth(const std::vector<Point>& vertices, double alphamax) {
  const int m = static_cast<int>(vertices.size());
  if (m < 3) throw Error("smooth: need at least 3 vertices");
  Curve cv;
  cv.segments.resize(m);
  for (int i = 0; i < m; ++i) {
    const int j = mod(i + 1, m), k = mod(i + 2, m);
    const Point p4 = lerp(0.5, vertices[k], vertices[j]);
    double alpha;
    const double denom = ddenom(vertices[i], vertices[k]);
    if (denom != 0.0) {
      double dd = std::fabs(dpara(vertices[i], vertices[j], vertices[k]) / denom);
      alpha = dd > 1 ? (1 - 1.0 / dd) : 0;
      alpha = alpha / 0.75;
    } else {
      alpha = 4 / 3.0;
    }
    auto& seg = cv.segments[j];
    seg.vertex = vertices[j];
    seg.alpha0 = alpha;
    if (alpha > alphamax) {
      seg.tag = CurveTag::corner;
      seg.c[1] = vertices[j];
      seg.c[2] = p4;
    } else {
      alpha = std::clamp(alpha, 0.55, 1.0);
      seg.tag = CurveTag::curveto;
      seg.c[0] = lerp(.5 + .5 * alpha, vertices[i], vertices[j]);
      seg.c[1] = lerp(.5 + .5 * alpha, vertices[k], vertices[j]);
      seg.c[2] = p4;
    }
    seg.alpha = alpha;
    seg.beta = 0.5;
  }
  return cv;
}

Curve optimize_curve(const Curve& cv, double opttolerance) {
  if (!(opttolerance > 0)) throw Error("opttolerance must be > 0");
  const int m = static_cast<int>(cv.size());
  if (m < 2) return cv;
  const auto& S = cv.segments;

  std::vector<int> convc(m);
  for (int i = 0; i < m; ++i)
    convc[i] = S[i].tag == CurveTag::curveto ? sign(dpara(S[mod(i - 1, m)].vertex, S[i].vertex, S[mod(i + 1, m)].vertex))
                                             : 0;

  std::vector<double> areac(m + 1);
  double area = 0;
  const Point p0 = S[0].vertex;
  for (int i = 0; i < m; ++i) {
    const int i1 = mod(i + 1, m);
    if (S[i1].tag == CurveTag::curveto) {
      const double alpha = S[i1].alpha;
      area += 0.3 * alpha * (4 - alpha) * dpara(S[i].c[2], S[i1].vertex, S[i1].c[2]) / 2;
      area += dpara(p0, S[i].c[2], S[i1].c[2]) / 2;
    }
    areac[i + 1] = area;
  }

  std::vector<int> pt(m + 1), len(m + 1);
  std::vector<double> pen(m + 1);
  std::vector<Opti> opt(m + 1);
  pt[0] = -1;
  pen[0] = 0;
  len[0] = 0;
  for (int j = 1; j <= m; ++j) {
    pt[j] = j - 1;
    pen[j] = pen[j - 1];
    len[j] = len[j - 1] + 1;
    for (int i = j - 2; i >= 0; --i) {
      Opti o;
      if (!opti_penalty(cv, i, mod(j, m), o, opttolerance, convc, areac)) break;
      if (len[j] > len[i] + 1 || (len[j] == len[i] + 1 && pen[j] > pen[i] + o.pen)) {
        pt[j] = i;
        pen[j] = pen[i] + o.pen;
        len[j] = len[i] + 1;
        opt[j] = o;
      }
    }
  }

  const int om = len[m];
  Curve out;
  out.segments.resize(om);
  std::vector<double> s(om), t(om);
  int j = m;
  for (int i = om - 1; i >= 0; --i) {
    auto& o = out.segments[i];
    const auto& src = S[mod(j, m)];
    if (pt[j] == j - 1) {
      o = src;
      s[i] = t[i] = 1.0;
    } else {
      o.tag = CurveTag::curveto;
      o.c[0] = opt[j].c[0];
      o.c[1] = opt[j].c[1];
      o.c[2] = src.c[2];
      o.vertex = lerp(opt[j].s, src.c[2], src.vertex);
      o.alpha = o.alpha0 = opt[j].alpha;
      s[i] = opt[j].s;
      t[i] = opt[j].t;
    }
    j = pt[j];
  }
  for (int i = 0; i < om; ++i) out.segments[i].beta = s[i] / (s[i] + t[mod(i + 1, om)]);
  return out;
}

SubPath to_subpath(const Curve& cv) {
  SubPath sp;
  if (cv.segments.empty()) return sp;
  sp.start = cv.start();
  for (const auto& seg : cv.segments) {
    if (seg.tag == CurveTag::corner) {
      sp.segments.push_back({SegmentKind::line, {}, {}, seg.vertex});
      sp.segments.push_back({SegmentKind::line, {}, {}, seg.c[2]});
    } else {
      sp.segments.push_back({SegmentKind::cubic, seg.c[0], seg.c[1], seg.c[2]});
    }
  }
  return sp;
}

Curve trace_loop(const PathLoop& loop, const TraceParams& params) {
  const Polygon poly = best_polygon(loop);
  Curve cv = smooth(adjust_vertices(loop, poly), params.alphamax);
  if (params.opticurve) cv = optimize_curve(cv, params.opttolerance);
  return cv;
}

namespace {

// Even-odd crossing test against the lattice polygon; `px`, `py` are pixel centers.
bool loop_contains(const PathLoop& loop, double px, double py) {
  bool inside = false;
  const auto& v = loop.vertices;
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > py) != (v[j].y > py)) {
      const double x = v[j].x + (py - v[j].y) * (v[i].x - v[j].x) / static_cast<double>(v[i].y - v[j].y);
      if (px < x) inside = !inside;
    }
  }
  return inside;
}

struct Box {
  int x0, y0, x1, y1;
};

Box bounds(const PathLoop& loop) {
  Box b{std::numeric_limits<int>::max(), std::numeric_limits<int>::max(), std::numeric_limits<int>::min(),
        std::numeric_limits<int>::min()};
  for (const auto& p : loop.vertices) {
    b.x0 = std::min(b.x0, p.x);
    b.y0 = std::min(b.y0, p.y);
    b.x1 = std::max(b.x1, p.x);
    b.y1 = std::max(b.y1, p.y);
  }
  return b;
}

}  // namespace

VectorDoc trace_bitmap(const Bitmap& bmp, const TraceParams& params) {
  params.validate();
  const auto loops = decompose_paths(bmp, params);
  VectorDoc doc;
  doc.width = bmp.width();
  doc.height = bmp.height();

  std::vector<Box> boxes;
  boxes.reserve(loops.size());
  for (const auto& l : loops) boxes.push_back(bounds(l));

  // Outline loops become paths; each hole joins the smallest outline around it.
  std::vector<int> path_of(loops.size(), -1);
  std::vector<std::size_t> outlines;
  for (std::size_t i = 0; i < loops.size(); ++i)
    if (loops[i].sign == '+') {
      path_of[i] = static_cast<int>(doc.paths.size());
      doc.paths.emplace_back();
      outlines.push_back(i);
    }
  for (std::size_t i = 0; i < loops.size(); ++i) {
    const auto& l = loops[i];
    if (l.sign == '+') {
      doc.paths[path_of[i]].loops.push_back(to_subpath(trace_loop(l, params)));
      continue;
    }
    const double px = l.vertices[0].x + 0.5, py = l.vertices[0].y + 0.5;
    long best_area = std::numeric_limits<long>::max();
    int parent = -1;
    for (std::size_t o : outlines) {
      const Box& b = boxes[o];
      if (loops[o].area <= l.area || loops[o].area >= best_area) continue;
      if (px < b.x0 || px > b.x1 || py < b.y0 || py > b.y1) continue;
      if (!loop_contains(loops[o], px, py)) continue;
      best_area = loops[o].area;
      parent = path_of[o];
    }
    SubPath sp = to_subpath(trace_loop(l, params));
    if (parent >= 0) {
      doc.paths[parent].loops.push_back(std::move(sp));
    } else {
      // Only reachable if the outline was despeckled away; keep the hole on its own.
      doc.paths.push_back(VectorPath{{std::move(sp)}});
    }
  }
  return doc;
}

VectorDoc trace(const GrayImage& img, const TraceParams& params) {
  params.validate();
  return trace_bitmap(threshold(img, params.threshold), params);
}

}  // namespace tracekit
