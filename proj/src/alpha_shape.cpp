#include "scv2/alpha_shape.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace scv2 {

namespace {

using Eigen::Vector2d;

struct Tri {
    int a, b, c;
    Vector2d cc;     // circumcenter
    double r2;       // squared circumradius
    bool valid = true;
};

bool circumcircle(const Vector2d& p1, const Vector2d& p2, const Vector2d& p3,
                  Vector2d& center, double& r2) {
    double ax = p1.x(), ay = p1.y();
    double bx = p2.x(), by = p2.y();
    double cx = p3.x(), cy = p3.y();
    double d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
    if (std::abs(d) < 1e-14) return false;
    double a2 = ax * ax + ay * ay, b2 = bx * bx + by * by, c2 = cx * cx + cy * cy;
    center.x() = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
    center.y() = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
    r2 = (p1 - center).squaredNorm();
    return true;
}

} // namespace

std::vector<std::array<int, 3>> delaunay_2d(const std::vector<Vector2d>& points) {
    const int n = int(points.size());
    if (n < 3) return {};

    // Deterministic insertion order (lexicographic).
    std::vector<int> order(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) order[size_t(i)] = i;
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (points[size_t(a)].x() != points[size_t(b)].x())
            return points[size_t(a)].x() < points[size_t(b)].x();
        if (points[size_t(a)].y() != points[size_t(b)].y())
            return points[size_t(a)].y() < points[size_t(b)].y();
        return a < b;
    });

    // Super-triangle.
    Vector2d lo = points[0], hi = points[0];
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    Vector2d mid = 0.5 * (lo + hi);
    double span = std::max((hi - lo).maxCoeff(), 1e-9) * 64.0;
    std::vector<Vector2d> pts = points;
    int s0 = n, s1 = n + 1, s2 = n + 2;
    pts.push_back(mid + Vector2d(-span, -span * 0.5));
    pts.push_back(mid + Vector2d(span, -span * 0.5));
    pts.push_back(mid + Vector2d(0, span));

    std::vector<Tri> tris;
    auto make_tri = [&](int a, int b, int c) {
        Tri t{a, b, c, Vector2d::Zero(), 0.0, true};
        if (!circumcircle(pts[size_t(a)], pts[size_t(b)], pts[size_t(c)], t.cc, t.r2))
            t.valid = false; // degenerate, ignore
        return t;
    };
    tris.push_back(make_tri(s0, s1, s2));

    std::vector<int> previous_dup; // exact duplicates are skipped
    std::set<std::pair<double, double>> seen;
    for (int oi : order) {
        const Vector2d& p = pts[size_t(oi)];
        if (!seen.insert({p.x(), p.y()}).second) continue;

        // Triangles whose circumcircle contains p.
        std::map<std::pair<int, int>, int> edge_count;
        std::vector<size_t> bad;
        for (size_t t = 0; t < tris.size(); ++t) {
            if (!tris[t].valid) continue;
            if ((p - tris[t].cc).squaredNorm() <= tris[t].r2 * (1.0 + 1e-12)) {
                bad.push_back(t);
                int v[3] = {tris[t].a, tris[t].b, tris[t].c};
                for (int e = 0; e < 3; ++e) {
                    auto key = std::minmax(v[e], v[(e + 1) % 3]);
                    ++edge_count[{key.first, key.second}];
                }
            }
        }
        for (size_t t : bad) tris[t].valid = false;
        for (const auto& [edge, count] : edge_count) {
            if (count != 1) continue; // interior edge of the cavity
            Tri nt = make_tri(edge.first, edge.second, oi);
            if (nt.valid) tris.push_back(nt);
        }
        // Compact occasionally to bound memory on large inputs.
        if (tris.size() > 4096 && tris.size() > 4 * size_t(n)) {
            std::vector<Tri> live;
            live.reserve(tris.size() / 2);
            for (const auto& t : tris)
                if (t.valid) live.push_back(t);
            tris.swap(live);
        }
    }
    (void)previous_dup;

    std::vector<std::array<int, 3>> out;
    for (const auto& t : tris) {
        if (!t.valid) continue;
        if (t.a >= n || t.b >= n || t.c >= n) continue; // touches the super-triangle
        out.push_back({t.a, t.b, t.c});
    }
    return out;
}

AlphaShape alpha_shape_2d(const std::vector<Vector2d>& points, double alpha) {
    if (!(alpha > 0)) throw ContractError("alpha_shape_2d requires alpha > 0");
    AlphaShape shape;
    auto tris = delaunay_2d(points);
    if (tris.empty()) return shape;

    double a2 = alpha * alpha;
    std::map<std::pair<int, int>, int> edge_count;
    std::vector<std::array<int, 3>> kept;
    for (const auto& t : tris) {
        Vector2d cc;
        double r2;
        if (!circumcircle(points[size_t(t[0])], points[size_t(t[1])],
                          points[size_t(t[2])], cc, r2))
            continue;
        if (r2 > a2) continue;
        kept.push_back(t);
        for (int e = 0; e < 3; ++e) {
            auto key = std::minmax(t[size_t(e)], t[size_t((e + 1) % 3)]);
            ++edge_count[{key.first, key.second}];
        }
    }

    // Directed boundary edges, oriented with the kept triangle on the left.
    std::multimap<int, int> successor;
    for (const auto& t : kept) {
        for (int e = 0; e < 3; ++e) {
            int u = t[size_t(e)], v = t[size_t((e + 1) % 3)];
            auto key = std::minmax(u, v);
            if (edge_count[{key.first, key.second}] == 1)
                successor.insert({u, v});
        }
    }

    // Walk rings.
    while (!successor.empty()) {
        auto it = successor.begin();
        int start = it->first;
        Ring ring;
        int cur = start;
        while (true) {
            auto next = successor.find(cur);
            if (next == successor.end()) break; // open chain; drop it
            int nxt = next->second;
            successor.erase(next);
            ring.push_back(points[size_t(cur)]);
            cur = nxt;
            if (cur == start) break;
        }
        if (ring.size() >= 3 && cur == start) shape.rings.push_back(std::move(ring));
    }
    return shape;
}

double AlphaShape::area() const {
    double total = 0.0;
    for (const auto& ring : rings) {
        double s = 0.0;
        for (size_t i = 0; i < ring.size(); ++i) {
            const auto& p = ring[i];
            const auto& q = ring[(i + 1) % ring.size()];
            s += p.x() * q.y() - q.x() * p.y();
        }
        total += 0.5 * s;
    }
    return std::abs(total);
}

bool AlphaShape::contains(const Eigen::Vector2d& p) const {
    // Even-odd rule with an explicit boundary test.
    bool inside = false;
    for (const auto& ring : rings) {
        size_t m = ring.size();
        for (size_t i = 0; i < m; ++i) {
            const auto& a = ring[i];
            const auto& b = ring[(i + 1) % m];
            // On-segment check.
            Eigen::Vector2d ab = b - a, ap = p - a;
            double cross = ab.x() * ap.y() - ab.y() * ap.x();
            double dot = ap.dot(ab);
            if (std::abs(cross) < 1e-12 && dot >= -1e-12 &&
                dot <= ab.squaredNorm() + 1e-12)
                return true;
            // Ray cast along +x.
            bool cond = (a.y() > p.y()) != (b.y() > p.y());
            if (cond) {
                double xint = a.x() + (p.y() - a.y()) / (b.y() - a.y()) * (b.x() - a.x());
                if (xint > p.x()) inside = !inside;
            }
        }
    }
    return inside;
}

} // namespace scv2
