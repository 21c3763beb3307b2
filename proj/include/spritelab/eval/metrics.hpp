#pragma once

#include <optional>

#include "spritelab/eval/detect.hpp"
#include "spritelab/world/types.hpp"

namespace spritelab::evalkit {

// Mean IoU over frames and subjects; ABSENT detections count 0.
inline double miou(const std::vector<std::vector<std::optional<Box>>>& detected,
                   const std::vector<std::vector<Box>>& target) {
    double acc = 0.0;
    int64_t n = 0;
    for (size_t s = 0; s < target.size(); ++s)
        for (size_t f = 0; f < target[s].size(); ++f) {
            const auto& d = detected.at(s).at(f);
            acc += d ? cond::iou(*d, target[s][f]) : 0.0;
            ++n;
        }
    return n ? acc / static_cast<double>(n) : 0.0;
}

struct TrackerConfig {
    int patch = 8;    // template side
    int window = 8;   // +- search radius
};

struct EpeResult {
    double epe = 0.0;
    bool clamped = false;  // some template left the frame
    std::vector<std::vector<std::array<float, 2>>> tracked;  // [point][frame]
};

namespace detail {

inline void extract_patch(const Tensor& video, int f, int cx, int cy, int patch,
                          std::vector<float>& out, bool& clamped) {
    const int hh = video.dim(1), ww = video.dim(2);
    const int half = patch / 2;
    out.resize(static_cast<size_t>(patch) * patch * 3);
    size_t k = 0;
    for (int dy = -half; dy < patch - half; ++dy)
        for (int dx = -half; dx < patch - half; ++dx) {
            int x = cx + dx, y = cy + dy;
            if (x < 0 || x >= ww || y < 0 || y >= hh) {
                clamped = true;
                x = std::clamp(x, 0, ww - 1);
                y = std::clamp(y, 0, hh - 1);
            }
            for (int c = 0; c < 3; ++c)
                out[k++] = video.at(f, y, x, c);
        }
}

inline double ncc(const std::vector<float>& a, const std::vector<float>& b) {
    const size_t n = a.size();
    double ma = 0.0, mb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double num = 0.0, va = 0.0, vb = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        num += da * db;
        va += da * da;
        vb += db * db;
    }
    if (va < 1e-10 || vb < 1e-10) return va < 1e-10 && vb < 1e-10 ? 1.0 : -1.0;
    return num / std::sqrt(va * vb);
}

// Quadratic peak interpolation; returns 0 at an exact-match peak so integer
// translations track with zero error.
inline double subpixel(double nm, double n0, double np) {
    if (n0 >= 1.0 - 1e-6) return 0.0;
    const double den = nm - 2.0 * n0 + np;
    if (den >= -1e-12) return 0.0;
    const double off = 0.5 * (nm - np) / den;
    return std::clamp(off, -0.5, 0.5);
}

}  // namespace detail

// Normalized-cross-correlation template tracker: an 8x8 patch around the
// previous position, searched within +-8 px, template refreshed every frame.
inline EpeResult epe(const Tensor& video, const std::vector<std::array<float, 2>>& query_points,
                     const std::vector<std::vector<std::array<float, 2>>>& target_trajectories,
                     const TrackerConfig& cfg = {}) {
    const int ft = video.dim(0);
    EpeResult res;
    double acc = 0.0;
    int64_t n = 0;
    std::vector<float> tmpl, cand;
    std::vector<double> row_scores(static_cast<size_t>(2 * cfg.window + 1) *
                                   static_cast<size_t>(2 * cfg.window + 1));
    for (size_t p = 0; p < query_points.size(); ++p) {
        std::array<float, 2> cur = query_points[p];
        std::vector<std::array<float, 2>> path = {cur};
        for (int f = 1; f < ft; ++f) {
            const int bx = static_cast<int>(std::lround(cur[0]));
            const int by = static_cast<int>(std::lround(cur[1]));
            detail::extract_patch(video, f - 1, bx, by, cfg.patch, tmpl, res.clamped);
            int best_dx = 0, best_dy = 0;
            double best = -2.0;
            const int w = cfg.window;
            for (int dy = -w; dy <= w; ++dy)
                for (int dx = -w; dx <= w; ++dx) {
                    detail::extract_patch(video, f, bx + dx, by + dy, cfg.patch, cand, res.clamped);
                    const double s = detail::ncc(tmpl, cand);
                    row_scores[static_cast<size_t>(dy + w) * (2 * w + 1) +
                               static_cast<size_t>(dx + w)] = s;
                    if (s > best) {
                        best = s;
                        best_dx = dx;
                        best_dy = dy;
                    }
                }
            auto score_at = [&](int dx, int dy) {
                if (dx < -w || dx > w || dy < -w || dy > w) return -1.0;
                return row_scores[static_cast<size_t>(dy + w) * (2 * w + 1) +
                                  static_cast<size_t>(dx + w)];
            };
            const double offx = detail::subpixel(score_at(best_dx - 1, best_dy), best,
                                                 score_at(best_dx + 1, best_dy));
            const double offy = detail::subpixel(score_at(best_dx, best_dy - 1), best,
                                                 score_at(best_dx, best_dy + 1));
            cur = {static_cast<float>(bx + best_dx + offx + (cur[0] - bx)),
                   static_cast<float>(by + best_dy + offy + (cur[1] - by))};
            path.push_back(cur);
            const auto& tgt = target_trajectories[p][static_cast<size_t>(f)];
            acc += std::hypot(cur[0] - tgt[0], cur[1] - tgt[1]);
            ++n;
        }
        res.tracked.push_back(std::move(path));
    }
    res.epe = n ? acc / static_cast<double>(n) : 0.0;
    return res;
}

// Color histogram (3 x 16 bins) + 7 normalized central moments of the crop
// foreground; similarity is the cosine between descriptors.
struct IdentityDescriptor {
    std::vector<double> v;  // 48 + 7
};

namespace detail {

// Foreground: pixels that deviate from the crop's border median color.
inline std::vector<uint8_t> crop_foreground(const Tensor& img, int f, int x0, int y0, int x1,
                                            int y1) {
    const int ww = x1 - x0, hh = y1 - y0;
    std::vector<float> border[3];
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            if (y != y0 && y != y1 - 1 && x != x0 && x != x1 - 1) continue;
            for (int c = 0; c < 3; ++c) border[c].push_back(img.at(f, y, x, c));
        }
    std::array<float, 3> med{};
    for (int c = 0; c < 3; ++c) {
        auto& b = border[c];
        std::nth_element(b.begin(), b.begin() + static_cast<long>(b.size() / 2), b.end());
        med[static_cast<size_t>(c)] = b[b.size() / 2];
    }
    std::vector<uint8_t> fg(static_cast<size_t>(ww) * hh, 0);
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            float d = 0.0f;
            for (int c = 0; c < 3; ++c)
                d = std::max(d, std::abs(img.at(f, y, x, c) - med[static_cast<size_t>(c)]));
            if (d > 0.12f) fg[static_cast<size_t>(y - y0) * ww + (x - x0)] = 1;
        }
    return fg;
}

}  // namespace detail

// Descriptor of one frame's crop; empty optional when no foreground found.
inline std::optional<IdentityDescriptor> crop_descriptor(const Tensor& img, int f, Box box) {
    const int hh = img.dim(1), ww = img.dim(2);
    const int x0 = std::clamp(static_cast<int>(std::floor(box[0])), 0, ww - 1);
    const int y0 = std::clamp(static_cast<int>(std::floor(box[1])), 0, hh - 1);
    const int x1 = std::clamp(static_cast<int>(std::ceil(box[2])), x0 + 1, ww);
    const int y1 = std::clamp(static_cast<int>(std::ceil(box[3])), y0 + 1, hh);
    const auto fg = detail::crop_foreground(img, f, x0, y0, x1, y1);
    const int cw = x1 - x0;

    IdentityDescriptor d;
    d.v.assign(55, 0.0);
    double m00 = 0.0, mx = 0.0, my = 0.0;
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            if (!fg[static_cast<size_t>(y - y0) * cw + (x - x0)]) continue;
            m00 += 1.0;
            mx += x - x0;
            my += y - y0;
            for (int c = 0; c < 3; ++c) {
                const int bin = std::min(15, static_cast<int>(img.at(f, y, x, c) * 16.0f));
                // value-weighted bins: shared "channel absent" mass carries
                // no identity information, bright-channel mass does
                d.v[static_cast<size_t>(c * 16 + bin)] += (bin + 0.5) / 16.0;
            }
        }
    if (m00 < 1.0) return std::nullopt;
    double hmass = 0.0;
    for (int i = 0; i < 48; ++i) hmass += d.v[static_cast<size_t>(i)];
    for (int i = 0; i < 48; ++i) d.v[static_cast<size_t>(i)] /= std::max(hmass, 1e-9);

    const double cx = mx / m00, cy = my / m00;
    double mu[4][4] = {};
    for (int y = y0; y < y1; ++y)
        for (int x = x0; x < x1; ++x) {
            if (!fg[static_cast<size_t>(y - y0) * cw + (x - x0)]) continue;
            const double dx = (x - x0) - cx, dy = (y - y0) - cy;
            for (int p = 0; p <= 3; ++p)
                for (int q = 0; q <= 3 - p; ++q) mu[p][q] += std::pow(dx, p) * std::pow(dy, q);
        }
    auto eta = [&](int p, int q) {
        return mu[p][q] / std::pow(m00, 1.0 + (p + q) / 2.0);
    };
    // weight makes the shape block comparable to the histogram block
    const double w = 0.5;
    d.v[48] = w * eta(2, 0);
    d.v[49] = w * eta(0, 2);
    d.v[50] = w * eta(1, 1);
    d.v[51] = w * eta(3, 0);
    d.v[52] = w * eta(0, 3);
    d.v[53] = w * eta(2, 1);
    d.v[54] = w * eta(1, 2);
    return d;
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, na = 0.0, nb = 0.0;
    for (size_t i = 0; i < a.size(); ++i) {
        num += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    if (na < 1e-12 || nb < 1e-12) return 0.0;
    return num / std::sqrt(na * nb);
}

// Cosine similarity between the reference descriptor and the frame-averaged
// crop descriptor. Empty crops score 0 (flagged by the caller via miou).
inline double identity_similarity(const Tensor& video,
                                  const std::vector<std::optional<Box>>& boxes_per_frame,
                                  const Tensor& reference) {
    const int rw = reference.dim(2), rh = reference.dim(1);
    const auto rd = crop_descriptor(reference, 0, {0.0f, 0.0f, static_cast<float>(rw),
                                                   static_cast<float>(rh)});
    if (!rd) return 0.0;
    std::vector<double> avg(55, 0.0);
    int n = 0;
    for (int f = 0; f < video.dim(0); ++f) {
        if (!boxes_per_frame[static_cast<size_t>(f)]) continue;
        const auto cd = crop_descriptor(video, f, *boxes_per_frame[static_cast<size_t>(f)]);
        if (!cd) continue;
        for (size_t i = 0; i < avg.size(); ++i) avg[i] += cd->v[i];
        ++n;
    }
    if (!n) return 0.0;
    for (auto& v : avg) v /= n;
    return cosine(avg, rd->v);
}

// One two-subject swap test: each subject must follow its assigned track
// more closely than the other's in both runs.
inline int binding_correct(const std::vector<std::vector<std::optional<Box>>>& det_a,
                           const std::vector<std::vector<Box>>& assigned_a,
                           const std::vector<std::vector<std::optional<Box>>>& det_b,
                           const std::vector<std::vector<Box>>& assigned_b) {
    if (assigned_a.size() != 2 || assigned_b.size() != 2) return 0;
    for (int run = 0; run < 2; ++run) {
        const auto& det = run == 0 ? det_a : det_b;
        const auto& asg = run == 0 ? assigned_a : assigned_b;
        for (int s = 0; s < 2; ++s) {
            const double own = miou({det[static_cast<size_t>(s)]}, {asg[static_cast<size_t>(s)]});
            const double other = miou({det[static_cast<size_t>(s)]}, {asg[static_cast<size_t>(1 - s)]});
            if (!(own > other)) return 0;
        }
    }
    return 1;
}

}  // namespace spritelab::evalkit
