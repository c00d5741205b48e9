#include "airm/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "airm/common.hpp"
#include "airm/image.hpp"
#include "airm/metrics.hpp"
#include "airm/rng.hpp"

namespace fs = std::filesystem;

namespace airm::datagen {

const char* category_name(Category c) {
    switch (c) {
        case Category::Disk: return "disk";
        case Category::Rectangle: return "rectangle";
        case Category::Ring: return "ring";
        case Category::Star: return "star";
    }
    return "unknown";
}

Category category_from_name(const std::string& name) {
    if (name == "disk") return Category::Disk;
    if (name == "rectangle") return Category::Rectangle;
    if (name == "ring") return Category::Ring;
    if (name == "star") return Category::Star;
    throw ParamError("unknown category '" + name +
                     "' (expected disk|rectangle|ring|star)");
}

std::vector<Category> parse_categories(const std::string& comma_list) {
    std::vector<Category> out;
    std::stringstream ss(comma_list);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
        if (!tok.empty()) out.push_back(category_from_name(tok));
    }
    if (out.empty()) throw ParamError("empty category list");
    return out;
}

namespace {

struct ShapeInstance {
    Category kind;
    double cy, cx;
    double r_out, r_in;   // disk uses r_out; ring/star use both
    double hy, hx, rot;   // rectangle
    std::vector<std::pair<double, double>> poly;  // star vertices
};

bool point_in_poly(const std::vector<std::pair<double, double>>& poly, double y,
                   double x) {
    bool inside = false;
    const size_t n = poly.size();
    for (size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto& [yi, xi] = poly[i];
        const auto& [yj, xj] = poly[j];
        if ((yi > y) != (yj > y) &&
            x < (xj - xi) * (y - yi) / (yj - yi) + xi)
            inside = !inside;
    }
    return inside;
}

bool inside_shape(const ShapeInstance& s, double y, double x) {
    switch (s.kind) {
        case Category::Disk: {
            const double dy = y - s.cy, dx = x - s.cx;
            return dy * dy + dx * dx <= s.r_out * s.r_out;
        }
        case Category::Rectangle: {
            const double dy = y - s.cy, dx = x - s.cx;
            const double c = std::cos(s.rot), sn = std::sin(s.rot);
            const double u = c * dx + sn * dy;
            const double v = -sn * dx + c * dy;
            return std::fabs(u) <= s.hx && std::fabs(v) <= s.hy;
        }
        case Category::Ring: {
            const double dy = y - s.cy, dx = x - s.cx;
            const double d2 = dy * dy + dx * dx;
            return d2 <= s.r_out * s.r_out && d2 > s.r_in * s.r_in;
        }
        case Category::Star:
            return point_in_poly(s.poly, y, x);
    }
    return false;
}

ShapeInstance sample_shape(Category kind, int H, int W, Rng& rng) {
    ShapeInstance s;
    s.kind = kind;
    const double m = double(std::min(H, W));
    s.cy = rng.uniform(0.28, 0.72) * H;
    s.cx = rng.uniform(0.28, 0.72) * W;
    switch (kind) {
        case Category::Disk:
            s.r_out = rng.uniform(0.12, 0.26) * m;
            break;
        case Category::Rectangle:
            s.hy = rng.uniform(0.10, 0.24) * m;
            s.hx = rng.uniform(0.10, 0.24) * m;
            s.rot = rng.uniform(0.0, 3.14159265358979);
            break;
        case Category::Ring:
            s.r_out = rng.uniform(0.14, 0.26) * m;
            s.r_in = s.r_out * rng.uniform(0.45, 0.68);
            break;
        case Category::Star: {
            const double ro = rng.uniform(0.15, 0.28) * m;
            const double ri = ro * rng.uniform(0.40, 0.55);
            const double rot = rng.uniform(0.0, 3.14159265358979);
            for (int k = 0; k < 10; ++k) {
                const double r = (k % 2 == 0) ? ro : ri;
                const double a = rot + k * 3.14159265358979 / 5.0;
                s.poly.emplace_back(s.cy + r * std::sin(a), s.cx + r * std::cos(a));
            }
            break;
        }
    }
    return s;
}

void check_mask_binary(const TensorF& gt) {
    if (gt.ndim() != 2) throw ShapeError("mask must be [H,W]");
    for (int64_t i = 0; i < gt.numel(); ++i)
        if (gt[i] != 0.f && gt[i] != 1.f)
            throw ParamError("mask is not binary");
}

// Twice box-blurred uniform noise, rescaled to [0.05, 1].
TensorF correlated_noise(int H, int W, Rng& rng) {
    TensorF a({H, W});
    for (int64_t i = 0; i < a.numel(); ++i) a[i] = float(rng.uniform());
    auto blur = [&](const TensorF& src) {
        TensorF out({H, W});
        for (int y = 0; y < H; ++y)
            for (int x = 0; x < W; ++x) {
                float s = 0;
                int c = 0;
                for (int dy = -2; dy <= 2; ++dy)
                    for (int dx = -2; dx <= 2; ++dx) {
                        const int yy = y + dy, xx = x + dx;
                        if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
                        s += src.at(yy, xx);
                        ++c;
                    }
                out.at(y, x) = s / float(c);
            }
        return out;
    };
    TensorF b = blur(blur(a));
    float lo = b[0], hi = b[0];
    for (int64_t i = 0; i < b.numel(); ++i) {
        lo = std::min(lo, b[i]);
        hi = std::max(hi, b[i]);
    }
    const float span = std::max(hi - lo, 1e-6f);
    for (int64_t i = 0; i < b.numel(); ++i)
        b[i] = 0.05f + 0.95f * (b[i] - lo) / span;
    return b;
}

}  // namespace

Scene generate_scene(uint64_t seed, int H, int W, int n_shapes,
                     const std::vector<Category>& category_set) {
    if (H < 16 || W < 16)
        throw ParamError("scene size must be at least 16x16, got " +
                         std::to_string(H) + "x" + std::to_string(W));
    if (n_shapes < 1) throw ParamError("n_shapes must be >= 1");
    if (category_set.empty()) throw ParamError("empty category set");

    Scene scene;
    scene.seed = seed;
    Rng rng(Rng::derive(seed, 0x5CE));
    scene.category = category_set[size_t(rng.randint(category_set.size()))];

    std::vector<ShapeInstance> shapes;
    for (int i = 0; i < n_shapes; ++i)
        shapes.push_back(sample_shape(scene.category, H, W, rng));

    scene.gt_mask = TensorF({H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double py = y + 0.5, px = x + 0.5;
            bool in = false;
            for (const auto& s : shapes)
                if (inside_shape(s, py, px)) {
                    in = true;
                    break;
                }
            scene.gt_mask.at(y, x) = in ? 1.f : 0.f;
        }

    // Distinct mean colors per region, plus a low-frequency grating and
    // per-pixel noise so boundaries are not trivially clean.
    float bg[3], fg[3];
    const bool bright_fg = rng.uniform() < 0.5;
    for (int c = 0; c < 3; ++c) {
        const float lo_col = float(rng.uniform(0.05, 0.40));
        const float hi_col = float(rng.uniform(0.60, 0.95));
        bg[c] = bright_fg ? lo_col : hi_col;
        fg[c] = bright_fg ? hi_col : lo_col;
    }
    const double freq_y = rng.uniform(2.0, 6.0), freq_x = rng.uniform(2.0, 6.0);
    const double phase = rng.uniform(0.0, 6.28318530717958);
    const double m = double(std::min(H, W));

    scene.image = TensorF({3, H, W});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const bool in = scene.gt_mask.at(y, x) > 0.5f;
            const float grating = 0.05f * float(std::sin(
                6.28318530717958 * (freq_y * y + freq_x * x) / m + phase));
            for (int c = 0; c < 3; ++c) {
                float v = (in ? fg[c] : bg[c]) + grating +
                          float(rng.uniform(-0.08, 0.08));
                scene.image.at(c, y, x) = std::clamp(v, 0.f, 1.f);
            }
        }
    return scene;
}

CoarseMask perturb_mask(const TensorF& gt, double lo, double hi, uint64_t seed,
                        int max_tries) {
    check_mask_binary(gt);
    if (!(lo > 0.0 && lo <= hi && hi <= 1.0))
        throw ParamError("invalid IoU band [" + std::to_string(lo) + "," +
                         std::to_string(hi) + "]");
    const int H = gt.dim(0), W = gt.dim(1);
    Rng rng(Rng::derive(seed, 0xC0A));
    const double target = rng.uniform(lo, hi);

    if (target >= 1.0 - 1e-12) {
        CoarseMask cm;
        cm.mask = gt;
        cm.achieved_iou = 1.0;
        return cm;
    }

    // Monotone perturbation family: the flip set grows with strength s, so
    // IoU(s) is nonincreasing and bisection converges.
    const TensorF v = correlated_noise(H, W, rng);
    const auto dist2 = metrics::boundary_distance_sq(gt);
    TensorF score({H, W});
    for (int64_t i = 0; i < score.numel(); ++i) {
        const double d = std::isinf(dist2[i]) ? double(H + W) : std::sqrt(dist2[i]);
        score[i] = float(double(v[i]) * (d + 0.5));
    }
    std::vector<float> sorted(score.vec());
    std::nth_element(sorted.begin(), sorted.begin() + int64_t(sorted.size() * 85 / 100),
                     sorted.end());
    const float score_hi = sorted[size_t(sorted.size() * 85 / 100)];

    struct Blob {
        int cy, cx, r;
        double level;
    };
    std::vector<Blob> blobs;
    const int max_r = std::max(2, int(0.06 * std::min(H, W)));
    for (int k = 0; k < 8; ++k) {
        Blob b;
        b.cy = int(rng.randint(uint64_t(H)));
        b.cx = int(rng.randint(uint64_t(W)));
        b.r = 1 + int(rng.randint(uint64_t(max_r)));
        b.level = rng.uniform(0.15, 1.0);
        blobs.push_back(b);
    }

    auto apply = [&](double s) {
        TensorF mask = gt;
        const float thr = float(s) * score_hi;
        for (int64_t i = 0; i < mask.numel(); ++i)
            if (score[i] < thr) mask[i] = 1.f - mask[i];
        for (const auto& b : blobs) {
            if (b.level > s) continue;
            for (int y = std::max(0, b.cy - b.r); y <= std::min(H - 1, b.cy + b.r); ++y)
                for (int x = std::max(0, b.cx - b.r); x <= std::min(W - 1, b.cx + b.r);
                     ++x) {
                    const int dy = y - b.cy, dx = x - b.cx;
                    if (dy * dy + dx * dx <= b.r * b.r)
                        mask.at(y, x) = 1.f - gt.at(y, x);
                }
        }
        return mask;
    };

    double s_lo = 0.0, s_hi = 1.0;
    CoarseMask best_in_band;
    bool have_band = false;
    double best_overall = 1.0;  // closest achieved to the band
    double best_overall_gap = std::fabs(1.0 - std::clamp(1.0, lo, hi));
    const double accept_tol = std::max(0.005, (hi - lo) / 4.0);

    for (int it = 0; it < max_tries; ++it) {
        const double s = 0.5 * (s_lo + s_hi);
        TensorF cand = apply(s);
        const double achieved = metrics::iou(cand, gt);
        const double gap = std::fabs(achieved - std::clamp(achieved, lo, hi));
        if (achieved >= lo && achieved <= hi) {
            if (!have_band ||
                std::fabs(achieved - target) <
                    std::fabs(best_in_band.achieved_iou - target)) {
                best_in_band.mask = std::move(cand);
                best_in_band.achieved_iou = achieved;
                have_band = true;
            }
            if (std::fabs(achieved - target) <= accept_tol) return best_in_band;
        }
        if (gap < best_overall_gap) {
            best_overall_gap = gap;
            best_overall = achieved;
        }
        if (achieved > target)
            s_lo = s;
        else
            s_hi = s;
    }
    if (have_band) return best_in_band;
    std::ostringstream os;
    os << "could not reach IoU band [" << lo << "," << hi
       << "]; best achieved " << best_overall;
    throw PerturbError(os.str(), best_overall);
}

CropTriple crop_sample(const Scene& scene, const CoarseMask& coarse, int ch,
                       int cw, uint64_t seed) {
    const int H = scene.gt_mask.dim(0), W = scene.gt_mask.dim(1);
    if (ch > H || cw > W)
        throw ParamError("crop " + std::to_string(ch) + "x" + std::to_string(cw) +
                         " exceeds scene " + std::to_string(H) + "x" +
                         std::to_string(W));
    Rng rng(Rng::derive(seed, 0xC20));
    const int oy = int(rng.randint(uint64_t(H - ch + 1)));
    const int ox = int(rng.randint(uint64_t(W - cw + 1)));

    CropTriple out;
    out.image = TensorF({3, ch, cw});
    out.gt = TensorF({ch, cw});
    out.coarse = TensorF({ch, cw});
    for (int y = 0; y < ch; ++y)
        for (int x = 0; x < cw; ++x) {
            for (int c = 0; c < 3; ++c)
                out.image.at(c, y, x) = scene.image.at(c, oy + y, ox + x);
            out.gt.at(y, x) = scene.gt_mask.at(oy + y, ox + x);
            out.coarse.at(y, x) = coarse.mask.at(oy + y, ox + x);
        }
    return out;
}

void write_scene_dir(const std::string& dir, const Scene& scene,
                     const CoarseMask& coarse) {
    fs::create_directories(dir);
    img::save_png(scene.image, dir + "/image.png");
    img::save_png(scene.gt_mask, dir + "/gt.png");
    img::save_png(coarse.mask, dir + "/coarse.png");
    std::ofstream meta(dir + "/meta.txt");
    if (!meta) throw IoError("cannot write " + dir + "/meta.txt");
    meta << "seed=" << scene.seed << "\n"
         << "category=" << category_name(scene.category) << "\n"
         << "achieved_iou=" << coarse.achieved_iou << "\n";
}

SceneRecord load_scene_dir(const std::string& dir) {
    SceneRecord rec;
    rec.dir = dir;
    rec.scene.image = img::load_png(dir + "/image.png");
    rec.scene.gt_mask = img::binarize(img::load_png(dir + "/gt.png"));
    rec.coarse.mask = img::binarize(img::load_png(dir + "/coarse.png"));
    std::ifstream meta(dir + "/meta.txt");
    if (!meta) throw IoError("missing " + dir + "/meta.txt");
    std::string line;
    while (std::getline(meta, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
        if (key == "seed") rec.scene.seed = std::stoull(val);
        if (key == "category") rec.scene.category = category_from_name(val);
        if (key == "achieved_iou") rec.coarse.achieved_iou = std::stod(val);
    }
    return rec;
}

std::vector<std::string> list_scene_dirs(const std::string& root,
                                         const std::string& split) {
    std::vector<std::string> dirs;
    const fs::path base = fs::path(root) / split;
    if (!fs::exists(base)) return dirs;
    for (const auto& e : fs::directory_iterator(base))
        if (e.is_directory()) dirs.push_back(e.path().string());
    std::sort(dirs.begin(), dirs.end());
    return dirs;
}

void generate_dataset(const std::string& root, const std::string& split, int n,
                      uint64_t seed, int H, int W, int n_shapes,
                      const std::vector<Category>& categories, double iou_lo,
                      double iou_hi, int workers) {
    fs::create_directories(fs::path(root) / split);
    auto make_one = [&](int i) {
        const uint64_t scene_seed = Rng::derive(seed, uint64_t(i));
        Scene scene = generate_scene(scene_seed, H, W, n_shapes, categories);
        CoarseMask coarse = perturb_mask(scene.gt_mask, iou_lo, iou_hi,
                                         Rng::derive(scene_seed, 0xFACE));
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%05d", i);
        write_scene_dir((fs::path(root) / split / name).string(), scene, coarse);
    };
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) make_one(i);
        return;
    }
    std::vector<std::thread> pool;
    std::atomic<int> next{0};
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) make_one(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace airm::datagen
