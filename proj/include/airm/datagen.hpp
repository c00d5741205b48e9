#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "airm/tensor.hpp"

namespace airm::datagen {

enum class Category : int { Disk = 0, Rectangle = 1, Ring = 2, Star = 3 };

const char* category_name(Category c);
Category category_from_name(const std::string& name);
std::vector<Category> parse_categories(const std::string& comma_list);

struct Scene {
    TensorF image;    // [3,H,W] in [0,1]
    TensorF gt_mask;  // [H,W] binary
    Category category = Category::Disk;
    uint64_t seed = 0;
};

struct CoarseMask {
    TensorF mask;  // [H,W] binary
    double achieved_iou = 0.0;
};

// Foreground = union of n_shapes instances of one category drawn from
// category_set; textured background and foreground with distinct mean colors.
// Bit-identical output for identical arguments.
Scene generate_scene(uint64_t seed, int H, int W, int n_shapes,
                     const std::vector<Category>& category_set);

// Corrupt a binary mask until its IoU with the original lands in
// [lo,hi]: a target is sampled uniformly in the band, then a monotone
// perturbation family (distance-weighted boundary flips + blob toggles) is
// bisected on strength. Throws PerturbError when the band is unreachable.
CoarseMask perturb_mask(const TensorF& gt, double lo, double hi, uint64_t seed,
                        int max_tries = 40);

struct CropTriple {
    TensorF image;   // [3,h,w]
    TensorF gt;      // [h,w]
    TensorF coarse;  // [h,w]
};

// Aligned random crop of image/gt/coarse.
CropTriple crop_sample(const Scene& scene, const CoarseMask& coarse, int ch,
                       int cw, uint64_t seed);

// ---- Dataset directory layout ----------------------------------------
//   <root>/<split>/<scene_id>/{image.png, gt.png, coarse.png, meta.txt}
// meta.txt holds seed/category/achieved_iou as key=value lines.

struct SceneRecord {
    Scene scene;
    CoarseMask coarse;
    std::string dir;
};

void write_scene_dir(const std::string& dir, const Scene& scene,
                     const CoarseMask& coarse);
SceneRecord load_scene_dir(const std::string& dir);
std::vector<std::string> list_scene_dirs(const std::string& root,
                                         const std::string& split);

// Generate n scenes into <root>/<split>. Scene seeds derive from `seed` and
// the scene index, so any worker count produces the same tree.
void generate_dataset(const std::string& root, const std::string& split, int n,
                      uint64_t seed, int H, int W, int n_shapes,
                      const std::vector<Category>& categories, double iou_lo,
                      double iou_hi, int workers = 1);

}  // namespace airm::datagen
