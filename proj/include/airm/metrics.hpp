#pragma once

#include <string>
#include <utility>
#include <vector>

#include "airm/tensor.hpp"

namespace airm::metrics {

// Intersection over union of two binary masks. Both empty -> 1.0.
double iou(const TensorF& pred, const TensorF& gt);

// Boundary pixels: any pixel with at least one differing 4-neighbor
// (out-of-image neighbors count as equal, so a constant mask has none).
std::vector<std::pair<int, int>> boundary_pixels(const TensorF& mask);

// Exact squared Euclidean distance to the nearest boundary pixel of `mask`
// (all entries infinity when the mask has no boundary).
Tensor<double> boundary_distance_sq(const TensorF& mask);

// Pixels within Euclidean distance `radius_px` of the mask boundary.
TensorF boundary_band(const TensorF& mask, double radius_px);

struct EvalReport {
    double iou = 0.0;
    double mba = 0.0;
    std::vector<std::pair<double, double>> per_radius_accuracy;
    // Set when gt had no boundary and mba fell back to plain pixel accuracy.
    bool no_boundary = false;

    std::string to_json() const;
    static std::string csv_header();
    std::string to_csv_row(const std::string& id) const;
};

// Mean boundary accuracy: pixel accuracy of pred vs gt restricted to bands
// around the gt boundary, averaged over n_radii radii linearly spaced from
// 1px to max(3px, 2% of the image diagonal).
EvalReport mba(const TensorF& pred, const TensorF& gt, int n_radii = 5);

// Full report (IoU + mBA) for already-binary masks.
EvalReport evaluate(const TensorF& pred, const TensorF& gt, int n_radii = 5);

}  // namespace airm::metrics
