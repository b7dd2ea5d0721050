#pragma once

#include <array>
#include <string>
#include <vector>

#include "hyperdest/diffcore.hpp"
#include "hyperdest/encode.hpp"

namespace hyperdest::exporter {

struct ColoredPoint {
    geo::GeoPoint point;
    std::array<int, 3> rgb;  // each 0..255
};

// Projects embedding rows onto their top 3 principal components and
// min-max rescales each component to [0, 255]. Deterministic substitute
// for a stochastic embedding like t-SNE.
std::vector<std::array<double, 3>> pca3(const diff::Tensor& embeddings);

std::vector<ColoredPoint> color_references(const encode::ReferenceSet& refs,
                                           const diff::Tensor& embeddings);

// CSV "lat,lon,r,g,b" with header.
std::string colored_points_csv(const std::vector<ColoredPoint>& points);

}  // namespace hyperdest::exporter
