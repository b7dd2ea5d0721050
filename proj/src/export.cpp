#include "hyperdest/export.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

namespace hyperdest::exporter {
namespace {

// Deterministic top eigenvector of a small symmetric matrix by power
// iteration with a fixed start vector.
std::vector<double> power_iterate(const std::vector<double>& cov, std::size_t m) {
    std::vector<double> v(m, 1.0 / std::sqrt(static_cast<double>(m)));
    std::vector<double> w(m);
    for (int iter = 0; iter < 500; ++iter) {
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += cov[i * m + j] * v[j];
            w[i] = acc;
        }
        double nrm = 0.0;
        for (double x : w) nrm += x * x;
        nrm = std::sqrt(nrm);
        if (nrm < 1e-15) return std::vector<double>(m, 0.0);  // rank deficient
        for (std::size_t i = 0; i < m; ++i) v[i] = w[i] / nrm;
    }
    return v;
}

}  // namespace

std::vector<std::array<double, 3>> pca3(const diff::Tensor& e) {
    if (e.shape.size() != 2) {
        throw std::invalid_argument("pca3: expects a 2-D embedding table");
    }
    const std::size_t n = e.rows(), m = e.cols();
    std::vector<double> mean(m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) mean[j] += e.at(i, j);
    for (auto& v : mean) v /= static_cast<double>(n);

    std::vector<double> cov(m * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t a = 0; a < m; ++a) {
            const double da = e.at(i, a) - mean[a];
            for (std::size_t b = 0; b < m; ++b)
                cov[a * m + b] += da * (e.at(i, b) - mean[b]);
        }
    for (auto& v : cov) v /= static_cast<double>(n);

    // Three deflated components.
    std::vector<std::vector<double>> comps;
    for (int k = 0; k < 3; ++k) {
        auto v = power_iterate(cov, m);
        comps.push_back(v);
        // Deflate: cov -= lambda v v^T
        double lambda = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j) acc += cov[i * m + j] * v[j];
            lambda += v[i] * acc;
        }
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j)
                cov[i * m + j] -= lambda * v[i] * v[j];
    }

    std::vector<std::array<double, 3>> out(n);
    for (std::size_t i = 0; i < n; ++i)
        for (int k = 0; k < 3; ++k) {
            double acc = 0.0;
            for (std::size_t j = 0; j < m; ++j)
                acc += (e.at(i, j) - mean[j]) * comps[k][j];
            out[i][k] = acc;
        }
    return out;
}

std::vector<ColoredPoint> color_references(const encode::ReferenceSet& refs,
                                           const diff::Tensor& embeddings) {
    if (embeddings.shape.size() != 2 || embeddings.rows() != refs.size()) {
        throw std::invalid_argument(
            "color_references: table rows must match reference count");
    }
    auto proj = pca3(embeddings);
    std::array<double, 3> lo{}, hi{};
    for (int k = 0; k < 3; ++k) {
        lo[k] = 1e300;
        hi[k] = -1e300;
    }
    for (const auto& p : proj)
        for (int k = 0; k < 3; ++k) {
            lo[k] = std::min(lo[k], p[k]);
            hi[k] = std::max(hi[k], p[k]);
        }
    std::vector<ColoredPoint> out(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) {
        out[i].point = refs.points[i];
        for (int k = 0; k < 3; ++k) {
            const double range = hi[k] - lo[k];
            const double t = range > 0.0 ? (proj[i][k] - lo[k]) / range : 0.0;
            out[i].rgb[k] = static_cast<int>(std::lround(t * 255.0));
        }
    }
    return out;
}

std::string colored_points_csv(const std::vector<ColoredPoint>& points) {
    std::ostringstream o;
    o << "lat,lon,r,g,b\n";
    char buf[96];
    for (const auto& p : points) {
        std::snprintf(buf, sizeof(buf), "%.12f,%.12f,%d,%d,%d\n", p.point.lat,
                      p.point.lon, p.rgb[0], p.rgb[1], p.rgb[2]);
        o << buf;
    }
    return o.str();
}

}  // namespace hyperdest::exporter
