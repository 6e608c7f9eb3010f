#ifndef STRUCTOSCOPE_KMEANS_HPP
#define STRUCTOSCOPE_KMEANS_HPP

#include "structoscope/corpus.hpp"
#include "structoscope/features.hpp"
#include "structoscope/sequence.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace structoscope {

struct KMeansOptions {
    int k = 5;
    std::uint64_t seed = 0;
    int n_init = 10;
    int max_iter = 300;
    double tol = 1e-6;
    int threads = 1;
};

struct KMeansModel {
    int k = 0;
    std::size_t dims = 0;
    std::vector<double> centroids; // k x dims, row-major
    double inertia = 0.0;
    std::uint64_t seed = 0;
    int n_iter = 0;
    int best_run = 0;
    /// Inertia after every assignment step, one list per restart. Not serialized.
    std::vector<std::vector<double>> run_inertia;

    std::span<const double> centroid(int c) const
    {
        return {centroids.data() + static_cast<std::size_t>(c) * dims, dims};
    }
};

/// Lloyd's algorithm with greedy k-means++ seeding, restarted n_init times from
/// streams derived from `seed`; keeps the lowest-inertia run. Empty clusters
/// take the point farthest from its centroid. Sums run in row order, so the
/// model is bit-identical for any thread count.
KMeansModel kmeans_fit(std::span<const double> data, std::size_t rows, std::size_t cols,
                       const KMeansOptions& options);
KMeansModel kmeans_fit(const FeatureMatrix& matrix, const KMeansOptions& options);

/// Index of the closest centroid by squared Euclidean distance; ties go to
/// the lower index.
int nearest_centroid(const KMeansModel& model, std::span<const double> point);

/// Label sequences for every document, in corpus order.
std::vector<BlockSequence> assign_blocks(const Corpus& corpus, const FeatureMatrix& matrix,
                                         const KMeansModel& model, int threads = 1);

void write_kmeans_model(const KMeansModel& model, const std::filesystem::path& path);
KMeansModel read_kmeans_model(const std::filesystem::path& path);

} // namespace structoscope

#endif
