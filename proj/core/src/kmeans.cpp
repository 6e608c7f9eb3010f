#include "structoscope/kmeans.hpp"

#include "structoscope/error.hpp"

#include "io_util.hpp"
#include "parallel.hpp"
#include "rng.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <unordered_map>

namespace structoscope {

using nlohmann::json;

namespace {

inline double squared_distance(const double* a, const double* b, std::size_t dims)
{
    double s = 0.0;
    for (std::size_t i = 0; i < dims; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

struct DataView {
    const double* data;
    std::size_t rows;
    std::size_t cols;
    const double* row(std::size_t r) const { return data + r * cols; }
};

// D^2-weighted draw over points not yet chosen; falls back to the first
// unchosen point when every remaining distance is zero.
std::size_t draw_weighted(const std::vector<double>& mindist, const std::vector<bool>& chosen,
                          detail::Engine& eng)
{
    const std::size_t n = mindist.size();
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
            total += mindist[i];
        }
    }
    if (total > 0.0) {
        const double target = detail::uniform01(eng) * total;
        double cumulative = 0.0;
        std::size_t last_positive = n;
        for (std::size_t i = 0; i < n; ++i) {
            if (chosen[i] || mindist[i] <= 0.0) {
                continue;
            }
            last_positive = i;
            cumulative += mindist[i];
            if (cumulative > target) {
                return i;
            }
        }
        return last_positive; // rounding left target at the very end
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!chosen[i]) {
            return i;
        }
    }
    return 0;
}

// Greedy k-means++: each new center is the best (lowest resulting
// potential) of 2 + ln k D^2-weighted candidates.
std::vector<double> kmeanspp(const DataView& x, int k, detail::Engine& eng, int threads)
{
    const int trials = 2 + static_cast<int>(std::log(static_cast<double>(k)));
    std::vector<double> centroids;
    centroids.reserve(static_cast<std::size_t>(k) * x.cols);
    std::vector<bool> chosen(x.rows, false);
    std::vector<double> mindist(x.rows, std::numeric_limits<double>::infinity());
    std::vector<double> candidate_dist(x.rows);
    std::vector<double> best_dist(x.rows);

    auto add_center = [&](std::size_t r) {
        chosen[r] = true;
        centroids.insert(centroids.end(), x.row(r), x.row(r) + x.cols);
    };

    const std::size_t first = detail::uniform_index(eng, x.rows);
    add_center(first);
    detail::parallel_for(x.rows, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            mindist[i] = squared_distance(x.row(i), x.row(first), x.cols);
        }
    });
    for (int c = 1; c < k; ++c) {
        std::size_t best = x.rows;
        double best_potential = std::numeric_limits<double>::infinity();
        for (int t = 0; t < trials; ++t) {
            const std::size_t cand = draw_weighted(mindist, chosen, eng);
            detail::parallel_for(x.rows, threads, [&](std::size_t b, std::size_t e) {
                for (std::size_t i = b; i < e; ++i) {
                    candidate_dist[i] = std::min(mindist[i], squared_distance(x.row(i), x.row(cand), x.cols));
                }
            });
            double potential = 0.0;
            for (double d : candidate_dist) {
                potential += d;
            }
            if (potential < best_potential) {
                best_potential = potential;
                best = cand;
                best_dist.swap(candidate_dist);
            }
        }
        add_center(best);
        mindist.swap(best_dist);
        best_dist.resize(x.rows);
    }
    return centroids;
}

struct Assignment {
    std::vector<int> labels;
    std::vector<double> mindist;
};

void assign(const DataView& x, const std::vector<double>& centroids, int k, int threads, Assignment& a)
{
    a.labels.resize(x.rows);
    a.mindist.resize(x.rows);
    detail::parallel_for(x.rows, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t i = b; i < e; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int c = 0; c < k; ++c) {
                const double d = squared_distance(x.row(i), centroids.data() + static_cast<std::size_t>(c) * x.cols, x.cols);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            a.labels[i] = best;
            a.mindist[i] = best_d;
        }
    });
}

// Gives each empty cluster the point farthest from its centroid (taken
// from a cluster with more than one member).
void repair_empty(const DataView& x, std::vector<double>& centroids, int k, Assignment& a)
{
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (int l : a.labels) {
        ++counts[static_cast<std::size_t>(l)];
    }
    for (int c = 0; c < k; ++c) {
        if (counts[static_cast<std::size_t>(c)] > 0) {
            continue;
        }
        std::size_t far = x.rows;
        double far_d = -1.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            if (counts[static_cast<std::size_t>(a.labels[i])] > 1 && a.mindist[i] > far_d) {
                far_d = a.mindist[i];
                far = i;
            }
        }
        if (far == x.rows) {
            break;
        }
        --counts[static_cast<std::size_t>(a.labels[far])];
        ++counts[static_cast<std::size_t>(c)];
        a.labels[far] = c;
        a.mindist[far] = 0.0;
        std::copy(x.row(far), x.row(far) + x.cols, centroids.begin() + static_cast<std::ptrdiff_t>(static_cast<std::size_t>(c) * x.cols));
    }
}

double sum_in_order(const std::vector<double>& v)
{
    double s = 0.0;
    for (double d : v) {
        s += d;
    }
    return s;
}

struct RunResult {
    std::vector<double> centroids;
    double inertia = 0.0;
    int n_iter = 0;
    std::vector<double> history;
};

RunResult lloyd(const DataView& x, std::vector<double> centroids, const KMeansOptions& opt)
{
    const int k = opt.k;
    const std::size_t dims = x.cols;
    RunResult run;
    Assignment a;
    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        assign(x, centroids, k, opt.threads, a);
        repair_empty(x, centroids, k, a);
        run.history.push_back(sum_in_order(a.mindist));

        std::vector<double> sums(static_cast<std::size_t>(k) * dims, 0.0);
        std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
        for (std::size_t i = 0; i < x.rows; ++i) {
            const auto c = static_cast<std::size_t>(a.labels[i]);
            ++counts[c];
            double* s = sums.data() + c * dims;
            const double* p = x.row(i);
            for (std::size_t d = 0; d < dims; ++d) {
                s[d] += p[d];
            }
        }
        double shift = 0.0;
        for (std::size_t c = 0; c < static_cast<std::size_t>(k); ++c) {
            if (counts[c] == 0) {
                continue;
            }
            double moved = 0.0;
            for (std::size_t d = 0; d < dims; ++d) {
                const double updated = sums[c * dims + d] / static_cast<double>(counts[c]);
                const double delta = updated - centroids[c * dims + d];
                moved += delta * delta;
                centroids[c * dims + d] = updated;
            }
            shift = std::max(shift, std::sqrt(moved));
        }
        run.n_iter = iter;
        if (shift < opt.tol) {
            break;
        }
    }
    assign(x, centroids, k, opt.threads, a);
    repair_empty(x, centroids, k, a);
    run.inertia = sum_in_order(a.mindist);
    run.history.push_back(run.inertia);
    run.centroids = std::move(centroids);
    return run;
}

} // namespace

KMeansModel kmeans_fit(std::span<const double> data, std::size_t rows, std::size_t cols,
                       const KMeansOptions& options)
{
    if (options.k < 2) {
        throw ValidationError("kmeans: k must be >= 2");
    }
    if (options.n_init < 1 || options.max_iter < 1 || !(options.tol >= 0.0)) {
        throw ValidationError("kmeans: n_init and max_iter must be >= 1, tol >= 0");
    }
    if (data.size() != rows * cols) {
        throw ValidationError("kmeans: data size does not match rows x cols");
    }
    if (rows < static_cast<std::size_t>(options.k)) {
        throw ValidationError("kmeans: " + std::to_string(rows) + " rows for k = "
                              + std::to_string(options.k));
    }
    for (std::size_t i = 0; i < data.size(); ++i) {
        if (!std::isfinite(data[i])) {
            throw ValidationError("kmeans: non-finite feature at row " + std::to_string(i / cols)
                                  + ", column " + std::to_string(i % cols));
        }
    }
    const DataView x{data.data(), rows, cols};

    KMeansModel model;
    model.k = options.k;
    model.dims = cols;
    model.seed = options.seed;
    model.inertia = std::numeric_limits<double>::infinity();
    for (int r = 0; r < options.n_init; ++r) {
        detail::Engine eng(detail::mix_seed(options.seed, static_cast<std::uint64_t>(r)));
        auto init = kmeanspp(x, options.k, eng, options.threads);
        RunResult run = lloyd(x, std::move(init), options);
        model.run_inertia.push_back(run.history);
        if (run.inertia < model.inertia) {
            model.inertia = run.inertia;
            model.centroids = std::move(run.centroids);
            model.n_iter = run.n_iter;
            model.best_run = r;
        }
    }
    return model;
}

KMeansModel kmeans_fit(const FeatureMatrix& matrix, const KMeansOptions& options)
{
    return kmeans_fit(matrix.values, matrix.rows, matrix.cols, options);
}

int nearest_centroid(const KMeansModel& model, std::span<const double> point)
{
    if (point.size() != model.dims) {
        throw ValidationError("nearest_centroid: point has " + std::to_string(point.size())
                              + " dims, model has " + std::to_string(model.dims));
    }
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < model.k; ++c) {
        const double d = squared_distance(point.data(), model.centroid(c).data(), model.dims);
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

std::vector<BlockSequence> assign_blocks(const Corpus& corpus, const FeatureMatrix& matrix,
                                         const KMeansModel& model, int threads)
{
    if (matrix.cols != model.dims) {
        throw DataError("assign_blocks: matrix has " + std::to_string(matrix.cols)
                        + " columns, model expects " + std::to_string(model.dims));
    }
    std::vector<int> row_label(matrix.rows);
    detail::parallel_for(matrix.rows, threads, [&](std::size_t b, std::size_t e) {
        for (std::size_t r = b; r < e; ++r) {
            row_label[r] = nearest_centroid(model, matrix.row(r));
        }
    });

    std::unordered_map<std::string_view, std::vector<std::pair<int, std::size_t>>> rows_by_doc;
    for (std::size_t r = 0; r < matrix.rows; ++r) {
        rows_by_doc[matrix.row_index[r].doc_id].emplace_back(matrix.row_index[r].segment, r);
    }
    if (matrix.rows != corpus.segment_count()) {
        throw DataError("assign_blocks: matrix has " + std::to_string(matrix.rows) + " rows for "
                        + std::to_string(corpus.segment_count()) + " segments");
    }

    std::vector<BlockSequence> out;
    out.reserve(corpus.documents.size());
    for (const auto& doc : corpus.documents) {
        auto it = rows_by_doc.find(doc.id);
        if (it == rows_by_doc.end() || it->second.size() != doc.segments.size()) {
            throw DataError("assign_blocks: feature rows do not cover document '" + doc.id + "'");
        }
        Labels labels(doc.segments.size(), -1);
        for (auto [seg, r] : it->second) {
            if (seg < 0 || static_cast<std::size_t>(seg) >= labels.size() || labels[static_cast<std::size_t>(seg)] != -1) {
                throw DataError("assign_blocks: bad or repeated segment index " + std::to_string(seg)
                                + " for document '" + doc.id + "'");
            }
            labels[static_cast<std::size_t>(seg)] = row_label[r];
        }
        out.push_back(BlockSequence::from_labels(doc.id, std::move(labels)));
    }
    return out;
}

void write_kmeans_model(const KMeansModel& model, const std::filesystem::path& path)
{
    json j;
    j["k"] = model.k;
    j["dims"] = model.dims;
    j["seed"] = model.seed;
    j["inertia"] = model.inertia;
    j["n_iter"] = model.n_iter;
    j["best_run"] = model.best_run;
    json cents = json::array();
    for (int c = 0; c < model.k; ++c) {
        auto row = model.centroid(c);
        cents.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["centroids"] = std::move(cents);
    detail::write_text_file(path, j.dump(2) + "\n");
}

KMeansModel read_kmeans_model(const std::filesystem::path& path)
{
    KMeansModel model;
    try {
        const json j = json::parse(detail::read_text_file(path));
        model.k = j.at("k").get<int>();
        model.dims = j.at("dims").get<std::size_t>();
        model.seed = j.at("seed").get<std::uint64_t>();
        model.inertia = j.at("inertia").get<double>();
        model.n_iter = j.at("n_iter").get<int>();
        model.best_run = j.at("best_run").get<int>();
        for (const auto& row : j.at("centroids")) {
            auto v = row.get<std::vector<double>>();
            if (v.size() != model.dims) {
                throw DataError(path.string() + ": centroid has wrong dimension");
            }
            model.centroids.insert(model.centroids.end(), v.begin(), v.end());
        }
        if (model.centroids.size() != static_cast<std::size_t>(model.k) * model.dims) {
            throw DataError(path.string() + ": expected " + std::to_string(model.k) + " centroids");
        }
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return model;
}

} // namespace structoscope
