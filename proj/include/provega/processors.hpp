#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "provega/config.hpp"
#include "provega/error.hpp"
#include "provega/prng.hpp"
#include "provega/value.hpp"

namespace provega {

using Metrics = std::map<std::string, double>;

struct ProcessorDescriptor {
  std::string name;
  Json parameters = Json::object();
  std::vector<std::string> output_columns;
  std::vector<std::string> metrics;
  // Metric whose movement feeds the built-in stability indicator, if any.
  std::optional<std::string> shift_metric;
};

struct IterationResult {
  std::vector<Row> inserts;  // rows the processor synthesizes (id >= kProcessorIdBase)
  std::vector<Row> updates;  // full rows, keyed by id
  std::vector<RowId> removes;
  Metrics metrics;
  bool converged = false;
};

// What a processor may know about the session it runs in.
struct ProcessorContext {
  ChunkingType mode = ChunkingType::process;
  // Whole dataset for complete inputs (empty for generator-driven sessions).
  // Only used for global facts such as the data extent.
  std::span<const Row> full_data;
};

// One-iteration-at-a-time computation over the rows ingested so far.
// Instances are cloned into the step history so a step can be undone and
// recomputed bit-identically.
class Processor {
 public:
  virtual ~Processor() = default;

  virtual const ProcessorDescriptor& descriptor() const = 0;
  virtual void ingest(std::span<const Row> rows) = 0;
  virtual IterationResult iterate() = 0;
  virtual bool converged() const = 0;
  virtual std::unique_ptr<Processor> clone() const = 0;
  virtual std::optional<std::uint64_t> max_iterations() const { return std::nullopt; }
};

namespace detail {

// Typed access to a processor parameter object; errors carry the dotted path.
class ParamReader {
 public:
  ParamReader(const Json& params, std::string path) : params_(params), path_(std::move(path)) {}

  const Json* get(std::string_view key) const {
    auto it = params_.find(std::string(key));
    return it == params_.end() ? nullptr : &*it;
  }

  std::string at(std::string_view key) const { return path_ + "." + std::string(key); }

  std::optional<std::uint64_t> uint(std::string_view key, std::uint64_t min) const {
    const Json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) throw ValidationError(at(key), "expected an integer");
    if (v->is_number_unsigned()) {
      auto u = v->get<std::uint64_t>();
      if (u < min) throw ValidationError(at(key), "must be >= " + std::to_string(min));
      return u;
    }
    auto i = v->get<std::int64_t>();
    if (i < 0 || static_cast<std::uint64_t>(i) < min)
      throw ValidationError(at(key), "must be >= " + std::to_string(min));
    return static_cast<std::uint64_t>(i);
  }

  std::optional<std::string> string(std::string_view key) const {
    const Json* v = get(key);
    if (!v) return std::nullopt;
    if (!v->is_string() || v->get<std::string>().empty())
      throw ValidationError(at(key), "expected a non-empty string");
    return v->get<std::string>();
  }

  std::optional<double> number(std::string_view key) const {
    const Json* v = get(key);
    if (!v || v->is_null()) return std::nullopt;
    if (!v->is_number()) throw ValidationError(at(key), "expected a number");
    return v->get<double>();
  }

  void only(std::initializer_list<std::string_view> allowed) const {
    for (const auto& [key, _] : params_.items()) {
      if (key == "name") continue;
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        throw ValidationError(path_ + "." + key, "unknown parameter");
    }
  }

 private:
  const Json& params_;
  std::string path_;
};

inline double sq(double v) { return v * v; }

inline std::array<double, 2> point_of(const Row& row, const std::string& x, const std::string& y,
                                      std::string_view who) {
  const Value* vx = row.columns.find(x);
  const Value* vy = row.columns.find(y);
  auto nx = vx ? as_number(*vx) : std::nullopt;
  auto ny = vy ? as_number(*vy) : std::nullopt;
  if (!nx || !ny) {
    throw ProcessorError(std::string(who) + ": row " + std::to_string(row.id) +
                         " lacks numeric columns '" + x + "' and '" + y + "'");
  }
  return {*nx, *ny};
}

}  // namespace detail

// ---- k-means ----------------------------------------------------------------

struct KMeansParams {
  std::uint64_t k = 1;
  std::string x = "x";
  std::string y = "y";
  std::uint64_t seed = 0;
  std::uint64_t max_iterations = 300;
};

inline constexpr double kKMeansTolerance = 1e-9;

// Lloyd iterations over the rows ingested so far. Each iteration assigns
// every row to its nearest centroid (lowest index wins ties), moves each
// centroid to the mean of its members and reseeds empty clusters at the point
// farthest from its own centroid.
class KMeans final : public Processor {
 public:
  using Point = std::array<double, 2>;

  KMeans(KMeansParams params, ChunkingType mode) : params_(std::move(params)), mode_(mode) {
    if (params_.k == 0) throw InsufficientDataError("kmeans: k must be >= 1");
    descriptor_.name = "kmeans";
    descriptor_.parameters = {{"k", params_.k},
                              {"x", params_.x},
                              {"y", params_.y},
                              {"seed", params_.seed},
                              {"max_iterations", params_.max_iterations}};
    descriptor_.output_columns = {"cluster"};
    descriptor_.metrics = {"objective", "centroid_shift"};
    descriptor_.shift_metric = "centroid_shift";
  }

  const ProcessorDescriptor& descriptor() const override { return descriptor_; }
  std::optional<std::uint64_t> max_iterations() const override { return params_.max_iterations; }
  bool converged() const override { return converged_; }
  std::unique_ptr<Processor> clone() const override { return std::make_unique<KMeans>(*this); }

  void ingest(std::span<const Row> rows) override {
    if (rows.empty()) return;
    // Rows are shared between clones. A restored clone that re-ingests rows it
    // had already seen finds them in the arena; on divergence it detaches.
    for (const auto& row : rows) {
      if (count_ < arena_->rows.size() && arena_->rows[count_].id != row.id) detach();
      if (count_ == arena_->rows.size()) {
        arena_->points.push_back(detail::point_of(row, params_.x, params_.y, "kmeans"));
        arena_->rows.push_back(row);
      }
      ++count_;
    }
    assignment_.resize(count_, -1);
    converged_ = false;
  }

  IterationResult iterate() override {
    IterationResult result;
    if (!initialized_) {
      if (count_ < params_.k) {
        if (mode_ == ChunkingType::process) {
          throw InsufficientDataError("kmeans: " + std::to_string(count_) + " rows for k=" +
                                      std::to_string(params_.k));
        }
        return result;  // wait for more rows
      }
      initialize();
    }
    if (converged_) {
      result.metrics = {{"objective", objective_}, {"centroid_shift", 0.0}};
      result.converged = true;
      return result;
    }

    const auto& points = arena_->points;
    const std::size_t k = centroids_.size();
    std::vector<int> next(count_);
    for (std::size_t i = 0; i < count_; ++i) next[i] = nearest(points[i]);

    std::vector<Point> sums(k, Point{0.0, 0.0});
    std::vector<std::size_t> members(k, 0);
    for (std::size_t i = 0; i < count_; ++i) {
      auto c = static_cast<std::size_t>(next[i]);
      sums[c][0] += points[i][0];
      sums[c][1] += points[i][1];
      ++members[c];
    }
    std::vector<Point> moved = centroids_;
    for (std::size_t c = 0; c < k; ++c) {
      if (members[c] > 0) {
        moved[c] = {sums[c][0] / static_cast<double>(members[c]),
                    sums[c][1] / static_cast<double>(members[c])};
      }
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (members[c] != 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < count_; ++i) {
        double d = dist2(points[i], moved[static_cast<std::size_t>(next[i])]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --members[static_cast<std::size_t>(next[far])];
      moved[c] = points[far];
      next[far] = static_cast<int>(c);
      ++members[c];
    }

    double shift = 0.0;
    for (std::size_t c = 0; c < k; ++c) shift = std::max(shift, std::sqrt(dist2(moved[c], centroids_[c])));
    centroids_ = std::move(moved);

    double objective = 0.0;
    for (std::size_t i = 0; i < count_; ++i)
      objective += dist2(points[i], centroids_[static_cast<std::size_t>(next[i])]);

    for (std::size_t i = 0; i < count_; ++i) {
      if (next[i] == assignment_[i]) continue;
      Row row = arena_->rows[i];
      row.columns.set("cluster", std::int64_t{next[i]});
      result.updates.push_back(std::move(row));
    }
    assignment_ = std::move(next);
    objective_ = objective;
    ++iterations_;
    converged_ = shift < kKMeansTolerance;

    result.metrics = {{"objective", objective}, {"centroid_shift", shift}};
    result.converged = converged_;
    return result;
  }

  const std::vector<Point>& centroids() const { return centroids_; }
  const std::vector<Point>& initial_centroids() const { return initial_; }
  const std::vector<int>& assignment() const { return assignment_; }
  double objective() const { return objective_; }
  std::uint64_t iterations() const { return iterations_; }
  std::size_t row_count() const { return count_; }

  // Indices (into the ingested rows) of the k initial centroids: the first k
  // entries of a normative shuffle of 0..m-1.
  static std::vector<std::size_t> initial_indices(std::size_t m, std::uint64_t k, std::uint64_t seed) {
    std::vector<std::size_t> idx(m);
    for (std::size_t i = 0; i < m; ++i) idx[i] = i;
    SplitMix64 rng(seed);
    shuffle(std::span<std::size_t>(idx), rng);
    idx.resize(static_cast<std::size_t>(k));
    return idx;
  }

 private:
  struct Arena {
    std::vector<Row> rows;
    std::vector<Point> points;
  };

  void detach() {
    auto prefix = static_cast<std::ptrdiff_t>(count_);
    if (arena_.use_count() > 1) {
      arena_ = std::make_shared<Arena>(Arena{{arena_->rows.begin(), arena_->rows.begin() + prefix},
                                             {arena_->points.begin(), arena_->points.begin() + prefix}});
    } else {
      arena_->rows.resize(count_);
      arena_->points.resize(count_);
    }
  }

  static double dist2(const Point& a, const Point& b) {
    return detail::sq(a[0] - b[0]) + detail::sq(a[1] - b[1]);
  }

  int nearest(const Point& p) const {
    int best = 0;
    double best_d = dist2(p, centroids_[0]);
    for (std::size_t c = 1; c < centroids_.size(); ++c) {
      double d = dist2(p, centroids_[c]);
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(c);
      }
    }
    return best;
  }

  void initialize() {
    for (auto i : initial_indices(count_, params_.k, params_.seed)) centroids_.push_back(arena_->points[i]);
    initial_ = centroids_;
    initialized_ = true;
  }

  KMeansParams params_;
  ChunkingType mode_;
  ProcessorDescriptor descriptor_;
  std::shared_ptr<Arena> arena_ = std::make_shared<Arena>();
  std::size_t count_ = 0;
  std::vector<int> assignment_;
  std::vector<Point> centroids_;
  std::vector<Point> initial_;
  bool initialized_ = false;
  bool converged_ = false;
  double objective_ = 0.0;
  std::uint64_t iterations_ = 0;
};

// ---- density ----------------------------------------------------------------

struct DensityParams {
  std::string x = "x";
  std::string y = "y";
  std::uint64_t bins_x = 32;
  std::uint64_t bins_y = 32;
  std::optional<double> x_min, x_max, y_min, y_max;
};

// 2-D histogram. Under process chunking iteration t re-bins everything at
// min(2^t, bins) per axis (coarse to fine); otherwise counts accumulate at full
// resolution as rows arrive. Bins are rows with ids above kProcessorIdBase.
class Density final : public Processor {
 public:
  Density(DensityParams params, ChunkingType mode, std::span<const Row> full_data = {})
      : params_(std::move(params)), mode_(mode) {
    if (params_.bins_x == 0 || params_.bins_y == 0)
      throw InvalidBinningError("density: bins must be >= 1");
    descriptor_.name = "density";
    descriptor_.parameters = {{"x", params_.x}, {"y", params_.y},
                              {"bins_x", params_.bins_x}, {"bins_y", params_.bins_y}};
    descriptor_.output_columns = {"bin_x", "bin_y", params_.x, params_.y, "count"};
    descriptor_.metrics = {"stability"};
    resolve_extent(full_data);
  }

  const ProcessorDescriptor& descriptor() const override { return descriptor_; }
  bool converged() const override { return converged_; }
  std::unique_ptr<Processor> clone() const override { return std::make_unique<Density>(*this); }

  std::optional<std::uint64_t> max_iterations() const override {
    if (mode_ != ChunkingType::process) return std::nullopt;
    return levels_to_cap();
  }

  void ingest(std::span<const Row> rows) override {
    if (rows.empty()) return;
    if (points_.use_count() > 1) points_ = std::make_shared<std::vector<Point>>(points_->begin(), points_->begin() + static_cast<std::ptrdiff_t>(count_));
    for (const auto& row : rows) {
      const Value* vx = row.columns.find(params_.x);
      const Value* vy = row.columns.find(params_.y);
      auto nx = vx ? as_number(*vx) : std::nullopt;
      auto ny = vy ? as_number(*vy) : std::nullopt;
      if (!nx || !ny) continue;  // unplaceable rows are not counted
      points_->push_back({*nx, *ny});
      ++count_;
    }
    converged_ = false;
  }

  IterationResult iterate() override {
    IterationResult result;
    std::uint64_t rx = params_.bins_x, ry = params_.bins_y;
    if (mode_ == ChunkingType::process) {
      rx = std::min<std::uint64_t>(params_.bins_x, pow2(iterations_));
      ry = std::min<std::uint64_t>(params_.bins_y, pow2(iterations_));
    }
    if (converged_) {
      result.metrics = {{"stability", last_stability_}};
      result.converged = true;
      return result;
    }
    std::vector<std::uint64_t> next(rx * ry, 0);
    for (std::size_t i = 0; i < count_; ++i) {
      const auto& p = (*points_)[i];
      next[index_of(p[1], y_lo_, y_hi_, ry) * rx + index_of(p[0], x_lo_, x_hi_, rx)] += 1;
    }

    // Diff against the previously emitted bins.
    for (std::uint64_t by = 0; by < ry; ++by) {
      for (std::uint64_t bx = 0; bx < rx; ++bx) {
        std::uint64_t c = next[by * rx + bx];
        RowId id = bin_id(bx, by);
        std::uint64_t before = 0;
        bool existed = false;
        if (auto it = emitted_.find(id); it != emitted_.end()) {
          existed = true;
          before = it->second.count;
          if (before == c && it->second.rx == rx && it->second.ry == ry) continue;
        }
        if (c == 0) {
          if (existed) {
            result.removes.push_back(id);
            emitted_.erase(id);
          }
          continue;
        }
        Row row{id, bin_columns(bx, by, rx, ry, c)};
        (existed ? result.updates : result.inserts).push_back(std::move(row));
        emitted_[id] = Emitted{c, rx, ry};
      }
    }
    // Bins outside the new (smaller) resolution cannot exist: resolution only grows.

    double stability = prev_.empty() ? 0.0 : similarity(prev_, prev_rx_, prev_ry_, next, rx, ry);
    prev_ = std::move(next);
    prev_rx_ = rx;
    prev_ry_ = ry;
    last_stability_ = stability;
    ++iterations_;

    if (mode_ == ChunkingType::process) {
      converged_ = rx == params_.bins_x && ry == params_.bins_y;
    } else {
      converged_ = true;  // until more rows arrive
    }
    result.metrics = {{"stability", stability}};
    result.converged = converged_;
    return result;
  }

  // 1 - L1/2 between the two normalized distributions, the coarse one spread
  // over the finer grid by area overlap.
  static double similarity(const std::vector<std::uint64_t>& a, std::uint64_t ax, std::uint64_t ay,
                           const std::vector<std::uint64_t>& b, std::uint64_t bx, std::uint64_t by) {
    auto pa = resample(normalize(a), ax, ay, bx, by);
    auto pb = normalize(b);
    double l1 = 0.0;
    for (std::size_t i = 0; i < pb.size(); ++i) l1 += std::abs(pa[i] - pb[i]);
    return std::clamp(1.0 - l1 / 2.0, 0.0, 1.0);
  }

  RowId bin_id(std::uint64_t bx, std::uint64_t by) const { return kProcessorIdBase + by * params_.bins_x + bx; }
  std::array<double, 4> extent() const { return {x_lo_, x_hi_, y_lo_, y_hi_}; }
  std::uint64_t iterations() const { return iterations_; }

  static std::uint64_t index_of(double v, double lo, double hi, std::uint64_t bins) {
    if (!(hi > lo)) return 0;
    double t = (v - lo) / (hi - lo) * static_cast<double>(bins);
    if (!(t >= 0.0)) return 0;
    auto i = static_cast<std::uint64_t>(t);
    return std::min(i, bins - 1);
  }

 private:
  using Point = std::array<double, 2>;
  struct Emitted {
    std::uint64_t count;
    std::uint64_t rx, ry;
  };

  static std::uint64_t pow2(std::uint64_t t) { return t >= 63 ? (std::uint64_t{1} << 63) : (std::uint64_t{1} << t); }

  std::uint64_t levels_to_cap() const {
    std::uint64_t t = 0;
    while (pow2(t) < std::max(params_.bins_x, params_.bins_y)) ++t;
    return t + 1;
  }

  void resolve_extent(std::span<const Row> data) {
    double xl = std::numeric_limits<double>::infinity(), xh = -xl, yl = xl, yh = -xl;
    for (const auto& row : data) {
      const Value* vx = row.columns.find(params_.x);
      const Value* vy = row.columns.find(params_.y);
      auto nx = vx ? as_number(*vx) : std::nullopt;
      auto ny = vy ? as_number(*vy) : std::nullopt;
      if (!nx || !ny) continue;
      xl = std::min(xl, *nx);
      xh = std::max(xh, *nx);
      yl = std::min(yl, *ny);
      yh = std::max(yh, *ny);
    }
    x_lo_ = params_.x_min.value_or(xl);
    x_hi_ = params_.x_max.value_or(xh);
    y_lo_ = params_.y_min.value_or(yl);
    y_hi_ = params_.y_max.value_or(yh);
    if (!std::isfinite(x_lo_) || !std::isfinite(x_hi_) || !std::isfinite(y_lo_) || !std::isfinite(y_hi_) ||
        x_hi_ < x_lo_ || y_hi_ < y_lo_) {
      throw InvalidBinningError("density: no extent (give x_min/x_max/y_min/y_max for streamed input)");
    }
  }

  Columns bin_columns(std::uint64_t bx, std::uint64_t by, std::uint64_t rx, std::uint64_t ry,
                      std::uint64_t count) const {
    double w = (x_hi_ - x_lo_) / static_cast<double>(rx);
    double h = (y_hi_ - y_lo_) / static_cast<double>(ry);
    Columns c;
    c.set("bin_x", static_cast<std::int64_t>(bx));
    c.set("bin_y", static_cast<std::int64_t>(by));
    c.set(params_.x, x_lo_ + (static_cast<double>(bx) + 0.5) * w);
    c.set(params_.y, y_lo_ + (static_cast<double>(by) + 0.5) * h);
    c.set("count", static_cast<std::int64_t>(count));
    return c;
  }

  static std::vector<double> normalize(const std::vector<std::uint64_t>& counts) {
    double total = 0.0;
    for (auto c : counts) total += static_cast<double>(c);
    std::vector<double> out(counts.size(), 0.0);
    if (total > 0.0)
      for (std::size_t i = 0; i < counts.size(); ++i) out[i] = static_cast<double>(counts[i]) / total;
    return out;
  }

  // overlap[i][j]: share of coarse cell i (of `from`) falling in fine cell j (of `to`).
  static std::vector<double> overlap(std::uint64_t from, std::uint64_t to) {
    std::vector<double> w(from * to, 0.0);
    for (std::uint64_t i = 0; i < from; ++i) {
      double a0 = static_cast<double>(i) / static_cast<double>(from);
      double a1 = static_cast<double>(i + 1) / static_cast<double>(from);
      for (std::uint64_t j = 0; j < to; ++j) {
        double b0 = static_cast<double>(j) / static_cast<double>(to);
        double b1 = static_cast<double>(j + 1) / static_cast<double>(to);
        double len = std::min(a1, b1) - std::max(a0, b0);
        if (len > 0.0) w[i * to + j] = len * static_cast<double>(from);
      }
    }
    return w;
  }

  static std::vector<double> resample(const std::vector<double>& p, std::uint64_t ax, std::uint64_t ay,
                                      std::uint64_t bx, std::uint64_t by) {
    if (ax == bx && ay == by) return p;
    auto wx = overlap(ax, bx);
    auto wy = overlap(ay, by);
    std::vector<double> rows(ay * bx, 0.0);  // x resampled first
    for (std::uint64_t iy = 0; iy < ay; ++iy)
      for (std::uint64_t ix = 0; ix < ax; ++ix) {
        double m = p[iy * ax + ix];
        if (m == 0.0) continue;
        for (std::uint64_t jx = 0; jx < bx; ++jx) rows[iy * bx + jx] += m * wx[ix * bx + jx];
      }
    std::vector<double> out(by * bx, 0.0);
    for (std::uint64_t iy = 0; iy < ay; ++iy)
      for (std::uint64_t jy = 0; jy < by; ++jy) {
        double f = wy[iy * by + jy];
        if (f == 0.0) continue;
        for (std::uint64_t jx = 0; jx < bx; ++jx) out[jy * bx + jx] += rows[iy * bx + jx] * f;
      }
    return out;
  }

  DensityParams params_;
  ChunkingType mode_;
  ProcessorDescriptor descriptor_;
  double x_lo_ = 0, x_hi_ = 0, y_lo_ = 0, y_hi_ = 0;
  std::shared_ptr<std::vector<Point>> points_ = std::make_shared<std::vector<Point>>();
  std::size_t count_ = 0;
  std::map<RowId, Emitted> emitted_;
  std::vector<std::uint64_t> prev_;
  std::uint64_t prev_rx_ = 0, prev_ry_ = 0;
  double last_stability_ = 0.0;
  std::uint64_t iterations_ = 0;
  bool converged_ = false;
};

// ---- registry ---------------------------------------------------------------

struct ProcessorEntry {
  std::string_view name;
  // Validates parameters (everything but `name`) and fills defaults.
  std::function<Json(const Json& params, const std::string& path)> normalize;
  std::function<std::unique_ptr<Processor>(const Json& normalized, const ProcessorContext&)> create;
};

inline KMeansParams kmeans_params(const Json& params, const std::string& path) {
  detail::ParamReader r(params, path);
  r.only({"k", "x", "y", "seed", "max_iterations"});
  KMeansParams p;
  auto k = r.uint("k", 1);
  if (!k) throw ValidationError(r.at("k"), "required");
  p.k = *k;
  p.x = r.string("x").value_or(p.x);
  p.y = r.string("y").value_or(p.y);
  p.seed = r.uint("seed", 0).value_or(p.seed);
  p.max_iterations = r.uint("max_iterations", 1).value_or(p.max_iterations);
  return p;
}

inline DensityParams density_params(const Json& params, const std::string& path) {
  detail::ParamReader r(params, path);
  r.only({"x", "y", "bins_x", "bins_y", "x_min", "x_max", "y_min", "y_max"});
  DensityParams p;
  p.x = r.string("x").value_or(p.x);
  p.y = r.string("y").value_or(p.y);
  p.bins_x = r.uint("bins_x", 1).value_or(p.bins_x);
  p.bins_y = r.uint("bins_y", 1).value_or(p.bins_y);
  p.x_min = r.number("x_min");
  p.x_max = r.number("x_max");
  p.y_min = r.number("y_min");
  p.y_max = r.number("y_max");
  return p;
}

inline const std::vector<ProcessorEntry>& processor_registry() {
  static const std::vector<ProcessorEntry> registry = {
      {"kmeans",
       [](const Json& params, const std::string& path) {
         auto p = kmeans_params(params, path);
         return Json{{"k", p.k}, {"x", p.x}, {"y", p.y}, {"seed", p.seed}, {"max_iterations", p.max_iterations}};
       },
       [](const Json& params, const ProcessorContext& ctx) -> std::unique_ptr<Processor> {
         return std::make_unique<KMeans>(kmeans_params(params, "processor"), ctx.mode);
       }},
      {"density",
       [](const Json& params, const std::string& path) {
         auto p = density_params(params, path);
         Json out{{"x", p.x}, {"y", p.y}, {"bins_x", p.bins_x}, {"bins_y", p.bins_y}};
         if (p.x_min) out["x_min"] = *p.x_min;
         if (p.x_max) out["x_max"] = *p.x_max;
         if (p.y_min) out["y_min"] = *p.y_min;
         if (p.y_max) out["y_max"] = *p.y_max;
         return out;
       },
       [](const Json& params, const ProcessorContext& ctx) -> std::unique_ptr<Processor> {
         return std::make_unique<Density>(density_params(params, "processor"), ctx.mode, ctx.full_data);
       }},
  };
  return registry;
}

inline const ProcessorEntry* find_processor(std::string_view name) {
  for (const auto& e : processor_registry())
    if (e.name == name) return &e;
  return nullptr;
}

inline std::unique_ptr<Processor> make_processor(const ProcessorConfig& config, const ProcessorContext& ctx) {
  const auto* entry = find_processor(config.name);
  if (!entry) throw ProcessorError("unknown processor '" + config.name + "'");
  return entry->create(config.parameters, ctx);
}

}  // namespace provega
