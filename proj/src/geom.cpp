#include <springfit/geom.hpp>

#include <algorithm>
#include <cmath>
#include <queue>
#include <string>

namespace springfit {

namespace {

// Per-axis cell count is capped so packed cell keys fit in 63 bits.
constexpr double kMaxCellsPerAxis = 1.0e6;

using Candidate = NeighborIndex::Candidate;

bool closer(const Candidate& a, const Candidate& b)
{
  return a.sq < b.sq || (a.sq == b.sq && a.index < b.index);
}

std::vector<Neighbor> to_neighbors(const std::vector<Candidate>& cands)
{
  std::vector<Neighbor> out;
  out.reserve(cands.size());
  for (const auto& c : cands)
    out.push_back({c.index, std::sqrt(c.sq)});
  return out;
}

} // namespace

double default_cell_size(const PointCloud& points)
{
  if (points.cols() == 0)
    return 1.0;
  const Eigen::Vector3d extent = points.rowwise().maxCoeff() - points.rowwise().minCoeff();
  const double span = extent.maxCoeff();
  if (span <= 0.0)
    return 1.0;
  const double per_axis = std::max(1.0, std::cbrt(static_cast<double>(points.cols())));
  return span / per_axis;
}

std::size_t NeighborIndex::CellHash::operator()(std::int64_t key) const noexcept
{
  auto x = static_cast<std::uint64_t>(key);
  x ^= x >> 33;
  x *= 0xff51afd7ed558ccdULL;
  x ^= x >> 33;
  return static_cast<std::size_t>(x);
}

NeighborIndex::NeighborIndex(PointCloud points, double cell_size)
  : points_(std::move(points))
{
  if (!all_finite(points_))
    throw std::invalid_argument("point cloud contains non-finite coordinates");

  cell_size_ = cell_size > 0.0 ? cell_size : default_cell_size(points_);
  if (points_.cols() == 0)
    return;

  box_min_ = points_.rowwise().minCoeff();
  box_max_ = points_.rowwise().maxCoeff();
  box_diagonal_ = (box_max_ - box_min_).norm();
  cell_size_ = std::max(cell_size_, (box_max_ - box_min_).maxCoeff() / kMaxCellsPerAxis);

  lo_ = cell_of(box_min_);
  hi_ = cell_of(box_max_);
  for (Eigen::Index i = 0; i < points_.cols(); ++i) {
    const CellCoord c = cell_of(points_.col(i));
    lo_ = lo_.cwiseMin(c);
    hi_ = hi_.cwiseMax(c);
  }

  std::vector<std::pair<std::int64_t, Eigen::Index>> keyed;
  keyed.reserve(static_cast<std::size_t>(points_.cols()));
  for (Eigen::Index i = 0; i < points_.cols(); ++i)
    keyed.emplace_back(key_of(cell_of(points_.col(i))), i);
  std::sort(keyed.begin(), keyed.end());

  order_.reserve(keyed.size());
  std::size_t start = 0;
  for (std::size_t k = 0; k < keyed.size(); ++k) {
    order_.push_back(keyed[k].second);
    if (k + 1 == keyed.size() || keyed[k + 1].first != keyed[k].first) {
      cells_.emplace(keyed[k].first, std::make_pair(start, k + 1));
      start = k + 1;
    }
  }
}

NeighborIndex::CellCoord NeighborIndex::cell_of(const Vec3d& p) const
{
  CellCoord c;
  for (int d = 0; d < 3; ++d)
    c[d] = static_cast<std::int64_t>(std::floor((p[d] - box_min_[d]) / cell_size_));
  return c;
}

double NeighborIndex::box_gap(const Vec3d& p) const
{
  return (box_min_ - p).cwiseMax(p - box_max_).cwiseMax(0.0).maxCoeff();
}

std::int64_t NeighborIndex::key_of(const CellCoord& c) const
{
  const CellCoord span = hi_ - lo_ + CellCoord::Ones();
  const CellCoord o = c - lo_;
  return o[0] + span[0] * (o[1] + span[1] * o[2]);
}

template <typename Visit>
void NeighborIndex::visit_cell(const CellCoord& c, Visit&& visit) const
{
  if ((c.array() < lo_.array()).any() || (c.array() > hi_.array()).any())
    return;
  const auto it = cells_.find(key_of(c));
  if (it == cells_.end())
    return;
  for (std::size_t k = it->second.first; k < it->second.second; ++k)
    visit(order_[k]);
}

std::vector<Neighbor> NeighborIndex::knn(const Vec3d& query, Eigen::Index k) const
{
  return to_neighbors(knn_candidates(query, k));
}

std::vector<NeighborIndex::Candidate> NeighborIndex::knn_candidates(const Vec3d& query,
                                                                    Eigen::Index k) const
{
  if (k <= 0)
    throw std::invalid_argument("k must be positive");
  if (k > points_.cols())
    throw InsufficientPoints("insufficient points: k = " + std::to_string(k) + " but cloud has " +
                             std::to_string(points_.cols()));

  // Max-heap (worst candidate on top) of the best k seen so far.
  std::vector<Candidate> heap;
  heap.reserve(static_cast<std::size_t>(k) + 1);
  auto consider = [&](Eigen::Index i) {
    const Candidate c{(points_.col(i) - query).squaredNorm(), i};
    if (static_cast<Eigen::Index>(heap.size()) < k) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end(), closer);
    } else if (closer(c, heap.front())) {
      std::pop_heap(heap.begin(), heap.end(), closer);
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end(), closer);
    }
  };

  // Far queries would walk many empty rings (or overflow the cell math).
  const double reach = static_cast<double>((hi_ - lo_).maxCoeff() + 2) * cell_size_;
  if (!(box_gap(query) <= reach)) {
    for (Eigen::Index i = 0; i < points_.cols(); ++i)
      consider(i);
    std::sort(heap.begin(), heap.end(), closer);
    return heap;
  }

  const CellCoord qc = cell_of(query);
  // Shells closer than the Chebyshev gap to the occupied block are empty.
  const std::int64_t first_ring = std::max<std::int64_t>(
    0, std::max((lo_ - qc).maxCoeff(), (qc - hi_).maxCoeff()));
  for (std::int64_t ring = first_ring;; ++ring) {
    const CellCoord from = qc - CellCoord::Constant(ring);
    const CellCoord to = qc + CellCoord::Constant(ring);
    const CellCoord clo = from.cwiseMax(lo_);
    const CellCoord chi = to.cwiseMin(hi_);
    for (std::int64_t x = clo[0]; x <= chi[0]; ++x)
      for (std::int64_t y = clo[1]; y <= chi[1]; ++y) {
        const bool x_or_y_on_shell = x == from[0] || x == to[0] || y == from[1] || y == to[1];
        if (x_or_y_on_shell) {
          for (std::int64_t z = clo[2]; z <= chi[2]; ++z)
            visit_cell(CellCoord(x, y, z), consider);
        } else {
          if (from[2] >= lo_[2] && from[2] <= hi_[2])
            visit_cell(CellCoord(x, y, from[2]), consider);
          if (ring > 0 && to[2] >= lo_[2] && to[2] <= hi_[2])
            visit_cell(CellCoord(x, y, to[2]), consider);
        }
      }

    const bool covers_all = (from.array() <= lo_.array()).all() && (to.array() >= hi_.array()).all();
    if (covers_all)
      break;
    if (static_cast<Eigen::Index>(heap.size()) == k) {
      // Points outside the visited block are at least `ring` cells away.
      const double bound = static_cast<double>(ring) * cell_size_ * (1.0 - 1e-9);
      if (heap.front().sq < bound * bound)
        break;
    }
  }

  std::sort(heap.begin(), heap.end(), closer);
  return heap;
}

std::vector<Neighbor> NeighborIndex::radius_neighbors(const Vec3d& query, double radius) const
{
  if (!(radius > 0.0))
    throw std::invalid_argument("radius must be positive");

  const double r2 = radius * radius;
  std::vector<Candidate> found;
  auto consider = [&](Eigen::Index i) {
    const double sq = (points_.col(i) - query).squaredNorm();
    if (sq <= r2)
      found.push_back({sq, i});
  };

  if (!(box_gap(query) <= radius))
    return {};

  const CellCoord from = cell_of(query - Vec3d::Constant(radius)) - CellCoord::Ones();
  const CellCoord to = cell_of(query + Vec3d::Constant(radius)) + CellCoord::Ones();
  const CellCoord clo = from.cwiseMax(lo_);
  const CellCoord chi = to.cwiseMin(hi_);
  double cells = 1.0;
  for (int d = 0; d < 3; ++d)
    cells *= static_cast<double>(std::max<std::int64_t>(0, chi[d] - clo[d] + 1));

  if (radius > box_diagonal_ || cells > static_cast<double>(points_.cols())) {
    for (Eigen::Index i = 0; i < points_.cols(); ++i)
      consider(i);
  } else {
    for (std::int64_t x = clo[0]; x <= chi[0]; ++x)
      for (std::int64_t y = clo[1]; y <= chi[1]; ++y)
        for (std::int64_t z = clo[2]; z <= chi[2]; ++z)
          visit_cell(CellCoord(x, y, z), consider);
  }

  std::sort(found.begin(), found.end(), closer);
  return to_neighbors(found);
}

Neighbor NeighborIndex::nearest(const Vec3d& query) const
{
  return knn(query, 1).front();
}

NeighborIndex::NearestSq NeighborIndex::nearest_sq(const Vec3d& query) const
{
  const Candidate c = knn_candidates(query, 1).front();
  return {c.index, c.sq};
}

double directed_mean_sq(const PointCloud& from, const NeighborIndex& to_index)
{
  if (from.cols() == 0 || to_index.size() == 0)
    throw std::invalid_argument("chamfer requires non-empty clouds");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < from.cols(); ++i)
    sum += to_index.nearest_sq(from.col(i)).squared_distance;
  return sum / static_cast<double>(from.cols());
}

double chamfer(const PointCloud& a, const PointCloud& b)
{
  if (a.cols() == 0 || b.cols() == 0)
    throw std::invalid_argument("chamfer requires non-empty clouds");
  const NeighborIndex ia(a);
  const NeighborIndex ib(b);
  return directed_mean_sq(a, ib) + directed_mean_sq(b, ia);
}

} // namespace springfit
