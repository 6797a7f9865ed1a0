#pragma once

#include <springfit/error.hpp>

#include <Eigen/Core>

#include <cstdint>
#include <unordered_map>
#include <vector>

namespace springfit {

template <typename Scalar>
using Vec3 = Eigen::Matrix<Scalar, 3, 1>;

/// Point sets are stored column-wise: one 3D point per column, meters.
template <typename Scalar>
using Points3 = Eigen::Matrix<Scalar, 3, Eigen::Dynamic>;

using Vec3d = Vec3<double>;
using PointCloud = Points3<double>;

struct Neighbor
{
  Eigen::Index index = -1;
  double distance = 0.0;

  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// True when every coordinate of the cloud is finite.
template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m)
{
  return m.allFinite();
}

/// Uniform spatial hash grid over a fixed point set.
///
/// Queries return exactly what an exhaustive scan returns; equal distances are
/// ordered by ascending point index. The index owns a copy of its points and is
/// immutable after construction, so concurrent queries are safe.
class NeighborIndex
{
public:
  /// `cell_size <= 0` picks a size from the cloud's extent and point count.
  explicit NeighborIndex(PointCloud points, double cell_size = 0.0);

  /// The k nearest points, ascending by distance. Throws InsufficientPoints if
  /// k exceeds the cloud size.
  std::vector<Neighbor> knn(const Vec3d& query, Eigen::Index k) const;

  /// All points with distance <= radius, ascending by distance.
  std::vector<Neighbor> radius_neighbors(const Vec3d& query, double radius) const;

  Neighbor nearest(const Vec3d& query) const;

  /// Nearest point with its squared distance (avoids the sqrt round trip).
  struct NearestSq
  {
    Eigen::Index index;
    double squared_distance;
  };
  NearestSq nearest_sq(const Vec3d& query) const;

  /// Squared distance plus index; the ordering key of every query.
  struct Candidate
  {
    double sq;
    Eigen::Index index;
  };

  const PointCloud& points() const noexcept { return points_; }
  Eigen::Index size() const noexcept { return points_.cols(); }
  double cell_size() const noexcept { return cell_size_; }

private:
  using CellCoord = Eigen::Matrix<std::int64_t, 3, 1>;

  struct CellHash
  {
    std::size_t operator()(std::int64_t key) const noexcept;
  };

  CellCoord cell_of(const Vec3d& p) const;
  std::int64_t key_of(const CellCoord& c) const;
  /// Chebyshev distance from `p` to the bounding box, 0 inside.
  double box_gap(const Vec3d& p) const;
  std::vector<Candidate> knn_candidates(const Vec3d& query, Eigen::Index k) const;

  template <typename Visit>
  void visit_cell(const CellCoord& c, Visit&& visit) const;

  PointCloud points_;
  double cell_size_ = 1.0;
  CellCoord lo_ = CellCoord::Zero();
  CellCoord hi_ = CellCoord::Zero();
  Eigen::Vector3d box_min_ = Eigen::Vector3d::Zero();
  Eigen::Vector3d box_max_ = Eigen::Vector3d::Zero();
  double box_diagonal_ = 0.0;
  std::vector<Eigen::Index> order_;
  std::unordered_map<std::int64_t, std::pair<std::size_t, std::size_t>, CellHash> cells_;
};

/// Symmetric Chamfer distance in m^2: mean over `a` of the squared distance to the
/// nearest point of `b`, plus the same from `b` to `a`.
double chamfer(const PointCloud& a, const PointCloud& b);

/// One-directional term of `chamfer`: mean over `from` of the squared nearest
/// distance into `to_index`.
double directed_mean_sq(const PointCloud& from, const NeighborIndex& to_index);

/// Cell size heuristic used when none is supplied.
double default_cell_size(const PointCloud& points);

} // namespace springfit
