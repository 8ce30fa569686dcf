#pragma once

#include <functional>

#include "cwb/field.hpp"

namespace cwb {

/// Orthonormal frame of a rank-r subbundle of C^N over a chart grid
/// (dim <= 2): one N x r matrix with orthonormal columns per grid point,
/// gauge-aligned so the field is smooth and periodic.
struct FrameField {
  TorusChart chart;
  int N = 0, r = 0;
  std::vector<Eigen::MatrixXcd> F;

  MatrixField as_field() const;  // N x r matrix field
  /// Max frame jump between neighbouring grid points (diagnostic).
  double max_jump() const;
};

/// Orthonormalize columns by thin QR with positive diagonal.
Eigen::MatrixXcd orthonormalize(const Eigen::MatrixXcd& x);

/// Unitary polar factor.
Eigen::MatrixXcd unitary_part_of(const Eigen::MatrixXcd& w);

/// Principal logarithm of a unitary matrix.
Eigen::MatrixXcd unitary_log(const Eigen::MatrixXcd& w);

/// Kernel basis of a matrix via SVD with relative threshold; throws
/// RankJump when expected_dim >= 0 disagrees.
Eigen::MatrixXcd kernel_basis(const Eigen::MatrixXcd& m, double rel_tol = 1e-7,
                              int expected_dim = -1);

/// Eigenvectors of a Hermitian matrix with |eigenvalue| < cutoff; gap_out
/// receives the smallest |eigenvalue| at or above the cutoff.
Eigen::MatrixXcd low_eigenvectors(const Eigen::MatrixXcd& h, double cutoff, double* gap_out);

/// Gauge-align raw per-point frames into a smooth periodic frame field:
/// sweep each axis projecting the previous frame forward, then divide out
/// the wrap-around holonomy so the field closes up.
FrameField smooth_frames(const TorusChart& chart, const std::vector<Eigen::MatrixXcd>& raw);

/// Align a non-periodic 1-parameter family of frames (transport in an
/// auxiliary parameter, e.g. an interval path).
std::vector<Eigen::MatrixXcd> sweep_frames(const std::vector<Eigen::MatrixXcd>& raw);

/// Ordered projection product mapping span(frames.front()) to
/// span(frames.back()), in frame coordinates.
Eigen::MatrixXcd ordered_transport(const std::vector<Eigen::MatrixXcd>& frames);

}  // namespace cwb
