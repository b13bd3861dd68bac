// SPDX-FileCopyrightText: 2026 resfit contributors
// SPDX-License-Identifier: Apache-2.0

#include "resfit/matrix.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "resfit/errors.hpp"

namespace resfit {

namespace {

using EigenRowMajor =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapConst = Eigen::Map<const EigenRowMajor>;
using Map = Eigen::Map<EigenRowMajor>;

}  // namespace

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void linear_forward(const Matrix& x, const Matrix& w, std::span<const double> b,
                    Matrix& out) {
  if (x.cols() != w.cols() || b.size() != w.rows()) {
    throw DimensionError("linear_forward: shape mismatch");
  }
  if (out.rows() != x.rows() || out.cols() != w.rows()) {
    out = Matrix(x.rows(), w.rows());
  }
  MapConst xm(x.data(), static_cast<Eigen::Index>(x.rows()),
              static_cast<Eigen::Index>(x.cols()));
  MapConst wm(w.data(), static_cast<Eigen::Index>(w.rows()),
              static_cast<Eigen::Index>(w.cols()));
  Eigen::Map<const Eigen::VectorXd> bm(b.data(), static_cast<Eigen::Index>(b.size()));
  Map om(out.data(), static_cast<Eigen::Index>(out.rows()),
         static_cast<Eigen::Index>(out.cols()));
  om.noalias() = xm * wm.transpose();
  om.rowwise() += bm.transpose();
}

void linear_backward_input(const Matrix& dy, const Matrix& w, Matrix& dx) {
  if (dy.cols() != w.rows()) {
    throw DimensionError("linear_backward_input: shape mismatch");
  }
  if (dx.rows() != dy.rows() || dx.cols() != w.cols()) {
    dx = Matrix(dy.rows(), w.cols());
  }
  MapConst dym(dy.data(), static_cast<Eigen::Index>(dy.rows()),
               static_cast<Eigen::Index>(dy.cols()));
  MapConst wm(w.data(), static_cast<Eigen::Index>(w.rows()),
              static_cast<Eigen::Index>(w.cols()));
  Map dxm(dx.data(), static_cast<Eigen::Index>(dx.rows()),
          static_cast<Eigen::Index>(dx.cols()));
  dxm.noalias() = dym * wm;
}

void linear_backward_params(const Matrix& dy, const Matrix& x, Matrix& dw,
                            std::span<double> db) {
  if (dy.rows() != x.rows() || dw.rows() != dy.cols() || dw.cols() != x.cols() ||
      db.size() != dy.cols()) {
    throw DimensionError("linear_backward_params: shape mismatch");
  }
  MapConst dym(dy.data(), static_cast<Eigen::Index>(dy.rows()),
               static_cast<Eigen::Index>(dy.cols()));
  MapConst xm(x.data(), static_cast<Eigen::Index>(x.rows()),
              static_cast<Eigen::Index>(x.cols()));
  Map dwm(dw.data(), static_cast<Eigen::Index>(dw.rows()),
          static_cast<Eigen::Index>(dw.cols()));
  Eigen::Map<Eigen::VectorXd> dbm(db.data(), static_cast<Eigen::Index>(db.size()));
  dwm.noalias() += dym.transpose() * xm;
  dbm.noalias() += dym.colwise().sum().transpose();
}

}  // namespace resfit
