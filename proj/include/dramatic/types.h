#ifndef DRAMATIC_TYPES_H_
#define DRAMATIC_TYPES_H_

#include <Eigen/Dense>

namespace dramatic {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
// Designs are stored row-major so that any contiguous row range (e.g. the
// source block of a stacked dataset) is itself a dense matrix.
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMatrix>;

}  // namespace dramatic

#endif  // DRAMATIC_TYPES_H_
