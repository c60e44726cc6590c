#include "flowagree/plant.hpp"

#include "flowagree/errors.hpp"

#include <random>

namespace flowagree {

using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

MatrixXd block_diagonal(const std::vector<MatrixXd>& blocks) {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  MatrixXd out = MatrixXd::Zero(rows, cols);
  Eigen::Index r = 0;
  Eigen::Index c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

MatrixXd stack_rows(const std::vector<MatrixXd>& blocks) {
  Eigen::Index rows = 0;
  for (const auto& b : blocks) rows += b.rows();
  MatrixXd out(rows, blocks.empty() ? 0 : blocks.front().cols());
  Eigen::Index r = 0;
  for (const auto& b : blocks) {
    out.middleRows(r, b.rows()) = b;
    r += b.rows();
  }
  return out;
}

std::string node_label(int i) { return "node " + std::to_string(i + 1); }

}  // namespace

const char* to_string(PlantKind kind) {
  switch (kind) {
    case PlantKind::Inventory: return "inventory";
    case PlantKind::LinearPassive: return "linear";
    case PlantKind::GradientNonlinear: return "gradient";
  }
  return "?";
}

VectorXd ConcaveGradient::operator()(const VectorXd& x) const {
  switch (kind) {
    case Kind::Quadratic: return -(M * x);
    case Kind::Cubic: return -x.array().cube().matrix();
    case Kind::Tanh: return -scale * x.array().tanh().matrix();
  }
  return VectorXd::Zero(x.size());
}

Plant Plant::inventory(MatrixXd P) {
  Plant plant;
  plant.kind_ = PlantKind::Inventory;
  plant.offsets_.resize(P.rows() + 1);
  for (Eigen::Index i = 0; i <= P.rows(); ++i) plant.offsets_[i] = static_cast<int>(i);
  plant.output_dim_ = 1;
  plant.supply_ = std::move(P);
  return plant;
}

Plant Plant::linear(std::vector<LinearNode> nodes) {
  if (nodes.empty()) throw DimensionError("linear plant needs at least one node");
  Plant plant;
  plant.kind_ = PlantKind::LinearPassive;
  plant.offsets_ = {0};
  plant.output_dim_ = static_cast<int>(nodes.front().C.rows());
  const Eigen::Index q = nodes.front().P.cols();
  std::vector<MatrixXd> supplies;
  for (size_t i = 0; i < nodes.size(); ++i) {
    const auto& node = nodes[i];
    const Eigen::Index r = node.A.rows();
    const int p = plant.output_dim_;
    const auto label = node_label(static_cast<int>(i));
    if (node.A.cols() != r) throw DimensionError(label + ": A must be square");
    if (node.G.rows() != r || node.G.cols() != p) {
      throw DimensionError(label + ": G must be r_i x p");
    }
    if (node.C.rows() != p || node.C.cols() != r) {
      throw DimensionError(label + ": C must be p x r_i");
    }
    if (node.P.rows() != r || node.P.cols() != q) {
      throw DimensionError(label + ": P must be r_i x q");
    }
    if (node.Q.rows() != r || node.Q.cols() != r) {
      throw DimensionError(label + ": Q must be r_i x r_i");
    }
    plant.offsets_.push_back(plant.offsets_.back() + static_cast<int>(r));
    supplies.push_back(node.P);
  }
  plant.supply_ = stack_rows(supplies);
  plant.linear_ = std::move(nodes);
  return plant;
}

Plant Plant::gradient(std::vector<GradientNode> nodes) {
  if (nodes.empty()) throw DimensionError("gradient plant needs at least one node");
  Plant plant;
  plant.kind_ = PlantKind::GradientNonlinear;
  plant.offsets_ = {0};
  plant.output_dim_ = static_cast<int>(nodes.front().C.rows());
  const Eigen::Index q = nodes.front().P.cols();
  std::vector<MatrixXd> supplies;
  for (size_t i = 0; i < nodes.size(); ++i) {
    auto& node = nodes[i];
    const Eigen::Index r = node.C.cols();
    const auto label = node_label(static_cast<int>(i));
    if (node.C.rows() != plant.output_dim_) {
      throw DimensionError(label + ": C must be p x r_i");
    }
    if (node.P.rows() != r || node.P.cols() != q) {
      throw DimensionError(label + ": P must be r_i x q");
    }
    if (node.G.size() == 0) node.G = node.C.transpose();
    if (node.G.rows() != r || node.G.cols() != plant.output_dim_) {
      throw DimensionError(label + ": G must be r_i x p");
    }
    if (node.drift.kind == ConcaveGradient::Kind::Quadratic &&
        (node.drift.M.rows() != r || node.drift.M.cols() != r)) {
      throw DimensionError(label + ": drift matrix must be r_i x r_i");
    }
    plant.offsets_.push_back(plant.offsets_.back() + static_cast<int>(r));
    supplies.push_back(node.P);
  }
  plant.supply_ = stack_rows(supplies);
  plant.gradient_ = std::move(nodes);
  return plant;
}

void Plant::check_dims(const VectorXd& x, const VectorXd* u, const VectorXd& w) const {
  if (x.size() != state_dim()) {
    throw DimensionError("plant state has dimension " + std::to_string(x.size()) +
                         ", expected " + std::to_string(state_dim()));
  }
  if (u != nullptr && u->size() != node_count() * output_dim_) {
    throw DimensionError("plant input has dimension " + std::to_string(u->size()) +
                         ", expected " + std::to_string(node_count() * output_dim_));
  }
  if (w.size() != disturbance_dim()) {
    throw DimensionError("disturbance has dimension " + std::to_string(w.size()) +
                         ", plant expects " + std::to_string(disturbance_dim()));
  }
}

VectorXd Plant::dynamics(const VectorXd& x, const VectorXd& u, const VectorXd& w) const {
  check_dims(x, &u, w);
  const int p = output_dim_;
  switch (kind_) {
    case PlantKind::Inventory:
      return u + supply_ * w;
    case PlantKind::LinearPassive: {
      VectorXd dx(state_dim());
      for (int i = 0; i < node_count(); ++i) {
        const auto& node = linear_[i];
        const auto xi = x.segment(node_offset(i), node_state_dim(i));
        dx.segment(node_offset(i), node_state_dim(i)) =
            node.A * xi + node.G * u.segment(i * p, p) + node.P * w;
      }
      return dx;
    }
    case PlantKind::GradientNonlinear: {
      VectorXd dx(state_dim());
      for (int i = 0; i < node_count(); ++i) {
        const auto& node = gradient_[i];
        const VectorXd xi = x.segment(node_offset(i), node_state_dim(i));
        dx.segment(node_offset(i), node_state_dim(i)) =
            node.drift(xi) + node.G * u.segment(i * p, p) + node.P * w;
      }
      return dx;
    }
  }
  return VectorXd::Zero(state_dim());
}

VectorXd Plant::output(const VectorXd& x, const VectorXd& w) const {
  check_dims(x, nullptr, w);
  if (kind_ == PlantKind::Inventory) return x;
  const int p = output_dim_;
  VectorXd y(node_count() * p);
  for (int i = 0; i < node_count(); ++i) {
    const MatrixXd& C = kind_ == PlantKind::LinearPassive ? linear_[i].C : gradient_[i].C;
    y.segment(i * p, p) = C * x.segment(node_offset(i), node_state_dim(i));
  }
  return y;
}

double Plant::incremental_storage(const VectorXd& x, const VectorXd& x_ref) const {
  if (x.size() != x_ref.size()) throw DimensionError("storage arguments differ in size");
  const VectorXd e = x - x_ref;
  if (kind_ != PlantKind::LinearPassive) return 0.5 * e.squaredNorm();
  double storage = 0.0;
  for (int i = 0; i < node_count(); ++i) {
    const auto ei = e.segment(node_offset(i), node_state_dim(i));
    storage += 0.5 * ei.dot(linear_[i].Q * ei);
  }
  return storage;
}

double Plant::passivity_rate_check(const VectorXd& x, const VectorXd& x_ref,
                                   const VectorXd& u, const VectorXd& u_ref,
                                   const VectorXd& w) const {
  const VectorXd e = x - x_ref;
  const VectorXd de = dynamics(x, u, w) - dynamics(x_ref, u_ref, w);
  double rate = 0.0;
  if (kind_ == PlantKind::LinearPassive) {
    for (int i = 0; i < node_count(); ++i) {
      const auto ei = e.segment(node_offset(i), node_state_dim(i));
      rate += ei.dot(linear_[i].Q * de.segment(node_offset(i), node_state_dim(i)));
    }
  } else {
    rate = e.dot(de);
  }
  const VectorXd dy = output(x, w) - output(x_ref, w);
  return rate - dy.dot(u - u_ref);
}

std::optional<LinearModel> Plant::linear_model() const {
  const int n = node_count();
  switch (kind_) {
    case PlantKind::Inventory:
      return LinearModel{MatrixXd::Zero(n, n), MatrixXd::Identity(n, n),
                         MatrixXd::Identity(n, n), supply_};
    case PlantKind::LinearPassive: {
      std::vector<MatrixXd> A, G, C;
      for (const auto& node : linear_) {
        A.push_back(node.A);
        G.push_back(node.G);
        C.push_back(node.C);
      }
      return LinearModel{block_diagonal(A), block_diagonal(G), block_diagonal(C), supply_};
    }
    case PlantKind::GradientNonlinear: {
      std::vector<MatrixXd> A, G, C;
      for (const auto& node : gradient_) {
        if (node.drift.kind != ConcaveGradient::Kind::Quadratic) return std::nullopt;
        A.push_back(-node.drift.M);
        G.push_back(node.G);
        C.push_back(node.C);
      }
      return LinearModel{block_diagonal(A), block_diagonal(G), block_diagonal(C), supply_};
    }
  }
  return std::nullopt;
}

std::vector<std::string> validate(const Plant& plant, std::uint64_t seed) {
  std::vector<std::string> violations;
  switch (plant.kind()) {
    case PlantKind::Inventory: {
      const double imbalance = plant.supply_matrix().colwise().sum().cwiseAbs().maxCoeff();
      const double scale = std::max(1.0, plant.supply_matrix().cwiseAbs().maxCoeff());
      if (imbalance > 1e-10 * scale) {
        violations.push_back("supply not balanced: 1^T P != 0 (max column sum " +
                             std::to_string(imbalance) + ")");
      }
      break;
    }
    case PlantKind::LinearPassive:
      for (int i = 0; i < plant.node_count(); ++i) {
        const auto& node = plant.linear_nodes()[i];
        const auto label = node_label(i);
        if ((node.Q - node.Q.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
          violations.push_back(label + ": Q is not symmetric");
          continue;
        }
        Eigen::SelfAdjointEigenSolver<MatrixXd> q_eig(node.Q);
        if (q_eig.eigenvalues().minCoeff() <= 0.0) {
          violations.push_back(label + ": Q is not positive definite");
        }
        const MatrixXd lyap = node.A.transpose() * node.Q + node.Q * node.A;
        Eigen::SelfAdjointEigenSolver<MatrixXd> l_eig(0.5 * (lyap + lyap.transpose()));
        if (l_eig.eigenvalues().maxCoeff() > 1e-10) {
          violations.push_back(label + ": A^T Q + Q A is not negative semidefinite");
        }
        if ((node.Q * node.G - node.C.transpose()).cwiseAbs().maxCoeff() > 1e-10) {
          violations.push_back(label + ": Q G != C^T");
        }
      }
      break;
    case PlantKind::GradientNonlinear: {
      std::mt19937_64 rng(seed);
      std::normal_distribution<double> normal(0.0, 2.0);
      for (int i = 0; i < plant.node_count(); ++i) {
        const auto& node = plant.gradient_nodes()[i];
        const auto label = node_label(i);
        if (node.G != MatrixXd(node.C.transpose())) {
          violations.push_back(label + ": G != C^T");
        }
        if (node.drift.kind == ConcaveGradient::Kind::Quadratic &&
            (node.drift.M - node.drift.M.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
          violations.push_back(label + ": drift matrix is not symmetric");
        }
        if (node.drift.kind == ConcaveGradient::Kind::Tanh && node.drift.scale < 0.0) {
          violations.push_back(label + ": tanh drift scale must be nonnegative");
        }
        const int r = plant.node_state_dim(i);
        for (int s = 0; s < 100; ++s) {
          VectorXd a(r), b(r);
          for (int j = 0; j < r; ++j) {
            a(j) = normal(rng);
            b(j) = normal(rng);
          }
          if ((a - b).dot(node.drift(a) - node.drift(b)) > 1e-10) {
            violations.push_back(label + ": drift is not the gradient of a concave function");
            break;
          }
        }
      }
      break;
    }
  }
  return violations;
}

}  // namespace flowagree
