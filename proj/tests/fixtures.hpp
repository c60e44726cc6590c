#pragma once

// Small model configurations shared by the unit tests and the acceptance run.

#include "flowagree/controller.hpp"
#include "flowagree/exosystem.hpp"
#include "flowagree/graph.hpp"
#include "flowagree/plant.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <fstream>
#include <string>

namespace fixture {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline MatrixXd rotation() {
  MatrixXd S(2, 2);
  S << 0, 1, -1, 0;
  return S;
}

// Balanced harmonic supply on three nodes.
inline MatrixXd ring3_supply() {
  MatrixXd P(3, 2);
  P << 1, 0, -1, 1, 0, -1;
  return P;
}

inline VectorXd vec(std::initializer_list<double> values) {
  VectorXd v(static_cast<Eigen::Index>(values.size()));
  Eigen::Index i = 0;
  for (double x : values) v(i++) = x;
  return v;
}

// Mass-spring-damper style node with storage 1/2 |x|^2 and velocity output.
inline flowagree::LinearNode oscillator_node(double damping, double stiffness, int q,
                                             const VectorXd& supply_row) {
  flowagree::LinearNode node;
  node.A = MatrixXd(2, 2);
  node.A << -damping, stiffness, -stiffness, 0;
  node.G = MatrixXd(2, 1);
  node.G << 0, 1;
  node.C = node.G.transpose();
  node.Q = MatrixXd::Identity(2, 2);
  node.P = MatrixXd::Zero(2, q);
  node.P.row(1) = supply_row.transpose();
  return node;
}

// Three passive linear nodes driven by the harmonic supply.
inline flowagree::Plant linear_ring3_plant() {
  const MatrixXd P = ring3_supply();
  return flowagree::Plant::linear({oscillator_node(1.0, 1.0, 2, P.row(0).transpose()),
                                   oscillator_node(2.0, 1.0, 2, P.row(1).transpose()),
                                   oscillator_node(1.0, 1.0, 2, P.row(2).transpose())});
}

// Two-dimensional outputs (p = 2): integrator pairs x' = u + P w with
// a nontrivial storage weight.
inline flowagree::Plant vector_output_plant(int n, int q) {
  std::vector<flowagree::LinearNode> nodes;
  for (int i = 0; i < n; ++i) {
    flowagree::LinearNode node;
    node.A = MatrixXd::Zero(2, 2);
    node.A(0, 0) = -0.5 * (i + 1);
    node.Q = MatrixXd::Identity(2, 2) * (1.0 + i);
    node.C = MatrixXd::Identity(2, 2);
    node.G = node.Q.inverse() * node.C.transpose();
    node.P = MatrixXd::Zero(2, q);
    nodes.push_back(node);
  }
  return flowagree::Plant::linear(nodes);
}

inline flowagree::Plant gradient_plant() {
  using flowagree::ConcaveGradient;
  std::vector<flowagree::GradientNode> nodes;
  ConcaveGradient quad{ConcaveGradient::Kind::Quadratic, MatrixXd::Identity(1, 1) * 0.7, 1.0};
  ConcaveGradient cubic{ConcaveGradient::Kind::Cubic, MatrixXd(), 1.0};
  ConcaveGradient tanh{ConcaveGradient::Kind::Tanh, MatrixXd(), 2.0};
  for (const auto& drift : {quad, cubic, tanh}) {
    flowagree::GradientNode node;
    node.drift = drift;
    node.C = MatrixXd::Identity(1, 1);
    node.P = MatrixXd::Zero(1, 1);
    nodes.push_back(node);
  }
  return flowagree::Plant::gradient(nodes);
}

// Writes text to a fresh file under a per-test temporary directory.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("flowagree_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

}  // namespace fixture
