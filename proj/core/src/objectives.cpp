#include "sppm/objectives.hpp"

#include "sppm/errors.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace sppm {

double Objective::value(const Vector& x) const {
  Vector g;
  return value_grad(x, g);
}

Vector Objective::gradient(const Vector& x) const {
  Vector g;
  value_grad(x, g);
  return g;
}

namespace {

// log(1 + exp(-t)) without overflow.
double softplus_neg(double t) {
  return t > 0.0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

// 1 / (1 + exp(t))
double sigmoid_neg(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace

LogisticObjective::LogisticObjective(const ClientShard& shard, std::size_t dimension, double mu)
    : mu_(mu) {
  if (shard.points.empty()) throw ArgumentError("logistic objective over an empty shard");
  if (!(mu > 0.0)) throw ArgumentError("logistic objective needs mu > 0");
  const auto n = static_cast<Eigen::Index>(shard.points.size());
  features_.setZero(n, static_cast<Eigen::Index>(dimension));
  labels_.resize(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto& p = shard.points[static_cast<std::size_t>(j)];
    for (const auto& f : p.features) {
      if (f.index >= dimension) throw ArgumentError("feature index exceeds dimension");
      features_(j, f.index) = f.value;
    }
    labels_[j] = p.label > 0 ? 1.0 : -1.0;
  }
  smoothness_ = features_.rowwise().squaredNorm().sum() / (4.0 * static_cast<double>(n)) + mu_;
}

double LogisticObjective::value_grad(const Vector& x, Vector& grad) const {
  const auto n = static_cast<double>(features_.rows());
  const Vector margins = (features_ * x).cwiseProduct(labels_);
  Vector coef(margins.size());
  double loss = 0.0;
  for (Eigen::Index j = 0; j < margins.size(); ++j) {
    loss += softplus_neg(margins[j]);
    coef[j] = -labels_[j] * sigmoid_neg(margins[j]);
  }
  grad = features_.transpose() * coef / n + mu_ * x;
  return loss / n + 0.5 * mu_ * x.squaredNorm();
}

Matrix LogisticObjective::hessian(const Vector& x) const {
  const auto n = static_cast<double>(features_.rows());
  const Vector margins = (features_ * x).cwiseProduct(labels_);
  Vector w(margins.size());
  for (Eigen::Index j = 0; j < margins.size(); ++j) {
    const double s = sigmoid_neg(margins[j]);
    w[j] = s * (1.0 - s);
  }
  Matrix h = features_.transpose() * w.asDiagonal() * features_ / n;
  h.diagonal().array() += mu_;
  return h;
}

QuadraticObjective::QuadraticObjective(QuadraticSpec spec)
    : A_(std::move(spec.A)), b_(std::move(spec.b)), c_(spec.c) {
  if (A_.rows() != A_.cols() || A_.rows() != b_.size() || b_.size() == 0)
    throw ArgumentError("quadratic objective: A must be d x d and b of length d");
  if (!A_.isApprox(A_.transpose(), 1e-12))
    throw ArgumentError("quadratic objective: A is not symmetric");
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(A_, Eigen::EigenvaluesOnly);
  mu_ = eig.eigenvalues().minCoeff();
  L_ = eig.eigenvalues().maxCoeff();
  if (!(mu_ > 0.0)) throw ArgumentError("quadratic objective: A is not positive definite");
}

double QuadraticObjective::value_grad(const Vector& x, Vector& grad) const {
  grad = A_ * x - b_;
  return 0.5 * x.dot(A_ * x) - b_.dot(x) + c_;
}

Vector QuadraticObjective::minimizer() const { return A_.llt().solve(b_); }

ShiftedObjective::ShiftedObjective(ObjectivePtr base, Vector center, double gamma)
    : base_(std::move(base)), center_(std::move(center)), gamma_(gamma) {
  if (!(gamma > 0.0)) throw ArgumentError("shifted objective needs gamma > 0");
}

double ShiftedObjective::value_grad(const Vector& x, Vector& grad) const {
  const double v = base_->value_grad(x, grad);
  const Vector diff = x - center_;
  grad += diff / gamma_;
  return v + diff.squaredNorm() / (2.0 * gamma_);
}

Matrix ShiftedObjective::hessian(const Vector& x) const {
  Matrix h = base_->hessian(x);
  h.diagonal().array() += 1.0 / gamma_;
  return h;
}

std::optional<QuadraticForm> ShiftedObjective::quadratic_form() const {
  auto q = base_->quadratic_form();
  if (!q) return std::nullopt;
  q->A.diagonal().array() += 1.0 / gamma_;
  q->b += center_ / gamma_;
  return q;
}

CohortObjective::CohortObjective(const ObjectiveSet& clients, std::vector<CohortMember> members)
    : clients_(&clients), members_(std::move(members)) {
  if (members_.empty()) throw ArgumentError("cohort objective over an empty cohort");
  std::sort(members_.begin(), members_.end(),
            [](const CohortMember& a, const CohortMember& b) { return a.client < b.client; });
  for (const auto& m : members_) {
    if (m.client < 0 || static_cast<std::size_t>(m.client) >= clients.size())
      throw ArgumentError("cohort member out of range");
    const auto& f = *clients[static_cast<std::size_t>(m.client)];
    mu_ += m.weight * f.mu();
    smoothness_ += m.weight * f.smoothness();
  }
}

std::size_t CohortObjective::dimension() const {
  return (*clients_)[static_cast<std::size_t>(members_.front().client)]->dimension();
}

double CohortObjective::value_grad(const Vector& x, Vector& grad) const {
  grad.setZero(x.size());
  Vector g;
  double v = 0.0;
  for (const auto& m : members_) {
    v += m.weight * (*clients_)[static_cast<std::size_t>(m.client)]->value_grad(x, g);
    grad += m.weight * g;
  }
  return v;
}

Matrix CohortObjective::hessian(const Vector& x) const {
  Matrix h = Matrix::Zero(x.size(), x.size());
  for (const auto& m : members_)
    h += m.weight * (*clients_)[static_cast<std::size_t>(m.client)]->hessian(x);
  return h;
}

std::optional<QuadraticForm> CohortObjective::quadratic_form() const {
  std::optional<QuadraticForm> out;
  for (const auto& m : members_) {
    auto q = (*clients_)[static_cast<std::size_t>(m.client)]->quadratic_form();
    if (!q) return std::nullopt;
    if (!out) {
      out = QuadraticForm{m.weight * q->A, m.weight * q->b};
    } else {
      out->A += m.weight * q->A;
      out->b += m.weight * q->b;
    }
  }
  return out;
}

Vector exact_prox_quadratic(const Objective& f, const Vector& x, double gamma) {
  if (!(gamma > 0.0)) throw ArgumentError("prox needs gamma > 0");
  const auto q = f.quadratic_form();
  if (!q) throw Unsupported("exact prox is only available for quadratic objectives");
  Matrix m = gamma * q->A;
  m.diagonal().array() += 1.0;
  const Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericError("exact prox: Cholesky failed");
  return llt.solve(x + gamma * q->b);
}

CohortObjective full_objective(const ObjectiveSet& clients) {
  std::vector<CohortMember> members;
  const double w = 1.0 / static_cast<double>(clients.size());
  for (std::size_t i = 0; i < clients.size(); ++i) members.push_back({static_cast<int>(i), w});
  return CohortObjective(clients, std::move(members));
}

ObjectiveSet make_logistic_objectives(const FederatedDataset& data, double mu) {
  ObjectiveSet out;
  out.reserve(data.shards.size());
  for (const auto& s : data.shards)
    out.push_back(std::make_shared<LogisticObjective>(s, data.dimension, mu));
  return out;
}

ObjectiveSet make_quadratic_objectives(std::span<const QuadraticSpec> specs) {
  ObjectiveSet out;
  out.reserve(specs.size());
  for (const auto& s : specs) out.push_back(std::make_shared<QuadraticObjective>(s));
  return out;
}

}  // namespace sppm
