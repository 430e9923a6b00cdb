#pragma once

#include "sppm/data_ingest.hpp"
#include "sppm/types.hpp"

#include <memory>
#include <optional>
#include <span>
#include <vector>

namespace sppm {

/// Hessian and linear term of a quadratic objective: grad f(x) = A x - b.
struct QuadraticForm {
  Matrix A;
  Vector b;
};

/// A differentiable, strongly convex client loss.
class Objective {
 public:
  virtual ~Objective() = default;

  virtual std::size_t dimension() const = 0;
  /// Returns f(x) and writes grad f(x) into `grad` (resized as needed).
  virtual double value_grad(const Vector& x, Vector& grad) const = 0;
  virtual Matrix hessian(const Vector& x) const = 0;
  virtual double mu() const = 0;
  virtual double smoothness() const = 0;
  /// Set only for objectives that are exactly quadratic.
  virtual std::optional<QuadraticForm> quadratic_form() const {
    return std::nullopt;
  }

  double value(const Vector& x) const;
  Vector gradient(const Vector& x) const;
};

using ObjectivePtr = std::shared_ptr<const Objective>;
using ObjectiveSet = std::vector<ObjectivePtr>;

/// (1/n_i) sum_j log(1 + exp(-b_j x'a_j)) + (mu/2)|x|^2
class LogisticObjective final : public Objective {
 public:
  LogisticObjective(const ClientShard& shard, std::size_t dimension, double mu);

  std::size_t dimension() const override { return features_.cols(); }
  double value_grad(const Vector& x, Vector& grad) const override;
  Matrix hessian(const Vector& x) const override;
  double mu() const override { return mu_; }
  /// (1/(4 n_i)) sum_j |a_j|^2 + mu
  double smoothness() const override { return smoothness_; }

  std::size_t size() const { return static_cast<std::size_t>(features_.rows()); }

 private:
  Matrix features_;  // n_i x d
  Vector labels_;
  double mu_;
  double smoothness_;
};

/// 1/2 x'Ax - b'x + c with A symmetric positive definite. mu and L are the
/// extreme eigenvalues of A, computed once at construction.
class QuadraticObjective final : public Objective {
 public:
  explicit QuadraticObjective(QuadraticSpec spec);

  std::size_t dimension() const override { return b_.size(); }
  double value_grad(const Vector& x, Vector& grad) const override;
  Matrix hessian(const Vector&) const override { return A_; }
  double mu() const override { return mu_; }
  double smoothness() const override { return L_; }
  std::optional<QuadraticForm> quadratic_form() const override {
    return QuadraticForm{A_, b_};
  }

  const Matrix& A() const { return A_; }
  const Vector& b() const { return b_; }
  Vector minimizer() const;

 private:
  Matrix A_;
  Vector b_;
  double c_;
  double mu_;
  double L_;
};

/// f(z) + |z - center|^2 / (2 gamma); the local objective of FedAvg-style
/// inner loops.
class ShiftedObjective final : public Objective {
 public:
  ShiftedObjective(ObjectivePtr base, Vector center, double gamma);

  std::size_t dimension() const override { return base_->dimension(); }
  double value_grad(const Vector& x, Vector& grad) const override;
  Matrix hessian(const Vector& x) const override;
  double mu() const override { return base_->mu() + 1.0 / gamma_; }
  double smoothness() const override { return base_->smoothness() + 1.0 / gamma_; }
  std::optional<QuadraticForm> quadratic_form() const override;

 private:
  ObjectivePtr base_;
  Vector center_;
  double gamma_;
};

struct CohortMember {
  int client;
  double weight;
};

/// f_C(x) = sum_{i in C} w_i f_i(x) with w_i = 1/(n p_i). Members are kept
/// in ascending client order and every reduction runs in that order.
class CohortObjective final : public Objective {
 public:
  CohortObjective(const ObjectiveSet& clients, std::vector<CohortMember> members);

  std::size_t dimension() const override;
  double value_grad(const Vector& x, Vector& grad) const override;
  Matrix hessian(const Vector& x) const override;
  /// sum_i w_i mu_i
  double mu() const override { return mu_; }
  double smoothness() const override { return smoothness_; }
  std::optional<QuadraticForm> quadratic_form() const override;

  const std::vector<CohortMember>& members() const { return members_; }

 private:
  const ObjectiveSet* clients_;
  std::vector<CohortMember> members_;
  double mu_ = 0.0;
  double smoothness_ = 0.0;
};

/// prox_{gamma f}(x) = (I + gamma A)^{-1} (x + gamma b) by Cholesky. Throws
/// Unsupported for non-quadratic objectives.
Vector exact_prox_quadratic(const Objective& f, const Vector& x, double gamma);

/// Full objective (1/n) sum_i f_i as a cohort with unit-marginal weights.
CohortObjective full_objective(const ObjectiveSet& clients);

ObjectiveSet make_logistic_objectives(const FederatedDataset& data, double mu);
ObjectiveSet make_quadratic_objectives(std::span<const QuadraticSpec> specs);

}  // namespace sppm
