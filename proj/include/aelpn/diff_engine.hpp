#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aelpn/tensor.hpp"

namespace aelpn {

// Primitive kinds. Forward programs are composed from the upper group; the
// lower group appears when a reverse pass is unrolled onto the tape.
enum class Op : std::uint8_t {
  kInput,
  kConst,
  kAffineMap,     // W*v (+ b)
  kPairwiseMax,   // halving max over adjacent pairs, first index wins ties
  kSortPool,      // (max, min) per adjacent pair
  kSoftplus,      // log1p(exp(beta*t))/beta
  kRectifier,     // max(t, 0)
  kRectifySquare, // max(t, 0)^2, derivative 2*max(t, 0)
  kSquare,        // t^2
  kSquaredNorm,   // sum v_i^2 (scalar)
  kInnerProduct,  // <u, v> (scalar)
  kScalarCombine, // c0*u + c1*v
  kHadamard,      // u .* v
  kMeanProject,   // mean(v) * ones
  kCenter,        // v - mean(v) * ones

  kAffineMapT,    // W^T * v
  kLogistic,      // sigmoid(beta*t), the softplus derivative
  kPosMask,       // 1 if t > 0 else 0
  kPairRoute,     // scatter half-length vector at the winners of a kPairwiseMax
  kSortRoute,     // apply a kSortPool's pairwise permutation
  kScaleByScalar, // c0 * s * v with s a length-1 node
  kL1Mean,        // mean |r_i| (scalar)
  kL2HalfMean,    // mean r_i^2 / 2 (scalar)
  kProxMatch,     // 1 - (pi*gamma^2)^(-n/2) * exp(-s/gamma^2), from s = |r|^2
};

struct Node {
  Op op = Op::kConst;
  int a = -1;   // first input node
  int b = -1;   // second input node, or routed-source node for *Route ops
  int w = -1;   // weight slot (affine ops)
  int bias = -1;
  double c0 = 0.0;
  double c1 = 0.0;
  bool needs_x = false;  // input node in the ancestry
  std::vector<std::uint8_t> sel;  // pairwise winners / swap flags
  Vec val;
  Vec adj;
};

// Evaluation tape. Nodes are evaluated eagerly as they are pushed; clear()
// rewinds without releasing buffers so a tape can be reused across many
// evaluations without reallocating.
class Tape {
 public:
  explicit Tape(const ParamSet* params = nullptr) : params_(params) {}

  void bind(const ParamSet* params) { params_ = params; }
  void clear() { used_ = 0; }
  std::size_t size() const { return used_; }
  const Node& node(int id) const { return pool_[static_cast<std::size_t>(id)]; }
  const Vec& value(int id) const { return node(id).val; }
  double scalar(int id) const;

  int input(const Vec& x);
  int constant(const Vec& v);
  int constant(double v);
  int affine(int wslot, int bslot, int v);
  int affine_t(int wslot, int v);
  int pairwise_max(int v);
  int sortpool(int v);
  int softplus(int v, double beta);
  int logistic(int v, double beta);
  int rectifier(int v);
  int pos_mask(int v);
  int rectify_square(int v);
  int square(int v);
  int squared_norm(int v);
  int inner_product(int u, int v);
  int combine(double c0, int u, double c1 = 0.0, int v = -1);
  int hadamard(int u, int v);
  int mean_project(int v);
  int center(int v);
  int pair_route(int g, int src);
  int sort_route(int g, int src);
  int scale_by_scalar(int s, int v, double c0 = 1.0);
  int l1_mean(int r);
  int l2_half_mean(int r);
  int prox_match(int s, double gamma, std::size_t n);

  // Unrolls the reverse pass of `target` with respect to the single input
  // node `x_input`, appending the gradient computation to the tape, and
  // returns the node holding d(target)/d(x). Only forward-group primitives
  // may lie between the two nodes.
  int gradient_wrt(int target, int x_input);

  // Plain numeric reverse pass from a scalar `target`. Input-node adjoints
  // land in node.adj; parameter adjoints accumulate into `param_grads`
  // (same slot shapes as the bound ParamSet) when it is non-null.
  void backward(int target, ParamSet* param_grads = nullptr);

 private:
  Node& push(Op op);
  void eval(Node& n);
  const Tensor& slot(int id) const;

  const ParamSet* params_ = nullptr;
  std::vector<Node> pool_;
  std::size_t used_ = 0;
};

// Scalar potential expressed as tape construction: receives the tape and the
// input node, returns the scalar output node.
using ProgramBuilder = std::function<int(Tape&, int)>;

struct ValueGrad {
  double value = 0.0;
  Vec grad;
};

// Evaluates psi(x) and its exact input gradient in one pass.
ValueGrad potential_and_gradient(const ProgramBuilder& program,
                                 const ParamSet& params, const Vec& x);
ValueGrad potential_and_gradient(const ProgramBuilder& program,
                                 const ParamSet& params, const Vec& x,
                                 Tape& ws);

enum class LossKind { kL1, kL2, kProxMatch };

struct LossSpec {
  LossKind kind = LossKind::kL2;
  double gamma = 1.0;  // used by kProxMatch only
  // The definitional normalizer (pi gamma^2)^(-n/2) is constant in the
  // parameters, and for realistic (n, gamma) it under/overflows the gradient
  // until Adam's epsilon dominates. normalized=false drops it: same
  // minimizers, values bounded in [0, 1).
  bool normalized = true;
};

struct BatchPair {
  Vec y;  // corrupted input fed to the prox
  Vec x;  // clean target
};

struct LossGradResult {
  double mean_loss = 0.0;
  ParamSet grads;
};

// d/d(theta) of the mean batch loss, where the loss consumes the gradient
// map x -> grad psi(x). Realized by unrolling the reverse pass of psi into
// tape primitives and running one numeric reverse pass over the result.
LossGradResult loss_parameter_gradient(const ProgramBuilder& program,
                                       const ParamSet& params,
                                       const std::vector<BatchPair>& batch,
                                       const LossSpec& loss);

// Forward-only mean batch loss (used by finite-difference tests).
double loss_value(const ProgramBuilder& program, const ParamSet& params,
                  const std::vector<BatchPair>& batch, const LossSpec& loss);

struct FdReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
};

// Central differences of `fun` at `point` against `analytic`, entrywise
// relative error with denominator max(1, |analytic_i|).
FdReport finite_difference_check(const std::function<double(const Vec&)>& fun,
                                 const Vec& point, const Vec& analytic,
                                 double step);

}  // namespace aelpn
