#include "aelpn/diff_engine.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace aelpn {

namespace {

// Four-accumulator dot product: fixed summation order (deterministic) with
// enough instruction-level parallelism to keep one core busy.
double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return ((s0 + s1) + (s2 + s3));
}

void axpy_raw(double* dst, double c, const double* src, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) dst[i] += c * src[i];
}

double softplus_stable(double t, double beta) {
  const double bt = beta * t;
  if (bt > 0.0) return t + std::log1p(std::exp(-bt)) / beta;
  return std::log1p(std::exp(bt)) / beta;
}

double logistic_stable(double t, double beta) {
  const double bt = beta * t;
  if (bt >= 0.0) return 1.0 / (1.0 + std::exp(-bt));
  const double e = std::exp(bt);
  return e / (1.0 + e);
}

}  // namespace

double Tape::scalar(int id) const {
  const Node& n = node(id);
  if (n.val.size() != 1) throw std::logic_error("Tape::scalar: not a scalar");
  return n.val[0];
}

const Tensor& Tape::slot(int id) const {
  if (params_ == nullptr) throw std::logic_error("Tape: no parameters bound");
  return params_->slots.at(static_cast<std::size_t>(id));
}

Node& Tape::push(Op op) {
  if (used_ == pool_.size()) pool_.emplace_back();
  Node& n = pool_[used_++];
  n.op = op;
  n.a = n.b = n.w = n.bias = -1;
  n.c0 = n.c1 = 0.0;
  n.needs_x = false;
  n.sel.clear();
  n.val.clear();
  n.adj.clear();
  return n;
}

int Tape::input(const Vec& x) {
  Node& n = push(Op::kInput);
  n.needs_x = true;
  n.val = x;
  return static_cast<int>(used_) - 1;
}

int Tape::constant(const Vec& v) {
  Node& n = push(Op::kConst);
  n.val = v;
  return static_cast<int>(used_) - 1;
}

int Tape::constant(double v) {
  Node& n = push(Op::kConst);
  n.val.assign(1, v);
  return static_cast<int>(used_) - 1;
}

int Tape::affine(int wslot, int bslot, int v) {
  const Tensor& W = slot(wslot);
  const Node& in = node(v);
  if (W.cols != in.val.size()) {
    throw std::invalid_argument("affine: shape mismatch");
  }
  Node& n = push(Op::kAffineMap);
  n.a = v;
  n.w = wslot;
  n.bias = bslot;
  n.needs_x = node(v).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

int Tape::affine_t(int wslot, int v) {
  const Tensor& W = slot(wslot);
  if (W.rows != node(v).val.size()) {
    throw std::invalid_argument("affine_t: shape mismatch");
  }
  Node& n = push(Op::kAffineMapT);
  n.a = v;
  n.w = wslot;
  n.needs_x = node(v).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

int Tape::pairwise_max(int v) {
  if (node(v).val.size() % 2 != 0) {
    throw std::invalid_argument("pairwise_max: even length required");
  }
  Node& n = push(Op::kPairwiseMax);
  n.a = v;
  n.needs_x = node(v).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

int Tape::sortpool(int v) {
  if (node(v).val.size() % 2 != 0) {
    throw std::invalid_argument("sortpool: even length required");
  }
  Node& n = push(Op::kSortPool);
  n.a = v;
  n.needs_x = node(v).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

#define AELPN_UNARY(NAME, OPK)                    \
  int Tape::NAME(int v) {                         \
    Node& n = push(Op::OPK);                      \
    n.a = v;                                      \
    n.needs_x = node(v).needs_x;                  \
    eval(n);                                      \
    return static_cast<int>(used_) - 1;           \
  }

AELPN_UNARY(rectifier, kRectifier)
AELPN_UNARY(pos_mask, kPosMask)
AELPN_UNARY(rectify_square, kRectifySquare)
AELPN_UNARY(square, kSquare)
AELPN_UNARY(squared_norm, kSquaredNorm)
AELPN_UNARY(mean_project, kMeanProject)
AELPN_UNARY(center, kCenter)
AELPN_UNARY(l1_mean, kL1Mean)
AELPN_UNARY(l2_half_mean, kL2HalfMean)
#undef AELPN_UNARY

int Tape::softplus(int v, double beta) {
  Node& n = push(Op::kSoftplus);
  n.a = v;
  n.c0 = beta;
  n.needs_x = node(v).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

int Tape::logistic(int v, double beta) {
  Node& n = push(Op::kLogistic);
  n.a = v;
  n.c0 = beta;
  n.needs_x = node(v).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

int Tape::inner_product(int u, int v) {
  if (node(u).val.size() != node(v).val.size()) {
    throw std::invalid_argument("inner_product: length mismatch");
  }
  Node& n = push(Op::kInnerProduct);
  n.a = u;
  n.b = v;
  n.needs_x = node(u).needs_x || node(v).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

int Tape::combine(double c0, int u, double c1, int v) {
  if (v >= 0 && node(u).val.size() != node(v).val.size()) {
    throw std::invalid_argument("combine: length mismatch");
  }
  Node& n = push(Op::kScalarCombine);
  n.a = u;
  n.b = v;
  n.c0 = c0;
  n.c1 = c1;
  n.needs_x = node(u).needs_x || (v >= 0 && node(v).needs_x);
  eval(n);
  return static_cast<int>(used_) - 1;
}

int Tape::hadamard(int u, int v) {
  if (node(u).val.size() != node(v).val.size()) {
    throw std::invalid_argument("hadamard: length mismatch");
  }
  Node& n = push(Op::kHadamard);
  n.a = u;
  n.b = v;
  n.needs_x = node(u).needs_x || node(v).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

int Tape::pair_route(int g, int src) {
  if (node(src).op != Op::kPairwiseMax) {
    throw std::invalid_argument("pair_route: source is not a pairwise_max");
  }
  Node& n = push(Op::kPairRoute);
  n.a = g;
  n.b = src;
  n.needs_x = node(g).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

int Tape::sort_route(int g, int src) {
  if (node(src).op != Op::kSortPool) {
    throw std::invalid_argument("sort_route: source is not a sortpool");
  }
  Node& n = push(Op::kSortRoute);
  n.a = g;
  n.b = src;
  n.needs_x = node(g).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

int Tape::scale_by_scalar(int s, int v, double c0) {
  if (node(s).val.size() != 1) {
    throw std::invalid_argument("scale_by_scalar: s must be length 1");
  }
  Node& n = push(Op::kScaleByScalar);
  n.a = s;
  n.b = v;
  n.c0 = c0;
  n.needs_x = node(s).needs_x || node(v).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

int Tape::prox_match(int s, double gamma, std::size_t n_dim) {
  if (!(gamma > 0.0)) throw std::invalid_argument("prox_match: gamma <= 0");
  Node& n = push(Op::kProxMatch);
  n.a = s;
  n.c0 = 1.0 / (gamma * gamma);
  // log-space normalizer: (n/2) * log(pi * gamma^2)
  n.c1 = 0.5 * static_cast<double>(n_dim) *
         std::log(std::numbers::pi * gamma * gamma);
  n.needs_x = node(s).needs_x;
  eval(n);
  return static_cast<int>(used_) - 1;
}

void Tape::eval(Node& n) {
  static const Vec kEmpty;
  const Vec& a = (n.a >= 0) ? pool_[n.a].val : kEmpty;
  switch (n.op) {
    case Op::kInput:
    case Op::kConst:
      break;
    case Op::kAffineMap: {
      const Tensor& W = slot(n.w);
      n.val.assign(W.rows, 0.0);
      for (std::size_t r = 0; r < W.rows; ++r) {
        n.val[r] = dot(&W.data[r * W.cols], a.data(), W.cols);
      }
      if (n.bias >= 0) {
        const Tensor& b = slot(n.bias);
        for (std::size_t r = 0; r < W.rows; ++r) n.val[r] += b.data[r];
      }
      break;
    }
    case Op::kAffineMapT: {
      const Tensor& W = slot(n.w);
      n.val.assign(W.cols, 0.0);
      for (std::size_t r = 0; r < W.rows; ++r) {
        axpy_raw(n.val.data(), a[r], &W.data[r * W.cols], W.cols);
      }
      break;
    }
    case Op::kPairwiseMax: {
      const std::size_t half = a.size() / 2;
      n.val.assign(half, 0.0);
      n.sel.assign(half, 0);
      for (std::size_t j = 0; j < half; ++j) {
        // strict > : ties route to the lower index
        const std::uint8_t s = (a[2 * j + 1] > a[2 * j]) ? 1 : 0;
        n.sel[j] = s;
        n.val[j] = a[2 * j + s];
      }
      break;
    }
    case Op::kSortPool: {
      const std::size_t half = a.size() / 2;
      n.val.assign(a.size(), 0.0);
      n.sel.assign(half, 0);
      for (std::size_t j = 0; j < half; ++j) {
        const std::uint8_t s = (a[2 * j + 1] > a[2 * j]) ? 1 : 0;
        n.sel[j] = s;
        n.val[2 * j] = a[2 * j + s];
        n.val[2 * j + 1] = a[2 * j + 1 - s];
      }
      break;
    }
    case Op::kSoftplus: {
      n.val.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        n.val[i] = softplus_stable(a[i], n.c0);
      }
      break;
    }
    case Op::kLogistic: {
      n.val.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        n.val[i] = logistic_stable(a[i], n.c0);
      }
      break;
    }
    case Op::kRectifier: {
      n.val.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        n.val[i] = a[i] > 0.0 ? a[i] : 0.0;
      }
      break;
    }
    case Op::kPosMask: {
      n.val.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        n.val[i] = a[i] > 0.0 ? 1.0 : 0.0;
      }
      break;
    }
    case Op::kRectifySquare: {
      n.val.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        const double t = a[i] > 0.0 ? a[i] : 0.0;
        n.val[i] = t * t;
      }
      break;
    }
    case Op::kSquare: {
      n.val.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) n.val[i] = a[i] * a[i];
      break;
    }
    case Op::kSquaredNorm: {
      n.val.assign(1, dot(a.data(), a.data(), a.size()));
      break;
    }
    case Op::kInnerProduct: {
      const Vec& b = pool_[n.b].val;
      n.val.assign(1, dot(a.data(), b.data(), a.size()));
      break;
    }
    case Op::kScalarCombine: {
      n.val.resize(a.size());
      if (n.b >= 0) {
        const Vec& b = pool_[n.b].val;
        for (std::size_t i = 0; i < a.size(); ++i) {
          n.val[i] = n.c0 * a[i] + n.c1 * b[i];
        }
      } else {
        for (std::size_t i = 0; i < a.size(); ++i) n.val[i] = n.c0 * a[i];
      }
      break;
    }
    case Op::kHadamard: {
      const Vec& b = pool_[n.b].val;
      n.val.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) n.val[i] = a[i] * b[i];
      break;
    }
    case Op::kMeanProject: {
      double s = 0.0;
      for (double x : a) s += x;
      n.val.assign(a.size(), s / static_cast<double>(a.size()));
      break;
    }
    case Op::kCenter: {
      double s = 0.0;
      for (double x : a) s += x;
      const double m = s / static_cast<double>(a.size());
      n.val.resize(a.size());
      for (std::size_t i = 0; i < a.size(); ++i) n.val[i] = a[i] - m;
      break;
    }
    case Op::kPairRoute: {
      const Node& src = pool_[n.b];
      n.val.assign(2 * a.size(), 0.0);
      for (std::size_t j = 0; j < a.size(); ++j) {
        n.val[2 * j + src.sel[j]] = a[j];
      }
      break;
    }
    case Op::kSortRoute: {
      const Node& src = pool_[n.b];
      n.val.assign(a.size(), 0.0);
      for (std::size_t j = 0; j < a.size() / 2; ++j) {
        const std::uint8_t s = src.sel[j];
        n.val[2 * j + s] = a[2 * j];
        n.val[2 * j + 1 - s] = a[2 * j + 1];
      }
      break;
    }
    case Op::kScaleByScalar: {
      const Vec& b = pool_[n.b].val;
      const double s = n.c0 * a[0];
      n.val.resize(b.size());
      for (std::size_t i = 0; i < b.size(); ++i) n.val[i] = s * b[i];
      break;
    }
    case Op::kL1Mean: {
      double s = 0.0;
      for (double r : a) s += std::fabs(r);
      n.val.assign(1, s / static_cast<double>(a.size()));
      break;
    }
    case Op::kL2HalfMean: {
      n.val.assign(1, 0.5 * dot(a.data(), a.data(), a.size()) /
                          static_cast<double>(a.size()));
      break;
    }
    case Op::kProxMatch: {
      const double arg = -a[0] * n.c0 - n.c1;
      n.val.assign(1, -std::expm1(arg));
      break;
    }
  }
}

int Tape::gradient_wrt(int target, int x_input) {
  if (node(target).val.size() != 1) {
    throw std::invalid_argument("gradient_wrt: target must be scalar");
  }
  const std::size_t n_dim = node(x_input).val.size();
  const int limit = target;
  std::vector<int> adj_of(static_cast<std::size_t>(limit) + 1, -1);
  adj_of[target] = constant(1.0);

  auto deposit = [&](int dst, int contribution) {
    if (!node(dst).needs_x) return;
    adj_of[dst] = (adj_of[dst] < 0)
                      ? contribution
                      : combine(1.0, adj_of[dst], 1.0, contribution);
  };

  for (int i = limit; i >= 0; --i) {
    const int g = adj_of[i];
    if (g < 0) continue;
    // Copy the fields used below; push() may reallocate the pool.
    const Op op = node(i).op;
    const int ia = node(i).a;
    const int ib = node(i).b;
    const int iw = node(i).w;
    const double c0 = node(i).c0;
    const double c1 = node(i).c1;
    switch (op) {
      case Op::kInput:
      case Op::kConst:
        break;
      case Op::kAffineMap:
        deposit(ia, affine_t(iw, g));
        break;
      case Op::kPairwiseMax:
        deposit(ia, pair_route(g, i));
        break;
      case Op::kSortPool:
        deposit(ia, sort_route(g, i));
        break;
      case Op::kSoftplus:
        deposit(ia, hadamard(g, logistic(ia, c0)));
        break;
      case Op::kRectifier:
        deposit(ia, hadamard(g, pos_mask(ia)));
        break;
      case Op::kRectifySquare:
        deposit(ia, hadamard(g, combine(2.0, rectifier(ia))));
        break;
      case Op::kSquare:
        deposit(ia, hadamard(g, combine(2.0, ia)));
        break;
      case Op::kSquaredNorm:
        deposit(ia, scale_by_scalar(g, ia, 2.0));
        break;
      case Op::kInnerProduct:
        if (node(ia).needs_x) deposit(ia, scale_by_scalar(g, ib));
        if (node(ib).needs_x) deposit(ib, scale_by_scalar(g, ia));
        break;
      case Op::kScalarCombine:
        if (node(ia).needs_x) deposit(ia, combine(c0, g));
        if (ib >= 0 && node(ib).needs_x) deposit(ib, combine(c1, g));
        break;
      case Op::kHadamard:
        if (node(ia).needs_x) deposit(ia, hadamard(g, ib));
        if (node(ib).needs_x) deposit(ib, hadamard(g, ia));
        break;
      case Op::kMeanProject:
        deposit(ia, mean_project(g));
        break;
      case Op::kCenter:
        deposit(ia, center(g));
        break;
      default:
        throw std::logic_error(
            "gradient_wrt: op not supported in forward programs");
    }
  }
  if (adj_of[x_input] < 0) return constant(Vec(n_dim, 0.0));
  return adj_of[x_input];
}

void Tape::backward(int target, ParamSet* param_grads) {
  if (node(target).val.size() != 1) {
    throw std::invalid_argument("backward: target must be scalar");
  }
  for (std::size_t i = 0; i <= static_cast<std::size_t>(target); ++i) {
    pool_[i].adj.assign(pool_[i].val.size(), 0.0);
  }
  pool_[target].adj[0] = 1.0;

  for (int i = target; i >= 0; --i) {
    Node& n = pool_[i];
    const Vec& g = n.adj;
    bool live = false;
    for (double gi : g) {
      if (gi != 0.0) {
        live = true;
        break;
      }
    }
    if (!live) continue;
    Vec& aj = (n.a >= 0) ? pool_[n.a].adj : n.adj;
    const Vec& av = (n.a >= 0) ? pool_[n.a].val : n.val;
    switch (n.op) {
      case Op::kInput:
      case Op::kConst:
        break;
      case Op::kAffineMap: {
        const Tensor& W = slot(n.w);
        for (std::size_t r = 0; r < W.rows; ++r) {
          if (g[r] != 0.0) axpy_raw(aj.data(), g[r], &W.data[r * W.cols], W.cols);
        }
        if (param_grads != nullptr) {
          Tensor& Wg = param_grads->slots[n.w];
          for (std::size_t r = 0; r < W.rows; ++r) {
            if (g[r] != 0.0) axpy_raw(&Wg.data[r * W.cols], g[r], av.data(), W.cols);
          }
          if (n.bias >= 0) {
            Tensor& bg = param_grads->slots[n.bias];
            for (std::size_t r = 0; r < W.rows; ++r) bg.data[r] += g[r];
          }
        }
        break;
      }
      case Op::kAffineMapT: {
        const Tensor& W = slot(n.w);
        for (std::size_t r = 0; r < W.rows; ++r) {
          aj[r] += dot(&W.data[r * W.cols], g.data(), W.cols);
        }
        if (param_grads != nullptr) {
          Tensor& Wg = param_grads->slots[n.w];
          for (std::size_t r = 0; r < W.rows; ++r) {
            if (av[r] != 0.0) axpy_raw(&Wg.data[r * W.cols], av[r], g.data(), W.cols);
          }
        }
        break;
      }
      case Op::kPairwiseMax:
        for (std::size_t j = 0; j < g.size(); ++j) aj[2 * j + n.sel[j]] += g[j];
        break;
      case Op::kSortPool:
        for (std::size_t j = 0; j < g.size() / 2; ++j) {
          const std::uint8_t s = n.sel[j];
          aj[2 * j + s] += g[2 * j];
          aj[2 * j + 1 - s] += g[2 * j + 1];
        }
        break;
      case Op::kSoftplus:
        for (std::size_t k = 0; k < g.size(); ++k) {
          aj[k] += g[k] * logistic_stable(av[k], n.c0);
        }
        break;
      case Op::kLogistic:
        for (std::size_t k = 0; k < g.size(); ++k) {
          const double y = n.val[k];
          aj[k] += g[k] * n.c0 * y * (1.0 - y);
        }
        break;
      case Op::kRectifier:
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (av[k] > 0.0) aj[k] += g[k];
        }
        break;
      case Op::kPosMask:
        break;  // piecewise constant
      case Op::kRectifySquare:
        for (std::size_t k = 0; k < g.size(); ++k) {
          if (av[k] > 0.0) aj[k] += 2.0 * av[k] * g[k];
        }
        break;
      case Op::kSquare:
        for (std::size_t k = 0; k < g.size(); ++k) aj[k] += 2.0 * av[k] * g[k];
        break;
      case Op::kSquaredNorm:
        axpy_raw(aj.data(), 2.0 * g[0], av.data(), av.size());
        break;
      case Op::kInnerProduct: {
        Vec& bj = pool_[n.b].adj;
        const Vec& bv = pool_[n.b].val;
        axpy_raw(aj.data(), g[0], bv.data(), bv.size());
        axpy_raw(bj.data(), g[0], av.data(), av.size());
        break;
      }
      case Op::kScalarCombine:
        axpy_raw(aj.data(), n.c0, g.data(), g.size());
        if (n.b >= 0) axpy_raw(pool_[n.b].adj.data(), n.c1, g.data(), g.size());
        break;
      case Op::kHadamard: {
        Vec& bj = pool_[n.b].adj;
        const Vec& bv = pool_[n.b].val;
        for (std::size_t k = 0; k < g.size(); ++k) {
          aj[k] += g[k] * bv[k];
          bj[k] += g[k] * av[k];
        }
        break;
      }
      case Op::kMeanProject: {
        double s = 0.0;
        for (double gi : g) s += gi;
        const double m = s / static_cast<double>(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) aj[k] += m;
        break;
      }
      case Op::kCenter: {
        double s = 0.0;
        for (double gi : g) s += gi;
        const double m = s / static_cast<double>(g.size());
        for (std::size_t k = 0; k < g.size(); ++k) aj[k] += g[k] - m;
        break;
      }
      case Op::kPairRoute: {
        const Node& src = pool_[n.b];
        for (std::size_t j = 0; j < aj.size(); ++j) {
          aj[j] += g[2 * j + src.sel[j]];
        }
        break;
      }
      case Op::kSortRoute: {
        const Node& src = pool_[n.b];
        for (std::size_t j = 0; j < g.size() / 2; ++j) {
          const std::uint8_t s = src.sel[j];
          aj[2 * j] += g[2 * j + s];
          aj[2 * j + 1] += g[2 * j + 1 - s];
        }
        break;
      }
      case Op::kScaleByScalar: {
        Vec& bj = pool_[n.b].adj;
        const Vec& bv = pool_[n.b].val;
        aj[0] += n.c0 * dot(g.data(), bv.data(), bv.size());
        axpy_raw(bj.data(), n.c0 * av[0], g.data(), g.size());
        break;
      }
      case Op::kL1Mean: {
        const double w = g[0] / static_cast<double>(av.size());
        for (std::size_t k = 0; k < av.size(); ++k) {
          if (av[k] > 0.0) {
            aj[k] += w;
          } else if (av[k] < 0.0) {
            aj[k] -= w;
          }
        }
        break;
      }
      case Op::kL2HalfMean:
        axpy_raw(aj.data(), g[0] / static_cast<double>(av.size()), av.data(),
                 av.size());
        break;
      case Op::kProxMatch: {
        // d/ds of -expm1(-s*c0 - c1) = c0 * exp(arg) = c0 * (1 - value)
        aj[0] += g[0] * n.c0 * (1.0 - n.val[0]);
        break;
      }
    }
  }
}

ParamSet zeros_like(const ParamSet& p) {
  ParamSet z;
  z.slots.reserve(p.slots.size());
  for (const auto& t : p.slots) z.slots.push_back(Tensor::matrix(t.rows, t.cols));
  return z;
}

void axpy(ParamSet& dst, double c, const ParamSet& src) {
  for (std::size_t s = 0; s < dst.slots.size(); ++s) {
    axpy_raw(dst.slots[s].data.data(), c, src.slots[s].data.data(),
             src.slots[s].data.size());
  }
}

void scale(ParamSet& p, double c) {
  for (auto& t : p.slots) {
    for (double& x : t.data) x *= c;
  }
}

ValueGrad potential_and_gradient(const ProgramBuilder& program,
                                 const ParamSet& params, const Vec& x,
                                 Tape& ws) {
  ws.bind(&params);
  ws.clear();
  const int xid = ws.input(x);
  const int top = program(ws, xid);
  ws.backward(top);
  return ValueGrad{ws.scalar(top), ws.node(xid).adj};
}

ValueGrad potential_and_gradient(const ProgramBuilder& program,
                                 const ParamSet& params, const Vec& x) {
  Tape ws;
  return potential_and_gradient(program, params, x, ws);
}

namespace {

int build_loss(Tape& t, int prox_out, const Vec& clean, const LossSpec& loss) {
  const int r = t.combine(1.0, prox_out, -1.0, t.constant(clean));
  switch (loss.kind) {
    case LossKind::kL1:
      return t.l1_mean(r);
    case LossKind::kL2:
      return t.l2_half_mean(r);
    case LossKind::kProxMatch:
      // n = 0 zeroes the log-space normalizer term exactly
      return t.prox_match(t.squared_norm(r), loss.gamma,
                          loss.normalized ? clean.size() : 0);
  }
  throw std::invalid_argument("unknown loss");
}

}  // namespace

LossGradResult loss_parameter_gradient(const ProgramBuilder& program,
                                       const ParamSet& params,
                                       const std::vector<BatchPair>& batch,
                                       const LossSpec& loss) {
  if (batch.empty()) {
    throw std::invalid_argument("loss_parameter_gradient: empty batch");
  }
  LossGradResult out;
  out.grads = zeros_like(params);
  Tape t(&params);
  for (const BatchPair& ex : batch) {
    t.clear();
    const int xid = t.input(ex.y);
    const int top = program(t, xid);
    const int fx = t.gradient_wrt(top, xid);
    const int l = build_loss(t, fx, ex.x, loss);
    out.mean_loss += t.scalar(l);
    t.backward(l, &out.grads);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  out.mean_loss *= inv;
  scale(out.grads, inv);
  return out;
}

double loss_value(const ProgramBuilder& program, const ParamSet& params,
                  const std::vector<BatchPair>& batch, const LossSpec& loss) {
  if (batch.empty()) throw std::invalid_argument("loss_value: empty batch");
  double acc = 0.0;
  Tape t(&params);
  for (const BatchPair& ex : batch) {
    t.clear();
    const int xid = t.input(ex.y);
    const int top = program(t, xid);
    const int fx = t.gradient_wrt(top, xid);
    acc += t.scalar(build_loss(t, fx, ex.x, loss));
  }
  return acc / static_cast<double>(batch.size());
}

FdReport finite_difference_check(const std::function<double(const Vec&)>& fun,
                                 const Vec& point, const Vec& analytic,
                                 double step) {
  if (!(step > 0.0)) throw std::invalid_argument("step must be > 0");
  if (point.size() != analytic.size()) {
    throw std::invalid_argument("finite_difference_check: length mismatch");
  }
  FdReport rep;
  Vec p = point;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double saved = p[i];
    p[i] = saved + step;
    const double fp = fun(p);
    p[i] = saved - step;
    const double fm = fun(p);
    p[i] = saved;
    const double fd = (fp - fm) / (2.0 * step);
    const double denom = std::max(1.0, std::fabs(analytic[i]));
    const double rel = std::fabs(fd - analytic[i]) / denom;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = i;
    }
  }
  return rep;
}

}  // namespace aelpn
